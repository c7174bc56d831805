//! Resolvent of A = B ⊗ I + I ⊗ H on the strip by the contour sum formula
//!   (A - mu)^{-1} = (1/2πi) ∮_{∂P} (H + z)^{-1} (B - mu - z)^{-1} dz,
//! P a sector-plus-disk around the spectrum of -H, plus an η-mode oracle.

use crate::contour::{ContourSpec, SectorContour};
use crate::error::{CuspError, Result};
use crate::grid::{GridField, StripGrid};
use crate::quad::gauss_legendre;
use crate::resolvent::{
    eigenpairs, fit_slope, operator_norm, BoundReport, BoundRow, EigenPair, RobinOp, SpectralParam, H_OP,
};
use crate::C64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Minimum admissible distance from contour to a sampled singularity.
pub const COLLISION_MARGIN: f64 = 1e-6;

/// Which factor is applied first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorOrder {
    HFirst,
    BFirst,
}

fn k1_sq() -> f64 {
    let k = H_OP.eigen_roots(1).expect("first root");
    k[0] * k[0]
}

/// Default contour for real mu = lambda > 0: vertex 0, r = min(k1²/2, lambda/2).
pub fn default_contour(lambda: f64, spec: &ContourSpec) -> Result<SectorContour> {
    let mut s = *spec;
    s.r = (0.5 * k1_sq()).min(0.5 * lambda);
    SectorContour::right(&s, 0.0)
}

/// Rejects contours that do not separate {k_n²} from -mu - [0, inf).
pub fn check_contour(c: &SectorContour, mu: C64) -> Result<()> {
    let ks = H_OP.eigen_roots(60)?;
    for k in &ks {
        let z = C64::new(k * k, 0.0);
        if z.re > c.big_r {
            break;
        }
        let (node, d) = c.distance_to(z);
        if d < COLLISION_MARGIN || !c.contains(z) {
            return Err(CuspError::ContourCollision { node, what: format!("eigenvalue {} of -H", k * k) });
        }
    }
    let tip = -mu;
    if let Some(node) = c.hits_left_ray(tip.re, tip.im, COLLISION_MARGIN) {
        return Err(CuspError::ContourCollision { node, what: format!("half-line {tip} - [0, inf)") });
    }
    if c.contains(tip) {
        let (node, _) = c.distance_to(tip);
        return Err(CuspError::ContourCollision { node, what: format!("point {tip} enclosed") });
    }
    Ok(())
}

/// Right-opening contour separating {k_n²} from -mu - [0, inf): the vertex
/// maximizes the angle under which the half-line is seen, the opening angle
/// bisects that gap, and ray panels are refined where the contour passes
/// the tip -mu and the first eigenvalue.
pub fn auto_contour(mu: C64, spec: &ContourSpec) -> Result<SectorContour> {
    let k1 = k1_sq();
    let tip = -mu;
    let dist_to_line = |c: f64| -> f64 {
        if c <= tip.re {
            tip.im.abs()
        } else {
            (C64::new(c, 0.0) - tip).norm()
        }
    };
    // smallest angle, seen from the vertex, of a point of the half-line
    let gap = |c: f64| -> f64 {
        if tip.im == 0.0 {
            if tip.re < c {
                PI
            } else {
                0.0
            }
        } else {
            (tip - c).arg().abs()
        }
    };
    let lo = (tip.re - 2.0 * tip.im.abs()).min(k1 - 1.0).max(k1 - 10.0 - tip.norm().min(1e3));
    let cands: Vec<(f64, f64, f64)> = (1..64)
        .map(|i| lo + (k1 - lo) * i as f64 / 64.0)
        .map(|c| (c, gap(c).min(5.0 * PI / 6.0), 0.5 * dist_to_line(c).min(k1 - c)))
        .filter(|&(_, g, r)| g > 1e-3 && r > 0.0)
        .collect();
    let best = cands.iter().fold(0.0f64, |m, c| m.max(c.1));
    let &(c, g, r) = cands
        .iter()
        .filter(|x| x.1 >= best - 0.1)
        .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .ok_or_else(|| CuspError::ContourCollision { node: 0, what: format!("no separating sector for mu = {mu}") })?;
    let delta = 0.5 * g;
    let dtip = (tip - c).norm().max(r);
    let big_r = spec.big_r.max(1e5 * dtip);
    let u_max = (big_r / r).ln();
    let feats = [((k1 - c) / r).ln(), (dtip / r).ln()];
    let rule = crate::contour::adaptive_ray_rule(u_max, &feats, spec_h(delta));
    let s = ContourSpec { delta, r, big_r, n_ray: rule.len(), n_arc: spec.n_arc };
    SectorContour::with_rule(&s, c, 0.0, &rule)
}

/// Minimal ray panel length (in ln-radius) for an angular margin delta.
fn spec_h(delta: f64) -> f64 {
    AUTO_PANEL_SCALE * delta
}

const AUTO_PANEL_SCALE: f64 = 2.4;

/// Precomputed per-node 1D plans for one mu and contour.
pub struct SumPlan {
    pub grid: Arc<StripGrid>,
    pub contour: SectorContour,
    pub mu: C64,
    h: Vec<crate::resolvent::ResolventPlan>,
    b: Vec<crate::resolvent::ResolventPlan>,
    /// (1/2πi) Σ w_k (z_k - c)^{-2}
    tail: C64,
}

impl SumPlan {
    pub fn new(grid: &Arc<StripGrid>, mu: C64, contour: SectorContour, xi_op: &RobinOp) -> Result<Self> {
        check_contour(&contour, mu)?;
        if let Some(l) = xi_op.length {
            if (l - grid.xi_max()).abs() > 1e-12 * l {
                return Err(CuspError::Invalid("xi operator length must equal xi_max".into()));
            }
        }
        let mut h = Vec::with_capacity(contour.len());
        let mut b = Vec::with_capacity(contour.len());
        for &z in &contour.nodes {
            h.push(H_OP.plan_q(&grid.eta, (-z).sqrt())?);
            b.push(xi_op.plan_q(&grid.xi, (mu + z).sqrt())?);
        }
        let cc = C64::new(contour.center, 0.0);
        let tail = contour.integrate(|z| 1.0 / ((z - cc) * (z - cc)));
        Ok(SumPlan { grid: grid.clone(), contour, mu, h, b, tail })
    }

    pub fn apply_ordered(&self, f: &GridField, order: FactorOrder) -> Result<GridField> {
        if !Arc::ptr_eq(&f.grid, &self.grid) && *f.grid != *self.grid {
            return Err(CuspError::GridMismatch);
        }
        f.check_finite()?;
        let (nx, ne) = (self.grid.n_xi(), self.grid.n_eta());
        let mut acc = vec![C64::default(); f.values.len()];
        let mut t1 = vec![C64::default(); f.values.len()];
        let mut t2 = vec![C64::default(); f.values.len()];
        let scale = 1.0 / (2.0 * PI * C64::i());
        for k in 0..self.contour.len() {
            match order {
                FactorOrder::HFirst => {
                    self.h[k].apply_axis_into(&f.values, &mut t1, nx, ne, 1);
                    self.b[k].apply_axis_into(&t1, &mut t2, nx, ne, 0);
                }
                FactorOrder::BFirst => {
                    self.b[k].apply_axis_into(&f.values, &mut t1, nx, ne, 0);
                    self.h[k].apply_axis_into(&t1, &mut t2, nx, ne, 1);
                }
            }
            let z = self.contour.nodes[k];
            let zc = z - self.contour.center;
            let w = self.contour.weights[k] * scale;
            let wt = w / (zc * zc);
            for ((a, t), fv) in acc.iter_mut().zip(&t2).zip(&f.values) {
                *a += w * t + wt * fv;
            }
        }
        let out = GridField { grid: self.grid.clone(), values: acc };
        out.check_finite()?;
        Ok(out)
    }

    pub fn apply(&self, f: &GridField) -> Result<GridField> {
        self.apply_ordered(f, FactorOrder::HFirst)
    }

    /// Discrete value of the subtracted integral (ideally 0).
    pub fn tail_defect(&self) -> C64 {
        self.tail
    }
}

/// (A - mu)^{-1} f by the sum formula on the given contour.
pub fn resolvent_a(mu: C64, f: &GridField, contour: &SectorContour, xi_op: &RobinOp) -> Result<GridField> {
    SumPlan::new(&f.grid, mu, contour.clone(), xi_op)?.apply(f)
}

/// Result of the η-mode expansion oracle.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub field: GridField,
    /// relative L2 residual of f minus its truncated mode expansion
    pub truncation: f64,
    pub warnings: Vec<String>,
}

/// Mode coefficients c_n(ξ_i) = ∫ f(ξ_i, η) e_n(η) dη against the η interpolant.
pub fn mode_coefficients(f: &GridField, modes: &[EigenPair]) -> Vec<Vec<C64>> {
    let g = &f.grid;
    let (nx, ne) = (g.n_xi(), g.n_eta());
    // fine Gauss rule per η panel, interpolation weights precomputed
    let (gx, gw) = gauss_legendre(32);
    let kmax = modes.last().map_or(1.0, |e| e.k);
    let mut pts: Vec<(f64, f64, usize, Vec<f64>)> = Vec::new();
    for p in 0..g.eta.n_panels() {
        let (a, b) = (g.eta.breaks[p], g.eta.breaks[p + 1]);
        // about one oscillation per sub-interval
        let sub = ((kmax * (b - a) / 6.0).ceil() as usize).max(1);
        let h = (b - a) / sub as f64;
        for s in 0..sub {
            let a0 = a + h * s as f64;
            for (x, w) in gx.iter().zip(&gw) {
                let t = a0 + 0.5 * h * (x + 1.0);
                let (start, lw) = g.eta.interp_weights(t);
                pts.push((t, 0.5 * h * w, start, lw));
            }
        }
    }
    let basis: Vec<Vec<f64>> = modes.iter().map(|e| pts.iter().map(|p| e.eval(p.0) * p.1).collect()).collect();
    let mut out = vec![vec![C64::default(); nx]; modes.len()];
    let mut vals = vec![C64::default(); pts.len()];
    for i in 0..nx {
        let row = &f.values[i * ne..(i + 1) * ne];
        for (v, p) in vals.iter_mut().zip(&pts) {
            *v = p.3.iter().enumerate().map(|(j, l)| row[p.2 + j] * *l).sum();
        }
        for (n, bn) in basis.iter().enumerate() {
            out[n][i] = vals.iter().zip(bn).map(|(v, b)| v * *b).sum();
        }
    }
    out
}

/// (A - mu)^{-1} f = Σ_n (B - (mu + k_n²))^{-1} c_n ⊗ e_n.
pub fn resolvent_a_oracle(mu: C64, f: &GridField, n_modes: usize, xi_op: &RobinOp) -> Result<OracleResult> {
    let g = &f.grid;
    let modes = eigenpairs(&H_OP, n_modes)?;
    let coef = mode_coefficients(f, &modes);
    let ne = g.n_eta();
    let mut out = GridField::zeros(g);
    let mut recon = GridField::zeros(g);
    for (e, c) in modes.iter().zip(&coef) {
        let m = SpectralParam::new(mu + e.k * e.k)?;
        let u = xi_op.plan(&g.xi, &m)?.apply(c);
        let ev: Vec<f64> = g.eta.nodes.iter().map(|t| e.eval(*t)).collect();
        for i in 0..g.n_xi() {
            for j in 0..ne {
                out.values[i * ne + j] += u[i] * ev[j];
                recon.values[i * ne + j] += c[i] * ev[j];
            }
        }
    }
    let nf = f.lp_norm(2.0)?;
    let truncation = if nf > 0.0 { f.sub(&recon)?.lp_norm(2.0)? / nf } else { 0.0 };
    let mut warnings = Vec::new();
    if truncation > 1e-3 {
        warnings.push(format!("mode truncation residual {truncation:.3e} exceeds 1e-3"));
    }
    Ok(OracleResult { field: out, truncation, warnings })
}

/// Relative difference between resolvents computed on two contours.
pub fn contour_independence(
    mu: C64,
    f: &GridField,
    c1: &SectorContour,
    c2: &SectorContour,
    xi_op: &RobinOp,
) -> Result<f64> {
    let a = resolvent_a(mu, f, c1, xi_op)?;
    let b = resolvent_a(mu, f, c2, xi_op)?;
    Ok(a.sub(&b)?.lp_norm(2.0)? / a.lp_norm(2.0)?.max(f64::MIN_POSITIVE))
}

/// Relative difference between the two factor orders.
pub fn factor_order_defect(mu: C64, f: &GridField, contour: &SectorContour, xi_op: &RobinOp) -> Result<f64> {
    let plan = SumPlan::new(&f.grid, mu, contour.clone(), xi_op)?;
    let a = plan.apply_ordered(f, FactorOrder::HFirst)?;
    let b = plan.apply_ordered(f, FactorOrder::BFirst)?;
    Ok(a.sub(&b)?.lp_norm(2.0)? / a.lp_norm(2.0)?.max(f64::MIN_POSITIVE))
}

/// Separable probe fields on the strip.
pub fn strip_probes(grid: &Arc<StripGrid>) -> Vec<GridField> {
    let mut out = Vec::new();
    let modes = eigenpairs(&H_OP, 3).unwrap_or_default();
    for a in [0.5, 2.0] {
        for e in &modes {
            out.push(GridField::from_real(grid, |x, y| (-a * x).exp() * e.eval(y)));
        }
        out.push(GridField::from_real(grid, |x, y| (-a * x).exp() * (1.0 - y * y)));
    }
    out.push(GridField::from_real(grid, |x, y| (1.0 + x).recip() * (1.0 - y)));
    out
}

/// λ |(A - λ)^{-1}| over real λ with the fitted log-log slope.
pub fn verify_resolvent_a_bound(
    grid: &Arc<StripGrid>,
    lambdas: &[f64],
    spec: &ContourSpec,
    xi_op: &RobinOp,
    p: f64,
    tolerance: f64,
) -> Result<BoundReport> {
    let weights: Vec<f64> = (0..grid.len()).map(|k| grid.weight(k / grid.n_eta(), k % grid.n_eta())).collect();
    let probes: Vec<Vec<C64>> = strip_probes(grid).into_iter().map(|f| f.values).collect();
    let mut rows = Vec::new();
    for &lam in lambdas {
        if !(lam > 0.0) {
            return Err(CuspError::BranchCut(format!("lambda = {lam}")));
        }
        let mu = C64::new(lam, 0.0);
        let plan = SumPlan::new(grid, mu, default_contour(lam, spec)?, xi_op)?;
        let apply = |v: &[C64]| -> Vec<C64> {
            let f = GridField { grid: grid.clone(), values: v.to_vec() };
            plan.apply(&f).map(|u| u.values).unwrap_or_else(|_| vec![C64::new(f64::NAN, 0.0); v.len()])
        };
        // real λ: the weighted adjoint is the operator itself, so R^H = W R W^{-1}
        let adj = |v: &[C64]| -> Vec<C64> {
            let s: Vec<C64> = v.iter().zip(&weights).map(|(a, w)| a / *w).collect();
            apply(&s).iter().zip(&weights).map(|(a, w)| a * *w).collect()
        };
        let n = operator_norm(apply, Some(&adj), &weights, &probes, p, 12)?;
        if !n.is_finite() {
            return Err(CuspError::NonFinite(0));
        }
        rows.push(BoundRow { abs_mu: lam, arg_mu: 0.0, scaled_norm: lam * n });
    }
    Ok(BoundReport::from_rows("A", rows, tolerance))
}

/// Slope of log(λ ||R||) against log λ for an analytic curve, for comparison.
pub fn reference_slope(lambdas: &[f64], curve: impl Fn(f64) -> f64) -> f64 {
    let pts: Vec<(f64, f64)> = lambdas.iter().map(|&l| (l.ln(), curve(l).ln())).collect();
    fit_slope(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvent::B_OP;

    fn grid() -> Arc<StripGrid> {
        StripGrid::standard(30.0, 0.25, 2.0, 2, 9)
    }

    #[test]
    fn separable_mode_matches_closed_form() {
        let g = grid();
        let e = &eigenpairs(&H_OP, 1).unwrap()[0];
        let f = GridField::from_real(&g, |x, y| (-x).exp() * e.eval(y));
        let lam = 1.0;
        let u = resolvent_a(C64::new(lam, 0.0), &f, &default_contour(lam, &ContourSpec::default()).unwrap(), &B_OP)
            .unwrap();
        // (d² - m)^{-1} e^{-x} with Robin data: closed form via the kernel
        let m = lam + e.k * e.k;
        let q = m.sqrt();
        let exact = |x: f64| {
            // ∫ G(x,s) e^{-s} ds for the half-line Robin kernel
            let c = (q - 1.0) / (q + 1.0);
            let i1 = ((-x).exp() - (-q * x).exp()) / (q - 1.0);
            let i2 = (-x).exp() / (q + 1.0);
            let i3 = c * (-q * x).exp() / (q + 1.0);
            -(i1 + i2 + i3) / (2.0 * q)
        };
        let mut err = 0.0f64;
        for k in 0..g.len() {
            let (x, y) = g.node(k);
            err = err.max((u.values[k] - exact(x) * e.eval(y)).norm());
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn collision_detected() {
        let mut s = ContourSpec::default();
        s.r = 2.05;
        let c = SectorContour::right(&s, 0.0).unwrap();
        assert!(matches!(check_contour(&c, C64::new(1.0, 0.0)), Err(CuspError::ContourCollision { .. })));
    }
}
