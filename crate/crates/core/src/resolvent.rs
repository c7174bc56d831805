//! Robin–Dirichlet / Robin–decay second-derivative operators on a line:
//! Green kernels, resolvent application, eigenpairs and sector-bound checks.

use crate::error::{CuspError, Result};
use crate::grid::GridField;
use crate::panel::{ExpPlan, PanelLine};
use crate::C64;

/// Complex resolvent parameter with its principal square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParam {
    pub mu: C64,
    pub sqrt_mu: C64,
}

impl SpectralParam {
    pub fn new(mu: C64) -> Result<Self> {
        if !(mu.re.is_finite() && mu.im.is_finite()) || (mu.im == 0.0 && mu.re <= 0.0) {
            return Err(CuspError::BranchCut(format!("{mu}")));
        }
        Ok(SpectralParam { mu, sqrt_mu: mu.sqrt() })
    }

    pub fn real(mu: f64) -> Result<Self> {
        Self::new(C64::new(mu, 0.0))
    }

    pub fn polar(r: f64, arg: f64) -> Result<Self> {
        Self::new(C64::from_polar(r, arg))
    }
}

/// v'' on (0, len) with v'(0) = v(0) and v(len) = 0, or on (0, inf) with decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinOp {
    pub length: Option<f64>,
}

/// The operator on (0, 1).
pub const H_OP: RobinOp = RobinOp { length: Some(1.0) };
/// The operator on the half-line.
pub const B_OP: RobinOp = RobinOp { length: None };

impl RobinOp {
    pub fn finite(len: f64) -> Self {
        RobinOp { length: Some(len) }
    }

    /// Green kernel of (d² - q²)^{-1} for any root q with Re q >= 0.
    pub fn green_q(&self, q: C64, x: f64, s: f64) -> C64 {
        let c = (q - 1.0) / (q + 1.0);
        let e = |t: f64| (-q * t).exp();
        let mut g = e((x - s).abs()) + c * e(x + s);
        let mut den = 2.0 * q;
        if let Some(l) = self.length {
            g -= e(2.0 * l - x - s) + c * e(2.0 * l - (x - s).abs());
            den *= 1.0 + c * e(2.0 * l);
        }
        -g / den
    }

    pub fn green(&self, mu: &SpectralParam, x: f64, s: f64) -> Result<C64> {
        if x < 0.0 || s < 0.0 || self.length.is_some_and(|l| x > l || s > l) {
            return Err(CuspError::Domain(format!("({x}, {s}) outside the operator interval")));
        }
        self.guard(mu)?;
        Ok(self.green_q(mu.sqrt_mu, x, s))
    }

    /// First eigenvalue roots k_n of sin(kL) + k cos(kL) = 0 (eigenvalue -k^2).
    pub fn eigen_roots(&self, n: usize) -> Result<Vec<f64>> {
        let l = self.length.ok_or_else(|| CuspError::Invalid("half-line has no eigenvalues".into()))?;
        let g = |k: f64| (k * l).sin() + k * (k * l).cos();
        (1..=n)
            .map(|j| {
                let mut lo = (j as f64 - 0.5) * std::f64::consts::PI / l;
                let mut hi = j as f64 * std::f64::consts::PI / l;
                let (l0, h0) = (lo, hi);
                let glo = g(lo);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) * glo > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * hi {
                        return Ok(0.5 * (lo + hi));
                    }
                }
                if hi - lo < 1e-12 * hi {
                    Ok(0.5 * (lo + hi))
                } else {
                    Err(CuspError::RootFinder { lo: l0, hi: h0 })
                }
            })
            .collect()
    }

    /// Refuses mu within 1e-8 of -k_n^2 for the finite operator.
    pub fn guard(&self, mu: &SpectralParam) -> Result<()> {
        if self.length.is_some() && mu.mu.re < 0.0 {
            let kmax = (-mu.mu.re).sqrt() * self.length.unwrap() / std::f64::consts::PI + 2.0;
            for k in self.eigen_roots(kmax as usize + 1)? {
                let d = (mu.mu + k * k).norm();
                if d < 1e-8 {
                    return Err(CuspError::NearSpectrum { mu: format!("{}", mu.mu), eig: -k * k, dist: d });
                }
            }
        }
        Ok(())
    }

    /// Precomputed application plan on a panel line (root q, Re q >= 0).
    pub fn plan_q(&self, line: &PanelLine, q: C64) -> Result<ResolventPlan> {
        if let Some(l) = self.length {
            if (line.b() - l).abs() > 1e-12 * l || line.a() != 0.0 {
                return Err(CuspError::Invalid("line must span the operator interval".into()));
            }
        }
        if q.re < 0.0 || q.norm() == 0.0 {
            return Err(CuspError::BranchCut(format!("root {q}")));
        }
        let c = (q - 1.0) / (q + 1.0);
        let x = line.b();
        let den = match self.length {
            Some(_) => 2.0 * q * (1.0 + c * (-2.0 * q * x).exp()),
            None => 2.0 * q,
        };
        if den.norm() < 1e-14 * (1.0 + q.norm()) {
            return Err(CuspError::NearSpectrum { mu: format!("{}", q * q), eig: (q * q).re, dist: den.norm() });
        }
        Ok(ResolventPlan {
            exp: ExpPlan::new(line, q),
            q,
            c,
            x_end: x,
            finite: self.length.is_some(),
            den,
            ex: line.nodes.iter().map(|t| (-q * t).exp()).collect(),
            exr: line.nodes.iter().map(|t| (-q * (x - t)).exp()).collect(),
        })
    }

    pub fn plan(&self, line: &PanelLine, mu: &SpectralParam) -> Result<ResolventPlan> {
        self.guard(mu)?;
        self.plan_q(line, mu.sqrt_mu)
    }
}

/// Applies (d² - q²)^{-1} to samples by exact product integration of the
/// exponential kernel against the panel interpolant.
#[derive(Debug, Clone)]
pub struct ResolventPlan {
    exp: ExpPlan,
    pub q: C64,
    c: C64,
    x_end: f64,
    finite: bool,
    den: C64,
    ex: Vec<C64>,
    exr: Vec<C64>,
}

impl ResolventPlan {
    pub fn n(&self) -> usize {
        self.ex.len()
    }

    /// Strided in/out application; `l`, `r` are scratch buffers of length n.
    pub fn apply_strided(
        &self,
        v: &[C64],
        off: usize,
        stride: usize,
        out: &mut [C64],
        ooff: usize,
        ostride: usize,
        l: &mut [C64],
        r: &mut [C64],
    ) {
        let n = self.n();
        self.exp.sweeps(v, off, stride, l, r);
        let r0 = r[0];
        let lx = l[n - 1];
        let c = self.c;
        let e2x = self.ex[n - 1] * self.ex[n - 1];
        let scale = -1.0 / self.den;
        for i in 0..n {
            let mut g = l[i] + r[i] + c * self.ex[i] * r0;
            if self.finite {
                g -= self.exr[i] * lx;
                // c * e^{-q(2X - |x - s|)} part
                g -= c * (self.exr[i] * self.ex[n - 1] * r0 - e2x * r[i] + self.ex[i] * self.ex[n - 1] * lx - e2x * l[i]);
            }
            out[ooff + i * ostride] = g * scale;
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut out = vec![C64::default(); n];
        let mut l = vec![C64::default(); n];
        let mut r = vec![C64::default(); n];
        self.apply_strided(v, 0, 1, &mut out, 0, 1, &mut l, &mut r);
        out
    }

    /// Applies along axis 0 (xi) or 1 (eta) of a strip field.
    pub fn apply_axis(&self, f: &GridField, axis: usize) -> GridField {
        let mut out = GridField::zeros(&f.grid);
        self.apply_axis_into(&f.values, &mut out.values, f.grid.n_xi(), f.grid.n_eta(), axis);
        out
    }

    pub fn apply_axis_into(&self, v: &[C64], out: &mut [C64], n_xi: usize, n_eta: usize, axis: usize) {
        let n = self.n();
        let mut l = vec![C64::default(); n];
        let mut r = vec![C64::default(); n];
        if axis == 0 {
            assert_eq!(n, n_xi);
            for j in 0..n_eta {
                self.apply_strided(v, j, n_eta, out, j, n_eta, &mut l, &mut r);
            }
        } else {
            assert_eq!(n, n_eta);
            for i in 0..n_xi {
                self.apply_strided(v, i * n_eta, 1, out, i * n_eta, 1, &mut l, &mut r);
            }
        }
    }

    pub fn x_end(&self) -> f64 {
        self.x_end
    }
}

/// Output of a resolvent application with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub values: Vec<C64>,
    pub warnings: Vec<String>,
}

/// Kernel of the (0,1) operator.
pub fn green_h(mu: &SpectralParam, eta: f64, s: f64) -> Result<C64> {
    H_OP.green(mu, eta, s)
}

/// Kernel of the half-line operator.
pub fn green_b(mu: &SpectralParam, xi: f64, s: f64) -> Result<C64> {
    B_OP.green(mu, xi, s)
}

pub fn resolvent_h(mu: &SpectralParam, line: &PanelLine, v: &[C64]) -> Result<Vec<C64>> {
    Ok(H_OP.plan(line, mu)?.apply(v))
}

pub fn resolvent_b(mu: &SpectralParam, line: &PanelLine, v: &[C64]) -> Result<Applied> {
    let mut warnings = Vec::new();
    if mu.sqrt_mu.re * line.b() < 20.0 {
        warnings.push(format!(
            "tail truncation above tolerance: Re sqrt(mu) * xi_max = {:.3} < 20",
            mu.sqrt_mu.re * line.b()
        ));
    }
    Ok(Applied { values: B_OP.plan(line, mu)?.apply(v), warnings })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub n: usize,
    pub k: f64,
    pub eigenvalue: f64,
    /// L2 normalization factor multiplying sin(k (L - x))
    pub norm: f64,
    pub length: f64,
}

impl EigenPair {
    pub fn eval(&self, x: f64) -> f64 {
        self.norm * (self.k * (self.length - x)).sin()
    }
}

pub fn eigenpairs(op: &RobinOp, n_max: usize) -> Result<Vec<EigenPair>> {
    if n_max == 0 {
        return Err(CuspError::Invalid("n_max >= 1 required".into()));
    }
    let l = op.length.ok_or_else(|| CuspError::Invalid("half-line".into()))?;
    Ok(op
        .eigen_roots(n_max)?
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let nn = l / 2.0 - (2.0 * k * l).sin() / (4.0 * k);
            EigenPair { n: i + 1, k, eigenvalue: -k * k, norm: 1.0 / nn.sqrt(), length: l }
        })
        .collect())
}

pub fn eigenpairs_h(n_max: usize) -> Result<Vec<EigenPair>> {
    eigenpairs(&H_OP, n_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OperatorId {
    H,
    B,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundRow {
    pub abs_mu: f64,
    pub arg_mu: f64,
    pub scaled_norm: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundReport {
    pub label: String,
    pub rows: Vec<BoundRow>,
    /// (arg, fitted slope over the whole |mu| range, slope over the upper two decades)
    pub slopes: Vec<(f64, f64, f64)>,
    pub sup: f64,
    pub tolerance: f64,
}

impl BoundReport {
    pub fn max_abs_slope(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.1.abs()))
    }
    pub fn max_abs_tail_slope(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.2.abs()))
    }
    pub fn pass(&self) -> bool {
        self.max_abs_slope() <= self.tolerance && self.sup.is_finite()
    }

    pub fn from_rows(label: &str, rows: Vec<BoundRow>, tolerance: f64) -> Self {
        let mut args: Vec<f64> = rows.iter().map(|r| r.arg_mu).collect();
        args.sort_by(|a, b| a.partial_cmp(b).unwrap());
        args.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let slopes = args
            .iter()
            .map(|&a| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| (r.arg_mu - a).abs() < 1e-12)
                    .map(|r| (r.abs_mu.ln(), r.scaled_norm.ln()))
                    .collect();
                let top = pts.iter().fold(f64::MIN, |m, p| m.max(p.0));
                let tail: Vec<(f64, f64)> =
                    pts.iter().copied().filter(|p| p.0 >= top - 2.0 * std::f64::consts::LN_10 - 1e-9).collect();
                (a, fit_slope(&pts), fit_slope(&tail))
            })
            .collect();
        let sup = rows.iter().fold(0.0f64, |m, r| m.max(r.scaled_norm));
        BoundReport { label: label.into(), rows, slopes, sup, tolerance }
    }
}

/// Least-squares slope.
pub fn fit_slope(p: &[(f64, f64)]) -> f64 {
    let n = p.len() as f64;
    if p.len() < 2 {
        return 0.0;
    }
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = p.iter().map(|q| (q.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Estimate of the weighted L^p operator norm of a linear map on a line:
/// probe maximum followed by power iteration on the duality map.
pub fn operator_norm<F: Fn(&[C64]) -> Vec<C64>>(
    apply: F,
    adjoint: Option<&dyn Fn(&[C64]) -> Vec<C64>>,
    weights: &[f64],
    probes: &[Vec<C64>],
    p: f64,
    iters: usize,
) -> Result<f64> {
    let norm = |v: &[C64]| -> f64 {
        v.iter().zip(weights).map(|(a, w)| w * a.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    };
    let mut best = 0.0f64;
    let mut start: Option<Vec<C64>> = None;
    for pr in probes {
        let n0 = norm(pr);
        if n0 == 0.0 {
            continue;
        }
        let r = norm(&apply(pr)) / n0;
        if r > best {
            best = r;
            start = Some(pr.clone());
        }
    }
    let mut x = start.ok_or_else(|| CuspError::Invalid("probe-set degeneracy".into()))?;
    let Some(adj) = adjoint else { return Ok(best) };
    let q = p / (p - 1.0);
    let dual = |v: &[C64], r: f64| -> Vec<C64> {
        let nv = norm(v);
        v.iter()
            .map(|a| {
                let m = a.norm();
                if m == 0.0 {
                    C64::default()
                } else {
                    a / m * (m / nv).powf(r - 1.0)
                }
            })
            .collect()
    };
    for _ in 0..iters {
        let y = apply(&x);
        let ny = norm(&y);
        let nx = norm(&x);
        if nx == 0.0 || ny == 0.0 {
            break;
        }
        best = best.max(ny / nx);
        // weighted adjoint: W^{-1} R^H W
        let dy = dual(&y, p);
        let wdy: Vec<C64> = dy.iter().zip(weights).map(|(a, w)| a * *w).collect();
        let z: Vec<C64> = adj(&wdy).iter().zip(weights).map(|(a, w)| a / *w).collect();
        let nz: f64 = z.iter().zip(weights).map(|(a, w)| w * a.norm().powf(q)).sum::<f64>().powf(1.0 / q);
        if nz == 0.0 {
            break;
        }
        let zn: Vec<C64> = z.iter().map(|a| a / nz).collect();
        x = dual(&zn, q);
    }
    Ok(best)
}

/// Dense matrix (row-major) of a line operator.
pub fn line_matrix<F: Fn(&[C64]) -> Vec<C64>>(n: usize, apply: F) -> Vec<Vec<C64>> {
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![C64::default(); n];
        e[j] = C64::new(1.0, 0.0);
        cols.push(apply(&e));
    }
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// Probe functions on a line: polynomials, exponentials, eigenfunctions, spikes.
pub fn probes(line: &PanelLine, op: &RobinOp) -> Vec<Vec<C64>> {
    let len = line.b();
    let mut out = Vec::new();
    for d in 0..4 {
        out.push(line.nodes.iter().map(|x| C64::new((x / len).powi(d), 0.0)).collect());
    }
    for a in [0.5, 2.0, 8.0] {
        out.push(line.nodes.iter().map(|x| C64::new((-a * x).exp(), 0.0)).collect());
    }
    if op.length.is_some() {
        if let Ok(ep) = eigenpairs(op, 4) {
            for e in ep {
                out.push(line.nodes.iter().map(|x| C64::new(e.eval(*x), 0.0)).collect());
            }
        }
    }
    for &k in &[0usize, line.len() / 2, line.len() - 1] {
        let mut v = vec![C64::default(); line.len()];
        v[k] = C64::new(1.0, 0.0);
        out.push(v);
    }
    out
}

/// Sup over samples of |mu| ||R_mu|| with per-ray slope fits.
pub fn verify_sector_bound(
    op_id: OperatorId,
    line: &PanelLine,
    samples: &[SpectralParam],
    p: f64,
    tolerance: f64,
) -> Result<BoundReport> {
    let op = match op_id {
        OperatorId::H => H_OP,
        OperatorId::B => B_OP,
    };
    let pr = probes(line, &op);
    let mut rows = Vec::with_capacity(samples.len());
    for mu in samples {
        let plan = op.plan(line, mu)?;
        let m = line_matrix(line.len(), |v| plan.apply(v));
        let apply = |v: &[C64]| -> Vec<C64> { m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect() };
        let adj = |v: &[C64]| -> Vec<C64> {
            (0..v.len()).map(|j| (0..v.len()).map(|i| m[i][j].conj() * v[i]).sum()).collect()
        };
        let nrm = operator_norm(apply, Some(&adj), &line.weights, &pr, p, 20)?;
        rows.push(BoundRow { abs_mu: mu.mu.norm(), arg_mu: mu.mu.arg(), scaled_norm: mu.mu.norm() * nrm });
    }
    Ok(BoundReport::from_rows(&format!("{op_id:?}"), rows, tolerance))
}

/// Default sample set: |mu| log-spaced on [1, 1e4] along the rays
/// 0, ±pi/4, ±pi/2, ±(3pi/4 - eps).
pub fn sector_samples(per_ray: usize, eps: f64) -> Vec<SpectralParam> {
    let pi = std::f64::consts::PI;
    let rays = [0.0, pi / 4.0, -pi / 4.0, pi / 2.0, -pi / 2.0, 0.75 * pi - eps, -(0.75 * pi - eps)];
    let mut out = Vec::new();
    for &a in &rays {
        for k in 0..per_ray {
            let r = 10f64.powf(4.0 * k as f64 / (per_ray - 1) as f64);
            out.push(SpectralParam::polar(r, a).unwrap());
        }
    }
    out
}

/// ||[R^B_{mu1}, R^H_{mu2}] v|| / ||v|| on a strip field.
pub fn commutator_check(mu1: &SpectralParam, mu2: &SpectralParam, v: &GridField, p: f64) -> Result<f64> {
    let g = &v.grid;
    let rb = B_OP.plan(&g.xi, mu1)?;
    let rh = H_OP.plan(&g.eta, mu2)?;
    let a = rb.apply_axis(&rh.apply_axis(v, 1), 0);
    let b = rh.apply_axis(&rb.apply_axis(v, 0), 1);
    let nv = v.lp_norm(p)?;
    if nv == 0.0 {
        return Ok(0.0);
    }
    Ok(a.sub(&b)?.lp_norm(p)? / nv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::NodeKind;

    #[test]
    fn kernel_branches_continuous() {
        let mu = SpectralParam::real(4.0).unwrap();
        let a = green_h(&mu, 0.3, 0.3 - 1e-13).unwrap();
        let b = green_h(&mu, 0.3, 0.3 + 1e-13).unwrap();
        assert!((a - b).norm() < 1e-12);
        assert!(green_h(&mu, 1.0, 0.4).unwrap().norm() < 1e-15);
    }

    #[test]
    fn plan_matches_pointwise_kernel() {
        let line = PanelLine::uniform(1.0, 2, 9, NodeKind::Chebyshev);
        let mu = SpectralParam::new(C64::new(3.0, 2.0)).unwrap();
        let plan = H_OP.plan(&line, &mu).unwrap();
        let v: Vec<C64> = line.nodes.iter().map(|x| C64::new(x * x, 0.0)).collect();
        let out = plan.apply(&v);
        for (i, &x) in line.nodes.iter().enumerate() {
            let val = crate::quad::adaptive_gk(&|s: f64| (H_OP.green_q(mu.sqrt_mu, x, s) * s * s).re, 0.0, 1.0, 1e-13)
                + C64::i()
                    * crate::quad::adaptive_gk(&|s: f64| (H_OP.green_q(mu.sqrt_mu, x, s) * s * s).im, 0.0, 1.0, 1e-13);
            assert!((val - out[i]).norm() < 1e-11, "{x}: {val} vs {}", out[i]);
        }
    }
}
