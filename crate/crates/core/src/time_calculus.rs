//! Two-point problem w'' - z w = f on [0,1] with w'' + w' + w = 0 at both ends,
//! and its operator-valued version w'' - (λ + A) w = f through a Dunford integral.
//!
//! The scalar kernel K(z) is meromorphic with simple poles at z = -π²j² (j ≥ 1)
//! and at the roots of z² + z + 1. The poles -π²j² sit inside any contour
//! surrounding the spectrum of λ + A, so the contour integral is corrected by
//! the residues Res_p K · (p - λ - A)^{-1}.

use crate::contour::{ContourSpec, SectorContour};
use crate::error::{CuspError, Result};
use crate::grid::{GridField, Scheme, StripGrid, TimeField};
use crate::operator_sum::{auto_contour, mode_coefficients, SumPlan};
use crate::panel::{ExpPlan, PanelLine};
use crate::quad::gauss_legendre;
use crate::resolvent::{eigenpairs, EigenPair, RobinOp, H_OP};
use crate::C64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Distance guard for the scalar singular set.
pub const SCALAR_GUARD: f64 = 1e-6;

/// Cube roots of unity other than 1: zeros of z² + z + 1.
pub fn ventcel_roots() -> [C64; 2] {
    [C64::from_polar(1.0, 2.0 * PI / 3.0), C64::from_polar(1.0, -2.0 * PI / 3.0)]
}

/// Distance from z to the poles of the scalar kernel.
pub fn scalar_singular_distance(z: C64) -> f64 {
    let mut d = ventcel_roots().iter().map(|r| (z - r).norm()).fold(f64::MAX, f64::min);
    let j = ((-z.re).max(0.0).sqrt() / PI).round().max(1.0);
    for jj in [j - 1.0, j, j + 1.0] {
        if jj >= 1.0 {
            d = d.min((z + PI * PI * jj * jj).norm());
        }
    }
    d
}

/// Matrices of the solution operator f ↦ w on a time line, split in six terms:
///  1: ∫ e^{-q(2-s+t)} f   2: ∫ e^{-q(2+s-t)} f   3: ∫ e^{-q(s+t)} f
///  4: ∫ e^{-q(2-s-t)} f   5: ∫_0^t e^{-q(t-s)} f  6: ∫_t^1 e^{-q(s-t)} f
/// (terms 1-4 also carry the point values f(0), f(1) entering the boundary rows).
#[derive(Debug, Clone)]
pub struct ScalarKernel {
    pub z: C64,
    pub q: C64,
    pub n: usize,
    /// row-major n x n
    pub terms: [Vec<C64>; 6],
    a_row: Vec<C64>,
    b_row: Vec<C64>,
    i0: Vec<C64>,
    i1: Vec<C64>,
    e: C64,
}

impl ScalarKernel {
    pub fn new(time: &PanelLine, z: C64) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(CuspError::NonFinite(0));
        }
        let d = scalar_singular_distance(z);
        if d < SCALAR_GUARD {
            return Err(CuspError::Resonant(format!("z = {z} lies {d:.2e} from a pole of the scalar problem")));
        }
        if z.norm() < 1e-12 {
            return Err(CuspError::Invalid("z = 0 is a removable point; perturb it".into()));
        }
        let (t0, t1) = (time.a(), time.b());
        if t0 != 0.0 || (t1 - 1.0).abs() > 1e-14 {
            return Err(CuspError::Invalid("time line must span [0,1]".into()));
        }
        let n = time.len();
        let q = z.sqrt();
        let zz = z + 1.0;
        let e = (-q).exp();
        let plan = ExpPlan::new(time, q);
        // L[i][j], R[i][j]
        let mut lm = vec![C64::default(); n * n];
        let mut rm = vec![C64::default(); n * n];
        let mut l = vec![C64::default(); n];
        let mut r = vec![C64::default(); n];
        let mut unit = vec![C64::default(); n];
        for j in 0..n {
            unit.iter_mut().for_each(|u| *u = C64::default());
            unit[j] = C64::new(1.0, 0.0);
            plan.sweeps(&unit, 0, 1, &mut l, &mut r);
            for i in 0..n {
                lm[i * n + j] = l[i];
                rm[i * n + j] = r[i];
            }
        }
        let one_m = 1.0 - e * e;
        let den_a = (zz + q) * one_m;
        let den_b = (zz - q) * one_m;
        let i0: Vec<C64> = (0..n).map(|j| rm[j]).collect();
        let i1: Vec<C64> = (0..n).map(|j| lm[(n - 1) * n + j]).collect();
        let delta = |j: usize, k: usize| if j == k { 1.0 } else { 0.0 };
        let r0: Vec<C64> = (0..n).map(|j| -delta(j, 0) + i0[j] * (zz + q) / (2.0 * q)).collect();
        let r1: Vec<C64> = (0..n).map(|j| -delta(j, n - 1) + i1[j] * (zz - q) / (2.0 * q)).collect();
        let ea: Vec<C64> = time.nodes.iter().map(|t| (-q * (1.0 - t)).exp()).collect();
        let eb: Vec<C64> = time.nodes.iter().map(|t| (-q * t).exp()).collect();
        let mut terms: [Vec<C64>; 6] = Default::default();
        for t in terms.iter_mut() {
            *t = vec![C64::default(); n * n];
        }
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                terms[0][k] = -e * r1[j] / den_b * eb[i];
                terms[1][k] = -e * r0[j] / den_a * ea[i];
                terms[2][k] = r0[j] / den_b * eb[i];
                terms[3][k] = r1[j] / den_a * ea[i];
                terms[4][k] = -lm[k] / (2.0 * q);
                terms[5][k] = -rm[k] / (2.0 * q);
            }
        }
        let a_row = (0..n).map(|j| (r1[j] - e * r0[j]) / den_a).collect();
        let b_row = (0..n).map(|j| (r0[j] - e * r1[j]) / den_b).collect();
        let ker = ScalarKernel { z, q, n, terms, a_row, b_row, i0, i1, e };
        if ker.terms.iter().flatten().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(CuspError::NonFinite(0));
        }
        Ok(ker)
    }

    /// Sum of the six term matrices.
    pub fn matrix(&self) -> Vec<C64> {
        let mut m = self.terms[0].clone();
        for t in &self.terms[1..] {
            for (a, b) in m.iter_mut().zip(t) {
                *a += b;
            }
        }
        m
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let m = self.matrix();
        (0..self.n).map(|i| (0..self.n).map(|j| m[i * self.n + j] * f[j]).sum()).collect()
    }

    pub fn apply_term(&self, term: usize, f: &[C64]) -> Vec<C64> {
        let m = &self.terms[term];
        (0..self.n).map(|i| (0..self.n).map(|j| m[i * self.n + j] * f[j]).sum()).collect()
    }

    /// Exact w'(0), w'(1) of the solution for data f.
    pub fn endpoint_slopes(&self, f: &[C64]) -> (C64, C64) {
        let dot = |r: &[C64]| -> C64 { r.iter().zip(f).map(|(a, b)| a * b).sum() };
        let (a, b, i0, i1) = (dot(&self.a_row), dot(&self.b_row), dot(&self.i0), dot(&self.i1));
        let q = self.q;
        (-i0 / 2.0 + q * (a * self.e - b), i1 / 2.0 + q * (a - b * self.e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSolution {
    pub t: Vec<f64>,
    pub w: Vec<C64>,
    /// w'' + w' + w at t = 0 and t = 1 with w'' = z w + f
    pub bc_residual: [C64; 2],
}

pub fn scalar_solve_exact(z: C64, time: &PanelLine, f: &[C64]) -> Result<ScalarSolution> {
    if f.len() != time.len() {
        return Err(CuspError::Invalid("sample count must equal the time grid size".into()));
    }
    let k = ScalarKernel::new(time, z)?;
    let w = k.apply(f);
    let (d0, d1) = k.endpoint_slopes(f);
    let n = f.len();
    let res = |w: C64, d: C64, f: C64| (z * w + f) + d + w;
    let bc_residual = [res(w[0], d0, f[0]), res(w[n - 1], d1, f[n - 1])];
    Ok(ScalarSolution { t: time.nodes.clone(), w, bc_residual })
}

/// One row of the printed-versus-exact comparison.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TermDeviation {
    pub term: usize,
    pub printed_sup: f64,
    pub exact_sup: f64,
    pub diff_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrintedComparison {
    pub w_printed: Vec<C64>,
    pub w_exact: Vec<C64>,
    pub deviation_sup: f64,
    pub rows: Vec<TermDeviation>,
}

/// Evaluates the six-term display as printed (coefficients taken literally)
/// and compares term by term with the exact kernel.
pub fn scalar_solve_printed(z: C64, time: &PanelLine, f: &[C64]) -> Result<PrintedComparison> {
    let k = ScalarKernel::new(time, z)?;
    let q = k.q;
    let n = time.len();
    // Gauss rule on the interpolant, per panel
    let (gx, gw) = gauss_legendre(48);
    let mut pts: Vec<(f64, f64, C64)> = Vec::new();
    for p in 0..time.n_panels() {
        let (a, b) = (time.breaks[p], time.breaks[p + 1]);
        for (x, w) in gx.iter().zip(&gw) {
            let s = a + 0.5 * (b - a) * (x + 1.0);
            pts.push((s, 0.5 * (b - a) * w, time.interp(f, s)));
        }
    }
    let integral = |expo: &dyn Fn(f64) -> f64| -> C64 {
        pts.iter().map(|(s, w, fv)| (-q * expo(*s)).exp() * fv * *w).sum()
    };
    let c12 = 1.0 / (2.0 * (1.0 - (-2.0 * q).exp()) * q);
    let c3 = -(z + q + 1.0) / (z - q + 1.0);
    let c4 = -(z - q + 1.0) / (z + q + 1.0);
    let exact: Vec<Vec<C64>> = (0..6).map(|i| k.apply_term(i, f)).collect();
    let mut printed = vec![vec![C64::default(); n]; 6];
    for (i, &t) in time.nodes.iter().enumerate() {
        printed[0][i] = c12 * integral(&|s| 2.0 - s + t);
        printed[1][i] = c12 * integral(&|s| s - t + 2.0);
        printed[2][i] = c3 * integral(&|s| s + t);
        printed[3][i] = c4 * integral(&|s| 2.0 - s - t);
        // the two halves of the |t - s| integral, with the printed sign
        printed[4][i] = -exact[4][i];
        printed[5][i] = -exact[5][i];
    }
    let sup = |v: &[C64]| v.iter().fold(0.0f64, |m, a| m.max(a.norm()));
    let rows = (0..6)
        .map(|i| {
            let d: Vec<C64> = printed[i].iter().zip(&exact[i]).map(|(a, b)| a - b).collect();
            TermDeviation { term: i + 1, printed_sup: sup(&printed[i]), exact_sup: sup(&exact[i]), diff_sup: sup(&d) }
        })
        .collect();
    let w_printed: Vec<C64> = (0..n).map(|i| (0..6).map(|k| printed[k][i]).sum()).collect();
    let w_exact = k.apply(f);
    let d: Vec<C64> = w_printed.iter().zip(&w_exact).map(|(a, b)| a - b).collect();
    Ok(PrintedComparison { deviation_sup: sup(&d), w_printed, w_exact, rows })
}

/// Spatial resolvent backend inside the time integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialBackend {
    Sum,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AbstractOptions {
    pub lambda: f64,
    pub backend: SpatialBackend,
    /// time contour: delta, r (ignored, set from the gap), R, node counts
    pub outer: ContourSpec,
    /// inner sum-formula contours (vertex and radius chosen per node)
    pub inner: ContourSpec,
    /// distance from the top of the spectrum of λ + A to the time-contour vertex
    pub gap: f64,
    /// number of resonant poles -π²j² corrected for
    pub n_poles: usize,
    /// η-modes for the oracle backend and the pole corrections
    pub n_modes: usize,
}

impl Default for AbstractOptions {
    fn default() -> Self {
        AbstractOptions {
            lambda: 1.0,
            backend: SpatialBackend::Sum,
            outer: ContourSpec::default(),
            inner: ContourSpec { n_ray: 64, ..ContourSpec::default() },
            gap: 1.0,
            n_poles: 40,
            n_modes: 60,
        }
    }
}

/// Left-opening contour around the spectrum of λ + A (Dirichlet cut at xi_max)
/// together with the kernel poles it encloses.
pub fn time_contour(lambda: f64, xi_max: f64, opts: &AbstractOptions) -> Result<(SectorContour, Vec<C64>)> {
    if !(lambda > 0.0) {
        return Err(CuspError::Invalid(format!("lambda = {lambda} must be positive")));
    }
    let k1 = H_OP.eigen_roots(1)?[0];
    let kx = RobinOp::finite(xi_max).eigen_roots(1)?[0];
    let top = lambda - k1 * k1 - kx * kx;
    let c = top + opts.gap;
    let mut spec = opts.outer;
    spec.r = 0.5 * opts.gap;
    let contour = SectorContour::left(&spec, c)?;
    let mut poles: Vec<C64> = (1..=opts.n_poles).map(|j| C64::new(-PI * PI * (j * j) as f64, 0.0)).collect();
    for r in ventcel_roots() {
        if contour.contains(r) {
            poles.push(r);
        }
    }
    let mut sing: Vec<C64> = poles.clone();
    sing.extend(ventcel_roots());
    sing.push(C64::new(top, 0.0));
    for s in sing {
        let (node, d) = contour.distance_to(s);
        if d < 1e-3 {
            return Err(CuspError::ContourCollision { node, what: format!("time-kernel singularity {s}") });
        }
    }
    Ok((contour, poles))
}

/// Smallest distance |s - p| between eigenvalues s = λ - k_n² - κ_m² of λ + A
/// (Dirichlet cut at xi_max) and the resonant poles p = -π²j², over the
/// first modes; returns (distance, n, m, j) with 0-based mode indices.
pub fn resonance_gap(lambda: f64, xi_max: f64, n_eta: usize, n_xi: usize, n_poles: usize) -> Result<(f64, usize, usize, usize)> {
    let kh = H_OP.eigen_roots(n_eta)?;
    let kx = RobinOp::finite(xi_max).eigen_roots(n_xi)?;
    let mut best = (f64::MAX, 0, 0, 0);
    for (n, a) in kh.iter().enumerate() {
        for (m, b) in kx.iter().enumerate() {
            let s = lambda - a * a - b * b;
            // nearest j only
            let j = ((-s).max(0.0).sqrt() / PI).round().max(1.0) as usize;
            for jj in [j.saturating_sub(1).max(1), j, j + 1] {
                if jj > n_poles {
                    continue;
                }
                let d = (s + PI * PI * (jj * jj) as f64).abs();
                if d < best.0 {
                    best = (d, n, m, jj);
                }
            }
        }
    }
    Ok(best)
}

/// Gap below which solve_abstract warns about near-resonant data.
pub const RESONANCE_WARN: f64 = 1e-2;

/// η-mode coefficients of every frame, for resolvents of A with the cut operator.
pub struct ModeCache {
    pub grid: Arc<StripGrid>,
    pub modes: Vec<EigenPair>,
    ev: Vec<Vec<f64>>,
    /// coef[frame][mode][xi]
    coef: Vec<Vec<Vec<C64>>>,
    xi_op: RobinOp,
}

impl ModeCache {
    pub fn new(f: &TimeField, n_modes: usize, xi_op: RobinOp) -> Result<Self> {
        let grid = f.grid().clone();
        let modes = eigenpairs(&H_OP, n_modes)?;
        let ev = modes.iter().map(|e| grid.eta.nodes.iter().map(|t| e.eval(*t)).collect()).collect();
        let coef = f.frames.iter().map(|fr| mode_coefficients(fr, &modes)).collect();
        Ok(ModeCache { grid, modes, ev, coef, xi_op })
    }

    /// (A - mu)^{-1} applied to Σ_s combo[s] f_s for each combination.
    pub fn resolve(&self, mu: C64, combos: &[Vec<C64>]) -> Result<Vec<GridField>> {
        let ne = self.grid.n_eta();
        let nx = self.grid.n_xi();
        let mut out = vec![GridField::zeros(&self.grid); combos.len()];
        let mut c = vec![C64::default(); nx];
        for (n, e) in self.modes.iter().enumerate() {
            let plan = self.xi_op.plan_q(&self.grid.xi, (mu + e.k * e.k).sqrt())?;
            for (o, w) in out.iter_mut().zip(combos) {
                c.iter_mut().for_each(|v| *v = C64::default());
                let mut any = false;
                for (s, ws) in w.iter().enumerate() {
                    if *ws != C64::default() {
                        any = true;
                        for (ci, fi) in c.iter_mut().zip(&self.coef[s][n]) {
                            *ci += ws * fi;
                        }
                    }
                }
                if !any {
                    continue;
                }
                let u = plan.apply(&c);
                for i in 0..nx {
                    for j in 0..ne {
                        o.values[i * ne + j] += u[i] * self.ev[n][j];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Output of the operational solver.
#[derive(Debug, Clone)]
pub struct AbstractSolution {
    pub w: TimeField,
    /// contour integrals of the six kernel terms
    pub terms: Vec<TimeField>,
    /// correction from the kernel poles enclosed by the time contour
    pub resonance: TimeField,
    pub contour: SectorContour,
    pub poles: Vec<C64>,
    pub warnings: Vec<String>,
}

fn is_real(f: &TimeField) -> bool {
    f.frames.iter().all(|fr| fr.values.iter().all(|v| v.im == 0.0))
}

/// Residue of the full kernel matrix at a pole, by the trapezoid rule.
pub fn kernel_residue(time: &PanelLine, pole: C64, radius: f64, n: usize) -> Result<Vec<C64>> {
    let nt = time.len();
    let mut acc = vec![C64::default(); nt * nt];
    for k in 0..n {
        let e = C64::from_polar(radius, 2.0 * PI * (k as f64 + 0.5) / n as f64);
        let m = ScalarKernel::new(time, pole + e)?.matrix();
        for (a, b) in acc.iter_mut().zip(&m) {
            *a += b * e / n as f64;
        }
    }
    Ok(acc)
}

/// w solving w'' - (λ + A) w = f, Ventcel conditions at t = 0, 1, with the
/// Dirichlet cut of B at xi_max.
pub fn solve_abstract(f: &TimeField, opts: &AbstractOptions) -> Result<AbstractSolution> {
    let grid = f.grid().clone();
    let tl = f.time.clone();
    let nt = tl.len();
    if nt < 3 {
        return Err(CuspError::TooFewFrames { got: nt, need: 3 });
    }
    for fr in &f.frames {
        fr.check_finite()?;
    }
    let lambda = opts.lambda;
    let xi_op = RobinOp::finite(grid.xi_max());
    let (contour, poles) = time_contour(lambda, grid.xi_max(), opts)?;
    let real = is_real(f);
    let cache = ModeCache::new(f, opts.n_modes, xi_op)?;
    let npts = grid.len();
    let mut terms = vec![vec![vec![C64::default(); npts]; nt]; 6];
    let scale = 1.0 / (2.0 * PI * C64::i());
    let cc = C64::new(contour.center, 0.0);
    let unit: Vec<Vec<C64>> = (0..nt)
        .map(|s| (0..nt).map(|k| if k == s { C64::new(1.0, 0.0) } else { C64::default() }).collect())
        .collect();
    let mut warnings = Vec::new();
    let (gap, n, m, j) = resonance_gap(lambda, grid.xi_max(), opts.n_modes, 4 * grid.n_xi(), opts.n_poles)?;
    if gap < RESONANCE_WARN {
        warnings.push(format!(
            "near-resonant: eigenvalue of lambda + A for modes (eta {n}, xi {m}) lies {gap:.2e} from -pi^2 {j}^2"
        ));
    }
    for k in 0..contour.len() {
        let z = contour.nodes[k];
        // conjugate partner handled by symmetry for real data
        if real && z.im < 0.0 {
            continue;
        }
        let factor = if real && z.im > 0.0 { 2.0 } else { 1.0 };
        let ker = ScalarKernel::new(&tl, z)?;
        let mu = z - lambda;
        // y_s = (z - λ - A)^{-1} f_s = -(A - mu)^{-1} f_s
        let y: Vec<GridField> = match opts.backend {
            SpatialBackend::Sum => {
                let inner = auto_contour(mu, &opts.inner)?;
                let plan = SumPlan::new(&grid, mu, inner, &xi_op)?;
                f.frames.iter().map(|fr| plan.apply(fr).map(|u| u.scale(C64::new(-1.0, 0.0)))).collect::<Result<_>>()?
            }
            SpatialBackend::Oracle => {
                cache.resolve(mu, &unit)?.into_iter().map(|u| u.scale(C64::new(-1.0, 0.0))).collect()
            }
        };
        let w = contour.weights[k] * scale;
        let zc = z - cc;
        let tail = w / (2.0 * zc * zc);
        for (ti, term) in terms.iter_mut().enumerate() {
            let m = &ker.terms[ti];
            for a in 0..nt {
                let out = &mut term[a];
                for (s, ys) in y.iter().enumerate() {
                    let c = w * m[a * nt + s];
                    if real {
                        for (o, v) in out.iter_mut().zip(&ys.values) {
                            *o += factor * (c * v).re;
                        }
                    } else {
                        for (o, v) in out.iter_mut().zip(&ys.values) {
                            *o += c * v;
                        }
                    }
                }
                if ti >= 4 {
                    for (o, v) in out.iter_mut().zip(&f.frames[a].values) {
                        *o += if real { C64::new(factor * (tail * v).re, 0.0) } else { tail * v };
                    }
                }
            }
        }
    }
    // pole corrections: - Σ_p Res_p K (p - λ - A)^{-1} f = Σ_p Res_p K (A - (p - λ))^{-1} f
    let mut res = vec![vec![C64::default(); npts]; nt];
    for &p in &poles {
        if real && p.im < 0.0 {
            continue;
        }
        let factor = if real && p.im > 0.0 { 2.0 } else { 1.0 };
        let radius = if p.im == 0.0 { 1.0 } else { 0.25 };
        let r = kernel_residue(&tl, p, radius, 32)?;
        let combos: Vec<Vec<C64>> = (0..nt).map(|a| r[a * nt..(a + 1) * nt].to_vec()).collect();
        let u = match cache.resolve(p - lambda, &combos) {
            Ok(u) => u,
            Err(e) => {
                warnings.push(format!("pole {p}: {e}"));
                return Err(e);
            }
        };
        for (a, ua) in u.iter().enumerate() {
            for (o, v) in res[a].iter_mut().zip(&ua.values) {
                *o += if real { C64::new(factor * v.re, 0.0) } else { *v };
            }
        }
    }
    let to_tf = |vals: Vec<Vec<C64>>| -> Result<TimeField> {
        TimeField::new(tl.clone(), vals.into_iter().map(|v| GridField { grid: grid.clone(), values: v }).collect())
    };
    let term_fields: Vec<TimeField> = terms.into_iter().map(to_tf).collect::<Result<_>>()?;
    let resonance = to_tf(res)?;
    let mut w = resonance.clone();
    for t in &term_fields {
        w = w.add(t)?;
    }
    for fr in &w.frames {
        fr.check_finite()?;
    }
    Ok(AbstractSolution { w, terms: term_fields, resonance, contour, poles, warnings })
}

/// The i-th Dunford term (1-based), taken from a solved bundle.
pub fn s_term(sol: &AbstractSolution, i: usize) -> Result<&TimeField> {
    if !(1..=6).contains(&i) {
        return Err(CuspError::Invalid(format!("term index {i} outside 1..6")));
    }
    Ok(&sol.terms[i - 1])
}

/// Residuals of the abstract equation and of all boundary conditions.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    pub scheme: String,
    /// sup_t ||w'' - Δw - λw - f||_2 / sup_t ||f||_2 (absolute if f = 0)
    pub interior: f64,
    /// max |w_ξ - w| at ξ=0, |w| at ξ=X, |w_η - w| at η=0, |w| at η=1, relative to max |w|
    pub spatial_bc: [f64; 4],
    /// max |w'' + w' + w| at t = 0 and t = 1, relative to max |w|
    pub ventcel: [f64; 2],
}

pub fn residual_abstract(w: &TimeField, f: &TimeField, lambda: f64, scheme: Scheme) -> Result<ResidualReport> {
    let nt = w.frames.len();
    if nt < 5 {
        return Err(CuspError::TooFewFrames { got: nt, need: 5 });
    }
    if w.time != f.time || w.grid() != f.grid() {
        return Err(CuspError::GridMismatch);
    }
    let g = w.grid().clone();
    let (nx, ne) = (g.n_xi(), g.n_eta());
    let wtt = w.dt(2, scheme);
    let wt = w.dt(1, scheme);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut bc = [0.0f64; 4];
    let mut wmax = 0.0f64;
    for a in 0..nt {
        let fr = &w.frames[a];
        let lap = fr.deriv(0, 2, scheme).add(&fr.deriv(1, 2, scheme))?;
        let mut r = wtt.frames[a].sub(&lap)?;
        r.axpy(C64::new(-lambda, 0.0), fr);
        let r = r.sub(&f.frames[a])?;
        num = num.max(r.lp_norm(2.0)?);
        den = den.max(f.frames[a].lp_norm(2.0)?);
        wmax = wmax.max(fr.max_abs());
        let dx = fr.deriv(0, 1, scheme);
        let dy = fr.deriv(1, 1, scheme);
        for j in 0..ne {
            bc[0] = bc[0].max((dx.at(0, j) - fr.at(0, j)).norm());
            bc[1] = bc[1].max(fr.at(nx - 1, j).norm());
        }
        for i in 0..nx {
            bc[2] = bc[2].max((dy.at(i, 0) - fr.at(i, 0)).norm());
            bc[3] = bc[3].max(fr.at(i, ne - 1).norm());
        }
    }
    let mut ven = [0.0f64; 2];
    for (slot, a) in [(0usize, 0usize), (1, nt - 1)] {
        let mut v = wtt.frames[a].add(&wt.frames[a])?;
        v = v.add(&w.frames[a])?;
        ven[slot] = v.max_abs();
    }
    let rel = |x: f64| if wmax > 0.0 { x / wmax } else { x };
    Ok(ResidualReport {
        scheme: format!("{scheme:?}"),
        interior: if den > 0.0 { num / den } else { num },
        spatial_bc: bc.map(rel),
        ventcel: ven.map(rel),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::time_line;

    #[test]
    fn scalar_closed_form() {
        let tl = time_line(17);
        let f = vec![C64::new(1.0, 0.0); tl.len()];
        let s = scalar_solve_exact(C64::new(1.0, 0.0), &tl, &f).unwrap();
        let e = std::f64::consts::E;
        assert!((s.w[0].re + 2.0 / (3.0 * (1.0 + e))).abs() < 1e-12);
        assert!((s.w[16].re + 2.0 * e / (3.0 * (1.0 + e))).abs() < 1e-12);
        assert!(s.bc_residual.iter().all(|r| r.norm() < 1e-12));
    }

    #[test]
    fn near_resonant_strip_is_flagged() {
        // xi_max = 5 places an eigenvalue 3e-5 from -16 pi²
        let (d, _, _, j) = resonance_gap(1.0, 5.0, 30, 60, 60).unwrap();
        assert!(d < 1e-4 && j == 4, "{d} {j}");
        assert!(resonance_gap(1.0, 4.0, 30, 60, 60).unwrap().0 > 0.3);
    }

    #[test]
    fn resonance_guard() {
        let tl = time_line(9);
        assert!(matches!(ScalarKernel::new(&tl, C64::new(-PI * PI, 0.0)), Err(CuspError::Resonant(_))));
        assert!(ScalarKernel::new(&tl, ventcel_roots()[0]).is_err());
    }
}
