//! End-to-end pipeline for the cusp problem: push-forward of the data to the
//! strip, the principal problem, the perturbation operator P with an optional
//! Neumann iteration, pull-back, and the discrete regularity report.

use crate::error::{CuspError, Result};
use crate::geometry::{weight_exponent, CuspDomain, ProfilePair};
use crate::grid::{graded_time_line, time_line, GridField, Scheme, StripGrid, TimeField};
use crate::panel::{NodeKind, PanelLine};
use crate::time_calculus::{residual_abstract, solve_abstract, AbstractOptions, AbstractSolution, ResidualReport};
use crate::C64;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

/// Source h(t, x, y) on [0,1] × Ω.
pub type CuspSource = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Profile quantities at the ξ nodes of a strip grid.
#[derive(Debug, Clone, PartialEq)]
pub struct XiProfile {
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub ddphi: Vec<f64>,
    pub phi2: Vec<f64>,
    pub dphi2: Vec<f64>,
    pub ddphi2: Vec<f64>,
}

impl XiProfile {
    pub fn new(domain: &CuspDomain, grid: &StripGrid) -> Result<Self> {
        if grid.xi_max() > domain.xi_max * (1.0 + 1e-12) {
            return Err(CuspError::BeyondTruncation { xi: grid.xi_max(), xi_max: domain.xi_max });
        }
        let n = grid.n_xi();
        let mut s = XiProfile {
            x: Vec::with_capacity(n),
            phi: Vec::with_capacity(n),
            dphi: Vec::with_capacity(n),
            ddphi: Vec::with_capacity(n),
            phi2: Vec::with_capacity(n),
            dphi2: Vec::with_capacity(n),
            ddphi2: Vec::with_capacity(n),
        };
        for &xi in &grid.xi.nodes {
            let x = domain.x_of_xi(xi.min(domain.xi_max))?;
            let (p, dp, ddp) = domain.profiles.phi(x);
            let (p2, dp2, ddp2) = (domain.profiles.phi2)(x);
            s.x.push(x);
            s.phi.push(p);
            s.dphi.push(dp);
            s.ddphi.push(ddp);
            s.phi2.push(p2);
            s.dphi2.push(dp2);
            s.ddphi2.push(ddp2);
        }
        Ok(s)
    }

    /// Cusp point (x, y) of the strip node (i, η).
    pub fn point(&self, i: usize, eta: f64) -> (f64, f64) {
        (self.x[i], self.phi2[i] + eta * self.phi[i])
    }

    /// φ^e at the ξ nodes.
    pub fn phi_pow(&self, e: f64) -> Vec<f64> {
        self.phi.iter().map(|p| p.powf(e)).collect()
    }
}

/// Names of the seven coefficient fields of P.
pub const P_GROUPS: [&str; 7] = [
    "(2/q)((2/q)phi'^2 + phi phi'') w",
    "(phi2' + eta phi')^2 w_etaeta",
    "-(4/q) phi' w_xi",
    "-2 (phi2' + eta phi') w_etaxi",
    "(4/q) (phi2' + eta phi') phi' w_eta",
    "phi' (w_xi - (2/q) phi' w)",
    "(2 phi' phi2' - phi phi2'' - eta (phi phi'' - 2 phi'^2)) w_eta",
];

/// The seven coefficient groups at one point; s = 2/q.
pub fn p_symbol(s: f64, eta: f64, phi: f64, dphi: f64, ddphi: f64, dphi2: f64, ddphi2: f64) -> [f64; 7] {
    let beta = dphi2 + eta * dphi;
    [
        s * (s * dphi * dphi + phi * ddphi),
        beta * beta,
        -2.0 * s * dphi,
        -2.0 * beta,
        2.0 * s * beta * dphi,
        dphi,
        2.0 * dphi * dphi2 - phi * ddphi2 - eta * (phi * ddphi - 2.0 * dphi * dphi),
    ]
}

/// Coefficient fields of P on a strip grid (flat, η fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCoeffs {
    pub grid: Arc<StripGrid>,
    pub p: f64,
    /// 2/q · φ' at the ξ nodes (enters group 6 as a multiplier of w)
    s_dphi: Vec<f64>,
    pub groups: [Vec<f64>; 7],
    /// Some(ϱ at the ξ nodes) adds (1 - ϱ) ∂²_t w to P w (weight folding)
    pub fold_weight: Option<Vec<f64>>,
}

impl PerturbationCoeffs {
    pub fn new(prof: &XiProfile, grid: &Arc<StripGrid>, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(CuspError::Invalid(format!("p = {p} must lie in (1, inf)")));
        }
        if prof.x.len() != grid.n_xi() {
            return Err(CuspError::GridMismatch);
        }
        let s = weight_exponent(p);
        let mut groups: [Vec<f64>; 7] = Default::default();
        for i in 0..grid.n_xi() {
            for &eta in &grid.eta.nodes {
                let c = p_symbol(s, eta, prof.phi[i], prof.dphi[i], prof.ddphi[i], prof.dphi2[i], prof.ddphi2[i]);
                for (g, v) in groups.iter_mut().zip(c) {
                    g.push(v);
                }
            }
        }
        Ok(PerturbationCoeffs {
            grid: grid.clone(),
            p,
            s_dphi: prof.dphi.iter().map(|d| s * d).collect(),
            groups,
            fold_weight: None,
        })
    }

    /// All coefficients zero (P ≡ 0).
    pub fn zero(grid: &Arc<StripGrid>, p: f64) -> Self {
        let n = grid.len();
        PerturbationCoeffs {
            grid: grid.clone(),
            p,
            s_dphi: vec![0.0; grid.n_xi()],
            groups: std::array::from_fn(|_| vec![0.0; n]),
            fold_weight: None,
        }
    }

    /// Folds the dropped weight term (1 - ϱ) ∂²_t w into the perturbation.
    pub fn with_weight_fold(mut self, prof: &XiProfile) -> Self {
        self.fold_weight = Some(prof.phi_pow(weight_exponent(self.p)));
        self
    }

    /// Largest coefficient magnitude on the ξ node column i.
    pub fn max_abs_at(&self, i: usize) -> f64 {
        let ne = self.grid.n_eta();
        let mut m = self.s_dphi[i].abs() * self.groups[5][i * ne].abs();
        for g in &self.groups {
            for j in 0..ne {
                m = m.max(g[i * ne + j].abs());
            }
        }
        m
    }

    /// P w for one frame.
    pub fn apply_frame(&self, w: &GridField, scheme: Scheme) -> Result<GridField> {
        if *w.grid != *self.grid {
            return Err(CuspError::GridMismatch);
        }
        let wx = w.deriv(0, 1, scheme);
        let we = w.deriv(1, 1, scheme);
        let wee = w.deriv(1, 2, scheme);
        let wxe = we.deriv(0, 1, scheme);
        let ne = self.grid.n_eta();
        let g = &self.groups;
        let values = (0..w.values.len())
            .map(|k| {
                let i = k / ne;
                g[0][k] * w.values[k]
                    + g[1][k] * wee.values[k]
                    + g[2][k] * wx.values[k]
                    + g[3][k] * wxe.values[k]
                    + g[4][k] * we.values[k]
                    + g[5][k] * (wx.values[k] - self.s_dphi[i] * w.values[k])
                    + g[6][k] * we.values[k]
            })
            .collect();
        Ok(GridField { grid: self.grid.clone(), values })
    }
}

/// P applied frame by frame.
pub fn apply_p(w: &TimeField, coeffs: &PerturbationCoeffs, scheme: Scheme) -> Result<TimeField> {
    let mut frames: Vec<GridField> = w.frames.iter().map(|f| coeffs.apply_frame(f, scheme)).collect::<Result<_>>()?;
    if let Some(rho) = &coeffs.fold_weight {
        let ne = coeffs.grid.n_eta();
        let wtt = w.dt(2, scheme);
        for (fr, d) in frames.iter_mut().zip(&wtt.frames) {
            for (k, v) in fr.values.iter_mut().enumerate() {
                *v += (1.0 - rho[k / ne]) * d.values[k];
            }
        }
    }
    TimeField::new(w.time.clone(), frames)
}

/// f(t, ξ, η) = φ^{2/q} h(t, x(ξ), y(ξ, η)).
pub fn push_forward_rhs(
    prof: &XiProfile,
    grid: &Arc<StripGrid>,
    time: &Arc<PanelLine>,
    p: f64,
    h: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<TimeField> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(CuspError::Invalid(format!("p = {p} must lie in (1, inf)")));
    }
    let rho = prof.phi_pow(weight_exponent(p));
    let frames = time
        .nodes
        .iter()
        .map(|&t| {
            GridField::from_idx(grid, |i, j| {
                let (x, y) = prof.point(i, grid.eta.nodes[j]);
                C64::new(rho[i] * h(t, x, y), 0.0)
            })
        })
        .collect();
    let f = TimeField::new(time.clone(), frames)?;
    for fr in &f.frames {
        fr.check_finite()?;
    }
    Ok(f)
}

/// Field on the cusp domain sampled at the images of the strip nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspField {
    pub times: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    /// quadrature weights for dx dy (strip weights times φ²)
    pub measure: Vec<f64>,
    pub frames: Vec<Vec<C64>>,
}

fn lp(values: &[C64], weights: &[f64], p: f64) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// max over time pairs of ||g(t) - g(t')||_p / |t - t'|^θ with the given weights.
pub fn holder_weighted(times: &[f64], frames: &[Vec<C64>], weights: &[f64], theta: f64, p: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(CuspError::Invalid(format!("theta = {theta} must lie in (0,1)")));
    }
    let mut best = 0.0f64;
    let mut diff = vec![C64::default(); weights.len()];
    for a in 0..times.len() {
        for b in a + 1..times.len() {
            for ((d, x), y) in diff.iter_mut().zip(&frames[b]).zip(&frames[a]) {
                *d = x - y;
            }
            best = best.max(lp(&diff, weights, p) / (times[b] - times[a]).abs().powf(theta));
        }
    }
    Ok(best)
}

impl CuspField {
    pub fn lp_norm(&self, frame: usize, p: f64) -> f64 {
        lp(&self.frames[frame], &self.measure, p)
    }

    pub fn sup_norm(&self, p: f64) -> f64 {
        (0..self.frames.len()).map(|k| self.lp_norm(k, p)).fold(0.0, f64::max)
    }

    pub fn holder_seminorm(&self, theta: f64, p: f64) -> Result<f64> {
        holder_weighted(&self.times, &self.frames, &self.measure, theta, p)
    }

    fn write_dir(&self, dir: &Path, label: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut idx = std::fs::File::create(dir.join("index.csv"))?;
        writeln!(idx, "# field={label} frames={} points={}", self.frames.len(), self.points.len())?;
        writeln!(idx, "frame,t,file")?;
        for (k, t) in self.times.iter().enumerate() {
            let name = format!("frame_{k:04}.csv");
            writeln!(idx, "{k},{t:e},{name}")?;
            let mut fh = std::io::BufWriter::new(std::fs::File::create(dir.join(&name))?);
            writeln!(fh, "# field={label}(t={t})")?;
            writeln!(fh, "x,y,measure,re,im")?;
            for ((pt, m), v) in self.points.iter().zip(&self.measure).zip(&self.frames[k]) {
                writeln!(fh, "{:e},{:e},{:e},{:e},{:e}", pt.0, pt.1, m, v.re, v.im)?;
            }
        }
        Ok(())
    }

    fn read_dir(dir: &Path) -> Result<Self> {
        let idx = read_rows(&dir.join("index.csv"))?;
        let mut out = CuspField { times: Vec::new(), points: Vec::new(), measure: Vec::new(), frames: Vec::new() };
        for (k, row) in idx.iter().enumerate() {
            out.times.push(parse(&row[1])?);
            let rows = read_rows(&dir.join(&row[2]))?;
            let mut fr = Vec::with_capacity(rows.len());
            for r in &rows {
                if k == 0 {
                    out.points.push((parse(&r[0])?, parse(&r[1])?));
                    out.measure.push(parse(&r[2])?);
                }
                fr.push(C64::new(parse(&r[3])?, parse(&r[4])?));
            }
            out.frames.push(fr);
        }
        Ok(out)
    }
}

/// u = φ^{2/q} w at the mapped nodes, and the weighted field φ^{-2} u = φ^{-2/p} w.
pub fn pull_back_solution(prof: &XiProfile, w: &TimeField, p: f64) -> Result<(CuspField, CuspField)> {
    let g = w.grid();
    if prof.x.len() != g.n_xi() {
        return Err(CuspError::GridMismatch);
    }
    let s = weight_exponent(p);
    let rho = prof.phi_pow(s);
    let inv = prof.phi_pow(s - 2.0);
    let (mut points, mut measure) = (Vec::with_capacity(g.len()), Vec::with_capacity(g.len()));
    for i in 0..g.n_xi() {
        for (j, &eta) in g.eta.nodes.iter().enumerate() {
            points.push(prof.point(i, eta));
            measure.push(g.weight(i, j) * prof.phi[i] * prof.phi[i]);
        }
    }
    let ne = g.n_eta();
    let scale = |r: &[f64]| -> Vec<Vec<C64>> {
        w.frames.iter().map(|f| f.values.iter().enumerate().map(|(k, v)| v * r[k / ne]).collect()).collect()
    };
    let times = w.times().to_vec();
    let u = CuspField { times: times.clone(), points: points.clone(), measure: measure.clone(), frames: scale(&rho) };
    let weighted = CuspField { times, points, measure, frames: scale(&inv) };
    Ok((u, weighted))
}

/// ∂²_x u and ∂²_y u at the strip nodes for u = v ∘ T, v = φ^{2/q} w, from
/// ξ = ∫_x^a dσ/φ, η = (y - φ₂)/φ and the chain rule:
/// φ² u_yy = v_ηη,
/// φ² u_xx = v_ξξ + 2β v_ξη + β² v_ηη + φ'(v_ξ + β v_η) - φ(φ₂'' + ηφ'' - φ'β/φ) v_η,
/// with β = φ₂' + ηφ'.
pub fn cusp_second_derivatives(prof: &XiProfile, w: &GridField, p: f64, scheme: Scheme) -> (GridField, GridField) {
    let g = &w.grid;
    let ne = g.n_eta();
    let rho = prof.phi_pow(weight_exponent(p));
    let v = GridField { grid: g.clone(), values: w.values.iter().enumerate().map(|(k, x)| x * rho[k / ne]).collect() };
    cusp_second_derivatives_v(prof, &v, scheme)
}

/// As `cusp_second_derivatives` for a given v on the strip.
pub fn cusp_second_derivatives_v(prof: &XiProfile, v: &GridField, scheme: Scheme) -> (GridField, GridField) {
    let g = &v.grid;
    let ne = g.n_eta();
    let vx = v.deriv(0, 1, scheme);
    let vxx = v.deriv(0, 2, scheme);
    let ve = v.deriv(1, 1, scheme);
    let vee = v.deriv(1, 2, scheme);
    let vxe = ve.deriv(0, 1, scheme);
    let mut uxx = GridField::zeros(g);
    let mut uyy = GridField::zeros(g);
    for k in 0..g.len() {
        let (i, j) = (k / ne, k % ne);
        let eta = g.eta.nodes[j];
        let (phi, dphi, ddphi) = (prof.phi[i], prof.dphi[i], prof.ddphi[i]);
        let beta = prof.dphi2[i] + eta * dphi;
        let p2 = phi * phi;
        uyy.values[k] = vee.values[k] / p2;
        uxx.values[k] = (vxx.values[k]
            + 2.0 * beta * vxe.values[k]
            + beta * beta * vee.values[k]
            + dphi * (vx.values[k] + beta * ve.values[k])
            - (phi * (prof.ddphi2[i] + eta * ddphi) - dphi * beta) * ve.values[k])
            / p2;
    }
    (uxx, uyy)
}

/// Principal-problem solution with residual diagnostics.
#[derive(Debug, Clone)]
pub struct PrincipalSolution {
    pub solution: AbstractSolution,
    /// unweighted equation w'' - Δw - λw = f and all boundary conditions
    pub residual: ResidualReport,
    /// sup_t ||ϱ w'' - Δw - λw - f||_2 / sup_t ||f||_2 with ϱ = φ^{2/q}
    pub weighted_residual: f64,
}

/// Solves the unweighted principal problem and reports the ϱ-weighted residual.
pub fn solve_principal(f: &TimeField, prof: &XiProfile, p: f64, opts: &AbstractOptions) -> Result<PrincipalSolution> {
    let solution = solve_abstract(f, opts)?;
    let scheme = Scheme::Panel;
    let residual = residual_abstract(&solution.w, f, opts.lambda, scheme)?;
    let weighted_residual = weighted_residual(&solution.w, f, prof, p, opts.lambda, scheme)?;
    Ok(PrincipalSolution { solution, residual, weighted_residual })
}

/// sup_t ||ϱ w'' - Δw - λw - f||_2 relative to sup_t ||f||_2 (absolute if f = 0).
pub fn weighted_residual(w: &TimeField, f: &TimeField, prof: &XiProfile, p: f64, lambda: f64, scheme: Scheme) -> Result<f64> {
    let g = w.grid();
    let ne = g.n_eta();
    let rho = prof.phi_pow(weight_exponent(p));
    let wtt = w.dt(2, scheme);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (a, fr) in w.frames.iter().enumerate() {
        let lap = fr.deriv(0, 2, scheme).add(&fr.deriv(1, 2, scheme))?;
        let vals = (0..fr.values.len())
            .map(|k| rho[k / ne] * wtt.frames[a].values[k] - lap.values[k] - lambda * fr.values[k] - f.frames[a].values[k])
            .collect();
        num = num.max(GridField { grid: g.clone(), values: vals }.lp_norm(2.0)?);
        den = den.max(f.frames[a].lp_norm(2.0)?);
    }
    Ok(if den > 0.0 { num / den } else { num })
}

/// Outcome of the Neumann iteration w_{k+1} = S(f + P w_k).
#[derive(Debug, Clone)]
pub struct NeumannResult {
    pub w: TimeField,
    /// ||w_{k+1} - w_k|| / ||w_k|| per iteration (sup_t L²)
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub divergent: bool,
}

/// Ratio above which the iteration stops as divergent.
pub const DIVERGENCE_RATIO: f64 = 10.0;

pub fn neumann_iterate(
    f: &TimeField,
    coeffs: &PerturbationCoeffs,
    opts: &AbstractOptions,
    max_iter: usize,
    tol: f64,
) -> Result<NeumannResult> {
    if max_iter < 1 {
        return Err(CuspError::Invalid("max_iter must be at least 1".into()));
    }
    let mut w = solve_abstract(f, opts)?.w;
    let mut history = Vec::new();
    let mut prev_step = f64::NAN;
    for it in 1..=max_iter {
        let rhs = f.add(&apply_p(&w, coeffs, Scheme::Panel)?)?;
        let next = solve_abstract(&rhs, opts)?.w;
        let step = next.sub(&w)?.sup_norm(2.0)?;
        let base = w.sup_norm(2.0)?;
        let ratio = if base > 0.0 { step / base } else { step };
        history.push(ratio);
        let divergent = ratio > DIVERGENCE_RATIO || (prev_step.is_finite() && step > DIVERGENCE_RATIO * prev_step);
        prev_step = step;
        w = next;
        if divergent {
            return Ok(NeumannResult { w, history, iterations: it, converged: false, divergent: true });
        }
        if ratio <= tol {
            return Ok(NeumannResult { w, history, iterations: it, converged: true, divergent: false });
        }
    }
    Ok(NeumannResult { w, history, iterations: max_iter, converged: false, divergent: false })
}

/// Strip grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub xi_max: f64,
    pub h0: f64,
    pub hmax: f64,
    pub eta_panels: usize,
    /// nodes per panel
    pub m: usize,
    /// time nodes (odd); with grading, 4/(nt-1) is the interior panel length
    pub nt: usize,
    /// first time-panel length at t = 0 and t = 1 (0 = uniform grid)
    #[serde(default)]
    pub h_end: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { xi_max: 4.0, h0: 0.25, hmax: 1.0, eta_panels: 2, m: 9, nt: 33, h_end: 1.0 / 256.0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi_max > 0.0 && self.h0 > 0.0 && self.hmax >= self.h0) {
            return Err(CuspError::Invalid("grid: need xi_max > 0 and 0 < h0 <= hmax".into()));
        }
        if self.eta_panels < 1 || self.m < 3 || self.nt < 5 || self.nt % 2 == 0 {
            return Err(CuspError::Invalid("grid: eta_panels >= 1, m >= 3, odd nt >= 5 required".into()));
        }
        if self.h_end < 0.0 || (self.h_end > 0.0 && ((self.nt - 1) % 4 != 0 || self.h_end > 4.0 / (self.nt - 1) as f64)) {
            return Err(CuspError::Invalid("grid: graded time needs nt = 4k+1 and 0 < h_end <= 4/(nt-1)".into()));
        }
        Ok(())
    }
    pub fn strip(&self) -> Arc<StripGrid> {
        StripGrid::standard(self.xi_max, self.h0, self.hmax, self.eta_panels, self.m)
    }
    pub fn time(&self) -> Arc<PanelLine> {
        if self.h_end > 0.0 {
            graded_time_line(self.h_end, 4.0 / (self.nt - 1) as f64, 5)
        } else {
            time_line(self.nt)
        }
    }
    /// Halved panel sizes and time step.
    pub fn refined(&self) -> Self {
        GridSpec { h0: 0.5 * self.h0, hmax: 0.5 * self.hmax, eta_panels: 2 * self.eta_panels, nt: 2 * self.nt - 1, h_end: 0.5 * self.h_end, ..*self }
    }
}

/// Everything needed to run the pipeline.
#[derive(Clone)]
pub struct ProblemInstance {
    pub profiles: ProfilePair,
    pub lambda: f64,
    pub p: f64,
    pub theta: f64,
    pub grid: GridSpec,
    pub options: AbstractOptions,
    /// Some((max_iter, tol)) runs the Neumann iteration for the perturbed problem
    pub neumann: Option<(usize, f64)>,
    /// fold (1 - ϱ) ∂²_t w into the perturbation (off by default)
    pub fold_weight: bool,
    pub growth_tol: f64,
    pub residual_tol: f64,
}

impl ProblemInstance {
    pub fn new(profiles: ProfilePair, lambda: f64, p: f64, theta: f64, grid: GridSpec) -> Result<Self> {
        let s = ProblemInstance {
            profiles,
            lambda,
            p,
            theta,
            grid,
            options: AbstractOptions { lambda, ..Default::default() },
            neumann: None,
            fold_weight: false,
            growth_tol: 1.2,
            residual_tol: 1e-4,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(CuspError::Invalid(format!("lambda = {} must be positive", self.lambda)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(CuspError::Invalid(format!("p = {} must lie in (1, inf)", self.p)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(CuspError::Invalid(format!("theta = {} must lie in (0,1)", self.theta)));
        }
        if self.options.lambda != self.lambda {
            return Err(CuspError::Invalid("solver lambda differs from the problem lambda".into()));
        }
        self.grid.validate()?;
        let v = crate::geometry::validate_profiles(&self.profiles, 64, 1e-12)?;
        if !v.pass() {
            let bad: Vec<String> = v.rows.iter().filter(|r| !r.pass).map(|r| format!("({})", r.condition)).collect();
            return Err(CuspError::Domain(format!("profiles violate condition {}", bad.join(", "))));
        }
        Ok(())
    }

    pub fn with_grid(&self, grid: GridSpec) -> Self {
        ProblemInstance { grid, ..self.clone() }
    }
}

/// Discrete Hölder data of h and of f = φ^{2/q} h at nt and refined time grids.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DataHolderCheck {
    pub nt: Vec<usize>,
    pub h_seminorm: Vec<f64>,
    pub f_seminorm: Vec<f64>,
    pub growth_h: f64,
    pub growth_f: f64,
    pub pass: bool,
}

/// Samples h and its push-forward at three time resolutions and compares
/// the growth of the discrete θ-seminorms (L^p(Ω) and L^p(Q)).
pub fn data_holder_check(
    prof: &XiProfile,
    grid: &Arc<StripGrid>,
    h: &dyn Fn(f64, f64, f64) -> f64,
    nt: usize,
    theta: f64,
    p: f64,
    growth_tol: f64,
) -> Result<DataHolderCheck> {
    let mut c = DataHolderCheck { nt: vec![], h_seminorm: vec![], f_seminorm: vec![], growth_h: 0.0, growth_f: 0.0, pass: false };
    let (omega_w, strip_w) = measures(prof, grid);
    let rho = prof.phi_pow(weight_exponent(p));
    let ne = grid.n_eta();
    let mut n = nt;
    for _ in 0..3 {
        let times: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let hf: Vec<Vec<C64>> = times
            .iter()
            .map(|&t| {
                (0..grid.len())
                    .map(|k| {
                        let (x, y) = prof.point(k / ne, grid.eta.nodes[k % ne]);
                        C64::new(h(t, x, y), 0.0)
                    })
                    .collect()
            })
            .collect();
        let ff: Vec<Vec<C64>> = hf.iter().map(|fr| fr.iter().enumerate().map(|(k, v)| v * rho[k / ne]).collect()).collect();
        c.nt.push(n);
        c.h_seminorm.push(holder_weighted(&times, &hf, &omega_w, theta, p)?);
        c.f_seminorm.push(holder_weighted(&times, &ff, &strip_w, theta, p)?);
        n = 2 * n - 1;
    }
    let growth = |v: &[f64]| if v[1] > 0.0 { v[2] / v[1] } else { 1.0 };
    c.growth_h = growth(&c.h_seminorm);
    c.growth_f = growth(&c.f_seminorm);
    c.pass = c.h_seminorm.iter().chain(&c.f_seminorm).all(|v| v.is_finite())
        && c.growth_h <= growth_tol
        && c.growth_f <= growth_tol;
    Ok(c)
}

/// (dx dy weights, dξ dη weights) at the strip nodes.
fn measures(prof: &XiProfile, grid: &StripGrid) -> (Vec<f64>, Vec<f64>) {
    let mut om = Vec::with_capacity(grid.len());
    let mut st = Vec::with_capacity(grid.len());
    for i in 0..grid.n_xi() {
        for j in 0..grid.n_eta() {
            st.push(grid.weight(i, j));
            om.push(grid.weight(i, j) * prof.phi[i] * prof.phi[i]);
        }
    }
    (om, st)
}

/// Regularity quantities at one resolution.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LevelMeasures {
    pub nt: usize,
    pub n_xi: usize,
    pub n_eta: usize,
    /// [∂²_t u]_θ in L^p(Ω)
    pub utt: f64,
    /// [∂²_x u]_θ in L^p(Ω)
    pub uxx: f64,
    /// [∂²_y u]_θ in L^p(Ω)
    pub uyy: f64,
    /// sup_t ||∂²_t (φ^{-2} u)||_{L^p(Ω)}
    pub c2_proxy: f64,
    /// [ϱ ∂²_t w]_θ in L^p(Q)
    pub strip_rho_wtt: f64,
    /// [∂²_ξ w + ∂²_η w]_θ in L^p(Q)
    pub strip_lap: f64,
}

impl LevelMeasures {
    pub fn values(&self) -> [(&'static str, f64); 6] {
        [
            ("holder_utt", self.utt),
            ("holder_uxx", self.uxx),
            ("holder_uyy", self.uyy),
            ("c2_proxy_weighted_u", self.c2_proxy),
            ("holder_rho_wtt", self.strip_rho_wtt),
            ("holder_strip_laplacian", self.strip_lap),
        ]
    }
}

/// Evaluates the regularity quantities of a solved strip field. ∂²_t w is
/// taken from the equation, w'' = Δw + λw + f, and pulled back with the
/// geometry factors.
pub fn level_measures(w: &TimeField, f: &TimeField, prof: &XiProfile, lambda: f64, theta: f64, p: f64) -> Result<LevelMeasures> {
    let g = w.grid().clone();
    let ne = g.n_eta();
    let scheme = Scheme::Panel;
    let s = weight_exponent(p);
    let rho = prof.phi_pow(s);
    let (om, st) = measures(prof, &g);
    let times = w.times().to_vec();
    let (mut utt, mut uxx, mut uyy, mut wtt_q, mut lap_q) = (vec![], vec![], vec![], vec![], vec![]);
    let mut c2 = 0.0f64;
    for (a, fr) in w.frames.iter().enumerate() {
        let lap = fr.deriv(0, 2, scheme).add(&fr.deriv(1, 2, scheme))?;
        let wtt: Vec<C64> =
            (0..g.len()).map(|k| lap.values[k] + lambda * fr.values[k] + f.frames[a].values[k]).collect();
        // φ^{-2} u = φ^{-2/p} w, and its L^p(Ω) norm equals the L^p(Q) norm of w''
        c2 = c2.max(lp(&wtt, &st, p));
        let (xx, yy) = cusp_second_derivatives(prof, fr, p, scheme);
        utt.push(wtt.iter().enumerate().map(|(k, v)| v * rho[k / ne]).collect::<Vec<_>>());
        wtt_q.push(wtt.iter().enumerate().map(|(k, v)| v * rho[k / ne]).collect::<Vec<_>>());
        uxx.push(xx.values);
        uyy.push(yy.values);
        lap_q.push(lap.values);
    }
    Ok(LevelMeasures {
        nt: times.len(),
        n_xi: g.n_xi(),
        n_eta: ne,
        utt: holder_weighted(&times, &utt, &om, theta, p)?,
        uxx: holder_weighted(&times, &uxx, &om, theta, p)?,
        uyy: holder_weighted(&times, &uyy, &om, theta, p)?,
        c2_proxy: c2,
        strip_rho_wtt: holder_weighted(&times, &wtt_q, &st, theta, p)?,
        strip_lap: holder_weighted(&times, &lap_q, &st, theta, p)?,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RegularityReport {
    pub theta: f64,
    pub p: f64,
    pub growth_tol: f64,
    pub levels: Vec<LevelMeasures>,
    /// (quantity, finest / coarsest)
    pub growth: Vec<(String, f64)>,
    pub flags: Vec<String>,
    pub pass: bool,
}

/// PASS = every quantity finite at every level and growth ≤ growth_tol between levels.
pub fn regularity_report(levels: Vec<LevelMeasures>, theta: f64, p: f64, growth_tol: f64) -> RegularityReport {
    let mut flags = Vec::new();
    let finite = levels.iter().all(|l| l.values().iter().all(|(_, v)| v.is_finite()));
    if !finite {
        flags.push("non-finite seminorm".into());
    }
    let mut growth = Vec::new();
    if levels.len() < 2 {
        flags.push("single-level report".into());
    } else {
        let (a, b) = (&levels[levels.len() - 2], &levels[levels.len() - 1]);
        for ((name, x), (_, y)) in a.values().iter().zip(b.values()) {
            let r = if *x > 0.0 { y / x } else if y == 0.0 { 1.0 } else { f64::INFINITY };
            if !(r <= growth_tol) {
                flags.push(format!("unbounded growth of {name}: factor {r:.3} > {growth_tol}"));
            }
            growth.push((name.to_string(), r));
        }
    }
    let pass = finite && levels.len() >= 2 && flags.is_empty();
    RegularityReport { theta, p, growth_tol, levels, growth, flags, pass }
}

/// Result bundle of the full pipeline.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub w: TimeField,
    pub f: TimeField,
    pub u: CuspField,
    pub weighted: CuspField,
    pub residual: ResidualReport,
    pub weighted_residual: f64,
    /// residual of the perturbed equation w'' - Δw - λw - Pw - f
    pub perturbation_residual: f64,
    pub data_check: DataHolderCheck,
    pub neumann: Option<NeumannResult>,
    pub regularity: Option<RegularityReport>,
    /// (label, relative difference)
    pub diffs: Vec<(String, f64)>,
    pub warnings: Vec<String>,
    pub config_echo: String,
}

/// Pipeline: push-forward, principal solve (or Neumann iteration), pull-back.
pub fn solve_original(inst: &ProblemInstance, h: &dyn Fn(f64, f64, f64) -> f64) -> Result<SolutionBundle> {
    inst.validate()?;
    let domain = CuspDomain::new(inst.profiles.clone(), inst.grid.xi_max)?;
    let grid = inst.grid.strip();
    let time = inst.grid.time();
    let prof = XiProfile::new(&domain, &grid)?;
    let mut warnings = Vec::new();
    let data_check = data_holder_check(&prof, &grid, h, time.len(), inst.theta, inst.p, inst.growth_tol)?;
    if !data_check.pass {
        warnings.push(format!(
            "data outside the C^theta hypothesis: seminorm growth h {:.3}, f {:.3}",
            data_check.growth_h, data_check.growth_f
        ));
    }
    let f = push_forward_rhs(&prof, &grid, &time, inst.p, h)?;
    let mut coeffs = PerturbationCoeffs::new(&prof, &grid, inst.p)?;
    if inst.fold_weight {
        coeffs = coeffs.with_weight_fold(&prof);
    }
    let principal = solve_principal(&f, &prof, inst.p, &inst.options)?;
    warnings.extend(principal.solution.warnings.iter().cloned());
    let (w, neumann) = match inst.neumann {
        Some((it, tol)) => {
            let n = neumann_iterate(&f, &coeffs, &inst.options, it, tol)?;
            if n.divergent {
                warnings.push("divergent iteration".into());
            }
            (n.w.clone(), Some(n))
        }
        None => (principal.solution.w.clone(), None),
    };
    let residual = residual_abstract(&w, &f, inst.lambda, Scheme::Panel)?;
    if residual.interior > inst.residual_tol {
        warnings.push(format!("interior residual {:.2e} above {:.0e}", residual.interior, inst.residual_tol));
    }
    let pw = apply_p(&w, &coeffs, Scheme::Panel)?;
    let rhs_p = f.add(&pw)?;
    let perturbation_residual = residual_abstract(&w, &rhs_p, inst.lambda, Scheme::Panel)?.interior;
    let weighted_residual = weighted_residual(&w, &f, &prof, inst.p, inst.lambda, Scheme::Panel)?;
    let (u, weighted) = pull_back_solution(&prof, &w, inst.p)?;
    Ok(SolutionBundle {
        w,
        f,
        u,
        weighted,
        residual,
        weighted_residual,
        perturbation_residual,
        data_check,
        neumann,
        regularity: None,
        diffs: Vec::new(),
        warnings,
        config_echo: String::new(),
    })
}

/// Two-level refinement study: solves at `inst.grid` and its refinement.
pub fn regularity_study(inst: &ProblemInstance, h: &dyn Fn(f64, f64, f64) -> f64) -> Result<(SolutionBundle, RegularityReport)> {
    let mut levels = Vec::new();
    let mut last = None;
    for g in [inst.grid, inst.grid.refined()] {
        let li = inst.with_grid(g);
        let b = solve_original(&li, h)?;
        let domain = CuspDomain::new(li.profiles.clone(), g.xi_max)?;
        let prof = XiProfile::new(&domain, b.w.grid())?;
        levels.push(level_measures(&b.w, &b.f, &prof, li.lambda, li.theta, li.p)?);
        last = Some(b);
    }
    let rep = regularity_report(levels, inst.theta, inst.p, inst.growth_tol);
    let mut b = last.unwrap();
    b.regularity = Some(rep.clone());
    Ok((b, rep))
}

// ---- bundle serialization ----

#[derive(serde::Serialize, serde::Deserialize)]
struct LineDesc {
    breaks: Vec<f64>,
    m: usize,
    kind: NodeKind,
}

impl LineDesc {
    fn of(l: &PanelLine) -> Self {
        LineDesc { breaks: l.breaks.clone(), m: l.m, kind: l.kind }
    }
    fn build(&self) -> PanelLine {
        PanelLine::new(&self.breaks, self.m, self.kind)
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct GridDesc {
    time: LineDesc,
    xi: LineDesc,
    eta: LineDesc,
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let fh = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    let mut header = true;
    for line in fh.lines() {
        let line = line?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if header {
            header = false;
            continue;
        }
        out.push(line.split(',').map(|s| s.to_string()).collect());
    }
    Ok(out)
}

fn parse(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| CuspError::Io(format!("bad number {s:?}: {e}")))
}

fn write_time_field(w: &TimeField, dir: &Path, label: &str) -> Result<()> {
    w.write_dir(dir, label)?;
    let desc = GridDesc { time: LineDesc::of(&w.time), xi: LineDesc::of(&w.grid().xi), eta: LineDesc::of(&w.grid().eta) };
    let s = toml::to_string(&desc).map_err(|e| CuspError::Io(e.to_string()))?;
    std::fs::write(dir.join("grid.toml"), s)?;
    Ok(())
}

fn read_time_field(dir: &Path) -> Result<TimeField> {
    let desc: GridDesc =
        toml::from_str(&std::fs::read_to_string(dir.join("grid.toml"))?).map_err(|e| CuspError::Io(e.to_string()))?;
    let grid = StripGrid::new(desc.xi.build(), desc.eta.build());
    let time = Arc::new(desc.time.build());
    let idx = read_rows(&dir.join("index.csv"))?;
    let mut frames = Vec::with_capacity(idx.len());
    for row in &idx {
        let rows = read_rows(&dir.join(&row[2]))?;
        if rows.len() != grid.len() {
            return Err(CuspError::Io(format!("{}: expected {} rows", row[2], grid.len())));
        }
        let values = rows.iter().map(|r| Ok(C64::new(parse(&r[2])?, parse(&r[3])?))).collect::<Result<_>>()?;
        frames.push(GridField { grid: grid.clone(), values });
    }
    TimeField::new(time, frames)
}

/// Fields read back from a bundle directory.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleFields {
    pub w: TimeField,
    pub f: TimeField,
    pub u: CuspField,
    pub weighted: CuspField,
    pub config_echo: String,
}

impl SolutionBundle {
    /// Layout: w/, f/, u/, u/weighted/, reports/*.csv, config-echo.toml.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("reports"))?;
        write_time_field(&self.w, &dir.join("w"), "w")?;
        write_time_field(&self.f, &dir.join("f"), "f")?;
        self.u.write_dir(&dir.join("u"), "u")?;
        self.weighted.write_dir(&dir.join("u").join("weighted"), "phi^-2 u")?;
        std::fs::write(dir.join("config-echo.toml"), &self.config_echo)?;
        let r = &self.residual;
        let mut fh = std::fs::File::create(dir.join("reports/residuals.csv"))?;
        writeln!(fh, "# relative residuals (dimensionless); scheme={}", r.scheme)?;
        writeln!(fh, "quantity,value")?;
        writeln!(fh, "interior,{:e}", r.interior)?;
        for (k, v) in r.spatial_bc.iter().enumerate() {
            writeln!(fh, "spatial_bc_{k},{v:e}")?;
        }
        writeln!(fh, "ventcel_t0,{:e}", r.ventcel[0])?;
        writeln!(fh, "ventcel_t1,{:e}", r.ventcel[1])?;
        writeln!(fh, "weighted_rho,{:e}", self.weighted_residual)?;
        writeln!(fh, "perturbation,{:e}", self.perturbation_residual)?;
        let d = &self.data_check;
        let mut fh = std::fs::File::create(dir.join("reports/data_holder.csv"))?;
        writeln!(fh, "# discrete C^theta seminorms of h (Lp(Omega)) and f (Lp(Q)); growth_tol applies to the last pair")?;
        writeln!(fh, "nt,h_seminorm,f_seminorm")?;
        for k in 0..d.nt.len() {
            writeln!(fh, "{},{:e},{:e}", d.nt[k], d.h_seminorm[k], d.f_seminorm[k])?;
        }
        if let Some(n) = &self.neumann {
            let mut fh = std::fs::File::create(dir.join("reports/neumann.csv"))?;
            writeln!(fh, "# converged={} divergent={}", n.converged, n.divergent)?;
            writeln!(fh, "iteration,relative_step")?;
            for (k, v) in n.history.iter().enumerate() {
                writeln!(fh, "{},{v:e}", k + 1)?;
            }
        }
        if let Some(r) = &self.regularity {
            write_regularity(r, &dir.join("reports/regularity.csv"))?;
        }
        let mut fh = std::fs::File::create(dir.join("reports/diffs.csv"))?;
        writeln!(fh, "# relative L2 differences between backends")?;
        writeln!(fh, "comparison,value")?;
        for (k, v) in &self.diffs {
            writeln!(fh, "{k},{v:e}")?;
        }
        let mut fh = std::fs::File::create(dir.join("reports/warnings.csv"))?;
        writeln!(fh, "warning")?;
        for w in &self.warnings {
            writeln!(fh, "\"{}\"", w.replace('"', "'"))?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<BundleFields> {
        Ok(BundleFields {
            w: read_time_field(&dir.join("w"))?,
            f: read_time_field(&dir.join("f"))?,
            u: CuspField::read_dir(&dir.join("u"))?,
            weighted: CuspField::read_dir(&dir.join("u").join("weighted"))?,
            config_echo: std::fs::read_to_string(dir.join("config-echo.toml"))?,
        })
    }
}

pub fn write_regularity(r: &RegularityReport, path: &Path) -> Result<()> {
    let mut fh = std::fs::File::create(path)?;
    writeln!(
        fh,
        "# theta={} p={} growth_tol={} pass={} flags={}",
        r.theta,
        r.p,
        r.growth_tol,
        r.pass,
        r.flags.join("; ")
    )?;
    writeln!(fh, "quantity,{},growth", r.levels.iter().map(|l| format!("nt{}_nxi{}_neta{}", l.nt, l.n_xi, l.n_eta)).collect::<Vec<_>>().join(","))?;
    for (q, _) in r.levels.first().map(|l| l.values()).unwrap_or_default().iter() {
        let vals: Vec<String> =
            r.levels.iter().map(|l| format!("{:e}", l.values().iter().find(|x| x.0 == *q).unwrap().1)).collect();
        let g = r.growth.iter().find(|x| x.0 == *q).map(|x| format!("{:e}", x.1)).unwrap_or_default();
        writeln!(fh, "{q},{},{g}", vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> (CuspDomain, Arc<StripGrid>, XiProfile) {
        let d = CuspDomain::new(ProfilePair::quadratic_symmetric(1.0), 30.0).unwrap();
        let g = StripGrid::standard(4.0, 0.25, 1.0, 2, 9);
        let p = XiProfile::new(&d, &g).unwrap();
        (d, g, p)
    }

    #[test]
    fn p_hand_evaluation() {
        // x = 1/2: φ = 1/2, φ' = 2, φ'' = 4, φ₂' = -1, φ₂'' = -2, q = 2
        let eta = 0.25;
        let c = p_symbol(1.0, eta, 0.5, 2.0, 4.0, -1.0, -2.0);
        assert!((c[6] - (-3.0 + 6.0 * eta)).abs() < 1e-15);
        // w = η: groups 1, 5 (w part), 6 and the ∂_η piece of group 4
        let pw = c[0] * eta + c[4] + c[5] * (0.0 - 2.0 * eta) + c[6];
        assert!((pw - (16.0 * eta - 7.0)).abs() < 1e-14);
    }

    #[test]
    fn push_forward_point_values() {
        let (_, g, prof) = demo();
        let tl = time_line(5);
        let f = push_forward_rhs(&prof, &g, &tl, 2.0, &|t, _, _| t).unwrap();
        // ξ = 0 ⇒ x = 1, φ = 2
        for (k, t) in tl.nodes.iter().enumerate() {
            assert!((f.frames[k].at(0, 3).re - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rule_matches_analytic_derivatives() {
        let d = CuspDomain::new(ProfilePair::quadratic_symmetric(1.0), 30.0).unwrap();
        let g = StripGrid::standard(2.0, 0.1, 0.25, 2, 12);
        let prof = XiProfile::new(&d, &g).unwrap();
        let u = |x: f64, y: f64| (2.0 * x).sin() * (1.0 + x * y + y * y);
        let uxx = |x: f64, y: f64| -4.0 * (2.0 * x).sin() * (1.0 + x * y + y * y) + 4.0 * (2.0 * x).cos() * y;
        let uyy = |x: f64, _y: f64| 2.0 * (2.0 * x).sin();
        let ne = g.n_eta();
        let v = GridField::from_idx(&g, |i, j| {
            let (x, y) = prof.point(i, g.eta.nodes[j]);
            C64::new(u(x, y), 0.0)
        });
        let (xx, yy) = cusp_second_derivatives_v(&prof, &v, Scheme::Panel);
        let mut e = 0.0f64;
        for k in 0..g.len() {
            let (x, y) = prof.point(k / ne, g.eta.nodes[k % ne]);
            e = e.max((xx.values[k].re - uxx(x, y)).abs() / (1.0 + uxx(x, y).abs()));
            e = e.max((yy.values[k].re - uyy(x, y)).abs() / (1.0 + uyy(x, y).abs()));
        }
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn coefficients_vanish_toward_the_cusp() {
        let (_, g, prof) = demo();
        let c = PerturbationCoeffs::new(&prof, &g, 2.0).unwrap();
        let m: Vec<f64> = (0..g.n_xi()).map(|i| c.max_abs_at(i)).collect();
        assert!(m.last().unwrap() < &m[0]);
    }

    #[test]
    fn zero_data_pipeline() {
        let grid = GridSpec { xi_max: 3.0, nt: 9, h_end: 0.0, ..GridSpec::default() };
        let inst = ProblemInstance::new(ProfilePair::quadratic_symmetric(1.0), 1.0, 2.0, 0.5, grid).unwrap();
        let mut inst = inst;
        inst.options.backend = crate::time_calculus::SpatialBackend::Oracle;
        let b = solve_original(&inst, &|_, _, _| 0.0).unwrap();
        assert!(b.u.frames.iter().all(|f| f.iter().all(|v| v.norm() == 0.0)));
        let lv = level_measures(&b.w, &b.f, &XiProfile::new(&CuspDomain::new(inst.profiles.clone(), 3.0).unwrap(), b.w.grid()).unwrap(), 1.0, 0.5, 2.0).unwrap();
        assert!(lv.values().iter().all(|(_, v)| *v == 0.0));
        let rep = regularity_report(vec![lv.clone(), lv], 0.5, 2.0, 1.2);
        assert!(rep.pass);
    }
}
