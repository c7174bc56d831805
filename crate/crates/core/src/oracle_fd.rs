//! Monolithic second-order finite-difference discretization of the strip
//! problem w'' - Δw - λw = f with Robin/Dirichlet conditions in ξ and η and
//! Ventcel conditions w'' + w' + w = 0 at t = 0, 1, solved as one sparse system.

use crate::error::{CuspError, Result};
use crate::grid::TimeField;
use crate::C64;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::io::Write;

/// Default cap on the number of unknowns.
pub const DEFAULT_SIZE_LIMIT: usize = 200_000;

/// Uniform nodes t_k = k/(nt-1), ξ_i = i X/(nx-1), η_j = j/(ne-1).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FdGrid {
    pub nt: usize,
    pub nx: usize,
    pub ne: usize,
    pub xi_max: f64,
}

impl FdGrid {
    pub fn new(nt: usize, nx: usize, ne: usize, xi_max: f64) -> Result<Self> {
        if nt < 5 || nx < 4 || ne < 4 {
            return Err(CuspError::Invalid("FD grid needs nt >= 5, nx >= 4, ne >= 4".into()));
        }
        if !(xi_max > 0.0) {
            return Err(CuspError::Invalid("xi_max must be positive".into()));
        }
        Ok(FdGrid { nt, nx, ne, xi_max })
    }
    pub fn len(&self) -> usize {
        self.nt * self.nx * self.ne
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Row/column index of node (t_k, ξ_i, η_j).
    #[inline]
    pub fn row(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.nx + i) * self.ne + j
    }
    /// Inverse of `row`.
    pub fn node_of(&self, r: usize) -> (usize, usize, usize) {
        (r / (self.nx * self.ne), (r / self.ne) % self.nx, r % self.ne)
    }
    pub fn t(&self, k: usize) -> f64 {
        k as f64 / (self.nt - 1) as f64
    }
    pub fn xi(&self, i: usize) -> f64 {
        self.xi_max * i as f64 / (self.nx - 1) as f64
    }
    pub fn eta(&self, j: usize) -> f64 {
        j as f64 / (self.ne - 1) as f64
    }
    fn steps(&self) -> (f64, f64, f64) {
        (1.0 / (self.nt - 1) as f64, self.xi_max / (self.nx - 1) as f64, 1.0 / (self.ne - 1) as f64)
    }
}

/// Which equation a row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Interior,
    RobinXi,
    DirichletXi,
    RobinEta,
    DirichletEta,
    Ventcel0,
    Ventcel1,
}

pub struct MonolithicSystem {
    pub grid: FdGrid,
    pub lambda: f64,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<C64>,
    pub kinds: Vec<RowKind>,
}

impl MonolithicSystem {
    /// Row type of a node; spatial boundary conditions take precedence over
    /// the Ventcel rows, Dirichlet over Robin.
    pub fn kind(g: &FdGrid, k: usize, i: usize, j: usize) -> RowKind {
        if i == g.nx - 1 {
            RowKind::DirichletXi
        } else if j == g.ne - 1 {
            RowKind::DirichletEta
        } else if i == 0 {
            RowKind::RobinXi
        } else if j == 0 {
            RowKind::RobinEta
        } else if k == 0 {
            RowKind::Ventcel0
        } else if k == g.nt - 1 {
            RowKind::Ventcel1
        } else {
            RowKind::Interior
        }
    }

    /// Assembles the system for the source f(t, ξ, η).
    pub fn assemble<F: Fn(f64, f64, f64) -> C64>(g: FdGrid, lambda: f64, f: F, size_limit: usize) -> Result<Self> {
        if g.len() > size_limit {
            return Err(CuspError::SizeLimit { got: g.len(), limit: size_limit });
        }
        if !(lambda > 0.0) {
            return Err(CuspError::Invalid(format!("lambda = {lambda} must be positive")));
        }
        let (ht, hx, he) = g.steps();
        let n = g.len();
        let mut trip = Vec::with_capacity(9 * n);
        let mut rhs = vec![C64::default(); n];
        let mut kinds = Vec::with_capacity(n);
        for k in 0..g.nt {
            for i in 0..g.nx {
                for j in 0..g.ne {
                    let r = g.row(k, i, j);
                    let kind = Self::kind(&g, k, i, j);
                    kinds.push(kind);
                    let mut put = |c: usize, v: f64| trip.push((r, c, v));
                    match kind {
                        RowKind::DirichletXi | RowKind::DirichletEta => put(r, 1.0),
                        RowKind::RobinXi => {
                            // (-3w0 + 4w1 - w2)/(2h) - w0 = 0
                            put(g.row(k, 0, j), -1.5 / hx - 1.0);
                            put(g.row(k, 1, j), 2.0 / hx);
                            put(g.row(k, 2, j), -0.5 / hx);
                        }
                        RowKind::RobinEta => {
                            put(g.row(k, i, 0), -1.5 / he - 1.0);
                            put(g.row(k, i, 1), 2.0 / he);
                            put(g.row(k, i, 2), -0.5 / he);
                        }
                        RowKind::Ventcel0 | RowKind::Ventcel1 => {
                            // one-sided second order: w'' ≈ (2w0 - 5w1 + 4w2 - w3)/h²,
                            // w' ≈ ±(-3w0 + 4w1 - w2)/(2h)
                            let (base, s): (usize, f64) = if kind == RowKind::Ventcel0 { (0, 1.0) } else { (g.nt - 1, -1.0) };
                            let at = |m: usize| if s > 0.0 { base + m } else { base - m };
                            let c2 = [2.0, -5.0, 4.0, -1.0];
                            let c1 = [-1.5, 2.0, -0.5, 0.0];
                            for m in 0..4 {
                                let v = c2[m] / (ht * ht) + s * c1[m] / ht + if m == 0 { 1.0 } else { 0.0 };
                                if v != 0.0 {
                                    put(g.row(at(m), i, j), v);
                                }
                            }
                        }
                        RowKind::Interior => {
                            let (a, b, c) = (1.0 / (ht * ht), 1.0 / (hx * hx), 1.0 / (he * he));
                            put(r, -2.0 * a + 2.0 * b + 2.0 * c - lambda);
                            put(g.row(k - 1, i, j), a);
                            put(g.row(k + 1, i, j), a);
                            put(g.row(k, i - 1, j), -b);
                            put(g.row(k, i + 1, j), -b);
                            put(g.row(k, i, j - 1), -c);
                            put(g.row(k, i, j + 1), -c);
                            rhs[r] = f(g.t(k), g.xi(i), g.eta(j));
                        }
                    }
                }
            }
        }
        Ok(MonolithicSystem { grid: g, lambda, triplets: trip, rhs, kinds })
    }

    /// Assembles with the source taken from nodal values (nt × nx × ne, row order).
    pub fn assemble_values(g: FdGrid, lambda: f64, values: &[C64], size_limit: usize) -> Result<Self> {
        if values.len() != g.len() {
            return Err(CuspError::Invalid("source length must equal the node count".into()));
        }
        let (ht, hx) = (g.steps().0, g.steps().1);
        let he = g.steps().2;
        let idx = |t: f64, x: f64, y: f64| {
            let k = (t / ht).round() as usize;
            let i = (x / hx).round() as usize;
            let j = (y / he).round() as usize;
            values[g.row(k, i, j)]
        };
        Self::assemble(g, lambda, idx, size_limit)
    }

    fn matrix(&self) -> Result<SparseColMat<usize, f64>> {
        let n = self.grid.len();
        let t: Vec<Triplet<usize, usize, f64>> = self.triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(n, n, &t).map_err(|e| CuspError::Solver(format!("{e:?}")))
    }

    /// A x for a real vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.grid.len()];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }

    /// Coordinate-format export: header "n nnz", then "row col value" lines.
    pub fn write_coo<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.grid.len(), self.triplets.len())?;
        for &(r, c, v) in &self.triplets {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}

/// FD solution with solver diagnostics.
#[derive(Debug, Clone)]
pub struct FdSolution {
    pub grid: FdGrid,
    /// nodal values in row order
    pub values: Vec<C64>,
    pub residual: f64,
    /// lower bound for the 1-norm condition number
    pub condition_estimate: f64,
}

impl FdSolution {
    pub fn at(&self, k: usize, i: usize, j: usize) -> C64 {
        self.values[self.grid.row(k, i, j)]
    }

    /// sqrt(mean |w|²) over all nodes.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Direct sparse LU solve; real and imaginary parts are solved separately.
pub fn solve_monolithic(sys: &MonolithicSystem) -> Result<FdSolution> {
    let n = sys.grid.len();
    let a = sys.matrix()?;
    let lu = a.sp_lu().map_err(|e| CuspError::Solver(format!("sparse LU failed: {e:?}")))?;
    let solve = |b: &[f64]| -> Vec<f64> {
        let rhs = Col::<f64>::from_fn(n, |i| b[i]);
        let x = lu.solve(&rhs);
        (0..n).map(|i| x[i]).collect()
    };
    // 1-norm condition lower bound from a few probe vectors
    let mut anorm = vec![0.0f64; n];
    for &(_, c, v) in &sys.triplets {
        anorm[c] += v.abs();
    }
    let anorm = anorm.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut inv = 0.0f64;
    for probe in 0..3 {
        let b: Vec<f64> = (0..n).map(|i| if (i * (probe + 1)) % 3 == 0 { 1.0 } else { -0.5 }).collect();
        let x = solve(&b);
        inv = inv.max(norm1(&x) / norm1(&b));
    }
    let cond = anorm * inv;
    let re: Vec<f64> = sys.rhs.iter().map(|v| v.re).collect();
    let im: Vec<f64> = sys.rhs.iter().map(|v| v.im).collect();
    let mut values = vec![C64::default(); n];
    let mut res = 0.0f64;
    let mut bnorm = 0.0f64;
    for (part, b) in [(0usize, &re), (1, &im)] {
        if b.iter().all(|v| *v == 0.0) {
            continue;
        }
        let mut x = solve(b);
        // one step of iterative refinement
        let ax = sys.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        let ax = sys.apply(&x);
        res = res.max(b.iter().zip(&ax).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt());
        bnorm = bnorm.max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
        for (v, xi) in values.iter_mut().zip(&x) {
            if part == 0 {
                v.re = *xi;
            } else {
                v.im = *xi;
            }
        }
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(CuspError::Solver(format!("non-finite FD solution (condition estimate {cond:e})")));
    }
    let residual = if bnorm > 0.0 { res / bnorm } else { res };
    if residual > 1e-10 {
        return Err(CuspError::Solver(format!(
            "relative residual {residual:e} above 1e-10 (condition estimate {cond:e})"
        )));
    }
    Ok(FdSolution { grid: sys.grid, values, residual, condition_estimate: cond })
}

/// Samples a strip TimeField at the FD nodes (time nodes must coincide).
pub fn sample_on_fd(w: &TimeField, g: &FdGrid) -> Result<Vec<C64>> {
    let ts = w.times();
    if ts.len() != g.nt || (0..g.nt).any(|k| (ts[k] - g.t(k)).abs() > 1e-12) {
        return Err(CuspError::GridMismatch);
    }
    if (w.grid().xi_max() - g.xi_max).abs() > 1e-12 * g.xi_max {
        return Err(CuspError::GridMismatch);
    }
    let mut out = vec![C64::default(); g.len()];
    for k in 0..g.nt {
        for i in 0..g.nx {
            for j in 0..g.ne {
                out[g.row(k, i, j)] = w.frames[k].interp(g.xi(i), g.eta(j));
            }
        }
    }
    Ok(out)
}

/// Relative discrete L² difference between an FD solution and a strip field.
pub fn relative_difference(fd: &FdSolution, w: &TimeField) -> Result<f64> {
    let s = sample_on_fd(w, &fd.grid)?;
    let num: f64 = s.iter().zip(&fd.values).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = s.iter().map(|a| a.norm_sqr()).sum();
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_count_and_zero_rhs() {
        let g = FdGrid::new(9, 9, 6, 4.0).unwrap();
        let sys = MonolithicSystem::assemble(g, 1.0, |_, _, _| C64::default(), DEFAULT_SIZE_LIMIT).unwrap();
        assert_eq!(sys.kinds.len(), g.len());
        let s = solve_monolithic(&sys).unwrap();
        assert!(s.values.iter().all(|v| v.norm() <= 1e-9));
    }

    #[test]
    fn size_limit() {
        let g = FdGrid::new(9, 100, 100, 4.0).unwrap();
        let r = MonolithicSystem::assemble(g, 1.0, |_, _, _| C64::default(), 1000);
        assert!(matches!(r, Err(CuspError::SizeLimit { .. })));
    }

    #[test]
    fn manufactured_truncation_is_second_order() {
        // w* satisfies all conditions up to the discretization of its rows
        let lambda = 1.0;
        let x_max = 3.0;
        let err = |n: usize| {
            let g = FdGrid::new(n, n, n, x_max).unwrap();
            // separable w* = T(t) X(ξ) Y(η)
            let xx = |x: f64| (1.0 + x) * (x_max - x);
            let yy = |y: f64| (1.0 + y) * (1.0 - y);
            let tt = |t: f64| (1.0 + t).sin();
            let f = |t: f64, x: f64, y: f64| {
                let (x0, x2) = (xx(x), -2.0);
                let (y0, y2) = (yy(y), -2.0);
                let t0 = tt(t);
                let t2 = -t0;
                C64::new(t2 * x0 * y0 - t0 * x2 * y0 - t0 * x0 * y2 - lambda * t0 * x0 * y0, 0.0)
            };
            let sys = MonolithicSystem::assemble(g, lambda, f, DEFAULT_SIZE_LIMIT).unwrap();
            let mut w: Vec<f64> = (0..g.len())
                .map(|r| {
                    let (k, i, j) = g.node_of(r);
                    tt(g.t(k)) * xx(g.xi(i)) * yy(g.eta(j))
                })
                .collect();
            // Ventcel rows: w* does not satisfy them, so compare interior rows only
            let aw = sys.apply(&w);
            let mut m = 0.0f64;
            for r in 0..g.len() {
                if sys.kinds[r] == RowKind::Interior {
                    m = m.max((aw[r] - sys.rhs[r].re).abs());
                }
            }
            w.clear();
            m
        };
        // quadratic in space, so only the time stencil contributes O(h²)
        let (e1, e2) = (err(9), err(17));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }
}
