//! Sampled fields on the truncated strip (0, xi_max) x (0, 1).

use crate::error::{CuspError, Result};
use crate::panel::{NodeKind, PanelLine};
use crate::C64;
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct StripGrid {
    pub xi: PanelLine,
    pub eta: PanelLine,
}

impl StripGrid {
    pub fn new(xi: PanelLine, eta: PanelLine) -> Arc<Self> {
        Arc::new(StripGrid { xi, eta })
    }

    /// Graded xi panels (clustered at 0) and uniform eta panels, degree m-1.
    pub fn standard(xi_max: f64, h0: f64, hmax: f64, eta_panels: usize, m: usize) -> Arc<Self> {
        Self::new(
            PanelLine::graded(xi_max, h0, 1.5, hmax, m),
            PanelLine::uniform(1.0, eta_panels, m, NodeKind::Chebyshev),
        )
    }

    pub fn xi_max(&self) -> f64 {
        self.xi.b()
    }
    pub fn n_xi(&self) -> usize {
        self.xi.len()
    }
    pub fn n_eta(&self) -> usize {
        self.eta.len()
    }
    pub fn len(&self) -> usize {
        self.n_xi() * self.n_eta()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Flat index, eta fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_eta() + j
    }
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.xi.weights[i] * self.eta.weights[j]
    }
    pub fn node(&self, k: usize) -> (f64, f64) {
        let ne = self.n_eta();
        (self.xi.nodes[k / ne], self.eta.nodes[k % ne])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Arc<StripGrid>,
    pub values: Vec<C64>,
}

impl GridField {
    pub fn zeros(grid: &Arc<StripGrid>) -> Self {
        GridField { grid: grid.clone(), values: vec![C64::default(); grid.len()] }
    }

    pub fn from_fn<F: Fn(f64, f64) -> C64>(grid: &Arc<StripGrid>, f: F) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.node(k);
                f(x, y)
            })
            .collect();
        GridField { grid: grid.clone(), values }
    }

    pub fn from_real<F: Fn(f64, f64) -> f64>(grid: &Arc<StripGrid>, f: F) -> Self {
        Self::from_fn(grid, |x, y| C64::new(f(x, y), 0.0))
    }

    /// b(xi) h(eta).
    pub fn separable(grid: &Arc<StripGrid>, b: &[C64], h: &[C64]) -> Self {
        Self::from_idx(grid, |i, j| b[i] * h[j])
    }

    pub fn from_idx<F: Fn(usize, usize) -> C64>(grid: &Arc<StripGrid>, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_xi() {
            for j in 0..grid.n_eta() {
                values.push(f(i, j));
            }
        }
        GridField { grid: grid.clone(), values }
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[self.grid.idx(i, j)]
    }

    fn check(&self, o: &GridField) -> Result<()> {
        if self.grid != o.grid {
            return Err(CuspError::GridMismatch);
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            Some(k) => Err(CuspError::NonFinite(k)),
            None => Ok(()),
        }
    }

    pub fn add(&self, o: &GridField) -> Result<GridField> {
        self.check(o)?;
        Ok(self.map2(o, |a, b| a + b))
    }

    pub fn sub(&self, o: &GridField) -> Result<GridField> {
        self.check(o)?;
        Ok(self.map2(o, |a, b| a - b))
    }

    pub fn mul(&self, o: &GridField) -> Result<GridField> {
        self.check(o)?;
        Ok(self.map2(o, |a, b| a * b))
    }

    pub fn scale(&self, c: C64) -> GridField {
        GridField { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn axpy(&mut self, c: C64, o: &GridField) {
        for (a, b) in self.values.iter_mut().zip(&o.values) {
            *a += c * b;
        }
    }

    fn map2<F: Fn(C64, C64) -> C64>(&self, o: &GridField, f: F) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&o.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// (sum w |v|^p)^{1/p} with the strip quadrature weights.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(CuspError::Invalid(format!("p = {p} must lie in (1, inf)")));
        }
        self.check_finite()?;
        Ok(self.lp_unchecked(p))
    }

    pub(crate) fn lp_unchecked(&self, p: f64) -> f64 {
        let g = &self.grid;
        let ne = g.n_eta();
        let mut s = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            s += g.xi.weights[k / ne] * g.eta.weights[k % ne] * v.norm().powf(p);
        }
        s.powf(1.0 / p)
    }

    /// L2 inner product <self, o> (conjugate-linear in o).
    pub fn inner(&self, o: &GridField) -> C64 {
        let g = &self.grid;
        let ne = g.n_eta();
        self.values
            .iter()
            .zip(&o.values)
            .enumerate()
            .map(|(k, (a, b))| a * b.conj() * (g.xi.weights[k / ne] * g.eta.weights[k % ne]))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Value of the tensor-product panel interpolant at (xi, eta).
    pub fn interp(&self, xi: f64, eta: f64) -> C64 {
        let g = &self.grid;
        let (si, wi) = g.xi.interp_weights(xi);
        let (sj, wj) = g.eta.interp_weights(eta);
        let mut acc = C64::default();
        for (a, wa) in wi.iter().enumerate() {
            for (b, wb) in wj.iter().enumerate() {
                acc += self.at(si + a, sj + b) * (wa * wb);
            }
        }
        acc
    }

    /// Derivative along an axis (0 = xi, 1 = eta) with the given scheme.
    pub fn deriv(&self, axis: usize, order: usize, scheme: Scheme) -> GridField {
        let g = &self.grid;
        let (line, n, stride, count, ostride) = if axis == 0 {
            (&g.xi, g.n_xi(), g.n_eta(), g.n_eta(), 1)
        } else {
            (&g.eta, g.n_eta(), 1, g.n_xi(), g.n_eta())
        };
        let mut out = vec![C64::default(); self.values.len()];
        let mut buf = vec![C64::default(); n];
        for c in 0..count {
            let off = c * ostride;
            for i in 0..n {
                buf[i] = self.values[off + i * stride];
            }
            let d = line_deriv(line, &buf, order, scheme);
            for i in 0..n {
                out[off + i * stride] = d[i];
            }
        }
        GridField { grid: g.clone(), values: out }
    }

    /// Delimiter-separated table with a grid header.
    pub fn write_csv<W: Write>(&self, w: &mut W, label: &str) -> std::io::Result<()> {
        let g = &self.grid;
        writeln!(
            w,
            "# field={label} xi_max={} n_xi={} n_eta={} xi_panels={} eta_panels={} degree={}",
            g.xi_max(),
            g.n_xi(),
            g.n_eta(),
            g.xi.n_panels(),
            g.eta.n_panels(),
            g.xi.m - 1
        )?;
        writeln!(w, "xi,eta,re,im")?;
        for (k, v) in self.values.iter().enumerate() {
            let (x, y) = g.node(k);
            writeln!(w, "{:e},{:e},{:e},{:e}", x, y, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Differencing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// second-order finite differences (one-sided at the ends)
    Fd,
    /// exact derivative of the panel interpolant
    Panel,
}

pub fn line_deriv(line: &PanelLine, v: &[C64], order: usize, scheme: Scheme) -> Vec<C64> {
    match scheme {
        Scheme::Panel => {
            let mut d = v.to_vec();
            for _ in 0..order {
                d = line.derivative(&d);
            }
            d
        }
        Scheme::Fd => fd_deriv(&line.nodes, v, order),
    }
}

/// Finite-difference weights at z on the given stencil (Fornberg).
pub fn fornberg(z: f64, x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|r| r[order]).collect()
}

/// Second-order accurate derivative (order 1 or 2) on arbitrary nodes:
/// centered 3-point stencils where the spacing is uniform, 4-point stencils
/// for second derivatives on non-uniform spacing and at the ends.
pub fn fd_deriv(x: &[f64], v: &[C64], order: usize) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let interior = i > 0 && i + 1 < n;
            let uniform =
                interior && ((x[i + 1] - x[i]) - (x[i] - x[i - 1])).abs() <= 1e-10 * (x[i + 1] - x[i]);
            let (lo, w) = if order == 1 && interior || order == 2 && uniform {
                (i - 1, 3)
            } else {
                let w = (order + 2).min(n);
                (i.saturating_sub(1).min(n - w), w)
            };
            let c = fornberg(x[i], &x[lo..lo + w], order);
            c.iter().enumerate().map(|(k, c)| v[lo + k] * *c).sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    pub time: Arc<PanelLine>,
    pub frames: Vec<GridField>,
}

impl TimeField {
    pub fn new(time: Arc<PanelLine>, frames: Vec<GridField>) -> Result<Self> {
        if frames.len() != time.len() {
            return Err(CuspError::Invalid("frame count must equal time count".into()));
        }
        if time.a() < 0.0 || time.b() > 1.0 {
            return Err(CuspError::Invalid("times must lie in [0,1]".into()));
        }
        if frames.windows(2).any(|w| w[0].grid != w[1].grid) {
            return Err(CuspError::GridMismatch);
        }
        Ok(TimeField { time, frames })
    }

    pub fn times(&self) -> &[f64] {
        &self.time.nodes
    }

    pub fn grid(&self) -> &Arc<StripGrid> {
        &self.frames[0].grid
    }

    pub fn zeros(time: &Arc<PanelLine>, grid: &Arc<StripGrid>) -> Self {
        TimeField { time: time.clone(), frames: vec![GridField::zeros(grid); time.len()] }
    }

    /// g(t) F for a scalar time profile.
    pub fn separable<G: Fn(f64) -> C64>(time: &Arc<PanelLine>, g: G, f: &GridField) -> Self {
        let frames = time.nodes.iter().map(|&t| f.scale(g(t))).collect();
        TimeField { time: time.clone(), frames }
    }

    pub fn from_fn<G: Fn(f64, f64, f64) -> C64>(time: &Arc<PanelLine>, grid: &Arc<StripGrid>, g: G) -> Self {
        let frames = time.nodes.iter().map(|&t| GridField::from_fn(grid, |x, e| g(t, x, e))).collect();
        TimeField { time: time.clone(), frames }
    }

    pub fn sub(&self, o: &TimeField) -> Result<TimeField> {
        let frames = self.frames.iter().zip(&o.frames).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(TimeField { time: self.time.clone(), frames })
    }

    pub fn add(&self, o: &TimeField) -> Result<TimeField> {
        let frames = self.frames.iter().zip(&o.frames).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(TimeField { time: self.time.clone(), frames })
    }

    pub fn scale(&self, c: C64) -> TimeField {
        TimeField { time: self.time.clone(), frames: self.frames.iter().map(|f| f.scale(c)).collect() }
    }

    pub fn map_frames<F: Fn(&GridField) -> GridField>(&self, f: F) -> TimeField {
        TimeField { time: self.time.clone(), frames: self.frames.iter().map(f).collect() }
    }

    /// Time derivative of the given order with the given scheme, per node.
    pub fn dt(&self, order: usize, scheme: Scheme) -> TimeField {
        let n = self.frames.len();
        let len = self.frames[0].values.len();
        let mut out = vec![GridField::zeros(self.grid()); n];
        let mut buf = vec![C64::default(); n];
        for k in 0..len {
            for (t, f) in self.frames.iter().enumerate() {
                buf[t] = f.values[k];
            }
            let d = line_deriv(&self.time, &buf, order, scheme);
            for t in 0..n {
                out[t].values[k] = d[t];
            }
        }
        TimeField { time: self.time.clone(), frames: out }
    }

    /// sup over frames of the Lp norm.
    pub fn sup_norm(&self, p: f64) -> Result<f64> {
        self.frames.iter().try_fold(0.0f64, |m, f| Ok(m.max(f.lp_norm(p)?)))
    }

    /// max over sampled pairs of ||f(t) - f(t')||_p / |t - t'|^theta.
    pub fn holder_seminorm(&self, theta: f64, p: f64) -> Result<f64> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(CuspError::Invalid(format!("theta = {theta} must lie in (0,1)")));
        }
        if self.frames.len() < 2 {
            return Err(CuspError::TooFewFrames { got: self.frames.len(), need: 2 });
        }
        let mut best = 0.0f64;
        let t = self.times();
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                let d = self.frames[j].sub(&self.frames[i])?.lp_norm(p)?;
                best = best.max(d / (t[j] - t[i]).abs().powf(theta));
            }
        }
        Ok(best)
    }

    /// sup norm plus seminorm.
    pub fn holder_norm(&self, theta: f64, p: f64) -> Result<f64> {
        Ok(self.sup_norm(p)? + self.holder_seminorm(theta, p)?)
    }

    /// Writes one table per frame plus an index file into `dir`.
    pub fn write_dir(&self, dir: &std::path::Path, label: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut idx = std::fs::File::create(dir.join("index.csv"))?;
        writeln!(idx, "# field={label} frames={}", self.frames.len())?;
        writeln!(idx, "frame,t,file")?;
        for (k, (t, f)) in self.times().iter().zip(&self.frames).enumerate() {
            let name = format!("frame_{k:04}.csv");
            writeln!(idx, "{k},{t:e},{name}")?;
            let mut fh = std::io::BufWriter::new(std::fs::File::create(dir.join(&name))?);
            f.write_csv(&mut fh, &format!("{label}(t={t})"))?;
        }
        Ok(())
    }
}

/// Uniform time grid on [0,1] with `n` nodes built from degree-4 panels
/// (n - 1 must be a multiple of 4) or degree-2 panels otherwise.
pub fn time_line(n: usize) -> Arc<PanelLine> {
    assert!(n >= 3 && n % 2 == 1, "time grid needs an odd node count >= 3");
    let m = if (n - 1) % 4 == 0 { 5 } else { 3 };
    Arc::new(PanelLine::uniform(1.0, (n - 1) / (m - 1), m, NodeKind::Uniform))
}

/// Time grid on [0,1] with degree-(m-1) panels whose length doubles from
/// `h_end` at both endpoints up to at most `h_mid` (resolves endpoint layers).
pub fn graded_time_line(h_end: f64, h_mid: f64, m: usize) -> Arc<PanelLine> {
    assert!(h_end > 0.0 && h_mid >= h_end && h_mid <= 0.5 && m >= 3, "invalid graded time grid");
    let mut left = vec![0.0];
    let mut h = h_end;
    while left.last().unwrap() + h < 0.5 - 0.5 * h_mid {
        left.push(left.last().unwrap() + h);
        h = (2.0 * h).min(h_mid);
    }
    let edge = *left.last().unwrap();
    let n_mid = ((1.0 - 2.0 * edge) / h_mid).ceil().max(1.0) as usize;
    let mut breaks = left.clone();
    for k in 1..n_mid {
        breaks.push(edge + (1.0 - 2.0 * edge) * k as f64 / n_mid as f64);
    }
    breaks.extend(left.iter().rev().map(|x| 1.0 - x));
    Arc::new(PanelLine::new(&breaks, m, NodeKind::Uniform))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_second_derivative() {
        let x = [0.0, 0.1, 0.3, 0.6];
        let w = fornberg(0.1, &x, 2);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn graded_time_line_is_symmetric() {
        let t = graded_time_line(1.0 / 256.0, 0.125, 5);
        assert_eq!((t.nodes[0], *t.nodes.last().unwrap()), (0.0, 1.0));
        let n = t.len();
        for k in 0..n {
            assert!((t.nodes[k] + t.nodes[n - 1 - k] - 1.0).abs() < 1e-14);
        }
        assert!((t.nodes[4] - 1.0 / 256.0).abs() < 1e-15);
        assert!(t.nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn time_line_is_uniform() {
        let t = time_line(33);
        assert_eq!(t.len(), 33);
        for (k, x) in t.nodes.iter().enumerate() {
            assert!((x - k as f64 / 32.0).abs() < 1e-15);
        }
    }
}
