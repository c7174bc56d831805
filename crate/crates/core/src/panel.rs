//! Composite piecewise-polynomial lines and exponential product integration.

use crate::quad::{barycentric_weights, diff_matrix, exp_moments, gauss_legendre, lagrange_basis};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Chebyshev,
    Uniform,
}

/// A 1-D grid made of panels; neighbouring panels share their end node.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelLine {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub breaks: Vec<f64>,
    pub m: usize,
    pub kind: NodeKind,
    ref_nodes: Vec<f64>,
    ref_bw: Vec<f64>,
    ref_d: Vec<Vec<f64>>,
}

impl PanelLine {
    pub fn new(breaks: &[f64], m: usize, kind: NodeKind) -> Self {
        assert!(breaks.len() >= 2 && m >= 2);
        assert!(breaks.windows(2).all(|w| w[1] > w[0]), "breaks must increase");
        let ref_nodes: Vec<f64> = match kind {
            NodeKind::Chebyshev => crate::quad::chebyshev_lobatto(m),
            NodeKind::Uniform => (0..m).map(|j| -1.0 + 2.0 * j as f64 / (m - 1) as f64).collect(),
        };
        let ref_bw = barycentric_weights(&ref_nodes);
        let ref_d = diff_matrix(&ref_nodes, &ref_bw);
        // reference weights: exact integrals of the Lagrange basis
        let (gx, gw) = gauss_legendre(m + 2);
        let mut rw = vec![0.0; m];
        let mut buf = vec![0.0; m];
        for (x, w) in gx.iter().zip(&gw) {
            lagrange_basis(&ref_nodes, &ref_bw, *x, &mut buf);
            for j in 0..m {
                rw[j] += w * buf[j];
            }
        }
        let np = breaks.len() - 1;
        let mut nodes = Vec::with_capacity(np * (m - 1) + 1);
        let mut weights = vec![0.0; np * (m - 1) + 1];
        for p in 0..np {
            let (a, b) = (breaks[p], breaks[p + 1]);
            let h = 0.5 * (b - a);
            for j in 0..m {
                if p > 0 && j == 0 {
                    weights[p * (m - 1)] += h * rw[0];
                    continue;
                }
                nodes.push(if j == m - 1 { b } else { a + h * (ref_nodes[j] + 1.0) });
                weights[p * (m - 1) + j] += h * rw[j];
            }
        }
        PanelLine { nodes, weights, breaks: breaks.to_vec(), m, kind, ref_nodes, ref_bw, ref_d }
    }

    /// Uniform panels of degree m-1 covering [0, len].
    pub fn uniform(len: f64, panels: usize, m: usize, kind: NodeKind) -> Self {
        let b: Vec<f64> = (0..=panels).map(|i| len * i as f64 / panels as f64).collect();
        Self::new(&b, m, kind)
    }

    /// Panels on [0, len] whose widths grow geometrically from `h0`, capped at `hmax`.
    pub fn graded(len: f64, h0: f64, ratio: f64, hmax: f64, m: usize) -> Self {
        let mut b = vec![0.0];
        let mut h = h0;
        while *b.last().unwrap() + h < len - 1e-12 {
            let next = b.last().unwrap() + h;
            b.push(next);
            h = (h * ratio).min(hmax);
        }
        if len - b.last().unwrap() < 0.3 * h && b.len() > 1 {
            b.pop();
        }
        b.push(len);
        Self::new(&b, m, NodeKind::Chebyshev)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn a(&self) -> f64 {
        self.breaks[0]
    }

    pub fn b(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn panel_start(&self, p: usize) -> usize {
        p * (self.m - 1)
    }

    fn panel_of(&self, x: f64) -> usize {
        let np = self.n_panels();
        match self.breaks.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(np - 1),
            Err(i) => i.saturating_sub(1).min(np - 1),
        }
    }

    /// Lagrange weights (global indices, values) of the interpolant at x.
    pub fn interp_weights(&self, x: f64) -> (usize, Vec<f64>) {
        let p = self.panel_of(x.clamp(self.a(), self.b()));
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        let t = (2.0 * (x - a) / (b - a) - 1.0).clamp(-1.0, 1.0);
        let mut w = vec![0.0; self.m];
        lagrange_basis(&self.ref_nodes, &self.ref_bw, t, &mut w);
        (self.panel_start(p), w)
    }

    pub fn interp(&self, v: &[C64], x: f64) -> C64 {
        let (s, w) = self.interp_weights(x);
        w.iter().enumerate().map(|(j, wj)| v[s + j] * *wj).sum()
    }

    /// Derivative of the interpolant at the nodes (one-sided within each panel;
    /// shared nodes take the average of both sides).
    pub fn derivative(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        let mut cnt = vec![0u8; v.len()];
        for p in 0..self.n_panels() {
            let s = self.panel_start(p);
            let sc = 2.0 / (self.breaks[p + 1] - self.breaks[p]);
            for i in 0..self.m {
                let d: C64 = (0..self.m).map(|j| v[s + j] * self.ref_d[i][j]).sum::<C64>() * sc;
                out[s + i] += d;
                cnt[s + i] += 1;
            }
        }
        out.iter_mut().zip(&cnt).for_each(|(o, c)| *o /= *c as f64);
        out
    }

    pub fn integrate(&self, v: &[C64]) -> C64 {
        v.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// tc[i][j][k]: coefficient of u^k in l_j(t_i + u) on the reference panel.
    fn taylor_coeffs(&self) -> Vec<Vec<Vec<f64>>> {
        let m = self.m;
        let t = &self.ref_nodes;
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut c = vec![0.0; m];
                        c[0] = self.ref_bw[j];
                        let mut deg = 0;
                        for k in (0..m).filter(|&k| k != j) {
                            let a = t[i] - t[k];
                            deg += 1;
                            for d in (1..=deg).rev() {
                                c[d] = c[d] * a + c[d - 1];
                            }
                            c[0] *= a;
                        }
                        c
                    })
                    .collect()
            })
            .collect()
    }
}

/// Exact integrals of e^{-q|x-s|} against the panel interpolant, per panel.
#[derive(Debug, Clone)]
pub struct ExpPlan {
    pub q: C64,
    m: usize,
    /// lw[p][i*m+j] = int_{s_{i-1}}^{s_i} e^{-q(s_i-s)} l_j(s) ds
    lw: Vec<Vec<C64>>,
    /// rw[p][i*m+j] = int_{s_i}^{s_{i+1}} e^{-q(s-s_i)} l_j(s) ds
    rw: Vec<Vec<C64>>,
    /// e^{-q(s_i - s_{i-1})} and e^{-q(s_{i+1} - s_i)} per panel node
    el: Vec<Vec<C64>>,
    er: Vec<Vec<C64>>,
}

impl ExpPlan {
    pub fn new(line: &PanelLine, q: C64) -> Self {
        let m = line.m;
        let np = line.n_panels();
        let mut lw = Vec::with_capacity(np);
        let mut rw = Vec::with_capacity(np);
        let mut el = Vec::with_capacity(np);
        let mut er = Vec::with_capacity(np);
        let tc = line.taylor_coeffs();
        for p in 0..np {
            let h = line.breaks[p + 1] - line.breaks[p];
            let s0 = line.panel_start(p);
            let mut l = vec![C64::new(0.0, 0.0); m * m];
            let mut r = vec![C64::new(0.0, 0.0); m * m];
            let mut e1 = vec![C64::new(0.0, 0.0); m];
            let mut e2 = vec![C64::new(0.0, 0.0); m];
            for i in 0..m {
                let si = line.nodes[s0 + i];
                let d = if i > 0 { si - line.nodes[s0 + i - 1] } else { 0.0 };
                let d2 = if i + 1 < m { line.nodes[s0 + i + 1] - si } else { 0.0 };
                e1[i] = (-q * d).exp();
                e2[i] = (-q * d2).exp();
                if d > 0.0 {
                    let psi = exp_moments(q * d, m);
                    let mut f = d;
                    let mut kf = 1.0;
                    for (k, ps) in psi.iter().enumerate() {
                        if k > 0 {
                            kf *= k as f64;
                        }
                        let c = ps * (f * kf);
                        for j in 0..m {
                            l[i * m + j] += c * tc[i][j][k];
                        }
                        f *= -2.0 * d / h;
                    }
                }
                if d2 > 0.0 {
                    let psi = exp_moments(q * d2, m);
                    let mut f = d2;
                    let mut kf = 1.0;
                    for (k, ps) in psi.iter().enumerate() {
                        if k > 0 {
                            kf *= k as f64;
                        }
                        let c = ps * (f * kf);
                        for j in 0..m {
                            r[i * m + j] += c * tc[i][j][k];
                        }
                        f *= 2.0 * d2 / h;
                    }
                }
            }
            lw.push(l);
            rw.push(r);
            el.push(e1);
            er.push(e2);
        }
        ExpPlan { q, m, lw, rw, el, er }
    }

    /// Returns (L, R) with L(x_i) = int_{x_0}^{x_i} e^{-q(x_i-s)} v ds and
    /// R(x_i) = int_{x_i}^{x_end} e^{-q(s-x_i)} v ds for strided input.
    pub fn sweeps(&self, v: &[C64], off: usize, stride: usize, l: &mut [C64], r: &mut [C64]) {
        let m = self.m;
        let np = self.lw.len();
        let n = np * (m - 1) + 1;
        let at = |i: usize| v[off + i * stride];
        l[0] = C64::new(0.0, 0.0);
        for p in 0..np {
            let s0 = p * (m - 1);
            let w = &self.lw[p];
            for i in 1..m {
                let mut acc = l[s0 + i - 1] * self.el[p][i];
                for j in 0..m {
                    acc += w[i * m + j] * at(s0 + j);
                }
                l[s0 + i] = acc;
            }
        }
        r[n - 1] = C64::new(0.0, 0.0);
        for p in (0..np).rev() {
            let s0 = p * (m - 1);
            let w = &self.rw[p];
            for i in (0..m - 1).rev() {
                let mut acc = r[s0 + i + 1] * self.er[p][i];
                for j in 0..m {
                    acc += w[i * m + j] * at(s0 + j);
                }
                r[s0 + i] = acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_length() {
        let g = PanelLine::graded(30.0, 0.25, 1.5, 2.0, 9);
        let s: f64 = g.weights.iter().sum();
        assert!((s - 30.0).abs() < 1e-12 * 30.0);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(g.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn sweeps_match_closed_form() {
        // v = 1 on [0, 2]: L(x) = (1 - e^{-qx})/q
        let g = PanelLine::uniform(2.0, 4, 9, NodeKind::Chebyshev);
        for q in [C64::new(1.0, 0.0), C64::new(3.0, 40.0), C64::new(200.0, -150.0)] {
            let plan = ExpPlan::new(&g, q);
            let v = vec![C64::new(1.0, 0.0); g.len()];
            let mut l = vec![C64::default(); g.len()];
            let mut r = l.clone();
            plan.sweeps(&v, 0, 1, &mut l, &mut r);
            for (i, x) in g.nodes.iter().enumerate() {
                let le = (1.0 - (-q * x).exp()) / q;
                let re = (1.0 - (-q * (2.0 - x)).exp()) / q;
                assert!((l[i] - le).norm() < 1e-13, "{q} {x} {} {}", l[i], le);
                assert!((r[i] - re).norm() < 1e-13, "{q} {x} {} {}", r[i], re);
            }
        }
    }
}
