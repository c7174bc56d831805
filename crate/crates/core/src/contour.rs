//! Sector contours: boundary of P = {|arg(z - c) - phi| < delta} ∪ {|z - c| < r},
//! positively oriented around P and truncated at |z - c| = R.

use crate::error::{CuspError, Result};
use crate::quad::gauss_legendre;
use crate::C64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContourSpec {
    pub delta: f64,
    pub r: f64,
    pub big_r: f64,
    pub n_ray: usize,
    pub n_arc: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec { delta: 5.0 * PI / 12.0, r: 0.5, big_r: 1e8, n_ray: 48, n_arc: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorContour {
    pub center: f64,
    /// opening direction: 0 (right) or pi (left)
    pub phi: f64,
    pub delta: f64,
    pub r: f64,
    pub big_r: f64,
    pub nodes: Vec<C64>,
    /// includes dz and orientation
    pub weights: Vec<C64>,
    pub n_ray: usize,
    pub n_arc: usize,
}

const GL_PER_PANEL: usize = 16;

/// Panel breakpoints on [0, u_max] with geometrically growing lengths.
fn ray_breaks(u_max: f64, panels: usize) -> Vec<f64> {
    let g: f64 = 1.6;
    let tot: f64 = (0..panels).map(|k| g.powi(k as i32)).sum();
    let mut b = vec![0.0];
    for k in 0..panels {
        let last = *b.last().unwrap();
        b.push(last + u_max * g.powi(k as i32) / tot);
    }
    *b.last_mut().unwrap() = u_max;
    b
}

/// (u, weight) nodes on a ray in u = ln(rho / r).
fn ray_rule(u_max: f64, n: usize) -> Vec<(f64, f64)> {
    let per = GL_PER_PANEL.min(n);
    let panels = (n / per).max(1);
    let extra = n - panels * per;
    let b = ray_breaks(u_max, panels);
    let mut out = Vec::with_capacity(n);
    for k in 0..panels {
        let np = per + if k < extra { 1 } else { 0 };
        let (x, w) = gauss_legendre(np);
        let h = 0.5 * (b[k + 1] - b[k]);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((b[k] + h * (xi + 1.0), h * wi));
        }
    }
    out
}

/// Composite Gauss rule on [0, u_max] whose panel length grows linearly with
/// the distance to the nearest feature point (h_min at the features).
pub fn adaptive_ray_rule(u_max: f64, features: &[f64], h_min: f64) -> Vec<(f64, f64)> {
    let len = |u: f64| {
        let d = features.iter().chain([&0.0]).map(|f| (u - f).abs()).fold(f64::MAX, f64::min);
        h_min * (1.0 + 0.6 * d)
    };
    let mut b = vec![0.0];
    let mut u = 0.0;
    while u < u_max {
        let mut h = len(u);
        // do not step across a feature with a long panel
        h = h.min(len(u + h)).max(1e-3);
        u = (u + h).min(u_max);
        if u_max - u < 0.3 * h {
            u = u_max;
        }
        b.push(u);
    }
    let (x, w) = gauss_legendre(GL_PER_PANEL);
    let mut out = Vec::new();
    for k in 0..b.len() - 1 {
        let h = 0.5 * (b[k + 1] - b[k]);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((b[k] + h * (xi + 1.0), h * wi));
        }
    }
    out
}

impl SectorContour {
    /// Contour around the direction phi (0: right-opening, pi: left-opening),
    /// vertex at `center`, rays graded geometrically in radius.
    pub fn build(spec: &ContourSpec, center: f64, phi: f64) -> Result<Self> {
        let ContourSpec { r, big_r, n_ray, n_arc, .. } = *spec;
        if n_ray + n_arc < 16 || n_ray < 8 || n_arc < 8 {
            return Err(CuspError::Invalid("at least 16 nodes required".into()));
        }
        if !(r > 0.0 && r < big_r) {
            return Err(CuspError::Invalid("0 < r < R required".into()));
        }
        let rule = ray_rule((big_r / r).ln(), n_ray);
        Self::with_rule(spec, center, phi, &rule)
    }

    /// As `build`, with an explicit (u, weight) rule in u = ln(rho / r) on each ray.
    pub fn with_rule(spec: &ContourSpec, center: f64, phi: f64, rule: &[(f64, f64)]) -> Result<Self> {
        let ContourSpec { delta, r, big_r, n_arc, .. } = *spec;
        if !(delta > 0.0 && delta < PI / 2.0) {
            return Err(CuspError::Invalid(format!("delta = {delta} must lie in (0, pi/2)")));
        }
        if !(r > 0.0 && r < big_r) {
            return Err(CuspError::Invalid("0 < r < R required".into()));
        }
        if n_arc < 8 || rule.len() < 8 {
            return Err(CuspError::Invalid("at least 16 nodes required".into()));
        }
        let n_ray = rule.len();
        let c = C64::new(center, 0.0);
        let mut nodes = Vec::with_capacity(2 * n_ray + n_arc);
        let mut weights = Vec::with_capacity(2 * n_ray + n_arc);
        // upper ray, inward
        let eu = C64::from_polar(1.0, phi + delta);
        for &(u, w) in rule.iter().rev() {
            let rho = r * u.exp();
            nodes.push(c + eu * rho);
            weights.push(-eu * rho * w);
        }
        // arc, counterclockwise from phi + delta to phi + 2pi - delta
        let (x, w) = gauss_legendre(n_arc);
        let (t0, t1) = (phi + delta, phi + 2.0 * PI - delta);
        let h = 0.5 * (t1 - t0);
        for (xi, wi) in x.iter().zip(&w) {
            let t = t0 + h * (xi + 1.0);
            let e = C64::from_polar(1.0, t);
            nodes.push(c + e * r);
            weights.push(C64::i() * e * r * (h * wi));
        }
        // lower ray, outward
        let el = C64::from_polar(1.0, phi - delta);
        for &(u, w) in rule {
            let rho = r * u.exp();
            nodes.push(c + el * rho);
            weights.push(el * rho * w);
        }
        Ok(SectorContour { center, phi, delta, r, big_r, nodes, weights, n_ray, n_arc })
    }

    pub fn right(spec: &ContourSpec, center: f64) -> Result<Self> {
        Self::build(spec, center, 0.0)
    }

    pub fn left(spec: &ContourSpec, center: f64) -> Result<Self> {
        Self::build(spec, center, PI)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Whether z lies in the enclosed region P.
    pub fn contains(&self, z: C64) -> bool {
        let d = z - self.center;
        if d.norm() < self.r {
            return true;
        }
        let rel = (d * C64::from_polar(1.0, -self.phi)).arg();
        rel.abs() < self.delta && d.norm() < self.big_r
    }

    /// Distance from the polygonal contour to a point.
    pub fn distance_to(&self, z: C64) -> (usize, f64) {
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, n)| (k, (n - z).norm()))
            .fold((0, f64::MAX), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// First node index where the contour meets the horizontal half-line
    /// {x0 - t + i y0 : t >= 0}, or passes within tol of it.
    pub fn hits_left_ray(&self, x0: f64, y0: f64, tol: f64) -> Option<usize> {
        let dist = |z: C64| -> f64 {
            if z.re <= x0 {
                (z.im - y0).abs()
            } else {
                (z - C64::new(x0, y0)).norm()
            }
        };
        for k in 0..self.nodes.len() {
            if dist(self.nodes[k]) < tol {
                return Some(k);
            }
            if k + 1 < self.nodes.len() {
                let (a, b) = (self.nodes[k], self.nodes[k + 1]);
                if (a.im - y0) * (b.im - y0) < 0.0 {
                    let t = (y0 - a.im) / (b.im - a.im);
                    let x = a.re + t * (b.re - a.re);
                    if x <= x0 {
                        return Some(k);
                    }
                }
            }
        }
        None
    }

    /// (1 / 2 pi i) sum_k w_k f(z_k).
    pub fn integrate<F: Fn(C64) -> C64>(&self, f: F) -> C64 {
        let s: C64 = self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum();
        s / (2.0 * PI * C64::i())
    }
}

/// Trapezoid rule on the full circle |z - c| = r, counterclockwise.
pub fn circle(c: C64, r: f64, n: usize) -> (Vec<C64>, Vec<C64>) {
    (0..n)
        .map(|k| {
            let e = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            (c + e * r, C64::i() * e * r * (2.0 * PI / n as f64))
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_circle_cauchy() {
        let (z, w) = circle(C64::new(0.0, 0.0), 2.0, 64);
        let z0 = C64::new(0.3, -0.4);
        let s: C64 = z.iter().zip(&w).map(|(z, w)| w / (z - z0)).sum();
        assert!((s - 2.0 * PI * C64::i()).norm() < 1e-10);
    }

    #[test]
    fn scalar_partial_fractions() {
        let c = SectorContour::right(&ContourSpec::default(), 0.0).unwrap();
        let (m, n, lam) = (-1.0, -4.0, 1.0);
        let v = c.integrate(|z| 1.0 / ((m + z) * (n - lam - z)));
        assert!((v - C64::new(-1.0 / 6.0, 0.0)).norm() < 1e-8, "{v}");
    }
}
