//! Cusp domain, profile validation and the strip transform.

use crate::error::{CuspError, Result};
use crate::quad::adaptive_gk;
use std::sync::Arc;

/// Value, first and second derivative of a profile function.
pub type ProfileFn = Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>;

#[derive(Clone)]
pub struct ProfilePair {
    pub a: f64,
    pub phi1: ProfileFn,
    pub phi2: ProfileFn,
    pub name: String,
}

impl std::fmt::Debug for ProfilePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ProfilePair({}, a={})", self.name, self.a)
    }
}

fn poly(c: Vec<f64>) -> ProfileFn {
    Arc::new(move |x: f64| {
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (k, ck) in c.iter().enumerate().rev() {
            d2 = d2 * x + 2.0 * d1;
            d1 = d1 * x + v;
            v = v * x + ck;
            let _ = k;
        }
        (v, d1, d2)
    })
}

impl ProfilePair {
    /// phi1 and phi2 given as ascending polynomial coefficients.
    pub fn polynomial(a: f64, c1: Vec<f64>, c2: Vec<f64>) -> Self {
        let name = format!("poly({:?};{:?})", c1, c2);
        ProfilePair { a, phi1: poly(c1), phi2: poly(c2), name }
    }

    /// phi1 = x^2, phi2 = -x^2.
    pub fn quadratic_symmetric(a: f64) -> Self {
        let mut p = Self::polynomial(a, vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]);
        p.name = "quadratic-symmetric".into();
        p
    }

    /// phi1 = x^2, phi2 = -x^3.
    pub fn cubic(a: f64) -> Self {
        let mut p = Self::polynomial(a, vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, -1.0]);
        p.name = "cubic".into();
        p
    }

    pub fn builtin(name: &str, a: f64) -> Option<Self> {
        match name {
            "quadratic-symmetric" => Some(Self::quadratic_symmetric(a)),
            "cubic" => Some(Self::cubic(a)),
            _ => None,
        }
    }

    /// phi = phi1 - phi2 with derivatives.
    pub fn phi(&self, x: f64) -> (f64, f64, f64) {
        let (a, b, c) = (self.phi1)(x);
        let (d, e, f) = (self.phi2)(x);
        (a - d, b - e, c - f)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConditionRow {
    pub condition: u8,
    pub description: String,
    pub pass: bool,
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ConditionRow>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Certifies the structural conditions on Chebyshev samples of [0, a]:
/// (1) C² finiteness, (2) phi > 0 on (0, a], (3) phi_i(0) = phi_i'(0) = 0,
/// (4) strict monotonicity of each phi_i.
pub fn validate_profiles(p: &ProfilePair, n_samples: usize, tol: f64) -> Result<ValidationReport> {
    if n_samples < 16 || tol <= 0.0 {
        return Err(CuspError::Invalid("n_samples >= 16 and tol > 0 required".into()));
    }
    let xs: Vec<f64> = (0..n_samples)
        .map(|j| 0.5 * p.a * (1.0 - (std::f64::consts::PI * j as f64 / (n_samples - 1) as f64).cos()))
        .collect();
    let mut rows = Vec::new();
    // (1) smoothness: finite values and derivatives
    let mut bad = None;
    for &x in &xs {
        let (a, b, c) = (p.phi1)(x);
        let (d, e, f) = (p.phi2)(x);
        if ![a, b, c, d, e, f].iter().all(|v| v.is_finite()) {
            bad = Some(x);
            break;
        }
    }
    if let Some(x) = bad {
        return Err(CuspError::ProfileEval { x });
    }
    rows.push(ConditionRow {
        condition: 1,
        description: "phi1, phi2 twice differentiable (finite samples)".into(),
        pass: true,
        witness: None,
    });
    let w2 = xs.iter().skip(1).find(|&&x| p.phi(x).0 <= 0.0).copied();
    rows.push(ConditionRow {
        condition: 2,
        description: "phi = phi1 - phi2 > 0 on (0,a]".into(),
        pass: w2.is_none(),
        witness: w2,
    });
    let (v1, d1, _) = (p.phi1)(0.0);
    let (v2, d2, _) = (p.phi2)(0.0);
    let ok3 = [v1, d1, v2, d2].iter().all(|v| v.abs() <= tol);
    rows.push(ConditionRow {
        condition: 3,
        description: "phi_i(0) = 0 and phi_i'(0) = 0".into(),
        pass: ok3,
        witness: if ok3 { None } else { Some(0.0) },
    });
    // (4) sign-constant derivative away from 0
    let mut w4 = None;
    for f in [&p.phi1, &p.phi2] {
        let s0 = f(xs[1]).1.signum();
        for &x in xs.iter().skip(1) {
            let d = f(x).1;
            if d == 0.0 || d.signum() != s0 {
                w4 = Some(x);
                break;
            }
        }
        if w4.is_some() {
            break;
        }
    }
    rows.push(ConditionRow {
        condition: 4,
        description: "phi1, phi2 strictly monotone".into(),
        pass: w4.is_none(),
        witness: w4,
    });
    Ok(ValidationReport { rows })
}

/// Boundary pieces of the cusp domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPiece {
    /// upper curve y = phi1(x)
    Gamma1,
    /// lower curve y = phi2(x)
    Gamma2,
    /// vertical edge x = a
    Gamma3,
}

#[derive(Debug, Clone)]
pub struct CuspDomain {
    pub profiles: ProfilePair,
    pub x_min: f64,
    pub xi_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub x: f64,
    pub y: f64,
    pub xi: f64,
    pub eta: f64,
}

impl CuspDomain {
    /// Truncates the strip at `xi_max`; x_min is the preimage of xi_max.
    pub fn new(profiles: ProfilePair, xi_max: f64) -> Result<Self> {
        let mut d = CuspDomain { profiles, x_min: 0.0, xi_max };
        let a = d.profiles.a;
        // bracket by halving until xi exceeds xi_max
        let mut lo = a;
        loop {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(CuspError::Domain("profile does not reach xi_max".into()));
            }
            if d.xi_of(lo)? >= xi_max {
                break;
            }
        }
        d.x_min = 0.0;
        let x = d.solve_x(xi_max, lo, a)?;
        d.x_min = x * (1.0 - 1e-12);
        Ok(d)
    }

    /// xi(x) = int_x^a ds / phi(s).
    pub fn xi_of(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(CuspError::CuspPoint { x });
        }
        let a = self.profiles.a;
        if x >= a {
            return Ok(0.0);
        }
        let f = |s: f64| 1.0 / self.profiles.phi(s).0;
        // split geometrically for the near-singular end
        let mut tot = 0.0;
        let mut lo = x;
        while lo < a {
            let hi = (2.0 * lo).min(a);
            tot += adaptive_gk(&f, lo, hi, 1e-13);
            lo = hi;
        }
        if !tot.is_finite() {
            return Err(CuspError::ProfileEval { x });
        }
        Ok(tot)
    }

    fn solve_x(&self, xi: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        // bisection to a coarse bracket, then Newton (dxi/dx = -1/phi)
        let (l0, h0) = (lo, hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.xi_of(mid)? > xi {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-6 * hi {
                break;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..30 {
            let g = self.xi_of(x)? - xi;
            let step = g * self.profiles.phi(x).0;
            let nx = (x + step).clamp(lo, hi);
            if (nx - x).abs() <= 1e-15 * x {
                return Ok(nx);
            }
            x = nx;
        }
        let g = self.xi_of(x)? - xi;
        if g.abs() < 1e-10 * (1.0 + xi) {
            Ok(x)
        } else {
            Err(CuspError::RootFinder { lo: l0, hi: h0 })
        }
    }

    pub fn forward_map(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        if x <= 0.0 {
            return Err(CuspError::CuspPoint { x });
        }
        if x > self.profiles.a {
            return Err(CuspError::Domain(format!("x = {x} > a")));
        }
        let (p1, _, _) = (self.profiles.phi1)(x);
        let (p2, _, _) = (self.profiles.phi2)(x);
        let slack = 1e-14 * (1.0 + p1.abs().max(p2.abs()));
        if y < p2 - slack || y > p1 + slack {
            return Err(CuspError::Domain(format!("y = {y} outside [{p2}, {p1}] at x = {x}")));
        }
        let eta = ((y - p2) / (p1 - p2)).clamp(0.0, 1.0);
        Ok((self.xi_of(x)?, eta))
    }

    /// x(xi) by bracketed root-finding on the monotone map.
    pub fn x_of_xi(&self, xi: f64) -> Result<f64> {
        if xi < 0.0 {
            return Err(CuspError::Domain(format!("xi = {xi} < 0")));
        }
        if xi > self.xi_max * (1.0 + 1e-12) {
            return Err(CuspError::BeyondTruncation { xi, xi_max: self.xi_max });
        }
        if xi == 0.0 {
            return Ok(self.profiles.a);
        }
        let lo = self.x_min.max(1e-300);
        self.solve_x(xi, lo, self.profiles.a)
    }

    pub fn inverse_map(&self, xi: f64, eta: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(CuspError::Domain(format!("eta = {eta} outside [0,1]")));
        }
        let x = self.x_of_xi(xi)?;
        let (p2, _, _) = (self.profiles.phi2)(x);
        Ok((x, p2 + eta * self.profiles.phi(x).0))
    }

    pub fn boundary_point(&self, piece: BoundaryPiece, s: f64) -> (f64, f64) {
        match piece {
            BoundaryPiece::Gamma1 => (s, (self.profiles.phi1)(s).0),
            BoundaryPiece::Gamma2 => (s, (self.profiles.phi2)(s).0),
            BoundaryPiece::Gamma3 => {
                let a = self.profiles.a;
                let (p1, p2) = ((self.profiles.phi1)(a).0, (self.profiles.phi2)(a).0);
                (a, p2 + s * (p1 - p2))
            }
        }
    }
}

/// 2/q with q = p/(p-1), i.e. 2 - 2/p.
pub fn weight_exponent(p: f64) -> f64 {
    2.0 - 2.0 / p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_xi_closed_form() {
        let d = CuspDomain::new(ProfilePair::quadratic_symmetric(1.0), 30.0).unwrap();
        for x in [0.9, 0.5, 0.1, 0.02] {
            let xi = d.xi_of(x).unwrap();
            assert!((xi - 0.5 * (1.0 / x - 1.0)).abs() < 1e-11 * (1.0 + xi));
        }
        assert!((d.x_min - 1.0 / 61.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_derivatives() {
        let p = ProfilePair::cubic(1.0);
        let (v, d1, d2) = (p.phi2)(0.5);
        assert!((v + 0.125).abs() < 1e-15 && (d1 + 0.75).abs() < 1e-15 && (d2 + 3.0).abs() < 1e-15);
    }
}
