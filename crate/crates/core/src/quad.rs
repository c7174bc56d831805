//! Quadrature rules and exponential moments.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes increasing.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Chebyshev–Lobatto points on [-1, 1], increasing.
pub fn chebyshev_lobatto(m: usize) -> Vec<f64> {
    assert!(m >= 2);
    let n = (m - 1) as f64;
    (0..m).map(|j| -(PI * j as f64 / n).cos()).collect()
}

/// Barycentric weights for arbitrary distinct nodes.
pub fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let p: f64 = (0..x.len()).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            1.0 / p
        })
        .collect()
}

/// Values of all Lagrange basis polynomials at `t`.
pub fn lagrange_basis(x: &[f64], bw: &[f64], t: f64, out: &mut [f64]) {
    for (j, &xj) in x.iter().enumerate() {
        if t == xj {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[j] = 1.0;
            return;
        }
    }
    let mut den = 0.0;
    for j in 0..x.len() {
        let c = bw[j] / (t - x[j]);
        out[j] = c;
        den += c;
    }
    out.iter_mut().for_each(|o| *o /= den);
}

/// Differentiation matrix D[i][j] = l_j'(x_i).
pub fn diff_matrix(x: &[f64], bw: &[f64]) -> Vec<Vec<f64>> {
    let m = x.len();
    let mut d = vec![vec![0.0; m]; m];
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..m {
            if i != j {
                d[i][j] = bw[j] / bw[i] / (x[i] - x[j]);
                s += d[i][j];
            }
        }
        d[i][i] = -s;
    }
    d
}

/// Integrates `f` over [a, b] with adaptive Gauss–Kronrod (7/15).
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rtol: f64) -> f64 {
    fn gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
        const XK: [f64; 8] = [
            0.991455371120812639206854697526329,
            0.949107912342758524526189684047851,
            0.864864423359769072789712788640926,
            0.741531185599394439863864773280788,
            0.586087235467691130294144845693013,
            0.405845151377397166906606412076961,
            0.207784955007898467600689403773245,
            0.0,
        ];
        const WK: [f64; 8] = [
            0.022935322010529224963732008058970,
            0.063092092629978553290700663189204,
            0.104790010322250183839876322541518,
            0.140653259715525918745189590510238,
            0.169004726639267902826583426598550,
            0.190350578064785409913256402421014,
            0.204432940075298892414161999234649,
            0.209482141084727828012999174891714,
        ];
        const WG: [f64; 4] = [
            0.129484966168869693270611432679082,
            0.279705391489276667901467771423780,
            0.381830050505118944950369775488975,
            0.417959183673469387755102040816327,
        ];
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let f1 = f(c - h * XK[i]);
            let f2 = f(c + h * XK[i]);
            k += WK[i] * (f1 + f2);
            if i % 2 == 1 {
                g += WG[i / 2] * (f1 + f2);
            }
        }
        (k * h, ((k - g) * h).abs())
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, e) = gk(f, a, b);
        if e <= tol || depth > 50 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    let (v0, _) = gk(f, a, b);
    rec(f, a, b, (rtol * v0.abs()).max(1e-300), 0)
}

/// psi_k(beta) = int_0^1 exp(-beta*tau) tau^k / k! dtau for k = 0..n-1.
pub fn exp_moments(beta: C64, n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    let ab = beta.norm();
    let em = (-beta).exp();
    let mut fact = vec![1.0; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    // forward recursion where |beta| > k
    let kf = (ab.floor() as usize).min(n);
    if kf > 0 {
        out[0] = (C64::new(1.0, 0.0) - em) / beta;
        for k in 1..kf {
            out[k] = (out[k - 1] - em / fact[k]) / beta;
        }
    }
    if kf < n {
        // series at the top index, then backward
        let top = n - 1;
        let mut term = C64::new(1.0, 0.0);
        let mut denom = fact[top] * (top + 1) as f64;
        let mut sum = term / denom;
        let mut j = 0usize;
        loop {
            j += 1;
            term *= beta;
            denom *= (top + j + 1) as f64;
            let t = term / denom;
            sum += t;
            if t.norm() <= 1e-18 * sum.norm() || j > 400 {
                break;
            }
        }
        out[top] = em * sum;
        let mut k = top;
        while k > kf {
            out[k - 1] = beta * out[k] + em / fact[k];
            k -= 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials() {
        for n in 1..20 {
            let (x, w) = gauss_legendre(n);
            for d in 0..(2 * n) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn gk_matches_closed_form() {
        let v = adaptive_gk(&|x: f64| 1.0 / (2.0 * x * x), 0.1, 1.0, 1e-12);
        assert!((v - 4.5).abs() < 1e-10);
    }

    #[test]
    fn moments_match_quadrature() {
        let (x, w) = gauss_legendre(60);
        for &b in &[
            C64::new(0.0, 0.0),
            C64::new(0.3, 0.1),
            C64::new(3.0, -7.0),
            C64::new(12.0, 15.0),
            C64::new(0.0, 40.0),
            C64::new(150.0, 300.0),
            C64::new(-2.0, 5.0),
        ] {
            let m = exp_moments(b, 9);
            let mut f = 1.0;
            for k in 0..9 {
                if k > 0 {
                    f *= k as f64;
                }
                let q: C64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&t, &w)| {
                        let tau = 0.5 * (t + 1.0);
                        0.5 * w * (-b * tau).exp() * tau.powi(k as i32) / f
                    })
                    .sum();
                if b.norm() < 100.0 {
                    assert!((q - m[k]).norm() < 1e-13 * (1.0 + q.norm()), "b={b} k={k}");
                }
            }
        }
    }
}
