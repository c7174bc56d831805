use cuspwave::full_problem::*;
use cuspwave::geometry::{CuspDomain, ProfilePair};
use cuspwave::grid::{GridField, Scheme, StripGrid, TimeField};
use cuspwave::time_calculus::{solve_abstract, AbstractOptions, SpatialBackend};
use cuspwave::C64;
use std::sync::Arc;

fn oracle_opts(lambda: f64) -> AbstractOptions {
    AbstractOptions { lambda, backend: SpatialBackend::Oracle, ..Default::default() }
}

fn coarse() -> GridSpec {
    GridSpec { xi_max: 4.0, h0: 0.25, hmax: 1.0, eta_panels: 2, m: 9, nt: 17, h_end: 0.0 }
}

fn instance(a: f64, grid: GridSpec) -> ProblemInstance {
    let mut inst = ProblemInstance::new(ProfilePair::quadratic_symmetric(a), 1.0, 2.0, 0.5, grid).unwrap();
    inst.options = oracle_opts(1.0);
    inst
}

/// w* = T(t) X(ξ) Y(η) satisfying all boundary and Ventcel conditions.
fn manufactured(xm: f64) -> (impl Fn(f64, f64, f64) -> [f64; 5], f64) {
    let c = (1.0 + xm) / xm;
    let f = move |t: f64, xi: f64, eta: f64| {
        let tt = 1.0 + t - t * t + 0.2 * t * t * t;
        let tt2 = -2.0 + 1.2 * t;
        let x = (xm - xi) * (1.0 + c * xi);
        let x2 = -2.0 * c;
        let y = (1.0 - eta) * (1.0 + 2.0 * eta);
        let y2 = -4.0;
        [tt * x * y, tt2 * x * y, tt * x2 * y, tt * x * y2, 0.0]
    };
    (f, 1.0)
}

#[test]
fn manufactured_solution_is_recovered() {
    let g = coarse();
    let grid = g.strip();
    let time = g.time();
    let (ws, lambda) = manufactured(g.xi_max);
    let exact = TimeField::from_fn(&time, &grid, |t, xi, eta| C64::new(ws(t, xi, eta)[0], 0.0));
    let f = TimeField::from_fn(&time, &grid, |t, xi, eta| {
        let d = ws(t, xi, eta);
        C64::new(d[1] - d[2] - d[3] - lambda * d[0], 0.0)
    });
    let sol = solve_abstract(&f, &oracle_opts(lambda)).unwrap();
    let err = sol.w.sub(&exact).unwrap().sup_norm(2.0).unwrap() / exact.sup_norm(2.0).unwrap();
    assert!(err < 1e-5, "recovery error {err:e}");
}

#[test]
fn zero_perturbation_converges_in_one_iteration() {
    let g = coarse();
    let grid = g.strip();
    let time = g.time();
    let f = TimeField::from_fn(&time, &grid, |t, xi, eta| C64::new((1.0 + t * t) * (-xi).exp() * (1.0 - eta * eta), 0.0));
    let c = PerturbationCoeffs::zero(&grid, 2.0);
    let n = neumann_iterate(&f, &c, &oracle_opts(1.0), 5, 1e-12).unwrap();
    assert!(n.converged && n.iterations == 1, "{:?}", n.history);
    let w0 = solve_abstract(&f, &oracle_opts(1.0)).unwrap().w;
    assert!(n.w.sub(&w0).unwrap().sup_norm(2.0).unwrap() == 0.0);
}

#[test]
fn small_cusp_gives_contraction() {
    // stops above the ~3e-5 discretization floor of this resolution
    let g = GridSpec { xi_max: 3.0, nt: 9, ..coarse() };
    let d = CuspDomain::new(ProfilePair::quadratic_symmetric(0.1), g.xi_max).unwrap();
    let grid = g.strip();
    let time = g.time();
    let prof = XiProfile::new(&d, &grid).unwrap();
    let f = push_forward_rhs(&prof, &grid, &time, 2.0, &|t, x, _| (1.0 + t * t) * (1.0 + x)).unwrap();
    let c = PerturbationCoeffs::new(&prof, &grid, 2.0).unwrap();
    let n = neumann_iterate(&f, &c, &oracle_opts(1.0), 8, 1e-4).unwrap();
    assert!(n.converged && !n.divergent, "{:?}", n.history);
    assert!(n.history.windows(2).all(|w| w[1] < w[0]), "{:?}", n.history);
}

#[test]
fn pipeline_is_linear_in_the_source() {
    let inst = instance(1.0, GridSpec { nt: 9, ..coarse() });
    let h1 = |t: f64, x: f64, y: f64| (1.0 + t) * (x + y * y);
    let h2 = |t: f64, x: f64, _y: f64| t.sqrt() * x.cos();
    let b1 = solve_original(&inst, &h1).unwrap();
    let b2 = solve_original(&inst, &h2).unwrap();
    let b3 = solve_original(&inst, &|t, x, y| 2.0 * h1(t, x, y) - 3.0 * h2(t, x, y)).unwrap();
    let comb = b1.w.scale(C64::new(2.0, 0.0)).sub(&b2.w.scale(C64::new(3.0, 0.0))).unwrap();
    let e = b3.w.sub(&comb).unwrap().sup_norm(2.0).unwrap() / b3.w.sup_norm(2.0).unwrap();
    assert!(e < 1e-9, "{e:e}");
}

#[test]
fn bundle_round_trips_losslessly() {
    let mut inst = instance(1.0, GridSpec { nt: 9, ..coarse() });
    inst.neumann = Some((2, 1e-3));
    let mut b = solve_original(&inst, &|t, x, y| t.sqrt() * (1.0 + x - y)).unwrap();
    b.config_echo = "lambda = 1.0\n".into();
    b.diffs.push(("sum_vs_oracle".into(), 1.5e-7));
    let dir = tempfile::tempdir().unwrap();
    b.write_dir(dir.path()).unwrap();
    let r = SolutionBundle::read_dir(dir.path()).unwrap();
    assert_eq!(r.w, b.w);
    assert_eq!(r.f, b.f);
    assert_eq!(r.u, b.u);
    assert_eq!(r.weighted, b.weighted);
    assert_eq!(r.config_echo, b.config_echo);
    for f in ["residuals.csv", "neumann.csv", "diffs.csv", "data_holder.csv"] {
        assert!(dir.path().join("reports").join(f).exists(), "{f}");
    }
}

#[test]
fn pull_back_identities() {
    let g = coarse();
    let d = CuspDomain::new(ProfilePair::quadratic_symmetric(1.0), g.xi_max).unwrap();
    let grid = g.strip();
    let time = g.time();
    let prof = XiProfile::new(&d, &grid).unwrap();
    let w = TimeField::from_fn(&time, &grid, |t, xi, eta| C64::new(t + xi * eta, 0.0));
    for p in [1.5, 2.0, 4.0] {
        let (u, wt) = pull_back_solution(&prof, &w, p).unwrap();
        let ne = grid.n_eta();
        for k in 0..grid.len() {
            let phi = prof.phi[k / ne];
            for a in 0..u.frames.len() {
                let wv = w.frames[a].values[k];
                assert!((u.frames[a][k] - wv * phi.powf(2.0 - 2.0 / p)).norm() <= 1e-13 * (1.0 + wv.norm()));
                assert!((wt.frames[a][k] * phi * phi - u.frames[a][k]).norm() <= 1e-12 * (1.0 + u.frames[a][k].norm()));
            }
        }
        // ||φ^{-2/p} w||_{L^p(Ω)} = ||w||_{L^p(Q)}
        let lhs = wt.lp_norm(3, p);
        let rhs = w.frames[3].lp_norm(p).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }
}

#[test]
fn data_holder_check_tracks_h() {
    let g = coarse();
    let d = CuspDomain::new(ProfilePair::quadratic_symmetric(1.0), g.xi_max).unwrap();
    let grid = g.strip();
    let prof = XiProfile::new(&d, &grid).unwrap();
    let smooth = data_holder_check(&prof, &grid, &|t, x, _| t.sqrt() * x, 17, 0.5, 2.0, 1.2).unwrap();
    assert!(smooth.pass, "{smooth:?}");
    // at p = 2 the seminorms of h in L²(Ω) and f in L²(Q) coincide
    for (a, b) in smooth.h_seminorm.iter().zip(&smooth.f_seminorm) {
        assert!((a - b).abs() < 1e-12 * a);
    }
    let rough = data_holder_check(&prof, &grid, &|t, x, _| t.powf(0.1) * x, 17, 0.5, 2.0, 1.2).unwrap();
    assert!(!rough.pass && rough.growth_h > 1.2);
}

/// Source whose push-forward (quadratic demo, a = 1, p = 2) satisfies all
/// four spatial boundary conditions: f = (1 + t²) X(ξ) Y(η).
fn compatible_source(xm: f64) -> impl Fn(f64, f64, f64) -> f64 {
    move |t, x, y| {
        let xi = 0.5 * (1.0 / x - 1.0);
        let eta = (y + x * x) / (2.0 * x * x);
        let fx = (xm - xi) * (1.0 + xi * (1.0 + xm) / xm);
        (1.0 + t * t) * fx * (1.0 - eta) * (1.0 + 2.0 * eta) / (2.0 * x * x)
    }
}

#[test]
fn weighted_residual_is_reported_nonzero() {
    let g = GridSpec::default();
    let inst = instance(1.0, g);
    let b = solve_original(&inst, &compatible_source(g.xi_max)).unwrap();
    assert!(b.residual.interior < 1e-4, "{:?}", b.residual);
    assert!(b.residual.ventcel.iter().all(|v| *v < 1e-4), "{:?}", b.residual);
    assert!(b.weighted_residual > 1e-3);
    assert!(b.warnings.is_empty(), "{:?}", b.warnings);
}

#[test]
fn apply_p_is_linear() {
    let d = CuspDomain::new(ProfilePair::cubic(1.0), 2.0).unwrap();
    let grid: Arc<StripGrid> = StripGrid::standard(2.0, 0.25, 1.0, 2, 9);
    let prof = XiProfile::new(&d, &grid).unwrap();
    let c = PerturbationCoeffs::new(&prof, &grid, 3.0).unwrap();
    let a = GridField::from_fn(&grid, |x, e| C64::new(x.sin() * e, e * e));
    let b = GridField::from_fn(&grid, |x, e| C64::new((x * e).cos(), 0.0));
    let pa = c.apply_frame(&a, Scheme::Panel).unwrap();
    let pb = c.apply_frame(&b, Scheme::Panel).unwrap();
    let ab = a.scale(C64::new(2.0, 1.0)).add(&b).unwrap();
    let pab = c.apply_frame(&ab, Scheme::Panel).unwrap();
    let e = pab.sub(&pa.scale(C64::new(2.0, 1.0)).add(&pb).unwrap()).unwrap().max_abs();
    assert!(e < 1e-10 * (1.0 + pab.max_abs()));
    assert_eq!(c.apply_frame(&GridField::zeros(&grid), Scheme::Panel).unwrap().max_abs(), 0.0);
}
