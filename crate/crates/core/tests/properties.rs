use cuspwave::geometry::{CuspDomain, ProfilePair};
use cuspwave::grid::{graded_time_line, GridField, StripGrid};
use cuspwave::operator_sum::{default_contour, resolvent_a};
use cuspwave::contour::ContourSpec;
use cuspwave::resolvent::{resolvent_h, SpectralParam, B_OP};
use cuspwave::panel::{NodeKind, PanelLine};
use cuspwave::C64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn geometry_round_trip(a in 0.2f64..2.0, xi in 0.0f64..20.0, eta in 0.0f64..=1.0) {
        let d = CuspDomain::new(ProfilePair::cubic(a), 25.0).unwrap();
        let (x, y) = d.inverse_map(xi, eta).unwrap();
        let (xi2, eta2) = d.forward_map(x, y).unwrap();
        prop_assert!((xi2 - xi).abs() <= 1e-9 * (1.0 + xi));
        prop_assert!((eta2 - eta).abs() <= 1e-9);
    }

    #[test]
    fn h_resolvent_is_linear(mu_re in 0.5f64..50.0, mu_im in -50.0f64..50.0, c in -3.0f64..3.0) {
        let line = PanelLine::uniform(1.0, 4, 13, NodeKind::Chebyshev);
        let mu = SpectralParam::new(C64::new(mu_re, mu_im)).unwrap();
        let u: Vec<C64> = line.nodes.iter().map(|x| C64::new(x.cos(), *x)).collect();
        let v: Vec<C64> = line.nodes.iter().map(|x| C64::new((-x).exp(), 0.0)).collect();
        let w: Vec<C64> = u.iter().zip(&v).map(|(a, b)| a * c + b).collect();
        let (ru, rv, rw) = (resolvent_h(&mu, &line, &u).unwrap(), resolvent_h(&mu, &line, &v).unwrap(), resolvent_h(&mu, &line, &w).unwrap());
        for k in 0..line.len() {
            prop_assert!((rw[k] - (ru[k] * c + rv[k])).norm() <= 1e-11 * (1.0 + rw[k].norm()));
        }
    }

    #[test]
    fn graded_time_line_symmetric(h_end in 0.001f64..0.05, nt4 in 4usize..12) {
        let h_mid = 4.0 / (4 * nt4) as f64;
        prop_assume!(h_end <= h_mid);
        let t = graded_time_line(h_end, h_mid, 5);
        let n = t.nodes.len();
        for k in 0..n {
            prop_assert!((t.nodes[k] + t.nodes[n - 1 - k] - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn resolvent_a_is_real_and_linear(s in -2.0f64..2.0) {
        let g = StripGrid::standard(10.0, 0.5, 2.0, 1, 9);
        let c = default_contour(1.0, &ContourSpec::default()).unwrap();
        let f1 = GridField::from_real(&g, |x, y| (-x).exp() * (1.0 - y));
        let f2 = GridField::from_real(&g, |x, y| (-(x * s).powi(2)).exp() * y * (1.0 - y));
        let r1 = resolvent_a(C64::new(1.0, 0.0), &f1, &c, &B_OP).unwrap();
        let r2 = resolvent_a(C64::new(1.0, 0.0), &f2, &c, &B_OP).unwrap();
        let r12 = resolvent_a(C64::new(1.0, 0.0), &f1.add(&f2.scale(C64::new(s, 0.0))).unwrap(), &c, &B_OP).unwrap();
        let d = r12.sub(&r1.add(&r2.scale(C64::new(s, 0.0))).unwrap()).unwrap().max_abs();
        prop_assert!(d <= 1e-10 * (1.0 + r12.max_abs()));
        prop_assert!(r1.values.iter().all(|v| v.im.abs() <= 1e-10 * (1.0 + v.re.abs())));
    }
}
