use std::collections::HashSet;

use num_complex::Complex64;
use polaron_core::cli::{num, RunConfig};
use polaron_core::fock::{assemble_h0, build_sector, two_body_check, SectorKind, SparseOperator};
use polaron_core::lattice::{enumerate_ball, CutoffKind, CutoffScheme, ModelParams, Momentum};
use polaron_core::renorm::g_mu_with_tol;
use polaron_core::richardson::richardson;
use polaron_core::schur::{bs_count_with_spectrum, resolvent_identity_residual, BsModel};
use polaron_core::{linalg::hermitian_eigenvalues, Error};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn orbit_key_is_point_group_invariant(x in -50i64..50, y in -50i64..50) {
        let k = Momentum::new(x, y);
        for img in k.point_group_images() {
            prop_assert_eq!(img.orbit_key(), k.orbit_key());
            prop_assert_eq!(img.norm2(), k.norm2());
        }
    }

    #[test]
    fn ball_is_complete_and_sorted(radius in 0.0f64..12.0, kappa in 0.3f64..2.0) {
        let ball = enumerate_ball(kappa, radius);
        let set: HashSet<_> = ball.iter().copied().collect();
        prop_assert_eq!(set.len(), ball.len());
        let n = (radius / kappa).ceil() as i64 + 1;
        for x in -n..=n {
            for y in -n..=n {
                let k = Momentum::new(x, y);
                prop_assert_eq!(set.contains(&k), k.ksq(kappa) <= radius * radius * (1.0 + 1e-12));
            }
        }
        prop_assert!(ball.windows(2).all(|w| (w[0].norm2(), w[0].x, w[0].y) < (w[1].norm2(), w[1].x, w[1].y)));
    }

    #[test]
    fn profiles_are_bounded_and_symmetric(
        kind in prop_oneof![Just(CutoffKind::Sharp), Just(CutoffKind::Gaussian), Just(CutoffKind::BetaOnly)],
        radius in 1.0f64..6.0,
        x in -20i64..20,
        y in -20i64..20,
    ) {
        let s = CutoffScheme::new(kind, radius, 1.0).unwrap();
        let k = Momentum::new(x, y);
        for img in k.point_group_images() {
            prop_assert_eq!(s.alpha(img), s.alpha(k));
            prop_assert_eq!(s.beta(img), s.beta(k));
        }
        prop_assert!((0.0..=1.0).contains(&s.alpha(k)) && (0.0..=1.0).contains(&s.beta(k)));
    }

    #[test]
    fn renormalized_coupling_reproduces_binding_energy(
        eb in -6.0f64..-0.05,
        mass in 0.3f64..4.0,
        radius in 2.0f64..6.0,
    ) {
        let p = ModelParams::unit_lattice(mass, eb, 0.0).unwrap();
        let rep = two_body_check(&CutoffScheme::sharp(radius, 1.0).unwrap(), &p).unwrap();
        prop_assert!((rep.ground - eb).abs() <= 1e-10 * (1.0 + eb.abs()), "{rep:?}");
    }

    #[test]
    fn random_models_satisfy_identities(seed in any::<u64>(), dim in 1usize..24, aux in 1usize..6, re in -4.0f64..6.0, im in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = BsModel::random(&mut rng, dim, aux.min(dim));
        prop_assert!(resolvent_identity_residual(&m, Complex64::new(re, im)).unwrap() <= 1e-10);
        let spectrum = hermitian_eigenvalues(&m.hamiltonian());
        let e = m.min_h0() - 0.01 - (re + 4.0);
        let (h, phi) = bs_count_with_spectrum(&m, &spectrum, e).unwrap();
        prop_assert_eq!(h, phi);
    }

    #[test]
    fn g_mu_increases_with_lambda(l1 in 0.05f64..20.0, dl in 0.01f64..20.0, mu in 0.0f64..2.0) {
        let p = ModelParams::unit_lattice(1.0, -1.0, mu).unwrap();
        let a = g_mu_with_tol(&p, l1, Momentum::ZERO, 1e-8).unwrap();
        let b = g_mu_with_tol(&p, l1 + dl, Momentum::ZERO, 1e-8).unwrap();
        prop_assert!(b.value - a.value > -(a.error_bound + b.error_bound));
    }

    #[test]
    fn richardson_is_exact_on_polynomials(limit in -5.0f64..5.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let h = [0.5, 0.25, 0.125];
        let v: Vec<f64> = h.iter().map(|x| limit + c1 * x + c2 * x * x).collect();
        let e = richardson(&h, &v, 1.0).unwrap();
        prop_assert!((e.value - limit).abs() <= 1e-12 * (1.0 + limit.abs() + c1.abs() + c2.abs()));
    }

    #[test]
    fn config_parser_never_panics(text in "[ -~\n]{0,200}") {
        match RunConfig::parse(&text) {
            Ok(c) => prop_assert!(c.basis_radius >= c.cutoff_radius),
            Err(Error::Config { .. }) | Err(Error::InvalidParameter(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn csv_numbers_keep_fifteen_digits(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let back: f64 = num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-14 * x.abs());
    }
}

#[test]
fn triplets_round_trip() {
    let p = ModelParams::unit_lattice(2.0, -1.0, 0.0).unwrap();
    let basis = build_sector(&p, 2, SectorKind::Physical, 3.0, Some(Momentum::new(1, 0))).unwrap();
    let h0 = assemble_h0(&basis, &p);
    let mut buf = Vec::new();
    h0.write_triplets(&mut buf, "h0", Some(Momentum::new(1, 0))).unwrap();
    let (back, header) = SparseOperator::read_triplets(buf.as_slice()).unwrap();
    assert_eq!(header.kind, "h0");
    assert_eq!(header.block, Some(Momentum::new(1, 0)));
    assert_eq!(header.dims, (basis.dim(), basis.dim()));
    assert_eq!(back.entries().collect::<Vec<_>>(), h0.entries().collect::<Vec<_>>());
}
