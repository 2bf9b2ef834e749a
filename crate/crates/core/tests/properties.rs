use num_complex::Complex;
use num_rational::BigRational;
use proptest::prelude::*;

use fhspec::io::{read_field, write_field};
use fhspec::liouville::ContinuedFraction;
use fhspec::normal_form::Direction;
use fhspec::{
    admissibility_check, apply_system, convergents, decay_classify, diophantine_profile, exp_liouville_test,
    hypoellipticity_verdict, psi_apply, reconstruct, solvability_verdict, solve, weight, zero_set, Bounds,
    Coefficient, DataVector, DecayLabel, EigenProvider, ExactComplex, ModeIndex, OperatorSpec, SpaceParams,
    SpectralField, SystemSpec, TimeCoefficient, TimeCoefficientSet, TimeDependentSystem, TimeSymbol, VerdictKind,
};

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

fn exact(re: (i64, i64), im: (i64, i64)) -> Coefficient<f64> {
    Coefficient::exact(ExactComplex::new(rat(re.0, re.1), rat(im.0, im.1)))
}

/// Small rational, numerator in `-6..=6`, denominator in `1..=4`.
fn small_rational() -> impl Strategy<Value = (i64, i64)> {
    (-6i64..=6, 1i64..=4)
}

#[derive(Clone, Debug)]
struct AffineOp {
    constant: (i64, i64),
    linear: Vec<(i64, i64)>,
    d: ((i64, i64), (i64, i64)),
}

fn affine_op(m: usize) -> impl Strategy<Value = AffineOp> {
    (
        small_rational(),
        prop::collection::vec(small_rational(), m),
        small_rational(),
        prop_oneof![Just((0i64, 1i64)), small_rational()],
    )
        .prop_map(|(constant, linear, d_re, d_im)| AffineOp { constant, linear, d: (d_re, d_im) })
}

fn build(m: usize, ops: &[AffineOp]) -> SystemSpec<f64> {
    let params = SpaceParams::new(m, 1, 1.0, 0.5, 2).unwrap();
    let ops = ops
        .iter()
        .map(|o| {
            let q = TimeSymbol::affine(exact(o.constant, (0, 1)), o.linear.iter().map(|&c| exact(c, (0, 1))).collect());
            OperatorSpec::new(q, exact(o.d.0, o.d.1))
        })
        .collect();
    SystemSpec::new(ops, EigenProvider::Harmonic1D, params).unwrap()
}

fn system() -> impl Strategy<Value = (usize, Vec<AffineOp>)> {
    (1usize..=2, 1usize..=3).prop_flat_map(|(m, l)| (Just(m), prop::collection::vec(affine_op(m), l)))
}

fn mode(m: usize) -> impl Strategy<Value = ModeIndex> {
    (prop::collection::vec(-30i64..=30, m), 0u64..40).prop_map(|(tau, j)| ModeIndex::new(tau, j))
}

fn smooth_field(bounds: Bounds, params: &SpaceParams, seed: u64) -> SpectralField<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    SpectralField::from_fn(bounds, |md| {
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        Complex::from_polar((-weight::<f64>(params, md)).exp(), phase)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_is_monotone(tau in prop::collection::vec(-50i64..=50, 2), j in 0u64..100,
                          grow in prop::collection::vec(0i64..20, 2), dj in 0u64..20,
                          sigma in 1.0f64..3.0, mu in 0.5f64..2.0) {
        let p = SpaceParams::new(2, 1, sigma, mu, 2).unwrap();
        let a = ModeIndex::new(tau.clone(), j);
        let bigger: Vec<i64> = tau.iter().zip(&grow).map(|(&t, &g)| if t < 0 { t - g } else { t + g }).collect();
        let b = ModeIndex::new(bigger, j + dj);
        prop_assert!(weight::<f64>(&p, &b) >= weight::<f64>(&p, &a));
    }

    #[test]
    fn reconstruct_is_additive(seed in 0u64..1000) {
        let p = SpaceParams::new(1, 1, 1.0, 0.5, 2).unwrap();
        let b = Bounds::uniform(1, 4, 4).unwrap();
        let f = smooth_field(b.clone(), &p, seed);
        let g = smooth_field(b, &p, seed + 1);
        let xs = vec![vec![-1.5], vec![0.0], vec![0.7]];
        let rf = reconstruct(&f, &[8], &xs, &EigenProvider::Harmonic1D).unwrap();
        let rg = reconstruct(&g, &[8], &xs, &EigenProvider::Harmonic1D).unwrap();
        let rs = reconstruct(&f.add(&g).unwrap(), &[8], &xs, &EigenProvider::Harmonic1D).unwrap();
        for i in 0..rs.values.len() {
            prop_assert!((rs.values[i] - rf.values[i] - rg.values[i]).norm() <= 1e-14);
        }
    }

    #[test]
    fn system_norm_is_the_largest_symbol((m, ops) in system(), md in mode(2)) {
        let spec = build(m, &ops);
        let md = ModeIndex::new(md.tau[..m].to_vec(), md.j);
        let (norm, r) = spec.system_norm_argmax(&md).unwrap();
        let mags: Vec<f64> = (0..spec.len()).map(|k| spec.symbol_value(k, &md).unwrap()).map(|v| {
            if v.zero.is_zero() { 0.0 } else { v.value.norm() }
        }).collect();
        let best = mags.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(norm, best);
        prop_assert_eq!(mags[r], best);
        prop_assert!(mags[..r].iter().all(|&x| x < best) || best == 0.0);
        // symbols commute pointwise
        for a in 0..spec.len() {
            for b in 0..spec.len() {
                let (sa, sb) = (spec.symbol(a, &md).unwrap(), spec.symbol(b, &md).unwrap());
                prop_assert_eq!(sa * sb, sb * sa);
            }
        }
    }

    #[test]
    fn scaling_an_operator_scales_its_symbol((m, ops) in system(), md in mode(2), s in small_rational()) {
        prop_assume!(s.0 != 0);
        let spec = build(m, &ops);
        let md = ModeIndex::new(md.tau[..m].to_vec(), md.j);
        let factor = exact(s, (0, 1));
        let scaled = SystemSpec::new(
            spec.ops.iter().map(|o| o.scaled(&factor)).collect(),
            spec.eigen.clone(),
            spec.params.clone(),
        ).unwrap();
        let k = s.0 as f64 / s.1 as f64;
        for r in 0..spec.len() {
            let a = spec.symbol(r, &md).unwrap().norm() * k.abs();
            let b = scaled.symbol(r, &md).unwrap().norm();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
        let (_, r0) = spec.system_norm_argmax(&md).unwrap();
        let (_, r1) = scaled.system_norm_argmax(&md).unwrap();
        prop_assert_eq!(r0, r1);
    }

    #[test]
    fn zero_set_members_vanish((m, ops) in system()) {
        let spec = build(m, &ops);
        let b = Bounds::uniform(m, 6, 6).unwrap();
        for md in zero_set(&spec, &b).unwrap() {
            prop_assert!(b.contains(&md));
            for r in 0..spec.len() {
                let e = spec.symbol_exact(r, &md).unwrap().unwrap();
                prop_assert!(e.is_zero());
            }
        }
    }

    #[test]
    fn hypoellipticity_implies_solvability((m, ops) in system(), t in 4i64..12, j in 4u64..12) {
        let spec = build(m, &ops);
        let b = Bounds::uniform(m, t, j).unwrap();
        match hypoellipticity_verdict(&spec, &b, 4) {
            Ok(h) => {
                if h.verdict == VerdictKind::Holds {
                    prop_assert_eq!(solvability_verdict(&spec, &b, 4).unwrap().verdict, VerdictKind::Holds);
                }
            }
            Err(fhspec::Error::DegenerateSystem(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn profile_ignores_operator_order((m, ops) in system()) {
        let spec = build(m, &ops);
        let b = Bounds::uniform(m, 6, 6).unwrap();
        let Ok(a) = diophantine_profile(&spec, &b, 4) else { return Ok(()) };
        let perm: Vec<usize> = (0..spec.len()).rev().collect();
        let p = diophantine_profile(&spec.permuted(&perm), &b, 4).unwrap();
        prop_assert_eq!(a.trend, p.trend);
        prop_assert_eq!(a.zero_count, p.zero_count);
        let ea: Vec<f64> = a.shell_eps.iter().map(|s| s.eps_hat).collect();
        let ep: Vec<f64> = p.shell_eps.iter().map(|s| s.eps_hat).collect();
        prop_assert_eq!(ea, ep);
    }

    #[test]
    fn range_is_admissible_and_solve_inverts((m, ops) in system(), seed in 0u64..1000) {
        let spec = build(m, &ops);
        let b = Bounds::uniform(m, 5, 5).unwrap();
        let zeros = zero_set(&spec, &b).unwrap();
        let u = smooth_field(b, &spec.params, seed).map_values(|md, v| {
            if zeros.binary_search(md).is_ok() { Complex::new(0.0, 0.0) } else { v }
        });
        let f = apply_system(&spec, &u).unwrap();
        let rep = admissibility_check(&spec, &f, 1e-10).unwrap();
        prop_assert!(rep.admissible, "{:?}", rep);
        let back = solve(&spec, &f).unwrap();
        for (md, v) in u.iter() {
            let w = back.get(md);
            prop_assert!((w - v).norm() <= 1e-12 * v.norm(), "{:?}: {} vs {}", md, w, v);
        }
    }

    #[test]
    fn solve_is_order_independent((m, ops) in system(), seed in 0u64..1000) {
        let spec = build(m, &ops);
        let b = Bounds::uniform(m, 4, 4).unwrap();
        let zeros = zero_set(&spec, &b).unwrap();
        let u = smooth_field(b, &spec.params, seed).map_values(|md, v| {
            if zeros.binary_search(md).is_ok() { Complex::new(0.0, 0.0) } else { v }
        });
        let f = apply_system(&spec, &u).unwrap();
        let perm: Vec<usize> = (0..spec.len()).rev().collect();
        let a = solve(&spec, &f).unwrap();
        let p = solve(&spec.permuted(&perm), &f.permuted(&perm)).unwrap();
        for (md, v) in a.iter() {
            prop_assert!((p.get(md) - v).norm() <= 1e-12 * v.norm());
        }
    }

    #[test]
    fn classification_is_scale_equivariant(seed in 0u64..1000, k in prop_oneof![Just(1e-6), Just(0.5), Just(3.0), Just(1e6)]) {
        let p = SpaceParams::new(1, 1, 1.0, 0.5, 2).unwrap();
        let f = smooth_field(Bounds::uniform(1, 30, 30).unwrap(), &p, seed);
        let a = decay_classify(&f, &p).unwrap();
        let b = decay_classify(&f.scale(Complex::new(k, 0.0)), &p).unwrap();
        prop_assert_eq!(a.label, b.label);
    }

    #[test]
    fn convergent_determinant(quotients in prop::collection::vec(1u64..10_000, 3..30)) {
        let qs: Vec<num_bigint::BigInt> = quotients.iter().map(|&a| a.into()).collect();
        let depth = qs.len() - 1;
        let cf = ContinuedFraction::finite(qs).unwrap();
        let c = convergents(&cf, depth).unwrap();
        let (mut p0, mut q0) = (num_bigint::BigInt::from(0), num_bigint::BigInt::from(1));
        for b in &c {
            let sign = if b.k % 2 == 0 { 1 } else { -1 };
            prop_assert_eq!(&b.q * &p0 - &b.p * &q0, num_bigint::BigInt::from(sign));
            p0 = b.p.clone();
            q0 = b.q.clone();
        }
    }

    #[test]
    fn field_csv_round_trip_is_bit_exact(seed in 0u64..1000) {
        let p = SpaceParams::new(2, 1, 1.0, 0.5, 2).unwrap();
        let f = smooth_field(Bounds::new(vec![3, 2], 3).unwrap(), &p, seed)
            .map_values(|_, v| v * (seed as f64 + 0.1).sqrt());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_field(&f, Some(&p), &path).unwrap();
        let (g, q) = read_field::<f64>(&path).unwrap();
        prop_assert_eq!(q, Some(p));
        prop_assert_eq!(f.nnz(), g.nnz());
        for ((ma, a), (mb, b)) in f.iter().zip(g.iter()) {
            prop_assert_eq!(ma, mb);
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn psi_round_trip_and_smoothness(seed in 0u64..1000, c1 in -1.0f64..1.0, s1 in -1.0f64..1.0, a0 in -1.0f64..1.0) {
        let p = SpaceParams::new(1, 1, 1.0, 0.5, 2).unwrap();
        let a = TimeCoefficient::trig(a0, vec![c1], vec![s1]).unwrap();
        let sys = TimeDependentSystem::new(TimeCoefficientSet::new(vec![a]).unwrap(), EigenProvider::Harmonic1D, p.clone()).unwrap();
        let b = Bounds::uniform(1, 40, 5).unwrap();
        let u = smooth_field(b.clone(), &p, seed);
        let fwd = psi_apply(Direction::Forward, &u, &sys, Some(&[256])).unwrap();
        let back = psi_apply(Direction::Inverse, &fwd.field, &sys, Some(&[256])).unwrap();
        for (md, v) in u.iter() {
            if 2 * md.tau[0].abs() <= 40 {
                prop_assert!((back.field.get(md) - v).norm() <= 1e-10 * u.max_abs());
            }
        }
        let before = decay_classify(&u, &p).unwrap();
        prop_assert_eq!(before.label, DecayLabel::Smooth);
        prop_assert_eq!(decay_classify(&fwd.field, &p).unwrap().label, DecayLabel::Smooth);
    }

    #[test]
    fn flagging_survives_deeper_depth(c in 2u64..7, sigma in 1.0f64..3.0, d1 in 3usize..5, extra in 1usize..3) {
        // shallow flags on non-Liouville numbers (golden ratio, ω) are expected to
        // clear; depths the rule cannot reach are skipped
        let cf = ContinuedFraction::exp_rule(c).unwrap();
        let (Ok(shallow), Ok(deep)) = (exp_liouville_test(&cf, sigma, d1), exp_liouville_test(&cf, sigma, d1 + extra)) else {
            return Ok(());
        };
        if shallow.is_flagged() {
            prop_assert!(deep.is_flagged(), "exp-rule:{c} flagged at {d1}, not at {}", d1 + extra);
        }
    }
}

#[test]
fn enlarging_the_grid_keeps_a_failure() {
    use fhspec::{TabulatedSymbol, Trend};
    let p = SpaceParams::new(1, 1, 1.0, 0.5, 2).unwrap();
    let q = TimeSymbol::Tabulated(TabulatedSymbol::<f64>::planted(&p, 0.25, 3, 0.5));
    let spec = SystemSpec::new(vec![OperatorSpec::new(q, Coefficient::zero())], EigenProvider::Harmonic1D, p).unwrap();
    for t in [150, 200, 300, 400] {
        let r = diophantine_profile(&spec, &Bounds::uniform(1, t, 4).unwrap(), 8).unwrap();
        assert_eq!(r.trend, Trend::ConditionFails, "tauMax {t}");
    }
}

#[test]
fn smooth_data_gives_smooth_solutions_when_the_condition_holds() {
    let p = SpaceParams::new(1, 1, 1.0, 0.5, 2).unwrap();
    let spec = SystemSpec::new(
        vec![OperatorSpec::new(TimeSymbol::derivative(1, 0), Coefficient::from_int(-1))],
        EigenProvider::Harmonic1D,
        p.clone(),
    )
    .unwrap();
    let b = Bounds::uniform(1, 40, 40).unwrap();
    assert_eq!(diophantine_profile(&spec, &b, 8).unwrap().trend, fhspec::Trend::ConditionHolds);
    let zeros = zero_set(&spec, &b).unwrap();
    let u = smooth_field(b, &p, 3).map_values(|md, v| if zeros.binary_search(md).is_ok() { Complex::new(0.0, 0.0) } else { v });
    let f = apply_system(&spec, &u).unwrap();
    assert!(f.components().iter().all(|c| decay_classify(c, &p).unwrap().label == DecayLabel::Smooth));
    let sol = solve(&spec, &f).unwrap();
    assert_eq!(decay_classify(&sol, &p).unwrap().label, DecayLabel::Smooth);
    let _ = DataVector::new(vec![sol]).unwrap();
}
