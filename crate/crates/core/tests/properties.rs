mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use measure_scale::cylinder::{
    log_scalar_measure, operator_measure, scalar_measure, word_to_interval, NAdicInterval, Word,
};
use measure_scale::dominant::{
    filter_principal_vector, power_limit_errors, principal_right_vector, DominantTriple,
};
use measure_scale::filter::{
    beta_diagnostics, classify_region, ell2_adjoint_apply, ell2_apply, taps_from_beta, Channel,
    FiniteSequence, Region,
};
use measure_scale::linalg::{hermitian_eigenvalues, CMatrix, CVector, C64};
use measure_scale::scale::{dominant_limit_check, theoretical_scale};
use measure_scale::system::Builtin;
use measure_scale::wavelet::{cascade_phi, packet_from};
use measure_scale::{FilterBank, MeasurementSystem, PureState};
use proptest::prelude::*;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn seq_strategy() -> impl Strategy<Value = FiniteSequence> {
    (
        -6i64..6,
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..10),
    )
        .prop_map(|(start, v)| {
            FiniteSequence::new(start, v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
        })
}

fn beta_strategy() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn systems() -> Vec<MeasurementSystem> {
    let mut out = vec![
        MeasurementSystem::builtin(Builtin::Lebesgue2),
        MeasurementSystem::builtin(Builtin::Cantor3),
    ];
    for b in [0.3, -1.1, 2.0, 5.0 * PI / 12.0] {
        out.push(MeasurementSystem::from_filter_bank(&taps_from_beta(b)).unwrap());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn hermitian_spectrum_is_real(seed in any::<u64>(), dim in 1usize..9) {
        let mut rng = common::rng(seed);
        let a = common::random_matrix(&mut rng, dim, dim);
        let h = &a + &a.adjoint();
        let ev = h.eigenvalues().unwrap();
        for z in &ev {
            prop_assert!(z.im.abs() <= 1e-10 * h.inf_norm().max(1.0));
        }
        let real = hermitian_eigenvalues(&h).unwrap();
        prop_assert_eq!(real.len(), dim);
    }

    #[test]
    fn solve_reproduces_rhs(seed in any::<u64>(), dim in 1usize..12) {
        let mut rng = common::rng(seed);
        // diagonally shifted random matrices stay well conditioned
        let mut a = common::random_matrix(&mut rng, dim, dim);
        for i in 0..dim {
            a[(i, i)] += re(2.0 * dim as f64);
        }
        let b = common::random_vector(&mut rng, dim);
        let x = a.solve(&b).unwrap();
        let r = (&a.mul_vec(&x) - &b).norm();
        prop_assert!(r <= 1e-10 * a.operator_norm().unwrap() * x.norm());
    }

    #[test]
    fn circle_identity(beta in beta_strategy()) {
        let d = beta_diagnostics(beta);
        for r in d.circle_residuals {
            prop_assert!(r < 1e-12);
        }
    }

    #[test]
    fn slanted_spectrum_matches_closed_form(beta in beta_strategy()) {
        let fb = taps_from_beta(beta);
        let ev = fb.lowpass_matrix().eigenvalues().unwrap();
        let mut want = beta_diagnostics(beta).closed_form_spectrum.to_vec();
        for z in ev {
            prop_assert!(z.im.abs() < 1e-9);
            let (i, d) = want
                .iter()
                .enumerate()
                .map(|(i, w)| (i, (w - z.re).abs()))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            prop_assert!(d < 1e-9, "eigenvalue {} unmatched", z);
            want.remove(i);
        }
    }

    #[test]
    fn ell2_adjoint_identity(x in seq_strategy(), y in seq_strategy(), beta in beta_strategy(), high in any::<bool>()) {
        let fb = taps_from_beta(beta);
        let ch = if high { Channel::High } else { Channel::Low };
        // <y, F x> = <F* y, x>
        let lhs = y.inner(&ell2_apply(ch, &fb, &x));
        let rhs = ell2_adjoint_apply(ch, &fb, &y).inner(&x);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn ell2_column_isometry(x in seq_strategy(), beta in beta_strategy()) {
        let fb = taps_from_beta(beta);
        let total = ell2_apply(Channel::Low, &fb, &x).norm_sqr() + ell2_apply(Channel::High, &fb, &x).norm_sqr();
        prop_assert!((total - x.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one(seed in any::<u64>(), which in 0usize..6) {
        let sys = &systems()[which];
        let mut rng = common::rng(seed);
        let psi = PureState::normalize(&common::random_vector(&mut rng, sys.dim())).unwrap();
        let p: f64 = sys.outcome_probabilities(&psi).unwrap().iter().sum();
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_and_additive(seed in any::<u64>(), which in 0usize..6, len in 0usize..7) {
        let sys = &systems()[which];
        let mut rng = common::rng(seed);
        let psi = PureState::normalize(&common::random_vector(&mut rng, sys.dim())).unwrap();
        let digits: Vec<usize> = (0..len).map(|i| (seed as usize >> (3 * i)) % sys.n()).collect();
        let w = Word::new(sys.n(), digits).unwrap();
        let parent = scalar_measure(sys, &psi, &w).unwrap();
        let mut sum = 0.0;
        for j in 0..sys.n() {
            let child = scalar_measure(sys, &psi, &w.extended(j, 1)).unwrap();
            prop_assert!(child <= parent + 1e-12);
            sum += child;
        }
        prop_assert!((sum - parent).abs() < 1e-12);
        let log = log_scalar_measure(sys, &psi, &w).unwrap();
        if parent > 1e-200 {
            prop_assert!((log.exp() - parent).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_measure_is_psd(seed in any::<u64>(), which in 0usize..6, len in 0usize..6) {
        let sys = &systems()[which];
        let digits: Vec<usize> = (0..len).map(|i| (seed as usize >> (3 * i)) % sys.n()).collect();
        let w = Word::new(sys.n(), digits).unwrap();
        let r = operator_measure(sys, &w).unwrap().matrix().psd_residual().unwrap();
        prop_assert!(r.hermitian_defect < 1e-10);
        prop_assert!(r.min_eigenvalue > -1e-10);
    }

    #[test]
    fn theoretical_scale_reversal(beta in beta_strategy()) {
        let fb = taps_from_beta(beta);
        let rev: Vec<C64> = fb.taps().iter().rev().copied().collect();
        let rev = FilterBank::new(rev).unwrap();
        match (theoretical_scale(&fb), theoretical_scale(&rev)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.alpha, b.alpha);
                prop_assert_eq!(a.s, b.s);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "asymmetric hypothesis failure"),
        }
    }

    #[test]
    fn principal_vector_norm_at_least_one(beta in -0.75f64..0.75) {
        let fb = taps_from_beta(beta);
        if let Ok(v) = filter_principal_vector(&fb) {
            prop_assert!(v.norm_sqr() >= 1.0 - 1e-12);
        }
    }
}

#[test]
fn beta_systems_are_isometric_with_left_eigenvectors() {
    for i in 0..64 {
        let beta = -PI + 2.0 * PI * i as f64 / 63.0;
        let fb = taps_from_beta(beta);
        let sys = MeasurementSystem::from_filter_bank(&fb).unwrap();
        assert!(sys.column_isometry_residual().unwrap() < 1e-10);

        let e0 = CVector::basis(3, 0);
        let f0 = sys.operator(0).adjoint().mul_vec(&e0);
        assert!((&f0 - &e0.scale(fb.first().conj())).norm() < 1e-12);
        let f1 = sys.operator(1).adjoint().mul_vec(&e0);
        assert!((&f1 - &e0.scale(fb.last())).norm() < 1e-12);

        // (1, 1, 1) F0 = (1, 1, 1) / sqrt2
        let ones = CVector::from_real(&[1.0, 1.0, 1.0]);
        let row = sys.operator(0).adjoint().mul_vec(&ones);
        assert!((&row - &ones.scale_real(FRAC_1_SQRT_2)).norm() < 1e-12);
    }
}

#[test]
fn cuntz_relations_on_deltas() {
    for fb in [taps_from_beta(FRAC_PI_4), FilterBank::daubechies4(), FilterBank::haar()] {
        for m in -8..=8 {
            let delta = FiniteSequence::delta(m);
            for (i, ci) in [Channel::Low, Channel::High].into_iter().enumerate() {
                for (j, cj) in [Channel::Low, Channel::High].into_iter().enumerate() {
                    let y = ell2_apply(ci, &fb, &ell2_adjoint_apply(cj, &fb, &delta));
                    let want = if i == j { delta.clone() } else { FiniteSequence::zero() };
                    assert!(y.max_abs_diff(&want) < 1e-12, "i={i} j={j} m={m}");
                }
            }
        }
    }
}

#[test]
fn intervals_tile_the_unit_interval() {
    for (base, level) in [(2usize, 10usize), (3, 6), (5, 3)] {
        let count = base.pow(level as u32);
        let mut intervals: Vec<NAdicInterval> = (0..count)
            .map(|i| word_to_interval(&Word::from_index(base, level, i as u128)).unwrap())
            .collect();
        intervals.sort_by_key(|iv| iv.numerator);
        // consecutive numerators: injective and gap-free in exact arithmetic
        for (i, iv) in intervals.iter().enumerate() {
            assert_eq!(iv.numerator, i as u128);
            assert_eq!(iv.level, level);
        }
        assert_eq!(intervals[0].left(), 0.0);
        assert_eq!(intervals[count - 1].right(), 1.0);
        for pair in intervals.windows(2) {
            assert_eq!(pair[0].right(), pair[1].left());
        }
        for (i, iv) in intervals.iter().enumerate() {
            assert_eq!(iv.to_word(), Word::from_index(base, level, i as u128));
        }
    }
}

#[test]
fn planted_triples_normalize_and_converge() {
    let mut rng = common::rng(7);
    for trial in 0..100 {
        let dim = 2 + trial % 7;
        let p = common::planted_triple(&mut rng, dim);
        let t = DominantTriple::new(p.f.clone(), p.a, p.w.clone()).unwrap();
        assert!((t.spectral_gap() - p.gap).abs() < 1e-6, "trial {trial}");
        let xi = principal_right_vector(&t).unwrap();
        assert!((p.w.inner(&xi) - re(1.0)).norm() < 1e-10);
        assert!((&p.f.mul_vec(&xi) - &xi.scale(p.a)).norm() <= 1e-9 * p.a.norm() * xi.norm());
    }
}

#[test]
fn perturbed_principal_vector_is_not_an_eigenvector() {
    let mut rng = common::rng(11);
    let p = common::planted_triple(&mut rng, 4);
    let t = DominantTriple::new(p.f.clone(), p.a, p.w.clone()).unwrap();
    let xi = principal_right_vector(&t).unwrap();
    for _ in 0..5 {
        let mut d = common::random_vector(&mut rng, 4);
        d = d.axpy(-xi.inner(&d) / xi.norm_sqr(), &xi);
        let d = d.scale_real(1e-3 / d.norm());
        let moved = &xi + &d;
        let r = (&p.f.mul_vec(&moved) - &moved.scale(p.a)).norm();
        assert!(r > 1e-6);
    }
}

#[test]
fn filter_and_block_vectors_agree() {
    let mut checked = 0;
    for i in 0..32 {
        let beta = -FRAC_PI_4 + (i as f64 + 0.5) * (PI / 2.0) / 32.0;
        assert_eq!(classify_region(beta), Region::I);
        let fb = taps_from_beta(beta);
        let Ok(v) = filter_principal_vector(&fb) else { continue };
        let Ok(t) = DominantTriple::new(fb.lowpass_matrix(), fb.first(), CVector::basis(3, 0)) else {
            continue;
        };
        let xi = principal_right_vector(&t).unwrap();
        assert!((&xi - &v).norm() < 1e-10, "beta {beta}");
        checked += 1;
    }
    assert!(checked >= 24, "only {checked} region-(i) angles satisfied the hypotheses");
}

#[test]
fn power_errors_stay_under_envelope() {
    let fb = taps_from_beta(0.3);
    let t = DominantTriple::new(fb.lowpass_matrix(), fb.first(), CVector::basis(3, 0)).unwrap();
    for start in 0..3 {
        let x = CVector::basis(3, start);
        let e = power_limit_errors(&t, &x, 60).unwrap();
        let c = e[1] / t.spectral_gap();
        for (n, &err) in e.iter().enumerate().skip(1) {
            let env = c * (n as f64).powi(2) * t.spectral_gap().powi(n as i32);
            assert!(err <= 1.1 * env + 1e-14, "x=e{start} n={n}");
        }
    }
    assert!(*power_limit_errors(&t, &CVector::basis(3, 0), 60).unwrap().last().unwrap() < 1e-4);
}

#[test]
fn limit_ratios_follow_envelope() {
    let fb = taps_from_beta(0.3);
    let c = dominant_limit_check(&fb, &Word::empty(2), 80).unwrap();
    let g = c.spectral_gap;
    let env = |n: usize| (n as f64).powi(2) * g.powi(n as i32) * (2.0 - g.powi(n as i32));
    let fitted = (c.ratios[10] - c.predicted_limit).abs() / env(10);
    for n in 10..=80 {
        let dev = (c.ratios[n] - c.predicted_limit).abs();
        assert!(dev <= 1.1 * fitted * env(n) + 1e-12, "n={n}");
    }
}

#[test]
fn haar_packets_are_orthonormal() {
    let fb = FilterBank::haar();
    let phi = cascade_phi(&fb, 8).unwrap();
    for j in 1..=4 {
        let count = 1usize << j;
        let packets: Vec<_> = (0..count).map(|n| packet_from(&fb, &phi, n).unwrap()).collect();
        let mut gram = CMatrix::zeros(count, count);
        for a in 0..count {
            for b in 0..count {
                gram[(a, b)] = re(packets[a].shifted_inner(&packets[b], 0).unwrap());
            }
        }
        // Gram = I: rank 2^j, the dimension of j wavelet scales
        assert!((&gram - &CMatrix::identity(count)).max_abs() < 1e-12, "j={j}");
        let dim_scales = 1 + (0..j).map(|s| 1usize << s).sum::<usize>();
        assert_eq!(count, dim_scales);
    }
}

#[test]
fn daubechies_packets_are_nearly_orthonormal() {
    let fb = FilterBank::daubechies4();
    let phi = cascade_phi(&fb, 10).unwrap();
    let packets: Vec<_> = (0..4).map(|n| packet_from(&fb, &phi, n).unwrap()).collect();
    for a in 0..4 {
        for b in 0..4 {
            let g = packets[a].shifted_inner(&packets[b], 0).unwrap();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-2, "<{a},{b}> = {g}");
        }
    }
}
