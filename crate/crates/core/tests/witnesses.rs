use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use witnesskit::algebra::{ic_povm, StateEnsemble};
use witnesskit::catalog::{
    cloning_margins, gamma_threshold, measure_prepare_basis, noisy_mub_measurements, perturbed_cloning_margins,
    random_basis, xi_cc, xi_cc_clone, xi_mc, xi_mm, MubPair,
};
use witnesskit::channel::{compose, from_measurement, identity_channel};
use witnesskit::compat::{p_post, p_post_optimum, p_prior};
use witnesskit::sampling::{random_channel, random_compatible_pair, DEFAULT_SEED};
use witnesskit::witness::{
    lift_witness, task_from_witness, tighten, witness_from_incompatible_pair, witness_from_task, DETECTION_TOL,
};
use witnesskit::{Algebra, AlgebraElement, Channel, DiscriminationTask, Error, Factor, Measurement, StateFunctional, WitnessForm};

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(DEFAULT_SEED)
}

fn mub_channels(d: usize, gamma: f64) -> (Channel, Channel) {
    let (m, n) = noisy_mub_measurements(d, gamma).unwrap();
    (from_measurement(&m), from_measurement(&n))
}

/// Measurement pairs on `L(C^2) -> l^inf(2)`: random ones and noisy MUB
/// pairs away from the threshold, so both detected and undetected pairs occur.
fn sample_pairs(r: &mut ChaCha8Rng, count: usize) -> Vec<(Channel, Channel)> {
    let (q, x) = (Algebra::full(2), Algebra::abelian(2));
    (0..count)
        .map(|k| {
            if k % 2 == 0 {
                (random_channel(r, &q, &x).unwrap(), random_channel(r, &q, &x).unwrap())
            } else {
                let g = if r.random::<bool>() { r.random_range(0.3..0.69) } else { r.random_range(0.73..1.0) };
                mub_channels(2, g)
            }
        })
        .collect()
}

fn delta_pair(w: &WitnessForm) -> (Measurement, Measurement) {
    (ic_povm(w.out1()).unwrap(), ic_povm(w.out2()).unwrap())
}

#[test]
fn xi_mm_is_already_tight() {
    let w = xi_mm(2).unwrap();
    assert!((tighten(&w).unwrap().delta0() - w.delta0()).abs() < 1e-6);
    let inflated = w.with_delta0(w.delta0() + 5.0);
    assert!((tighten(&inflated).unwrap().delta0() - w.delta0()).abs() < 1e-6);
}

#[test]
fn clone_witness_is_already_tight() {
    let w = xi_cc_clone(2, None).unwrap();
    assert!((tighten(&w).unwrap().delta0() - w.delta0()).abs() < 1e-5);
}

#[test]
fn theorem_one_identity_and_task_shape() {
    let w = xi_mm(2).unwrap();
    let (m1, m2) = delta_pair(&w);
    let t = task_from_witness(&w, &m1, &m2).unwrap();
    let mut r = rng();
    for _ in 0..20 {
        let c1 = random_channel(&mut r, w.input(), w.out1()).unwrap();
        let c2 = random_channel(&mut r, w.input(), w.out2()).unwrap();
        let lhs = w.evaluate(&c1, &c2).unwrap();
        let rhs = t.alpha * (t.delta - witnesskit::p_prior_given(&c1, &c2, &t.task).unwrap());
        assert!((lhs - rhs).abs() <= 1e-8, "{lhs} vs {rhs}");
    }
    let e = t.task.ensemble();
    for s in e.members() {
        assert!(s.min_eigenvalue().unwrap() > 0.0);
    }
    assert!(e.marginal().check_state(1e-9).is_ok());
    let (post, prior) = (p_post(&t.task).unwrap(), p_prior(&t.task).unwrap());
    assert!(post <= t.delta + 1e-6 && t.delta < prior, "{post} <= {} < {prior}", t.delta);
}

#[test]
fn task_roundtrip_is_detection_equivalent() {
    let w = xi_mm(2).unwrap();
    let (m1, m2) = delta_pair(&w);
    let back = witness_from_task(&task_from_witness(&w, &m1, &m2).unwrap().task).unwrap();
    let mut r = rng();
    let mut detected = 0;
    for (c1, c2) in sample_pairs(&mut r, 50) {
        let a = w.detects(&c1, &c2).unwrap();
        assert_eq!(a, back.detects(&c1, &c2).unwrap(), "xi_mm = {}", w.evaluate(&c1, &c2).unwrap());
        detected += a as usize;
    }
    assert!(detected > 0 && detected < 50, "{detected} of 50 detected");
}

#[test]
fn task_witness_is_finer() {
    // a loosened witness still yields a tight task witness detecting at least as much
    let tight = xi_mm(2).unwrap();
    let w = tight.with_delta0(tight.delta0() + 0.05);
    let (m1, m2) = delta_pair(&w);
    let finer = witness_from_task(&task_from_witness(&w, &m1, &m2).unwrap().task).unwrap();
    let mut r = rng();
    let mut strictly = 0;
    for (c1, c2) in sample_pairs(&mut r, 40) {
        let (a, b) = (w.detects(&c1, &c2).unwrap(), finer.detects(&c1, &c2).unwrap());
        assert!(!a || b);
        strictly += (b && !a) as usize;
    }
    assert!(strictly > 0);
}

#[test]
fn task_witness_vanishes_at_p_post_optimum() {
    let w = xi_mm(2).unwrap();
    let (m1, m2) = delta_pair(&w);
    let task = task_from_witness(&w, &m1, &m2).unwrap().task;
    let back = witness_from_task(&task).unwrap();
    let opt = p_post_optimum(&task).unwrap();
    let v = back.evaluate(&opt.margins.0, &opt.margins.1).unwrap();
    assert!(v.abs() < 1e-6, "{v}");
}

#[test]
fn single_label_branches_rejected() {
    let q = Algebra::full(2);
    let one = Algebra::trivial();
    let unit = |l: &str| Measurement::new(one.clone(), vec![l.into()], vec![AlgebraElement::identity(&one)]).unwrap();
    let half = StateFunctional::new(q.clone(), vec![witnesskit::ComplexMatrix::identity(2).scale(0.25)]).unwrap();
    let ens = StateEnsemble::new(q, vec!["a".into(), "b".into()], vec![half.clone(), half]).unwrap();
    let t = DiscriminationTask::new(ens, unit("a"), unit("b")).unwrap();
    assert!((p_prior(&t).unwrap() - 1.0).abs() < 1e-7);
    assert!((p_post(&t).unwrap() - 1.0).abs() < 1e-7);
    assert!(matches!(witness_from_task(&t), Err(Error::DegenerateTask { .. })));
}

#[test]
fn separating_witness_for_identity_pair() {
    let q = Algebra::full(2);
    let id = identity_channel(&q);
    let w = witness_from_incompatible_pair(&id, &id).unwrap();
    assert!(w.evaluate(&id, &id).unwrap() <= -0.01);
    let mut r = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (c1, c2) = random_compatible_pair(&mut r, &q, &q, &q).unwrap();
        assert!(w.evaluate(&c1, &c2).unwrap() >= -1e-6);
    }
}

#[test]
fn separating_witness_rejects_compatible_pair() {
    let (c1, c2) = cloning_margins(2).unwrap();
    let err = witness_from_incompatible_pair(&c1, &c2).unwrap_err();
    assert!(matches!(err, Error::PairCompatible { .. } | Error::Inconclusive { .. }), "{err}");
    let (m0, n0) = mub_channels(2, 0.6);
    assert!(matches!(witness_from_incompatible_pair(&m0, &n0), Err(Error::PairCompatible { .. })));
}

#[test]
fn separating_witness_for_super_cloning_pair() {
    let (t, l) = perturbed_cloning_margins(2, 0.05).unwrap();
    let w = witness_from_incompatible_pair(&t, &l).unwrap();
    assert!(w.evaluate(&t, &l).unwrap() < DETECTION_TOL);
}

#[test]
fn lift_composes_slot_with_measurement() {
    let mut r = rng();
    let h = random_basis(&mut r, 2);
    let mc = xi_mc(2, &h).unwrap();
    let w = xi_mm(2).unwrap();
    let ph = from_measurement(&Measurement::basis(&h).unwrap());
    let q = Algebra::full(2);
    for _ in 0..10 {
        let c1 = random_channel(&mut r, &q, &Algebra::abelian(2)).unwrap();
        let c2 = random_channel(&mut r, &q, &q).unwrap();
        let direct = w.evaluate(&c1, &compose(&ph, &c2).unwrap()).unwrap();
        assert!((mc.evaluate(&c1, &c2).unwrap() - direct).abs() < 1e-10);
    }
}

#[test]
fn lifted_witness_vanishes_at_measure_and_prepare() {
    let mut r = rng();
    let h = random_basis(&mut r, 2);
    let (m0, n0) = noisy_mub_measurements(2, gamma_threshold(2)).unwrap();
    let lambda = measure_prepare_basis(&n0, &h).unwrap();
    let v = xi_mc(2, &h).unwrap().evaluate(&from_measurement(&m0), &lambda).unwrap();
    assert!(v.abs() < 1e-10, "{v}");
}

#[test]
fn double_lift_is_scaled_cc_witness() {
    let mut r = rng();
    let (g, h) = (random_basis(&mut r, 2), random_basis(&mut r, 2));
    let w = xi_mm(2).unwrap();
    let twice = lift_witness(
        &lift_witness(&w, &Measurement::basis(&h).unwrap(), Factor::Second).unwrap(),
        &Measurement::basis(&g).unwrap(),
        Factor::First,
    )
    .unwrap();
    let cc = xi_cc(2, &g, &h).unwrap();
    let q = Algebra::full(2);
    for _ in 0..10 {
        let (c1, c2) = (random_channel(&mut r, &q, &q).unwrap(), random_channel(&mut r, &q, &q).unwrap());
        let scaled = 4.0 * twice.evaluate(&c1, &c2).unwrap();
        assert!((cc.evaluate(&c1, &c2).unwrap() - scaled).abs() < 1e-10);
    }
}

#[test]
fn lift_rejects_non_projective() {
    let (m, _) = noisy_mub_measurements(2, 0.8).unwrap();
    let err = lift_witness(&xi_mm(2).unwrap(), &m, Factor::First).unwrap_err();
    assert!(matches!(err, Error::NonProjective(_)), "{err}");
}

#[test]
fn cc_witness_values() {
    let mub = MubPair::new(2).unwrap();
    let cc = xi_cc(2, &mub.e, &mub.f).unwrap();
    let (t0, l0) = cloning_margins(2).unwrap();
    assert!((cc.evaluate(&t0, &l0).unwrap() - (2f64.sqrt() - 4.0 / 3.0)).abs() < 1e-10);
    let id = identity_channel(&Algebra::full(2));
    assert!(cc.evaluate(&id, &id).unwrap() < 0.0);
    let clone = xi_cc_clone(2, None).unwrap();
    assert!((clone.evaluate(&id, &id).unwrap() + 2.0).abs() < 1e-10);
    assert!(clone.evaluate(&t0, &l0).unwrap().abs() < 1e-10);
}

#[test]
fn clone_witness_is_basis_independent() {
    let mut r = rng();
    let plain = xi_cc_clone(3, None).unwrap();
    let q = Algebra::full(3);
    for _ in 0..5 {
        let rotated = xi_cc_clone(3, Some(&random_basis(&mut r, 3))).unwrap();
        let (c1, c2) = (random_channel(&mut r, &q, &q).unwrap(), random_channel(&mut r, &q, &q).unwrap());
        assert!((plain.evaluate(&c1, &c2).unwrap() - rotated.evaluate(&c1, &c2).unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn mm_witness_values() {
    let w = xi_mm(2).unwrap();
    let (m0, n0) = mub_channels(2, gamma_threshold(2));
    assert!(w.evaluate(&m0, &n0).unwrap().abs() < 1e-10);
    let (u1, u2) = mub_channels(2, 0.0);
    assert!((w.evaluate(&u1, &u2).unwrap() - 2f64.sqrt() / 4.0).abs() < 1e-10);
    let (p1, p2) = mub_channels(2, 1.0);
    assert!(w.detects(&p1, &p2).unwrap());
}
