//! Numeric checks behind the MUB and cloning witness results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use witnesskit::catalog::{
    bisect_gamma, cloning_margins, cloning_test_operator, gamma_threshold, group_spectrum, measure_prepare_basis,
    mub_measure_prepare_pair, noisy_mub_measurements, perturbed_cloning_margins, random_basis, xi_cc,
    xi_cc_at_cloning_closed_form, xi_cc_clone, xi_mc, xi_mm, MubPair,
};
use witnesskit::channel::{from_measurement, identity_channel};
use witnesskit::compat::max_over_compatible;
use witnesskit::{check_compatibility, Algebra, Channel, Result};

use crate::report::RunReport;

const BISECTION_STEPS: usize = 12;

fn mub_pair(d: usize, gamma: f64) -> Result<(Channel, Channel)> {
    let (m, n) = noisy_mub_measurements(d, gamma)?;
    Ok((from_measurement(&m), from_measurement(&n)))
}

pub fn mub_section(r: &mut RunReport, seed: u64) -> Result<()> {
    for d in [2, 3] {
        let w = xi_mm(d)?;
        let (m0, n0) = mub_pair(d, gamma_threshold(d))?;
        let v = w.evaluate(&m0, &n0)?;
        r.check("xi_mm zero", v.abs() <= 1e-10, format!("d={d}: xi_mm(M0, N0) = {v:.3e}, |.| <= 1e-10"));
    }
    let w = xi_mm(2)?;
    let (u1, u2) = mub_pair(2, 0.0)?;
    let v = w.evaluate(&u1, &u2)?;
    let target = 2f64.sqrt() / 4.0;
    r.check("xi_mm uniform", (v - target).abs() <= 1e-10, format!("d=2: xi_mm(I/d, I/d) = {v:.12} vs sqrt2/4"));
    let (p1, p2) = mub_pair(2, 1.0)?;
    let v = w.evaluate(&p1, &p2)?;
    r.check("xi_mm detects", w.detects(&p1, &p2)?, format!("d=2: xi_mm at projective MUB = {v:.6}"));
    let m = max_over_compatible(&w)?;
    r.solver("xi_mm minimum", m.solver);
    r.check("xi_mm tight", m.min.abs() <= 1e-6, format!("d=2: min over compatible pairs = {:.3e}", m.min));

    for d in [2, 3] {
        let (probes, estimate) = bisect_gamma(d, 0.5, 1.0, BISECTION_STEPS)?;
        let err = (estimate - gamma_threshold(d)).abs();
        r.check(
            "gamma threshold",
            err <= 1e-3,
            format!(
                "d={d}: boundary {estimate:.6} vs gamma(d) = {:.6}, error {err:.2e} <= 1e-3 ({} probes)",
                gamma_threshold(d),
                probes.len()
            ),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in [2, 3] {
        let (m0, n0) = noisy_mub_measurements(d, gamma_threshold(d))?;
        let m0 = from_measurement(&m0);
        for (name, h) in [("Fourier", MubPair::new(d)?.f), ("random", random_basis(&mut rng, d))] {
            let v = xi_mc(d, &h)?.evaluate(&m0, &measure_prepare_basis(&n0, &h)?)?;
            r.check("xi_mc zero", v.abs() <= 1e-10, format!("d={d}, {name} basis: xi_mc(M0, Lambda_N0) = {v:.3e}"));
        }
    }
    Ok(())
}

pub fn cloning_section(r: &mut RunReport, seed: u64) -> Result<()> {
    let (_, spectrum) = cloning_test_operator(2)?;
    let groups = group_spectrum(&spectrum, 1e-9);
    let expected = [(1.5, 2), (0.5, 2), (0.0, 4)];
    let ok = groups.len() == 3 && groups.iter().zip(expected).all(|(&(v, m), (ev, em))| (v - ev).abs() <= 1e-10 && m == em);
    r.check("spectrum", ok, format!("d=2: eigenvalues of E {}", describe(&groups)));
    let (_, spectrum) = cloning_test_operator(3)?;
    let groups = group_spectrum(&spectrum, 1e-9);
    let nonzero: Vec<f64> = groups.iter().map(|g| g.0).filter(|v| v.abs() > 1e-9).collect();
    let ok = nonzero.len() == 2 && (nonzero[0] - 4.0 / 3.0).abs() <= 1e-10 && (nonzero[1] - 2.0 / 3.0).abs() <= 1e-10;
    r.check("spectrum", ok, format!("d=3: eigenvalues of E {}", describe(&groups)));

    let clone = xi_cc_clone(2, None)?;
    let m = max_over_compatible(&clone)?;
    r.solver("xi~_cc minimum", m.solver);
    let traces = m.pair.0.linear_trace()? + m.pair.1.linear_trace()?;
    r.check(
        "tightness",
        m.min.abs() <= 1e-5 && (traces - 6.0).abs() <= 1e-5,
        format!("d=2: max Tr[Theta + Lambda] over compatible pairs = {traces:.9} vs d(d+1) = 6"),
    );
    for d in [2, 3] {
        let (t0, l0) = cloning_margins(d)?;
        let v = xi_cc_clone(d, None)?.evaluate(&t0, &l0)?;
        r.check("tightness", v.abs() <= 1e-10, format!("d={d}: xi~_cc(Theta0, Lambda0) = {v:.3e}"));
    }
    let (t0, l0) = cloning_margins(2)?;
    let verdict = check_compatibility(&t0, &l0)?;
    r.solver("cloning margins", verdict.solver);
    r.check("tightness", verdict.compatible, format!("d=2: cloning margins compatible, e* = {:.3e}", verdict.slack));
    let id = identity_channel(&Algebra::full(2));
    let v = clone.evaluate(&id, &id)?;
    r.check("tightness", (v + 2.0).abs() <= 1e-10, format!("d=2: xi~_cc(id, id) = {v:.12} vs -d(d-1) = -2"));

    let mub = MubPair::new(2)?;
    let cc = xi_cc(2, &mub.e, &mub.f)?;
    let v = cc.evaluate(&t0, &l0)?;
    let target = 2f64.sqrt() - 4.0 / 3.0;
    r.check(
        "inequivalence",
        (v - target).abs() <= 1e-9 && v > 0.0,
        format!("d=2: xi_cc(Theta0, Lambda0) = {v:.12} vs sqrt2 - 4/3, does not detect"),
    );
    let (tm, ln) = mub_measure_prepare_pair(2, &mub.e, &mub.f)?;
    let v = clone.evaluate(&tm, &ln)?;
    let target = 4.0 - 2f64.sqrt();
    r.check(
        "inequivalence",
        (v - target).abs() <= 1e-9 && v > 0.0,
        format!("d=2: xi~_cc(Theta_M0, Lambda_N0) = {v:.12} vs 4 - sqrt2, does not detect"),
    );
    let (tp, lp) = perturbed_cloning_margins(2, 0.02)?;
    let (a, b) = (clone.evaluate(&tp, &lp)?, cc.evaluate(&tp, &lp)?);
    r.check(
        "inequivalence",
        clone.detects(&tp, &lp)? && !cc.detects(&tp, &lp)?,
        format!("d=2, eps=0.02 super-cloning pair: xi~_cc = {a:.6} detects, xi_cc = {b:.6} does not"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in [2, 3] {
        let (t0, l0) = cloning_margins(d)?;
        let mut worst = f64::INFINITY;
        let mut agree = true;
        for _ in 0..5 {
            let (g, h) = (random_basis(&mut rng, d), random_basis(&mut rng, d));
            let v = xi_cc(d, &g, &h)?.evaluate(&t0, &l0)?;
            agree &= (v - xi_cc_at_cloning_closed_form(d, &g, &h)?).abs() <= 1e-9;
            worst = worst.min(v);
        }
        r.check(
            "inequivalence",
            agree && worst > 0.0,
            format!("d={d}: xi_cc(Theta0, Lambda0) > 0 on 5 sampled basis pairs, smallest {worst:.6}"),
        );
    }
    Ok(())
}

fn describe(groups: &[(f64, usize)]) -> String {
    let parts: Vec<String> = groups.iter().map(|(v, m)| format!("{:.6} x{m}", v + 0.0)).collect();
    parts.join(", ")
}
