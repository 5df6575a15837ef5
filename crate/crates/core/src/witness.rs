//! Affine incompatibility witnesses and discrimination tasks.
//!
//! A witness is stored as `W(Phi1, Phi2) = delta0 - sum_i sum_r <Phi_i(a_r), B_r>`
//! with selfadjoint functionals `a_r` on the common input and selfadjoint
//! elements `B_r` of the respective output algebra.

use std::collections::BTreeSet;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{is_informationally_complete, pair_real, trace_state, Algebra, AlgebraElement, Measurement, StateEnsemble, StateFunctional};
use crate::channel::{Channel, Factor};
use crate::compat::{self, check_compatibility, choi_kernel, max_over_compatible, multiplier_kernel, Decision};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, HermitianMatrix};
use crate::sampling;

/// Values strictly below this count as detection.
pub const DETECTION_TOL: f64 = -1e-9;
/// Largest violation of nonnegativity on compatible pairs accepted for a witness.
pub const W1_TOL: f64 = 1e-6;
/// Least-squares cutoff used when expanding over measurement effects.
pub const LSQ_CUTOFF: f64 = 1e-10;
/// Decomposition residual above which the expansion is rejected.
pub const LSQ_RESIDUAL_TOL: f64 = 1e-8;
/// Minimal `p_prior - p_post` for a task to define a witness.
pub const TASK_GAP_TOL: f64 = 1e-6;

/// One term `(a, B)` of a witness or task branch.
pub type Term = (StateFunctional, AlgebraElement);

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessForm {
    input: Algebra,
    out1: Algebra,
    out2: Algebra,
    delta0: f64,
    phi1: Vec<Term>,
    phi2: Vec<Term>,
}

impl WitnessForm {
    pub fn new(input: Algebra, out1: Algebra, out2: Algebra, delta0: f64, phi1: Vec<Term>, phi2: Vec<Term>) -> Result<Self> {
        if !delta0.is_finite() {
            return Err(Error::InvalidInput("delta0 must be finite".into()));
        }
        for (out, terms) in [(&out1, &phi1), (&out2, &phi2)] {
            for (r, (a, b)) in terms.iter().enumerate() {
                if a.algebra() != &input || b.algebra() != out {
                    return Err(Error::AlgebraMismatch(format!("witness term {r} lives on the wrong algebras")));
                }
                if !a.is_selfadjoint(1e-10) || !b.is_selfadjoint(1e-10) {
                    return Err(Error::InvalidInput(format!("witness term {r} is not selfadjoint")));
                }
            }
        }
        Ok(Self { input, out1, out2, delta0, phi1, phi2 })
    }

    /// Build from Choi kernels: `W = delta0 - sum_ij tr(K1_ij C1_ij) - sum_ij tr(K2_ij C2_ij)`.
    pub fn from_kernels(
        input: &Algebra,
        out1: &Algebra,
        out2: &Algebra,
        delta0: f64,
        k1: &[HermitianMatrix],
        k2: &[HermitianMatrix],
    ) -> Result<Self> {
        let phi1 = kernel_terms(input, out1, k1)?;
        let phi2 = kernel_terms(input, out2, k2)?;
        Self::new(input.clone(), out1.clone(), out2.clone(), delta0, phi1, phi2)
    }

    pub fn input(&self) -> &Algebra {
        &self.input
    }

    pub fn out1(&self) -> &Algebra {
        &self.out1
    }

    pub fn out2(&self) -> &Algebra {
        &self.out2
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn phi1(&self) -> &[Term] {
        &self.phi1
    }

    pub fn phi2(&self) -> &[Term] {
        &self.phi2
    }

    pub fn phi(&self, slot: Factor) -> &[Term] {
        match slot {
            Factor::First => &self.phi1,
            Factor::Second => &self.phi2,
        }
    }

    pub fn out(&self, slot: Factor) -> &Algebra {
        match slot {
            Factor::First => &self.out1,
            Factor::Second => &self.out2,
        }
    }

    pub fn with_delta0(&self, delta0: f64) -> Self {
        Self { delta0, ..self.clone() }
    }

    /// `s * W` (both the constant and the linear part).
    pub fn scale(&self, s: f64) -> Self {
        let sc = |t: &[Term]| t.iter().map(|(a, b)| (a.clone(), b.scale(s))).collect();
        Self { delta0: s * self.delta0, phi1: sc(&self.phi1), phi2: sc(&self.phi2), ..self.clone() }
    }

    /// Choi kernels of the linear part, one list per slot.
    pub fn kernels(&self) -> Result<(Vec<HermitianMatrix>, Vec<HermitianMatrix>)> {
        Ok((choi_kernel(&self.input, &self.out1, &self.phi1)?, choi_kernel(&self.input, &self.out2, &self.phi2)?))
    }

    pub fn evaluate(&self, c1: &Channel, c2: &Channel) -> Result<f64> {
        for (c, out) in [(c1, &self.out1), (c2, &self.out2)] {
            if c.input() != &self.input || c.output() != out {
                return Err(Error::AlgebraMismatch(format!(
                    "witness expects {:?} -> {:?}, channel is {:?} -> {:?}",
                    self.input.blocks(),
                    out.blocks(),
                    c.input().blocks(),
                    c.output().blocks()
                )));
            }
        }
        let mut v = self.delta0;
        for (c, terms) in [(c1, &self.phi1), (c2, &self.phi2)] {
            for (a, b) in terms {
                v -= pair_real(&c.apply(a)?, b)?;
            }
        }
        Ok(v)
    }

    pub fn detects(&self, c1: &Channel, c2: &Channel) -> Result<bool> {
        Ok(self.evaluate(c1, c2)? < DETECTION_TOL)
    }
}

/// Expand each Choi kernel block over products of trace-orthonormal Hermitian bases.
fn kernel_terms(input: &Algebra, output: &Algebra, kernel: &[HermitianMatrix]) -> Result<Vec<Term>> {
    if kernel.len() != input.num_blocks() * output.num_blocks() {
        return Err(Error::DimensionMismatch("kernel has the wrong number of blocks".into()));
    }
    let mut terms = Vec::new();
    for i in 0..input.num_blocks() {
        let n = input.block(i);
        for g in linalg::hermitian_basis(n) {
            let gt = g.transpose();
            let mut blocks = Vec::with_capacity(output.num_blocks());
            let mut nonzero = false;
            for j in 0..output.num_blocks() {
                let m = output.block(j);
                let k = &kernel[i * output.num_blocks() + j];
                if k.dim() != n * m {
                    return Err(Error::DimensionMismatch(format!("kernel block ({i},{j}) has the wrong size")));
                }
                let mut b = ComplexMatrix::zeros(m, m);
                for h in linalg::hermitian_basis(m) {
                    let c = HermitianMatrix::symmetrize(&linalg::kron(&gt, &h)).inner(k);
                    if c != 0.0 {
                        nonzero = true;
                        b += &h.scale(c);
                    }
                }
                blocks.push(b);
            }
            if nonzero {
                let mut ab: Vec<ComplexMatrix> = input.blocks().iter().map(|&d| ComplexMatrix::zeros(d, d)).collect();
                ab[i] = g.into_matrix();
                terms.push((StateFunctional::new(input.clone(), ab)?, AlgebraElement::new(output.clone(), blocks)?));
            }
        }
    }
    Ok(terms)
}

/// Prior-weighted states `E(z)` read out by `M1` on `X1` or `M2` on `X2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminationTask {
    ensemble: StateEnsemble,
    m1: Measurement,
    m2: Measurement,
}

impl DiscriminationTask {
    pub fn new(ensemble: StateEnsemble, m1: Measurement, m2: Measurement) -> Result<Self> {
        let x1: BTreeSet<&String> = m1.labels().iter().collect();
        let x2: BTreeSet<&String> = m2.labels().iter().collect();
        if let Some(z) = x1.intersection(&x2).next() {
            return Err(Error::InvalidInput(format!("label {z:?} appears in both branches")));
        }
        let all: BTreeSet<&String> = x1.union(&x2).copied().collect();
        let ens: BTreeSet<&String> = ensemble.labels().iter().collect();
        if all != ens {
            return Err(Error::InvalidInput("ensemble labels differ from the measurement outcomes".into()));
        }
        Ok(Self { ensemble, m1, m2 })
    }

    pub fn input(&self) -> &Algebra {
        self.ensemble.algebra()
    }

    pub fn ensemble(&self) -> &StateEnsemble {
        &self.ensemble
    }

    pub fn m1(&self) -> &Measurement {
        &self.m1
    }

    pub fn m2(&self) -> &Measurement {
        &self.m2
    }

    /// Pairs `(E(z), M_i(z))` for `z` in branch `i` (1 or 2).
    pub fn branch_terms(&self, i: usize) -> Result<Vec<Term>> {
        let m = match i {
            1 => &self.m1,
            2 => &self.m2,
            _ => return Err(Error::InvalidInput(format!("branch must be 1 or 2, got {i}"))),
        };
        m.labels()
            .iter()
            .zip(m.effects())
            .map(|(z, eff)| {
                let e = self
                    .ensemble
                    .get(z)
                    .ok_or_else(|| Error::InvalidInput(format!("label {z:?} missing from ensemble")))?;
                Ok((e.clone(), eff.clone()))
            })
            .collect()
    }
}

/// Shift `delta0` so that the minimum over compatible pairs is zero.
pub fn tighten(w: &WitnessForm) -> Result<WitnessForm> {
    let m = max_over_compatible(w)?;
    Ok(w.with_delta0(w.delta0 - m.min))
}

/// Result of [`task_from_witness`].
#[derive(Clone, Debug)]
pub struct TaskFromWitness {
    pub task: DiscriminationTask,
    pub alpha: f64,
    pub delta: f64,
}

/// Discrimination task whose prior guessing probability reproduces `w` up to
/// `W = alpha (delta - P_prior)`.
pub fn task_from_witness(w: &WitnessForm, m1: &Measurement, m2: &Measurement) -> Result<TaskFromWitness> {
    if m1.algebra() != w.out1() || m2.algebra() != w.out2() {
        return Err(Error::AlgebraMismatch("measurements do not live on the witness outputs".into()));
    }
    for m in [m1, m2] {
        if !is_informationally_complete(m) {
            let dim = m.algebra().dim();
            let rank = crate::algebra::ic_rank(m)?;
            return Err(Error::NotInformationallyComplete { rank, dim });
        }
    }
    let overlap = m1.labels().iter().any(|z| m2.labels().contains(z));
    let (m1, m2) = if overlap { (m1.with_prefix("1:"), m2.with_prefix("2:")) } else { (m1.clone(), m2.clone()) };

    let input = w.input();
    let mut branch_states: Vec<Vec<StateFunctional>> = Vec::new();
    for (m, terms) in [(&m1, w.phi1()), (&m2, w.phi2())] {
        let columns: Vec<Vec<f64>> = m.effects().iter().map(AlgebraElement::svec).collect();
        let mut states = vec![StateFunctional::zero(input); m.len()];
        for (a, b) in terms {
            let (c, resid) = linalg::least_squares(&columns, &b.svec(), LSQ_CUTOFF)?;
            if resid > LSQ_RESIDUAL_TOL {
                return Err(Error::DecompositionResidual(resid));
            }
            for (s, cz) in states.iter_mut().zip(c) {
                *s = s.add(&a.scale(cz))?;
            }
        }
        branch_states.push(states);
    }
    let n = input.rep_dim() as f64;
    let mut max_norm: f64 = 0.0;
    for s in branch_states.iter().flatten() {
        max_norm = max_norm.max(s.trace_norm()?);
    }
    let beta = 2.0 * n * max_norm + 1.0;
    let a0 = trace_state(input);
    let raw: Vec<Vec<StateFunctional>> = branch_states
        .iter()
        .map(|b| b.iter().map(|s| a0.scale(beta).add(s)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let alpha: f64 = raw.iter().flatten().map(StateFunctional::total).sum();
    let delta = (w.delta0() + 2.0 * beta) / alpha;
    let mut labels = Vec::new();
    let mut members = Vec::new();
    for (m, b) in [(&m1, &raw[0]), (&m2, &raw[1])] {
        for (z, s) in m.labels().iter().zip(b) {
            labels.push(z.clone());
            members.push(s.scale(1.0 / alpha));
        }
    }
    let ensemble = StateEnsemble::new(input.clone(), labels, members)?;
    debug!("task from witness: beta {beta:.6}, alpha {alpha:.6}, delta {delta:.9}");
    Ok(TaskFromWitness { task: DiscriminationTask::new(ensemble, m1, m2)?, alpha, delta })
}

/// `W = p_post(t) - P_prior(Phi || t)`.
pub fn witness_from_task(t: &DiscriminationTask) -> Result<WitnessForm> {
    let pp = compat::p_prior(t)?;
    let po = compat::p_post(t)?;
    if pp - po <= TASK_GAP_TOL {
        return Err(Error::DegenerateTask { gap: pp - po });
    }
    WitnessForm::new(
        t.input().clone(),
        t.m1().algebra().clone(),
        t.m2().algebra().clone(),
        po,
        t.branch_terms(1)?,
        t.branch_terms(2)?,
    )
}

/// Settings for the sampled nonnegativity check in [`witness_from_incompatible_pair_with`].
#[derive(Clone, Copy, Debug)]
pub struct SeparationOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        Self { samples: 20, seed: sampling::DEFAULT_SEED }
    }
}

/// A tight witness detecting an incompatible pair, built from the dual of the
/// compatibility SDP and verified afterwards.
pub fn witness_from_incompatible_pair(c1: &Channel, c2: &Channel) -> Result<WitnessForm> {
    witness_from_incompatible_pair_with(c1, c2, &SeparationOptions::default())
}

pub fn witness_from_incompatible_pair_with(c1: &Channel, c2: &Channel, opts: &SeparationOptions) -> Result<WitnessForm> {
    let v = check_compatibility(c1, c2)?;
    match v.decision {
        Decision::Compatible => return Err(Error::PairCompatible { slack: v.slack }),
        Decision::Inconclusive => return Err(Error::Inconclusive { slack: v.slack }),
        Decision::Incompatible => {}
    }
    let input = c1.input();
    let k1 = multiplier_kernel(input, c1.output(), &v.dual_multipliers[0])?;
    let k2 = multiplier_kernel(input, c2.output(), &v.dual_multipliers[1])?;
    let mut last_failure = String::new();
    for sign in [-1.0, 1.0] {
        let s1: Vec<HermitianMatrix> = k1.iter().map(|k| k.scale(sign)).collect();
        let s2: Vec<HermitianMatrix> = k2.iter().map(|k| k.scale(sign)).collect();
        let w = tighten(&WitnessForm::from_kernels(input, c1.output(), c2.output(), 0.0, &s1, &s2)?)?;
        let at_pair = w.evaluate(c1, c2)?;
        if at_pair >= -v.slack / 2.0 {
            last_failure = format!("value {at_pair:.3e} at the pair is not below -e*/2 = {:.3e}", -v.slack / 2.0);
            continue;
        }
        match sampled_nonnegativity(&w, opts.samples, opts.seed)? {
            Some(bad) => last_failure = format!("value {bad:.3e} on a sampled compatible pair"),
            None => return Ok(w),
        }
    }
    Err(Error::Verification(last_failure))
}

/// Smallest witness value on margins of random joint channels, if below `-W1_TOL`.
pub fn sampled_nonnegativity(w: &WitnessForm, samples: usize, seed: u64) -> Result<Option<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let (c1, c2) = sampling::random_compatible_pair(&mut rng, w.input(), w.out1(), w.out2())?;
        let v = w.evaluate(&c1, &c2)?;
        if v < -W1_TOL {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

/// Replace an abelian output slot `l^inf(X)` by the algebra of a projective
/// measurement `p`, composing that slot with `p`.
pub fn lift_witness(w: &WitnessForm, p: &Measurement, slot: Factor) -> Result<WitnessForm> {
    let out = w.out(slot);
    if !out.is_abelian() || out.num_blocks() != p.len() {
        return Err(Error::AlgebraMismatch(format!(
            "slot output {:?} is not l^inf of the {} outcomes",
            out.blocks(),
            p.len()
        )));
    }
    for (label, e) in p.labels().iter().zip(p.effects()) {
        let sq = e.blocks().iter().map(|b| b.matmul(b)).collect();
        let sq = AlgebraElement::new(e.algebra().clone(), sq)?;
        if sq.max_diff(e) > 1e-10 || e.blocks().iter().all(|b| b.max_abs() == 0.0) {
            return Err(Error::NonProjective(label.clone()));
        }
    }
    let lifted: Vec<Term> = w
        .phi(slot)
        .iter()
        .map(|(a, b)| {
            let mut acc = AlgebraElement::zero(p.algebra());
            for (x, e) in p.effects().iter().enumerate() {
                acc = acc.add(&e.scale(b.block(x)[(0, 0)].re))?;
            }
            Ok((a.clone(), acc))
        })
        .collect::<Result<_>>()?;
    let (o1, o2, phi1, phi2) = match slot {
        Factor::First => (p.algebra().clone(), w.out2.clone(), lifted, w.phi2.clone()),
        Factor::Second => (w.out1.clone(), p.algebra().clone(), w.phi1.clone(), lifted),
    };
    WitnessForm::new(w.input.clone(), o1, o2, w.delta0, phi1, phi2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{depolarizing, identity_channel};

    #[test]
    fn kernel_terms_reproduce_kernel() {
        let a = Algebra::new(vec![1, 2]).unwrap();
        let b = Algebra::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c1 = sampling::random_channel(&mut rng, &a, &b).unwrap();
        let c2 = sampling::random_channel(&mut rng, &a, &b).unwrap();
        let k1: Vec<HermitianMatrix> = c1.choi_blocks().iter().map(|m| m.scale(0.7)).collect();
        let k2: Vec<HermitianMatrix> = c2.choi_blocks().iter().map(|m| m.scale(-0.2)).collect();
        let w = WitnessForm::from_kernels(&a, &b, &b, 1.5, &k1, &k2).unwrap();
        let (r1, r2) = w.kernels().unwrap();
        for (x, y) in r1.iter().zip(&k1).chain(r2.iter().zip(&k2)) {
            assert!(x.max_diff(y) < 1e-13);
        }
        let direct = 1.5 - c1.pair_kernel(&k1) - c2.pair_kernel(&k2);
        assert!((w.evaluate(&c1, &c2).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn constant_witness() {
        let a = Algebra::full(2);
        let w = WitnessForm::new(a.clone(), a.clone(), a.clone(), 0.25, vec![], vec![]).unwrap();
        let id = identity_channel(&a);
        assert_eq!(w.evaluate(&id, &depolarizing(2, 0.3)).unwrap(), 0.25);
        assert!(!w.detects(&id, &id).unwrap());
        assert!(w.evaluate(&id, &depolarizing(3, 0.3)).is_err());
    }

    #[test]
    fn task_rejects_overlapping_labels() {
        let m = Measurement::delta(2);
        let ens = StateEnsemble::new(
            Algebra::abelian(2),
            vec!["0".into(), "1".into()],
            vec![StateFunctional::distribution(&[0.25, 0.25]), StateFunctional::distribution(&[0.25, 0.25])],
        )
        .unwrap();
        assert!(DiscriminationTask::new(ens, m.clone(), m).is_err());
    }
}
