//! Channels between block algebras in Choi form.
//!
//! A channel `Phi: A_* -> B_*` is stored as one Choi block per pair of an
//! input block `i` (size `n_i`) and an output block `j` (size `m_j`):
//!
//! ```text
//! choi[i, j] = sum_{k,l} E_kl (x) Phi_ji(E_kl)      on C^{n_i} (x) C^{m_j}
//! ```
//!
//! so the Schrodinger pairing reads `<Phi(a), B> = sum_ij tr(choi[i,j] (a_i^T (x) B_j))`.
//! Complete positivity is positivity of every block; unitality of the
//! Heisenberg adjoint is `sum_j tr_out choi[i, j] = I_{n_i}`.

use crate::algebra::{tensor_algebra, Algebra, AlgebraElement, Measurement, StateFunctional};
use crate::error::{Error, Result};
use crate::linalg::{self, herm_eig, kron, partial_trace, permute_factors, C64, ComplexMatrix, HermitianMatrix, ONE};

/// Default tolerance for [`Channel::is_channel`].
pub const CHANNEL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    input: Algebra,
    output: Algebra,
    choi: Vec<HermitianMatrix>,
}

/// Outcome of [`Channel::is_channel`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelReport {
    /// `max(0, -lambda_min)` over all Choi blocks.
    pub psd_violation: f64,
    /// Largest entrywise deviation of `sum_j tr_out choi[i,j]` from the identity.
    pub unitality_residual: f64,
    pub valid: bool,
}

impl Channel {
    pub fn new(input: Algebra, output: Algebra, choi: Vec<HermitianMatrix>) -> Result<Self> {
        let expected = input.num_blocks() * output.num_blocks();
        if choi.len() != expected {
            return Err(Error::DimensionMismatch(format!("{} Choi blocks, expected {expected}", choi.len())));
        }
        for i in 0..input.num_blocks() {
            for j in 0..output.num_blocks() {
                let d = input.block(i) * output.block(j);
                let b = &choi[i * output.num_blocks() + j];
                if b.dim() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "Choi block ({i},{j}) has dim {}, expected {d}",
                        b.dim()
                    )));
                }
            }
        }
        Ok(Self { input, output, choi })
    }

    /// Build from a closure producing each Choi block.
    pub fn from_blocks(input: &Algebra, output: &Algebra, mut f: impl FnMut(usize, usize) -> HermitianMatrix) -> Self {
        let mut choi = Vec::with_capacity(input.num_blocks() * output.num_blocks());
        for i in 0..input.num_blocks() {
            for j in 0..output.num_blocks() {
                choi.push(f(i, j));
            }
        }
        Self::new(input.clone(), output.clone(), choi).expect("closure produced blocks of the right size")
    }

    pub fn input(&self) -> &Algebra {
        &self.input
    }

    pub fn output(&self) -> &Algebra {
        &self.output
    }

    pub fn choi(&self, i: usize, j: usize) -> &HermitianMatrix {
        &self.choi[i * self.output.num_blocks() + j]
    }

    pub fn choi_blocks(&self) -> &[HermitianMatrix] {
        &self.choi
    }

    /// Apply to arbitrary (not necessarily Hermitian) input blocks.
    fn apply_blocks(&self, a: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> = self.output.blocks().iter().map(|&m| ComplexMatrix::zeros(m, m)).collect();
        for (i, ai) in a.iter().enumerate() {
            let n = self.input.block(i);
            for (j, oj) in out.iter_mut().enumerate() {
                let m = self.output.block(j);
                let c = self.choi(i, j);
                for k in 0..n {
                    for l in 0..n {
                        let w = ai[(k, l)];
                        if w == linalg::ZERO {
                            continue;
                        }
                        for p in 0..m {
                            for q in 0..m {
                                oj[(p, q)] += w * c[(k * m + p, l * m + q)];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Schrodinger action on a functional of the input algebra.
    pub fn apply(&self, a: &StateFunctional) -> Result<StateFunctional> {
        if a.algebra() != &self.input {
            return Err(Error::AlgebraMismatch("functional does not live on the channel input".into()));
        }
        StateFunctional::new(self.output.clone(), self.apply_blocks(a.blocks()))
    }

    /// Heisenberg action `Phi^*(B)`.
    pub fn adjoint_apply(&self, b: &AlgebraElement) -> Result<AlgebraElement> {
        if b.algebra() != &self.output {
            return Err(Error::AlgebraMismatch("element does not live on the channel output".into()));
        }
        let blocks = (0..self.input.num_blocks())
            .map(|i| {
                let n = self.input.block(i);
                let mut acc = ComplexMatrix::zeros(n, n);
                for j in 0..self.output.num_blocks() {
                    let m = self.output.block(j);
                    let c = self.choi(i, j);
                    let bj = b.block(j);
                    for k in 0..n {
                        for l in 0..n {
                            let mut s = linalg::ZERO;
                            for p in 0..m {
                                for q in 0..m {
                                    s += c[(k * m + p, l * m + q)] * bj[(q, p)];
                                }
                            }
                            acc[(l, k)] += s;
                        }
                    }
                }
                acc
            })
            .collect();
        AlgebraElement::new(self.input.clone(), blocks)
    }

    /// Worst PSD violation and unitality residual.
    pub fn report(&self) -> Result<ChannelReport> {
        let mut psd_violation: f64 = 0.0;
        for b in &self.choi {
            if b.dim() > 0 {
                psd_violation = psd_violation.max(-b.min_eigenvalue()?);
            }
        }
        let mut unitality_residual: f64 = 0.0;
        for (i, s) in self.unitality_sums()?.iter().enumerate() {
            let id = ComplexMatrix::identity(self.input.block(i));
            unitality_residual = unitality_residual.max(s.max_diff(&id));
        }
        Ok(ChannelReport { psd_violation, unitality_residual, valid: false })
    }

    /// `true` iff every Choi block is PSD and the adjoint is unital, both within `tol`.
    pub fn is_channel(&self, tol: f64) -> Result<ChannelReport> {
        let mut r = self.report()?;
        r.valid = r.psd_violation <= tol && r.unitality_residual <= tol;
        Ok(r)
    }

    /// `sum_j tr_out choi[i, j]` for each input block.
    fn unitality_sums(&self) -> Result<Vec<ComplexMatrix>> {
        (0..self.input.num_blocks())
            .map(|i| {
                let n = self.input.block(i);
                let mut acc = ComplexMatrix::zeros(n, n);
                for j in 0..self.output.num_blocks() {
                    acc += &partial_trace(self.choi(i, j), &[n, self.output.block(j)], &[0])?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Clip negative Choi eigenvalues and restore exact unitality by the
    /// congruence `(S_i^{-1/2} (x) I) choi[i,j] (S_i^{-1/2} (x) I)`.
    pub fn project_to_channel(&self) -> Result<Channel> {
        let clipped: Vec<HermitianMatrix> = self.choi.iter().map(linalg::psd_part).collect::<Result<_>>()?;
        let mut out = Channel { input: self.input.clone(), output: self.output.clone(), choi: clipped };
        let sums = out.unitality_sums()?;
        for (i, s) in sums.iter().enumerate() {
            let t = linalg::inv_sqrt(&HermitianMatrix::symmetrize(s), 1e-300)?;
            for j in 0..out.output.num_blocks() {
                let m = out.output.block(j);
                let tt = kron(&t, &ComplexMatrix::identity(m));
                let idx = i * out.output.num_blocks() + j;
                out.choi[idx] = HermitianMatrix::symmetrize(&tt.matmul(&out.choi[idx]).matmul(&tt));
            }
        }
        Ok(out)
    }

    /// `sum_ij tr(kernel[i,j] choi[i,j])`, the generic linear functional on channels.
    pub fn pair_kernel(&self, kernel: &[HermitianMatrix]) -> f64 {
        self.choi.iter().zip(kernel).map(|(c, k)| c.inner(k)).sum()
    }

    /// Real coordinates of all Choi blocks, concatenated.
    pub fn svec(&self) -> Vec<f64> {
        self.choi.iter().flat_map(|b| linalg::svec(b)).collect()
    }

    /// `t * self + (1 - t) * other` (Choi blocks mix affinely).
    pub fn mix(&self, t: f64, other: &Channel) -> Result<Channel> {
        if self.input != other.input || self.output != other.output {
            return Err(Error::AlgebraMismatch("cannot mix channels with different algebras".into()));
        }
        let choi = self.choi.iter().zip(&other.choi).map(|(a, b)| &a.scale(t) + &b.scale(1.0 - t)).collect();
        Ok(Channel { input: self.input.clone(), output: self.output.clone(), choi })
    }

    /// Linear combination `sum_k w_k Phi_k` of channels with equal algebras.
    pub fn combination(terms: &[(f64, &Channel)]) -> Result<Channel> {
        let (_, first) = terms.first().ok_or_else(|| Error::InvalidInput("empty combination".into()))?;
        let mut choi: Vec<HermitianMatrix> = first.choi.iter().map(|b| HermitianMatrix::zeros(b.dim())).collect();
        for (w, c) in terms {
            if c.input != first.input || c.output != first.output {
                return Err(Error::AlgebraMismatch("cannot combine channels with different algebras".into()));
            }
            for (acc, b) in choi.iter_mut().zip(&c.choi) {
                *acc += &b.scale(*w);
            }
        }
        Ok(Channel { input: first.input.clone(), output: first.output.clone(), choi })
    }

    pub fn max_diff(&self, other: &Channel) -> f64 {
        self.choi.iter().zip(&other.choi).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }

    /// Trace of the channel as a linear map on `L(C^d)` (single-block input and output).
    pub fn linear_trace(&self) -> Result<f64> {
        if self.input.num_blocks() != 1 || self.output != self.input {
            return Err(Error::AlgebraMismatch("linear trace needs L(H) -> L(H)".into()));
        }
        let d = self.input.block(0);
        Ok(self.choi[0].inner(&unnormalized_max_entangled(d)))
    }
}

/// `sum_{kl} E_kl (x) E_kl = d |omega><omega|`.
pub(crate) fn unnormalized_max_entangled(d: usize) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    for k in 0..d {
        for l in 0..d {
            m[(k * d + k, l * d + l)] = ONE;
        }
    }
    HermitianMatrix::symmetrize(&m)
}

pub fn apply(c: &Channel, a: &StateFunctional) -> Result<StateFunctional> {
    c.apply(a)
}

pub fn is_channel(c: &Channel, tol: f64) -> Result<ChannelReport> {
    c.is_channel(tol)
}

/// `after o before`.
pub fn compose(after: &Channel, before: &Channel) -> Result<Channel> {
    if before.output != after.input {
        return Err(Error::AlgebraMismatch(format!(
            "compose: {:?} feeds into {:?}",
            before.output.blocks(),
            after.input.blocks()
        )));
    }
    let input = before.input.clone();
    let output = after.output.clone();
    let mut choi = Vec::with_capacity(input.num_blocks() * output.num_blocks());
    for i in 0..input.num_blocks() {
        let n = input.block(i);
        let mut blocks: Vec<ComplexMatrix> =
            output.blocks().iter().map(|&m| ComplexMatrix::zeros(n * m, n * m)).collect();
        for k in 0..n {
            for l in 0..n {
                let mut unit: Vec<ComplexMatrix> =
                    input.blocks().iter().map(|&nn| ComplexMatrix::zeros(nn, nn)).collect();
                unit[i][(k, l)] = ONE;
                let mid = before.apply_blocks(&unit);
                let img = after.apply_blocks(&mid);
                for (c, (blk, im)) in blocks.iter_mut().zip(&img).enumerate() {
                    let m = output.block(c);
                    for p in 0..m {
                        for q in 0..m {
                            blk[(k * m + p, l * m + q)] = im[(p, q)];
                        }
                    }
                }
            }
        }
        choi.extend(blocks.iter().map(HermitianMatrix::symmetrize));
    }
    Channel::new(input, output, choi)
}

/// `c1 (x) c2` between the tensor product algebras.
pub fn tensor_channels(c1: &Channel, c2: &Channel) -> Channel {
    let input = tensor_algebra(&c1.input, &c2.input);
    let output = tensor_algebra(&c1.output, &c2.output);
    let mut choi = Vec::with_capacity(input.num_blocks() * output.num_blocks());
    for i1 in 0..c1.input.num_blocks() {
        for i2 in 0..c2.input.num_blocks() {
            for j1 in 0..c1.output.num_blocks() {
                for j2 in 0..c2.output.num_blocks() {
                    let dims = [c1.input.block(i1), c1.output.block(j1), c2.input.block(i2), c2.output.block(j2)];
                    let k = kron(c1.choi(i1, j1), c2.choi(i2, j2));
                    let p = permute_factors(&k, &dims, &[0, 2, 1, 3]).expect("dims consistent");
                    choi.push(HermitianMatrix::symmetrize(&p));
                }
            }
        }
    }
    Channel::new(input, output, choi).expect("tensor product blocks consistent")
}

/// Which tensor factor a margin keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    First,
    Second,
}

impl Factor {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Factor::First),
            2 => Ok(Factor::Second),
            _ => Err(Error::InvalidInput(format!("margin factor must be 1 or 2, got {i}"))),
        }
    }
}

/// The margin `Pi_i o c` of a channel into `out1 (x) out2`.
pub fn margin(c: &Channel, factor: Factor, out1: &Algebra, out2: &Algebra) -> Result<Channel> {
    if c.output != tensor_algebra(out1, out2) {
        return Err(Error::AlgebraMismatch("channel output is not out1 (x) out2".into()));
    }
    let kept = match factor {
        Factor::First => out1,
        Factor::Second => out2,
    };
    let mut choi = Vec::with_capacity(c.input.num_blocks() * kept.num_blocks());
    for i in 0..c.input.num_blocks() {
        let n = c.input.block(i);
        for jk in 0..kept.num_blocks() {
            let mut acc = ComplexMatrix::zeros(n * kept.block(jk), n * kept.block(jk));
            for j1 in 0..out1.num_blocks() {
                for j2 in 0..out2.num_blocks() {
                    let (hit, keep) = match factor {
                        Factor::First => (j1 == jk, [0, 1]),
                        Factor::Second => (j2 == jk, [0, 2]),
                    };
                    if !hit {
                        continue;
                    }
                    let blk = c.choi(i, j1 * out2.num_blocks() + j2);
                    acc += &partial_trace(blk, &[n, out1.block(j1), out2.block(j2)], &keep)?;
                }
            }
            choi.push(HermitianMatrix::symmetrize(&acc));
        }
    }
    Channel::new(c.input.clone(), kept.clone(), choi)
}

/// `M -> M^` into `l^inf(X)`, with `M^*(delta_x) = M(x)`.
pub fn from_measurement(m: &Measurement) -> Channel {
    let out = Algebra::abelian(m.len());
    Channel::from_blocks(m.algebra(), &out, |i, x| HermitianMatrix::symmetrize(&m.effects()[x].block(i).transpose()))
}

/// `a -> sum_x <a, M(x)> prep_x`.
pub fn measure_and_prepare(m: &Measurement, prep: &[StateFunctional]) -> Result<Channel> {
    if prep.len() != m.len() {
        return Err(Error::InvalidInput(format!("{} prepared states for {} outcomes", prep.len(), m.len())));
    }
    let out = prep[0].algebra().clone();
    for (x, b) in prep.iter().enumerate() {
        if b.algebra() != &out {
            return Err(Error::AlgebraMismatch("prepared states live on different algebras".into()));
        }
        b.check_state(1e-9).map_err(|e| Error::NotAState(format!("prepared state {x}: {e}")))?;
    }
    Ok(Channel::from_blocks(m.algebra(), &out, |i, j| {
        let n = m.algebra().block(i);
        let mut acc = ComplexMatrix::zeros(n * out.block(j), n * out.block(j));
        for (e, b) in m.effects().iter().zip(prep) {
            acc += &kron(&e.block(i).transpose(), b.block(j));
        }
        HermitianMatrix::symmetrize(&acc)
    }))
}

/// `a -> gamma a + (1 - gamma) tr(a) I/d` on `L(C^d)`; complete positivity is
/// left to [`Channel::is_channel`].
pub fn depolarizing(d: usize, gamma: f64) -> Channel {
    let alg = Algebra::full(d);
    let choi = &unnormalized_max_entangled(d).scale(gamma) + &HermitianMatrix::identity(d * d).scale((1.0 - gamma) / d as f64);
    Channel::new(alg.clone(), alg, vec![choi]).expect("single block")
}

pub fn identity_channel(a: &Algebra) -> Channel {
    Channel::from_blocks(a, a, |i, j| {
        if i == j {
            unnormalized_max_entangled(a.block(i))
        } else {
            HermitianMatrix::zeros(a.block(i) * a.block(j))
        }
    })
}

/// The unique channel into `C`: every state goes to 1.
pub fn trivial_channel(a: &Algebra) -> Channel {
    Channel::from_blocks(a, &Algebra::trivial(), |i, _| HermitianMatrix::identity(a.block(i)))
}

/// `[Gamma(f)](x, y) = f(x) delta_xy` from `l^1(X)` to `l^1(X x X)`.
pub fn broadcast_abelian(x: usize) -> Channel {
    let input = Algebra::abelian(x);
    let output = tensor_algebra(&input, &input);
    Channel::from_blocks(&input, &output, |i, j| {
        let v = if j / x == i && j % x == i { 1.0 } else { 0.0 };
        HermitianMatrix::diag(&[v])
    })
}

/// Check that a state maps to a state, returning the output's smallest eigenvalue.
pub fn output_positivity(c: &Channel, a: &StateFunctional) -> Result<f64> {
    let out = c.apply(a)?;
    let mut lo = f64::INFINITY;
    for b in out.blocks() {
        lo = lo.min(herm_eig(&HermitianMatrix::symmetrize(b))?.values.last().copied().unwrap_or(0.0));
    }
    Ok(lo)
}

/// `|u><u|` as a state on `L(C^d)`.
pub fn pure_state(u: &[C64]) -> StateFunctional {
    StateFunctional::pure(&Algebra::full(u.len()), 0, u).expect("single block")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::trace_state;

    fn ket0() -> StateFunctional {
        pure_state(&[ONE, linalg::ZERO])
    }

    #[test]
    fn identity_is_channel_and_acts_trivially() {
        for alg in [Algebra::full(2), Algebra::abelian(2), Algebra::new(vec![1, 2]).unwrap()] {
            let id = identity_channel(&alg);
            let r = id.is_channel(CHANNEL_TOL).unwrap();
            assert!(r.valid && r.psd_violation == 0.0 && r.unitality_residual == 0.0);
            let s = trace_state(&alg);
            assert!(id.apply(&s).unwrap().max_diff(&s) < 1e-15);
        }
        let id = identity_channel(&Algebra::abelian(2));
        assert_eq!(id.choi(0, 0).as_matrix(), &ComplexMatrix::identity(1));
        assert_eq!(id.choi(0, 1).as_matrix(), &ComplexMatrix::zeros(1, 1));
    }

    #[test]
    fn depolarizing_actions() {
        let full = depolarizing(2, 0.0).apply(&ket0()).unwrap();
        assert!(full.block(0).max_diff(&ComplexMatrix::identity(2).scale(0.5)) < 1e-15);
        let half = depolarizing(2, 0.5).apply(&ket0()).unwrap();
        assert!(half.block(0).max_diff(&ComplexMatrix::diag(&[0.75, 0.25])) < 1e-15);
        assert!(depolarizing(2, 1.0).max_diff(&identity_channel(&Algebra::full(2))) < 1e-15);
        let c = depolarizing(2, 2.0 / 3.0);
        assert!(c.is_channel(CHANNEL_TOL).unwrap().valid);
        assert!((c.linear_trace().unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_cp_range() {
        // CP iff -1/(d^2 - 1) <= gamma <= 1
        assert!(depolarizing(2, -1.0 / 3.0).is_channel(CHANNEL_TOL).unwrap().valid);
        assert!(!depolarizing(2, -0.34).is_channel(CHANNEL_TOL).unwrap().valid);
        assert!(!depolarizing(2, 1.01).is_channel(CHANNEL_TOL).unwrap().valid);
    }

    #[test]
    fn negated_block_and_transpose_map_rejected() {
        let id = identity_channel(&Algebra::full(2));
        let neg = Channel::new(id.input().clone(), id.output().clone(), vec![id.choi(0, 0).scale(-1.0)]).unwrap();
        let r = neg.is_channel(CHANNEL_TOL).unwrap();
        assert!(!r.valid);
        assert!((r.psd_violation - 2.0).abs() < 1e-12);

        // transpose map: Choi is the flip operator
        let flip = HermitianMatrix::symmetrize(&ComplexMatrix::from_fn(4, 4, |r, c| {
            if r == (c % 2) * 2 + c / 2 {
                ONE
            } else {
                linalg::ZERO
            }
        }));
        let t = Channel::new(Algebra::full(2), Algebra::full(2), vec![flip.clone()]).unwrap();
        let r = t.is_channel(CHANNEL_TOL).unwrap();
        assert!(!r.valid && (r.psd_violation - 1.0).abs() < 1e-12 && r.unitality_residual < 1e-15);
        let rho = StateFunctional::new(
            Algebra::full(2),
            vec![ComplexMatrix::new(2, 2, vec![ONE.scale(0.5), C64::new(0.1, 0.2), C64::new(0.1, -0.2), ONE.scale(0.5)]).unwrap()],
        )
        .unwrap();
        assert!(t.apply(&rho).unwrap().block(0).max_diff(&rho.block(0).transpose()) < 1e-15);
    }

    #[test]
    fn compose_depolarizing() {
        let c = compose(&depolarizing(2, 0.3), &depolarizing(2, -0.2)).unwrap();
        assert!(c.max_diff(&depolarizing(2, -0.06)) < 1e-14);
        let id = identity_channel(&Algebra::full(2));
        let f = depolarizing(2, 0.4);
        assert!(compose(&id, &f).unwrap().max_diff(&f) < 1e-15);
        assert!(compose(&f, &depolarizing(3, 0.1)).is_err());
    }

    #[test]
    fn trivial_channel_absorbs() {
        let a = Algebra::full(2);
        let t = trivial_channel(&a);
        assert!(t.is_channel(CHANNEL_TOL).unwrap().valid);
        assert!((t.apply(&ket0()).unwrap().total() - 1.0).abs() < 1e-15);
        assert!(compose(&t, &depolarizing(2, 0.7)).unwrap().max_diff(&t) < 1e-15);
    }

    #[test]
    fn broadcast_definition_and_margins() {
        let g = broadcast_abelian(2);
        assert!(g.is_channel(CHANNEL_TOL).unwrap().valid);
        let out = g.apply(&StateFunctional::distribution(&[0.3, 0.7])).unwrap();
        let w: Vec<f64> = out.blocks().iter().map(|b| b[(0, 0)].re).collect();
        assert_eq!(w, vec![0.3, 0.0, 0.0, 0.7]);
        let x = Algebra::abelian(2);
        for f in [Factor::First, Factor::Second] {
            let m = margin(&g, f, &x, &x).unwrap();
            assert!(m.max_diff(&identity_channel(&x)) < 1e-15);
        }
    }

    #[test]
    fn measurement_channels() {
        let delta = Measurement::delta(3);
        assert!(from_measurement(&delta).max_diff(&identity_channel(&Algebra::abelian(3))) < 1e-15);
        let basis = Measurement::basis(&ComplexMatrix::identity(2)).unwrap();
        let p = from_measurement(&basis).apply(&ket0()).unwrap();
        assert_eq!(p.blocks().iter().map(|b| b[(0, 0)].re).collect::<Vec<_>>(), vec![1.0, 0.0]);
    }

    #[test]
    fn measure_and_prepare_constant_and_identity() {
        let basis = Measurement::basis(&ComplexMatrix::identity(2)).unwrap();
        let b0 = trace_state(&Algebra::full(3));
        let c = measure_and_prepare(&basis, &[b0.clone(), b0.clone()]).unwrap();
        assert!(c.is_channel(CHANNEL_TOL).unwrap().valid);
        assert!(c.apply(&ket0()).unwrap().max_diff(&b0) < 1e-15);

        let x = Algebra::abelian(3);
        let preps: Vec<_> = (0..3).map(|k| StateFunctional::point_mass(&x, k)).collect();
        let c = measure_and_prepare(&Measurement::delta(3), &preps).unwrap();
        assert!(c.max_diff(&identity_channel(&x)) < 1e-15);

        let bad = StateFunctional::distribution(&[0.5, 0.2, 0.1]);
        assert!(measure_and_prepare(&Measurement::delta(3), &[bad.clone(), bad.clone(), bad]).is_err());
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let a = Algebra::new(vec![1, 2]).unwrap();
        let b = Algebra::full(2);
        let t = tensor_channels(&identity_channel(&a), &identity_channel(&b));
        assert!(t.max_diff(&identity_channel(&tensor_algebra(&a, &b))) < 1e-15);
    }

    #[test]
    fn margin_against_trivial_factor() {
        let c = depolarizing(2, 0.25);
        let a = Algebra::full(2);
        let joint = compose(&tensor_channels(&c, &trivial_channel(&a)), &identity_channel(&a));
        // L(C^2) (x) C has the same single block as L(C^2)
        let joint = joint.unwrap_or_else(|_| tensor_channels(&c, &trivial_channel(&Algebra::trivial())));
        let m = margin(&joint, Factor::First, &a, &Algebra::trivial());
        let m = m.unwrap();
        assert!(m.max_diff(&c) < 1e-15);
    }
}
