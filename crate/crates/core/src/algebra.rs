//! Finite-dimensional block algebras, their elements, states and measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ComplexMatrix, HermitianMatrix, ONE, ZERO};

/// Tolerance on the smallest eigenvalue of a measurement effect.
pub const EFFECT_PSD_TOL: f64 = -1e-10;
/// Tolerance on normalization identities (effects summing to one, unit trace).
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Relative singular value threshold for the informational completeness rank test.
pub const IC_RANK_TOL: f64 = 1e-9;

/// A direct sum of full matrix blocks `M_{n_1} + ... + M_{n_k}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Algebra {
    blocks: Vec<usize>,
}

impl Algebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("algebra needs at least one block".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidInput("block dimensions must be positive".into()));
        }
        Ok(Self { blocks })
    }

    /// `l^inf(X)` with `|X| = size`.
    pub fn abelian(size: usize) -> Self {
        assert!(size > 0, "abelian algebra needs a nonempty outcome set");
        Self { blocks: vec![1; size] }
    }

    /// `L(C^d)`.
    pub fn full(d: usize) -> Self {
        assert!(d > 0, "matrix algebra needs d > 0");
        Self { blocks: vec![d] }
    }

    /// The trivial algebra `C`.
    pub fn trivial() -> Self {
        Self { blocks: vec![1] }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> usize {
        self.blocks[i]
    }

    /// Vector space dimension `sum n_i^2`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    /// Size of the defining representation `sum n_i`.
    pub fn rep_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn is_abelian(&self) -> bool {
        self.blocks.iter().all(|&n| n == 1)
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks == [1]
    }

    /// Offset of block `i` in the concatenated real coordinates of [`AlgebraElement::svec`].
    pub fn svec_offset(&self, i: usize) -> usize {
        self.blocks[..i].iter().map(|n| n * n).sum()
    }
}

/// Tensor product: blocks `n_i * m_j`, ordered lexicographically in `(i, j)`.
pub fn tensor_algebra(a1: &Algebra, a2: &Algebra) -> Algebra {
    let blocks = a1
        .blocks
        .iter()
        .flat_map(|&n| a2.blocks.iter().map(move |&m| n * m))
        .collect();
    Algebra { blocks }
}

pub fn is_abelian(a: &Algebra) -> bool {
    a.is_abelian()
}

fn check_blocks(alg: &Algebra, blocks: &[ComplexMatrix], what: &str) -> Result<()> {
    if blocks.len() != alg.num_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {} blocks for an algebra with {}",
            blocks.len(),
            alg.num_blocks()
        )));
    }
    for (i, (b, &n)) in blocks.iter().zip(alg.blocks()).enumerate() {
        if b.rows() != n || b.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{what}: block {i} is {}x{}, expected {n}x{n}",
                b.rows(),
                b.cols()
            )));
        }
    }
    Ok(())
}

fn blocks_svec(blocks: &[ComplexMatrix]) -> Vec<f64> {
    blocks.iter().flat_map(linalg::svec).collect()
}

fn blocks_from_svec(alg: &Algebra, v: &[f64]) -> Vec<ComplexMatrix> {
    let mut off = 0;
    alg.blocks()
        .iter()
        .map(|&n| {
            let m = linalg::smat(&v[off..off + n * n], n).into_matrix();
            off += n * n;
            m
        })
        .collect()
}

/// An element of an algebra, stored block by block.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    algebra: Algebra,
    blocks: Vec<ComplexMatrix>,
}

impl AlgebraElement {
    pub fn new(algebra: Algebra, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        check_blocks(&algebra, &blocks, "algebra element")?;
        Ok(Self { algebra, blocks })
    }

    pub fn zero(algebra: &Algebra) -> Self {
        let blocks = algebra.blocks().iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
        Self { algebra: algebra.clone(), blocks }
    }

    /// The unit `1_A`.
    pub fn identity(algebra: &Algebra) -> Self {
        let blocks = algebra.blocks().iter().map(|&n| ComplexMatrix::identity(n)).collect();
        Self { algebra: algebra.clone(), blocks }
    }

    /// `m` placed in block `i`, zero elsewhere.
    pub fn in_block(algebra: &Algebra, i: usize, m: ComplexMatrix) -> Result<Self> {
        let mut e = Self::zero(algebra);
        if i >= algebra.num_blocks() || m.rows() != algebra.block(i) || !m.is_square() {
            return Err(Error::DimensionMismatch(format!("cannot place a {}x{} matrix in block {i}", m.rows(), m.cols())));
        }
        e.blocks[i] = m;
        Ok(e)
    }

    /// Kronecker delta `delta_x` of an abelian algebra (or the `x`-th block unit in general).
    pub fn delta(algebra: &Algebra, x: usize) -> Self {
        let n = algebra.block(x);
        Self::in_block(algebra, x, ComplexMatrix::identity(n)).expect("valid block")
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    pub fn is_selfadjoint(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| b.is_hermitian(tol))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { algebra: self.algebra.clone(), blocks: self.blocks.iter().map(|b| b.scale(s)).collect() }
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<Self> {
        same_algebra(&self.algebra, &other.algebra)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect();
        Ok(Self { algebra: self.algebra.clone(), blocks })
    }

    /// Smallest eigenvalue over all blocks (of the Hermitian part).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for b in &self.blocks {
            lo = lo.min(HermitianMatrix::symmetrize(b).min_eigenvalue()?);
        }
        Ok(lo)
    }

    /// Real coordinates of the Hermitian part, blocks concatenated.
    pub fn svec(&self) -> Vec<f64> {
        blocks_svec(&self.blocks)
    }

    pub fn from_svec(algebra: &Algebra, v: &[f64]) -> Self {
        Self { algebra: algebra.clone(), blocks: blocks_from_svec(algebra, v) }
    }

    pub fn max_diff(&self, other: &AlgebraElement) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }

    /// `P x P` for a projection `P`, blockwise.
    pub fn compress(&self, p: &AlgebraElement) -> Self {
        let blocks = self.blocks.iter().zip(&p.blocks).map(|(x, q)| q.matmul(x).matmul(q)).collect();
        Self { algebra: self.algebra.clone(), blocks }
    }
}

/// A functional on an algebra, represented by its density blocks:
/// `<s, A> = sum_i trace(s_i A_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFunctional {
    algebra: Algebra,
    blocks: Vec<ComplexMatrix>,
}

impl StateFunctional {
    pub fn new(algebra: Algebra, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        check_blocks(&algebra, &blocks, "functional")?;
        Ok(Self { algebra, blocks })
    }

    /// Like [`StateFunctional::new`] but also checks the state invariants.
    pub fn state(algebra: Algebra, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        let s = Self::new(algebra, blocks)?;
        s.check_state(NORMALIZATION_TOL)?;
        Ok(s)
    }

    pub fn zero(algebra: &Algebra) -> Self {
        let blocks = algebra.blocks().iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
        Self { algebra: algebra.clone(), blocks }
    }

    /// Density `|u><u|` in block `i`.
    pub fn pure(algebra: &Algebra, i: usize, u: &[C64]) -> Result<Self> {
        let mut s = Self::zero(algebra);
        if i >= algebra.num_blocks() || u.len() != algebra.block(i) {
            return Err(Error::DimensionMismatch("pure state vector does not fit the block".into()));
        }
        s.blocks[i] = ComplexMatrix::projector(u);
        Ok(s)
    }

    /// Point mass on block `x` (a probability vector entry when abelian).
    pub fn point_mass(algebra: &Algebra, x: usize) -> Self {
        let mut s = Self::zero(algebra);
        let n = algebra.block(x);
        s.blocks[x] = ComplexMatrix::identity(n).scale(1.0 / n as f64);
        s
    }

    /// Probability vector on an abelian algebra.
    pub fn distribution(p: &[f64]) -> Self {
        let algebra = Algebra::abelian(p.len());
        let blocks = p.iter().map(|&v| ComplexMatrix::from_real(1, 1, &[v])).collect();
        Self { algebra, blocks }
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    /// `<s, 1>`
    pub fn total(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { algebra: self.algebra.clone(), blocks: self.blocks.iter().map(|b| b.scale(s)).collect() }
    }

    pub fn add(&self, other: &StateFunctional) -> Result<Self> {
        same_algebra(&self.algebra, &other.algebra)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect();
        Ok(Self { algebra: self.algebra.clone(), blocks })
    }

    pub fn is_selfadjoint(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| b.is_hermitian(tol))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for b in &self.blocks {
            lo = lo.min(HermitianMatrix::symmetrize(b).min_eigenvalue()?);
        }
        Ok(lo)
    }

    /// Sum of block trace norms.
    pub fn trace_norm(&self) -> Result<f64> {
        self.blocks.iter().map(linalg::trace_norm).sum()
    }

    pub fn check_positive(&self, tol: f64) -> Result<()> {
        if !self.is_selfadjoint(1e-9) {
            return Err(Error::NotAState("functional is not selfadjoint".into()));
        }
        let lo = self.min_eigenvalue()?;
        let scale = self.blocks.iter().map(|b| b.max_abs()).fold(1.0, f64::max);
        if lo < -tol * scale {
            return Err(Error::NotAState(format!("negative eigenvalue {lo:.3e}")));
        }
        Ok(())
    }

    pub fn check_state(&self, tol: f64) -> Result<()> {
        self.check_positive(tol)?;
        let t = self.total();
        if (t - 1.0).abs() > tol {
            return Err(Error::NotAState(format!("trace {t} != 1")));
        }
        Ok(())
    }

    pub fn svec(&self) -> Vec<f64> {
        blocks_svec(&self.blocks)
    }

    pub fn from_svec(algebra: &Algebra, v: &[f64]) -> Self {
        Self { algebra: algebra.clone(), blocks: blocks_from_svec(algebra, v) }
    }

    pub fn max_diff(&self, other: &StateFunctional) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }
}

fn same_algebra(a: &Algebra, b: &Algebra) -> Result<()> {
    if a != b {
        return Err(Error::AlgebraMismatch(format!("{:?} vs {:?}", a.blocks(), b.blocks())));
    }
    Ok(())
}

/// Canonical pairing `<s, e> = sum_i trace(s_i e_i)`.
pub fn pair(s: &StateFunctional, e: &AlgebraElement) -> Result<C64> {
    same_algebra(&s.algebra, &e.algebra)?;
    Ok(s.blocks.iter().zip(&e.blocks).map(|(a, b)| a.trace_product(b)).sum())
}

/// Real part of [`pair`]; exact for selfadjoint arguments.
pub fn pair_real(s: &StateFunctional, e: &AlgebraElement) -> Result<f64> {
    Ok(pair(s, e)?.re)
}

/// The faithful state with block `i` equal to `I_{n_i} / N`, `N = sum n_i`.
pub fn trace_state(a: &Algebra) -> StateFunctional {
    let n = a.rep_dim() as f64;
    let blocks = a.blocks().iter().map(|&k| ComplexMatrix::identity(k).scale(1.0 / n)).collect();
    StateFunctional { algebra: a.clone(), blocks }
}

/// A measurement: one positive effect per outcome label, summing to the unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    algebra: Algebra,
    labels: Vec<String>,
    effects: Vec<AlgebraElement>,
}

impl Measurement {
    pub fn new(algebra: Algebra, labels: Vec<String>, effects: Vec<AlgebraElement>) -> Result<Self> {
        if labels.len() != effects.len() {
            return Err(Error::InvalidInput(format!("{} labels for {} effects", labels.len(), effects.len())));
        }
        if labels.is_empty() {
            return Err(Error::InvalidInput("measurement needs at least one outcome".into()));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::InvalidInput("duplicate outcome labels".into()));
        }
        let mut total = AlgebraElement::zero(&algebra);
        for (label, e) in labels.iter().zip(&effects) {
            same_algebra(&algebra, e.algebra())?;
            if !e.is_selfadjoint(1e-10) {
                return Err(Error::InvalidInput(format!("effect {label} is not selfadjoint")));
            }
            let lo = e.min_eigenvalue()?;
            if lo < EFFECT_PSD_TOL {
                return Err(Error::InvalidInput(format!("effect {label} has eigenvalue {lo:.3e}")));
            }
            total = total.add(e)?;
        }
        let dev = total.max_diff(&AlgebraElement::identity(&algebra));
        if dev > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!("effects sum to the unit only within {dev:.3e}")));
        }
        Ok(Self { algebra, labels, effects })
    }

    /// Same effects with default labels `0..n`.
    pub fn unlabeled(algebra: Algebra, effects: Vec<AlgebraElement>) -> Result<Self> {
        let labels = (0..effects.len()).map(|x| x.to_string()).collect();
        Self::new(algebra, labels, effects)
    }

    /// Kronecker-delta measurement on `l^inf(X)`.
    pub fn delta(size: usize) -> Self {
        let alg = Algebra::abelian(size);
        let effects = (0..size).map(|x| AlgebraElement::delta(&alg, x)).collect();
        Self::unlabeled(alg, effects).expect("delta measurement is valid")
    }

    /// Projective measurement onto the columns of a unitary, on `L(C^d)`.
    pub fn basis(basis: &ComplexMatrix) -> Result<Self> {
        let d = basis.rows();
        let alg = Algebra::full(d);
        let effects = (0..basis.cols())
            .map(|x| AlgebraElement::new(alg.clone(), vec![ComplexMatrix::projector(&basis.column(x))]))
            .collect::<Result<Vec<_>>>()?;
        Self::unlabeled(alg, effects)
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn effects(&self) -> &[AlgebraElement] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effect(&self, label: &str) -> Option<&AlgebraElement> {
        self.labels.iter().position(|l| l == label).map(|k| &self.effects[k])
    }

    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self> {
        Self::new(self.algebra.clone(), labels, self.effects.clone())
    }

    /// Copy with every label prefixed, e.g. to make two outcome sets disjoint.
    pub fn with_prefix(&self, prefix: &str) -> Self {
        Self {
            algebra: self.algebra.clone(),
            labels: self.labels.iter().map(|l| format!("{prefix}{l}")).collect(),
            effects: self.effects.clone(),
        }
    }

    /// Outcome distribution `x -> <s, M(x)>`.
    pub fn probabilities(&self, s: &StateFunctional) -> Result<Vec<f64>> {
        self.effects.iter().map(|e| pair_real(s, e)).collect()
    }

    pub fn is_projective(&self, tol: f64) -> bool {
        self.effects.iter().all(|e| {
            e.blocks().iter().all(|b| b.matmul(b).max_diff(b) <= tol) && e.blocks().iter().any(|b| b.max_abs() > tol)
        })
    }
}

/// Rank test on the Gram matrix of the vectorized effects.
pub fn is_informationally_complete(m: &Measurement) -> bool {
    ic_rank(m).map(|r| r == m.algebra().dim()).unwrap_or(false)
}

/// Numerical rank of the effects inside the selfadjoint part of the algebra.
pub fn ic_rank(m: &Measurement) -> Result<usize> {
    let cols: Vec<Vec<f64>> = m.effects().iter().map(|e| e.svec()).collect();
    linalg::numerical_rank(&cols, IC_RANK_TOL)
}

/// The `n^2` frame vectors `e_k`, `(e_k + e_l)/sqrt2`, `(e_k + i e_l)/sqrt2` of `C^n`.
fn standard_frame(n: usize) -> Vec<Vec<C64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut frame = Vec::with_capacity(n * n);
    for k in 0..n {
        let mut v = vec![ZERO; n];
        v[k] = ONE;
        frame.push(v);
    }
    for k in 0..n {
        for l in k + 1..n {
            let mut v = vec![ZERO; n];
            v[k] = C64::new(s, 0.0);
            v[l] = C64::new(s, 0.0);
            frame.push(v);
            let mut w = vec![ZERO; n];
            w[k] = C64::new(s, 0.0);
            w[l] = C64::new(0.0, s);
            frame.push(w);
        }
    }
    frame
}

fn frame_effects(n: usize, frame: &[Vec<C64>]) -> Result<Vec<ComplexMatrix>> {
    let mut t = ComplexMatrix::zeros(n, n);
    for v in frame {
        t += &ComplexMatrix::projector(v);
    }
    let t_inv_sqrt = linalg::inv_sqrt(&HermitianMatrix::symmetrize(&t), 1e-12)?;
    Ok(frame
        .iter()
        .map(|v| {
            let w = t_inv_sqrt.mul_vec(v);
            HermitianMatrix::projector(&w).into_matrix()
        })
        .collect())
}

/// An informationally complete measurement with exactly `dim(a)` outcomes.
pub fn ic_povm(a: &Algebra) -> Result<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1c_9017);
    let mut attempt = 0;
    loop {
        let mut effects = Vec::with_capacity(a.dim());
        for (i, &n) in a.blocks().iter().enumerate() {
            let mut frame = standard_frame(n);
            if attempt > 0 {
                for v in frame.iter_mut() {
                    for z in v.iter_mut() {
                        *z += C64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
                    }
                }
            }
            for m in frame_effects(n, &frame)? {
                effects.push(AlgebraElement::in_block(a, i, m)?);
            }
        }
        let m = Measurement::unlabeled(a.clone(), effects)?;
        let rank = ic_rank(&m)?;
        if rank == a.dim() {
            return Ok(m);
        }
        attempt += 1;
        if attempt > 3 {
            return Err(Error::NotInformationallyComplete { rank, dim: a.dim() });
        }
        log::warn!("ic_povm: rank {rank} < {}, perturbing frame (attempt {attempt})", a.dim());
    }
}

/// Labeled subnormalized positive functionals summing to a state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateEnsemble {
    algebra: Algebra,
    labels: Vec<String>,
    members: Vec<StateFunctional>,
}

impl StateEnsemble {
    pub fn new(algebra: Algebra, labels: Vec<String>, members: Vec<StateFunctional>) -> Result<Self> {
        if labels.len() != members.len() {
            return Err(Error::InvalidInput("ensemble labels and members differ in length".into()));
        }
        let mut total = StateFunctional::zero(&algebra);
        for (label, m) in labels.iter().zip(&members) {
            same_algebra(&algebra, m.algebra())?;
            m.check_positive(1e-9)
                .map_err(|e| Error::NotAState(format!("ensemble member {label}: {e}")))?;
            total = total.add(m)?;
        }
        total.check_state(1e-9)?;
        Ok(Self { algebra, labels, members })
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn members(&self) -> &[StateFunctional] {
        &self.members
    }

    pub fn get(&self, label: &str) -> Option<&StateFunctional> {
        self.labels.iter().position(|l| l == label).map(|k| &self.members[k])
    }

    /// `p(z) = <E(z), 1>`
    pub fn prior(&self, label: &str) -> Option<f64> {
        self.get(label).map(|s| s.total())
    }

    /// `sum_z E(z)`
    pub fn marginal(&self) -> StateFunctional {
        let mut total = StateFunctional::zero(&self.algebra);
        for m in &self.members {
            total = total.add(m).expect("same algebra");
        }
        total
    }
}
