//! Joint-channel SDPs: compatibility decisions, guessing probabilities and
//! optimization of affine functionals over compatible pairs.

use log::debug;

use crate::algebra::{pair_real, tensor_algebra, Algebra, AlgebraElement, StateFunctional};
use crate::channel::{margin, Channel, Factor};
use crate::error::{Error, Result};
use crate::linalg::{self, kron, permute_factors, ComplexMatrix, HermitianMatrix};
use crate::sdp::{self, SdpProblem, SdpSolution};
use crate::witness::{DiscriminationTask, WitnessForm};

/// Slack at or below which a pair is declared compatible.
pub const DECISION_TOL: f64 = 1e-7;
/// Upper end of the band reported as inconclusive.
pub const INCONCLUSIVE_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Compatible,
    Incompatible,
    Inconclusive,
}

impl Decision {
    pub fn from_slack(slack: f64, tol: f64) -> Self {
        if slack <= tol {
            Decision::Compatible
        } else if slack <= INCONCLUSIVE_TOL.max(tol) {
            Decision::Inconclusive
        } else {
            Decision::Incompatible
        }
    }
}

/// Iterations and final relative gap of the SDP behind a result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverInfo {
    pub iterations: usize,
    pub gap: f64,
}

impl From<&SdpSolution> for SolverInfo {
    fn from(s: &SdpSolution) -> Self {
        Self { iterations: s.iterations, gap: s.gap }
    }
}

#[derive(Clone, Debug)]
pub struct CompatibilityVerdict {
    pub decision: Decision,
    pub compatible: bool,
    /// Optimal uniform bound `e*` on the margin residuals.
    pub slack: f64,
    /// Joint channel whose margins reproduce the pair, when compatible.
    pub joint: Option<Channel>,
    /// Dual multiplier of every margin coordinate, one list per margin.
    /// Coordinates run over Choi blocks `(i, j)` and, inside each block,
    /// over [`linalg::hermitian_basis`].
    pub dual_multipliers: [Vec<f64>; 2],
    pub solver: SolverInfo,
}

/// `sum_r (a_r)_i^T (x) (B_r)_j`, so that `<Phi(a_r), B_r>` summed over `r`
/// equals `sum_ij tr(K_ij choi_ij)`.
pub fn choi_kernel(input: &Algebra, output: &Algebra, terms: &[(StateFunctional, AlgebraElement)]) -> Result<Vec<HermitianMatrix>> {
    let mut out = Vec::with_capacity(input.num_blocks() * output.num_blocks());
    for i in 0..input.num_blocks() {
        for j in 0..output.num_blocks() {
            let d = input.block(i) * output.block(j);
            let mut acc = ComplexMatrix::zeros(d, d);
            for (a, b) in terms {
                if a.algebra() != input || b.algebra() != output {
                    return Err(Error::AlgebraMismatch("term does not match the channel algebras".into()));
                }
                acc += &kron(&a.block(i).transpose(), b.block(j));
            }
            out.push(HermitianMatrix::symmetrize(&acc));
        }
    }
    Ok(out)
}

/// Block layout of channel variables inside an [`SdpProblem`].
struct ChannelVars {
    input: Algebra,
    output: Algebra,
    first: usize,
}

impl ChannelVars {
    /// Add one PSD block per Choi block plus the exact unitality rows.
    fn add(p: &mut SdpProblem, input: &Algebra, output: &Algebra) -> Result<Self> {
        let first = p.blocks().len();
        for i in 0..input.num_blocks() {
            for j in 0..output.num_blocks() {
                p.add_block(input.block(i) * output.block(j));
            }
        }
        let vars = Self { input: input.clone(), output: output.clone(), first };
        for i in 0..input.num_blocks() {
            let n = input.block(i);
            for g in linalg::hermitian_basis(n) {
                let terms = (0..output.num_blocks())
                    .map(|j| {
                        let lifted = HermitianMatrix::symmetrize(&kron(&g, &ComplexMatrix::identity(output.block(j))));
                        (vars.index(i, j), lifted)
                    })
                    .collect();
                p.add_constraint(terms, g.real_trace())?;
            }
        }
        Ok(vars)
    }

    fn index(&self, i: usize, j: usize) -> usize {
        self.first + i * self.output.num_blocks() + j
    }

    fn channel(&self, x: &[HermitianMatrix]) -> Result<Channel> {
        let n = self.input.num_blocks() * self.output.num_blocks();
        Channel::new(self.input.clone(), self.output.clone(), x[self.first..self.first + n].to_vec())
    }
}

/// Joint channel into `out1 (x) out2` with helpers for lifting margin kernels.
struct JointVars {
    vars: ChannelVars,
    out1: Algebra,
    out2: Algebra,
}

impl JointVars {
    fn add(p: &mut SdpProblem, input: &Algebra, out1: &Algebra, out2: &Algebra) -> Result<Self> {
        let vars = ChannelVars::add(p, input, &tensor_algebra(out1, out2))?;
        Ok(Self { vars, out1: out1.clone(), out2: out2.clone() })
    }

    fn index(&self, i: usize, j1: usize, j2: usize) -> usize {
        self.vars.index(i, j1 * self.out2.num_blocks() + j2)
    }

    /// Adjoint of the margin map on one Choi block: `g` on block `(i, j_kept)`
    /// becomes a kernel on the joint block `(i, (j1, j2))`.
    fn lift(&self, factor: Factor, i: usize, j1: usize, j2: usize, g: &ComplexMatrix) -> HermitianMatrix {
        let n = self.vars.input.block(i);
        let (m1, m2) = (self.out1.block(j1), self.out2.block(j2));
        let m = match factor {
            Factor::First => kron(g, &ComplexMatrix::identity(m2)),
            Factor::Second => {
                permute_factors(&kron(g, &ComplexMatrix::identity(m1)), &[n, m2, m1], &[0, 2, 1]).expect("dims consistent")
            }
        };
        HermitianMatrix::symmetrize(&m)
    }

    fn kept(&self, factor: Factor) -> &Algebra {
        match factor {
            Factor::First => &self.out1,
            Factor::Second => &self.out2,
        }
    }

    /// Every joint block `(i, j1, j2)` that feeds margin block `(i, jk)`.
    fn feeding(&self, factor: Factor, jk: usize) -> Vec<(usize, usize)> {
        match factor {
            Factor::First => (0..self.out2.num_blocks()).map(|j2| (jk, j2)).collect(),
            Factor::Second => (0..self.out1.num_blocks()).map(|j1| (j1, jk)).collect(),
        }
    }

    /// Objective contribution `<K, margin(J)>` for a margin kernel `K`.
    fn add_margin_objective(&self, p: &mut SdpProblem, factor: Factor, kernel: &[HermitianMatrix]) -> Result<()> {
        let nk = self.kept(factor).num_blocks();
        for i in 0..self.vars.input.num_blocks() {
            for jk in 0..nk {
                let k = &kernel[i * nk + jk];
                for (j1, j2) in self.feeding(factor, jk) {
                    p.add_objective(self.index(i, j1, j2), &self.lift(factor, i, j1, j2, k))?;
                }
            }
        }
        Ok(())
    }

    /// Rows `(terms, target)` for every margin coordinate of `target`.
    fn margin_rows(&self, factor: Factor, target: &Channel) -> Vec<(Vec<(usize, HermitianMatrix)>, f64)> {
        let nk = self.kept(factor).num_blocks();
        let mut rows = Vec::new();
        for i in 0..self.vars.input.num_blocks() {
            for jk in 0..nk {
                let d = self.vars.input.block(i) * self.kept(factor).block(jk);
                for g in linalg::hermitian_basis(d) {
                    let terms = self
                        .feeding(factor, jk)
                        .into_iter()
                        .map(|(j1, j2)| (self.index(i, j1, j2), self.lift(factor, i, j1, j2, &g)))
                        .collect();
                    rows.push((terms, g.inner(target.choi(i, jk))));
                }
            }
        }
        rows
    }
}

fn check_pair(c1: &Channel, c2: &Channel) -> Result<()> {
    if c1.input() != c2.input() {
        return Err(Error::AlgebraMismatch("channels of a pair must share the input algebra".into()));
    }
    Ok(())
}

pub fn check_compatibility(c1: &Channel, c2: &Channel) -> Result<CompatibilityVerdict> {
    check_compatibility_with(c1, c2, DECISION_TOL)
}

/// Minimize the uniform margin residual `e` over joint channels.
pub fn check_compatibility_with(c1: &Channel, c2: &Channel, tol: f64) -> Result<CompatibilityVerdict> {
    check_pair(c1, c2)?;
    let mut p = SdpProblem::new(vec![]);
    let joint = JointVars::add(&mut p, c1.input(), c1.output(), c2.output())?;
    let e = p.add_block(1);
    p.set_objective(e, HermitianMatrix::diag(&[-1.0]))?;
    let one = HermitianMatrix::diag(&[1.0]);
    let mut row_pairs = [Vec::new(), Vec::new()];
    for (f, (factor, target)) in [(Factor::First, c1), (Factor::Second, c2)].into_iter().enumerate() {
        for (terms, b) in joint.margin_rows(factor, target) {
            let s1 = p.add_block(1);
            let s2 = p.add_block(1);
            let mut lo = terms.clone();
            lo.push((e, one.scale(-1.0)));
            lo.push((s1, one.clone()));
            let mut hi = terms;
            hi.push((e, one.clone()));
            hi.push((s2, one.scale(-1.0)));
            let a = p.constraints().len();
            p.add_constraint(lo, b)?;
            p.add_constraint(hi, b)?;
            row_pairs[f].push(a);
        }
    }
    let sol = sdp::solve(&p)?;
    let slack = sol.x[e][(0, 0)].re.max(0.0);
    let decision = Decision::from_slack(slack, tol);
    debug!("compatibility: e* = {slack:.3e} ({decision:?}) in {} iterations", sol.iterations);
    let dual_multipliers = row_pairs.map(|rows| rows.iter().map(|&a| sol.y[a] + sol.y[a + 1]).collect());
    let joint_channel = if decision == Decision::Compatible {
        Some(joint.vars.channel(&sol.x)?.project_to_channel()?)
    } else {
        None
    };
    Ok(CompatibilityVerdict {
        decision,
        compatible: decision == Decision::Compatible,
        slack,
        joint: joint_channel,
        dual_multipliers,
        solver: SolverInfo::from(&sol),
    })
}

/// Reassemble `sum_t w_t G_t` per Choi block of a channel `input -> output`.
pub fn multiplier_kernel(input: &Algebra, output: &Algebra, w: &[f64]) -> Result<Vec<HermitianMatrix>> {
    let mut out = Vec::new();
    let mut t = 0;
    for i in 0..input.num_blocks() {
        for j in 0..output.num_blocks() {
            let d = input.block(i) * output.block(j);
            let len = linalg::svec_len(d);
            let slice = w
                .get(t..t + len)
                .ok_or_else(|| Error::DimensionMismatch("too few multipliers for the channel algebras".into()))?;
            out.push(linalg::smat(slice, d));
            t += len;
        }
    }
    if t != w.len() {
        return Err(Error::DimensionMismatch("too many multipliers for the channel algebras".into()));
    }
    Ok(out)
}

/// Maximum of `<K, Phi>` over channels `input -> output`.
pub fn max_linear_over_channels(input: &Algebra, output: &Algebra, kernel: &[HermitianMatrix]) -> Result<(f64, Channel, SolverInfo)> {
    let mut p = SdpProblem::new(vec![]);
    let vars = ChannelVars::add(&mut p, input, output)?;
    for i in 0..input.num_blocks() {
        for j in 0..output.num_blocks() {
            p.set_objective(vars.index(i, j), kernel[i * output.num_blocks() + j].clone())?;
        }
    }
    let sol = sdp::solve(&p)?;
    let c = vars.channel(&sol.x)?.project_to_channel()?;
    Ok((sol.primal_objective, c, SolverInfo::from(&sol)))
}

/// Optimum of `<K1, Pi_1 J> + <K2, Pi_2 J>` over joint channels `J`.
#[derive(Clone, Debug)]
pub struct JointOptimum {
    pub value: f64,
    pub joint: Channel,
    pub margins: (Channel, Channel),
    pub solver: SolverInfo,
}

pub fn max_linear_over_compatible(
    input: &Algebra,
    out1: &Algebra,
    out2: &Algebra,
    k1: &[HermitianMatrix],
    k2: &[HermitianMatrix],
) -> Result<JointOptimum> {
    let mut p = SdpProblem::new(vec![]);
    let joint = JointVars::add(&mut p, input, out1, out2)?;
    joint.add_margin_objective(&mut p, Factor::First, k1)?;
    joint.add_margin_objective(&mut p, Factor::Second, k2)?;
    let sol = sdp::solve(&p)?;
    let j = joint.vars.channel(&sol.x)?.project_to_channel()?;
    let margins = (margin(&j, Factor::First, out1, out2)?, margin(&j, Factor::Second, out1, out2)?);
    Ok(JointOptimum { value: sol.primal_objective, joint: j, margins, solver: SolverInfo::from(&sol) })
}

/// Minimum of an affine witness over compatible pairs and a pair attaining it.
#[derive(Clone, Debug)]
pub struct CompatibleMinimum {
    pub min: f64,
    pub pair: (Channel, Channel),
    pub solver: SolverInfo,
}

pub fn max_over_compatible(w: &WitnessForm) -> Result<CompatibleMinimum> {
    let (k1, k2) = w.kernels()?;
    let opt = max_linear_over_compatible(w.input(), w.out1(), w.out2(), &k1, &k2)?;
    Ok(CompatibleMinimum { min: w.delta0() - opt.value, pair: opt.margins, solver: opt.solver })
}

fn check_task_channels(c1: &Channel, c2: &Channel, t: &DiscriminationTask) -> Result<()> {
    check_pair(c1, c2)?;
    if c1.input() != t.input() || c1.output() != t.m1().algebra() || c2.output() != t.m2().algebra() {
        return Err(Error::AlgebraMismatch("channels do not match the task".into()));
    }
    Ok(())
}

/// `sum_i sum_{z in X_i} <Phi_i(E(z)), M_i(z)>`.
pub fn p_prior_given(c1: &Channel, c2: &Channel, t: &DiscriminationTask) -> Result<f64> {
    check_task_channels(c1, c2, t)?;
    let mut total = 0.0;
    for (c, terms) in [(c1, t.branch_terms(1)?), (c2, t.branch_terms(2)?)] {
        for (e, m) in terms {
            total += pair_real(&c.apply(&e)?, &m)?;
        }
    }
    Ok(total)
}

/// Best guessing probability when the branch is known before processing.
pub fn p_prior(t: &DiscriminationTask) -> Result<f64> {
    let branch = |i: usize| -> Result<f64> {
        let out = if i == 1 { t.m1().algebra() } else { t.m2().algebra() };
        let k = choi_kernel(t.input(), out, &t.branch_terms(i)?)?;
        Ok(max_linear_over_channels(t.input(), out, &k)?.0)
    };
    let (a, b) = rayon::join(|| branch(1), || branch(2));
    Ok(a? + b?)
}

/// Best guessing probability when the branch is announced after processing.
pub fn p_post(t: &DiscriminationTask) -> Result<f64> {
    Ok(p_post_optimum(t)?.value)
}

/// [`p_post`] together with the optimal joint channel.
pub fn p_post_optimum(t: &DiscriminationTask) -> Result<JointOptimum> {
    let (o1, o2) = (t.m1().algebra(), t.m2().algebra());
    let k1 = choi_kernel(t.input(), o1, &t.branch_terms(1)?)?;
    let k2 = choi_kernel(t.input(), o2, &t.branch_terms(2)?)?;
    max_linear_over_compatible(t.input(), o1, o2, &k1, &k2)
}

/// Whether margins of a joint channel reproduce a pair within `tol` (entrywise).
pub fn margins_match(joint: &Channel, c1: &Channel, c2: &Channel, tol: f64) -> Result<bool> {
    let m1 = margin(joint, Factor::First, c1.output(), c2.output())?;
    let m2 = margin(joint, Factor::Second, c1.output(), c2.output())?;
    Ok(m1.max_diff(c1) <= tol && m2.max_diff(c2) <= tol)
}
