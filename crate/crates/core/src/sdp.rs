//! Dense primal-dual interior-point solver for small Hermitian SDPs.
//!
//! Problems are posed as
//!
//! ```text
//! maximize    sum_k <C_k, X_k>
//! subject to  sum_k <A_lk, X_k> = b_l,   X_k >= 0
//! ```
//!
//! with dual `minimize b^T y  s.t.  Z_k = sum_l y_l A_lk - C_k >= 0`.
//! The search direction is the HKM direction with a Mehrotra
//! predictor-corrector step, started from an infeasible interior point.

use std::sync::Mutex;

use log::{debug, trace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, herm_eig, hpd_inverse, lower_inverse, ComplexMatrix, HermitianMatrix};

/// Rows whose Gram-Schmidt residual falls below this are dropped as dependent.
pub const DEPENDENT_ROW_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericallyDegenerate,
}

/// One equality row `sum_k <A_k, X_k> = rhs`; blocks not listed are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, HermitianMatrix)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    blocks: Vec<usize>,
    objective: Vec<HermitianMatrix>,
    constraints: Vec<Constraint>,
}

impl SdpProblem {
    /// A problem with zero objective and no constraints.
    pub fn new(blocks: Vec<usize>) -> Self {
        let objective = blocks.iter().map(|&n| HermitianMatrix::zeros(n)).collect();
        Self { blocks, objective, constraints: Vec::new() }
    }

    /// Append a PSD block and return its index.
    pub fn add_block(&mut self, n: usize) -> usize {
        self.blocks.push(n);
        self.objective.push(HermitianMatrix::zeros(n));
        self.blocks.len() - 1
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn objective(&self) -> &[HermitianMatrix] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, k: usize, c: HermitianMatrix) -> Result<()> {
        self.check_block(k, &c)?;
        self.objective[k] = c;
        Ok(())
    }

    pub fn add_objective(&mut self, k: usize, c: &HermitianMatrix) -> Result<()> {
        self.check_block(k, c)?;
        self.objective[k] += c;
        Ok(())
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, HermitianMatrix)>, rhs: f64) -> Result<()> {
        for (k, a) in &terms {
            self.check_block(*k, a)?;
        }
        if !rhs.is_finite() {
            return Err(Error::InvalidInput("non-finite constraint right-hand side".into()));
        }
        self.constraints.push(Constraint { terms, rhs });
        Ok(())
    }

    fn check_block(&self, k: usize, m: &HermitianMatrix) -> Result<()> {
        let n = *self
            .blocks
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("block index {k} out of range")))?;
        if m.dim() != n {
            return Err(Error::DimensionMismatch(format!("block {k} has size {n}, matrix has {}", m.dim())));
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len() + 1);
        let mut t = 0;
        for &n in &self.blocks {
            off.push(t);
            t += n * n;
        }
        off.push(t);
        off
    }

    /// `sum_k <A_lk, X_k>` for every row.
    pub fn constraint_values(&self, x: &[HermitianMatrix]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.terms.iter().map(|(k, a)| a.inner(&x[*k])).sum())
            .collect()
    }

    pub fn objective_value(&self, x: &[HermitianMatrix]) -> f64 {
        self.objective.iter().zip(x).map(|(c, xk)| c.inner(xk)).sum()
    }

    /// Dual slack `Z_k = sum_l y_l A_lk - C_k`.
    pub fn dual_slack(&self, y: &[f64]) -> Vec<HermitianMatrix> {
        let mut z: Vec<HermitianMatrix> = self.objective.iter().map(|c| c.scale(-1.0)).collect();
        for (c, &yl) in self.constraints.iter().zip(y) {
            for (k, a) in &c.terms {
                z[*k] += &a.scale(yl);
            }
        }
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpOptions {
    /// Relative gap at which iteration stops.
    pub gap_target: f64,
    /// Relative gap and residual required for [`SolveStatus::Optimal`].
    pub accept_gap: f64,
    pub accept_residual: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { gap_target: 1e-10, accept_gap: 1e-7, accept_residual: 1e-8, max_iterations: 200, step_fraction: 0.98 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: Vec<HermitianMatrix>,
    pub y: Vec<f64>,
    pub z: Vec<HermitianMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|dual - primal| / (1 + |primal| + |dual|)`.
    pub gap: f64,
    /// Largest absolute equality residual.
    pub primal_residual: f64,
    pub iterations: usize,
}

/// Independent check of a returned solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub max_residual: f64,
    /// Smallest eigenvalue over all primal blocks.
    pub primal_psd_margin: f64,
    /// Smallest eigenvalue over all dual slack blocks recomputed from `y`.
    pub dual_psd_margin: f64,
    pub relative_gap: f64,
    pub weak_duality: bool,
}

/// Recompute residuals, PSD margins and weak duality from scratch.
pub fn verify(p: &SdpProblem, s: &SdpSolution) -> Result<VerifyReport> {
    if s.x.len() != p.blocks.len() || s.y.len() != p.constraints.len() {
        return Err(Error::DimensionMismatch("solution does not match problem".into()));
    }
    let primal = p.objective_value(&s.x);
    let dual: f64 = p.constraints.iter().zip(&s.y).map(|(c, y)| c.rhs * y).sum();
    let max_residual = p
        .constraint_values(&s.x)
        .iter()
        .zip(&p.constraints)
        .map(|(v, c)| (v - c.rhs).abs())
        .fold(0.0, f64::max);
    let mut primal_psd_margin = f64::INFINITY;
    for x in &s.x {
        if x.dim() > 0 {
            primal_psd_margin = primal_psd_margin.min(x.min_eigenvalue()?);
        }
    }
    let mut dual_psd_margin = f64::INFINITY;
    for z in p.dual_slack(&s.y) {
        if z.dim() > 0 {
            dual_psd_margin = dual_psd_margin.min(z.min_eigenvalue()?);
        }
    }
    let scale = 1.0 + primal.abs() + dual.abs();
    let relative_gap = (dual - primal).abs() / scale;
    Ok(VerifyReport {
        primal_objective: primal,
        dual_objective: dual,
        max_residual,
        primal_psd_margin,
        dual_psd_margin,
        relative_gap,
        weak_duality: dual >= primal - 1e-7 * scale,
    })
}

/// Summary of one solve kept in the process-wide log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub status: SolveStatus,
    pub iterations: usize,
    pub blocks: usize,
    pub rows: usize,
    pub report: VerifyReport,
}

static SOLVE_LOG: Mutex<Option<Vec<SolveRecord>>> = Mutex::new(None);

/// Start recording every solve; clears anything recorded so far.
pub fn start_solve_log() {
    *SOLVE_LOG.lock().unwrap_or_else(|e| e.into_inner()) = Some(Vec::new());
}

/// Stop recording and return the records.
pub fn take_solve_log() -> Vec<SolveRecord> {
    SOLVE_LOG.lock().unwrap_or_else(|e| e.into_inner()).take().unwrap_or_default()
}

fn record(p: &SdpProblem, s: &SdpSolution) {
    let mut guard = SOLVE_LOG.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(log) = guard.as_mut() {
        if let Ok(report) = verify(p, s) {
            log.push(SolveRecord {
                status: s.status,
                iterations: s.iterations,
                blocks: p.blocks.len(),
                rows: p.constraints.len(),
                report,
            });
        }
    }
}

/// Solve and require [`SolveStatus::Optimal`].
pub fn solve(p: &SdpProblem) -> Result<SdpSolution> {
    solve_with(p, &SdpOptions::default())
}

pub fn solve_with(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let s = solve_raw(p, opts)?;
    match s.status {
        SolveStatus::Optimal => Ok(s),
        status => Err(Error::Solver { status, iterations: s.iterations, gap: s.gap }),
    }
}

/// Run the interior-point method and return whatever it reached.
pub fn solve_raw(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let s = Ipm::new(p, opts)?.run();
    record(p, &s);
    Ok(s)
}

/// Internal form: minimize `<Ct, X>` with `Ct = -C`, rows normalized and
/// dependent rows removed, every matrix stored as a concatenated svec.
struct Ipm<'a> {
    p: &'a SdpProblem,
    opts: SdpOptions,
    off: Vec<usize>,
    /// Kept rows (normalized).
    rows: Vec<Vec<f64>>,
    /// Blocks touched by each kept row.
    support: Vec<Vec<usize>>,
    b: Vec<f64>,
    /// Original index and normalization factor of each kept row.
    origin: Vec<(usize, f64)>,
    ct: Vec<f64>,
}

impl<'a> Ipm<'a> {
    fn new(p: &'a SdpProblem, opts: &SdpOptions) -> Result<Self> {
        let off = p.offsets();
        let len = *off.last().unwrap_or(&0);
        let mut ct = vec![0.0; len];
        for (k, c) in p.objective.iter().enumerate() {
            for (t, v) in linalg::svec(c).into_iter().enumerate() {
                ct[off[k] + t] = -v;
            }
        }
        let mut rows = Vec::new();
        let mut support = Vec::new();
        let mut b = Vec::new();
        let mut origin = Vec::new();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for (l, c) in p.constraints.iter().enumerate() {
            let mut row = vec![0.0; len];
            let mut blocks = Vec::new();
            for (k, a) in &c.terms {
                for (t, v) in linalg::svec(a).into_iter().enumerate() {
                    row[off[*k] + t] += v;
                }
                if !blocks.contains(k) {
                    blocks.push(*k);
                }
            }
            let norm = dot(&row, &row).sqrt();
            if norm == 0.0 {
                debug!("dropping empty constraint row {l}");
                continue;
            }
            row.iter_mut().for_each(|v| *v /= norm);
            let mut r = row.clone();
            for _ in 0..2 {
                for q in &basis {
                    let h = dot(&r, q);
                    axpy(-h, q, &mut r);
                }
            }
            let rn = dot(&r, &r).sqrt();
            if rn <= DEPENDENT_ROW_TOL {
                debug!("dropping dependent constraint row {l}");
                continue;
            }
            r.iter_mut().for_each(|v| *v /= rn);
            basis.push(r);
            blocks.sort_unstable();
            rows.push(row);
            support.push(blocks);
            b.push(c.rhs / norm);
            origin.push((l, norm));
        }
        Ok(Self { p, opts: *opts, off, rows, support, b, origin, ct })
    }

    fn block_of(&self, v: &[f64], k: usize) -> ComplexMatrix {
        let n = self.p.blocks[k];
        linalg::smat(&v[self.off[k]..self.off[k + 1]], n).into_matrix()
    }

    fn to_vec(&self, m: &[ComplexMatrix]) -> Vec<f64> {
        let mut v = Vec::with_capacity(*self.off.last().unwrap_or(&0));
        for x in m {
            v.extend(linalg::svec(&HermitianMatrix::symmetrize(x)));
        }
        v
    }

    fn apply_a(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| dot(r, v)).collect()
    }

    fn apply_at(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ct.len()];
        for (r, &yl) in self.rows.iter().zip(y) {
            axpy(yl, r, &mut out);
        }
        out
    }

    fn run(&self) -> SdpSolution {
        let nb = self.p.blocks.len();
        let m = self.rows.len();
        let n_total: usize = self.p.blocks.iter().sum();
        let b_norm = dot(&self.b, &self.b).sqrt();
        let c_norm = dot(&self.ct, &self.ct).sqrt();

        // initial point
        let mut x: Vec<ComplexMatrix> = Vec::with_capacity(nb);
        let mut z: Vec<ComplexMatrix> = Vec::with_capacity(nb);
        for k in 0..nb {
            let n = self.p.blocks[k];
            let nf = n as f64;
            let mut xi: f64 = 10.0_f64.max(nf.sqrt());
            let mut eta: f64 = 10.0_f64.max(nf.sqrt());
            let ck = &self.ct[self.off[k]..self.off[k + 1]];
            eta = eta.max(dot(ck, ck).sqrt());
            for (r, bl) in self.rows.iter().zip(&self.b) {
                let ak = &r[self.off[k]..self.off[k + 1]];
                let an = dot(ak, ak).sqrt();
                if an > 0.0 {
                    xi = xi.max(nf * (1.0 + bl.abs()) / (1.0 + an));
                    eta = eta.max(an);
                }
            }
            x.push(ComplexMatrix::identity(n).scale(xi));
            z.push(ComplexMatrix::identity(n).scale(eta));
        }
        let mut y = vec![0.0; m];

        let mut status = SolveStatus::MaxIterations;
        let mut iterations = 0;
        let mut stalls = 0;
        let mut best: Option<(f64, Vec<ComplexMatrix>, Vec<f64>)> = None;
        let mut since_best = 0;
        loop {
            let xv = self.to_vec(&x);
            let zv = self.to_vec(&z);
            let ax = self.apply_a(&xv);
            let rp: Vec<f64> = self.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let aty = self.apply_at(&y);
            let rdv: Vec<f64> = (0..self.ct.len()).map(|t| self.ct[t] - zv[t] - aty[t]).collect();
            let pobj = dot(&self.ct, &xv);
            let dobj = dot(&self.b, &y);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let pinf = dot(&rp, &rp).sqrt() / (1.0 + b_norm);
            let dinf = dot(&rdv, &rdv).sqrt() / (1.0 + c_norm);
            let mu = dot(&xv, &zv) / n_total.max(1) as f64;
            trace!("iter {iterations}: pobj {pobj:.10e} dobj {dobj:.10e} gap {gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e} mu {mu:.2e}");

            let merit = gap.max(pinf).max(dinf);
            if best.as_ref().is_none_or(|(m, _, _)| merit < 0.9 * m) {
                best = Some((merit, x.clone(), y.clone()));
                since_best = 0;
            } else {
                if best.as_ref().is_some_and(|(m, _, _)| merit < *m) {
                    best = Some((merit, x.clone(), y.clone()));
                }
                since_best += 1;
            }
            if gap <= self.opts.gap_target && pinf <= 1e-10 && dinf <= 1e-10 {
                status = SolveStatus::Optimal;
                break;
            }
            if iterations >= self.opts.max_iterations || stalls >= 5 || since_best >= 6 {
                break;
            }
            iterations += 1;

            let zinv: Vec<ComplexMatrix> = match z.iter().map(|zk| hpd_inverse(&HermitianMatrix::symmetrize(zk))).collect::<Result<Vec<_>>>() {
                Ok(v) => v.into_iter().map(HermitianMatrix::into_matrix).collect(),
                Err(_) => {
                    status = SolveStatus::NumericallyDegenerate;
                    break;
                }
            };
            let factor = match self.normal_matrix(&x, &zinv) {
                Some(f) => f,
                None => {
                    status = SolveStatus::NumericallyDegenerate;
                    break;
                }
            };
            let rd: Vec<ComplexMatrix> = (0..nb).map(|k| self.block_of(&rdv, k)).collect();

            // predictor
            let rc_aff: Vec<ComplexMatrix> = (0..nb).map(|k| -&x[k].matmul(&z[k])).collect();
            let (dx_a, dy_a, dz_a) = self.direction(&factor, &x, &zinv, &rp, &rd, &rc_aff);
            let _ = dy_a;
            let ap = max_step(&x, &dx_a).min(1.0);
            let ad = max_step(&z, &dz_a).min(1.0);
            let mut mu_aff = 0.0;
            for k in 0..nb {
                let xa = &x[k] + &dx_a[k].scale(ap);
                let za = &z[k] + &dz_a[k].scale(ad);
                mu_aff += xa.trace_product(&za).re;
            }
            mu_aff /= n_total.max(1) as f64;
            let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

            // corrector
            let rc: Vec<ComplexMatrix> = (0..nb)
                .map(|k| {
                    let n = self.p.blocks[k];
                    let mut r = ComplexMatrix::identity(n).scale(sigma * mu);
                    r -= &x[k].matmul(&z[k]);
                    r -= &dx_a[k].matmul(&dz_a[k]);
                    r
                })
                .collect();
            let (dx, dy, dz) = self.direction(&factor, &x, &zinv, &rp, &rd, &rc);
            let tau = self.opts.step_fraction;
            let ap = (tau * max_step(&x, &dx)).min(1.0);
            let ad = (tau * max_step(&z, &dz)).min(1.0);
            if ap < 1e-10 && ad < 1e-10 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            for k in 0..nb {
                x[k] = HermitianMatrix::symmetrize(&(&x[k] + &dx[k].scale(ap))).into_matrix();
                z[k] = HermitianMatrix::symmetrize(&(&z[k] + &dz[k].scale(ad))).into_matrix();
            }
            axpy(ad, &dy, &mut y);
        }
        if let Some((_, bx, by)) = best {
            x = bx;
            y = by;
        }
        self.finish(x, y, status, iterations)
    }

    /// Cholesky factor of `M_lm = <A_l, X A_m Z^{-1}>`.
    fn normal_matrix(&self, x: &[ComplexMatrix], zinv: &[ComplexMatrix]) -> Option<Vec<f64>> {
        let m = self.rows.len();
        let g: Vec<Vec<(usize, Vec<f64>)>> = (0..m)
            .into_par_iter()
            .map(|l| {
                self.support[l]
                    .iter()
                    .map(|&k| {
                        let a = self.block_of(&self.rows[l], k);
                        let gk = x[k].matmul(&a).matmul(&zinv[k]);
                        (k, linalg::svec(&HermitianMatrix::symmetrize(&gk)))
                    })
                    .collect()
            })
            .collect();
        let mut mat = vec![0.0; m * m];
        let cols: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                (0..m)
                    .map(|i| {
                        let mut s = 0.0;
                        for (k, gv) in &g[j] {
                            if self.support[i].binary_search(k).is_ok() {
                                s += dot(&self.rows[i][self.off[*k]..self.off[*k + 1]], gv);
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        for i in 0..m {
            for j in 0..m {
                mat[i * m + j] = 0.5 * (cols[j][i] + cols[i][j]);
            }
        }
        let diag_max = (0..m).map(|i| mat[i * m + i]).fold(0.0, f64::max);
        let mut reg = 0.0;
        for _ in 0..4 {
            let mut f = mat.clone();
            for i in 0..m {
                f[i * m + i] += reg;
            }
            if linalg::real_cholesky(&mut f, m).is_ok() {
                return Some(f);
            }
            reg = if reg == 0.0 { 1e-14 * diag_max.max(1e-300) } else { reg * 100.0 };
        }
        None
    }

    #[allow(clippy::type_complexity)]
    fn direction(
        &self,
        factor: &[f64],
        x: &[ComplexMatrix],
        zinv: &[ComplexMatrix],
        rp: &[f64],
        rd: &[ComplexMatrix],
        rc: &[ComplexMatrix],
    ) -> (Vec<ComplexMatrix>, Vec<f64>, Vec<ComplexMatrix>) {
        let nb = x.len();
        let h: Vec<ComplexMatrix> = (0..nb).map(|k| (&rc[k] - &x[k].matmul(&rd[k])).matmul(&zinv[k])).collect();
        let ah = self.apply_a(&self.to_vec(&h));
        let rhs: Vec<f64> = rp.iter().zip(&ah).map(|(r, a)| r - a).collect();
        let dy = linalg::real_cholesky_solve(factor, self.rows.len(), &rhs);
        let atdy = self.apply_at(&dy);
        let dz: Vec<ComplexMatrix> = (0..nb).map(|k| &rd[k] - &self.block_of(&atdy, k)).collect();
        let dx: Vec<ComplexMatrix> = (0..nb)
            .map(|k| HermitianMatrix::symmetrize(&(&rc[k] - &x[k].matmul(&dz[k])).matmul(&zinv[k])).into_matrix())
            .collect();
        (dx, dy, dz)
    }

    fn finish(&self, x: Vec<ComplexMatrix>, y: Vec<f64>, status: SolveStatus, iterations: usize) -> SdpSolution {
        let x: Vec<HermitianMatrix> = x.iter().map(HermitianMatrix::symmetrize).collect();
        let mut y_pub = vec![0.0; self.p.constraints.len()];
        for (&(l, norm), &yl) in self.origin.iter().zip(&y) {
            y_pub[l] = -yl / norm;
        }
        let z = self.p.dual_slack(&y_pub);
        let primal = self.p.objective_value(&x);
        let dual: f64 = self.p.constraints.iter().zip(&y_pub).map(|(c, y)| c.rhs * y).sum();
        let primal_residual = self
            .p
            .constraint_values(&x)
            .iter()
            .zip(&self.p.constraints)
            .map(|(v, c)| (v - c.rhs).abs())
            .fold(0.0, f64::max);
        let gap = (dual - primal).abs() / (1.0 + primal.abs() + dual.abs());
        let status = match status {
            _ if gap <= self.opts.accept_gap && primal_residual <= self.opts.accept_residual => SolveStatus::Optimal,
            SolveStatus::Optimal => SolveStatus::MaxIterations,
            s => s,
        };
        debug!("sdp: {status:?} after {iterations} iterations, primal {primal:.10e}, dual {dual:.10e}, gap {gap:.2e}");
        SdpSolution {
            status,
            x,
            y: y_pub,
            z,
            primal_objective: primal,
            dual_objective: dual,
            gap,
            primal_residual,
            iterations,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Largest `alpha` keeping every `x_k + alpha dx_k` positive semidefinite.
fn max_step(x: &[ComplexMatrix], dx: &[ComplexMatrix]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xk, dk) in x.iter().zip(dx) {
        let n = xk.rows();
        if n == 0 {
            continue;
        }
        if n == 1 {
            let d = dk[(0, 0)].re;
            if d < 0.0 {
                alpha = alpha.min(-xk[(0, 0)].re / d);
            }
            continue;
        }
        let l = match cholesky(&HermitianMatrix::symmetrize(xk)) {
            Ok(l) => l,
            Err(_) => return 0.0,
        };
        let li = lower_inverse(&l);
        let w = HermitianMatrix::symmetrize(&li.matmul(dk).matmul(&li.adjoint()));
        let lam = herm_eig(&w).ok().and_then(|e| e.values.last().copied()).unwrap_or(0.0);
        if lam < 0.0 {
            alpha = alpha.min(-1.0 / lam);
        }
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambda_max_problem(c: HermitianMatrix) -> SdpProblem {
        let n = c.dim();
        let mut p = SdpProblem::new(vec![n]);
        p.set_objective(0, c).unwrap();
        p.add_constraint(vec![(0, HermitianMatrix::identity(n))], 1.0).unwrap();
        p
    }

    #[test]
    fn lambda_max_toy() {
        let p = lambda_max_problem(HermitianMatrix::diag(&[3.0, 1.0]));
        let s = solve(&p).unwrap();
        assert!((s.primal_objective - 3.0).abs() < 1e-9, "{}", s.primal_objective);
        assert!((s.dual_objective - 3.0).abs() < 1e-9);
        let r = verify(&p, &s).unwrap();
        assert!(r.weak_duality && r.max_residual < 1e-9 && r.primal_psd_margin > -1e-9);
    }

    #[test]
    fn fully_constrained() {
        let target = HermitianMatrix::symmetrize(&ComplexMatrix::from_real(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let mut p = SdpProblem::new(vec![2]);
        p.set_objective(0, HermitianMatrix::identity(2)).unwrap();
        for e in linalg::hermitian_basis(2) {
            let rhs = e.inner(&target);
            p.add_constraint(vec![(0, e)], rhs).unwrap();
        }
        let s = solve(&p).unwrap();
        assert!((s.primal_objective - 3.0).abs() < 1e-8);
    }

    #[test]
    fn dependent_rows_removed() {
        let mut p = lambda_max_problem(HermitianMatrix::diag(&[1.0, 2.0, -1.0]));
        p.add_constraint(vec![(0, HermitianMatrix::identity(3).scale(2.0))], 2.0).unwrap();
        let s = solve(&p).unwrap();
        assert!((s.primal_objective - 2.0).abs() < 1e-9);
        assert!(verify(&p, &s).unwrap().weak_duality);
    }

    #[test]
    fn tampered_solution_flagged() {
        let p = lambda_max_problem(HermitianMatrix::diag(&[3.0, 1.0]));
        let mut s = solve(&p).unwrap();
        s.x[0] = s.x[0].scale(-1.0);
        let r = verify(&p, &s).unwrap();
        assert!(r.primal_psd_margin < -0.9);
    }

    #[test]
    fn complex_objective() {
        let y = HermitianMatrix::symmetrize(
            &ComplexMatrix::new(2, 2, vec![linalg::ZERO, -linalg::I, linalg::I, linalg::ZERO]).unwrap(),
        );
        let s = solve(&lambda_max_problem(y)).unwrap();
        assert!((s.primal_objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn multiple_blocks_with_linking_row() {
        // max x1 + 2 x2 s.t. x1 + x2 = 1 with 1x1 blocks, plus a 2x2 block with trace 1
        let mut p = SdpProblem::new(vec![1, 1, 2]);
        p.set_objective(0, HermitianMatrix::diag(&[1.0])).unwrap();
        p.set_objective(1, HermitianMatrix::diag(&[2.0])).unwrap();
        p.set_objective(2, HermitianMatrix::diag(&[0.5, -0.5])).unwrap();
        p.add_constraint(vec![(0, HermitianMatrix::diag(&[1.0])), (1, HermitianMatrix::diag(&[1.0]))], 1.0).unwrap();
        p.add_constraint(vec![(2, HermitianMatrix::identity(2))], 1.0).unwrap();
        let s = solve(&p).unwrap();
        assert!((s.primal_objective - 2.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let p = lambda_max_problem(HermitianMatrix::diag(&[0.3, 1.7, -2.0]));
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.primal_objective, b.primal_objective);
    }
}
