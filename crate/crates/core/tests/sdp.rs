use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use witnesskit::algebra::ic_povm;
use witnesskit::catalog::xi_mm;
use witnesskit::compat::p_post;
use witnesskit::linalg::herm_eig;
use witnesskit::sampling::{ginibre, random_hermitian, DEFAULT_SEED};
use witnesskit::sdp::{solve, verify};
use witnesskit::witness::task_from_witness;
use witnesskit::{ComplexMatrix, DiscriminationTask, HermitianMatrix, SdpProblem};

/// Random problem with a known strictly feasible point `X0`; the trace row keeps it bounded.
fn feasible_problem(r: &mut ChaCha8Rng, blocks: &[usize], rows: usize) -> (SdpProblem, Vec<HermitianMatrix>) {
    let mut p = SdpProblem::new(blocks.to_vec());
    let x0: Vec<HermitianMatrix> = blocks
        .iter()
        .map(|&n| {
            let g = ginibre(r, n, n);
            &HermitianMatrix::symmetrize(&g.matmul(&g.adjoint())) + &HermitianMatrix::identity(n).scale(0.1)
        })
        .collect();
    for (k, &n) in blocks.iter().enumerate() {
        p.set_objective(k, random_hermitian(r, n)).unwrap();
    }
    let mut rows_terms: Vec<Vec<(usize, HermitianMatrix)>> = (0..rows)
        .map(|_| blocks.iter().enumerate().map(|(k, &n)| (k, random_hermitian(r, n))).collect())
        .collect();
    rows_terms.push(blocks.iter().enumerate().map(|(k, &n)| (k, HermitianMatrix::identity(n))).collect());
    for terms in rows_terms {
        let b: f64 = terms.iter().map(|(k, a)| a.inner(&x0[*k])).sum();
        p.add_constraint(terms, b).unwrap();
    }
    (p, x0)
}

#[test]
fn random_feasible_problems_verify() {
    let mut r = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    for (blocks, rows) in [(vec![3], 2), (vec![2, 2], 3), (vec![4, 1, 2], 5), (vec![5], 8)] {
        let (p, x0) = feasible_problem(&mut r, &blocks, rows);
        let s = solve(&p).unwrap();
        let rep = verify(&p, &s).unwrap();
        assert!(rep.weak_duality, "{rep:?}");
        assert!(rep.max_residual < 1e-8 && rep.relative_gap < 1e-7, "{rep:?}");
        assert!(rep.primal_psd_margin > -1e-9 && rep.dual_psd_margin > -1e-9, "{rep:?}");
        assert!(s.primal_objective >= p.objective_value(&x0) - 1e-8);
    }
}

#[test]
fn infeasible_problem_is_not_optimal() {
    // X >= 0 with trace -1 has no solution
    let mut p = SdpProblem::new(vec![2]);
    p.set_objective(0, HermitianMatrix::identity(2)).unwrap();
    p.add_constraint(vec![(0, HermitianMatrix::identity(2))], -1.0).unwrap();
    assert!(solve(&p).is_err());
}

/// Fixed-point iteration for `max sum_k tr(K_k P_k)` over POVMs `P`, for `K_k > 0`:
/// `P_k <- L^-1 K_k P_k K_k L^-1` with `L = (sum_k K_k P_k K_k)^(1/2)`.
/// Returns the attained value and the dual bound `tr Y + n max_k lambda_max(K_k - Y)`.
fn povm_optimum(kernels: &[ComplexMatrix], iterations: usize) -> (f64, f64) {
    let n = kernels[0].rows();
    let mut p: Vec<ComplexMatrix> = kernels.iter().map(|_| ComplexMatrix::identity(n).scale(1.0 / kernels.len() as f64)).collect();
    for _ in 0..iterations {
        let mut s = ComplexMatrix::zeros(n, n);
        let kpk: Vec<ComplexMatrix> = kernels.iter().zip(&p).map(|(k, pk)| k.matmul(pk).matmul(k)).collect();
        for m in &kpk {
            s += m;
        }
        let inv_root = herm_eig(&HermitianMatrix::symmetrize(&s)).unwrap().map(|l| 1.0 / l.sqrt());
        p = kpk.iter().map(|m| inv_root.matmul(m).matmul(&inv_root)).collect();
    }
    let value: f64 = kernels.iter().zip(&p).map(|(k, pk)| k.trace_product(pk).re).sum();
    let mut y = ComplexMatrix::zeros(n, n);
    for (k, pk) in kernels.iter().zip(&p) {
        y += &k.matmul(pk);
    }
    let y = HermitianMatrix::symmetrize(&y);
    let excess = kernels
        .iter()
        .map(|k| herm_eig(&HermitianMatrix::symmetrize(&(k - &y))).unwrap().values[0])
        .fold(f64::NEG_INFINITY, f64::max);
    (value, y.real_trace() + n as f64 * excess.max(0.0))
}

/// Kernels of the joint POVM `P(x1, x2)` for a task on `L(C^n)` with
/// measurements on `l^inf` outputs.
fn joint_kernels(t: &DiscriminationTask) -> Vec<ComplexMatrix> {
    let (x1, x2) = (t.m1().len(), t.m2().len());
    let b1 = t.branch_terms(1).unwrap();
    let b2 = t.branch_terms(2).unwrap();
    let mut out = Vec::new();
    for i in 0..x1 {
        for j in 0..x2 {
            let n = t.input().block(0);
            let mut k = ComplexMatrix::zeros(n, n);
            for (e, m) in &b1 {
                k += &e.block(0).scale(m.block(i)[(0, 0)].re);
            }
            for (e, m) in &b2 {
                k += &e.block(0).scale(m.block(j)[(0, 0)].re);
            }
            out.push(k);
        }
    }
    out
}

#[test]
fn p_post_matches_fixed_point_oracle() {
    let w = xi_mm(2).unwrap();
    let t = task_from_witness(&w, &ic_povm(w.out1()).unwrap(), &ic_povm(w.out2()).unwrap()).unwrap().task;
    let kernels = joint_kernels(&t);
    let n = 2.0;
    // shift every kernel to be positive definite; the value moves by shift * tr(I)
    let shift = 1.0 - kernels
        .iter()
        .map(|k| herm_eig(&HermitianMatrix::symmetrize(k)).unwrap().values[1])
        .fold(f64::INFINITY, f64::min);
    let shifted: Vec<ComplexMatrix> = kernels.iter().map(|k| k + &ComplexMatrix::identity(2).scale(shift)).collect();
    let (lower, upper) = povm_optimum(&shifted, 20000);
    let (lower, upper) = (lower - shift * n, upper - shift * n);
    assert!(upper - lower < 1e-6, "oracle bracket [{lower}, {upper}]");
    let sdp = p_post(&t).unwrap();
    assert!(sdp >= lower - 1e-5 && sdp <= upper + 1e-5, "sdp {sdp} vs oracle [{lower}, {upper}]");
}
