//! Concrete witnesses, measurements and channels built from a pair of
//! mutually unbiased bases and from optimal approximate cloning.

use std::f64::consts::PI;

use crate::algebra::{Algebra, AlgebraElement, Measurement, StateFunctional};
use crate::channel::{depolarizing, from_measurement, measure_and_prepare, Channel, Factor};
use crate::compat::{check_compatibility, Decision};
use crate::error::{Error, Result};
use crate::linalg::{herm_eig, kron, C64, ComplexMatrix, HermitianMatrix, ONE, ZERO};
use crate::witness::{lift_witness, WitnessForm};

/// Computational basis `e` and Fourier basis `f` of `C^d`, stored as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct MubPair {
    pub d: usize,
    pub e: ComplexMatrix,
    pub f: ComplexMatrix,
}

impl MubPair {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        let s = 1.0 / (d as f64).sqrt();
        let f = ComplexMatrix::from_fn(d, d, |y, x| C64::from_polar(s, 2.0 * PI * (x * y) as f64 / d as f64));
        Ok(Self { d, e: ComplexMatrix::identity(d), f })
    }

    /// Largest deviation of `|<e_x|f_y>|^2` from `1/d`.
    pub fn unbiasedness_error(&self) -> f64 {
        let g = self.e.adjoint().matmul(&self.f);
        let target = 1.0 / self.d as f64;
        g.as_slice().iter().map(|z| (z.norm_sqr() - target).abs()).fold(0.0, f64::max)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension must be at least 2, got {d}")));
    }
    Ok(())
}

fn check_basis(b: &ComplexMatrix, d: usize) -> Result<()> {
    if b.rows() != d || b.cols() != d {
        return Err(Error::DimensionMismatch(format!("basis must be {d}x{d}")));
    }
    if b.adjoint().matmul(b).max_diff(&ComplexMatrix::identity(d)) > 1e-10 {
        return Err(Error::InvalidInput("basis is not orthonormal".into()));
    }
    Ok(())
}

/// `gamma(d) = (sqrt d + 2) / (2 (sqrt d + 1))`.
pub fn gamma_threshold(d: usize) -> f64 {
    let s = (d as f64).sqrt();
    (s + 2.0) / (2.0 * (s + 1.0))
}

fn rank_one_state(d: usize, v: &[C64], weight: f64) -> StateFunctional {
    StateFunctional::new(Algebra::full(d), vec![ComplexMatrix::projector(v).scale(weight)]).expect("single block")
}

/// The measurement-measurement witness built from the Fourier MUB pair.
pub fn xi_mm(d: usize) -> Result<WitnessForm> {
    let mub = MubPair::new(d)?;
    let s = (d as f64).sqrt();
    let w = 1.0 / (2.0 * d as f64);
    let x = Algebra::abelian(d);
    let terms = |basis: &ComplexMatrix| -> Vec<(StateFunctional, AlgebraElement)> {
        (0..d).map(|k| (rank_one_state(d, &basis.column(k), w), AlgebraElement::delta(&x, k))).collect()
    };
    WitnessForm::new(Algebra::full(d), x.clone(), x.clone(), s * (s + 1.0) / (2.0 * d as f64), terms(&mub.e), terms(&mub.f))
}

/// `M(x) = gamma |e_x><e_x| + (1 - gamma) I/d` and the Fourier analogue `N`.
pub fn noisy_mub_measurements(d: usize, gamma: f64) -> Result<(Measurement, Measurement)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let mub = MubPair::new(d)?;
    let alg = Algebra::full(d);
    let build = |basis: &ComplexMatrix| {
        let effects = (0..d)
            .map(|k| {
                let m = &ComplexMatrix::projector(&basis.column(k)).scale(gamma)
                    + &ComplexMatrix::identity(d).scale((1.0 - gamma) / d as f64);
                AlgebraElement::new(alg.clone(), vec![m])
            })
            .collect::<Result<Vec<_>>>()?;
        Measurement::unlabeled(alg.clone(), effects)
    };
    Ok((build(&mub.e)?, build(&mub.f)?))
}

/// Measure-and-prepare channel `a -> sum_x <a, M(x)> |b_x><b_x|`.
pub fn measure_prepare_basis(m: &Measurement, basis: &ComplexMatrix) -> Result<Channel> {
    let d = basis.rows();
    if basis.cols() != m.len() {
        return Err(Error::DimensionMismatch("one basis vector per outcome required".into()));
    }
    let prep: Vec<StateFunctional> = (0..m.len()).map(|x| rank_one_state(d, &basis.column(x), 1.0)).collect();
    measure_and_prepare(m, &prep)
}

/// `xi_mm` with its second slot composed with the projective measurement onto `h`.
pub fn xi_mc(d: usize, h: &ComplexMatrix) -> Result<WitnessForm> {
    check_basis(h, d)?;
    lift_witness(&xi_mm(d)?, &Measurement::basis(h)?, Factor::Second)
}

/// Both slots lifted (first with `g`, second with `h`) and rescaled by `2d`.
pub fn xi_cc(d: usize, g: &ComplexMatrix, h: &ComplexMatrix) -> Result<WitnessForm> {
    check_basis(g, d)?;
    let mc = xi_mc(d, h)?;
    Ok(lift_witness(&mc, &Measurement::basis(g)?, Factor::First)?.scale(2.0 * d as f64))
}

/// `d(d+1) - Tr[Theta + Lambda]`, with the linear-map trace written in the
/// columns of `basis` (computational basis if `None`).
pub fn xi_cc_clone(d: usize, basis: Option<&ComplexMatrix>) -> Result<WitnessForm> {
    check_dim(d)?;
    let u = match basis {
        Some(b) => {
            check_basis(b, d)?;
            b.clone()
        }
        None => ComplexMatrix::identity(d),
    };
    // sum_xy <e_x|Phi(|e_x><e_y|)|e_y> = sum_ij tr(K choi) with K = sum_xy (|e_x><e_y|)^T (x) |e_y><e_x|
    let mut k = ComplexMatrix::zeros(d * d, d * d);
    for x in 0..d {
        for y in 0..d {
            let exy = ComplexMatrix::outer(&u.column(x), &u.column(y));
            k += &kron(&exy.transpose(), &exy.adjoint());
        }
    }
    let k = vec![HermitianMatrix::symmetrize(&k)];
    let a = Algebra::full(d);
    WitnessForm::from_kernels(&a, &a, &a, (d * (d + 1)) as f64, &k, &k)
}

/// Both margins of the optimal symmetric `1 -> 2` cloner: depolarizing with `gamma(d^2)`.
pub fn cloning_margins(d: usize) -> Result<(Channel, Channel)> {
    check_dim(d)?;
    let c = depolarizing(d, gamma_threshold(d * d));
    Ok((c.clone(), c))
}

/// `(1 + eps) Theta0 - eps tr(.) I/d`, i.e. depolarizing with `(1 + eps) gamma(d^2)`.
pub fn perturbed_cloning_margins(d: usize, eps: f64) -> Result<(Channel, Channel)> {
    check_dim(d)?;
    let c = depolarizing(d, (1.0 + eps) * gamma_threshold(d * d));
    Ok((c.clone(), c))
}

/// `E = (F (x) I)(I (x) |w><w|)(F (x) I) + I (x) |w><w|` on `(C^d)^{(x)3}` and its
/// spectrum in descending order.
pub fn cloning_test_operator(d: usize) -> Result<(HermitianMatrix, Vec<f64>)> {
    check_dim(d)?;
    let mut omega = vec![ZERO; d * d];
    let s = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        omega[k * d + k] = C64::new(s, 0.0);
    }
    let pw = kron(&ComplexMatrix::identity(d), &ComplexMatrix::projector(&omega));
    let flip = ComplexMatrix::from_fn(d * d, d * d, |r, c| if r == (c % d) * d + c / d { ONE } else { ZERO });
    let f1 = kron(&flip, &ComplexMatrix::identity(d));
    let e = HermitianMatrix::symmetrize(&(&f1.matmul(&pw).matmul(&f1) + &pw));
    let spectrum = herm_eig(&e)?.values;
    Ok((e, spectrum))
}

/// Trace of a channel `L(C^d) -> L(C^d)` as a linear map.
pub fn linear_trace(c: &Channel) -> Result<f64> {
    c.linear_trace()
}

/// Random orthonormal basis, for basis-independence checks.
pub fn random_basis<R: rand::Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    crate::sampling::random_unitary(rng, d)
}

/// Sum over `x` of `|<e_x|g_x>|^2 + |<f_x|h_x>|^2` for the Fourier pair.
pub fn overlap_sum(d: usize, g: &ComplexMatrix, h: &ComplexMatrix) -> Result<f64> {
    let mub = MubPair::new(d)?;
    let ov = |a: &ComplexMatrix, b: &ComplexMatrix, x: usize| -> f64 {
        a.column(x).iter().zip(b.column(x)).map(|(p, q)| p.conj() * q).sum::<C64>().norm_sqr()
    };
    Ok((0..d).map(|x| ov(&mub.e, g, x) + ov(&mub.f, h, x)).sum())
}

/// Closed form of `xi_cc(Theta0, Lambda0)`.
pub fn xi_cc_at_cloning_closed_form(d: usize, g: &ComplexMatrix, h: &ComplexMatrix) -> Result<f64> {
    let s = (d as f64).sqrt();
    Ok((s + 2.0) * (s - 1.0) + gamma_threshold(d * d) * (2.0 - overlap_sum(d, g, h)?))
}

/// Closed form of `xi~_cc(Theta_M0, Lambda_N0)`.
pub fn xi_cc_clone_at_mub_closed_form(d: usize, g: &ComplexMatrix, h: &ComplexMatrix) -> Result<f64> {
    let df = d as f64;
    Ok((df + 2.0) * (df - 1.0) + gamma_threshold(d) * (2.0 - overlap_sum(d, g, h)?))
}

/// The pair `(Theta_M0, Lambda_N0)` preparing `g` and `h` after the noisy MUB measurements at `gamma(d)`.
pub fn mub_measure_prepare_pair(d: usize, g: &ComplexMatrix, h: &ComplexMatrix) -> Result<(Channel, Channel)> {
    let (m0, n0) = noisy_mub_measurements(d, gamma_threshold(d))?;
    Ok((measure_prepare_basis(&m0, g)?, measure_prepare_basis(&n0, h)?))
}

/// One probe of the noisy MUB compatibility boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaProbe {
    pub gamma: f64,
    pub slack: f64,
    pub decision: Decision,
}

/// Bisection on `gamma` for the compatibility of the noisy MUB measurement channels.
///
/// `lo` must be on the compatible side and `hi` on the incompatible side;
/// inconclusive probes count as incompatible. Returns every probe and the
/// final midpoint estimate.
pub fn bisect_gamma(d: usize, lo: f64, hi: f64, steps: usize) -> Result<(Vec<GammaProbe>, f64)> {
    let probe = |g: f64| -> Result<GammaProbe> {
        let (m, n) = noisy_mub_measurements(d, g)?;
        let v = check_compatibility(&from_measurement(&m), &from_measurement(&n))?;
        Ok(GammaProbe { gamma: g, slack: v.slack, decision: v.decision })
    };
    let mut probes = Vec::new();
    if lo >= hi {
        probes.push(probe(lo)?);
        return Ok((probes, lo));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..steps {
        let mid = 0.5 * (a + b);
        let p = probe(mid)?;
        if p.decision == Decision::Compatible {
            a = mid;
        } else {
            b = mid;
        }
        probes.push(p);
    }
    Ok((probes, 0.5 * (a + b)))
}

/// Eigenvalues of `E` grouped as `(value, multiplicity)` within `tol`.
pub fn group_spectrum(spectrum: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in spectrum {
        match out.last_mut() {
            Some((u, n)) if (*u - v).abs() <= tol => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}
