//! Seeded random states, unitaries and channels for property checks.

use rand::Rng;

use crate::algebra::{tensor_algebra, Algebra, StateFunctional};
use crate::channel::{margin, Channel, Factor};
use crate::error::Result;
use crate::linalg::{C64, ComplexMatrix, HermitianMatrix, ZERO};

/// Seed used by every sampled check unless overridden.
pub const DEFAULT_SEED: u64 = 1729;

/// Standard complex Gaussian (Box-Muller).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random::<f64>();
    let r = (-2.0 * u.ln()).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
    let t = 2.0 * std::f64::consts::PI * v;
    C64::new(r * t.cos(), r * t.sin())
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrize(&ginibre(rng, n, n))
}

/// Haar-distributed unitary from Gram-Schmidt on a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    for c in 0..d {
        let mut v = g.column(c);
        for _ in 0..2 {
            for q in &cols {
                let h: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= h * y;
                }
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        cols.push(v);
    }
    ComplexMatrix::from_fn(d, d, |r, c| cols[c][r])
}

/// Random full-rank state on a block algebra.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, a: &Algebra) -> StateFunctional {
    let blocks: Vec<ComplexMatrix> = a
        .blocks()
        .iter()
        .map(|&n| {
            let g = ginibre(rng, n, n);
            g.matmul(&g.adjoint())
        })
        .collect();
    let total: f64 = blocks.iter().map(|b| b.trace().re).sum();
    let blocks = blocks.iter().map(|b| b.scale(1.0 / total)).collect();
    StateFunctional::new(a.clone(), blocks).expect("blocks match the algebra")
}

/// Random channel: Wishart Choi blocks normalized to exact unitality.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, input: &Algebra, output: &Algebra) -> Result<Channel> {
    let raw = Channel::from_blocks(input, output, |i, j| {
        let d = input.block(i) * output.block(j);
        let g = ginibre(rng, d, d);
        HermitianMatrix::symmetrize(&g.matmul(&g.adjoint()))
    });
    raw.project_to_channel()
}

/// Margins of a random joint channel into `out1 (x) out2`.
pub fn random_compatible_pair<R: Rng + ?Sized>(
    rng: &mut R,
    input: &Algebra,
    out1: &Algebra,
    out2: &Algebra,
) -> Result<(Channel, Channel)> {
    let j = random_channel(rng, input, &tensor_algebra(out1, out2))?;
    Ok((margin(&j, Factor::First, out1, out2)?, margin(&j, Factor::Second, out1, out2)?))
}

/// Random unit vector in `C^d`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..d).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        v = vec![ZERO; d];
        v[0] = C64::new(1.0, 0.0);
    } else {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::CHANNEL_TOL;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(&mut rng, 4);
        assert!(u.adjoint().matmul(&u).max_diff(&ComplexMatrix::identity(4)) < 1e-13);
    }

    #[test]
    fn random_channels_are_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Algebra::new(vec![1, 2]).unwrap();
        let b = Algebra::new(vec![2, 1, 1]).unwrap();
        let c = random_channel(&mut rng, &a, &b).unwrap();
        assert!(c.is_channel(CHANNEL_TOL).unwrap().valid);
        let (c1, c2) = random_compatible_pair(&mut rng, &a, &b, &Algebra::full(2)).unwrap();
        assert!(c1.is_channel(CHANNEL_TOL).unwrap().valid && c2.is_channel(CHANNEL_TOL).unwrap().valid);
        let s = random_state(&mut rng, &a);
        assert!(s.check_state(1e-12).is_ok());
    }

    #[test]
    fn seeded_reproducible() {
        let a = Algebra::full(2);
        let x = random_channel(&mut ChaCha8Rng::seed_from_u64(9), &a, &a).unwrap();
        let y = random_channel(&mut ChaCha8Rng::seed_from_u64(9), &a, &a).unwrap();
        assert_eq!(x, y);
    }
}
