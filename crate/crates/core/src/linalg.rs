//! Small dense complex helpers shared by the measures, the quantum pulse
//! matching and the collision generator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Standard complex Gaussian sample (unit variance per component, Box–Muller).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    Complex64::new(r * t.cos(), r * t.sin())
}

pub fn random_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    (0..dim).map(|_| gaussian(rng)).collect()
}

/// Orthonormal basis of C^dim drawn from the Haar measure (Gram–Schmidt on
/// Gaussian columns, done twice for stability).
pub fn random_unitary_basis<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v = random_vector(dim, rng);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm_sqr(&v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

/// Minimum-norm solution of `m x = b` for a full-row-rank `m` (rows ≤ cols),
/// x = m† (m m†)⁻¹ b. Returns `None` when the system is rank deficient.
pub fn solve_min_norm(rows: &[Vec<Complex64>], rhs: &[Complex64]) -> Option<Vec<Complex64>> {
    let r = rows.len();
    let c = rows.first()?.len();
    if r > c || rhs.len() != r {
        return None;
    }
    let m = DMatrix::from_fn(r, c, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let x = if r == c {
        m.lu().solve(&b)?
    } else {
        let mh = m.adjoint();
        let y = (&m * &mh).lu().solve(&b)?;
        mh * y
    };
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}
