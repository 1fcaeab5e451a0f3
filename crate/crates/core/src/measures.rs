//! Indistinguishability `U` and interference power `I` of two pure states
//! with respect to complete sets of orthogonal projectors, and the bound
//! `U ≥ I` that holds when the two sets commute.
//!
//! Projectors are kept as lists of sparse orthonormal spanning vectors; states
//! are dense vectors in the working space. Neither state needs to be
//! normalized: both measures divide by the norms explicitly.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::linalg;

/// Orthonormality tolerance on the Gram matrix of the spanning vectors.
pub const GRAM_TOL: f64 = 1e-12;
/// Commutator residual above which two projector sets are treated as
/// non-commuting.
pub const COMMUTATOR_TOL: f64 = 1e-10;
/// Slack in `U ≥ I − BOUND_TOL`.
pub const BOUND_TOL: f64 = 1e-10;
const PROBE_COUNT: usize = 20;
const PROBE_SEED: u64 = 0x5eed_cafe;

pub type SparseVec = Vec<(usize, Complex64)>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("state {which} has zero norm")]
    ZeroNorm { which: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("projector vectors not orthonormal (Gram error {error:.3e})")]
    NotOrthonormal { error: f64 },
    #[error("projector set incomplete: ranks sum to {rank}, space dimension {dim}")]
    Incomplete { rank: usize, dim: usize },
    #[error("index {index} outside working space of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("projector sets do not commute (residual {residual:.3e}); the bound does not apply")]
    NonCommuting { residual: f64 },
}

/// Complete set of mutually orthogonal projectors on C^dim.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    dim: usize,
    projectors: Vec<Vec<SparseVec>>,
}

impl ProjectorSet {
    pub fn new(dim: usize, projectors: Vec<Vec<SparseVec>>) -> Result<Self, MeasureError> {
        let set = Self { dim, projectors };
        set.validate()?;
        Ok(set)
    }

    /// Build from dense spanning vectors; exact zeros are dropped.
    pub fn from_dense(dim: usize, projectors: Vec<Vec<Vec<Complex64>>>) -> Result<Self, MeasureError> {
        let sparse = projectors
            .into_iter()
            .map(|p| {
                p.into_iter()
                    .map(|v| {
                        if v.len() != dim {
                            return Err(MeasureError::DimensionMismatch { expected: dim, got: v.len() });
                        }
                        Ok(v
                            .into_iter()
                            .enumerate()
                            .filter(|(_, z)| *z != Complex64::new(0.0, 0.0))
                            .collect())
                    })
                    .collect::<Result<Vec<SparseVec>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Self::new(dim, sparse)
    }

    /// Rank-1 projectors onto the standard basis vectors.
    pub fn computational(dim: usize) -> Self {
        Self {
            dim,
            projectors: (0..dim).map(|i| vec![vec![(i, Complex64::new(1.0, 0.0))]]).collect(),
        }
    }

    /// The single projector onto the whole space.
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            projectors: vec![(0..dim).map(|i| vec![(i, Complex64::new(1.0, 0.0))]).collect()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.projectors.iter().map(Vec::len).collect()
    }

    fn validate(&self) -> Result<(), MeasureError> {
        let mut buckets: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
        let mut id = 0usize;
        for p in &self.projectors {
            for v in p {
                for &(i, z) in v {
                    if i >= self.dim {
                        return Err(MeasureError::IndexOutOfRange { index: i, dim: self.dim });
                    }
                    buckets.entry(i).or_default().push((id, z));
                }
                id += 1;
            }
        }
        let rank = id;
        let mut gram: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for entries in buckets.values() {
            for &(a, za) in entries {
                for &(b, zb) in entries {
                    *gram.entry((a, b)).or_default() += za.conj() * zb;
                }
            }
        }
        let mut error: f64 = 0.0;
        for a in 0..rank {
            let d = gram.get(&(a, a)).copied().unwrap_or_default();
            error = error.max((d - Complex64::new(1.0, 0.0)).norm());
        }
        for (&(a, b), g) in &gram {
            if a != b {
                error = error.max(g.norm());
            }
        }
        if !(error < GRAM_TOL) {
            return Err(MeasureError::NotOrthonormal { error });
        }
        if rank != self.dim {
            return Err(MeasureError::Incomplete { rank, dim: self.dim });
        }
        Ok(())
    }

    fn amplitudes(&self, n: usize, psi: &[Complex64]) -> impl Iterator<Item = Complex64> + '_ {
        let psi = psi.to_vec();
        self.projectors[n]
            .iter()
            .map(move |v| v.iter().map(|&(i, z)| z.conj() * psi[i]).sum())
    }

    /// ⟨ψ|P_n|ψ⟩.
    pub fn expectation(&self, n: usize, psi: &[Complex64]) -> f64 {
        self.projectors[n]
            .iter()
            .map(|v| v.iter().map(|&(i, z)| z.conj() * psi[i]).sum::<Complex64>().norm_sqr())
            .sum()
    }

    /// ⟨a|P_n|b⟩.
    pub fn matrix_element(&self, n: usize, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        self.projectors[n]
            .iter()
            .map(|v| {
                let pa: Complex64 = v.iter().map(|&(i, z)| z.conj() * a[i]).sum();
                let pb: Complex64 = v.iter().map(|&(i, z)| z.conj() * b[i]).sum();
                pa.conj() * pb
            })
            .sum()
    }

    /// P_n ψ.
    pub fn apply(&self, n: usize, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (v, c) in self.projectors[n].iter().zip(self.amplitudes(n, psi)) {
            for &(i, z) in v {
                out[i] += z * c;
            }
        }
        out
    }

    fn is_trivial(&self) -> bool {
        self.projectors.len() == 1
    }

    fn is_diagonal(&self) -> bool {
        self.projectors.iter().flatten().all(|v| v.len() == 1)
    }

    fn supports(&self) -> Vec<Vec<usize>> {
        self.projectors
            .iter()
            .map(|p| {
                let mut s: Vec<usize> = p.iter().flatten().map(|&(i, _)| i).collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }
}

fn check_state(psi: &[Complex64], dim: usize, which: usize) -> Result<f64, MeasureError> {
    if psi.len() != dim {
        return Err(MeasureError::DimensionMismatch { expected: dim, got: psi.len() });
    }
    let n = linalg::norm_sqr(psi);
    if n == 0.0 {
        return Err(MeasureError::ZeroNorm { which });
    }
    Ok(n)
}

/// U = Σ_n √(⟨ψ₁|P_n|ψ₁⟩⟨ψ₂|P_n|ψ₂⟩ / (⟨ψ₁|ψ₁⟩⟨ψ₂|ψ₂⟩)).
pub fn indistinguishability(
    psi1: &[Complex64],
    psi2: &[Complex64],
    set: &ProjectorSet,
) -> Result<f64, MeasureError> {
    let n1 = check_state(psi1, set.dim, 1)?;
    let n2 = check_state(psi2, set.dim, 2)?;
    let total: f64 = (0..set.len())
        .map(|n| (set.expectation(n, psi1) * set.expectation(n, psi2)).sqrt())
        .sum();
    Ok(total / (n1 * n2).sqrt())
}

/// I = Σ_l |⟨ψ₁|P′_l|ψ₂⟩| / √(⟨ψ₁|ψ₁⟩⟨ψ₂|ψ₂⟩).
pub fn interference_power(
    psi1: &[Complex64],
    psi2: &[Complex64],
    set: &ProjectorSet,
) -> Result<f64, MeasureError> {
    let n1 = check_state(psi1, set.dim, 1)?;
    let n2 = check_state(psi2, set.dim, 2)?;
    let total: f64 = (0..set.len()).map(|l| set.matrix_element(l, psi1, psi2).norm()).sum();
    Ok(total / (n1 * n2).sqrt())
}

/// Largest ‖[P_n, P′_l] x‖ over a fixed set of random unit probe vectors.
pub fn commutator_residual(a: &ProjectorSet, b: &ProjectorSet) -> Result<f64, MeasureError> {
    if a.dim != b.dim {
        return Err(MeasureError::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    if a.is_trivial() || b.is_trivial() || (a.is_diagonal() && b.is_diagonal()) {
        return Ok(0.0);
    }
    let sa = a.supports();
    let sb = b.supports();
    let mut rng = ChaCha20Rng::seed_from_u64(PROBE_SEED);
    let probes: Vec<Vec<Complex64>> = (0..PROBE_COUNT)
        .map(|_| {
            let mut v = linalg::random_vector(a.dim, &mut rng);
            let n = linalg::norm_sqr(&v).sqrt();
            v.iter_mut().for_each(|z| *z /= n);
            v
        })
        .collect();
    let mut worst: f64 = 0.0;
    for x in &probes {
        let ax: Vec<Vec<Complex64>> = (0..a.len()).map(|n| a.apply(n, x)).collect();
        let bx: Vec<Vec<Complex64>> = (0..b.len()).map(|l| b.apply(l, x)).collect();
        for n in 0..a.len() {
            for l in 0..b.len() {
                if !intersects(&sa[n], &sb[l]) {
                    continue;
                }
                let abx = a.apply(n, &bx[l]);
                let bax = b.apply(l, &ax[n]);
                let r: f64 = abx.iter().zip(&bax).map(|(p, q)| (p - q).norm_sqr()).sum();
                worst = worst.max(r.sqrt());
            }
        }
    }
    Ok(worst)
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub u: f64,
    pub i: f64,
    pub holds: bool,
}

/// Evaluates both measures and checks `U ≥ I − BOUND_TOL`. Refuses when the
/// two projector sets do not commute.
pub fn verify_bound(
    psi1: &[Complex64],
    psi2: &[Complex64],
    distinguishing: &ProjectorSet,
    interfering: &ProjectorSet,
) -> Result<BoundReport, MeasureError> {
    let residual = commutator_residual(distinguishing, interfering)?;
    if !(residual < COMMUTATOR_TOL) {
        return Err(MeasureError::NonCommuting { residual });
    }
    let u = indistinguishability(psi1, psi2, distinguishing)?;
    let i = interference_power(psi1, psi2, interfering)?;
    Ok(BoundReport { u, i, holds: u >= i - BOUND_TOL })
}

/// Random pair of commuting complete projector sets: both are unions of
/// vectors of one Haar-random basis, grouped by two independent random
/// partitions.
pub fn random_commuting_sets<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> (ProjectorSet, ProjectorSet) {
    let basis = linalg::random_unitary_basis(dim, rng);
    let a = random_partition_set(&basis, rng);
    let b = random_partition_set(&basis, rng);
    (a, b)
}

fn random_partition_set<R: Rng + ?Sized>(basis: &[Vec<Complex64>], rng: &mut R) -> ProjectorSet {
    let dim = basis.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.shuffle(rng);
    let mut projectors: Vec<Vec<SparseVec>> = Vec::new();
    let mut rest = &order[..];
    while !rest.is_empty() {
        let take = rng.gen_range(1..=rest.len().min(3));
        let (head, tail) = rest.split_at(take);
        projectors.push(
            head.iter()
                .map(|&k| basis[k].iter().copied().enumerate().collect())
                .collect(),
        );
        rest = tail;
    }
    ProjectorSet { dim, projectors }
}

/// Random unnormalized state with a random overall scale.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    let scale = rng.gen_range(0.1..10.0);
    linalg::random_vector(dim, rng).into_iter().map(|z| z * scale).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub dim: usize,
    pub u: f64,
    pub i: f64,
    pub holds: bool,
}

/// Randomized check of the bound over `trials` instances with dimension in
/// `2..=max_dim`.
pub fn random_bound_sweep(trials: usize, max_dim: usize, seed: u64) -> Result<Vec<TrialRecord>, MeasureError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..trials)
        .map(|trial| {
            let dim = rng.gen_range(2..=max_dim.max(2));
            let (p, pp) = random_commuting_sets(dim, &mut rng);
            let a = random_state(dim, &mut rng);
            let b = random_state(dim, &mut rng);
            let r = verify_bound(&a, &b, &p, &pp)?;
            Ok(TrialRecord { trial, dim, u: r.u, i: r.i, holds: r.holds })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Independent evaluation of both sums from dense projector matrices.
    fn dense_projector(set: &ProjectorSet, n: usize) -> Vec<Vec<Complex64>> {
        let d = set.dim();
        let mut m = vec![vec![c(0.0, 0.0); d]; d];
        for v in &set.projectors[n] {
            let mut dense = vec![c(0.0, 0.0); d];
            for &(i, z) in v {
                dense[i] = z;
            }
            for i in 0..d {
                for j in 0..d {
                    m[i][j] += dense[i] * dense[j].conj();
                }
            }
        }
        m
    }

    fn quad(m: &[Vec<Complex64>], a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let mut s = c(0.0, 0.0);
        for i in 0..a.len() {
            for j in 0..b.len() {
                s += a[i].conj() * m[i][j] * b[j];
            }
        }
        s
    }

    #[test]
    fn phase_multiple_is_indistinguishable() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = random_state(5, &mut rng);
        let b: Vec<_> = a.iter().map(|z| z * Complex64::from_polar(2.5, 1.1)).collect();
        let (p, _) = random_commuting_sets(5, &mut rng);
        assert!((indistinguishability(&a, &b, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_support_is_distinguishable() {
        let a = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let b = vec![c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)];
        let p = ProjectorSet::computational(3);
        assert_eq!(indistinguishability(&a, &b, &p).unwrap(), 0.0);
        assert_eq!(interference_power(&a, &b, &p).unwrap(), 0.0);
    }

    #[test]
    fn identical_states_under_identity() {
        let a = vec![c(1.0, 2.0), c(-0.5, 0.0)];
        assert!((interference_power(&a, &a, &ProjectorSet::identity(2)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sums_match_dense_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let basis = linalg::random_unitary_basis(4, &mut rng);
        let rank1 = ProjectorSet::from_dense(4, basis.iter().map(|v| vec![v.clone()]).collect()).unwrap();
        let a = random_state(4, &mut rng);
        let b = random_state(4, &mut rng);
        let na = quad(&dense_projector(&ProjectorSet::identity(4), 0), &a, &a).re;
        let nb = quad(&dense_projector(&ProjectorSet::identity(4), 0), &b, &b).re;
        let mut u = 0.0;
        let mut i = 0.0;
        for n in 0..4 {
            let m = dense_projector(&rank1, n);
            u += (quad(&m, &a, &a).re * quad(&m, &b, &b).re / (na * nb)).sqrt();
            i += quad(&m, &a, &b).norm() / (na * nb).sqrt();
        }
        assert!((indistinguishability(&a, &b, &rank1).unwrap() - u).abs() < 1e-12);
        assert!((interference_power(&a, &b, &rank1).unwrap() - i).abs() < 1e-12);
    }

    #[test]
    fn equality_case() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = random_state(6, &mut rng);
        let p = ProjectorSet::computational(6);
        let r = verify_bound(&a, &a, &p, &p).unwrap();
        assert!((r.u - r.i).abs() < 1e-12 && r.holds);
    }

    #[test]
    fn rejects_bad_sets() {
        let v = vec![vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]];
        assert_eq!(
            ProjectorSet::from_dense(2, v).unwrap_err(),
            MeasureError::Incomplete { rank: 1, dim: 2 }
        );
        let s = 0.5f64.sqrt();
        let v = vec![vec![vec![c(1.0, 0.0), c(0.0, 0.0)]], vec![vec![c(s, 0.0), c(s, 0.0)]]];
        assert!(matches!(ProjectorSet::from_dense(2, v), Err(MeasureError::NotOrthonormal { .. })));
    }

    #[test]
    fn zero_state_rejected() {
        let p = ProjectorSet::computational(2);
        let z = vec![c(0.0, 0.0); 2];
        let a = vec![c(1.0, 0.0), c(0.0, 0.0)];
        assert_eq!(indistinguishability(&z, &a, &p).unwrap_err(), MeasureError::ZeroNorm { which: 1 });
    }

    #[test]
    fn non_commuting_sets_refused() {
        let s = 0.5f64.sqrt();
        let hadamard = ProjectorSet::from_dense(
            2,
            vec![vec![vec![c(s, 0.0), c(s, 0.0)]], vec![vec![c(s, 0.0), c(-s, 0.0)]]],
        )
        .unwrap();
        let a = vec![c(1.0, 0.0), c(0.3, 0.0)];
        let err = verify_bound(&a, &a, &ProjectorSet::computational(2), &hadamard).unwrap_err();
        assert!(matches!(err, MeasureError::NonCommuting { .. }));
    }

    #[test]
    fn random_sets_commute() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let (a, b) = random_commuting_sets(8, &mut rng);
        assert!(commutator_residual(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn sweep_has_no_violations() {
        let trials = random_bound_sweep(500, 16, 2024).unwrap();
        assert_eq!(trials.len(), 500);
        assert!(trials.iter().all(|t| t.holds));
    }
}
