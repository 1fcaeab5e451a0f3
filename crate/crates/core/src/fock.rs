//! Truncated multimode bosonic Fock space.
//!
//! States are stored sparsely: a map from occupation tuples to complex
//! amplitudes, with exact zeros never stored. Tuples are themselves sparse
//! (only occupied modes are listed) so that weak many-mode coherent states,
//! whose support is dominated by the vacuum and a few low-occupation tuples,
//! stay cheap to annihilate and overlap.
//!
//! Truncation is explicit. Every constructor computes the probability mass it
//! discards and fails with [`FockError::TruncationTooSmall`] when that mass
//! reaches `tail_tol`; only then is the kept part renormalized.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Default truncation tolerance on discarded probability mass.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("truncation too small: discarded probability mass {tail:.3e} >= tolerance {tol:.3e}")]
    TruncationTooSmall { tail: f64, tol: f64 },
    #[error("non-finite amplitude parameter on mode {mode}")]
    NonFinite { mode: usize },
    #[error("occupation {n} on mode {mode} exceeds truncation n_max = {n_max}")]
    AboveTruncation { mode: usize, n: u32, n_max: u32 },
    #[error("mode count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("invalid mode grid: {0}")]
    InvalidGrid(String),
    #[error("field state has no support")]
    Empty,
}

/// Frequencies, couplings and resonance regulator of one quantized pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    frequencies: Vec<f64>,
    couplings: Vec<f64>,
    epsilon: f64,
}

impl ModeGrid {
    /// Couplings are `field_scale * sqrt(ω_k / 2)`.
    pub fn new(frequencies: Vec<f64>, field_scale: f64, epsilon: f64) -> Result<Self, FockError> {
        if frequencies.is_empty() {
            return Err(FockError::InvalidGrid("no modes".into()));
        }
        if !(field_scale > 0.0 && field_scale.is_finite()) {
            return Err(FockError::InvalidGrid(format!("field scale {field_scale} must be > 0")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(FockError::InvalidGrid(format!("epsilon {epsilon} must be > 0")));
        }
        for (k, w) in frequencies.iter().enumerate() {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(FockError::InvalidGrid(format!("frequency {w} of mode {k} must be > 0")));
            }
        }
        if frequencies.windows(2).any(|p| p[1] <= p[0]) {
            return Err(FockError::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        let couplings = frequencies.iter().map(|w| field_scale * (w / 2.0).sqrt()).collect();
        Ok(Self { frequencies, couplings, epsilon })
    }

    /// Regulator given relative to the smallest mode spacing (or to the single
    /// frequency for a one-mode grid).
    pub fn with_relative_epsilon(
        frequencies: Vec<f64>,
        field_scale: f64,
        epsilon_rel: f64,
    ) -> Result<Self, FockError> {
        let spacing = min_spacing(&frequencies);
        Self::new(frequencies, field_scale, epsilon_rel * spacing)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn min_spacing(&self) -> f64 {
        min_spacing(&self.frequencies)
    }

    /// Same grid with a different regulator.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, FockError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(FockError::InvalidGrid(format!("epsilon {epsilon} must be > 0")));
        }
        Ok(Self { epsilon, ..self.clone() })
    }
}

fn min_spacing(frequencies: &[f64]) -> f64 {
    match frequencies {
        [] => 1.0,
        [w] => w.abs(),
        _ => frequencies
            .windows(2)
            .map(|p| (p[1] - p[0]).abs())
            .fold(f64::INFINITY, f64::min),
    }
}

/// Sparse occupation tuple: `(mode, n)` pairs with `n > 0`, sorted by mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Occupation(Vec<(u32, u32)>);

impl Occupation {
    pub fn vacuum() -> Self {
        Self(Vec::new())
    }

    /// From a dense tuple `(n_1, …, n_M)`.
    pub fn from_dense(ns: &[u32]) -> Self {
        Self(
            ns.iter()
                .enumerate()
                .filter(|(_, n)| **n > 0)
                .map(|(k, n)| (k as u32, *n))
                .collect(),
        )
    }

    pub fn to_dense(&self, modes: usize) -> Vec<u32> {
        let mut out = vec![0; modes];
        for &(k, n) in &self.0 {
            out[k as usize] = n;
        }
        out
    }

    pub fn get(&self, mode: usize) -> u32 {
        match self.0.binary_search_by_key(&(mode as u32), |p| p.0) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|p| p.1).sum()
    }

    pub fn occupied(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|&(k, n)| (k as usize, n))
    }

    /// Copy with `mode` lowered by one. Caller guarantees `get(mode) > 0`.
    fn lowered(&self, mode: usize) -> Self {
        let mut v = self.0.clone();
        let i = v
            .binary_search_by_key(&(mode as u32), |p| p.0)
            .expect("lowering an empty mode");
        if v[i].1 == 1 {
            v.remove(i);
        } else {
            v[i].1 -= 1;
        }
        Self(v)
    }

    fn joined(&self, other: &Occupation, offset: u32) -> Self {
        let mut v = self.0.clone();
        v.extend(other.0.iter().map(|&(k, n)| (k + offset, n)));
        Self(v)
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, (k, n)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}@{k}")?;
        }
        write!(f, "⟩")
    }
}

/// Single-mode factor used by [`FieldState::product`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeState {
    Coherent(Complex64),
    Fock(u32),
    /// Even coherent state (|α⟩ + |−α⟩), real α.
    Even(f64),
    /// Odd coherent state (|α⟩ − |−α⟩), real α.
    Odd(f64),
}

impl ModeState {
    pub fn vacuum() -> Self {
        ModeState::Fock(0)
    }

    pub fn is_coherent(&self) -> bool {
        matches!(self, ModeState::Coherent(_) | ModeState::Fock(0))
    }

    /// Exact (untruncated) amplitudes for `n = 0..=n_max`.
    pub fn amplitudes(&self, mode: usize, n_max: u32) -> Result<Vec<Complex64>, FockError> {
        match *self {
            ModeState::Coherent(alpha) => {
                if !(alpha.re.is_finite() && alpha.im.is_finite()) {
                    return Err(FockError::NonFinite { mode });
                }
                Ok(poisson_amplitudes(alpha, n_max))
            }
            ModeState::Fock(n) => {
                if n > n_max {
                    return Err(FockError::AboveTruncation { mode, n, n_max });
                }
                let mut v = vec![Complex64::new(0.0, 0.0); n_max as usize + 1];
                v[n as usize] = Complex64::new(1.0, 0.0);
                Ok(v)
            }
            ModeState::Even(alpha) | ModeState::Odd(alpha) => {
                if !alpha.is_finite() {
                    return Err(FockError::NonFinite { mode });
                }
                let even = matches!(self, ModeState::Even(_));
                let overlap = (-2.0 * alpha * alpha).exp();
                let denom = if even { 1.0 + overlap } else { 1.0 - overlap };
                if denom <= 0.0 {
                    // odd cat state with α = 0 is the zero vector
                    return Err(FockError::Empty);
                }
                let norm = (2.0 * denom).sqrt().recip();
                let base = poisson_amplitudes(Complex64::new(alpha, 0.0), n_max);
                Ok(base
                    .into_iter()
                    .enumerate()
                    .map(|(n, a)| {
                        if (n % 2 == 0) == even {
                            a * (2.0 * norm)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect())
            }
        }
    }
}

/// α^n e^{-|α|²/2} / √(n!) for n = 0..=n_max.
fn poisson_amplitudes(alpha: Complex64, n_max: u32) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(n_max as usize + 1);
    let mut a = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    v.push(a);
    for n in 1..=n_max {
        a = a * alpha / (n as f64).sqrt();
        v.push(a);
    }
    v
}

/// Truncated multimode photon state.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    modes: usize,
    n_max: u32,
    amps: BTreeMap<Occupation, Complex64>,
}

impl FieldState {
    /// The zero vector (not a physical state; produced by annihilating vacuum).
    pub fn zero(modes: usize, n_max: u32) -> Self {
        Self { modes, n_max, amps: BTreeMap::new() }
    }

    pub fn vacuum(modes: usize, n_max: u32) -> Self {
        let mut s = Self::zero(modes, n_max);
        s.amps.insert(Occupation::vacuum(), Complex64::new(1.0, 0.0));
        s
    }

    /// Build from explicit `(dense occupation, amplitude)` pairs. Not
    /// normalized.
    pub fn from_amplitudes<I>(modes: usize, n_max: u32, entries: I) -> Result<Self, FockError>
    where
        I: IntoIterator<Item = (Vec<u32>, Complex64)>,
    {
        let mut s = Self::zero(modes, n_max);
        for (ns, a) in entries {
            if ns.len() != modes {
                return Err(FockError::DimensionMismatch { left: modes, right: ns.len() });
            }
            for (k, &n) in ns.iter().enumerate() {
                if n > n_max {
                    return Err(FockError::AboveTruncation { mode: k, n, n_max });
                }
            }
            s.accumulate(Occupation::from_dense(&ns), a);
        }
        Ok(s)
    }

    /// Product of per-mode coherent states, renormalized after truncation.
    pub fn coherent(alphas: &[Complex64], n_max: u32, tail_tol: f64) -> Result<Self, FockError> {
        let factors: Vec<_> = alphas.iter().map(|&a| ModeState::Coherent(a)).collect();
        Self::product(&factors, n_max, None, tail_tol)
    }

    /// Number state `|n_1, …, n_M⟩` (norm exactly 1).
    pub fn fock(ns: &[u32], n_max: u32) -> Result<Self, FockError> {
        for (k, &n) in ns.iter().enumerate() {
            if n > n_max {
                return Err(FockError::AboveTruncation { mode: k, n, n_max });
            }
        }
        let mut s = Self::zero(ns.len(), n_max);
        s.amps.insert(Occupation::from_dense(ns), Complex64::new(1.0, 0.0));
        Ok(s)
    }

    /// Even coherent state on `mode`, vacuum elsewhere.
    pub fn even_coherent(alpha: f64, mode: usize, modes: usize, n_max: u32, tail_tol: f64) -> Result<Self, FockError> {
        Self::single_mode_family(ModeState::Even(alpha), mode, modes, n_max, tail_tol)
    }

    /// Odd coherent state on `mode`, vacuum elsewhere.
    pub fn odd_coherent(alpha: f64, mode: usize, modes: usize, n_max: u32, tail_tol: f64) -> Result<Self, FockError> {
        Self::single_mode_family(ModeState::Odd(alpha), mode, modes, n_max, tail_tol)
    }

    fn single_mode_family(
        state: ModeState,
        mode: usize,
        modes: usize,
        n_max: u32,
        tail_tol: f64,
    ) -> Result<Self, FockError> {
        if mode >= modes {
            return Err(FockError::ModeOutOfRange { mode, modes });
        }
        let mut factors = vec![ModeState::vacuum(); modes];
        factors[mode] = state;
        Self::product(&factors, n_max, None, tail_tol)
    }

    /// Tensor product of single-mode factors.
    ///
    /// Tuples above `n_max` on any mode, or with total photon number above
    /// `max_total` when given, are discarded. The discarded mass (computed from
    /// the exact factor amplitudes) must stay below `tail_tol`.
    pub fn product(
        factors: &[ModeState],
        n_max: u32,
        max_total: Option<u32>,
        tail_tol: f64,
    ) -> Result<Self, FockError> {
        let per_mode: Vec<Vec<Complex64>> = factors
            .iter()
            .enumerate()
            .map(|(k, f)| f.amplitudes(k, n_max))
            .collect::<Result<_, _>>()?;
        let cap = max_total.unwrap_or(u32::MAX);
        let mut s = Self::zero(factors.len(), n_max);
        let mut stack: Vec<(u32, u32)> = Vec::new();
        enumerate_product(&per_mode, 0, cap, Complex64::new(1.0, 0.0), &mut stack, &mut s.amps);
        let kept = s.norm_sqr();
        let tail = 1.0 - kept;
        if !(tail < tail_tol) {
            return Err(FockError::TruncationTooSmall { tail, tol: tail_tol });
        }
        if kept == 0.0 {
            return Err(FockError::Empty);
        }
        Ok(s.scaled(Complex64::new(kept.sqrt().recip(), 0.0)))
    }

    /// Smallest uniform truncation `n_max` (and total-photon cap equal to it)
    /// for which a product of coherent states meets `tail_tol`.
    pub fn coherent_auto(alphas: &[Complex64], tail_tol: f64, limit: u32) -> Result<Self, FockError> {
        let factors: Vec<_> = alphas.iter().map(|&a| ModeState::Coherent(a)).collect();
        Self::product_auto(&factors, tail_tol, limit)
    }

    /// Like [`FieldState::product`], scanning `n = 1..=limit` for the smallest
    /// common per-mode truncation and total cap that meet `tail_tol`.
    pub fn product_auto(factors: &[ModeState], tail_tol: f64, limit: u32) -> Result<Self, FockError> {
        // Number-state factors fix a floor that the cap must accommodate.
        let floor: u32 = factors
            .iter()
            .map(|f| if let ModeState::Fock(n) = f { *n } else { 0 })
            .sum();
        let mut last = FockError::Empty;
        for n in 1..=limit {
            let cap = n.max(floor);
            match Self::product(factors, cap, Some(cap), tail_tol) {
                Ok(s) => return Ok(s),
                Err(e @ FockError::TruncationTooSmall { .. }) => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    pub fn mode_count(&self) -> usize {
        self.modes
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Number of stored (nonzero) tuples.
    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amps.iter()
    }

    pub fn amplitude(&self, occ: &Occupation) -> Complex64 {
        self.amps.get(occ).copied().unwrap_or_default()
    }

    pub fn amplitude_dense(&self, ns: &[u32]) -> Complex64 {
        self.amplitude(&Occupation::from_dense(ns))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn accumulate(&mut self, occ: Occupation, a: Complex64) {
        if a == Complex64::new(0.0, 0.0) {
            return;
        }
        match self.amps.entry(occ) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += a;
                if *e.get() == Complex64::new(0.0, 0.0) {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(a);
            }
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        if c == Complex64::new(0.0, 0.0) {
            return Self::zero(self.modes, self.n_max);
        }
        Self {
            modes: self.modes,
            n_max: self.n_max,
            amps: self.amps.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: Complex64, other: &FieldState) -> Result<Self, FockError> {
        self.check_modes(other)?;
        let mut out = self.clone();
        out.n_max = self.n_max.max(other.n_max);
        for (k, v) in &other.amps {
            out.accumulate(k.clone(), v * c);
        }
        Ok(out)
    }

    /// â_mode applied linearly: â|…,n,…⟩ = √n |…,n−1,…⟩. Vacuum maps to zero.
    pub fn annihilate(&self, mode: usize) -> Result<Self, FockError> {
        if mode >= self.modes {
            return Err(FockError::ModeOutOfRange { mode, modes: self.modes });
        }
        let mut out = Self::zero(self.modes, self.n_max);
        for (occ, a) in &self.amps {
            let n = occ.get(mode);
            if n > 0 {
                out.accumulate(occ.lowered(mode), a * (n as f64).sqrt());
            }
        }
        Ok(out)
    }

    /// Σ_k c_k â_k applied to the state.
    pub fn annihilate_weighted(&self, weights: &[Complex64]) -> Result<Self, FockError> {
        if weights.len() != self.modes {
            return Err(FockError::DimensionMismatch { left: self.modes, right: weights.len() });
        }
        let mut out = Self::zero(self.modes, self.n_max);
        for (occ, a) in &self.amps {
            for (k, n) in occ.occupied() {
                let w = weights[k];
                if w != Complex64::new(0.0, 0.0) {
                    out.accumulate(occ.lowered(k), a * w * (n as f64).sqrt());
                }
            }
        }
        Ok(out)
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn overlap(&self, other: &FieldState) -> Result<Complex64, FockError> {
        self.check_modes(other)?;
        let (small, large, flip) = if self.amps.len() <= other.amps.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in &small.amps {
            if let Some(b) = large.amps.get(k) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        Ok(acc)
    }

    /// Marginal photon-number distribution of one mode, normalized by the
    /// state norm. Index n holds P(n) for n = 0..=n_max.
    pub fn number_distribution(&self, mode: usize) -> Result<Vec<f64>, FockError> {
        if mode >= self.modes {
            return Err(FockError::ModeOutOfRange { mode, modes: self.modes });
        }
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return Err(FockError::Empty);
        }
        let mut p = vec![0.0; self.n_max as usize + 1];
        for (occ, a) in &self.amps {
            p[occ.get(mode) as usize] += a.norm_sqr();
        }
        p.iter_mut().for_each(|x| *x /= norm);
        Ok(p)
    }

    /// ⟨â_mode⟩ / ⟨ψ|ψ⟩.
    pub fn mean_field(&self, mode: usize) -> Result<Complex64, FockError> {
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return Err(FockError::Empty);
        }
        Ok(self.overlap(&self.annihilate(mode)?)? / norm)
    }

    /// Applies exp(i Σ_k φ_k n̂_k), the rotation â_k → e^{iφ_k} â_k.
    pub fn rotate_phases(&self, phases: &[f64]) -> Result<Self, FockError> {
        if phases.len() != self.modes {
            return Err(FockError::DimensionMismatch { left: self.modes, right: phases.len() });
        }
        let amps = self
            .amps
            .iter()
            .map(|(occ, a)| {
                let phi: f64 = occ.occupied().map(|(k, n)| phases[k] * n as f64).sum();
                (occ.clone(), a * Complex64::from_polar(1.0, phi))
            })
            .collect();
        Ok(Self { modes: self.modes, n_max: self.n_max, amps })
    }

    /// Tensor product `self ⊗ other`; modes of `other` follow those of `self`.
    pub fn kron(&self, other: &FieldState) -> Self {
        let mut out = Self::zero(self.modes + other.modes, self.n_max.max(other.n_max));
        for (ka, a) in &self.amps {
            for (kb, b) in &other.amps {
                out.accumulate(ka.joined(kb, self.modes as u32), a * b);
            }
        }
        out
    }

    fn check_modes(&self, other: &FieldState) -> Result<(), FockError> {
        if self.modes != other.modes {
            return Err(FockError::DimensionMismatch { left: self.modes, right: other.modes });
        }
        Ok(())
    }
}

fn enumerate_product(
    per_mode: &[Vec<Complex64>],
    mode: usize,
    budget: u32,
    amp: Complex64,
    stack: &mut Vec<(u32, u32)>,
    out: &mut BTreeMap<Occupation, Complex64>,
) {
    if mode == per_mode.len() {
        if amp != Complex64::new(0.0, 0.0) {
            out.insert(Occupation(stack.clone()), amp);
        }
        return;
    }
    for (n, a) in per_mode[mode].iter().enumerate() {
        let n = n as u32;
        if n > budget {
            break;
        }
        if *a == Complex64::new(0.0, 0.0) {
            continue;
        }
        if n > 0 {
            stack.push((mode as u32, n));
        }
        enumerate_product(per_mode, mode + 1, budget - n, amp * a, stack, out);
        if n > 0 {
            stack.pop();
        }
    }
}
