//! Three-level molecule with a discretized dissociative continuum.
//!
//! Levels E0 < E1 < E2 lie below the continuum grid. Each arrangement
//! channel `q` carries, for every grid energy, the bound–free dipoles
//! D_j(E, q) = ⟨E, q⁻|d̂|E_j⟩ for j = 1, 2. Degeneracy labels are folded into
//! the channel list; channels that should be reported together share a
//! `group` name.

use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance used to match an energy to a continuum grid point.
const GRID_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoleculeError {
    #[error("levels must satisfy E0 < E1 < E2 < min continuum energy (got {0})")]
    LevelOrder(String),
    #[error("invalid continuum: {0}")]
    Continuum(String),
    #[error("energy {0} is not on the continuum grid")]
    OffGrid(f64),
    #[error("channel index {index} out of range ({count} channels)")]
    ChannelOutOfRange { index: usize, count: usize },
    #[error("bound level index {0} must be 1 or 2")]
    LevelIndex(usize),
    #[error("channel '{name}' has {got} dipole entries, expected {expected}")]
    DipoleLength { name: String, got: usize, expected: usize },
    #[error("non-finite dipole in {0}")]
    NonFinite(String),
}

/// One arrangement channel with its bound–free dipoles on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub group: String,
    /// `dipoles[i] = [D_1(E_i), D_2(E_i)]`.
    pub dipoles: Vec<[Complex64; 2]>,
}

/// Smooth dipole profile D_j(E) = m_j exp(i(φ_j + s_j (E − E_start))).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleProfile {
    pub magnitude: [f64; 2],
    pub phase: [f64; 2],
    pub phase_slope: [f64; 2],
}

impl Channel {
    pub fn from_profile(name: &str, group: &str, continuum: &[f64], profile: DipoleProfile) -> Self {
        let start = continuum.first().copied().unwrap_or(0.0);
        let dipoles = continuum
            .iter()
            .map(|&e| {
                let d = |j: usize| {
                    Complex64::from_polar(
                        profile.magnitude[j],
                        profile.phase[j] + profile.phase_slope[j] * (e - start),
                    )
                };
                [d(0), d(1)]
            })
            .collect();
        Self { name: name.into(), group: group.into(), dipoles }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeModel {
    levels: [f64; 3],
    d10: Complex64,
    d20: Complex64,
    continuum: Vec<f64>,
    delta_e: f64,
    channels: Vec<Channel>,
}

/// `n` equally spaced energies starting at `start`.
pub fn uniform_grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

/// ω_ab = (E_a − E_b)/ħ with ħ = 1.
pub fn transition_frequency(e_a: f64, e_b: f64) -> f64 {
    e_a - e_b
}

impl MoleculeModel {
    pub fn new(
        levels: [f64; 3],
        d10: Complex64,
        d20: Complex64,
        continuum: Vec<f64>,
        delta_e: f64,
        channels: Vec<Channel>,
    ) -> Result<Self, MoleculeError> {
        if continuum.is_empty() {
            return Err(MoleculeError::Continuum("no energies".into()));
        }
        if !(delta_e > 0.0 && delta_e.is_finite()) {
            return Err(MoleculeError::Continuum(format!("ΔE = {delta_e} must be > 0")));
        }
        if continuum.iter().any(|e| !e.is_finite()) || continuum.windows(2).any(|p| p[1] <= p[0]) {
            return Err(MoleculeError::Continuum("energies must be finite and strictly increasing".into()));
        }
        let [e0, e1, e2] = levels;
        if !(e0 < e1 && e1 < e2 && e2 < continuum[0]) {
            return Err(MoleculeError::LevelOrder(format!(
                "E0={e0}, E1={e1}, E2={e2}, E_min={}",
                continuum[0]
            )));
        }
        if channels.is_empty() {
            return Err(MoleculeError::Continuum("no channels".into()));
        }
        for (name, d) in [("d10", d10), ("d20", d20)] {
            if !(d.re.is_finite() && d.im.is_finite()) {
                return Err(MoleculeError::NonFinite(name.into()));
            }
        }
        for ch in &channels {
            if ch.dipoles.len() != continuum.len() {
                return Err(MoleculeError::DipoleLength {
                    name: ch.name.clone(),
                    got: ch.dipoles.len(),
                    expected: continuum.len(),
                });
            }
            if ch.dipoles.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(MoleculeError::NonFinite(format!("channel '{}'", ch.name)));
            }
        }
        Ok(Self { levels, d10, d20, continuum, delta_e, channels })
    }

    /// Energy of level 0, 1 or 2.
    pub fn level(&self, j: usize) -> f64 {
        self.levels[j]
    }

    pub fn levels(&self) -> [f64; 3] {
        self.levels
    }

    /// d_{j0} = ⟨E_j|d̂|E_0⟩.
    pub fn d_bound(&self, j: usize) -> Result<Complex64, MoleculeError> {
        match j {
            1 => Ok(self.d10),
            2 => Ok(self.d20),
            _ => Err(MoleculeError::LevelIndex(j)),
        }
    }

    pub fn continuum(&self) -> &[f64] {
        &self.continuum
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Distinct group names in order of first appearance.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for ch in &self.channels {
            if !out.contains(&ch.group) {
                out.push(ch.group.clone());
            }
        }
        out
    }

    pub fn energy_index(&self, e: f64) -> Result<usize, MoleculeError> {
        let tol = GRID_MATCH_TOL * e.abs().max(1.0);
        let i = self.continuum.partition_point(|&x| x < e - tol);
        match self.continuum.get(i) {
            Some(&x) if (x - e).abs() <= tol => Ok(i),
            _ => Err(MoleculeError::OffGrid(e)),
        }
    }

    fn channel(&self, q: usize) -> Result<&Channel, MoleculeError> {
        self.channels
            .get(q)
            .ok_or(MoleculeError::ChannelOutOfRange { index: q, count: self.channels.len() })
    }

    /// D_j(E_i, q) by grid index.
    pub fn d_continuum_at(&self, index: usize, q: usize, j: usize) -> Result<Complex64, MoleculeError> {
        if !(j == 1 || j == 2) {
            return Err(MoleculeError::LevelIndex(j));
        }
        let ch = self.channel(q)?;
        let row = ch.dipoles.get(index).ok_or(MoleculeError::OffGrid(f64::NAN))?;
        Ok(row[j - 1])
    }

    pub fn d_continuum(&self, e: f64, q: usize, j: usize) -> Result<Complex64, MoleculeError> {
        self.d_continuum_at(self.energy_index(e)?, q, j)
    }

    /// d^q_{i,m}(E) = D_i(E,q) · conj(D_m(E,q)).
    pub fn d_cross(&self, e: f64, q: usize, i: usize, m: usize) -> Result<Complex64, MoleculeError> {
        let idx = self.energy_index(e)?;
        self.d_cross_at(idx, q, i, m)
    }

    pub fn d_cross_at(&self, index: usize, q: usize, i: usize, m: usize) -> Result<Complex64, MoleculeError> {
        Ok(self.d_continuum_at(index, q, i)? * self.d_continuum_at(index, q, m)?.conj())
    }

    /// θ = arg(⟨E1|d̂|E0⟩⟨E0|d̂|E2⟩) = arg(d10 · conj(d20)).
    pub fn theta(&self) -> f64 {
        (self.d10 * self.d20.conj()).arg()
    }

    /// α^q_{1,2}(E) = arg d^q_{1,2}(E).
    pub fn alpha(&self, e: f64, q: usize) -> Result<f64, MoleculeError> {
        Ok(self.d_cross(e, q, 1, 2)?.arg())
    }

    /// ω_{E_aE_b} between two of the bound levels.
    pub fn omega(&self, a: usize, b: usize) -> f64 {
        transition_frequency(self.levels[a], self.levels[b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(d1: Complex64, d2: Complex64) -> MoleculeModel {
        let grid = uniform_grid(3.0, 0.1, 4);
        let ch = Channel { name: "a".into(), group: "a".into(), dipoles: vec![[d1, d2]; 4] };
        MoleculeModel::new([0.0, 1.0, 1.3], c(0.1, 0.0), c(0.0, 0.1), grid, 0.1, vec![ch]).unwrap()
    }

    #[test]
    fn cross_dipoles() {
        let m = model(c(1.0, 0.0), c(0.0, 1.0));
        let e = m.continuum()[2];
        assert!((m.alpha(e, 0).unwrap() + FRAC_PI_2).abs() < 1e-15);
        let d11 = m.d_cross(e, 0, 1, 1).unwrap();
        assert_eq!(d11.im, 0.0);
        assert_eq!(d11.re, 1.0);
        assert_eq!(m.d_cross(e, 0, 1, 2).unwrap(), m.d_cross(e, 0, 2, 1).unwrap().conj());
    }

    #[test]
    fn theta_convention() {
        let m = model(c(1.0, 0.0), c(1.0, 0.0));
        // d10 real, d20 = 0.1i: d10 conj(d20) = -0.01i.
        assert!((m.theta() + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn off_grid_rejected() {
        let m = model(c(1.0, 0.0), c(1.0, 0.0));
        assert_eq!(m.energy_index(3.05), Err(MoleculeError::OffGrid(3.05)));
        assert_eq!(m.energy_index(3.0 + 0.1 * 3.0).unwrap(), 3);
    }

    #[test]
    fn level_order_enforced() {
        let ch = Channel { name: "a".into(), group: "a".into(), dipoles: vec![[c(1.0, 0.0); 2]] };
        let err = MoleculeModel::new([0.0, 1.0, 3.5], c(1.0, 0.0), c(1.0, 0.0), vec![3.0], 0.1, vec![ch]);
        assert!(matches!(err, Err(MoleculeError::LevelOrder(_))));
    }

    #[test]
    fn frequencies() {
        let m = model(c(1.0, 0.0), c(1.0, 0.0));
        assert_eq!(m.omega(1, 1), 0.0);
        assert_eq!(m.omega(2, 0), 1.3);
        assert_eq!(m.omega(1, 2), -m.omega(2, 1));
    }

    #[test]
    fn profile_channel() {
        let grid = uniform_grid(3.0, 0.5, 3);
        let p = DipoleProfile { magnitude: [1.0, 2.0], phase: [0.0, 0.5], phase_slope: [0.0, 1.0] };
        let ch = Channel::from_profile("x", "g", &grid, p);
        assert!((ch.dipoles[2][1] - Complex64::from_polar(2.0, 1.5)).norm() < 1e-15);
    }
}
