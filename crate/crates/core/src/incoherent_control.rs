//! Second-order two-photon excitation E0 → E_j → E of a single light field
//! |ψ^l⟩, the "ω₁+ω₂ vs ω₂+ω₁" scheme. Path j's field component at (E, q) is
//!
//! c_j Σ_{k,k′} g_k g_{k′} â_{k′}â_k|ψ^l⟩ / ((ω_{EE0} − ω_k − ω_{k′} + 2iε)(ω_{EE_j} − ω_{k′} + iε)),
//! c_j = D_j(E,q) d_{j0}.
//!
//! When ω_{EE1} = ω_{E2E0}, the energy-shell pole makes the two components
//! c-number multiples of one state for any |ψ^l⟩. Nothing here imposes that
//! identity; it has to come out of the sums as ε → 0⁺. The strong-field
//! dressed-state variant of incoherent control is not modeled.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{FieldState, FockError, ModeGrid};
use crate::measures::{self, MeasureError, ProjectorSet};
use crate::molecule::{MoleculeError, MoleculeModel};

/// Tolerance on |ω_{EE1} − ω_{E2E0}| for the resonance condition.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IncoherentError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Molecule(#[from] MoleculeError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("empty light field")]
    EmptyField,
    #[error("field has {got} modes, grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("resonance condition ω_EE1 = ω_E2E0 violated by {mismatch:.3e}")]
    OffResonance { mismatch: f64 },
    #[error("both path components vanish")]
    BothZero,
    #[error("path 1 component vanishes; the proportionality residual is undefined")]
    FirstZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonPaths {
    pub e: f64,
    pub q: usize,
    /// Molecular factors D_j(E,q) d_{j0} included in the components.
    pub dipoles: [Complex64; 2],
    pub components: [FieldState; 2],
}

/// |ω_{EE1} − ω_{E2E0}|.
pub fn resonance_mismatch(mol: &MoleculeModel, e: f64) -> f64 {
    ((e - mol.level(1)) - mol.omega(2, 0)).abs()
}

pub fn check_resonance(mol: &MoleculeModel, e: f64) -> Result<(), IncoherentError> {
    let mismatch = resonance_mismatch(mol, e);
    if mismatch > RESONANCE_TOL {
        return Err(IncoherentError::OffResonance { mismatch });
    }
    Ok(())
}

pub fn two_photon_paths(
    mol: &MoleculeModel,
    grid: &ModeGrid,
    psi: &FieldState,
    e: f64,
    q: usize,
) -> Result<TwoPhotonPaths, IncoherentError> {
    if psi.mode_count() != grid.len() {
        return Err(IncoherentError::GridMismatch { expected: grid.len(), got: psi.mode_count() });
    }
    if psi.is_zero() {
        return Err(IncoherentError::EmptyField);
    }
    let index = mol.energy_index(e)?;
    let w = grid.frequencies();
    let g = grid.couplings();
    let eps = grid.epsilon();
    let shell = e - mol.level(0);
    let singles: Vec<(usize, FieldState)> = (0..grid.len())
        .map(|k| psi.annihilate(k).map(|s| (k, s)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|(_, s)| !s.is_zero())
        .collect();
    let mut dipoles = [Complex64::new(0.0, 0.0); 2];
    let mut components = [FieldState::zero(psi.mode_count(), psi.n_max()), FieldState::zero(psi.mode_count(), psi.n_max())];
    for j in [1usize, 2] {
        let c = mol.d_continuum_at(index, q, j)? * mol.d_bound(j)?;
        let wj = e - mol.level(j);
        let mut acc = FieldState::zero(psi.mode_count(), psi.n_max());
        for (k, ak) in &singles {
            let weights: Vec<Complex64> = (0..grid.len())
                .map(|kp| {
                    let d0 = Complex64::new(shell - w[*k] - w[kp], 2.0 * eps);
                    let dj = Complex64::new(wj - w[kp], eps);
                    Complex64::new(g[*k] * g[kp], 0.0) / (d0 * dj)
                })
                .collect();
            acc = acc.add_scaled(Complex64::new(1.0, 0.0), &ak.annihilate_weighted(&weights)?)?;
        }
        dipoles[j - 1] = c;
        components[j - 1] = acc.scaled(c);
    }
    Ok(TwoPhotonPaths { e, q, dipoles, components })
}

fn dense_pair(a: &FieldState, b: &FieldState) -> (Vec<Complex64>, Vec<Complex64>) {
    let support: std::collections::BTreeSet<_> = a.iter().chain(b.iter()).map(|(o, _)| o.clone()).collect();
    (
        support.iter().map(|o| a.amplitude(o)).collect(),
        support.iter().map(|o| b.amplitude(o)).collect(),
    )
}

/// U between the two path components with photon-number projectors.
pub fn factorization_degree(paths: &TwoPhotonPaths) -> Result<f64, IncoherentError> {
    let [a, b] = &paths.components;
    if a.is_zero() && b.is_zero() {
        return Err(IncoherentError::BothZero);
    }
    let (va, vb) = dense_pair(a, b);
    Ok(measures::indistinguishability(&va, &vb, &ProjectorSet::computational(va.len()))?)
}

/// c-numbers multiplying the shared field state once the resonance identity
/// is used: c1 = −D_1 d_10, c2 = D_2 d_20.
pub fn resonant_coefficients(paths: &TwoPhotonPaths) -> [Complex64; 2] {
    [-paths.dipoles[0], paths.dipoles[1]]
}

/// ‖c2·comp1 − c1·comp2‖ / (|c2|·‖comp1‖), zero when the components are the
/// stated c-number multiples of one field state.
pub fn proportionality_residual(paths: &TwoPhotonPaths) -> Result<f64, IncoherentError> {
    let [c1, c2] = resonant_coefficients(paths);
    let [a, b] = &paths.components;
    let na = a.norm();
    if na == 0.0 || c2.norm() == 0.0 {
        return Err(IncoherentError::FirstZero);
    }
    let diff = a.scaled(c2).add_scaled(-c1, b)?;
    Ok(diff.norm() / (c2.norm() * na))
}

/// Σ_q ΔE ‖comp1 + comp2‖² at energy `e`.
pub fn detection_probability(
    mol: &MoleculeModel,
    grid: &ModeGrid,
    psi: &FieldState,
    e: f64,
) -> Result<f64, IncoherentError> {
    let mut total = 0.0;
    for q in 0..mol.channels().len() {
        let p = two_photon_paths(mol, grid, psi, e, q)?;
        total += p.components[0].add_scaled(Complex64::new(1.0, 0.0), &p.components[1])?.norm_sqr();
    }
    Ok(total * mol.delta_e())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub phases: Vec<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseScanReport {
    pub rows: Vec<PhaseRow>,
}

impl PhaseScanReport {
    pub fn mean(&self) -> f64 {
        self.rows.iter().map(|r| r.probability).sum::<f64>() / self.rows.len().max(1) as f64
    }

    /// (max − min) / mean.
    pub fn relative_spread(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.probability).fold(f64::NEG_INFINITY, f64::max);
        let min = self.rows.iter().map(|r| r.probability).fold(f64::INFINITY, f64::min);
        (max - min) / self.mean()
    }

    pub fn to_csv(&self) -> String {
        let n = self.rows.first().map_or(0, |r| r.phases.len());
        let mut s = String::from("setting");
        for k in 0..n {
            let _ = write!(s, ",phi_{k}");
        }
        s.push_str(",probability,relative_spread\n");
        let spread = self.relative_spread();
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, "{i}");
            for p in &r.phases {
                let _ = write!(s, ",{p:.16e}");
            }
            let _ = writeln!(s, ",{:.16e},{:.16e}", r.probability, spread);
        }
        s
    }
}

/// Detection probability at `e` after rotating â_k → e^{iφ_k}â_k on |ψ^l⟩ for
/// each phase setting.
pub fn phase_insensitivity_scan(
    mol: &MoleculeModel,
    grid: &ModeGrid,
    psi: &FieldState,
    e: f64,
    settings: &[Vec<f64>],
) -> Result<PhaseScanReport, IncoherentError> {
    let rows = settings
        .iter()
        .map(|phases| {
            let rotated = psi.rotate_phases(phases)?;
            Ok(PhaseRow { phases: phases.clone(), probability: detection_probability(mol, grid, &rotated, e)? })
        })
        .collect::<Result<Vec<_>, IncoherentError>>()?;
    Ok(PhaseScanReport { rows })
}

/// `n` settings with independent per-mode phase steps: φ_k(s) = 2π s m_k / n
/// for distinct odd multipliers m_k.
pub fn phase_grid(modes: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|s| {
            (0..modes)
                .map(|k| std::f64::consts::TAU * (s * (2 * k + 1)) as f64 / n as f64)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ModeState;
    use crate::molecule::{uniform_grid, Channel, DipoleProfile};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(e2: f64) -> MoleculeModel {
        let grid = vec![2.5];
        let p = DipoleProfile { magnitude: [1.0, 0.7], phase: [0.2, -0.5], phase_slope: [0.0, 0.0] };
        MoleculeModel::new(
            [0.0, 1.0, e2],
            c(0.05, 0.01),
            c(0.03, -0.02),
            grid.clone(),
            0.05,
            vec![Channel::from_profile("a", "a", &grid, p)],
        )
        .unwrap()
    }

    fn two_mode_grid(eps: f64) -> ModeGrid {
        ModeGrid::new(vec![1.125, 1.375], 1.0, eps).unwrap()
    }

    #[test]
    fn needs_two_photons() {
        let m = model(1.5);
        let g = two_mode_grid(1e-6);
        let vac = FieldState::vacuum(2, 2);
        let p = two_photon_paths(&m, &g, &vac, 2.5, 0).unwrap();
        assert!(p.components.iter().all(FieldState::is_zero));
        let one = FieldState::fock(&[1, 0], 2).unwrap();
        let p = two_photon_paths(&m, &g, &one, 2.5, 0).unwrap();
        assert!(p.components.iter().all(FieldState::is_zero));
    }

    // Hand evaluation of the 2×2 (k,k′) sum for |1_a, 1_b⟩.
    #[test]
    fn two_mode_single_photons() {
        let m = model(1.5);
        let eps = 1e-3;
        let g = two_mode_grid(eps);
        let s = FieldState::fock(&[1, 1], 2).unwrap();
        let p = two_photon_paths(&m, &g, &s, 2.5, 0).unwrap();
        let (ga, gb) = (g.couplings()[0], g.couplings()[1]);
        let d0 = c(2.5 - 1.125 - 1.375, 2.0 * eps);
        for j in [1usize, 2] {
            let wj = 2.5 - m.level(j);
            let want = p.dipoles[j - 1] * ga * gb / d0
                * (c(1.0, 0.0) / c(wj - 1.375, eps) + c(1.0, 0.0) / c(wj - 1.125, eps));
            assert_eq!(p.components[j - 1].support_len(), 1);
            let got = p.components[j - 1].amplitude_dense(&[0, 0]);
            assert!((got - want).norm() < 1e-13 * want.norm());
        }
    }

    #[test]
    fn resonance_check() {
        assert!(check_resonance(&model(1.5), 2.5).is_ok());
        assert!(matches!(check_resonance(&model(1.6), 2.5), Err(IncoherentError::OffResonance { .. })));
    }

    #[test]
    fn resonant_families_factorize() {
        let m = model(1.5);
        let g = two_mode_grid(2.5e-13);
        let states = [
            FieldState::product_auto(&[ModeState::Coherent(c(0.6, 0.2)), ModeState::Coherent(c(-0.3, 0.5))], 1e-12, 60)
                .unwrap(),
            FieldState::fock(&[2, 1], 3).unwrap(),
            FieldState::product_auto(&[ModeState::Even(0.8), ModeState::Even(0.6)], 1e-12, 60).unwrap(),
            FieldState::product_auto(&[ModeState::Odd(0.8), ModeState::Odd(0.6)], 1e-12, 60).unwrap(),
        ];
        for s in &states {
            let p = two_photon_paths(&m, &g, s, 2.5, 0).unwrap();
            let u = factorization_degree(&p).unwrap();
            let r = proportionality_residual(&p).unwrap();
            assert!(u >= 1.0 - 1e-10, "{u}");
            assert!(r < 1e-9, "{r}");
        }
    }

    #[test]
    fn detuned_fock_loses_factorization() {
        let g = ModeGrid::new(uniform_grid(1.125, 0.0125, 21), 1.0, 1e-13).unwrap();
        // Two on-shell pairs: 1.125 + 1.375 and 1.2 + 1.3.
        let mut ns = vec![0u32; 21];
        for k in [0, 6, 14, 20] {
            ns[k] = 1;
        }
        let s = FieldState::fock(&ns, 1).unwrap();
        let on = two_photon_paths(&model(1.5), &g, &s, 2.5, 0).unwrap();
        let off = two_photon_paths(&model(1.5 + 10.0 * 0.0125), &g, &s, 2.5, 0).unwrap();
        assert!(factorization_degree(&on).unwrap() > 1.0 - 1e-10);
        assert!(factorization_degree(&off).unwrap() < 1.0 - 1e-3);
    }

    #[test]
    fn phases_do_not_matter_on_resonance() {
        let m = model(1.5);
        let g = two_mode_grid(2.5e-13);
        let s = FieldState::product_auto(&[ModeState::Coherent(c(0.6, 0.0)), ModeState::Coherent(c(0.4, 0.3))], 1e-12, 60)
            .unwrap();
        let global: Vec<Vec<f64>> = (0..4).map(|i| vec![0.7 * i as f64; 2]).collect();
        let r = phase_insensitivity_scan(&m, &g, &s, 2.5, &global).unwrap();
        assert!(r.relative_spread() < 1e-12);
        let r = phase_insensitivity_scan(&m, &g, &s, 2.5, &phase_grid(2, 16)).unwrap();
        assert_eq!(r.rows.len(), 16);
        assert!(r.relative_spread() < 1e-10, "{}", r.relative_spread());
    }
}
