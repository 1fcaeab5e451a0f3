//! Two-pulse control with quantized light.
//!
//! In first order for each pulse, the continuum component of the final state
//! at (E, q) is the sum of two pathway pieces
//! c_j · (B̂_{E,j}|ψ^d⟩) ⊗ (Â_{j0}|ψ^x⟩), c_j = D_j(E,q) d_{j0}, with
//!
//! Â_{j0} = Σ_k g_k â_k / (i(ω_{E_jE_0} − ω_k − iε)),
//! B̂_{E,j} = Σ_k g_k â_k / (i(ω_{EE_j} − ω_k + iε)).
//!
//! The common phase e^{−iEt} is dropped. The two field parts record which
//! pathway was taken unless they are proportional.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::classical_control::{self, ControlError, PulsePair};
use crate::fock::{FieldState, FockError, ModeGrid, ModeState, Occupation};
use crate::linalg;
use crate::measures::{self, BoundReport, MeasureError, ProjectorSet};
use crate::molecule::{MoleculeError, MoleculeModel};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
/// Largest per-mode truncation tried when sizing a product state.
pub const TRUNCATION_LIMIT: u32 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Molecule(#[from] MoleculeError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("bound level index {0} must be 1 or 2")]
    LevelIndex(usize),
    #[error("field state has {got} modes, grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("{0} field is not a product of coherent states; the classical correspondence only applies to coherent light")]
    NotCoherent(&'static str),
    #[error("pathway {0} has a zero component; indistinguishability is undefined for a single pathway")]
    SinglePathway(usize),
    #[error("probe frequencies collide: {0}")]
    ProbeCollision(String),
    #[error("matching the coherent amplitudes to the classical spectrum failed (singular system)")]
    Singular,
}

/// Mode grids of the preparation (`x`) and dissociation (`d`) pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub x: ModeGrid,
    pub d: ModeGrid,
}

impl Grids {
    pub fn with_epsilon_scale(&self, factor: f64) -> Result<Self, QuantumError> {
        Ok(Self {
            x: self.x.with_epsilon(self.x.epsilon() * factor)?,
            d: self.d.with_epsilon(self.d.epsilon() * factor)?,
        })
    }
}

fn check_level(j: usize) -> Result<(), QuantumError> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(QuantumError::LevelIndex(j))
    }
}

/// Mode weights of Â_{j0}.
pub fn weights_a(mol: &MoleculeModel, grid: &ModeGrid, j: usize) -> Result<Vec<Complex64>, QuantumError> {
    check_level(j)?;
    let w = mol.omega(j, 0);
    let eps = grid.epsilon();
    Ok(grid
        .frequencies()
        .iter()
        .zip(grid.couplings())
        .map(|(&wk, &g)| Complex64::new(g, 0.0) / (Complex64::i() * Complex64::new(w - wk, -eps)))
        .collect())
}

/// Mode weights of B̂_{E,j}.
pub fn weights_b(mol: &MoleculeModel, grid: &ModeGrid, e: f64, j: usize) -> Result<Vec<Complex64>, QuantumError> {
    check_level(j)?;
    let w = e - mol.level(j);
    let eps = grid.epsilon();
    Ok(grid
        .frequencies()
        .iter()
        .zip(grid.couplings())
        .map(|(&wk, &g)| Complex64::new(g, 0.0) / (Complex64::i() * Complex64::new(w - wk, eps)))
        .collect())
}

pub fn apply_a(mol: &MoleculeModel, grid: &ModeGrid, j: usize, field: &FieldState) -> Result<FieldState, QuantumError> {
    check_modes(grid, field)?;
    Ok(field.annihilate_weighted(&weights_a(mol, grid, j)?)?)
}

pub fn apply_b(
    mol: &MoleculeModel,
    grid: &ModeGrid,
    e: f64,
    j: usize,
    field: &FieldState,
) -> Result<FieldState, QuantumError> {
    check_modes(grid, field)?;
    Ok(field.annihilate_weighted(&weights_b(mol, grid, e, j)?)?)
}

fn check_modes(grid: &ModeGrid, field: &FieldState) -> Result<(), QuantumError> {
    if grid.len() != field.mode_count() {
        return Err(QuantumError::GridMismatch { expected: grid.len(), got: field.mode_count() });
    }
    Ok(())
}

/// One pathway's contribution: c-number times (d-field part) ⊗ (x-field part).
#[derive(Debug, Clone, PartialEq)]
pub struct Pathway {
    pub coefficient: Complex64,
    pub field_d: FieldState,
    pub field_x: FieldState,
}

impl Pathway {
    pub fn norm_sqr(&self) -> f64 {
        self.coefficient.norm_sqr() * self.field_d.norm_sqr() * self.field_x.norm_sqr()
    }

    pub fn is_zero(&self) -> bool {
        self.norm_sqr() == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathwayPair {
    pub e: f64,
    pub q: usize,
    pub components: [Pathway; 2],
}

pub fn pathway_states(
    mol: &MoleculeModel,
    grids: &Grids,
    psi_x: &FieldState,
    psi_d: &FieldState,
    e: f64,
    q: usize,
) -> Result<PathwayPair, QuantumError> {
    let fx = [apply_a(mol, &grids.x, 1, psi_x)?, apply_a(mol, &grids.x, 2, psi_x)?];
    pathway_states_with(mol, grids, &fx, psi_d, e, q)
}

/// As [`pathway_states`] with the two Â_{j0}|ψ^x⟩ already computed; they do
/// not depend on (E, q).
pub fn pathway_states_with(
    mol: &MoleculeModel,
    grids: &Grids,
    fx: &[FieldState; 2],
    psi_d: &FieldState,
    e: f64,
    q: usize,
) -> Result<PathwayPair, QuantumError> {
    let index = mol.energy_index(e)?;
    let component = |j: usize| -> Result<Pathway, QuantumError> {
        Ok(Pathway {
            coefficient: mol.d_continuum_at(index, q, j)? * mol.d_bound(j)?,
            field_d: apply_b(mol, &grids.d, e, j, psi_d)?,
            field_x: fx[j - 1].clone(),
        })
    };
    Ok(PathwayPair { e, q, components: [component(1)?, component(2)?] })
}

/// 2 Re[c2* c1 ⟨f_x2|f_x1⟩⟨f_d2|f_d1⟩].
pub fn quantum_interference(pair: &PathwayPair) -> Result<f64, QuantumError> {
    let [p1, p2] = &pair.components;
    let ox = p2.field_x.overlap(&p1.field_x)?;
    let od = p2.field_d.overlap(&p1.field_d)?;
    Ok(2.0 * (p2.coefficient.conj() * p1.coefficient * ox * od).re)
}

/// Squared norms of the two components.
pub fn diagonal_terms(pair: &PathwayPair) -> [f64; 2] {
    [pair.components[0].norm_sqr(), pair.components[1].norm_sqr()]
}

/// Interference divided by the summed single-pathway probabilities; lies in
/// [−1, 1].
pub fn normalized_interference(pair: &PathwayPair) -> Result<f64, QuantumError> {
    let [a, b] = diagonal_terms(pair);
    if a + b == 0.0 {
        return Ok(0.0);
    }
    Ok(quantum_interference(pair)? / (a + b))
}

fn dense_pair(a: &FieldState, b: &FieldState) -> (Vec<Complex64>, Vec<Complex64>) {
    let support: BTreeSet<&Occupation> = a.iter().chain(b.iter()).map(|(o, _)| o).collect();
    let va = support.iter().map(|o| a.amplitude(o)).collect();
    let vb = support.iter().map(|o| b.amplitude(o)).collect();
    (va, vb)
}

fn factor_u(a: &FieldState, b: &FieldState) -> Result<f64, QuantumError> {
    let (va, vb) = dense_pair(a, b);
    Ok(measures::indistinguishability(&va, &vb, &ProjectorSet::computational(va.len()))?)
}

/// U between the two components for photon-number projectors
/// |n_d, n_x⟩⟨n_d, n_x|. Both components share the molecular state, and the
/// projectors factorize over the two pulses, so U = U_d · U_x.
pub fn pathway_indistinguishability(pair: &PathwayPair) -> Result<f64, QuantumError> {
    for (j, p) in pair.components.iter().enumerate() {
        if p.is_zero() {
            return Err(QuantumError::SinglePathway(j + 1));
        }
    }
    let [p1, p2] = &pair.components;
    Ok(factor_u(&p1.field_d, &p2.field_d)? * factor_u(&p1.field_x, &p2.field_x)?)
}

/// Full pathway states c_j f_dj ⊗ f_xj as dense vectors over their joint
/// support.
pub fn dense_components(pair: &PathwayPair) -> (Vec<Complex64>, Vec<Complex64>) {
    let [p1, p2] = &pair.components;
    let s1 = p1.field_d.kron(&p1.field_x).scaled(p1.coefficient);
    let s2 = p2.field_d.kron(&p2.field_x).scaled(p2.coefficient);
    dense_pair(&s1, &s2)
}

/// Runs the U ≥ I check on the pair with photon-number projectors for U and
/// the identity for I, so that I = |⟨ψ1|ψ2⟩| / (‖ψ1‖‖ψ2‖).
pub fn pathway_bound(pair: &PathwayPair) -> Result<BoundReport, QuantumError> {
    for (j, p) in pair.components.iter().enumerate() {
        if p.is_zero() {
            return Err(QuantumError::SinglePathway(j + 1));
        }
    }
    let (a, b) = dense_components(pair);
    let n = a.len();
    Ok(measures::verify_bound(&a, &b, &ProjectorSet::computational(n), &ProjectorSet::identity(n))?)
}

/// Builds a product state with one photon of headroom above the smallest
/// truncation meeting `tail_tol`, so that â_k applied to it keeps the same
/// accuracy.
pub fn field_with_headroom(factors: &[ModeState], tail_tol: f64) -> Result<FieldState, QuantumError> {
    let base = FieldState::product_auto(factors, tail_tol, TRUNCATION_LIMIT)?;
    let cap = base.n_max() + 1;
    Ok(FieldState::product(factors, cap, Some(cap), tail_tol)?)
}

/// Preparation grid with one mode exactly at each bound transition.
pub fn probe_grid_x(mol: &MoleculeModel, field_scale: f64, epsilon_rel: f64) -> Result<ModeGrid, QuantumError> {
    Ok(ModeGrid::with_relative_epsilon(vec![mol.omega(1, 0), mol.omega(2, 0)], field_scale, epsilon_rel)?)
}

/// Dissociation grid with one mode exactly at every ω_{E_iE_j}.
pub fn probe_grid_d(mol: &MoleculeModel, field_scale: f64, epsilon_rel: f64) -> Result<ModeGrid, QuantumError> {
    let mut f: Vec<f64> = mol
        .continuum()
        .iter()
        .flat_map(|&e| [e - mol.level(1), e - mol.level(2)])
        .collect();
    f.sort_by(f64::total_cmp);
    let scale = f.last().copied().unwrap_or(1.0);
    if let Some(p) = f.windows(2).find(|p| p[1] - p[0] < 1e-9 * scale) {
        return Err(QuantumError::ProbeCollision(format!(
            "ω = {} appears for both bound levels; choose E2 − E1 off the continuum step",
            p[0]
        )));
    }
    Ok(ModeGrid::with_relative_epsilon(f, field_scale, epsilon_rel)?)
}

/// Amplitudes with Σ_k w_jk α_k = √2π E(ω_j) for each probe row.
fn match_rows(rows: Vec<Vec<Complex64>>, targets: Vec<Complex64>) -> Result<Vec<Complex64>, QuantumError> {
    linalg::solve_min_norm(&rows, &targets).ok_or(QuantumError::Singular)
}

pub fn match_coherent_x(
    mol: &MoleculeModel,
    grid: &ModeGrid,
    pulses: &PulsePair,
) -> Result<Vec<Complex64>, QuantumError> {
    let rows = vec![weights_a(mol, grid, 1)?, weights_a(mol, grid, 2)?];
    let targets = [1, 2]
        .iter()
        .map(|&j| pulses.x.spectral_amplitude(mol.omega(j, 0)) * SQRT_2PI)
        .collect();
    match_rows(rows, targets)
}

pub fn match_coherent_d(
    mol: &MoleculeModel,
    grid: &ModeGrid,
    pulses: &PulsePair,
) -> Result<Vec<Complex64>, QuantumError> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for &e in mol.continuum() {
        for j in [1, 2] {
            rows.push(weights_b(mol, grid, e, j)?);
            targets.push(pulses.d.spectral_amplitude(e - mol.level(j)) * SQRT_2PI);
        }
    }
    match_rows(rows, targets)
}

/// Per-mode states of both pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPulses {
    pub x: Vec<ModeState>,
    pub d: Vec<ModeState>,
}

impl QuantizedPulses {
    pub fn is_coherent(&self) -> bool {
        self.x.iter().chain(&self.d).all(ModeState::is_coherent)
    }
}

/// Coherent states whose Â/B̂ eigenvalue sums reproduce √2π times the
/// classical spectral amplitudes at every probe frequency.
pub fn matched_coherent(mol: &MoleculeModel, grids: &Grids, pulses: &PulsePair) -> Result<QuantizedPulses, QuantumError> {
    Ok(QuantizedPulses {
        x: match_coherent_x(mol, &grids.x, pulses)?.into_iter().map(ModeState::Coherent).collect(),
        d: match_coherent_d(mol, &grids.d, pulses)?.into_iter().map(ModeState::Coherent).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceRow {
    pub e: f64,
    pub channel: String,
    pub delay: f64,
    pub quantum: f64,
    pub classical: f64,
    pub rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceReport {
    pub rows: Vec<CorrespondenceRow>,
}

impl CorrespondenceReport {
    /// Largest deviation; zero for an empty report.
    pub fn max_rel_dev(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_dev).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("E,q,delay,quantum_interference,classical_I12,rel_dev\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.e, r.channel, r.delay, r.quantum, r.classical, r.rel_dev
            );
        }
        s
    }
}

/// Compares the quantum cross term with the classical one at the pulses'
/// current delay for every (E, q). The deviation is measured against the
/// classical cross-term envelope 4π|c1c2*E_d1E_d2*||d^q_12|, which is the
/// scale of the oscillating term independent of where on the cosine the
/// delay falls.
pub fn correspondence_at(
    mol: &MoleculeModel,
    grids: &Grids,
    pulses: &PulsePair,
    fields: &QuantizedPulses,
    tail_tol: f64,
) -> Result<Vec<CorrespondenceRow>, QuantumError> {
    if !fields.x.iter().all(ModeState::is_coherent) {
        return Err(QuantumError::NotCoherent("preparation"));
    }
    if !fields.d.iter().all(ModeState::is_coherent) {
        return Err(QuantumError::NotCoherent("dissociation"));
    }
    let psi_x = field_with_headroom(&fields.x, tail_tol)?;
    let psi_d = field_with_headroom(&fields.d, tail_tol)?;
    let fx = [apply_a(mol, &grids.x, 1, &psi_x)?, apply_a(mol, &grids.x, 2, &psi_x)?];
    let c = classical_control::prep_coefficients(mol, &pulses.x);
    let mut rows = Vec::new();
    for (q, ch) in mol.channels().iter().enumerate() {
        for (index, &e) in mol.continuum().iter().enumerate() {
            let pair = pathway_states_with(mol, grids, &fx, &psi_d, e, q)?;
            let quantum = quantum_interference(&pair)?;
            let classical = classical_control::probability_at(mol, pulses, &c, index, q)?.interference;
            let envelope = classical_control::interference_envelope(mol, pulses, &c, index, q)?;
            let diff = (quantum - classical).abs();
            let rel_dev = if envelope > 0.0 { diff / envelope } else { diff };
            rows.push(CorrespondenceRow { e, channel: ch.name.clone(), delay: pulses.delay(), quantum, classical, rel_dev });
        }
    }
    Ok(rows)
}

/// Delay scan of the correspondence; the coherent amplitudes are re-matched
/// at every delay because the classical spectra pick up e^{i(ω−ω_c)t_d}.
pub fn classical_correspondence(
    mol: &MoleculeModel,
    grids: &Grids,
    pulses: &PulsePair,
    delays: &[f64],
    tail_tol: f64,
) -> Result<CorrespondenceReport, QuantumError> {
    if delays.is_empty() {
        return Err(ControlError::EmptyGrid("delay").into());
    }
    let mut report = CorrespondenceReport::default();
    for &t in delays {
        let p = pulses.with_delay(t);
        let fields = matched_coherent(mol, grids, &p)?;
        report.rows.extend(correspondence_at(mol, grids, &p, &fields, tail_tol)?);
    }
    Ok(report)
}

/// Light state placed on one preparation mode; the remaining preparation
/// modes carry a common coherent background amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrepFamily {
    Coherent,
    Fock { mode: usize, n: u32 },
    Even { mode: usize, alpha: f64 },
    Odd { mode: usize, alpha: f64 },
}

impl PrepFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PrepFamily::Coherent => "coherent",
            PrepFamily::Fock { .. } => "fock",
            PrepFamily::Even { .. } => "ecs",
            PrepFamily::Odd { .. } => "ocs",
        }
    }

    fn apply(&self, modes: usize, background: Complex64) -> Vec<ModeState> {
        let mut out = vec![ModeState::Coherent(background); modes];
        match *self {
            PrepFamily::Coherent => {}
            PrepFamily::Fock { mode, n } => out[mode] = ModeState::Fock(n),
            PrepFamily::Even { mode, alpha } => out[mode] = ModeState::Even(alpha),
            PrepFamily::Odd { mode, alpha } => out[mode] = ModeState::Odd(alpha),
        }
        out
    }

    fn mode(&self) -> Option<usize> {
        match *self {
            PrepFamily::Coherent => None,
            PrepFamily::Fock { mode, .. } | PrepFamily::Even { mode, .. } | PrepFamily::Odd { mode, .. } => Some(mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZooRecord {
    pub family: String,
    /// |⟨â⟩| on the mode carrying the non-classical state (0 for coherent).
    pub mean_field: f64,
    pub max_abs_interference: f64,
    pub max_abs_normalized_interference: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub bound_holds: bool,
}

/// Pathway interference and U for one preparation-light family over every
/// (E, q), with matched coherent dissociation light.
pub fn photon_zoo_entry(
    mol: &MoleculeModel,
    grids: &Grids,
    pulses: &PulsePair,
    family: PrepFamily,
    background: Complex64,
    tail_tol: f64,
) -> Result<ZooRecord, QuantumError> {
    let matched = matched_coherent(mol, grids, pulses)?;
    let factors = family.apply(grids.x.len(), background);
    let psi_x = field_with_headroom(&factors, tail_tol)?;
    let psi_d = field_with_headroom(&matched.d, tail_tol)?;
    let mean_field = match family.mode() {
        Some(m) => psi_x.mean_field(m)?.norm(),
        None => 0.0,
    };
    let fx = [apply_a(mol, &grids.x, 1, &psi_x)?, apply_a(mol, &grids.x, 2, &psi_x)?];
    let mut rec = ZooRecord {
        family: family.name().into(),
        mean_field,
        max_abs_interference: 0.0,
        max_abs_normalized_interference: 0.0,
        min_u: f64::INFINITY,
        max_u: 0.0,
        bound_holds: true,
    };
    for q in 0..mol.channels().len() {
        for &e in mol.continuum() {
            let pair = pathway_states_with(mol, grids, &fx, &psi_d, e, q)?;
            rec.max_abs_interference = rec.max_abs_interference.max(quantum_interference(&pair)?.abs());
            let ni = normalized_interference(&pair)?;
            rec.max_abs_normalized_interference = rec.max_abs_normalized_interference.max(ni.abs());
            let u = pathway_indistinguishability(&pair)?;
            rec.min_u = rec.min_u.min(u);
            rec.max_u = rec.max_u.max(u);
            rec.bound_holds &= u >= ni.abs() - measures::BOUND_TOL;
        }
    }
    Ok(rec)
}

/// Total detection probability Σ ΔE (‖ψ1‖² + ‖ψ2‖² + interference) over the
/// grid for one channel.
pub fn channel_total(
    mol: &MoleculeModel,
    grids: &Grids,
    psi_x: &FieldState,
    psi_d: &FieldState,
    q: usize,
) -> Result<f64, QuantumError> {
    let fx = [apply_a(mol, &grids.x, 1, psi_x)?, apply_a(mol, &grids.x, 2, psi_x)?];
    let mut total = 0.0;
    for &e in mol.continuum() {
        let pair = pathway_states_with(mol, grids, &fx, psi_d, e, q)?;
        let [a, b] = diagonal_terms(&pair);
        total += (a + b + quantum_interference(&pair)?) * mol.delta_e();
    }
    Ok(total)
}

/// Period of the delay dependence, 2π/ω_21.
pub fn delay_period(mol: &MoleculeModel) -> f64 {
    2.0 * PI / mol.omega(2, 1)
}
