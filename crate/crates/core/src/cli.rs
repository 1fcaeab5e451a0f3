//! Scenario runner behind the `cohctl` binary.
//!
//! A scenario is one JSON document; every block has built-in defaults, so an
//! empty object `{}` (or no `--config` at all) runs the desk-scale setup.
//! Each subcommand writes a CSV table and `summary.json` into the output
//! directory. Floating-point CSV fields carry 17 significant digits.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::classical_control::{self, GaussianPulse, PulsePair};
use crate::collision::{self, ChannelSpace, SecondProcessTensor};
use crate::fock::{FieldState, ModeGrid, ModeState};
use crate::incoherent_control as inc;
use crate::measures;
use crate::molecule::{uniform_grid, Channel, DipoleProfile, MoleculeModel};
use crate::quantum_control::{self as qc, Grids, PrepFamily};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Thresholds used by `--check`.
pub mod thresholds {
    pub const BOUND_VIOLATIONS: usize = 0;
    pub const MAX_REL_DEV: f64 = 1e-6;
    pub const FOCK_INTERFERENCE: f64 = 1e-12;
    pub const FOCK_U: f64 = 1e-12;
    pub const ECS_OCS_INTERFERENCE: f64 = 1e-10;
    pub const MEAN_FIELD: f64 = 1e-10;
    pub const COHERENT_U_LOW: f64 = 1e-10;
    pub const COHERENT_U_HIGH: f64 = 1e-12;
    pub const FACTORIZATION: f64 = 1e-10;
    pub const RESIDUAL: f64 = 1e-9;
    pub const PHASE_SPREAD: f64 = 1e-10;
    pub const CLASSICAL_SPREAD: f64 = 0.5;
    pub const DETUNED_FACTORIZATION: f64 = 1e-3;
    pub const ORACLE_MATCH: f64 = 1e-12;
    pub const PROBE_RESPONSE: f64 = 1e-14;
    pub const PER_OMEGA_MIN: f64 = 1e-3;
    pub const OMEGA_SUM: f64 = 1e-12;
    pub const DRIFT_FACTOR: f64 = 10.0;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("precondition failure: {0}")]
    Precondition(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Precondition(_) => EXIT_PRECONDITION,
            CliError::Check(_) => EXIT_CHECK,
        }
    }
}

fn pre<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Precondition(e.to_string())
}

fn cx(z: [f64; 2]) -> Complex64 {
    Complex64::new(z[0], z[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub name: String,
    pub group: String,
    pub magnitude: [f64; 2],
    pub phase: [f64; 2],
    pub phase_slope: [f64; 2],
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            name: "a".into(),
            group: "a".into(),
            magnitude: [1.0, 1.0],
            phase: [0.0, 0.0],
            phase_slope: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleculeConfig {
    pub levels: [f64; 3],
    /// [re, im] of d_10.
    pub d10: [f64; 2],
    pub d20: [f64; 2],
    pub continuum_start: f64,
    pub continuum_step: f64,
    pub continuum_count: usize,
    pub channels: Vec<ChannelConfig>,
}

impl Default for MoleculeConfig {
    fn default() -> Self {
        let arg = 0.7f64;
        Self {
            levels: [0.0, 1.0, 1.27],
            d10: [0.05, 0.0],
            d20: [0.05 * arg.cos(), 0.05 * arg.sin()],
            continuum_start: 3.0,
            continuum_step: 0.05,
            continuum_count: 32,
            channels: vec![
                ChannelConfig {
                    name: "a".into(),
                    group: "a".into(),
                    magnitude: [1.0, 1.0],
                    phase: [0.0, 0.4],
                    phase_slope: [0.2, 0.0],
                },
                ChannelConfig {
                    name: "b".into(),
                    group: "b".into(),
                    magnitude: [0.9, 1.0],
                    phase: [0.3, 0.4 + PI],
                    phase_slope: [0.0, 0.2],
                },
            ],
        }
    }
}

impl MoleculeConfig {
    pub fn build(&self) -> Result<MoleculeModel, CliError> {
        if self.continuum_count == 0 {
            return Err(CliError::Config("molecule.continuum_count must be > 0".into()));
        }
        let grid = uniform_grid(self.continuum_start, self.continuum_step, self.continuum_count);
        let channels = self
            .channels
            .iter()
            .map(|c| {
                Channel::from_profile(
                    &c.name,
                    &c.group,
                    &grid,
                    DipoleProfile { magnitude: c.magnitude, phase: c.phase, phase_slope: c.phase_slope },
                )
            })
            .collect();
        MoleculeModel::new(self.levels, cx(self.d10), cx(self.d20), grid, self.continuum_step, channels)
            .map_err(|e| CliError::Config(format!("molecule: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub amplitude: f64,
    pub width: f64,
    pub carrier: f64,
    pub phase: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self { amplitude: 0.05, width: 1.0, carrier: 2.64, phase: 0.0 }
    }
}

impl PulseConfig {
    fn build(&self, center: f64) -> GaussianPulse {
        GaussianPulse { amplitude: self.amplitude, center, width: self.width, carrier: self.carrier, phase: self.phase }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulsesConfig {
    pub x: PulseConfig,
    pub d: PulseConfig,
}

impl Default for PulsesConfig {
    fn default() -> Self {
        Self {
            x: PulseConfig { amplitude: 0.05, width: 5.0, carrier: 1.135, phase: 0.0 },
            d: PulseConfig { amplitude: 0.05, width: 1.0, carrier: 2.64, phase: 0.3 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldsConfig {
    pub field_scale_x: f64,
    pub field_scale_d: f64,
    /// Regulator as a fraction of the smallest mode spacing of each grid.
    pub epsilon_rel: f64,
    pub tail_tol: f64,
}

impl Default for FieldsConfig {
    fn default() -> Self {
        Self { field_scale_x: 1e-3, field_scale_d: 1e-2, epsilon_rel: 1e-3, tail_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub delay_start: f64,
    /// Span of the scan in units of the period 2π/ω_21.
    pub periods: f64,
    pub steps: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { delay_start: 40.0, periods: 1.0, steps: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZooConfig {
    /// Regulator for the which-way scenarios, relative to the mode spacing.
    pub epsilon_rel: f64,
    /// Coherent amplitude on the preparation modes not carrying the tested state.
    pub background_alpha: [f64; 2],
    pub fock_mode: usize,
    pub fock_n: u32,
    pub cat_mode: usize,
    pub ecs_alpha: f64,
    pub ocs_alpha: f64,
}

impl Default for ZooConfig {
    fn default() -> Self {
        Self {
            epsilon_rel: 1e-14,
            background_alpha: [0.5, 0.0],
            fock_mode: 0,
            fock_n: 1,
            cat_mode: 1,
            ecs_alpha: 1.0,
            ocs_alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncoherentConfig {
    pub levels: [f64; 3],
    pub d10: [f64; 2],
    pub d20: [f64; 2],
    pub energy: f64,
    pub delta_e: f64,
    pub channels: Vec<ChannelConfig>,
    pub mode_start: f64,
    pub mode_step: f64,
    pub mode_count: usize,
    pub field_scale: f64,
    pub epsilon_rel: f64,
    pub tail_tol: f64,
    /// The two modes carrying the two-mode input states.
    pub pair_modes: [usize; 2],
    pub coherent: [[f64; 2]; 2],
    pub fock: [u32; 2],
    pub ecs: [f64; 2],
    pub ocs: [f64; 2],
    /// Shift of E2 for the off-resonance check, in units of the mode spacing.
    pub detune_spacings: f64,
    /// Singly occupied modes of the Fock input used off resonance.
    pub detuned_fock_modes: Vec<usize>,
    pub phase_points: usize,
}

impl Default for IncoherentConfig {
    fn default() -> Self {
        Self {
            levels: [0.0, 1.0, 1.5],
            d10: [0.05, 0.0],
            d20: [0.03, 0.02],
            energy: 2.5,
            delta_e: 0.05,
            channels: vec![
                ChannelConfig {
                    name: "a".into(),
                    group: "a".into(),
                    magnitude: [1.0, 0.8],
                    phase: [0.0, 0.6],
                    phase_slope: [0.0, 0.0],
                },
                ChannelConfig {
                    name: "b".into(),
                    group: "b".into(),
                    magnitude: [0.5, 1.0],
                    phase: [1.0, -0.4],
                    phase_slope: [0.0, 0.0],
                },
            ],
            mode_start: 1.125,
            mode_step: 0.0125,
            mode_count: 21,
            field_scale: 1.0,
            epsilon_rel: 1e-11,
            tail_tol: 1e-12,
            pair_modes: [0, 20],
            coherent: [[0.6, 0.2], [-0.3, 0.5]],
            fock: [2, 1],
            ecs: [0.8, 0.6],
            ocs: [0.8, 0.6],
            detune_spacings: 10.0,
            detuned_fock_modes: vec![0, 6, 14, 20],
            phase_points: 16,
        }
    }
}

impl IncoherentConfig {
    pub fn molecule(&self, e2_shift: f64) -> Result<MoleculeModel, CliError> {
        let grid = vec![self.energy];
        let channels = self
            .channels
            .iter()
            .map(|c| {
                Channel::from_profile(
                    &c.name,
                    &c.group,
                    &grid,
                    DipoleProfile { magnitude: c.magnitude, phase: c.phase, phase_slope: c.phase_slope },
                )
            })
            .collect();
        let [e0, e1, e2] = self.levels;
        MoleculeModel::new([e0, e1, e2 + e2_shift], cx(self.d10), cx(self.d20), grid, self.delta_e, channels)
            .map_err(|e| CliError::Config(format!("incoherent: {e}")))
    }

    pub fn grid(&self, epsilon_rel: f64) -> Result<ModeGrid, CliError> {
        ModeGrid::with_relative_epsilon(
            uniform_grid(self.mode_start, self.mode_step, self.mode_count),
            self.field_scale,
            epsilon_rel,
        )
        .map_err(|e| CliError::Config(format!("incoherent grid: {e}")))
    }

    fn two_mode(&self, a: ModeState, b: ModeState) -> Result<Vec<ModeState>, CliError> {
        let [i, j] = self.pair_modes;
        if i >= self.mode_count || j >= self.mode_count || i == j {
            return Err(CliError::Config("incoherent.pair_modes must be two distinct grid modes".into()));
        }
        let mut f = vec![ModeState::vacuum(); self.mode_count];
        f[i] = a;
        f[j] = b;
        Ok(f)
    }

    /// The input families checked on resonance, by name.
    pub fn families(&self) -> Result<Vec<(&'static str, FieldState)>, CliError> {
        let build = |f: Vec<ModeState>| {
            FieldState::product_auto(&f, self.tail_tol, qc::TRUNCATION_LIMIT).map_err(|e| CliError::Config(e.to_string()))
        };
        Ok(vec![
            (
                "coherent",
                build(self.two_mode(ModeState::Coherent(cx(self.coherent[0])), ModeState::Coherent(cx(self.coherent[1])))?)?,
            ),
            ("fock", build(self.two_mode(ModeState::Fock(self.fock[0]), ModeState::Fock(self.fock[1]))?)?),
            ("ecs", build(self.two_mode(ModeState::Even(self.ecs[0]), ModeState::Even(self.ecs[1]))?)?),
            ("ocs", build(self.two_mode(ModeState::Odd(self.ocs[0]), ModeState::Odd(self.ocs[1]))?)?),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionConfig {
    pub n_ec: usize,
    pub n_nc: usize,
    pub n_ed: usize,
    pub n_nd: usize,
    pub omega_bins: usize,
    pub instances: usize,
    pub enforce_parity: bool,
    pub unitary: bool,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        Self { n_ec: 3, n_nc: 2, n_ed: 2, n_nd: 2, omega_bins: 8, instances: 50, enforce_parity: true, unitary: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasuresConfig {
    pub trials: usize,
    pub max_dim: usize,
}

impl Default for MeasuresConfig {
    fn default() -> Self {
        Self { trials: 500, max_dim: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub molecule: MoleculeConfig,
    pub pulses: PulsesConfig,
    pub fields: FieldsConfig,
    pub scan: ScanConfig,
    pub photon_zoo: ZooConfig,
    pub incoherent: IncoherentConfig,
    pub collision: CollisionConfig,
    pub measures: MeasuresConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            molecule: MoleculeConfig::default(),
            pulses: PulsesConfig::default(),
            fields: FieldsConfig::default(),
            scan: ScanConfig::default(),
            photon_zoo: ZooConfig::default(),
            incoherent: IncoherentConfig::default(),
            collision: CollisionConfig::default(),
            measures: MeasuresConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn pulse_pair(&self) -> PulsePair {
        PulsePair { x: self.pulses.x.build(0.0), d: self.pulses.d.build(self.scan.delay_start) }
    }

    pub fn delays(&self, mol: &MoleculeModel) -> Result<Vec<f64>, CliError> {
        if self.scan.steps == 0 {
            return Err(CliError::Config("scan.steps must be > 0".into()));
        }
        let span = self.scan.periods * qc::delay_period(mol);
        Ok((0..self.scan.steps)
            .map(|i| self.scan.delay_start + span * i as f64 / self.scan.steps as f64)
            .collect())
    }

    pub fn grids(&self, mol: &MoleculeModel, epsilon_rel: f64) -> Result<Grids, CliError> {
        Ok(Grids {
            x: qc::probe_grid_x(mol, self.fields.field_scale_x, epsilon_rel).map_err(pre)?,
            d: qc::probe_grid_d(mol, self.fields.field_scale_d, epsilon_rel).map_err(pre)?,
        })
    }
}

/// CSV text, summary and the named pass/fail checks of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub csv_name: &'static str,
    pub csv: String,
    pub extra: Vec<(&'static str, String)>,
    pub summary: Value,
    pub checks: Vec<(String, bool)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn spread_over_mean(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean
}

pub fn classical_scan(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let mol = cfg.molecule.build()?;
    let pulses = cfg.pulse_pair();
    let delays = cfg.delays(&mol)?;
    let table = classical_control::delay_scan(&mol, &pulses, &delays).map_err(pre)?;
    let groups = mol.groups();
    let mut per_group = serde_json::Map::new();
    for g in &groups {
        let totals: Vec<f64> = table.channel_rows(g).map(|r| r.total).collect();
        per_group.insert(g.clone(), json!({ "spread_over_mean": spread_over_mean(&totals) }));
    }
    let min_total = table.rows.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
    let ratios: Vec<f64> = table.rows.iter().map(|r| r.branching_ratio).collect();
    let ratio_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "command": "classical-scan",
        "seed": cfg.seed,
        "rows": table.rows.len(),
        "period": qc::delay_period(&mol),
        "min_total": min_total,
        "branching_ratio_min": ratio_min,
        "branching_ratio_max": ratio_max,
        "groups": per_group,
    });
    Ok(Outcome {
        csv_name: "classical_scan.csv",
        csv: table.to_csv(),
        extra: vec![],
        summary,
        checks: vec![("min_total >= 0".into(), min_total >= -1e-14)],
    })
}

/// Max relative deviation of the quantum/classical comparison at regulator
/// `epsilon_rel`.
pub fn correspondence_report(cfg: &ScenarioConfig, epsilon_rel: f64) -> Result<qc::CorrespondenceReport, CliError> {
    let mol = cfg.molecule.build()?;
    let grids = cfg.grids(&mol, epsilon_rel)?;
    let delays = cfg.delays(&mol)?;
    qc::classical_correspondence(&mol, &grids, &cfg.pulse_pair(), &delays, cfg.fields.tail_tol).map_err(pre)
}

pub fn quantum_compare(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let report = correspondence_report(cfg, cfg.fields.epsilon_rel)?;
    let max = report.max_rel_dev();
    let mol = cfg.molecule.build()?;
    let grids = cfg.grids(&mol, cfg.fields.epsilon_rel)?;
    let summary = json!({
        "command": "quantum-compare",
        "seed": cfg.seed,
        "rows": report.rows.len(),
        "epsilon_x": grids.x.epsilon(),
        "epsilon_d": grids.d.epsilon(),
        "modes_d": grids.d.len(),
        "max_rel_dev": max,
    });
    Ok(Outcome {
        csv_name: "quantum_compare.csv",
        csv: report.to_csv(),
        extra: vec![],
        summary,
        checks: vec![(format!("max_rel_dev {max:.3e} < {:e}", thresholds::MAX_REL_DEV), max < thresholds::MAX_REL_DEV)],
    })
}

pub fn zoo_records(cfg: &ScenarioConfig, epsilon_rel: f64) -> Result<Vec<qc::ZooRecord>, CliError> {
    let mol = cfg.molecule.build()?;
    let grids = cfg.grids(&mol, epsilon_rel)?;
    let z = &cfg.photon_zoo;
    if z.fock_mode >= grids.x.len() || z.cat_mode >= grids.x.len() {
        return Err(CliError::Config("photon_zoo mode index outside the preparation grid".into()));
    }
    let families = [
        PrepFamily::Coherent,
        PrepFamily::Fock { mode: z.fock_mode, n: z.fock_n },
        PrepFamily::Even { mode: z.cat_mode, alpha: z.ecs_alpha },
        PrepFamily::Odd { mode: z.cat_mode, alpha: z.ocs_alpha },
    ];
    families
        .iter()
        .map(|&f| {
            qc::photon_zoo_entry(&mol, &grids, &cfg.pulse_pair(), f, cx(z.background_alpha), cfg.fields.tail_tol)
                .map_err(pre)
        })
        .collect()
}

pub fn photon_zoo(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let records = zoo_records(cfg, cfg.photon_zoo.epsilon_rel)?;
    let reference = zoo_records(cfg, cfg.fields.epsilon_rel)?;
    let mut csv = String::from(
        "family,epsilon_rel,mean_field,max_abs_interference,max_abs_normalized_interference,min_u,max_u,bound_holds\n",
    );
    let mut fams = serde_json::Map::new();
    for (eps, list) in [(cfg.photon_zoo.epsilon_rel, &records), (cfg.fields.epsilon_rel, &reference)] {
        for r in list {
            let _ = writeln!(
                csv,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.family,
                eps,
                r.mean_field,
                r.max_abs_interference,
                r.max_abs_normalized_interference,
                r.min_u,
                r.max_u,
                r.bound_holds
            );
        }
    }
    for r in &records {
        fams.insert(
            r.family.clone(),
            json!({
                "mean_field": r.mean_field,
                "max_abs_normalized_interference": r.max_abs_normalized_interference,
                "min_u": r.min_u,
                "max_u": r.max_u,
                "bound_holds": r.bound_holds,
            }),
        );
    }
    let get = |name: &str| records.iter().find(|r| r.family == name).cloned();
    let (coh, fock, ecs, ocs) = (get("coherent").unwrap(), get("fock").unwrap(), get("ecs").unwrap(), get("ocs").unwrap());
    let ref_fock = reference.iter().find(|r| r.family == "fock").unwrap();
    let checks = vec![
        (
            format!("fock |interference| {:.3e} < 1e-12", fock.max_abs_normalized_interference),
            fock.max_abs_normalized_interference < thresholds::FOCK_INTERFERENCE,
        ),
        (format!("fock U {:.3e} < 1e-12", fock.max_u), fock.max_u < thresholds::FOCK_U),
        (
            format!("ecs/ocs <a> {:.3e}, {:.3e} < 1e-10", ecs.mean_field, ocs.mean_field),
            ecs.mean_field < thresholds::MEAN_FIELD && ocs.mean_field < thresholds::MEAN_FIELD,
        ),
        (
            format!(
                "ecs/ocs |interference| {:.3e}, {:.3e} < 1e-10",
                ecs.max_abs_normalized_interference, ocs.max_abs_normalized_interference
            ),
            ecs.max_abs_normalized_interference < thresholds::ECS_OCS_INTERFERENCE
                && ocs.max_abs_normalized_interference < thresholds::ECS_OCS_INTERFERENCE,
        ),
        (
            format!("coherent U in [{:.16}, {:.16}]", coh.min_u, coh.max_u),
            coh.min_u >= 1.0 - thresholds::COHERENT_U_LOW && coh.max_u <= 1.0 + thresholds::COHERENT_U_HIGH,
        ),
        ("U >= |normalized interference| everywhere".into(), records.iter().all(|r| r.bound_holds)),
    ];
    let summary = json!({
        "command": "photon-zoo",
        "seed": cfg.seed,
        "epsilon_rel": cfg.photon_zoo.epsilon_rel,
        "families": fams,
        "reference_epsilon_rel": cfg.fields.epsilon_rel,
        "reference_fock_u": ref_fock.max_u,
        "reference_fock_normalized_interference": ref_fock.max_abs_normalized_interference,
    });
    Ok(Outcome { csv_name: "photon_zoo.csv", csv, extra: vec![], summary, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationRow {
    pub family: String,
    pub channel: String,
    pub resonance_mismatch: f64,
    pub factorization_degree: f64,
    pub residual: f64,
}

/// Factorization degree and proportionality residual for every input family
/// and channel on resonance.
pub fn factorization_rows(cfg: &IncoherentConfig, epsilon_rel: f64) -> Result<Vec<FactorizationRow>, CliError> {
    let mol = cfg.molecule(0.0)?;
    inc::check_resonance(&mol, cfg.energy).map_err(pre)?;
    let grid = cfg.grid(epsilon_rel)?;
    let mut rows = Vec::new();
    for (name, psi) in cfg.families()? {
        for (q, ch) in mol.channels().iter().enumerate() {
            let p = inc::two_photon_paths(&mol, &grid, &psi, cfg.energy, q).map_err(pre)?;
            rows.push(FactorizationRow {
                family: name.into(),
                channel: ch.name.clone(),
                resonance_mismatch: inc::resonance_mismatch(&mol, cfg.energy),
                factorization_degree: inc::factorization_degree(&p).map_err(pre)?,
                residual: inc::proportionality_residual(&p).map_err(pre)?,
            });
        }
    }
    Ok(rows)
}

pub fn incoherent(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let ic = &cfg.incoherent;
    let rows = factorization_rows(ic, ic.epsilon_rel)?;
    let grid = ic.grid(ic.epsilon_rel)?;

    let shift = ic.detune_spacings * grid.min_spacing();
    let detuned = ic.molecule(shift)?;
    let mut ns = vec![0u32; ic.mode_count];
    for &k in &ic.detuned_fock_modes {
        if k >= ic.mode_count {
            return Err(CliError::Config("incoherent.detuned_fock_modes outside the grid".into()));
        }
        ns[k] = 1;
    }
    let fock = FieldState::fock(&ns, 1).map_err(pre)?;
    let mut detuned_u = Vec::new();
    for q in 0..detuned.channels().len() {
        let p = inc::two_photon_paths(&detuned, &grid, &fock, ic.energy, q).map_err(pre)?;
        detuned_u.push(inc::factorization_degree(&p).map_err(pre)?);
    }

    let mol = ic.molecule(0.0)?;
    let coherent = ic.families()?.into_iter().find(|(n, _)| *n == "coherent").unwrap().1;
    let settings = inc::phase_grid(ic.mode_count, ic.phase_points);
    let scan = inc::phase_insensitivity_scan(&mol, &grid, &coherent, ic.energy, &settings).map_err(pre)?;
    let phase_spread = scan.relative_spread();

    let classical = classical_contrast(cfg, ic.phase_points)?;

    let mut csv = String::from("family,channel,resonance_mismatch,factorization_degree,residual\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{:.16e},{:.16e},{:.16e}",
            r.family, r.channel, r.resonance_mismatch, r.factorization_degree, r.residual
        );
    }
    for (q, u) in detuned_u.iter().enumerate() {
        let _ = writeln!(csv, "fock_detuned,{},{:.16e},{:.16e},nan", mol.channels()[q].name, shift, u);
    }
    let min_u = rows.iter().map(|r| r.factorization_degree).fold(f64::INFINITY, f64::min);
    let max_res = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let detuned_max = detuned_u.iter().copied().fold(0.0, f64::max);
    let checks = vec![
        (format!("factorization degree {min_u:.16} >= 1 - 1e-10"), min_u >= 1.0 - thresholds::FACTORIZATION),
        (format!("proportionality residual {max_res:.3e} < 1e-9"), max_res < thresholds::RESIDUAL),
        (format!("phase spread/mean {phase_spread:.3e} < 1e-10"), phase_spread < thresholds::PHASE_SPREAD),
        (format!("classical spread/mean {classical:.3} > 0.5"), classical > thresholds::CLASSICAL_SPREAD),
        (
            format!("detuned factorization degree {detuned_max:.6} < 1 - 1e-3"),
            detuned_max < 1.0 - thresholds::DETUNED_FACTORIZATION,
        ),
    ];
    let summary = json!({
        "command": "incoherent",
        "seed": cfg.seed,
        "epsilon": grid.epsilon(),
        "min_factorization_degree": min_u,
        "max_residual": max_res,
        "detuning": shift,
        "detuned_fock_factorization_degree": detuned_max,
        "phase_spread_over_mean": phase_spread,
        "classical_delay_spread_over_mean": classical,
    });
    Ok(Outcome {
        csv_name: "incoherent.csv",
        csv,
        extra: vec![("incoherent_phase.csv", scan.to_csv())],
        summary,
        checks,
    })
}

/// Spread/mean of the first channel group's classical probability over one
/// delay period sampled at `points` delays.
pub fn classical_contrast(cfg: &ScenarioConfig, points: usize) -> Result<f64, CliError> {
    let mol = cfg.molecule.build()?;
    let period = qc::delay_period(&mol);
    let delays: Vec<f64> = (0..points.max(2))
        .map(|i| cfg.scan.delay_start + period * i as f64 / points.max(2) as f64)
        .collect();
    let table = classical_control::delay_scan(&mol, &cfg.pulse_pair(), &delays).map_err(pre)?;
    let g = &mol.groups()[0];
    let totals: Vec<f64> = table.channel_rows(g).map(|r| r.total).collect();
    Ok(spread_over_mean(&totals))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionInstance {
    pub instance: usize,
    pub seed: u64,
    pub direct: f64,
    pub reduced_state: f64,
    pub energy_probe: f64,
    pub momentum_probe: f64,
    pub max_per_omega: f64,
    pub max_omega_sum: f64,
}

/// Target probability for a T without n_D dependence,
/// recomputed as Tr(ρ_C O_C) from the reduced state.
fn reduced_route(s: &collision::SMatrix, t: &SecondProcessTensor) -> f64 {
    let rho = collision::reduced_state_c(s);
    let mut acc = Complex64::new(0.0, 0.0);
    for ((a, b), r) in &rho {
        if (a.ec, a.ed, a.om) == (b.ec, b.ed, b.om) {
            acc += r * t.get(a.ec, a.ed, 0, a.om, a.nc, b.nc);
        }
    }
    acc.re
}

pub fn collision_instances(cfg: &ScenarioConfig) -> Result<Vec<CollisionInstance>, CliError> {
    let c = &cfg.collision;
    let space = ChannelSpace::uniform(c.n_ec, c.n_nc, c.n_ed, c.n_nd, c.omega_bins);
    (0..c.instances)
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let s = collision::build_smatrix(&space, seed, c.enforce_parity, c.unitary).map_err(pre)?;
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x7f4a_7c15);
            let raw = SecondProcessTensor::random(&space, &mut rng);
            let t = SecondProcessTensor::from_fn(&space, |ec, ed, _, om, n, np| raw.get(ec, ed, 0, om, n, np));
            let direct = collision::target_probability(&s, &t).map_err(pre)?;
            let audit = collision::coherence_audit(&s, seed);
            Ok(CollisionInstance {
                instance: i,
                seed,
                direct,
                reduced_state: reduced_route(&s, &t),
                energy_probe: audit.energy_probe_response,
                momentum_probe: audit.momentum_probe_response,
                max_per_omega: audit.max_per_omega(),
                max_omega_sum: audit.max_omega_sum(),
            })
        })
        .collect()
}

pub fn collision_audit(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let list = collision_instances(cfg)?;
    let c = &cfg.collision;
    let space = ChannelSpace::uniform(c.n_ec, c.n_nc, c.n_ed, c.n_nd, c.omega_bins);
    let first = collision::build_smatrix(&space, cfg.seed, c.enforce_parity, c.unitary).map_err(pre)?;
    let audit = collision::coherence_audit(&first, cfg.seed);
    let mut csv = String::from(
        "instance,seed,direct,reduced_state,abs_diff,energy_probe,momentum_probe,max_per_omega,max_omega_sum\n",
    );
    for r in &list {
        let _ = writeln!(
            csv,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.instance,
            r.seed,
            r.direct,
            r.reduced_state,
            (r.direct - r.reduced_state).abs(),
            r.energy_probe,
            r.momentum_probe,
            r.max_per_omega,
            r.max_omega_sum
        );
    }
    let max_diff = list.iter().map(|r| (r.direct - r.reduced_state).abs()).fold(0.0, f64::max);
    let max_probe = list.iter().map(|r| r.energy_probe.max(r.momentum_probe)).fold(0.0, f64::max);
    let min_per_omega = list.iter().map(|r| r.max_per_omega).fold(f64::INFINITY, f64::min);
    let max_sum = list.iter().map(|r| r.max_omega_sum).fold(0.0, f64::max);
    let mut checks = vec![
        (format!("direct vs reduced state {max_diff:.3e} < 1e-12"), max_diff < thresholds::ORACLE_MATCH),
        (format!("probe response {max_probe:.3e} < 1e-14"), max_probe < thresholds::PROBE_RESPONSE),
    ];
    if c.enforce_parity && c.n_nc > 1 {
        checks.push((format!("per-Ω cross terms {min_per_omega:.3e} > 1e-3"), min_per_omega > thresholds::PER_OMEGA_MIN));
        checks.push((format!("Ω-sums {max_sum:.3e} < 1e-12"), max_sum < thresholds::OMEGA_SUM));
    }
    let summary = json!({
        "command": "collision-audit",
        "seed": cfg.seed,
        "instances": list.len(),
        "max_direct_vs_reduced_state": max_diff,
        "max_probe_response": max_probe,
        "min_instance_max_per_omega_cross_term": min_per_omega,
        "max_omega_sum": max_sum,
        "enforce_parity": c.enforce_parity,
        "audit_text": audit.summary_text(),
    });
    Ok(Outcome {
        csv_name: "collision_audit.csv",
        csv,
        extra: vec![("collision_cross_terms.csv", audit.to_csv())],
        summary,
        checks,
    })
}

pub fn measures_demo(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let m = &cfg.measures;
    let trials = measures::random_bound_sweep(m.trials, m.max_dim, cfg.seed).map_err(pre)?;
    let mut csv = String::from("trial,dim,u,i,holds\n");
    for t in &trials {
        let _ = writeln!(csv, "{},{},{:.16e},{:.16e},{}", t.trial, t.dim, t.u, t.i, t.holds);
    }
    let violations = trials.iter().filter(|t| !t.holds).count();
    let min_gap = trials.iter().map(|t| t.u - t.i).fold(f64::INFINITY, f64::min);
    let summary = json!({
        "command": "measures-demo",
        "seed": cfg.seed,
        "trials": trials.len(),
        "max_dim": m.max_dim,
        "violations": violations,
        "min_u_minus_i": min_gap,
    });
    Ok(Outcome {
        csv_name: "measures_demo.csv",
        csv,
        extra: vec![],
        summary,
        checks: vec![(format!("{violations} bound violations"), violations == thresholds::BOUND_VIOLATIONS)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub factor: f64,
    pub max_rel_dev: f64,
    pub min_factorization_degree: f64,
    pub max_residual: f64,
}

pub fn convergence_rows(cfg: &ScenarioConfig) -> Result<Vec<ConvergenceRow>, CliError> {
    [1.0, 0.5, 0.25]
        .iter()
        .map(|&f| {
            let rel = correspondence_report(cfg, cfg.fields.epsilon_rel * f)?.max_rel_dev();
            let rows = factorization_rows(&cfg.incoherent, cfg.incoherent.epsilon_rel * f)?;
            Ok(ConvergenceRow {
                factor: f,
                max_rel_dev: rel,
                min_factorization_degree: rows.iter().map(|r| r.factorization_degree).fold(f64::INFINITY, f64::min),
                max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
            })
        })
        .collect()
}

pub fn convergence(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let rows = convergence_rows(cfg)?;
    let mut csv = String::from("epsilon_factor,max_rel_dev,min_factorization_degree,max_residual\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            r.factor, r.max_rel_dev, r.min_factorization_degree, r.max_residual
        );
    }
    let drift = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(|r| (f(r) - f(&rows[0])).abs()).fold(0.0, f64::max);
    let d_rel = drift(|r| r.max_rel_dev);
    let d_fac = drift(|r| r.min_factorization_degree);
    let d_res = drift(|r| r.max_residual);
    let k = thresholds::DRIFT_FACTOR;
    let checks = vec![
        (format!("max_rel_dev drift {d_rel:.3e} < {:.0e}", k * thresholds::MAX_REL_DEV), d_rel < k * thresholds::MAX_REL_DEV),
        (
            format!("factorization drift {d_fac:.3e} < {:.0e}", k * thresholds::FACTORIZATION),
            d_fac < k * thresholds::FACTORIZATION,
        ),
        (format!("residual drift {d_res:.3e} < {:.0e}", k * thresholds::RESIDUAL), d_res < k * thresholds::RESIDUAL),
    ];
    let summary = json!({
        "command": "convergence",
        "seed": cfg.seed,
        "epsilon_factors": rows.iter().map(|r| r.factor).collect::<Vec<_>>(),
        "max_rel_dev_drift": d_rel,
        "factorization_degree_drift": d_fac,
        "residual_drift": d_res,
    });
    Ok(Outcome { csv_name: "convergence.csv", csv, extra: vec![], summary, checks })
}

#[derive(Debug, Parser)]
#[command(name = "cohctl", about = "Pathway interference and which-way information scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Regulator relative to the smallest mode spacing, for the grids this
    /// command uses.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Exit with status 3 unless every acceptance threshold is met.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    ClassicalScan(CommonArgs),
    QuantumCompare(CommonArgs),
    PhotonZoo(CommonArgs),
    Incoherent(CommonArgs),
    CollisionAudit(CommonArgs),
    MeasuresDemo(CommonArgs),
    /// Reruns the regulator-sensitive headline numbers at ε, ε/2, ε/4.
    Convergence(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::ClassicalScan(a)
            | Command::QuantumCompare(a)
            | Command::PhotonZoo(a)
            | Command::Incoherent(a)
            | Command::CollisionAudit(a)
            | Command::MeasuresDemo(a)
            | Command::Convergence(a) => a,
        }
    }
}

fn prepare_config(cmd: &Command) -> Result<ScenarioConfig, CliError> {
    let a = cmd.args();
    let mut cfg = match &a.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epsilon {
        if !(e > 0.0 && e.is_finite()) {
            return Err(CliError::Config(format!("--epsilon {e} must be > 0")));
        }
        match cmd {
            Command::PhotonZoo(_) => cfg.photon_zoo.epsilon_rel = e,
            Command::Incoherent(_) => cfg.incoherent.epsilon_rel = e,
            _ => cfg.fields.epsilon_rel = e,
        }
    }
    Ok(cfg)
}

/// Runs one subcommand on an already prepared config.
pub fn execute(cmd: &Command, cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::ClassicalScan(_) => classical_scan(cfg),
        Command::QuantumCompare(_) => quantum_compare(cfg),
        Command::PhotonZoo(_) => photon_zoo(cfg),
        Command::Incoherent(_) => incoherent(cfg),
        Command::CollisionAudit(_) => collision_audit(cfg),
        Command::MeasuresDemo(_) => measures_demo(cfg),
        Command::Convergence(_) => convergence(cfg),
    }
}

fn write_outputs(dir: &Path, outcome: &Outcome) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(outcome.csv_name), &outcome.csv).map_err(io)?;
    for (name, text) in &outcome.extra {
        std::fs::write(dir.join(name), text).map_err(io)?;
    }
    let mut summary = outcome.summary.clone();
    if let Value::Object(m) = &mut summary {
        m.insert(
            "checks".into(),
            Value::Array(outcome.checks.iter().map(|(n, ok)| json!({ "name": n, "pass": ok })).collect()),
        );
    }
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))? + "\n";
    std::fs::write(dir.join("summary.json"), text).map_err(io)?;
    Ok(())
}

/// Full CLI flow; returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    let result = prepare_config(&cli.command).and_then(|cfg| {
        let outcome = execute(&cli.command, &cfg)?;
        write_outputs(&cli.command.args().out, &outcome)?;
        for (name, ok) in &outcome.checks {
            println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
        }
        if cli.command.args().check && !outcome.passed() {
            return Err(CliError::Check("one or more thresholds not met".into()));
        }
        Ok(())
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cohctl: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(ScenarioConfig::from_json("{}").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn unknown_field_is_named() {
        let err = ScenarioConfig::from_json(r#"{"molecule": {"levelz": [0, 1, 2]}}"#).unwrap_err();
        assert!(err.to_string().contains("levelz"));
        assert_eq!(err.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn bad_levels_are_config_errors() {
        let cfg = ScenarioConfig::from_json(r#"{"molecule": {"levels": [0, 2, 1]}}"#).unwrap();
        assert!(matches!(cfg.molecule.build(), Err(CliError::Config(_))));
    }

    #[test]
    fn measures_demo_defaults() {
        let o = measures_demo(&ScenarioConfig::default()).unwrap();
        assert_eq!(o.summary["violations"], 0);
        assert_eq!(o.summary["trials"], 500);
        assert!(o.passed());
    }
}
