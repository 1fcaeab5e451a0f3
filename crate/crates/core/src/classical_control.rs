//! Two-pulse control with classical Gaussian fields in first-order
//! perturbation theory: a preparation pulse `x` creates c1|E1⟩ + c2|E2⟩, a
//! later dissociation pulse `d` carries both levels into the continuum, and
//! the delay t_d − t_x steers the interference between the two routes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::molecule::{MoleculeError, MoleculeModel};

/// |c_m| above this triggers a first-order-regime warning.
pub const WEAK_FIELD_LIMIT: f64 = 0.1;
/// Pulses count as separated when t_d − t_x > SEPARATION_WIDTHS (τ_x + τ_d).
pub const SEPARATION_WIDTHS: f64 = 5.0;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Molecule(#[from] MoleculeError),
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("branching ratio needs at least two channel groups, found {0}")]
    TooFewGroups(usize),
}

/// E(t) = A exp(−(t−t_c)²/2τ²) exp(−i(ω_c t + φ)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub carrier: f64,
    pub phase: f64,
}

impl GaussianPulse {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(ControlError::InvalidPulse(format!("width {} must be > 0", self.width)));
        }
        if !(self.carrier > 0.0 && self.carrier.is_finite()) {
            return Err(ControlError::InvalidPulse(format!("carrier {} must be > 0", self.carrier)));
        }
        if !(self.amplitude.is_finite() && self.center.is_finite() && self.phase.is_finite()) {
            return Err(ControlError::InvalidPulse("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn time_field(&self, t: f64) -> Complex64 {
        let s = (t - self.center) / self.width;
        Complex64::from_polar(self.amplitude * (-0.5 * s * s).exp(), -(self.carrier * t + self.phase))
    }

    /// (1/2π) ∫dt E(t) e^{iωt}
    /// = (Aτ/√2π) e^{−iφ} e^{i(ω−ω_c)t_c} e^{−τ²(ω−ω_c)²/2}.
    pub fn spectral_amplitude(&self, omega: f64) -> Complex64 {
        let dw = omega - self.carrier;
        let mag = self.amplitude * self.width / SQRT_2PI * (-0.5 * (self.width * dw).powi(2)).exp();
        Complex64::from_polar(mag, dw * self.center - self.phase)
    }
}

/// Preparation pulse `x` followed by dissociation pulse `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePair {
    pub x: GaussianPulse,
    pub d: GaussianPulse,
}

impl PulsePair {
    pub fn delay(&self) -> f64 {
        self.d.center - self.x.center
    }

    /// Same pulses with `d` moved so that t_d − t_x = delay.
    pub fn with_delay(&self, delay: f64) -> Self {
        let mut p = *self;
        p.d.center = p.x.center + delay;
        p
    }

    pub fn is_separated(&self) -> bool {
        self.delay() > SEPARATION_WIDTHS * (self.x.width + self.d.width)
    }
}

/// c_m = (√2π / i) d_{m0} E_x(ω_{E_mE_0}) for m = 1, 2.
pub fn prep_coefficients(mol: &MoleculeModel, x: &GaussianPulse) -> [Complex64; 2] {
    let c = [1usize, 2].map(|m| {
        let d = mol.d_bound(m).unwrap_or_default();
        Complex64::new(0.0, -SQRT_2PI) * d * x.spectral_amplitude(mol.omega(m, 0))
    });
    if c.iter().any(|z| z.norm() > WEAK_FIELD_LIMIT) {
        log::warn!(
            "preparation coefficients |c1| = {:.3e}, |c2| = {:.3e} are not small; first-order treatment is questionable",
            c[0].norm(),
            c[1].norm()
        );
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProbability {
    pub diagonal: f64,
    pub interference: f64,
    pub total: f64,
}

/// Probability density of |E, q⁻⟩ after both pulses, split into the two
/// single-route terms and the cross term
/// 4π |c1 c2* E_d(ω_{EE1}) E_d*(ω_{EE2})| |d^q_{12}| cos(ω_{21}(t_d−t_x) + α^q_{12} + θ).
pub fn channel_probability(
    mol: &MoleculeModel,
    pulses: &PulsePair,
    e: f64,
    q: usize,
) -> Result<ChannelProbability, ControlError> {
    let index = mol.energy_index(e)?;
    let c = prep_coefficients(mol, &pulses.x);
    probability_at(mol, pulses, &c, index, q)
}

pub(crate) fn probability_at(
    mol: &MoleculeModel,
    pulses: &PulsePair,
    c: &[Complex64; 2],
    index: usize,
    q: usize,
) -> Result<ChannelProbability, ControlError> {
    let e = mol.continuum()[index];
    let ed1 = pulses.d.spectral_amplitude(e - mol.level(1));
    let ed2 = pulses.d.spectral_amplitude(e - mol.level(2));
    let d11 = mol.d_cross_at(index, q, 1, 1)?.re;
    let d22 = mol.d_cross_at(index, q, 2, 2)?.re;
    let d12 = mol.d_cross_at(index, q, 1, 2)?;
    let diagonal = 2.0 * PI * (c[0].norm_sqr() * d11 * ed1.norm_sqr() + c[1].norm_sqr() * d22 * ed2.norm_sqr());
    let envelope = 4.0 * PI * (c[0] * c[1].conj() * ed1 * ed2.conj()).norm() * d12.norm();
    let phase = mol.omega(2, 1) * pulses.delay() + d12.arg() + mol.theta();
    let interference = envelope * phase.cos();
    Ok(ChannelProbability { diagonal, interference, total: diagonal + interference })
}

/// Amplitude of the cross term, 4π|c1 c2* E_d1 E_d2*||d^q_{12}|.
pub(crate) fn interference_envelope(
    mol: &MoleculeModel,
    pulses: &PulsePair,
    c: &[Complex64; 2],
    index: usize,
    q: usize,
) -> Result<f64, ControlError> {
    let e = mol.continuum()[index];
    let ed1 = pulses.d.spectral_amplitude(e - mol.level(1));
    let ed2 = pulses.d.spectral_amplitude(e - mol.level(2));
    let d12 = mol.d_cross_at(index, q, 1, 2)?;
    Ok(4.0 * PI * (c[0] * c[1].conj() * ed1 * ed2.conj()).norm() * d12.norm())
}

/// Delay at which the cross term of (E, q) is most negative, reduced to
/// [0, 2π/ω_21).
pub fn predicted_minimum(mol: &MoleculeModel, e: f64, q: usize) -> Result<f64, ControlError> {
    let w21 = mol.omega(2, 1);
    let period = 2.0 * PI / w21;
    let t = (PI - mol.alpha(e, q)? - mol.theta()) / w21;
    Ok(t.rem_euclid(period))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub delay: f64,
    pub channel: String,
    pub diagonal: f64,
    pub interference: f64,
    pub total: f64,
    pub branching_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delay,channel,diagonal,interference,total,branching_ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.delay, r.channel, r.diagonal, r.interference, r.total, r.branching_ratio
            );
        }
        s
    }

    /// Rows of one channel group in delay order.
    pub fn channel_rows<'a>(&'a self, channel: &'a str) -> impl Iterator<Item = &'a ScanRow> + 'a {
        self.rows.iter().filter(move |r| r.channel == channel)
    }
}

/// For each delay, the energy-integrated probability Σ_E ΔE P(E, q) of every
/// channel group, with branching ratio P(group 0)/P(group 1).
pub fn delay_scan(mol: &MoleculeModel, pulses: &PulsePair, delays: &[f64]) -> Result<ScanTable, ControlError> {
    if delays.is_empty() {
        return Err(ControlError::EmptyGrid("delay"));
    }
    pulses.x.validate()?;
    pulses.d.validate()?;
    let groups = mol.groups();
    if groups.len() < 2 {
        return Err(ControlError::TooFewGroups(groups.len()));
    }
    let c = prep_coefficients(mol, &pulses.x);
    let mut table = ScanTable::default();
    let mut warned = false;
    for &delay in delays {
        let p = pulses.with_delay(delay);
        if !p.is_separated() && !warned {
            log::warn!("delay {delay} does not separate the pulses by {SEPARATION_WIDTHS}(τx+τd)");
            warned = true;
        }
        let mut sums = vec![[0.0f64; 3]; groups.len()];
        for (q, ch) in mol.channels().iter().enumerate() {
            let g = groups.iter().position(|x| *x == ch.group).unwrap_or(0);
            for index in 0..mol.continuum().len() {
                let r = probability_at(mol, &p, &c, index, q)?;
                sums[g][0] += r.diagonal * mol.delta_e();
                sums[g][1] += r.interference * mol.delta_e();
                sums[g][2] += r.total * mol.delta_e();
            }
        }
        let ratio = sums[0][2] / sums[1][2];
        for (g, name) in groups.iter().enumerate() {
            table.rows.push(ScanRow {
                delay,
                channel: name.clone(),
                diagonal: sums[g][0],
                interference: sums[g][1],
                total: sums[g][2],
                branching_ratio: ratio,
            });
        }
    }
    Ok(table)
}
