//! Discrete-channel audit of the coherence a bimolecular collision C + D can
//! leave in fragment C.
//!
//! The outgoing state is Σ S(E_C,n_C;E_D,n_D|Ω) √ΔΩ |K_C,E_C,n_C⟩|K_D,E_D,n_D⟩.
//! The momenta K_C, K_D are fixed on-shell by (E_C, E_D, Ω) and appear only as
//! labels. Tracing out D keeps C-coherences only between n_C labels that share
//! (E_C, E_D, Ω); a later process measuring C sees them through the tensor
//! T^{n_C,n_C′}_{E_C,E_D,n_D}(Ω).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::linalg;

/// Hermiticity tolerance on T.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("invalid channel space: {0}")]
    InvalidSpace(String),
    #[error("parity projection needs at least as many Ω bins ({bins}) as n_C labels ({labels})")]
    DegenerateSpace { bins: usize, labels: usize },
    #[error("S and T live on different channel spaces")]
    GridMismatch,
    #[error("T is not hermitian in (n_C, n_C′): deviation {deviation:.3e}")]
    NotHermitian { deviation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpace {
    pub e_c: Vec<f64>,
    pub n_c: usize,
    pub e_d: Vec<f64>,
    pub n_d: usize,
    pub omega_bins: usize,
    pub delta_omega: f64,
}

impl ChannelSpace {
    /// Evenly spaced internal energies and Ω bins covering 4π.
    pub fn uniform(n_ec: usize, n_c: usize, n_ed: usize, n_d: usize, omega_bins: usize) -> Self {
        Self {
            e_c: (0..n_ec).map(|i| i as f64).collect(),
            n_c,
            e_d: (0..n_ed).map(|i| i as f64).collect(),
            n_d,
            omega_bins,
            delta_omega: 4.0 * std::f64::consts::PI / omega_bins.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        if self.e_c.is_empty() || self.e_d.is_empty() || self.n_c == 0 || self.n_d == 0 || self.omega_bins == 0 {
            return Err(CollisionError::InvalidSpace("every dimension must be nonempty".into()));
        }
        if !(self.delta_omega > 0.0 && self.delta_omega.is_finite()) {
            return Err(CollisionError::InvalidSpace(format!("ΔΩ = {} must be > 0", self.delta_omega)));
        }
        Ok(())
    }

    pub fn n_ec(&self) -> usize {
        self.e_c.len()
    }

    pub fn n_ed(&self) -> usize {
        self.e_d.len()
    }

    pub fn size(&self) -> usize {
        self.n_ec() * self.n_c * self.n_ed() * self.n_d * self.omega_bins
    }

    /// Flat index of (E_C, n_C, E_D, n_D, Ω).
    pub fn index(&self, ec: usize, nc: usize, ed: usize, nd: usize, om: usize) -> usize {
        (((ec * self.n_c + nc) * self.n_ed() + ed) * self.n_d + nd) * self.omega_bins + om
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    space: ChannelSpace,
    data: Vec<Complex64>,
}

impl SMatrix {
    pub fn new(space: ChannelSpace, data: Vec<Complex64>) -> Result<Self, CollisionError> {
        space.validate()?;
        if data.len() != space.size() {
            return Err(CollisionError::InvalidSpace(format!("{} amplitudes for {} channels", data.len(), space.size())));
        }
        Ok(Self { space, data })
    }

    pub fn space(&self) -> &ChannelSpace {
        &self.space
    }

    pub fn get(&self, ec: usize, nc: usize, ed: usize, nd: usize, om: usize) -> Complex64 {
        self.data[self.space.index(ec, nc, ed, nd, om)]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Σ |S|² ΔΩ.
    pub fn total_probability(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.space.delta_omega
    }

    /// Σ_Ω ΔΩ S(…,n_C,…)S*(…,n_C′,…) at fixed (E_C, E_D, n_D).
    pub fn omega_sum(&self, ec: usize, ed: usize, nd: usize, nc: usize, ncp: usize) -> Complex64 {
        (0..self.space.omega_bins)
            .map(|om| self.get(ec, nc, ed, nd, om) * self.get(ec, ncp, ed, nd, om).conj())
            .sum::<Complex64>()
            * self.space.delta_omega
    }
}

/// Random S on `space`, normalized so Σ|S|²ΔΩ = 1.
///
/// `unitary` draws the amplitudes as one column of a Haar unitary (QR of a
/// Gaussian matrix). `enforce_parity` makes the Ω-integrated cross terms
/// between distinct n_C vanish by weighted Gram–Schmidt over Ω.
pub fn build_smatrix(
    space: &ChannelSpace,
    seed: u64,
    enforce_parity: bool,
    unitary: bool,
) -> Result<SMatrix, CollisionError> {
    space.validate()?;
    if enforce_parity && space.n_c > 1 && space.omega_bins < space.n_c {
        return Err(CollisionError::DegenerateSpace { bins: space.omega_bins, labels: space.n_c });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = space.size();
    let mut data: Vec<Complex64> = if unitary {
        let m = DMatrix::from_fn(n, n, |_, _| linalg::gaussian(&mut rng));
        let q = m.qr().q();
        q.column(0).iter().copied().collect()
    } else {
        linalg::random_vector(n, &mut rng)
    };
    if enforce_parity {
        project_parity(space, &mut data);
    }
    let norm = (data.iter().map(|z| z.norm_sqr()).sum::<f64>() * space.delta_omega).sqrt();
    if norm == 0.0 {
        return Err(CollisionError::InvalidSpace("all amplitudes vanished".into()));
    }
    data.iter_mut().for_each(|z| *z /= norm);
    SMatrix::new(space.clone(), data)
}

fn project_parity(space: &ChannelSpace, data: &mut [Complex64]) {
    let w = space.delta_omega;
    for ec in 0..space.n_ec() {
        for ed in 0..space.n_ed() {
            for nd in 0..space.n_d {
                let idx = |nc: usize, om: usize| space.index(ec, nc, ed, nd, om);
                for _ in 0..2 {
                    for nc in 1..space.n_c {
                        for prev in 0..nc {
                            let mut num = Complex64::new(0.0, 0.0);
                            let mut den = 0.0;
                            for om in 0..space.omega_bins {
                                num += data[idx(prev, om)].conj() * data[idx(nc, om)] * w;
                                den += data[idx(prev, om)].norm_sqr() * w;
                            }
                            if den > 0.0 {
                                let c = num / den;
                                for om in 0..space.omega_bins {
                                    let p = data[idx(prev, om)];
                                    data[idx(nc, om)] -= c * p;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// T^{n_C,n_C′}_{E_C,E_D,n_D}(Ω) stored as one n_C × n_C block per
/// (E_C, E_D, n_D, Ω).
#[derive(Debug, Clone, PartialEq)]
pub struct SecondProcessTensor {
    space: ChannelSpace,
    blocks: Vec<Vec<Complex64>>,
}

impl SecondProcessTensor {
    fn block_index(space: &ChannelSpace, ec: usize, ed: usize, nd: usize, om: usize) -> usize {
        ((ec * space.n_ed() + ed) * space.n_d + nd) * space.omega_bins + om
    }

    fn block_count(space: &ChannelSpace) -> usize {
        space.n_ec() * space.n_ed() * space.n_d * space.omega_bins
    }

    pub fn from_fn<F>(space: &ChannelSpace, mut f: F) -> Self
    where
        F: FnMut(usize, usize, usize, usize, usize, usize) -> Complex64,
    {
        let mut blocks = Vec::with_capacity(Self::block_count(space));
        for ec in 0..space.n_ec() {
            for ed in 0..space.n_ed() {
                for nd in 0..space.n_d {
                    for om in 0..space.omega_bins {
                        let mut b = vec![Complex64::new(0.0, 0.0); space.n_c * space.n_c];
                        for n in 0..space.n_c {
                            for np in 0..space.n_c {
                                b[n * space.n_c + np] = f(ec, ed, nd, om, n, np);
                            }
                        }
                        blocks.push(b);
                    }
                }
            }
        }
        Self { space: space.clone(), blocks }
    }

    /// T^{n,n′} = δ_{nn′}: detects every outgoing channel.
    pub fn identity(space: &ChannelSpace) -> Self {
        Self::from_fn(space, |_, _, _, _, n, np| Complex64::new(if n == np { 1.0 } else { 0.0 }, 0.0))
    }

    /// Random T with every block a hermitian contraction, 0 ≤ T ≤ 1.
    pub fn random<R: Rng + ?Sized>(space: &ChannelSpace, rng: &mut R) -> Self {
        let nc = space.n_c;
        let blocks = (0..Self::block_count(space))
            .map(|_| {
                let basis = linalg::random_unitary_basis(nc, rng);
                let lambda: Vec<f64> = (0..nc).map(|_| rng.gen::<f64>()).collect();
                let mut b = vec![Complex64::new(0.0, 0.0); nc * nc];
                for (v, l) in basis.iter().zip(&lambda) {
                    for n in 0..nc {
                        for np in 0..nc {
                            // T^{n,n′} = ⟨n′|O|n⟩ with O = Σ λ |v⟩⟨v|.
                            b[n * nc + np] += v[np] * v[n].conj() * *l;
                        }
                    }
                }
                b
            })
            .collect();
        Self { space: space.clone(), blocks }
    }

    pub fn space(&self) -> &ChannelSpace {
        &self.space
    }

    pub fn get(&self, ec: usize, ed: usize, nd: usize, om: usize, n: usize, np: usize) -> Complex64 {
        self.blocks[Self::block_index(&self.space, ec, ed, nd, om)][n * self.space.n_c + np]
    }

    pub fn hermiticity_error(&self) -> f64 {
        let nc = self.space.n_c;
        self.blocks
            .iter()
            .flat_map(|b| (0..nc).flat_map(move |n| (0..nc).map(move |np| (b[n * nc + np] - b[np * nc + n].conj()).norm())))
            .fold(0.0, f64::max)
    }
}

/// P_t = Σ_Ω ΔΩ Σ_{E_C,E_D,n_D} Σ_{n_C,n_C′} S(n_C) S*(n_C′) T^{n_C,n_C′}.
pub fn target_probability(s: &SMatrix, t: &SecondProcessTensor) -> Result<f64, CollisionError> {
    if s.space != t.space {
        return Err(CollisionError::GridMismatch);
    }
    let deviation = t.hermiticity_error();
    if deviation > HERMITIAN_TOL {
        return Err(CollisionError::NotHermitian { deviation });
    }
    let sp = &s.space;
    let mut acc = Complex64::new(0.0, 0.0);
    for ec in 0..sp.n_ec() {
        for ed in 0..sp.n_ed() {
            for nd in 0..sp.n_d {
                for om in 0..sp.omega_bins {
                    for n in 0..sp.n_c {
                        let a = s.get(ec, n, ed, nd, om);
                        for np in 0..sp.n_c {
                            acc += a * s.get(ec, np, ed, nd, om).conj() * t.get(ec, ed, nd, om, n, np);
                        }
                    }
                }
            }
        }
    }
    Ok(acc.re * sp.delta_omega)
}

/// C-fragment label (E_C, K_C ↔ (E_D, Ω), n_C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CLabel {
    pub ec: usize,
    pub ed: usize,
    pub om: usize,
    pub nc: usize,
}

/// D-fragment label (E_D, K_D ↔ (E_C, Ω), n_D).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct DLabel {
    ec: usize,
    ed: usize,
    om: usize,
    nd: usize,
}

/// ρ_C = Tr_D |Ψ⟩⟨Ψ|, keyed by (bra label, ket label) → ⟨a|ρ_C|b⟩. Only
/// nonzero entries are stored.
pub fn reduced_state_c(s: &SMatrix) -> BTreeMap<(CLabel, CLabel), Complex64> {
    let sp = &s.space;
    let mut terms: Vec<(CLabel, DLabel, Complex64)> = Vec::with_capacity(sp.size());
    let root = sp.delta_omega.sqrt();
    for ec in 0..sp.n_ec() {
        for nc in 0..sp.n_c {
            for ed in 0..sp.n_ed() {
                for nd in 0..sp.n_d {
                    for om in 0..sp.omega_bins {
                        let a = s.get(ec, nc, ed, nd, om) * root;
                        terms.push((CLabel { ec, ed, om, nc }, DLabel { ec, ed, om, nd }, a));
                    }
                }
            }
        }
    }
    let mut by_d: BTreeMap<DLabel, Vec<(CLabel, Complex64)>> = BTreeMap::new();
    for (c, d, a) in terms {
        by_d.entry(d).or_default().push((c, a));
    }
    let mut rho = BTreeMap::new();
    for group in by_d.values() {
        for &(ca, a) in group {
            for &(cb, b) in group {
                *rho.entry((ca, cb)).or_insert(Complex64::new(0.0, 0.0)) += a * b.conj();
            }
        }
    }
    rho
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossTerm {
    pub ec: usize,
    pub ed: usize,
    pub nd: usize,
    pub nc: usize,
    pub nc_prime: usize,
    /// `None` for the Ω-integrated sum.
    pub omega_bin: Option<usize>,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Largest |Tr(ρ_C O)| over probe operators supported on C-coherences
    /// between distinct E_C.
    pub energy_probe_response: f64,
    /// Same for coherences between distinct K_C at equal E_C.
    pub momentum_probe_response: f64,
    /// Number of probe slots of each kind that were exercised.
    pub probe_slots: (usize, usize),
    pub per_omega: Vec<CrossTerm>,
    pub omega_sums: Vec<CrossTerm>,
}

impl AuditReport {
    pub fn max_per_omega(&self) -> f64 {
        self.per_omega.iter().map(|c| c.value.norm()).fold(0.0, f64::max)
    }

    pub fn max_omega_sum(&self) -> f64 {
        self.omega_sums.iter().map(|c| c.value.norm()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,ec,ed,nd,nc,nc_prime,omega_bin,re,im,abs\n");
        for (kind, list) in [("per_omega", &self.per_omega), ("omega_sum", &self.omega_sums)] {
            for c in list {
                let om = c.omega_bin.map_or_else(|| "all".to_string(), |o| o.to_string());
                let _ = writeln!(
                    s,
                    "{kind},{},{},{},{},{},{om},{:.16e},{:.16e},{:.16e}",
                    c.ec,
                    c.ed,
                    c.nd,
                    c.nc,
                    c.nc_prime,
                    c.value.re,
                    c.value.im,
                    c.value.norm()
                );
            }
        }
        s
    }

    pub fn summary_text(&self) -> String {
        format!(
            "collision coherence audit\n\
             probe response, distinct E_C coherences: {:.3e} over {} slots\n\
             probe response, distinct K_C coherences: {:.3e} over {} slots\n\
             degenerate n_C cross terms per Ω: max |S S*| = {:.3e} ({} terms)\n\
             degenerate n_C cross terms integrated over Ω: max = {:.3e} ({} sums)\n",
            self.energy_probe_response,
            self.probe_slots.0,
            self.momentum_probe_response,
            self.probe_slots.1,
            self.max_per_omega(),
            self.per_omega.len(),
            self.max_omega_sum(),
            self.omega_sums.len()
        )
    }
}

/// Coherence audit of one S: tests the reduced state of C against random
/// probe operators that only couple distinct E_C, or equal E_C with distinct
/// K_C, and lists the degenerate n_C cross terms per Ω and integrated over Ω.
pub fn coherence_audit(s: &SMatrix, seed: u64) -> AuditReport {
    let sp = &s.space;
    let rho = reduced_state_c(s);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let labels: Vec<CLabel> = (0..sp.n_ec())
        .flat_map(|ec| {
            (0..sp.n_ed()).flat_map(move |ed| {
                (0..sp.omega_bins).flat_map(move |om| (0..sp.n_c).map(move |nc| CLabel { ec, ed, om, nc }))
            })
        })
        .collect();
    let mut energy = (Complex64::new(0.0, 0.0), 0usize);
    let mut momentum = (Complex64::new(0.0, 0.0), 0usize);
    for a in &labels {
        for b in &labels {
            let slot = if a.ec != b.ec {
                &mut energy
            } else if (a.ed, a.om) != (b.ed, b.om) {
                &mut momentum
            } else {
                continue;
            };
            // Tr(ρ O) picks ⟨a|ρ|b⟩⟨b|O|a⟩ for a probe O with a random entry there.
            let o = linalg::gaussian(&mut rng);
            let r = rho.get(&(*a, *b)).copied().unwrap_or_default();
            slot.0 += r * o;
            slot.1 += 1;
        }
    }
    let mut per_omega = Vec::new();
    let mut omega_sums = Vec::new();
    for ec in 0..sp.n_ec() {
        for ed in 0..sp.n_ed() {
            for nd in 0..sp.n_d {
                for nc in 0..sp.n_c {
                    for ncp in (nc + 1)..sp.n_c {
                        for om in 0..sp.omega_bins {
                            per_omega.push(CrossTerm {
                                ec,
                                ed,
                                nd,
                                nc,
                                nc_prime: ncp,
                                omega_bin: Some(om),
                                value: s.get(ec, nc, ed, nd, om) * s.get(ec, ncp, ed, nd, om).conj(),
                            });
                        }
                        omega_sums.push(CrossTerm {
                            ec,
                            ed,
                            nd,
                            nc,
                            nc_prime: ncp,
                            omega_bin: None,
                            value: s.omega_sum(ec, ed, nd, nc, ncp),
                        });
                    }
                }
            }
        }
    }
    AuditReport {
        energy_probe_response: energy.0.norm(),
        momentum_probe_response: momentum.0.norm(),
        probe_slots: (energy.1, momentum.1),
        per_omega,
        omega_sums,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> ChannelSpace {
        ChannelSpace::uniform(3, 2, 2, 2, 8)
    }

    #[test]
    fn deterministic_and_normalized() {
        let a = build_smatrix(&space(), 7, false, false).unwrap();
        let b = build_smatrix(&space(), 7, false, false).unwrap();
        assert_eq!(a, b);
        assert!((a.total_probability() - 1.0).abs() < 1e-12);
        let u = build_smatrix(&space(), 7, true, true).unwrap();
        assert!((u.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_projection() {
        let s = build_smatrix(&space(), 3, true, false).unwrap();
        let r = coherence_audit(&s, 1);
        assert!(r.max_omega_sum() < 1e-12, "{}", r.max_omega_sum());
        assert!(r.max_per_omega() > 1e-3);
        let free = build_smatrix(&space(), 3, false, false).unwrap();
        assert!(coherence_audit(&free, 1).max_omega_sum() > 1e-6);
    }

    #[test]
    fn single_bin_parity_refused() {
        let sp = ChannelSpace::uniform(2, 2, 1, 1, 1);
        assert_eq!(
            build_smatrix(&sp, 0, true, false).unwrap_err(),
            CollisionError::DegenerateSpace { bins: 1, labels: 2 }
        );
    }

    #[test]
    fn identity_tensor_gives_unit_probability() {
        let s = build_smatrix(&space(), 11, false, false).unwrap();
        let p = target_probability(&s, &SecondProcessTensor::identity(&space())).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_tensor_gives_block_population() {
        let sp = space();
        let s = build_smatrix(&sp, 5, false, false).unwrap();
        let t = SecondProcessTensor::from_fn(&sp, |ec, _, _, _, n, np| {
            Complex64::new(if ec == 1 && n == np { 1.0 } else { 0.0 }, 0.0)
        });
        let mut want = 0.0;
        for nc in 0..sp.n_c {
            for ed in 0..sp.n_ed() {
                for nd in 0..sp.n_d {
                    for om in 0..sp.omega_bins {
                        want += s.get(1, nc, ed, nd, om).norm_sqr() * sp.delta_omega;
                    }
                }
            }
        }
        assert!((target_probability(&s, &t).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let sp = space();
        let s = build_smatrix(&sp, 5, false, false).unwrap();
        let t = SecondProcessTensor::from_fn(&sp, |_, _, _, _, n, np| Complex64::new(0.0, if n < np { 1.0 } else { 0.0 }));
        assert!(matches!(target_probability(&s, &t), Err(CollisionError::NotHermitian { .. })));
    }

    #[test]
    fn probes_see_nothing() {
        let s = build_smatrix(&space(), 9, false, false).unwrap();
        let r = coherence_audit(&s, 2);
        assert_eq!(r.energy_probe_response, 0.0);
        assert_eq!(r.momentum_probe_response, 0.0);
        assert!(r.probe_slots.0 > 0 && r.probe_slots.1 > 0);
    }

    #[test]
    fn single_label_has_no_cross_terms() {
        let sp = ChannelSpace::uniform(2, 1, 2, 1, 4);
        let r = coherence_audit(&build_smatrix(&sp, 1, true, false).unwrap(), 0);
        assert!(r.per_omega.is_empty() && r.omega_sums.is_empty());
    }

    #[test]
    fn reduced_state_reproduces_target_probability() {
        let sp = space();
        let s = build_smatrix(&sp, 21, false, false).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let t = SecondProcessTensor::random(&sp, &mut rng);
        let rho = reduced_state_c(&s);
        // Tr(ρ_C O) when O acts within fixed (E_C, E_D, Ω) and T carries no n_D dependence.
        let t = SecondProcessTensor::from_fn(&sp, |ec, ed, _, om, n, np| t.get(ec, ed, 0, om, n, np));
        let mut via_rho = Complex64::new(0.0, 0.0);
        for ((a, b), r) in &rho {
            if (a.ec, a.ed, a.om) == (b.ec, b.ed, b.om) {
                // ⟨a|ρ|b⟩⟨b|O|a⟩, ⟨b|O|a⟩ = T^{a,b}.
                via_rho += r * t.get(a.ec, a.ed, 0, a.om, a.nc, b.nc);
            }
        }
        let p = target_probability(&s, &t).unwrap();
        assert!((via_rho.re - p).abs() < 1e-12 && via_rho.im.abs() < 1e-12);
    }
}
