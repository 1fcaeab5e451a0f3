//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::Instant;

use coherent_control::cli::{self, ScenarioConfig};
use coherent_control::collision::{self, ChannelSpace, SMatrix, SecondProcessTensor};
use coherent_control::fock::FieldState;
use coherent_control::incoherent_control as inc;
use coherent_control::measures;
use coherent_control::Complex64;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const BOUND_TOL: f64 = 1e-10;
const CORRESPONDENCE_TOL: f64 = 1e-6;
const FOCK_TOL: f64 = 1e-12;
const CAT_TOL: f64 = 1e-10;
const COHERENT_U_LOW: f64 = 1e-10;
const COHERENT_U_HIGH: f64 = 1e-12;
const FACTORIZATION_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-9;
const PHASE_SPREAD_TOL: f64 = 1e-10;
const CLASSICAL_CONTRAST: f64 = 0.5;
const ORACLE_TOL: f64 = 1e-12;
const PROBE_TOL: f64 = 1e-14;
const PER_OMEGA_MIN: f64 = 1e-3;
const OMEGA_SUM_TOL: f64 = 1e-12;
const P0_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-9;
const DRIFT_FACTOR: f64 = 10.0;

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1(cfg: &ScenarioConfig) -> Outcome {
    let trials = measures::random_bound_sweep(500, 16, cfg.seed).map_err(|e| e.to_string())?;
    let bad = trials.iter().filter(|t| t.u < t.i - BOUND_TOL).count();
    let max_dim = trials.iter().map(|t| t.dim).max().unwrap_or(0);
    verdict(bad == 0 && trials.len() == 500 && max_dim <= 16, format!("{bad} violations in {} trials", trials.len()))
}

fn criterion_2(cfg: &ScenarioConfig) -> Outcome {
    let report = cli::correspondence_report(cfg, cfg.fields.epsilon_rel).map_err(|e| e.to_string())?;
    let max = report.max_rel_dev();
    let expected = cfg.scan.steps * cfg.molecule.channels.len() * cfg.molecule.continuum_count;
    verdict(
        max < CORRESPONDENCE_TOL && report.rows.len() == expected && cfg.scan.steps == 20,
        format!("max rel dev {max:.3e} over {} rows", report.rows.len()),
    )
}

fn zoo(cfg: &ScenarioConfig) -> Result<Vec<coherent_control::quantum_control::ZooRecord>, String> {
    cli::zoo_records(cfg, cfg.photon_zoo.epsilon_rel).map_err(|e| e.to_string())
}

fn criterion_3(cfg: &ScenarioConfig) -> Outcome {
    let records = zoo(cfg)?;
    let get = |n: &str| records.iter().find(|r| r.family == n).unwrap();
    let (fock, ecs, ocs) = (get("fock"), get("ecs"), get("ocs"));
    let mean_ok = ecs.mean_field < CAT_TOL && ocs.mean_field < CAT_TOL;
    let ok = fock.max_abs_normalized_interference < FOCK_TOL
        && fock.max_u < FOCK_TOL
        && mean_ok
        && ecs.max_abs_normalized_interference < CAT_TOL
        && ocs.max_abs_normalized_interference < CAT_TOL;
    verdict(
        ok,
        format!(
            "fock I {:.2e} U {:.2e}; <a> {:.1e}/{:.1e}; ecs I {:.2e} ocs I {:.2e}",
            fock.max_abs_normalized_interference,
            fock.max_u,
            ecs.mean_field,
            ocs.mean_field,
            ecs.max_abs_normalized_interference,
            ocs.max_abs_normalized_interference
        ),
    )
}

fn criterion_4(cfg: &ScenarioConfig) -> Outcome {
    let records = zoo(cfg)?;
    let c = records.iter().find(|r| r.family == "coherent").unwrap();
    verdict(
        c.min_u >= 1.0 - COHERENT_U_LOW && c.max_u <= 1.0 + COHERENT_U_HIGH,
        format!("U in [1{:+.2e}, 1{:+.2e}]", c.min_u - 1.0, c.max_u - 1.0),
    )
}

fn criterion_5(cfg: &ScenarioConfig) -> Outcome {
    let rows = cli::factorization_rows(&cfg.incoherent, cfg.incoherent.epsilon_rel).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut ok = true;
    for fam in ["coherent", "fock", "ecs"] {
        let sel: Vec<_> = rows.iter().filter(|r| r.family == fam).collect();
        let u = sel.iter().map(|r| r.factorization_degree).fold(f64::INFINITY, f64::min);
        let res = sel.iter().map(|r| r.residual).fold(0.0, f64::max);
        ok &= !sel.is_empty() && u >= 1.0 - FACTORIZATION_TOL && res < RESIDUAL_TOL;
        detail.push(format!("{fam} 1-U {:.1e} res {res:.1e}", 1.0 - u));
    }
    verdict(ok, detail.join("; "))
}

fn criterion_6(cfg: &ScenarioConfig) -> Outcome {
    let ic = &cfg.incoherent;
    let mol = ic.molecule(0.0).map_err(|e| e.to_string())?;
    let grid = ic.grid(ic.epsilon_rel).map_err(|e| e.to_string())?;
    let psi = ic.families().map_err(|e| e.to_string())?.remove(0).1;
    let settings = inc::phase_grid(ic.mode_count, 16);
    let scan = inc::phase_insensitivity_scan(&mol, &grid, &psi, ic.energy, &settings).map_err(|e| e.to_string())?;
    let spread = scan.relative_spread();
    let classical = cli::classical_contrast(cfg, 16).map_err(|e| e.to_string())?;
    verdict(
        scan.rows.len() == 16 && spread < PHASE_SPREAD_TOL && classical > CLASSICAL_CONTRAST,
        format!("quantum spread/mean {spread:.2e}, classical {classical:.3}"),
    )
}

/// Tr(ρ_CD O) with ρ_CD = |Ψ⟩⟨Ψ| and O dense over the whole channel space.
fn dense_oracle(s: &SMatrix, t: &SecondProcessTensor) -> f64 {
    let sp = s.space();
    let n = sp.size();
    let root = sp.delta_omega.sqrt();
    let psi = DMatrix::from_iterator(n, 1, s.data().iter().map(|a| a * root));
    let rho = &psi * psi.adjoint();
    let mut o = DMatrix::<Complex64>::zeros(n, n);
    for ec in 0..sp.n_ec() {
        for ed in 0..sp.n_ed() {
            for nd in 0..sp.n_d {
                for om in 0..sp.omega_bins {
                    for a in 0..sp.n_c {
                        for b in 0..sp.n_c {
                            o[(sp.index(ec, b, ed, nd, om), sp.index(ec, a, ed, nd, om))] = t.get(ec, ed, nd, om, a, b);
                        }
                    }
                }
            }
        }
    }
    (rho * o).trace().re
}

fn criterion_7(cfg: &ScenarioConfig) -> Outcome {
    let c = &cfg.collision;
    let space = ChannelSpace::uniform(c.n_ec, c.n_nc, c.n_ed, c.n_nd, c.omega_bins);
    let (mut diff, mut probe, mut per_min, mut sum_max) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for i in 0..50u64 {
        let seed = cfg.seed.wrapping_add(i);
        let s = collision::build_smatrix(&space, seed, true, false).map_err(|e| e.to_string())?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed.rotate_left(17));
        let t = SecondProcessTensor::random(&space, &mut rng);
        let direct = collision::target_probability(&s, &t).map_err(|e| e.to_string())?;
        diff = diff.max((direct - dense_oracle(&s, &t)).abs());
        let audit = collision::coherence_audit(&s, seed);
        probe = probe.max(audit.energy_probe_response).max(audit.momentum_probe_response);
        per_min = per_min.min(audit.max_per_omega());
        sum_max = sum_max.max(audit.max_omega_sum());
    }
    verdict(
        diff < ORACLE_TOL && probe < PROBE_TOL && per_min > PER_OMEGA_MIN && sum_max < OMEGA_SUM_TOL,
        format!("oracle {diff:.1e}, probe {probe:.1e}, per-Ω min {per_min:.2e}, Ω-sum {sum_max:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let tail = 1e-12;
    let ecs = FieldState::even_coherent(1.0, 0, 1, 40, tail).map_err(|e| e.to_string())?;
    let ocs = FieldState::odd_coherent(1.0, 0, 1, 40, tail).map_err(|e| e.to_string())?;
    let pe = ecs.number_distribution(0).map_err(|e| e.to_string())?;
    let po = ocs.number_distribution(0).map_err(|e| e.to_string())?;
    let forbidden = pe.iter().skip(1).step_by(2).chain(po.iter().step_by(2)).all(|&p| p == 0.0);
    let e1 = (-1.0f64).exp();
    let p0 = 2.0 * e1 / (1.0 + e1 * e1);
    let p0_err = (pe[0] - p0).abs();
    let alpha = Complex64::new(1.0, 0.0);
    let coh = FieldState::coherent(&[alpha], 25, tail).map_err(|e| e.to_string())?;
    let a_psi = coh.annihilate(0).map_err(|e| e.to_string())?;
    let residual = a_psi.add_scaled(-alpha, &coh).map_err(|e| e.to_string())?.norm();
    verdict(
        forbidden && p0_err < P0_TOL && residual < EIGEN_TOL,
        format!("parity zeros {forbidden}, P0 err {p0_err:.1e}, eigen residual {residual:.1e}"),
    )
}

fn criterion_9(cfg: &ScenarioConfig) -> Outcome {
    let rows = cli::convergence_rows(cfg).map_err(|e| e.to_string())?;
    let drift = |f: &dyn Fn(&cli::ConvergenceRow) -> f64| rows.iter().map(|r| (f(r) - f(&rows[0])).abs()).fold(0.0, f64::max);
    let d_rel = drift(&|r| r.max_rel_dev);
    let d_fac = drift(&|r| r.min_factorization_degree);
    let d_res = drift(&|r| r.max_residual);
    verdict(
        rows.len() == 3
            && d_rel < DRIFT_FACTOR * CORRESPONDENCE_TOL
            && d_fac < DRIFT_FACTOR * FACTORIZATION_TOL
            && d_res < DRIFT_FACTOR * RESIDUAL_TOL,
        format!("drift rel dev {d_rel:.1e}, factorization {d_fac:.1e}, residual {d_res:.1e}"),
    )
}

fn main() {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("bound U >= I", Box::new(|| criterion_1(&cfg))),
        ("quantum/classical correspondence", Box::new(|| criterion_2(&cfg))),
        ("which-way destruction", Box::new(|| criterion_3(&cfg))),
        ("coherent indistinguishability", Box::new(|| criterion_4(&cfg))),
        ("incoherent factorization", Box::new(|| criterion_5(&cfg))),
        ("phase insensitivity", Box::new(|| criterion_6(&cfg))),
        ("collision audit", Box::new(|| criterion_7(&cfg))),
        ("fock sanity", Box::new(criterion_8)),
        ("regulator convergence", Box::new(|| criterion_9(&cfg))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS {} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} passed in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
