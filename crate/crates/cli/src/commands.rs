use crate::config::{LoopKind, RunConfig};
use crate::report::{num, Failure, Outcome, Summary, Table};
use egp_core::circulant;
use egp_core::fock_oracle::{self, OracleKind, OracleSpec};
use egp_core::gaussian::{self, GaussianState};
use egp_core::momentum_shift::{self, ShiftSpec};
use egp_core::rice_mele::{self, PumpProtocol};
use egp_core::winding::{self, LoopAnalysis, ParameterLoop};
use egp_core::{Complex64, LatticeSpec};
use rayon::prelude::*;
use std::f64::consts::PI;

const ORACLE_GATE: f64 = 1e-8;
const BENCH_GATE: f64 = 1e-10;
const NULL_GATE: f64 = 1e-6;

fn table(cfg: &RunConfig, header: &[&str]) -> Outcome<Table> {
    Table::create(cfg.output.as_deref(), &cfg.describe(), header)
}

fn rmm_state(cfg: &RunConfig, lattice: LatticeSpec) -> egp_core::Result<GaussianState> {
    let params = PumpProtocol::reference(cfg.amplitude, 1.0)?.params_at_fraction(cfg.fraction);
    rice_mele::rmm_thermal_state(&params, lattice, cfg.beta, cfg.mu)
}

pub fn flux_sweep(cfg: &RunConfig, out: &Summary) -> Outcome {
    let phi_ad = rice_mele::adiabatic_flux(&PumpProtocol::reference(cfg.amplitude, 1.0)?)?;
    let rows: Vec<Outcome<(f64, f64)>> = cfg
        .periods
        .par_iter()
        .map(|&at| {
            let protocol = PumpProtocol::reference(cfg.amplitude, at / cfg.amplitude)?;
            let steps = cfg.steps.unwrap_or_else(|| rice_mele::default_steps(&protocol));
            let traj = rice_mele::evolve_pump(&protocol, None, steps)?;
            Ok((at, rice_mele::integrated_flux(&traj, &protocol)?))
        })
        .collect();

    let mut t = table(cfg, &["AT", "phi", "phi_adiabatic"])?;
    let mut last = None;
    for row in rows {
        let (at, phi) = row?;
        t.row(&[num(at), num(phi), num(phi_ad)])?;
        last = Some((at, phi));
    }
    t.finish()?;
    if let Some((at, phi)) = last {
        out.line(format!(
            "flux-sweep: {} cycle times, Phi(AT = {at}) = {phi:.6}, adiabatic limit {phi_ad:.6}",
            cfg.periods.len()
        ));
    }
    Ok(())
}

struct ScalingRow {
    cells: usize,
    abs_t: f64,
    im_log_det: f64,
    epsilon: f64,
    classical_bound: f64,
}

pub fn scaling(cfg: &RunConfig, out: &Summary) -> Outcome {
    let rows: Vec<Outcome<ScalingRow>> = cfg
        .cells
        .par_iter()
        .map(|&l| {
            let s = rmm_state(cfg, cfg.lattice(l)?)?;
            let dense = momentum_shift::polarization(&s)?;
            let reduced = circulant::reduced_log_det(&circulant::cell_bloch_blocks(&s)?)?;
            Ok(ScalingRow {
                cells: l,
                abs_t: dense.abs_t,
                im_log_det: reduced.im,
                epsilon: circulant::decay_bound(&s)?,
                classical_bound: momentum_shift::classical_bound(&s)?,
            })
        })
        .collect();
    let rows: Vec<ScalingRow> = rows.into_iter().collect::<Outcome<_>>()?;

    let mut t = table(cfg, &["L", "abs_T", "det_term_phase", "epsilon_bound", "classical_bound"])?;
    for r in &rows {
        t.row(&[
            r.cells.to_string(),
            num(r.abs_t),
            num(-0.5 * r.im_log_det),
            num(r.epsilon),
            num(r.classical_bound),
        ])?;
    }
    t.finish()?;

    let violations: Vec<usize> = rows.iter().filter(|r| r.im_log_det.abs() > r.epsilon).map(|r| r.cells).collect();
    let decreasing = rows.windows(2).all(|w| w[1].cells <= w[0].cells || w[1].abs_t < w[0].abs_t);
    let positive = rows.iter().all(|r| r.abs_t > 0.0);
    out.verdict(violations.is_empty(), "|Im ln det(1 - W)| <= 4 lambda_max^L at every L");
    out.verdict(positive, "abs_T > 0 at every L");
    out.line(format!("abs_T decreasing in L: {}", if decreasing { "yes" } else { "no" }));
    if !violations.is_empty() {
        return Err(Failure::Theorem(format!("decay bound exceeded at L = {violations:?}")));
    }
    if !positive {
        return Err(Failure::Theorem("abs_T vanished at finite L".into()));
    }
    Ok(())
}

struct LoopJob {
    cells: usize,
    seed: Option<u64>,
}

fn build_loop(cfg: &RunConfig, job: &LoopJob) -> egp_core::Result<ParameterLoop> {
    let lat = cfg.lattice(job.cells)?;
    let init = cfg.samples;
    let lp = match cfg.loop_kind {
        LoopKind::RmmThermal => winding::rmm_thermal_loop(cfg.amplitude, lat, cfg.beta, cfg.mu, init)?,
        LoopKind::RmmCoherent => winding::rmm_coherent_loop(cfg.amplitude, lat, init)?,
        LoopKind::RandomClassical => winding::random_classical_loop(lat, job.seed.unwrap_or(0), init)?,
        LoopKind::RandomSqueezed => winding::random_squeezed_loop(lat, job.seed.unwrap_or(0), init)?,
    };
    lp.with_tolerance(cfg.tolerance)
}

/// Test hook: adds one planted zero of `det(1 - W)` to the analysis, the
/// signature a broken determinant branch would leave.
fn plant_fault(a: &mut LoopAnalysis) {
    for s in &mut a.track.samples {
        s.p_unwrapped -= 0.5 * s.lambda;
    }
    a.winding.delta_p -= 0.5;
    a.winding.zero_count += 1;
    a.trace_winding += 1.0;
}

pub fn winding_cmd(cfg: &RunConfig, out: &Summary) -> Outcome {
    let mut jobs = Vec::new();
    for &cells in &cfg.cells {
        if cfg.loop_kind.seeded() {
            jobs.extend((0..cfg.count as u64).map(|i| LoopJob {
                cells,
                seed: Some(cfg.seed + i),
            }));
        } else {
            jobs.push(LoopJob { cells, seed: None });
        }
    }
    let results: Vec<Outcome<LoopAnalysis>> = jobs
        .par_iter()
        .map(|job| {
            let mut a = winding::analyze_loop(&build_loop(cfg, job)?, cfg.trace_samples)?;
            if cfg.inject_fault {
                plant_fault(&mut a);
            }
            Ok(a)
        })
        .collect();

    let name = cfg.loop_kind.name();
    let mut t = table(
        cfg,
        &["loop", "L", "seed", "lambda", "p_unwrapped", "abs_t", "det_term_phase", "im_mean_term"],
    )?;
    let mut analyses = Vec::with_capacity(jobs.len());
    for (job, a) in jobs.iter().zip(results) {
        let a = a?;
        let seed = job.seed.map(|s| s.to_string()).unwrap_or_default();
        for s in &a.track.samples {
            t.row(&[
                name.to_string(),
                job.cells.to_string(),
                seed.clone(),
                num(s.lambda),
                num(s.p_unwrapped),
                num(s.abs_t),
                num(s.det_term_phase),
                num(s.mean_term.im),
            ])?;
        }
        analyses.push(a);
    }
    t.finish()?;

    let mut failures = Vec::new();
    for (job, a) in jobs.iter().zip(&analyses) {
        let w = &a.winding;
        let label = match job.seed {
            Some(s) => format!("{name} L={} seed={s}", job.cells),
            None => format!("{name} L={}", job.cells),
        };
        let null = w.delta_p.abs() <= NULL_GATE && w.zero_count == 0;
        let headline = if null {
            "ΔP = 0, M = 0".to_string()
        } else {
            format!("ΔP = {}, M = {}", w.delta_p, w.zero_count)
        };
        out.verdict(
            null && a.consistent(),
            format!(
                "{label}: {headline} (|ΔP| {:.1e}, trace {:.1e}, {} samples)",
                w.delta_p.abs(),
                a.trace_winding,
                a.track.samples.len()
            ),
        );
        if !(null && a.consistent()) {
            failures.push(label);
        }
    }
    if cfg.zak {
        let protocol = PumpProtocol::reference(cfg.amplitude, 1.0)?;
        let zak = rice_mele::zak_winding(&protocol, cfg.steps.unwrap_or(256))?;
        out.line(format!("Zak winding {zak}"));
    }
    if !failures.is_empty() {
        return Err(Failure::Theorem(format!("nonzero winding on {}", failures.join(", "))));
    }
    Ok(())
}

struct OracleRow {
    family: &'static str,
    cases: usize,
    closed: f64,
    fock: f64,
}

fn oracle_kinds() -> Vec<OracleKind> {
    let mut kinds = vec![
        OracleKind::Coherent {
            amplitudes: vec![Complex64::new(0.8, -0.6)],
        },
        OracleKind::Coherent {
            amplitudes: vec![Complex64::new(1.5, 0.3), Complex64::new(-0.2, 0.9)],
        },
    ];
    kinds.extend([0.1, 1.0, 5.0].map(|nbar| OracleKind::Thermal { nbar }));
    kinds.extend([0.3, 0.8814].map(|r| OracleKind::SqueezedVacuum { r }));
    kinds.extend([0.3, 0.8814].map(|r| OracleKind::TwoModeSqueezed { r }));
    kinds
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn oracle_row(kind: &OracleKind, cutoff: usize, corrupt: bool) -> Outcome<OracleRow> {
    let grid: Vec<f64> = (0..16).map(|k| 2.0 * PI * (k as f64 + 0.5) / 16.0).collect();
    let mut row = OracleRow {
        family: kind.name(),
        cases: 0,
        closed: 0.0,
        fock: 0.0,
    };
    for k in 0..16 {
        let phases: Vec<f64> = (0..kind.modes()).map(|j| grid[(k + 5 * j) % 16]).collect();
        let spec = OracleSpec::new(kind.clone(), phases, cutoff)?;
        let shift = ShiftSpec::from_phases(spec.phases.clone())?;
        let mut t = momentum_shift::expectation_t_with(&spec.gaussian_state()?, &shift)?;
        if corrupt {
            t *= 1.0 + 1e-6;
        }
        row.closed = row.closed.max(rel(t, spec.closed_form()?));
        row.fock = row.fock.max(rel(t, fock_oracle::oracle_fock_truncated(&spec)?.value));
        row.cases += 1;
    }
    Ok(row)
}

fn circulant_row(seed: u64) -> Outcome<OracleRow> {
    let mut row = OracleRow {
        family: "circulant",
        cases: 0,
        closed: 0.0,
        fock: 0.0,
    };
    for i in 0..16u64 {
        let lat = LatticeSpec::with_default_offset(1 + i as usize % 8, 2)?;
        let s = gaussian::random_translation_invariant_state(lat, seed + i, i % 2 == 0);
        let blocks = circulant::cell_bloch_blocks(&s)?;
        let dense = circulant::dense_determinant(&s)?;
        row.closed = row.closed.max(circulant::reduced_log_det_value(&blocks).relative_error(&dense));
        row.cases += 1;
    }
    // Uniform coherent chains: <T> = exp(-sum |alpha|^2) exactly.
    for l in [2, 4, 8] {
        let lat = LatticeSpec::with_default_offset(l, 2)?;
        let per_cell = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let t = momentum_shift::expectation_t(&gaussian::uniform_coherent_state(lat, &per_cell)?)?;
        row.fock = row.fock.max(rel(t, Complex64::new((-(l as f64)).exp(), 0.0)));
        row.cases += 1;
    }
    Ok(row)
}

pub fn oracle_check(cfg: &RunConfig, out: &Summary) -> Outcome {
    let kinds = oracle_kinds();
    let mut rows: Vec<Outcome<OracleRow>> = kinds
        .par_iter()
        .map(|k| oracle_row(k, cfg.cutoff, cfg.inject_fault))
        .collect();
    rows.push(circulant_row(cfg.seed));
    let rows: Vec<OracleRow> = rows.into_iter().collect::<Outcome<_>>()?;

    let mut t = table(cfg, &["family", "cases", "closed_form_rel_err", "fock_rel_err"])?;
    for r in &rows {
        t.row(&[r.family.to_string(), r.cases.to_string(), num(r.closed), num(r.fock)])?;
    }
    t.finish()?;

    let worst = rows.iter().map(|r| r.closed.max(r.fock)).fold(0.0, f64::max);
    let cases: usize = rows.iter().map(|r| r.cases).sum();
    let ok = worst <= ORACLE_GATE;
    out.verdict(ok, format!("oracle matrix: {cases} cases, max relative deviation {worst:.2e}"));
    if !ok {
        return Err(Failure::Oracle(format!("max relative deviation {worst:e} exceeds {ORACLE_GATE:e}")));
    }
    Ok(())
}

pub fn bench(cfg: &RunConfig, out: &Summary) -> Outcome {
    let mut t = table(cfg, &["L", "n", "dense_seconds", "reduced_seconds", "relative_det_error"])?;
    let mut worst: f64 = 0.0;
    let mut last = None;
    for &l in &cfg.cells {
        let s = rmm_state(cfg, cfg.lattice(l)?)?;
        let row = circulant::bench_dense_vs_reduced(&s)?;
        t.row(&[
            l.to_string(),
            cfg.sites.to_string(),
            num(row.dense_seconds),
            num(row.reduced_seconds),
            num(row.relative_det_error),
        ])?;
        worst = worst.max(row.relative_det_error);
        last = Some(row);
    }
    t.finish()?;
    if let Some(r) = last {
        out.line(format!(
            "bench: L = {}: dense {:.4} s, reduced {:.4} s (ratio {:.3})",
            r.cells,
            r.dense_seconds,
            r.reduced_seconds,
            r.reduced_seconds / r.dense_seconds
        ));
    }
    let ok = worst <= BENCH_GATE;
    out.verdict(ok, format!("max relative determinant error {worst:.2e}"));
    if !ok {
        return Err(Failure::Numerical(format!("determinant mismatch {worst:e}")));
    }
    Ok(())
}

pub fn chern(cfg: &RunConfig, out: &Summary) -> Outcome {
    let mut t = table(cfg, &["L", "ky", "p_unwrapped"])?;
    let results: Vec<Outcome<(usize, winding::ChernResult)>> = cfg
        .cells
        .par_iter()
        .map(|&l| {
            let fam = winding::qwz_thermal_family(cfg.mass, cfg.lattice(l)?, cfg.beta, cfg.mu, cfg.samples)?
                .with_tolerance(cfg.tolerance)?;
            Ok((l, winding::chern_via_polarization(&fam)?))
        })
        .collect();
    let mut nonzero = Vec::new();
    for r in results {
        let (l, c) = r?;
        for &(lambda, p) in &c.winding.samples {
            t.row(&[l.to_string(), num(2.0 * PI * lambda), num(p)])?;
        }
        out.verdict(
            c.chern == 0,
            format!("L={l}: polarization Chern {} (ΔP = {:.1e})", c.chern, c.winding.delta_p),
        );
        if c.chern != 0 {
            nonzero.push(l);
        }
    }
    t.finish()?;
    if !nonzero.is_empty() {
        return Err(Failure::Theorem(format!("nonzero polarization Chern number at L = {nonzero:?}")));
    }
    Ok(())
}
