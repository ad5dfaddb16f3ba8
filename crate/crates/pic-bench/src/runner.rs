//! Executes bench, verify, and sweep runs.
//!
//! Timing covers only the operator application itself: the particle loop
//! (compute) and the reduction merge (contribute). State construction,
//! checksumming, and comparisons happen outside the timed sections.

use std::fmt::Write as _;

use pic_kernel::hp1::StepError;
use pic_kernel::init::InitError;
use pic_kernel::{
    init, ExecConfig, FieldDofs, Hp1Operator, InitSpec, ParticleGroup, ScatterStrategy,
    StepTiming,
};

use crate::config::{BenchConfig, Mode, RunStrategy};
use crate::record::{checksum_f64s, checksum_particles, write_csv, BenchRecord};

#[derive(Debug)]
pub enum RunnerError {
    Setup(String),
    Step(StepError),
    Io(std::io::Error),
}

impl std::fmt::Display for RunnerError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunnerError::Setup(msg) => write!(f, "{msg}"),
            RunnerError::Step(e) => write!(f, "{e}"),
            RunnerError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<StepError> for RunnerError {
    fn from(e: StepError) -> Self {
        RunnerError::Step(e)
    }
}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        RunnerError::Io(e)
    }
}

impl From<InitError> for RunnerError {
    fn from(e: InitError) -> Self {
        RunnerError::Setup(e.to_string())
    }
}

/// Runs the configured mode. `Ok(true)` means success; `Ok(false)` means a
/// verification failure (exit code 1 at the CLI).
pub fn run(cfg: &BenchConfig) -> Result<bool, RunnerError> {
    match cfg.mode {
        Mode::Bench => {
            run_bench(cfg, false)?;
            Ok(true)
        }
        Mode::Sweep => {
            run_bench(cfg, true)?;
            Ok(true)
        }
        Mode::Verify => {
            let report = run_verify(cfg)?;
            if report.pass {
                println!(
                    "verification passed for all {} configurations",
                    report.entries.len()
                );
            }
            Ok(report.pass)
        }
    }
}

fn init_spec(cfg: &BenchConfig) -> InitSpec {
    InitSpec {
        seed: cfg.seed,
        n_particles: cfg.particles,
        n_grid: cfg.grid,
        degree: cfg.degree,
        ..InitSpec::default()
    }
}

fn exec_config(cfg: &BenchConfig, workers: usize) -> ExecConfig {
    let mut exec = if cfg.deterministic {
        ExecConfig::deterministic(workers)
    } else {
        ExecConfig::new(workers)
    };
    exec.scratch_layout = cfg.scratch_layout;
    exec
}

fn fresh_state(
    cfg: &BenchConfig,
) -> Result<(Hp1Operator, ParticleGroup, FieldDofs), RunnerError> {
    let (grid, group, fields) = init(&init_spec(cfg))?;
    let op = Hp1Operator::new(grid, cfg.degree).map_err(|e| RunnerError::Setup(e.to_string()))?;
    Ok((op, group, fields))
}

fn apply_step(
    op: &Hp1Operator,
    group: &mut ParticleGroup,
    fields: &mut FieldDofs,
    dt: f64,
    strategy: RunStrategy,
    exec: &ExecConfig,
) -> Result<StepTiming, StepError> {
    match strategy {
        RunStrategy::Serial => op.step_serial(group, fields, dt),
        RunStrategy::Scatter(s) => op.step(group, fields, dt, exec, s),
    }
}

/// Times `iterations` operator applications per repeat from a fresh seeded
/// state and returns one record per iteration.
fn run_configuration(
    cfg: &BenchConfig,
    strategy: RunStrategy,
    workers: usize,
) -> Result<Vec<BenchRecord>, RunnerError> {
    let mut records = Vec::with_capacity(cfg.repeats * cfg.iterations);
    let exec = exec_config(cfg, workers);
    for repeat in 0..cfg.repeats {
        let (op, mut group, mut fields) = fresh_state(cfg)?;
        for iteration in 0..cfg.iterations {
            let timing = apply_step(&op, &mut group, &mut fields, cfg.dt, strategy, &exec)?;
            records.push(BenchRecord {
                strategy: strategy.name(),
                workers,
                particles: cfg.particles,
                grid: cfg.grid,
                degree: cfg.degree,
                iteration,
                repeat,
                compute_seconds: timing.compute_seconds,
                contribute_seconds: timing.contribute_seconds,
                j_checksum: checksum_f64s(&fields.j_dofs_local),
                particle_checksum: checksum_particles(&group),
            });
        }
    }
    Ok(records)
}

struct Summary {
    strategy: &'static str,
    workers: usize,
    mean_compute: f64,
    median_compute: f64,
    mean_contribute: f64,
}

fn summarize(records: &[BenchRecord], strategy: &'static str, workers: usize) -> Option<Summary> {
    let mut computes: Vec<f64> = records
        .iter()
        .filter(|r| r.strategy == strategy && r.workers == workers)
        .map(|r| r.compute_seconds)
        .collect();
    if computes.is_empty() {
        return None;
    }
    computes.sort_by(f64::total_cmp);
    let n = computes.len();
    let mean_compute = computes.iter().sum::<f64>() / n as f64;
    let median_compute = if n % 2 == 1 {
        computes[n / 2]
    } else {
        0.5 * (computes[n / 2 - 1] + computes[n / 2])
    };
    let mean_contribute = records
        .iter()
        .filter(|r| r.strategy == strategy && r.workers == workers)
        .map(|r| r.contribute_seconds)
        .sum::<f64>()
        / n as f64;
    Some(Summary {
        strategy,
        workers,
        mean_compute,
        median_compute,
        mean_contribute,
    })
}

fn run_bench(cfg: &BenchConfig, sweep: bool) -> Result<(), RunnerError> {
    println!(
        "config: {} particles, grid {}x{}x{}, degree {}, dt {}, {} iterations x {} repeats, seed {}",
        cfg.particles,
        cfg.grid[0],
        cfg.grid[1],
        cfg.grid[2],
        cfg.degree,
        cfg.dt,
        cfg.iterations,
        cfg.repeats,
        cfg.seed
    );
    {
        let (op, _, _) = fresh_state(cfg)?;
        println!(
            "scratch: {} f64 slots per worker ({})",
            op.scratch_elements(),
            match cfg.scratch_layout {
                pic_kernel::ScratchLayout::Pooled => "pooled",
                pic_kernel::ScratchLayout::Interleaved => "interleaved",
            }
        );
    }

    let mut records: Vec<BenchRecord> = Vec::new();
    let mut plan: Vec<(RunStrategy, usize)> = Vec::new();
    for &strategy in &cfg.strategies {
        match strategy {
            // the serial loop has no worker axis; run it once
            RunStrategy::Serial => plan.push((strategy, 1)),
            _ => {
                for &workers in &cfg.workers {
                    plan.push((strategy, workers));
                }
            }
        }
    }

    for &(strategy, workers) in &plan {
        let new_records = run_configuration(cfg, strategy, workers)?;
        records.extend(new_records);
    }

    // speedups are quoted against the single-worker serial loop; time one
    // if it was not part of the plan
    let baseline = match summarize(&records, "serial", 1) {
        Some(s) => s.mean_compute,
        None => {
            println!("timing implicit serial baseline for speedup reporting");
            let baseline_records = run_configuration(
                &BenchConfig {
                    repeats: 1,
                    ..cfg.clone()
                },
                RunStrategy::Serial,
                1,
            )?;
            baseline_records.iter().map(|r| r.compute_seconds).sum::<f64>()
                / baseline_records.len() as f64
        }
    };

    println!(
        "\n{:<11} {:>7} {:>15} {:>17} {:>17} {:>10}",
        "strategy", "workers", "mean_compute_s", "median_compute_s", "mean_contribute_s", "speedup"
    );
    let mut summaries = Vec::new();
    for &(strategy, workers) in &plan {
        if let Some(s) = summarize(&records, strategy.name(), workers) {
            println!(
                "{:<11} {:>7} {:>15.6} {:>17.6} {:>17.6} {:>10.2}",
                s.strategy,
                s.workers,
                s.mean_compute,
                s.median_compute,
                s.mean_contribute,
                baseline / s.mean_compute
            );
            summaries.push(s);
        }
    }

    if sweep {
        print_scaling(&summaries);
    }

    if let Some(path) = &cfg.csv {
        write_csv(path, &records)?;
        println!("\nwrote {} records to {}", records.len(), path.display());
    }
    Ok(())
}

fn print_scaling(summaries: &[Summary]) {
    println!("\nworker scaling per strategy:");
    let mut strategies: Vec<&'static str> = summaries.iter().map(|s| s.strategy).collect();
    strategies.dedup();
    for strategy in strategies {
        let mut points: Vec<(usize, f64)> = summaries
            .iter()
            .filter(|s| s.strategy == strategy)
            .map(|s| (s.workers, s.mean_compute))
            .collect();
        points.sort_by_key(|&(w, _)| w);
        if points.len() < 2 {
            continue;
        }
        let monotone = points.windows(2).all(|p| p[1].1 <= p[0].1);
        let mut line = format!("  {strategy}: ");
        for (w, t) in &points {
            let _ = write!(line, "{w}w={t:.6}s ");
        }
        let _ = write!(
            line,
            "({})",
            if monotone {
                "monotone non-increasing"
            } else {
                "not monotone"
            }
        );
        println!("{line}");
    }
}

/// Outcome of checking one configuration against the serial reference.
pub struct VerifyEntry {
    pub strategy: &'static str,
    pub workers: usize,
    pub j_rel_l2: f64,
    pub particle_max_abs: f64,
    pub j_tolerance: f64,
    pub pass: bool,
}

pub struct VerifyReport {
    pub entries: Vec<VerifyEntry>,
    pub pass: bool,
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let dist: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        if dist == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        dist / norm
    }
}

fn particle_max_abs(a: &ParticleGroup, b: &ParticleGroup) -> f64 {
    a.particles()
        .iter()
        .zip(b.particles())
        .map(|(p, q)| {
            let mut m: f64 = 0.0;
            for k in 0..3 {
                m = m.max((p.x[k] - q.x[k]).abs());
                m = m.max((p.v[k] - q.v[k]).abs());
            }
            m.max((p.w - q.w).abs())
        })
        .fold(0.0, f64::max)
}

fn j_tolerance(strategy: RunStrategy, workers: usize) -> f64 {
    match strategy {
        // identical evaluation order by construction
        RunStrategy::Serial => 0.0,
        RunStrategy::Scatter(ScatterStrategy::Atomic) => 1e-9,
        RunStrategy::Scatter(_) if workers == 1 => 0.0,
        RunStrategy::Scatter(_) => 1e-10,
    }
}

/// Runs the serial reference and then every requested configuration from
/// the identical initial state, comparing final current and particle state.
pub fn run_verify(cfg: &BenchConfig) -> Result<VerifyReport, RunnerError> {
    println!(
        "verify: {} particles, grid {}x{}x{}, degree {}, dt {}, {} iterations, seed {}",
        cfg.particles,
        cfg.grid[0],
        cfg.grid[1],
        cfg.grid[2],
        cfg.degree,
        cfg.dt,
        cfg.iterations,
        cfg.seed
    );
    let (op, mut ref_group, mut ref_fields) = fresh_state(cfg)?;
    for _ in 0..cfg.iterations {
        op.step_serial(&mut ref_group, &mut ref_fields, cfg.dt)?;
    }

    let mut entries = Vec::new();
    let mut pass = true;
    for &strategy in &cfg.strategies {
        for &workers in &cfg.workers {
            let exec = exec_config(cfg, workers);
            let (op, mut group, mut fields) = fresh_state(cfg)?;
            for _ in 0..cfg.iterations {
                apply_step(&op, &mut group, &mut fields, cfg.dt, strategy, &exec)?;
            }
            let j_rel_l2 = relative_l2(&fields.j_dofs_local, &ref_fields.j_dofs_local);
            let particle_dev = particle_max_abs(&group, &ref_group);
            let tolerance = j_tolerance(strategy, workers);
            let ok = j_rel_l2 <= tolerance && particle_dev == 0.0;
            println!(
                "{} strategy={} workers={} j_rel_l2={:.3e} (tol {:.1e}) particle_max_abs={:.3e}",
                if ok { "PASS" } else { "FAIL" },
                strategy.name(),
                workers,
                j_rel_l2,
                tolerance,
                particle_dev
            );
            pass &= ok;
            entries.push(VerifyEntry {
                strategy: strategy.name(),
                workers,
                j_rel_l2,
                particle_max_abs: particle_dev,
                j_tolerance: tolerance,
                pass: ok,
            });
        }
    }
    if !pass {
        for entry in entries.iter().filter(|e| !e.pass) {
            eprintln!(
                "verification FAILED: strategy={} workers={} j_rel_l2={:.3e} tol={:.1e} particle_max_abs={:.3e}",
                entry.strategy, entry.workers, entry.j_rel_l2, entry.j_tolerance, entry.particle_max_abs
            );
        }
    }
    Ok(VerifyReport { entries, pass })
}
