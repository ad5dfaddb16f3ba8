//! CLI surface and its translation into a validated run configuration.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use pic_kernel::{exec, ScatterStrategy};

/// Paper-protocol reference configuration, selected by `--paper-config`.
pub const PAPER_PARTICLES: usize = 10_000_000;
pub const PAPER_GRID: [usize; 3] = [16, 8, 8];
pub const PAPER_DEGREE: usize = 3;
pub const PAPER_ITERATIONS: usize = 3;
pub const PAPER_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Timed iterations over the configured strategies and worker counts.
    Bench,
    /// Every configuration checked against the serial reference.
    Verify,
    /// Bench plus a worker-scaling summary per strategy.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScratchLayoutArg {
    /// Contiguous per-worker scratch blocks (cache-line padded).
    Pooled,
    /// Field-major scratch placement; false-sharing demonstration only.
    Interleaved,
}

/// Timed particle-push benchmark and verification harness.
///
/// Worker-count default: the PIC_NUM_WORKERS environment variable if set,
/// otherwise the number of available CPUs. Exit codes: 0 success,
/// 1 verification failure, 2 usage error, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "pic-bench", version, about, verbatim_doc_comment)]
pub struct Cli {
    /// What to run.
    #[arg(long, value_enum, default_value = "bench")]
    pub mode: Mode,

    /// Number of macro-particles.
    #[arg(long, default_value_t = 1_000_000)]
    pub particles: usize,

    /// Cells per axis, comma separated: NX,NY,NZ.
    #[arg(long, value_parser = parse_grid, default_value = "16,8,8")]
    pub grid: [usize; 3],

    /// Spline degree of the field representation.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,

    /// Time step.
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,

    /// Timed operator applications per repeat.
    #[arg(long, default_value_t = 3)]
    pub iterations: usize,

    /// Fresh-state repetitions per configuration.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    /// Worker counts, comma separated (e.g. 1,2,4,8).
    #[arg(long, value_delimiter = ',')]
    pub workers: Option<Vec<usize>>,

    /// Reduction strategies: serial, replicated, padded, pooled, atomic,
    /// or all. Comma separated.
    #[arg(long = "strategy", value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,

    /// Seed for the deterministic state generator.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// CSV output path (written atomically via a temp file).
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Use the reference configuration: 1e7 particles, 16x8x8 grid,
    /// degree 3, 3 iterations, dt 0.05.
    #[arg(long = "paper-config", default_value_t = false)]
    pub paper_config: bool,

    /// Force static partitioning and reproducible reductions; checksum
    /// columns become bitwise stable across runs.
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,

    /// Scratch memory placement.
    #[arg(long = "scratch-layout", value_enum, default_value = "pooled")]
    pub scratch_layout: ScratchLayoutArg,
}

fn parse_grid(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("grid must be NX,NY,NZ, got {s:?}"));
    }
    let mut grid = [0usize; 3];
    for (slot, part) in grid.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("bad grid component {part:?}: {e}"))?;
    }
    Ok(grid)
}

/// One strategy axis entry: the plain serial loop or a parallel reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStrategy {
    Serial,
    Scatter(ScatterStrategy),
}

impl RunStrategy {
    pub const ALL: [RunStrategy; 5] = [
        RunStrategy::Serial,
        RunStrategy::Scatter(ScatterStrategy::Replicated),
        RunStrategy::Scatter(ScatterStrategy::ReplicatedPadded),
        RunStrategy::Scatter(ScatterStrategy::PooledContiguous),
        RunStrategy::Scatter(ScatterStrategy::Atomic),
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunStrategy::Serial => "serial",
            RunStrategy::Scatter(s) => s.name(),
        }
    }

    pub fn parse(name: &str) -> Result<Vec<RunStrategy>, String> {
        Ok(match name.trim() {
            "serial" => vec![RunStrategy::Serial],
            "replicated" => vec![RunStrategy::Scatter(ScatterStrategy::Replicated)],
            "padded" => vec![RunStrategy::Scatter(ScatterStrategy::ReplicatedPadded)],
            "pooled" => vec![RunStrategy::Scatter(ScatterStrategy::PooledContiguous)],
            "atomic" => vec![RunStrategy::Scatter(ScatterStrategy::Atomic)],
            "all" => RunStrategy::ALL.to_vec(),
            other => return Err(format!("unknown strategy {other:?}")),
        })
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub mode: Mode,
    pub particles: usize,
    pub grid: [usize; 3],
    pub degree: usize,
    pub dt: f64,
    pub iterations: usize,
    pub repeats: usize,
    pub workers: Vec<usize>,
    pub strategies: Vec<RunStrategy>,
    pub seed: u64,
    pub csv: Option<PathBuf>,
    pub deterministic: bool,
    pub scratch_layout: pic_kernel::ScratchLayout,
}

impl BenchConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, String> {
        let mut cfg = Self {
            mode: cli.mode,
            particles: cli.particles,
            grid: cli.grid,
            degree: cli.degree,
            dt: cli.dt,
            iterations: cli.iterations,
            repeats: cli.repeats,
            workers: match cli.workers {
                Some(w) => w,
                None => vec![exec::workers_from_env().unwrap_or_else(default_workers)],
            },
            strategies: match cli.strategies {
                Some(names) => {
                    let mut list = Vec::new();
                    for name in names {
                        for s in RunStrategy::parse(&name)? {
                            if !list.contains(&s) {
                                list.push(s);
                            }
                        }
                    }
                    list
                }
                None => match cli.mode {
                    Mode::Verify => RunStrategy::ALL.to_vec(),
                    _ => vec![
                        RunStrategy::Serial,
                        RunStrategy::Scatter(ScatterStrategy::PooledContiguous),
                    ],
                },
            },
            seed: cli.seed,
            csv: cli.csv,
            deterministic: cli.deterministic,
            scratch_layout: match cli.scratch_layout {
                ScratchLayoutArg::Pooled => pic_kernel::ScratchLayout::Pooled,
                ScratchLayoutArg::Interleaved => pic_kernel::ScratchLayout::Interleaved,
            },
        };
        if cli.paper_config {
            cfg.particles = PAPER_PARTICLES;
            cfg.grid = PAPER_GRID;
            cfg.degree = PAPER_DEGREE;
            cfg.iterations = PAPER_ITERATIONS;
            cfg.dt = PAPER_DT;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.particles == 0 {
            return Err("need at least one particle".into());
        }
        if self.iterations == 0 || self.repeats == 0 {
            return Err("iterations and repeats must be at least 1".into());
        }
        if self.grid.iter().any(|&n| n == 0) {
            return Err("grid axes must be positive".into());
        }
        if self.degree == 0 {
            return Err("spline degree must be at least 1".into());
        }
        if !self.dt.is_finite() {
            return Err("dt must be finite".into());
        }
        if self.workers.is_empty() || self.workers.iter().any(|&w| w == 0) {
            return Err("worker counts must be at least 1".into());
        }
        if self.strategies.is_empty() {
            return Err("need at least one strategy".into());
        }
        if self.deterministic
            && self
                .strategies
                .iter()
                .any(|s| matches!(s, RunStrategy::Scatter(ScatterStrategy::Atomic)))
        {
            return Err("the atomic strategy is not reproducible; drop it or drop --deterministic".into());
        }
        Ok(())
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
