use crate::report::Failure;
use clap::{Args, ValueEnum};
use egp_core::LatticeSpec;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopKind {
    RmmThermal,
    RmmCoherent,
    RandomClassical,
    RandomSqueezed,
}

impl LoopKind {
    pub fn name(self) -> &'static str {
        match self {
            LoopKind::RmmThermal => "rmm-thermal",
            LoopKind::RmmCoherent => "rmm-coherent",
            LoopKind::RandomClassical => "random-classical",
            LoopKind::RandomSqueezed => "random-squeezed",
        }
    }

    pub fn seeded(self) -> bool {
        matches!(self, LoopKind::RandomClassical | LoopKind::RandomSqueezed)
    }
}

/// Options shared by every subcommand. The same keys (kebab-case, `L` in
/// upper case) are accepted in a `--config` file; flags win over the file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// Number of unit cells; a comma-separated list where a sweep is run.
    #[arg(long = "L", value_delimiter = ',', global = true)]
    #[serde(rename = "L", default)]
    pub cells: Option<Vec<usize>>,

    /// Sites per unit cell.
    #[arg(long = "n", global = true)]
    #[serde(rename = "n")]
    pub sites: Option<usize>,

    /// Gauge offset of the shift phases, in (0, 1).
    #[arg(long, global = true)]
    pub offset: Option<f64>,

    /// Rice-Mele amplitude A.
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,

    /// Inverse temperature of thermal states.
    #[arg(long, global = true)]
    pub beta: Option<f64>,

    /// Chemical potential (default -3A for Rice-Mele, -4 for the Chern family).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,

    /// Rescaled cycle times AT, comma-separated.
    #[arg(long, value_delimiter = ',', global = true)]
    #[serde(default)]
    pub period_list: Option<Vec<f64>>,

    /// RK4 steps per period (flux-sweep) or Zak-loop steps (winding --zak).
    #[arg(long, global = true)]
    pub steps: Option<usize>,

    /// Initial loop samples (winding) or k_y slices (chern).
    #[arg(long, global = true)]
    pub samples: Option<usize>,

    /// Largest accepted phase increment between loop samples, in radians.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,

    /// Samples of the trace-quadrature cross-check.
    #[arg(long, global = true)]
    pub trace_samples: Option<usize>,

    /// Seed of random loops; seeds seed..seed+count are run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of seeded loops.
    #[arg(long, global = true)]
    pub count: Option<usize>,

    /// Fock cutoff of the truncated oracle.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,

    /// Built-in loop of the winding subcommand.
    #[arg(long = "loop", value_enum, global = true)]
    #[serde(rename = "loop")]
    pub loop_kind: Option<LoopKind>,

    /// Also report the Zak-phase winding of the reference pump.
    #[arg(long, global = true)]
    #[serde(default)]
    pub zak: bool,

    /// Mass parameter of the two-band Chern family.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mass: Option<f64>,

    /// Pump fraction t/T at which scaling and bench states are built.
    #[arg(long, global = true)]
    pub fraction: Option<f64>,

    /// CSV destination; standard output when absent or "-".
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Flat key = value file with the same keys as the flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Plain summaries without ANSI colors (NO_COLOR is honored too).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub no_color: bool,

    #[arg(long, hide = true, global = true)]
    #[serde(skip)]
    pub inject_fault: bool,
}

impl Options {
    fn merged_over(self, file: Options) -> Options {
        Options {
            cells: self.cells.or(file.cells),
            sites: self.sites.or(file.sites),
            offset: self.offset.or(file.offset),
            amplitude: self.amplitude.or(file.amplitude),
            beta: self.beta.or(file.beta),
            mu: self.mu.or(file.mu),
            period_list: self.period_list.or(file.period_list),
            steps: self.steps.or(file.steps),
            samples: self.samples.or(file.samples),
            tolerance: self.tolerance.or(file.tolerance),
            trace_samples: self.trace_samples.or(file.trace_samples),
            seed: self.seed.or(file.seed),
            count: self.count.or(file.count),
            cutoff: self.cutoff.or(file.cutoff),
            loop_kind: self.loop_kind.or(file.loop_kind),
            zak: self.zak || file.zak,
            mass: self.mass.or(file.mass),
            fraction: self.fraction.or(file.fraction),
            output: self.output.or(file.output),
            config: self.config,
            no_color: self.no_color,
            inject_fault: self.inject_fault,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FluxSweep,
    Scaling,
    Winding,
    OracleCheck,
    Bench,
    Chern,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FluxSweep => "flux-sweep",
            Command::Scaling => "scaling",
            Command::Winding => "winding",
            Command::OracleCheck => "oracle-check",
            Command::Bench => "bench",
            Command::Chern => "chern",
        }
    }

    fn default_cells(self) -> Vec<usize> {
        match self {
            Command::Scaling => vec![4, 8, 16, 32],
            Command::Bench => vec![16, 64, 256],
            Command::Chern => vec![8],
            _ => vec![4],
        }
    }
}

/// Fully resolved and validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub cells: Vec<usize>,
    pub sites: usize,
    pub offset: f64,
    pub amplitude: f64,
    pub beta: f64,
    pub mu: f64,
    pub periods: Vec<f64>,
    pub steps: Option<usize>,
    pub samples: usize,
    pub tolerance: f64,
    pub trace_samples: usize,
    pub seed: u64,
    pub count: usize,
    pub cutoff: usize,
    pub loop_kind: LoopKind,
    pub zak: bool,
    pub mass: f64,
    pub fraction: f64,
    pub output: Option<PathBuf>,
    pub color: bool,
    pub inject_fault: bool,
}

fn default_periods() -> Vec<f64> {
    (0..25).map(|i| 10f64.powf(2.0 * i as f64 / 24.0)).collect()
}

fn read_file(path: &Path) -> Result<Options, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

impl RunConfig {
    pub fn resolve(command: Command, flags: Options, color_allowed: bool) -> Result<Self, Failure> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => Options::default(),
        };
        let o = flags.merged_over(file);
        let amplitude = o.amplitude.unwrap_or(1.0);
        let default_mu = if command == Command::Chern { -4.0 } else { -3.0 * amplitude };
        let cfg = RunConfig {
            command,
            cells: o.cells.unwrap_or_else(|| command.default_cells()),
            sites: o.sites.unwrap_or(2),
            offset: o.offset.unwrap_or(LatticeSpec::DEFAULT_OFFSET),
            amplitude,
            beta: o.beta.unwrap_or(1.0),
            mu: o.mu.unwrap_or(default_mu),
            periods: o.period_list.unwrap_or_else(default_periods),
            steps: o.steps,
            samples: o.samples.unwrap_or(32),
            tolerance: o.tolerance.unwrap_or(egp_core::winding::DEFAULT_TOLERANCE),
            trace_samples: o.trace_samples.unwrap_or(64),
            seed: o.seed.unwrap_or(0),
            count: o.count.unwrap_or(1),
            cutoff: o.cutoff.unwrap_or(400),
            loop_kind: o.loop_kind.unwrap_or(LoopKind::RmmThermal),
            zak: o.zak,
            mass: o.mass.unwrap_or(1.0),
            fraction: o.fraction.unwrap_or(0.3),
            output: o.output.filter(|p| p.as_os_str() != "-"),
            color: color_allowed && !o.no_color,
            inject_fault: o.inject_fault,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.cells.is_empty() {
            return Err(config_error("L list is empty"));
        }
        for &l in &self.cells {
            self.lattice(l).map_err(|e| config_error(e.to_string()))?;
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(config_error(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(config_error(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.mu.is_finite() || !self.mass.is_finite() {
            return Err(config_error("mu and mass must be finite"));
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(config_error(format!("fraction must lie in [0, 1], got {}", self.fraction)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < std::f64::consts::PI) {
            return Err(config_error(format!("tolerance must lie in (0, pi), got {}", self.tolerance)));
        }
        if self.samples < 8 || self.trace_samples < 8 {
            return Err(config_error("samples and trace-samples must be at least 8"));
        }
        if self.count == 0 {
            return Err(config_error("count must be at least 1"));
        }
        if self.cutoff == 0 {
            return Err(config_error("cutoff must be at least 1"));
        }
        if let Some(s) = self.steps {
            if s < egp_core::rice_mele::MIN_STEPS {
                return Err(config_error(format!(
                    "steps must be at least {}, got {s}",
                    egp_core::rice_mele::MIN_STEPS
                )));
            }
        }
        match self.command {
            Command::FluxSweep => {
                if self.periods.is_empty() {
                    return Err(config_error("period list is empty"));
                }
                if let Some(at) = self.periods.iter().find(|at| !(at.is_finite() && **at > 0.0)) {
                    return Err(config_error(format!("cycle times must be positive, got {at}")));
                }
            }
            Command::Scaling if self.cells.len() < 3 => {
                return Err(config_error(format!("scaling needs at least 3 sizes, got {}", self.cells.len())));
            }
            Command::Winding | Command::Chern | Command::Scaling | Command::Bench if self.sites != 2 && !self.loop_kind.seeded() => {
                return Err(config_error("the two-band models need n = 2"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn lattice(&self, cells: usize) -> egp_core::Result<LatticeSpec> {
        LatticeSpec::new(cells, self.sites, self.offset)
    }

    /// The comment line recorded at the top of every CSV.
    pub fn describe(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = format!("command={} L={} n={} offset={}", self.command.name(), list(&self.cells), self.sites, self.offset);
        let _ = write!(s, " amplitude={} beta={} mu={}", self.amplitude, self.beta, self.mu);
        let periods: Vec<String> = self.periods.iter().map(|x| x.to_string()).collect();
        let _ = write!(s, " period-list={}", periods.join(","));
        match self.steps {
            Some(n) => {
                let _ = write!(s, " steps={n}");
            }
            None => s.push_str(" steps=auto"),
        }
        let _ = write!(
            s,
            " samples={} tolerance={} trace-samples={} seed={} count={} cutoff={} loop={} zak={} mass={} fraction={}",
            self.samples,
            self.tolerance,
            self.trace_samples,
            self.seed,
            self.count,
            self.cutoff,
            self.loop_kind.name(),
            self.zak,
            self.mass,
            self.fraction
        );
        s
    }
}
