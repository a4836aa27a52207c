use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vortex_census::census::{BackfitMethod, Selection};
use vortex_census::modwt::FilterKind;

use crate::config::{RunConfig, Setting};

#[derive(Debug, Parser)]
#[command(name = "vortex-census", version, about = "Census of coherent vortices in 2D vorticity fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run decaying 2D turbulence and write time-tagged snapshots.
    Simulate(SimulateArgs),
    /// Render planted Gaussian vortices plus noise.
    Synth(SynthArgs),
    /// Write the multiresolution channels of a field.
    Mra(MraArgs),
    /// Write the Λ maps and candidate list of a field.
    Scan(CensusArgs),
    /// Select vortices and write their statistics.
    Census(CensusArgs),
    /// Census a directory of snapshots and fit power laws in time.
    Scaling(ScalingArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Synth(_) => "synth",
            Command::Mra(_) => "mra",
            Command::Scan(_) => "scan",
            Command::Census(_) => "census",
            Command::Scaling(_) => "scaling",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Synth(a) => &a.common,
            Command::Mra(a) => &a.common,
            Command::Scan(a) | Command::Census(a) => &a.common,
            Command::Scaling(a) => &a.common,
        }
    }

    /// Values given on the command line, as a sparse config.
    pub fn overrides(&self) -> RunConfig {
        let mut cfg = RunConfig {
            out: self.common().out.clone(),
            ..Default::default()
        };
        match self {
            Command::Simulate(a) => a.sim.apply(&mut cfg),
            Command::Synth(a) => {
                cfg.n = a.n;
                cfg.vortices = a.vortices.clone();
                cfg.noise = a.noise;
                cfg.seed = a.seed;
                cfg.filament = a.filament;
                cfg.count = a.count;
                cfg.min_separation = a.min_separation;
            }
            Command::Mra(a) => {
                cfg.input = a.input.clone();
                cfg.filter = a.filter;
                cfg.levels = a.levels;
            }
            Command::Scan(a) | Command::Census(a) => {
                cfg.input = a.input.clone();
                a.census.apply(&mut cfg);
            }
            Command::Scaling(a) => {
                cfg.snapshots = a.snapshots.clone();
                cfg.t_min = a.t_min;
                a.census.apply(&mut cfg);
            }
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` or JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimFlags {
    /// Grid size (power of two).
    #[arg(long)]
    pub n: Option<usize>,
    /// Hyperviscosity, or `auto`.
    #[arg(long)]
    pub nu: Option<Setting>,
    /// Maximum time step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub snapshot_interval: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Central wavenumber of the initial spectrum.
    #[arg(long)]
    pub init_peak_k: Option<usize>,
    /// Initial RMS vorticity.
    #[arg(long)]
    pub init_amplitude: Option<f64>,
}

impl SimFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.n = self.n;
        cfg.nu = self.nu;
        cfg.dt = self.dt;
        cfg.t_end = self.t_end;
        cfg.snapshot_interval = self.snapshot_interval;
        cfg.seed = self.seed;
        cfg.init_peak_k = self.init_peak_k;
        cfg.init_amplitude = self.init_amplitude;
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Grid size.
    #[arg(long)]
    pub n: Option<usize>,
    /// CSV with columns row, col, amplitude, sigma2. Without it a random
    /// layout is drawn from the seed.
    #[arg(long)]
    pub vortices: Option<PathBuf>,
    /// White-noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Amplitude of a sinusoidal filament added to the background.
    #[arg(long)]
    pub filament: Option<f64>,
    /// Vortex count for a random layout.
    #[arg(long)]
    pub count: Option<usize>,
    /// Minimum centre spacing for a random layout (px).
    #[arg(long)]
    pub min_separation: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MraArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub filter: Option<FilterKind>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    /// Field file to analyse.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub census: CensusFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Directory of time-tagged field files.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    /// Earliest snapshot time included in the fits.
    #[arg(long)]
    pub t_min: Option<f64>,
    #[command(flatten)]
    pub census: CensusFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CensusFlags {
    /// Template amplitude, or `auto` for the field's max |ζ|.
    #[arg(long)]
    pub eta: Option<Setting>,
    /// Template width σ² (px²).
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Odd template patch size (px).
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub filter: Option<FilterKind>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Relative diagonal ridge.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Noise-variance ridge: a number, `auto` or `off`.
    #[arg(long)]
    pub noise_ridge: Option<Setting>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
    #[arg(long)]
    pub coalesce_radius: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub selection: Option<Selection>,
    #[arg(long)]
    pub grid_spacing: Option<f64>,
    #[arg(long)]
    pub backfit: Option<BackfitMethod>,
    #[arg(long)]
    pub backfit_tolerance: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
}

impl CensusFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.eta = self.eta;
        cfg.sigma2 = self.sigma2;
        cfg.patch = self.patch;
        cfg.filter = self.filter;
        cfg.levels = self.levels;
        cfg.ridge = self.ridge;
        cfg.noise_ridge = self.noise_ridge;
        cfg.max_candidates = self.max_candidates;
        cfg.coalesce_radius = self.coalesce_radius;
        cfg.patience = self.patience;
        cfg.selection = self.selection;
        cfg.grid_spacing = self.grid_spacing;
        cfg.backfit = self.backfit;
        cfg.backfit_tolerance = self.backfit_tolerance;
        cfg.max_sweeps = self.max_sweeps;
    }
}
