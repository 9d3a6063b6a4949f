mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 verification failure.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError { code: 3, message: msg.into() }
    }
    pub fn verification(msg: impl Into<String>) -> Self {
        CliError { code: 4, message: msg.into() }
    }
}

#[derive(Parser)]
#[command(
    name = "reslab",
    allow_negative_numbers = true,
    version,
    about = "Resonances, Gamow states and spectral time evolution for 1D compactly supported potentials"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Plain-text key=value run configuration; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (mirrors RESLAB_THREADS); never changes results
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// doublewell | rect | custom | free
    #[arg(long, global = true)]
    potential: Option<String>,
    #[arg(long, global = true)]
    ell: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Comma list x0,x1,... for potential=custom
    #[arg(long, global = true)]
    breakpoints: Option<String>,
    /// Comma list h0,h1,... for potential=custom
    #[arg(long, global = true)]
    heights: Option<String>,
    /// Length scale in meters
    #[arg(long = "a0-m", global = true)]
    a0_m: Option<f64>,
    /// Energy scale in MeV
    #[arg(long = "e1-mev", global = true)]
    e1_mev: Option<f64>,
    /// Particle mass in kg
    #[arg(long = "mass-kg", global = true)]
    mass_kg: Option<f64>,
    /// Decimal digits of working precision for root refinement
    #[arg(long, global = true)]
    digits: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering coefficients a(k), b₊(k) and the transmission/reflection
    /// probabilities over a real-k grid
    #[command(allow_negative_numbers = true)]
    Scatter {
        #[arg(long, default_value_t = 0.1)]
        kmin: f64,
        #[arg(long, default_value_t = 30.0)]
        kmax: f64,
        #[arg(long, default_value_t = 600)]
        knum: usize,
    },
    /// Complex roots of a(k) in a window below the real axis, with E, Γ and
    /// the decay rate in SI units
    #[command(allow_negative_numbers = true)]
    Resonances {
        #[arg(long, default_value_t = 1.0)]
        kmin: f64,
        #[arg(long, default_value_t = 8.0)]
        kmax: f64,
        #[arg(long = "max-im", default_value_t = 1.0)]
        max_im: f64,
    },
    /// The Gamow function (purely outgoing, sup-normalized) of the first
    /// resonance in the window, sampled on an x-grid
    #[command(allow_negative_numbers = true)]
    Gamow {
        #[arg(long, default_value_t = 1.0)]
        kmin: f64,
        #[arg(long, default_value_t = 8.0)]
        kmax: f64,
        #[arg(long, default_value_t = -6.0)]
        xmin: f64,
        #[arg(long, default_value_t = 6.0)]
        xmax: f64,
        #[arg(long, default_value_t = 601)]
        xnum: usize,
    },
    /// Line shape of the truncated Gamow state: |transform against u₊| next
    /// to the resonance pole model |c/(k - conj z)| across the peak
    #[command(allow_negative_numbers = true)]
    Transform {
        #[arg(long, default_value_t = 7.0)]
        kmin: f64,
        #[arg(long, default_value_t = 8.0)]
        kmax: f64,
        /// Half-widths of the peak covered on each side
        #[arg(long = "half-widths", default_value_t = 10.0)]
        half_widths: f64,
        #[arg(long, default_value_t = 201)]
        knum: usize,
    },
    /// Exact spectral evolution of the truncated Gamow state: profiles
    /// ψ(t, x) on a window
    #[command(allow_negative_numbers = true)]
    Evolve {
        #[command(flatten)]
        dynamics: DynamicsArgs,
        #[arg(long, default_value_t = 201)]
        xnum: usize,
    },
    /// Survival probability and window mass against the Breit-Wigner pole
    /// approximation (exponential decay law)
    #[command(allow_negative_numbers = true)]
    Survival {
        #[command(flatten)]
        dynamics: DynamicsArgs,
    },
    /// Cross-check of the spectral evolution against an independent
    /// Crank-Nicolson grid propagation
    #[command(allow_negative_numbers = true)]
    OracleCompare {
        #[command(flatten)]
        dynamics: DynamicsArgs,
        #[arg(long, default_value_t = 241)]
        xnum: usize,
        /// Half-size of the propagation box (default: window + k_max·t_max)
        #[arg(long = "box")]
        box_half: Option<f64>,
        #[arg(long, default_value_t = 2.5e-3)]
        dx: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// C¹ taper width applied to the truncation edge (0 keeps the jump)
        #[arg(long, default_value_t = 0.25)]
        taper: f64,
    },
    /// Reproduce the alpha-decay benchmark: double well ℓ=1, δ=2, λ=436 at
    /// extended precision; reports the root and Γ in 1/s with its deviation
    /// from the reference value
    #[command(allow_negative_numbers = true)]
    U234 {},
}

#[derive(Args, Clone)]
struct DynamicsArgs {
    /// Resonance selection window (first root in it becomes the state)
    #[arg(long, default_value_t = 1.0)]
    kmin: f64,
    #[arg(long, default_value_t = 4.0)]
    kmax: f64,
    #[arg(long, default_value_t = 0.0)]
    tmin: f64,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    #[arg(long, default_value_t = 25)]
    tnum: usize,
    /// Log-spaced times (tmin must be positive)
    #[arg(long, default_value_t = false)]
    tlog: bool,
    /// Observation window half-width (default: the potential's support L)
    #[arg(long)]
    window: Option<f64>,
    /// Truncation half-width of the initial Gamow state (default: inner well)
    #[arg(long)]
    trunc: Option<f64>,
    /// Spectral truncation wavenumber (default derived from the resonances)
    #[arg(long = "kmax-spectral")]
    kmax_spectral: Option<f64>,
    /// Relative Parseval tolerance of the expansion
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error code={} message=\"{}\"", e.code, e.message);
            ExitCode::from(e.code)
        }
    }
}
