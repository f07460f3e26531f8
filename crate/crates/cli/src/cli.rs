use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "nfsusy", version, about = "N-fold SUSY model pairs with position-dependent mass")]
pub struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,

    /// Seed for random parameter draws.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Describe a model: domain, sectors, restricted matrices; optionally dump potentials.
    Model(ModelArgs),
    /// Classify dynamical breaking for one model and mass.
    Analyze(AnalyzeArgs),
    /// Classify every cell of the default grid.
    Table1(Table1Args),
    /// Finite-difference spectrum of one partner Hamiltonian.
    Spectrum(SpectrumArgs),
    /// Exact algebraic certificates over random parameter draws.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    /// B.rational, B.trig, B.exp, X2.rational, X2.hyper or X2.exp.
    #[arg(long)]
    pub id: String,

    #[arg(long = "N")]
    pub n: usize,

    /// Model parameter as key=value; rationals like 1/2 or decimals like 0.25.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,

    /// const, expdecay, gauss2, sech2, algebraic_pole or rational_beta.
    #[arg(long, default_value = "const")]
    pub mass: String,

    #[arg(long = "mass-param", value_name = "KEY=VALUE")]
    pub mass_params: Vec<String>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Write q, U⁻, U⁺, m as CSV.
    #[arg(long, value_name = "PATH")]
    pub dump_potential: Option<PathBuf>,

    /// q-window for --dump-potential, as a:b.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,

    #[arg(long, default_value_t = 401)]
    pub points: usize,

    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Exit 1 when the classification differs from the reference one.
    #[arg(long)]
    pub expect_paper: bool,

    /// Exponent method only.
    #[arg(long)]
    pub fast: bool,

    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Table1Args {
    #[arg(long)]
    pub expect_paper: bool,

    /// Alternative defaults file with the same layout as the bundled one.
    #[arg(long, value_name = "PATH")]
    pub defaults: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SideArg {
    Minus,
    Plus,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[arg(long, value_enum, default_value = "minus")]
    pub side: SideArg,

    /// Interior grid points of the coarse grid.
    #[arg(long, default_value_t = 4000)]
    pub grid: usize,

    #[arg(long, default_value_t = 20)]
    pub count: usize,

    /// Fixed Dirichlet box a:b in q instead of the adaptive sector box.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,

    /// Tolerance for matching restricted eigenvalues.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,

    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum What {
    Closure,
    Flag,
    Intertwine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    #[value(name = "B")]
    B,
    #[value(name = "X2")]
    X2,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub what: What,

    #[arg(long = "type", value_enum)]
    pub family: Family,

    #[arg(long = "N")]
    pub n: usize,

    #[arg(long, default_value_t = 10)]
    pub draws: usize,

    /// Highest monomial degree for the intertwining check.
    #[arg(long, default_value_t = 10)]
    pub maxdeg: usize,

    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
