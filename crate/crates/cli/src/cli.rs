//! Argument parsing.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use putlab::experiment::ProxyLattice;
use putlab::leakage::{MeasureSpec, Side};
use putlab::mechanisms::FamilySpec;

use crate::commands::{self, Output};
use crate::config::{parse_family, parse_matrix, Config};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "putlab", version, about = "Privacy-utility measures, certificates and mechanism design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leakage and utility of a mechanism (identity by default) as JSON.
    Measure(Flags),
    /// Finite-sample certificates as CSV rows.
    Bound(Flags),
    /// Best mechanism of a family under a leakage budget.
    Design(Flags),
    /// Design with a privacy guarantee over a ball around the estimate.
    Uniform(Flags),
    /// Merge rarely observed X symbols into a sink symbol.
    Preprocess(Flags),
    /// Draw i.i.d. sample pairs from a joint distribution.
    Sample(Flags),
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Train/test gaps of designed mechanisms against their certificates.
    Discrepancy(Flags),
    /// Empirical against true privacy-utility function and optimal mechanisms.
    Convergence(Flags),
    /// Uniform design across radii with verification and gap bounds.
    Uniform(Flags),
    /// Certificate table; same as `bound`.
    BoundTable(Flags),
}

fn measure_arg(s: &str) -> Result<MeasureSpec, String> {
    s.parse().map_err(|e: putlab::Error| e.to_string())
}

fn side_arg(s: &str) -> Result<Side, String> {
    s.parse().map_err(|e: putlab::Error| e.to_string())
}

fn family_arg(s: &str) -> Result<FamilySpec, String> {
    parse_family(s).map_err(|e| e.to_string())
}

/// Inline matrix flag value.
#[derive(Debug, Clone)]
pub struct Matrix(pub Vec<Vec<f64>>);

fn matrix_arg(s: &str) -> Result<Matrix, String> {
    parse_matrix(s).map(Matrix).map_err(|e| e.to_string())
}

fn proxy_arg(s: &str) -> Result<ProxyLattice, String> {
    let (n, step) = s.split_once(':').ok_or("expected <n_outputs>:<step>")?;
    Ok(ProxyLattice {
        n_outputs: n.parse().map_err(|_| "bad n_outputs")?,
        step: step.parse().map_err(|_| "bad step")?,
    })
}

/// Flags shared by every subcommand; each overrides the field of the same
/// name in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sample CSV with header `s,x`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// S alphabet file, one label per line.
    #[arg(long)]
    pub s_alphabet: Option<PathBuf>,
    /// X alphabet file, one label per line.
    #[arg(long)]
    pub x_alphabet: Option<PathBuf>,
    /// Inline joint distribution: rows separated by `;`, entries by `,`.
    #[arg(long, value_parser = matrix_arg)]
    pub joint: Option<Matrix>,
    #[arg(long, value_delimiter = ',')]
    pub s_labels: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub x_labels: Option<Vec<String>>,
    /// Inline mechanism, one row per X symbol.
    #[arg(long, value_parser = matrix_arg)]
    pub mechanism: Option<Matrix>,
    /// Mechanism CSV as written by `design`.
    #[arg(long)]
    pub mechanism_csv: Option<PathBuf>,
    /// Leakage measure, e.g. pc, f:chi2, arimoto(2), sibson(inf), maxal(2).
    #[arg(long, value_parser = measure_arg)]
    pub leakage: Option<MeasureSpec>,
    /// Utility measure; defaults to the leakage measure.
    #[arg(long, value_parser = measure_arg)]
    pub utility: Option<MeasureSpec>,
    /// Measures for the certificate table.
    #[arg(long = "measure", value_parser = measure_arg)]
    pub measures: Vec<MeasureSpec>,
    /// Sides for the certificate table: privacy, utility.
    #[arg(long = "side", value_parser = side_arg)]
    pub sides: Vec<Side>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Leakage budget.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Sorted leakage budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Vec<f64>,
    /// Budget at which optimal mechanisms are compared.
    #[arg(long)]
    pub eps_dist: Option<f64>,
    /// rr, z, z:<xbar> or grid:<n_outputs>:<step>.
    #[arg(long, value_parser = family_arg)]
    pub family: Option<FamilySpec>,
    /// Merge threshold for `preprocess`.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ball radii, comma separated.
    #[arg(long = "radius", value_delimiter = ',')]
    pub radii: Vec<f64>,
    /// Ball members checked.
    #[arg(long)]
    pub m: Option<usize>,
    /// Lattice output count.
    #[arg(long)]
    pub n_outputs: Option<usize>,
    /// Lattice step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Lattice for the best uniform mechanism stand-in, `<n_outputs>:<step>`.
    #[arg(long, value_parser = proxy_arg)]
    pub proxy: Option<ProxyLattice>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Merge map JSON to apply in `preprocess`.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Result file; a `.meta.json` sidecar is written next to it. Prints to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn nonempty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

impl Flags {
    /// The config file overlaid with the flags.
    pub fn resolve(self) -> CliResult<Config> {
        let base = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let flags = Config {
            experiment: None,
            samples: self.samples,
            s_alphabet: self.s_alphabet,
            x_alphabet: self.x_alphabet,
            joint: self.joint.map(|m| m.0),
            s_labels: self.s_labels,
            x_labels: self.x_labels,
            mechanism: self.mechanism.map(|m| m.0),
            mechanism_csv: self.mechanism_csv,
            leakage: self.leakage,
            utility: self.utility,
            measures: nonempty(self.measures),
            sides: nonempty(self.sides),
            n: nonempty(self.n),
            beta: self.beta,
            eps: self.eps,
            eps_grid: nonempty(self.eps_grid),
            eps_dist: self.eps_dist,
            family: self.family,
            gamma: self.gamma,
            radii: nonempty(self.radii),
            m: self.m,
            n_outputs: self.n_outputs,
            step: self.step,
            h_oracle: None,
            proxy: self.proxy,
            seed: self.seed,
            trials: self.trials,
            map: self.map,
            output: self.out,
        };
        Ok(base.overlay(flags))
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let (name, flags, body): (&str, Flags, fn(&Config) -> CliResult<Output>) = match cli.command {
        Command::Measure(f) => ("measure", f, commands::measure),
        Command::Bound(f) => ("bound", f, commands::bound),
        Command::Design(f) => ("design", f, commands::design),
        Command::Uniform(f) => ("uniform", f, commands::uniform),
        Command::Preprocess(f) => ("preprocess", f, commands::preprocess),
        Command::Sample(f) => ("sample", f, commands::sample_pairs),
        Command::Experiment(Experiment::Discrepancy(f)) => ("experiment discrepancy", f, commands::experiment_discrepancy),
        Command::Experiment(Experiment::Convergence(f)) => ("experiment convergence", f, commands::experiment_convergence),
        Command::Experiment(Experiment::Uniform(f)) => ("experiment uniform", f, commands::experiment_uniform),
        Command::Experiment(Experiment::BoundTable(f)) => ("experiment bound-table", f, commands::bound),
    };
    let config = flags.resolve()?;
    let output = body(&config)?;
    commands::emit(name, &config, &output)
}
