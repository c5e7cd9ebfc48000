//! Run configuration: a JSON document whose fields command-line flags override.

use std::path::{Path, PathBuf};

use putlab::experiment::{HOracle, ProxyLattice};
use putlab::leakage::{MeasureSpec, Side};
use putlab::mechanisms::FamilySpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_json;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// discrepancy, convergence, uniform or bound-table; informational, the subcommand decides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_alphabet: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_alphabet: Option<PathBuf>,
    /// Inline joint distribution, one row per `S` symbol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_labels: Option<Vec<String>>,
    /// Inline mechanism, one row per `X` symbol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<Vec<MeasureSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<Side>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_dist: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_outputs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_oracle: Option<HOracle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy: Option<ProxyLattice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Merge map to apply instead of deriving one from `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl Config {
    /// Reads a config file; relative paths in it are taken from its directory.
    pub fn load(path: &Path) -> CliResult<Config> {
        let mut config: Config = read_json(path)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.samples,
            &mut config.s_alphabet,
            &mut config.x_alphabet,
            &mut config.mechanism_csv,
            &mut config.map,
            &mut config.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(config)
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn overlay(mut self, flags: Config) -> Config {
        overlay!(
            self, flags, experiment, samples, s_alphabet, x_alphabet, joint, s_labels, x_labels, mechanism, mechanism_csv,
            leakage, utility, measures, sides, n, beta, eps, eps_grid, eps_dist, family, gamma, radii, m, n_outputs,
            step, h_oracle, proxy, seed, trials, map, output
        );
        self
    }
}

/// `rr`, `z`, `z:<xbar>` or `grid:<n_outputs>:<step>`.
pub fn parse_family(s: &str) -> CliResult<FamilySpec> {
    let bad = || CliError::Config(format!("unknown family {s:?}; expected rr, z, z:<xbar> or grid:<n_outputs>:<step>"));
    let parts: Vec<&str> = s.trim().split(':').collect();
    match parts.as_slice() {
        ["rr"] => Ok(FamilySpec::RandomizedResponse),
        ["z"] => Ok(FamilySpec::ZChannel { xbar: None }),
        ["z", xbar] => Ok(FamilySpec::ZChannel { xbar: Some(xbar.parse().map_err(|_| bad())?) }),
        ["grid", n, step] => Ok(FamilySpec::FullGrid {
            n_outputs: n.parse().map_err(|_| bad())?,
            step: step.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_matrix(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("not a number in matrix {s:?}: {v:?}"))))
                .collect()
        })
        .collect()
}

/// Budget used when none is given: 0.65 for `pc` and 0.05 for `arimoto(2)`,
/// the values of the discrepancy study.
pub fn default_eps(spec: &MeasureSpec) -> Option<f64> {
    match spec.to_string().as_str() {
        "pc" => Some(0.65),
        "arimoto(2)" => Some(0.05),
        _ => None,
    }
}
