//! Subcommand bodies. Each turns a resolved [`Config`] into an [`Output`].

use std::path::{Path, PathBuf};

use putlab::experiment::{
    bound_table, run_convergence, run_discrepancy, run_uniform, ConvergenceConfig, DataSource, DiscrepancyConfig, HOracle,
    UniformExperimentConfig,
};
use putlab::leakage::{evaluate, MeasureSpec, MeasureValue, Side, Units};
use putlab::mechanisms::{design_in_family, uniform_design, FamilySpec, UniformOptions};
use putlab::preprocess::{pi_gamma_samples, MergeMap};
use putlab::prob::{empirical, sample, Alphabet, JointDistribution, Mechanism, SampleSet};
use serde::Serialize;
use serde_json::Value;

use crate::config::{default_eps, Config};
use crate::error::{CliError, CliResult};
use crate::io;

/// What a command produced: the main document, files written next to it
/// (keyed by the suffix replacing the output extension) and the values
/// echoed in the sidecar.
#[derive(Debug, Default)]
pub struct Output {
    pub primary: Vec<u8>,
    pub extra: Vec<(&'static str, Vec<u8>)>,
    pub resolved: Option<Value>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a Config,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolved: Option<&'a Value>,
}

/// `out` with its extension replaced by `suffix`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

/// Writes the output files, or prints the main document when no output
/// path is configured.
pub fn emit(command: &str, config: &Config, output: &Output) -> CliResult<()> {
    match &config.output {
        Some(out) => {
            io::write_file(out, &output.primary)?;
            for (suffix, bytes) in &output.extra {
                io::write_file(&sibling(out, suffix), bytes)?;
            }
            let sidecar =
                Sidecar { command, version: putlab::VERSION, config, resolved: output.resolved.as_ref() };
            io::write_file(&sibling(out, "meta.json"), &io::json_bytes(&sidecar))
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&output.primary).map_err(|e| CliError::write(Path::new("<stdout>"), e))
        }
    }
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("configs serialize")
}

fn missing(what: &str) -> CliError {
    CliError::Config(format!("{what} is required"))
}

fn require_seed(config: &Config) -> CliResult<u64> {
    config.seed.ok_or_else(|| missing("--seed"))
}

fn alphabet_from(path: Option<&PathBuf>) -> CliResult<Option<Alphabet>> {
    path.map(|p| io::read_alphabet(p)).transpose()
}

pub fn load_samples(config: &Config) -> CliResult<Option<SampleSet>> {
    match &config.samples {
        None => Ok(None),
        Some(path) => {
            let s = alphabet_from(config.s_alphabet.as_ref())?;
            let x = alphabet_from(config.x_alphabet.as_ref())?;
            io::read_samples(path, s, x).map(Some)
        }
    }
}

fn inline_joint(config: &Config, rows: &[Vec<f64>]) -> CliResult<JointDistribution> {
    let q = JointDistribution::from_rows(rows)?;
    let s = match &config.s_labels {
        Some(l) => Alphabet::new(l.clone())?,
        None => q.s_alphabet().clone(),
    };
    let x = match &config.x_labels {
        Some(l) => Alphabet::new(l.clone())?,
        None => q.x_alphabet().clone(),
    };
    Ok(q.relabel(s, x)?)
}

/// The inline matrix when given, otherwise the empirical law of the samples.
pub fn load_joint(config: &Config) -> CliResult<JointDistribution> {
    if let Some(rows) = &config.joint {
        return inline_joint(config, rows);
    }
    match load_samples(config)? {
        Some(s) => Ok(empirical(&s)?),
        None => Err(CliError::Config("a distribution is required: pass --joint or --samples".into())),
    }
}

fn load_mechanism(config: &Config, q: &JointDistribution) -> CliResult<Mechanism> {
    if let Some(rows) = &config.mechanism {
        return Ok(Mechanism::from_rows(rows)?.on_inputs(q.x_alphabet())?);
    }
    if let Some(path) = &config.mechanism_csv {
        let w = io::read_mechanism(path)?;
        if w.x_alphabet() != q.x_alphabet() {
            return Err(putlab::Error::AlphabetMismatch(format!(
                "mechanism inputs {:?} differ from the X alphabet {:?}",
                w.x_alphabet().labels(),
                q.x_alphabet().labels()
            ))
            .into());
        }
        return Ok(w);
    }
    Ok(Mechanism::identity(q.x_alphabet()))
}

fn leakage_spec(config: &Config, default: MeasureSpec) -> MeasureSpec {
    config.leakage.clone().unwrap_or(default)
}

fn utility_spec(config: &Config, leakage: &MeasureSpec) -> MeasureSpec {
    config.utility.clone().unwrap_or_else(|| leakage.clone())
}

fn budget(config: &Config, spec: &MeasureSpec) -> CliResult<f64> {
    config.eps.or_else(|| default_eps(spec)).ok_or_else(|| missing(&format!("--eps (no default for {spec})")))
}

fn family(config: &Config) -> FamilySpec {
    config.family.clone().unwrap_or(FamilySpec::RandomizedResponse)
}

#[derive(Debug, Serialize)]
struct MeasureEntry {
    measure: MeasureSpec,
    value: f64,
    units: Units,
}

#[derive(Debug, Serialize)]
struct MeasureReport {
    leakage: MeasureEntry,
    utility: MeasureEntry,
}

fn entry(measure: MeasureSpec, v: MeasureValue) -> MeasureEntry {
    MeasureEntry { measure, value: v.value, units: v.units }
}

pub fn measure(config: &Config) -> CliResult<Output> {
    let q = load_joint(config)?;
    let w = load_mechanism(config, &q)?;
    let spec_l = leakage_spec(config, MeasureSpec::Pc);
    let spec_u = utility_spec(config, &spec_l);
    let report = MeasureReport {
        leakage: entry(spec_l.clone(), evaluate(&spec_l, Side::Privacy, &q, &w)?),
        utility: entry(spec_u.clone(), evaluate(&spec_u, Side::Utility, &q, &w)?),
    };
    Ok(Output { primary: io::json_bytes(&report), ..Output::default() })
}

pub fn bound(config: &Config) -> CliResult<Output> {
    let samples = load_samples(config)?;
    let p_hat = match (&config.joint, &samples) {
        (None, Some(s)) => empirical(s)?,
        _ => load_joint(config)?,
    };
    let measures = match &config.measures {
        Some(m) => m.clone(),
        None => vec![leakage_spec(config, MeasureSpec::Pc)],
    };
    if let Some(m) = measures.iter().find(|m| matches!(m, MeasureSpec::Shannon)) {
        return Err(putlab::Error::Unsupported(format!("no discrepancy bound exists for {m}")).into());
    }
    let sides = config.sides.clone().unwrap_or_else(|| vec![Side::Privacy, Side::Utility]);
    let ns = match (&config.n, &samples) {
        (Some(n), _) => n.clone(),
        (None, Some(s)) => vec![s.len()],
        (None, None) => return Err(missing("--n")),
    };
    let beta = config.beta.unwrap_or(0.1);
    let specs: Vec<(MeasureSpec, Side)> = measures.iter().flat_map(|m| sides.iter().map(|&s| (m.clone(), s))).collect();
    let rows = bound_table(&specs, &p_hat, &ns, beta)?;
    Ok(Output {
        primary: io::rows_csv(&rows)?,
        resolved: Some(serde_json::json!({ "measures": measures, "sides": sides, "n": ns, "beta": beta })),
        ..Output::default()
    })
}

pub fn design(config: &Config) -> CliResult<Output> {
    let q = load_joint(config)?;
    let spec_l = leakage_spec(config, MeasureSpec::Pc);
    let spec_u = utility_spec(config, &spec_l);
    let eps = budget(config, &spec_l)?;
    let family = family(config);
    let result = design_in_family(&family, &spec_l, &spec_u, &q, eps)?;
    Ok(Output {
        primary: io::json_bytes(&result),
        extra: vec![("mechanism.csv", io::mechanism_csv(&result.mechanism))],
        resolved: Some(serde_json::json!({ "leakage": spec_l, "utility": spec_u, "eps": eps, "family": family })),
    })
}

pub fn uniform(config: &Config) -> CliResult<Output> {
    let p_hat = load_joint(config)?;
    let spec_l = leakage_spec(config, MeasureSpec::Pc);
    let spec_u = utility_spec(config, &spec_l);
    let eps = budget(config, &spec_l)?;
    let r = match config.radii.as_deref() {
        Some([r]) => *r,
        _ => return Err(CliError::Config("exactly one --radius is required".into())),
    };
    let family = family(config);
    let opts = UniformOptions { m: config.m.unwrap_or(UniformOptions::default().m), seed: config.seed.unwrap_or(0) };
    let result = uniform_design(&family, &spec_l, &spec_u, &p_hat, eps, r, opts)?;
    Ok(Output {
        primary: io::json_bytes(&result),
        extra: vec![("mechanism.csv", io::mechanism_csv(&result.inner.mechanism))],
        resolved: Some(serde_json::json!({
            "leakage": spec_l, "utility": spec_u, "eps": eps, "family": family, "r": r, "m": opts.m, "seed": opts.seed
        })),
    })
}

pub fn preprocess(config: &Config) -> CliResult<Output> {
    let samples = load_samples(config)?.ok_or_else(|| missing("--samples"))?;
    let (merged, map) = match (&config.map, config.gamma) {
        (Some(path), _) => {
            let map: MergeMap = io::read_json(path)?;
            (map.apply_samples(&samples)?, map)
        }
        (None, Some(gamma)) => pi_gamma_samples(&samples, gamma)?,
        (None, None) => return Err(missing("--gamma or --map")),
    };
    Ok(Output {
        primary: io::samples_csv(&merged),
        extra: vec![("map.json", io::json_bytes(&map))],
        resolved: Some(to_value(&map)),
    })
}

/// Draws i.i.d. pairs from a joint distribution.
pub fn sample_pairs(config: &Config) -> CliResult<Output> {
    let q = load_joint(config)?;
    let n = match config.n.as_deref() {
        Some([n]) if *n > 0 => *n,
        _ => return Err(CliError::Config("exactly one positive --n is required".into())),
    };
    let seed = require_seed(config)?;
    Ok(Output { primary: io::samples_csv(&sample(&q, n, seed)), ..Output::default() })
}

pub fn experiment_discrepancy(config: &Config) -> CliResult<Output> {
    let seed = require_seed(config)?;
    let source = match (&config.joint, load_samples(config)?) {
        (Some(rows), _) => DataSource::Distribution(inline_joint(config, rows)?),
        (None, Some(s)) => DataSource::Samples(s),
        (None, None) => return Err(CliError::Config("a data source is required: pass --samples or --joint".into())),
    };
    let spec_l = leakage_spec(config, MeasureSpec::Pc);
    let resolved = DiscrepancyConfig {
        family: family(config),
        spec_u: utility_spec(config, &spec_l),
        eps: budget(config, &spec_l)?,
        spec_l,
        ns: config.n.clone().unwrap_or_else(|| vec![250, 500, 1000, 2000]),
        beta: config.beta.unwrap_or(0.1),
        trials: config.trials.unwrap_or(20),
        seed,
    };
    let rows = run_discrepancy(&resolved, &source)?;
    Ok(Output { primary: io::rows_csv(&rows)?, resolved: Some(to_value(&resolved)), ..Output::default() })
}

/// `0, 0.005, ..., 0.09`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..=18).map(|i| i as f64 * 0.005).collect()
}

pub fn experiment_convergence(config: &Config) -> CliResult<Output> {
    let seed = require_seed(config)?;
    let truth = load_joint(config)?;
    let spec_l = leakage_spec(config, MeasureSpec::FInfo(putlab::leakage::FGenerator::ChiSquare));
    let resolved = ConvergenceConfig {
        spec_u: utility_spec(config, &spec_l),
        spec_l,
        ns: config.n.clone().unwrap_or_else(|| vec![100, 1000, 10000]),
        eps_grid: config.eps_grid.clone().unwrap_or_else(default_eps_grid),
        eps_dist: config.eps_dist.unwrap_or(0.05),
        n_outputs: config.n_outputs.unwrap_or(2),
        step: config.step.unwrap_or(0.01),
        trials: config.trials.unwrap_or(20),
        seed,
    };
    let report = run_convergence(&resolved, &truth)?;
    let curve = io::rows_csv(&report.curve)?;
    let summary = io::rows_csv(&report.summary)?;
    let primary = if config.output.is_some() { curve } else { [curve, b"\n".to_vec(), summary.clone()].concat() };
    Ok(Output { primary, extra: vec![("summary.csv", summary)], resolved: Some(to_value(&resolved)) })
}

pub fn experiment_uniform(config: &Config) -> CliResult<Output> {
    let seed = require_seed(config)?;
    let p_hat = load_joint(config)?;
    let spec_l = leakage_spec(config, MeasureSpec::Pc);
    let resolved = UniformExperimentConfig {
        family: family(config),
        spec_u: utility_spec(config, &spec_l),
        eps: budget(config, &spec_l)?,
        spec_l,
        radii: config.radii.clone().ok_or_else(|| missing("--radius"))?,
        m: config.m.unwrap_or(UniformOptions::default().m),
        seed,
        h_oracle: config.h_oracle.unwrap_or(HOracle::Lattice {
            n_outputs: config.n_outputs.unwrap_or(2),
            step: config.step.unwrap_or(0.01),
        }),
        proxy: config.proxy,
    };
    let rows = run_uniform(&resolved, &p_hat)?;
    Ok(Output { primary: io::rows_csv(&rows)?, resolved: Some(to_value(&resolved)), ..Output::default() })
}
