//! Seeded replication runs: train/test discrepancy, convergence of the
//! empirical privacy-utility function, and uniform designs.
//!
//! Every trial draws its randomness from `trial_seed(seed, index)`, so the
//! rows do not depend on how trials are scheduled across threads.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::discrepancy_bound;
use crate::error::{Error, Result};
use crate::leakage::{evaluate, MeasureSpec, Side};
use crate::mechanisms::{
    brute_force_uniform, design_in_family, dist_to_set, h_closed_form_pc, theorem10_gap_bound, uniform_design,
    uniform_utility_constant, worst_case_utility, FamilySpec, LatticeFrontier, UniformOptions,
};
use crate::prob::{
    draw_empirical, empirical, rng_from_seed, sample_ball, trial_seed, BallConstraint, JointDistribution, Mechanism,
    SampleSet,
};

/// Where train and test data come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// A fixed dataset; each trial reshuffles it and takes two disjoint blocks of `n`.
    Samples(SampleSet),
    /// A known law; each trial draws fresh train and test sets.
    Distribution(JointDistribution),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyConfig {
    pub family: FamilySpec,
    pub spec_l: MeasureSpec,
    pub spec_u: MeasureSpec,
    pub eps: f64,
    pub ns: Vec<usize>,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub n: usize,
    pub trial: usize,
    pub status: String,
    pub train_leakage: Option<f64>,
    pub test_leakage: Option<f64>,
    pub train_utility: Option<f64>,
    pub test_utility: Option<f64>,
    pub delta_l: Option<f64>,
    pub delta_u: Option<f64>,
    /// Sum of the train and test certificates.
    pub bound_l: Option<f64>,
    pub bound_u: Option<f64>,
}

fn check_ns(ns: &[usize]) -> Result<()> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::InvalidParam("sample sizes must be a nonempty list of positive integers".into()));
    }
    Ok(())
}

fn certificate_sum(spec: &MeasureSpec, side: Side, train: &JointDistribution, test: &JointDistribution, n: usize, beta: f64) -> Result<Option<f64>> {
    let one = |p: &JointDistribution| match discrepancy_bound(spec, side, p, n, beta) {
        Ok(c) => Ok(Some(c.bound)),
        Err(Error::NotCertifiable { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(match (one(train)?, one(test)?) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    })
}

/// Designs on `train`, evaluates on both, and bounds the gaps.
pub fn discrepancy_trial(
    config: &DiscrepancyConfig,
    train: &JointDistribution,
    test: &JointDistribution,
    n: usize,
    trial: usize,
) -> Result<DiscrepancyRow> {
    let mut row = DiscrepancyRow {
        n,
        trial,
        status: "ok".into(),
        train_leakage: None,
        test_leakage: None,
        train_utility: None,
        test_utility: None,
        delta_l: None,
        delta_u: None,
        bound_l: certificate_sum(&config.spec_l, Side::Privacy, train, test, n, config.beta)?,
        bound_u: certificate_sum(&config.spec_u, Side::Utility, train, test, n, config.beta)?,
    };
    let w = match design_in_family(&config.family, &config.spec_l, &config.spec_u, train, config.eps) {
        Ok(d) => d.mechanism,
        Err(Error::Infeasible(_)) => {
            row.status = "infeasible".into();
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let w_test = w.on_inputs(test.x_alphabet())?;
    let l = (evaluate(&config.spec_l, Side::Privacy, train, &w)?.value, evaluate(&config.spec_l, Side::Privacy, test, &w_test)?.value);
    let u = (evaluate(&config.spec_u, Side::Utility, train, &w)?.value, evaluate(&config.spec_u, Side::Utility, test, &w_test)?.value);
    row.train_leakage = Some(l.0);
    row.test_leakage = Some(l.1);
    row.train_utility = Some(u.0);
    row.test_utility = Some(u.1);
    row.delta_l = Some((l.1 - l.0).abs());
    row.delta_u = Some((u.1 - u.0).abs());
    if row.bound_l.is_none() || row.bound_u.is_none() {
        row.status = "not_certifiable".into();
    }
    Ok(row)
}

fn split(samples: &SampleSet, n: usize, seed: u64) -> Result<(JointDistribution, JointDistribution)> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let pick = |range: std::ops::Range<usize>| empirical(&samples.with_pairs(idx[range].iter().map(|&i| samples.pairs()[i]).collect()));
    Ok((pick(0..n)?, pick(n..2 * n)?))
}

/// Rows ordered by `n`, then trial.
pub fn run_discrepancy(config: &DiscrepancyConfig, source: &DataSource) -> Result<Vec<DiscrepancyRow>> {
    check_ns(&config.ns)?;
    if let DataSource::Samples(s) = source {
        let largest = *config.ns.iter().max().expect("nonempty");
        if 2 * largest > s.len() {
            return Err(Error::InsufficientData(format!(
                "disjoint train and test sets of {largest} need {} samples, the dataset has {}",
                2 * largest,
                s.len()
            )));
        }
    }
    let jobs: Vec<(usize, usize)> = config.ns.iter().flat_map(|&n| (0..config.trials).map(move |t| (n, t))).collect();
    jobs.par_iter()
        .enumerate()
        .map(|(index, &(n, trial))| {
            let seed = trial_seed(config.seed, index);
            let (train, test) = match source {
                DataSource::Samples(s) => split(s, n, seed)?,
                DataSource::Distribution(p) => {
                    let mut rng = rng_from_seed(seed);
                    (draw_empirical(p, n, &mut rng)?, draw_empirical(p, n, &mut rng)?)
                }
            };
            discrepancy_trial(config, &train, &test, n, trial)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub spec_l: MeasureSpec,
    pub spec_u: MeasureSpec,
    pub ns: Vec<usize>,
    pub eps_grid: Vec<f64>,
    /// Budget at which optimal mechanisms are compared.
    pub eps_dist: f64,
    pub n_outputs: usize,
    pub step: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: usize,
    pub trial: usize,
    pub eps: f64,
    pub status: String,
    pub h_empirical: Option<f64>,
    pub h_true: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummaryRow {
    pub n: usize,
    pub trial: usize,
    /// Signed gap of largest magnitude over the budgets where both values exist.
    pub delta_n: Option<f64>,
    /// L1 distance from the empirical optimum to the set of true optima.
    pub dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub curve: Vec<CurveRow>,
    pub summary: Vec<ConvergenceSummaryRow>,
}

fn optional_h(frontier: &LatticeFrontier, eps: f64) -> Result<Option<f64>> {
    match frontier.h(eps) {
        Ok(h) => Ok(Some(h)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn first_argmax(frontier: &LatticeFrontier, q: &JointDistribution, eps: f64) -> Result<Option<Vec<Mechanism>>> {
    match frontier.argmax(q, eps) {
        Ok(set) => Ok(Some(set)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Compares the lattice privacy-utility function of empirical laws with that of `truth`.
pub fn run_convergence(config: &ConvergenceConfig, truth: &JointDistribution) -> Result<ConvergenceReport> {
    check_ns(&config.ns)?;
    if config.eps_grid.is_empty() || config.eps_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParam("the eps grid must be nonempty and sorted".into()));
    }
    let true_frontier = LatticeFrontier::build(&config.spec_l, &config.spec_u, truth, config.n_outputs, config.step)?;
    let true_h: Vec<Option<f64>> = config.eps_grid.iter().map(|&e| optional_h(&true_frontier, e)).collect::<Result<_>>()?;
    let true_set = first_argmax(&true_frontier, truth, config.eps_dist)?;

    let jobs: Vec<(usize, usize)> = config.ns.iter().flat_map(|&n| (0..config.trials).map(move |t| (n, t))).collect();
    let parts: Vec<(Vec<CurveRow>, ConvergenceSummaryRow)> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(n, trial))| {
            let p_hat = draw_empirical(truth, n, &mut rng_from_seed(trial_seed(config.seed, index)))?;
            let frontier = LatticeFrontier::build(&config.spec_l, &config.spec_u, &p_hat, config.n_outputs, config.step)?;
            let mut curve = Vec::with_capacity(config.eps_grid.len());
            let mut delta: Option<f64> = None;
            for (&eps, &h_true) in config.eps_grid.iter().zip(&true_h) {
                let h_emp = optional_h(&frontier, eps)?;
                let status = match (h_emp, h_true) {
                    (Some(a), Some(b)) => {
                        if delta.is_none_or(|d| (a - b).abs() > d.abs()) {
                            delta = Some(a - b);
                        }
                        "ok"
                    }
                    (None, _) => "infeasible",
                    (Some(_), None) => "infeasible_true",
                };
                curve.push(CurveRow { n, trial, eps, status: status.into(), h_empirical: h_emp, h_true });
            }
            let dist = match (&true_set, first_argmax(&frontier, &p_hat, config.eps_dist)?) {
                (Some(set), Some(emp)) => Some(dist_to_set(&emp[0], set)?),
                _ => None,
            };
            Ok((curve, ConvergenceSummaryRow { n, trial, delta_n: delta, dist }))
        })
        .collect::<Result<_>>()?;
    let mut report = ConvergenceReport::default();
    for (curve, summary) in parts {
        report.curve.extend(curve);
        report.summary.push(summary);
    }
    Ok(report)
}

/// Source of `H(p_hat; .)` for the gap bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HOracle {
    Lattice { n_outputs: usize, step: f64 },
    /// Closed form for the binary instance `p#q` under `Pc` on both sides.
    BinaryPc { p: f64, q: f64 },
}

impl HOracle {
    fn h(&self, spec_l: &MeasureSpec, spec_u: &MeasureSpec, p_hat: &JointDistribution, eps: f64) -> Result<f64> {
        match *self {
            HOracle::Lattice { n_outputs, step } => {
                Ok(crate::mechanisms::brute_force_h(spec_l, spec_u, p_hat, eps, n_outputs, step)?.value)
            }
            HOracle::BinaryPc { p, q } => h_closed_form_pc(p, q, eps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformExperimentConfig {
    pub family: FamilySpec,
    pub spec_l: MeasureSpec,
    pub spec_u: MeasureSpec,
    pub eps: f64,
    pub radii: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    pub h_oracle: HOracle,
    /// Lattice for the best-uniform-mechanism stand-in; skipped when absent.
    #[serde(default)]
    pub proxy: Option<ProxyLattice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyLattice {
    pub n_outputs: usize,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformRow {
    pub r: f64,
    pub c_l: f64,
    pub c_u: f64,
    pub shrunk_eps: f64,
    pub max_ball_leakage: f64,
    pub pass: bool,
    pub utility_at_center: f64,
    pub worst_case_utility: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    pub gap_bound: f64,
    pub proxy_worst_case_utility: Option<f64>,
    /// Largest utility advantage of the proxy over the design across the sampled ball.
    pub measured_gap: Option<f64>,
}

pub fn run_uniform(config: &UniformExperimentConfig, p_hat: &JointDistribution) -> Result<Vec<UniformRow>> {
    if config.radii.is_empty() {
        return Err(Error::InvalidParam("at least one radius is required".into()));
    }
    config
        .radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let seed = trial_seed(config.seed, i);
            let opts = UniformOptions { m: config.m, seed };
            let design = uniform_design(&config.family, &config.spec_l, &config.spec_u, p_hat, config.eps, r, opts)?;
            let c_u = if r == 0.0 { 0.0 } else { uniform_utility_constant(&config.spec_u, p_hat, r)? };
            let w = &design.inner.mechanism;
            let worst = worst_case_utility(&config.spec_u, p_hat, w, r, config.m, seed)?;
            let reach = design.c_l * r;
            let h_plus = config.h_oracle.h(&config.spec_l, &config.spec_u, p_hat, config.eps + reach)?;
            let h_minus = config.h_oracle.h(&config.spec_l, &config.spec_u, p_hat, config.eps - reach)?;
            let (proxy_worst, measured_gap) = match config.proxy {
                None => (None, None),
                Some(lat) => {
                    let proxy = brute_force_uniform(
                        &config.spec_l,
                        &config.spec_u,
                        p_hat,
                        config.eps,
                        r,
                        lat.n_outputs,
                        lat.step,
                        config.m,
                        seed,
                    )?;
                    let ball = sample_ball(p_hat, r, BallConstraint::Simplex, config.m.max(1), seed)?;
                    let mut gap = f64::NEG_INFINITY;
                    for q in std::iter::once(p_hat).chain(ball.iter()) {
                        let u_proxy = evaluate(&config.spec_u, Side::Utility, q, &proxy.mechanism)?.value;
                        let u_design = evaluate(&config.spec_u, Side::Utility, q, w)?.value;
                        gap = gap.max(u_proxy - u_design);
                    }
                    (Some(proxy.worst_case_utility), Some(gap))
                }
            };
            Ok(UniformRow {
                r,
                c_l: design.c_l,
                c_u,
                shrunk_eps: design.shrunk_epsilon,
                max_ball_leakage: design.verification.max_leakage_in_ball,
                pass: design.verification.pass,
                utility_at_center: design.inner.achieved_utility,
                worst_case_utility: worst,
                h_plus,
                h_minus,
                gap_bound: theorem10_gap_bound(h_plus, h_minus, c_u, r),
                proxy_worst_case_utility: proxy_worst,
                measured_gap,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub measure: MeasureSpec,
    pub side: Side,
    pub n: usize,
    pub beta: f64,
    pub status: String,
    pub radius: Option<f64>,
    pub constant: Option<f64>,
    pub bound: Option<f64>,
    pub m_bar: Option<f64>,
}

/// Certificates for every `(measure, side, n)`; measures without a bound
/// get a row whose status says why.
pub fn bound_table(specs: &[(MeasureSpec, Side)], p_hat: &JointDistribution, ns: &[usize], beta: f64) -> Result<Vec<BoundRow>> {
    check_ns(ns)?;
    let mut rows = Vec::new();
    for &n in ns {
        for (spec, side) in specs {
            let mut row = BoundRow {
                measure: spec.clone(),
                side: *side,
                n,
                beta,
                status: "ok".into(),
                radius: None,
                constant: None,
                bound: None,
                m_bar: None,
            };
            match discrepancy_bound(spec, *side, p_hat, n, beta) {
                Ok(c) => {
                    row.radius = Some(c.radius.value);
                    row.constant = Some(c.constant);
                    row.bound = Some(c.bound);
                    row.m_bar = c.m_bar;
                }
                Err(Error::NotCertifiable { .. }) => row.status = "not_certifiable".into(),
                Err(Error::Unsupported(_)) => row.status = "unsupported".into(),
                Err(e) => return Err(e),
            }
            rows.push(row);
        }
    }
    Ok(rows)
}
