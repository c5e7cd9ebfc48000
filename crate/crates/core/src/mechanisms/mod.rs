//! Mechanism families and privacy-utility design.

mod lattice;
mod uniform;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use lattice::{
    brute_force_h, brute_force_h_many, dist_to_set, BruteForceResult, Lattice, LatticeFrontier, FEASIBILITY_TOLERANCE, MAX_ARGMAX,
    MAX_FRONTIER_SIZE, MAX_LATTICE_SIZE, TIE_TOLERANCE,
};
pub use uniform::{
    brute_force_uniform, theorem10_gap_bound, uniform_design, uniform_leakage_constant, uniform_utility_constant,
    worst_case_utility, BallVerification, UniformDesignResult, UniformOptions, UniformProxy, MAX_UNIFORM_WORK,
    VERIFICATION_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::leakage::{evaluate, leakage, MeasureSpec, Side};
use crate::prob::{Alphabet, JointDistribution, Mechanism};

/// Randomized response: keeps the input with probability
/// `e^rho / (e^rho + k - 1)`, otherwise reports one of the other symbols
/// uniformly. `rho = inf` is the identity.
pub fn randomized_response(rho: f64, x_alphabet: &Alphabet) -> Result<Mechanism> {
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::InvalidParam(format!("randomized response needs rho >= 0, got {rho}")));
    }
    let k = x_alphabet.len() as f64;
    // written with e^-rho so that large rho does not overflow
    let decay = (-rho).exp();
    let keep = 1.0 / (1.0 + (k - 1.0) * decay);
    Ok(rr_with_keep(keep, x_alphabet))
}

fn rr_with_keep(keep: f64, x_alphabet: &Alphabet) -> Mechanism {
    let k = x_alphabet.len();
    let other = if k > 1 { (1.0 - keep) / (k - 1) as f64 } else { 0.0 };
    let rows = Array2::from_shape_fn((k, k), |(i, j)| if i == j { keep } else { other });
    Mechanism::with_outputs(x_alphabet.clone(), x_alphabet.clone(), rows).expect("rows sum to one")
}

/// Z-channel absorbing into `xbar`: `xbar` is kept, every other symbol is
/// kept with probability `1 - zeta` and sent to `xbar` with probability `zeta`.
pub fn z_channel(xbar: usize, zeta: f64, x_alphabet: &Alphabet) -> Result<Mechanism> {
    let k = x_alphabet.len();
    if xbar >= k {
        return Err(Error::InvalidParam(format!("absorbing symbol {xbar} out of range for {k} inputs")));
    }
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::InvalidParam(format!("zeta must lie in [0, 1], got {zeta}")));
    }
    let rows = Array2::from_shape_fn((k, k), |(i, j)| match (i == xbar, j == xbar, i == j) {
        (true, _, true) => 1.0,
        (true, _, false) => 0.0,
        (false, true, _) => zeta,
        (false, false, true) => 1.0 - zeta,
        (false, false, false) => 0.0,
    });
    Mechanism::with_outputs(x_alphabet.clone(), x_alphabet.clone(), rows)
}

/// Every input goes to the single output.
pub fn constant_channel(x_alphabet: &Alphabet) -> Mechanism {
    Mechanism::new(x_alphabet.clone(), Array2::ones((x_alphabet.len(), 1))).expect("one column of ones")
}

/// Smallest leakage over all mechanisms, attained by [`constant_channel`].
pub fn epsilon_min(spec: &MeasureSpec, q: &JointDistribution) -> f64 {
    match spec {
        MeasureSpec::Pc => q.marginal_s().into_iter().fold(0.0, f64::max),
        _ => 0.0,
    }
}

/// Mechanism family searched by [`design_in_family`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    RandomizedResponse,
    /// Z-channels; every absorbing symbol is tried when `xbar` is `None`.
    ZChannel {
        #[serde(default)]
        xbar: Option<usize>,
    },
    /// Every row-stochastic `|X| x n_outputs` matrix with entries on the `step` lattice.
    FullGrid { n_outputs: usize, step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub achieved_leakage: f64,
    pub achieved_utility: f64,
    pub family: FamilySpec,
    pub method: String,
    /// `rho` for randomized response (`"inf"` for the identity), `zeta` for Z-channels.
    #[serde(with = "crate::real_or_inf::option")]
    pub parameter: Option<f64>,
    pub xbar: Option<usize>,
}

/// Points of the coarse parameter grid.
pub const FAMILY_GRID_POINTS: usize = 201;
/// Parameter tolerance of the refinement.
pub const PARAMETER_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
struct Probe {
    t: f64,
    leak: f64,
    util: f64,
}

impl Probe {
    fn feasible(&self, eps: f64) -> bool {
        self.leak <= eps + FEASIBILITY_TOLERANCE
    }

    fn beats(&self, other: &Probe) -> bool {
        self.util > other.util || (self.util == other.util && self.leak < other.leak)
    }
}

/// Maximizes utility subject to leakage `<= eps` over `t in [0, 1]`: a coarse
/// grid, then bisection towards the feasibility boundary next to the best
/// grid point and golden-section search between the refined ends.
fn search_unit_interval<F>(eval: F, eps: f64) -> Result<Option<Probe>>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let probe = |t: f64| -> Result<Probe> {
        let (leak, util) = eval(t)?;
        Ok(Probe { t, leak, util })
    };
    let last = FAMILY_GRID_POINTS - 1;
    let grid: Vec<Probe> = (0..=last).map(|i| probe(i as f64 / last as f64)).collect::<Result<_>>()?;
    let Some(best_idx) = (0..=last)
        .filter(|&i| grid[i].feasible(eps))
        .reduce(|a, b| if grid[b].beats(&grid[a]) { b } else { a })
    else {
        return Ok(None);
    };
    let mut best = grid[best_idx];
    let centre = grid[best_idx];

    let boundary = |inside: Probe, outside: Probe| -> Result<Probe> {
        let (mut good, mut bad) = (inside, outside);
        while (bad.t - good.t).abs() > PARAMETER_TOLERANCE {
            let mid = probe(0.5 * (good.t + bad.t))?;
            if mid.feasible(eps) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(good)
    };
    let end = |neighbour: Option<usize>| -> Result<Probe> {
        match neighbour {
            None => Ok(centre),
            Some(j) if grid[j].feasible(eps) => Ok(grid[j]),
            Some(j) => boundary(centre, grid[j]),
        }
    };
    let lo = end(best_idx.checked_sub(1))?;
    let hi = end((best_idx < last).then_some(best_idx + 1))?;
    for p in [lo, hi] {
        if p.beats(&best) {
            best = p;
        }
    }

    // golden section on [lo, hi]; infeasible points count as -inf
    let score = |p: &Probe| if p.feasible(eps) { p.util } else { f64::NEG_INFINITY };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.t, hi.t);
    let mut c = probe(b - ratio * (b - a))?;
    let mut d = probe(a + ratio * (b - a))?;
    while b - a > PARAMETER_TOLERANCE {
        if score(&c) >= score(&d) {
            b = d.t;
            d = c;
            c = probe(b - ratio * (b - a))?;
        } else {
            a = c.t;
            c = d;
            d = probe(a + ratio * (b - a))?;
        }
        for p in [c, d] {
            if p.feasible(eps) && p.beats(&best) {
                best = p;
            }
        }
    }
    Ok(Some(best))
}

/// `rho` of the randomized response whose diagonal is `keep`.
fn rho_from_keep(keep: f64, k: usize) -> f64 {
    if keep >= 1.0 {
        f64::INFINITY
    } else {
        (keep * (k as f64 - 1.0) / (1.0 - keep)).ln().max(0.0)
    }
}

/// Best mechanism of `family` for `q` under the leakage budget `eps`.
pub fn design_in_family(
    family: &FamilySpec,
    spec_l: &MeasureSpec,
    spec_u: &MeasureSpec,
    q: &JointDistribution,
    eps: f64,
) -> Result<DesignResult> {
    let infeasible = || {
        Error::Infeasible(format!(
            "no member of {family:?} has {spec_l} leakage <= {eps} (minimum over all mechanisms is {})",
            epsilon_min(spec_l, q)
        ))
    };
    let x = q.x_alphabet();
    let k = x.len();
    let measure = |w: &Mechanism| -> Result<(f64, f64)> {
        Ok((leakage(spec_l, q, w)?.value, evaluate(spec_u, Side::Utility, q, w)?.value))
    };
    match family {
        FamilySpec::RandomizedResponse => {
            // t in [0, 1] interpolates the diagonal from 1/k (no information) to 1 (identity)
            let keep = |t: f64| 1.0 / k as f64 + t * (1.0 - 1.0 / k as f64);
            let best = search_unit_interval(|t| measure(&rr_with_keep(keep(t), x)), eps)?.ok_or_else(infeasible)?;
            let mechanism = rr_with_keep(keep(best.t), x);
            Ok(DesignResult {
                mechanism,
                epsilon: eps,
                achieved_leakage: best.leak,
                achieved_utility: best.util,
                family: family.clone(),
                method: "grid+refine".into(),
                parameter: Some(rho_from_keep(keep(best.t), k)),
                xbar: None,
            })
        }
        FamilySpec::ZChannel { xbar } => {
            let candidates: Vec<usize> = match xbar {
                Some(v) => vec![*v],
                None => (0..k).collect(),
            };
            let mut best: Option<(usize, Probe)> = None;
            for v in candidates {
                // t = 1 - zeta, so t = 1 is the identity as for randomized response
                let found = search_unit_interval(|t| measure(&z_channel(v, 1.0 - t, x)?), eps)?;
                if let Some(p) = found {
                    if best.as_ref().is_none_or(|(_, b)| p.beats(b)) {
                        best = Some((v, p));
                    }
                }
            }
            let (v, p) = best.ok_or_else(infeasible)?;
            let zeta = 1.0 - p.t;
            Ok(DesignResult {
                mechanism: z_channel(v, zeta, x)?,
                epsilon: eps,
                achieved_leakage: p.leak,
                achieved_utility: p.util,
                family: family.clone(),
                method: "grid+refine".into(),
                parameter: Some(zeta),
                xbar: Some(v),
            })
        }
        FamilySpec::FullGrid { n_outputs, step } => {
            let found = brute_force_h(spec_l, spec_u, q, eps, *n_outputs, *step)?;
            let mechanism = found.argmax.into_iter().next().ok_or_else(infeasible)?;
            let (leak, util) = measure(&mechanism)?;
            Ok(DesignResult {
                mechanism,
                epsilon: eps,
                achieved_leakage: leak,
                achieved_utility: util,
                family: family.clone(),
                method: "lattice".into(),
                parameter: None,
                xbar: None,
            })
        }
    }
}

/// `p # q = [[(1-p)(1-q), (1-p)q], [pq, p(1-q)]]`: binary `S` with `P(S = 1) = p`,
/// observed through a binary channel with crossover `q`.
pub fn binary_example(p: f64, q: f64) -> Result<JointDistribution> {
    JointDistribution::from_rows(&[vec![(1.0 - p) * (1.0 - q), (1.0 - p) * q], vec![p * q, p * (1.0 - q)]])
}

/// Closed-form privacy-utility function for Pc on both sides and the
/// distribution [`binary_example`]`(p, q)`, valid for `eps in [p, 1 - q]`.
pub fn h_closed_form_pc(p: f64, q: f64, eps: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&p) || !(0.0..=1.0 - p).contains(&q) || p <= q {
        return Err(Error::OutOfRange(format!("need 1/2 <= p <= 1, 0 <= q <= 1 - p and p > q, got p={p}, q={q}")));
    }
    let tol = 1e-12;
    if eps < p - tol || eps > 1.0 - q + tol {
        return Err(Error::OutOfRange(format!("eps={eps} outside [{p}, {}]", 1.0 - q)));
    }
    let c = p + q - 2.0 * p * q;
    Ok(1.0 - (1.0 - q) / (p - q) * c + eps * c / (p - q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_p() -> JointDistribution {
        JointDistribution::from_rows(&[vec![0.42, 0.18], vec![0.16, 0.24]]).unwrap()
    }

    #[test]
    fn family_patterns() {
        let x3 = Alphabet::indexed(3).unwrap();
        let uniform = randomized_response(0.0, &x3).unwrap();
        assert!(uniform.rows().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let sharp = randomized_response(800.0, &x3).unwrap();
        assert_eq!(sharp.rows(), Mechanism::identity(&x3).rows());
        assert_eq!(randomized_response(f64::INFINITY, &x3).unwrap().rows(), Mechanism::identity(&x3).rows());
        let rho = 1.3f64;
        let rr = randomized_response(rho, &x3).unwrap();
        assert!((rr.get(0, 0) - rho.exp() / (rho.exp() + 2.0)).abs() < 1e-15);
        assert!((rr.get(0, 2) - 1.0 / (rho.exp() + 2.0)).abs() < 1e-15);
        assert!(randomized_response(-1.0, &x3).is_err());

        let x2 = Alphabet::indexed(2).unwrap();
        let z = z_channel(0, 1.0, &x2).unwrap();
        assert_eq!(z.to_rows(), vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let z = z_channel(2, 0.25, &x3).unwrap();
        assert_eq!(z.to_rows()[0], vec![0.75, 0.0, 0.25]);
        assert_eq!(z.to_rows()[2], vec![0.0, 0.0, 1.0]);
        assert!(z_channel(3, 0.5, &x3).is_err());
        assert!(z_channel(0, 1.5, &x3).is_err());
        assert_eq!(constant_channel(&x3).n_outputs(), 1);
    }

    #[test]
    fn epsilon_min_is_realized() {
        let p = paper_p();
        assert_eq!(epsilon_min(&MeasureSpec::Pc, &p), 0.6);
        let c = constant_channel(p.x_alphabet());
        for s in ["pc", "f:chi2", "f:tv", "arimoto(2)", "sibson(inf)", "maxal(2)", "shannon"] {
            let spec: MeasureSpec = s.parse().unwrap();
            let got = leakage(&spec, &p, &c).unwrap().value;
            assert!((got - epsilon_min(&spec, &p)).abs() < 1e-12, "{s}: {got}");
        }
    }

    #[test]
    fn closed_form_examples() {
        assert!((h_closed_form_pc(0.6, 0.2, 0.8).unwrap() - 1.0).abs() < 1e-12);
        assert!((h_closed_form_pc(0.6, 0.2, 0.6).unwrap() - 0.72).abs() < 1e-12);
        let slope = h_closed_form_pc(0.6, 0.2, 0.7).unwrap() - h_closed_form_pc(0.6, 0.2, 0.6).unwrap();
        assert!((slope / 0.1 - 1.4).abs() < 1e-9);
        assert!(h_closed_form_pc(0.6, 0.2, 0.5).is_err());
        assert!(h_closed_form_pc(0.4, 0.2, 0.5).is_err());
        let joint = binary_example(0.6, 0.2).unwrap();
        assert_eq!(joint.to_rows(), vec![vec![0.4 * 0.8, 0.4 * 0.2], vec![0.6 * 0.2, 0.6 * 0.8]]);
    }

    #[test]
    fn unconstrained_design_picks_identity() {
        let p = paper_p();
        let design = design_in_family(&FamilySpec::RandomizedResponse, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, 1.0).unwrap();
        assert_eq!(design.parameter, Some(f64::INFINITY));
        assert!((design.achieved_utility - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rr_design_matches_lattice_oracle() {
        let p = paper_p();
        let eps = 0.62;
        let design = design_in_family(&FamilySpec::RandomizedResponse, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, eps).unwrap();
        assert!(design.achieved_leakage <= eps + 1e-9);
        // oracle: scan the diagonal on a 1e-5 grid
        let x = p.x_alphabet();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=100_000 {
            let keep = 0.5 + 0.5 * i as f64 / 100_000.0;
            let w = rr_with_keep(keep, x);
            if leakage(&MeasureSpec::Pc, &p, &w).unwrap().value <= eps {
                best = best.max(evaluate(&MeasureSpec::Pc, Side::Utility, &p, &w).unwrap().value);
            }
        }
        assert!((design.achieved_utility - best).abs() < 1e-3, "{} vs {best}", design.achieved_utility);
    }

    #[test]
    fn z_design_and_infeasibility() {
        let p = paper_p();
        let design =
            design_in_family(&FamilySpec::ZChannel { xbar: None }, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.63).unwrap();
        assert!(design.achieved_leakage <= 0.63 + 1e-9);
        assert!(design.xbar.is_some());
        let err = design_in_family(&FamilySpec::RandomizedResponse, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.55);
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn design_result_json_round_trip() {
        let p = paper_p();
        let design = design_in_family(&FamilySpec::ZChannel { xbar: Some(1) }, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.64).unwrap();
        let json = serde_json::to_string(&design).unwrap();
        let back: DesignResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, design);
    }
}
