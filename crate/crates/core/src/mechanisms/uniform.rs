//! Mechanisms whose leakage budget holds for every distribution in an l1
//! ball around the estimate, obtained by designing at a shrunk budget
//! `eps - C_L r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::{Lattice, FEASIBILITY_TOLERANCE};
use super::{design_in_family, epsilon_min, DesignResult, FamilySpec};
use crate::bounds::{lipschitz_constant, required_margin, BoundContext, MarginKind};
use crate::error::{Error, Result};
use crate::leakage::{evaluate, evaluate_raw, MeasureSpec, Side};
use crate::prob::{sample_ball, BallConstraint, JointDistribution, Mechanism};

/// Slack on the leakage budget when verifying ball members.
pub const VERIFICATION_TOLERANCE: f64 = 1e-9;
/// Largest `lattice size x ball size` evaluated by [`brute_force_uniform`].
pub const MAX_UNIFORM_WORK: u64 = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformOptions {
    /// Ball members checked, the center included.
    pub m: usize,
    pub seed: u64,
}

impl Default for UniformOptions {
    fn default() -> Self {
        UniformOptions { m: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallVerification {
    pub samples_checked: usize,
    pub max_leakage_in_ball: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformDesignResult {
    pub inner: DesignResult,
    pub r: f64,
    pub c_l: f64,
    pub shrunk_epsilon: f64,
    pub verification: BallVerification,
}

/// Privacy-side Lipschitz constant valid on the whole ball: margins are
/// lowered by `r`.
pub fn uniform_leakage_constant(spec_l: &MeasureSpec, p_hat: &JointDistribution, r: f64) -> Result<f64> {
    side_constant(spec_l, Side::Privacy, p_hat, r)
}

fn side_constant(spec: &MeasureSpec, side: Side, p_hat: &JointDistribution, r: f64) -> Result<f64> {
    let margin = match required_margin(spec, side) {
        None => None,
        Some(kind) => {
            let marginal = match (kind, side) {
                (MarginKind::SideMinimum, Side::Utility) => p_hat.marginal_x(),
                _ => p_hat.marginal_s(),
            };
            let m = (marginal.into_iter().fold(f64::INFINITY, f64::min) - r).max(0.0);
            if m == 0.0 {
                return Err(Error::InfeasibleShrunkBudget(format!(
                    "{spec}: the smallest marginal does not exceed r = {r}, so no margin holds on the ball"
                )));
            }
            Some(m)
        }
    };
    lipschitz_constant(&BoundContext {
        spec: spec.clone(),
        side,
        s_size: p_hat.s_size(),
        x_size: p_hat.x_size(),
        margin_floor: margin,
    })
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParam(format!("ball radius must be finite and >= 0, got {r}")));
    }
    Ok(())
}

/// Largest leakage of `w` over the sampled ball.
fn verify(spec_l: &MeasureSpec, ball: &[JointDistribution], w: &Mechanism, eps: f64) -> Result<BallVerification> {
    let leaks: Vec<f64> = ball.par_iter().map(|q| Ok(evaluate(spec_l, Side::Privacy, q, w)?.value)).collect::<Result<_>>()?;
    let max = leaks.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(BallVerification { samples_checked: ball.len(), max_leakage_in_ball: max, pass: max <= eps + VERIFICATION_TOLERANCE })
}

/// Designs at the shrunk budget `eps - C_L r` and verifies the result on a
/// Monte-Carlo cover of the ball of radius `r` around `p_hat`.
pub fn uniform_design(
    family: &FamilySpec,
    spec_l: &MeasureSpec,
    spec_u: &MeasureSpec,
    p_hat: &JointDistribution,
    eps: f64,
    r: f64,
    opts: UniformOptions,
) -> Result<UniformDesignResult> {
    check_radius(r)?;
    let c_l = if r == 0.0 { 0.0 } else { uniform_leakage_constant(spec_l, p_hat, r)? };
    let shrunk = eps - c_l * r;
    let floor = epsilon_min(spec_l, p_hat);
    if shrunk < floor - FEASIBILITY_TOLERANCE {
        return Err(Error::InfeasibleShrunkBudget(format!(
            "shrunk budget {shrunk} = {eps} - {c_l} * {r} is below the minimum leakage {floor}"
        )));
    }
    let inner = design_in_family(family, spec_l, spec_u, p_hat, shrunk)?;
    let ball = sample_ball(p_hat, r, BallConstraint::Simplex, opts.m, opts.seed)?;
    let verification = verify(spec_l, &ball, &inner.mechanism, eps)?;
    Ok(UniformDesignResult { inner, r, c_l, shrunk_epsilon: shrunk, verification })
}

/// Monte-Carlo estimate (from above) of the smallest utility of `w` over the
/// ball of radius `r` around `p_hat`.
pub fn worst_case_utility(
    spec_u: &MeasureSpec,
    p_hat: &JointDistribution,
    w: &Mechanism,
    r: f64,
    m: usize,
    seed: u64,
) -> Result<f64> {
    check_radius(r)?;
    let ball = sample_ball(p_hat, r, BallConstraint::Simplex, m.max(1), seed)?;
    let utils: Vec<f64> = ball.par_iter().map(|q| Ok(evaluate(spec_u, Side::Utility, q, w)?.value)).collect::<Result<_>>()?;
    Ok(utils.into_iter().fold(f64::INFINITY, f64::min))
}

/// Lattice stand-in for the best uniform mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformProxy {
    pub mechanism: Mechanism,
    pub worst_case_utility: f64,
    pub max_ball_leakage: f64,
    /// Lattice mechanisms whose leakage at `p_hat` met the budget.
    pub candidates_checked: u64,
}

/// Among lattice mechanisms whose leakage stays within `eps` on the sampled
/// ball, the one with the largest sampled worst-case utility (ties go to the
/// lexicographically smallest matrix).
#[allow(clippy::too_many_arguments)]
pub fn brute_force_uniform(
    spec_l: &MeasureSpec,
    spec_u: &MeasureSpec,
    p_hat: &JointDistribution,
    eps: f64,
    r: f64,
    n_outputs: usize,
    step: f64,
    m: usize,
    seed: u64,
) -> Result<UniformProxy> {
    check_radius(r)?;
    let lattice = Lattice::new(p_hat.x_size(), n_outputs, step)?;
    let m = m.max(1);
    if lattice.len().saturating_mul(m as u64) > MAX_UNIFORM_WORK {
        return Err(Error::TooLarge(format!(
            "{} mechanisms x {m} ball members exceed the limit of {MAX_UNIFORM_WORK}",
            lattice.len()
        )));
    }
    let ball = sample_ball(p_hat, r, BallConstraint::Simplex, m, seed)?;
    let center = p_hat.view();
    type Best = Option<(u64, f64, f64)>;
    let chunks: Vec<Result<(Best, u64)>> = lattice.par_chunks(|range| {
        let mut best: Best = None;
        let mut checked = 0u64;
        let mut failure = None;
        lattice.walk(range, |index, w| {
            if failure.is_some() {
                return;
            }
            let mut inspect = || -> Result<()> {
                if evaluate_raw(spec_l, Side::Privacy, center, w)? > eps + FEASIBILITY_TOLERANCE {
                    return Ok(());
                }
                checked += 1;
                let mut max_leak = f64::NEG_INFINITY;
                for q in &ball {
                    let l = evaluate_raw(spec_l, Side::Privacy, q.view(), w)?;
                    if l > eps + VERIFICATION_TOLERANCE {
                        return Ok(());
                    }
                    max_leak = max_leak.max(l);
                }
                let mut worst = f64::INFINITY;
                for q in &ball {
                    worst = worst.min(evaluate_raw(spec_u, Side::Utility, q.view(), w)?);
                }
                if best.is_none_or(|(_, u, _)| worst > u) {
                    best = Some((index, worst, max_leak));
                }
                Ok(())
            };
            if let Err(e) = inspect() {
                failure = Some(e);
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok((best, checked)),
        }
    });
    let mut best: Best = None;
    let mut checked = 0;
    for chunk in chunks {
        let (b, c) = chunk?;
        checked += c;
        if let Some(cand) = b {
            if best.is_none_or(|(_, u, _)| cand.1 > u) {
                best = Some(cand);
            }
        }
    }
    let (index, worst, max_leak) = best.ok_or(Error::EmptyFeasibleSet)?;
    Ok(UniformProxy {
        mechanism: lattice.mechanism(p_hat, index),
        worst_case_utility: worst,
        max_ball_leakage: max_leak,
        candidates_checked: checked,
    })
}

/// Utility the shrunk-budget design may give up against the best uniform
/// mechanism: `H(eps + C_L r) - H(eps - C_L r) + 2 C_U r`.
pub fn theorem10_gap_bound(h_plus: f64, h_minus: f64, c_u: f64, r: f64) -> f64 {
    h_plus - h_minus + 2.0 * c_u * r
}

/// Utility-side Lipschitz constant valid on the whole ball.
pub fn uniform_utility_constant(spec_u: &MeasureSpec, p_hat: &JointDistribution, r: f64) -> Result<f64> {
    side_constant(spec_u, Side::Utility, p_hat, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::utility;
    use crate::mechanisms::brute_force_h;

    fn paper_p() -> JointDistribution {
        JointDistribution::from_rows(&[vec![0.42, 0.18], vec![0.16, 0.24]]).unwrap()
    }

    #[test]
    fn zero_radius_reduces_to_plain_design() {
        let p = paper_p();
        let fam = FamilySpec::RandomizedResponse;
        let u = uniform_design(&fam, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.64, 0.0, UniformOptions::default()).unwrap();
        let plain = design_in_family(&fam, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.64).unwrap();
        assert_eq!(u.inner, plain);
        assert!(u.verification.pass);
    }

    #[test]
    fn pc_example_passes_ball_check() {
        let p = paper_p();
        let u = uniform_design(
            &FamilySpec::RandomizedResponse,
            &MeasureSpec::Pc,
            &MeasureSpec::Pc,
            &p,
            0.68,
            0.02,
            UniformOptions { m: 500, seed: 7 },
        )
        .unwrap();
        assert_eq!(u.c_l, 1.0);
        assert!((u.shrunk_epsilon - 0.66).abs() < 1e-12);
        assert!(u.inner.achieved_leakage <= 0.66 + 1e-9);
        assert_eq!(u.verification.samples_checked, 500);
        assert!(u.verification.pass, "{:?}", u.verification);
    }

    #[test]
    fn shrunk_budget_below_minimum_is_rejected() {
        let p = paper_p();
        let err = uniform_design(&FamilySpec::RandomizedResponse, &MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.61, 0.05, UniformOptions::default());
        assert!(matches!(err, Err(Error::InfeasibleShrunkBudget(_))));
        let chi: MeasureSpec = "f:chi2".parse().unwrap();
        let err = uniform_design(&FamilySpec::RandomizedResponse, &chi, &chi, &p, 0.05, 0.5, UniformOptions::default());
        assert!(matches!(err, Err(Error::InfeasibleShrunkBudget(_))));
    }

    #[test]
    fn worst_case_utility_properties() {
        let p = paper_p();
        let w = Mechanism::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let at_center = utility(&MeasureSpec::Pc, &p, &w).unwrap().value;
        assert_eq!(worst_case_utility(&MeasureSpec::Pc, &p, &w, 0.0, 50, 1).unwrap(), at_center);
        for r in [0.01, 0.05, 0.1] {
            let wc = worst_case_utility(&MeasureSpec::Pc, &p, &w, r, 300, 1).unwrap();
            assert!(wc <= at_center);
            assert!(wc >= at_center - r - 1e-12);
        }
    }

    #[test]
    fn proxy_at_zero_radius_is_a_lattice_argmax() {
        let p = paper_p();
        let proxy = brute_force_uniform(&MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.64, 0.0, 2, 0.05, 10, 3).unwrap();
        let h = brute_force_h(&MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.64, 2, 0.05).unwrap();
        assert!((proxy.worst_case_utility - h.value).abs() < 1e-12);
        assert!(h.argmax.contains(&proxy.mechanism));
    }

    #[test]
    fn proxy_respects_the_ball() {
        let p = paper_p();
        let r = 0.03;
        let proxy = brute_force_uniform(&MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.65, r, 2, 0.05, 100, 4).unwrap();
        assert!(proxy.max_ball_leakage <= 0.65 + VERIFICATION_TOLERANCE);
        let ball = sample_ball(&p, r, BallConstraint::Simplex, 100, 4).unwrap();
        assert!(verify(&MeasureSpec::Pc, &ball, &proxy.mechanism, 0.65).unwrap().pass);
        assert!(matches!(
            brute_force_uniform(&MeasureSpec::Pc, &MeasureSpec::Pc, &p, 0.59, r, 2, 0.05, 100, 4),
            Err(Error::EmptyFeasibleSet)
        ));
    }
}
