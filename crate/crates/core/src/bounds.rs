//! Lipschitz constants of the measures in the distribution argument, and
//! finite-sample certificates `|L(P_n, W) - L(P, W)| <= constant * radius`
//! holding for every mechanism `W` with probability at least `1 - beta`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::leakage::{evaluate, MeasureSpec, Order, Side};
use crate::prob::{deviation_radius, l1_distance, DeviationRadius, JointDistribution, Mechanism};

/// Which margin a measure's constant depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    /// Smallest S- or X-marginal (matching the side) over both distributions.
    SideMinimum,
    /// Smallest S-marginal of the reference distribution.
    ReferenceS,
}

/// Margin needed by `(spec, side)`, if any.
pub fn required_margin(spec: &MeasureSpec, side: Side) -> Option<MarginKind> {
    match (spec, side) {
        (MeasureSpec::FInfo(_), _) | (MeasureSpec::Sibson(Order::Finite(_)), _) => Some(MarginKind::SideMinimum),
        (MeasureSpec::Sibson(Order::Infinite), Side::Privacy) | (MeasureSpec::MaxAlpha(_), Side::Privacy) => {
            Some(MarginKind::ReferenceS)
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundContext {
    pub spec: MeasureSpec,
    pub side: Side,
    pub s_size: usize,
    pub x_size: usize,
    pub margin_floor: Option<f64>,
}

/// `C_{f,u} = 2 K_{f,1/u} + (2/u + 1) L_{f,1/u}`.
pub fn c_f(f: &crate::leakage::FGenerator, u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::InvalidMargin(u));
    }
    let inv = 1.0 / u;
    Ok(2.0 * f.k_sup(inv) + (2.0 * inv + 1.0) * f.l_lip(inv))
}

fn order_factor(alpha: f64, size: usize) -> f64 {
    (size as f64).powf(1.0 - 1.0 / alpha)
}

/// Lipschitz constant of `Q -> L(Q, W)` (or `U`) in l1, uniform over `W`.
pub fn lipschitz_constant(ctx: &BoundContext) -> Result<f64> {
    let margin = || -> Result<f64> {
        let m = ctx
            .margin_floor
            .ok_or_else(|| Error::MissingMargin(format!("{} ({}) needs a margin floor", ctx.spec, ctx.side)))?;
        if !(m > 0.0 && m <= 1.0) {
            return Err(Error::InvalidMargin(m));
        }
        Ok(m)
    };
    let size = match ctx.side {
        Side::Privacy => ctx.s_size,
        Side::Utility => ctx.x_size,
    };
    Ok(match (&ctx.spec, ctx.side) {
        (MeasureSpec::Pc, _) => 1.0,
        (MeasureSpec::FInfo(f), _) => c_f(f, margin()?)?,
        (MeasureSpec::Arimoto(Order::Infinite), _) => 2.0 * size as f64,
        (MeasureSpec::Arimoto(Order::Finite(a)), _) => 2.0 * a / (a - 1.0) * order_factor(*a, size),
        (MeasureSpec::Sibson(Order::Finite(a)), Side::Privacy) => {
            (2.0 * a + 1.0) / ((a - 1.0) * margin()?.powf(1.0 - 1.0 / a))
        }
        (MeasureSpec::Sibson(Order::Finite(a)), Side::Utility) => 1.0 / ((a - 1.0) * margin()?.powf(1.0 - 1.0 / a)),
        (MeasureSpec::Sibson(Order::Infinite), Side::Privacy) | (MeasureSpec::MaxAlpha(Order::Infinite), Side::Privacy) => {
            2.0 / margin()?
        }
        (MeasureSpec::MaxAlpha(Order::Finite(a)), Side::Privacy) => {
            4.0 * a / (a - 1.0) * order_factor(*a, ctx.s_size) / margin()?
        }
        (MeasureSpec::Sibson(Order::Infinite), Side::Utility) | (MeasureSpec::MaxAlpha(_), Side::Utility) => 0.0,
        (MeasureSpec::Shannon, _) => {
            return Err(Error::Unsupported("no Lipschitz constant is available for Shannon mutual information".into()))
        }
    })
}

/// Which alphabet a margin is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Over {
    S,
    X,
}

fn min_marginal(q: &JointDistribution, over: Over) -> f64 {
    let m = match over {
        Over::S => q.marginal_s(),
        Over::X => q.marginal_x(),
    };
    m.into_iter().fold(f64::INFINITY, f64::min)
}

/// `(min marginal of p_hat - radius)_+`: a margin lower bound valid for the
/// true distribution whenever the deviation radius holds.
pub fn m_bar(p_hat: &JointDistribution, n: usize, beta: f64, over: Over) -> Result<f64> {
    let r = deviation_radius(n, p_hat.s_size() * p_hat.x_size(), beta)?;
    Ok((min_marginal(p_hat, over) - r.value).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessCertificate {
    pub measure: MeasureSpec,
    pub side: Side,
    pub n: usize,
    pub beta: f64,
    #[serde(serialize_with = "radius_value")]
    pub radius: DeviationRadius,
    pub constant: f64,
    pub bound: f64,
    pub m_bar: Option<f64>,
}

fn radius_value<S: serde::Serializer>(r: &DeviationRadius, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(r.value)
}

fn side_alphabet(side: Side) -> Over {
    match side {
        Side::Privacy => Over::S,
        Side::Utility => Over::X,
    }
}

/// Certificate for `|L(P_n, W) - L(P, W)|` (or `U`) from the empirical
/// distribution alone.
pub fn discrepancy_bound(
    spec: &MeasureSpec,
    side: Side,
    p_hat: &JointDistribution,
    n: usize,
    beta: f64,
) -> Result<RobustnessCertificate> {
    if matches!(spec, MeasureSpec::Shannon) {
        return Err(Error::Unsupported("discrepancy bounds for Shannon mutual information are not available".into()));
    }
    let radius = deviation_radius(n, p_hat.s_size() * p_hat.x_size(), beta)?;
    let margin = match required_margin(spec, side) {
        None => None,
        Some(MarginKind::SideMinimum) => {
            let over = side_alphabet(side);
            let m = (min_marginal(p_hat, over) - radius.value).max(0.0);
            if m == 0.0 {
                return Err(Error::NotCertifiable {
                    measure: spec.to_string(),
                    reason: format!(
                        "the smallest empirical {over:?}-marginal does not exceed the deviation radius {:.4}; merge rare symbols first",
                        radius.value
                    ),
                });
            }
            Some(m)
        }
        Some(MarginKind::ReferenceS) => {
            let m = min_marginal(p_hat, Over::S);
            if m == 0.0 {
                return Err(Error::NotCertifiable {
                    measure: spec.to_string(),
                    reason: "an S symbol has zero empirical mass".into(),
                });
            }
            Some(m)
        }
    };
    let ctx = BoundContext { spec: spec.clone(), side, s_size: p_hat.s_size(), x_size: p_hat.x_size(), margin_floor: margin };
    let constant = lipschitz_constant(&ctx)?;
    Ok(RobustnessCertificate {
        measure: spec.clone(),
        side,
        n,
        beta,
        radius,
        constant,
        bound: constant * radius.value,
        m_bar: margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub ok: bool,
}

/// Tolerance of [`certify_lipschitz`].
pub const LIPSCHITZ_TOLERANCE: f64 = 1e-9;

/// Checks `|M(q1, W) - M(q2, W)| <= C ||q1 - q2||_1` with the margin taken
/// from `q1` and `q2`.
pub fn certify_lipschitz(
    spec: &MeasureSpec,
    side: Side,
    q1: &JointDistribution,
    q2: &JointDistribution,
    w: &Mechanism,
) -> Result<LipschitzCheck> {
    let dist = l1_distance(q1, q2)?;
    let margin = match required_margin(spec, side) {
        None => None,
        Some(MarginKind::SideMinimum) => {
            let over = side_alphabet(side);
            Some(min_marginal(q1, over).min(min_marginal(q2, over)))
        }
        Some(MarginKind::ReferenceS) => Some(min_marginal(q1, Over::S)),
    };
    let ctx = BoundContext { spec: spec.clone(), side, s_size: q1.s_size(), x_size: q1.x_size(), margin_floor: margin };
    let constant = lipschitz_constant(&ctx)?;
    let lhs = (evaluate(spec, side, q1, w)?.value - evaluate(spec, side, q2, w)?.value).abs();
    let rhs = constant * dist;
    Ok(LipschitzCheck { lhs, rhs, constant, ok: lhs <= rhs + LIPSCHITZ_TOLERANCE })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::FGenerator;

    fn paper_p() -> JointDistribution {
        JointDistribution::from_rows(&[vec![0.42, 0.18], vec![0.16, 0.24]]).unwrap()
    }

    fn ctx(spec: &str, side: Side, margin: Option<f64>) -> BoundContext {
        BoundContext { spec: spec.parse().unwrap(), side, s_size: 2, x_size: 3, margin_floor: margin }
    }

    #[test]
    fn c_f_closed_forms() {
        assert!((c_f(&FGenerator::TotalVariation, 0.5).unwrap() - 3.5).abs() < 1e-12);
        assert!((c_f(&FGenerator::ChiSquare, 1.0).unwrap() - 8.0).abs() < 1e-12);
        // closed forms C = u^-1 max{1 + 3u/2, 2 - u/2} and 2u^-2 max{2u + 2u^2, 3 - 3u}
        for u in [0.05, 0.2, 0.37, 0.8] {
            let tv = (1.0 + 1.5 * u as f64).max(2.0 - u / 2.0) / u;
            let chi = 2.0 * (2.0 * u + 2.0 * u * u as f64).max(3.0 - 3.0 * u) / (u * u);
            assert!((c_f(&FGenerator::TotalVariation, u).unwrap() - tv).abs() < 1e-9 * tv);
            assert!((c_f(&FGenerator::ChiSquare, u).unwrap() - chi).abs() < 1e-9 * chi);
        }
        assert_eq!(c_f(&FGenerator::ChiSquare, 0.0), Err(Error::InvalidMargin(0.0)));
        assert!(c_f(&FGenerator::ChiSquare, 1.5).is_err());
    }

    #[test]
    fn c_f_nonincreasing() {
        for g in [FGenerator::TotalVariation, FGenerator::ChiSquare, FGenerator::Hellinger(2.0), FGenerator::Hellinger(1.3)] {
            let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
            for w in grid.windows(2) {
                assert!(c_f(&g, w[0]).unwrap() >= c_f(&g, w[1]).unwrap() - 1e-12, "{g:?} at {}", w[0]);
            }
        }
    }

    #[test]
    fn constants_table() {
        assert_eq!(lipschitz_constant(&ctx("pc", Side::Privacy, None)).unwrap(), 1.0);
        assert_eq!(lipschitz_constant(&ctx("pc", Side::Utility, None)).unwrap(), 1.0);
        let a2 = lipschitz_constant(&ctx("arimoto(2)", Side::Privacy, None)).unwrap();
        assert!((a2 - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(lipschitz_constant(&ctx("arimoto(inf)", Side::Utility, None)).unwrap(), 6.0);
        assert_eq!(lipschitz_constant(&ctx("sibson(inf)", Side::Utility, None)).unwrap(), 0.0);
        assert_eq!(lipschitz_constant(&ctx("maxal(3)", Side::Utility, None)).unwrap(), 0.0);
        assert_eq!(lipschitz_constant(&ctx("sibson(inf)", Side::Privacy, Some(0.25))).unwrap(), 8.0);
        let s2 = lipschitz_constant(&ctx("sibson(2)", Side::Privacy, Some(0.25))).unwrap();
        assert!((s2 - 5.0 / 0.5).abs() < 1e-12);
        let s2u = lipschitz_constant(&ctx("sibson(2)", Side::Utility, Some(0.25))).unwrap();
        assert!((s2u - 2.0).abs() < 1e-12);
        let m2 = lipschitz_constant(&ctx("maxal(2)", Side::Privacy, Some(0.5))).unwrap();
        assert!((m2 - 8.0 * 2f64.sqrt() / 0.5).abs() < 1e-12);
        assert!(matches!(lipschitz_constant(&ctx("f:chi2", Side::Privacy, None)), Err(Error::MissingMargin(_))));
        assert!(matches!(lipschitz_constant(&ctx("shannon", Side::Privacy, None)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn m_bar_examples() {
        // min S-marginal 0.4; choose n so that the radius is 0.1
        let d = 4;
        let beta = 0.1f64;
        let n = (2.0 * (d as f64 - beta.ln()) / 0.01).round() as usize;
        let r = deviation_radius(n, d, beta).unwrap().value;
        let got = m_bar(&paper_p(), n, beta, Over::S).unwrap();
        assert!((got - (0.4 - r)).abs() < 1e-12);
        assert!((got - 0.3).abs() < 1e-4);
        assert_eq!(m_bar(&paper_p(), 10, beta, Over::X).unwrap(), 0.0);
        assert!((m_bar(&paper_p(), 1_000_000_000, beta, Over::X).unwrap() - 0.42).abs() < 1e-3);
    }

    #[test]
    fn certificate_examples() {
        let p = paper_p();
        let cert = discrepancy_bound(&MeasureSpec::Pc, Side::Privacy, &p, 2000, 0.1).unwrap();
        let expected = ((2.0 / 2000.0) * (4.0 + 10f64.ln())).sqrt();
        assert!((cert.bound - expected).abs() < 1e-15);
        assert!((cert.bound - 0.0794).abs() < 5e-4);
        assert_eq!(cert.bound, cert.constant * cert.radius.value);
        let zero = discrepancy_bound(&"sibson(inf)".parse().unwrap(), Side::Utility, &p, 7, 0.1).unwrap();
        assert_eq!(zero.bound, 0.0);
        let loose = discrepancy_bound(&MeasureSpec::Pc, Side::Privacy, &p, 2000, 1.0 - 1e-12).unwrap();
        assert!((loose.bound - (8.0f64 / 2000.0).sqrt()).abs() < 1e-9);
        assert!(matches!(
            discrepancy_bound(&"f:chi2".parse().unwrap(), Side::Privacy, &p, 20, 0.1),
            Err(Error::NotCertifiable { .. })
        ));
        assert!(matches!(discrepancy_bound(&MeasureSpec::Shannon, Side::Privacy, &p, 20, 0.1), Err(Error::Unsupported(_))));
        let json = serde_json::to_value(&cert).unwrap();
        for key in ["measure", "side", "n", "beta", "radius", "constant", "bound", "m_bar"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["measure"], "pc");
        assert_eq!(json["side"], "privacy");
    }

    #[test]
    fn certify_identical_and_utility_zero() {
        let p = paper_p();
        let w = Mechanism::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let same = certify_lipschitz(&MeasureSpec::Pc, Side::Privacy, &p, &p, &w).unwrap();
        assert_eq!((same.lhs, same.rhs, same.ok), (0.0, 0.0, true));
        let q2 = JointDistribution::from_rows(&[vec![0.3, 0.3], vec![0.1, 0.3]]).unwrap();
        let mx = certify_lipschitz(&"maxal(2)".parse().unwrap(), Side::Utility, &p, &q2, &w).unwrap();
        assert_eq!(mx.lhs, 0.0);
        assert!(certify_lipschitz(&"f:chi2".parse().unwrap(), Side::Privacy, &p, &q2, &w).unwrap().ok);
    }
}
