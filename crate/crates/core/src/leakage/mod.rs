//! Leakage and utility measures.
//!
//! Every measure is a functional of a joint matrix. Leakage evaluates it on
//! the `S x Y` joint `Q W`, utility on the `X x Y` joint `diag(P_X) W`.
//! Maximal alpha-leakage is a supremum over input laws and is evaluated from
//! the channel instead (see [`sibson_capacity`]).

mod fgen;
mod maxleak;
pub(crate) mod measures;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use fgen::{CustomGenerator, FGenerator, FALLBACK_GRID_POINTS};
pub use maxleak::{sibson_capacity, sibson_capacity_from, CapacitySolution, MAX_ITERATIONS, OBJECTIVE_TOLERANCE};

use crate::error::{Error, Result};
use crate::prob::{JointDistribution, Mechanism};

/// Orders in `(1, 1 + MIN_ORDER_GAP)` are rejected: `alpha / (alpha - 1)`
/// amplifies rounding error there.
pub const MIN_ORDER_GAP: f64 = 1e-6;

/// Order `alpha in (1, inf]` of an Arimoto, Sibson or maximal leakage measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Finite(f64),
    Infinite,
}

impl Order {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == f64::INFINITY {
            return Ok(Order::Infinite);
        }
        if alpha.is_nan() || alpha <= 1.0 {
            return Err(Error::InvalidAlpha(format!("order must exceed 1, got {alpha}")));
        }
        if alpha < 1.0 + MIN_ORDER_GAP {
            return Err(Error::InvalidAlpha(format!("order {alpha} is too close to 1; use shannon")));
        }
        Ok(Order::Finite(alpha))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Order::Finite(a) => a,
            Order::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Order::Infinite)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_real(self.value()))
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Order::new(parse_alpha(s)?)
    }
}

fn parse_alpha(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "Inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| Error::InvalidAlpha(format!("cannot parse order {t:?}"))),
    }
}

pub(crate) fn format_real(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x}")
    }
}

/// Which measure to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    /// Probability of correct guessing.
    Pc,
    FInfo(FGenerator),
    Arimoto(Order),
    Sibson(Order),
    MaxAlpha(Order),
    Shannon,
}

impl MeasureSpec {
    /// Arimoto mutual information of order `alpha`; `alpha = 1` gives Shannon.
    pub fn arimoto(alpha: f64) -> Result<Self> {
        Self::with_order(alpha, MeasureSpec::Arimoto)
    }

    pub fn sibson(alpha: f64) -> Result<Self> {
        Self::with_order(alpha, MeasureSpec::Sibson)
    }

    pub fn max_alpha(alpha: f64) -> Result<Self> {
        Self::with_order(alpha, MeasureSpec::MaxAlpha)
    }

    fn with_order(alpha: f64, make: fn(Order) -> Self) -> Result<Self> {
        if alpha == 1.0 {
            Ok(MeasureSpec::Shannon)
        } else {
            Order::new(alpha).map(make)
        }
    }

    pub fn units(&self) -> Units {
        match self {
            MeasureSpec::Pc => Units::Probability,
            MeasureSpec::FInfo(_) => Units::Divergence,
            _ => Units::Nats,
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Pc => f.write_str("pc"),
            MeasureSpec::FInfo(g) => write!(f, "f:{}", g.name()),
            MeasureSpec::Arimoto(o) => write!(f, "arimoto({o})"),
            MeasureSpec::Sibson(o) => write!(f, "sibson({o})"),
            MeasureSpec::MaxAlpha(o) => write!(f, "maxal({o})"),
            MeasureSpec::Shannon => f.write_str("shannon"),
        }
    }
}

fn parenthesized<'a>(s: &'a str, head: &str) -> Option<&'a str> {
    s.strip_prefix(head)?.strip_prefix('(')?.strip_suffix(')')
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "pc" => return Ok(MeasureSpec::Pc),
            "shannon" => return Ok(MeasureSpec::Shannon),
            "f:tv" => return Ok(MeasureSpec::FInfo(FGenerator::TotalVariation)),
            "f:chi2" => return Ok(MeasureSpec::FInfo(FGenerator::ChiSquare)),
            _ => {}
        }
        if let Some(a) = parenthesized(s, "f:hellinger") {
            return FGenerator::hellinger(parse_alpha(a)?).map(MeasureSpec::FInfo);
        }
        if let Some(a) = parenthesized(s, "arimoto") {
            return MeasureSpec::arimoto(parse_alpha(a)?);
        }
        if let Some(a) = parenthesized(s, "sibson") {
            return MeasureSpec::sibson(parse_alpha(a)?);
        }
        if let Some(a) = parenthesized(s, "maxal") {
            return MeasureSpec::max_alpha(parse_alpha(a)?);
        }
        Err(Error::Parse(format!(
            "unknown measure {s:?}; expected pc, f:tv, f:chi2, f:hellinger(a), arimoto(a), sibson(a), maxal(a) or shannon"
        )))
    }
}

impl Serialize for MeasureSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeasureSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Probability,
    Nats,
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub value: f64,
    pub units: Units,
}

/// Leakage about `S` or utility about `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Privacy,
    Utility,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Privacy => "privacy",
            Side::Utility => "utility",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "privacy" | "leakage" => Ok(Side::Privacy),
            "utility" => Ok(Side::Utility),
            other => Err(Error::Parse(format!("unknown side {other:?}; expected privacy or utility"))),
        }
    }
}

fn probability(value: f64) -> MeasureValue {
    MeasureValue { value, units: Units::Probability }
}

fn nats(value: f64) -> MeasureValue {
    MeasureValue { value, units: Units::Nats }
}

/// Largest entry of a pmf.
pub fn pc_prior(p: &[f64]) -> MeasureValue {
    probability(measures::pc_prior(p))
}

/// Probability of guessing the row variable from the column variable.
pub fn pc_posterior(joint: &JointDistribution) -> MeasureValue {
    probability(measures::pc_posterior(joint.view()))
}

pub fn f_information(joint: &JointDistribution, f: &FGenerator) -> MeasureValue {
    MeasureValue { value: measures::f_information(joint.view(), f), units: Units::Divergence }
}

pub fn arimoto_mi(joint: &JointDistribution, order: Order) -> MeasureValue {
    nats(measures::arimoto_mi(joint.view(), order))
}

pub fn sibson_mi(joint: &JointDistribution, order: Order) -> MeasureValue {
    nats(measures::sibson_mi(joint.view(), order))
}

pub fn shannon_mi(joint: &JointDistribution) -> MeasureValue {
    nats(measures::shannon_mi(joint.view()))
}

/// Maximal alpha-leakage from `S` to `Y` in the chain `S -> X -> Y`.
pub fn max_alpha_leakage(q: &JointDistribution, w: &Mechanism, order: Order) -> Result<MeasureValue> {
    Ok(nats(max_alpha_leakage_solution(q, w, order)?.value))
}

/// [`max_alpha_leakage`] with the maximizing input law over `S`
/// (zero outside the support of `P_S`).
pub fn max_alpha_leakage_solution(q: &JointDistribution, w: &Mechanism, order: Order) -> Result<CapacitySolution> {
    check_inputs(q, w)?;
    privacy_capacity(q.view(), w.rows().view(), order)
}

fn check_inputs(q: &JointDistribution, w: &Mechanism) -> Result<()> {
    if q.x_alphabet() != w.x_alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "distribution X alphabet {:?} differs from mechanism input alphabet {:?}",
            q.x_alphabet().labels(),
            w.x_alphabet().labels()
        )));
    }
    Ok(())
}

fn privacy_capacity(q: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, order: Order) -> Result<CapacitySolution> {
    let sy = q.dot(&w);
    let ps = measures::row_marginal(q);
    let support: Vec<usize> = (0..ps.len()).filter(|&s| ps[s] > 0.0).collect();
    let channel: Vec<Vec<f64>> = support.iter().map(|&s| sy.row(s).iter().map(|v| v / ps[s]).collect()).collect();
    let start: Vec<f64> = support.iter().map(|&s| ps[s]).collect();
    let mut sol = sibson_capacity_from(&channel, order, Some(&start))?;
    let mut full = vec![0.0; ps.len()];
    for (i, &s) in support.iter().enumerate() {
        full[s] = sol.input[i];
    }
    sol.input = full;
    Ok(sol)
}

fn utility_capacity(w: ArrayView2<'_, f64>, order: Order) -> Result<CapacitySolution> {
    let channel: Vec<Vec<f64>> = w.rows().into_iter().map(|r| r.to_vec()).collect();
    sibson_capacity(&channel, order)
}

/// The measure on an arbitrary joint matrix. Maximal alpha-leakage is not a
/// functional of a single joint and is rejected.
pub fn measure_joint(spec: &MeasureSpec, joint: &JointDistribution) -> Result<MeasureValue> {
    let value = joint_kernel(spec, joint.view())?;
    Ok(MeasureValue { value, units: spec.units() })
}

fn joint_kernel(spec: &MeasureSpec, joint: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(match spec {
        MeasureSpec::Pc => measures::pc_posterior(joint),
        MeasureSpec::FInfo(g) => measures::f_information(joint, g),
        MeasureSpec::Arimoto(o) => measures::arimoto_mi(joint, *o),
        MeasureSpec::Sibson(o) => measures::sibson_mi(joint, *o),
        MeasureSpec::Shannon => measures::shannon_mi(joint),
        MeasureSpec::MaxAlpha(_) => {
            return Err(Error::Unsupported("maximal alpha-leakage needs a distribution and a channel".into()))
        }
    })
}

type Buffer = smallvec::SmallVec<[f64; 64]>;

/// `S x N` joint `Q W`, row-major.
fn sy_buffer(q: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Buffer {
    let (n_s, n_y) = (q.nrows(), w.ncols());
    let mut out: Buffer = smallvec::smallvec![0.0; n_s * n_y];
    for s in 0..n_s {
        for (x, &qsx) in q.row(s).iter().enumerate() {
            if qsx == 0.0 {
                continue;
            }
            for y in 0..n_y {
                out[s * n_y + y] += qsx * w[[x, y]];
            }
        }
    }
    out
}

/// `X x N` joint `diag(P_X) W`, row-major.
fn xy_buffer(q: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Buffer {
    let px = measures::col_marginal(q);
    let n_y = w.ncols();
    let mut out: Buffer = smallvec::smallvec![0.0; w.nrows() * n_y];
    for (x, p) in px.iter().enumerate() {
        for y in 0..n_y {
            out[x * n_y + y] = p * w[[x, y]];
        }
    }
    out
}

/// Measure value on raw matrices without alphabet checks: `q` is `S x X`,
/// `w` is row-stochastic `X x N`.
pub(crate) fn evaluate_raw(spec: &MeasureSpec, side: Side, q: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Result<f64> {
    let (rows, buf) = match (spec, side) {
        (MeasureSpec::MaxAlpha(o), Side::Privacy) => return Ok(privacy_capacity(q, w, *o)?.value),
        (MeasureSpec::MaxAlpha(o), Side::Utility) => return Ok(utility_capacity(w, *o)?.value),
        (_, Side::Privacy) => (q.nrows(), sy_buffer(q, w)),
        (_, Side::Utility) => (w.nrows(), xy_buffer(q, w)),
    };
    let joint = ArrayView2::from_shape((rows, w.ncols()), &buf[..]).expect("buffer sized to the joint");
    joint_kernel(spec, joint)
}

/// `L(Q, W)` or `U(Q, W)`.
pub fn evaluate(spec: &MeasureSpec, side: Side, q: &JointDistribution, w: &Mechanism) -> Result<MeasureValue> {
    check_inputs(q, w)?;
    let value = evaluate_raw(spec, side, q.view(), w.rows().view())?;
    Ok(MeasureValue { value, units: spec.units() })
}

/// Leakage about `S` through `W` when `(S, X) ~ Q`.
pub fn leakage(spec: &MeasureSpec, q: &JointDistribution, w: &Mechanism) -> Result<MeasureValue> {
    evaluate(spec, Side::Privacy, q, w)
}

/// Utility about `X` through `W` when `(S, X) ~ Q`.
pub fn utility(spec: &MeasureSpec, q: &JointDistribution, w: &Mechanism) -> Result<MeasureValue> {
    evaluate(spec, Side::Utility, q, w)
}
