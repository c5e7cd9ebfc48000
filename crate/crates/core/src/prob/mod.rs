//! Finite-alphabet joint distributions, channels and their composition.
//!
//! A [`JointDistribution`] holds the mass of a pair `(S, X)` as an `|S| x |X|`
//! matrix; a [`Mechanism`] is a row-stochastic `|X| x N` channel producing the
//! released variable `Y`. [`push_forward`] composes the two along the chain
//! `S -> X -> Y` and returns the `(S, Y)` and `(X, Y)` joints that every
//! leakage and utility measure is evaluated on.

mod deviation;
mod sampling;

use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use deviation::{deviation_radius, weissman_tail, DeviationRadius};
pub use sampling::{draw_empirical, rng_from_seed, sample, sample_ball, sample_with, trial_seed, BallConstraint, Rng64};

/// Tolerance on total mass (and on every mechanism row sum).
pub const TOL_MASS: f64 = 1e-12;

/// An ordered list of distinct symbol names.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet is empty".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidAlphabet(format!("duplicate label {l:?}")));
            }
        }
        Ok(Alphabet { labels })
    }

    /// Labels `"0", "1", ..., "n-1"`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.labels).finish()
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;
    fn try_from(labels: Vec<String>) -> Result<Self> {
        Alphabet::new(labels)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.labels
    }
}

fn validate_entries(mass: &Array2<f64>) -> Result<()> {
    for ((row, col), &value) in mass.indexed_iter() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeMass { row, col, value });
        }
    }
    Ok(())
}

fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::DimensionMismatch {
            expected: "non-empty matrix".into(),
            found: format!("{n_rows}x{n_cols}"),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
        return Err(Error::DimensionMismatch {
            expected: format!("rows of length {n_cols}"),
            found: format!("row of length {}", bad.len()),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((n_rows, n_cols), flat).expect("shape checked above"))
}

/// Probability mass over `S x X`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointDoc", into = "JointDoc")]
pub struct JointDistribution {
    s_alphabet: Alphabet,
    x_alphabet: Alphabet,
    mass: Array2<f64>,
}

impl JointDistribution {
    /// Validates `mass` (rows indexed by `S`, columns by `X`). Never renormalizes.
    pub fn new(s_alphabet: Alphabet, x_alphabet: Alphabet, mass: Array2<f64>) -> Result<Self> {
        if mass.dim() != (s_alphabet.len(), x_alphabet.len()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", s_alphabet.len(), x_alphabet.len()),
                found: format!("{}x{}", mass.nrows(), mass.ncols()),
            });
        }
        validate_entries(&mass)?;
        let total = mass.sum();
        if (total - 1.0).abs() > TOL_MASS {
            return Err(Error::MassNotOne { total });
        }
        Ok(JointDistribution { s_alphabet, x_alphabet, mass })
    }

    /// Like [`JointDistribution::new`] but divides by the total mass first.
    pub fn normalized(s_alphabet: Alphabet, x_alphabet: Alphabet, mass: Array2<f64>) -> Result<Self> {
        validate_entries(&mass)?;
        let total = mass.sum();
        if !(total > 0.0) {
            return Err(Error::MassNotOne { total });
        }
        Self::new(s_alphabet, x_alphabet, mass / total)
    }

    /// Builds a distribution with indexed labels from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let mass = rows_to_array(rows)?;
        Self::new(Alphabet::indexed(mass.nrows())?, Alphabet::indexed(mass.ncols())?, mass)
    }

    /// The product of two marginals, `P(s, x) = p_s(s) p_x(x)`.
    pub fn product(p_s: &[f64], p_x: &[f64]) -> Result<Self> {
        let mass = Array2::from_shape_fn((p_s.len(), p_x.len()), |(i, j)| p_s[i] * p_x[j]);
        Self::new(Alphabet::indexed(p_s.len())?, Alphabet::indexed(p_x.len())?, mass)
    }

    pub fn s_alphabet(&self) -> &Alphabet {
        &self.s_alphabet
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn s_size(&self) -> usize {
        self.mass.nrows()
    }

    pub fn x_size(&self) -> usize {
        self.mass.ncols()
    }

    pub fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.mass.view()
    }

    pub fn get(&self, s: usize, x: usize) -> f64 {
        self.mass[[s, x]]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.mass.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Row sums, `P_S`.
    pub fn marginal_s(&self) -> Vec<f64> {
        row_sums(self.mass.view())
    }

    /// Column sums, `P_X`.
    pub fn marginal_x(&self) -> Vec<f64> {
        col_sums(self.mass.view())
    }

    /// Same mass, new labels.
    pub fn relabel(&self, s_alphabet: Alphabet, x_alphabet: Alphabet) -> Result<Self> {
        Self::new(s_alphabet, x_alphabet, self.mass.clone())
    }

    /// The joint with the roles of the two variables exchanged.
    pub fn transposed(&self) -> Self {
        JointDistribution {
            s_alphabet: self.x_alphabet.clone(),
            x_alphabet: self.s_alphabet.clone(),
            mass: self.mass.t().to_owned(),
        }
    }
}

impl fmt::Debug for JointDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JointDistribution")
            .field("s", &self.s_alphabet)
            .field("x", &self.x_alphabet)
            .field("mass", &self.to_rows())
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct JointDoc {
    s_labels: Alphabet,
    x_labels: Alphabet,
    mass: Vec<Vec<f64>>,
}

impl TryFrom<JointDoc> for JointDistribution {
    type Error = Error;

    fn try_from(doc: JointDoc) -> Result<Self> {
        JointDistribution::new(doc.s_labels, doc.x_labels, rows_to_array(&doc.mass)?)
    }
}

impl From<JointDistribution> for JointDoc {
    fn from(q: JointDistribution) -> Self {
        JointDoc { mass: q.to_rows(), s_labels: q.s_alphabet, x_labels: q.x_alphabet }
    }
}

pub(crate) fn row_sums(m: ArrayView2<'_, f64>) -> Vec<f64> {
    m.rows().into_iter().map(|r| r.iter().sum()).collect()
}

pub(crate) fn col_sums(m: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut out = vec![0.0; m.ncols()];
    for row in m.rows() {
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o += v;
        }
    }
    out
}

/// Row-stochastic channel from `X` to `{1..N}`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismDoc", into = "MechanismDoc")]
pub struct Mechanism {
    x_alphabet: Alphabet,
    y_alphabet: Alphabet,
    rows: Array2<f64>,
}

impl Mechanism {
    pub fn new(x_alphabet: Alphabet, rows: Array2<f64>) -> Result<Self> {
        let y_alphabet = Alphabet::indexed(rows.ncols())?;
        Self::with_outputs(x_alphabet, y_alphabet, rows)
    }

    pub fn with_outputs(x_alphabet: Alphabet, y_alphabet: Alphabet, rows: Array2<f64>) -> Result<Self> {
        if rows.dim() != (x_alphabet.len(), y_alphabet.len()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", x_alphabet.len(), y_alphabet.len()),
                found: format!("{}x{}", rows.nrows(), rows.ncols()),
            });
        }
        validate_entries(&rows)?;
        for row in rows.rows() {
            let total: f64 = row.sum();
            if (total - 1.0).abs() > TOL_MASS {
                return Err(Error::MassNotOne { total });
            }
        }
        Ok(Mechanism { x_alphabet, y_alphabet, rows })
    }

    /// Mechanism with indexed input labels.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows = rows_to_array(rows)?;
        Self::new(Alphabet::indexed(rows.nrows())?, rows)
    }

    /// `Y = X`; outputs reuse the input labels.
    pub fn identity(x_alphabet: &Alphabet) -> Self {
        let k = x_alphabet.len();
        Mechanism {
            x_alphabet: x_alphabet.clone(),
            y_alphabet: x_alphabet.clone(),
            rows: Array2::eye(k),
        }
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.y_alphabet
    }

    pub fn x_size(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[[x, y]]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Rebinds the input alphabet (same size required).
    pub fn on_inputs(&self, x_alphabet: &Alphabet) -> Result<Self> {
        Self::with_outputs(x_alphabet.clone(), self.y_alphabet.clone(), self.rows.clone())
    }

    /// Entrywise l1 distance `sum_{x,y} |W(x,y) - W'(x,y)|`.
    pub fn l1_distance(&self, other: &Mechanism) -> Result<f64> {
        if self.rows.dim() != other.rows.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.x_size(), self.n_outputs()),
                found: format!("{}x{}", other.x_size(), other.n_outputs()),
            });
        }
        Ok(self.rows.iter().zip(other.rows.iter()).map(|(a, b)| (a - b).abs()).sum())
    }
}

#[derive(Serialize, Deserialize)]
struct MechanismDoc {
    inputs: Alphabet,
    outputs: Alphabet,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MechanismDoc> for Mechanism {
    type Error = Error;

    fn try_from(doc: MechanismDoc) -> Result<Self> {
        Mechanism::with_outputs(doc.inputs, doc.outputs, rows_to_array(&doc.rows)?)
    }
}

impl From<Mechanism> for MechanismDoc {
    fn from(w: Mechanism) -> Self {
        MechanismDoc { rows: w.to_rows(), inputs: w.x_alphabet, outputs: w.y_alphabet }
    }
}

impl fmt::Debug for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mechanism")
            .field("x", &self.x_alphabet)
            .field("y", &self.y_alphabet)
            .field("rows", &self.to_rows())
            .finish()
    }
}

/// The two joints induced by `S -> X -> Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushForward {
    pub sy_joint: JointDistribution,
    pub xy_joint: JointDistribution,
}

/// `sy(s,y) = sum_x Q(s,x) W(x,y)` and `xy(x,y) = P_X(x) W(x,y)`.
pub fn push_forward(q: &JointDistribution, w: &Mechanism) -> Result<PushForward> {
    if q.x_alphabet() != w.x_alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "distribution X alphabet {:?} vs mechanism inputs {:?}",
            q.x_alphabet(),
            w.x_alphabet()
        )));
    }
    let sy = q.mass().dot(w.rows());
    let p_x = q.marginal_x();
    let xy = Array2::from_shape_fn(w.rows().dim(), |(x, y)| p_x[x] * w.get(x, y));
    Ok(PushForward {
        sy_joint: JointDistribution::new(q.s_alphabet().clone(), w.y_alphabet().clone(), sy)?,
        xy_joint: JointDistribution::new(q.x_alphabet().clone(), w.y_alphabet().clone(), xy)?,
    })
}

/// `sum_{s,x} |Q1(s,x) - Q2(s,x)|`.
pub fn l1_distance(q1: &JointDistribution, q2: &JointDistribution) -> Result<f64> {
    if q1.s_alphabet() != q2.s_alphabet() || q1.x_alphabet() != q2.x_alphabet() {
        return Err(Error::AlphabetMismatch("l1_distance needs identical alphabets".into()));
    }
    Ok(q1.mass().iter().zip(q2.mass().iter()).map(|(a, b)| (a - b).abs()).sum())
}

/// i.i.d. pairs `(s, x)` given as alphabet indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    s_alphabet: Alphabet,
    x_alphabet: Alphabet,
    pairs: Vec<(usize, usize)>,
}

impl SampleSet {
    pub fn new(s_alphabet: Alphabet, x_alphabet: Alphabet, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(s, x)) = pairs.iter().find(|&&(s, x)| s >= s_alphabet.len() || x >= x_alphabet.len()) {
            return Err(Error::SampleOutOfRange(format!(
                "pair ({s}, {x}) outside {}x{}",
                s_alphabet.len(),
                x_alphabet.len()
            )));
        }
        Ok(SampleSet { s_alphabet, x_alphabet, pairs })
    }

    pub fn s_alphabet(&self) -> &Alphabet {
        &self.s_alphabet
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// A sample set over the same alphabets holding the given pairs.
    pub fn with_pairs(&self, pairs: Vec<(usize, usize)>) -> Self {
        SampleSet { s_alphabet: self.s_alphabet.clone(), x_alphabet: self.x_alphabet.clone(), pairs }
    }
}

/// Plug-in estimate `count(s,x) / n`.
pub fn empirical(samples: &SampleSet) -> Result<JointDistribution> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let mut counts = Array2::<f64>::zeros((samples.s_alphabet.len(), samples.x_alphabet.len()));
    for &(s, x) in &samples.pairs {
        counts[[s, x]] += 1.0;
    }
    let n = samples.len() as f64;
    counts.mapv_inplace(|c| c / n);
    JointDistribution::new(samples.s_alphabet.clone(), samples.x_alphabet.clone(), counts)
}
