//! Merging rarely observed `X` symbols into a sink symbol.
//!
//! Margin-dependent certificates degrade with the smallest `X`-marginal;
//! merging every symbol with empirical mass below `gamma` raises that
//! minimum at a bounded cost in utility.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::MeasureSpec;
use crate::mechanisms::{brute_force_h, epsilon_min};
use crate::prob::{empirical, Alphabet, JointDistribution, Mechanism, SampleSet};

/// Label of the sink symbol; reserved.
pub const SINK_LABEL: &str = "__merged__";

/// Deterministic map from `X` onto the kept symbols plus the sink. The
/// merged alphabet lists the kept symbols in their original order, then the
/// sink, which is present even when nothing is merged into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeMap {
    pub gamma: f64,
    pub kept: Vec<String>,
    pub sink: String,
}

impl MergeMap {
    pub fn merged_alphabet(&self) -> Alphabet {
        Alphabet::new(self.kept.iter().cloned().chain(std::iter::once(self.sink.clone())))
            .expect("kept labels are unique and differ from the sink")
    }

    pub fn map_label<'a>(&'a self, label: &'a str) -> &'a str {
        if self.kept.iter().any(|k| k == label) {
            label
        } else {
            &self.sink
        }
    }

    /// Merged index of every symbol of `x`.
    pub fn index_map(&self, x: &Alphabet) -> Result<Vec<usize>> {
        if x.index_of(&self.sink).is_some() {
            return Err(Error::ReservedLabelCollision(self.sink.clone()));
        }
        let merged = self.merged_alphabet();
        Ok(x.labels().iter().map(|l| merged.index_of(self.map_label(l)).expect("label maps into the merged alphabet")).collect())
    }

    /// Image of `q` under the map.
    pub fn apply(&self, q: &JointDistribution) -> Result<JointDistribution> {
        let map = self.index_map(q.x_alphabet())?;
        let merged = self.merged_alphabet();
        let mut mass = Array2::zeros((q.s_size(), merged.len()));
        for s in 0..q.s_size() {
            for (x, &target) in map.iter().enumerate() {
                mass[[s, target]] += q.get(s, x);
            }
        }
        JointDistribution::new(q.s_alphabet().clone(), merged, mass)
    }

    /// Samples `(s, x)` mapped to `(s, merged(x))`.
    pub fn apply_samples(&self, samples: &SampleSet) -> Result<SampleSet> {
        let map = self.index_map(samples.x_alphabet())?;
        let pairs = samples.pairs().iter().map(|&(s, x)| (s, map[x])).collect();
        SampleSet::new(samples.s_alphabet().clone(), self.merged_alphabet(), pairs)
    }

    /// Mechanism on `x` that first merges, then applies `w0` (defined on the
    /// merged alphabet).
    pub fn lift(&self, x: &Alphabet, w0: &Mechanism) -> Result<Mechanism> {
        if w0.x_alphabet() != &self.merged_alphabet() {
            return Err(Error::AlphabetMismatch("mechanism inputs must be the merged alphabet".into()));
        }
        let map = self.index_map(x)?;
        let rows = Array2::from_shape_fn((x.len(), w0.n_outputs()), |(i, y)| w0.get(map[i], y));
        Mechanism::with_outputs(x.clone(), w0.y_alphabet().clone(), rows)
    }
}

/// Keeps the `X` symbols whose marginal under `p_hat` is at least `gamma`
/// and merges the rest into [`SINK_LABEL`].
pub fn pi_gamma(p_hat: &JointDistribution, gamma: f64) -> Result<(JointDistribution, MergeMap)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParam(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if p_hat.x_alphabet().index_of(SINK_LABEL).is_some() {
        return Err(Error::ReservedLabelCollision(SINK_LABEL.into()));
    }
    let px = p_hat.marginal_x();
    let kept = p_hat
        .x_alphabet()
        .labels()
        .iter()
        .zip(&px)
        .filter(|(_, &m)| m >= gamma)
        .map(|(l, _)| l.clone())
        .collect();
    let map = MergeMap { gamma, kept, sink: SINK_LABEL.into() };
    Ok((map.apply(p_hat)?, map))
}

/// [`pi_gamma`] on raw samples, with the threshold applied to their
/// empirical `X`-marginal.
pub fn pi_gamma_samples(samples: &SampleSet, gamma: f64) -> Result<(SampleSet, MergeMap)> {
    let (_, map) = pi_gamma(&empirical(samples)?, gamma)?;
    Ok((map.apply_samples(samples)?, map))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop4Check {
    pub h_merged: Option<f64>,
    pub h_raw: Option<f64>,
    pub ok: bool,
    /// Why the comparison was not made.
    pub skipped: Option<String>,
}

/// Lattice used by [`check_prop4`] for both alphabets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub n_outputs: usize,
    pub step: f64,
    /// Allowed excess of the merged value over the raw one.
    pub tolerance: f64,
}

/// Checks that merging does not raise the privacy-utility function:
/// `H(merged; eps) <= H(p_hat; eps) + tolerance`.
pub fn check_prop4(
    spec: &MeasureSpec,
    p_hat: &JointDistribution,
    gamma: f64,
    eps: f64,
    oracle: OracleParams,
) -> Result<Prop4Check> {
    let (merged, _) = pi_gamma(p_hat, gamma)?;
    let floor = epsilon_min(spec, &merged).max(epsilon_min(spec, p_hat));
    if eps < floor {
        return Ok(Prop4Check {
            h_merged: None,
            h_raw: None,
            ok: true,
            skipped: Some(format!("infeasible: eps = {eps} is below the minimum leakage {floor}")),
        });
    }
    let h_merged = brute_force_h(spec, spec, &merged, eps, oracle.n_outputs, oracle.step)?.value;
    let h_raw = brute_force_h(spec, spec, p_hat, eps, oracle.n_outputs, oracle.step)?.value;
    Ok(Prop4Check { h_merged: Some(h_merged), h_raw: Some(h_raw), ok: h_merged <= h_raw + oracle.tolerance, skipped: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::{f_information, FGenerator};
    use crate::prob::push_forward;

    fn four_symbols() -> JointDistribution {
        // X-marginals (0.5, 0.3, 0.15, 0.05)
        JointDistribution::from_rows(&[vec![0.3, 0.1, 0.1, 0.0], vec![0.2, 0.2, 0.05, 0.05]]).unwrap()
    }

    #[test]
    fn merges_low_mass_symbols() {
        let q = four_symbols();
        let (merged, map) = pi_gamma(&q, 0.2).unwrap();
        assert_eq!(map.kept, vec!["0", "1"]);
        assert_eq!(merged.x_alphabet().labels(), &["0", "1", SINK_LABEL]);
        let mx = merged.marginal_x();
        assert!((mx[2] - 0.2).abs() < 1e-15);
        assert!((merged.mass().sum() - 1.0).abs() < 1e-12);
        assert!(mx[..2].iter().all(|&m| m >= 0.2));

        let (same, map0) = pi_gamma(&q, 0.0).unwrap();
        assert_eq!(map0.kept.len(), 4);
        assert_eq!(same.marginal_x()[4], 0.0);

        let (all, map1) = pi_gamma(&q, 1.0).unwrap();
        assert!(map1.kept.is_empty());
        assert_eq!(all.x_size(), 1);
        assert!(pi_gamma(&q, 1.5).is_err());
    }

    #[test]
    fn reserved_label_is_rejected() {
        let q = JointDistribution::new(
            Alphabet::indexed(1).unwrap(),
            Alphabet::new(["a", SINK_LABEL]).unwrap(),
            ndarray::array![[0.5, 0.5]],
        )
        .unwrap();
        assert_eq!(pi_gamma(&q, 0.1).unwrap_err(), Error::ReservedLabelCollision(SINK_LABEL.into()));
    }

    #[test]
    fn sample_variant_matches_distribution_variant() {
        let q = four_symbols();
        let samples = crate::prob::sample(&q, 2000, 5);
        let (merged_samples, map) = pi_gamma_samples(&samples, 0.1).unwrap();
        let (merged_dist, map2) = pi_gamma(&empirical(&samples).unwrap(), 0.1).unwrap();
        assert_eq!(map, map2);
        assert_eq!(empirical(&merged_samples).unwrap(), merged_dist);
        let json = serde_json::to_string(&map).unwrap();
        assert_eq!(serde_json::from_str::<MergeMap>(&json).unwrap(), map);
    }

    #[test]
    fn merged_chain_keeps_f_information() {
        let q = four_symbols();
        let (merged, map) = pi_gamma(&q, 0.2).unwrap();
        let w0 = Mechanism::new(merged.x_alphabet().clone(), ndarray::array![[0.7, 0.3], [0.2, 0.8], [0.5, 0.5]]).unwrap();
        let lifted = map.lift(q.x_alphabet(), &w0).unwrap();
        let xy = push_forward(&q, &lifted).unwrap().xy_joint;
        let x0y = push_forward(&merged, &w0).unwrap().xy_joint;
        for g in [FGenerator::ChiSquare, FGenerator::TotalVariation] {
            assert!((f_information(&xy, &g).value - f_information(&x0y, &g).value).abs() < 1e-12);
        }
    }

    #[test]
    fn merging_nothing_keeps_h() {
        let pair = JointDistribution::from_rows(&[vec![0.4, 0.1], vec![0.15, 0.35]]).unwrap();
        let q = JointDistribution::from_rows(&[vec![0.3, 0.25, 0.03], vec![0.1, 0.3, 0.02]]).unwrap();
        let chi: MeasureSpec = "f:chi2".parse().unwrap();
        let oracle = OracleParams { n_outputs: 2, step: 0.1, tolerance: 0.0 };
        let check = check_prop4(&chi, &pair, 0.0, 0.02, oracle).unwrap();
        assert!(check.ok);
        // the empty sink is one more input symbol with zero mass; it cannot change H
        assert!((check.h_merged.unwrap() - check.h_raw.unwrap()).abs() < 1e-12);
        let merged = check_prop4(&chi, &q, 0.1, 0.02, OracleParams { tolerance: 0.02, ..oracle }).unwrap();
        assert!(merged.ok, "{merged:?}");
        let skipped = check_prop4(&MeasureSpec::Pc, &q, 0.1, 0.1, oracle).unwrap();
        assert!(skipped.skipped.is_some());
    }
}
