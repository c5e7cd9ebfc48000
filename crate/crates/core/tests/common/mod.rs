#![allow(dead_code)]

use ndarray::Array2;
use putlab::leakage::{MeasureSpec, Side};
use putlab::prob::{Alphabet, JointDistribution, Mechanism, Rng64};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub fn paper_p() -> JointDistribution {
    JointDistribution::from_rows(&[vec![0.42, 0.18], vec![0.16, 0.24]]).unwrap()
}

/// Every measure with a Lipschitz constant, on both sides.
pub fn covered() -> Vec<(MeasureSpec, Side)> {
    let specs = [
        "pc",
        "f:tv",
        "f:chi2",
        "f:hellinger(2)",
        "arimoto(2)",
        "arimoto(inf)",
        "sibson(2)",
        "sibson(inf)",
        "maxal(2)",
        "maxal(inf)",
    ];
    specs
        .iter()
        .flat_map(|s| [Side::Privacy, Side::Utility].map(|side| (s.parse::<MeasureSpec>().unwrap(), side)))
        .collect()
}

/// Flat Dirichlet(1) draw.
pub fn dirichlet(rng: &mut Rng64, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Mixes `weights` with the uniform law so that every S- and X-marginal is at
/// least `floor`; `extra` in `[0, 1]` mixes in more of the uniform law.
pub fn joint_from_weights(s: usize, x: usize, weights: &[f64], floor: f64, extra: f64) -> JointDistribution {
    let total: f64 = weights.iter().sum();
    let base: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / (s * x) as f64; s * x]
    };
    let needed = (floor * s.max(x) as f64).min(1.0);
    let lambda = needed + extra * (1.0 - needed);
    let uniform = 1.0 / (s * x) as f64;
    let mass: Vec<f64> = base.iter().map(|b| (1.0 - lambda) * b + lambda * uniform).collect();
    JointDistribution::normalized(
        Alphabet::indexed(s).unwrap(),
        Alphabet::indexed(x).unwrap(),
        Array2::from_shape_vec((s, x), mass).unwrap(),
    )
    .unwrap()
}

pub fn random_joint(rng: &mut Rng64, s: usize, x: usize, floor: f64) -> JointDistribution {
    let w = dirichlet(rng, s * x);
    let extra = if rng.random_bool(0.5) { 0.0 } else { rng.random::<f64>() * 0.5 };
    joint_from_weights(s, x, &w, floor, extra)
}

pub fn mechanism_from_weights(x: &Alphabet, n_outputs: usize, weights: &[f64]) -> Mechanism {
    let mut rows = Array2::zeros((x.len(), n_outputs));
    for i in 0..x.len() {
        let row = &weights[i * n_outputs..(i + 1) * n_outputs];
        let total: f64 = row.iter().sum();
        for y in 0..n_outputs {
            rows[[i, y]] = if total > 0.0 { row[y] / total } else { 1.0 / n_outputs as f64 };
        }
    }
    Mechanism::new(x.clone(), rows).unwrap()
}

pub fn random_mechanism(rng: &mut Rng64, x: &Alphabet, n_outputs: usize) -> Mechanism {
    let w: Vec<f64> = (0..x.len() * n_outputs).map(|_| Exp1.sample(rng)).collect();
    mechanism_from_weights(x, n_outputs, &w)
}

/// A pair of laws over the same alphabets: independent half of the time,
/// otherwise the second is a small step away from the first.
pub fn random_pair(rng: &mut Rng64, s: usize, x: usize, floor: f64) -> (JointDistribution, JointDistribution) {
    let q1 = random_joint(rng, s, x, floor);
    let other = random_joint(rng, s, x, floor);
    if rng.random_bool(0.5) {
        return (q1, other);
    }
    let t = 10f64.powf(-4.0 * rng.random::<f64>());
    let mass = q1.mass() * (1.0 - t) + other.mass() * t;
    let q2 = JointDistribution::normalized(q1.s_alphabet().clone(), q1.x_alphabet().clone(), mass).unwrap();
    (q1, q2)
}
