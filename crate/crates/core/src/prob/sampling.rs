//! Seeded sampling.
//!
//! Every random draw in the crate goes through [`Rng64`], the ChaCha8 stream
//! cipher generator from `rand_chacha`, seeded with
//! `SeedableRng::seed_from_u64`. ChaCha8 output is specified independently of
//! platform and word size, so a given seed reproduces the same draws
//! everywhere.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{l1_distance, JointDistribution, SampleSet};
use crate::error::{Error, Result};

pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th trial of an experiment run with `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

fn cell_sampler(q: &JointDistribution) -> WeightedIndex<f64> {
    WeightedIndex::new(q.mass().iter().copied()).expect("a valid distribution has positive total mass")
}

/// `n` i.i.d. draws from `q` using the caller's generator.
pub fn sample_with<R: Rng + ?Sized>(q: &JointDistribution, n: usize, rng: &mut R) -> SampleSet {
    let cols = q.x_size();
    let dist = cell_sampler(q);
    let pairs = (0..n)
        .map(|_| {
            let cell = dist.sample(rng);
            (cell / cols, cell % cols)
        })
        .collect();
    SampleSet::new(q.s_alphabet().clone(), q.x_alphabet().clone(), pairs).expect("indices come from q's shape")
}

/// `n` i.i.d. draws from `q` with a fresh [`Rng64`] seeded by `seed`.
pub fn sample(q: &JointDistribution, n: usize, seed: u64) -> SampleSet {
    sample_with(q, n, &mut rng_from_seed(seed))
}

/// Empirical distribution of `n >= 1` draws, without materializing the pairs.
/// Consumes the generator exactly like [`sample_with`].
pub fn draw_empirical<R: Rng + ?Sized>(q: &JointDistribution, n: usize, rng: &mut R) -> Result<JointDistribution> {
    if n == 0 {
        return Err(Error::EmptySampleSet);
    }
    let dist = cell_sampler(q);
    let mut counts = vec![0usize; q.s_size() * q.x_size()];
    for _ in 0..n {
        counts[dist.sample(rng)] += 1;
    }
    let mass = Array2::from_shape_vec(q.mass().dim(), counts.into_iter().map(|c| c as f64 / n as f64).collect())
        .expect("shape preserved");
    JointDistribution::new(q.s_alphabet().clone(), q.x_alphabet().clone(), mass)
}

/// Extra restriction on the members of an l1 ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallConstraint {
    /// Any distribution over `S x X`.
    Simplex,
    /// Every S- and X-marginal at least the given floor.
    MarginFloor(f64),
}

impl BallConstraint {
    fn admits(&self, mass: &[f64], rows: usize, cols: usize) -> bool {
        match *self {
            BallConstraint::Simplex => true,
            BallConstraint::MarginFloor(floor) => {
                let slack = 1e-15;
                let rows_ok = (0..rows).all(|s| mass[s * cols..(s + 1) * cols].iter().sum::<f64>() >= floor - slack);
                let cols_ok = (0..cols).all(|x| (0..rows).map(|s| mass[s * cols + x]).sum::<f64>() >= floor - slack);
                rows_ok && cols_ok
            }
        }
    }
}

/// Largest `t` in `[0, t_max]` with `make(t)` admitted, assuming the
/// admissible set is an interval containing 0.
fn shrink_to_constraint<F>(constraint: BallConstraint, rows: usize, cols: usize, t_max: f64, make: F) -> f64
where
    F: Fn(f64) -> Vec<f64>,
{
    if constraint.admits(&make(t_max), rows, cols) {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if constraint.admits(&make(mid), rows, cols) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Monte-Carlo cover of `{Q : ||Q - center||_1 <= r}` intersected with
/// `constraint`.
///
/// The result has `m` members: the center, then boundary probes that move
/// mass `r/2` from one cell to another (the vertices of the ball within the
/// simplex whenever every cell holds at least `r/2`), then Dirichlet
/// perturbations of the center pulled back into the ball, half of them onto
/// its boundary. Probes and perturbations that leave the constraint set are
/// shortened along their direction until they satisfy it. When there are
/// more probes than room, a seeded subset is kept.
pub fn sample_ball(
    center: &JointDistribution,
    r: f64,
    constraint: BallConstraint,
    m: usize,
    seed: u64,
) -> Result<Vec<JointDistribution>> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParam(format!("ball radius must be finite and >= 0, got {r}")));
    }
    let rows = center.s_size();
    let cols = center.x_size();
    let c: Vec<f64> = center.mass().iter().copied().collect();
    if let BallConstraint::MarginFloor(floor) = constraint {
        if !constraint.admits(&c, rows, cols) {
            return Err(Error::InfeasibleConstraint(format!("center violates the margin floor {floor}")));
        }
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    if r == 0.0 {
        return Ok(vec![center.clone(); m]);
    }

    let d = c.len();
    let build = |mass: Vec<f64>| -> Result<JointDistribution> {
        JointDistribution::new(
            center.s_alphabet().clone(),
            center.x_alphabet().clone(),
            Array2::from_shape_vec((rows, cols), mass).expect("shape preserved"),
        )
    };

    let mut rng = rng_from_seed(seed);
    let mut out = vec![center.clone()];

    let mut probes = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i == j || c[i] <= 0.0 {
                continue;
            }
            let t_max = (r / 2.0).min(c[i]);
            let make = |t: f64| {
                let mut v = c.clone();
                v[i] = if t >= c[i] { 0.0 } else { c[i] - t };
                v[j] += t;
                v
            };
            let t = shrink_to_constraint(constraint, rows, cols, t_max, make);
            if t > 0.0 {
                probes.push(make(t));
            }
        }
    }
    if probes.len() > m - 1 {
        probes.shuffle(&mut rng);
        probes.truncate(m - 1);
    }
    for p in probes {
        out.push(build(p)?);
    }

    while out.len() < m {
        let g: Vec<f64> = (0..d).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>();
        let total: f64 = g.iter().sum();
        let diff: Vec<f64> = g.iter().zip(&c).map(|(gi, ci)| gi / total - ci).collect();
        let len: f64 = diff.iter().map(|v| v.abs()).sum();
        if len <= 0.0 {
            continue;
        }
        let target = if rng.random_bool(0.5) {
            r
        } else {
            r * rng.random::<f64>().powf(1.0 / (d.max(2) - 1) as f64)
        };
        let make = |scale: f64| -> Vec<f64> { c.iter().zip(&diff).map(|(ci, di)| (ci + scale * di).max(0.0)).collect() };
        let scale = shrink_to_constraint(constraint, rows, cols, (target / len).min(1.0), make);
        let mut v = make(scale);
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        out.push(build(v)?);
    }
    debug_assert!(out.iter().all(|q| l1_distance(q, center).map_or(false, |dist| dist <= r + 1e-12)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{empirical, l1_distance};

    fn paper_p() -> JointDistribution {
        JointDistribution::from_rows(&[vec![0.42, 0.18], vec![0.16, 0.24]]).unwrap()
    }

    #[test]
    fn point_mass_sampling() {
        let q = JointDistribution::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let set = sample(&q, 25, 3);
        assert!(set.pairs().iter().all(|&p| p == (1, 0)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = paper_p();
        assert_eq!(sample(&p, 500, 42), sample(&p, 500, 42));
        assert_ne!(sample(&p, 500, 42), sample(&p, 500, 43));
        let e1 = empirical(&sample(&p, 500, 9)).unwrap();
        let e2 = draw_empirical(&p, 500, &mut rng_from_seed(9)).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn large_sample_is_close() {
        let p = paper_p();
        let e = empirical(&sample(&p, 100_000, 2024)).unwrap();
        assert!(l1_distance(&e, &p).unwrap() < 0.02);
    }

    #[test]
    fn ball_zero_radius() {
        let p = paper_p();
        let ball = sample_ball(&p, 0.0, BallConstraint::Simplex, 7, 1).unwrap();
        assert_eq!(ball.len(), 7);
        assert!(ball.iter().all(|q| *q == p));
    }

    #[test]
    fn ball_members_within_radius() {
        let p = paper_p();
        let ball = sample_ball(&p, 0.05, BallConstraint::Simplex, 100, 11).unwrap();
        assert_eq!(ball.len(), 100);
        assert_eq!(ball[0], p);
        let mut on_boundary = 0;
        for q in &ball {
            let dist = l1_distance(q, &p).unwrap();
            assert!(dist <= 0.05 + 1e-12, "distance {dist}");
            if (dist - 0.05).abs() < 1e-12 {
                on_boundary += 1;
            }
        }
        // 12 pair probes plus roughly half of the random points
        assert!(on_boundary >= 12);
    }

    #[test]
    fn ball_respects_margin_floor() {
        let p = paper_p();
        let ball = sample_ball(&p, 0.3, BallConstraint::MarginFloor(0.35), 200, 5).unwrap();
        for q in &ball {
            assert!(q.marginal_s().iter().chain(q.marginal_x().iter()).all(|&m| m >= 0.35 - 1e-12));
            assert!(l1_distance(q, &p).unwrap() <= 0.3 + 1e-12);
        }
        assert!(matches!(
            sample_ball(&p, 0.1, BallConstraint::MarginFloor(0.45), 10, 5),
            Err(Error::InfeasibleConstraint(_))
        ));
    }

    #[test]
    fn ball_is_seeded() {
        let p = paper_p();
        let a = sample_ball(&p, 0.1, BallConstraint::Simplex, 40, 8).unwrap();
        let b = sample_ball(&p, 0.1, BallConstraint::Simplex, 40, 8).unwrap();
        assert_eq!(a, b);
    }
}
