//! Maximal alpha-leakage: the supremum over input laws of Arimoto's (equivalently
//! Sibson's) mutual information through a fixed channel.
//!
//! For finite `alpha` the Sibson objective
//! `F(p) = sum_y (sum_x p_x W(y|x)^alpha)^(1/alpha)` is concave on the simplex,
//! so two-input channels are solved by golden-section search on `[0, 1]` and
//! larger ones by a few multiplicative fixed-point updates followed by
//! pairwise Frank-Wolfe steps with exact line search; the stopping rule is
//! the Frank-Wolfe duality gap. For `alpha = inf` the Arimoto objective
//! `sum_y max_x v_x W(y|x) / max_x v_x` is maximized by coordinate ascent over
//! the box `v in [0, 1]^k`.

use serde::Serialize;

use super::Order;
use crate::error::{Error, Result};

/// Absolute tolerance on the maximized leakage (nats).
pub const OBJECTIVE_TOLERANCE: f64 = 1e-8;
/// Iteration cap of the simplex ascent.
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitySolution {
    /// Maximized leakage in nats.
    pub value: f64,
    /// Maximizing input law over the channel rows.
    pub input: Vec<f64>,
    pub method: &'static str,
    pub iterations: usize,
}

/// Supremum over input laws `p` on the rows of `channel` of Arimoto's
/// mutual information of `p . channel`.
pub fn sibson_capacity(channel: &[Vec<f64>], order: Order) -> Result<CapacitySolution> {
    sibson_capacity_from(channel, order, None)
}

/// As [`sibson_capacity`], with the `alpha = inf` ascent started from
/// `start` (rescaled so its largest entry is 1) instead of the uniform law.
pub fn sibson_capacity_from(channel: &[Vec<f64>], order: Order, start: Option<&[f64]>) -> Result<CapacitySolution> {
    let k = channel.len();
    if k == 0 {
        return Err(Error::InvalidParam("channel has no inputs".into()));
    }
    if k == 1 {
        return Ok(CapacitySolution { value: 0.0, input: vec![1.0], method: "single-input", iterations: 0 });
    }
    match order {
        Order::Infinite => Ok(coordinate_ascent_infinite(channel, start)),
        Order::Finite(alpha) => {
            let powered: Vec<Vec<f64>> = channel.iter().map(|r| r.iter().map(|w| w.powf(alpha)).collect()).collect();
            if k == 2 {
                Ok(golden_section(&powered, alpha))
            } else {
                simplex_ascent(&powered, alpha)
            }
        }
    }
}

fn objective(powered: &[Vec<f64>], p: &[f64], alpha: f64) -> f64 {
    let n_out = powered[0].len();
    (0..n_out)
        .map(|y| {
            let s: f64 = powered.iter().zip(p).map(|(row, px)| px * row[y]).sum();
            s.powf(1.0 / alpha)
        })
        .sum()
}

fn to_nats(f: f64, alpha: f64) -> f64 {
    alpha / (alpha - 1.0) * f.ln()
}

fn golden_section(powered: &[Vec<f64>], alpha: f64) -> CapacitySolution {
    let phi = |t: f64| objective(powered, &[t, 1.0 - t], alpha);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    let mut iterations = 0;
    while b - a > 1e-12 && iterations < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = phi(d);
        }
        iterations += 1;
    }
    let mid = 0.5 * (a + b);
    let (t, f) = [(mid, phi(mid)), (0.0, phi(0.0)), (1.0, phi(1.0))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best });
    CapacitySolution { value: to_nats(f, alpha), input: vec![t, 1.0 - t], method: "golden-section", iterations }
}

/// Multiplicative updates to get close.
const WARM_START_ITERATIONS: usize = 50;

fn gradient(powered: &[Vec<f64>], p: &[f64], alpha: f64) -> (f64, Vec<f64>) {
    let n_out = powered[0].len();
    let sums: Vec<f64> = (0..n_out).map(|y| powered.iter().zip(p).map(|(row, px)| px * row[y]).sum()).collect();
    let f: f64 = sums.iter().map(|s| s.powf(1.0 / alpha)).sum();
    // D_x = alpha * dF/dp_x; sum_x p_x D_x = F by homogeneity
    let grad = powered
        .iter()
        .map(|row| {
            sums.iter()
                .zip(row)
                .filter(|(s, _)| **s > 0.0)
                .map(|(s, a)| s.powf(1.0 / alpha - 1.0) * a)
                .sum()
        })
        .collect();
    (f, grad)
}

/// Best move of mass `t in [0, p_j]` from input `j` to input `i`, located by
/// bisection on the sign of the directional derivative (objective values
/// cannot resolve the last digits the stopping rule needs).
fn pairwise_line_search(powered: &[Vec<f64>], p: &[f64], i: usize, j: usize, alpha: f64) -> Vec<f64> {
    let at = |t: f64| {
        let mut q = p.to_vec();
        q[i] += t;
        q[j] = (q[j] - t).max(0.0);
        q
    };
    let rising = |t: f64| {
        let (_, g) = gradient(powered, &at(t), alpha);
        g[i] > g[j]
    };
    if rising(p[j]) {
        let mut q = at(p[j]);
        q[j] = 0.0;
        return q;
    }
    let (mut a, mut b) = (0.0, p[j]);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if rising(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    at(0.5 * (a + b))
}

fn simplex_ascent(powered: &[Vec<f64>], alpha: f64) -> Result<CapacitySolution> {
    let k = powered.len();
    let mut p = vec![1.0 / k as f64; k];
    let mut gap_nats = f64::INFINITY;
    for iteration in 0..MAX_ITERATIONS {
        let (f, grad) = gradient(powered, &p, alpha);
        let max_grad = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fw_gap = ((max_grad - f) / alpha).max(0.0);
        gap_nats = alpha / (alpha - 1.0) * (fw_gap / f).ln_1p();
        if gap_nats <= OBJECTIVE_TOLERANCE {
            return Ok(CapacitySolution { value: to_nats(f, alpha), input: p, method: "pairwise-frank-wolfe", iterations: iteration });
        }
        if iteration < WARM_START_ITERATIONS {
            let next: Vec<f64> = p.iter().zip(&grad).map(|(px, g)| px * g / f).collect();
            let total: f64 = next.iter().sum();
            let next: Vec<f64> = next.into_iter().map(|v| v / total).collect();
            if objective(powered, &next, alpha) >= f {
                p = next;
                continue;
            }
        }
        // pairwise Frank-Wolfe: shift mass from the worst supported input to the best one
        let best = (0..k).max_by(|&a, &b| grad[a].total_cmp(&grad[b])).expect("k >= 3");
        let worst = (0..k)
            .filter(|&x| p[x] > 0.0 && x != best)
            .min_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        let Some(worst) = worst else { break };
        let next = pairwise_line_search(powered, &p, best, worst, alpha);
        if next == p {
            break;
        }
        p = next;
    }
    Err(Error::OptimizerNotConverged { iterations: MAX_ITERATIONS, tolerance: OBJECTIVE_TOLERANCE, gap: gap_nats })
}

fn arimoto_infinite_objective(channel: &[Vec<f64>], v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return f64::NEG_INFINITY;
    }
    let n_out = channel[0].len();
    let num: f64 = (0..n_out)
        .map(|y| channel.iter().zip(v).map(|(row, vx)| vx * row[y]).fold(0.0, f64::max))
        .sum();
    (num / top).ln()
}

fn coordinate_ascent_infinite(channel: &[Vec<f64>], start: Option<&[f64]>) -> CapacitySolution {
    let k = channel.len();
    let mut v = match start {
        Some(s) if s.len() == k && s.iter().any(|x| *x > 0.0) => s.to_vec(),
        _ => vec![1.0 / k as f64; k],
    };
    let top = v.iter().copied().fold(0.0, f64::max);
    v.iter_mut().for_each(|x| *x /= top);
    let mut value = arimoto_infinite_objective(channel, &v);
    let mut sweeps = 0;
    loop {
        let mut improved = false;
        for x in 0..k {
            for candidate in [1.0, 0.0] {
                let saved = v[x];
                v[x] = candidate;
                let f = arimoto_infinite_objective(channel, &v);
                if f > value {
                    value = f;
                    improved = true;
                    // keep the largest entry at 1 so that raising a coordinate to 1 never rescales the rest
                    let top = v.iter().copied().fold(0.0, f64::max);
                    v.iter_mut().for_each(|e| *e /= top);
                } else {
                    v[x] = saved;
                }
            }
        }
        sweeps += 1;
        if !improved || sweeps > 10 * k {
            break;
        }
    }
    let total: f64 = v.iter().sum();
    CapacitySolution { value, input: v.iter().map(|x| x / total).collect(), method: "coordinate-ascent", iterations: sweeps }
}
