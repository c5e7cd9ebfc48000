use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confidence radius of the l1 deviation between an empirical distribution of
/// `n` samples over `d` cells and its source: with probability at least
/// `1 - beta`, `||P_n - P||_1 <= value = sqrt((2/n) (d - ln beta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRadius {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    pub value: f64,
}

pub fn deviation_radius(n: usize, d: usize, beta: f64) -> Result<DeviationRadius> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidBeta(beta));
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidParam(format!("deviation radius needs n >= 1 and d >= 1, got n={n}, d={d}")));
    }
    let value = ((2.0 / n as f64) * (d as f64 - beta.ln())).sqrt();
    Ok(DeviationRadius { n, d, beta, value })
}

/// Relaxed Weissman tail `exp(d) exp(-n eps^2 / 2)` bounding
/// `Pr(||P_n - P||_1 >= eps)`. Values above 1 are vacuous and returned as is.
pub fn weissman_tail(n: usize, d: usize, eps: f64) -> f64 {
    (d as f64 - n as f64 * eps * eps / 2.0).exp()
}
