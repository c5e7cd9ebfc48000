//! Measure kernels on a joint matrix `P_{U,V}` (rows `U`, columns `V`).
//!
//! All logarithms are natural.

use ndarray::ArrayView2;
use smallvec::SmallVec;

use super::{FGenerator, Order};

type Marginal = SmallVec<[f64; 16]>;

pub(crate) fn row_marginal(p: ArrayView2<'_, f64>) -> Marginal {
    p.rows().into_iter().map(|r| r.iter().sum()).collect()
}

pub(crate) fn col_marginal(p: ArrayView2<'_, f64>) -> Marginal {
    let mut out: Marginal = SmallVec::from_elem(0.0, p.ncols());
    for row in p.rows() {
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o += v;
        }
    }
    out
}

/// `||a||_alpha`, scaled by the largest entry to avoid overflow at large alpha.
pub(crate) fn alpha_norm<I: Iterator<Item = f64> + Clone>(values: I, alpha: f64) -> f64 {
    let m = values.clone().fold(0.0f64, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = values.map(|v| (v / m).powf(alpha)).sum();
    m * s.powf(1.0 / alpha)
}

pub(crate) fn pc_prior(p: &[f64]) -> f64 {
    p.iter().copied().fold(0.0, f64::max)
}

pub(crate) fn pc_posterior(p: ArrayView2<'_, f64>) -> f64 {
    p.columns().into_iter().map(|c| c.iter().copied().fold(0.0, f64::max)).sum()
}

pub(crate) fn f_information(p: ArrayView2<'_, f64>, f: &FGenerator) -> f64 {
    let pu = row_marginal(p);
    let pv = col_marginal(p);
    let mut acc = 0.0;
    for (u, row) in p.rows().into_iter().enumerate() {
        for (v, &puv) in row.iter().enumerate() {
            let prod = pu[u] * pv[v];
            if prod > 0.0 {
                acc += prod * f.eval(puv / prod);
            }
        }
    }
    acc
}

pub(crate) fn shannon_mi(p: ArrayView2<'_, f64>) -> f64 {
    let pu = row_marginal(p);
    let pv = col_marginal(p);
    let mut acc = 0.0;
    for (u, row) in p.rows().into_iter().enumerate() {
        for (v, &puv) in row.iter().enumerate() {
            if puv > 0.0 {
                acc += puv * (puv / (pu[u] * pv[v])).ln();
            }
        }
    }
    acc
}

pub(crate) fn arimoto_mi(p: ArrayView2<'_, f64>, order: Order) -> f64 {
    let pu = row_marginal(p);
    match order {
        Order::Infinite => (pc_posterior(p) / pc_prior(&pu)).ln(),
        Order::Finite(alpha) => {
            let num: f64 = p.columns().into_iter().map(|c| alpha_norm(c.iter().copied(), alpha)).sum();
            let den = alpha_norm(pu.iter().copied(), alpha);
            alpha / (alpha - 1.0) * (num / den).ln()
        }
    }
}

/// Sibson's mutual information. Rows with `P_U(u) = 0` contribute nothing.
pub(crate) fn sibson_mi(p: ArrayView2<'_, f64>, order: Order) -> f64 {
    let pu = row_marginal(p);
    let support: SmallVec<[usize; 16]> = (0..pu.len()).filter(|&u| pu[u] > 0.0).collect();
    let cond = |u: usize, v: usize| p[[u, v]] / pu[u];
    match order {
        Order::Infinite => {
            let total: f64 = (0..p.ncols())
                .map(|v| support.iter().map(|&u| cond(u, v)).fold(0.0, f64::max))
                .sum();
            total.ln()
        }
        Order::Finite(alpha) => {
            let mut total = 0.0;
            for v in 0..p.ncols() {
                let c = support.iter().map(|&u| cond(u, v)).fold(0.0, f64::max);
                if c == 0.0 {
                    continue;
                }
                let s: f64 = support.iter().map(|&u| pu[u] * (cond(u, v) / c).powf(alpha)).sum();
                total += c * s.powf(1.0 / alpha);
            }
            alpha / (alpha - 1.0) * total.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn paper() -> Array2<f64> {
        array![[0.42, 0.18], [0.16, 0.24]]
    }

    #[test]
    fn alpha_norm_matches_definition() {
        let v = [0.3, 0.2, 0.5];
        let direct = v.iter().map(|x: &f64| x.powf(3.0)).sum::<f64>().powf(1.0 / 3.0);
        assert!((alpha_norm(v.iter().copied(), 3.0) - direct).abs() < 1e-15);
        assert_eq!(alpha_norm([0.0, 0.0].iter().copied(), 2.0), 0.0);
        // large order tends to the max
        assert!((alpha_norm(v.iter().copied(), 1e6) - 0.5).abs() < 1e-5);
    }

    #[test]
    fn arimoto_two_termwise() {
        // independent re-derivation: (a/(a-1)) ln( sum_v sqrt(sum_u P^2) / sqrt(sum_u P_U^2) )
        let p = paper();
        let num = (0.42f64 * 0.42 + 0.16 * 0.16).sqrt() + (0.18f64 * 0.18 + 0.24 * 0.24).sqrt();
        let den = (0.6f64 * 0.6 + 0.4 * 0.4).sqrt();
        let expected = 2.0 * (num / den).ln();
        assert!((arimoto_mi(p.view(), Order::Finite(2.0)) - expected).abs() < 1e-14);
        assert!((arimoto_mi(p.view(), Order::Infinite) - 1.1f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn sibson_infinite_example() {
        let p = paper();
        assert!((sibson_mi(p.view(), Order::Infinite) - 1.3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn sibson_finite_termwise() {
        let p = paper();
        let alpha = 3.0;
        let pu = [0.6, 0.4];
        let mut total = 0.0;
        for v in 0..2 {
            let inner: f64 = (0..2).map(|u| pu[u] * (p[[u, v]] / pu[u]).powf(alpha)).sum();
            total += inner.powf(1.0 / alpha);
        }
        let expected = alpha / (alpha - 1.0) * f64::ln(total);
        assert!((sibson_mi(p.view(), Order::Finite(alpha)) - expected).abs() < 1e-14);
    }

    #[test]
    fn sibson_ignores_zero_rows() {
        let with_zero = array![[0.3, 0.2], [0.0, 0.0], [0.1, 0.4]];
        let without = array![[0.3, 0.2], [0.1, 0.4]];
        for order in [Order::Finite(2.0), Order::Infinite] {
            assert!((sibson_mi(with_zero.view(), order) - sibson_mi(without.view(), order)).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_square_and_tv_termwise() {
        let p = paper();
        let pu = [0.6, 0.4];
        let pv = [0.58, 0.42];
        let mut chi = 0.0;
        let mut tv = 0.0;
        for u in 0..2 {
            for v in 0..2 {
                let prod: f64 = pu[u] * pv[v];
                chi += (p[[u, v]] - prod).powi(2) / prod;
                tv += (p[[u, v]] - prod).abs() / 2.0;
            }
        }
        assert!((f_information(p.view(), &FGenerator::ChiSquare) - chi).abs() < 1e-15);
        assert!((f_information(p.view(), &FGenerator::TotalVariation) - tv).abs() < 1e-15);
    }

    #[test]
    fn shannon_deterministic_uniform() {
        let k = 5;
        let p = Array2::from_shape_fn((k, k), |(i, j)| if i == j { 1.0 / k as f64 } else { 0.0 });
        assert!((shannon_mi(p.view()) - (k as f64).ln()).abs() < 1e-14);
    }
}
