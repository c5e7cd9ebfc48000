use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::prob::rng_from_seed;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Points used by the numeric sup-norm / Lipschitz fallback.
pub const FALLBACK_GRID_POINTS: usize = 10_000;

/// Convex generator `f` with `f(1) = 0` defining an f-divergence, together
/// with its sup norm `K_{f,u}` and Lipschitz constant `L_{f,u}` on `[0, u]`.
#[derive(Clone)]
pub enum FGenerator {
    /// `f(t) = |t - 1| / 2`.
    TotalVariation,
    /// `f(t) = (t - 1)^2`.
    ChiSquare,
    /// `f(t) = (t^a - 1) / (a - 1)`, `a > 1`.
    Hellinger(f64),
    Custom(CustomGenerator),
}

/// User-supplied generator. Missing constants are approximated on a
/// [`FALLBACK_GRID_POINTS`]-point grid over `[0, u]`, which can
/// underestimate the true sup and Lipschitz constant between grid points.
#[derive(Clone)]
pub struct CustomGenerator {
    name: String,
    f: RealFn,
    k_sup: Option<RealFn>,
    l_lip: Option<RealFn>,
}

impl FGenerator {
    pub fn hellinger(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidAlpha(format!("Hellinger order must be finite and > 1, got {alpha}")));
        }
        Ok(FGenerator::Hellinger(alpha))
    }

    /// A custom generator, spot-checked for `f(1) = 0` and convexity.
    pub fn custom<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let generator = FGenerator::Custom(CustomGenerator { name: name.into(), f: Arc::new(f), k_sup: None, l_lip: None });
        generator.spot_check()?;
        Ok(generator)
    }

    /// A custom generator with closed-form `K_{f,u}` and `L_{f,u}`.
    pub fn custom_with_constants<F, K, L>(name: impl Into<String>, f: F, k_sup: K, l_lip: L) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        K: Fn(f64) -> f64 + Send + Sync + 'static,
        L: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let generator = FGenerator::Custom(CustomGenerator {
            name: name.into(),
            f: Arc::new(f),
            k_sup: Some(Arc::new(k_sup)),
            l_lip: Some(Arc::new(l_lip)),
        });
        generator.spot_check()?;
        Ok(generator)
    }

    pub fn name(&self) -> String {
        match self {
            FGenerator::TotalVariation => "tv".into(),
            FGenerator::ChiSquare => "chi2".into(),
            FGenerator::Hellinger(a) => format!("hellinger({})", super::format_real(*a)),
            FGenerator::Custom(c) => format!("custom:{}", c.name),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FGenerator::TotalVariation => (t - 1.0).abs() / 2.0,
            FGenerator::ChiSquare => (t - 1.0) * (t - 1.0),
            FGenerator::Hellinger(a) => (t.powf(*a) - 1.0) / (a - 1.0),
            FGenerator::Custom(c) => (c.f)(t),
        }
    }

    /// `K_{f,u} = sup { |f(t)| : t in [0, u] }`.
    pub fn k_sup(&self, u: f64) -> f64 {
        match self {
            FGenerator::TotalVariation => 1.0f64.max(u - 1.0) / 2.0,
            FGenerator::ChiSquare => 1.0f64.max((u - 1.0) * (u - 1.0)),
            FGenerator::Hellinger(a) => 1.0f64.max(u.powf(*a) - 1.0) / (a - 1.0),
            FGenerator::Custom(c) => match &c.k_sup {
                Some(k) => k(u),
                None => self.numeric_constants(u).0,
            },
        }
    }

    /// Lipschitz constant `L_{f,u}` of `f` on `[0, u]`.
    pub fn l_lip(&self, u: f64) -> f64 {
        match self {
            FGenerator::TotalVariation => 0.5,
            FGenerator::ChiSquare => 2.0 * 1.0f64.max(u - 1.0),
            FGenerator::Hellinger(a) => a * u.powf(a - 1.0) / (a - 1.0),
            FGenerator::Custom(c) => match &c.l_lip {
                Some(l) => l(u),
                None => self.numeric_constants(u).1,
            },
        }
    }

    fn numeric_constants(&self, u: f64) -> (f64, f64) {
        let h = u / (FALLBACK_GRID_POINTS - 1) as f64;
        let values: Vec<f64> = (0..FALLBACK_GRID_POINTS).map(|i| self.eval(i as f64 * h)).collect();
        let k = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l = values.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / h));
        (k, l)
    }

    /// Checks `f(1) = 0`, convexity on random triples in `[0, 10]`, and
    /// monotonicity of `K` and `L` in `u` on a few points.
    pub fn spot_check(&self) -> Result<()> {
        let name = self.name();
        if self.eval(1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("generator {name}: f(1) = {} != 0", self.eval(1.0))));
        }
        let mut rng = rng_from_seed(0x5eed_f00d);
        for _ in 0..256 {
            let a: f64 = rng.random_range(0.0..10.0);
            let b: f64 = rng.random_range(0.0..10.0);
            let lambda: f64 = rng.random();
            let lhs = self.eval(lambda * a + (1.0 - lambda) * b);
            let rhs = lambda * self.eval(a) + (1.0 - lambda) * self.eval(b);
            if !(lhs <= rhs + 1e-9 * (1.0 + rhs.abs())) {
                return Err(Error::InvalidParam(format!("generator {name} is not convex between {a} and {b}")));
            }
        }
        let us = [0.5, 1.0, 2.0, 5.0, 20.0];
        for w in us.windows(2) {
            // grid-based constants carry a relative discretization error of order 1 / FALLBACK_GRID_POINTS
            let slack = |v: f64| 1e-12 + 1e-3 * v.abs();
            if self.k_sup(w[1]) + slack(self.k_sup(w[0])) < self.k_sup(w[0])
                || self.l_lip(w[1]) + slack(self.l_lip(w[0])) < self.l_lip(w[0])
            {
                return Err(Error::InvalidParam(format!("generator {name}: K or L decreases in u")));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for FGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FGenerator({})", self.name())
    }
}

impl PartialEq for FGenerator {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (FGenerator::TotalVariation, FGenerator::TotalVariation) => true,
            (FGenerator::ChiSquare, FGenerator::ChiSquare) => true,
            (FGenerator::Hellinger(a), FGenerator::Hellinger(b)) => a == b,
            (FGenerator::Custom(a), FGenerator::Custom(b)) => Arc::ptr_eq(&a.f, &b.f),
            _ => false,
        }
    }
}
