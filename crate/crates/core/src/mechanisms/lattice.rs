//! Exhaustive search over row-stochastic matrices with entries on a lattice
//! `{0, step, 2 step, ..., 1}`.
//!
//! Mechanisms are numbered in mixed radix over their rows (first row most
//! significant) and rows are listed in increasing lexicographic order, so
//! mechanism indices follow the lexicographic order of the flattened matrices.

use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::leakage::{evaluate_raw, MeasureSpec, Side};
use crate::prob::{JointDistribution, Mechanism};

/// Slack on the leakage constraint `L <= eps`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;
/// Mechanisms within this utility of the maximum are all reported.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Largest lattice enumerated.
pub const MAX_LATTICE_SIZE: u64 = 100_000_000;
/// Largest number of argmax mechanisms kept.
pub const MAX_ARGMAX: usize = 100_000;

const MAX_X: usize = 3;
const MAX_OUTPUTS: usize = 4;
const MIN_STEP: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct Lattice {
    x_size: usize,
    n_outputs: usize,
    step: f64,
    rows: Vec<Vec<f64>>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl Lattice {
    /// Enforces `|X| <= 3`, `N <= 4`, `step >= 0.01`, `1 / step` integral and
    /// at most [`MAX_LATTICE_SIZE`] mechanisms.
    pub fn new(x_size: usize, n_outputs: usize, step: f64) -> Result<Self> {
        if x_size == 0 || n_outputs == 0 {
            return Err(Error::InvalidParam("lattice needs at least one input and one output".into()));
        }
        if x_size > MAX_X || n_outputs > MAX_OUTPUTS || !(step >= MIN_STEP - 1e-12) {
            return Err(Error::TooLarge(format!(
                "lattice search is limited to |X| <= {MAX_X}, N <= {MAX_OUTPUTS}, step >= {MIN_STEP}; got |X|={x_size}, N={n_outputs}, step={step}"
            )));
        }
        let units = (1.0 / step).round();
        if (units * step - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!("step {step} does not divide 1")));
        }
        let units = units as usize;
        let mut raw = Vec::new();
        compositions(units, n_outputs, &mut Vec::with_capacity(n_outputs), &mut raw);
        let total = (raw.len() as u64).checked_pow(x_size as u32).unwrap_or(u64::MAX);
        if total > MAX_LATTICE_SIZE {
            return Err(Error::TooLarge(format!("{total} lattice mechanisms exceed the limit of {MAX_LATTICE_SIZE}")));
        }
        let rows = raw.into_iter().map(|c| c.into_iter().map(|k| k as f64 / units as f64).collect()).collect();
        Ok(Lattice { x_size, n_outputs, step, rows })
    }

    pub fn len(&self) -> u64 {
        (self.rows.len() as u64).pow(self.x_size as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn fill(&self, mut index: u64, buf: &mut [f64]) {
        let r = self.rows.len() as u64;
        for x in (0..self.x_size).rev() {
            let row = &self.rows[(index % r) as usize];
            buf[x * self.n_outputs..(x + 1) * self.n_outputs].copy_from_slice(row);
            index /= r;
        }
    }

    pub fn matrix(&self, index: u64) -> Array2<f64> {
        let mut buf = vec![0.0; self.x_size * self.n_outputs];
        self.fill(index, &mut buf);
        Array2::from_shape_vec((self.x_size, self.n_outputs), buf).expect("sized buffer")
    }

    pub fn mechanism(&self, q: &JointDistribution, index: u64) -> Mechanism {
        Mechanism::new(q.x_alphabet().clone(), self.matrix(index)).expect("lattice rows are stochastic")
    }

    /// Calls `f(index, w)` for every mechanism index in `range`.
    pub(crate) fn walk<F: FnMut(u64, ArrayView2<'_, f64>)>(&self, range: Range<u64>, mut f: F) {
        let mut buf = vec![0.0; self.x_size * self.n_outputs];
        for index in range {
            self.fill(index, &mut buf);
            f(index, ArrayView2::from_shape((self.x_size, self.n_outputs), &buf[..]).expect("sized buffer"));
        }
    }

    /// Runs `work` on index ranges sharing a first row, in parallel; results
    /// come back in index order.
    pub(crate) fn par_chunks<T: Send, F: Fn(Range<u64>) -> T + Sync>(&self, work: F) -> Vec<T> {
        let per_chunk = self.len() / self.rows.len() as u64;
        (0..self.rows.len() as u64)
            .into_par_iter()
            .map(|chunk| work(chunk * per_chunk..(chunk + 1) * per_chunk))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Largest utility over feasible lattice mechanisms.
    pub value: f64,
    /// Every feasible mechanism within [`TIE_TOLERANCE`] of `value`, in
    /// lexicographic order (at most [`MAX_ARGMAX`]).
    pub argmax: Vec<Mechanism>,
    pub truncated: bool,
    pub evaluated: u64,
}

/// Privacy-utility function on the lattice: the largest utility over
/// lattice mechanisms with leakage at most `eps`.
pub fn brute_force_h(
    spec_l: &MeasureSpec,
    spec_u: &MeasureSpec,
    q: &JointDistribution,
    eps: f64,
    n_outputs: usize,
    step: f64,
) -> Result<BruteForceResult> {
    brute_force_h_many(spec_l, spec_u, q, &[eps], n_outputs, step)?.pop().expect("one budget")
}

/// [`brute_force_h`] at several budgets in one pass over the lattice. Each
/// entry is `Err(Infeasible)` when no lattice mechanism meets that budget.
pub fn brute_force_h_many(
    spec_l: &MeasureSpec,
    spec_u: &MeasureSpec,
    q: &JointDistribution,
    budgets: &[f64],
    n_outputs: usize,
    step: f64,
) -> Result<Vec<Result<BruteForceResult>>> {
    let lattice = Lattice::new(q.x_size(), n_outputs, step)?;
    let qv = q.view();
    type Tracks = Vec<(f64, Vec<(u64, f64)>)>;
    let chunks: Vec<Result<Tracks>> = lattice.par_chunks(|range| {
        let mut tracks: Tracks = vec![(f64::NEG_INFINITY, Vec::new()); budgets.len()];
        let mut failure = None;
        lattice.walk(range, |index, w| {
            if failure.is_some() {
                return;
            }
            let leak = match evaluate_raw(spec_l, Side::Privacy, qv, w) {
                Ok(l) => l,
                Err(e) => return failure = Some(e),
            };
            if budgets.iter().all(|&eps| leak > eps + FEASIBILITY_TOLERANCE) {
                return;
            }
            let u = match evaluate_raw(spec_u, Side::Utility, qv, w) {
                Ok(u) => u,
                Err(e) => return failure = Some(e),
            };
            for (&eps, (best, near)) in budgets.iter().zip(tracks.iter_mut()) {
                if leak > eps + FEASIBILITY_TOLERANCE {
                    continue;
                }
                if u > *best {
                    *best = u;
                    near.retain(|&(_, v)| v >= u - TIE_TOLERANCE);
                }
                if u >= *best - TIE_TOLERANCE {
                    near.push((index, u));
                }
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(tracks),
        }
    });
    let mut merged: Vec<(f64, Vec<(u64, f64)>)> = vec![(f64::NEG_INFINITY, Vec::new()); budgets.len()];
    for chunk in chunks {
        for (k, (b, near)) in chunk?.into_iter().enumerate() {
            merged[k].0 = merged[k].0.max(b);
            merged[k].1.extend(near);
        }
    }
    Ok(budgets
        .iter()
        .zip(merged)
        .map(|(&eps, (best, near))| {
            if best == f64::NEG_INFINITY {
                return Err(Error::Infeasible(format!("no lattice mechanism has {spec_l} leakage <= {eps}")));
            }
            let mut argmax = Vec::new();
            let mut truncated = false;
            for (index, _) in near.into_iter().filter(|&(_, v)| v >= best - TIE_TOLERANCE) {
                if argmax.len() == MAX_ARGMAX {
                    truncated = true;
                    break;
                }
                argmax.push(lattice.mechanism(q, index));
            }
            Ok(BruteForceResult { value: best, argmax, truncated, evaluated: lattice.len() })
        })
        .collect())
}

/// Leakage and utility of every lattice mechanism, sorted by leakage, for
/// evaluating the lattice privacy-utility function at many budgets.
#[derive(Debug, Clone)]
pub struct LatticeFrontier {
    lattice: Lattice,
    /// `(leakage, utility, index)` sorted by leakage, then index.
    entries: Vec<(f64, f64, u64)>,
    /// `prefix_max[i]` = max utility over `entries[..=i]`.
    prefix_max: Vec<f64>,
}

/// Frontiers store every mechanism; keep them small.
pub const MAX_FRONTIER_SIZE: u64 = 5_000_000;

impl LatticeFrontier {
    pub fn build(
        spec_l: &MeasureSpec,
        spec_u: &MeasureSpec,
        q: &JointDistribution,
        n_outputs: usize,
        step: f64,
    ) -> Result<Self> {
        let lattice = Lattice::new(q.x_size(), n_outputs, step)?;
        if lattice.len() > MAX_FRONTIER_SIZE {
            return Err(Error::TooLarge(format!(
                "{} mechanisms exceed the frontier limit of {MAX_FRONTIER_SIZE}",
                lattice.len()
            )));
        }
        let qv = q.view();
        let chunks: Vec<Result<Vec<(f64, f64, u64)>>> = lattice.par_chunks(|range| {
            let mut out = Vec::with_capacity((range.end - range.start) as usize);
            let mut failure = None;
            lattice.walk(range, |index, w| {
                if failure.is_some() {
                    return;
                }
                let pair = evaluate_raw(spec_l, Side::Privacy, qv, w)
                    .and_then(|l| Ok((l, evaluate_raw(spec_u, Side::Utility, qv, w)?)));
                match pair {
                    Ok((l, u)) => out.push((l, u, index)),
                    Err(e) => failure = Some(e),
                }
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(out),
            }
        });
        let mut entries = Vec::with_capacity(lattice.len() as usize);
        for chunk in chunks {
            entries.extend(chunk?);
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut prefix_max = Vec::with_capacity(entries.len());
        let mut running = f64::NEG_INFINITY;
        for e in &entries {
            running = running.max(e.1);
            prefix_max.push(running);
        }
        Ok(LatticeFrontier { lattice, entries, prefix_max })
    }

    fn feasible_len(&self, eps: f64) -> usize {
        self.entries.partition_point(|e| e.0 <= eps + FEASIBILITY_TOLERANCE)
    }

    /// Lattice privacy-utility function at `eps`.
    pub fn h(&self, eps: f64) -> Result<f64> {
        match self.feasible_len(eps) {
            0 => Err(Error::Infeasible(format!("no lattice mechanism has leakage <= {eps}"))),
            k => Ok(self.prefix_max[k - 1]),
        }
    }

    /// Feasible mechanisms within [`TIE_TOLERANCE`] of the maximum, in
    /// lexicographic order.
    pub fn argmax(&self, q: &JointDistribution, eps: f64) -> Result<Vec<Mechanism>> {
        let best = self.h(eps)?;
        let mut indices: Vec<u64> = self.entries[..self.feasible_len(eps)]
            .iter()
            .filter(|e| e.1 >= best - TIE_TOLERANCE)
            .map(|e| e.2)
            .collect();
        indices.sort_unstable();
        indices.truncate(MAX_ARGMAX);
        Ok(indices.into_iter().map(|i| self.lattice.mechanism(q, i)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `min { ||w - v||_1 : v in set }` with the entrywise l1 norm.
pub fn dist_to_set(w: &Mechanism, set: &[Mechanism]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    set.iter().map(|v| w.l1_distance(v)).try_fold(f64::INFINITY, |m, d| Ok(m.min(d?)))
}
