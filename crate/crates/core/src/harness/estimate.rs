use alloc::vec::Vec;

use super::trial::{Allocation, TrialContext, TrialRecord};
use super::HarnessError;
use crate::models::{cell_index, Behavior, ChshSettings, Setting, CHSH_SIGNS};

/// Outcome counts `n(a,b|x,y)` and, optionally, the per-trial records.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Dataset {
    settings_a: Vec<Setting>,
    settings_b: Vec<Setting>,
    /// Indexed `x·nb + y`, cells in `CELLS` order.
    counts: Vec<[u64; 4]>,
    records: Vec<TrialRecord>,
}

impl Dataset {
    pub fn new(settings_a: Vec<Setting>, settings_b: Vec<Setting>) -> Self {
        let n = settings_a.len() * settings_b.len();
        Dataset { settings_a, settings_b, counts: alloc::vec![[0; 4]; n], records: Vec::new() }
    }

    pub fn for_behavior(b: &Behavior) -> Self {
        Self::new(b.settings_a().to_vec(), b.settings_b().to_vec())
    }

    pub fn settings_a(&self) -> &[Setting] {
        &self.settings_a
    }

    pub fn settings_b(&self) -> &[Setting] {
        &self.settings_b
    }

    /// Counts a trial; the record itself is kept only if `keep` is set.
    pub fn add(&mut self, r: TrialRecord, keep: bool) {
        self.counts[r.x * self.settings_b.len() + r.y][cell_index(r.a, r.b)] += 1;
        if keep {
            self.records.push(r);
        }
    }

    pub fn counts(&self, x: usize, y: usize) -> [u64; 4] {
        self.counts[x * self.settings_b.len() + y]
    }

    pub fn n(&self, x: usize, y: usize) -> u64 {
        self.counts(x, y).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Kept records, ordered by trial index.
    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    /// Adds `other`'s counts and records. Records stay ordered by index.
    pub fn merge(&mut self, other: Dataset) -> Result<(), HarnessError> {
        if self.settings_a != other.settings_a || self.settings_b != other.settings_b {
            return Err(HarnessError::InvalidPlan("cannot merge datasets over different setting grids".into()));
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            for k in 0..4 {
                c[k] += o[k];
            }
        }
        self.records.extend(other.records);
        self.records.sort_by_key(|r| r.index);
        Ok(())
    }
}

/// Runs trials `range` of `allocation` in index order.
pub fn run_range(
    ctx: &TrialContext,
    allocation: &Allocation,
    range: core::ops::Range<u64>,
    keep_records: bool,
) -> Result<Dataset, HarnessError> {
    let mut d = Dataset::for_behavior(ctx.behavior());
    for i in range {
        let (r, _) = ctx.run_trial(allocation, i, false)?;
        d.add(r, keep_records);
    }
    Ok(d)
}

/// The whole experiment, sequentially.
pub fn run_experiment(
    ctx: &TrialContext,
    allocation: &Allocation,
    keep_records: bool,
) -> Result<Dataset, HarnessError> {
    let pairs = ctx.behavior().settings_a().len() * ctx.behavior().settings_b().len();
    let total = allocation.total(pairs);
    if total == 0 {
        return Err(HarnessError::InvalidPlan("at least one trial per setting pair is required".into()));
    }
    run_range(ctx, allocation, 0..total, keep_records)
}

/// Relative frequencies with 1σ binomial standard errors.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BehaviorEstimate {
    pub behavior: Behavior,
    /// `√(p̂(1-p̂)/N)` per cell, indexed like the behavior table.
    pub se: Vec<[f64; 4]>,
    pub n: Vec<u64>,
}

pub fn estimate_behavior(d: &Dataset) -> Result<BehaviorEstimate, HarnessError> {
    let nb = d.settings_b.len();
    let mut table = Vec::with_capacity(d.counts.len());
    let mut se = Vec::with_capacity(d.counts.len());
    let mut ns = Vec::with_capacity(d.counts.len());
    for (p, c) in d.counts.iter().enumerate() {
        let n: u64 = c.iter().sum();
        if n == 0 {
            return Err(HarnessError::MissingData { x: d.settings_a[p / nb], y: d.settings_b[p % nb] });
        }
        let nf = n as f64;
        let phat = c.map(|k| k as f64 / nf);
        se.push(phat.map(|q| libm::sqrt(q * (1.0 - q) / nf)));
        table.push(phat);
        ns.push(n);
    }
    let behavior = Behavior::new(d.settings_a.clone(), d.settings_b.clone(), table)?;
    Ok(BehaviorEstimate { behavior, se, n: ns })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChshEstimate {
    pub s: f64,
    pub se: f64,
    /// Empirical correlators in `ChshSettings::pairs` order.
    pub correlators: [f64; 4],
    pub correlator_se: [f64; 4],
}

/// `Ŝ` from the empirical correlators, with their `√((1-Ê²)/N)` errors added
/// in quadrature.
pub fn estimate_chsh(d: &Dataset, s: &ChshSettings) -> Result<ChshEstimate, HarnessError> {
    let mut e = [0.0; 4];
    let mut es = [0.0; 4];
    for (k, (x, y)) in s.pairs().iter().enumerate() {
        let missing = || HarnessError::MissingData { x: *x, y: *y };
        let xi = d.settings_a.iter().position(|v| v == x).ok_or_else(missing)?;
        let yi = d.settings_b.iter().position(|v| v == y).ok_or_else(missing)?;
        let c = d.counts(xi, yi);
        let n: u64 = c.iter().sum();
        if n == 0 {
            return Err(missing());
        }
        let nf = n as f64;
        let ek = (c[0] as f64 - c[1] as f64 - c[2] as f64 + c[3] as f64) / nf;
        e[k] = ek;
        es[k] = libm::sqrt((1.0 - ek * ek).max(0.0) / nf);
    }
    let sv = (0..4).map(|k| CHSH_SIGNS[k] * e[k]).sum();
    let se = libm::sqrt(es.iter().map(|v| v * v).sum());
    Ok(ChshEstimate { s: sv, se, correlators: e, correlator_se: es })
}
