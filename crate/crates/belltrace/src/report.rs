//! The summary document and the trace log.

use belltrace_core::harness::{
    estimate_behavior, estimate_chsh, BehaviorEstimate, ChshEstimate, Dataset, HarnessError, RunTrace, TrialRecord,
    ViolationReport,
};
use belltrace_core::models::{
    check_factorizable, check_factorizable_default, check_no_signaling, chsh_expectation, chsh_value, Behavior,
    ChshSettings, FactorizabilityReport, NoSignalingReport, Outcome, Setting, CELLS, CHSH_SIGNS,
};
use belltrace_core::observers::{stage_table, ObserverState, StageRow};
use belltrace_core::spacetime::{reception_time, Party};
use belltrace_core::{Schedule, ScheduleConfig, Stage, FACET_TOL, NORM_TOL};
use serde::Serialize;

use crate::formats::CorrelatorPoint;

#[derive(Clone, Debug, Serialize)]
pub struct CellEstimate {
    pub x: Setting,
    pub y: Setting,
    pub a: Outcome,
    pub b: Outcome,
    pub p_model: f64,
    pub p_hat: f64,
    pub se: f64,
    pub n: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelatorEstimate {
    pub x: Setting,
    pub y: Setting,
    pub sign: f64,
    pub analytic: f64,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChshSection {
    /// `x0, x1, y0, y1`.
    pub settings: [Setting; 4],
    pub s_analytic: f64,
    pub s_estimate: f64,
    pub se: f64,
    /// `(Ŝ - S) / se`; absent when the standard error is zero.
    pub z: Option<f64>,
    /// The uniform-prior expectation, `S / 4`.
    pub expectation_uniform: f64,
    pub correlators: Vec<CorrelatorEstimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Estimates {
    pub total_trials: u64,
    pub behavior: Vec<CellEstimate>,
    pub chsh: Option<ChshSection>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalNoSignaling {
    pub max_deviation_a: f64,
    pub max_deviation_b: f64,
    /// `5 / √N` for the smallest per-pair count `N`.
    pub bound: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoSignalingSection {
    pub analytic: NoSignalingReport,
    pub empirical: EmpiricalNoSignaling,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Factorizability {
    Report(FactorizabilityReport),
    Unsupported { unsupported: String },
}

impl Factorizability {
    fn of(b: &Behavior) -> Self {
        Self::wrap(check_factorizable_default(b))
    }

    /// Sampled tables: no-signaling within `5/√N`, facets within five
    /// standard errors of `S`.
    fn of_estimate(est: &BehaviorEstimate) -> Self {
        let b = &est.behavior;
        if !b.is_binary() {
            return Self::wrap(check_factorizable_default(b));
        }
        let n_min = est.n.iter().copied().min().unwrap_or(0).max(1) as f64;
        let var_s: f64 = (0..4)
            .map(|p| {
                let e = b.correlator_at(p / 2, p % 2);
                (1.0 - e * e).max(0.0) / est.n[p] as f64
            })
            .sum();
        Self::wrap(check_factorizable(b, 5.0 / n_min.sqrt(), 5.0 * var_s.sqrt() + FACET_TOL))
    }

    fn wrap(r: Result<FactorizabilityReport, belltrace_core::models::ModelError>) -> Self {
        match r {
            Ok(r) => Factorizability::Report(r),
            Err(e) => Factorizability::Unsupported { unsupported: e.to_string() },
        }
    }

    pub fn local(&self) -> Option<bool> {
        match self {
            Factorizability::Report(r) => Some(r.local),
            Factorizability::Unsupported { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizabilitySection {
    pub analytic: Factorizability,
    pub empirical: Factorizability,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationSection {
    pub traced_trials: Vec<u64>,
    pub reports: Vec<ViolationReport>,
    /// Why there are no reports, if there are none.
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTableSection {
    pub trial: u64,
    pub rows: Vec<StageRow>,
    /// Equality column, e.g. `y,n,n,y`.
    pub pattern: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub model: String,
    pub seed: u64,
    pub n_per_pair: u64,
    pub preset: bool,
    pub replay: belltrace_core::harness::Replay,
}

/// Everything `summary.json` holds.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub run: RunInfo,
    pub estimates: Estimates,
    pub no_signaling: NoSignalingSection,
    pub factorizability: FactorizabilitySection,
    pub classification: ClassificationSection,
    pub stage_table: StageTableSection,
}

pub fn pattern_string(p: &[bool]) -> String {
    p.iter().map(|e| if *e { "y" } else { "n" }).collect::<Vec<_>>().join(",")
}

fn empirical_no_signaling(est: &BehaviorEstimate) -> EmpiricalNoSignaling {
    let r = check_no_signaling(&est.behavior, 0.0);
    let n_min = est.n.iter().copied().min().unwrap_or(0).max(1);
    let bound = 5.0 / (n_min as f64).sqrt();
    EmpiricalNoSignaling {
        max_deviation_a: r.max_deviation_a,
        max_deviation_b: r.max_deviation_b,
        bound,
        passes: r.worst() <= bound,
    }
}

fn chsh_section(model: &Behavior, s: &ChshSettings, e: &ChshEstimate) -> Result<ChshSection, HarnessError> {
    let s_analytic = chsh_value(model, s)?;
    let pairs = s.pairs();
    let mut correlators = Vec::with_capacity(4);
    for (k, (x, y)) in pairs.iter().enumerate() {
        let xi = model.index_a(x)?;
        let yi = model.index_b(y)?;
        correlators.push(CorrelatorEstimate {
            x: *x,
            y: *y,
            sign: CHSH_SIGNS[k],
            analytic: model.correlator_at(xi, yi),
            estimate: e.correlators[k],
            se: e.correlator_se[k],
        });
    }
    Ok(ChshSection {
        settings: [pairs[0].0, pairs[1].0, pairs[0].1, pairs[2].1],
        s_analytic,
        s_estimate: e.s,
        se: e.se,
        z: (e.se > 0.0).then(|| (e.s - s_analytic) / e.se),
        expectation_uniform: chsh_expectation(model, s, &[0.25; 4])?,
        correlators,
    })
}

/// Per-pair correlators of the model and the estimate.
pub fn correlator_points(model: &Behavior, est: &BehaviorEstimate) -> Vec<CorrelatorPoint> {
    let nb = model.settings_b().len();
    let mut out = Vec::with_capacity(model.settings_a().len() * nb);
    for (x, sx) in model.settings_a().iter().enumerate() {
        for (y, sy) in model.settings_b().iter().enumerate() {
            let n = est.n[x * nb + y] as f64;
            let e = est.behavior.correlator_at(x, y);
            let delta_over_pi = match (sx.angle(), sy.angle()) {
                (Some(a), Some(b)) => {
                    let d = a - b;
                    Some(d.numerator() as f64 / f64::from(d.denominator()))
                }
                _ => None,
            };
            out.push(CorrelatorPoint {
                x: *sx,
                y: *sy,
                delta_over_pi,
                analytic: model.correlator_at(x, y),
                estimate: e,
                se: ((1.0 - e * e).max(0.0) / n).sqrt(),
            });
        }
    }
    out
}

/// Assembles the summary from a finished experiment.
pub fn build_summary(
    run: RunInfo,
    model: &Behavior,
    chsh: Option<&ChshSettings>,
    data: &Dataset,
    traces: &[RunTrace],
) -> Result<Summary, HarnessError> {
    let est = estimate_behavior(data)?;
    let nb = model.settings_b().len();
    let mut cells = Vec::with_capacity(model.settings_a().len() * nb * 4);
    for (x, sx) in model.settings_a().iter().enumerate() {
        for (y, sy) in model.settings_b().iter().enumerate() {
            let p = x * nb + y;
            for (k, (a, b)) in CELLS.iter().enumerate() {
                cells.push(CellEstimate {
                    x: *sx,
                    y: *sy,
                    a: *a,
                    b: *b,
                    p_model: model.slice(x, y)[k],
                    p_hat: est.behavior.slice(x, y)[k],
                    se: est.se[p][k],
                    n: est.n[p],
                });
            }
        }
    }

    let (chsh_sec, chsh_est) = match chsh {
        Some(s) => {
            let e = estimate_chsh(data, s)?;
            (Some(chsh_section(model, s, &e)?), Some(e))
        }
        None => (None, None),
    };

    let mut reports = Vec::new();
    let note = match chsh {
        Some(s) => {
            for party in Party::BOTH {
                for stage in Stage::ALL {
                    reports.push(belltrace_core::harness::classify_violation(
                        traces,
                        party,
                        stage,
                        model,
                        s,
                        chsh_est.as_ref(),
                    )?);
                }
            }
            None
        }
        None => Some("no CHSH settings: each setting grid needs at least two settings".to_string()),
    };

    let first = traces.first().ok_or(HarnessError::InvalidPlan("no traced trial".into()))?;
    let table = stage_table(&first.alice, &first.bob)?;

    Ok(Summary {
        run,
        estimates: Estimates { total_trials: data.total(), behavior: cells, chsh: chsh_sec },
        no_signaling: NoSignalingSection {
            analytic: check_no_signaling(model, NORM_TOL),
            empirical: empirical_no_signaling(&est),
        },
        factorizability: FactorizabilitySection {
            analytic: Factorizability::of(model),
            empirical: Factorizability::of_estimate(&est),
        },
        classification: ClassificationSection {
            traced_trials: traces.iter().map(|t| t.record.index).collect(),
            reports,
            note,
        },
        stage_table: StageTableSection {
            trial: first.record.index,
            pattern: pattern_string(&table.pattern()),
            rows: table.rows,
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEvent {
    pub id: usize,
    pub t: f64,
    pub x: f64,
    pub speed: f64,
    pub payload: String,
    pub received_by_alice: f64,
    pub received_by_bob: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSnapshot {
    pub observer: Party,
    pub stage: Stage,
    pub clock: f64,
    /// Ids of the events received so far.
    pub received: Vec<usize>,
    pub ledger: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRun {
    pub record: TrialRecord,
    pub preset: bool,
    pub events: Vec<TraceEvent>,
    pub snapshots: Vec<TraceSnapshot>,
    pub pooled: String,
    /// The pooled data `d_i`, variable name and value.
    pub data: Vec<(String, String)>,
}

/// Everything `trace.json` holds.
#[derive(Clone, Debug, Serialize)]
pub struct TraceDoc {
    pub schedule: ScheduleConfig,
    pub runs: Vec<TraceRun>,
}

fn snapshot(s: &ObserverState) -> TraceSnapshot {
    TraceSnapshot {
        observer: s.party(),
        stage: s.stage(),
        clock: s.clock(),
        received: s.received().iter().map(|e| e.id).collect(),
        ledger: s.ledger().render(),
    }
}

pub fn build_trace(schedule: &Schedule, traces: &[RunTrace]) -> TraceDoc {
    let (wa, wb) = (schedule.worldline(Party::Alice), schedule.worldline(Party::Bob));
    let runs = traces
        .iter()
        .map(|t| TraceRun {
            record: t.record.clone(),
            preset: t.preset,
            events: t
                .events
                .iter()
                .map(|e| TraceEvent {
                    id: e.id,
                    t: e.t,
                    x: e.x,
                    speed: e.speed,
                    payload: e.payload.describe(),
                    received_by_alice: reception_time(e, &wa),
                    received_by_bob: reception_time(e, &wb),
                })
                .collect(),
            snapshots: t.alice.iter().chain(&t.bob).map(snapshot).collect(),
            pooled: t.pooled.render(),
            data: t.data.iter().map(|(v, x)| (v.name().to_string(), x.to_string())).collect(),
        })
        .collect();
    TraceDoc { schedule: *schedule.config(), runs }
}
