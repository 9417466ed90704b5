use alloc::vec::Vec;

use super::rng::{sample_index, TrialDraws};
use super::HarnessError;
use crate::models::{Behavior, Outcome, Setting, CELLS};
use crate::observers::{
    init_beliefs, pool, BellVariables, InitConfig, ObserverState, QUncertainty, SettingPrior, Stage,
};
use crate::prob::{TaggedJoint, Value, Variable};
use crate::spacetime::{reception_order, reception_time, Fact, Party, Payload, Schedule, SpacetimeEvent};

/// How recorded values are blurred by measurement uncertainty.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QConfig {
    /// Width of the peaked `Q` over setting grids. Zero means exact.
    pub setting_width: f64,
    /// Alice's own setting is known to have been set but its value was not
    /// read off: `Q(θa)` is uniform over her grid.
    pub unresolved_local_setting: bool,
}

/// How settings are assigned to trials.
#[derive(Clone, Debug, PartialEq)]
pub enum Allocation {
    /// Exactly `n` trials per setting pair; trial `k` of pair `(x, y)` has
    /// global index `(x·nb + y)·n + k`.
    PerPair { n: u64 },
    /// `n` trials with each wing drawing its setting independently from its
    /// prior.
    Random { n: u64, prior_a: Vec<f64>, prior_b: Vec<f64> },
}

impl Allocation {
    pub fn total(&self, pairs: usize) -> u64 {
        match self {
            Allocation::PerPair { n } => n * pairs as u64,
            Allocation::Random { n, .. } => *n,
        }
    }
}

/// Per-observer reception times of the four propositions:
/// own setting, own outcome, remote setting, remote outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReceptionTimes {
    pub own_setting: f64,
    pub own_outcome: f64,
    pub remote_setting: f64,
    pub remote_outcome: f64,
}

impl ReceptionTimes {
    pub fn as_array(&self) -> [f64; 4] {
        [self.own_setting, self.own_outcome, self.remote_setting, self.remote_outcome]
    }
}

/// The data `d_i` of one experiment.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrialRecord {
    /// Global trial index, also the RNG substream id.
    pub index: u64,
    pub x: usize,
    pub y: usize,
    pub setting_a: Setting,
    pub setting_b: Setting,
    pub a: Outcome,
    pub b: Outcome,
    pub times_alice: ReceptionTimes,
    pub times_bob: ReceptionTimes,
}

/// Everything one trial did, for replay and classification.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub record: TrialRecord,
    pub preset: bool,
    pub events: Vec<SpacetimeEvent>,
    /// One snapshot per stage, taken when the stage is entered.
    pub alice: Vec<ObserverState>,
    pub bob: Vec<ObserverState>,
    pub pooled: TaggedJoint,
    pub data: Vec<(Variable, Value)>,
}

impl RunTrace {
    pub fn history(&self, party: Party) -> &[ObserverState] {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    pub fn snapshot(&self, party: Party, stage: Stage) -> Option<&ObserverState> {
        self.history(party).iter().find(|s| s.stage() == stage)
    }
}

/// Whether untracked trials drive the observer ledgers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Replay {
    /// Every trial runs both observers through `receive` and `pool`.
    #[default]
    Observers,
    /// Records only. Same records, no realism check.
    SamplingOnly,
}

/// Fixed inputs shared by all trials of an experiment.
#[derive(Clone, Debug)]
pub struct TrialContext {
    behavior: Behavior,
    schedule: Schedule,
    q: QConfig,
    preset: bool,
    seed: u64,
    replay: Replay,
    /// Initial observer pair per setting pair (preset), or a single pair.
    initial: Vec<(ObserverState, ObserverState)>,
    /// `Q` per ledger variable (`±a, θa, ±b, θb`) and recorded value index.
    qs: [Vec<QUncertainty>; 4],
    /// Reception times for Alice and Bob. They depend on the schedule only.
    times: [ReceptionTimes; 2],
}

fn reception_times(schedule: &Schedule, events: &[SpacetimeEvent], party: Party) -> ReceptionTimes {
    let w = schedule.worldline(party);
    let first = |own: bool, setting: bool| {
        events
            .iter()
            .filter(|e| match e.payload.fact() {
                Some((p, f)) => (p == party) == own && matches!(f, Fact::Setting(_)) == setting,
                None => false,
            })
            .map(|e| reception_time(e, &w))
            .fold(f64::INFINITY, f64::min)
    };
    ReceptionTimes {
        own_setting: first(true, true),
        own_outcome: first(true, false),
        remote_setting: first(false, true),
        remote_outcome: first(false, false),
    }
}

fn q_tables(vars: &BellVariables, q: QConfig) -> Result<[Vec<QUncertainty>; 4], HarnessError> {
    let table = |var: &Variable, setting: bool, unresolved: bool| -> Result<Vec<QUncertainty>, HarnessError> {
        var.domain()
            .iter()
            .map(|v| {
                Ok(if unresolved {
                    QUncertainty::unresolved(var)
                } else if setting {
                    QUncertainty::peaked(var, v, q.setting_width)?
                } else {
                    QUncertainty::delta(var, v)?
                })
            })
            .collect()
    };
    Ok([
        table(&vars.outcome_a, false, false)?,
        table(&vars.setting_a, true, q.unresolved_local_setting)?,
        table(&vars.outcome_b, false, false)?,
        table(&vars.setting_b, true, false)?,
    ])
}

impl TrialContext {
    pub fn new(
        behavior: Behavior,
        schedule: Schedule,
        q: QConfig,
        preset: bool,
        prior: Option<SettingPrior>,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let (na, nb) = (behavior.settings_a().len(), behavior.settings_b().len());
        let prior = prior.unwrap_or_else(|| SettingPrior::uniform(na, nb));
        let base = InitConfig { prior_alice: prior.clone(), prior_bob: prior, preset: None };
        let initial = if preset {
            let mut v = Vec::with_capacity(na * nb);
            for x in 0..na {
                for y in 0..nb {
                    let cfg = base.clone().with_preset(behavior.settings_a()[x], behavior.settings_b()[y]);
                    v.push(init_beliefs(&behavior, &schedule, &cfg)?);
                }
            }
            v
        } else {
            alloc::vec![init_beliefs(&behavior, &schedule, &base)?]
        };
        let qs = q_tables(initial[0].0.variables(), q)?;
        let (sa, sb) = (behavior.settings_a()[0], behavior.settings_b()[0]);
        let events = schedule.events(sa, sb, Outcome::Plus, Outcome::Plus);
        let times =
            [reception_times(&schedule, &events, Party::Alice), reception_times(&schedule, &events, Party::Bob)];
        Ok(TrialContext { behavior, schedule, q, preset, seed, replay: Replay::Observers, initial, qs, times })
    }

    pub fn with_replay(mut self, replay: Replay) -> Self {
        self.replay = replay;
        self
    }

    pub fn replay(&self) -> Replay {
        self.replay
    }

    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn preset(&self) -> bool {
        self.preset
    }

    pub fn q(&self) -> QConfig {
        self.q
    }

    /// Settings of trial `index` under `allocation`.
    pub fn settings_for(
        &self,
        allocation: &Allocation,
        index: u64,
        draws: &TrialDraws,
    ) -> Result<(usize, usize), HarnessError> {
        let nb = self.behavior.settings_b().len();
        let pairs = self.behavior.settings_a().len() * nb;
        match allocation {
            Allocation::PerPair { n } => {
                if *n == 0 || index >= n * pairs as u64 {
                    return Err(HarnessError::InvalidPlan(alloc::format!("trial index {index} outside the plan")));
                }
                let p = (index / n) as usize;
                Ok((p / nb, p % nb))
            }
            Allocation::Random { prior_a, prior_b, .. } => {
                Ok((sample_index(prior_a, draws.u_x), sample_index(prior_b, draws.u_y)))
            }
        }
    }

    /// The `Q` attached to a payload's fact, the same for both observers.
    fn q_for(&self, payload: &Payload) -> &QUncertainty {
        let (party, fact) = payload.fact().expect("caller filters preparation");
        let (slot, i) = match (party, fact) {
            (Party::Alice, Fact::Outcome(o)) => (0, o.index()),
            (Party::Alice, Fact::Setting(s)) => (1, self.behavior.index_a(&s).expect("grid setting")),
            (Party::Bob, Fact::Outcome(o)) => (2, o.index()),
            (Party::Bob, Fact::Setting(s)) => (3, self.behavior.index_b(&s).expect("grid setting")),
        };
        &self.qs[slot][i]
    }

    /// Runs one trial with the given settings, optionally keeping the full
    /// trace.
    pub fn run_with_settings(
        &self,
        index: u64,
        x: usize,
        y: usize,
        u_cell: f64,
        track: bool,
    ) -> Result<(TrialRecord, Option<RunTrace>), HarnessError> {
        let record = self.sample_record(index, x, y, u_cell);
        if !track && self.replay == Replay::SamplingOnly {
            return Ok((record, None));
        }
        let b = &self.behavior;
        let events = self.schedule.events(record.setting_a, record.setting_b, record.a, record.b);
        let (init_a, init_b) = if self.preset { &self.initial[x * b.settings_b().len() + y] } else { &self.initial[0] };

        let mut histories: [Vec<ObserverState>; 2] = [Vec::new(), Vec::new()];
        let mut finals = Vec::with_capacity(2);
        for (k, init) in [init_a, init_b].into_iter().enumerate() {
            let w = *init.worldline();
            let mut state = init.clone();
            state.reserve_events(events.len());
            if track {
                histories[k].push(state.clone());
            }
            for e in reception_order(&w, &events) {
                if e.payload == Payload::Preparation {
                    continue;
                }
                let before = state.stage();
                state = state.receive(e, self.q_for(&e.payload))?;
                if track && state.stage() != before {
                    histories[k].push(state.clone());
                }
            }
            finals.push(state);
        }
        let bob = finals.pop().expect("two observers");
        let alice = finals.pop().expect("two observers");
        let pooled = pool(alice, bob)?;

        if self.q == QConfig::default() {
            let r = &record;
            let expect = [r.a.value(), r.setting_a.value(), r.b.value(), r.setting_b.value()];
            if pooled.data.iter().map(|(_, v)| v).ne(expect.iter()) {
                return Err(HarnessError::DataMismatch(index));
            }
        }
        let trace = track.then(|| {
            let [mut alice, mut bob] = histories;
            // the tc snapshot is the state after pooling
            for (h, s) in [(&mut alice, pooled.alice), (&mut bob, pooled.bob)] {
                if h.last().is_some_and(|l| l.stage() == Stage::Tc) {
                    h.pop();
                }
                h.push(s);
            }
            RunTrace {
                record: record.clone(),
                preset: self.preset,
                events,
                alice,
                bob,
                pooled: pooled.ledger,
                data: pooled.data,
            }
        });
        Ok((record, trace))
    }

    /// Samples the outcome of one trial.
    fn sample_record(&self, index: u64, x: usize, y: usize, u_cell: f64) -> TrialRecord {
        let b = &self.behavior;
        let (a, bo) = CELLS[sample_index(&b.slice(x, y), u_cell)];
        TrialRecord {
            index,
            x,
            y,
            setting_a: b.settings_a()[x],
            setting_b: b.settings_b()[y],
            a,
            b: bo,
            times_alice: self.times[0],
            times_bob: self.times[1],
        }
    }

    /// Trial `index` of `allocation`, drawing from its own substream.
    pub fn run_trial(
        &self,
        allocation: &Allocation,
        index: u64,
        track: bool,
    ) -> Result<(TrialRecord, Option<RunTrace>), HarnessError> {
        let draws = TrialDraws::for_trial(self.seed, index);
        let (x, y) = self.settings_for(allocation, index, &draws)?;
        self.run_with_settings(index, x, y, draws.u_cell, track)
    }
}
