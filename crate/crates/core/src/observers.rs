//! Per-observer belief ledgers.
//!
//! Each observer starts from the same joint over `{±a, θa, ±b, θb}` given
//! the prepared state `ψ0`. Events update the ledger only when they are
//! received on the observer's worldline, and then always factually.
//! Anything about the distant wing that has not arrived yet can only be
//! posited, through [`ObserverState::inquire`], and is tagged
//! counterfactual.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::models::{Behavior, ModelError, Outcome, Setting};
use crate::prob::{product, Conditioner, Modality, ProbError, TaggedJoint, Value, Variable};
use crate::spacetime::{reception_time, Fact, Party, Payload, Schedule, SpacetimeEvent, Worldline};
use crate::NORM_TOL;

/// The four stages of one experiment, `t0 < tθ < t± < tc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Stage {
    /// Preparation; nothing measured.
    #[cfg_attr(feature = "serde", serde(rename = "t0"))]
    T0,
    /// The observer has chosen its own setting.
    #[cfg_attr(feature = "serde", serde(rename = "t_theta"))]
    TTheta,
    /// The observer has recorded its own outcome.
    #[cfg_attr(feature = "serde", serde(rename = "t_pm"))]
    TPm,
    /// Both wings' results have been communicated.
    #[cfg_attr(feature = "serde", serde(rename = "t_c"))]
    Tc,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::T0, Stage::TTheta, Stage::TPm, Stage::Tc];

    /// Label used in rendered ledgers.
    pub fn label(self) -> &'static str {
        match self {
            Stage::T0 => "t0",
            Stage::TTheta => "tθ",
            Stage::TPm => "t±",
            Stage::Tc => "tc",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObserverError {
    #[error("realism violation: observer {observer} cannot accept {variable} = {value}, which has probability zero")]
    RealismViolation { observer: Party, variable: String, value: String },
    #[error("impossible counterfactual: {0}")]
    ImpossibleEvidence(ProbError),
    #[error("observers must start from equal beliefs at t0")]
    AsymmetricInitialBeliefs,
    #[error("event received at t = {at} but observer clock is already at {clock}")]
    OutOfOrder { at: f64, clock: f64 },
    #[error("stage cannot go back from {from} to {to}")]
    StageRegression { from: Stage, to: Stage },
    #[error("{0} is already factually known and cannot be posited")]
    NotCounterfactual(String),
    #[error("expected stage {expected}, observer is at {got}")]
    NotReady { expected: Stage, got: Stage },
    #[error("incomplete run: {0}")]
    IncompleteRun(&'static str),
    #[error("no snapshot for stage {0}")]
    StageMissing(Stage),
    #[error("{0} is not part of the recorded data")]
    NotRecorded(String),
    #[error("measurement uncertainty mismatch: {0}")]
    QMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// The ledger variables `±a, θa, ±b, θb` for a given setting grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BellVariables {
    pub outcome_a: Variable,
    pub setting_a: Variable,
    pub outcome_b: Variable,
    pub setting_b: Variable,
    /// `ψ0` followed by the four stage labels.
    labels: [Conditioner; 5],
}

impl BellVariables {
    pub fn new(grid_a: &[Setting], grid_b: &[Setting]) -> Result<Self, ProbError> {
        let outcomes = || Outcome::ALL.iter().map(|o| o.value()).collect::<Vec<_>>();
        Ok(BellVariables {
            outcome_a: Variable::new(Party::Alice.outcome_var(), outcomes())?,
            setting_a: Variable::new(Party::Alice.setting_var(), grid_a.iter().map(|s| s.value()).collect())?,
            outcome_b: Variable::new(Party::Bob.outcome_var(), outcomes())?,
            setting_b: Variable::new(Party::Bob.setting_var(), grid_b.iter().map(|s| s.value()).collect())?,
            labels: [
                Conditioner::context("ψ0"),
                Conditioner::context(Stage::T0.label()),
                Conditioner::context(Stage::TTheta.label()),
                Conditioner::context(Stage::TPm.label()),
                Conditioner::context(Stage::Tc.label()),
            ],
        })
    }

    /// `[ψ0, stage]`, both factual.
    pub fn stage_context(&self, stage: Stage) -> Vec<Conditioner> {
        alloc::vec![self.labels[0].clone(), self.labels[1 + stage as usize].clone()]
    }

    pub fn for_behavior(b: &Behavior) -> Result<Self, ProbError> {
        Self::new(b.settings_a(), b.settings_b())
    }

    /// In ledger order `±a, θa, ±b, θb`.
    pub fn all(&self) -> [&Variable; 4] {
        [&self.outcome_a, &self.setting_a, &self.outcome_b, &self.setting_b]
    }

    pub fn setting(&self, p: Party) -> &Variable {
        match p {
            Party::Alice => &self.setting_a,
            Party::Bob => &self.setting_b,
        }
    }

    pub fn outcome(&self, p: Party) -> &Variable {
        match p {
            Party::Alice => &self.outcome_a,
            Party::Bob => &self.outcome_b,
        }
    }

    pub fn by_name(&self, name: &str) -> Option<&Variable> {
        self.all().into_iter().find(|v| v.name() == name)
    }
}

/// Measurement uncertainty `Q` over one variable's domain.
#[derive(Clone, Debug, PartialEq)]
pub struct QUncertainty {
    variable: Variable,
    weights: Arc<[f64]>,
}

impl QUncertainty {
    pub fn new(variable: &Variable, weights: Vec<f64>) -> Result<Self, ObserverError> {
        if weights.len() != variable.len() {
            return Err(ObserverError::QMismatch(alloc::format!(
                "Q over {} needs {} weights, got {}",
                variable.name(),
                variable.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > NORM_TOL {
            return Err(ObserverError::QMismatch(alloc::format!("Q over {} is not a distribution", variable.name())));
        }
        Ok(QUncertainty { variable: variable.clone(), weights: weights.into() })
    }

    /// Kronecker delta at `value`.
    pub fn delta(variable: &Variable, value: &Value) -> Result<Self, ObserverError> {
        let i = variable.require_index(value)?;
        let mut weights = alloc::vec![0.0; variable.len()];
        weights[i] = 1.0;
        Ok(QUncertainty { variable: variable.clone(), weights: weights.into() })
    }

    /// Uniform over the domain: the value is known to be set but was not
    /// read off.
    pub fn unresolved(variable: &Variable) -> Self {
        let n = variable.len();
        QUncertainty { variable: variable.clone(), weights: alloc::vec![1.0 / n as f64; n].into() }
    }

    /// Discrete Gaussian of the given width around `center`, over a setting
    /// variable. Distance is in radians for angles and in grid steps for
    /// labels. A width of zero gives the delta.
    pub fn peaked(variable: &Variable, center: &Value, width: f64) -> Result<Self, ObserverError> {
        if !(width >= 0.0) {
            return Err(ObserverError::QMismatch("negative Q width".into()));
        }
        let ci = variable.require_index(center)?;
        if width == 0.0 {
            return Self::delta(variable, center);
        }
        let dist = |v: &Value, i: usize| match (v, center) {
            (Value::Angle(a), Value::Angle(c)) => (*a - *c).radians().abs(),
            _ => (i as f64 - ci as f64).abs(),
        };
        let raw: Vec<f64> = variable
            .domain()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let z = dist(v, i) / width;
                libm::exp(-0.5 * z * z)
            })
            .collect();
        let total: f64 = raw.iter().sum();
        Self::new(variable, raw.into_iter().map(|w| w / total).collect())
    }

    pub fn variable(&self) -> &str {
        self.variable.name()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the single supported value, if this is a delta.
    pub fn delta_index(&self) -> Option<usize> {
        let mut support = self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0);
        match (support.next(), support.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    fn close_to(&self, other: &Self) -> bool {
        self.variable.name() == other.variable.name()
            && self.weights.len() == other.weights.len()
            && self.weights.iter().zip(other.weights.iter()).all(|(a, b)| (a - b).abs() <= NORM_TOL)
    }
}

/// A locally received fact and the uncertainty it was recorded with.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub variable: Variable,
    pub value: Value,
    pub q: QUncertainty,
}

/// Prior over each wing's setting at `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingPrior {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

impl SettingPrior {
    pub fn uniform(na: usize, nb: usize) -> Self {
        SettingPrior { alice: alloc::vec![1.0 / na as f64; na], bob: alloc::vec![1.0 / nb as f64; nb] }
    }

    fn close_to(&self, other: &Self) -> bool {
        let eq = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= NORM_TOL);
        eq(&self.alice, &other.alice) && eq(&self.bob, &other.bob)
    }
}

/// How the two observers start.
#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    pub prior_alice: SettingPrior,
    pub prior_bob: SettingPrior,
    /// Settings agreed and communicated before `t0`. Both observers then
    /// hold them as facts from the start.
    pub preset: Option<(Setting, Setting)>,
}

impl InitConfig {
    pub fn uniform(b: &Behavior) -> Self {
        let p = SettingPrior::uniform(b.settings_a().len(), b.settings_b().len());
        InitConfig { prior_alice: p.clone(), prior_bob: p, preset: None }
    }

    pub fn with_preset(mut self, x: Setting, y: Setting) -> Self {
        self.preset = Some((x, y));
        self
    }
}

/// One observer's information and beliefs.
#[derive(Clone, Debug)]
pub struct ObserverState {
    party: Party,
    worldline: Worldline,
    vars: BellVariables,
    received: Vec<SpacetimeEvent>,
    measurements: Vec<Measurement>,
    ledger: TaggedJoint,
    stage: Stage,
    clock: f64,
}

/// Event ids for the pre-agreed settings of preset runs.
pub const PRESET_EVENT_IDS: [usize; 2] = [9, 10];

/// Both observers' ledgers at `t0`: the model's conditional table times the
/// setting prior, given `ψ0`.
pub fn init_beliefs(
    model: &Behavior,
    schedule: &Schedule,
    cfg: &InitConfig,
) -> Result<(ObserverState, ObserverState), ObserverError> {
    if !cfg.prior_alice.close_to(&cfg.prior_bob) {
        return Err(ObserverError::AsymmetricInitialBeliefs);
    }
    let prior = &cfg.prior_alice;
    let (na, nb) = (model.settings_a().len(), model.settings_b().len());
    for (w, n) in [(&prior.alice, na), (&prior.bob, nb)] {
        if w.len() != n || w.iter().any(|p| !(*p >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > NORM_TOL {
            return Err(ModelError::InvalidPrior("setting prior must be a distribution over the grid".into()).into());
        }
    }
    let vars = BellVariables::for_behavior(model)?;
    let free: Vec<Variable> = vars.all().into_iter().cloned().collect();
    let joint = TaggedJoint::from_weights("", free, |d| {
        let (a, x, b, y) = (Outcome::from_index(d[0]), d[1], Outcome::from_index(d[2]), d[3]);
        model.p(x, y, a, b) * prior.alice[x] * prior.bob[y]
    })?
    .with_context(vars.stage_context(Stage::T0));

    let make = |party: Party| -> Result<ObserverState, ObserverError> {
        let worldline = schedule.worldline(party);
        let t0 = schedule.times(party).t0;
        let mut s = ObserverState {
            party,
            worldline,
            vars: vars.clone(),
            received: {
                let mut r = Vec::with_capacity(12);
                r.push(schedule.preparation());
                r
            },
            measurements: Vec::new(),
            ledger: joint.clone().with_owner(party.label()),
            stage: Stage::T0,
            clock: t0,
        };
        if let Some((x, y)) = cfg.preset {
            let t_agree = schedule.preparation().t - 1.0;
            for (k, (sender, setting)) in [(Party::Alice, x), (Party::Bob, y)].into_iter().enumerate().rev() {
                let e = SpacetimeEvent {
                    id: PRESET_EVENT_IDS[k],
                    t: t_agree,
                    x: schedule.worldline(sender).x,
                    payload: Payload::Message { sender, fact: Fact::Setting(setting) },
                    speed: schedule.c(),
                };
                let var = vars.setting(sender).clone();
                let q = QUncertainty::delta(&var, &setting.value())?;
                s.absorb(&var, &setting.value(), &q)?;
                s.received.insert(1, e);
            }
        }
        Ok(s)
    };
    Ok((make(Party::Alice)?, make(Party::Bob)?))
}

impl ObserverState {
    pub fn party(&self) -> Party {
        self.party
    }

    pub fn worldline(&self) -> &Worldline {
        &self.worldline
    }

    pub fn variables(&self) -> &BellVariables {
        &self.vars
    }

    /// Events received so far, in reception order. This is the observer's
    /// information.
    pub fn received(&self) -> &[SpacetimeEvent] {
        &self.received
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn measurement(&self, variable: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.variable.name() == variable)
    }

    pub fn ledger(&self) -> &TaggedJoint {
        &self.ledger
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn is_factual(&self, variable: &str) -> bool {
        self.ledger.conditioner(variable).is_some_and(|c| c.modality == Modality::Factual)
    }

    /// The value of `variable` if this observer holds it as a fact, either
    /// recorded locally or received (possibly with a spread `Q`), or fixed as
    /// a factual conditioner.
    pub fn known_value(&self, variable: &str) -> Option<Value> {
        match self.measurement(variable) {
            Some(m) => Some(m.value.clone()),
            None => {
                self.ledger.conditioner(variable).filter(|c| c.modality == Modality::Factual).map(|c| c.value.clone())
            }
        }
    }

    fn realism(&self, variable: &str, value: &Value) -> ObserverError {
        ObserverError::RealismViolation {
            observer: self.party,
            variable: variable.into(),
            value: alloc::format!("{value}"),
        }
    }

    /// The variable and value an event's payload speaks about.
    pub fn fact_of(payload: &Payload) -> Option<(&'static str, Value)> {
        let (party, fact) = payload.fact()?;
        Some(match fact {
            Fact::Setting(s) => (party.setting_var(), s.value()),
            Fact::Outcome(o) => (party.outcome_var(), o.value()),
        })
    }

    /// Folds one fact into the ledger: factual conditioning for a delta
    /// `Q`, otherwise `p(rest | var) · Q(var)` with the variable left free.
    fn absorb(&mut self, var: &Variable, value: &Value, q: &QUncertainty) -> Result<(), ObserverError> {
        let name = var.name();
        if q.variable() != name {
            return Err(ObserverError::QMismatch(alloc::format!("Q is over {}, event is about {name}", q.variable())));
        }
        let vi = var.require_index(value)?;
        if let Some(m) = self.measurement(name) {
            return if m.value == *value { Ok(()) } else { Err(self.realism(name, value)) };
        }
        match q.delta_index() {
            Some(i) if i != vi => {
                return Err(ObserverError::QMismatch(alloc::format!("delta Q for {name} is not at {value}")));
            }
            Some(_) => {
                self.ledger = self.ledger.condition(name, value, Modality::Factual).map_err(|e| match e {
                    ProbError::ImpossibleEvidence { .. } => self.realism(name, value),
                    other => other.into(),
                })?;
            }
            None => {
                if !(q.weights()[vi] > 0.0) {
                    return Err(ObserverError::QMismatch(alloc::format!("Q for {name} excludes the recorded {value}")));
                }
                for (v, w) in var.domain().iter().zip(q.weights()) {
                    if *w > 0.0 && !(self.ledger.marginal_mass(name, v)? > 0.0) {
                        return Err(self.realism(name, v));
                    }
                }
                let order: Vec<String> = self.ledger.free_names().map(String::from).collect();
                let order: Vec<&str> = order.iter().map(String::as_str).collect();
                let cond = self.ledger.conditional_on(&[name])?;
                let qj = TaggedJoint::new("", alloc::vec![var.clone()], q.weights().to_vec())?;
                self.ledger = product(&cond, &qj)?
                    .reorder(&order)?
                    .with_owner(self.ledger.owner_label())
                    .with_evidence(self.ledger.evidence().to_vec())
                    .with_context(self.ledger.context().to_vec());
            }
        }
        self.measurements.push(Measurement { variable: var.clone(), value: value.clone(), q: q.clone() });
        Ok(())
    }

    pub(crate) fn reserve_events(&mut self, n: usize) {
        self.received.reserve(n);
        self.measurements.reserve(4);
    }

    fn set_stage(&mut self, stage: Stage) {
        self.stage = stage;
        self.ledger.set_context_slot(1, self.vars.labels[1 + stage as usize].clone());
    }

    fn knows_everything(&self) -> bool {
        // one measurement per variable at most
        self.measurements.len() == 4
    }

    /// Receives one event with measurement uncertainty `q` over the variable
    /// it carries.
    ///
    /// The observer's own setting choice and detection advance the stage to
    /// `tθ` and `t±`; once all four propositions are known the stage is
    /// `tc`. A fact with zero probability under the current ledger is a
    /// realism violation.
    pub fn receive(mut self, e: &SpacetimeEvent, q: &QUncertainty) -> Result<Self, ObserverError> {
        let at = reception_time(e, &self.worldline);
        if at < self.clock {
            return Err(ObserverError::OutOfOrder { at, clock: self.clock });
        }
        let Some((name, value)) = Self::fact_of(&e.payload) else {
            self.received.push(e.clone());
            self.clock = at;
            return Ok(self);
        };
        let next = match e.payload {
            Payload::SettingChoice { party, .. } if party == self.party => Some(Stage::TTheta),
            Payload::Detection { party, .. } if party == self.party => Some(Stage::TPm),
            _ => None,
        };
        if let Some(to) = next {
            if to <= self.stage {
                return Err(ObserverError::StageRegression { from: self.stage, to });
            }
        }
        let var = self.vars.by_name(name).expect("payload variables are ledger variables").clone();
        self.absorb(&var, &value, q)?;
        self.received.push(e.clone());
        self.clock = at;
        if let Some(stage) = next {
            self.set_stage(stage);
        }
        if self.stage >= Stage::TPm && self.knows_everything() {
            self.set_stage(Stage::Tc);
        }
        Ok(self)
    }

    /// Counterfactual inquiry: posit each assignment with a counterfactual
    /// tag, then marginalize down to `targets`.
    ///
    /// Positing is always allowed, including for the distant wing; only
    /// variables already known factually are refused.
    pub fn inquire(&self, targets: &[&str], posits: &[(&str, Value)]) -> Result<TaggedJoint, ObserverError> {
        for (name, _) in posits {
            if !self.ledger.is_free(name) {
                return Err(ObserverError::NotCounterfactual((*name).into()));
            }
        }
        let mut d = self.ledger.clone();
        // conditioners are kept most recent first
        for (name, value) in posits.iter().rev() {
            d = d.condition(name, value, Modality::Counterfactual).map_err(|e| match e {
                ProbError::ImpossibleEvidence { .. } => ObserverError::ImpossibleEvidence(e),
                other => other.into(),
            })?;
        }
        Ok(d.marginalize_to(targets)?)
    }

    /// True when every factual evidence conditioner in the ledger was
    /// delivered by a received event.
    pub fn factual_evidence_is_local(&self) -> bool {
        self.ledger.evidence().iter().filter(|c| c.modality == Modality::Factual).all(|c| {
            self.received
                .iter()
                .filter_map(|e| Self::fact_of(&e.payload))
                .any(|(n, v)| n == c.variable.name() && v == c.value)
        })
    }

    /// Likelihood of a recorded value of `target`, evaluated with the ledger
    /// held at `past` and conditioned on everything else known now.
    ///
    /// Facts recorded with a non-delta `Q` are marginalized rather than
    /// conditioned on, giving a mixture. The result renders as
    /// `P_A(±a|tθ|θa,±b,θb,tc)`.
    pub fn retrodict(
        &self,
        history: &[ObserverState],
        target: &str,
        past: Stage,
    ) -> Result<TaggedJoint, ObserverError> {
        if self.stage != Stage::Tc {
            return Err(ObserverError::NotReady { expected: Stage::Tc, got: self.stage });
        }
        if self.measurement(target).is_none() {
            return Err(ObserverError::NotRecorded(target.into()));
        }
        let then = history.iter().find(|s| s.stage == past).ok_or(ObserverError::StageMissing(past))?;
        let mut d = then.ledger.clone();
        let mut evidence = Vec::new();
        for var in self.vars.all() {
            let name = var.name();
            if name == target {
                continue;
            }
            let Some(m) = self.measurement(name) else { continue };
            if m.q.delta_index().is_none() {
                continue;
            }
            if d.is_free(name) {
                d = d.condition(name, &m.value, Modality::Factual).map_err(|e| match e {
                    ProbError::ImpossibleEvidence { .. } => self.realism(name, &m.value),
                    other => other.into(),
                })?;
            }
            evidence.push(Conditioner { variable: var.clone(), value: m.value.clone(), modality: Modality::Factual });
        }
        let d = d.marginalize_to(&[target])?;
        let mut past_label = Conditioner::context(past.label());
        past_label.modality = Modality::Counterfactual;
        Ok(d.with_owner(self.party.label())
            .with_evidence(evidence)
            .with_context(alloc::vec![past_label, Conditioner::context(Stage::Tc.label())]))
    }
}

/// The result of pooling two observers' information.
#[derive(Clone, Debug)]
pub struct Pooled {
    pub alice: ObserverState,
    pub bob: ObserverState,
    /// The common ledger. Once all four propositions are known this is the
    /// product of the measurement uncertainties.
    pub ledger: TaggedJoint,
    /// The most probable full assignment of the pooled ledger, lowest domain
    /// index first on ties.
    pub data: Vec<(Variable, Value)>,
}

fn exchange(to: &mut ObserverState, from: &ObserverState) -> Result<(), ObserverError> {
    for m in &from.measurements {
        let name = m.variable.name();
        if let Some(mine) = to.measurement(name) {
            if mine.value != m.value {
                return Err(to.realism(name, &m.value));
            }
            if !mine.q.close_to(&m.q) {
                return Err(ObserverError::QMismatch(alloc::format!("observers disagree on Q({name})")));
            }
            continue;
        }
        to.absorb(&m.variable, &m.value, &m.q)?;
    }
    Ok(())
}

/// Pools `I_A ∪ I_B`: each observer absorbs the facts only the other one
/// holds (with the sender's `Q`), which must not contradict its own
/// ledger. When the union covers all four propositions, both ledgers become
/// `Q(θa) Q(±a) Q(θb) Q(±b)`.
pub fn pool(alice: ObserverState, bob: ObserverState) -> Result<Pooled, ObserverError> {
    let (mut alice, mut bob) = (alice, bob);
    exchange(&mut alice, &bob)?;
    exchange(&mut bob, &alice)?;
    if alice.knows_everything() {
        let free: Vec<Variable> = alice.vars.all().into_iter().cloned().collect();
        let qs: Vec<&[f64]> = free.iter().map(|v| alice.measurement(v.name()).expect("known").q.weights()).collect();
        let ledger = TaggedJoint::from_weights("", free, |d| d.iter().zip(&qs).map(|(i, q)| q[*i]).product())?
            .with_context(alice.vars.stage_context(Stage::Tc));
        for s in [&mut alice, &mut bob] {
            s.ledger = ledger.clone().with_owner(s.party.label());
            s.stage = Stage::Tc;
        }
        let data = ledger.argmax();
        return Ok(Pooled { alice, bob, ledger: ledger.with_owner("A∪B"), data });
    }
    if !alice.ledger.equivalent(&bob.ledger, NORM_TOL) {
        return Err(ObserverError::IncompleteRun("pooled ledgers disagree before all results are known"));
    }
    let ledger = alice.ledger.clone().with_owner("A∪B");
    let data = ledger.argmax();
    Ok(Pooled { alice, bob, ledger, data })
}

/// One row of the stage comparison table.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StageRow {
    pub stage: Stage,
    pub alice: String,
    pub bob: String,
    pub equal: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StageTable {
    pub rows: Vec<StageRow>,
}

impl StageTable {
    pub fn pattern(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.equal).collect()
    }
}

impl fmt::Display for StageTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stage | Alice | Bob | =?")?;
        for r in &self.rows {
            writeln!(f, "{} | {} | {} | {}", r.stage, r.alice, r.bob, if r.equal { "y" } else { "n" })?;
        }
        Ok(())
    }
}

/// Compares Alice's and Bob's ledgers stage by stage. Histories hold one
/// snapshot per stage reached; both must have reached the same stages.
pub fn stage_table(history_a: &[ObserverState], history_b: &[ObserverState]) -> Result<StageTable, ObserverError> {
    if history_a.is_empty() || history_b.is_empty() {
        return Err(ObserverError::IncompleteRun("empty history"));
    }
    let stages = |h: &[ObserverState]| h.iter().map(|s| s.stage).collect::<Vec<_>>();
    if stages(history_a) != stages(history_b) {
        return Err(ObserverError::IncompleteRun("observers reached different stages"));
    }
    let rows = history_a
        .iter()
        .zip(history_b)
        .map(|(a, b)| StageRow {
            stage: a.stage,
            alice: a.ledger.render(),
            bob: b.ledger.render(),
            equal: a.ledger.equivalent(&b.ledger, NORM_TOL),
        })
        .collect();
    Ok(StageTable { rows })
}
