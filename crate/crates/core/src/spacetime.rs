//! 1+1D kinematics for stationary observers.
//!
//! Units default to `c = 1` with positions in light-seconds and times in
//! seconds. Observers sit at fixed positions in the lab frame; there are no
//! boosts.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::models::{Outcome, Setting};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub const BOTH: [Party; 2] = [Party::Alice, Party::Bob];

    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }

    /// `A` or `B`.
    pub fn label(self) -> &'static str {
        match self {
            Party::Alice => "A",
            Party::Bob => "B",
        }
    }

    /// Name of this party's setting variable.
    pub fn setting_var(self) -> &'static str {
        match self {
            Party::Alice => "θa",
            Party::Bob => "θb",
        }
    }

    /// Name of this party's outcome variable.
    pub fn outcome_var(self) -> &'static str {
        match self {
            Party::Alice => "±a",
            Party::Bob => "±b",
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Something one party learned and may pass on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Fact {
    Setting(Setting),
    Outcome(Outcome),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Payload {
    /// Preparation of the shared state `ψ0`.
    Preparation,
    SettingChoice {
        party: Party,
        setting: Setting,
    },
    Detection {
        party: Party,
        outcome: Outcome,
    },
    Message {
        sender: Party,
        fact: Fact,
    },
}

impl Payload {
    /// The party and fact this payload carries, if any.
    pub fn fact(&self) -> Option<(Party, Fact)> {
        match *self {
            Payload::Preparation => None,
            Payload::SettingChoice { party, setting } => Some((party, Fact::Setting(setting))),
            Payload::Detection { party, outcome } => Some((party, Fact::Outcome(outcome))),
            Payload::Message { sender, fact } => Some((sender, fact)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Payload::Preparation => "ψ0 prepared".into(),
            Payload::SettingChoice { party, setting } => {
                alloc::format!("{party} sets {} = {setting}", party.setting_var())
            }
            Payload::Detection { party, outcome } => {
                alloc::format!("{party} detects {} = {outcome}", party.outcome_var())
            }
            Payload::Message { sender, fact } => match fact {
                Fact::Setting(s) => alloc::format!("{sender} sends {} = {s}", sender.setting_var()),
                Fact::Outcome(o) => alloc::format!("{sender} sends {} = {o}", sender.outcome_var()),
            },
        }
    }
}

/// A lab-frame event with a payload that propagates at `speed`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpacetimeEvent {
    /// Global creation index, the tie-break for simultaneous receptions.
    pub id: usize,
    pub t: f64,
    pub x: f64,
    pub payload: Payload,
    pub speed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Worldline {
    pub party: Party,
    pub x: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Interval {
    Timelike,
    Lightlike,
    Spacelike,
}

/// Classifies the separation of two events by the sign of `c²Δt² - Δx²`.
pub fn interval(e1: &SpacetimeEvent, e2: &SpacetimeEvent, c: f64) -> Interval {
    classify(e2.t - e1.t, e2.x - e1.x, c)
}

fn classify(dt: f64, dx: f64, c: f64) -> Interval {
    let tt = c * c * dt * dt;
    let xx = dx * dx;
    let s = tt - xx;
    if s.abs() <= 1e-12 * tt.max(xx) {
        Interval::Lightlike
    } else if s > 0.0 {
        Interval::Timelike
    } else {
        Interval::Spacelike
    }
}

/// When `w` receives `e`: immediately for events on its own worldline,
/// otherwise after the travel time at the event's propagation speed.
pub fn reception_time(e: &SpacetimeEvent, w: &Worldline) -> f64 {
    let d = (e.x - w.x).abs();
    if d == 0.0 {
        e.t
    } else {
        e.t + d / e.speed
    }
}

/// Events in the order `w` receives them; ties go to the lower event id.
pub fn reception_order<'a>(w: &Worldline, events: &'a [SpacetimeEvent]) -> Vec<&'a SpacetimeEvent> {
    let mut order: Vec<&SpacetimeEvent> = events.iter().collect();
    order.sort_by(|a, b| reception_time(a, w).total_cmp(&reception_time(b, w)).then(a.id.cmp(&b.id)));
    order
}

/// `t0 < tθ < t± < tc` for one observer.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageTimes {
    pub t0: f64,
    pub t_theta: f64,
    pub t_pm: f64,
    pub t_c: f64,
}

impl Default for StageTimes {
    fn default() -> Self {
        StageTimes { t0: 0.0, t_theta: 0.1, t_pm: 0.2, t_c: 2.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleConfig {
    pub x_alice: f64,
    pub x_bob: f64,
    pub times_alice: StageTimes,
    pub times_bob: StageTimes,
    pub c: f64,
    /// Emission speed of the result messages, in `(0, c]`.
    pub message_speed: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            x_alice: -1.0,
            x_bob: 1.0,
            times_alice: StageTimes::default(),
            times_bob: StageTimes::default(),
            c: 1.0,
            message_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid schedule: speeds must satisfy 0 < message speed <= c (c = {c}, message speed = {message_speed})")]
    BadSpeed { c: f64, message_speed: f64 },
    #[error("invalid schedule: observers share the worldline x = {0}")]
    SameWorldline(f64),
    #[error("invalid schedule: {party} stage times must satisfy t0 < tθ < t± < tc")]
    StageOrder { party: Party },
    #[error("invalid schedule: {first} and {second} are not space-like separated ({kind:?})")]
    NotSpacelike { first: String, second: String, kind: Interval },
    #[error("invalid schedule: {from}'s results reach {to} at t = {arrival}, after its tc = {deadline}")]
    LateMessage { from: Party, to: Party, arrival: f64, deadline: f64 },
}

/// A validated experiment schedule. Payload contents differ per trial; the
/// event slots (times, places, speeds) do not.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Schedule {
    config: ScheduleConfig,
    t_prep: f64,
    x_source: f64,
}

impl Schedule {
    pub fn build(config: ScheduleConfig) -> Result<Self, ScheduleError> {
        let ScheduleConfig { x_alice, x_bob, times_alice, times_bob, c, message_speed } = config;
        if !(c > 0.0 && c.is_finite() && message_speed > 0.0 && message_speed <= c) {
            return Err(ScheduleError::BadSpeed { c, message_speed });
        }
        if x_alice == x_bob {
            return Err(ScheduleError::SameWorldline(x_alice));
        }
        for (party, t) in [(Party::Alice, times_alice), (Party::Bob, times_bob)] {
            if !(t.t0 < t.t_theta && t.t_theta < t.t_pm && t.t_pm < t.t_c) {
                return Err(ScheduleError::StageOrder { party });
            }
        }
        let distance = (x_alice - x_bob).abs();
        let schedule = Schedule {
            config,
            t_prep: times_alice.t0.min(times_bob.t0) - distance / (2.0 * c),
            x_source: 0.5 * (x_alice + x_bob),
        };

        let at = |party: Party, which: &'static str| -> (String, f64, f64) {
            let (x, t) = schedule.local(party);
            let time = if which == "setting choice" { t.t_theta } else { t.t_pm };
            (alloc::format!("{party} {which}"), time, x)
        };
        for a in ["setting choice", "detection"] {
            for b in ["setting choice", "detection"] {
                let (na, ta, xa) = at(Party::Alice, a);
                let (nb, tb, xb) = at(Party::Bob, b);
                let kind = classify(tb - ta, xb - xa, c);
                if kind != Interval::Spacelike {
                    return Err(ScheduleError::NotSpacelike { first: na, second: nb, kind });
                }
            }
        }
        for from in Party::BOTH {
            let to = from.other();
            let arrival = schedule.local(from).1.t_pm + distance / message_speed;
            let deadline = schedule.local(to).1.t_c;
            if arrival > deadline {
                return Err(ScheduleError::LateMessage { from, to, arrival, deadline });
            }
        }
        Ok(schedule)
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    fn local(&self, party: Party) -> (f64, StageTimes) {
        match party {
            Party::Alice => (self.config.x_alice, self.config.times_alice),
            Party::Bob => (self.config.x_bob, self.config.times_bob),
        }
    }

    pub fn worldline(&self, party: Party) -> Worldline {
        Worldline { party, x: self.local(party).0 }
    }

    pub fn times(&self, party: Party) -> StageTimes {
        self.local(party).1
    }

    pub fn c(&self) -> f64 {
        self.config.c
    }

    /// The preparation event: emitted midway between the observers so that
    /// it reaches both by their `t0`.
    pub fn preparation(&self) -> SpacetimeEvent {
        SpacetimeEvent { id: 0, t: self.t_prep, x: self.x_source, payload: Payload::Preparation, speed: self.config.c }
    }

    /// All events of one trial, in creation order: preparation, the two
    /// setting choices, the two detections, then Alice's and Bob's result
    /// messages (setting before outcome), emitted at each sender's `t±`.
    pub fn events(
        &self,
        setting_a: Setting,
        setting_b: Setting,
        outcome_a: Outcome,
        outcome_b: Outcome,
    ) -> Vec<SpacetimeEvent> {
        let c = self.config.c;
        let v = self.config.message_speed;
        let (xa, ta) = self.local(Party::Alice);
        let (xb, tb) = self.local(Party::Bob);
        let mut events = alloc::vec![self.preparation()];
        let mut push = |t: f64, x: f64, payload: Payload, speed: f64| {
            let id = events.len();
            events.push(SpacetimeEvent { id, t, x, payload, speed });
        };
        push(ta.t_theta, xa, Payload::SettingChoice { party: Party::Alice, setting: setting_a }, c);
        push(tb.t_theta, xb, Payload::SettingChoice { party: Party::Bob, setting: setting_b }, c);
        push(ta.t_pm, xa, Payload::Detection { party: Party::Alice, outcome: outcome_a }, c);
        push(tb.t_pm, xb, Payload::Detection { party: Party::Bob, outcome: outcome_b }, c);
        push(ta.t_pm, xa, Payload::Message { sender: Party::Alice, fact: Fact::Setting(setting_a) }, v);
        push(ta.t_pm, xa, Payload::Message { sender: Party::Alice, fact: Fact::Outcome(outcome_a) }, v);
        push(tb.t_pm, xb, Payload::Message { sender: Party::Bob, fact: Fact::Setting(setting_b) }, v);
        push(tb.t_pm, xb, Payload::Message { sender: Party::Bob, fact: Fact::Outcome(outcome_b) }, v);
        events
    }
}
