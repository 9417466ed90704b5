use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::estimate::ChshEstimate;
use super::trial::RunTrace;
use super::HarnessError;
use crate::models::{chsh_value, Behavior, ChshSettings};
use crate::observers::Stage;
use crate::prob::Value;
use crate::spacetime::Party;
use crate::FACET_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Classification {
    /// All settings entering the evaluation are factually known and the
    /// traces cover every CHSH pair.
    FactualLocal,
    /// Only the evaluating observer's own setting had to be posited.
    CounterfactualLocal,
    /// The distant wing's setting had to be posited.
    CounterfactualNonlocal,
    /// Settings are factual but a single factual setting pair cannot form
    /// a CHSH sum.
    NotApplicable,
}

impl Classification {
    pub fn is_local(self) -> bool {
        self != Classification::CounterfactualNonlocal
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::FactualLocal => "factual-local",
            Classification::CounterfactualLocal => "counterfactual-local",
            Classification::CounterfactualNonlocal => "counterfactual-nonlocal",
            Classification::NotApplicable => "not-applicable",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ViolationReport {
    pub observer: Party,
    pub stage: Stage,
    pub classification: Classification,
    /// Setting variables that had to be posited, each tagged counterfactual
    /// in the inquiries.
    pub counterfactual: Vec<String>,
    /// The distant setting, when it is among the posited ones.
    pub offending: Option<String>,
    /// Rendered ledgers of the inquiries the evaluation needs.
    pub inquiries: Vec<String>,
    pub s_analytic: f64,
    pub s_estimate: Option<ChshEstimate>,
    /// `|S| > 2` for an evaluation that can form a CHSH sum at all.
    pub violates: bool,
}

/// Classifies a CHSH evaluation by `observer` at `stage` across `traces`.
///
/// A setting variable still free in the observer's ledger at that stage
/// can only be posited. If the distant setting is among them the
/// evaluation is counterfactual-nonlocal.
pub fn classify_violation(
    traces: &[RunTrace],
    observer: Party,
    stage: Stage,
    behavior: &Behavior,
    chsh: &ChshSettings,
    estimate: Option<&ChshEstimate>,
) -> Result<ViolationReport, HarnessError> {
    if traces.is_empty() {
        return Err(HarnessError::StageNotInTrace(stage));
    }
    let local = observer.setting_var();
    let remote = observer.other().setting_var();
    let mut posited: Vec<String> = Vec::new();
    let mut factual_pairs: Vec<(Value, Value)> = Vec::new();
    let mut inquiries: Vec<String> = Vec::new();

    for t in traces {
        let s = t.snapshot(observer, stage).ok_or(HarnessError::StageNotInTrace(stage))?;
        let ledger = s.ledger();
        for v in [local, remote] {
            if s.known_value(v).is_none() && !posited.iter().any(|p| p == v) {
                posited.push(v.into());
            }
        }
        let known = |p: Party| s.known_value(p.setting_var());
        if let (Some(x), Some(y)) = (known(Party::Alice), known(Party::Bob)) {
            if !factual_pairs.contains(&(x.clone(), y.clone())) {
                factual_pairs.push((x, y));
            }
        }
        let targets: Vec<&str> = [Party::Alice.outcome_var(), Party::Bob.outcome_var()]
            .into_iter()
            .filter(|v| ledger.is_free(v) && s.known_value(v).is_none())
            .collect();
        if targets.is_empty() {
            continue;
        }
        for (x, y) in chsh.pairs() {
            let mut posits: Vec<(&str, Value)> = Vec::new();
            let mut consistent = true;
            for (var, val) in [(Party::Alice.setting_var(), x.value()), (Party::Bob.setting_var(), y.value())] {
                match s.known_value(var) {
                    None => posits.push((var, val)),
                    Some(k) if k != val => consistent = false,
                    Some(_) => {}
                }
            }
            if !consistent {
                continue;
            }
            let r = s.inquire(&targets, &posits)?.render();
            if !inquiries.contains(&r) {
                inquiries.push(r);
            }
        }
    }

    let covered = chsh.pairs().iter().all(|(x, y)| factual_pairs.contains(&(x.value(), y.value())));
    let (classification, offending) = if posited.iter().any(|p| p == remote) {
        (Classification::CounterfactualNonlocal, Some(String::from(remote)))
    } else if !posited.is_empty() {
        (Classification::CounterfactualLocal, None)
    } else if covered {
        (Classification::FactualLocal, None)
    } else {
        (Classification::NotApplicable, None)
    };
    let s_analytic = chsh_value(behavior, chsh)?;
    let s_for_bound = match (classification, estimate) {
        (Classification::FactualLocal, Some(e)) => e.s,
        _ => s_analytic,
    };
    Ok(ViolationReport {
        observer,
        stage,
        classification,
        counterfactual: posited,
        offending,
        inquiries,
        s_analytic,
        s_estimate: estimate.copied(),
        violates: classification != Classification::NotApplicable && libm::fabs(s_for_bound) > 2.0 + FACET_TOL,
    })
}
