use alloc::borrow::Cow;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{digits, strides, table_size, Conditioner, Modality, ProbError, Value, Variable};
use crate::NORM_TOL;

/// A normalized joint table over free variables, conditioned on tagged
/// assignments.
///
/// Evidence conditioners are kept most recent first. Context conditioners
/// (the prepared state, stage labels) are kept separately and always render
/// after the evidence of the same modality.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedJoint {
    owner: Cow<'static, str>,
    free: Vec<Variable>,
    probs: Vec<f64>,
    evidence: Vec<Conditioner>,
    context: Vec<Conditioner>,
}

impl TaggedJoint {
    /// Builds a table from row-major probabilities (last variable fastest).
    pub fn new(owner: impl Into<Cow<'static, str>>, free: Vec<Variable>, probs: Vec<f64>) -> Result<Self, ProbError> {
        for (i, v) in free.iter().enumerate() {
            if free[..i].iter().any(|w| w.name() == v.name()) {
                return Err(ProbError::DuplicateVariable(v.name().into()));
            }
        }
        let expected = table_size(&free);
        if probs.len() != expected {
            return Err(ProbError::ShapeMismatch { expected, got: probs.len() });
        }
        if let Some(&p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(ProbError::Negative(p));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(ProbError::NotNormalized(total));
        }
        Ok(TaggedJoint { owner: owner.into(), free, probs, evidence: Vec::new(), context: Vec::new() })
    }

    /// Builds a table from a weight function over domain indices, normalizing
    /// the weights.
    pub fn from_weights(
        owner: impl Into<Cow<'static, str>>,
        free: Vec<Variable>,
        mut weight: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self, ProbError> {
        let n = table_size(&free);
        let mut d = alloc::vec![0usize; free.len()];
        let mut probs = Vec::with_capacity(n);
        for flat in 0..n {
            digits(flat, &free, &mut d);
            probs.push(weight(&d));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(ProbError::NotNormalized(total));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(owner, free, probs)
    }

    pub fn uniform(owner: impl Into<Cow<'static, str>>, free: Vec<Variable>) -> Result<Self, ProbError> {
        Self::from_weights(owner, free, |_| 1.0)
    }

    pub(crate) fn from_parts_unchecked(
        owner: Cow<'static, str>,
        free: Vec<Variable>,
        probs: Vec<f64>,
        evidence: Vec<Conditioner>,
        context: Vec<Conditioner>,
    ) -> Self {
        debug_assert_eq!(probs.len(), table_size(&free));
        TaggedJoint { owner, free, probs, evidence, context }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub(crate) fn set_context_slot(&mut self, i: usize, c: Conditioner) {
        self.context[i] = c;
    }

    pub(crate) fn owner_label(&self) -> Cow<'static, str> {
        self.owner.clone()
    }

    pub fn with_owner(mut self, owner: impl Into<Cow<'static, str>>) -> Self {
        self.owner = owner.into();
        self
    }

    pub fn free(&self) -> &[Variable] {
        &self.free
    }

    pub fn free_names(&self) -> impl Iterator<Item = &str> {
        self.free.iter().map(Variable::name)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn evidence(&self) -> &[Conditioner] {
        &self.evidence
    }

    pub fn context(&self) -> &[Conditioner] {
        &self.context
    }

    /// Evidence then context.
    pub fn conditioners(&self) -> impl Iterator<Item = &Conditioner> {
        self.evidence.iter().chain(self.context.iter())
    }

    pub fn with_context(mut self, context: Vec<Conditioner>) -> Self {
        self.context = context;
        self
    }

    /// Replaces the evidence list. Intended for building report objects;
    /// the table itself is not touched.
    pub fn with_evidence(mut self, evidence: Vec<Conditioner>) -> Self {
        self.evidence = evidence;
        self
    }

    pub fn free_index(&self, name: &str) -> Option<usize> {
        self.free.iter().position(|v| v.name() == name)
    }

    pub fn is_free(&self, name: &str) -> bool {
        self.free_index(name).is_some()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.free
            .iter()
            .find(|v| v.name() == name)
            .or_else(|| self.conditioners().map(|c| &c.variable).find(|v| v.name() == name))
    }

    pub fn conditioner(&self, name: &str) -> Option<&Conditioner> {
        self.conditioners().find(|c| c.variable.name() == name)
    }

    fn require_free(&self, name: &str) -> Result<usize, ProbError> {
        self.free_index(name).ok_or_else(|| ProbError::NotFree(name.into()))
    }

    /// `(outer, size, inner)` block sizes around free variable `k`.
    fn blocks(&self, k: usize) -> (usize, usize, usize) {
        let inner = strides(&self.free)[k];
        let size = self.free[k].len();
        (self.probs.len() / (size * inner), size, inner)
    }

    /// Marginal probability that free variable `name` takes `value`.
    pub fn marginal_mass(&self, name: &str, value: &Value) -> Result<f64, ProbError> {
        let k = self.require_free(name)?;
        let vi = self.free[k].require_index(value)?;
        let (outer, size, inner) = self.blocks(k);
        let mut mass = 0.0;
        for o in 0..outer {
            let base = (o * size + vi) * inner;
            mass += self.probs[base..base + inner].iter().sum::<f64>();
        }
        Ok(mass)
    }

    /// Marginal distribution of one free variable, in domain order.
    pub fn marginal(&self, name: &str) -> Result<Vec<f64>, ProbError> {
        let k = self.require_free(name)?;
        self.free[k].domain().iter().map(|v| self.marginal_mass(name, v)).collect()
    }

    /// Conditions on `name = value`. The variable moves to the conditioners
    /// with tag `modality`; the remaining table is `p(rest | name = value)`.
    pub fn condition(&self, name: &str, value: &Value, modality: Modality) -> Result<Self, ProbError> {
        let k = self.require_free(name)?;
        let vi = self.free[k].require_index(value)?;
        let (outer, size, inner) = self.blocks(k);
        let mut probs = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * size + vi) * inner;
            probs.extend_from_slice(&self.probs[base..base + inner]);
        }
        let mass: f64 = probs.iter().sum();
        if !(mass > 0.0) {
            return Err(ProbError::ImpossibleEvidence { variable: name.into(), value: alloc::format!("{value}") });
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        let mut free = self.free.clone();
        let variable = free.remove(k);
        let mut evidence = Vec::with_capacity(self.evidence.len() + 1);
        evidence.push(Conditioner { variable, value: value.clone(), modality });
        evidence.extend(self.evidence.iter().cloned());
        Ok(TaggedJoint { owner: self.owner.clone(), free, probs, evidence, context: self.context.clone() })
    }

    /// Sums `name` out of the table.
    pub fn marginalize(&self, name: &str) -> Result<Self, ProbError> {
        let k = self.require_free(name)?;
        let (outer, size, inner) = self.blocks(k);
        let mut probs = alloc::vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut acc = 0.0;
                for v in 0..size {
                    acc += self.probs[(o * size + v) * inner + i];
                }
                probs[o * inner + i] = acc;
            }
        }
        let mut free = self.free.clone();
        free.remove(k);
        Ok(TaggedJoint {
            owner: self.owner.clone(),
            free,
            probs,
            evidence: self.evidence.clone(),
            context: self.context.clone(),
        })
    }

    /// Marginalizes every free variable not in `keep`, then orders the
    /// remaining variables as in `keep`.
    pub fn marginalize_to(&self, keep: &[&str]) -> Result<Self, ProbError> {
        for name in keep {
            self.require_free(name)?;
        }
        let mut out = self.clone();
        let drop: Vec<String> = self.free_names().filter(|n| !keep.contains(n)).map(String::from).collect();
        for name in &drop {
            out = out.marginalize(name)?;
        }
        out.reorder(keep)
    }

    /// Permutes the free variables into `order` (which must name each free
    /// variable exactly once).
    pub fn reorder(&self, order: &[&str]) -> Result<Self, ProbError> {
        if order.len() != self.free.len() {
            return Err(ProbError::VariableMismatch(alloc::format!(
                "reorder lists {} variables, table has {}",
                order.len(),
                self.free.len()
            )));
        }
        let perm: Vec<usize> = order.iter().map(|n| self.require_free(n)).collect::<Result<_, _>>()?;
        let free: Vec<Variable> = perm.iter().map(|&k| self.free[k].clone()).collect();
        let old_strides = strides(&self.free);
        let mut d = alloc::vec![0usize; free.len()];
        let probs = (0..self.probs.len())
            .map(|flat| {
                digits(flat, &free, &mut d);
                let old: usize = perm.iter().zip(&d).map(|(&k, &di)| old_strides[k] * di).sum();
                self.probs[old]
            })
            .collect();
        Ok(TaggedJoint {
            owner: self.owner.clone(),
            free,
            probs,
            evidence: self.evidence.clone(),
            context: self.context.clone(),
        })
    }

    /// Entry at per-variable domain indices.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let s = strides(&self.free);
        self.probs[idx.iter().zip(&s).map(|(i, s)| i * s).sum::<usize>()]
    }

    /// Probability of a full assignment of the free variables, given by name.
    pub fn prob(&self, assignment: &[(&str, &Value)]) -> Result<f64, ProbError> {
        if assignment.len() != self.free.len() {
            return Err(ProbError::VariableMismatch(alloc::format!(
                "assignment covers {} of {} free variables",
                assignment.len(),
                self.free.len()
            )));
        }
        let mut idx = alloc::vec![0usize; self.free.len()];
        for (name, value) in assignment {
            let k = self.require_free(name)?;
            idx[k] = self.free[k].require_index(value)?;
        }
        Ok(self.get(&idx))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Most probable full assignment; ties go to the lowest flat index, which
    /// is the lowest index in each variable's domain order.
    pub fn argmax(&self) -> Vec<(Variable, Value)> {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        let mut d = alloc::vec![0usize; self.free.len()];
        digits(best, &self.free, &mut d);
        self.free.iter().zip(d).map(|(v, i)| (v.clone(), v.domain()[i].clone())).collect()
    }

    /// Entrywise comparison after aligning free variables by name. False if
    /// the free variable sets or domains differ.
    pub fn values_close(&self, other: &Self, tol: f64) -> bool {
        if self.free.len() != other.free.len() {
            return false;
        }
        let mut perm = Vec::with_capacity(self.free.len());
        for v in &self.free {
            match other.free.iter().position(|w| w.name() == v.name()) {
                Some(j) if other.free[j] == *v => perm.push(j),
                _ => return false,
            }
        }
        let os = strides(&other.free);
        let mut d = alloc::vec![0usize; self.free.len()];
        self.probs.iter().enumerate().all(|(flat, p)| {
            digits(flat, &self.free, &mut d);
            let j: usize = perm.iter().zip(&d).map(|(&k, &di)| os[k] * di).sum();
            (p - other.probs[j]).abs() <= tol
        })
    }

    /// Same set of conditioning assignments, ignoring order and modality.
    pub fn same_conditioning(&self, other: &Self) -> bool {
        let a: Vec<&Conditioner> = self.conditioners().collect();
        let b: Vec<&Conditioner> = other.conditioners().collect();
        a.len() == b.len()
            && a.iter().all(|c| b.iter().any(|d| d.variable.name() == c.variable.name() && d.value == c.value))
    }

    /// Equal as distributions: same conditioning and entrywise equal tables.
    /// The owner label is ignored.
    pub fn equivalent(&self, other: &Self, tol: f64) -> bool {
        self.same_conditioning(other) && self.values_close(other, tol)
    }

    /// Text form `P_<owner>(<free>|<counterfactual>|<factual>)`.
    ///
    /// With no counterfactual slots the two bars collapse to `‖`; with no
    /// conditioners at all the bars are omitted.
    pub fn render(&self) -> String {
        let mut s = String::from("P");
        if !self.owner.is_empty() {
            s.push('_');
            s.push_str(&self.owner);
        }
        s.push('(');
        push_joined(&mut s, self.free.iter().map(Variable::name));
        let by = |m: Modality| {
            self.evidence.iter().chain(self.context.iter()).filter(move |c| c.modality == m).map(|c| c.variable.name())
        };
        let cf: Vec<&str> = by(Modality::Counterfactual).collect();
        let fact: Vec<&str> = by(Modality::Factual).collect();
        if cf.is_empty() && !fact.is_empty() {
            s.push('‖');
            push_joined(&mut s, fact.into_iter());
        } else if !cf.is_empty() {
            s.push('|');
            push_joined(&mut s, cf.into_iter());
            s.push('|');
            push_joined(&mut s, fact.into_iter());
        }
        s.push(')');
        s
    }
}

fn push_joined<'a>(s: &mut String, items: impl Iterator<Item = &'a str>) {
    for (i, item) in items.enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(item);
    }
}

impl fmt::Display for TaggedJoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
