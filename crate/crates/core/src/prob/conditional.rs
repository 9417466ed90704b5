use alloc::vec::Vec;

use super::{table_size, Conditioner, Modality, ProbError, Value, Variable};
use crate::prob::TaggedJoint;
use crate::NORM_TOL;

/// A conditional table `p(targets | given)`, stored given-major: row `g`
/// holds the target distribution for the `g`-th given assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalTable {
    targets: Vec<Variable>,
    given: Vec<Variable>,
    rows: Vec<f64>,
    defined: Vec<bool>,
}

impl ConditionalTable {
    pub fn new(targets: Vec<Variable>, given: Vec<Variable>, rows: Vec<f64>) -> Result<Self, ProbError> {
        let nt = table_size(&targets);
        let ng = table_size(&given);
        if rows.len() != nt * ng {
            return Err(ProbError::ShapeMismatch { expected: nt * ng, got: rows.len() });
        }
        for (i, v) in targets.iter().chain(given.iter()).enumerate() {
            if targets.iter().chain(given.iter()).take(i).any(|w| w.name() == v.name()) {
                return Err(ProbError::DuplicateVariable(v.name().into()));
            }
        }
        if let Some(&p) = rows.iter().find(|p| !(**p >= 0.0)) {
            return Err(ProbError::Negative(p));
        }
        for row in rows.chunks(nt) {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > NORM_TOL {
                return Err(ProbError::NotNormalized(s));
            }
        }
        Ok(ConditionalTable { targets, given, rows, defined: alloc::vec![true; ng] })
    }

    pub fn targets(&self) -> &[Variable] {
        &self.targets
    }

    pub fn given(&self) -> &[Variable] {
        &self.given
    }

    /// Target distribution for the given assignment at flat index `g`.
    pub fn row(&self, g: usize) -> &[f64] {
        let nt = table_size(&self.targets);
        &self.rows[g * nt..(g + 1) * nt]
    }

    /// False for rows whose conditioning assignment had zero probability in
    /// the joint they came from. Such rows are filled uniformly.
    pub fn is_defined(&self, g: usize) -> bool {
        self.defined[g]
    }
}

impl TaggedJoint {
    /// `p(rest | given)` from this joint.
    pub fn conditional_on(&self, given: &[&str]) -> Result<ConditionalTable, ProbError> {
        let rest: Vec<&str> = self.free_names().filter(|n| !given.contains(n)).collect();
        let order: Vec<&str> = given.iter().copied().chain(rest.iter().copied()).collect();
        let r = self.reorder(&order)?;
        let (g_vars, t_vars) = r.free().split_at(given.len());
        let nt = table_size(t_vars);
        let mut rows = Vec::with_capacity(r.probs().len());
        let mut defined = Vec::with_capacity(table_size(g_vars));
        for chunk in r.probs().chunks(nt) {
            let m: f64 = chunk.iter().sum();
            if m > 0.0 {
                rows.extend(chunk.iter().map(|p| p / m));
                defined.push(true);
            } else {
                rows.extend(core::iter::repeat_n(1.0 / nt as f64, nt));
                defined.push(false);
            }
        }
        Ok(ConditionalTable { targets: t_vars.to_vec(), given: g_vars.to_vec(), rows, defined })
    }
}

fn same_variable_set(a: &[Variable], b: &[Variable]) -> bool {
    a.len() == b.len() && a.iter().all(|v| b.iter().any(|w| w == v))
}

/// Product rule: `p(targets | given) · p(given)` as a joint over
/// `targets ++ given`. The marginal's free variables must be exactly the
/// conditional's given variables; the result keeps the marginal's owner and
/// conditioners.
pub fn product(conditional: &ConditionalTable, marginal: &TaggedJoint) -> Result<TaggedJoint, ProbError> {
    if !same_variable_set(&conditional.given, marginal.free()) {
        return Err(ProbError::VariableMismatch(alloc::format!(
            "conditional is given {:?}, marginal is over {:?}",
            conditional.given.iter().map(Variable::name).collect::<Vec<_>>(),
            marginal.free_names().collect::<Vec<_>>()
        )));
    }
    let order: Vec<&str> = conditional.given.iter().map(Variable::name).collect();
    let m = marginal.reorder(&order)?;
    let nt = table_size(&conditional.targets);
    let ng = m.probs().len();
    let mut probs = alloc::vec![0.0; nt * ng];
    for (g, pg) in m.probs().iter().enumerate() {
        for (t, pt) in conditional.row(g).iter().enumerate() {
            probs[t * ng + g] = pt * pg;
        }
    }
    let free: Vec<Variable> = conditional.targets.iter().chain(conditional.given.iter()).cloned().collect();
    Ok(TaggedJoint::from_parts_unchecked(m.owner_label(), free, probs, m.evidence().to_vec(), m.context().to_vec()))
}

/// Bayes inversion: from a prior `p(a)` and likelihood `p(b|a)`, the
/// posterior `p(a | b = observed)`.
///
/// The likelihood must have exactly one target variable (`b`) and be given
/// exactly the prior's free variables.
pub fn bayes_invert(
    prior: &TaggedJoint,
    likelihood: &ConditionalTable,
    observed: &Value,
    modality: Modality,
) -> Result<TaggedJoint, ProbError> {
    let [target] = likelihood.targets() else {
        return Err(ProbError::VariableMismatch("likelihood must have a single target".into()));
    };
    if !same_variable_set(likelihood.given(), prior.free()) {
        return Err(ProbError::VariableMismatch(alloc::format!(
            "likelihood is given {:?}, prior is over {:?}",
            likelihood.given().iter().map(Variable::name).collect::<Vec<_>>(),
            prior.free_names().collect::<Vec<_>>()
        )));
    }
    let bi = target.require_index(observed)?;
    let order: Vec<&str> = likelihood.given().iter().map(Variable::name).collect();
    let p = prior.reorder(&order)?;
    let joint: Vec<f64> = p.probs().iter().enumerate().map(|(g, pa)| likelihood.row(g)[bi] * pa).collect();
    let pb: f64 = joint.iter().sum();
    if !(pb > 0.0) {
        return Err(ProbError::ImpossibleEvidence {
            variable: target.name().into(),
            value: alloc::format!("{observed}"),
        });
    }
    let probs = joint.into_iter().map(|x| x / pb).collect();
    let mut evidence = alloc::vec![Conditioner { variable: target.clone(), value: observed.clone(), modality }];
    evidence.extend(p.evidence().iter().cloned());
    Ok(TaggedJoint::from_parts_unchecked(p.owner_label(), p.free().to_vec(), probs, evidence, p.context().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pm(name: &str) -> Variable {
        Variable::new(name, vec![Value::Int(1), Value::Int(-1)]).unwrap()
    }

    #[test]
    fn deterministic_likelihood() {
        let prior = TaggedJoint::uniform("A", vec![pm("a")]).unwrap();
        // p(b=+|a=+) = 1, p(b=+|a=-) = 0
        let lik = ConditionalTable::new(vec![pm("b")], vec![pm("a")], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let post = bayes_invert(&prior, &lik, &Value::Int(1), Modality::Factual).unwrap();
        assert_eq!(post.probs(), &[1.0, 0.0]);
        assert_eq!(post.render(), "P_A(a‖b)");
    }

    #[test]
    fn independent_likelihood_leaves_prior() {
        let prior = TaggedJoint::new("A", vec![pm("a")], vec![0.5, 0.5]).unwrap();
        let lik = ConditionalTable::new(vec![pm("b")], vec![pm("a")], vec![0.3, 0.7, 0.3, 0.7]).unwrap();
        let post = bayes_invert(&prior, &lik, &Value::Int(-1), Modality::Factual).unwrap();
        assert_eq!(post.probs(), prior.probs());
    }

    #[test]
    fn zero_evidence_errors() {
        let prior = TaggedJoint::new("A", vec![pm("a")], vec![1.0, 0.0]).unwrap();
        let lik = ConditionalTable::new(vec![pm("b")], vec![pm("a")], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            bayes_invert(&prior, &lik, &Value::Int(-1), Modality::Factual),
            Err(ProbError::ImpossibleEvidence { .. })
        ));
    }

    #[test]
    fn product_checks_variables() {
        let cond = ConditionalTable::new(vec![pm("b")], vec![pm("a")], vec![0.5; 4]).unwrap();
        let wrong = TaggedJoint::uniform("A", vec![pm("c")]).unwrap();
        assert!(matches!(product(&cond, &wrong), Err(ProbError::VariableMismatch(_))));
        let right = TaggedJoint::new("A", vec![pm("a")], vec![0.25, 0.75]).unwrap();
        let j = product(&cond, &right).unwrap();
        assert_eq!(j.free_names().collect::<Vec<_>>(), vec!["b", "a"]);
        assert!((j.total() - 1.0).abs() < 1e-15);
        // independent conditional times uniform gives the product distribution
        assert_eq!(j.probs(), &[0.125, 0.375, 0.125, 0.375]);
    }

    #[test]
    fn conditional_rows_for_zero_mass_are_flagged() {
        let d = TaggedJoint::new("A", vec![pm("a"), pm("b")], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let c = d.conditional_on(&["a"]).unwrap();
        assert!(c.is_defined(0));
        assert!(!c.is_defined(1));
        assert_eq!(c.row(1), &[0.5, 0.5]);
        let back = product(&c, &d.marginalize("b").unwrap()).unwrap();
        assert!(back.values_close(&d, 1e-12));
    }

    #[test]
    fn rejects_unnormalized_rows() {
        assert!(ConditionalTable::new(vec![pm("b")], vec![pm("a")], vec![0.5, 0.4, 0.5, 0.5]).is_err());
    }
}
