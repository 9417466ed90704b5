//! Finite discrete probability with modality-tagged conditioning.
//!
//! A [`TaggedJoint`] is a normalized table over some free [`Variable`]s,
//! together with the assignments it is conditioned on. Each conditioning
//! slot carries a [`Modality`]: factual (locally known) or counterfactual
//! (posited). The tag never changes a number, only how the table renders
//! and how downstream code classifies it.

use alloc::borrow::Cow;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::angle::Angle;

mod conditional;
mod factorize;
mod joint;

pub use conditional::{bayes_invert, product, ConditionalTable};
pub use factorize::{enumerate_factorizations, Factorization, FactorizationKind};
pub use joint::TaggedJoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("impossible evidence: {variable} = {value} has probability zero")]
    ImpossibleEvidence { variable: String, value: String },
    #[error("variable {0} is not free in this distribution")]
    NotFree(String),
    #[error("value {value} is not in the domain of {variable}")]
    ValueOutOfDomain { variable: String, value: String },
    #[error("variable {0} appears more than once")]
    DuplicateVariable(String),
    #[error("invalid variable {name}: {reason}")]
    InvalidVariable { name: String, reason: &'static str },
    #[error("table has {got} entries, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("negative probability {0}")]
    Negative(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("variable mismatch: {0}")]
    VariableMismatch(String),
}

/// A value in a variable's domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Value {
    Int(i64),
    Angle(Angle),
    Label(Cow<'static, str>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Angle(a) => write!(f, "{a}"),
            Value::Label(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<Angle> for Value {
    fn from(a: Angle) -> Self {
        Value::Angle(a)
    }
}

#[derive(Debug, PartialEq)]
struct VarDef {
    name: String,
    domain: Vec<Value>,
}

/// A named variable over an ordered, finite domain.
///
/// Cheap to clone. The domain order is fixed and is the tie-break order for
/// argmax queries.
#[derive(Clone)]
pub struct Variable(Arc<VarDef>);

impl Variable {
    pub fn new(name: impl Into<String>, domain: Vec<Value>) -> Result<Self, ProbError> {
        let name = name.into();
        if domain.is_empty() {
            return Err(ProbError::InvalidVariable { name, reason: "empty domain" });
        }
        for (i, v) in domain.iter().enumerate() {
            if domain[..i].contains(v) {
                return Err(ProbError::InvalidVariable { name, reason: "repeated domain value" });
            }
        }
        Ok(Variable(Arc::new(VarDef { name, domain })))
    }

    /// A singleton variable whose only value is its own name. Used for the
    /// prepared state and stage labels.
    pub fn label(name: impl Into<Cow<'static, str>>) -> Self {
        let label = name.into();
        let name = String::from(&*label);
        let domain = alloc::vec![Value::Label(label)];
        Variable(Arc::new(VarDef { name, domain }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn domain(&self) -> &[Value] {
        &self.0.domain
    }

    pub fn len(&self) -> usize {
        self.0.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, value: &Value) -> Option<usize> {
        self.0.domain.iter().position(|v| v == value)
    }

    pub(crate) fn require_index(&self, value: &Value) -> Result<usize, ProbError> {
        self.index_of(value).ok_or_else(|| ProbError::ValueOutOfDomain {
            variable: self.name().into(),
            value: alloc::format!("{value}"),
        })
    }
}

impl PartialEq for Variable {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.0.name, self.0.domain)
    }
}

/// Whether a conditioning proposition is locally known or only posited.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Modality {
    Factual,
    Counterfactual,
}

/// One conditioning slot: `variable = value`, tagged.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioner {
    pub variable: Variable,
    pub value: Value,
    pub modality: Modality,
}

impl Conditioner {
    pub fn new(variable: Variable, value: Value, modality: Modality) -> Result<Self, ProbError> {
        variable.require_index(&value)?;
        Ok(Conditioner { variable, value, modality })
    }

    /// Factual conditioner on a singleton label variable.
    pub fn context(name: impl Into<Cow<'static, str>>) -> Self {
        let variable = Variable::label(name);
        let value = variable.domain()[0].clone();
        Conditioner { variable, value, modality: Modality::Factual }
    }
}

/// Row-major strides for a list of variables (last variable fastest).
pub(crate) fn strides(vars: &[Variable]) -> Vec<usize> {
    let mut s = alloc::vec![1usize; vars.len()];
    for k in (0..vars.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * vars[k + 1].len();
    }
    s
}

pub(crate) fn table_size(vars: &[Variable]) -> usize {
    vars.iter().map(Variable::len).product()
}

/// Decode a flat index into per-variable domain indices.
pub(crate) fn digits(flat: usize, vars: &[Variable], out: &mut [usize]) {
    let mut rem = flat;
    for k in (0..vars.len()).rev() {
        let n = vars[k].len();
        out[k] = rem % n;
        rem /= n;
    }
}
