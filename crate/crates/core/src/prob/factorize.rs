//! Product-rule representations of a joint distribution.

use alloc::string::String;
use alloc::vec::Vec;

use super::{product, ProbError};
use crate::prob::TaggedJoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorizationKind {
    /// One variable per factor: `n!` orderings.
    Chains,
    /// Any ordered partition of the variables into blocks (chains included,
    /// as is the single-block joint itself).
    OrderedBlocks,
}

/// `p(B1 | B2..Bk) p(B2 | B3..Bk) ... p(Bk)` for blocks `B1..Bk`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    blocks: Vec<Vec<String>>,
}

impl Factorization {
    pub fn new(blocks: Vec<Vec<String>>) -> Self {
        Factorization { blocks }
    }

    pub fn blocks(&self) -> &[Vec<String>] {
        &self.blocks
    }

    pub fn is_chain(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Rebuilds the joint from the factors this descriptor names, each
    /// computed from `d`.
    pub fn remultiply(&self, d: &TaggedJoint) -> Result<TaggedJoint, ProbError> {
        let Some(last) = self.blocks.last() else {
            return Ok(d.clone());
        };
        let names = |bs: &[Vec<String>]| -> Vec<String> { bs.iter().flatten().cloned().collect() };
        let mut acc = d.marginalize_to(&as_refs(last))?;
        for i in (0..self.blocks.len() - 1).rev() {
            let later = names(&self.blocks[i + 1..]);
            let scope = names(&self.blocks[i..]);
            let cond = d.marginalize_to(&as_refs(&scope))?.conditional_on(&as_refs(&later))?;
            acc = product(&cond, &acc)?;
        }
        Ok(acc)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, block) in self.blocks.iter().enumerate() {
            s.push_str("p(");
            s.push_str(&block.join(","));
            let later = names_after(&self.blocks, i);
            if !later.is_empty() {
                s.push('|');
                s.push_str(&later.join(","));
            }
            s.push(')');
        }
        s
    }
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn names_after(blocks: &[Vec<String>], i: usize) -> Vec<&str> {
    blocks[i + 1..].iter().flatten().map(String::as_str).collect()
}

/// Every factorization of `d`'s free variables of the requested kind, in a
/// fixed order.
pub fn enumerate_factorizations(d: &TaggedJoint, kind: FactorizationKind) -> Vec<Factorization> {
    let names: Vec<String> = d.free_names().map(String::from).collect();
    let n = names.len();
    let mut out = Vec::new();
    let mut current = Vec::new();
    let full = if n >= usize::BITS as usize { usize::MAX } else { (1usize << n) - 1 };
    ordered_partitions(full, kind, &names, &mut current, &mut out);
    out
}

fn ordered_partitions(
    remaining: usize,
    kind: FactorizationKind,
    names: &[String],
    current: &mut Vec<Vec<String>>,
    out: &mut Vec<Factorization>,
) {
    if remaining == 0 {
        out.push(Factorization { blocks: current.clone() });
        return;
    }
    // nonempty submasks of `remaining` in ascending order
    let mut sub = 0usize;
    loop {
        sub = sub.wrapping_sub(remaining) & remaining;
        if sub == 0 {
            break;
        }
        if kind == FactorizationKind::OrderedBlocks || sub.count_ones() == 1 {
            let block: Vec<String> = (0..names.len()).filter(|i| sub >> i & 1 == 1).map(|i| names[i].clone()).collect();
            current.push(block);
            ordered_partitions(remaining & !sub, kind, names, current, out);
            current.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Value, Variable};
    use alloc::vec;

    fn var(name: &str) -> Variable {
        Variable::new(name, vec![Value::Int(0), Value::Int(1)]).unwrap()
    }

    #[test]
    fn two_variable_chains() {
        let d = TaggedJoint::new("A", vec![var("a"), var("b")], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let fs = enumerate_factorizations(&d, FactorizationKind::Chains);
        let rendered: Vec<String> = fs.iter().map(Factorization::render).collect();
        assert_eq!(rendered, vec!["p(a|b)p(b)", "p(b|a)p(a)"]);
        for f in &fs {
            assert!(f.remultiply(&d).unwrap().values_close(&d, 1e-12));
        }
        let blocks = enumerate_factorizations(&d, FactorizationKind::OrderedBlocks);
        assert_eq!(blocks.len(), 3);
    }
}
