//! Negation normal form and the tail normal form rewrite.

use super::{Formula, Kind, TAIL};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalFormError {
    #[error("the atom `{TAIL}` is reserved; use raw TNF mode to supply it directly")]
    ReservedTail,
    #[error("formula is not in negation normal form: {0}")]
    NotNnf(Formula),
}

/// Pushes negations down to the atoms using the finite-trace dualities
/// `!X f = N !f`, `!(a U b) = !a R !b` and De Morgan.
pub fn to_nnf(f: &Formula) -> Formula {
    fn go(f: &Formula, neg: bool, memo: &mut HashMap<(Formula, bool), Formula>) -> Formula {
        if let Some(r) = memo.get(&(f.clone(), neg)) {
            return r.clone();
        }
        let r = match f.kind() {
            Kind::True if neg => Formula::ff(),
            Kind::False if neg => Formula::tt(),
            Kind::True | Kind::False => f.clone(),
            Kind::Atom(_) if neg => Formula::not(f.clone()),
            Kind::Atom(_) => f.clone(),
            Kind::Not(a) => go(a, !neg, memo),
            Kind::And(a, b) => {
                let (a, b) = (go(a, neg, memo), go(b, neg, memo));
                if neg {
                    Formula::or(a, b)
                } else {
                    Formula::and(a, b)
                }
            }
            Kind::Or(a, b) => {
                let (a, b) = (go(a, neg, memo), go(b, neg, memo));
                if neg {
                    Formula::and(a, b)
                } else {
                    Formula::or(a, b)
                }
            }
            Kind::Next(a) => {
                let a = go(a, neg, memo);
                if neg {
                    Formula::weak_next(a)
                } else {
                    Formula::next(a)
                }
            }
            Kind::WeakNext(a) => {
                let a = go(a, neg, memo);
                if neg {
                    Formula::next(a)
                } else {
                    Formula::weak_next(a)
                }
            }
            Kind::Until(a, b) => {
                let (a, b) = (go(a, neg, memo), go(b, neg, memo));
                if neg {
                    Formula::release(a, b)
                } else {
                    Formula::until(a, b)
                }
            }
            Kind::Release(a, b) => {
                let (a, b) = (go(a, neg, memo), go(b, neg, memo));
                if neg {
                    Formula::until(a, b)
                } else {
                    Formula::release(a, b)
                }
            }
        };
        memo.insert((f.clone(), neg), r.clone());
        r
    }
    go(f, false, &mut HashMap::new())
}

/// Rewrites an NNF formula into tail normal form `t(f) & F Tail`, where
/// `t` guards every strong next and every until step with `!Tail`, turns
/// weak next into `Tail | X`, and lets releases discharge at `Tail`.
///
/// The result is equisatisfiable with `f`: a trace satisfies `f` exactly
/// when the same trace with `Tail` added to its last position satisfies the
/// result.
pub fn to_tnf(f: &Formula) -> Result<Formula, NormalFormError> {
    if !f.is_nnf() {
        return Err(NormalFormError::NotNnf(f.clone()));
    }
    if f.mentions_tail() {
        return Err(NormalFormError::ReservedTail);
    }
    fn t(f: &Formula, memo: &mut HashMap<Formula, Formula>) -> Formula {
        if let Some(r) = memo.get(f) {
            return r.clone();
        }
        let not_tail = || Formula::not(Formula::tail());
        let r = match f.kind() {
            Kind::True | Kind::False | Kind::Atom(_) | Kind::Not(_) => f.clone(),
            Kind::Next(a) => Formula::and(not_tail(), Formula::next(t(a, memo))),
            Kind::WeakNext(a) => Formula::or(Formula::tail(), Formula::next(t(a, memo))),
            Kind::And(a, b) => Formula::and(t(a, memo), t(b, memo)),
            Kind::Or(a, b) => Formula::or(t(a, memo), t(b, memo)),
            Kind::Until(a, b) => {
                Formula::until(Formula::and(not_tail(), t(a, memo)), t(b, memo))
            }
            Kind::Release(a, b) => {
                Formula::release(Formula::or(Formula::tail(), t(a, memo)), t(b, memo))
            }
        };
        memo.insert(f.clone(), r.clone());
        r
    }
    let body = t(f, &mut HashMap::new());
    Ok(Formula::and(body, Formula::eventually(Formula::tail())))
}
