//! LTLf abstract syntax.
//!
//! Formulas are immutable, reference counted trees with a cached structural
//! hash. Equality, hashing and ordering are structural, so two independently
//! built copies of the same subtree compare equal and collapse in sets. The
//! `and`/`or` constructors order their children canonically, which makes
//! `a & b` and `b & a` the same value.

mod normal;
mod parser;
mod trace;

pub use normal::{to_nnf, to_tnf, NormalFormError};
pub use parser::{parse, ParseError};
pub use trace::{FiniteTrace, TraceError};

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Name of the reserved atom marking the last position of a trace.
pub const TAIL: &str = "Tail";

/// Keywords that can never be used as atom names.
pub const KEYWORDS: [&str; 8] = ["true", "false", "X", "N", "U", "R", "G", "F"];

#[derive(Clone)]
pub struct Formula(Arc<Node>);

struct Node {
    kind: Kind,
    hash: u64,
    size: usize,
}

#[derive(Clone, PartialEq, Eq)]
pub enum Kind {
    True,
    False,
    Atom(Arc<str>),
    Not(Formula),
    And(Formula, Formula),
    Or(Formula, Formula),
    Next(Formula),
    WeakNext(Formula),
    Until(Formula, Formula),
    Release(Formula, Formula),
}

impl Kind {
    fn tag(&self) -> u8 {
        match self {
            Kind::True => 0,
            Kind::False => 1,
            Kind::Atom(_) => 2,
            Kind::Not(_) => 3,
            Kind::And(..) => 4,
            Kind::Or(..) => 5,
            Kind::Next(_) => 6,
            Kind::WeakNext(_) => 7,
            Kind::Until(..) => 8,
            Kind::Release(..) => 9,
        }
    }
}

// FNV-1a over the tag, atom bytes and child hashes. Fixed constants keep the
// hash (and therefore the canonical order) identical across runs and platforms.
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl Formula {
    fn mk(kind: Kind) -> Formula {
        let mut h = fnv(FNV_OFFSET, &[kind.tag()]);
        let mut size = 1;
        match &kind {
            Kind::True | Kind::False => {}
            Kind::Atom(name) => h = fnv(h, name.as_bytes()),
            Kind::Not(a) | Kind::Next(a) | Kind::WeakNext(a) => {
                h = fnv(h, &a.0.hash.to_le_bytes());
                size += a.0.size;
            }
            Kind::And(a, b) | Kind::Or(a, b) | Kind::Until(a, b) | Kind::Release(a, b) => {
                h = fnv(h, &a.0.hash.to_le_bytes());
                h = fnv(h, &b.0.hash.to_le_bytes());
                size += a.0.size + b.0.size;
            }
        }
        Formula(Arc::new(Node { kind, hash: h, size }))
    }

    pub fn tt() -> Formula {
        Formula::mk(Kind::True)
    }

    pub fn ff() -> Formula {
        Formula::mk(Kind::False)
    }

    pub fn atom(name: &str) -> Formula {
        Formula::mk(Kind::Atom(Arc::from(name)))
    }

    pub fn tail() -> Formula {
        Formula::atom(TAIL)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::mk(Kind::Not(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        let (a, b) = if b < a { (b, a) } else { (a, b) };
        Formula::mk(Kind::And(a, b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        let (a, b) = if b < a { (b, a) } else { (a, b) };
        Formula::mk(Kind::Or(a, b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::mk(Kind::Next(f))
    }

    pub fn weak_next(f: Formula) -> Formula {
        Formula::mk(Kind::WeakNext(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::mk(Kind::Until(a, b))
    }

    pub fn release(a: Formula, b: Formula) -> Formula {
        Formula::mk(Kind::Release(a, b))
    }

    /// `G f`, i.e. `false R f`.
    pub fn globally(f: Formula) -> Formula {
        Formula::release(Formula::ff(), f)
    }

    /// `F f`, i.e. `true U f`.
    pub fn eventually(f: Formula) -> Formula {
        Formula::until(Formula::tt(), f)
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(Formula::not(a), b)
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::and(
            Formula::implies(a.clone(), b.clone()),
            Formula::implies(b, a),
        )
    }

    /// Conjunction of all formulas, `true` for an empty iterator.
    pub fn conjunction<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or_else(Formula::tt)
    }

    /// Disjunction of all formulas, `false` for an empty iterator.
    pub fn disjunction<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or_else(Formula::ff)
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Number of AST nodes (shared subtrees counted once per occurrence).
    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn atom_name(&self) -> Option<&str> {
        match self.kind() {
            Kind::Atom(name) => Some(name),
            _ => None,
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self.kind(), Kind::Atom(_))
    }

    /// An atom or a negated atom.
    pub fn is_literal(&self) -> bool {
        match self.kind() {
            Kind::Atom(_) => true,
            Kind::Not(a) => a.is_atom(),
            _ => false,
        }
    }

    pub fn is_tail(&self) -> bool {
        self.atom_name() == Some(TAIL)
    }

    /// Direct children, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        match self.kind() {
            Kind::True | Kind::False | Kind::Atom(_) => vec![],
            Kind::Not(a) | Kind::Next(a) | Kind::WeakNext(a) => vec![a],
            Kind::And(a, b) | Kind::Or(a, b) | Kind::Until(a, b) | Kind::Release(a, b) => {
                vec![a, b]
            }
        }
    }

    /// Operands of the top-level conjunction chain, left to right. A formula
    /// that is not a conjunction is its own single conjunct.
    pub fn conjuncts(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f.kind() {
                Kind::And(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                _ => out.push(f.clone()),
            }
        }
        out
    }

    /// Negation only directly above atoms.
    pub fn is_nnf(&self) -> bool {
        match self.kind() {
            Kind::Not(a) => a.is_atom(),
            _ => self.children().into_iter().all(Formula::is_nnf),
        }
    }

    pub fn contains_weak_next(&self) -> bool {
        match self.kind() {
            Kind::WeakNext(_) => true,
            _ => self.children().into_iter().any(Formula::contains_weak_next),
        }
    }

    /// NNF and free of weak next.
    pub fn is_tnf(&self) -> bool {
        self.is_nnf() && !self.contains_weak_next()
    }

    pub fn mentions_tail(&self) -> bool {
        self.atoms().iter().any(|a| a == TAIL)
    }

    /// Names of all atoms occurring in the formula, sorted.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            if let Kind::Atom(name) = f.kind() {
                out.insert(name.to_string());
            }
            stack.extend(f.children());
        }
        out
    }

    /// Subtrees in post order with duplicates removed; every formula appears
    /// after all of its children.
    pub fn subformulas_postorder(&self) -> Vec<Formula> {
        fn go(f: &Formula, seen: &mut std::collections::HashSet<Formula>, out: &mut Vec<Formula>) {
            if seen.contains(f) {
                return;
            }
            for c in f.children() {
                go(c, seen, out);
            }
            seen.insert(f.clone());
            out.push(f.clone());
        }
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        go(self, &mut seen, &mut out);
        out
    }
}

/// The set of all subformulas of `f`, including `f` itself.
pub fn closure(f: &Formula) -> BTreeSet<Formula> {
    f.subformulas_postorder().into_iter().collect()
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash
                && self.0.size == other.0.size
                && self.0.kind == other.0.kind)
    }
}

impl Eq for Formula {}

impl Hash for Formula {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl Ord for Formula {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0
            .hash
            .cmp(&other.0.hash)
            .then_with(|| structural_cmp(self, other))
    }
}

impl PartialOrd for Formula {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn structural_cmp(a: &Formula, b: &Formula) -> Ordering {
    let ka = a.kind();
    let kb = b.kind();
    ka.tag().cmp(&kb.tag()).then_with(|| match (ka, kb) {
        (Kind::Atom(x), Kind::Atom(y)) => x.cmp(y),
        _ => {
            for (x, y) in a.children().into_iter().zip(b.children()) {
                let o = x.cmp(y);
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        }
    })
}

/// Fully parenthesized rendering that [`parse`] reads back to an equal formula.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::True => write!(f, "true"),
            Kind::False => write!(f, "false"),
            Kind::Atom(name) => write!(f, "{name}"),
            Kind::Not(a) => write!(f, "! ({a})"),
            Kind::Next(a) => write!(f, "X ({a})"),
            Kind::WeakNext(a) => write!(f, "N ({a})"),
            Kind::And(a, b) => write!(f, "({a}) & ({b})"),
            Kind::Or(a, b) => write!(f, "({a}) | ({b})"),
            Kind::Until(a, b) => write!(f, "({a}) U ({b})"),
            Kind::Release(a, b) => write!(f, "({a}) R ({b})"),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub fn render(f: &Formula) -> String {
    f.to_string()
}
