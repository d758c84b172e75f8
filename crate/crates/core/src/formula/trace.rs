use super::TAIL;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("a trace needs at least one position")]
    Empty,
    #[error("line {line}: `{name}` is not a valid atom name")]
    BadAtom { line: usize, name: String },
}

/// A nonempty finite trace. Each position lists the atoms that hold there;
/// every other atom is false.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiniteTrace {
    positions: Vec<BTreeSet<String>>,
}

impl FiniteTrace {
    pub fn new(positions: Vec<BTreeSet<String>>) -> Result<Self, TraceError> {
        if positions.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(FiniteTrace { positions })
    }

    /// Convenience constructor from string slices, mostly for tests.
    pub fn from_slices(positions: &[&[&str]]) -> Result<Self, TraceError> {
        FiniteTrace::new(
            positions
                .iter()
                .map(|p| p.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn positions(&self) -> &[BTreeSet<String>] {
        &self.positions
    }

    pub fn holds(&self, i: usize, atom: &str) -> bool {
        self.positions[i].contains(atom)
    }

    /// The suffix starting at position `i` (`i < len`).
    pub fn suffix(&self, i: usize) -> FiniteTrace {
        FiniteTrace {
            positions: self.positions[i..].to_vec(),
        }
    }

    /// Same trace with `Tail` added to the last position only.
    pub fn with_tail_marker(&self) -> FiniteTrace {
        let mut positions = self.strip_tail().positions;
        positions.last_mut().unwrap().insert(TAIL.to_string());
        FiniteTrace { positions }
    }

    /// Same trace with `Tail` removed from every position.
    pub fn strip_tail(&self) -> FiniteTrace {
        FiniteTrace {
            positions: self
                .positions
                .iter()
                .map(|p| p.iter().filter(|a| *a != TAIL).cloned().collect())
                .collect(),
        }
    }

    pub fn mentions_tail(&self) -> bool {
        self.positions.iter().any(|p| p.contains(TAIL))
    }

    /// Reads the line format: one position per line, atoms separated by
    /// commas, an empty line for a position where nothing holds.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        let mut positions = Vec::with_capacity(lines.len());
        for (n, line) in lines.iter().enumerate() {
            let mut pos = BTreeSet::new();
            for name in line.trim_end_matches('\r').split(',') {
                let name = name.trim();
                if name.is_empty() {
                    continue;
                }
                let valid = name
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !valid {
                    return Err(TraceError::BadAtom {
                        line: n + 1,
                        name: name.to_string(),
                    });
                }
                pos.insert(name.to_string());
            }
            positions.push(pos);
        }
        FiniteTrace::new(positions)
    }
}

/// Writes the line format read by [`FiniteTrace::parse`].
impl fmt::Display for FiniteTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for pos in &self.positions {
            let atoms: Vec<&str> = pos.iter().map(String::as_str).collect();
            writeln!(f, "{}", atoms.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_format() {
        let t = FiniteTrace::parse("a,b\n\nc\n").unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.holds(0, "b"));
        assert!(t.positions()[1].is_empty());
        assert_eq!(t.to_string(), "a,b\n\nc\n");
        assert_eq!(FiniteTrace::parse(&t.to_string()).unwrap(), t);

        // a single empty position
        let t = FiniteTrace::parse("\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(FiniteTrace::parse(" a , b ").unwrap().positions()[0].len(), 2);
    }

    #[test]
    fn rejects_empty_and_bad_atoms() {
        assert_eq!(FiniteTrace::parse(""), Err(TraceError::Empty));
        assert_eq!(FiniteTrace::new(vec![]), Err(TraceError::Empty));
        assert!(matches!(
            FiniteTrace::parse("a\n!b\n"),
            Err(TraceError::BadAtom { line: 2, .. })
        ));
    }

    #[test]
    fn tail_marking() {
        let t = FiniteTrace::from_slices(&[&["a", "Tail"], &["b"]]).unwrap();
        let m = t.with_tail_marker();
        assert!(!m.holds(0, TAIL));
        assert!(m.holds(1, TAIL));
        assert!(!m.strip_tail().mentions_tail());
        assert_eq!(m.strip_tail(), FiniteTrace::from_slices(&[&["a"], &["b"]]).unwrap());
    }
}
