//! Recursive-descent parser for the textual formula syntax.
//!
//! Binary operators in ascending precedence: `<->`, `->`, `|`, `&`, `U`, `R`.
//! `->`, `U` and `R` associate to the right, the others to the left. Unary
//! operators `! X N G F` bind tighter than every binary operator.

use super::Formula;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    UnknownOperator(String),
    Unexpected { found: String, expected: &'static str },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyInput => write!(f, "empty input"),
            ParseErrorKind::UnknownOperator(op) => write!(f, "unknown operator `{op}`"),
            ParseErrorKind::Unexpected { found, expected } => {
                write!(f, "unexpected {found}, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    Next,
    WeakNext,
    Globally,
    Eventually,
    Until,
    Release,
    And,
    Or,
    Implies,
    Iff,
    LParen,
    RParen,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "atom `{name}`"),
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::Not => "`!`",
            Tok::Next => "`X`",
            Tok::WeakNext => "`N`",
            Tok::Globally => "`G`",
            Tok::Eventually => "`F`",
            Tok::Until => "`U`",
            Tok::Release => "`R`",
            Tok::And => "`&`",
            Tok::Or => "`|`",
            Tok::Implies => "`->`",
            Tok::Iff => "`<->`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        let advance = |n: usize, i: &mut usize, column: &mut usize| {
            *i += n;
            *column += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut column);
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - begin;
            let word: String = chars[begin..i].iter().collect();
            match word.as_str() {
                "true" => Tok::True,
                "false" => Tok::False,
                "X" => Tok::Next,
                "N" => Tok::WeakNext,
                "G" => Tok::Globally,
                "F" => Tok::Eventually,
                "U" => Tok::Until,
                "R" => Tok::Release,
                _ => Tok::Ident(word),
            }
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let (tok, len) = match c {
                '!' => (Tok::Not, 1),
                '&' => (Tok::And, 1),
                '|' => (Tok::Or, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '-' if rest.starts_with("->") => (Tok::Implies, 2),
                '<' if rest.starts_with("<->") => (Tok::Iff, 3),
                _ => {
                    let op: String = chars[i..]
                        .iter()
                        .take_while(|c| !c.is_whitespace() && !c.is_ascii_alphanumeric())
                        .collect();
                    return Err(ParseError {
                        line: start_line,
                        column: start_col,
                        kind: ParseErrorKind::UnknownOperator(op),
                    });
                }
            };
            advance(len, &mut i, &mut column);
            tok
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &'static str) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError {
            line: s.line,
            column: s.column,
            kind: ParseErrorKind::Unexpected {
                found: s.tok.to_string(),
                expected,
            },
        }
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.implies()?;
        while *self.peek() == Tok::Iff {
            self.bump();
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.release()?;
        if *self.peek() == Tok::Until {
            self.bump();
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn release(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if *self.peek() == Tok::Release {
            self.bump();
            let rhs = self.release()?;
            return Ok(Formula::release(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let build: fn(Formula) -> Formula = match self.peek() {
            Tok::Not => Formula::not,
            Tok::Next => Formula::next,
            Tok::WeakNext => Formula::weak_next,
            Tok::Globally => Formula::globally,
            Tok::Eventually => Formula::eventually,
            _ => return self.primary(),
        };
        self.bump();
        Ok(build(self.unary()?))
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Formula::tt())
            }
            Tok::False => {
                self.bump();
                Ok(Formula::ff())
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::atom(&name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.iff()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.error("a formula")),
        }
    }
}

/// Parses one formula.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    if toks.len() == 1 {
        let eof = &toks[0];
        return Err(ParseError {
            line: eof.line,
            column: eof.column,
            kind: ParseErrorKind::EmptyInput,
        });
    }
    let mut p = Parser { toks, pos: 0 };
    let f = p.iff()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("an operator or end of input"));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(name: &str) -> Formula {
        Formula::atom(name)
    }

    #[test]
    fn overview_formula() {
        let f = parse("(! Tail & a) U b").unwrap();
        let expect = Formula::until(Formula::and(Formula::not(at("Tail")), at("a")), at("b"));
        assert_eq!(f, expect);
    }

    #[test]
    fn keywords_and_sugar() {
        assert_eq!(parse("true").unwrap(), Formula::tt());
        assert_eq!(parse("G p").unwrap(), Formula::release(Formula::ff(), at("p")));
        assert_eq!(parse("F p").unwrap(), Formula::until(Formula::tt(), at("p")));
        assert_eq!(
            parse("a -> b").unwrap(),
            Formula::or(Formula::not(at("a")), at("b"))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        // & binds tighter than |
        assert_eq!(
            parse("a | b & c").unwrap(),
            Formula::or(at("a"), Formula::and(at("b"), at("c")))
        );
        // U is right associative, R binds tighter than U
        assert_eq!(
            parse("a U b U c").unwrap(),
            Formula::until(at("a"), Formula::until(at("b"), at("c")))
        );
        assert_eq!(
            parse("a U b R c").unwrap(),
            Formula::until(at("a"), Formula::release(at("b"), at("c")))
        );
        // U binds tighter than &
        assert_eq!(
            parse("a & b U c").unwrap(),
            Formula::and(at("a"), Formula::until(at("b"), at("c")))
        );
        // unary binds tightest
        assert_eq!(
            parse("X a U b").unwrap(),
            Formula::until(Formula::next(at("a")), at("b"))
        );
        assert_eq!(
            parse("a -> b -> c").unwrap(),
            parse("a -> (b -> c)").unwrap()
        );
    }

    #[test]
    fn identifiers_containing_keywords() {
        assert_eq!(parse("Xa").unwrap(), at("Xa"));
        assert_eq!(parse("G_1").unwrap(), at("G_1"));
        assert_eq!(parse("\n  a_1\t& b2 ").unwrap(), Formula::and(at("a_1"), at("b2")));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::EmptyInput);
        let e = parse("   \n ").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::EmptyInput);

        let e = parse("a ^ b").unwrap_err();
        assert_eq!((e.line, e.column), (1, 3));
        assert_eq!(e.kind, ParseErrorKind::UnknownOperator("^".into()));

        let e = parse("a &\n  (b | )").unwrap_err();
        assert_eq!((e.line, e.column), (2, 8));
        assert!(matches!(e.kind, ParseErrorKind::Unexpected { .. }));

        let e = parse("(a & b").unwrap_err();
        assert!(e.to_string().contains("expected `)`"));

        assert!(parse("a b").is_err());
        assert!(parse("U a").is_err());
        assert!(parse("a - b").is_err());
    }
}
