use std::fmt;

use crate::error::{Error, Result};
use crate::mesh::Point;

const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Clause {
    All,
    XEquals(f64),
    YEquals(f64),
}

/// Predicate on boundary-edge midpoints selecting the Dirichlet part.
///
/// Grammar: `clause ( "||" clause )*` with `clause := "all" | "none" |
/// ("x" | "y") "==" number`, e.g. `"y == 1"` or `"x == 0 || x == 1"`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPredicate {
    clauses: Vec<Clause>,
    source: String,
}

impl BoundaryPredicate {
    pub fn parse(text: &str) -> Result<Self> {
        let mut clauses = Vec::new();
        for raw in text.split("||") {
            let part = raw.trim();
            match part {
                "all" => clauses.push(Clause::All),
                "none" => {}
                _ => {
                    let (lhs, rhs) = part
                        .split_once("==")
                        .ok_or_else(|| Error::Config(format!("cannot parse boundary clause `{part}`")))?;
                    let value: f64 = rhs
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad number in boundary clause `{part}`")))?;
                    match lhs.trim() {
                        "x" => clauses.push(Clause::XEquals(value)),
                        "y" => clauses.push(Clause::YEquals(value)),
                        other => {
                            return Err(Error::Config(format!("unknown coordinate `{other}` in `{part}`")))
                        }
                    }
                }
            }
        }
        Ok(Self {
            clauses,
            source: text.trim().to_string(),
        })
    }

    pub fn all() -> Self {
        Self::parse("all").unwrap()
    }

    pub fn matches(&self, p: Point) -> bool {
        self.clauses.iter().any(|c| match *c {
            Clause::All => true,
            Clause::XEquals(v) => (p[0] - v).abs() <= MATCH_TOL,
            Clause::YEquals(v) => (p[1] - v).abs() <= MATCH_TOL,
        })
    }
}

impl fmt::Display for BoundaryPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_disjunctions() {
        let p = BoundaryPredicate::parse("x == 0 || y == 1").unwrap();
        assert!(p.matches([0.0, 0.3]));
        assert!(p.matches([0.5, 1.0]));
        assert!(!p.matches([1.0, 0.5]));
    }

    #[test]
    fn none_matches_nothing() {
        let p = BoundaryPredicate::parse("none").unwrap();
        assert!(!p.matches([0.0, 0.0]));
    }

    #[test]
    fn rejects_garbage() {
        assert!(BoundaryPredicate::parse("z == 1").is_err());
        assert!(BoundaryPredicate::parse("x = 1").is_err());
        assert!(BoundaryPredicate::parse("x == one").is_err());
    }
}
