//! Symbols, e-nodes, ground terms and the s-expression reader shared by
//! every input file format.

use std::fmt;
use std::str::FromStr;

use smallvec::SmallVec;
use symbolic_expressions::Sexp;

use crate::ufind::Id;
use crate::Error;

/// Interned operator name. Ordered by name, not by interning order, so sorted
/// node lists do not depend on which thread interned a symbol first.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol(symbol_table::GlobalSymbol);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(name.into())
    }

    pub fn as_str(self) -> &'static str {
        self.0.as_str()
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if self.0 == other.0 {
            return std::cmp::Ordering::Equal;
        }
        self.as_str().cmp(other.as_str())
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Self {
        Symbol::new(&s)
    }
}

impl serde::Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Symbol::new(&s))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An operator applied to e-class ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ENode {
    pub op: Symbol,
    pub children: SmallVec<[Id; 2]>,
}

impl ENode {
    pub fn new(op: impl Into<Symbol>, children: impl IntoIterator<Item = Id>) -> Self {
        ENode {
            op: op.into(),
            children: children.into_iter().collect(),
        }
    }

    pub fn leaf(op: impl Into<Symbol>) -> Self {
        Self::new(op, [])
    }

    pub fn arity(&self) -> usize {
        self.children.len()
    }

    /// Copy of this node with every child passed through `f`.
    pub fn map_children(&self, mut f: impl FnMut(Id) -> Id) -> ENode {
        ENode {
            op: self.op,
            children: self.children.iter().map(|&c| f(c)).collect(),
        }
    }
}

impl fmt::Display for ENode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return write!(f, "{}", self.op);
        }
        write!(f, "({}", self.op)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        write!(f, ")")
    }
}

/// A ground term, e.g. `(max x y)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Term {
    pub op: Symbol,
    pub args: Vec<Term>,
}

impl Term {
    pub fn new(op: impl Into<Symbol>, args: Vec<Term>) -> Self {
        Term {
            op: op.into(),
            args,
        }
    }

    pub fn leaf(op: impl Into<Symbol>) -> Self {
        Self::new(op, vec![])
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.args.iter().map(Term::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.args.iter().map(Term::depth).max().unwrap_or(0)
    }

    pub(crate) fn from_sexp(sexp: &Sexp) -> Result<Term, Error> {
        match sexp {
            Sexp::String(s) => {
                if s.starts_with('?') {
                    return Err(Error::Parse(format!("hole `{s}` is not allowed in a term")));
                }
                Ok(Term::leaf(s.as_str()))
            }
            Sexp::List(items) => {
                let (head, rest) = items
                    .split_first()
                    .ok_or_else(|| Error::Parse("empty list is not a term".into()))?;
                let op = match head {
                    Sexp::String(s) if !s.starts_with('?') => s.as_str(),
                    other => return Err(Error::Parse(format!("bad operator `{other}`"))),
                };
                let args = rest.iter().map(Term::from_sexp).collect::<Result<_, _>>()?;
                Ok(Term::new(op, args))
            }
            Sexp::Empty => Err(Error::Parse("empty term".into())),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            return write!(f, "{}", self.op);
        }
        write!(f, "({}", self.op)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Term::from_sexp(&parse_one(s)?)
    }
}

/// Parses exactly one s-expression.
pub(crate) fn parse_one(text: &str) -> Result<Sexp, Error> {
    let mut all = parse_all(text)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(Error::Parse("empty input".into())),
        n => Err(Error::Parse(format!("expected one expression, found {n}"))),
    }
}

/// Parses a whole file: any number of top-level expressions, `;` comments.
pub(crate) fn parse_all(text: &str) -> Result<Vec<Sexp>, Error> {
    let mut cleaned = String::with_capacity(text.len() + 2);
    cleaned.push('(');
    for line in text.lines() {
        let line = match line.find(';') {
            Some(i) => &line[..i],
            None => line,
        };
        // the reader only treats ' ' and newlines as separators
        cleaned.extend(line.chars().map(|c| if c.is_whitespace() { ' ' } else { c }));
        cleaned.push('\n');
    }
    cleaned.push(')');
    match symbolic_expressions::parser::parse_str(&cleaned) {
        Ok(Sexp::List(items)) => Ok(items),
        Ok(Sexp::Empty) => Ok(vec![]),
        Ok(other) => Ok(vec![other]),
        Err(e) => Err(Error::Parse(e.to_string())),
    }
}

/// Reads a term file: one term per top-level expression.
pub fn parse_terms(text: &str) -> Result<Vec<Term>, Error> {
    parse_all(text)?.iter().map(Term::from_sexp).collect()
}
