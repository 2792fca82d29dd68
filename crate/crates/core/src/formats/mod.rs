//! Readers and writers between treebank file formats and annotation graphs.
//!
//! Every reader yields one [`Sentence`] per sentence in the input. Only
//! `penn`, `tiger-xml` and `native` have writers.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::constituency::{find_root, EditError};
use crate::graph::{AnnotationGraph, ArcId, ArcType, Family, GraphError};

pub mod floresta;
pub mod native;
pub mod nested_xml;
pub mod penn;
pub mod record;
pub mod tiger;
pub mod turin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormatId {
    Penn,
    BracketRecord,
    Floresta,
    Turin,
    TigerXml,
    NestedXml,
    Native,
}

impl FormatId {
    pub const ALL: [FormatId; 7] = [
        FormatId::Penn,
        FormatId::BracketRecord,
        FormatId::Floresta,
        FormatId::Turin,
        FormatId::TigerXml,
        FormatId::NestedXml,
        FormatId::Native,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormatId::Penn => "penn",
            FormatId::BracketRecord => "bracket-record",
            FormatId::Floresta => "floresta",
            FormatId::Turin => "turin",
            FormatId::TigerXml => "tiger-xml",
            FormatId::NestedXml => "nested-xml",
            FormatId::Native => "native",
        }
    }

    pub fn has_writer(self) -> bool {
        matches!(self, FormatId::Penn | FormatId::TigerXml | FormatId::Native)
    }

    /// Guesses a format from a file extension. `.xml` is taken as TIGER-XML.
    pub fn from_extension(ext: &str) -> Option<FormatId> {
        match ext.to_ascii_lowercase().as_str() {
            "mrg" | "penn" | "ptb" => Some(FormatId::Penn),
            "rec" => Some(FormatId::BracketRecord),
            "floresta" | "fl" => Some(FormatId::Floresta),
            "tut" | "turin" => Some(FormatId::Turin),
            "xml" | "tiger" => Some(FormatId::TigerXml),
            "json" => Some(FormatId::Native),
            _ => None,
        }
    }
}

impl fmt::Display for FormatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormatId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown format {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Structure(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error("{format} has no writer")]
    NoWriter { format: FormatId },
    /// The target format cannot express part of the sentence.
    #[error("sentence {sentence}: {reason}")]
    Loss { sentence: usize, reason: String },
}

pub(crate) fn structure<T>(msg: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Structure(msg.into()))
}

/// One sentence: its graph and the arc at the top of its tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub graph: AnnotationGraph,
    pub root: ArcId,
}

impl Sentence {
    /// Wraps a graph, locating its root arc.
    pub fn from_graph(graph: AnnotationGraph) -> Result<Sentence, FormatError> {
        let root = find_root(&graph).ok_or_else(|| FormatError::Structure("graph has no root".into()))?;
        Ok(Sentence { graph, root })
    }
}

pub fn read(format: FormatId, text: &str) -> Result<Vec<Sentence>, FormatError> {
    match format {
        FormatId::Penn => penn::read_penn(text),
        FormatId::BracketRecord => record::read_bracket_record(text),
        FormatId::Floresta => floresta::read_floresta(text),
        FormatId::Turin => turin::read_turin(text),
        FormatId::TigerXml => tiger::read_tiger_xml(text),
        FormatId::NestedXml => nested_xml::read_nested_xml(text),
        FormatId::Native => native::read_native(text),
    }
}

pub fn write(format: FormatId, sentences: &[Sentence]) -> Result<String, FormatError> {
    match format {
        FormatId::Penn => penn::write_penn(sentences),
        FormatId::TigerXml => tiger::write_tiger_xml(sentences),
        FormatId::Native => native::write_native(sentences),
        other => Err(FormatError::NoWriter { format: other }),
    }
}

/// A tree view of a sentence for the tree-shaped writers. Words that head
/// dependents are projected to a node whose children are the dependents plus
/// the word itself, in word order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Shape {
    Leaf(ArcId),
    Node { arc: ArcId, children: Vec<Shape> },
}

impl Shape {
    pub(crate) fn leaves(&self, out: &mut Vec<ArcId>) {
        match self {
            Shape::Leaf(id) => out.push(*id),
            Shape::Node { children, .. } => children.iter().for_each(|c| c.leaves(out)),
        }
    }
}

pub(crate) fn project(g: &AnnotationGraph, id: ArcId) -> Result<Shape, FormatError> {
    fn walk(g: &AnnotationGraph, id: ArcId, depth: usize) -> Result<Shape, FormatError> {
        if depth > g.arc_count() {
            return Err(GraphError::Cycle { child: id, parent: id }.into());
        }
        let arc = g.arc(id)?;
        let kids: Vec<ArcId> = g
            .children_in_order(id)
            .into_iter()
            .filter(|k| g.arc(*k).map(|a| a.kind.family() == arc.kind.family()).unwrap_or(false))
            .collect();
        if arc.kind.is_terminal() && kids.is_empty() {
            return Ok(Shape::Leaf(id));
        }
        if arc.kind == ArcType::Trace {
            return structure(format!("trace {id} has children"));
        }
        let mut children = kids
            .into_iter()
            .map(|k| walk(g, k, depth + 1))
            .collect::<Result<Vec<_>, _>>()?;
        if arc.kind == ArcType::Word {
            children.push(Shape::Leaf(id));
        }
        let start_of = |s: &Shape| -> usize {
            let mut l = Vec::new();
            s.leaves(&mut l);
            l.first().and_then(|t| g.span(*t).ok()).map(|s| s.0).unwrap_or(0)
        };
        children.sort_by_cached_key(|c| start_of(c));
        Ok(Shape::Node { arc: id, children })
    }
    walk(g, id, 0)
}

fn collect_arcs(shape: &Shape, out: &mut HashSet<ArcId>) {
    match shape {
        Shape::Leaf(id) => {
            out.insert(*id);
        }
        Shape::Node { arc, children } => {
            out.insert(*arc);
            children.iter().for_each(|c| collect_arcs(c, out));
        }
    }
}

/// Checks that the projected tree covers every syntactic arc of the graph.
pub(crate) fn check_coverage(g: &AnnotationGraph, shape: &Shape, sentence: usize) -> Result<(), FormatError> {
    let mut seen = HashSet::new();
    collect_arcs(shape, &mut seen);
    if g.arcs().any(|a| a.kind.family() == Family::Proposition) {
        return Err(FormatError::Loss {
            sentence,
            reason: "predicate-argument arcs have no tree form".into(),
        });
    }
    if let Some(a) = g.arcs().find(|a| !seen.contains(&a.id)) {
        return Err(FormatError::Loss {
            sentence,
            reason: format!("{} is not part of the tree", a.id),
        });
    }
    Ok(())
}

/// An s-expression token with its source position.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Open,
    Close,
    Atom(String),
    Quoted(String),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Sexp {
    Atom { text: String, quoted: bool },
    List(Vec<Sexp>),
}

fn lex(text: &str, quotes: bool) -> Result<Vec<(Token, usize, usize)>, FormatError> {
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 0);
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        col += 1;
        let here = (line, col);
        match c {
            '\n' => {
                line += 1;
                col = 0;
            }
            c if c.is_whitespace() => {}
            '(' => out.push((Token::Open, here.0, here.1)),
            ')' => out.push((Token::Close, here.0, here.1)),
            '"' if quotes => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some('\n') | None => {
                            return Err(FormatError::Syntax {
                                line: here.0,
                                column: here.1,
                                message: "unterminated string".into(),
                            })
                        }
                        Some(ch) => {
                            col += 1;
                            s.push(ch);
                        }
                    }
                }
                out.push((Token::Quoted(s), here.0, here.1));
            }
            _ => {
                let mut s = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' {
                        break;
                    }
                    s.push(n);
                    chars.next();
                    col += 1;
                }
                out.push((Token::Atom(s), here.0, here.1));
            }
        }
    }
    Ok(out)
}

/// Parses a sequence of top-level s-expressions.
pub(crate) fn parse_sexps(text: &str, quotes: bool) -> Result<Vec<Sexp>, FormatError> {
    let tokens = lex(text, quotes)?;
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = Vec::new();
    let mut top = Vec::new();
    for (tok, line, column) in tokens {
        let item = match tok {
            Token::Open => {
                stack.push((Vec::new(), line, column));
                continue;
            }
            Token::Close => match stack.pop() {
                Some((items, _, _)) => Sexp::List(items),
                None => {
                    return Err(FormatError::Syntax {
                        line,
                        column,
                        message: "unmatched ')'".into(),
                    })
                }
            },
            Token::Atom(text) => Sexp::Atom { text, quoted: false },
            Token::Quoted(text) => Sexp::Atom { text, quoted: true },
        };
        match stack.last_mut() {
            Some((items, _, _)) => items.push(item),
            None => top.push(item),
        }
    }
    if let Some((_, line, column)) = stack.pop() {
        return Err(FormatError::Syntax {
            line,
            column,
            message: "unclosed '('".into(),
        });
    }
    Ok(top)
}

/// Splits a trailing `-N` coindex off a category, as in `NP-SBJ-1`.
pub(crate) fn split_coindex(label: &str) -> (&str, Option<&str>) {
    if let Some((head, tail)) = label.rsplit_once('-') {
        if !head.is_empty() && !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) {
            return (head, Some(tail));
        }
    }
    (label, None)
}
