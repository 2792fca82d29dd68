//! Line-oriented edit scripts.
//!
//! Each non-blank line not starting with `#` is one command:
//! `op [positional...] [key=value...]`, split like a shell line so values
//! may be quoted. Positional arguments are node selectors:
//!
//! * `e12` names an arc directly;
//! * `(3,0)` is a node coordinate (leftmost terminal, height);
//! * `/` is the sentence root;
//! * anything else is a label path such as `VP/NP[2]` or `/S/VP`. Each step
//!   matches a label, a label with its coindex (`NP-SBJ-1`), a word form, or
//!   `_` for an unlabeled node, optionally picking the k-th match (1-based).
//!   A leading `/` anchors the first step at the root; otherwise it may match
//!   anywhere in the tree. A path must pick out exactly one node.
//!
//! Commands without an explicit node act on the current selection. Commands
//! that create a node (`group`, `insert_trace`, `insert_constituent`) select
//! it; the elementary moves keep the selection where it was.

use std::fmt;

use thiserror::Error;

use crate::constituency::{self, EditError, TracePosition};
use crate::dependency::DependencyView;
use crate::formats::Sentence;
use crate::graph::{AnnotationGraph, ArcId, ArcType, Family, GraphError};
use crate::propbank::{self, NodeCoordinate, NodeRef, PropError, Proposition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("{0}")]
    Parse(String),
    #[error("selector {selector:?}: {reason}")]
    Selector { selector: String, reason: String },
    #[error("no node selected")]
    NoSelection,
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Prop(#[from] PropError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn parse_err<T>(msg: impl Into<String>) -> Result<T, ScriptError> {
    Err(ScriptError::Parse(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Arc(ArcId),
    Coord(NodeCoordinate),
    Root,
    Path { anchored: bool, steps: Vec<(String, Option<usize>)> },
}

impl std::str::FromStr for Selector {
    type Err = ScriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "/" {
            return Ok(Selector::Root);
        }
        if let Ok(id) = s.parse::<ArcId>() {
            return Ok(Selector::Arc(id));
        }
        if s.starts_with('(') {
            return s
                .parse::<NodeCoordinate>()
                .map(Selector::Coord)
                .map_err(ScriptError::Parse);
        }
        let anchored = s.starts_with('/');
        let mut steps = Vec::new();
        for step in s.trim_start_matches('/').split('/') {
            if step.is_empty() {
                return parse_err(format!("empty step in path {s:?}"));
            }
            let parsed = match step.strip_suffix(']').and_then(|r| r.rsplit_once('[')) {
                Some((name, k)) => {
                    let k: usize = k
                        .parse()
                        .ok()
                        .filter(|k| *k >= 1)
                        .ok_or_else(|| ScriptError::Parse(format!("bad index in {step:?}")))?;
                    (name.to_string(), Some(k))
                }
                None => (step.to_string(), None),
            };
            steps.push(parsed);
        }
        Ok(Selector::Path { anchored, steps })
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Arc(id) => write!(f, "{id}"),
            Selector::Coord(c) => write!(f, "{c}"),
            Selector::Root => f.write_str("/"),
            Selector::Path { anchored, steps } => {
                if *anchored {
                    f.write_str("/")?;
                }
                for (i, (name, k)) in steps.iter().enumerate() {
                    if i > 0 {
                        f.write_str("/")?;
                    }
                    f.write_str(name)?;
                    if let Some(k) = k {
                        write!(f, "[{k}]")?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn matches_name(g: &AnnotationGraph, id: ArcId, name: &str) -> bool {
    let Ok(arc) = g.arc(id) else { return false };
    if name == "_" && arc.label().is_none() && !arc.kind.is_terminal() {
        return true;
    }
    if arc.label() == Some(name) || (arc.kind.is_terminal() && arc.form() == Some(name)) {
        return true;
    }
    match (arc.label(), arc.field("coindex")) {
        (Some(l), Some(c)) => name.strip_suffix(c).and_then(|r| r.strip_suffix('-')) == Some(l),
        _ => false,
    }
}

fn preorder(g: &AnnotationGraph, root: ArcId) -> Vec<ArcId> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        out.push(id);
        let mut kids = g.children_in_order(id);
        kids.retain(|k| g.arc(*k).map(|a| a.kind.family() == Family::Syntax).unwrap_or(false));
        stack.extend(kids.into_iter().rev());
    }
    out
}

/// Resolves a selector to one arc of `g`.
pub fn resolve(g: &AnnotationGraph, root: ArcId, sel: &Selector) -> Result<ArcId, ScriptError> {
    let fail = |reason: String| ScriptError::Selector {
        selector: sel.to_string(),
        reason,
    };
    match sel {
        Selector::Root => Ok(root),
        Selector::Arc(id) => {
            g.arc(*id).map_err(|e| fail(e.to_string()))?;
            Ok(*id)
        }
        Selector::Coord(c) => propbank::resolve_coordinate(g, *c).map_err(|e| fail(e.to_string())),
        Selector::Path { anchored, steps } => {
            let pick = |cands: Vec<ArcId>, k: Option<usize>| -> Vec<ArcId> {
                match k {
                    Some(k) => cands.get(k - 1).copied().into_iter().collect(),
                    None => cands,
                }
            };
            let (first, k) = &steps[0];
            let pool = if *anchored { vec![root] } else { preorder(g, root) };
            let mut current = pick(
                pool.into_iter().filter(|id| matches_name(g, *id, first)).collect(),
                *k,
            );
            for (name, k) in &steps[1..] {
                let mut next = Vec::new();
                for c in current {
                    let kids: Vec<ArcId> = g
                        .children_in_order(c)
                        .into_iter()
                        .filter(|id| matches_name(g, *id, name))
                        .collect();
                    next.extend(pick(kids, *k));
                }
                current = next;
            }
            match current.as_slice() {
                [one] => Ok(*one),
                [] => Err(fail("no such node".into())),
                many => Err(fail(format!(
                    "ambiguous: {}",
                    many.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
                ))),
            }
        }
    }
}

/// One parsed script command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub op: String,
    pub nodes: Vec<Selector>,
    pub params: Vec<(String, String)>,
    /// Positional arguments that are not selectors (only `sentence` uses one).
    pub number: Option<usize>,
}

/// Operation names a script or the service accepts.
pub const OPERATIONS: &[&str] = &[
    "sentence",
    "select",
    "move_down",
    "move_up",
    "promote_right",
    "promote_left",
    "demote_right",
    "demote_left",
    "group",
    "ungroup",
    "insert_trace",
    "delete_trace",
    "relabel",
    "coindex",
    "move_subtree",
    "insert_constituent",
    "delete_constituent",
    "grow_constituent_span",
    "normalize",
    "tag_predicate",
    "tag_argument",
    "tag_modifier",
    "add_equivalence",
    "materialize",
];

impl Command {
    /// Builds a command from an operation name and raw argument tokens.
    pub fn from_tokens(op: &str, args: &[String]) -> Result<Command, ScriptError> {
        if !OPERATIONS.contains(&op) {
            return parse_err(format!("unknown operation {op:?}"));
        }
        let mut cmd = Command {
            op: op.to_string(),
            nodes: Vec::new(),
            params: Vec::new(),
            number: None,
        };
        for a in args {
            match a.split_once('=') {
                Some((k, v)) if !k.is_empty() && !k.contains('/') => {
                    cmd.params.push((k.to_string(), v.to_string()))
                }
                _ if op == "sentence" => {
                    let n: usize = a
                        .parse()
                        .ok()
                        .filter(|n| *n >= 1)
                        .ok_or_else(|| ScriptError::Parse(format!("bad sentence number {a:?}")))?;
                    cmd.number = Some(n);
                }
                _ => cmd.nodes.push(a.parse()?),
            }
        }
        cmd.check_arity()?;
        Ok(cmd)
    }

    fn check_arity(&self) -> Result<(), ScriptError> {
        let n = self.nodes.len();
        let ok = match self.op.as_str() {
            "sentence" => n == 0 && self.number.is_some(),
            "select" => n == 1,
            "materialize" => n == 0,
            "group" => n >= 2,
            "coindex" | "move_subtree" | "add_equivalence" => n == 2,
            "tag_predicate" | "tag_argument" | "tag_modifier" => n >= 1,
            _ => n <= 1,
        };
        if !ok {
            return parse_err(format!("{}: wrong number of node arguments ({n})", self.op));
        }
        let needs = match self.op.as_str() {
            "coindex" => Some("tag"),
            "tag_argument" | "tag_modifier" => Some("label"),
            _ => None,
        };
        if let Some(key) = needs {
            if self.param(key).is_none() {
                return parse_err(format!("{} needs {key}=...", self.op));
            }
        }
        Ok(())
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse_line(line: &str) -> Result<Option<Command>, ScriptError> {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return Ok(None);
        }
        let tokens = shlex::split(trimmed).ok_or_else(|| ScriptError::Parse("unbalanced quotes".into()))?;
        let (op, args) = tokens.split_first().expect("non-empty line has a token");
        Command::from_tokens(op, args).map(Some)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.op)?;
        if let Some(n) = self.number {
            write!(f, " {n}")?;
        }
        for s in &self.nodes {
            write!(f, " {}", shlex::try_quote(&s.to_string()).map_err(|_| fmt::Error)?)?;
        }
        for (k, v) in &self.params {
            let kv = format!("{k}={v}");
            write!(f, " {}", shlex::try_quote(&kv).map_err(|_| fmt::Error)?)?;
        }
        Ok(())
    }
}

/// A parsed script: commands with their source line numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub commands: Vec<(usize, Command)>,
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, ScriptFailure> {
        let mut commands = Vec::new();
        for (i, line) in text.lines().enumerate() {
            match Command::parse_line(line) {
                Ok(Some(c)) => commands.push((i + 1, c)),
                Ok(None) => {}
                Err(error) => {
                    return Err(ScriptFailure {
                        index: commands.len() + 1,
                        line: i + 1,
                        error,
                    })
                }
            }
        }
        Ok(Script { commands })
    }
}

/// The first failing command of a script run.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("command {index} (line {line}): {error}")]
pub struct ScriptFailure {
    pub index: usize,
    pub line: usize,
    pub error: ScriptError,
}

/// Mutable editing state over a document.
#[derive(Debug, Clone)]
pub struct EditSession {
    pub sentences: Vec<Sentence>,
    current: usize,
    selected: Option<ArcId>,
    pending: Option<Proposition>,
}

impl EditSession {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        EditSession {
            sentences,
            current: 0,
            selected: None,
            pending: None,
        }
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn selected(&self) -> Option<ArcId> {
        self.selected
    }

    pub fn pending(&self) -> Option<&Proposition> {
        self.pending.as_ref()
    }

    /// Replaces the proposition being tagged (used when undoing).
    pub fn set_pending(&mut self, p: Option<Proposition>) {
        self.pending = p;
    }

    fn sentence(&mut self) -> Result<&mut Sentence, ScriptError> {
        let n = self.current;
        self.sentences
            .get_mut(n)
            .ok_or_else(|| ScriptError::Parse(format!("document has no sentence {}", n + 1)))
    }

    /// Runs every command in order, stopping at the first failure. The
    /// document is left unchanged when a command fails.
    pub fn run(&mut self, script: &Script) -> Result<(), ScriptFailure> {
        let snapshot = self.clone();
        for (i, (line, cmd)) in script.commands.iter().enumerate() {
            if let Err(error) = self.apply(cmd) {
                *self = snapshot;
                return Err(ScriptFailure {
                    index: i + 1,
                    line: *line,
                    error,
                });
            }
        }
        Ok(())
    }

    /// Applies one command. On error the current sentence is unchanged.
    pub fn apply(&mut self, cmd: &Command) -> Result<(), ScriptError> {
        if cmd.op == "sentence" {
            let n = cmd.number.unwrap_or(1) - 1;
            if n >= self.sentences.len() {
                return parse_err(format!("document has no sentence {}", n + 1));
            }
            self.current = n;
            self.selected = None;
            self.pending = None;
            return Ok(());
        }
        let backup = self.sentence()?.clone();
        let selected = self.selected;
        let pending = self.pending.clone();
        let result = self.apply_inner(cmd);
        if result.is_err() {
            *self.sentence()? = backup;
            self.selected = selected;
            self.pending = pending;
        } else {
            let s = self.sentence()?;
            if let Some(top) = s.graph.ancestors(s.root).last() {
                s.root = *top;
            }
        }
        result
    }

    fn apply_inner(&mut self, cmd: &Command) -> Result<(), ScriptError> {
        let selected = self.selected;
        let s = self.sentence()?;
        let root = s.root;
        let g = &s.graph;
        let nodes = cmd
            .nodes
            .iter()
            .map(|n| resolve(g, root, n))
            .collect::<Result<Vec<_>, _>>()?;
        let target = nodes.first().copied().or(selected);
        let need = || target.ok_or(ScriptError::NoSelection);
        let g = &mut s.graph;
        let mut select = target;
        match cmd.op.as_str() {
            "select" => {}
            "move_down" => {
                constituency::move_down(g, need()?)?;
            }
            "move_up" => constituency::move_up(g, need()?)?,
            "promote_right" => constituency::promote_right(g, need()?)?,
            "promote_left" => constituency::promote_left(g, need()?)?,
            "demote_right" => constituency::demote_right(g, need()?)?,
            "demote_left" => constituency::demote_left(g, need()?)?,
            "group" => {
                let n = constituency::group(g, &nodes)?;
                if let Some(l) = cmd.param("label") {
                    constituency::relabel(g, n, &[("label".into(), l.into())])?;
                }
                select = Some(n);
            }
            "ungroup" => {
                let kids = constituency::ungroup(g, need()?)?;
                select = kids.first().copied();
            }
            "insert_trace" => {
                let at = need()?;
                let position = match cmd.param("side").unwrap_or("before") {
                    "before" => TracePosition::Before(at),
                    "after" => TracePosition::After(at),
                    other => return parse_err(format!("side must be before or after, not {other:?}")),
                };
                let parent = match cmd.param("parent") {
                    Some(p) => Some(resolve(g, root, &p.parse()?)?),
                    None => None,
                };
                let marker = cmd.param("marker").unwrap_or("*");
                let t = constituency::insert_trace(g, position, marker, cmd.param("coindex"), parent)?;
                select = Some(t);
            }
            "delete_trace" => {
                let t = need()?;
                let parent = g.parent(t);
                constituency::delete_trace(g, t)?;
                select = parent;
            }
            "relabel" => {
                let n = need()?;
                constituency::relabel(g, n, &cmd.params)?;
            }
            "coindex" => {
                constituency::coindex(g, nodes[0], nodes[1], cmd.param("tag").unwrap_or(""))?;
            }
            "move_subtree" | "insert_constituent" | "delete_constituent" | "grow_constituent_span"
            | "normalize" => {
                let view = DependencyView::find(g).unwrap_or(DependencyView { root });
                match cmd.op.as_str() {
                    "move_subtree" => {
                        view.move_subtree(g, nodes[0], nodes[1])?;
                        select = Some(nodes[0]);
                    }
                    "insert_constituent" => select = Some(view.insert_constituent(g, need()?)?),
                    "delete_constituent" => {
                        let c = need()?;
                        let parent = g.parent(c);
                        view.delete_constituent(g, c)?;
                        select = parent;
                    }
                    "grow_constituent_span" => view.grow_constituent_span(g, need()?)?,
                    _ => view.normalize(g, need()?)?,
                }
            }
            "tag_predicate" | "tag_argument" | "tag_modifier" | "add_equivalence" => {
                let refs: Vec<NodeRef> = nodes.iter().map(|n| NodeRef::Arc(*n)).collect();
                let p = self.pending.get_or_insert_with(Proposition::new);
                let g = &self.sentences[self.current].graph;
                match cmd.op.as_str() {
                    "tag_predicate" => p.tag_predicate(g, &refs)?,
                    "tag_argument" => p.tag_argument(g, cmd.param("label").unwrap_or(""), &refs)?,
                    "tag_modifier" => p.tag_modifier(g, cmd.param("label").unwrap_or(""), &refs)?,
                    _ => p.add_equivalence(g, refs[0], refs[1])?,
                }
            }
            "materialize" => {
                let p = self.pending.take().ok_or_else(|| ScriptError::Parse("no proposition to materialize".into()))?;
                let created = propbank::materialize(&mut self.sentences[self.current].graph, &p)?;
                select = created.first().copied();
            }
            other => return parse_err(format!("unknown operation {other:?}")),
        }
        self.selected = select;
        Ok(())
    }
}

/// Whether `g` has a word arc with dependents, i.e. is a dependency tree.
pub fn is_dependency(g: &AnnotationGraph) -> bool {
    g.arcs().any(|a| a.kind == ArcType::Root)
        || g.arcs().any(|a| a.kind == ArcType::Word && g.arcs().any(|b| b.parent == Some(a.id)))
}
