//! Predicate-argument annotation layered over a constituency graph.
//!
//! A proposition names a predicate, labeled arguments and modifiers (each a
//! set of constituents, since phrasal predicates and split arguments are not
//! dominated by one node), and equivalence classes over parse nodes. It is
//! materialized as `pred`/`arg`/`mod` arcs spanning the hull of their
//! constituents and pointing at them through `refs`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use thiserror::Error;

use crate::graph::{AnnotationGraph, ArcId, ArcType, Family, Fields, GraphError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no node at coordinate {0}")]
    Unresolvable(NodeCoordinate),
    #[error("{0} is not a syntactic constituent")]
    NotConstituent(ArcId),
    #[error("empty constituent set")]
    EmptySet,
    #[error("argument label {0:?} is already used")]
    DuplicateLabel(String),
    #[error("proposition has no predicate")]
    NoPredicate,
    #[error("malformed equivalence field {0:?}")]
    BadEquivalence(String),
}

/// A parse node addressed by its leftmost terminal and its height on the
/// leftmost chain above that terminal (0 is the lowest non-terminal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeCoordinate {
    pub leftmost_terminal: usize,
    pub height: usize,
}

impl NodeCoordinate {
    pub fn new(leftmost_terminal: usize, height: usize) -> Self {
        NodeCoordinate {
            leftmost_terminal,
            height,
        }
    }
}

impl fmt::Display for NodeCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.leftmost_terminal, self.height)
    }
}

impl FromStr for NodeCoordinate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(s.trim());
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| format!("bad coordinate {s:?}"))?;
        Ok(NodeCoordinate {
            leftmost_terminal: a.trim().parse().map_err(|_| format!("bad coordinate {s:?}"))?,
            height: b.trim().parse().map_err(|_| format!("bad coordinate {s:?}"))?,
        })
    }
}

/// Either a direct arc reference or a coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    Arc(ArcId),
    Coord(NodeCoordinate),
}

impl From<ArcId> for NodeRef {
    fn from(id: ArcId) -> Self {
        NodeRef::Arc(id)
    }
}

impl From<NodeCoordinate> for NodeRef {
    fn from(c: NodeCoordinate) -> Self {
        NodeRef::Coord(c)
    }
}

/// Resolves a coordinate against the terminals of `g`.
pub fn resolve_coordinate(g: &AnnotationGraph, c: NodeCoordinate) -> Result<ArcId, PropError> {
    let terminals = g.terminals();
    let Some(&leaf) = terminals.get(c.leftmost_terminal) else {
        return Err(PropError::Unresolvable(c));
    };
    let start = g.arc(leaf)?.start;
    g.ancestors(leaf)
        .into_iter()
        .take_while(|a| g.arc(*a).map(|x| x.start == start).unwrap_or(false))
        .nth(c.height)
        .ok_or(PropError::Unresolvable(c))
}

/// The coordinate of a non-terminal, if it sits on some terminal's leftmost chain.
pub fn coordinate_of(g: &AnnotationGraph, id: ArcId) -> Option<NodeCoordinate> {
    let arc = g.arc(id).ok()?;
    if arc.kind.is_terminal() || arc.kind.family() != Family::Syntax {
        return None;
    }
    let terminals = g.terminals();
    let (k, leaf) = terminals
        .iter()
        .enumerate()
        .find(|(_, t)| g.arc(**t).map(|a| a.start == arc.start).unwrap_or(false))?;
    let height = g
        .ancestors(*leaf)
        .into_iter()
        .take_while(|a| g.arc(*a).map(|x| x.start == arc.start).unwrap_or(false))
        .position(|a| a == id)?;
    Some(NodeCoordinate::new(k, height))
}

fn resolve(g: &AnnotationGraph, node: NodeRef) -> Result<ArcId, PropError> {
    let id = match node {
        NodeRef::Arc(id) => id,
        NodeRef::Coord(c) => resolve_coordinate(g, c)?,
    };
    let kind = g.arc(id)?.kind;
    if kind.family() != Family::Syntax {
        return Err(PropError::NotConstituent(id));
    }
    Ok(id)
}

fn resolve_set(g: &AnnotationGraph, nodes: &[NodeRef]) -> Result<BTreeSet<ArcId>, PropError> {
    if nodes.is_empty() {
        return Err(PropError::EmptySet);
    }
    nodes.iter().map(|n| resolve(g, *n)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Proposition {
    pub predicate: BTreeSet<ArcId>,
    pub arguments: IndexMap<String, BTreeSet<ArcId>>,
    pub modifiers: IndexMap<String, BTreeSet<ArcId>>,
    /// Non-singleton equivalence classes, each sorted, in order of first member.
    pub equivalences: Vec<BTreeSet<ArcId>>,
}

impl Proposition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tag_predicate(&mut self, g: &AnnotationGraph, nodes: &[NodeRef]) -> Result<(), PropError> {
        self.predicate = resolve_set(g, nodes)?;
        Ok(())
    }

    pub fn tag_argument(
        &mut self,
        g: &AnnotationGraph,
        label: &str,
        nodes: &[NodeRef],
    ) -> Result<(), PropError> {
        if self.arguments.contains_key(label) {
            return Err(PropError::DuplicateLabel(label.to_string()));
        }
        let set = resolve_set(g, nodes)?;
        self.arguments.insert(label.to_string(), set);
        Ok(())
    }

    pub fn tag_modifier(
        &mut self,
        g: &AnnotationGraph,
        label: &str,
        nodes: &[NodeRef],
    ) -> Result<(), PropError> {
        if self.modifiers.contains_key(label) {
            return Err(PropError::DuplicateLabel(label.to_string()));
        }
        let set = resolve_set(g, nodes)?;
        self.modifiers.insert(label.to_string(), set);
        Ok(())
    }

    /// Merges the classes of `a` and `b`.
    pub fn add_equivalence(&mut self, g: &AnnotationGraph, a: NodeRef, b: NodeRef) -> Result<(), PropError> {
        let a = resolve(g, a)?;
        let b = resolve(g, b)?;
        if a == b {
            return Ok(());
        }
        self.merge(a, b);
        Ok(())
    }

    fn merge(&mut self, a: ArcId, b: ArcId) {
        let mut merged: BTreeSet<ArcId> = [a, b].into_iter().collect();
        self.equivalences.retain(|class| {
            if class.contains(&a) || class.contains(&b) {
                merged.extend(class.iter().copied());
                false
            } else {
                true
            }
        });
        self.equivalences.push(merged);
        self.equivalences
            .sort_by_key(|c| c.iter().next().copied());
    }

    /// The class containing `id`, if it is in a non-singleton one.
    pub fn class_of(&self, id: ArcId) -> Option<&BTreeSet<ArcId>> {
        self.equivalences.iter().find(|c| c.contains(&id))
    }

    fn all_arcs(&self) -> impl Iterator<Item = ArcId> + '_ {
        self.predicate
            .iter()
            .chain(self.arguments.values().flatten())
            .chain(self.modifiers.values().flatten())
            .chain(self.equivalences.iter().flatten())
            .copied()
    }
}

fn hull(g: &AnnotationGraph, members: &BTreeSet<ArcId>) -> Result<(usize, usize), PropError> {
    let mut lo = usize::MAX;
    let mut hi = 0;
    for m in members {
        let (s, e) = g.span(*m)?;
        lo = lo.min(s);
        hi = hi.max(e);
    }
    Ok((lo, hi))
}

fn ordered(g: &AnnotationGraph, members: &BTreeSet<ArcId>) -> Vec<ArcId> {
    let mut v: Vec<ArcId> = members.iter().copied().collect();
    v.sort_by_key(|m| (g.span(*m).unwrap_or((0, 0)), g.depth(*m), *m));
    v
}

fn add_hull_arc(
    g: &mut AnnotationGraph,
    kind: ArcType,
    label: &str,
    members: &BTreeSet<ArcId>,
) -> Result<ArcId, PropError> {
    let (lo, hi) = hull(g, members)?;
    let (start, end) = (g.anchors()[lo].id, g.anchors()[hi].id);
    let mut fields = Fields::new();
    fields.insert("label".into(), label.to_string());
    let id = g.add_arc(start, end, kind, fields)?;
    let refs = ordered(g, members);
    g.set_refs(id, refs)?;
    Ok(id)
}

const EQUIV_FIELD: &str = "equiv";

/// Writes `p` into `g` as pred/arg/mod arcs; returns the pred arc followed by
/// the argument and modifier arcs.
pub fn materialize(g: &mut AnnotationGraph, p: &Proposition) -> Result<Vec<ArcId>, PropError> {
    if p.predicate.is_empty() {
        return Err(PropError::NoPredicate);
    }
    for id in p.all_arcs() {
        if g.arc(id)?.kind.family() != Family::Syntax {
            return Err(PropError::NotConstituent(id));
        }
    }
    let mut created = Vec::new();
    let mut role_arcs = Vec::new();
    for (label, set) in &p.arguments {
        role_arcs.push(add_hull_arc(g, ArcType::Arg, label, set)?);
    }
    for (label, set) in &p.modifiers {
        role_arcs.push(add_hull_arc(g, ArcType::Mod, label, set)?);
    }
    let pred = add_hull_arc(g, ArcType::Pred, "pred", &p.predicate)?;
    let mut refs = ordered(g, &p.predicate);
    refs.extend(role_arcs.iter().copied());
    g.set_refs(pred, refs)?;
    if !p.equivalences.is_empty() {
        let encoded = p
            .equivalences
            .iter()
            .map(|c| c.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(";");
        g.fields_mut(pred)?.insert(EQUIV_FIELD.into(), encoded);
    }
    created.push(pred);
    created.extend(role_arcs);
    Ok(created)
}

/// Reads every proposition back out of `g`, ordered by pred arc position.
pub fn extract(g: &AnnotationGraph) -> Result<Vec<Proposition>, PropError> {
    let mut preds: Vec<ArcId> = g
        .arcs()
        .filter(|a| a.kind == ArcType::Pred)
        .map(|a| a.id)
        .collect();
    preds.sort_by_key(|p| (g.span(*p).unwrap_or((0, 0)), *p));
    let mut out = Vec::new();
    for pred in preds {
        let arc = g.arc(pred)?;
        let mut p = Proposition::new();
        for r in &arc.refs {
            let target = g.arc(*r)?;
            match target.kind {
                ArcType::Arg | ArcType::Mod => {
                    let label = target.label().unwrap_or("").to_string();
                    let set: BTreeSet<ArcId> = target.refs.iter().copied().collect();
                    if target.kind == ArcType::Arg {
                        p.arguments.insert(label, set);
                    } else {
                        p.modifiers.insert(label, set);
                    }
                }
                ArcType::Pred => {}
                _ => {
                    p.predicate.insert(*r);
                }
            }
        }
        if let Some(encoded) = arc.field(EQUIV_FIELD) {
            for class in encoded.split(';').filter(|c| !c.trim().is_empty()) {
                let members = class
                    .split_whitespace()
                    .map(|m| m.parse::<ArcId>())
                    .collect::<Result<BTreeSet<_>, _>>()
                    .map_err(|_| PropError::BadEquivalence(encoded.to_string()))?;
                if members.len() < 2 {
                    return Err(PropError::BadEquivalence(encoded.to_string()));
                }
                p.equivalences.push(members);
            }
            p.equivalences.sort_by_key(|c| c.iter().next().copied());
        }
        out.push(p);
    }
    Ok(out)
}

fn constituent_text(g: &AnnotationGraph, id: ArcId) -> String {
    let words: Vec<String> = g
        .covered_terminals(id)
        .unwrap_or_default()
        .into_iter()
        .filter_map(|t| {
            let a = g.arc(t).ok()?;
            (a.kind == ArcType::Word).then(|| a.form().unwrap_or("").to_string())
        })
        .collect();
    words.join(" ")
}

fn member_text(g: &AnnotationGraph, p: &Proposition, id: ArcId) -> String {
    let text = constituent_text(g, id);
    if !text.is_empty() {
        return text;
    }
    let antecedent = p.class_of(id).and_then(|class| {
        class
            .iter()
            .filter(|m| **m != id)
            .map(|m| constituent_text(g, *m))
            .find(|t| !t.is_empty())
    });
    match antecedent {
        Some(a) => format!("*trace* -> {a}"),
        None => "*trace*".to_string(),
    }
}

fn set_text(g: &AnnotationGraph, p: &Proposition, set: &BTreeSet<ArcId>, bracket: bool) -> String {
    let parts: Vec<String> = ordered(g, set)
        .into_iter()
        .map(|m| member_text(g, p, m))
        .collect();
    if bracket && parts.len() > 1 {
        parts.iter().map(|t| format!("[{t}]")).collect::<Vec<_>>().join(" ")
    } else {
        parts.join(" ")
    }
}

fn line(label: &str, text: &str) -> String {
    format!("{:<12}{}\n", format!("{label}:"), text)
}

/// Renders one proposition as a `rel:` / role block.
pub fn format_proposition(g: &AnnotationGraph, p: &Proposition) -> String {
    let mut out = line("rel", &set_text(g, p, &p.predicate, false));
    for (label, set) in p.arguments.iter().chain(p.modifiers.iter()) {
        out.push_str(&line(label, &set_text(g, p, set, true)));
    }
    out
}

/// The sentence followed by one block per proposition, blank-line separated.
pub fn export_text(g: &AnnotationGraph) -> Result<String, PropError> {
    let mut out = g.surface().join(" ");
    out.push('\n');
    for p in extract(g)? {
        out.push('\n');
        out.push_str(&format_proposition(g, &p));
    }
    Ok(out)
}
