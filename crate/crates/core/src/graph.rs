//! The annotation-graph store shared by every annotation layer.
//!
//! Anchors are kept sorted by a dense rational order key so that new anchors
//! can be placed between any two existing ones without renumbering. Arcs carry
//! a fielded record, an optional parent pointer and an ordered list of
//! multi-target references.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ordered field-name to value map used as an arc label.
pub type Fields = IndexMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown anchor {0}")]
    UnknownAnchor(AnchorId),
    #[error("unknown arc {0}")]
    UnknownArc(ArcId),
    #[error("arc span is reversed: {start} comes after {end}")]
    ReversedSpan { start: AnchorId, end: AnchorId },
    #[error("zero-width span at {0} is only allowed for trace arcs")]
    ZeroWidth(AnchorId),
    #[error("setting parent of {child} to {parent} would create a cycle")]
    Cycle { child: ArcId, parent: ArcId },
    #[error("{parent} ({kind}) cannot be a parent")]
    BadParent { parent: ArcId, kind: ArcType },
    #[error("{child} ({kind}) cannot have a parent")]
    BadChild { child: ArcId, kind: ArcType },
    #[error("ambiguous sibling of {arc}: {candidates:?}")]
    AmbiguousSibling { arc: ArcId, candidates: Vec<ArcId> },
    #[error("{0} is still referenced by other arcs")]
    StillReferenced(String),
    #[error("duplicate identifier {0}")]
    DuplicateId(String),
    #[error("invalid identifier {0:?}")]
    InvalidId(String),
    #[error("invalid order key {0:?}")]
    InvalidOrderKey(String),
}

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl FromStr for $name {
            type Err = GraphError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix($prefix)
                    .and_then(|n| n.parse().ok())
                    .map($name)
                    .ok_or_else(|| GraphError::InvalidId(s.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

id_type!(AnchorId, "a");
id_type!(ArcId, "e");

/// Dense sort key for anchors. Any two keys have a key strictly between them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrderKey(BigRational);

impl OrderKey {
    pub fn integer(i: i64) -> Self {
        OrderKey(BigRational::from_integer(BigInt::from(i)))
    }

    pub fn midpoint(&self, other: &OrderKey) -> OrderKey {
        let two = BigRational::from_integer(BigInt::from(2));
        OrderKey((&self.0 + &other.0) / two)
    }

    pub fn successor(&self) -> OrderKey {
        OrderKey(self.0.floor() + BigRational::one())
    }
}

impl fmt::Display for OrderKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for OrderKey {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::InvalidOrderKey(s.to_string());
        let value = match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.parse().map_err(|_| bad())?;
                let d: BigInt = d.parse().map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                BigRational::new(n, d)
            }
            None => BigRational::from_integer(s.parse().map_err(|_| bad())?),
        };
        Ok(OrderKey(value))
    }
}

impl Serialize for OrderKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OrderKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: AnchorId,
    pub order: OrderKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcType {
    Word,
    Phrasal,
    Root,
    Trace,
    Pred,
    Arg,
    Mod,
}

/// Layers that share a graph. Sibling relations only hold within one family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Syntax,
    Proposition,
}

impl ArcType {
    pub fn family(self) -> Family {
        match self {
            ArcType::Word | ArcType::Phrasal | ArcType::Root | ArcType::Trace => Family::Syntax,
            ArcType::Pred | ArcType::Arg | ArcType::Mod => Family::Proposition,
        }
    }

    /// Word and trace arcs make up the terminal sequence.
    pub fn is_terminal(self) -> bool {
        matches!(self, ArcType::Word | ArcType::Trace)
    }

    pub fn can_be_parent(self) -> bool {
        matches!(self, ArcType::Phrasal | ArcType::Root | ArcType::Word)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArcType::Word => "word",
            ArcType::Phrasal => "phrasal",
            ArcType::Root => "root",
            ArcType::Trace => "trace",
            ArcType::Pred => "pred",
            ArcType::Arg => "arg",
            ArcType::Mod => "mod",
        }
    }
}

impl fmt::Display for ArcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArcType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "word" => ArcType::Word,
            "phrasal" => ArcType::Phrasal,
            "root" => ArcType::Root,
            "trace" => ArcType::Trace,
            "pred" => ArcType::Pred,
            "arg" => ArcType::Arg,
            "mod" => ArcType::Mod,
            other => return Err(format!("unknown arc type {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: ArcId,
    pub start: AnchorId,
    pub end: AnchorId,
    #[serde(rename = "type")]
    pub kind: ArcType,
    pub fields: Fields,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<ArcId>,
    #[serde(default)]
    pub refs: Vec<ArcId>,
}

impl Arc {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    /// Category label; `None` or empty means an unlabeled node.
    pub fn label(&self) -> Option<&str> {
        self.field("label").filter(|l| !l.is_empty())
    }

    pub fn form(&self) -> Option<&str> {
        self.field("form")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SiblingOptions {
    /// Hop over trace arcs when looking for the adjacent sibling.
    pub skip_traces: bool,
}

/// A broken graph invariant, reported by [`AnnotationGraph::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub subjects: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    DuplicateOrder,
    OffsetOrder,
    DanglingReference,
    ReversedSpan,
    ZeroWidth,
    ParentType,
    ParentCycle,
    RefsNotAllowed,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {:?}: {}", self.subjects.join(","), self.rule, self.message)
    }
}

/// Before-images of everything an edit touched; applying it undoes the edit.
#[derive(Debug, Clone, Default)]
pub struct GraphDelta {
    anchors: Vec<(AnchorId, Option<Anchor>)>,
    arcs: Vec<(ArcId, Option<Arc>)>,
    next_anchor: u32,
    next_arc: u32,
}

impl GraphDelta {
    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty() && self.arcs.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationGraph {
    anchors: Vec<Anchor>,
    position: HashMap<AnchorId, usize>,
    arcs: BTreeMap<ArcId, Arc>,
    next_anchor: u32,
    next_arc: u32,
}

impl PartialEq for AnnotationGraph {
    fn eq(&self, other: &Self) -> bool {
        self.anchors == other.anchors && self.arcs == other.arcs
    }
}

impl AnnotationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from raw parts without checking arc invariants; use
    /// [`validate`](Self::validate) afterwards. Only identifier clashes fail.
    pub fn from_parts(anchors: Vec<Anchor>, arcs: Vec<Arc>) -> Result<Self, GraphError> {
        let mut g = AnnotationGraph::new();
        let mut seen = BTreeSet::new();
        for a in &anchors {
            if !seen.insert(a.id) {
                return Err(GraphError::DuplicateId(a.id.to_string()));
            }
        }
        g.anchors = anchors;
        g.anchors.sort_by(|a, b| a.order.cmp(&b.order));
        g.reindex();
        for arc in arcs {
            if g.arcs.contains_key(&arc.id) {
                return Err(GraphError::DuplicateId(arc.id.to_string()));
            }
            g.arcs.insert(arc.id, arc);
        }
        g.next_anchor = g.anchors.iter().map(|a| a.id.0 + 1).max().unwrap_or(0);
        g.next_arc = g.arcs.keys().map(|a| a.0 + 1).max().unwrap_or(0);
        Ok(g)
    }

    fn reindex(&mut self) {
        self.position = self
            .anchors
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id, i))
            .collect();
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn anchor(&self, id: AnchorId) -> Option<&Anchor> {
        self.position.get(&id).map(|&i| &self.anchors[i])
    }

    /// Index of the anchor in the total order.
    pub fn position(&self, id: AnchorId) -> Result<usize, GraphError> {
        self.position
            .get(&id)
            .copied()
            .ok_or(GraphError::UnknownAnchor(id))
    }

    /// Appends an anchor after the current last one.
    pub fn push_anchor(&mut self, offset: Option<f64>) -> AnchorId {
        let order = match self.anchors.last() {
            Some(last) => last.order.successor(),
            None => OrderKey::integer(0),
        };
        let id = AnchorId(self.next_anchor);
        self.next_anchor += 1;
        self.position.insert(id, self.anchors.len());
        self.anchors.push(Anchor { id, order, offset });
        id
    }

    /// Inserts a fresh anchor immediately after `after`, before its successor.
    pub fn add_anchor_after(&mut self, after: AnchorId) -> Result<AnchorId, GraphError> {
        let pos = self.position(after)?;
        let order = match self.anchors.get(pos + 1) {
            Some(next) => self.anchors[pos].order.midpoint(&next.order),
            None => self.anchors[pos].order.successor(),
        };
        let id = AnchorId(self.next_anchor);
        self.next_anchor += 1;
        self.anchors.insert(
            pos + 1,
            Anchor {
                id,
                order,
                offset: None,
            },
        );
        self.reindex();
        Ok(id)
    }

    pub fn set_offset(&mut self, id: AnchorId, offset: Option<f64>) -> Result<(), GraphError> {
        let pos = self.position(id)?;
        self.anchors[pos].offset = offset;
        Ok(())
    }

    /// Removes an anchor that no arc uses.
    pub fn remove_anchor(&mut self, id: AnchorId) -> Result<(), GraphError> {
        let pos = self.position(id)?;
        if self.arcs.values().any(|a| a.start == id || a.end == id) {
            return Err(GraphError::StillReferenced(id.to_string()));
        }
        self.anchors.remove(pos);
        self.reindex();
        Ok(())
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Arc> + '_ {
        self.arcs.values()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arc(&self, id: ArcId) -> Result<&Arc, GraphError> {
        self.arcs.get(&id).ok_or(GraphError::UnknownArc(id))
    }

    pub fn contains_arc(&self, id: ArcId) -> bool {
        self.arcs.contains_key(&id)
    }

    fn check_span(&self, start: AnchorId, end: AnchorId, kind: ArcType) -> Result<(), GraphError> {
        let s = self.position(start)?;
        let e = self.position(end)?;
        if s > e {
            return Err(GraphError::ReversedSpan { start, end });
        }
        if s == e && kind != ArcType::Trace {
            return Err(GraphError::ZeroWidth(start));
        }
        Ok(())
    }

    pub fn add_arc(
        &mut self,
        start: AnchorId,
        end: AnchorId,
        kind: ArcType,
        fields: Fields,
    ) -> Result<ArcId, GraphError> {
        self.check_span(start, end, kind)?;
        let id = ArcId(self.next_arc);
        self.next_arc += 1;
        self.arcs.insert(
            id,
            Arc {
                id,
                start,
                end,
                kind,
                fields,
                parent: None,
                refs: Vec::new(),
            },
        );
        Ok(id)
    }

    /// Removes an arc nothing points at.
    pub fn remove_arc(&mut self, id: ArcId) -> Result<Arc, GraphError> {
        self.arc(id)?;
        if self
            .arcs
            .values()
            .any(|a| a.parent == Some(id) || a.refs.contains(&id))
        {
            return Err(GraphError::StillReferenced(id.to_string()));
        }
        Ok(self.arcs.remove(&id).expect("checked above"))
    }

    pub fn fields_mut(&mut self, id: ArcId) -> Result<&mut Fields, GraphError> {
        self.arcs
            .get_mut(&id)
            .map(|a| &mut a.fields)
            .ok_or(GraphError::UnknownArc(id))
    }

    pub fn set_span(&mut self, id: ArcId, start: AnchorId, end: AnchorId) -> Result<(), GraphError> {
        let kind = self.arc(id)?.kind;
        self.check_span(start, end, kind)?;
        let arc = self.arcs.get_mut(&id).expect("checked above");
        arc.start = start;
        arc.end = end;
        Ok(())
    }

    /// Moves every arc endpoint sitting on `from` over to `to`.
    pub(crate) fn retarget_endpoints(
        &mut self,
        from: AnchorId,
        to: AnchorId,
        mut include: impl FnMut(&Arc) -> (bool, bool),
    ) {
        for arc in self.arcs.values_mut() {
            let (move_start, move_end) = include(arc);
            if move_start && arc.start == from {
                arc.start = to;
            }
            if move_end && arc.end == from {
                arc.end = to;
            }
        }
    }

    pub fn set_refs(&mut self, id: ArcId, refs: Vec<ArcId>) -> Result<(), GraphError> {
        for r in &refs {
            self.arc(*r)?;
        }
        self.arcs
            .get_mut(&id)
            .ok_or(GraphError::UnknownArc(id))?
            .refs = refs;
        Ok(())
    }

    pub fn parent(&self, id: ArcId) -> Option<ArcId> {
        self.arcs.get(&id).and_then(|a| a.parent)
    }

    pub fn set_parent(&mut self, child: ArcId, parent: Option<ArcId>) -> Result<(), GraphError> {
        let child_kind = self.arc(child)?.kind;
        if let Some(p) = parent {
            let pk = self.arc(p)?.kind;
            if !pk.can_be_parent() {
                return Err(GraphError::BadParent { parent: p, kind: pk });
            }
            if child_kind.family() != crate::graph::Family::Syntax {
                return Err(GraphError::BadChild {
                    child,
                    kind: child_kind,
                });
            }
            let mut cursor = Some(p);
            while let Some(c) = cursor {
                if c == child {
                    return Err(GraphError::Cycle { child, parent: p });
                }
                cursor = self.parent(c);
            }
        }
        self.arcs.get_mut(&child).expect("checked above").parent = parent;
        Ok(())
    }

    /// Parent chain from the immediate parent upwards. Stops on a cycle.
    pub fn ancestors(&self, id: ArcId) -> Vec<ArcId> {
        let mut out = Vec::new();
        let mut cursor = self.parent(id);
        while let Some(c) = cursor {
            if c == id || out.contains(&c) {
                break;
            }
            out.push(c);
            cursor = self.parent(c);
        }
        out
    }

    pub fn depth(&self, id: ArcId) -> usize {
        self.ancestors(id).len()
    }

    pub fn is_ancestor(&self, ancestor: ArcId, of: ArcId) -> bool {
        self.ancestors(of).contains(&ancestor)
    }

    /// Start and end positions of an arc in anchor order.
    pub fn span(&self, id: ArcId) -> Result<(usize, usize), GraphError> {
        let arc = self.arc(id)?;
        Ok((self.position(arc.start)?, self.position(arc.end)?))
    }

    fn sort_key(&self, id: ArcId) -> (usize, std::cmp::Reverse<usize>, usize, ArcId) {
        let (s, e) = self.span(id).unwrap_or((usize::MAX, usize::MAX));
        (s, std::cmp::Reverse(self.depth(id)), e, id)
    }

    /// Children by start anchor; ties go innermost first.
    pub fn children_in_order(&self, id: ArcId) -> Vec<ArcId> {
        let mut kids: Vec<ArcId> = self
            .arcs
            .values()
            .filter(|a| a.parent == Some(id))
            .map(|a| a.id)
            .collect();
        kids.sort_by_cached_key(|k| self.sort_key(*k));
        kids
    }

    /// Parentless syntactic arcs in order: the top level of a forest.
    pub fn top_level(&self) -> Vec<ArcId> {
        let mut tops: Vec<ArcId> = self
            .arcs
            .values()
            .filter(|a| a.parent.is_none() && a.kind.family() == Family::Syntax)
            .map(|a| a.id)
            .collect();
        tops.sort_by_cached_key(|k| self.sort_key(*k));
        tops
    }

    /// Arcs of the same family and parent as `x`, including `x`, in order.
    pub fn siblings(&self, x: ArcId) -> Result<Vec<ArcId>, GraphError> {
        let arc = self.arc(x)?;
        Ok(match arc.parent {
            Some(p) => self.children_in_order(p),
            None if arc.kind.family() == Family::Syntax => self.top_level(),
            None => vec![x],
        })
    }

    fn sibling_toward(
        &self,
        x: ArcId,
        opts: SiblingOptions,
        right: bool,
    ) -> Result<Option<ArcId>, GraphError> {
        let mut current = self.arc(x)?.clone();
        let family = current.kind.family();
        loop {
            let candidates: Vec<ArcId> = self
                .arcs
                .values()
                .filter(|y| {
                    y.id != current.id
                        && y.id != x
                        && y.kind.family() == family
                        && y.parent == current.parent
                        && if right {
                            y.start == current.end
                        } else {
                            y.end == current.start
                        }
                })
                .map(|y| y.id)
                .collect();
            let found = match candidates.len() {
                0 => return Ok(None),
                1 => candidates[0],
                _ => {
                    return Err(GraphError::AmbiguousSibling {
                        arc: x,
                        candidates,
                    })
                }
            };
            let arc = self.arc(found)?;
            if opts.skip_traces && arc.kind == ArcType::Trace {
                current = arc.clone();
                continue;
            }
            return Ok(Some(found));
        }
    }

    /// The arc starting where `x` ends under the same parent.
    pub fn right_sibling(&self, x: ArcId) -> Result<Option<ArcId>, GraphError> {
        self.sibling_toward(x, SiblingOptions::default(), true)
    }

    pub fn right_sibling_with(
        &self,
        x: ArcId,
        opts: SiblingOptions,
    ) -> Result<Option<ArcId>, GraphError> {
        self.sibling_toward(x, opts, true)
    }

    pub fn left_sibling(&self, x: ArcId) -> Result<Option<ArcId>, GraphError> {
        self.sibling_toward(x, SiblingOptions::default(), false)
    }

    pub fn left_sibling_with(
        &self,
        x: ArcId,
        opts: SiblingOptions,
    ) -> Result<Option<ArcId>, GraphError> {
        self.sibling_toward(x, opts, false)
    }

    /// Arcs sharing both anchors with `x`, outermost first.
    pub fn coterminous(&self, x: ArcId) -> Result<Vec<ArcId>, GraphError> {
        let arc = self.arc(x)?;
        let mut out: Vec<ArcId> = self
            .arcs
            .values()
            .filter(|y| y.start == arc.start && y.end == arc.end && y.kind.family() == arc.kind.family())
            .map(|y| y.id)
            .collect();
        out.sort_by_key(|id| (self.depth(*id), *id));
        Ok(out)
    }

    /// Word and trace arcs in anchor order.
    pub fn terminals(&self) -> Vec<ArcId> {
        let mut ts: Vec<ArcId> = self
            .arcs
            .values()
            .filter(|a| a.kind.is_terminal())
            .map(|a| a.id)
            .collect();
        ts.sort_by_cached_key(|k| self.sort_key(*k));
        ts
    }

    /// Surface word forms in order; traces contribute nothing.
    pub fn surface(&self) -> Vec<String> {
        self.terminals()
            .into_iter()
            .filter_map(|t| {
                let arc = &self.arcs[&t];
                (arc.kind == ArcType::Word).then(|| arc.form().unwrap_or("").to_string())
            })
            .collect()
    }

    /// Terminals whose span lies within `id`'s span.
    pub fn covered_terminals(&self, id: ArcId) -> Result<Vec<ArcId>, GraphError> {
        let (s, e) = self.span(id)?;
        Ok(self
            .terminals()
            .into_iter()
            .filter(|t| {
                self.span(*t)
                    .map(|(ts, te)| ts >= s && te <= e)
                    .unwrap_or(false)
            })
            .collect())
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut violation = |rule, subjects: Vec<String>, message: String| {
            out.push(Violation {
                rule,
                subjects,
                message,
            })
        };

        for pair in self.anchors.windows(2) {
            if pair[0].order == pair[1].order {
                violation(
                    Rule::DuplicateOrder,
                    vec![pair[0].id.to_string(), pair[1].id.to_string()],
                    format!("anchors share order key {}", pair[0].order),
                );
            }
        }
        let mut last_offset: Option<(AnchorId, f64)> = None;
        for a in &self.anchors {
            if let Some(off) = a.offset {
                if off < 0.0 || off.is_nan() {
                    violation(
                        Rule::OffsetOrder,
                        vec![a.id.to_string()],
                        format!("offset {off} is negative"),
                    );
                }
                if let Some((prev, prev_off)) = last_offset {
                    if off < prev_off {
                        violation(
                            Rule::OffsetOrder,
                            vec![prev.to_string(), a.id.to_string()],
                            format!("offset {off} precedes earlier anchor offset {prev_off}"),
                        );
                    }
                }
                last_offset = Some((a.id, off));
            }
        }

        for arc in self.arcs.values() {
            let s = self.position.get(&arc.start);
            let e = self.position.get(&arc.end);
            for (anchor, pos) in [(arc.start, s), (arc.end, e)] {
                if pos.is_none() {
                    violation(
                        Rule::DanglingReference,
                        vec![arc.id.to_string(), anchor.to_string()],
                        format!("anchor {anchor} does not exist"),
                    );
                }
            }
            if let (Some(s), Some(e)) = (s, e) {
                if s > e {
                    violation(
                        Rule::ReversedSpan,
                        vec![arc.id.to_string()],
                        format!("span {} -> {} runs backwards", arc.start, arc.end),
                    );
                } else if s == e && arc.kind != ArcType::Trace {
                    violation(
                        Rule::ZeroWidth,
                        vec![arc.id.to_string()],
                        format!("{} arc has zero width", arc.kind),
                    );
                }
            }
            if let Some(p) = arc.parent {
                match self.arcs.get(&p) {
                    None => violation(
                        Rule::DanglingReference,
                        vec![arc.id.to_string(), p.to_string()],
                        format!("parent {p} does not exist"),
                    ),
                    Some(parent) if !parent.kind.can_be_parent() => violation(
                        Rule::ParentType,
                        vec![arc.id.to_string(), p.to_string()],
                        format!("{} arc cannot be a parent", parent.kind),
                    ),
                    Some(_) if arc.kind.family() != Family::Syntax => violation(
                        Rule::ParentType,
                        vec![arc.id.to_string()],
                        format!("{} arc cannot have a parent", arc.kind),
                    ),
                    _ => {}
                }
            }
            if !arc.refs.is_empty() && arc.kind.family() == Family::Syntax {
                violation(
                    Rule::RefsNotAllowed,
                    vec![arc.id.to_string()],
                    format!("{} arc carries refs", arc.kind),
                );
            }
            for r in &arc.refs {
                if !self.arcs.contains_key(r) {
                    violation(
                        Rule::DanglingReference,
                        vec![arc.id.to_string(), r.to_string()],
                        format!("ref {r} does not exist"),
                    );
                }
            }
        }

        // Each parent cycle is reported once, naming all of its members.
        let mut reported: BTreeSet<ArcId> = BTreeSet::new();
        for start in self.arcs.keys() {
            let mut path: Vec<ArcId> = vec![*start];
            let mut cursor = self.parent(*start);
            while let Some(c) = cursor {
                if !self.arcs.contains_key(&c) {
                    break;
                }
                if let Some(i) = path.iter().position(|p| *p == c) {
                    let mut cycle: Vec<ArcId> = path[i..].to_vec();
                    cycle.sort();
                    if !cycle.iter().any(|a| reported.contains(a)) {
                        reported.extend(cycle.iter().copied());
                        violation(
                            Rule::ParentCycle,
                            cycle.iter().map(ToString::to_string).collect(),
                            "parent pointers form a cycle".to_string(),
                        );
                    }
                    break;
                }
                path.push(c);
                cursor = self.parent(c);
            }
        }
        out
    }

    /// Records before-images of everything that differs between `self` (the
    /// state before an edit) and `after`.
    pub fn delta_to(&self, after: &AnnotationGraph) -> GraphDelta {
        let mut anchors = Vec::new();
        let before_anchors: BTreeMap<AnchorId, &Anchor> =
            self.anchors.iter().map(|a| (a.id, a)).collect();
        let after_anchors: BTreeMap<AnchorId, &Anchor> =
            after.anchors.iter().map(|a| (a.id, a)).collect();
        let ids: BTreeSet<AnchorId> = before_anchors
            .keys()
            .chain(after_anchors.keys())
            .copied()
            .collect();
        for id in ids {
            let b = before_anchors.get(&id).copied();
            if b != after_anchors.get(&id).copied() {
                anchors.push((id, b.cloned()));
            }
        }
        let mut arcs = Vec::new();
        let ids: BTreeSet<ArcId> = self.arcs.keys().chain(after.arcs.keys()).copied().collect();
        for id in ids {
            let b = self.arcs.get(&id);
            if b != after.arcs.get(&id) {
                arcs.push((id, b.cloned()));
            }
        }
        GraphDelta {
            anchors,
            arcs,
            next_anchor: self.next_anchor,
            next_arc: self.next_arc,
        }
    }

    /// Restores the before-images recorded in `delta`.
    pub fn apply_delta(&mut self, delta: &GraphDelta) {
        for (id, anchor) in &delta.anchors {
            self.anchors.retain(|a| a.id != *id);
            if let Some(a) = anchor {
                self.anchors.push(a.clone());
            }
        }
        self.anchors.sort_by(|a, b| a.order.cmp(&b.order));
        self.reindex();
        for (id, arc) in &delta.arcs {
            match arc {
                Some(a) => {
                    self.arcs.insert(*id, a.clone());
                }
                None => {
                    self.arcs.remove(id);
                }
            }
        }
        self.next_anchor = delta.next_anchor;
        self.next_arc = delta.next_arc;
    }
}
