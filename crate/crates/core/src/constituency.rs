//! Phrase-structure trees as charts over a fixed terminal sequence, and the
//! elementary edits that restructure them without touching the terminals.
//!
//! Every tree node is an arc spanning its terminals; the parent pointer on each
//! arc carries the dominance relation, which is what disambiguates unary
//! chains. Terminals (words and traces) tile the anchor sequence, so a trace
//! occupies its own anchor interval that carries no surface material.

use std::collections::HashSet;

use thiserror::Error;

use crate::graph::{AnchorId, AnnotationGraph, ArcId, ArcType, Family, Fields, GraphError};
use crate::tree::TreeNode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{op}: {reason}")]
    Precondition { op: &'static str, reason: String },
    #[error("tree has no terminals")]
    EmptyTree,
    #[error("{0} lies under the root's span but is not linked into the tree")]
    Orphan(ArcId),
}

pub(crate) fn refuse<T>(op: &'static str, reason: impl Into<String>) -> Result<T, EditError> {
    Err(EditError::Precondition {
        op,
        reason: reason.into(),
    })
}

/// Builds the chart for `tree`: one anchor per terminal boundary, one arc per
/// node, parent pointers for every non-root node. Returns the root arc.
pub fn build_chart(tree: &TreeNode) -> Result<(AnnotationGraph, ArcId), EditError> {
    let mut g = AnnotationGraph::new();
    let root = append_chart(&mut g, tree)?;
    Ok((g, root))
}

/// Appends the chart for `tree` after the last anchor of `g`.
pub fn append_chart(g: &mut AnnotationGraph, tree: &TreeNode) -> Result<ArcId, EditError> {
    fn count(node: &TreeNode) -> Result<usize, EditError> {
        match node {
            TreeNode::Phrase { children, .. } => {
                if children.is_empty() {
                    return Err(EditError::EmptyTree);
                }
                children.iter().map(count).sum()
            }
            _ => Ok(1),
        }
    }
    fn build(
        g: &mut AnnotationGraph,
        node: &TreeNode,
        bounds: &[AnchorId],
        next: &mut usize,
    ) -> Result<ArcId, EditError> {
        match node {
            TreeNode::Word { fields } | TreeNode::Trace { fields } => {
                let kind = if matches!(node, TreeNode::Word { .. }) {
                    ArcType::Word
                } else {
                    ArcType::Trace
                };
                let id = g.add_arc(bounds[*next], bounds[*next + 1], kind, fields.clone())?;
                *next += 1;
                Ok(id)
            }
            TreeNode::Phrase { fields, children } => {
                let first = *next;
                let kids = children
                    .iter()
                    .map(|c| build(g, c, bounds, next))
                    .collect::<Result<Vec<_>, _>>()?;
                let id = g.add_arc(bounds[first], bounds[*next], ArcType::Phrasal, fields.clone())?;
                for k in kids {
                    g.set_parent(k, Some(id))?;
                }
                Ok(id)
            }
        }
    }

    let n = count(tree)?;
    let mut bounds = Vec::with_capacity(n + 1);
    match g.anchors().last() {
        Some(last) => bounds.push(last.id),
        None => bounds.push(g.push_anchor(None)),
    }
    for _ in 0..n {
        bounds.push(g.push_anchor(None));
    }
    let mut next = 0;
    build(g, tree, &bounds, &mut next)
}

/// Gives every anchor a character offset: words advance by their length plus
/// one separator, traces by nothing.
pub fn assign_offsets(g: &mut AnnotationGraph) -> Result<(), GraphError> {
    let terminals = g.terminals();
    let words_total = terminals
        .iter()
        .filter(|t| g.arc(**t).map(|a| a.kind == ArcType::Word).unwrap_or(false))
        .count();
    let mut offset = 0.0;
    let mut words_seen = 0;
    let mut assignments = Vec::new();
    for t in &terminals {
        let arc = g.arc(*t)?;
        assignments.push((arc.start, offset));
        if arc.kind == ArcType::Word {
            words_seen += 1;
            offset += arc.form().unwrap_or("").chars().count() as f64;
            if words_seen < words_total {
                offset += 1.0;
            }
        }
        assignments.push((arc.end, offset));
    }
    for (anchor, off) in assignments {
        g.set_offset(anchor, Some(off))?;
    }
    Ok(())
}

/// Reads the tree under `root` back out through the parent pointers.
pub fn read_tree(g: &AnnotationGraph, root: ArcId) -> Result<TreeNode, EditError> {
    fn read(
        g: &AnnotationGraph,
        id: ArcId,
        seen: &mut HashSet<ArcId>,
    ) -> Result<TreeNode, EditError> {
        if !seen.insert(id) {
            return Err(GraphError::Cycle { child: id, parent: id }.into());
        }
        let arc = g.arc(id)?;
        let kids = g.children_in_order(id);
        Ok(match arc.kind {
            ArcType::Word if kids.is_empty() => TreeNode::Word {
                fields: arc.fields.clone(),
            },
            ArcType::Trace if kids.is_empty() => TreeNode::Trace {
                fields: arc.fields.clone(),
            },
            ArcType::Word | ArcType::Trace => {
                return refuse("read_tree", format!("terminal {id} has children"))
            }
            _ => TreeNode::Phrase {
                fields: arc.fields.clone(),
                children: kids
                    .into_iter()
                    .map(|k| read(g, k, seen))
                    .collect::<Result<_, _>>()?,
            },
        })
    }
    let mut seen = HashSet::new();
    let tree = read(g, root, &mut seen)?;
    let (rs, re) = g.span(root)?;
    for arc in g.arcs() {
        if arc.kind.family() != Family::Syntax || seen.contains(&arc.id) {
            continue;
        }
        let (s, e) = g.span(arc.id)?;
        if s >= rs && e <= re {
            return Err(EditError::Orphan(arc.id));
        }
    }
    Ok(tree)
}

/// The outermost syntactic arc: a `root` arc if present, otherwise the widest
/// parentless syntactic arc.
pub fn find_root(g: &AnnotationGraph) -> Option<ArcId> {
    if let Some(r) = g.arcs().find(|a| a.kind == ArcType::Root) {
        return Some(r.id);
    }
    g.top_level().into_iter().max_by_key(|id| {
        let (s, e) = g.span(*id).unwrap_or((0, 0));
        (e - s, std::cmp::Reverse(s), std::cmp::Reverse(*id))
    })
}

fn syntactic_node(g: &AnnotationGraph, op: &'static str, n: ArcId) -> Result<ArcType, EditError> {
    let kind = g.arc(n)?.kind;
    match kind {
        ArcType::Word | ArcType::Phrasal | ArcType::Trace => Ok(kind),
        other => refuse(op, format!("{n} is a {other} arc")),
    }
}

fn referenced(g: &AnnotationGraph, id: ArcId) -> bool {
    g.arcs().any(|a| a.refs.contains(&id))
}

fn ensure_removable(g: &AnnotationGraph, op: &'static str, id: ArcId) -> Result<(), EditError> {
    if referenced(g, id) {
        return refuse(op, format!("{id} is referenced by a proposition"));
    }
    Ok(())
}

/// Inserts an unlabeled node coterminous with `n`, taking `n`'s place.
pub fn move_down(g: &mut AnnotationGraph, n: ArcId) -> Result<ArcId, EditError> {
    syntactic_node(g, "move_down", n)?;
    let arc = g.arc(n)?;
    let (start, end, parent) = (arc.start, arc.end, arc.parent);
    let fresh = g.add_arc(start, end, ArcType::Phrasal, Fields::new())?;
    g.set_parent(fresh, parent)?;
    g.set_parent(n, Some(fresh))?;
    Ok(fresh)
}

/// Deletes the parent of an only child; the child takes the parent's place.
pub fn move_up(g: &mut AnnotationGraph, n: ArcId) -> Result<(), EditError> {
    const OP: &str = "move_up";
    syntactic_node(g, OP, n)?;
    let Some(p) = g.parent(n) else {
        return refuse(OP, format!("{n} is the root"));
    };
    if g.arc(p)?.kind != ArcType::Phrasal {
        return refuse(OP, format!("parent {p} is not a phrasal arc"));
    }
    if g.children_in_order(p).len() > 1 {
        return refuse(OP, format!("{n} has siblings"));
    }
    ensure_removable(g, OP, p)?;
    let grandparent = g.parent(p);
    g.set_parent(n, grandparent)?;
    g.remove_arc(p)?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

fn promote(g: &mut AnnotationGraph, n: ArcId, side: Side) -> Result<(), EditError> {
    let op = match side {
        Side::Right => "promote_right",
        Side::Left => "promote_left",
    };
    syntactic_node(g, op, n)?;
    let Some(p) = g.parent(n) else {
        return refuse(op, format!("{n} has no parent"));
    };
    let parent = g.arc(p)?.clone();
    if parent.kind != ArcType::Phrasal {
        return refuse(op, format!("parent {p} is not a phrasal arc"));
    }
    let kids = g.children_in_order(p);
    if kids.len() < 2 {
        return refuse(op, format!("{n} is an only child; use move_up"));
    }
    let node = g.arc(n)?.clone();
    let (edge_ok, at_edge) = match side {
        Side::Right => (parent.end == node.end, kids.last() == Some(&n)),
        Side::Left => (parent.start == node.start, kids.first() == Some(&n)),
    };
    if !at_edge {
        let dir = if side == Side::Right { "right" } else { "left" };
        return refuse(op, format!("{n} has siblings to its {dir}"));
    }
    if !edge_ok {
        return refuse(op, format!("{n} does not sit at the edge of {p}"));
    }
    let Some(grandparent) = parent.parent else {
        return refuse(op, format!("parent {p} is the outermost node"));
    };
    match side {
        Side::Right => g.set_span(p, parent.start, node.start)?,
        Side::Left => g.set_span(p, node.end, parent.end)?,
    }
    g.set_parent(n, Some(grandparent))?;
    Ok(())
}

/// Moves a rightmost child out of its parent, to the parent's right.
pub fn promote_right(g: &mut AnnotationGraph, n: ArcId) -> Result<(), EditError> {
    promote(g, n, Side::Right)
}

pub fn promote_left(g: &mut AnnotationGraph, n: ArcId) -> Result<(), EditError> {
    promote(g, n, Side::Left)
}

fn demote(g: &mut AnnotationGraph, n: ArcId, side: Side) -> Result<(), EditError> {
    let op = match side {
        Side::Right => "demote_right",
        Side::Left => "demote_left",
    };
    syntactic_node(g, op, n)?;
    let sibling = match side {
        Side::Right => g.right_sibling(n)?,
        Side::Left => g.left_sibling(n)?,
    };
    let Some(y) = sibling else {
        let dir = if side == Side::Right { "right" } else { "left" };
        return refuse(op, format!("{n} has no sibling to its {dir}"));
    };
    let target = g.arc(y)?.clone();
    if target.kind != ArcType::Phrasal {
        return refuse(op, format!("sibling {y} is a {} arc, not phrasal", target.kind));
    }
    let node = g.arc(n)?.clone();
    match side {
        Side::Right => g.set_span(y, node.start, target.end)?,
        Side::Left => g.set_span(y, target.start, node.end)?,
    }
    g.set_parent(n, Some(y))?;
    Ok(())
}

/// Makes `n` the leftmost child of its right sibling.
pub fn demote_right(g: &mut AnnotationGraph, n: ArcId) -> Result<(), EditError> {
    demote(g, n, Side::Right)
}

/// Makes `n` the rightmost child of its left sibling.
pub fn demote_left(g: &mut AnnotationGraph, n: ArcId) -> Result<(), EditError> {
    demote(g, n, Side::Left)
}

/// Groups contiguous siblings under a new unlabeled node: a move_down on the
/// first node followed by demote_left on each of the others.
pub fn group(g: &mut AnnotationGraph, nodes: &[ArcId]) -> Result<ArcId, EditError> {
    const OP: &str = "group";
    let Some(&first) = nodes.first() else {
        return refuse(OP, "no nodes selected");
    };
    for n in nodes {
        syntactic_node(g, OP, *n)?;
    }
    let siblings = g.siblings(first)?;
    let Some(at) = siblings.iter().position(|s| *s == first) else {
        return refuse(OP, format!("{first} is not among its parent's children"));
    };
    if siblings.get(at..at + nodes.len()) != Some(nodes) {
        return refuse(OP, "selection is not a contiguous run of siblings");
    }
    for pair in nodes.windows(2) {
        if g.right_sibling(pair[0])? != Some(pair[1]) {
            return refuse(OP, format!("{} and {} are not adjacent", pair[0], pair[1]));
        }
    }
    let fresh = move_down(g, first)?;
    for n in &nodes[1..] {
        demote_left(g, *n)?;
    }
    Ok(fresh)
}

/// Deletes a phrasal node, handing its children to its parent in place.
/// Returns the former children.
pub fn ungroup(g: &mut AnnotationGraph, n: ArcId) -> Result<Vec<ArcId>, EditError> {
    const OP: &str = "ungroup";
    let arc = g.arc(n)?;
    if arc.kind != ArcType::Phrasal {
        return refuse(OP, format!("{n} is a {} arc", arc.kind));
    }
    let Some(parent) = arc.parent else {
        return refuse(OP, format!("{n} is the root"));
    };
    ensure_removable(g, OP, n)?;
    let kids = g.children_in_order(n);
    for k in &kids {
        g.set_parent(*k, Some(parent))?;
    }
    g.remove_arc(n)?;
    Ok(kids)
}

/// Where a new trace goes in the terminal sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePosition {
    Before(ArcId),
    After(ArcId),
    Boundary(AnchorId),
}

fn default_trace_parent(g: &AnnotationGraph, at: usize) -> Result<Option<ArcId>, EditError> {
    let mut best: Option<(usize, std::cmp::Reverse<usize>, ArcId)> = None;
    for arc in g.arcs().filter(|a| a.kind == ArcType::Phrasal) {
        let (s, e) = g.span(arc.id)?;
        if s < at && at < e {
            let key = (e - s, std::cmp::Reverse(g.depth(arc.id)), arc.id);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    if let Some((_, _, id)) = best {
        return Ok(Some(id));
    }
    Ok(find_root(g).filter(|r| g.arc(*r).map(|a| a.kind == ArcType::Phrasal).unwrap_or(false)))
}

/// Inserts a trace at a terminal boundary. The trace gets a fresh anchor; arcs
/// to its right shift their start onto that anchor and arcs that dominate it
/// extend their end over it, so the surface string is untouched.
pub fn insert_trace(
    g: &mut AnnotationGraph,
    position: TracePosition,
    marker: &str,
    coindex: Option<&str>,
    parent: Option<ArcId>,
) -> Result<ArcId, EditError> {
    const OP: &str = "insert_trace";
    let boundary = match position {
        TracePosition::Boundary(a) => a,
        TracePosition::Before(t) | TracePosition::After(t) => {
            let arc = g.arc(t)?;
            if !arc.kind.is_terminal() {
                return refuse(OP, format!("{t} is not a terminal"));
            }
            if matches!(position, TracePosition::Before(_)) {
                arc.start
            } else {
                arc.end
            }
        }
    };
    let at = g.position(boundary)?;
    let host = match parent {
        Some(p) => {
            let arc = g.arc(p)?;
            if arc.kind != ArcType::Phrasal {
                return refuse(OP, format!("{p} is a {} arc", arc.kind));
            }
            let (s, e) = g.span(p)?;
            if !(s <= at && at <= e) {
                return refuse(OP, format!("{p} does not cover the insertion point"));
            }
            Some(p)
        }
        None => default_trace_parent(g, at)?,
    };
    let mut dominating: HashSet<ArcId> = HashSet::new();
    if let Some(h) = host {
        dominating.insert(h);
        dominating.extend(g.ancestors(h));
    }
    let fresh = g.add_anchor_after(boundary)?;
    g.retarget_endpoints(boundary, fresh, |arc| {
        if arc.start == arc.end {
            (false, false)
        } else if dominating.contains(&arc.id) {
            (false, true)
        } else {
            (true, false)
        }
    });
    let mut fields = Fields::new();
    fields.insert("form".into(), marker.to_string());
    if let Some(c) = coindex {
        fields.insert("coindex".into(), c.to_string());
    }
    let trace = g.add_arc(boundary, fresh, ArcType::Trace, fields)?;
    g.set_parent(trace, host)?;
    Ok(trace)
}

/// Removes a childless trace and merges its anchor interval away.
pub fn delete_trace(g: &mut AnnotationGraph, x: ArcId) -> Result<(), EditError> {
    const OP: &str = "delete_trace";
    let arc = g.arc(x)?.clone();
    if arc.kind != ArcType::Trace {
        return refuse(OP, format!("{x} is a {} arc, not a trace", arc.kind));
    }
    if !g.children_in_order(x).is_empty() {
        return refuse(OP, format!("trace {x} dominates structure"));
    }
    if let Some(p) = arc.parent {
        if g.children_in_order(p).len() == 1 {
            return refuse(OP, format!("parent {p} would be left empty"));
        }
    }
    ensure_removable(g, OP, x)?;
    if arc.start != arc.end {
        if let Some(other) = g
            .arcs()
            .find(|a| a.id != x && a.start == arc.start && a.end == arc.end)
        {
            return refuse(OP, format!("{} spans only the trace", other.id));
        }
    }
    g.remove_arc(x)?;
    if arc.start != arc.end {
        g.retarget_endpoints(arc.end, arc.start, |_| (true, true));
        g.remove_anchor(arc.end)?;
    }
    Ok(())
}

/// Sets label fields; an empty value removes the field.
pub fn relabel(g: &mut AnnotationGraph, n: ArcId, fields: &[(String, String)]) -> Result<(), EditError> {
    let target = g.fields_mut(n)?;
    for (k, v) in fields {
        if v.is_empty() {
            target.shift_remove(k);
        } else {
            target.insert(k.clone(), v.clone());
        }
    }
    Ok(())
}

/// Marks two arcs as coindexed with a shared tag.
pub fn coindex(g: &mut AnnotationGraph, a: ArcId, b: ArcId, tag: &str) -> Result<(), EditError> {
    g.arc(a)?;
    g.arc(b)?;
    g.fields_mut(a)?.insert("coindex".into(), tag.to_string());
    g.fields_mut(b)?.insert("coindex".into(), tag.to_string());
    Ok(())
}

/// A tree with one selected node, the unit every elementary edit works on.
#[derive(Debug)]
pub struct OrientedTree<'g> {
    graph: &'g mut AnnotationGraph,
    selected: ArcId,
}

impl<'g> OrientedTree<'g> {
    pub fn new(graph: &'g mut AnnotationGraph, selected: ArcId) -> Result<Self, EditError> {
        match graph.arc(selected)?.kind {
            ArcType::Word | ArcType::Phrasal | ArcType::Root | ArcType::Trace => {
                Ok(OrientedTree { graph, selected })
            }
            other => refuse("select", format!("{selected} is a {other} arc")),
        }
    }

    pub fn selected(&self) -> ArcId {
        self.selected
    }

    pub fn graph(&self) -> &AnnotationGraph {
        self.graph
    }

    pub fn select(&mut self, n: ArcId) -> Result<(), EditError> {
        let kind = self.graph.arc(n)?.kind;
        if kind.family() != Family::Syntax {
            return refuse("select", format!("{n} is a {kind} arc"));
        }
        self.selected = n;
        Ok(())
    }

    pub fn move_down(&mut self) -> Result<ArcId, EditError> {
        move_down(self.graph, self.selected)
    }

    pub fn move_up(&mut self) -> Result<(), EditError> {
        move_up(self.graph, self.selected)
    }

    pub fn promote_right(&mut self) -> Result<(), EditError> {
        promote_right(self.graph, self.selected)
    }

    pub fn promote_left(&mut self) -> Result<(), EditError> {
        promote_left(self.graph, self.selected)
    }

    pub fn demote_right(&mut self) -> Result<(), EditError> {
        demote_right(self.graph, self.selected)
    }

    pub fn demote_left(&mut self) -> Result<(), EditError> {
        demote_left(self.graph, self.selected)
    }

    /// Groups `nodes`; the selection is left where it was.
    pub fn group(&mut self, nodes: &[ArcId]) -> Result<ArcId, EditError> {
        group(self.graph, nodes)
    }

    /// Ungroups the selected node; the selection moves to its first child.
    pub fn ungroup(&mut self) -> Result<(), EditError> {
        let kids = ungroup(self.graph, self.selected)?;
        if let Some(first) = kids.first() {
            self.selected = *first;
        }
        Ok(())
    }

    pub fn insert_trace(
        &mut self,
        position: TracePosition,
        coindex: Option<&str>,
        parent: Option<ArcId>,
    ) -> Result<ArcId, EditError> {
        insert_trace(self.graph, position, "*", coindex, parent)
    }

    /// Deletes the selected trace; the selection moves to its former parent.
    pub fn delete_trace(&mut self) -> Result<(), EditError> {
        let parent = self.graph.parent(self.selected);
        delete_trace(self.graph, self.selected)?;
        if let Some(p) = parent {
            self.selected = p;
        }
        Ok(())
    }

    pub fn relabel(&mut self, fields: &[(String, String)]) -> Result<(), EditError> {
        relabel(self.graph, self.selected, fields)
    }

    pub fn coindex(&mut self, other: ArcId, tag: &str) -> Result<(), EditError> {
        coindex(self.graph, self.selected, other, tag)
    }
}

/// Structural findings that are not graph-invariant violations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeReport {
    pub unlabeled: Vec<ArcId>,
    pub discontinuous: Vec<ArcId>,
    pub empty: Vec<ArcId>,
}

/// Flags unlabeled phrasal nodes, empty constituents and nodes whose children
/// do not tile their span (crossing branches).
pub fn check_tree(g: &AnnotationGraph) -> TreeReport {
    let mut report = TreeReport::default();
    for arc in g.arcs().filter(|a| a.kind == ArcType::Phrasal) {
        if arc.label().is_none() {
            report.unlabeled.push(arc.id);
        }
        let kids = g.children_in_order(arc.id);
        if kids.is_empty() {
            report.empty.push(arc.id);
            continue;
        }
        let spans: Vec<(usize, usize)> = kids.iter().filter_map(|k| g.span(*k).ok()).collect();
        let Ok((s, e)) = g.span(arc.id) else { continue };
        let tiles = spans.first().map(|f| f.0) == Some(s)
            && spans.last().map(|l| l.1) == Some(e)
            && spans.windows(2).all(|w| w[0].1 == w[1].0);
        if !tiles {
            report.discontinuous.push(arc.id);
        }
    }
    report
}
