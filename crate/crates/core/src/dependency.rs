//! Pure and hybrid dependency trees. A root arc spans the sentence, words
//! point at their heads through parent pointers, and constituent arcs may be
//! mixed in. Word order never changes; branches are allowed to cross.

use crate::constituency::{refuse, EditError};
use crate::graph::{AnnotationGraph, ArcId, ArcType, Fields};

/// A dependency view: a graph plus its spanning root arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DependencyView {
    pub root: ArcId,
}

/// Builds a flat tree: every word depends on the root.
pub fn init_flat(words: &[&str]) -> Result<(AnnotationGraph, DependencyView), EditError> {
    if words.is_empty() {
        return Err(EditError::EmptyTree);
    }
    let mut g = AnnotationGraph::new();
    let first = g.push_anchor(None);
    let mut prev = first;
    let mut ids = Vec::with_capacity(words.len());
    for w in words {
        let next = g.push_anchor(None);
        let mut f = Fields::new();
        f.insert("form".into(), w.to_string());
        ids.push(g.add_arc(prev, next, ArcType::Word, f)?);
        prev = next;
    }
    let view = DependencyView::attach_root(&mut g)?;
    for id in ids {
        g.set_parent(id, Some(view.root))?;
    }
    Ok((g, view))
}

impl DependencyView {
    /// Adds a root arc spanning from the first to the last anchor.
    pub fn attach_root(g: &mut AnnotationGraph) -> Result<DependencyView, EditError> {
        let (Some(first), Some(last)) = (g.anchors().first(), g.anchors().last()) else {
            return Err(EditError::EmptyTree);
        };
        let (first, last) = (first.id, last.id);
        let mut f = Fields::new();
        f.insert("label".into(), "ROOT".into());
        let root = g.add_arc(first, last, ArcType::Root, f)?;
        Ok(DependencyView { root })
    }

    /// Finds the root arc of a dependency graph.
    pub fn find(g: &AnnotationGraph) -> Option<DependencyView> {
        g.arcs()
            .find(|a| a.kind == ArcType::Root)
            .map(|a| DependencyView { root: a.id })
    }

    /// Words in anchor order.
    pub fn words(&self, g: &AnnotationGraph) -> Vec<ArcId> {
        g.terminals()
            .into_iter()
            .filter(|t| g.arc(*t).map(|a| a.kind == ArcType::Word).unwrap_or(false))
            .collect()
    }

    fn check_node(&self, g: &AnnotationGraph, op: &'static str, id: ArcId) -> Result<ArcType, EditError> {
        let kind = g.arc(id)?.kind;
        match kind {
            ArcType::Word | ArcType::Phrasal | ArcType::Root => Ok(kind),
            other => refuse(op, format!("{id} is a {other} arc")),
        }
    }

    /// Makes `source` depend on `target`. Rejects cycles immediately.
    pub fn move_subtree(
        &self,
        g: &mut AnnotationGraph,
        source: ArcId,
        target: ArcId,
    ) -> Result<(), EditError> {
        const OP: &str = "move_subtree";
        let source_kind = self.check_node(g, OP, source)?;
        let target_kind = self.check_node(g, OP, target)?;
        if source_kind == ArcType::Root {
            return refuse(OP, format!("{source} is the root"));
        }
        if source == target || g.is_ancestor(source, target) {
            return refuse(OP, format!("{target} is inside the subtree of {source}"));
        }
        g.set_parent(source, Some(target))?;
        if target_kind == ArcType::Phrasal {
            self.grow_constituent_span(g, target)?;
        }
        Ok(())
    }

    /// Inserts a constituent over `node`'s own span, taking `node`'s place.
    pub fn insert_constituent(&self, g: &mut AnnotationGraph, node: ArcId) -> Result<ArcId, EditError> {
        const OP: &str = "insert_constituent";
        if self.check_node(g, OP, node)? == ArcType::Root {
            return refuse(OP, format!("{node} is the root"));
        }
        let arc = g.arc(node)?;
        let (start, end, parent) = (arc.start, arc.end, arc.parent);
        let c = g.add_arc(start, end, ArcType::Phrasal, Fields::new())?;
        g.set_parent(c, parent)?;
        g.set_parent(node, Some(c))?;
        Ok(c)
    }

    /// Deletes a constituent, handing its children to its parent.
    pub fn delete_constituent(&self, g: &mut AnnotationGraph, node: ArcId) -> Result<(), EditError> {
        const OP: &str = "delete_constituent";
        let arc = g.arc(node)?;
        if arc.kind != ArcType::Phrasal {
            return refuse(OP, format!("{node} is a {} arc, not a constituent", arc.kind));
        }
        let parent = arc.parent;
        if g.arcs().any(|a| a.refs.contains(&node)) {
            return refuse(OP, format!("{node} is referenced by a proposition"));
        }
        for k in g.children_in_order(node) {
            g.set_parent(k, parent)?;
        }
        g.remove_arc(node)?;
        Ok(())
    }

    /// Widens a constituent to cover all its direct children. Never shrinks.
    pub fn grow_constituent_span(&self, g: &mut AnnotationGraph, c: ArcId) -> Result<(), EditError> {
        self.fit_span(g, c, true)
    }

    /// Recomputes a constituent's span as the minimal cover of its children.
    pub fn normalize(&self, g: &mut AnnotationGraph, c: ArcId) -> Result<(), EditError> {
        self.fit_span(g, c, false)
    }

    fn fit_span(&self, g: &mut AnnotationGraph, c: ArcId, keep_own: bool) -> Result<(), EditError> {
        let arc = g.arc(c)?;
        if arc.kind != ArcType::Phrasal {
            return refuse("grow_constituent_span", format!("{c} is a {} arc", arc.kind));
        }
        let mut ends: Vec<(usize, usize)> = Vec::new();
        if keep_own {
            ends.push(g.span(c)?);
        }
        for k in g.children_in_order(c) {
            ends.push(g.span(k)?);
        }
        let (Some(lo), Some(hi)) = (
            ends.iter().map(|e| e.0).min(),
            ends.iter().map(|e| e.1).max(),
        ) else {
            return Ok(());
        };
        let start = g.anchors()[lo].id;
        let end = g.anchors()[hi].id;
        g.set_span(c, start, end)?;
        Ok(())
    }

    /// Position of a node on the word line for crossing tests: the root sits
    /// before the first word, words and constituents at their start.
    fn line_position(&self, g: &AnnotationGraph, id: ArcId) -> Option<usize> {
        if id == self.root {
            return Some(0);
        }
        g.span(id).ok().map(|(s, _)| s + 1)
    }

    /// All pairs of dependency edges that cross under anchor order. Each edge
    /// is named by its dependent.
    pub fn projectivity_report(&self, g: &AnnotationGraph) -> Vec<(ArcId, ArcId)> {
        let edges: Vec<(ArcId, usize, usize)> = g
            .arcs()
            .filter(|a| matches!(a.kind, ArcType::Word | ArcType::Phrasal))
            .filter_map(|a| {
                let p = a.parent?;
                let x = self.line_position(g, a.id)?;
                let y = self.line_position(g, p)?;
                Some((a.id, x.min(y), x.max(y)))
            })
            .collect();
        let mut out = Vec::new();
        for (i, &(a, s1, e1)) in edges.iter().enumerate() {
            for &(b, s2, e2) in &edges[i + 1..] {
                if (s1 < s2 && s2 < e1 && e1 < e2) || (s2 < s1 && s1 < e2 && e2 < e1) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}
