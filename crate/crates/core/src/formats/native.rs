//! The native document format: the graph itself as JSON.
//!
//! A document is an object with `anchors` and `arcs`; several sentences are
//! written as an array of such objects. Anchors are listed in order and arcs
//! outermost first.

use serde::{Deserialize, Serialize};

use crate::graph::{Anchor, AnnotationGraph, Arc};

use super::{FormatError, Sentence};

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    anchors: Vec<Anchor>,
    arcs: Vec<Arc>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Document),
    Many(Vec<Document>),
}

fn json_error(e: serde_json::Error) -> FormatError {
    FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Arcs in canonical order: by start, widest first, then outermost first.
pub fn canonical_arcs(g: &AnnotationGraph) -> Vec<Arc> {
    let mut arcs: Vec<Arc> = g.arcs().cloned().collect();
    arcs.sort_by_cached_key(|a| {
        let (s, e) = g.span(a.id).unwrap_or((0, 0));
        (s, std::cmp::Reverse(e), a.kind.family() != crate::graph::Family::Syntax, g.depth(a.id), a.id)
    });
    arcs
}

fn document(g: &AnnotationGraph) -> Document {
    Document {
        anchors: g.anchors().to_vec(),
        arcs: canonical_arcs(g),
    }
}

pub fn to_json(g: &AnnotationGraph) -> String {
    serde_json::to_string_pretty(&document(g)).expect("graph serializes")
}

pub fn graph_from_json(text: &str) -> Result<AnnotationGraph, FormatError> {
    let doc: Document = serde_json::from_str(text).map_err(json_error)?;
    Ok(AnnotationGraph::from_parts(doc.anchors, doc.arcs)?)
}

/// Reads graphs without looking for their roots, so that malformed graphs
/// (say, with a parent cycle through the top) can still be validated.
pub fn read_graphs(text: &str) -> Result<Vec<AnnotationGraph>, FormatError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let docs = match serde_json::from_str(text).map_err(json_error)? {
        OneOrMany::One(d) => vec![d],
        OneOrMany::Many(ds) => ds,
    };
    docs.into_iter()
        .map(|d| Ok(AnnotationGraph::from_parts(d.anchors, d.arcs)?))
        .collect()
}

pub fn read_native(text: &str) -> Result<Vec<Sentence>, FormatError> {
    read_graphs(text)?.into_iter().map(Sentence::from_graph).collect()
}

pub fn write_native(sentences: &[Sentence]) -> Result<String, FormatError> {
    let mut out = match sentences {
        [one] => to_json(&one.graph),
        many => {
            let docs: Vec<Document> = many.iter().map(|s| document(&s.graph)).collect();
            serde_json::to_string_pretty(&docs).expect("graphs serialize")
        }
    };
    out.push('\n');
    Ok(out)
}
