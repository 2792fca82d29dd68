//! Bracketed trees whose node labels are records: `(CAT feature ... children)`.
//!
//! A constituent holding a quoted `"<form>"` is a word; the next quoted token
//! is its lemma. Bare atoms after the category are features, except that a
//! constituent made only of bare atoms reads as in Penn (category + words).
//! `ID-n` and `REF-n` features also set a `coindex` field.

use crate::constituency::{assign_offsets, build_chart};
use crate::graph::Fields;
use crate::tree::TreeNode;

use super::{parse_sexps, split_coindex, structure, FormatError, Sentence, Sexp};

fn coref(features: &[&str]) -> Option<String> {
    features.iter().find_map(|f| {
        let (head, idx) = split_coindex(f);
        matches!(head, "ID" | "REF").then(|| idx.map(str::to_string)).flatten()
    })
}

fn is_trace(atom: &str) -> bool {
    atom.starts_with('*')
}

fn to_tree(items: &[Sexp]) -> Result<TreeNode, FormatError> {
    let (cat, rest) = match items {
        [Sexp::Atom { text, quoted: false }, rest @ ..] if !rest.is_empty() => (text.as_str(), rest),
        [] => return structure("empty constituent ()"),
        _ => return structure("constituent must start with a category and have content"),
    };
    let has_lists = rest.iter().any(|s| matches!(s, Sexp::List(_)));
    let quoted: Vec<&str> = rest
        .iter()
        .filter_map(|s| match s {
            Sexp::Atom { text, quoted: true } => Some(text.as_str()),
            _ => None,
        })
        .collect();
    let bare: Vec<&str> = rest
        .iter()
        .filter_map(|s| match s {
            Sexp::Atom { text, quoted: false } => Some(text.as_str()),
            _ => None,
        })
        .collect();

    if !quoted.is_empty() {
        if has_lists {
            return structure(format!("word constituent ({cat} ...) has children"));
        }
        let form = quoted[0];
        let form = form
            .strip_prefix('<')
            .and_then(|f| f.strip_suffix('>'))
            .unwrap_or(form);
        let mut fields = Fields::new();
        fields.insert("form".into(), form.to_string());
        if let Some(lemma) = quoted.get(1) {
            fields.insert("lemma".into(), lemma.to_string());
        }
        fields.insert("pos".into(), cat.to_string());
        if !bare.is_empty() {
            fields.insert("features".into(), bare.join(" "));
        }
        return Ok(TreeNode::Word { fields });
    }

    let plain = !has_lists && !bare.iter().any(|a| is_trace(a));
    let mut features = Vec::new();
    let mut children = Vec::new();
    for item in rest {
        match item {
            Sexp::Atom { text, .. } if plain => children.push(TreeNode::word(text)),
            Sexp::Atom { text, .. } if is_trace(text) => {
                let (marker, idx) = split_coindex(text);
                children.push(TreeNode::trace(marker, idx));
            }
            Sexp::Atom { text, .. } => features.push(text.as_str()),
            Sexp::List(inner) => children.push(to_tree(inner)?),
        }
    }
    if children.is_empty() {
        return structure(format!("constituent ({cat} ...) has no children"));
    }
    let mut node = TreeNode::phrase(cat, children);
    if !features.is_empty() {
        node.fields_mut().insert("features".into(), features.join(" "));
    }
    if let Some(idx) = coref(&features) {
        node.fields_mut().insert("coindex".into(), idx);
    }
    Ok(node)
}

pub fn read_bracket_record(text: &str) -> Result<Vec<Sentence>, FormatError> {
    parse_sexps(text, true)?
        .into_iter()
        .map(|sexp| {
            let Sexp::List(items) = sexp else {
                return structure("text outside brackets");
            };
            let tree = to_tree(&items)?;
            let (mut graph, root) = build_chart(&tree)?;
            assign_offsets(&mut graph)?;
            Ok(Sentence { graph, root })
        })
        .collect()
}
