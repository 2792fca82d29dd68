//! Treebanks that encode hierarchy by XML element nesting, with words as
//! `form:POS` items in the element text.
//!
//! Element names are categories. Within a text run, untagged tokens join the
//! next tagged one, so `compared to:P` is a single word with form
//! `compared to`. Untagged tokens left at the end of a run become words
//! without a `pos` field. The document element is the sentence.

use roxmltree::{Document, Node};

use crate::constituency::{assign_offsets, build_chart};
use crate::graph::Fields;
use crate::tree::TreeNode;

use super::{structure, FormatError, Sentence};

fn words_in(text: &str) -> Vec<TreeNode> {
    let mut out = Vec::new();
    let mut pending: Vec<&str> = Vec::new();
    for tok in text.split_whitespace() {
        match tok.rsplit_once(':') {
            Some((form, pos)) if !pos.is_empty() && !(form.is_empty() && pending.is_empty()) => {
                pending.push(form);
                let mut f = Fields::new();
                f.insert(
                    "form".into(),
                    pending.iter().filter(|p| !p.is_empty()).copied().collect::<Vec<_>>().join(" "),
                );
                f.insert("pos".into(), pos.to_string());
                out.push(TreeNode::Word { fields: f });
                pending.clear();
            }
            _ => pending.push(tok),
        }
    }
    out.extend(pending.into_iter().map(TreeNode::word));
    out
}

fn to_tree(node: Node) -> Result<TreeNode, FormatError> {
    let mut children = Vec::new();
    for c in node.children() {
        if c.is_element() {
            children.push(to_tree(c)?);
        } else if c.is_text() {
            children.extend(words_in(c.text().unwrap_or("")));
        }
    }
    let name = node.tag_name().name();
    if children.is_empty() {
        return structure(format!("element <{name}> is empty"));
    }
    let mut tree = TreeNode::phrase(name, children);
    for a in node.attributes() {
        tree.fields_mut().insert(a.name().to_string(), a.value().to_string());
    }
    Ok(tree)
}

pub fn read_nested_xml(text: &str) -> Result<Vec<Sentence>, FormatError> {
    let doc = Document::parse(text).map_err(|e| FormatError::Syntax {
        line: e.pos().row as usize,
        column: e.pos().col as usize,
        message: e.to_string(),
    })?;
    let tree = to_tree(doc.root_element())?;
    let (mut graph, root) = build_chart(&tree)?;
    assign_offsets(&mut graph)?;
    Ok(vec![Sentence { graph, root }])
}
