//! Penn Treebank bracketed text.

use crate::constituency::{assign_offsets, build_chart};
use crate::graph::{AnnotationGraph, ArcType};
use crate::tree::TreeNode;

use super::{check_coverage, parse_sexps, project, split_coindex, structure, FormatError, Sentence, Sexp, Shape};

const NONE_TAG: &str = "-NONE-";

fn is_trace(token: &str, parent_label: Option<&str>) -> bool {
    parent_label == Some(NONE_TAG) || token.starts_with('*')
}

fn terminal(token: &str, parent_label: Option<&str>) -> TreeNode {
    if is_trace(token, parent_label) {
        let (marker, coindex) = split_coindex(token);
        TreeNode::trace(marker, coindex)
    } else {
        TreeNode::word(token)
    }
}

fn to_tree(items: &[Sexp]) -> Result<TreeNode, FormatError> {
    let (label, rest) = match items {
        [] => return structure("empty constituent ()"),
        [Sexp::Atom { text, .. }] => return structure(format!("constituent ({text}) has no children")),
        [Sexp::Atom { text, .. }, rest @ ..] => (Some(text.as_str()), rest),
        _ => (None, items),
    };
    let children = rest
        .iter()
        .map(|c| match c {
            Sexp::Atom { text, .. } => Ok(terminal(text, label)),
            Sexp::List(inner) => to_tree(inner),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match label {
        None => TreeNode::unlabeled(children),
        Some(l) => {
            let (cat, coindex) = split_coindex(l);
            let mut node = TreeNode::phrase(cat, children);
            if let Some(c) = coindex {
                node.fields_mut().insert("coindex".into(), c.into());
            }
            node
        }
    })
}

/// One graph per top-level bracketed tree.
pub fn read_penn(text: &str) -> Result<Vec<Sentence>, FormatError> {
    parse_sexps(text, false)?
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

fn join_coindex(base: &str, coindex: Option<&str>) -> String {
    match coindex {
        Some(c) => format!("{base}-{c}"),
        None => base.to_string(),
    }
}

fn atom(form: &str, n: usize) -> Result<String, FormatError> {
    if form.is_empty() || form.contains(['(', ')']) {
        return Err(FormatError::Loss {
            sentence: n,
            reason: format!("token {form:?} cannot be written as a bracket atom"),
        });
    }
    Ok(form.split_whitespace().collect::<Vec<_>>().join("_"))
}

fn render(g: &AnnotationGraph, shape: &Shape, indent: usize, n: usize, out: &mut String) -> Result<(), FormatError> {
    match shape {
        Shape::Leaf(id) => {
            let arc = g.arc(*id)?;
            let form = atom(arc.form().unwrap_or("*"), n)?;
            if arc.kind == ArcType::Trace {
                out.push_str(&join_coindex(&form, arc.field("coindex")));
            } else {
                out.push_str(&form);
            }
        }
        Shape::Node { arc, children } => {
            let arc = g.arc(*arc)?;
            let label = match arc.kind {
                ArcType::Word => arc.field("rel").or(arc.field("pos")).unwrap_or("X").to_string(),
                _ => match arc.label() {
                    Some(l) => join_coindex(&atom(l, n)?, arc.field("coindex")),
                    None => String::new(),
                },
            };
            out.push('(');
            out.push_str(&label);
            let mut broken = false;
            for (i, c) in children.iter().enumerate() {
                let nested = matches!(c, Shape::Node { .. });
                if nested || broken {
                    broken = true;
                    out.push('\n');
                    out.push_str(&" ".repeat(indent + 2));
                } else if !(i == 0 && label.is_empty()) {
                    out.push(' ');
                }
                render(g, c, indent + 2, n, out)?;
            }
            out.push(')');
        }
    }
    Ok(())
}

/// Writes each sentence as one bracketed tree, blank-line separated.
/// Sentences whose structure brackets cannot express are refused.
pub fn write_penn(sentences: &[Sentence]) -> Result<String, FormatError> {
    let mut out = String::new();
    for (n, s) in sentences.iter().enumerate() {
        let g = &s.graph;
        let n = n + 1;
        let shape = project(g, s.root)?;
        check_coverage(g, &shape, n)?;
        let mut leaves = Vec::new();
        shape.leaves(&mut leaves);
        if leaves != g.terminals() {
            return Err(FormatError::Loss {
                sentence: n,
                reason: "crossing branches cannot be bracketed".into(),
            });
        }
        if !out.is_empty() {
            out.push('\n');
        }
        render(g, &shape, 0, n, &mut out)?;
        out.push('\n');
    }
    Ok(out)
}

/// Collapses whitespace so bracketed texts can be compared structurally.
pub fn canonical_whitespace(text: &str) -> String {
    let spaced = text.replace('(', " ( ").replace(')', " ) ");
    let tokens: Vec<&str> = spaced.split_whitespace().collect();
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && tokens[i - 1] != "(" && *t != ")" {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constituency::read_tree;

    #[test]
    fn the_boy() {
        let s = read_penn("(S (NP (DT the) (NN boy)))").unwrap();
        assert_eq!(s.len(), 1);
        let g = &s[0].graph;
        assert_eq!(g.arcs().filter(|a| a.kind == ArcType::Word).count(), 2);
        assert_eq!(g.surface(), ["the", "boy"]);
        let np = g.children_in_order(s[0].root);
        assert_eq!(np.len(), 1);
        assert_eq!(g.arc(np[0]).unwrap().label(), Some("NP"));
        let under_np = g.children_in_order(np[0]);
        assert_eq!(under_np.len(), 2);
        assert!(under_np.iter().all(|a| g.arc(*a).unwrap().kind == ArcType::Phrasal));
        assert!(g.validate().is_empty());
    }

    #[test]
    fn traces_and_coindices() {
        let s = read_penn("((S (NP-SBJ-1 it) (VP seems (S (NP-SBJ *-1) (VP (-NONE- *T*-2))))))").unwrap();
        let g = &s[0].graph;
        let traces: Vec<_> = g.arcs().filter(|a| a.kind == ArcType::Trace).collect();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].form(), Some("*"));
        assert_eq!(traces[0].field("coindex"), Some("1"));
        assert_eq!(traces[1].form(), Some("*T*"));
        let np = g.arcs().find(|a| a.label() == Some("NP-SBJ") && a.field("coindex") == Some("1"));
        assert!(np.is_some());
        assert_eq!(g.surface(), ["it", "seems"]);
        assert_eq!(g.arc(s[0].root).unwrap().label(), None);
    }

    #[test]
    fn none_children_are_traces_even_without_star() {
        let s = read_penn("(SBAR (-NONE- 0) (S x))").unwrap();
        let g = &s[0].graph;
        assert_eq!(g.arcs().filter(|a| a.kind == ArcType::Trace).count(), 1);
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(read_penn("(S (NP a)"), Err(FormatError::Syntax { .. })));
        assert!(matches!(read_penn("(S ())"), Err(FormatError::Structure(_))));
        assert!(matches!(read_penn("(S (NP))"), Err(FormatError::Structure(_))));
        assert!(matches!(read_penn("word"), Err(FormatError::Structure(_))));
        assert!(read_penn("").unwrap().is_empty());
    }

    #[test]
    fn roundtrip_shape_and_text() {
        let src = "((S (NP-SBJ-1 (NP Yields) (PP on (NP funds))) (VP continued (S (NP-SBJ *-1) (VP to (VP slide))) ,) .))";
        let s = read_penn(src).unwrap();
        let written = write_penn(&s).unwrap();
        assert_eq!(canonical_whitespace(&written), canonical_whitespace(src));
        let again = read_penn(&written).unwrap();
        assert_eq!(
            read_tree(&again[0].graph, again[0].root).unwrap(),
            read_tree(&s[0].graph, s[0].root).unwrap()
        );
    }

    #[test]
    fn canonical_whitespace_normalizes() {
        assert_eq!(canonical_whitespace("( (S  (NP a)\n\t(VP b) ) )"), "((S (NP a) (VP b)))");
    }

    #[test]
    fn offsets_are_assigned() {
        let s = read_penn("(S (NP John) (VP runs))").unwrap();
        let offs: Vec<_> = s[0].graph.anchors().iter().map(|a| a.offset).collect();
        assert_eq!(offs, [Some(0.0), Some(5.0), Some(9.0)]);
    }
}
