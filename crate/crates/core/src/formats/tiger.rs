//! TIGER-style XML: `n` nodes and `w` words linked by `edge` elements.
//!
//! Each `s` element is a sentence; without any, the whole document is one.
//! Words are ordered by file order. An edge's `label` becomes the child's
//! `rel` field; `type="semantic"` edges become shared `coindex` fields rather
//! than tree links. Parentless material is gathered under a `VROOT` node.
//! The element names `nt`/`t` and the `idref` attribute are accepted too.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use roxmltree::{Document, Node};

use crate::constituency::assign_offsets;
use crate::graph::{AnnotationGraph, ArcId, ArcType, Fields};

use super::{check_coverage, project, structure, FormatError, Sentence, Shape};

fn xml_error(e: roxmltree::Error) -> FormatError {
    let pos = e.pos();
    FormatError::Syntax {
        line: pos.row as usize,
        column: pos.col as usize,
        message: e.to_string(),
    }
}

fn target_id(href: &str) -> &str {
    let h = href.trim().trim_start_matches('#');
    h.strip_prefix("id(")
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(h)
}

fn is_node(n: &Node) -> bool {
    n.is_element() && matches!(n.tag_name().name(), "n" | "nt")
}

fn is_word(n: &Node) -> bool {
    n.is_element() && matches!(n.tag_name().name(), "w" | "t")
}

struct Edge {
    target: String,
    label: Option<String>,
    semantic: bool,
}

fn edges(n: Node) -> Vec<Edge> {
    n.children()
        .filter(|c| c.is_element() && c.tag_name().name() == "edge")
        .filter_map(|e| {
            let href = e.attribute("href").or(e.attribute("idref"))?;
            Some(Edge {
                target: target_id(href).to_string(),
                label: e.attribute("label").map(str::to_string),
                semantic: e.attribute("type") == Some("semantic"),
            })
        })
        .collect()
}

fn attrs_except(n: Node, skip: &[&str]) -> Fields {
    n.attributes()
        .filter(|a| !skip.contains(&a.name()))
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect()
}

fn read_scope(scope: Node) -> Result<Option<Sentence>, FormatError> {
    let words: Vec<Node> = scope.descendants().filter(is_word).collect();
    let nodes: Vec<Node> = scope.descendants().filter(is_node).collect();
    if words.is_empty() {
        if nodes.is_empty() {
            return Ok(None);
        }
        return structure("sentence has nodes but no words");
    }
    let mut g = AnnotationGraph::new();
    let mut ids: HashMap<String, ArcId> = HashMap::new();
    let mut prev = g.push_anchor(None);
    for w in &words {
        let next = g.push_anchor(None);
        let id_attr = w.attribute("id").ok_or_else(|| FormatError::Structure("word without id".into()))?;
        let trace = w.attribute("type") == Some("trace");
        let mut fields = Fields::new();
        fields.insert("form".into(), w.attribute("word").unwrap_or("").to_string());
        fields.extend(attrs_except(*w, &["id", "word", "type"]));
        let kind = if trace { ArcType::Trace } else { ArcType::Word };
        let arc = g.add_arc(prev, next, kind, fields)?;
        if ids.insert(id_attr.to_string(), arc).is_some() {
            return structure(format!("duplicate id {id_attr}"));
        }
        prev = next;
    }

    // tree links first, so node spans can be computed before node arcs exist
    let mut parent_of: HashMap<String, String> = HashMap::new();
    let mut rel_of: HashMap<String, String> = HashMap::new();
    let mut semantic: Vec<(String, String)> = Vec::new();
    let mut children: HashMap<String, Vec<String>> = HashMap::new();
    let node_ids: Vec<String> = nodes
        .iter()
        .map(|n| {
            n.attribute("id")
                .map(str::to_string)
                .ok_or_else(|| FormatError::Structure("node without id".into()))
        })
        .collect::<Result<_, _>>()?;
    let known: HashSet<&str> = node_ids
        .iter()
        .map(String::as_str)
        .chain(words.iter().filter_map(|w| w.attribute("id")))
        .collect();
    for (n, nid) in nodes.iter().zip(&node_ids) {
        for e in edges(*n) {
            if !known.contains(e.target.as_str()) {
                return structure(format!("edge from {nid} to unknown id {}", e.target));
            }
            if e.semantic {
                semantic.push((nid.clone(), e.target));
                continue;
            }
            if let Some(p) = parent_of.insert(e.target.clone(), nid.clone()) {
                return structure(format!("{} has two parents ({p} and {nid}); not a tree", e.target));
            }
            if let Some(l) = e.label {
                rel_of.insert(e.target.clone(), l);
            }
            children.entry(nid.clone()).or_default().push(e.target);
        }
    }

    fn hull(
        id: &str,
        g: &AnnotationGraph,
        words: &HashMap<String, ArcId>,
        children: &HashMap<String, Vec<String>>,
        memo: &mut HashMap<String, (usize, usize)>,
        depth: usize,
    ) -> Result<(usize, usize), FormatError> {
        if let Some(h) = memo.get(id) {
            return Ok(*h);
        }
        if depth > words.len() + children.len() {
            return structure(format!("cycle through {id}"));
        }
        let h = if let Some(w) = words.get(id) {
            g.span(*w)?
        } else {
            let kids = children
                .get(id)
                .filter(|k| !k.is_empty())
                .ok_or_else(|| FormatError::Structure(format!("node {id} has no children")))?;
            let mut lo = usize::MAX;
            let mut hi = 0;
            for k in kids {
                let (s, e) = hull(k, g, words, children, memo, depth + 1)?;
                lo = lo.min(s);
                hi = hi.max(e);
            }
            (lo, hi)
        };
        memo.insert(id.to_string(), h);
        Ok(h)
    }

    let word_ids = ids.clone();
    let mut memo = HashMap::new();
    for (n, nid) in nodes.iter().zip(&node_ids) {
        let (s, e) = hull(nid, &g, &word_ids, &children, &mut memo, 0)?;
        let mut fields = Fields::new();
        if let Some(cat) = n.attribute("cat") {
            fields.insert("label".into(), cat.to_string());
        }
        fields.extend(attrs_except(*n, &["id", "cat"]));
        let (start, end) = (g.anchors()[s].id, g.anchors()[e].id);
        let arc = g.add_arc(start, end, ArcType::Phrasal, fields)?;
        if ids.insert(nid.clone(), arc).is_some() {
            return structure(format!("duplicate id {nid}"));
        }
    }
    for (child, parent) in &parent_of {
        g.set_parent(ids[child], Some(ids[parent]))?;
    }
    for (child, rel) in rel_of {
        g.fields_mut(ids[&child])?.insert("rel".into(), rel);
    }

    let mut next_tag = g
        .arcs()
        .filter_map(|a| a.field("coindex")?.parse::<u64>().ok())
        .max()
        .unwrap_or(0)
        + 1;
    for (a, b) in semantic {
        let (a, b) = (ids[&a], ids[&b]);
        let existing = g.arc(a)?.field("coindex").or(g.arc(b)?.field("coindex")).map(str::to_string);
        let tag = existing.unwrap_or_else(|| {
            next_tag += 1;
            (next_tag - 1).to_string()
        });
        g.fields_mut(a)?.insert("coindex".into(), tag.clone());
        g.fields_mut(b)?.insert("coindex".into(), tag);
    }

    let tops = g.top_level();
    let last = g.anchors().len() - 1;
    let root = match tops.as_slice() {
        [only] if g.arc(*only)?.kind == ArcType::Phrasal && g.span(*only)? == (0, last) => *only,
        _ => {
            let mut f = Fields::new();
            f.insert("label".into(), "VROOT".into());
            let (s, e) = (g.anchors()[0].id, g.anchors()[last].id);
            let r = g.add_arc(s, e, ArcType::Phrasal, f)?;
            for t in tops {
                g.set_parent(t, Some(r))?;
            }
            r
        }
    };
    assign_offsets(&mut g)?;
    Ok(Some(Sentence { graph: g, root }))
}

pub fn read_tiger_xml(text: &str) -> Result<Vec<Sentence>, FormatError> {
    let doc = Document::parse(text).map_err(xml_error)?;
    let scopes: Vec<Node> = doc
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "s")
        .collect();
    let scopes = if scopes.is_empty() {
        vec![doc.root_element()]
    } else {
        scopes
    };
    let mut out = Vec::new();
    for s in scopes {
        if let Some(sentence) = read_scope(s)? {
            out.push(sentence);
        }
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn attr_list(fields: &Fields, skip: &[&str]) -> String {
    fields
        .iter()
        .filter(|(k, _)| !skip.contains(&k.as_str()))
        .map(|(k, v)| format!(" {k}=\"{}\"", escape(v)))
        .collect()
}

pub fn write_tiger_xml(sentences: &[Sentence]) -> Result<String, FormatError> {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<corpus>\n");
    for (k, s) in sentences.iter().enumerate() {
        let g = &s.graph;
        let shape = project(g, s.root)?;
        check_coverage(g, &shape, k + 1)?;

        let mut word_names: HashMap<ArcId, String> = HashMap::new();
        for (i, t) in g.terminals().iter().enumerate() {
            word_names.insert(*t, format!("w{}", i + 1));
        }
        // preorder numbering of nodes
        let mut node_names: HashMap<ArcId, String> = HashMap::new();
        let mut order: Vec<&Shape> = Vec::new();
        let mut stack = vec![&shape];
        while let Some(sh) = stack.pop() {
            if let Shape::Node { arc, children } = sh {
                node_names.insert(*arc, format!("n{}", node_names.len() + 1));
                order.push(sh);
                stack.extend(children.iter().rev());
            }
        }

        let _ = writeln!(out, "  <s id=\"s{}\">", k + 1);
        for sh in order {
            let Shape::Node { arc, children } = sh else { continue };
            let a = g.arc(*arc)?;
            let name = &node_names[arc];
            let cat = match a.kind {
                ArcType::Word => a.field("pos"),
                _ => a.label(),
            };
            let mut head = format!("    <n id=\"{name}\"");
            if let Some(c) = cat {
                let _ = write!(head, " cat=\"{}\"", escape(c));
            }
            if a.kind != ArcType::Word {
                head.push_str(&attr_list(&a.fields, &["label", "rel"]));
            }
            let _ = writeln!(out, "{head}>");
            for c in children {
                let (target, label) = match c {
                    Shape::Leaf(id) if id == arc => (&word_names[id], Some("HD")),
                    Shape::Leaf(id) => (&word_names[id], g.arc(*id)?.field("rel")),
                    Shape::Node { arc: cid, .. } => (&node_names[cid], g.arc(*cid)?.field("rel")),
                };
                let label = label.map(|l| format!(" label=\"{}\"", escape(l))).unwrap_or_default();
                let _ = writeln!(out, "      <edge href=\"#id({target})\"{label}/>");
            }
            let _ = writeln!(out, "    </n>");
        }
        for t in g.terminals() {
            let a = g.arc(t)?;
            let kind = if a.kind == ArcType::Trace { " type=\"trace\"" } else { "" };
            let _ = writeln!(
                out,
                "    <w id=\"{}\" word=\"{}\"{kind}{}/>",
                word_names[&t],
                escape(a.form().unwrap_or("")),
                attr_list(&a.fields, &["form", "rel"])
            );
        }
        let _ = writeln!(out, "  </s>");
    }
    out.push_str("</corpus>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constituency::read_tree;
    use crate::formats::penn::read_penn;

    const SAMPLE: &str = r##"<n id="n1_500" cat="S">
  <edge href="#id(w1)" label="NK"/>
  <edge href="#id(w2)" label="HD"/>
</n>
"##;

    fn sample() -> String {
        format!("<s>{SAMPLE}<w id=\"w1\" word=\"the\"/>\n<w id=\"w2\" word=\"boy\"/></s>")
    }

    #[test]
    fn s_over_the_boy() {
        let s = read_tiger_xml(&sample()).unwrap();
        assert_eq!(s.len(), 1);
        let g = &s[0].graph;
        assert_eq!(g.surface(), ["the", "boy"]);
        assert_eq!(g.arc(s[0].root).unwrap().label(), Some("S"));
        let kids = g.children_in_order(s[0].root);
        assert_eq!(g.arc(kids[1]).unwrap().field("rel"), Some("HD"));
        assert!(g.validate().is_empty());
    }

    #[test]
    fn roundtrip_is_canonical() {
        let once = write_tiger_xml(&read_tiger_xml(&sample()).unwrap()).unwrap();
        let twice = write_tiger_xml(&read_tiger_xml(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn penn_tree_survives_tiger() {
        let p = read_penn("((S (NP-SBJ-1 it) (VP seems (S (NP-SBJ *-1) (VP to (VP go))))))").unwrap();
        let xml = write_tiger_xml(&p).unwrap();
        let t = read_tiger_xml(&xml).unwrap();
        assert_eq!(
            read_tree(&t[0].graph, t[0].root).unwrap().strip_to_shape(),
            read_tree(&p[0].graph, p[0].root).unwrap().strip_to_shape()
        );
    }

    #[test]
    fn semantic_edges_are_coindices() {
        let xml = r##"<s><n id="a" cat="NP"><edge href="#id(w1)"/></n>
            <n id="b" cat="VP"><edge href="#id(w2)"/><edge href="#id(a)" type="semantic"/></n>
            <w id="w1" word="he"/><w id="w2" word="ran"/></s>"##;
        let s = read_tiger_xml(xml).unwrap();
        let g = &s[0].graph;
        let tagged: Vec<_> = g.arcs().filter(|a| a.field("coindex").is_some()).map(|a| a.label()).collect();
        assert_eq!(tagged, [Some("NP"), Some("VP")]);
        assert_eq!(g.arc(s[0].root).unwrap().label(), Some("VROOT"));
        assert!(g.validate().is_empty());
    }

    #[test]
    fn errors() {
        let dangling = r##"<s><n id="a"><edge href="#id(w9)"/></n><w id="w1" word="x"/></s>"##;
        assert!(matches!(read_tiger_xml(dangling), Err(FormatError::Structure(_))));
        let two = r##"<s><n id="a"><edge href="#id(w1)"/></n><n id="b"><edge href="#id(w1)"/></n><w id="w1" word="x"/></s>"##;
        assert!(matches!(read_tiger_xml(two), Err(FormatError::Structure(m)) if m.contains("not a tree")));
        assert!(matches!(read_tiger_xml("<s><n"), Err(FormatError::Syntax { .. })));
    }
}
