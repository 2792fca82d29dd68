//! Floresta (Portuguese) indented trees.
//!
//! Each node is one line `=...FUNC:CAT(features)\tform`; the number of leading
//! `=` gives the depth below the sentence node, which is the first node line
//! of the analysis. Lines without a `FUNC:CAT` head are bare words.
//! Sentences are delimited by `<s>` ... `</s>`; header lines before the first
//! node line of a sentence are skipped.

use crate::constituency::{assign_offsets, build_chart};
use crate::graph::Fields;
use crate::tree::TreeNode;

use super::{FormatError, Sentence};

#[derive(Debug, Clone, PartialEq)]
struct Line {
    number: usize,
    depth: usize,
    fields: Fields,
    form: Option<String>,
}

fn syntax(number: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line: number,
        column: 1,
        message: message.into(),
    }
}

/// Parses `FUNC:CAT(features)`; `None` if the text is not a node head.
fn parse_head(head: &str) -> Option<Fields> {
    let (func, rest) = head.split_once(':')?;
    if rest.is_empty() || rest.starts_with(char::is_whitespace) || func.contains(char::is_whitespace) {
        return None;
    }
    let (cat, features) = match rest.split_once('(') {
        Some((cat, feats)) => (cat, Some(feats.strip_suffix(')')?)),
        None => (rest, None),
    };
    if cat.is_empty() || cat.contains(char::is_whitespace) {
        return None;
    }
    let mut f = Fields::new();
    if !func.is_empty() {
        f.insert("function".into(), func.to_string());
    }
    f.insert("label".into(), cat.to_string());
    if let Some(feats) = features {
        f.insert("features".into(), feats.to_string());
    }
    Some(f)
}

fn parse_line(number: usize, raw: &str, started: bool) -> Option<Line> {
    let depth = raw.chars().take_while(|c| *c == '=').count();
    let body = &raw[depth..];
    let (head, form) = match body.split_once('\t') {
        Some((h, f)) => (h.trim(), Some(f.trim().to_string())),
        None => (body.trim(), None),
    };
    match parse_head(head) {
        Some(fields) => Some(Line {
            number,
            depth,
            fields,
            form: form.filter(|f| !f.is_empty()),
        }),
        // a bare token such as final punctuation
        None if started && form.is_none() && !head.is_empty() && !head.contains(char::is_whitespace) => {
            Some(Line {
                number,
                depth,
                fields: Fields::new(),
                form: Some(head.to_string()),
            })
        }
        None => None,
    }
}

fn build(lines: &[Line], i: &mut usize) -> Result<TreeNode, FormatError> {
    let line = &lines[*i];
    *i += 1;
    let mut children = Vec::new();
    while *i < lines.len() && lines[*i].depth > line.depth {
        if lines[*i].depth != line.depth + 1 {
            return Err(syntax(lines[*i].number, "depth increases by more than one"));
        }
        children.push(build(lines, i)?);
    }
    let mut fields = line.fields.clone();
    match &line.form {
        Some(form) if children.is_empty() => {
            if let Some(cat) = fields.shift_remove("label") {
                fields.insert("pos".into(), cat);
            }
            fields.insert("form".into(), form.clone());
            Ok(TreeNode::Word { fields })
        }
        Some(_) => Err(syntax(line.number, "a word line cannot have deeper lines under it")),
        None if children.is_empty() => Err(syntax(line.number, "node has no constituents")),
        None => Ok(TreeNode::Phrase { fields, children }),
    }
}

fn sentence(lines: Vec<Line>) -> Result<Sentence, FormatError> {
    // the sentence node sits one level above the `=`-less lines
    let mut lines = lines;
    for l in lines.iter_mut().skip(1) {
        l.depth += 1;
    }
    let mut i = 0;
    let tree = build(&lines, &mut i)?;
    if i < lines.len() {
        return Err(syntax(lines[i].number, "line outside the sentence tree"));
    }
    let (mut graph, root) = build_chart(&tree)?;
    assign_offsets(&mut graph)?;
    Ok(Sentence { graph, root })
}

pub fn read_floresta(text: &str) -> Result<Vec<Sentence>, FormatError> {
    let mut out = Vec::new();
    let mut current: Vec<Line> = Vec::new();
    let mut in_s = false;
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let trimmed = raw.trim();
        if trimmed.starts_with("<s") && trimmed.ends_with('>') && !trimmed.starts_with("</") {
            if !current.is_empty() {
                out.push(sentence(std::mem::take(&mut current))?);
            }
            in_s = true;
            continue;
        }
        if trimmed == "</s>" {
            if !in_s {
                return Err(syntax(number, "</s> without <s>"));
            }
            if !current.is_empty() {
                out.push(sentence(std::mem::take(&mut current))?);
            }
            in_s = false;
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        if let Some(line) = parse_line(number, raw.trim_end(), !current.is_empty()) {
            if current.is_empty() && line.depth > 0 {
                return Err(syntax(number, "sentence starts below the top level"));
            }
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(sentence(current)?);
    }
    Ok(out)
}
