//! Turin University Treebank dependency lines:
//! `index form (LEMMA features...) [parent;REL]`.
//!
//! A record may wrap onto continuation lines. Parent `0` is the sentence
//! root. Indices such as `13.1` are fused-token parts: they are ordered after
//! their integer part, and may be referenced as parents like any other index.
//! Sentences are separated by blank lines or by the index restarting at 1.

use std::collections::HashMap;

use crate::dependency::DependencyView;
use crate::constituency::assign_offsets;
use crate::graph::{AnnotationGraph, ArcId, ArcType, Fields};

use super::{FormatError, Sentence};

#[derive(Debug, Clone, PartialEq)]
struct Record {
    line: usize,
    index: String,
    key: (u64, u64),
    form: String,
    lemma: String,
    features: String,
    parent: String,
    rel: String,
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        column: 1,
        message: message.into(),
    }
}

fn index_key(index: &str) -> Option<(u64, u64)> {
    let (whole, frac) = match index.split_once('.') {
        Some((w, f)) => (w, f.parse().ok()?),
        None => (index, 0),
    };
    Some((whole.parse().ok()?, frac))
}

fn starts_record(line: &str) -> bool {
    line.split_whitespace()
        .next()
        .map(|t| index_key(t).is_some())
        .unwrap_or(false)
}

fn parse_record(line: usize, text: &str) -> Result<Record, FormatError> {
    let text = text.trim();
    let (index, rest) = text
        .split_once(char::is_whitespace)
        .ok_or_else(|| syntax(line, "record has no word"))?;
    let key = index_key(index).ok_or_else(|| syntax(line, format!("bad index {index:?}")))?;
    let rest = rest.trim_start();
    let open = rest.find(" (").ok_or_else(|| syntax(line, "missing (lemma features)"))?;
    let form = rest[..open].trim().to_string();
    let after = &rest[open + 2..];
    let close = after.rfind(')').ok_or_else(|| syntax(line, "unclosed feature list"))?;
    let inside = after[..close].trim();
    let (lemma, features) = match inside.split_once(char::is_whitespace) {
        Some((l, f)) => (l.to_string(), f.split_whitespace().collect::<Vec<_>>().join(" ")),
        None => (inside.to_string(), String::new()),
    };
    let bracket = after[close + 1..].trim();
    let inner = bracket
        .strip_prefix('[')
        .and_then(|b| b.strip_suffix(']'))
        .ok_or_else(|| syntax(line, "missing [parent;REL]"))?;
    let (parent, rel) = inner
        .split_once(';')
        .ok_or_else(|| syntax(line, "parent reference needs ';'"))?;
    if form.is_empty() {
        return Err(syntax(line, "empty word"));
    }
    Ok(Record {
        line,
        index: index.to_string(),
        key,
        form,
        lemma,
        features,
        parent: parent.trim().to_string(),
        rel: rel.trim().to_string(),
    })
}

fn sentence(mut records: Vec<Record>) -> Result<Sentence, FormatError> {
    records.sort_by_key(|r| r.key);
    let mut g = AnnotationGraph::new();
    let mut prev = g.push_anchor(None);
    let mut ids: HashMap<String, ArcId> = HashMap::new();
    let mut words = Vec::new();
    for r in &records {
        let next = g.push_anchor(None);
        let mut f = Fields::new();
        f.insert("form".into(), r.form.clone());
        f.insert("index".into(), r.index.clone());
        f.insert("lemma".into(), r.lemma.clone());
        if !r.features.is_empty() {
            f.insert("features".into(), r.features.clone());
        }
        f.insert("rel".into(), r.rel.clone());
        let id = g.add_arc(prev, next, ArcType::Word, f)?;
        if ids.insert(r.index.clone(), id).is_some() {
            return Err(syntax(r.line, format!("duplicate index {}", r.index)));
        }
        words.push(id);
        prev = next;
    }
    let view = DependencyView::attach_root(&mut g)?;
    for (r, id) in records.iter().zip(&words) {
        let parent = if r.parent == "0" {
            view.root
        } else {
            *ids
                .get(&r.parent)
                .ok_or_else(|| syntax(r.line, format!("unknown parent index {}", r.parent)))?
        };
        g.set_parent(*id, Some(parent))
            .map_err(|e| syntax(r.line, e.to_string()))?;
    }
    assign_offsets(&mut g)?;
    Ok(Sentence {
        graph: g,
        root: view.root,
    })
}

pub fn read_turin(text: &str) -> Result<Vec<Sentence>, FormatError> {
    let mut sentences = Vec::new();
    let mut records: Vec<Record> = Vec::new();
    let mut pending: Option<(usize, String)> = None;

    fn flush(pending: &mut Option<(usize, String)>, records: &mut Vec<Record>) -> Result<(), FormatError> {
        if let Some((line, text)) = pending.take() {
            records.push(parse_record(line, &text)?);
        }
        Ok(())
    }

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        if raw.trim().is_empty() {
            flush(&mut pending, &mut records)?;
            if !records.is_empty() {
                sentences.push(sentence(std::mem::take(&mut records))?);
            }
            continue;
        }
        if starts_record(raw) {
            flush(&mut pending, &mut records)?;
            let restart = raw.split_whitespace().next() == Some("1");
            if restart && !records.is_empty() {
                sentences.push(sentence(std::mem::take(&mut records))?);
            }
            pending = Some((number, raw.trim().to_string()));
        } else {
            match pending.as_mut() {
                Some((_, text)) => {
                    text.push(' ');
                    text.push_str(raw.trim());
                }
                None => return Err(syntax(number, "continuation line without a record")),
            }
        }
    }
    flush(&mut pending, &mut records)?;
    if !records.is_empty() {
        sentences.push(sentence(records)?);
    }
    Ok(sentences)
}
