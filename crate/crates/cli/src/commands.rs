use std::io::{Read, Write};
use std::net::SocketAddr;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use treegraph::constituency::check_tree;
use treegraph::dependency::DependencyView;
use treegraph::formats::{self, native, FormatError, FormatId, Sentence};
use treegraph::propbank;
use treegraph::script::{EditSession, Script};
use treegraph::{AnnotationGraph, ArcType};
use treegraph_service::Store;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_LOSS: u8 = 2;
pub const EXIT_IO: u8 = 3;

const FORMAT_VAR: &str = "TREEGRAPH_FORMAT";

/// The explicit flag wins, then the file extension, then `TREEGRAPH_FORMAT`.
fn resolve_format(flag: Option<FormatId>, input: &str) -> Result<FormatId> {
    if let Some(f) = flag {
        return Ok(f);
    }
    let by_ext = Path::new(input)
        .extension()
        .and_then(|e| e.to_str())
        .and_then(FormatId::from_extension);
    if let Some(f) = by_ext {
        return Ok(f);
    }
    match std::env::var(FORMAT_VAR) {
        Ok(v) => v.parse().map_err(|e: String| anyhow!("{FORMAT_VAR}: {e}")),
        Err(_) => bail!("cannot tell the format of {input}; pass --format or set {FORMAT_VAR}"),
    }
}

fn read_input(input: &str) -> Result<String> {
    if input == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).context("reading stdin")?;
        return Ok(text);
    }
    std::fs::read_to_string(input).with_context(|| format!("reading {input}"))
}

fn load(format: FormatId, input: &str) -> Result<Vec<Sentence>> {
    let text = read_input(input)?;
    formats::read(format, &text).with_context(|| format!("parsing {input} as {format}"))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Writes every sentence, or reports each one the target cannot express.
fn write_all(to: FormatId, sentences: &[Sentence]) -> Result<std::result::Result<String, Vec<String>>> {
    if !to.has_writer() {
        bail!("{to} has no writer; write to penn, tiger-xml or native");
    }
    let mut losses = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        match formats::write(to, std::slice::from_ref(s)) {
            Ok(_) => {}
            Err(FormatError::Loss { reason, .. }) => losses.push(format!("sentence {}: {reason}", i + 1)),
            Err(e) => return Err(e).with_context(|| format!("sentence {}", i + 1)),
        }
    }
    if !losses.is_empty() {
        return Ok(Err(losses));
    }
    Ok(Ok(formats::write(to, sentences)?))
}

pub fn convert(from: Option<FormatId>, to: FormatId, input: &str, output: Option<&Path>) -> Result<u8> {
    let from = resolve_format(from, input)?;
    let sentences = load(from, input)?;
    match write_all(to, &sentences)? {
        Ok(text) => {
            emit(output, &text)?;
            Ok(EXIT_OK)
        }
        Err(losses) => {
            for l in losses {
                eprintln!("loss: {l}");
            }
            Ok(EXIT_LOSS)
        }
    }
}

fn graphs(format: FormatId, input: &str) -> Result<Vec<AnnotationGraph>> {
    if format == FormatId::Native {
        let text = read_input(input)?;
        return native::read_graphs(&text).with_context(|| format!("parsing {input} as native"));
    }
    Ok(load(format, input)?.into_iter().map(|s| s.graph).collect())
}

/// Invariant violations are errors; tree-shape findings are warnings.
pub fn validate(format: Option<FormatId>, input: &str) -> Result<u8> {
    let format = resolve_format(format, input)?;
    let mut errors = 0;
    for (i, g) in graphs(format, input)?.iter().enumerate() {
        let n = i + 1;
        for v in g.validate() {
            errors += 1;
            println!("sentence {n}: error: {v}");
        }
        let report = check_tree(g);
        for id in report.unlabeled {
            println!("sentence {n}: warning: {id} has no label");
        }
        for id in report.empty {
            println!("sentence {n}: warning: {id} has no children");
        }
        for id in report.discontinuous {
            println!("sentence {n}: warning: children of {id} do not tile its span");
        }
    }
    Ok(if errors > 0 { EXIT_INVALID } else { EXIT_OK })
}

pub fn edit(script: &Path, format: Option<FormatId>, input: &str, output: Option<&Path>) -> Result<u8> {
    let format = resolve_format(format, input)?;
    let text = std::fs::read_to_string(script).with_context(|| format!("reading {}", script.display()))?;
    let script = Script::parse(&text).map_err(|f| anyhow!("script line {}: {}", f.line, f.error))?;
    let mut session = EditSession::new(load(format, input)?);
    if let Err(f) = session.run(&script) {
        eprintln!("command {} (line {}) failed: {}", f.index, f.line, f.error);
        return Ok(EXIT_INVALID);
    }
    let to = if format.has_writer() { format } else { FormatId::Native };
    match write_all(to, &session.sentences)? {
        Ok(out) => {
            emit(output, &out)?;
            Ok(EXIT_OK)
        }
        Err(losses) => {
            for l in losses {
                eprintln!("loss: {l}");
            }
            Ok(EXIT_LOSS)
        }
    }
}

const TYPES: [ArcType; 7] = [
    ArcType::Word,
    ArcType::Phrasal,
    ArcType::Root,
    ArcType::Trace,
    ArcType::Pred,
    ArcType::Arg,
    ArcType::Mod,
];

/// Crossing branches: non-projective edge pairs in dependency graphs, and
/// constituents whose children do not tile their span otherwise.
fn crossings(g: &AnnotationGraph) -> usize {
    match DependencyView::find(g) {
        Some(view) => view.projectivity_report(g).len(),
        None => check_tree(g).discontinuous.len(),
    }
}

pub fn stats_report(sentences: &[Sentence]) -> String {
    let mut counts = [0usize; TYPES.len()];
    let mut crossing = 0;
    for s in sentences {
        for a in s.graph.arcs() {
            let i = TYPES.iter().position(|t| *t == a.kind).expect("every type is listed");
            counts[i] += 1;
        }
        crossing += crossings(&s.graph);
    }
    let mut out = format!("sentences: {}\n", sentences.len());
    out.push_str(&format!("arcs: {}\n", counts.iter().sum::<usize>()));
    for (t, c) in TYPES.iter().zip(counts) {
        out.push_str(&format!("{t}: {c}\n"));
    }
    out.push_str(&format!("crossings: {crossing}\n"));
    out
}

pub fn stats(format: Option<FormatId>, input: &str) -> Result<u8> {
    let format = resolve_format(format, input)?;
    print!("{}", stats_report(&load(format, input)?));
    Ok(EXIT_OK)
}

pub fn propbank(format: Option<FormatId>, input: &str) -> Result<u8> {
    let format = resolve_format(format, input)?;
    let sentences = load(format, input)?;
    let mut blocks = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        blocks.push(propbank::export_text(&s.graph).with_context(|| format!("sentence {}", i + 1))?);
    }
    print!("{}", blocks.join("\n"));
    Ok(EXIT_OK)
}

pub fn serve(port: u16, corpus: &Path) -> Result<u8> {
    let fallback = std::env::var(FORMAT_VAR).ok().and_then(|v| v.parse().ok());
    let store = Store::load(corpus, fallback)?;
    let count = store.documents().count();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(%addr, documents = count, "serving");
        treegraph_service::serve(listener, store).await.context("server stopped")
    })?;
    Ok(EXIT_OK)
}
