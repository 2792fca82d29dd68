use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use treegraph::formats::FormatId;

mod commands;

/// Convert, validate and edit treebanks stored as annotation graphs.
#[derive(Parser, Debug)]
#[command(name = "treegraph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Convert between formats. Writes to stdout when no output is given.
    Convert {
        #[arg(long)]
        from: Option<FormatId>,
        #[arg(long)]
        to: FormatId,
        /// Input file, or `-` for stdin.
        input: String,
        output: Option<PathBuf>,
    },
    /// Check graph invariants and tree well-formedness.
    Validate {
        #[arg(long)]
        format: Option<FormatId>,
        input: String,
    },
    /// Apply an edit script. Output is written only if every command succeeds.
    Edit {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        format: Option<FormatId>,
        input: String,
        output: Option<PathBuf>,
    },
    /// Count sentences, arcs by type, traces and crossings.
    Stats {
        #[arg(long)]
        format: Option<FormatId>,
        input: String,
    },
    /// Print every proposition in the flat text layout.
    Propbank {
        #[arg(long)]
        format: Option<FormatId>,
        input: String,
    },
    /// Serve a corpus (a file or a directory) over HTTP.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long)]
        corpus: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Convert { from, to, input, output } => commands::convert(from, to, &input, output.as_deref()),
        Cmd::Validate { format, input } => commands::validate(format, &input),
        Cmd::Edit { script, format, input, output } => commands::edit(&script, format, &input, output.as_deref()),
        Cmd::Stats { format, input } => commands::stats(format, &input),
        Cmd::Propbank { format, input } => commands::propbank(format, &input),
        Cmd::Serve { port, corpus } => commands::serve(port, &corpus),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_IO)
        }
    }
}
