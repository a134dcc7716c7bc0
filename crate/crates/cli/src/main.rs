//! `dami`: check migration scripts, generate SQL, compare script sizes.
//!
//! Exit status is 0 on success, 1 when the input has diagnostics (or only
//! warnings under `--strict`), 2 for I/O and usage errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dami_core::catalog::{parse_ddl, SchemaCatalog};
use dami_core::codegen::{compile, EmitOptions};
use dami_core::diagnostic::has_errors;
use dami_core::dsl::parse_script;
use dami_core::stats::SizeReport;
use dami_core::validate::{validate, ResolvedScript};
use dami_core::{Diagnostic, DiagnosticCode, SourceSpan};

#[derive(Parser)]
#[command(name = "dami", version, about = "Compiler for DAMI data-migration scripts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a script against the source and target schemas.
    Check(CheckArgs),
    /// Compile a script to a PostgreSQL migration script.
    Generate(GenerateArgs),
    /// Compare the size of a script with the size of a SQL file.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Args)]
struct CheckArgs {
    /// Migration script (.dami).
    script: PathBuf,
    /// DDL of the source (legacy) schema.
    #[arg(long)]
    source: PathBuf,
    /// DDL of the target schema.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Treat warnings as errors.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    check: CheckArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `${DAMI_SOURCE_PASSWORD}` instead of the script's password.
    #[arg(long)]
    redact_credentials: bool,
    /// Also write `<out>.prov`, mapping each SQL statement to its DSL line.
    #[arg(long, requires = "out")]
    provenance: bool,
}

#[derive(Args)]
struct StatsArgs {
    dsl: PathBuf,
    sql: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    /// Diagnostics were already reported.
    #[error("input has diagnostics")]
    Rejected,
}

impl Failure {
    fn io(path: &Path, source: io::Error) -> Self {
        Failure::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = match &cli.command {
        Command::Check(a) => a.format,
        Command::Generate(a) => a.check.format,
        Command::Stats(a) => a.format,
    };
    let result = match cli.command {
        Command::Check(args) => check(&args).map(|_| ()),
        Command::Generate(args) => generate(&args),
        Command::Stats(args) => stats(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Io { path, source }) => {
            let d = Diagnostic::new(DiagnosticCode::Io, source.to_string(), SourceSpan::start());
            report(&path.display().to_string(), &[d], format);
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn report(file: &str, diagnostics: &[Diagnostic], format: Format) {
    let stderr = io::stderr();
    let mut err = stderr.lock();
    for d in diagnostics {
        let line = match format {
            Format::Text => d.to_text(file),
            Format::Records => d.to_record(file),
        };
        let _ = writeln!(err, "{line}");
    }
}

fn load_catalog(path: &Path, format: Format) -> Result<Option<SchemaCatalog>, Failure> {
    match parse_ddl(&read(path)?) {
        Ok(c) => Ok(Some(c)),
        Err(diags) => {
            report(&path.display().to_string(), &diags, format);
            Ok(None)
        }
    }
}

/// Parses and validates; every diagnostic is reported before returning.
fn check(args: &CheckArgs) -> Result<ResolvedScript, Failure> {
    let text = read(&args.script)?;
    let source = load_catalog(&args.source, args.format)?;
    let target = load_catalog(&args.target, args.format)?;
    let file = args.script.display().to_string();
    let script = match parse_script(&text) {
        Ok(s) => s,
        Err(diags) => {
            report(&file, &diags, args.format);
            return Err(Failure::Rejected);
        }
    };
    let (Some(source), Some(target)) = (source, target) else {
        return Err(Failure::Rejected);
    };
    match validate(&script, &source, &target) {
        Ok(resolved) => {
            report(&file, &resolved.warnings, args.format);
            if args.strict && !resolved.warnings.is_empty() {
                return Err(Failure::Rejected);
            }
            Ok(resolved)
        }
        Err(diags) => {
            debug_assert!(has_errors(&diags));
            report(&file, &diags, args.format);
            Err(Failure::Rejected)
        }
    }
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let resolved = check(&args.check)?;
    let options = if args.redact_credentials {
        EmitOptions::redacted()
    } else {
        EmitOptions::default()
    };
    let generated = compile(&resolved, &options);
    let sql = generated.to_sql();
    match &args.out {
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            out.write_all(sql.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
        Some(path) => {
            write_atomically(path, &sql)?;
            if args.provenance {
                let mut prov = path.as_os_str().to_owned();
                prov.push(".prov");
                let file = args.check.script.display().to_string();
                write_atomically(Path::new(&prov), &generated.provenance(&file))?;
            }
            Ok(())
        }
    }
}

/// Writes through a temporary file in the same directory, then renames, so
/// readers never see a partial file.
fn write_atomically(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Failure::io(path, e))?;
    tmp.persist(path).map_err(|e| Failure::io(path, e.error))?;
    Ok(())
}

fn stats(args: &StatsArgs) -> Result<(), Failure> {
    let dsl = read(&args.dsl)?;
    let sql = read(&args.sql)?;
    let report = SizeReport::measure(&dsl, &sql);
    let text = match args.format {
        Format::Text => report.to_table(),
        Format::Records => format!("{}\n", report.to_record()),
    };
    print!("{text}");
    Ok(())
}
