//! Thin CLI over the library pipeline. Every subcommand maps to one function
//! in [`flowtok::pipeline`]; see the README for exit codes and file formats.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowtok::pipeline;
use flowtok::schema::{BpeGroup, SchemaConfig};

#[derive(Parser)]
#[command(name = "flowtok", version, about = "Hybrid tokenizer for tabular flow records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SchemaArg {
    /// Schema file; defaults to the bundled CIDDS-001 schema.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl SchemaArg {
    fn load(&self) -> flowtok::Result<SchemaConfig> {
        match &self.schema {
            Some(path) => SchemaConfig::load(path),
            None => Ok(SchemaConfig::cidds001()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic NetFlow CSV.
    Synth {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Number of rows.
        #[arg(long, default_value_t = 1000)]
        rows: u64,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate raw CSVs, sort chronologically, and write prepared records.
    Prepare {
        /// Input CSV files, concatenated in the given order.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        schema: SchemaArg,
        /// Output prepared-records file.
        #[arg(long)]
        out: PathBuf,
        /// Keep only the chronologically first N rows.
        #[arg(long)]
        limit: Option<usize>,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train the hybrid vocabulary from prepared records.
    TrainVocab {
        /// Prepared-records file from `prepare`.
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        schema: SchemaArg,
        /// Merge rules to learn per group.
        #[arg(long, default_value_t = 1000)]
        merges: u32,
        /// Weight pair counts by value frequency instead of counting each
        /// unique value once.
        #[arg(long)]
        weighted: bool,
        /// Comma-separated groups to train (ip,port,numeric). Always trained
        /// in that canonical order.
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<String>>,
        /// Continue training from an existing vocabulary file.
        #[arg(long)]
        resume_from: Option<PathBuf>,
        /// Output vocabulary file.
        #[arg(long)]
        out: PathBuf,
        /// Write the per-merge-step CSV log here.
        #[arg(long)]
        merge_log: Option<PathBuf>,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Encode prepared records into a token-ID corpus.
    Encode {
        /// Prepared-records file from `prepare`.
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        schema: SchemaArg,
        /// Vocabulary file from `train-vocab`.
        #[arg(long)]
        vocab: PathBuf,
        /// Output corpus file.
        #[arg(long)]
        out: PathBuf,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decode a corpus back into records, optionally verifying against the
    /// original records file.
    Decode {
        /// Corpus file from `encode`.
        #[arg(long)]
        corpus: PathBuf,
        /// Vocabulary file used for encoding.
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        schema: SchemaArg,
        /// Output records file.
        #[arg(long)]
        out: PathBuf,
        /// Original records file to compare against.
        #[arg(long)]
        verify: Option<PathBuf>,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rewrite the schema's categorical value sets from observed CSV data.
    InferValues {
        /// Input CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        schema: SchemaArg,
        /// Output schema file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> flowtok::Result<()> {
    match command {
        Command::Synth { out, rows, seed } => {
            let report = pipeline::synth(&out, seed, rows)?;
            println!("wrote {} synthetic flows (seed {}) to {}", report.rows, report.seed, out.display());
        }
        Command::Prepare {
            inputs,
            schema,
            out,
            limit,
            report,
        } => {
            let schema = schema.load()?;
            let r = pipeline::prepare(&inputs, &schema, &out, limit)?;
            println!("prepared {} records from {} file(s) in {:.2}s", r.rows, r.files, r.elapsed_seconds);
            if let (Some(first), Some(last)) = (&r.first_seen, &r.last_seen) {
                println!("time span: {first} .. {last}");
            }
            write_optional_report(report, &r)?;
        }
        Command::TrainVocab {
            records,
            schema,
            merges,
            weighted,
            groups,
            resume_from,
            out,
            merge_log,
            report,
        } => {
            let schema = schema.load()?;
            let groups = parse_groups(groups)?;
            let opts = pipeline::TrainOptions {
                merges_per_group: merges,
                weighted,
                groups,
                resume_from: resume_from.as_deref(),
                merge_log: merge_log.as_deref(),
            };
            let r = pipeline::train_vocab(&records, &schema, &out, &opts)?;
            for g in &r.groups {
                println!(
                    "{}: {} unique values, alphabet {}, {} merges{}, tokens {} -> {}",
                    g.group,
                    g.unique_values,
                    g.alphabet_size,
                    g.merges_learned,
                    if g.early_stopped { " (early stop)" } else { "" },
                    g.initial_tokens,
                    g.final_tokens
                );
            }
            println!(
                "vocabulary: {} entries ({} fixed) in {:.2}s",
                r.vocab_size, r.fixed_tokens, r.elapsed_seconds
            );
            write_optional_report(report, &r)?;
        }
        Command::Encode {
            records,
            schema,
            vocab,
            out,
            report,
        } => {
            let schema = schema.load()?;
            let r = pipeline::encode(&records, &schema, &vocab, &out)?;
            println!("flows:   {}", r.flows);
            println!("chars:   {}", r.chars);
            println!("tokens:  {}", r.tokens);
            if r.ratio_defined {
                println!("ratio:   {} chars/token", r.compression_ratio_display);
            } else {
                println!("ratio:   0 (undefined: no tokens)");
            }
            println!("elapsed: {:.2}s ({:.0} flows/min)", r.elapsed_seconds, r.flows_per_minute);
            write_optional_report(report, &r)?;
        }
        Command::Decode {
            corpus,
            vocab,
            schema,
            out,
            verify,
            report,
        } => {
            let schema = schema.load()?;
            let r = pipeline::decode(&corpus, &vocab, &schema, &out, verify.as_deref())?;
            println!("decoded {} flows in {:.2}s", r.flows, r.elapsed_seconds);
            if let Some(v) = &r.verified {
                println!("verified: {}/{} rows match ({})", v.matched, v.compared, v.match_percent_display);
            }
            write_optional_report(report, &r)?;
        }
        Command::InferValues { inputs, schema, out } => {
            let schema = schema.load()?;
            let r = pipeline::infer_values(&schema, &inputs, &out)?;
            for col in &r.columns {
                println!("{}: {} values", col.column, col.values);
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn parse_groups(groups: Option<Vec<String>>) -> flowtok::Result<Vec<BpeGroup>> {
    match groups {
        None => Ok(BpeGroup::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|name| {
                BpeGroup::parse(name).ok_or_else(|| flowtok::Error::SchemaValidation {
                    message: format!("unknown group name {name:?} (expected ip, port or numeric)"),
                })
            })
            .collect(),
    }
}

fn write_optional_report<T: serde::Serialize>(
    path: Option<PathBuf>,
    report: &T,
) -> flowtok::Result<()> {
    if let Some(path) = path {
        pipeline::write_report(&path, report)?;
    }
    Ok(())
}
