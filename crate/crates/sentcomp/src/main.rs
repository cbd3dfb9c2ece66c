use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sentcomp::config::{BackendKind, Overrides, RunConfig};
use sentcomp::error::exit;
use sentcomp::pipeline;
use sentcomp::report::TableFormat;
use sentcomp::{Error, Result};
use sentcomp_core::metrics::RougeMode;
use sentcomp_core::CorpusFormat;

/// Sentence compression with length-primed instructions: build prompts, collect
/// completions, score and compare.
#[derive(Parser)]
#[command(name = "sentcomp", version)]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the instruction-format prompt file.
    Transform(ConfigArgs),
    /// Send prompts to the backend and write generation records.
    Run(ConfigArgs),
    /// Score generation records against the corpus.
    Score {
        #[command(flatten)]
        config: ConfigArgs,
        /// Records file; defaults to the one in the output directory.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Bucket tables, significance tests and comparison tables for saved reports.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        /// Metric reports (metrics.json files) to compare.
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        /// Row key (`setting / instruction / prompting`) the others are tested against.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Print a comparison table from saved reports.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        /// significance.json written by `analyze`.
        #[arg(long)]
        significance: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<String>,
        /// JSON `{dataset: {row key: value}}` of externally computed BERTScore.
        #[arg(long)]
        bert_scores: Option<PathBuf>,
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// labeled-tsv, pair-jsonl or multiref-jsonl.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    template_file: Option<PathBuf>,
    #[arg(long)]
    prompting: Option<String>,
    /// gold, none, ratio:<r> or fixed:<k>.
    #[arg(long)]
    policy: Option<String>,
    /// http, replay, oracle or predictions.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_new_tokens: Option<u32>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    strict: Option<bool>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// default or duc.
    #[arg(long)]
    extraction: Option<String>,
    /// f1 or recall.
    #[arg(long)]
    rouge_mode: Option<String>,
    #[arg(long)]
    stemming: Option<bool>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short = 'j', long)]
    parallelism: Option<usize>,
    /// Write the successful records and exit 0 even if some examples failed.
    #[arg(long)]
    skip_failures: bool,
}

impl ConfigArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::defaults(),
        };
        let format = self
            .format
            .map(|f| f.parse::<CorpusFormat>().map_err(|e| Error::Config(e.to_string())))
            .transpose()?;
        let rouge_mode = match self.rouge_mode.as_deref() {
            None => None,
            Some("f1") => Some(RougeMode::F1),
            Some("recall") => Some(RougeMode::Recall),
            Some(other) => return Err(Error::Config(format!("unknown rouge mode {other:?}"))),
        };
        cfg.apply(Overrides {
            corpus: self.corpus,
            format,
            dataset: self.dataset,
            template: self.template,
            template_file: self.template_file,
            prompting: self.prompting,
            policy: self.policy,
            backend: self.backend.map(|b| b.parse::<BackendKind>()).transpose()?,
            endpoint: self.endpoint,
            model_id: self.model,
            temperature: self.temperature,
            max_new_tokens: self.max_new_tokens,
            cache: self.cache,
            strict: self.strict,
            predictions: self.predictions,
            extraction_profile: self.extraction,
            rouge_mode,
            stemming: self.stemming,
            output_dir: self.output_dir,
            seed: self.seed,
            parallelism: self.parallelism,
            skip_failures: self.skip_failures.then_some(true),
        });
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Transform(args) => {
            let path = pipeline::transform(&args.resolve()?)?;
            println!("{}", path.display());
        }
        Command::Run(args) => {
            let out = pipeline::run(&args.resolve()?)?;
            println!("{}", out.records_path.display());
        }
        Command::Score { config, records } => {
            let cfg = config.resolve()?;
            let report = pipeline::score(&cfg, records.as_deref())?;
            let text = sentcomp::report::emit_tables(
                std::slice::from_ref(&report),
                &[],
                TableFormat::Markdown,
                &Default::default(),
            )?;
            print!("{text}");
        }
        Command::Analyze { config, reports, baseline } => {
            let cfg = config.resolve()?;
            pipeline::analyze(&cfg, &reports, baseline.as_deref())?;
            for file in pipeline::ANALYSIS_FILES {
                let path = cfg.output_dir.join(file);
                if path.exists() {
                    println!("{}", path.display());
                }
            }
        }
        Command::Report { reports, significance, baseline, bert_scores, format, output } => {
            let text = pipeline::report(
                &reports,
                significance.as_deref(),
                baseline.as_deref(),
                bert_scores.as_deref(),
                format.parse()?,
            )?;
            match output {
                Some(path) => sentcomp::io::write_file(Path::new(&path), text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
