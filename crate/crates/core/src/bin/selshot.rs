use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use selshot::corpus::{Corpus, Intent, LengthTokenizer};
use selshot::entity::BackendKind;
use selshot::harness::{self, FeatureSources, RankQuery, RunSpec, RunStrategy};
use selshot::llm::{ApiStyle, Gateway};
use selshot::metrics::EvalReport;
use selshot::prompting::TemplateFamily;
use selshot::similarity::{EntityWeights, Strategy};
use selshot::stub::{StubConfig, StubMode, StubServer};

#[derive(Parser)]
#[command(name = "selshot", version, about = "Few-shot demonstration selection and evaluation for code explanation")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file, optionally writing it back normalized.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample counts and mean lengths per split and intent.
    Stats {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "lexical")]
        tokenizer: TokenizerArg,
        #[arg(long)]
        json: bool,
    },
    /// Extract entities for every sample into the cache.
    Extract {
        corpus: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Embed every sample into the cache.
    Embed {
        corpus: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Show the top-k demonstrations for one query.
    Rank {
        corpus: PathBuf,
        /// Query by sample id.
        #[arg(long, conflicts_with = "code", required_unless_present = "code")]
        id: Option<String>,
        /// Query by code text.
        #[arg(long)]
        code: Option<String>,
        #[arg(long, default_value = "ner")]
        strategy: Strategy,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Entity weight overrides, e.g. `class=2,function=0.5`.
        #[arg(long)]
        weights: Option<String>,
        #[command(flatten)]
        features: FeatureArgs,
        /// Use cached features only.
        #[arg(long)]
        no_auto_populate: bool,
        #[arg(long)]
        json: bool,
    },
    /// Generate and score explanations for the test split.
    Run(RunArgs),
    /// Compare reports against the first one, with paired t-tests.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print a report's aggregate table.
    Report {
        report: PathBuf,
        /// Also list per-sample scores.
        #[arg(long)]
        rows: bool,
    },
    /// Serve a scripted OpenAI-compatible endpoint.
    StubServer(StubArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenizerArg {
    Lexical,
    Code,
    Words,
    Whitespace,
}

impl From<TokenizerArg> for LengthTokenizer {
    fn from(t: TokenizerArg) -> Self {
        match t {
            TokenizerArg::Lexical => LengthTokenizer::Lexical,
            TokenizerArg::Code => LengthTokenizer::Code,
            TokenizerArg::Words => LengthTokenizer::Words,
            TokenizerArg::Whitespace => LengthTokenizer::Whitespace,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    LocalLexical,
    RemoteLlm,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::LocalLexical => BackendKind::LocalLexical,
            BackendArg::RemoteLlm => BackendKind::RemoteLlm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ApiArg {
    Completion,
    Chat,
}

impl From<ApiArg> for ApiStyle {
    fn from(a: ApiArg) -> Self {
        match a {
            ApiArg::Completion => ApiStyle::Completion,
            ApiArg::Chat => ApiStyle::Chat,
        }
    }
}

#[derive(Args, Clone)]
struct FeatureArgs {
    #[arg(long, default_value = ".selshot-cache")]
    cache_dir: PathBuf,
    #[arg(long, value_enum, default_value = "local-lexical")]
    backend: BackendArg,
    #[arg(long)]
    ner_model: Option<String>,
    #[arg(long)]
    ner_endpoint: Option<String>,
    #[arg(long, value_enum, default_value = "chat")]
    ner_api: ApiArg,
    #[arg(long)]
    embeddings_file: Option<PathBuf>,
    #[arg(long)]
    embedding_endpoint: Option<String>,
    #[arg(long)]
    embedding_model: Option<String>,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
}

impl FeatureArgs {
    fn sources(&self, auto_populate: bool) -> FeatureSources {
        let spec = RunSpec {
            cache_dir: self.cache_dir.clone(),
            auto_populate,
            concurrency: self.concurrency,
            entity_backend: self.backend.into(),
            endpoint: self.ner_endpoint.clone().unwrap_or_default(),
            ner_model: self.ner_model.clone(),
            ner_endpoint: self.ner_endpoint.clone(),
            ner_api: self.ner_api.into(),
            embeddings_file: self.embeddings_file.clone(),
            embedding_endpoint: self.embedding_endpoint.clone(),
            embedding_model: self.embedding_model.clone(),
            ..RunSpec::default()
        };
        FeatureSources::from_spec(&spec, Arc::new(Gateway::new()))
    }
}

/// Every field is optional so that flags only override what they name.
#[derive(Args)]
struct RunArgs {
    /// TOML file with RunSpec fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// zero-shot, random, token, semantic or ner.
    #[arg(long)]
    strategy: Option<RunStrategy>,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    family: Option<TemplateFamily>,
    #[arg(long, value_enum)]
    api: Option<ApiArg>,
    #[arg(long)]
    intent: Option<Intent>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_auto_populate: bool,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long, value_enum)]
    entity_backend: Option<BackendArg>,
    #[arg(long)]
    ner_model: Option<String>,
    #[arg(long)]
    ner_endpoint: Option<String>,
    #[arg(long)]
    embeddings_file: Option<PathBuf>,
    #[arg(long)]
    embedding_endpoint: Option<String>,
    #[arg(long)]
    embedding_model: Option<String>,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    strict_prompts: bool,
    #[arg(long)]
    intent_hints: bool,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    retry_base_delay_ms: Option<u64>,
}

impl RunArgs {
    fn into_spec(self) -> anyhow::Result<RunSpec> {
        let mut spec = match &self.config {
            Some(path) => RunSpec::from_toml_file(path)?,
            None => RunSpec::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    spec.$field = v.into();
                }
            )*};
        }
        set!(corpus, strategy, k, seed, model, endpoint, output_dir, cache_dir, concurrency, timeout_secs, retry_base_delay_ms);
        set!(api, entity_backend);
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    spec.$field = self.$field;
                }
            )*};
        }
        set_opt!(family, intent, ner_model, ner_endpoint, embeddings_file, embedding_endpoint, embedding_model, weights, template, limit);
        if self.no_auto_populate {
            spec.auto_populate = false;
        }
        spec.strict_prompts |= self.strict_prompts;
        spec.intent_hints |= self.intent_hints;
        Ok(spec)
    }
}

#[derive(Args)]
struct StubArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8089)]
    port: u16,
    #[arg(long, value_enum, default_value = "fixed")]
    mode: StubModeArg,
    /// Answer of the `fixed` mode.
    #[arg(long, default_value = "Returns the result.")]
    text: String,
    /// Corpus for the echo-reference and nearest-demo modes.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    fail_first: usize,
    #[arg(long)]
    fail_when_contains: Vec<String>,
    #[arg(long, default_value_t = 500)]
    fail_status: u16,
    #[arg(long, default_value_t = 32)]
    embedding_dim: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StubModeArg {
    Fixed,
    EchoPrompt,
    EchoReference,
    NearestDemo,
}

fn load_corpus(path: &Path) -> anyhow::Result<Corpus> {
    Ok(Corpus::ingest(path).map_err(selshot::Error::from)?)
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest { input, output } => {
            let summary = harness::cmd_ingest(&input, output.as_deref())?;
            println!("{summary}");
        }
        Command::Stats { corpus, tokenizer, json } => {
            let stats = harness::cmd_stats(&corpus, tokenizer.into())?;
            if json {
                print_json(&stats)?;
            } else {
                print!("{stats}");
            }
        }
        Command::Extract { corpus, features } => {
            let s = harness::cmd_extract(&corpus, &features.sources(true))?;
            println!("{} samples: {} cache hits, {} extracted", s.total, s.cache_hits, s.extracted);
        }
        Command::Embed { corpus, features } => {
            let s = harness::cmd_embed(&corpus, &features.sources(true))?;
            println!(
                "{} samples: {} cache hits, {} embedded, dimension {}",
                s.total, s.cache_hits, s.embedded, s.dim
            );
        }
        Command::Rank {
            corpus,
            id,
            code,
            strategy,
            k,
            weights,
            features,
            no_auto_populate,
            json,
        } => {
            let corpus = load_corpus(&corpus)?;
            let query = match (id, code) {
                (Some(id), _) => RankQuery::Id(id),
                (None, Some(code)) => RankQuery::Code(code),
                (None, None) => unreachable!("clap requires one of --id/--code"),
            };
            let weights = match weights {
                Some(w) => EntityWeights::parse_overrides(&w)
                    .map_err(|e| selshot::Error::from(harness::HarnessError::InvalidSpec(e)))?,
                None => EntityWeights::default(),
            };
            let table = harness::cmd_rank(&corpus, &query, strategy, k, weights, &features.sources(!no_auto_populate))?;
            if json {
                print_json(&table)?;
            } else {
                print!("{table}");
            }
        }
        Command::Run(args) => {
            let spec = args.into_spec()?;
            let outcome = harness::cmd_run(&spec)?;
            print!("{}", outcome.report.table());
            println!(
                "{} generated, {} resumed; report written to {}",
                outcome.generated,
                outcome.resumed,
                spec.report_path().display()
            );
        }
        Command::Compare { reports, json } => {
            let cmp = harness::cmd_compare(&reports)?;
            if json {
                print_json(&cmp)?;
            } else {
                print!("{cmp}");
            }
        }
        Command::Report { report, rows } => {
            let r = EvalReport::load(&report).with_context(|| format!("reading {}", report.display()))?;
            print!("{}", r.table());
            if rows {
                for row in &r.rows {
                    println!(
                        "{:<16} {:>8.3} {:>8.3} {:>8.3}  {}",
                        row.id, row.scores.bleu, row.scores.rouge_l, row.scores.meteor, row.prediction
                    );
                }
            }
        }
        Command::StubServer(args) => {
            let corpus = args.corpus.as_deref().map(load_corpus).transpose()?;
            let need_corpus = || corpus.as_ref().context("this mode needs --corpus");
            let mut config = match args.mode {
                StubModeArg::Fixed => StubConfig::fixed(args.text.clone()),
                StubModeArg::EchoPrompt => StubConfig::new(StubMode::EchoPrompt),
                StubModeArg::EchoReference => StubConfig::echo_reference(need_corpus()?),
                StubModeArg::NearestDemo => StubConfig::nearest_demo(need_corpus()?),
            };
            config.fail_first = args.fail_first;
            config.fail_when_contains = args.fail_when_contains;
            config.fail_status = args.fail_status;
            config.embedding_dim = args.embedding_dim;
            let server = StubServer::bind(&format!("{}:{}", args.host, args.port), config)?;
            eprintln!("stub endpoint listening at {}", server.base_url());
            server.wait();
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
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<selshot::Error>().map_or(2, selshot::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
