use std::collections::BTreeSet;
use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use cohortscope::dataset::{load_dataset_dir, synthesize, write_dataset, DatasetError, SynthConfig};
use cohortscope::dsl::{compile, evaluate};
use cohortscope::service::{serve, LlmConfig, ServiceConfig};
use cohortscope::wrangler::{
    privacy_audit, read_prompt_log, run_pipeline, LlmProvider, ProviderMode, RecordingProvider, WranglerRequest,
};

#[derive(Parser)]
#[command(name = "cohortscope", version, about = "Cohort exploration over clinical blood-pressure data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 1000)]
        patients: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Replace the first patient's uid with this marker.
        #[arg(long)]
        sentinel: Option<String>,
    },
    /// Evaluate a query and print the member count followed by the uids.
    Query {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        dsl: String,
        /// Restrict evaluation to the members of this query.
        #[arg(long)]
        parent_dsl: Option<String>,
    },
    /// Translate a natural-language request; prints the trace then the query.
    Nl {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value = "mock")]
        mode: ProviderMode,
        /// Extra mock fixtures, or replay cassettes.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        base_url: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value = "COHORTSCOPE_LLM_API_KEY")]
        api_key_env: String,
        /// Append every prompt/response to this JSONL file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scan a prompt log for values taken from the data.
    Audit {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

enum Failure {
    User(String),
    Internal(String),
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let mut msg = e.to_string();
        for v in e.violations().iter().take(20) {
            msg.push_str(&format!("\n  {v}"));
        }
        Failure::User(msg)
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Failure::Internal(e.to_string())),
        _ => Ok(()),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth { patients, seed, out, sentinel } => {
            let cfg = SynthConfig { sentinel_uid: sentinel, ..SynthConfig::new(patients, seed) };
            let (store, report) = synthesize(&cfg)?;
            write_dataset(&store, &out).map_err(|e| Failure::Internal(e.to_string()))?;
            println!(
                "wrote {} patients ({} measurements) to {}",
                store.len(),
                store.total_measurements(),
                out.display()
            );
            println!("sustained-high: {}, u-shaped: {}", report.sustained_high.len(), report.u_shaped.len());
            Ok(())
        }
        Command::Query { data, dsl, parent_dsl } => {
            let store = load_dataset_dir(&data)?;
            let user = |e: cohortscope::dsl::QueryError| Failure::User(format!("{}: {e}", e.kind()));
            let parent: Option<BTreeSet<_>> = match parent_dsl {
                Some(p) => Some(evaluate(&compile(&p, store.codebook()).map_err(user)?, &store, None)),
                None => None,
            };
            let query = compile(&dsl, store.codebook()).map_err(user)?;
            let members = evaluate(&query, &store, parent.as_ref());
            let mut text = format!("{}\n", members.len());
            for uid in &members {
                text.push_str(uid.as_str());
                text.push('\n');
            }
            emit(&text)
        }
        Command::Nl { data, text, mode, fixtures, base_url, model, api_key_env, log } => {
            let store = load_dataset_dir(&data)?;
            let llm = LlmConfig {
                mode,
                base_url,
                model,
                api_key_env_var: api_key_env,
                fixture_dir: fixtures,
                ..LlmConfig::default()
            };
            let provider: Box<dyn LlmProvider> = llm.provider(None).map_err(|e| Failure::User(e.to_string()))?;
            let provider = match &log {
                Some(path) => RecordingProvider::with_log(provider, path),
                None => RecordingProvider::new(provider),
            };
            let request = WranglerRequest::new(text, store.codebook());
            match run_pipeline(&request, &provider) {
                Ok((_, trace)) => {
                    let json = serde_json::to_string_pretty(&trace).expect("trace serializes");
                    emit(&format!("{json}\n{}\n", trace.dsl_text))
                }
                Err(e) => {
                    emit(&format!("{}\n", serde_json::to_string_pretty(&e).expect("error serializes")))?;
                    Err(Failure::User(e.to_string()))
                }
            }
        }
        Command::Serve { config } => {
            let cfg = ServiceConfig::load(&config).map_err(|e| Failure::User(e.to_string()))?;
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .init();
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.to_string()))?;
            runtime.block_on(serve(cfg)).map_err(|e| match e {
                cohortscope::service::ServiceError::Config(c) => Failure::User(c.to_string()),
                cohortscope::service::ServiceError::Dataset(d) => Failure::from(d),
                other => Failure::Internal(other.to_string()),
            })?;
            runtime.shutdown_timeout(Duration::from_secs(1));
            Ok(())
        }
        Command::Audit { log, data } => {
            let store = load_dataset_dir(&data)?;
            let records = read_prompt_log(&log).map_err(|e| Failure::User(e.to_string()))?;
            let prompts: Vec<String> = records.into_iter().map(|r| r.prompt).collect();
            let violations = privacy_audit(&prompts, &store);
            for v in &violations {
                println!("{}", serde_json::to_string(v).expect("violation serializes"));
            }
            if violations.is_empty() {
                println!("{} prompts audited, no violations", prompts.len());
                Ok(())
            } else {
                Err(Failure::User(format!("{} privacy violations", violations.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
