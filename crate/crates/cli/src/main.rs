//! `protomodel`: synthesize protocol models, generate tests from them and
//! run the tests differentially against real implementations.
//!
//! Exit codes: 0 success, 1 findings present, 2 usage or configuration
//! error, 3 environment error.

mod commands;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Failure, Outcome, SweepArgs};

#[derive(Parser)]
#[command(name = "protomodel", version, about = "Model-based protocol testing")]
struct Cli {
    /// More logging (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
pub struct ManifestArgs {
    /// Model manifest (JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Shell command whose standard output is a manifest, e.g. a program
    /// built with the library's builder API.
    #[arg(long, conflicts_with = "manifest")]
    pub from_code: Option<String>,
}

#[derive(Args)]
pub struct BackendArgs {
    /// `stub` (fixture files) or `remote` (chat-completions endpoint).
    /// Defaults to the manifest's backend.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub stub_dir: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API token.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub api_key_env: String,
}

#[derive(Args)]
pub struct EngineArgs {
    /// `container`, `local` or `replay`. Defaults to the manifest's engine,
    /// else `container`.
    #[arg(long)]
    pub engine: Option<String>,
    /// Container runtime (docker or podman); probed when unset.
    #[arg(long)]
    pub runtime: Option<String>,
    #[arg(long)]
    pub image: Option<String>,
    /// Engine include directory for `local`.
    #[arg(long)]
    pub include_dir: Option<PathBuf>,
    /// Directory of recorded `<model-id>/*.ktest` files for `replay`.
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample k completions per module and assemble k models.
    Synth {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        temperature: Option<f64>,
        /// Directory overriding `system_prompt.txt` / `state_graph_prompt.txt`.
        #[arg(long)]
        prompts: Option<PathBuf>,
        /// Workspace root; each run gets a new timestamped directory.
        #[arg(long, default_value = "workspace")]
        out: PathBuf,
    },
    /// Run the symbolic engine on every model and export the unique tests.
    GenTests {
        /// Run directory, or a workspace root (uses its latest run).
        #[arg(long, default_value = "workspace")]
        workspace: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Engine time budget per model, in seconds.
        #[arg(long)]
        timeout: Option<u64>,
        /// Keep tests whose inputs the model's gates rejected.
        #[arg(long)]
        keep_invalid: bool,
    },
    /// Run the tests against the configured implementations and triage
    /// disagreements.
    Difftest {
        #[arg(long, default_value = "workspace")]
        workspace: PathBuf,
        /// Adapter configuration (JSON).
        #[arg(long)]
        adapters: PathBuf,
        /// State graph for stateful adapters; defaults to the run's
        /// `stategraph.json`.
        #[arg(long)]
        state_graph: Option<PathBuf>,
        /// Witness tests kept per finding.
        #[arg(long, default_value_t = protomodel::diff::DEFAULT_WITNESS_CAP)]
        witnesses: usize,
    },
    /// Ask the language model for the state-transition graph of a model.
    StateGraph {
        #[arg(long, default_value = "workspace")]
        workspace: PathBuf,
        /// Model id; the first model by default.
        #[arg(long)]
        model_id: Option<String>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Unique test counts over k and temperature.
    Sweep {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 12)]
        k_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        temperatures: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        keep_invalid: bool,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long, default_value = "workspace")]
        out: PathBuf,
    },
    /// Print the rendered prompt for a module.
    Prompt {
        #[command(flatten)]
        manifest: ManifestArgs,
        /// Function module; all of them when omitted.
        #[arg(long)]
        module: Option<String>,
        /// Print the system prompt instead.
        #[arg(long, conflicts_with = "module")]
        system: bool,
        #[arg(long)]
        prompts: Option<PathBuf>,
    },
    /// Print the stub fixture file name for every prompt and sample.
    StubKeys {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        prompts: Option<PathBuf>,
        /// Also print the state-graph prompt's key for this model program.
        #[arg(long)]
        state_graph_of: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let r = match &cli.command {
        Cmd::Synth {
            manifest,
            backend,
            k,
            temperature,
            prompts,
            out,
        } => commands::synth(manifest, backend, *k, *temperature, prompts.as_deref(), out),
        Cmd::GenTests {
            workspace,
            engine,
            timeout,
            keep_invalid,
        } => commands::gen_tests(workspace, engine, *timeout, *keep_invalid),
        Cmd::Difftest {
            workspace,
            adapters,
            state_graph,
            witnesses,
        } => commands::difftest(workspace, adapters, state_graph.as_deref(), *witnesses),
        Cmd::StateGraph {
            workspace,
            model_id,
            backend,
        } => commands::state_graph(workspace, model_id.as_deref(), backend),
        Cmd::Sweep {
            manifest,
            backend,
            engine,
            k_max,
            temperatures,
            runs,
            keep_invalid,
            prompts,
            out,
        } => commands::sweep(
            manifest,
            backend,
            engine,
            &SweepArgs {
                k_max: *k_max,
                temperatures,
                runs: *runs,
                keep_invalid: *keep_invalid,
                prompts: prompts.as_deref(),
                out,
            },
        ),
        Cmd::Prompt {
            manifest,
            module,
            system,
            prompts,
        } => commands::prompt(manifest, module.as_deref(), *system, prompts.as_deref()),
        Cmd::StubKeys {
            manifest,
            k,
            prompts,
            state_graph_of,
        } => commands::stub_keys(manifest, *k, prompts.as_deref(), state_graph_of.as_deref()),
    };
    match r {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Findings) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Env(e)) => {
            eprintln!("environment error: {e:#}");
            ExitCode::from(3)
        }
    }
}
