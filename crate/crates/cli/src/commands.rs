use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{anyhow, Context};
use protomodel::diff::config::AdaptersConfig;
use protomodel::diff::{aggregate, render_markdown, run_suite, triage_all};
use protomodel::harness::GeneratedModel;
use protomodel::llm::{stub_file_name, CompletionBackend, LlmError};
use protomodel::manifest::Manifest;
use protomodel::pipeline::{self, PipelineError};
use protomodel::prompt::PromptAssets;
use protomodel::state::{extract_state_graph, state_graph_prompt, ExtractError, StateGraph};
use protomodel::symbex::engine::{Engine, DEFAULT_IMAGE};
use protomodel::testcase::TestSuite;
use protomodel::SynthesisPlan;
use serde::{Deserialize, Serialize};

use crate::workspace::{load_models, new_run, read_json, resolve_run, save_model, write_json};
use crate::{BackendArgs, EngineArgs, ManifestArgs};

/// How a command ended, for the exit code.
pub enum Outcome {
    Clean,
    Findings,
}

pub enum Failure {
    Usage(anyhow::Error),
    Env(anyhow::Error),
}

pub type CmdResult = Result<Outcome, Failure>;

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn env(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn env(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Env(e.into()))
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Runs a builder program and reads the manifest it prints.
fn manifest_from_code(cmd: &str) -> anyhow::Result<Manifest> {
    let out = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .output()
        .with_context(|| format!("running `{cmd}`"))?;
    if !out.status.success() {
        return Err(anyhow!(
            "`{cmd}` failed ({}):\n{}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(Manifest::parse(&String::from_utf8_lossy(&out.stdout))?)
}

fn load_manifest(a: &ManifestArgs) -> Result<Manifest, Failure> {
    match (&a.manifest, &a.from_code) {
        (Some(p), None) => Manifest::load(&absolute(p)).usage(),
        (None, Some(cmd)) => manifest_from_code(cmd).usage(),
        _ => Err(Failure::Usage(anyhow!(
            "give exactly one of --manifest or --from-code"
        ))),
    }
}

fn apply_backend(m: &mut Manifest, b: &BackendArgs) -> Result<(), Failure> {
    match b.backend.as_deref() {
        None => {}
        Some("stub") => {
            let dir = b
                .stub_dir
                .clone()
                .ok_or_else(|| Failure::Usage(anyhow!("--backend stub needs --stub-dir")))?;
            m.backend = Some(CompletionBackend::Stub {
                dir: absolute(&dir),
            });
        }
        Some("remote") => {
            let need = |v: &Option<String>, flag: &str| {
                v.clone()
                    .ok_or_else(|| Failure::Usage(anyhow!("--backend remote needs {flag}")))
            };
            m.backend = Some(CompletionBackend::RemoteChat {
                endpoint: need(&b.endpoint, "--endpoint")?,
                model: need(&b.model, "--model")?,
                api_key_env: b.api_key_env.clone(),
            });
        }
        Some(other) => {
            return Err(Failure::Usage(anyhow!(
                "unknown backend `{other}` (stub or remote)"
            )))
        }
    }
    Ok(())
}

fn backend(m: &Manifest) -> Result<CompletionBackend, Failure> {
    m.backend.clone().ok_or_else(|| {
        Failure::Usage(anyhow!(
            "no completion backend: set `backend` in the manifest or pass --backend"
        ))
    })
}

fn assets(dir: Option<&Path>) -> Result<PromptAssets, Failure> {
    match dir {
        Some(d) => PromptAssets::from_dir(d).usage(),
        None => Ok(PromptAssets::default()),
    }
}

fn plan_of(m: &Manifest) -> Result<SynthesisPlan, Failure> {
    m.plan().usage()
}

fn engine_of(m: &Manifest, e: &EngineArgs) -> Result<Engine, Failure> {
    let engine =
        match e.engine.as_deref() {
            None => m.engine.clone().unwrap_or(Engine::Container {
                runtime: None,
                image: DEFAULT_IMAGE.into(),
            }),
            Some("container") => Engine::Container {
                runtime: e.runtime.clone(),
                image: e.image.clone().unwrap_or_else(|| DEFAULT_IMAGE.into()),
            },
            Some("local") => Engine::Local {
                klee: "klee".into(),
                clang: "clang".into(),
                include_dir: e.include_dir.clone(),
            },
            Some("replay") => Engine::Replay {
                dir: absolute(e.replay_dir.as_deref().ok_or_else(|| {
                    Failure::Usage(anyhow!("--engine replay needs --replay-dir"))
                })?),
            },
            Some(other) => {
                return Err(Failure::Usage(anyhow!(
                    "unknown engine `{other}` (container, local or replay)"
                )))
            }
        };
    engine.check().env()?;
    Ok(engine)
}

fn synth_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Llm(e @ LlmError::Config(_)) => Failure::Usage(e.into()),
        e => Failure::Env(e.into()),
    }
}

fn record_run(
    run: &Path,
    m: &Manifest,
    plan: &SynthesisPlan,
    a: &PromptAssets,
) -> anyhow::Result<()> {
    fs::write(run.join("manifest.json"), m.to_json() + "\n")?;
    fs::write(run.join("plan.json"), plan.to_json() + "\n")?;
    let pdir = run.join("prompts");
    fs::create_dir_all(&pdir)?;
    fs::write(pdir.join("system_prompt.txt"), &a.system)?;
    fs::write(pdir.join("state_graph_prompt.txt"), &a.state_graph)?;
    for p in pipeline::prompts(plan, a) {
        fs::write(pdir.join(format!("{}.txt", p.target_module)), &p.user)?;
    }
    Ok(())
}

fn run_manifest(run: &Path) -> Result<Manifest, Failure> {
    let text = fs::read_to_string(run.join("manifest.json")).usage()?;
    Manifest::parse(&text).usage()
}

pub fn synth(
    m: &ManifestArgs,
    b: &BackendArgs,
    k: Option<usize>,
    temperature: Option<f64>,
    prompts: Option<&Path>,
    out: &Path,
) -> CmdResult {
    let mut manifest = load_manifest(m)?;
    apply_backend(&mut manifest, b)?;
    if let Some(k) = k {
        manifest.generation.k = k;
    }
    if let Some(t) = temperature {
        manifest.generation.temperature = t;
    }
    manifest.generation.validate().usage()?;
    let plan = plan_of(&manifest)?;
    let backend = backend(&manifest)?;
    let a = assets(prompts)?;
    let run = new_run(out).env()?;
    record_run(&run, &manifest, &plan, &a).env()?;
    let report = pipeline::synthesize(
        &plan,
        &backend,
        &manifest.generation,
        0,
        &a,
        &manifest.harness,
    )
    .map_err(synth_failure)?;
    for model in &report.models {
        save_model(&run, model).env()?;
    }
    write_json(&run.join("skipped.json"), &report.skipped).env()?;
    println!(
        "{}: {} models, {} samples skipped",
        run.display(),
        report.models.len(),
        report.skipped.len()
    );
    Ok(Outcome::Clean)
}

pub fn gen_tests(
    workspace: &Path,
    e: &EngineArgs,
    timeout: Option<u64>,
    keep_invalid: bool,
) -> CmdResult {
    let run = resolve_run(workspace).usage()?;
    let mut manifest = run_manifest(&run)?;
    if let Some(t) = timeout {
        manifest.engine_config.max_time_secs = t;
    }
    let plan = plan_of(&manifest)?;
    let engine = engine_of(&manifest, e)?;
    let models = load_models(&run).usage()?;
    if models.is_empty() {
        return Err(Failure::Usage(anyhow!(
            "{} has no models; run synth first",
            run.display()
        )));
    }
    let outcomes = pipeline::run_models(
        &engine,
        &models,
        &run.join("models"),
        &manifest.engine_config,
    );
    for o in &outcomes {
        let dir = run.join("models").join(&o.model_id);
        write_json(&dir.join("report.json"), o).env()?;
        if !o.ktests.is_empty() {
            let kdir = dir.join("ktests");
            fs::create_dir_all(&kdir).env()?;
            for (name, kt) in &o.ktests {
                fs::write(kdir.join(name), kt.to_bytes()).env()?;
            }
        }
    }
    let ran: Vec<_> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    if ran.is_empty() {
        let why: Vec<String> = outcomes
            .iter()
            .map(|o| format!("{}: {}", o.model_id, o.error.as_deref().unwrap_or("")))
            .collect();
        return Err(Failure::Env(anyhow!(
            "no model could be run:\n{}",
            why.join("\n")
        )));
    }
    let suite = pipeline::merge(&plan, &outcomes, keep_invalid);
    fs::write(run.join("tests.json"), suite.to_json() + "\n").env()?;
    println!(
        "{}: {} unique tests from {} of {} models",
        run.join("tests.json").display(),
        suite.tests.len(),
        ran.len(),
        outcomes.len()
    );
    Ok(Outcome::Clean)
}

#[derive(Serialize, Deserialize)]
struct StateGraphFile {
    model_id: String,
    graph: StateGraph,
    raw: String,
}

fn read_state_graph(path: &Path) -> anyhow::Result<StateGraph> {
    Ok(read_json::<StateGraphFile>(path)?.graph)
}

pub fn difftest(
    workspace: &Path,
    adapters: &Path,
    state_graph: Option<&Path>,
    witnesses: usize,
) -> CmdResult {
    let run = resolve_run(workspace).usage()?;
    let tests_path = run.join("tests.json");
    let text = fs::read_to_string(&tests_path)
        .with_context(|| format!("reading {}; run gen-tests first", tests_path.display()))
        .usage()?;
    let suite = TestSuite::from_json(&text).usage()?;
    let cfg = AdaptersConfig::load(adapters).usage()?;
    let graph = if cfg.needs_state_graph() {
        let p = state_graph
            .map(Path::to_path_buf)
            .unwrap_or_else(|| run.join("stategraph.json"));
        Some(
            read_state_graph(&p)
                .with_context(|| "a stateful adapter needs a state graph; run state-graph first")
                .usage()?,
        )
    } else {
        None
    };
    let mut list = cfg.build(suite.input_args(), graph.as_ref()).usage()?;
    let rows = run_suite(&mut list, &suite.tests).usage()?;
    let ids = list.iter().map(|a| a.id().to_string()).collect();
    let report = aggregate(ids, &triage_all(&rows), witnesses);
    write_json(&run.join("responses.json"), &rows).env()?;
    write_json(&run.join("triage.json"), &report).env()?;
    fs::write(run.join("triage.md"), render_markdown(&report, &suite)).env()?;
    println!(
        "{}: {} tests, {} disagreeing, {} findings",
        run.join("triage.md").display(),
        report.tests,
        report.disagreeing_tests,
        report.groups.len() + report.pair_groups.len()
    );
    Ok(if report.has_findings() {
        Outcome::Findings
    } else {
        Outcome::Clean
    })
}

fn pick_model<'a>(
    models: &'a [GeneratedModel],
    id: Option<&str>,
) -> Result<&'a GeneratedModel, Failure> {
    match id {
        Some(id) => models
            .iter()
            .find(|m| m.model_id == id)
            .ok_or_else(|| Failure::Usage(anyhow!("no model `{id}`"))),
        None => models
            .first()
            .ok_or_else(|| Failure::Usage(anyhow!("no models; run synth first"))),
    }
}

pub fn state_graph(workspace: &Path, model: Option<&str>, b: &BackendArgs) -> CmdResult {
    let run = resolve_run(workspace).usage()?;
    let mut manifest = run_manifest(&run)?;
    apply_backend(&mut manifest, b)?;
    let plan = plan_of(&manifest)?;
    let backend = backend(&manifest)?;
    let a = assets(Some(&run.join("prompts")))?;
    let models = load_models(&run).usage()?;
    let m = pick_model(&models, model)?;
    let (graph, raw) =
        extract_state_graph(&plan, &m.program_text, &backend, &a, &manifest.generation).map_err(
            |e| match e {
                ExtractError::NotStateful | ExtractError::NoSource(_) | ExtractError::Prompt(_) => {
                    Failure::Usage(e.into())
                }
                e => Failure::Env(e.into()),
            },
        )?;
    write_json(
        &run.join("stategraph.json"),
        &StateGraphFile {
            model_id: m.model_id.clone(),
            graph: graph.clone(),
            raw,
        },
    )
    .env()?;
    println!("{}", graph.render().trim_end());
    Ok(Outcome::Clean)
}

pub struct SweepArgs<'a> {
    pub k_max: usize,
    pub temperatures: &'a [f64],
    pub runs: usize,
    pub keep_invalid: bool,
    pub prompts: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn sweep(m: &ManifestArgs, b: &BackendArgs, e: &EngineArgs, s: &SweepArgs) -> CmdResult {
    if s.k_max == 0 || s.runs == 0 || s.temperatures.is_empty() {
        return Err(Failure::Usage(anyhow!(
            "--k-max, --runs and --temperatures must be non-empty"
        )));
    }
    let mut manifest = load_manifest(m)?;
    apply_backend(&mut manifest, b)?;
    let plan = plan_of(&manifest)?;
    let backend = backend(&manifest)?;
    let engine = engine_of(&manifest, e)?;
    let a = assets(s.prompts)?;
    let run = new_run(s.out).env()?;
    record_run(&run, &manifest, &plan, &a).env()?;
    let mut w = csv::Writer::from_path(run.join("sweep.csv")).env()?;
    w.write_record(["temperature", "k", "mean_unique_tests", "runs"])
        .env()?;
    for &t in s.temperatures {
        let cfg = protomodel::llm::GenerationConfig {
            k: s.k_max,
            temperature: t,
            ..manifest.generation.clone()
        };
        cfg.validate().usage()?;
        let mut totals = vec![0usize; s.k_max];
        for r in 0..s.runs {
            let offset = r * s.k_max;
            let counts =
                match pipeline::synthesize(&plan, &backend, &cfg, offset, &a, &manifest.harness) {
                    Ok(report) => {
                        let work = run
                            .join("sweep")
                            .join(format!("t{t}"))
                            .join(format!("r{r}"));
                        let outcomes = pipeline::run_models(
                            &engine,
                            &report.models,
                            &work,
                            &manifest.engine_config,
                        );
                        pipeline::unique_counts(&outcomes, offset, s.k_max, s.keep_invalid)
                    }
                    Err(PipelineError::AllFailed(f)) => {
                        log::warn!("temperature {t} run {r}: {f}");
                        vec![0; s.k_max]
                    }
                    Err(e) => return Err(synth_failure(e)),
                };
            for (tot, c) in totals.iter_mut().zip(counts) {
                *tot += c;
            }
        }
        for (k, tot) in totals.iter().enumerate() {
            let mean = *tot as f64 / s.runs as f64;
            w.write_record([
                t.to_string(),
                (k + 1).to_string(),
                format!("{mean:.3}"),
                s.runs.to_string(),
            ])
            .env()?;
        }
    }
    w.flush().env()?;
    println!("{}", run.join("sweep.csv").display());
    Ok(Outcome::Clean)
}

/// Prints the user prompt of one module, or of every module in assembly
/// order separated by blank lines.
pub fn prompt(
    m: &ManifestArgs,
    module: Option<&str>,
    system: bool,
    prompts: Option<&Path>,
) -> CmdResult {
    let manifest = load_manifest(m)?;
    let plan = plan_of(&manifest)?;
    let a = assets(prompts)?;
    if system {
        print!("{}", a.system);
        return Ok(Outcome::Clean);
    }
    let all = pipeline::prompts(&plan, &a);
    match module {
        Some(name) => {
            let p = all
                .iter()
                .find(|p| p.target_module == name)
                .ok_or_else(|| Failure::Usage(anyhow!("no function module `{name}`")))?;
            print!("{}", p.user);
        }
        None => {
            let texts: Vec<&str> = all.iter().map(|p| p.user.as_str()).collect();
            print!("{}", texts.join("\n"));
        }
    }
    Ok(Outcome::Clean)
}

/// Prints the stub fixture file each prompt and sample index reads.
pub fn stub_keys(
    m: &ManifestArgs,
    k: Option<usize>,
    prompts: Option<&Path>,
    model_source: Option<&Path>,
) -> CmdResult {
    let manifest = load_manifest(m)?;
    let plan = plan_of(&manifest)?;
    let a = assets(prompts)?;
    let k = k.unwrap_or(manifest.generation.k);
    for p in pipeline::prompts(&plan, &a) {
        for i in 0..k {
            println!("{}\t{i}\t{}", p.target_module, stub_file_name(&p, i));
        }
    }
    if let Some(src) = model_source {
        let text = fs::read_to_string(src).usage()?;
        let p = state_graph_prompt(&plan, &text, &a).ok_or_else(|| {
            Failure::Usage(anyhow!("{} does not define `{}`", src.display(), plan.main))
        })?;
        println!("state-graph\t0\t{}", stub_file_name(&p, 0));
    }
    Ok(Outcome::Clean)
}
