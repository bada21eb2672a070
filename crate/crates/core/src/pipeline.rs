//! The end-to-end steps: sample completions, assemble models, run the
//! engine on each model and merge the resulting tests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::graph::SynthesisPlan;
use crate::harness::{emit_all, AllFailed, EmitReport, GeneratedModel, HarnessOptions};
use crate::llm::{sample_range, CompletionBackend, GenerationConfig, LlmError};
use crate::prompt::{prompt_pair, PromptAssets, PromptPair};
use crate::symbex::engine::{Engine, EngineConfig};
use crate::symbex::ktest::KTest;
use crate::symbex::{dedup_union, filter_invalid, reconstruct_all};
use crate::testcase::{TestCase, TestSuite};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    AllFailed(#[from] AllFailed),
}

/// Prompt for every function module, in assembly order.
pub fn prompts(plan: &SynthesisPlan, assets: &PromptAssets) -> Vec<PromptPair> {
    plan.function_modules()
        .into_iter()
        .map(|m| prompt_pair(plan, m, assets))
        .collect()
}

/// Samples `cfg.k` completions per module, with sample indices starting
/// at `offset`, and assembles one model per index.
pub fn synthesize(
    plan: &SynthesisPlan,
    backend: &CompletionBackend,
    cfg: &GenerationConfig,
    offset: usize,
    assets: &PromptAssets,
    opts: &HarnessOptions,
) -> Result<EmitReport, PipelineError> {
    let mut samples = BTreeMap::new();
    for p in prompts(plan, assets) {
        let set = sample_range(backend, &p, cfg, offset)?;
        for (i, e) in &set.errors {
            log::warn!("`{}` sample {i}: {e}", p.target_module);
        }
        samples.insert(p.target_module.clone(), set);
    }
    let indices: Vec<usize> = (offset..offset + cfg.k).collect();
    Ok(emit_all(plan, &samples, &indices, opts)?)
}

/// What the engine produced for one model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelOutcome {
    pub model_id: String,
    pub sample_index: usize,
    pub test_files: usize,
    pub unreadable: Vec<(String, String)>,
    pub discarded: Vec<(String, String)>,
    pub timed_out: bool,
    pub wall_secs: f64,
    /// Set when the model was skipped.
    pub error: Option<String>,
    #[serde(skip)]
    pub tests: Vec<TestCase>,
    #[serde(skip)]
    pub ktests: Vec<(String, KTest)>,
    #[serde(skip)]
    pub environment_error: bool,
}

/// Runs the engine on every model concurrently, each in `work_root/<id>`.
pub fn run_models(
    engine: &Engine,
    models: &[GeneratedModel],
    work_root: &Path,
    cfg: &EngineConfig,
) -> Vec<ModelOutcome> {
    std::thread::scope(|s| {
        let handles: Vec<_> = models
            .iter()
            .map(|m| {
                s.spawn(move || {
                    let dir = work_root.join(&m.model_id);
                    let mut out = ModelOutcome {
                        model_id: m.model_id.clone(),
                        sample_index: m.sample_index,
                        test_files: 0,
                        unreadable: Vec::new(),
                        discarded: Vec::new(),
                        timed_out: false,
                        wall_secs: 0.0,
                        error: None,
                        tests: Vec::new(),
                        ktests: Vec::new(),
                        environment_error: false,
                    };
                    if let Err(e) = std::fs::create_dir_all(&dir) {
                        out.error = Some(format!("{}: {e}", dir.display()));
                        out.environment_error = true;
                        return out;
                    }
                    match engine.run(m, &dir, cfg) {
                        Ok(r) => {
                            let (tests, discarded) = reconstruct_all(&m.symbol_map, &r.ktests);
                            out.test_files = r.ktests.len();
                            out.unreadable = r.unreadable;
                            out.discarded = discarded
                                .into_iter()
                                .map(|d| (d.source, d.reason))
                                .collect();
                            out.timed_out = r.timed_out;
                            out.wall_secs = r.wall_secs;
                            out.tests = tests;
                            out.ktests = r.ktests;
                        }
                        Err(e) => {
                            log::warn!("skipping {}: {e}", m.model_id);
                            out.environment_error = e.is_environment();
                            out.error = Some(e.to_string());
                        }
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("engine thread panicked"))
            .collect()
    })
}

/// Unique union of the outcomes' tests, in model order.
pub fn merge(plan: &SynthesisPlan, outcomes: &[ModelOutcome], keep_invalid: bool) -> TestSuite {
    let tests = dedup_union(outcomes.iter().map(|o| o.tests.as_slice()));
    TestSuite {
        args: plan.main_module().args.clone(),
        tests: filter_invalid(tests, keep_invalid),
    }
}

/// Number of unique tests from samples `offset..offset + k`, for
/// k = 1..=k_max. Skipped samples contribute nothing.
pub fn unique_counts(
    outcomes: &[ModelOutcome],
    offset: usize,
    k_max: usize,
    keep_invalid: bool,
) -> Vec<usize> {
    (1..=k_max)
        .map(|k| {
            let u = dedup_union(
                outcomes
                    .iter()
                    .filter(|o| o.sample_index >= offset && o.sample_index < offset + k)
                    .map(|o| o.tests.as_slice()),
            );
            filter_invalid(u, keep_invalid).len()
        })
        .collect()
}
