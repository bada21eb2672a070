//! Running the symbolic execution engine on an assembled model.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ktest::KTest;
use crate::harness::GeneratedModel;

pub const DEFAULT_IMAGE: &str = "klee/klee:3.0";

fn default_image() -> String {
    DEFAULT_IMAGE.into()
}

fn default_klee() -> PathBuf {
    "klee".into()
}

fn default_clang() -> PathBuf {
    "clang".into()
}

/// Where the engine runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Engine {
    /// Inside a container image that ships the engine and its libc.
    Container {
        /// `docker` or `podman`; probed in that order when unset.
        #[serde(default)]
        runtime: Option<String>,
        #[serde(default = "default_image")]
        image: String,
    },
    /// Host binaries.
    Local {
        #[serde(default = "default_klee")]
        klee: PathBuf,
        #[serde(default = "default_clang")]
        clang: PathBuf,
        /// Directory holding `klee/klee.h`.
        #[serde(default)]
        include_dir: Option<PathBuf>,
    },
    /// Previously recorded tests under `<dir>/<model_id>/*.ktest`.
    Replay { dir: PathBuf },
}

impl Default for Engine {
    fn default() -> Self {
        Engine::Container {
            runtime: None,
            image: default_image(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub max_time_secs: u64,
    /// Appended to the engine's command line before the bitcode file.
    pub extra_args: Vec<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_time_secs: 60,
            extra_args: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("engine unavailable: {0}")]
    Unavailable(String),
    #[error("{model_id}: compilation failed:\n{stderr}")]
    Compile { model_id: String, stderr: String },
    #[error("{model_id}: engine failed ({status}):\n{stderr}")]
    Run {
        model_id: String,
        status: String,
        stderr: String,
    },
    #[error("{0}")]
    Io(String),
}

impl EngineError {
    /// Whether the failure lies in the environment rather than the model.
    pub fn is_environment(&self) -> bool {
        matches!(self, EngineError::Unavailable(_) | EngineError::Io(_))
    }
}

#[derive(Debug, Clone)]
pub struct EngineRunReport {
    pub model_id: String,
    /// Test files in name order.
    pub ktests: Vec<(String, KTest)>,
    /// Files that could not be parsed.
    pub unreadable: Vec<(String, String)>,
    pub timed_out: bool,
    pub wall_secs: f64,
}

fn io(e: std::io::Error, what: &Path) -> EngineError {
    EngineError::Io(format!("{}: {e}", what.display()))
}

/// Compile and engine command lines, relative to the model's work dir.
pub fn command_lines(
    cfg: &EngineConfig,
    clang: &str,
    klee: &str,
    include: Option<&str>,
) -> [Vec<String>; 2] {
    let mut cc: Vec<String> = vec![clang.into()];
    if let Some(i) = include {
        cc.push(format!("-I{i}"));
    }
    cc.extend(
        [
            "-emit-llvm",
            "-c",
            "-g",
            "-O0",
            "-Xclang",
            "-disable-O0-optnone",
            "model.c",
            "-o",
            "model.bc",
        ]
        .map(String::from),
    );
    let mut run: Vec<String> = vec![
        klee.into(),
        "--libc=uclibc".into(),
        "--posix-runtime".into(),
        format!("--max-time={}s", cfg.max_time_secs),
        "--external-calls=all".into(),
        "--output-dir=klee-out".into(),
    ];
    run.extend(cfg.extra_args.iter().cloned());
    run.push("model.bc".into());
    [cc, run]
}

fn spawn(argv: &[String], cwd: &Path) -> Result<Output, EngineError> {
    Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(cwd)
        .output()
        .map_err(|e| EngineError::Unavailable(format!("{}: {e}", argv[0])))
}

fn probe(bin: &str) -> bool {
    Command::new(bin)
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

fn shell_quote(s: &str) -> String {
    if s.bytes()
        .all(|b| b.is_ascii_alphanumeric() || b"-_=./".contains(&b))
    {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// Reads `*.ktest` files (binary or text dumps) from a directory.
pub fn read_ktests(
    dir: &Path,
) -> Result<(Vec<(String, KTest)>, Vec<(String, String)>), EngineError> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(e, dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ktest"))
        .collect();
    names.sort();
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for p in names {
        let name = p
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        match KTest::read(&p) {
            Ok(k) => ok.push((name, k)),
            Err(e) => bad.push((name, e.to_string())),
        }
    }
    Ok((ok, bad))
}

impl Engine {
    /// Checks that the engine can run at all.
    pub fn check(&self) -> Result<(), EngineError> {
        match self {
            Engine::Container { runtime, .. } => {
                self.container_runtime(runtime.as_deref()).map(drop)
            }
            Engine::Local { klee, clang, .. } => {
                for b in [klee, clang] {
                    if !probe(&b.to_string_lossy()) {
                        return Err(EngineError::Unavailable(format!(
                            "{} not runnable; install it or pass its path, or use the container engine",
                            b.display()
                        )));
                    }
                }
                Ok(())
            }
            Engine::Replay { dir } if dir.is_dir() => Ok(()),
            Engine::Replay { dir } => Err(EngineError::Unavailable(format!(
                "replay directory {} does not exist",
                dir.display()
            ))),
        }
    }

    fn container_runtime(&self, runtime: Option<&str>) -> Result<String, EngineError> {
        let candidates: Vec<&str> = match runtime {
            Some(r) => vec![r],
            None => vec!["docker", "podman"],
        };
        candidates
            .into_iter()
            .find(|r| probe(r))
            .map(str::to_string)
            .ok_or_else(|| EngineError::Unavailable(
                "no container runtime found; install docker or podman, or use a local engine install".into(),
            ))
    }

    /// Runs the engine on `model` inside `work_dir`, which receives
    /// `model.c` and the engine's output.
    pub fn run(
        &self,
        model: &GeneratedModel,
        work_dir: &Path,
        cfg: &EngineConfig,
    ) -> Result<EngineRunReport, EngineError> {
        let start = Instant::now();
        let id = model.model_id.clone();
        let out_dir = match self {
            Engine::Replay { dir } => {
                let d = dir.join(&id);
                if !d.is_dir() {
                    return Err(EngineError::Io(format!(
                        "no recorded tests at {}",
                        d.display()
                    )));
                }
                d
            }
            Engine::Local {
                klee,
                clang,
                include_dir,
            } => {
                self.prepare(model, work_dir)?;
                let inc = include_dir
                    .as_ref()
                    .map(|p| p.to_string_lossy().into_owned());
                let [cc, run] = command_lines(
                    cfg,
                    &clang.to_string_lossy(),
                    &klee.to_string_lossy(),
                    inc.as_deref(),
                );
                let o = spawn(&cc, work_dir)?;
                if !o.status.success() {
                    return Err(EngineError::Compile {
                        model_id: id,
                        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
                    });
                }
                self.finish(&id, spawn(&run, work_dir)?)?;
                work_dir.join("klee-out")
            }
            Engine::Container { runtime, image } => {
                let rt = self.container_runtime(runtime.as_deref())?;
                self.prepare(model, work_dir)?;
                let [cc, run] =
                    command_lines(cfg, "clang", "klee", Some("/home/klee/klee_src/include"));
                let script = format!(
                    "{} && {}",
                    cc.iter()
                        .map(|s| shell_quote(s))
                        .collect::<Vec<_>>()
                        .join(" "),
                    run.iter()
                        .map(|s| shell_quote(s))
                        .collect::<Vec<_>>()
                        .join(" ")
                );
                let abs = work_dir.canonicalize().map_err(|e| io(e, work_dir))?;
                let argv: Vec<String> = vec![
                    rt,
                    "run".into(),
                    "--rm".into(),
                    "-v".into(),
                    format!("{}:/work", abs.display()),
                    "-w".into(),
                    "/work".into(),
                    image.clone(),
                    "sh".into(),
                    "-c".into(),
                    script,
                ];
                self.finish(&id, spawn(&argv, work_dir)?)?;
                work_dir.join("klee-out")
            }
        };
        let (ktests, unreadable) = read_ktests(&out_dir)?;
        let timed_out = std::fs::read_to_string(out_dir.join("messages.txt"))
            .is_ok_and(|m| m.contains("HaltTimer invoked"));
        Ok(EngineRunReport {
            model_id: id,
            ktests,
            unreadable,
            timed_out,
            wall_secs: start.elapsed().as_secs_f64(),
        })
    }

    fn prepare(&self, model: &GeneratedModel, work_dir: &Path) -> Result<(), EngineError> {
        std::fs::create_dir_all(work_dir).map_err(|e| io(e, work_dir))?;
        let out = work_dir.join("klee-out");
        if out.exists() {
            std::fs::remove_dir_all(&out).map_err(|e| io(e, &out))?;
        }
        let src = work_dir.join("model.c");
        std::fs::write(&src, &model.program_text).map_err(|e| io(e, &src))
    }

    fn finish(&self, id: &str, o: Output) -> Result<(), EngineError> {
        if o.status.success() {
            Ok(())
        } else {
            Err(EngineError::Run {
                model_id: id.to_string(),
                status: o.status.to_string(),
                stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
            })
        }
    }
}
