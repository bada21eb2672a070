//! Prompt rendering and completion sanitizing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ctext::{normalize, split_top_level, ItemKind};
use crate::graph::{doc_comment, signature, FunctionModule, SynthesisPlan};

pub const SYSTEM_PROMPT: &str = include_str!("../assets/system_prompt.txt");
pub const STATE_GRAPH_TEMPLATE: &str = include_str!("../assets/state_graph_prompt.txt");
const SOURCE_MARKER: &str = "<MODEL_SOURCE>";

/// Headers every prompt and program starts with.
pub const INCLUDES: [&str; 6] = [
    "#include <stdint.h>",
    "#include <stdbool.h>",
    "#include <string.h>",
    "#include <stdlib.h>",
    "#include <klee/klee.h>",
    "#include <stdio.h>",
];

pub fn include_preamble() -> String {
    INCLUDES.iter().map(|l| format!("{l}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
    pub target_module: String,
}

/// Prompt texts, either the built-in ones or overrides loaded from a
/// directory holding `system_prompt.txt` and/or `state_graph_prompt.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptAssets {
    pub system: String,
    pub state_graph: String,
}

impl Default for PromptAssets {
    fn default() -> Self {
        PromptAssets {
            system: SYSTEM_PROMPT.to_string(),
            state_graph: STATE_GRAPH_TEMPLATE.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("reading prompt override {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("state-graph template lacks the {SOURCE_MARKER} marker")]
    NoMarker,
    #[error("model source is empty")]
    EmptySource,
}

impl PromptAssets {
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut a = PromptAssets::default();
        for (file, slot) in [
            ("system_prompt.txt", &mut a.system),
            ("state_graph_prompt.txt", &mut a.state_graph),
        ] {
            let path = dir.join(file);
            if path.exists() {
                *slot = fs::read_to_string(&path).map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        if !a.state_graph.contains(SOURCE_MARKER) {
            return Err(PromptError::NoMarker);
        }
        Ok(a)
    }
}

pub fn render_system_prompt() -> String {
    SYSTEM_PROMPT.to_string()
}

/// Body style of the target function in the user prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyStyle {
    /// Prompt ends right after the opening brace.
    #[default]
    Open,
    /// Body holds `// implement me` and is closed.
    ImplementMe,
}

/// Typedef lines needed by one function module, in dependency order.
pub fn module_typedefs(plan: &SynthesisPlan, m: &FunctionModule) -> Vec<String> {
    let ctypes = plan.c_types();
    let mut roots: Vec<&crate::SemanticType> = m.args.iter().map(|a| &a.ty).collect();
    for c in plan.graph.callees(&m.name) {
        if let Some(f) = plan.graph.modules[c].as_function() {
            roots.extend(f.args.iter().map(|a| &a.ty));
        }
    }
    ctypes.typedefs(roots).into_iter().map(|t| t.text).collect()
}

pub fn render_user_prompt(plan: &SynthesisPlan, m: &FunctionModule) -> String {
    render_user_prompt_with(plan, m, BodyStyle::Open)
}

pub fn render_user_prompt_with(
    plan: &SynthesisPlan,
    m: &FunctionModule,
    style: BodyStyle,
) -> String {
    let mut s = include_preamble();
    let typedefs = module_typedefs(plan, m);
    if !typedefs.is_empty() {
        s.push('\n');
        for t in typedefs {
            s.push_str(&t);
            s.push('\n');
        }
    }
    s.push('\n');
    for c in plan.contexts.get(&m.name).into_iter().flatten() {
        s.push_str(&c.doc);
        s.push_str(&c.prototype);
        s.push_str("\n\n");
    }
    s.push_str(&doc_comment(m));
    s.push_str(&signature(m, &plan.c_types()));
    match style {
        BodyStyle::Open => s.push_str(" {\n"),
        BodyStyle::ImplementMe => s.push_str(" {\n  // implement me\n}\n"),
    }
    s
}

pub fn prompt_pair(plan: &SynthesisPlan, m: &FunctionModule, assets: &PromptAssets) -> PromptPair {
    PromptPair {
        system: assets.system.clone(),
        user: render_user_prompt(plan, m),
        target_module: m.name.clone(),
    }
}

pub fn render_state_graph_prompt(model_source: &str) -> Result<String, PromptError> {
    render_state_graph_prompt_with(&PromptAssets::default(), model_source)
}

pub fn render_state_graph_prompt_with(
    assets: &PromptAssets,
    model_source: &str,
) -> Result<String, PromptError> {
    if model_source.trim().is_empty() {
        return Err(PromptError::EmptySource);
    }
    Ok(assets
        .state_graph
        .replacen(SOURCE_MARKER, model_source.trim_end(), 1))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SanitizeError {
    #[error("completion has no definition of `{0}`")]
    MissingSignature(String),
    #[error("signature of `{name}` was changed: expected `{expected}`, found `{found}`")]
    AlteredSignature {
        name: String,
        expected: String,
        found: String,
    },
    #[error("completion lacks typedef `{0}`")]
    MissingTypedef(String),
    #[error("typedef `{name}` was altered:\n- {expected}\n+ {found}")]
    AlteredTypedef {
        name: String,
        expected: String,
        found: String,
    },
    #[error("completion is not well-formed C: {0}")]
    Malformed(String),
}

/// Cuts the code region out of a raw completion and checks that the
/// target definition and every prompt typedef survived unchanged.
pub fn sanitize_completion(
    raw: &str,
    plan: &SynthesisPlan,
    m: &FunctionModule,
) -> Result<String, SanitizeError> {
    let code = extract_code(raw);
    let items = split_top_level(&code).map_err(|e| SanitizeError::Malformed(e.to_string()))?;

    let expected_sig = signature(m, &plan.c_types());
    let def = items
        .iter()
        .find(|i| matches!(&i.kind, ItemKind::Function { name } if *name == m.name))
        .ok_or_else(|| SanitizeError::MissingSignature(m.name.clone()))?;
    let head = def.text.split('{').next().unwrap_or_default();
    if normalize(head) != normalize(&expected_sig) {
        return Err(SanitizeError::AlteredSignature {
            name: m.name.clone(),
            expected: expected_sig,
            found: head.split_whitespace().collect::<Vec<_>>().join(" "),
        });
    }

    for td in module_typedefs(plan, m) {
        let name = match split_top_level(&td).ok().and_then(|v| v.into_iter().next()) {
            Some(crate::ctext::Item {
                kind: ItemKind::Typedef { name },
                ..
            }) => name,
            _ => continue,
        };
        let found = items
            .iter()
            .find(|i| matches!(&i.kind, ItemKind::Typedef { name: n } if *n == name))
            .ok_or_else(|| SanitizeError::MissingTypedef(name.clone()))?;
        if normalize(&found.text) != normalize(&td) {
            return Err(SanitizeError::AlteredTypedef {
                name,
                expected: td,
                found: found.text.split_whitespace().collect::<Vec<_>>().join(" "),
            });
        }
    }
    Ok(code)
}

/// Fenced text: the region between the first opening fence and the last
/// closing fence. Then (fenced or not) prose lines before the first line
/// of code and after the last column-0 `}` are dropped.
pub fn extract_code(raw: &str) -> String {
    let lines: Vec<&str> = raw.lines().collect();
    let fences: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with("```"))
        .map(|(i, _)| i)
        .collect();
    let body: &[&str] = match (fences.first(), fences.last()) {
        (Some(&a), Some(&b)) if b > a => &lines[a + 1..b],
        (Some(&a), _) => &lines[a + 1..],
        _ => &lines[..],
    };
    let start = body.iter().position(|l| starts_code(l)).unwrap_or(0);
    let end = body
        .iter()
        .rposition(|l| l.starts_with('}'))
        .filter(|&e| e >= start)
        .map(|e| e + 1)
        .unwrap_or(body.len());
    let mut out = body[start..end].join("\n");
    out.push('\n');
    out
}

fn starts_code(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('#')
        || t.starts_with("typedef")
        || t.starts_with("//")
        || t.starts_with("/*")
        || t.starts_with("static")
        || t.starts_with("struct")
        || t.starts_with("enum")
        || t.starts_with("const")
        || t.starts_with("unsigned")
        || ["bool ", "char", "int ", "uint", "void ", "long "]
            .iter()
            .any(|p| t.starts_with(p))
        || line.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') && t.contains('(')
}
