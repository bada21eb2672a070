//! Symbolic harness emission and whole-program assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ctext::{normalize, split_top_level, ItemKind};
use crate::graph::{
    regex_ast, regex_signature, signature, ArgSpec, FunctionModule, ProtocolModule, RegexModule,
    SynthesisPlan, RESERVED_NAMES,
};
use crate::llm::SampleSet;
use crate::prompt::{include_preamble, sanitize_completion, INCLUDES};
use crate::regex::emit_constructors_indented;
use crate::types::{path_to_string, BaseKind, Flattener, PathSeg, SemanticType};

pub const REGEX_RUNTIME: &str = include_str!("../assets/c/regex_match.c");
pub const PRELUDE: &str = include_str!("../assets/c/prelude.c");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRole {
    Input,
    Output,
    ValidityFlag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub var_name: String,
    pub path: Vec<PathSeg>,
    pub kind: BaseKind,
    pub byte_width: usize,
    pub role: SlotRole,
}

/// Maps engine object names back to argument paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolMap {
    pub model_id: String,
    pub plan_fingerprint: String,
    /// Main's arguments; the last one is the output.
    pub args: Vec<ArgSpec>,
    pub entries: Vec<SymbolEntry>,
}

impl SymbolMap {
    pub fn inputs(&self) -> impl Iterator<Item = &SymbolEntry> {
        self.entries.iter().filter(|e| e.role == SlotRole::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &SymbolEntry> {
        self.entries.iter().filter(|e| e.role == SlotRole::Output)
    }

    pub fn flag(&self) -> Option<&SymbolEntry> {
        self.entries
            .iter()
            .find(|e| e.role == SlotRole::ValidityFlag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessOptions {
    /// Restrict symbolic characters to printable ASCII.
    pub printable_text: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            printable_text: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harness {
    pub main_text: String,
    pub symbol_map: SymbolMap,
}

pub fn plan_fingerprint(plan: &SynthesisPlan) -> String {
    let digest = Sha256::digest(plan.to_json().as_bytes());
    hex::encode(&digest[..8])
}

pub fn emit_harness(plan: &SynthesisPlan) -> Harness {
    emit_harness_with(plan, &HarnessOptions::default())
}

fn lvalue(root: &str, path: &[PathSeg]) -> String {
    let mut s = root.to_string();
    for seg in path.iter().skip(1) {
        match seg {
            PathSeg::Field(f) => {
                s.push('.');
                s.push_str(f);
            }
            PathSeg::Index(i) => {
                let _ = write!(s, "[{i}]");
            }
            PathSeg::Arg(_) => {}
        }
    }
    s
}

fn declare_slot(out: &mut String, var: &str, kind: &BaseKind) {
    let decl = match kind {
        BaseKind::CharacterBuffer { length } => format!("char {var}[{}];", length + 1),
        other => format!("{} {var};", other.storage_c_type()),
    };
    let _ = writeln!(out, "    {decl}");
    let _ = writeln!(
        out,
        "    klee_make_symbolic(&{var}, sizeof({var}), \"{var}\");"
    );
}

/// `main` for the plan's entry module. Slot variables are numbered over
/// inputs (left to right), then the output, then the validity flag.
pub fn emit_harness_with(plan: &SynthesisPlan, opts: &HarnessOptions) -> Harness {
    let main = plan.main_module();
    let ctypes = plan.c_types();
    let printable = i32::from(opts.printable_text);
    let mut fl = Flattener::new();
    let mut entries = Vec::new();
    let mut body = String::new();

    // Symbolic inputs.
    let mut arg_exprs = Vec::new();
    let mut assemble = String::new();
    for (i, a) in main.inputs().iter().enumerate() {
        let slots = fl.flatten(i, &a.ty);
        let top_text = matches!(a.ty, SemanticType::Text { .. });
        let root = format!("in{i}");
        if top_text {
            arg_exprs.push(slots[0].var_name.clone());
        } else {
            let _ = writeln!(assemble, "    {};", ctypes.declare(&a.ty, &root));
            arg_exprs.push(root.clone());
        }
        for s in slots {
            let v = &s.var_name;
            declare_slot(&mut body, v, &s.kind);
            match &s.kind {
                BaseKind::CharacterBuffer { .. } => {
                    let _ = writeln!(
                        body,
                        "    pm_constrain_text({v}, sizeof({v}), {printable});"
                    );
                }
                BaseKind::Character => {
                    let _ = writeln!(body, "    pm_constrain_char({v}, {printable});");
                }
                BaseKind::Boolean => {
                    let _ = writeln!(body, "    klee_assume({v} < 2);");
                }
                BaseKind::UnsignedInteger { bits } if !matches!(bits, 8 | 16 | 32 | 64) => {
                    let _ = writeln!(body, "    klee_assume({v} < {}ULL);", 1u64 << bits);
                }
                BaseKind::UnsignedInteger { .. } => {}
                BaseKind::Enumeration { variants, .. } => {
                    let _ = writeln!(body, "    klee_assume({v} < {});", variants.len());
                }
            }
            if !top_text {
                let lv = lvalue(&root, &s.path);
                match &s.kind {
                    BaseKind::CharacterBuffer { .. } => {
                        let _ = writeln!(assemble, "    memcpy({lv}, {v}, sizeof({v}));");
                    }
                    BaseKind::Enumeration { name, .. } => {
                        let _ = writeln!(assemble, "    {lv} = ({name}){v};");
                    }
                    _ => {
                        let _ = writeln!(assemble, "    {lv} = {v};");
                    }
                }
            }
            entries.push(SymbolEntry {
                var_name: s.var_name,
                path: s.path,
                byte_width: s.byte_width,
                kind: s.kind,
                role: SlotRole::Input,
            });
        }
    }
    body.push_str(&assemble);

    // Output capture.
    let out = main.output();
    let out_index = main.inputs().len();
    let out_ty = out.ty.resolved();
    let result_decl = match &out.ty {
        SemanticType::Text { .. } => "char* result_tmp".to_string(),
        t => ctypes.declare(t, "result_tmp"),
    };
    let _ = writeln!(body, "    {result_decl};");
    let out_slots = fl.flatten(out_index, &out.ty);
    let mut captures = String::new();
    for s in out_slots {
        let v = &s.var_name;
        declare_slot(&mut body, v, &s.kind);
        let lv = lvalue("result_tmp", &s.path);
        match &s.kind {
            BaseKind::CharacterBuffer { .. } => {
                let _ = writeln!(captures, "    pm_assume_text_eq({v}, sizeof({v}), {lv});");
            }
            BaseKind::Enumeration { .. } => {
                let _ = writeln!(captures, "    klee_assume((uint32_t){lv} == {v});");
            }
            _ => {
                let _ = writeln!(captures, "    klee_assume({lv} == {v});");
            }
        }
        entries.push(SymbolEntry {
            var_name: s.var_name,
            path: s.path,
            byte_width: s.byte_width,
            kind: s.kind,
            role: SlotRole::Output,
        });
    }

    // Validity flag.
    let flag = format!("x{}", fl.next_index());
    let _ = writeln!(body, "    bool bad_input;");
    declare_slot(&mut body, &flag, &BaseKind::Boolean);
    entries.push(SymbolEntry {
        var_name: flag.clone(),
        path: Vec::new(),
        kind: BaseKind::Boolean,
        byte_width: 1,
        role: SlotRole::ValidityFlag,
    });

    let call = format!("result_tmp = {}({});", main.name, arg_exprs.join(", "));
    if plan.gates.is_empty() {
        let _ = writeln!(body, "    bad_input = false;\n    {call}");
    } else {
        let conds: Vec<String> = plan
            .gates
            .iter()
            .map(|g| {
                let args: Vec<&str> = g.binding.iter().map(|&b| arg_exprs[b].as_str()).collect();
                format!("{}({})", g.module, args.join(", "))
            })
            .collect();
        let default = match out_ty {
            SemanticType::Boolean => "result_tmp = false;".to_string(),
            SemanticType::Text { .. } => "result_tmp = NULL;".to_string(),
            SemanticType::Enumeration { name, .. } => format!("result_tmp = ({name})0;"),
            SemanticType::Composite { .. } => "memset(&result_tmp, 0, sizeof(result_tmp));".into(),
            _ => "result_tmp = 0;".to_string(),
        };
        let _ = write!(
            body,
            "    if ({}) {{\n        bad_input = false;\n        {call}\n    }}\n    else {{\n        bad_input = true;\n        {default}\n    }}\n",
            conds.join(" && ")
        );
    }
    body.push_str(&captures);
    let _ = writeln!(body, "    klee_assume(bad_input == {flag});");
    body.push_str("    return 0;\n");

    Harness {
        main_text: format!("int main(void) {{\n{body}}}\n"),
        symbol_map: SymbolMap {
            model_id: String::new(),
            plan_fingerprint: plan_fingerprint(plan),
            args: main.args.clone(),
            entries,
        },
    }
}

/// C definition of a regex gate.
pub fn emit_gate_function(r: &RegexModule) -> String {
    let e = emit_constructors_indented(&regex_ast(r), &r.subject.name, "r", "    ");
    format!("{} {{\n{}}}\n", regex_signature(r), e.statements)
}

/// Where a function in the assembled program came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Runtime,
    Gate,
    Native,
    /// Completion for the named module at the model's sample index.
    Completion {
        module: String,
    },
    Harness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedModel {
    pub model_id: String,
    pub sample_index: usize,
    pub program_text: String,
    pub symbol_map: SymbolMap,
    /// Function name and its origin, in program order.
    pub provenance: Vec<(String, Origin)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssemblyError {
    #[error("no completion for module `{0}`")]
    MissingCompletion(String),
    #[error("`{name}` defined twice: {first} and {second}")]
    DuplicateSymbol {
        name: String,
        first: String,
        second: String,
    },
    #[error("completion for `{module}` redefines reserved name `{name}`")]
    Reserved { module: String, name: String },
    #[error("typedef `{name}` in completion for `{module}` differs from the model's")]
    DivergingTypedef { module: String, name: String },
    #[error("completion for `{module}` is not well-formed C: {message}")]
    Malformed { module: String, message: String },
}

pub fn model_id(sample_index: usize) -> String {
    format!("model-{sample_index:03}")
}

/// Builds one program from sanitized completions (module name -> text).
pub fn assemble_program(
    plan: &SynthesisPlan,
    harness: &Harness,
    completions: &BTreeMap<String, String>,
    sample_index: usize,
) -> Result<GeneratedModel, AssemblyError> {
    let ctypes = plan.c_types();
    let model_typedefs = ctypes.typedefs(plan.graph.all_types());
    let known_typedefs: BTreeMap<&str, String> = model_typedefs
        .iter()
        .map(|t| (t.name.as_str(), normalize(&t.text)))
        .collect();
    let module_names: BTreeSet<&str> = plan.graph.modules.keys().map(String::as_str).collect();

    let mut extra_pp: Vec<String> = Vec::new();
    let mut extra_types: Vec<(String, String, String)> = Vec::new();
    let mut defined: BTreeMap<String, String> = BTreeMap::new();
    let mut provenance = Vec::new();
    let mut functions = String::new();

    let mut define = |name: &str, site: String| -> Result<(), AssemblyError> {
        if let Some(first) = defined.get(name) {
            return Err(AssemblyError::DuplicateSymbol {
                name: name.to_string(),
                first: first.clone(),
                second: site,
            });
        }
        defined.insert(name.to_string(), site);
        Ok(())
    };

    for r in plan.regex_gates() {
        define(&r.name, "regex gate".into())?;
        functions.push_str(&emit_gate_function(r));
        functions.push('\n');
        provenance.push((r.name.clone(), Origin::Gate));
    }

    for name in &plan.assembly_order {
        match &plan.graph.modules[name] {
            ProtocolModule::Native(n) => {
                define(name, "native module".into())?;
                functions.push_str(n.body.trim_end());
                functions.push_str("\n\n");
                provenance.push((name.clone(), Origin::Native));
            }
            ProtocolModule::Function(f) => {
                let text = completions
                    .get(name)
                    .ok_or_else(|| AssemblyError::MissingCompletion(name.clone()))?;
                let items = split_top_level(text).map_err(|e| AssemblyError::Malformed {
                    module: name.clone(),
                    message: e.to_string(),
                })?;
                let mut pending_comment: Vec<&str> = Vec::new();
                for item in &items {
                    let site = format!("completion for `{name}` line {}", item.line);
                    match &item.kind {
                        ItemKind::Comment => {
                            pending_comment.push(&item.text);
                            continue;
                        }
                        ItemKind::Preprocessor => {
                            let line = item.text.trim().to_string();
                            if !INCLUDES.contains(&line.as_str()) && !extra_pp.contains(&line) {
                                extra_pp.push(line);
                            }
                        }
                        ItemKind::Typedef { name: tname } => {
                            let norm = normalize(&item.text);
                            if let Some(k) = known_typedefs.get(tname.as_str()) {
                                if *k != norm {
                                    return Err(AssemblyError::DivergingTypedef {
                                        module: name.clone(),
                                        name: tname.clone(),
                                    });
                                }
                            } else if let Some((_, other, _)) =
                                extra_types.iter().find(|(n, _, _)| n == tname)
                            {
                                if *other != norm {
                                    return Err(AssemblyError::DivergingTypedef {
                                        module: name.clone(),
                                        name: tname.clone(),
                                    });
                                }
                            } else {
                                extra_types.push((tname.clone(), norm, item.text.clone()));
                            }
                        }
                        ItemKind::Prototype { name: pname } => {
                            if !module_names.contains(pname.as_str()) {
                                functions.push_str(&item.text);
                                functions.push_str("\n\n");
                            }
                        }
                        ItemKind::Function { name: fname } => {
                            if RESERVED_NAMES.contains(&fname.as_str())
                                || fname.starts_with("klee_")
                            {
                                return Err(AssemblyError::Reserved {
                                    module: name.clone(),
                                    name: fname.clone(),
                                });
                            }
                            if module_names.contains(fname.as_str()) && fname != name {
                                return Err(AssemblyError::DuplicateSymbol {
                                    name: fname.clone(),
                                    first: format!("module `{fname}`"),
                                    second: site,
                                });
                            }
                            define(fname, site)?;
                            for c in pending_comment.drain(..) {
                                functions.push_str(c);
                                functions.push('\n');
                            }
                            functions.push_str(&item.text);
                            functions.push_str("\n\n");
                            provenance.push((
                                fname.clone(),
                                Origin::Completion {
                                    module: f.name.clone(),
                                },
                            ));
                        }
                        ItemKind::Declaration => {
                            functions.push_str(&item.text);
                            functions.push_str("\n\n");
                        }
                    }
                    pending_comment.clear();
                }
            }
            ProtocolModule::Regex(_) => {}
        }
    }

    let mut program = include_preamble();
    for l in &extra_pp {
        program.push_str(l);
        program.push('\n');
    }
    program.push('\n');
    for t in &model_typedefs {
        program.push_str(&t.text);
        program.push('\n');
    }
    for (_, _, text) in &extra_types {
        program.push_str(text);
        program.push('\n');
    }
    program.push('\n');
    if !plan.regex_gates().is_empty() {
        program.push_str(REGEX_RUNTIME);
        program.push('\n');
        provenance.insert(0, ("match".into(), Origin::Runtime));
    }
    program.push_str(PRELUDE);
    program.push('\n');
    for name in &plan.assembly_order {
        match &plan.graph.modules[name] {
            ProtocolModule::Function(f) => {
                let _ = writeln!(program, "{};", signature(f, &ctypes));
            }
            ProtocolModule::Native(n) => {
                let _ = writeln!(program, "{}", n.prototype.trim());
            }
            ProtocolModule::Regex(_) => {}
        }
    }
    program.push('\n');
    program.push_str(&functions);
    program.push_str(&harness.main_text);
    provenance.push(("main".into(), Origin::Harness));

    let id = model_id(sample_index);
    let mut symbol_map = harness.symbol_map.clone();
    symbol_map.model_id = id.clone();
    Ok(GeneratedModel {
        model_id: id,
        sample_index,
        program_text: program,
        symbol_map,
        provenance,
    })
}

/// One model per sample index. Indices where any module's completion is
/// missing, unsanitizable or fails assembly are skipped with a reason.
#[derive(Debug, Clone, Default)]
pub struct EmitReport {
    pub models: Vec<GeneratedModel>,
    pub skipped: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("every sample failed: {}", .0.iter().map(|(i, r)| format!("#{i}: {r}")).collect::<Vec<_>>().join("; "))]
pub struct AllFailed(pub Vec<(usize, String)>);

pub fn emit_all(
    plan: &SynthesisPlan,
    samples: &BTreeMap<String, SampleSet>,
    indices: &[usize],
    opts: &HarnessOptions,
) -> Result<EmitReport, AllFailed> {
    let harness = emit_harness_with(plan, opts);
    let modules: Vec<&FunctionModule> = plan.function_modules();
    let results: Vec<(usize, Result<GeneratedModel, String>)> = std::thread::scope(|s| {
        let handles: Vec<_> = indices
            .iter()
            .map(|&i| {
                let harness = &harness;
                let modules = &modules;
                s.spawn(move || (i, build_one(plan, harness, modules, samples, i)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("assembly thread panicked"))
            .collect()
    });
    let mut report = EmitReport::default();
    for (i, r) in results {
        match r {
            Ok(m) => report.models.push(m),
            Err(reason) => {
                log::warn!("skipping sample {i}: {reason}");
                report.skipped.push((i, reason));
            }
        }
    }
    if report.models.is_empty() {
        return Err(AllFailed(report.skipped));
    }
    Ok(report)
}

fn build_one(
    plan: &SynthesisPlan,
    harness: &Harness,
    modules: &[&FunctionModule],
    samples: &BTreeMap<String, SampleSet>,
    index: usize,
) -> Result<GeneratedModel, String> {
    let mut texts = BTreeMap::new();
    for m in modules {
        let set = samples
            .get(&m.name)
            .ok_or_else(|| format!("no samples for `{}`", m.name))?;
        let raw = match set.get(index) {
            Some(r) => r,
            None => {
                let why = set
                    .errors
                    .iter()
                    .find(|(i, _)| *i == index)
                    .map(|(_, e)| e.to_string())
                    .unwrap_or_else(|| "no completion".into());
                return Err(format!("`{}`: {why}", m.name));
            }
        };
        let clean = sanitize_completion(raw, plan, m).map_err(|e| format!("`{}`: {e}", m.name))?;
        texts.insert(m.name.clone(), clean);
    }
    assemble_program(plan, harness, &texts, index).map_err(|e| e.to_string())
}

/// Names passed to `klee_make_symbolic` in a program, in order.
pub fn symbolic_names(program: &str) -> Vec<String> {
    program
        .match_indices("klee_make_symbolic(")
        .filter_map(|(i, _)| {
            let rest = &program[i..];
            let line = rest.lines().next()?;
            let q1 = line.find('"')?;
            let q2 = line[q1 + 1..].find('"')?;
            Some(line[q1 + 1..q1 + 1 + q2].to_string())
        })
        .collect()
}

/// Human-readable listing of a symbol map.
pub fn describe(map: &SymbolMap) -> String {
    map.entries
        .iter()
        .map(|e| {
            format!(
                "{} {:?} {} ({} bytes)\n",
                e.var_name,
                e.role,
                path_to_string(&e.path),
                e.byte_width
            )
        })
        .collect()
}
