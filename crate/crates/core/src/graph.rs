//! Protocol modules, their pipe/call wiring, and synthesis planning.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::regex::{parse_pattern, RegexAst, RegexError};
use crate::types::{is_valid_identifier, validate_types, CTypes, SemanticType, Violation};

/// A named, typed, documented argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: SemanticType,
    pub description: String,
}

impl ArgSpec {
    pub fn new(name: impl Into<String>, ty: SemanticType, description: impl Into<String>) -> Self {
        ArgSpec {
            name: name.into(),
            ty,
            description: description.into(),
        }
    }
}

/// A function whose body is synthesized. The last argument is the output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionModule {
    pub name: String,
    pub description: String,
    pub args: Vec<ArgSpec>,
}

impl FunctionModule {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        args: Vec<ArgSpec>,
    ) -> Self {
        FunctionModule {
            name: name.into(),
            description: description.into(),
            args,
        }
    }

    pub fn inputs(&self) -> &[ArgSpec] {
        &self.args[..self.args.len().saturating_sub(1)]
    }

    pub fn output(&self) -> &ArgSpec {
        self.args
            .last()
            .expect("validated function module has arguments")
    }
}

/// A boolean predicate "subject matches pattern", compiled to C directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegexModule {
    pub name: String,
    pub pattern: String,
    pub subject: ArgSpec,
}

/// Hand-written C supplied by the user and linked verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NativeModule {
    pub name: String,
    /// Prototype terminated by `;`, e.g. `uint32_t mask(uint32_t n);`.
    pub prototype: String,
    /// Full definition text.
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolModule {
    Function(FunctionModule),
    Regex(RegexModule),
    Native(NativeModule),
}

impl ProtocolModule {
    pub fn name(&self) -> &str {
        match self {
            ProtocolModule::Function(m) => &m.name,
            ProtocolModule::Regex(m) => &m.name,
            ProtocolModule::Native(m) => &m.name,
        }
    }

    /// Typed inputs, when the module has them (natives are opaque).
    pub fn inputs(&self) -> Option<&[ArgSpec]> {
        match self {
            ProtocolModule::Function(m) => Some(m.inputs()),
            ProtocolModule::Regex(m) => Some(std::slice::from_ref(&m.subject)),
            ProtocolModule::Native(_) => None,
        }
    }

    fn arg_types(&self) -> Vec<&SemanticType> {
        match self {
            ProtocolModule::Function(m) => m.args.iter().map(|a| &a.ty).collect(),
            ProtocolModule::Regex(m) => vec![&m.subject.ty],
            ProtocolModule::Native(_) => Vec::new(),
        }
    }

    pub fn as_function(&self) -> Option<&FunctionModule> {
        match self {
            ProtocolModule::Function(m) => Some(m),
            _ => None,
        }
    }
}

impl From<FunctionModule> for ProtocolModule {
    fn from(m: FunctionModule) -> Self {
        ProtocolModule::Function(m)
    }
}

impl From<RegexModule> for ProtocolModule {
    fn from(m: RegexModule) -> Self {
        ProtocolModule::Regex(m)
    }
}

impl From<NativeModule> for ProtocolModule {
    fn from(m: NativeModule) -> Self {
        ProtocolModule::Native(m)
    }
}

/// Names the generated program defines itself.
pub const RESERVED_NAMES: &[&str] = &[
    "main",
    "match",
    "match_cont",
    "Regex",
    "RegexCont",
    "RegexOp",
    "OR",
    "SEQ",
    "STAR",
    "RANGE",
    "match_resume",
    "pm_constrain_text",
    "pm_constrain_char",
    "pm_assume_text_eq",
];

/// A pipe with its computed binding: `binding[i]` is the target input
/// index fed by the source's i-th input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipe {
    pub source: String,
    pub target: String,
    pub binding: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: String,
    pub callees: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate module name `{0}`")]
    DuplicateModule(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("{relation} cycle: {}", .path.join(" -> "))]
    Cycle {
        relation: &'static str,
        path: Vec<String>,
    },
    #[error("regex module `{0}` cannot call other modules")]
    RegexCaller(String),
    #[error("pipe {src} -> {dst}: {reason}")]
    PipeMismatch {
        src: String,
        dst: String,
        reason: String,
    },
    #[error("module `{module}`: {message}")]
    InvalidModule { module: String, message: String },
    #[error("regex module `{module}`: {error}")]
    BadPattern { module: String, error: RegexError },
    #[error("invalid types: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTypes(Vec<Violation>),
    #[error("ambiguous main: {0}")]
    AmbiguousMain(String),
    #[error("main `{0}` must be a function module")]
    MainNotFunction(String),
    #[error("pipe {src} -> {dst} does not feed main `{main}`")]
    PipeNotIntoMain {
        src: String,
        dst: String,
        main: String,
    },
}

/// Modules plus validated wiring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub modules: IndexMap<String, ProtocolModule>,
    pub pipes: Vec<Pipe>,
    pub call_edges: Vec<CallEdge>,
}

/// Builds and validates a graph. Pipe bindings follow insertion order per
/// target: each pipe binds its source's inputs, in order, to the
/// lowest-indexed target inputs not yet bound.
pub fn build_graph(
    modules: Vec<ProtocolModule>,
    pipes: Vec<(String, String)>,
    call_edges: Vec<(String, Vec<String>)>,
) -> Result<DependencyGraph, GraphError> {
    let mut map: IndexMap<String, ProtocolModule> = IndexMap::new();
    for m in modules {
        validate_module(&m)?;
        let name = m.name().to_string();
        if map.insert(name.clone(), m).is_some() {
            return Err(GraphError::DuplicateModule(name));
        }
    }
    let violations = validate_types(map.values().flat_map(|m| m.arg_types()));
    if !violations.is_empty() {
        return Err(GraphError::InvalidTypes(violations));
    }
    let known = |n: &str| -> Result<(), GraphError> {
        if map.contains_key(n) {
            Ok(())
        } else {
            Err(GraphError::UnknownModule(n.to_string()))
        }
    };

    let mut edges = Vec::new();
    for (caller, callees) in call_edges {
        known(&caller)?;
        if matches!(map[&caller], ProtocolModule::Regex(_)) {
            return Err(GraphError::RegexCaller(caller));
        }
        for c in &callees {
            known(c)?;
        }
        edges.push(CallEdge { caller, callees });
    }

    let mut bound: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut bound_pipes = Vec::new();
    for (source, target) in pipes {
        known(&source)?;
        known(&target)?;
        let mismatch = |reason: String| GraphError::PipeMismatch {
            src: source.clone(),
            dst: target.clone(),
            reason,
        };
        let src = &map[&source];
        let tgt = match &map[&target] {
            ProtocolModule::Function(f) => f,
            _ => return Err(mismatch("pipe target must be a function module".into())),
        };
        let src_inputs = src
            .inputs()
            .ok_or_else(|| mismatch("native modules cannot gate a pipe".into()))?;
        if let ProtocolModule::Function(f) = src {
            if f.output().ty.resolved() != &SemanticType::Boolean {
                return Err(mismatch("pipe source must return a boolean".into()));
            }
        }
        let taken = bound.entry(target.clone()).or_default();
        let free: Vec<usize> = (0..tgt.inputs().len())
            .filter(|i| !taken.contains(i))
            .collect();
        if free.len() < src_inputs.len() {
            return Err(mismatch(format!(
                "source has {} inputs but only {} target inputs are unbound",
                src_inputs.len(),
                free.len()
            )));
        }
        let binding: Vec<usize> = free[..src_inputs.len()].to_vec();
        for (s, &t) in src_inputs.iter().zip(&binding) {
            let ta = &tgt.inputs()[t];
            if s.ty != ta.ty {
                return Err(mismatch(format!(
                    "`{}` and `{}` (input {t}) have different types",
                    s.name, ta.name
                )));
            }
        }
        taken.extend(binding.iter().copied());
        bound_pipes.push(Pipe {
            source,
            target,
            binding,
        });
    }

    let g = DependencyGraph {
        modules: map,
        pipes: bound_pipes,
        call_edges: edges,
    };
    g.check_cycles()?;
    Ok(g)
}

fn validate_module(m: &ProtocolModule) -> Result<(), GraphError> {
    let name = m.name();
    let invalid = |message: String| GraphError::InvalidModule {
        module: name.to_string(),
        message,
    };
    if !is_valid_identifier(name) {
        return Err(invalid("name is not a valid C identifier".into()));
    }
    if RESERVED_NAMES.contains(&name) || name.starts_with("klee_") {
        return Err(invalid("name is reserved by the generated program".into()));
    }
    let check_arg = |a: &ArgSpec| -> Result<(), GraphError> {
        if !is_valid_identifier(&a.name) {
            return Err(invalid(format!(
                "argument `{}` is not a valid identifier",
                a.name
            )));
        }
        if a.description.trim().is_empty() {
            return Err(invalid(format!("argument `{}` has no description", a.name)));
        }
        Ok(())
    };
    match m {
        ProtocolModule::Function(f) => {
            if f.description.trim().is_empty() {
                return Err(invalid("empty description".into()));
            }
            if f.args.len() < 2 {
                return Err(invalid(
                    "needs at least one input and one output argument".into(),
                ));
            }
            let mut seen = BTreeSet::new();
            for a in &f.args {
                check_arg(a)?;
                if !seen.insert(&a.name) {
                    return Err(invalid(format!("duplicate argument `{}`", a.name)));
                }
            }
            if matches!(f.output().ty.resolved(), SemanticType::ArrayOf { .. }) {
                return Err(invalid("output cannot be an array".into()));
            }
        }
        ProtocolModule::Regex(r) => {
            check_arg(&r.subject)?;
            if !matches!(r.subject.ty, SemanticType::Text { .. }) {
                return Err(invalid("regex subject must be text".into()));
            }
            parse_pattern(&r.pattern).map_err(|error| GraphError::BadPattern {
                module: name.to_string(),
                error,
            })?;
        }
        ProtocolModule::Native(n) => {
            let proto = n.prototype.trim();
            if !proto.ends_with(';') || !proto.contains(&format!("{name}(")) {
                return Err(invalid(format!(
                    "prototype must declare `{name}(...)` and end with `;`"
                )));
            }
            if !n.body.contains(&format!("{name}(")) {
                return Err(invalid("body does not define the module".into()));
            }
        }
    }
    Ok(())
}

impl DependencyGraph {
    pub fn module(&self, name: &str) -> Option<&ProtocolModule> {
        self.modules.get(name)
    }

    /// Direct callees of `caller`, in declaration order, each once.
    pub fn callees(&self, caller: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in self.call_edges.iter().filter(|e| e.caller == caller) {
            for c in &e.callees {
                if !out.contains(&c.as_str()) {
                    out.push(c);
                }
            }
        }
        out
    }

    fn is_callee(&self, name: &str) -> bool {
        self.call_edges
            .iter()
            .any(|e| e.callees.iter().any(|c| c == name))
    }

    fn call_adjacency(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in &self.call_edges {
            for c in &e.callees {
                adj.entry(&e.caller).or_default().insert(c);
            }
        }
        adj
    }

    fn pipe_adjacency(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for p in &self.pipes {
            adj.entry(&p.source).or_default().insert(&p.target);
        }
        adj
    }

    fn check_cycles(&self) -> Result<(), GraphError> {
        if let Some(path) = find_cycle(&self.call_adjacency()) {
            return Err(GraphError::Cycle {
                relation: "call",
                path,
            });
        }
        if let Some(path) = find_cycle(&self.pipe_adjacency()) {
            return Err(GraphError::Cycle {
                relation: "pipe",
                path,
            });
        }
        // Mixed cycles, in "depends on" direction: caller -> callee, target -> source.
        let mut dep = self.call_adjacency();
        for p in &self.pipes {
            dep.entry(&p.target).or_default().insert(&p.source);
        }
        if let Some(path) = find_cycle(&dep) {
            return Err(GraphError::Cycle {
                relation: "dependency",
                path,
            });
        }
        Ok(())
    }

    /// Kahn's algorithm: callees before callers, pipe sources before
    /// targets, ties broken by name.
    pub fn topo_order(&self) -> Result<Vec<String>, GraphError> {
        self.check_cycles()?;
        let mut indeg: BTreeMap<&str, usize> =
            self.modules.keys().map(|k| (k.as_str(), 0)).collect();
        let mut succ: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in &self.call_edges {
            for c in &e.callees {
                succ.entry(c.as_str())
                    .or_default()
                    .insert(e.caller.as_str());
            }
        }
        for p in &self.pipes {
            succ.entry(p.source.as_str())
                .or_default()
                .insert(p.target.as_str());
        }
        for targets in succ.values() {
            for t in targets {
                *indeg.get_mut(t).expect("edge endpoints are modules") += 1;
            }
        }
        let mut ready: BTreeSet<&str> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&k, _)| k)
            .collect();
        let mut out = Vec::with_capacity(self.modules.len());
        while let Some(n) = ready.pop_first() {
            out.push(n.to_string());
            for t in succ.get(n).into_iter().flatten() {
                let d = indeg.get_mut(t).expect("edge endpoints are modules");
                *d -= 1;
                if *d == 0 {
                    ready.insert(t);
                }
            }
        }
        debug_assert_eq!(out.len(), self.modules.len());
        Ok(out)
    }

    /// Every type used by any module argument, in module order.
    pub fn all_types(&self) -> Vec<&SemanticType> {
        self.modules.values().flat_map(|m| m.arg_types()).collect()
    }

    pub fn c_types(&self) -> CTypes {
        CTypes::for_types(self.all_types())
    }
}

/// Returns the first cycle found by depth-first search in name order, as a
/// closed path `a -> ... -> a`.
fn find_cycle(adj: &BTreeMap<&str, BTreeSet<&str>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn dfs<'a>(
        n: &'a str,
        adj: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        marks.insert(n, Mark::Active);
        stack.push(n);
        for &m in adj.get(n).into_iter().flatten() {
            match marks.get(m) {
                Some(Mark::Active) => {
                    let start = stack
                        .iter()
                        .position(|&s| s == m)
                        .expect("active node on stack");
                    let mut path: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    path.push(m.to_string());
                    return Some(path);
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(p) = dfs(m, adj, marks, stack) {
                        return Some(p);
                    }
                }
            }
        }
        stack.pop();
        marks.insert(n, Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for &n in adj.keys() {
        if !marks.contains_key(n) {
            if let Some(p) = dfs(n, adj, &mut marks, &mut Vec::new()) {
                return Some(p);
            }
        }
    }
    None
}

/// Doc comment and prototype of a module as shown to callers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalleeContext {
    pub name: String,
    pub doc: String,
    pub prototype: String,
}

/// A validity predicate applied before calling main.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub module: String,
    /// Main input index for each of the gate's inputs.
    pub binding: Vec<usize>,
}

/// Everything needed to prompt, assemble and harness one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub main: String,
    /// Function and native modules, dependencies first.
    pub assembly_order: Vec<String>,
    /// Gates in pipe order.
    pub gates: Vec<Gate>,
    /// Direct callee context for each function module.
    pub contexts: BTreeMap<String, Vec<CalleeContext>>,
    pub graph: DependencyGraph,
}

impl SynthesisPlan {
    pub fn main_module(&self) -> &FunctionModule {
        self.graph.modules[&self.main]
            .as_function()
            .expect("plan main is a function module")
    }

    pub fn module(&self, name: &str) -> Option<&ProtocolModule> {
        self.graph.modules.get(name)
    }

    /// Function modules whose bodies must be synthesized, in assembly order.
    pub fn function_modules(&self) -> Vec<&FunctionModule> {
        self.assembly_order
            .iter()
            .filter_map(|n| self.graph.modules[n].as_function())
            .collect()
    }

    pub fn regex_gates(&self) -> Vec<&RegexModule> {
        self.gates
            .iter()
            .filter_map(|g| match &self.graph.modules[&g.module] {
                ProtocolModule::Regex(r) => Some(r),
                _ => None,
            })
            .collect()
    }

    pub fn c_types(&self) -> CTypes {
        self.graph.c_types()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Resolves main and the build order. Without an explicit main, main is
/// the only function module that is neither a callee nor a pipe source.
pub fn synthesize_plan(
    g: &DependencyGraph,
    main: Option<&str>,
) -> Result<SynthesisPlan, GraphError> {
    let main = match main {
        Some(m) => {
            let module = g
                .module(m)
                .ok_or_else(|| GraphError::UnknownModule(m.to_string()))?;
            if module.as_function().is_none() {
                return Err(GraphError::MainNotFunction(m.to_string()));
            }
            m.to_string()
        }
        None => {
            let candidates: Vec<&str> = g
                .modules
                .values()
                .filter(|m| m.as_function().is_some())
                .map(|m| m.name())
                .filter(|n| !g.is_callee(n) && !g.pipes.iter().any(|p| p.source == *n))
                .collect();
            match candidates.as_slice() {
                [one] => one.to_string(),
                [] => return Err(GraphError::AmbiguousMain("no candidate module".into())),
                many => {
                    return Err(GraphError::AmbiguousMain(format!(
                        "candidates {}",
                        many.join(", ")
                    )))
                }
            }
        }
    };
    for p in &g.pipes {
        if p.target != main {
            return Err(GraphError::PipeNotIntoMain {
                src: p.source.clone(),
                dst: p.target.clone(),
                main,
            });
        }
    }
    let order = g.topo_order()?;
    let assembly_order: Vec<String> = order
        .into_iter()
        .filter(|n| !matches!(g.modules[n], ProtocolModule::Regex(_)))
        .collect();
    let gates = g
        .pipes
        .iter()
        .map(|p| Gate {
            module: p.source.clone(),
            binding: p.binding.clone(),
        })
        .collect();
    let ctypes = g.c_types();
    let contexts = g
        .modules
        .values()
        .filter_map(ProtocolModule::as_function)
        .map(|f| {
            let ctx = g
                .callees(&f.name)
                .into_iter()
                .map(|c| callee_context(&g.modules[c], &ctypes))
                .collect();
            (f.name.clone(), ctx)
        })
        .collect();
    Ok(SynthesisPlan {
        main,
        assembly_order,
        gates,
        contexts,
        graph: g.clone(),
    })
}

/// Width at which description text wraps in doc comments.
pub const DOC_WIDTH: usize = 100;

/// The doc comment block of a function module.
pub fn doc_comment(f: &FunctionModule) -> String {
    let mut s = String::new();
    let opts = textwrap::Options::new(DOC_WIDTH)
        .initial_indent("// ")
        .subsequent_indent("// ");
    for line in textwrap::wrap(f.description.trim(), opts) {
        s.push_str(line.trim_end());
        s.push('\n');
    }
    s.push_str("//\n// Parameters:\n");
    for a in f.inputs() {
        s.push_str(&format!("//     {}: {}\n", a.name, a.description.trim()));
    }
    s.push_str(&format!(
        "// Return Value:\n//     {}\n",
        f.output().description.trim()
    ));
    s
}

/// `ret name(params)` without a terminator.
pub fn signature(f: &FunctionModule, ctypes: &CTypes) -> String {
    let ret = ctypes
        .return_type(&f.output().ty)
        .expect("validated output type is returnable");
    let params: Vec<String> = f
        .inputs()
        .iter()
        .map(|a| ctypes.param(&a.ty, &a.name))
        .collect();
    format!("{ret} {}({})", f.name, params.join(", "))
}

pub fn regex_signature(r: &RegexModule) -> String {
    format!("bool {}(char* {})", r.name, r.subject.name)
}

fn callee_context(m: &ProtocolModule, ctypes: &CTypes) -> CalleeContext {
    let (doc, prototype) = match m {
        ProtocolModule::Function(f) => (doc_comment(f), format!("{};", signature(f, ctypes))),
        ProtocolModule::Regex(r) => (
            format!(
                "// Returns true if {} matches the pattern `{}`.\n",
                r.subject.name, r.pattern
            ),
            format!("{};", regex_signature(r)),
        ),
        ProtocolModule::Native(n) => (
            n.description
                .as_deref()
                .map(|d| {
                    d.lines()
                        .map(|l| format!("// {}\n", l.trim()).replace("// \n", "//\n"))
                        .collect()
                })
                .unwrap_or_default(),
            n.prototype.trim().to_string(),
        ),
    };
    CalleeContext {
        name: m.name().to_string(),
        doc,
        prototype,
    }
}

/// Parsed regex of a regex module (validated at graph build).
pub fn regex_ast(r: &RegexModule) -> RegexAst {
    parse_pattern(&r.pattern).expect("validated pattern")
}
