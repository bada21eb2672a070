//! Declarative model manifests: a JSON tree mirroring the builder API.
//!
//! ```json
//! {
//!   "types": {
//!     "RecordType": {"enum": ["A", "DNAME"]},
//!     "RR": {"struct": [{"name": "rtyp", "type": "RecordType"},
//!                       {"name": "name", "type": {"string": 5}}]}
//!   },
//!   "modules": [
//!     {"kind": "regex", "name": "valid_query", "pattern": "[a-z]*",
//!      "subject": {"name": "query", "type": {"string": 5}, "description": "Query."}},
//!     {"kind": "function", "name": "applies", "description": "...", "args": [...]}
//!   ],
//!   "pipes": [["valid_query", "applies"]],
//!   "call_edges": [{"caller": "applies", "callees": ["helper"]}],
//!   "main": "applies"
//! }
//! ```
//!
//! Type references are declared names, `bool`, `char`, `uintN`,
//! `{"string": N}` or `{"array": T, "length": N}`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::graph::{
    build_graph, synthesize_plan, ArgSpec, DependencyGraph, FunctionModule, GraphError,
    NativeModule, ProtocolModule, RegexModule, SynthesisPlan,
};
use crate::harness::HarnessOptions;
use crate::llm::{CompletionBackend, GenerationConfig};
use crate::symbex::engine::{Engine, EngineConfig};
use crate::types::{validate_types, Field, SemanticType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TypeRef {
    Name(String),
    Text { string: usize },
    Array { array: Box<TypeRef>, length: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: TypeRef,
}

/// A named type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TypeDecl {
    Enum(Vec<String>),
    Struct(Vec<FieldDecl>),
    Alias(TypeRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: TypeRef,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModuleDecl {
    Function {
        name: String,
        description: String,
        args: Vec<ArgDecl>,
    },
    Regex {
        name: String,
        pattern: String,
        subject: ArgDecl,
    },
    Native {
        name: String,
        prototype: String,
        /// Inline definition; exclusive with `body_file`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        body: Option<String>,
        /// Definition file, relative to the manifest.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        body_file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEdgeDecl {
    pub caller: String,
    pub callees: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub types: IndexMap<String, TypeDecl>,
    pub modules: Vec<ModuleDecl>,
    #[serde(default)]
    pub pipes: Vec<(String, String)>,
    #[serde(default)]
    pub call_edges: Vec<CallEdgeDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main: Option<String>,
    #[serde(default)]
    pub generation: GenerationConfig,
    /// Relative stub directories resolve against the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<CompletionBackend>,
    #[serde(default)]
    pub harness: HarnessOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default)]
    pub engine_config: EngineConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest syntax: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid manifest:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

struct Resolver<'a> {
    decls: &'a IndexMap<String, TypeDecl>,
    stack: Vec<String>,
    errors: Vec<String>,
}

fn builtin(name: &str) -> Option<SemanticType> {
    match name {
        "bool" => Some(SemanticType::Boolean),
        "char" => Some(SemanticType::Character),
        _ => {
            let bits: u32 = name.strip_prefix("uint")?.parse().ok()?;
            Some(SemanticType::uint(bits))
        }
    }
}

impl Resolver<'_> {
    fn resolve(&mut self, t: &TypeRef, at: &str) -> SemanticType {
        match t {
            TypeRef::Text { string } => SemanticType::text(*string),
            TypeRef::Array { array, length } => {
                SemanticType::array(self.resolve(array, at), *length)
            }
            TypeRef::Name(n) => {
                if let Some(d) = self.decls.get(n) {
                    if self.stack.contains(n) {
                        self.errors.push(format!("{at}: type `{n}` is recursive"));
                        return SemanticType::Boolean;
                    }
                    self.stack.push(n.clone());
                    let ty = self.declared(n, d);
                    self.stack.pop();
                    ty
                } else if let Some(b) = builtin(n) {
                    b
                } else {
                    self.errors.push(format!("{at}: unknown type `{n}`"));
                    SemanticType::Boolean
                }
            }
        }
    }

    fn declared(&mut self, name: &str, d: &TypeDecl) -> SemanticType {
        let at = format!("type `{name}`");
        match d {
            TypeDecl::Enum(vs) => SemanticType::enumeration(name, vs.iter().cloned()),
            TypeDecl::Struct(fs) => SemanticType::Composite {
                name: name.to_string(),
                fields: fs
                    .iter()
                    .map(|f| Field {
                        name: f.name.clone(),
                        ty: self.resolve(&f.ty, &format!("{at} field `{}`", f.name)),
                    })
                    .collect(),
            },
            TypeDecl::Alias(inner) => SemanticType::alias(name, self.resolve(inner, &at)),
        }
    }

    fn arg(&mut self, a: &ArgDecl, module: &str) -> ArgSpec {
        let ty = self.resolve(&a.ty, &format!("module `{module}` arg `{}`", a.name));
        ArgSpec::new(a.name.clone(), ty, a.description.clone())
    }
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest, ManifestError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a manifest and resolves its relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Manifest, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut m = Manifest::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_paths(base)?;
        Ok(m)
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<(), ManifestError> {
        if let Some(CompletionBackend::Stub { dir }) = &mut self.backend {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        if let Some(Engine::Replay { dir }) = &mut self.engine {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        for m in &mut self.modules {
            if let ModuleDecl::Native {
                body,
                body_file: Some(f),
                ..
            } = m
            {
                let p = base.join(&*f);
                let text = std::fs::read_to_string(&p).map_err(|source| ManifestError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                *body = Some(text);
            }
        }
        Ok(())
    }

    /// Resolves types and builds the validated dependency graph.
    pub fn graph(&self) -> Result<DependencyGraph, ManifestError> {
        let mut r = Resolver {
            decls: &self.types,
            stack: Vec::new(),
            errors: Vec::new(),
        };
        let mut declared = Vec::new();
        for name in self.types.keys() {
            if builtin(name).is_some() {
                r.errors
                    .push(format!("type `{name}` shadows a built-in type"));
            }
            // Unused declarations are checked too.
            declared.push(r.resolve(&TypeRef::Name(name.clone()), &format!("type `{name}`")));
        }
        let mut modules = Vec::with_capacity(self.modules.len());
        for m in &self.modules {
            modules.push(match m {
                ModuleDecl::Function {
                    name,
                    description,
                    args,
                } => ProtocolModule::Function(FunctionModule::new(
                    name.clone(),
                    description.clone(),
                    args.iter().map(|a| r.arg(a, name)).collect(),
                )),
                ModuleDecl::Regex {
                    name,
                    pattern,
                    subject,
                } => ProtocolModule::Regex(RegexModule {
                    name: name.clone(),
                    pattern: pattern.clone(),
                    subject: r.arg(subject, name),
                }),
                ModuleDecl::Native {
                    name,
                    prototype,
                    body,
                    body_file,
                    description,
                } => {
                    let body = match (body, body_file) {
                        (Some(b), _) => b.clone(),
                        (None, Some(f)) => {
                            r.errors.push(format!(
                                "module `{name}`: body_file {} not loaded",
                                f.display()
                            ));
                            String::new()
                        }
                        (None, None) => {
                            r.errors
                                .push(format!("module `{name}`: native module needs a body"));
                            String::new()
                        }
                    };
                    ProtocolModule::Native(NativeModule {
                        name: name.clone(),
                        prototype: prototype.clone(),
                        body,
                        description: description.clone(),
                    })
                }
            });
        }
        let mut errors = r.errors;
        errors.extend(validate_types(&declared).iter().map(|v| v.to_string()));
        errors.dedup();
        if !errors.is_empty() {
            return Err(ManifestError::Invalid(errors));
        }
        let graph = build_graph(
            modules,
            self.pipes.clone(),
            self.call_edges
                .iter()
                .map(|e| (e.caller.clone(), e.callees.clone()))
                .collect(),
        )
        .map_err(|e| match e {
            GraphError::InvalidTypes(vs) => {
                ManifestError::Invalid(vs.iter().map(|v| v.to_string()).collect())
            }
            e => ManifestError::Graph(e),
        })?;
        Ok(graph)
    }

    pub fn plan(&self) -> Result<SynthesisPlan, ManifestError> {
        Ok(synthesize_plan(&self.graph()?, self.main.as_deref())?)
    }

    /// Manifest describing an already built graph. Named types become
    /// declarations; everything else is written inline.
    pub fn from_graph(g: &DependencyGraph, main: Option<&str>) -> Result<Manifest, ManifestError> {
        let mut types = IndexMap::new();
        let mut errors = Vec::new();
        let arg = |a: &ArgSpec,
                   types: &mut IndexMap<String, TypeDecl>,
                   errors: &mut Vec<String>| ArgDecl {
            name: a.name.clone(),
            ty: type_ref(&a.ty, types, errors),
            description: a.description.clone(),
        };
        let modules = g
            .modules
            .values()
            .map(|m| match m {
                ProtocolModule::Function(f) => ModuleDecl::Function {
                    name: f.name.clone(),
                    description: f.description.clone(),
                    args: f
                        .args
                        .iter()
                        .map(|a| arg(a, &mut types, &mut errors))
                        .collect(),
                },
                ProtocolModule::Regex(r) => ModuleDecl::Regex {
                    name: r.name.clone(),
                    pattern: r.pattern.clone(),
                    subject: arg(&r.subject, &mut types, &mut errors),
                },
                ProtocolModule::Native(n) => ModuleDecl::Native {
                    name: n.name.clone(),
                    prototype: n.prototype.clone(),
                    body: Some(n.body.clone()),
                    body_file: None,
                    description: n.description.clone(),
                },
            })
            .collect();
        if !errors.is_empty() {
            return Err(ManifestError::Invalid(errors));
        }
        let mut seen = BTreeSet::new();
        let pipes = g
            .pipes
            .iter()
            .filter(|p| seen.insert((p.source.clone(), p.target.clone())))
            .map(|p| (p.source.clone(), p.target.clone()))
            .collect();
        Ok(Manifest {
            types,
            modules,
            pipes,
            call_edges: g
                .call_edges
                .iter()
                .map(|e| CallEdgeDecl {
                    caller: e.caller.clone(),
                    callees: e.callees.clone(),
                })
                .collect(),
            main: main.map(str::to_string),
            generation: GenerationConfig::default(),
            backend: None,
            harness: HarnessOptions::default(),
            engine: None,
            engine_config: EngineConfig::default(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

fn declare(
    name: &str,
    d: TypeDecl,
    types: &mut IndexMap<String, TypeDecl>,
    errors: &mut Vec<String>,
) -> TypeRef {
    match types.get(name) {
        Some(prev) if *prev != d => errors.push(format!("type name `{name}` has two definitions")),
        Some(_) => {}
        None => {
            types.insert(name.to_string(), d);
        }
    }
    TypeRef::Name(name.to_string())
}

fn type_ref(
    t: &SemanticType,
    types: &mut IndexMap<String, TypeDecl>,
    errors: &mut Vec<String>,
) -> TypeRef {
    match t {
        SemanticType::Boolean => TypeRef::Name("bool".into()),
        SemanticType::Character => TypeRef::Name("char".into()),
        SemanticType::UInt { bits } => TypeRef::Name(format!("uint{bits}")),
        SemanticType::Text { max_len } => TypeRef::Text { string: *max_len },
        SemanticType::ArrayOf { element, length } => TypeRef::Array {
            array: Box::new(type_ref(element, types, errors)),
            length: *length,
        },
        SemanticType::Enumeration { name, variants } => {
            declare(name, TypeDecl::Enum(variants.clone()), types, errors)
        }
        SemanticType::Composite { name, fields } => {
            let fs = fields
                .iter()
                .map(|f| FieldDecl {
                    name: f.name.clone(),
                    ty: type_ref(&f.ty, types, errors),
                })
                .collect();
            declare(name, TypeDecl::Struct(fs), types, errors)
        }
        SemanticType::Alias { name, inner } => {
            let inner = type_ref(inner, types, errors);
            declare(name, TypeDecl::Alias(inner), types, errors)
        }
    }
}
