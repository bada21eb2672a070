//! Semantic type IR for model inputs and outputs.
//!
//! Types are rendered to C declarations for prompts and programs, and
//! flattened into base symbolic slots for the harness and for test
//! reconstruction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A protocol-level data type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    Boolean,
    Character,
    /// Unsigned integer restricted to `bits` bits (1..=64).
    UInt {
        bits: u32,
    },
    /// Character string of at most `max_len` characters, excluding the terminator.
    Text {
        max_len: usize,
    },
    Enumeration {
        name: String,
        variants: Vec<String>,
    },
    ArrayOf {
        element: Box<SemanticType>,
        length: usize,
    },
    Composite {
        name: String,
        fields: Vec<Field>,
    },
    Alias {
        name: String,
        inner: Box<SemanticType>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: SemanticType,
}

impl SemanticType {
    pub fn boolean() -> Self {
        SemanticType::Boolean
    }

    pub fn character() -> Self {
        SemanticType::Character
    }

    pub fn uint(bits: u32) -> Self {
        SemanticType::UInt { bits }
    }

    pub fn text(max_len: usize) -> Self {
        SemanticType::Text { max_len }
    }

    pub fn enumeration<S: Into<String>>(
        name: impl Into<String>,
        variants: impl IntoIterator<Item = S>,
    ) -> Self {
        SemanticType::Enumeration {
            name: name.into(),
            variants: variants.into_iter().map(Into::into).collect(),
        }
    }

    pub fn array(element: SemanticType, length: usize) -> Self {
        SemanticType::ArrayOf {
            element: Box::new(element),
            length,
        }
    }

    pub fn composite<S: Into<String>>(
        name: impl Into<String>,
        fields: impl IntoIterator<Item = (S, SemanticType)>,
    ) -> Self {
        SemanticType::Composite {
            name: name.into(),
            fields: fields
                .into_iter()
                .map(|(name, ty)| Field {
                    name: name.into(),
                    ty,
                })
                .collect(),
        }
    }

    pub fn alias(name: impl Into<String>, inner: SemanticType) -> Self {
        SemanticType::Alias {
            name: name.into(),
            inner: Box::new(inner),
        }
    }

    /// Name of a named type (enumeration, composite, alias).
    pub fn type_name(&self) -> Option<&str> {
        match self {
            SemanticType::Enumeration { name, .. }
            | SemanticType::Composite { name, .. }
            | SemanticType::Alias { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Strips aliases.
    pub fn resolved(&self) -> &SemanticType {
        match self {
            SemanticType::Alias { inner, .. } => inner.resolved(),
            other => other,
        }
    }

    /// Unpadded storage size in bytes: the total width of the base slots.
    pub fn storage_size(&self) -> usize {
        match self {
            SemanticType::Boolean | SemanticType::Character => 1,
            SemanticType::UInt { bits } => uint_width(*bits),
            SemanticType::Text { max_len } => max_len + 1,
            SemanticType::Enumeration { .. } => ENUM_WIDTH,
            SemanticType::ArrayOf { element, length } => element.storage_size() * length,
            SemanticType::Composite { fields, .. } => {
                fields.iter().map(|f| f.ty.storage_size()).sum()
            }
            SemanticType::Alias { inner, .. } => inner.storage_size(),
        }
    }

    /// Every named type reachable from this one, in post-order
    /// (dependencies before dependents), including `self`.
    pub fn named_types(&self) -> Vec<&SemanticType> {
        let mut out = Vec::new();
        collect_named(self, &mut out);
        out
    }
}

fn collect_named<'a>(t: &'a SemanticType, out: &mut Vec<&'a SemanticType>) {
    match t {
        SemanticType::ArrayOf { element, .. } => collect_named(element, out),
        SemanticType::Composite { fields, .. } => {
            for f in fields {
                collect_named(&f.ty, out);
            }
            out.push(t);
        }
        SemanticType::Alias { inner, .. } => {
            collect_named(inner, out);
            out.push(t);
        }
        SemanticType::Enumeration { .. } => out.push(t),
        _ => {}
    }
}

/// Byte width used for enumeration storage (C `enum` on the usual targets).
pub const ENUM_WIDTH: usize = 4;

/// Smallest standard unsigned width covering `bits`.
pub fn uint_width(bits: u32) -> usize {
    match bits {
        0..=8 => 1,
        9..=16 => 2,
        17..=32 => 4,
        _ => 8,
    }
}

fn uint_c_type(bits: u32) -> &'static str {
    match uint_width(bits) {
        1 => "uint8_t",
        2 => "uint16_t",
        4 => "uint32_t",
        _ => "uint64_t",
    }
}

const C_RESERVED: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Bool",
    "_Complex",
    "_Generic",
    "_Imaginary",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
    "bool",
    "true",
    "false",
    "NULL",
];

/// True for `[A-Za-z_][A-Za-z0-9_]*` identifiers that are not C keywords.
pub fn is_valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !C_RESERVED.contains(&s)
}

fn is_text_alias_name(s: &str) -> bool {
    s.strip_prefix("String")
        .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
}

/// One invariant violation found by [`validate_type`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Location inside the type, e.g. `Record.name`.
    pub at: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.at.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.at, self.message)
        }
    }
}

/// Checks every structural invariant of a single type and returns all violations.
pub fn validate_type(t: &SemanticType) -> Vec<Violation> {
    validate_types([t])
}

/// Validates a set of types that must coexist in one model: besides the
/// per-type rules, named types must be globally unique and enumerators
/// must not collide (C puts them in one namespace).
pub fn validate_types<'a>(types: impl IntoIterator<Item = &'a SemanticType>) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut named: BTreeMap<&str, &SemanticType> = BTreeMap::new();
    let mut enumerators: BTreeMap<&str, &str> = BTreeMap::new();
    for t in types {
        check(t, "", &mut v);
        for n in t.named_types() {
            let name = n.type_name().unwrap_or_default();
            match named.get(name) {
                Some(prev) if *prev != n => v.push(Violation {
                    at: name.to_string(),
                    message: "named type defined twice with different definitions".into(),
                }),
                Some(_) => {}
                None => {
                    named.insert(name, n);
                    if let SemanticType::Enumeration { name, variants } = n {
                        for var in variants {
                            if let Some(owner) = enumerators.insert(var, name) {
                                if owner != name {
                                    v.push(Violation {
                                        at: name.clone(),
                                        message: format!(
                                            "enumerator `{var}` also declared by `{owner}`"
                                        ),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for (name, owner) in &enumerators {
        if named.contains_key(name) {
            v.push(Violation {
                at: (*owner).to_string(),
                message: format!("enumerator `{name}` collides with a type name"),
            });
        }
    }
    v.dedup();
    v
}

fn check(t: &SemanticType, at: &str, v: &mut Vec<Violation>) {
    let mut push = |at: &str, message: String| {
        v.push(Violation {
            at: at.to_string(),
            message,
        })
    };
    match t {
        SemanticType::Boolean | SemanticType::Character => {}
        SemanticType::UInt { bits } => {
            if !(1..=64).contains(bits) {
                push(at, format!("integer width {bits} outside 1..=64"));
            }
        }
        SemanticType::Text { max_len } => {
            if *max_len == 0 {
                push(at, "text max_len must be at least 1".into());
            }
        }
        SemanticType::Enumeration { name, variants } => {
            check_type_name(name, at, &mut push);
            if variants.is_empty() {
                push(at, "empty variant list".into());
            }
            let mut seen = BTreeSet::new();
            for var in variants {
                if !is_valid_identifier(var) {
                    push(at, format!("invalid enumerator `{var}`"));
                }
                if !seen.insert(var) {
                    push(at, format!("duplicate variant `{var}`"));
                }
            }
        }
        SemanticType::ArrayOf { element, length } => {
            if *length == 0 {
                push(at, "array length must be at least 1".into());
            }
            check(element, &format!("{at}[]"), v);
        }
        SemanticType::Composite { name, fields } => {
            check_type_name(name, at, &mut push);
            if fields.is_empty() {
                push(at, "composite has no fields".into());
            }
            let mut seen = BTreeSet::new();
            for f in fields {
                let here = join(at, name, &f.name);
                if !is_valid_identifier(&f.name) {
                    push(&here, format!("invalid field name `{}`", f.name));
                }
                if !seen.insert(&f.name) {
                    push(&here, "duplicate field name".into());
                }
            }
            for f in fields {
                check(&f.ty, &join(at, name, &f.name), v);
            }
        }
        SemanticType::Alias { name, inner } => {
            check_type_name(name, at, &mut push);
            check(inner, &join(at, name, ""), v);
        }
    }
}

fn join(at: &str, name: &str, field: &str) -> String {
    let base = if at.is_empty() { name } else { at };
    if field.is_empty() {
        base.to_string()
    } else {
        format!("{base}.{field}")
    }
}

fn check_type_name(name: &str, at: &str, push: &mut impl FnMut(&str, String)) {
    if !is_valid_identifier(name) {
        push(at, format!("invalid type name `{name}`"));
    } else if is_text_alias_name(name) {
        push(
            at,
            format!("type name `{name}` is reserved for text aliases"),
        );
    }
}

/// Error raised when rendering an invalid type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TypeError {
    #[error("invalid type: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("{0} cannot be used as a return type")]
    NotReturnable(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One `typedef` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Typedef {
    pub name: String,
    pub text: String,
}

/// Naming context for C rendering, derived from every type of one model.
///
/// Text nested inside named types or arrays needs a named buffer alias.
/// With a single such size the alias is `String`; with several, each is
/// `String{N}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CTypes {
    text_aliases: BTreeMap<usize, String>,
}

impl CTypes {
    pub fn for_types<'a>(roots: impl IntoIterator<Item = &'a SemanticType>) -> Self {
        let mut sizes = BTreeSet::new();
        for t in roots {
            if !matches!(t, SemanticType::Text { .. }) {
                nested_text_sizes(t, &mut sizes);
            }
        }
        let single = sizes.len() == 1;
        let text_aliases = sizes
            .into_iter()
            .map(|n| {
                let name = if single {
                    "String".to_string()
                } else {
                    format!("String{n}")
                };
                (n, name)
            })
            .collect();
        CTypes { text_aliases }
    }

    fn text_alias(&self, max_len: usize) -> String {
        self.text_aliases
            .get(&max_len)
            .cloned()
            .unwrap_or_else(|| format!("String{max_len}"))
    }

    /// Type spelling plus array suffix for declaring `ident` as a struct
    /// field or local: `bool flags[3]`, `String name`.
    pub fn declare(&self, t: &SemanticType, ident: &str) -> String {
        let (base, suffix) = self.split(t);
        format!("{base} {ident}{suffix}")
    }

    /// Declaration of a function parameter; top-level text becomes `char*`.
    pub fn param(&self, t: &SemanticType, ident: &str) -> String {
        match t {
            SemanticType::Text { .. } => format!("char* {ident}"),
            _ => self.declare(t, ident),
        }
    }

    /// Return type spelling; arrays cannot be returned.
    pub fn return_type(&self, t: &SemanticType) -> Result<String, TypeError> {
        match t {
            SemanticType::Text { .. } => Ok("char*".into()),
            SemanticType::ArrayOf { .. } => Err(TypeError::NotReturnable("an array".into())),
            _ => Ok(self.split(t).0),
        }
    }

    fn split(&self, t: &SemanticType) -> (String, String) {
        match t {
            SemanticType::Boolean => ("bool".into(), String::new()),
            SemanticType::Character => ("char".into(), String::new()),
            SemanticType::UInt { bits } => (uint_c_type(*bits).into(), String::new()),
            SemanticType::Text { max_len } => (self.text_alias(*max_len), String::new()),
            SemanticType::Enumeration { name, .. }
            | SemanticType::Composite { name, .. }
            | SemanticType::Alias { name, .. } => (name.clone(), String::new()),
            SemanticType::ArrayOf { element, length } => {
                let (base, suffix) = self.split(element);
                (base, format!("[{length}]{suffix}"))
            }
        }
    }

    /// Typedef lines needed by `roots`, dependencies first, each name once.
    pub fn typedefs<'a>(&self, roots: impl IntoIterator<Item = &'a SemanticType>) -> Vec<Typedef> {
        let mut out: Vec<Typedef> = Vec::new();
        let mut seen = BTreeSet::new();
        for root in roots {
            self.emit_typedefs(root, true, &mut seen, &mut out);
        }
        out
    }

    fn emit_typedefs(
        &self,
        t: &SemanticType,
        top: bool,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<Typedef>,
    ) {
        fn add(seen: &mut BTreeSet<String>, out: &mut Vec<Typedef>, name: String, text: String) {
            if seen.insert(name.clone()) {
                out.push(Typedef { name, text });
            }
        }
        match t {
            SemanticType::Text { max_len } if !top => {
                let alias = self.text_alias(*max_len);
                add(
                    seen,
                    out,
                    alias.clone(),
                    format!("typedef char {alias}[{}];", max_len + 1),
                );
            }
            SemanticType::Enumeration { name, variants } => {
                add(
                    seen,
                    out,
                    name.clone(),
                    format!("typedef enum {{ {} }} {name};", variants.join(", ")),
                );
            }
            SemanticType::ArrayOf { element, .. } => self.emit_typedefs(element, false, seen, out),
            SemanticType::Composite { name, fields } => {
                for f in fields {
                    self.emit_typedefs(&f.ty, false, seen, out);
                }
                let body: Vec<String> = fields
                    .iter()
                    .map(|f| format!("{};", self.declare(&f.ty, &f.name)))
                    .collect();
                add(
                    seen,
                    out,
                    name.clone(),
                    format!("typedef struct {{ {} }} {name};", body.join(" ")),
                );
            }
            SemanticType::Alias { name, inner } => {
                self.emit_typedefs(inner, false, seen, out);
                add(
                    seen,
                    out,
                    name.clone(),
                    format!("typedef {};", self.declare(inner, name)),
                );
            }
            _ => {}
        }
    }
}

fn nested_text_sizes(t: &SemanticType, out: &mut BTreeSet<usize>) {
    match t {
        SemanticType::Text { max_len } => {
            out.insert(*max_len);
        }
        SemanticType::ArrayOf { element, .. } => nested_text_sizes(element, out),
        SemanticType::Composite { fields, .. } => {
            for f in fields {
                nested_text_sizes(&f.ty, out);
            }
        }
        SemanticType::Alias { inner, .. } => nested_text_sizes(inner, out),
        _ => {}
    }
}

/// A rendered type: its C spelling and the typedefs it needs, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CDecl {
    pub spelling: String,
    pub typedefs: Vec<Typedef>,
}

/// Renders one valid type in isolation.
pub fn render_c_decl(t: &SemanticType) -> Result<CDecl, TypeError> {
    let violations = validate_type(t);
    if !violations.is_empty() {
        return Err(TypeError::Invalid(violations));
    }
    let ctx = CTypes::for_types([t]);
    let (base, suffix) = ctx.split(t);
    Ok(CDecl {
        spelling: format!("{base}{suffix}"),
        typedefs: ctx.typedefs([t]),
    })
}

/// Segment of a path from a harness argument down to a base value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSeg {
    Arg(usize),
    Field(String),
    Index(usize),
}

/// Renders a path as `1.record_type` or `0[2]`.
pub fn path_to_string(path: &[PathSeg]) -> String {
    let mut s = String::new();
    for seg in path {
        match seg {
            PathSeg::Arg(i) => s.push_str(&i.to_string()),
            PathSeg::Field(f) => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(f);
            }
            PathSeg::Index(i) => s.push_str(&format!("[{i}]")),
        }
    }
    s
}

/// Storage class of one symbolic slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Boolean,
    Character,
    UnsignedInteger { bits: u32 },
    Enumeration { name: String, variants: Vec<String> },
    CharacterBuffer { length: usize },
}

impl BaseKind {
    pub fn byte_width(&self) -> usize {
        match self {
            BaseKind::Boolean | BaseKind::Character => 1,
            BaseKind::UnsignedInteger { bits } => uint_width(*bits),
            BaseKind::Enumeration { .. } => ENUM_WIDTH,
            BaseKind::CharacterBuffer { length } => length + 1,
        }
    }

    /// C type used to declare the slot's storage in the harness.
    pub fn storage_c_type(&self) -> &'static str {
        match self {
            BaseKind::Boolean => "uint8_t",
            BaseKind::Character | BaseKind::CharacterBuffer { .. } => "char",
            BaseKind::UnsignedInteger { bits } => uint_c_type(*bits),
            BaseKind::Enumeration { .. } => "uint32_t",
        }
    }
}

/// One base symbolic variable of the harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseSlot {
    pub var_name: String,
    pub path: Vec<PathSeg>,
    pub kind: BaseKind,
    pub byte_width: usize,
}

/// Assigns `x{i}` names across several arguments in one left-to-right pass.
#[derive(Debug, Default)]
pub struct Flattener {
    next: usize,
}

impl Flattener {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index the next slot will receive.
    pub fn next_index(&self) -> usize {
        self.next
    }

    /// Flattens a value rooted at `root` (normally `[PathSeg::Arg(i)]`).
    pub fn flatten_at(&mut self, root: Vec<PathSeg>, t: &SemanticType) -> Vec<BaseSlot> {
        let mut out = Vec::new();
        self.walk(root, t, &mut out);
        out
    }

    pub fn flatten(&mut self, arg_index: usize, t: &SemanticType) -> Vec<BaseSlot> {
        self.flatten_at(vec![PathSeg::Arg(arg_index)], t)
    }

    fn walk(&mut self, path: Vec<PathSeg>, t: &SemanticType, out: &mut Vec<BaseSlot>) {
        let kind = match t {
            SemanticType::Boolean => BaseKind::Boolean,
            SemanticType::Character => BaseKind::Character,
            SemanticType::UInt { bits } => BaseKind::UnsignedInteger { bits: *bits },
            SemanticType::Text { max_len } => BaseKind::CharacterBuffer { length: *max_len },
            SemanticType::Enumeration { name, variants } => BaseKind::Enumeration {
                name: name.clone(),
                variants: variants.clone(),
            },
            SemanticType::Alias { inner, .. } => return self.walk(path, inner, out),
            SemanticType::ArrayOf { element, length } => {
                for i in 0..*length {
                    let mut p = path.clone();
                    p.push(PathSeg::Index(i));
                    self.walk(p, element, out);
                }
                return;
            }
            SemanticType::Composite { fields, .. } => {
                for f in fields {
                    let mut p = path.clone();
                    p.push(PathSeg::Field(f.name.clone()));
                    self.walk(p, &f.ty, out);
                }
                return;
            }
        };
        let var_name = format!("x{}", self.next);
        self.next += 1;
        out.push(BaseSlot {
            var_name,
            path,
            byte_width: kind.byte_width(),
            kind,
        });
    }
}

/// Flattens a single argument, numbering slots from `x0`.
pub fn flatten(arg_index: usize, t: &SemanticType) -> Vec<BaseSlot> {
    Flattener::new().flatten(arg_index, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record_type() -> SemanticType {
        SemanticType::enumeration(
            "RecordType",
            ["A", "AAAA", "NS", "TXT", "CNAME", "DNAME", "SOA"],
        )
    }

    fn record() -> SemanticType {
        SemanticType::composite(
            "Record",
            [
                ("record_type", record_type()),
                ("name", SemanticType::text(3)),
                ("rdata", SemanticType::text(3)),
            ],
        )
    }

    #[test]
    fn record_type_enum_is_valid() {
        assert!(validate_type(&record_type()).is_empty());
    }

    #[test]
    fn empty_enum_is_rejected() {
        let v = validate_type(&SemanticType::enumeration("E", Vec::<String>::new()));
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("empty variant list"));
    }

    #[test]
    fn duplicate_field_is_rejected() {
        let t = SemanticType::composite(
            "R",
            [
                ("name", SemanticType::text(3)),
                ("name", SemanticType::boolean()),
            ],
        );
        let v = validate_type(&t);
        assert!(v.iter().any(|v| v.message.contains("duplicate field name")));
    }

    #[test]
    fn reports_every_violation() {
        let t = SemanticType::composite(
            "int",
            [
                ("a", SemanticType::uint(65)),
                ("b", SemanticType::text(0)),
                ("c", SemanticType::enumeration("E", ["X", "X"])),
            ],
        );
        let v = validate_type(&t);
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn conflicting_named_types_are_rejected() {
        let a = SemanticType::enumeration("E", ["X"]);
        let b = SemanticType::enumeration("E", ["Y"]);
        assert!(!validate_types([&a, &b]).is_empty());
        let c = SemanticType::enumeration("F", ["X"]);
        assert!(validate_types([&a, &c])
            .iter()
            .any(|v| v.message.contains("enumerator `X`")));
        assert!(validate_types([&a, &a.clone()]).is_empty());
    }

    #[test]
    fn enum_renders_on_one_line() {
        let d = render_c_decl(&record_type()).unwrap();
        assert_eq!(d.spelling, "RecordType");
        assert_eq!(
            d.typedefs[0].text,
            "typedef enum { A, AAAA, NS, TXT, CNAME, DNAME, SOA } RecordType;"
        );
    }

    #[test]
    fn record_uses_single_text_alias() {
        let d = render_c_decl(&record()).unwrap();
        let texts: Vec<_> = d.typedefs.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(
            texts,
            [
                "typedef enum { A, AAAA, NS, TXT, CNAME, DNAME, SOA } RecordType;",
                "typedef char String[4];",
                "typedef struct { RecordType record_type; String name; String rdata; } Record;",
            ]
        );
    }

    #[test]
    fn multiple_text_sizes_get_sized_aliases() {
        let t = SemanticType::composite(
            "RR",
            [
                ("name", SemanticType::text(5)),
                ("rdat", SemanticType::text(3)),
            ],
        );
        let d = render_c_decl(&t).unwrap();
        assert_eq!(
            d.typedefs.last().unwrap().text,
            "typedef struct { String5 name; String3 rdat; } RR;"
        );
    }

    #[test]
    fn bare_text_parameter_is_char_pointer() {
        let ctx = CTypes::for_types([&SemanticType::text(5)]);
        assert_eq!(ctx.param(&SemanticType::text(5), "query"), "char* query");
        assert_eq!(flatten(0, &SemanticType::text(5))[0].byte_width, 6);
    }

    #[test]
    fn uint_and_array_spelling() {
        let t = SemanticType::composite(
            "Route",
            [
                ("prefix", SemanticType::uint(32)),
                ("prefixLength", SemanticType::uint(5)),
                ("flags", SemanticType::array(SemanticType::boolean(), 3)),
            ],
        );
        let d = render_c_decl(&t).unwrap();
        assert_eq!(
            d.typedefs[0].text,
            "typedef struct { uint32_t prefix; uint8_t prefixLength; bool flags[3]; } Route;"
        );
    }

    #[test]
    fn alias_renders_typedef_of_inner() {
        let t = SemanticType::alias("result", SemanticType::boolean());
        assert_eq!(
            render_c_decl(&t).unwrap().typedefs[0].text,
            "typedef bool result;"
        );
        let arr = SemanticType::alias("Flags", SemanticType::array(SemanticType::uint(8), 2));
        assert_eq!(
            render_c_decl(&arr).unwrap().typedefs[0].text,
            "typedef uint8_t Flags[2];"
        );
    }

    #[test]
    fn invalid_type_is_not_rendered() {
        assert!(render_c_decl(&SemanticType::enumeration("E", Vec::<String>::new())).is_err());
    }

    #[test]
    fn flatten_record_fieldwise() {
        let slots = flatten(1, &record());
        let paths: Vec<_> = slots.iter().map(|s| path_to_string(&s.path)).collect();
        assert_eq!(paths, ["1.record_type", "1.name", "1.rdata"]);
        assert!(matches!(slots[0].kind, BaseKind::Enumeration { .. }));
        assert_eq!(slots[1].kind, BaseKind::CharacterBuffer { length: 3 });
        assert_eq!(slots[2].byte_width, 4);
        let names: Vec<_> = slots.iter().map(|s| s.var_name.as_str()).collect();
        assert_eq!(names, ["x0", "x1", "x2"]);
    }

    #[test]
    fn flatten_boolean_base_case() {
        let slots = flatten(0, &SemanticType::boolean());
        assert_eq!(slots.len(), 1);
        assert_eq!(slots[0].byte_width, 1);
    }

    #[test]
    fn flattener_numbers_across_arguments() {
        let mut f = Flattener::new();
        let a = f.flatten(0, &SemanticType::text(5));
        let b = f.flatten(1, &record());
        assert_eq!(a[0].var_name, "x0");
        assert_eq!(b[0].var_name, "x1");
        assert_eq!(b[2].var_name, "x3");
    }

    #[test]
    fn reserved_words_are_not_identifiers() {
        assert!(!is_valid_identifier("struct"));
        assert!(!is_valid_identifier("9abc"));
        assert!(is_valid_identifier("_ok9"));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn leaf() -> impl Strategy<Value = SemanticType> {
            prop_oneof![
                Just(SemanticType::Boolean),
                Just(SemanticType::Character),
                (1u32..=64).prop_map(SemanticType::uint),
                (1usize..8).prop_map(SemanticType::text),
                (1usize..5)
                    .prop_map(|n| SemanticType::enumeration("E", (0..n).map(|i| format!("V{i}")))),
            ]
        }

        // Depth <= 4; composite and alias names are made unique afterwards.
        fn ty() -> impl Strategy<Value = SemanticType> {
            leaf().prop_recursive(3, 24, 4, |inner| {
                prop_oneof![
                    (inner.clone(), 1usize..4).prop_map(|(e, n)| SemanticType::array(e, n)),
                    prop::collection::vec(inner.clone(), 1..4).prop_map(|fs| {
                        SemanticType::composite(
                            "S",
                            fs.into_iter()
                                .enumerate()
                                .map(|(i, t)| (format!("f{i}"), t)),
                        )
                    }),
                    inner.prop_map(|t| SemanticType::alias("A", t)),
                ]
            })
        }

        fn uniquify(t: &mut SemanticType, n: &mut usize) {
            *n += 1;
            let id = *n;
            match t {
                SemanticType::Enumeration { name, variants } => {
                    *name = format!("E{id}");
                    for v in variants.iter_mut() {
                        *v = format!("E{id}_{v}");
                    }
                }
                SemanticType::Composite { name, fields } => {
                    *name = format!("S{id}");
                    for f in fields {
                        uniquify(&mut f.ty, n);
                    }
                }
                SemanticType::Alias { name, inner } => {
                    *name = format!("A{id}");
                    uniquify(inner, n);
                }
                SemanticType::ArrayOf { element, .. } => uniquify(element, n),
                _ => {}
            }
        }

        proptest! {
            #[test]
            fn slot_widths_sum_to_storage(mut t in ty()) {
                uniquify(&mut t, &mut 0);
                prop_assert!(validate_type(&t).is_empty());
                let slots = flatten(0, &t);
                let total: usize = slots.iter().map(|s| s.byte_width).sum();
                prop_assert_eq!(total, t.storage_size());
                for s in &slots {
                    prop_assert_eq!(s.byte_width, s.kind.byte_width());
                }
            }

            #[test]
            fn rendering_is_deterministic_and_ordered(mut t in ty()) {
                uniquify(&mut t, &mut 0);
                let a = render_c_decl(&t).unwrap();
                let b = render_c_decl(&t).unwrap();
                prop_assert_eq!(&a, &b);
                // No typedef mentions a typedef name defined later.
                for (i, td) in a.typedefs.iter().enumerate() {
                    for later in &a.typedefs[i + 1..] {
                        let mentions = td.text
                            .split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
                            .any(|w| w == later.name);
                        prop_assert!(!mentions, "{} used before definition", later.name);
                    }
                }
            }
        }
    }
}
