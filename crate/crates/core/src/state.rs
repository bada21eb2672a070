//! State-transition graphs of stateful models and driving implementations
//! into a required state.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ctext::{split_top_level, ItemKind};
use crate::diff::{AdapterError, Response};
use crate::graph::SynthesisPlan;
use crate::llm::{complete, CompletionBackend, GenerationConfig, LlmError};
use crate::prompt::{render_state_graph_prompt_with, PromptAssets, PromptError, PromptPair};
use crate::types::SemanticType;

pub const INITIAL: &str = "INITIAL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub input: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateGraph {
    /// In order of first mention.
    pub states: Vec<String>,
    /// In source order; at most one per (from, input).
    pub transitions: Vec<Transition>,
    pub initial: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no dictionary literal found")]
    NoLiteral,
    #[error("malformed entry at offset {at}: {message}")]
    Malformed { at: usize, message: String },
    #[error("unterminated string at offset {0}")]
    Unterminated(usize),
    #[error("unsupported string quoting at offset {0}")]
    Quoting(usize),
}

/// Brace-delimited region from the first `{` to its match, skipping
/// string contents.
fn outer_literal(text: &str) -> Option<&str> {
    let b = text.as_bytes();
    let start = text.find('{')?;
    let mut depth = 0;
    let mut i = start;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                let q = b[i];
                i += 1;
                while i < b.len() && b[i] != q {
                    i += if b[i] == b'\\' { 2 } else { 1 };
                }
            }
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

struct Lexer<'a> {
    s: &'a str,
    pos: usize,
}

impl Lexer<'_> {
    fn skip_ws(&mut self) {
        let b = self.s.as_bytes();
        while self.pos < b.len() {
            match b[self.pos] {
                c if c.is_ascii_whitespace() => self.pos += 1,
                b'#' => {
                    while self.pos < b.len() && b[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.as_bytes().get(self.pos).copied()
    }

    fn expect(&mut self, c: u8, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected {what}")))
        }
    }

    fn err(&self, message: &str) -> ParseError {
        ParseError::Malformed {
            at: self.pos,
            message: message.to_string(),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        let q = match self.peek() {
            Some(c @ (b'"' | b'\'')) => c,
            Some(b'r' | b'b' | b'f' | b'u') => return Err(ParseError::Quoting(start)),
            _ => return Err(self.err("expected a string")),
        };
        let b = self.s.as_bytes();
        if b[self.pos..].starts_with(&[q, q, q]) {
            return Err(ParseError::Quoting(self.pos));
        }
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(&c) = b.get(self.pos) else {
                return Err(ParseError::Unterminated(start));
            };
            match c {
                b'\n' => return Err(ParseError::Unterminated(start)),
                b'\\' => {
                    let e = *b.get(self.pos + 1).ok_or(ParseError::Unterminated(start))?;
                    out.push(match e {
                        b'n' => '\n',
                        b't' => '\t',
                        b'r' => '\r',
                        b'\\' | b'\'' | b'"' => e as char,
                        _ => return Err(ParseError::Quoting(self.pos)),
                    });
                    self.pos += 2;
                }
                c if c == q => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => {
                    let ch = self.s[self.pos..].chars().next().expect("in bounds");
                    out.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
    }
}

/// Reads a `{("S", "in"): "T", ...}` literal out of a completion. The
/// initial state is `INITIAL` when mentioned, else the first variant of
/// `state_enum`, else the first state mentioned.
pub fn parse_transition_dict(
    completion: &str,
    state_enum: Option<&[String]>,
) -> Result<StateGraph, ParseError> {
    let lit = outer_literal(completion).ok_or(ParseError::NoLiteral)?;
    let mut lx = Lexer { s: lit, pos: 0 };
    lx.expect(b'{', "`{`")?;
    let mut transitions: Vec<Transition> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    loop {
        if lx.peek() == Some(b'}') {
            break;
        }
        lx.expect(b'(', "`(`")?;
        let from = lx.string()?;
        lx.expect(b',', "`,`")?;
        let input = lx.string()?;
        if lx.peek() == Some(b',') {
            lx.pos += 1;
        }
        lx.expect(b')', "`)`")?;
        lx.expect(b':', "`:`")?;
        let to = lx.string()?;
        match index.get(&(from.clone(), input.clone())) {
            Some(&i) => transitions[i].to = to,
            None => {
                index.insert((from.clone(), input.clone()), transitions.len());
                transitions.push(Transition { from, input, to });
            }
        }
        match lx.peek() {
            Some(b',') => lx.pos += 1,
            Some(b'}') => break,
            _ => return Err(lx.err("expected `,` or `}`")),
        }
    }
    let mut states: Vec<String> = Vec::new();
    for t in &transitions {
        for s in [&t.from, &t.to] {
            if !states.contains(s) {
                states.push(s.clone());
            }
        }
    }
    let initial = if states.iter().any(|s| s == INITIAL) {
        INITIAL.to_string()
    } else if let Some(v) = state_enum.and_then(|vs| vs.first()) {
        v.clone()
    } else {
        states
            .first()
            .cloned()
            .unwrap_or_else(|| INITIAL.to_string())
    };
    if !states.contains(&initial) {
        states.insert(0, initial.clone());
    }
    Ok(StateGraph {
        states,
        transitions,
        initial,
    })
}

fn py_str(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl StateGraph {
    /// Python dictionary literal.
    pub fn render(&self) -> String {
        let mut s = String::from("{\n");
        for t in &self.transitions {
            let _ = writeln!(
                s,
                "    ({}, {}): {},",
                py_str(&t.from),
                py_str(&t.input),
                py_str(&t.to)
            );
        }
        s.push('}');
        s
    }

    pub fn next(&self, state: &str, input: &str) -> Option<&str> {
        self.transitions
            .iter()
            .find(|t| t.from == state && t.input == input)
            .map(|t| t.to.as_str())
    }

    /// Follows `inputs` from the initial state.
    pub fn replay(&self, inputs: &[String]) -> Option<&str> {
        let mut s = self.initial.as_str();
        for i in inputs {
            s = self.next(s, i)?;
        }
        Some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state `{0}` is unreachable from the initial state")]
    Unreachable(String),
}

/// Shortest input sequence from the initial state to `target`. Among
/// shortest ones, each step takes the transition listed first in the
/// dictionary, so the result follows the order the model wrote.
pub fn input_prefix(g: &StateGraph, target: &str) -> Result<Vec<String>, PrefixError> {
    if !g.states.iter().any(|s| s == target) {
        return Err(PrefixError::UnknownState(target.to_string()));
    }
    // Distance to target, by reverse BFS.
    let mut rev: HashMap<&str, Vec<&str>> = HashMap::new();
    for t in &g.transitions {
        rev.entry(t.to.as_str()).or_default().push(t.from.as_str());
    }
    let mut dist: HashMap<&str, usize> = HashMap::from([(target, 0)]);
    let mut q = VecDeque::from([target]);
    while let Some(v) = q.pop_front() {
        let d = dist[v];
        for &u in rev.get(v).into_iter().flatten() {
            if !dist.contains_key(u) {
                dist.insert(u, d + 1);
                q.push_back(u);
            }
        }
    }
    let Some(&total) = dist.get(g.initial.as_str()) else {
        return Err(PrefixError::Unreachable(target.to_string()));
    };
    let mut out = Vec::with_capacity(total);
    let mut cur = g.initial.as_str();
    for remaining in (0..total).rev() {
        let step = g
            .transitions
            .iter()
            .find(|t| t.from == cur && dist.get(t.to.as_str()) == Some(&remaining))
            .expect("a shortest path continues");
        out.push(step.input.clone());
        cur = &step.to;
    }
    Ok(out)
}

/// A connection-like view of a stateful implementation.
pub trait Session {
    /// Returns to a fresh connection in the initial state.
    fn reset(&mut self) -> Result<(), AdapterError>;
    fn send(&mut self, input: &str) -> Result<Response, AdapterError>;
    /// Whether a response to a prefix step means the step took effect.
    fn accepted(&self, r: &Response) -> bool;
    /// Wire form of a prefix input (e.g. completing a command prefix).
    fn complete_prefix(&self, input: &str) -> String {
        input.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DriveError {
    #[error(transparent)]
    Prefix(#[from] PrefixError),
    #[error("step {index} (`{input}`): {message}")]
    Step {
        index: usize,
        input: String,
        message: String,
    },
}

/// Sends the prefix reaching `state`, then `input`, and returns the
/// response to `input`. The session is reset before and after.
pub fn drive_and_execute(
    s: &mut dyn Session,
    g: &StateGraph,
    state: &str,
    input: &str,
) -> Result<Response, DriveError> {
    let prefix = input_prefix(g, state)?;
    let step_err = |index: usize, input: &str, message: String| DriveError::Step {
        index,
        input: input.to_string(),
        message,
    };
    s.reset()
        .map_err(|e| step_err(0, "<connect>", e.to_string()))?;
    for (i, p) in prefix.iter().enumerate() {
        let wire = s.complete_prefix(p);
        match s.send(&wire) {
            Ok(r) if s.accepted(&r) => {}
            Ok(r) => {
                let _ = s.reset();
                return Err(step_err(i, &wire, format!("rejected: {r:?}")));
            }
            Err(e) => {
                let _ = s.reset();
                return Err(step_err(i, &wire, e.to_string()));
            }
        }
    }
    let r = s.send(input);
    let _ = s.reset();
    Ok(r.unwrap_or_else(|e| match e {
        AdapterError::Timeout => Response::Timeout,
        _ => Response::Crash,
    }))
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("model is not stateful: no enumeration-typed input")]
    NotStateful,
    #[error("model program has no definition of `{0}`")]
    NoSource(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{error}; raw response:\n{raw}")]
    Parse { error: ParseError, raw: String },
}

/// Index and variants of the first enumeration-typed input of main.
pub fn state_input(plan: &SynthesisPlan) -> Option<(usize, Vec<String>)> {
    plan.main_module()
        .inputs()
        .iter()
        .enumerate()
        .find_map(|(i, a)| match a.ty.resolved() {
            SemanticType::Enumeration { variants, .. } => Some((i, variants.clone())),
            _ => None,
        })
}

/// Asks the model (once, at temperature 0) to turn the main function's
/// source into a transition dictionary.
pub fn extract_state_graph(
    plan: &SynthesisPlan,
    program_text: &str,
    backend: &CompletionBackend,
    assets: &PromptAssets,
    cfg: &GenerationConfig,
) -> Result<(StateGraph, String), ExtractError> {
    let (_, variants) = state_input(plan).ok_or(ExtractError::NotStateful)?;
    let main = &plan.main;
    let source = split_top_level(program_text)
        .ok()
        .and_then(|items| {
            items
                .into_iter()
                .find(|i| matches!(&i.kind, ItemKind::Function { name } if name == main))
        })
        .ok_or_else(|| ExtractError::NoSource(main.clone()))?;
    let prompt = PromptPair {
        system: String::new(),
        user: render_state_graph_prompt_with(assets, &source.text)?,
        target_module: main.clone(),
    };
    let cfg = GenerationConfig {
        k: 1,
        temperature: 0.0,
        ..cfg.clone()
    };
    let raw = complete(backend, &prompt, 0.0, 0, &cfg)?;
    match parse_transition_dict(&raw, Some(&variants)) {
        Ok(g) => Ok((g, raw)),
        Err(error) => Err(ExtractError::Parse { error, raw }),
    }
}

/// Prompt used by [`extract_state_graph`], for stub key computation.
pub fn state_graph_prompt(
    plan: &SynthesisPlan,
    program_text: &str,
    assets: &PromptAssets,
) -> Option<PromptPair> {
    let main = &plan.main;
    let source = split_top_level(program_text)
        .ok()?
        .into_iter()
        .find(|i| matches!(&i.kind, ItemKind::Function { name } if name == main))?;
    Some(PromptPair {
        system: String::new(),
        user: render_state_graph_prompt_with(assets, &source.text).ok()?,
        target_module: main.clone(),
    })
}
