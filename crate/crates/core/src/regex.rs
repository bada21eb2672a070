//! Regular-expression subset used by regex gate modules.
//!
//! Four node kinds (range, sequence, alternation, star) mirror the C
//! matcher linked into every model. Matching follows the continuation
//! scheme of that matcher so the two agree on every subject.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegexAst {
    Range { lo: u8, hi: u8 },
    Seq(Box<RegexAst>, Box<RegexAst>),
    Or(Box<RegexAst>, Box<RegexAst>),
    Star(Box<RegexAst>),
}

impl RegexAst {
    pub fn range(lo: u8, hi: u8) -> Self {
        RegexAst::Range { lo, hi }
    }

    pub fn lit(c: u8) -> Self {
        RegexAst::Range { lo: c, hi: c }
    }

    pub fn seq(a: RegexAst, b: RegexAst) -> Self {
        RegexAst::Seq(Box::new(a), Box::new(b))
    }

    pub fn or(a: RegexAst, b: RegexAst) -> Self {
        RegexAst::Or(Box::new(a), Box::new(b))
    }

    pub fn star(a: RegexAst) -> Self {
        RegexAst::Star(Box::new(a))
    }

    pub fn node_count(&self) -> usize {
        match self {
            RegexAst::Range { .. } => 1,
            RegexAst::Star(a) => 1 + a.node_count(),
            RegexAst::Seq(a, b) | RegexAst::Or(a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegexError {
    #[error("unbalanced `{0}` at offset {1}")]
    Unbalanced(char, usize),
    #[error("empty character class at offset {0}")]
    EmptyClass(usize),
    #[error("`*` with nothing to repeat at offset {0}")]
    DanglingStar(usize),
    #[error("bad range `{lo}-{hi}` at offset {at}", lo = *.0 as char, hi = *.1 as char, at = .2)]
    BadRange(u8, u8, usize),
    #[error("trailing escape at offset {0}")]
    TrailingEscape(usize),
    #[error("empty expression at offset {0}")]
    Empty(usize),
    #[error("unsupported `{0}` at offset {1} (escape it to match literally)")]
    Unsupported(char, usize),
    #[error("non-ASCII byte at offset {0}")]
    NonAscii(usize),
}

/// Characters that must be escaped outside a class.
const META: &[u8] = b"()[]*|\\.+?^${}";

/// Parses a pattern.
///
/// Grammar: `alt := seq ('|' seq)*`, `seq := post+`, `post := atom '*'*`,
/// `atom := char | '\' char | class | '(' alt ')'`. Class members are
/// single characters or `lo-hi` ranges; `-` is literal first or last.
pub fn parse_pattern(pattern: &str) -> Result<RegexAst, RegexError> {
    if let Some(i) = pattern.bytes().position(|b| !b.is_ascii()) {
        return Err(RegexError::NonAscii(i));
    }
    let mut p = Parser {
        s: pattern.as_bytes(),
        i: 0,
    };
    let ast = p.alt()?;
    match p.peek() {
        None => Ok(ast),
        Some(b')') => Err(RegexError::Unbalanced(')', p.i)),
        Some(c) => Err(RegexError::Unsupported(c as char, p.i)),
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn alt(&mut self) -> Result<RegexAst, RegexError> {
        let mut left = self.seq()?;
        while self.peek() == Some(b'|') {
            self.i += 1;
            let right = self.seq()?;
            left = RegexAst::or(left, right);
        }
        Ok(left)
    }

    fn seq(&mut self) -> Result<RegexAst, RegexError> {
        let mut acc: Option<RegexAst> = None;
        while let Some(c) = self.peek() {
            if c == b'|' || c == b')' {
                break;
            }
            let item = self.postfix()?;
            acc = Some(match acc {
                None => item,
                Some(prev) => RegexAst::seq(prev, item),
            });
        }
        acc.ok_or(RegexError::Empty(self.i))
    }

    fn postfix(&mut self) -> Result<RegexAst, RegexError> {
        let mut a = self.atom()?;
        while self.peek() == Some(b'*') {
            self.i += 1;
            a = RegexAst::star(a);
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<RegexAst, RegexError> {
        let at = self.i;
        let c = self.peek().ok_or(RegexError::Empty(at))?;
        self.i += 1;
        match c {
            b'(' => {
                let inner = self.alt()?;
                if self.peek() != Some(b')') {
                    return Err(RegexError::Unbalanced('(', at));
                }
                self.i += 1;
                Ok(inner)
            }
            b'[' => self.class(at),
            b'\\' => {
                let e = self.peek().ok_or(RegexError::TrailingEscape(at))?;
                self.i += 1;
                Ok(RegexAst::lit(e))
            }
            b'*' => Err(RegexError::DanglingStar(at)),
            b']' => Err(RegexError::Unbalanced(']', at)),
            _ if META.contains(&c) => Err(RegexError::Unsupported(c as char, at)),
            _ => Ok(RegexAst::lit(c)),
        }
    }

    fn class(&mut self, open: usize) -> Result<RegexAst, RegexError> {
        let mut members: Vec<RegexAst> = Vec::new();
        loop {
            let at = self.i;
            let c = self.peek().ok_or(RegexError::Unbalanced('[', open))?;
            self.i += 1;
            let lo = match c {
                b']' => break,
                b'\\' => {
                    let e = self.peek().ok_or(RegexError::TrailingEscape(at))?;
                    self.i += 1;
                    e
                }
                _ => c,
            };
            let is_range =
                self.peek() == Some(b'-') && self.s.get(self.i + 1).is_some_and(|&n| n != b']');
            if is_range {
                self.i += 1;
                let mut hi = self.s[self.i];
                self.i += 1;
                if hi == b'\\' {
                    hi = self.peek().ok_or(RegexError::TrailingEscape(self.i - 1))?;
                    self.i += 1;
                }
                if hi < lo {
                    return Err(RegexError::BadRange(lo, hi, at));
                }
                members.push(RegexAst::range(lo, hi));
            } else {
                members.push(RegexAst::lit(lo));
            }
        }
        let mut it = members.into_iter();
        let first = it.next().ok_or(RegexError::EmptyClass(open))?;
        Ok(it.fold(first, RegexAst::or))
    }
}

/// Renders an AST back to pattern syntax (fully parenthesized where needed).
impl fmt::Display for RegexAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn ch(f: &mut fmt::Formatter<'_>, c: u8) -> fmt::Result {
            if META.contains(&c) || c == b'-' {
                write!(f, "\\{}", c as char)
            } else {
                write!(f, "{}", c as char)
            }
        }
        match self {
            RegexAst::Range { lo, hi } if lo == hi => ch(f, *lo),
            RegexAst::Range { lo, hi } => {
                f.write_str("[")?;
                ch(f, *lo)?;
                f.write_str("-")?;
                ch(f, *hi)?;
                f.write_str("]")
            }
            RegexAst::Seq(a, b) => {
                if matches!(**a, RegexAst::Or(..)) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                if matches!(**b, RegexAst::Or(..) | RegexAst::Seq(..)) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            RegexAst::Or(a, b) => {
                if matches!(**b, RegexAst::Or(..)) {
                    write!(f, "{a}|({b})")
                } else {
                    write!(f, "{a}|{b}")
                }
            }
            RegexAst::Star(a) => {
                if matches!(**a, RegexAst::Range { .. }) {
                    write!(f, "{a}*")
                } else {
                    write!(f, "({a})*")
                }
            }
        }
    }
}

/// One pending item of a continuation.
#[derive(Clone, Copy)]
enum Cont<'a> {
    Node(&'a RegexAst),
    /// Fails unless input has advanced past the recorded position; placed
    /// after each star unrolling so an iteration that consumed nothing
    /// cannot recurse into the same state forever.
    Progress(usize),
}

struct Frame<'a, 'b> {
    item: Cont<'a>,
    next: Option<&'b Frame<'a, 'b>>,
}

/// Whole-subject match. A NUL byte ends the subject, as in C.
pub fn matches(ast: &RegexAst, subject: &str) -> bool {
    matches_bytes(ast, subject.as_bytes())
}

pub fn matches_bytes(ast: &RegexAst, subject: &[u8]) -> bool {
    let end = subject
        .iter()
        .position(|&b| b == 0)
        .unwrap_or(subject.len());
    go(Some(ast), None, &subject[..end], 0)
}

fn go(re: Option<&RegexAst>, cont: Option<&Frame<'_, '_>>, text: &[u8], pos: usize) -> bool {
    let Some(re) = re else {
        return pos == text.len();
    };
    match re {
        RegexAst::Or(a, b) => go(Some(a), cont, text, pos) || go(Some(b), cont, text, pos),
        RegexAst::Seq(a, b) => {
            let c = Frame {
                item: Cont::Node(b),
                next: cont,
            };
            go(Some(a), Some(&c), text, pos)
        }
        RegexAst::Star(a) => {
            if resume(cont, text, pos) {
                return true;
            }
            if pos >= text.len() {
                return false;
            }
            let again = Frame {
                item: Cont::Node(re),
                next: cont,
            };
            let guard = Frame {
                item: Cont::Progress(pos),
                next: Some(&again),
            };
            go(Some(a), Some(&guard), text, pos)
        }
        RegexAst::Range { lo, hi } => {
            pos < text.len() && (*lo..=*hi).contains(&text[pos]) && resume(cont, text, pos + 1)
        }
    }
}

fn resume(cont: Option<&Frame<'_, '_>>, text: &[u8], pos: usize) -> bool {
    match cont {
        None => go(None, None, text, pos),
        Some(f) => match f.item {
            Cont::Node(n) => go(Some(n), f.next, text, pos),
            Cont::Progress(mark) => pos != mark && resume(f.next, text, pos),
        },
    }
}

/// C statements building `ast` as stack nodes plus the gate's return
/// statement, and the name of the root node variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub statements: String,
    pub root: String,
}

/// Emits one `Regex` local per node in post-order (`{prefix}1`, ...) and
/// a final `return match(&root, subject);`. Lines are indented by
/// `indent`.
pub fn emit_constructors(ast: &RegexAst, subject_var: &str, var_prefix: &str) -> Emitted {
    emit_constructors_indented(ast, subject_var, var_prefix, "")
}

pub fn emit_constructors_indented(
    ast: &RegexAst,
    subject_var: &str,
    var_prefix: &str,
    indent: &str,
) -> Emitted {
    let mut lines = Vec::new();
    let mut n = 0;
    let root = emit_node(ast, var_prefix, &mut n, &mut lines);
    lines.push(format!("return match(&{root}, {subject_var});"));
    let statements = lines
        .iter()
        .map(|l| format!("{indent}{l}\n"))
        .collect::<String>();
    Emitted { statements, root }
}

fn emit_node(ast: &RegexAst, prefix: &str, n: &mut usize, out: &mut Vec<String>) -> String {
    let line = match ast {
        RegexAst::Range { lo, hi } => {
            *n += 1;
            let v = format!("{prefix}{n}");
            format!(
                "Regex {v}; {v}.op = RANGE; {v}.clo = {}; {v}.chi = {};",
                c_char(*lo),
                c_char(*hi)
            )
        }
        RegexAst::Star(a) => {
            let l = emit_node(a, prefix, n, out);
            *n += 1;
            let v = format!("{prefix}{n}");
            format!("Regex {v}; {v}.op = STAR; {v}.left = &{l};")
        }
        RegexAst::Seq(a, b) | RegexAst::Or(a, b) => {
            let l = emit_node(a, prefix, n, out);
            let r = emit_node(b, prefix, n, out);
            *n += 1;
            let v = format!("{prefix}{n}");
            let op = if matches!(ast, RegexAst::Seq(..)) {
                "SEQ"
            } else {
                "OR"
            };
            format!("Regex {v}; {v}.op = {op}; {v}.left = &{l}; {v}.right = &{r};")
        }
    };
    out.push(line);
    format!("{prefix}{n}")
}

/// C character literal for a byte.
pub fn c_char(b: u8) -> String {
    match b {
        b'\'' => "'\\''".into(),
        b'\\' => "'\\\\'".into(),
        0x20..=0x7e => format!("'{}'", b as char),
        _ => format!("'\\x{b:02x}'"),
    }
}
