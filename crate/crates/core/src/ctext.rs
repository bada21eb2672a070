//! Lightweight lexical handling of C source text: top-level item
//! splitting and whitespace normalization. Enough to recognize includes,
//! typedefs, prototypes and function definitions in model completions.

/// Kind of a top-level item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemKind {
    /// `#...` line (with continuations).
    Preprocessor,
    Comment,
    Typedef {
        name: String,
    },
    Prototype {
        name: String,
    },
    Function {
        name: String,
    },
    /// Any other declaration (globals, tagged struct definitions, ...).
    Declaration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub kind: ItemKind,
    /// Source text of the item, without surrounding blank lines.
    pub text: String,
    /// 1-based line where the item starts.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("unterminated {0} starting on line {1}")]
    Unterminated(&'static str, usize),
    #[error("unbalanced `{0}` on line {1}")]
    Unbalanced(char, usize),
}

/// Splits source into top-level items.
pub fn split_top_level(src: &str) -> Result<Vec<Item>, SplitError> {
    let b = src.as_bytes();
    let mut items = Vec::new();
    let mut i = 0;
    let line_at = |pos: usize| src[..pos].bytes().filter(|&c| c == b'\n').count() + 1;
    while i < b.len() {
        if b[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if b[i] == b'#' {
            while i < b.len() && b[i] != b'\n' {
                if b[i] == b'\\' && i + 1 < b.len() && b[i + 1] == b'\n' {
                    i += 1;
                }
                i += 1;
            }
            items.push(Item {
                kind: ItemKind::Preprocessor,
                text: src[start..i].trim_end().to_string(),
                line: line_at(start),
            });
            continue;
        }
        if b[i..].starts_with(b"//") || b[i..].starts_with(b"/*") {
            i = skip_comment(b, i).ok_or(SplitError::Unterminated("comment", line_at(start)))?;
            items.push(Item {
                kind: ItemKind::Comment,
                text: src[start..i].trim_end().to_string(),
                line: line_at(start),
            });
            continue;
        }
        // Declaration or definition: scan to `;` at depth 0, or to the `}`
        // closing a brace opened at depth 0 when the head looks like a
        // function (`)` before the `{`).
        let mut depth: i32 = 0;
        let mut paren: i32 = 0;
        let mut end = None;
        let mut is_fn_body = false;
        while i < b.len() {
            let c = b[i];
            if b[i..].starts_with(b"//") || b[i..].starts_with(b"/*") {
                i = skip_comment(b, i).ok_or(SplitError::Unterminated("comment", line_at(i)))?;
                continue;
            }
            match c {
                b'"' | b'\'' => {
                    i = skip_literal(b, i)
                        .ok_or(SplitError::Unterminated("literal", line_at(i)))?;
                    continue;
                }
                b'(' => paren += 1,
                b')' => {
                    paren -= 1;
                    if paren < 0 {
                        return Err(SplitError::Unbalanced(')', line_at(i)));
                    }
                }
                b'{' => {
                    if depth == 0 && paren == 0 {
                        let head = strip_comments(&src[start..i]);
                        is_fn_body = head.trim_end().ends_with(')')
                            && !head.trim_start().starts_with("typedef");
                    }
                    depth += 1;
                }
                b'}' => {
                    depth -= 1;
                    if depth < 0 {
                        return Err(SplitError::Unbalanced('}', line_at(i)));
                    }
                    if depth == 0 && is_fn_body {
                        end = Some(i + 1);
                        i += 1;
                        break;
                    }
                }
                b';' if depth == 0 && paren == 0 => {
                    end = Some(i + 1);
                    i += 1;
                    break;
                }
                _ => {}
            }
            i += 1;
        }
        let end = end.ok_or(SplitError::Unterminated("declaration", line_at(start)))?;
        let text = src[start..end].to_string();
        let kind = classify(&text, is_fn_body);
        items.push(Item {
            kind,
            text,
            line: line_at(start),
        });
    }
    Ok(items)
}

fn skip_comment(b: &[u8], i: usize) -> Option<usize> {
    if b[i..].starts_with(b"//") {
        let mut j = i;
        while j < b.len() && b[j] != b'\n' {
            j += 1;
        }
        Some(j)
    } else {
        let rest = &b[i + 2..];
        rest.windows(2)
            .position(|w| w == b"*/")
            .map(|p| i + 2 + p + 2)
    }
}

fn skip_literal(b: &[u8], i: usize) -> Option<usize> {
    let q = b[i];
    let mut j = i + 1;
    while j < b.len() {
        match b[j] {
            b'\\' => j += 2,
            c if c == q => return Some(j + 1),
            b'\n' => return None,
            _ => j += 1,
        }
    }
    None
}

/// Removes comments, keeping literals intact.
pub fn strip_comments(src: &str) -> String {
    let b = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    while i < b.len() {
        if b[i..].starts_with(b"//") || b[i..].starts_with(b"/*") {
            i = skip_comment(b, i).unwrap_or(b.len());
            out.push(' ');
            continue;
        }
        if b[i] == b'"' || b[i] == b'\'' {
            let j = skip_literal(b, i).unwrap_or(b.len());
            out.push_str(&src[i..j]);
            i = j;
            continue;
        }
        let ch = src[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

fn classify(text: &str, is_fn_body: bool) -> ItemKind {
    let code = strip_comments(text);
    let head = code.split('{').next().unwrap_or("");
    if is_fn_body {
        return ItemKind::Function {
            name: name_before_paren(head).unwrap_or_default(),
        };
    }
    let trimmed = code.trim_start();
    if trimmed.starts_with("typedef") {
        return ItemKind::Typedef {
            name: typedef_name(&code).unwrap_or_default(),
        };
    }
    if !code.contains('{') && !code.contains('=') {
        if let Some(name) = name_before_paren(&code) {
            return ItemKind::Prototype { name };
        }
    }
    ItemKind::Declaration
}

/// Identifier immediately before the first `(` at paren depth 0.
fn name_before_paren(head: &str) -> Option<String> {
    let idx = head.find('(')?;
    let before = head[..idx].trim_end();
    let name: String = before
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    (!name.is_empty()).then_some(name)
}

/// Name declared by a typedef: the last identifier outside braces and
/// brackets.
fn typedef_name(code: &str) -> Option<String> {
    let mut depth = 0;
    let mut outside = String::new();
    for c in code.chars() {
        match c {
            '{' | '[' => depth += 1,
            '}' | ']' => depth -= 1,
            _ if depth == 0 => outside.push(c),
            _ => {}
        }
    }
    outside
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .rfind(|w| !w.is_empty())
        .map(str::to_string)
}

/// Token-level normalization: comments removed, whitespace collapsed, and
/// no spaces around punctuation. Two texts differing only in layout
/// normalize equally.
pub fn normalize(src: &str) -> String {
    let code = strip_comments(src);
    let mut out = String::new();
    let mut pending_space = false;
    for c in code.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            let prev_word = out.chars().last().is_some_and(is_word);
            if prev_word && is_word(c) {
                out.push(' ');
            }
            pending_space = false;
        }
        out.push(c);
    }
    out
}

fn is_word(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}
