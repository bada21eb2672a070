//! The engine's binary test file format, plus the text dump fallback.

use std::path::Path;

const MAGIC: &[u8; 5] = b"KTEST";
const OLD_MAGIC: &[u8; 5] = b"BOUT\n";
pub const CURRENT_VERSION: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KTestObject {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KTest {
    pub version: u32,
    pub args: Vec<String>,
    pub sym_argvs: u32,
    pub sym_argv_len: u32,
    pub objects: Vec<KTestObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KTestError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("object name is not UTF-8")]
    BadName,
    #[error("text dump line {line}: {message}")]
    Text { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

impl KTest {
    pub fn new(objects: Vec<KTestObject>) -> Self {
        KTest {
            version: CURRENT_VERSION,
            args: vec!["model.bc".into()],
            sym_argvs: 0,
            sym_argv_len: 0,
            objects,
        }
    }

    pub fn object(&self, name: &str) -> Option<&KTestObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn parse(b: &[u8]) -> Result<KTest, KTestError> {
        let mut r = Reader { b, pos: 0 };
        let magic = r.take(5)?;
        if magic != MAGIC && magic != OLD_MAGIC {
            return Err(KTestError::BadMagic);
        }
        let version = r.u32()?;
        if !(1..=CURRENT_VERSION).contains(&version) {
            return Err(KTestError::Version(version));
        }
        let nargs = r.u32()?;
        let mut args = Vec::new();
        for _ in 0..nargs {
            args.push(String::from_utf8_lossy(r.chunk()?).into_owned());
        }
        let (sym_argvs, sym_argv_len) = if version >= 2 {
            (r.u32()?, r.u32()?)
        } else {
            (0, 0)
        };
        let nobj = r.u32()?;
        let mut objects = Vec::new();
        for _ in 0..nobj {
            let name = std::str::from_utf8(r.chunk()?)
                .map_err(|_| KTestError::BadName)?
                .to_string();
            let bytes = r.chunk()?.to_vec();
            objects.push(KTestObject { name, bytes });
        }
        if r.pos != b.len() {
            return Err(KTestError::Trailing(b.len() - r.pos));
        }
        Ok(KTest {
            version,
            args,
            sym_argvs,
            sym_argv_len,
            objects,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        let put = |out: &mut Vec<u8>, n: usize| {
            out.extend_from_slice(&u32::try_from(n).expect("fits u32").to_be_bytes())
        };
        put(&mut out, self.version as usize);
        put(&mut out, self.args.len());
        for a in &self.args {
            put(&mut out, a.len());
            out.extend_from_slice(a.as_bytes());
        }
        if self.version >= 2 {
            put(&mut out, self.sym_argvs as usize);
            put(&mut out, self.sym_argv_len as usize);
        }
        put(&mut out, self.objects.len());
        for o in &self.objects {
            put(&mut out, o.name.len());
            out.extend_from_slice(o.name.as_bytes());
            put(&mut out, o.bytes.len());
            out.extend_from_slice(&o.bytes);
        }
        out
    }

    /// Reads a binary file, or a text dump when the file is not binary.
    pub fn read(path: &Path) -> Result<KTest, KTestError> {
        let b =
            std::fs::read(path).map_err(|e| KTestError::Io(format!("{}: {e}", path.display())))?;
        if b.starts_with(MAGIC) || b.starts_with(OLD_MAGIC) {
            KTest::parse(&b)
        } else {
            KTest::parse_text(&String::from_utf8_lossy(&b))
        }
    }

    /// Parses the dump printed by the engine's `ktest-tool`. Object bytes
    /// come from the `hex` line when present, else from the `data` line.
    pub fn parse_text(text: &str) -> Result<KTest, KTestError> {
        let mut args = Vec::new();
        let mut objects: Vec<(Option<String>, Option<Vec<u8>>, Option<usize>)> = Vec::new();
        let mut declared = None;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |m: &str| KTestError::Text {
                line: line_no,
                message: m.to_string(),
            };
            let Some((key, val)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim();
            let val = val.trim_start();
            if key == "num objects" {
                declared = Some(
                    val.trim()
                        .parse::<usize>()
                        .map_err(|_| err("bad object count"))?,
                );
                continue;
            }
            if key == "args" {
                args = parse_py_list(val).ok_or_else(|| err("bad args list"))?;
                continue;
            }
            let Some(rest) = key.strip_prefix("object") else {
                continue;
            };
            let idx: usize = rest.trim().parse().map_err(|_| err("bad object index"))?;
            if idx > objects.len() {
                return Err(err("object index out of order"));
            }
            if idx == objects.len() {
                objects.push((None, None, None));
            }
            let (field, fval) = val.split_once(':').ok_or_else(|| err("missing field"))?;
            let fval = fval.trim();
            let obj = &mut objects[idx];
            match field.trim() {
                "name" => obj.0 = Some(unquote(fval).ok_or_else(|| err("bad name"))?),
                "size" => obj.2 = Some(fval.parse().map_err(|_| err("bad size"))?),
                "hex" => {
                    let h = fval.strip_prefix("0x").unwrap_or(fval);
                    obj.1 = Some(hex::decode(h).map_err(|_| err("bad hex"))?);
                }
                "data" if obj.1.is_none() => {
                    obj.1 = Some(parse_py_bytes(fval).ok_or_else(|| err("bad data"))?);
                }
                _ => {}
            }
        }
        match declared {
            None => {
                return Err(KTestError::Text {
                    line: 0,
                    message: "not a test dump".into(),
                })
            }
            Some(n) if n != objects.len() => {
                return Err(KTestError::Text {
                    line: 0,
                    message: format!("{n} objects declared, {} found", objects.len()),
                })
            }
            _ => {}
        }
        let objects = objects
            .into_iter()
            .enumerate()
            .map(|(i, (name, bytes, size))| {
                let err = |m: String| KTestError::Text {
                    line: 0,
                    message: m,
                };
                let name = name.ok_or_else(|| err(format!("object {i} has no name")))?;
                let bytes = bytes.ok_or_else(|| err(format!("object {i} has no data")))?;
                if size.is_some_and(|s| s != bytes.len()) {
                    return Err(err(format!("object {i} size mismatch")));
                }
                Ok(KTestObject { name, bytes })
            })
            .collect::<Result<_, _>>()?;
        Ok(KTest {
            version: CURRENT_VERSION,
            args,
            sym_argvs: 0,
            sym_argv_len: 0,
            objects,
        })
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], KTestError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.b.len());
        let end = end.ok_or(KTestError::Truncated(self.pos))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, KTestError> {
        let s = self.take(4)?;
        Ok(u32::from_be_bytes(s.try_into().expect("4 bytes")))
    }

    fn chunk(&mut self) -> Result<&'a [u8], KTestError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

fn unquote(s: &str) -> Option<String> {
    let b = parse_py_str(s)?;
    String::from_utf8(b).ok()
}

fn parse_py_list(s: &str) -> Option<Vec<String>> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    let mut out = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let (item, after) = split_py_literal(rest)?;
        out.push(String::from_utf8(parse_py_str(item)?).ok()?);
        rest = after
            .trim_start()
            .strip_prefix(',')
            .unwrap_or(after)
            .trim_start();
    }
    Some(out)
}

fn split_py_literal(s: &str) -> Option<(&str, &str)> {
    let start = usize::from(s.starts_with('b'));
    let q = s[start..].chars().next()?;
    let b = s.as_bytes();
    let mut i = start + 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            c if c == q as u8 => return Some((&s[..=i], &s[i + 1..])),
            _ => i += 1,
        }
    }
    None
}

fn parse_py_bytes(s: &str) -> Option<Vec<u8>> {
    parse_py_str(s.strip_prefix('b')?)
}

/// Python quoted literal with the escapes `repr` produces.
fn parse_py_str(s: &str) -> Option<Vec<u8>> {
    let s = s.strip_prefix('b').unwrap_or(s);
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let body = s.strip_prefix(q)?.strip_suffix(q)?;
    let b = body.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i] != b'\\' {
            out.push(b[i]);
            i += 1;
            continue;
        }
        let e = *b.get(i + 1)?;
        i += 2;
        out.push(match e {
            b'n' => b'\n',
            b't' => b'\t',
            b'r' => b'\r',
            b'0' => 0,
            b'\\' | b'\'' | b'"' => e,
            b'x' => {
                let h = std::str::from_utf8(b.get(i..i + 2)?).ok()?;
                i += 2;
                u8::from_str_radix(h, 16).ok()?
            }
            _ => return None,
        });
    }
    Some(out)
}
