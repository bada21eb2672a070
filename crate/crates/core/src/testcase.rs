//! Concrete test values and test cases.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use crate::graph::ArgSpec;
use crate::types::SemanticType;

/// A concrete value of some semantic type.
///
/// Text and character bytes are kept raw; in JSON each byte becomes the
/// code point of the same number, so every byte string round-trips.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Char(u8),
    UInt(u64),
    Text(Vec<u8>),
    Enum(String),
    Array(Vec<Value>),
    Record(Vec<(String, Value)>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("value does not fit type {expected}: {found}")]
pub struct ValueError {
    pub expected: String,
    pub found: String,
}

fn bytes_to_string(b: &[u8]) -> String {
    b.iter().map(|&c| c as char).collect()
}

fn string_to_bytes(s: &str) -> Option<Vec<u8>> {
    s.chars().map(|c| u8::try_from(c as u32).ok()).collect()
}

impl Value {
    pub fn text(s: &str) -> Self {
        Value::Text(s.as_bytes().to_vec())
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Bool(b) => json!(b),
            Value::Char(c) => json!(bytes_to_string(&[*c])),
            Value::UInt(n) => json!(n),
            Value::Text(t) => json!(bytes_to_string(t)),
            Value::Enum(v) => json!(v),
            Value::Array(items) => Json::Array(items.iter().map(Value::to_json).collect()),
            Value::Record(fields) => Json::Object(
                fields
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_json()))
                    .collect::<Map<_, _>>(),
            ),
        }
    }

    /// Reads a value of type `ty` from its JSON form.
    pub fn from_json(j: &Json, ty: &SemanticType) -> Result<Value, ValueError> {
        let err = || ValueError {
            expected: ty
                .type_name()
                .map(str::to_string)
                .unwrap_or_else(|| format!("{ty:?}")),
            found: j.to_string(),
        };
        Ok(match ty {
            SemanticType::Boolean => Value::Bool(j.as_bool().ok_or_else(err)?),
            SemanticType::Character => {
                let b = j.as_str().and_then(string_to_bytes).ok_or_else(err)?;
                match b.as_slice() {
                    [c] => Value::Char(*c),
                    _ => return Err(err()),
                }
            }
            SemanticType::UInt { bits } => {
                let n = j.as_u64().ok_or_else(err)?;
                if *bits < 64 && n >> bits != 0 {
                    return Err(err());
                }
                Value::UInt(n)
            }
            SemanticType::Text { max_len } => {
                let b = j.as_str().and_then(string_to_bytes).ok_or_else(err)?;
                if b.len() > *max_len || b.contains(&0) {
                    return Err(err());
                }
                Value::Text(b)
            }
            SemanticType::Enumeration { variants, .. } => {
                let s = j.as_str().ok_or_else(err)?;
                if !variants.iter().any(|v| v == s) {
                    return Err(err());
                }
                Value::Enum(s.to_string())
            }
            SemanticType::ArrayOf { element, length } => {
                let a = j.as_array().ok_or_else(err)?;
                if a.len() != *length {
                    return Err(err());
                }
                Value::Array(
                    a.iter()
                        .map(|x| Value::from_json(x, element))
                        .collect::<Result<_, _>>()?,
                )
            }
            SemanticType::Composite { fields, .. } => {
                let o = j.as_object().ok_or_else(err)?;
                if o.len() != fields.len() {
                    return Err(err());
                }
                let mut out = Vec::with_capacity(fields.len());
                for f in fields {
                    let v = o.get(&f.name).ok_or_else(err)?;
                    out.push((f.name.clone(), Value::from_json(v, &f.ty)?));
                }
                Value::Record(out)
            }
            SemanticType::Alias { inner, .. } => Value::from_json(j, inner)?,
        })
    }

    pub fn as_text(&self) -> Option<&[u8]> {
        match self {
            Value::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&Value> {
        match self {
            Value::Record(fs) => fs.iter().find(|(k, _)| k == name).map(|(_, v)| v),
            _ => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// One generated test: inputs in argument order, the model's output and
/// whether the model's gates rejected the input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TestCase {
    pub model_id: String,
    pub inputs: Vec<Value>,
    pub output: Value,
    pub invalid: bool,
}

impl TestCase {
    /// Identity used for deduplication; the output is not part of it.
    pub fn key(&self) -> (&[Value], bool) {
        (&self.inputs, self.invalid)
    }
}

/// Tests together with the signature that gives their values meaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSuite {
    /// Main's arguments; the last one is the output.
    pub args: Vec<ArgSpec>,
    pub tests: Vec<TestCase>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("malformed test suite: {0}")]
    Shape(String),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize, Deserialize)]
struct RawSuite {
    args: Vec<ArgSpec>,
    tests: Vec<RawTest>,
}

#[derive(Serialize, Deserialize)]
struct RawTest {
    model_id: String,
    inputs: Map<String, Json>,
    output: Json,
    invalid: bool,
}

impl TestSuite {
    pub fn input_args(&self) -> &[ArgSpec] {
        &self.args[..self.args.len().saturating_sub(1)]
    }

    pub fn to_json(&self) -> String {
        let inputs = self.input_args();
        let raw = RawSuite {
            args: self.args.clone(),
            tests: self
                .tests
                .iter()
                .map(|t| RawTest {
                    model_id: t.model_id.clone(),
                    inputs: inputs
                        .iter()
                        .zip(&t.inputs)
                        .map(|(a, v)| (a.name.clone(), v.to_json()))
                        .collect(),
                    output: t.output.to_json(),
                    invalid: t.invalid,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("suite serializes")
    }

    pub fn from_json(text: &str) -> Result<TestSuite, SuiteError> {
        let raw: RawSuite = serde_json::from_str(text)?;
        let Some((out_arg, inputs)) = raw.args.split_last() else {
            return Err(SuiteError::Shape("no arguments".into()));
        };
        let mut tests = Vec::with_capacity(raw.tests.len());
        for (n, t) in raw.tests.into_iter().enumerate() {
            if t.inputs.len() != inputs.len() {
                return Err(SuiteError::Shape(format!("test {n}: wrong input count")));
            }
            let mut vals = Vec::with_capacity(inputs.len());
            for a in inputs {
                let j = t
                    .inputs
                    .get(&a.name)
                    .ok_or_else(|| SuiteError::Shape(format!("test {n}: missing `{}`", a.name)))?;
                vals.push(Value::from_json(j, &a.ty)?);
            }
            tests.push(TestCase {
                model_id: t.model_id,
                inputs: vals,
                output: Value::from_json(&t.output, &out_arg.ty)?,
                invalid: t.invalid,
            });
        }
        Ok(TestSuite {
            args: raw.args,
            tests,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record_ty() -> SemanticType {
        SemanticType::composite(
            "Record",
            [
                (
                    "record_type",
                    SemanticType::enumeration("RecordType", ["A", "DNAME"]),
                ),
                ("name", SemanticType::text(3)),
                ("flags", SemanticType::array(SemanticType::uint(4), 2)),
            ],
        )
    }

    #[test]
    fn json_round_trip() {
        let v = Value::Record(vec![
            ("record_type".into(), Value::Enum("DNAME".into())),
            ("name".into(), Value::Text(vec![b'a', 0xff])),
            (
                "flags".into(),
                Value::Array(vec![Value::UInt(15), Value::UInt(0)]),
            ),
        ]);
        let j = v.to_json();
        assert_eq!(j["name"], json!("a\u{ff}"));
        assert_eq!(Value::from_json(&j, &record_ty()).unwrap(), v);
    }

    #[test]
    fn rejects_out_of_type_values() {
        let t = record_ty();
        for bad in [
            json!({"record_type": "MX", "name": "a", "flags": [0, 0]}),
            json!({"record_type": "A", "name": "abcd", "flags": [0, 0]}),
            json!({"record_type": "A", "name": "a", "flags": [16, 0]}),
            json!({"record_type": "A", "name": "a", "flags": [0]}),
            json!({"record_type": "A", "name": "\u{100}", "flags": [0, 0]}),
        ] {
            assert!(Value::from_json(&bad, &t).is_err(), "{bad}");
        }
    }

    #[test]
    fn suite_round_trip() {
        let suite = TestSuite {
            args: vec![
                ArgSpec::new("query", SemanticType::text(5), "Q."),
                ArgSpec::new("record", record_ty(), "R."),
                ArgSpec::new("result", SemanticType::Boolean, "Out."),
            ],
            tests: vec![TestCase {
                model_id: "model-000".into(),
                inputs: vec![
                    Value::text("a.b"),
                    Value::Record(vec![
                        ("record_type".into(), Value::Enum("A".into())),
                        ("name".into(), Value::text("a")),
                        (
                            "flags".into(),
                            Value::Array(vec![Value::UInt(1), Value::UInt(2)]),
                        ),
                    ]),
                ],
                output: Value::Bool(true),
                invalid: false,
            }],
        };
        assert_eq!(TestSuite::from_json(&suite.to_json()).unwrap(), suite);
    }

    proptest! {
        #[test]
        fn text_bytes_round_trip(b in proptest::collection::vec(1u8..=255, 0..8)) {
            let v = Value::Text(b.clone());
            prop_assert_eq!(Value::from_json(&v.to_json(), &SemanticType::text(8)).unwrap(), v);
        }
    }
}
