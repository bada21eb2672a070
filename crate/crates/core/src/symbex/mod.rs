//! Turning engine output into typed test cases.

pub mod engine;
pub mod ktest;

use std::collections::{HashMap, HashSet};

use crate::harness::{SlotRole, SymbolEntry, SymbolMap};
use crate::testcase::{TestCase, Value};
use crate::types::{BaseKind, PathSeg, SemanticType};

pub use engine::{Engine, EngineConfig, EngineError, EngineRunReport};
pub use ktest::{KTest, KTestError, KTestObject};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReconstructError {
    #[error("no object named `{0}`")]
    MissingObject(String),
    #[error("object `{name}` has {found} bytes, expected {expected}")]
    Width {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("object `{name}` holds {value}, outside its type")]
    OutOfRange { name: String, value: u64 },
    #[error("text object `{0}` has no terminator")]
    Unterminated(String),
    #[error("text object `{0}` has bytes after its terminator")]
    Padding(String),
    #[error("test has no value at `{0}`")]
    MissingValue(String),
    #[error("value at `{path}` does not fit slot `{name}`")]
    Mismatch { name: String, path: String },
}

fn decode_slot(e: &SymbolEntry, bytes: &[u8]) -> Result<Value, ReconstructError> {
    let name = || e.var_name.clone();
    if bytes.len() != e.byte_width {
        return Err(ReconstructError::Width {
            name: name(),
            expected: e.byte_width,
            found: bytes.len(),
        });
    }
    let le = || {
        bytes
            .iter()
            .rev()
            .fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
    };
    Ok(match &e.kind {
        BaseKind::Boolean => match bytes[0] {
            0 => Value::Bool(false),
            1 => Value::Bool(true),
            v => {
                return Err(ReconstructError::OutOfRange {
                    name: name(),
                    value: v.into(),
                })
            }
        },
        BaseKind::Character => Value::Char(bytes[0]),
        BaseKind::UnsignedInteger { bits } => {
            let v = le();
            if *bits < 64 && v >> bits != 0 {
                return Err(ReconstructError::OutOfRange {
                    name: name(),
                    value: v,
                });
            }
            Value::UInt(v)
        }
        BaseKind::Enumeration { variants, .. } => {
            let v = le();
            let Some(variant) = usize::try_from(v).ok().and_then(|i| variants.get(i)) else {
                return Err(ReconstructError::OutOfRange {
                    name: name(),
                    value: v,
                });
            };
            Value::Enum(variant.clone())
        }
        BaseKind::CharacterBuffer { .. } => {
            let nul = bytes
                .iter()
                .position(|&b| b == 0)
                .ok_or_else(|| ReconstructError::Unterminated(name()))?;
            if bytes[nul..].iter().any(|&b| b != 0) {
                return Err(ReconstructError::Padding(name()));
            }
            Value::Text(bytes[..nul].to_vec())
        }
    })
}

fn encode_slot(e: &SymbolEntry, v: &Value) -> Option<Vec<u8>> {
    let w = e.byte_width;
    Some(match (&e.kind, v) {
        (BaseKind::Boolean, Value::Bool(b)) => vec![u8::from(*b)],
        (BaseKind::Character, Value::Char(c)) => vec![*c],
        (BaseKind::UnsignedInteger { .. }, Value::UInt(n)) => n.to_le_bytes()[..w].to_vec(),
        (BaseKind::Enumeration { variants, .. }, Value::Enum(s)) => {
            let i = variants.iter().position(|x| x == s)? as u32;
            i.to_le_bytes().to_vec()
        }
        (BaseKind::CharacterBuffer { length }, Value::Text(t)) if t.len() <= *length => {
            let mut b = t.clone();
            b.resize(w, 0);
            b
        }
        _ => return None,
    })
}

fn build(
    ty: &SemanticType,
    path: &mut Vec<PathSeg>,
    slots: &mut HashMap<Vec<PathSeg>, Value>,
) -> Result<Value, ReconstructError> {
    Ok(match ty {
        SemanticType::Alias { inner, .. } => build(inner, path, slots)?,
        SemanticType::ArrayOf { element, length } => {
            let mut items = Vec::with_capacity(*length);
            for i in 0..*length {
                path.push(PathSeg::Index(i));
                items.push(build(element, path, slots)?);
                path.pop();
            }
            Value::Array(items)
        }
        SemanticType::Composite { fields, .. } => {
            let mut out = Vec::with_capacity(fields.len());
            for f in fields {
                path.push(PathSeg::Field(f.name.clone()));
                out.push((f.name.clone(), build(&f.ty, path, slots)?));
                path.pop();
            }
            Value::Record(out)
        }
        _ => slots
            .remove(path.as_slice())
            .ok_or_else(|| ReconstructError::MissingValue(crate::types::path_to_string(path)))?,
    })
}

/// Rebuilds a test case from one engine test file.
pub fn reconstruct(map: &SymbolMap, kt: &KTest) -> Result<TestCase, ReconstructError> {
    let mut slots = HashMap::new();
    let mut invalid = false;
    for e in &map.entries {
        let obj = kt
            .object(&e.var_name)
            .ok_or_else(|| ReconstructError::MissingObject(e.var_name.clone()))?;
        let v = decode_slot(e, &obj.bytes)?;
        if e.role == SlotRole::ValidityFlag {
            invalid = v == Value::Bool(true);
        } else {
            slots.insert(e.path.clone(), v);
        }
    }
    let mut values = Vec::with_capacity(map.args.len());
    for (i, a) in map.args.iter().enumerate() {
        values.push(build(&a.ty, &mut vec![PathSeg::Arg(i)], &mut slots)?);
    }
    let output = values
        .pop()
        .ok_or_else(|| ReconstructError::MissingValue("output".into()))?;
    Ok(TestCase {
        model_id: map.model_id.clone(),
        inputs: values,
        output,
        invalid,
    })
}

fn value_at<'a>(tc: &'a TestCase, path: &[PathSeg]) -> Option<&'a Value> {
    let (first, rest) = path.split_first()?;
    let PathSeg::Arg(i) = first else { return None };
    let mut v = if *i < tc.inputs.len() {
        &tc.inputs[*i]
    } else if *i == tc.inputs.len() {
        &tc.output
    } else {
        return None;
    };
    for seg in rest {
        v = match (seg, v) {
            (PathSeg::Field(f), r) => r.field(f)?,
            (PathSeg::Index(j), Value::Array(items)) => items.get(*j)?,
            _ => return None,
        };
    }
    Some(v)
}

/// Inverse of [`reconstruct`]: the engine objects that would produce `tc`.
pub fn encode(map: &SymbolMap, tc: &TestCase) -> Result<KTest, ReconstructError> {
    let mut objects = Vec::with_capacity(map.entries.len());
    for e in &map.entries {
        let flag;
        let v = if e.role == SlotRole::ValidityFlag {
            flag = Value::Bool(tc.invalid);
            &flag
        } else {
            value_at(tc, &e.path).ok_or_else(|| {
                ReconstructError::MissingValue(crate::types::path_to_string(&e.path))
            })?
        };
        let bytes = encode_slot(e, v).ok_or_else(|| ReconstructError::Mismatch {
            name: e.var_name.clone(),
            path: crate::types::path_to_string(&e.path),
        })?;
        objects.push(KTestObject {
            name: e.var_name.clone(),
            bytes,
        });
    }
    Ok(KTest::new(objects))
}

/// A test file that could not be turned into a test case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discarded {
    pub source: String,
    pub reason: String,
}

/// Reconstructs every test, discarding (and reporting) the bad ones.
pub fn reconstruct_all(
    map: &SymbolMap,
    ktests: &[(String, KTest)],
) -> (Vec<TestCase>, Vec<Discarded>) {
    let mut tests = Vec::new();
    let mut discarded = Vec::new();
    for (source, kt) in ktests {
        match reconstruct(map, kt) {
            Ok(t) => tests.push(t),
            Err(e) => {
                log::warn!("{}: discarding {source}: {e}", map.model_id);
                discarded.push(Discarded {
                    source: source.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    (tests, discarded)
}

/// Union of test sets, keeping the first occurrence of each distinct
/// (inputs, validity) pair in input order.
pub fn dedup_union<'a>(sets: impl IntoIterator<Item = &'a [TestCase]>) -> Vec<TestCase> {
    let mut seen: HashSet<(Vec<Value>, bool)> = HashSet::new();
    let mut out = Vec::new();
    for set in sets {
        for t in set {
            if seen.insert((t.inputs.clone(), t.invalid)) {
                out.push(t.clone());
            }
        }
    }
    out
}

/// Drops tests whose inputs the model rejected, unless asked to keep them.
pub fn filter_invalid(tests: Vec<TestCase>, keep_invalid: bool) -> Vec<TestCase> {
    if keep_invalid {
        tests
    } else {
        tests.into_iter().filter(|t| !t.invalid).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::emit_harness;
    use crate::harness::tests::dns_plan;
    use proptest::prelude::*;

    fn obj(name: &str, bytes: &[u8]) -> KTestObject {
        KTestObject {
            name: name.into(),
            bytes: bytes.to_vec(),
        }
    }

    fn dns_map() -> SymbolMap {
        let mut m = emit_harness(&dns_plan()).symbol_map;
        m.model_id = "model-000".into();
        m
    }

    fn dns_ktest(rtype: u32, flag: u8) -> KTest {
        KTest::new(vec![
            obj("x0", b"a.b\0\0\0"),
            obj("x1", &rtype.to_le_bytes()),
            obj("x2", b"b\0\0\0"),
            obj("x3", b"c\0\0\0"),
            obj("x4", &[1]),
            obj("x5", &[flag]),
        ])
    }

    #[test]
    fn reconstructs_dns_test() {
        let t = reconstruct(&dns_map(), &dns_ktest(5, 0)).unwrap();
        assert_eq!(t.inputs[0], Value::text("a.b"));
        assert_eq!(
            t.inputs[1],
            Value::Record(vec![
                ("record_type".into(), Value::Enum("DNAME".into())),
                ("name".into(), Value::text("b")),
                ("rdata".into(), Value::text("c")),
            ])
        );
        assert_eq!(t.output, Value::Bool(true));
        assert!(!t.invalid);
        assert!(reconstruct(&dns_map(), &dns_ktest(5, 1)).unwrap().invalid);
    }

    #[test]
    fn reencode_is_identity() {
        let kt = dns_ktest(3, 1);
        let t = reconstruct(&dns_map(), &kt).unwrap();
        assert_eq!(encode(&dns_map(), &t).unwrap(), kt);
    }

    #[test]
    fn out_of_range_enum_is_discarded() {
        let (tests, bad) = reconstruct_all(
            &dns_map(),
            &[
                ("t1".into(), dns_ktest(7, 0)),
                ("t2".into(), dns_ktest(6, 0)),
            ],
        );
        assert_eq!(tests.len(), 1);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].source, "t1");
        assert!(bad[0].reason.contains("x1"));
    }

    #[test]
    fn malformed_objects() {
        let m = dns_map();
        let mut kt = dns_ktest(0, 0);
        kt.objects[0].bytes = b"abcdef".to_vec();
        assert_eq!(
            reconstruct(&m, &kt),
            Err(ReconstructError::Unterminated("x0".into()))
        );
        kt.objects[0].bytes = b"a\0b\0\0\0".to_vec();
        assert_eq!(
            reconstruct(&m, &kt),
            Err(ReconstructError::Padding("x0".into()))
        );
        kt.objects[0].bytes = b"a\0".to_vec();
        assert!(matches!(
            reconstruct(&m, &kt),
            Err(ReconstructError::Width { .. })
        ));
        kt.objects.remove(0);
        assert_eq!(
            reconstruct(&m, &kt),
            Err(ReconstructError::MissingObject("x0".into()))
        );
    }

    fn tc(q: &str, invalid: bool, model: &str, out: bool) -> TestCase {
        TestCase {
            model_id: model.into(),
            inputs: vec![Value::text(q)],
            output: Value::Bool(out),
            invalid,
        }
    }

    #[test]
    fn dedup_keeps_first_and_ignores_output() {
        let a = vec![tc("a", false, "m0", true), tc("b", false, "m0", true)];
        let b = vec![
            tc("a", false, "m1", false),
            tc("a", true, "m1", false),
            tc("c", false, "m1", true),
        ];
        let u = dedup_union([a.as_slice(), b.as_slice()]);
        let keys: Vec<(String, bool, String)> = u
            .iter()
            .map(|t| (t.inputs[0].to_string(), t.invalid, t.model_id.clone()))
            .collect();
        assert_eq!(
            keys,
            [
                ("\"a\"".into(), false, "m0".into()),
                ("\"b\"".into(), false, "m0".into()),
                ("\"a\"".into(), true, "m1".into()),
                ("\"c\"".into(), false, "m1".into()),
            ]
        );
        assert_eq!(filter_invalid(u.clone(), false).len(), 3);
        assert_eq!(filter_invalid(u, true).len(), 4);
    }

    fn arb_set() -> impl Strategy<Value = Vec<TestCase>> {
        proptest::collection::vec(("[ab]{0,2}", any::<bool>(), any::<bool>()), 0..8).prop_map(|v| {
            v.into_iter()
                .map(|(q, inv, out)| tc(&q, inv, "m", out))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn dedup_monotone_and_idempotent(sets in proptest::collection::vec(arb_set(), 1..5)) {
            let refs: Vec<&[TestCase]> = sets.iter().map(Vec::as_slice).collect();
            let mut prev = 0;
            for k in 1..=refs.len() {
                let u = dedup_union(refs[..k].iter().copied());
                prop_assert!(u.len() >= prev);
                prev = u.len();
                let again = dedup_union([u.as_slice()]);
                prop_assert_eq!(&again, &u);
            }
        }

        #[test]
        fn reconstruct_encode_round_trip(
            q in "[a-z.]{0,5}", rt in 0u32..7, name in "[a-z]{0,3}", rdata in "[a-z]{0,3}",
            out in any::<bool>(), flag in any::<bool>(),
        ) {
            let pad = |s: &str, w: usize| { let mut b = s.as_bytes().to_vec(); b.resize(w, 0); b };
            let kt = KTest::new(vec![
                obj("x0", &pad(&q, 6)),
                obj("x1", &rt.to_le_bytes()),
                obj("x2", &pad(&name, 4)),
                obj("x3", &pad(&rdata, 4)),
                obj("x4", &[u8::from(out)]),
                obj("x5", &[u8::from(flag)]),
            ]);
            let t = reconstruct(&dns_map(), &kt).unwrap();
            prop_assert_eq!(encode(&dns_map(), &t).unwrap(), kt.clone());
            let back = KTest::parse(&kt.to_bytes()).unwrap();
            prop_assert_eq!(reconstruct(&dns_map(), &back).unwrap(), t);
        }
    }
}
