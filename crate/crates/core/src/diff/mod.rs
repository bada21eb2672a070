//! Differential testing: run a suite against several implementations,
//! vote, and report disagreements.

pub mod config;
pub mod dns;
pub mod smtp;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::testcase::{TestCase, TestSuite};

/// One implementation's answer to one test, reduced to comparable fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Response {
    Ok {
        fields: BTreeMap<String, String>,
    },
    /// The implementation failed or returned something unparsable.
    Crash,
    Timeout,
    /// No stimulus could be built from the test.
    Untranslatable {
        reason: String,
    },
}

pub const STATUS_FIELD: &str = "status";

impl Response {
    pub fn ok<K: Into<String>, V: Into<String>>(fields: impl IntoIterator<Item = (K, V)>) -> Self {
        Response::Ok {
            fields: fields
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            Response::Ok { .. } => "OK",
            Response::Crash => "CRASH",
            Response::Timeout => "TIMEOUT",
            Response::Untranslatable { .. } => "UNTRANSLATABLE",
        }
    }

    pub fn fields(&self) -> Option<&BTreeMap<String, String>> {
        match self {
            Response::Ok { fields } => Some(fields),
            _ => None,
        }
    }
}

const ABSENT: &str = "<absent>";

/// Field-level differences between two responses, as (field, a, b).
/// Responses of different status differ only in the status field.
pub fn field_diffs(a: &Response, b: &Response) -> Vec<(String, String, String)> {
    match (a.fields(), b.fields()) {
        (Some(fa), Some(fb)) => {
            let keys: BTreeSet<&String> = fa.keys().chain(fb.keys()).collect();
            keys.into_iter()
                .filter_map(|k| {
                    let va = fa.get(k).map_or(ABSENT, String::as_str);
                    let vb = fb.get(k).map_or(ABSENT, String::as_str);
                    (va != vb).then(|| (k.clone(), va.to_string(), vb.to_string()))
                })
                .collect()
        }
        _ if a == b => Vec::new(),
        _ if a.status() == b.status() => {
            let (Response::Untranslatable { reason: ra }, Response::Untranslatable { reason: rb }) =
                (a, b)
            else {
                unreachable!("only untranslatable responses carry data besides status");
            };
            vec![("reason".into(), ra.clone(), rb.clone())]
        }
        _ => vec![(STATUS_FIELD.into(), a.status().into(), b.status().into())],
    }
}

/// Disagreement of one implementation with the majority.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriageTuple {
    pub adapter: String,
    pub field: String,
    pub observed: String,
    pub majority: String,
}

/// Field difference between two implementations when no majority exists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairDiff {
    pub left: String,
    pub right: String,
    pub field: String,
    pub left_value: String,
    pub right_value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestTriage {
    /// Adapters in the majority group; empty when there is no majority.
    pub majority: Vec<String>,
    pub tuples: Vec<TriageTuple>,
    pub no_majority: bool,
    pub pairwise: Vec<PairDiff>,
}

impl TestTriage {
    pub fn agrees(&self) -> bool {
        self.tuples.is_empty() && self.pairwise.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TriageError {
    #[error("need at least two responses, got {0}")]
    TooFew(usize),
}

/// Groups responses by equality. The largest group is the majority; a
/// tie for largest means no majority, and every differing pair is listed.
pub fn majority_and_triage(
    responses: &BTreeMap<String, Response>,
) -> Result<TestTriage, TriageError> {
    if responses.len() < 2 {
        return Err(TriageError::TooFew(responses.len()));
    }
    let mut groups: BTreeMap<&Response, Vec<&String>> = BTreeMap::new();
    for (id, r) in responses {
        groups.entry(r).or_default().push(id);
    }
    let best = groups.values().map(Vec::len).max().unwrap_or(0);
    let leaders: Vec<(&&Response, &Vec<&String>)> =
        groups.iter().filter(|(_, v)| v.len() == best).collect();
    if leaders.len() == 1 {
        let (maj, members) = leaders[0];
        let mut tuples = Vec::new();
        for (id, r) in responses {
            if r == *maj {
                continue;
            }
            for (field, observed, majority) in field_diffs(r, maj) {
                tuples.push(TriageTuple {
                    adapter: id.clone(),
                    field,
                    observed,
                    majority,
                });
            }
        }
        return Ok(TestTriage {
            majority: members.iter().map(|s| (*s).clone()).collect(),
            tuples,
            no_majority: false,
            pairwise: Vec::new(),
        });
    }
    let ids: Vec<&String> = responses.keys().collect();
    let mut pairwise = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            for (field, va, vb) in field_diffs(&responses[*a], &responses[*b]) {
                pairwise.push(PairDiff {
                    left: (*a).clone(),
                    right: (*b).clone(),
                    field,
                    left_value: va,
                    right_value: vb,
                });
            }
        }
    }
    Ok(TestTriage {
        majority: Vec::new(),
        tuples: Vec::new(),
        no_majority: true,
        pairwise,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterError {
    #[error("timed out")]
    Timeout,
    #[error("cannot translate test: {0}")]
    Untranslatable(String),
    #[error("{0}")]
    Failed(String),
}

/// One implementation under test.
pub trait Adapter: Send {
    fn id(&self) -> &str;
    /// Human-readable stimulus the test becomes for this implementation.
    fn translate(&self, test: &TestCase) -> Result<String, AdapterError>;
    /// Prepares the implementation for `test` (e.g. loads a zone).
    fn setup(&mut self, test: &TestCase) -> Result<(), AdapterError>;
    fn execute(&mut self, test: &TestCase) -> Result<Response, AdapterError>;
    /// Restores the implementation's initial state.
    fn teardown(&mut self) -> Result<(), AdapterError>;
}

fn as_response(e: AdapterError) -> Response {
    match e {
        AdapterError::Timeout => Response::Timeout,
        AdapterError::Untranslatable(reason) => Response::Untranslatable { reason },
        AdapterError::Failed(_) => Response::Crash,
    }
}

/// One adapter's run of one test. Failures become response values.
pub fn run_one(adapter: &mut dyn Adapter, test: &TestCase) -> Response {
    let r = adapter
        .setup(test)
        .and_then(|()| adapter.execute(test))
        .unwrap_or_else(|e| {
            log::debug!("{}: {e}", adapter.id());
            as_response(e)
        });
    if let Err(e) = adapter.teardown() {
        log::warn!("{}: teardown failed: {e}", adapter.id());
        if matches!(r, Response::Ok { .. }) {
            return Response::Crash;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SuiteError {
    #[error("no adapters configured")]
    NoAdapters,
    #[error("adapter id `{0}` used twice")]
    DuplicateId(String),
}

/// Runs every test on every adapter: adapters in parallel, tests within an
/// adapter in order. Result `i` maps adapter id to its response to test `i`.
pub fn run_suite(
    adapters: &mut [Box<dyn Adapter>],
    tests: &[TestCase],
) -> Result<Vec<BTreeMap<String, Response>>, SuiteError> {
    if adapters.is_empty() {
        return Err(SuiteError::NoAdapters);
    }
    let mut ids = BTreeSet::new();
    for a in adapters.iter() {
        if !ids.insert(a.id().to_string()) {
            return Err(SuiteError::DuplicateId(a.id().to_string()));
        }
    }
    if tests.is_empty() {
        log::warn!("test suite is empty");
        return Ok(Vec::new());
    }
    let columns: Vec<(String, Vec<Response>)> = std::thread::scope(|s| {
        let handles: Vec<_> = adapters
            .iter_mut()
            .map(|a| {
                s.spawn(move || {
                    let col = tests.iter().map(|t| run_one(a.as_mut(), t)).collect();
                    (a.id().to_string(), col)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("adapter thread panicked"))
            .collect()
    });
    let mut rows = vec![BTreeMap::new(); tests.len()];
    for (id, col) in columns {
        for (row, r) in rows.iter_mut().zip(col) {
            row.insert(id.clone(), r);
        }
    }
    Ok(rows)
}

pub const DEFAULT_WITNESS_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleGroup {
    pub tuple: TriageTuple,
    pub count: usize,
    /// Indices of witnessing tests, at most the cap.
    pub witnesses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairGroup {
    pub diff: PairDiff,
    pub count: usize,
    pub witnesses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageReport {
    pub adapters: Vec<String>,
    pub tests: usize,
    pub disagreeing_tests: usize,
    pub no_majority_tests: Vec<usize>,
    pub groups: Vec<TupleGroup>,
    pub pair_groups: Vec<PairGroup>,
}

impl TriageReport {
    pub fn has_findings(&self) -> bool {
        !self.groups.is_empty() || !self.pair_groups.is_empty()
    }
}

/// Collapses per-test triage into unique tuples with witnesses. Groups are
/// ordered by descending count, then by tuple.
pub fn aggregate(adapters: Vec<String>, per_test: &[TestTriage], cap: usize) -> TriageReport {
    let mut groups: BTreeMap<&TriageTuple, (usize, Vec<usize>)> = BTreeMap::new();
    let mut pairs: BTreeMap<&PairDiff, (usize, Vec<usize>)> = BTreeMap::new();
    let mut disagreeing = 0;
    let mut no_majority_tests = Vec::new();
    for (i, t) in per_test.iter().enumerate() {
        if !t.agrees() {
            disagreeing += 1;
        }
        if t.no_majority {
            no_majority_tests.push(i);
        }
        for tup in t.tuples.iter().collect::<BTreeSet<_>>() {
            let g = groups.entry(tup).or_default();
            g.0 += 1;
            if g.1.len() < cap {
                g.1.push(i);
            }
        }
        for d in t.pairwise.iter().collect::<BTreeSet<_>>() {
            let g = pairs.entry(d).or_default();
            g.0 += 1;
            if g.1.len() < cap {
                g.1.push(i);
            }
        }
    }
    let mut groups: Vec<TupleGroup> = groups
        .into_iter()
        .map(|(t, (count, witnesses))| TupleGroup {
            tuple: t.clone(),
            count,
            witnesses,
        })
        .collect();
    groups.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.tuple.cmp(&b.tuple)));
    let mut pair_groups: Vec<PairGroup> = pairs
        .into_iter()
        .map(|(d, (count, witnesses))| PairGroup {
            diff: d.clone(),
            count,
            witnesses,
        })
        .collect();
    pair_groups.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.diff.cmp(&b.diff)));
    TriageReport {
        adapters,
        tests: per_test.len(),
        disagreeing_tests: disagreeing,
        no_majority_tests,
        groups,
        pair_groups,
    }
}

/// Triages every row; rows with fewer than two responses are skipped.
pub fn triage_all(rows: &[BTreeMap<String, Response>]) -> Vec<TestTriage> {
    rows.iter()
        .map(|r| {
            majority_and_triage(r).unwrap_or(TestTriage {
                majority: r.keys().cloned().collect(),
                tuples: Vec::new(),
                no_majority: false,
                pairwise: Vec::new(),
            })
        })
        .collect()
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', "<br>")
}

fn witness_line(suite: &TestSuite, i: usize) -> String {
    let Some(t) = suite.tests.get(i) else {
        return format!("- test {i}\n");
    };
    let inputs: Vec<String> = suite
        .input_args()
        .iter()
        .zip(&t.inputs)
        .map(|(a, v)| format!("{}={}", a.name, v))
        .collect();
    format!("- test {i}: `{}`\n", inputs.join(", "))
}

/// Human-readable report.
pub fn render_markdown(report: &TriageReport, suite: &TestSuite) -> String {
    let mut s = String::from("# Differential testing report\n\n");
    let _ = writeln!(s, "Implementations: {}", report.adapters.join(", "));
    let _ = writeln!(s, "Tests run: {}", report.tests);
    let _ = writeln!(s, "Tests with disagreement: {}", report.disagreeing_tests);
    let _ = writeln!(
        s,
        "Tests without a majority: {}\n",
        report.no_majority_tests.len()
    );
    if !report.has_findings() {
        s.push_str("All implementations agree on every test.\n");
        return s;
    }
    if !report.groups.is_empty() {
        s.push_str("## Disagreements with the majority\n\n");
        s.push_str(
            "| implementation | field | observed | majority | tests |\n|---|---|---|---|---|\n",
        );
        for g in &report.groups {
            let t = &g.tuple;
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                md_cell(&t.adapter),
                md_cell(&t.field),
                md_cell(&t.observed),
                md_cell(&t.majority),
                g.count
            );
        }
        for (n, g) in report.groups.iter().enumerate() {
            let _ = writeln!(
                s,
                "\n### Tuple {} ({}, {})\n",
                n + 1,
                g.tuple.adapter,
                g.tuple.field
            );
            for &w in &g.witnesses {
                s.push_str(&witness_line(suite, w));
            }
            if g.count > g.witnesses.len() {
                let _ = writeln!(s, "- ... and {} more", g.count - g.witnesses.len());
            }
        }
        s.push('\n');
    }
    if !report.pair_groups.is_empty() {
        s.push_str("## Disagreements without a majority\n\n");
        s.push_str("| left | right | field | left value | right value | tests |\n|---|---|---|---|---|---|\n");
        for g in &report.pair_groups {
            let d = &g.diff;
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                md_cell(&d.left),
                md_cell(&d.right),
                md_cell(&d.field),
                md_cell(&d.left_value),
                md_cell(&d.right_value),
                g.count
            );
        }
        for (n, g) in report.pair_groups.iter().enumerate() {
            let d = &g.diff;
            let _ = writeln!(
                s,
                "\n### Pair {} ({} vs {}, {})\n",
                n + 1,
                d.left,
                d.right,
                d.field
            );
            for &w in &g.witnesses {
                s.push_str(&witness_line(suite, w));
            }
            if g.count > g.witnesses.len() {
                let _ = writeln!(s, "- ... and {} more", g.count - g.witnesses.len());
            }
        }
    }
    s
}
