//! Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exits non-zero
//! if any criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use oracles::{fixtures, graphs, regex as oracle};
use protomodel::diff::{majority_and_triage, Response, TriageTuple};
use protomodel::graph::{build_graph, ArgSpec, FunctionModule, GraphError, ProtocolModule};
use protomodel::harness::emit_harness;
use protomodel::llm::CompletionBackend;
use protomodel::manifest::Manifest;
use protomodel::pipeline;
use protomodel::prompt::{render_user_prompt, PromptAssets, SYSTEM_PROMPT};
use protomodel::regex::{matches_bytes, parse_pattern};
use protomodel::state::{input_prefix, parse_transition_dict, PrefixError};
use protomodel::symbex::engine::{Engine, EngineConfig};
use protomodel::symbex::ktest::KTest;
use protomodel::symbex::{dedup_union, encode, filter_invalid, reconstruct};
use protomodel::testcase::TestCase;
use protomodel::SemanticType;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const PROMPT_BUDGET: Duration = Duration::from_secs(1);
const REGEX_BUDGET: Duration = Duration::from_secs(30);
const E2E_BUDGET: Duration = Duration::from_secs(60);
const MATCHER_BUDGET: Duration = Duration::from_secs(60);
const ENGINE_SECS: u64 = 300;
const MIN_PATTERNS: usize = 20;
const SUBJECT_LEN: usize = 6;
const ALPHABET: &[u8] = b"ab.*";
const BFS_GRAPHS: usize = 100;
const DAGS: usize = 500;
const DAG_MAX_NODES: usize = 20;
const SEED: u64 = 0x5eed;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::*;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn verdict(r: Result<String, String>) -> Verdict {
    match r {
        Ok(d) => Pass(d),
        Err(e) => Fail(e),
    }
}

fn load(rel: &str) -> Result<Manifest, String> {
    Manifest::load(&fixtures().join(rel)).map_err(|e| format!("{rel}: {e}"))
}

fn golden(rel: &str, actual: &str) -> Result<(), String> {
    let want = fs::read_to_string(fixtures().join(rel)).map_err(|e| format!("{rel}: {e}"))?;
    if want == actual {
        return Ok(());
    }
    let at = want
        .bytes()
        .zip(actual.bytes())
        .position(|(a, b)| a != b)
        .unwrap_or(want.len().min(actual.len()));
    Err(format!("{rel} differs from byte {at}"))
}

fn prompt_goldens() -> Result<String, String> {
    let start = Instant::now();
    let cases = [
        (
            "dns_record/manifest.json",
            "record_applies",
            "goldens/dns_record_applies.txt",
        ),
        (
            "smtp/manifest.json",
            "smtp_server_resp",
            "goldens/smtp_server_resp.txt",
        ),
        (
            "bgp/manifest.json",
            "isMatchPrefixListEntry",
            "goldens/bgp_isMatchPrefixListEntry.txt",
        ),
    ];
    for (manifest, module, gold) in cases {
        let plan = load(manifest)?.plan().map_err(|e| e.to_string())?;
        let f = plan
            .function_modules()
            .into_iter()
            .find(|f| f.name == module)
            .ok_or_else(|| format!("{manifest}: no module {module}"))?;
        golden(gold, &render_user_prompt(&plan, f))?;
    }
    let t = start.elapsed();
    ensure(t < PROMPT_BUDGET, || format!("took {t:?}"))?;
    Ok(format!("3 goldens, 0-byte diff, {t:?}"))
}

fn system_prompt() -> Result<String, String> {
    let phrases = [
        "Do NOT add a `main()` function",
        "DO NOT USE fenced code blocks",
        "DO NOT USE C strtok function",
    ];
    ensure(PromptAssets::default().system == SYSTEM_PROMPT, || {
        "default assets differ from the embedded prompt".into()
    })?;
    for p in phrases {
        ensure(SYSTEM_PROMPT.contains(p), || format!("missing {p:?}"))?;
    }
    Ok("3 phrases present".into())
}

fn regex_oracle() -> Result<String, String> {
    let start = Instant::now();
    let text =
        fs::read_to_string(fixtures().join("regex/patterns.txt")).map_err(|e| e.to_string())?;
    let patterns: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    ensure(patterns.len() >= MIN_PATTERNS, || {
        format!("only {} patterns", patterns.len())
    })?;
    for required in [r"[a-z*](\.[a-z*])*", "[a-z]*"] {
        ensure(patterns.contains(&required), || {
            format!("corpus lacks {required}")
        })?;
    }
    let subjects = oracle::all_subjects(ALPHABET, SUBJECT_LEN);
    let mut mismatches = 0usize;
    let mut first = None;
    for p in &patterns {
        let ours = parse_pattern(p).map_err(|e| format!("{p}: {e}"))?;
        let theirs = oracle::parse(p).ok_or_else(|| format!("oracle rejects {p}"))?;
        for s in &subjects {
            if matches_bytes(&ours, s) != oracle::full_match(&theirs, s) {
                mismatches += 1;
                first.get_or_insert_with(|| format!("{p} on {:?}", String::from_utf8_lossy(s)));
            }
        }
    }
    ensure(mismatches == 0, || {
        format!(
            "{mismatches} mismatches, first {}",
            first.unwrap_or_default()
        )
    })?;
    let t = start.elapsed();
    ensure(t < REGEX_BUDGET, || format!("took {t:?}"))?;
    Ok(format!(
        "{} patterns x {} subjects, 0 mismatches, {t:?}",
        patterns.len(),
        subjects.len()
    ))
}

fn harness_golden() -> Result<String, String> {
    let plan = load("dns_dname/manifest.json")?
        .plan()
        .map_err(|e| e.to_string())?;
    let h = emit_harness(&plan);
    golden("goldens/dns_dname_harness.c", &h.main_text)?;
    let t = &h.main_text;
    for needle in [
        "    char x0[6];\n",
        "klee_make_symbolic(&x0, sizeof(x0), \"x0\");",
        "    if (valid_query(x0)) {\n        bad_input = false;\n",
        "    else {\n        bad_input = true;\n        result_tmp = false;\n    }\n",
        "    klee_assume(result_tmp == x4);\n    klee_assume(bad_input == x5);\n    return 0;\n}",
    ] {
        ensure(t.contains(needle), || format!("harness lacks {needle:?}"))?;
    }
    Ok("0-byte diff".into())
}

/// Fixture test files per model, in model then file order.
fn fixture_ktests() -> Result<Vec<(String, Vec<(String, Vec<u8>)>)>, String> {
    let root = fixtures().join("dns_dname/ktests");
    let mut models: Vec<_> = fs::read_dir(&root)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    models.sort();
    let mut out = Vec::new();
    for m in models {
        let mut files: Vec<_> = fs::read_dir(&m)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        files.sort();
        let mut v = Vec::new();
        for f in files {
            let name = f
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            v.push((name, fs::read(&f).map_err(|e| e.to_string())?));
        }
        out.push((
            m.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            v,
        ));
    }
    Ok(out)
}

fn ktest_round_trip() -> Result<String, String> {
    let plan = load("dns_dname/manifest.json")?
        .plan()
        .map_err(|e| e.to_string())?;
    let map = emit_harness(&plan).symbol_map;
    let mut n = 0;
    for (model, files) in fixture_ktests()? {
        for (name, bytes) in files {
            let at = || format!("{model}/{name}");
            let kt = KTest::parse(&bytes).map_err(|e| format!("{}: {e}", at()))?;
            let again = KTest::parse(&kt.to_bytes()).map_err(|e| format!("{}: {e}", at()))?;
            ensure(again == kt && kt.to_bytes() == bytes, || {
                format!("{}: round trip differs", at())
            })?;
            let theirs = oracles::ktest::objects(&bytes)
                .ok_or_else(|| format!("{}: oracle reader rejects", at()))?;
            ensure(
                theirs.len() == kt.objects.len()
                    && theirs
                        .iter()
                        .zip(&kt.objects)
                        .all(|((n, b), o)| *n == o.name && *b == o.bytes),
                || format!("{}: objects differ from the reference reader", at()),
            )?;
            let tc = reconstruct(&map, &kt).map_err(|e| format!("{}: {e}", at()))?;
            let back = encode(&map, &tc).map_err(|e| format!("{}: {e}", at()))?;
            for o in &back.objects {
                ensure(kt.object(&o.name) == Some(o), || {
                    format!("{}: {} re-encodes differently", at(), o.name)
                })?;
            }
            n += 1;
        }
    }
    ensure(n > 0, || "no fixture files".into())?;
    Ok(format!("{n} files"))
}

fn dedup_monotone() -> Result<String, String> {
    let plan = load("dns_dname/manifest.json")?
        .plan()
        .map_err(|e| e.to_string())?;
    let map = emit_harness(&plan).symbol_map;
    let mut per_model: Vec<Vec<TestCase>> = Vec::new();
    for (_, files) in fixture_ktests()? {
        let mut v = Vec::new();
        for (name, bytes) in files {
            let kt = KTest::parse(&bytes).map_err(|e| format!("{name}: {e}"))?;
            v.push(reconstruct(&map, &kt).map_err(|e| format!("{name}: {e}"))?);
        }
        per_model.push(v);
    }
    let mut counts = Vec::new();
    for k in 1..=per_model.len() {
        for keep_invalid in [true, false] {
            let u = dedup_union(per_model[..k].iter().map(Vec::as_slice));
            let again = dedup_union([u.as_slice()]);
            ensure(again == u, || {
                format!("re-dedup changed the union at k={k}")
            })?;
            let u = filter_invalid(u, keep_invalid);
            if !keep_invalid {
                counts.push(u.len());
            }
        }
    }
    ensure(counts.windows(2).all(|w| w[0] <= w[1]), || {
        format!("not monotone: {counts:?}")
    })?;
    Ok(format!("unique valid tests by k: {counts:?}"))
}

fn rcode(v: &str) -> Response {
    Response::ok([("rcode", v)])
}

fn triage() -> Result<String, String> {
    let mut four_one = BTreeMap::new();
    for id in ["bind", "knot", "nsd", "powerdns"] {
        four_one.insert(id.to_string(), rcode("NOERROR"));
    }
    four_one.insert("coredns".to_string(), rcode("NXDOMAIN"));
    let t = majority_and_triage(&four_one).map_err(|e| e.to_string())?;
    let want = vec![TriageTuple {
        adapter: "coredns".into(),
        field: "rcode".into(),
        observed: "NXDOMAIN".into(),
        majority: "NOERROR".into(),
    }];
    ensure(t.tuples == want && !t.no_majority, || {
        format!("4-1 split gave {:?}", t.tuples)
    })?;

    let agree: BTreeMap<String, Response> = ["a", "b", "c"]
        .iter()
        .map(|id| (id.to_string(), rcode("NOERROR")))
        .collect();
    let t = majority_and_triage(&agree).map_err(|e| e.to_string())?;
    ensure(t.tuples.is_empty() && !t.no_majority, || {
        format!("all-agree gave {:?}", t.tuples)
    })?;

    let split: BTreeMap<String, Response> = [
        ("a", "NOERROR"),
        ("b", "NOERROR"),
        ("c", "NXDOMAIN"),
        ("d", "NXDOMAIN"),
    ]
    .iter()
    .map(|(id, r)| (id.to_string(), rcode(r)))
    .collect();
    let t = majority_and_triage(&split).map_err(|e| e.to_string())?;
    ensure(t.no_majority && t.tuples.is_empty(), || {
        "2-2 split not flagged no-majority".into()
    })?;
    Ok("4-1, all-agree and 2-2 exact".into())
}

const SMTP_DICT: &str = r#"state_transitions = {
    ("INITIAL", "HELO"): "HELO_SENT",
    ("INITIAL", "EHLO"): "EHLO_SENT",
    ("HELO_SENT", "MAIL FROM:"): "MAIL_FROM_RECEIVED",
    ("EHLO_SENT", "MAIL FROM:"): "MAIL_FROM_RECEIVED",
    ("MAIL_FROM_RECEIVED", "RCPT TO:"):
    "RCPT_TO_RECEIVED",
    ("RCPT_TO_RECEIVED", "DATA"): "DATA_RECEIVED",
    ("HELO_SENT", "QUIT"): "QUITTED",
    ("EHLO_SENT", "QUIT"): "QUITTED",
    ("MAIL_FROM_RECEIVED", "QUIT"): "QUITTED",
    ("RCPT_TO_RECEIVED", "QUIT"): "QUITTED",
    ("DATA_RECEIVED", "QUIT"): "QUITTED",
}"#;

fn bfs() -> Result<String, String> {
    let g = parse_transition_dict(SMTP_DICT, None).map_err(|e| e.to_string())?;
    let p = input_prefix(&g, "DATA_RECEIVED").map_err(|e| e.to_string())?;
    ensure(p == ["HELO", "MAIL FROM:", "RCPT TO:", "DATA"], || {
        format!("DATA_RECEIVED prefix {p:?}")
    })?;
    let p = input_prefix(&g, "INITIAL").map_err(|e| e.to_string())?;
    ensure(p.is_empty(), || format!("INITIAL prefix {p:?}"))?;

    let mut rng = StdRng::seed_from_u64(SEED);
    let mut checked = 0;
    for _ in 0..BFS_GRAPHS {
        let n = rng.gen_range(1..=12);
        let m = rng.gen_range(0..=3 * n);
        let edges: Vec<(usize, usize, usize)> = (0..m)
            .map(|_| {
                (
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..4),
                )
            })
            .collect();
        let g = graphs::state_graph(n, &edges);
        let d = graphs::apsp(&g);
        for (j, s) in g.states.iter().enumerate() {
            match input_prefix(&g, s) {
                Ok(p) => {
                    ensure(p.len() == d[0][j], || {
                        format!("{s}: prefix length {} vs shortest {}", p.len(), d[0][j])
                    })?;
                    ensure(graphs::walk(&g, &p) == Some(s.as_str()), || {
                        format!("{s}: prefix {p:?} ends elsewhere")
                    })?;
                }
                Err(PrefixError::Unreachable(_)) => ensure(d[0][j] == graphs::UNREACHABLE, || {
                    format!("{s} reported unreachable")
                })?,
                Err(e) => return Err(e.to_string()),
            }
            checked += 1;
        }
    }
    Ok(format!(
        "fixed prefixes exact; {BFS_GRAPHS} random graphs, {checked} targets minimal"
    ))
}

fn bool_module(i: usize) -> ProtocolModule {
    FunctionModule::new(
        format!("m{i}"),
        format!("Module {i}."),
        vec![
            ArgSpec::new("x", SemanticType::Boolean, "Input."),
            ArgSpec::new("result", SemanticType::Boolean, "Output."),
        ],
    )
    .into()
}

fn grouped(edges: &[(usize, usize)]) -> Vec<(String, Vec<String>)> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for &(a, b) in edges {
        out.entry(format!("m{a}"))
            .or_default()
            .push(format!("m{b}"));
    }
    out.into_iter().collect()
}

fn named(edges: &[(usize, usize)]) -> Vec<(String, String)> {
    edges
        .iter()
        .map(|&(a, b)| (format!("m{a}"), format!("m{b}")))
        .collect()
}

fn graph_properties() -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut cycles = 0;
    for i in 0..DAGS {
        let n = rng.gen_range(1..=DAG_MAX_NODES);
        let m = rng.gen_range(0..=2 * n);
        let raw: Vec<(usize, usize)> = (0..m)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        let mut edges = graphs::dag_edges(&raw, n);
        let g = build_graph((0..n).map(bool_module).collect(), vec![], grouped(&edges))
            .map_err(|e| format!("DAG {i}: {e}"))?;
        let order = g.topo_order().map_err(|e| format!("DAG {i}: {e}"))?;
        ensure(
            order.len() == n && graphs::respects(&order, &named(&edges)),
            || format!("DAG {i}: order {order:?}"),
        )?;
        if let Some(&(a, b)) = edges.first() {
            edges.push((b, a));
            match build_graph((0..n).map(bool_module).collect(), vec![], grouped(&edges)) {
                Err(GraphError::Cycle { path, .. }) if graphs::is_cycle(&path, &named(&edges)) => {
                    cycles += 1
                }
                Err(e) => return Err(format!("DAG {i} + back edge: {e}")),
                Ok(_) => return Err(format!("DAG {i} + back edge accepted")),
            }
        }
    }
    Ok(format!(
        "{DAGS} DAGs ordered, {cycles} injected cycles named"
    ))
}

fn end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_protomodel");
    let ws = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ws_s = ws.path().to_str().ok_or("non-UTF-8 temp dir")?;
    let manifest = fixtures().join("dns_dname/manifest.json");
    let adapters = fixtures().join("dns_dname/adapters.json");
    let steps: [(&[&str], i32); 3] = [
        (
            &[
                "synth",
                "--manifest",
                manifest.to_str().unwrap_or_default(),
                "--out",
                ws_s,
            ],
            0,
        ),
        (&["gen-tests", "--workspace", ws_s], 0),
        (
            &[
                "difftest",
                "--workspace",
                ws_s,
                "--adapters",
                adapters.to_str().unwrap_or_default(),
            ],
            1,
        ),
    ];
    let mut triage_texts = Vec::new();
    for round in 0..2 {
        for (args, want) in &steps {
            let o = Command::new(bin)
                .args(*args)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(o.status.code() == Some(*want), || {
                format!(
                    "{} exited {:?}: {}",
                    args[0],
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr)
                )
            })?;
        }
        let latest = fs::read_to_string(ws.path().join("LATEST")).map_err(|e| e.to_string())?;
        let run = ws.path().join(latest.trim());
        triage_texts.push(
            fs::read_to_string(run.join("triage.json"))
                .map_err(|e| format!("round {round}: {e}"))?,
        );
    }
    ensure(triage_texts[0] == triage_texts[1], || {
        "triage differs between identical runs".into()
    })?;
    let report: serde_json::Value =
        serde_json::from_str(&triage_texts[0]).map_err(|e| e.to_string())?;
    let names_bug = |g: &serde_json::Value| {
        let s = g.to_string();
        s.contains("\"dname_owner_bug\"") && s.contains("\"answer\"")
    };
    let groups = report["groups"].as_array().cloned().unwrap_or_default();
    let pairs = report["pair_groups"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    let hit = groups.iter().any(names_bug) || pairs.iter().any(names_bug);
    ensure(hit, || {
        format!("no finding names dname_owner_bug/answer: {report}")
    })?;
    let t = start.elapsed();
    ensure(t < E2E_BUDGET, || format!("took {t:?}"))?;
    Ok(format!(
        "{} tuple groups, {} pairwise groups, deterministic over 2 runs, {t:?}",
        groups.len(),
        pairs.len()
    ))
}

fn engine_available() -> Option<Engine> {
    let container = Engine::default();
    if container.check().is_ok() {
        return Some(container);
    }
    let local = Engine::Local {
        klee: "klee".into(),
        clang: "clang".into(),
        include_dir: None,
    };
    local.check().is_ok().then_some(local)
}

fn real_engine() -> Verdict {
    let Some(engine) = engine_available() else {
        return Skip("no engine container runtime or local engine".into());
    };
    let r = (|| {
        let mut m = load("dns_dname/manifest.json")?;
        m.generation.k = 1;
        let plan = m.plan().map_err(|e| e.to_string())?;
        let backend = CompletionBackend::Stub {
            dir: fixtures().join("dns_dname/stubs"),
        };
        let report = pipeline::synthesize(
            &plan,
            &backend,
            &m.generation,
            0,
            &PromptAssets::default(),
            &m.harness,
        )
        .map_err(|e| e.to_string())?;
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = EngineConfig {
            max_time_secs: ENGINE_SECS,
            ..EngineConfig::default()
        };
        let outcomes = pipeline::run_models(&engine, &report.models, work.path(), &cfg);
        if let Some(e) = outcomes.iter().find_map(|o| o.error.clone()) {
            return Err(e);
        }
        let valid = pipeline::merge(&plan, &outcomes, false).tests.len();
        ensure(valid >= 1, || "no type-valid test".into())?;
        Ok(format!("{valid} valid tests"))
    })();
    verdict(r)
}

fn matcher_cross_validation() -> Verdict {
    let Some(cc) = oracles::cdriver::compiler() else {
        return Skip("no C compiler".into());
    };
    let r = (|| {
        let start = Instant::now();
        let text =
            fs::read_to_string(fixtures().join("regex/patterns.txt")).map_err(|e| e.to_string())?;
        let patterns: Vec<String> = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let subjects = oracle::all_subjects(ALPHABET, SUBJECT_LEN);
        let rows = oracles::cdriver::run(cc, &patterns, &subjects)?;
        let asts = patterns
            .iter()
            .map(|p| parse_pattern(p).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut mismatches = 0;
        for (s, row) in subjects.iter().zip(&rows) {
            for (ast, &c) in asts.iter().zip(row) {
                mismatches += usize::from(matches_bytes(ast, s) != c);
            }
        }
        ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
        let t = start.elapsed();
        ensure(t < MATCHER_BUDGET, || format!("took {t:?}"))?;
        Ok(format!(
            "{} patterns x {} subjects, 0 mismatches, {t:?}",
            patterns.len(),
            subjects.len()
        ))
    })();
    verdict(r)
}

fn main() {
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Verdict>)> = vec![
        (
            "PRIMARY",
            "prompt goldens",
            Box::new(|| verdict(prompt_goldens())),
        ),
        (
            "PRIMARY",
            "system prompt phrases",
            Box::new(|| verdict(system_prompt())),
        ),
        (
            "PRIMARY",
            "regex oracle equivalence",
            Box::new(|| verdict(regex_oracle())),
        ),
        (
            "PRIMARY",
            "harness golden",
            Box::new(|| verdict(harness_golden())),
        ),
        (
            "PRIMARY",
            "test-file round trip",
            Box::new(|| verdict(ktest_round_trip())),
        ),
        (
            "PRIMARY",
            "dedup monotonicity",
            Box::new(|| verdict(dedup_monotone())),
        ),
        ("PRIMARY", "triage tuples", Box::new(|| verdict(triage()))),
        ("PRIMARY", "BFS driving", Box::new(|| verdict(bfs()))),
        (
            "PRIMARY",
            "graph properties",
            Box::new(|| verdict(graph_properties())),
        ),
        (
            "PRIMARY",
            "end-to-end DNS DNAME",
            Box::new(|| verdict(end_to_end())),
        ),
        (
            "PRIMARY, optional",
            "real engine on the DNAME model",
            Box::new(real_engine),
        ),
        (
            "SECONDARY",
            "C matcher cross-validation",
            Box::new(matcher_cross_validation),
        ),
    ];
    let mut failed = 0;
    for (tier, name, check) in &criteria {
        match check() {
            Pass(d) => println!("PASS [{tier}] {name}: {d}"),
            Skip(d) => println!("SKIP [{tier}] {name}: {d}"),
            Fail(d) => {
                failed += 1;
                println!("FAIL [{tier}] {name}: {d}");
            }
        }
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
