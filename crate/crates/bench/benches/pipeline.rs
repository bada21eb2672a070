use std::collections::BTreeMap;
use std::fs;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use protomodel::diff::{majority_and_triage, Response};
use protomodel::harness::emit_harness;
use protomodel::manifest::Manifest;
use protomodel::prompt::render_user_prompt;
use protomodel::regex::{matches_bytes, parse_pattern};
use protomodel::symbex::ktest::KTest;
use protomodel::symbex::reconstruct;
use protomodel_bench::fixtures;

fn regex(c: &mut Criterion) {
    let re = parse_pattern(r"[a-z*](\.[a-z*])*").unwrap();
    let subjects: Vec<&[u8]> = vec![b"a.b.c.d.e.f", b"*.a", b"a..b", b"", b"abc"];
    c.bench_function("regex_match", |b| {
        b.iter(|| {
            subjects
                .iter()
                .filter(|s| matches_bytes(&re, black_box(s)))
                .count()
        })
    });
    c.bench_function("regex_parse", |b| {
        b.iter(|| parse_pattern(black_box(r"(ab|c[d-f]*)*\.x")).unwrap())
    });
}

fn planning(c: &mut Criterion) {
    let m = Manifest::load(&fixtures().join("bgp/manifest.json")).unwrap();
    let plan = m.plan().unwrap();
    let f = plan
        .function_modules()
        .into_iter()
        .find(|f| f.name == "isMatchPrefixListEntry")
        .unwrap();
    c.bench_function("plan_bgp", |b| b.iter(|| m.plan().unwrap()));
    c.bench_function("render_prompt", |b| b.iter(|| render_user_prompt(&plan, f)));
    c.bench_function("emit_harness", |b| b.iter(|| emit_harness(&plan)));
}

fn ktests(c: &mut Criterion) {
    let m = Manifest::load(&fixtures().join("dns_dname/manifest.json")).unwrap();
    let map = emit_harness(&m.plan().unwrap()).symbol_map;
    let bytes = fs::read(fixtures().join("dns_dname/ktests/model-000/test000001.ktest")).unwrap();
    c.bench_function("ktest_parse_reconstruct", |b| {
        b.iter(|| {
            let kt = KTest::parse(black_box(&bytes)).unwrap();
            reconstruct(&map, &kt).unwrap()
        })
    });
}

fn triage(c: &mut Criterion) {
    let mut responses = BTreeMap::new();
    for (i, v) in ["NOERROR", "NOERROR", "NOERROR", "NOERROR", "NXDOMAIN"]
        .iter()
        .enumerate()
    {
        responses.insert(
            format!("impl{i}"),
            Response::ok([("rcode", *v), ("answer", "a.test.")]),
        );
    }
    c.bench_function("triage_5", |b| {
        b.iter(|| majority_and_triage(black_box(&responses)).unwrap())
    });
}

criterion_group!(benches, regex, planning, ktests, triage);
criterion_main!(benches);
