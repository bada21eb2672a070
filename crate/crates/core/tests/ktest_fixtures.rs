mod oracles;

use std::fs;
use std::path::PathBuf;

use oracles::fixtures;
use protomodel::harness::emit_harness;
use protomodel::manifest::Manifest;
use protomodel::symbex::ktest::KTest;
use protomodel::symbex::{dedup_union, encode, reconstruct};

fn ktest_files() -> Vec<PathBuf> {
    let mut out = Vec::new();
    for model in fs::read_dir(fixtures().join("dns_dname/ktests")).unwrap() {
        for f in fs::read_dir(model.unwrap().path()).unwrap() {
            out.push(f.unwrap().path());
        }
    }
    out.sort();
    out
}

#[test]
fn parse_serialize_round_trip() {
    let files = ktest_files();
    assert!(files.len() >= 50);
    for f in files {
        let bytes = fs::read(&f).unwrap();
        let kt = KTest::parse(&bytes).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert_eq!(kt.to_bytes(), bytes, "{}", f.display());
        let theirs = oracles::ktest::objects(&bytes).unwrap();
        let ours: Vec<(String, Vec<u8>)> = kt
            .objects
            .iter()
            .map(|o| (o.name.clone(), o.bytes.clone()))
            .collect();
        assert_eq!(ours, theirs, "{}", f.display());
    }
}

#[test]
fn reconstruct_then_encode_is_identity() {
    let m = Manifest::load(&fixtures().join("dns_dname/manifest.json")).unwrap();
    let map = emit_harness(&m.plan().unwrap()).symbol_map;
    let mut saw_invalid = false;
    for f in ktest_files() {
        let kt = KTest::read(&f).unwrap();
        let tc = reconstruct(&map, &kt).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        saw_invalid |= tc.invalid;
        let back = encode(&map, &tc).unwrap();
        for o in &back.objects {
            assert_eq!(Some(o), kt.object(&o.name), "{} {}", f.display(), o.name);
        }
        // The runtime's own object is not a model slot.
        assert!(kt.object("model_version").is_some());
        assert!(back.object("model_version").is_none());
    }
    assert!(saw_invalid);
}

#[test]
fn fixture_union_is_smaller_than_the_sum() {
    let m = Manifest::load(&fixtures().join("dns_dname/manifest.json")).unwrap();
    let map = emit_harness(&m.plan().unwrap()).symbol_map;
    let per_model: Vec<Vec<_>> = fs::read_dir(fixtures().join("dns_dname/ktests"))
        .unwrap()
        .map(|d| {
            let mut files: Vec<_> = fs::read_dir(d.unwrap().path())
                .unwrap()
                .map(|f| f.unwrap().path())
                .collect();
            files.sort();
            files
                .iter()
                .map(|f| reconstruct(&map, &KTest::read(f).unwrap()).unwrap())
                .collect()
        })
        .collect();
    let sum: usize = per_model.iter().map(Vec::len).sum();
    let union = dedup_union(per_model.iter().map(Vec::as_slice));
    assert!(union.len() < sum);
    assert_eq!(dedup_union([union.as_slice()]), union);
}
