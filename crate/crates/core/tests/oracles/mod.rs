#![allow(dead_code)]

pub mod cdriver;
pub mod graphs;
pub mod ktest;
pub mod regex;

use std::path::PathBuf;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
