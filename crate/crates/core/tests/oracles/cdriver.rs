//! Native driver for the embedded C matcher.

use std::io::Write;
use std::process::{Command, Stdio};

use protomodel::harness::REGEX_RUNTIME;
use protomodel::regex::{emit_constructors, parse_pattern};

pub fn compiler() -> Option<&'static str> {
    ["cc", "clang", "gcc"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

fn program(patterns: &[String]) -> Result<String, String> {
    let mut src = String::from("#include <stdio.h>\n#include <string.h>\n#include <stdbool.h>\n");
    src += REGEX_RUNTIME;
    for (i, p) in patterns.iter().enumerate() {
        let ast = parse_pattern(p).map_err(|e| format!("{p}: {e}"))?;
        let e = emit_constructors(&ast, "s", "r");
        src += &format!("static int pat{i}(const char* s) {{\n{}}}\n", e.statements);
    }
    src += "int main(void) {\n    char line[64];\n    while (fgets(line, sizeof line, stdin)) {\n";
    src += "        line[strcspn(line, \"\\n\")] = 0;\n";
    for i in 0..patterns.len() {
        src += &format!("        putchar(pat{i}(line) ? '1' : '0');\n");
    }
    src += "        putchar('\\n');\n    }\n    return 0;\n}\n";
    Ok(src)
}

/// `result[s][p]`: whether the C matcher accepts subject `s` under
/// pattern `p`. Subjects must not contain newlines.
pub fn run(cc: &str, patterns: &[String], subjects: &[Vec<u8>]) -> Result<Vec<Vec<bool>>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = dir.path().join("m.c");
    let exe = dir.path().join("m");
    std::fs::write(&src, program(patterns)?).map_err(|e| e.to_string())?;
    let out = Command::new(cc)
        .arg("-w")
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let mut input = Vec::new();
    for s in subjects {
        input.extend_from_slice(s);
        input.push(b'\n');
    }
    let mut child = Command::new(&exe)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut stdin = child.stdin.take().expect("piped");
    let writer = std::thread::spawn(move || stdin.write_all(&input));
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    writer.join().expect("writer").map_err(|e| e.to_string())?;
    let rows: Vec<Vec<bool>> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| l.bytes().map(|b| b == b'1').collect())
        .collect();
    if rows.len() != subjects.len() {
        return Err(format!(
            "driver printed {} rows for {} subjects",
            rows.len(),
            subjects.len()
        ));
    }
    Ok(rows)
}
