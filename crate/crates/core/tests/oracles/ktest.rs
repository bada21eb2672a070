//! Minimal reader for the engine's binary test format, written from the
//! format description only.

fn be32(b: &[u8], at: &mut usize) -> Option<u32> {
    let v = u32::from_be_bytes(b.get(*at..*at + 4)?.try_into().ok()?);
    *at += 4;
    Some(v)
}

fn chunk<'a>(b: &'a [u8], at: &mut usize) -> Option<&'a [u8]> {
    let n = be32(b, at)? as usize;
    let s = b.get(*at..*at + n)?;
    *at += n;
    Some(s)
}

/// Objects as (name, bytes), or `None` on any malformation.
pub fn objects(b: &[u8]) -> Option<Vec<(String, Vec<u8>)>> {
    if b.get(..5)? != b"KTEST" {
        return None;
    }
    let mut at = 5;
    let _version = be32(b, &mut at)?;
    for _ in 0..be32(b, &mut at)? {
        chunk(b, &mut at)?;
    }
    let _sym_argvs = be32(b, &mut at)?;
    let _sym_argv_len = be32(b, &mut at)?;
    let n = be32(b, &mut at)?;
    let mut out = Vec::new();
    for _ in 0..n {
        let name = String::from_utf8(chunk(b, &mut at)?.to_vec()).ok()?;
        out.push((name, chunk(b, &mut at)?.to_vec()));
    }
    (at == b.len()).then_some(out)
}
