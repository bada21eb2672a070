"""Records engine-style test files for the DNS DNAME fixture models.

No symbolic engine is needed: each synthesized model is compiled natively
against no-op engine intrinsics and run on a handful of inputs per model,
and the observed (inputs, result, validity) are written in the engine's
binary test format, the same objects a real run records.

Usage: dns_ktests.py <run-dir>    (a run made by `protomodel synth`)
"""
import random
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "dns_dname" / "ktests"
TYPES = ["A", "AAAA", "NS", "TXT", "CNAME", "DNAME", "SOA"]

KLEE_H = """#pragma once
static inline void klee_make_symbolic(void *p, unsigned long n, const char *name) { (void)p; (void)n; (void)name; }
static inline void klee_assume(unsigned long c) { (void)c; }
"""

DRIVER = r"""
#include <stdio.h>
#include <string.h>
int main(void) {
    char q[64], name[64], rdat[64];
    unsigned t;
    while (scanf("%63s %u %63s %63s", q, &t, name, rdat) == 4) {
        if (strcmp(q, "-") == 0) q[0] = 0;
        if (strcmp(name, "-") == 0) name[0] = 0;
        if (strcmp(rdat, "-") == 0) rdat[0] = 0;
        RR r;
        memset(&r, 0, sizeof r);
        r.rtyp = (RecordType)t;
        strcpy(r.name, name);
        strcpy(r.rdat, rdat);
        int ok = valid_query(q);
        int res = ok ? record_applies(q, r) : 0;
        printf("%d %d\n", ok, res);
    }
    return 0;
}
"""

QUERIES = ["a", "*", "a.a", "a.*", "*.a", "b.a", "a.b.a", "*.*", "a.a.a"]
BAD_QUERIES = ["", "ab", "a..", ".a"]
NAMES = ["*", "a", "a.a", "*.a", "b", "a.*", ""]
RDATS = ["a.a", "a", "b", ""]

# The input that exposes the wildcard-owner DNAME bug. Only models whose
# logic lets a one-label owner match a longer query would reach it.
WITNESS = ("a.*", "DNAME", "*", "a.a")


def ktest(objects):
    out = bytearray(b"KTEST")
    out += struct.pack(">I", 3)
    args = [b"/tmp/klee-out/model.bc"]
    out += struct.pack(">I", len(args))
    for a in args:
        out += struct.pack(">I", len(a)) + a
    out += struct.pack(">II", 0, 0)
    out += struct.pack(">I", len(objects))
    for name, data in objects:
        n = name.encode()
        out += struct.pack(">I", len(n)) + n
        out += struct.pack(">I", len(data)) + data
    return bytes(out)


def text(s, width):
    b = s.encode()
    assert len(b) < width
    return b + b"\0" * (width - len(b))


def run_model(model_c, cases):
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "klee").mkdir()
        (tmp / "klee" / "klee.h").write_text(KLEE_H)
        src = model_c.read_text().replace("int main(void) {", "int model_main(void) {", 1)
        (tmp / "prog.c").write_text(src + DRIVER)
        exe = tmp / "prog"
        subprocess.run(
            ["clang", "-w", "-O0", "-I", str(tmp), str(tmp / "prog.c"), "-o", str(exe)],
            check=True,
        )
        stdin = "".join(
            f"{q or '-'} {TYPES.index(t)} {n or '-'} {r or '-'}\n" for q, t, n, r in cases
        )
        out = subprocess.run([str(exe)], input=stdin, capture_output=True, text=True, check=True).stdout
    return [tuple(int(v) for v in line.split()) for line in out.splitlines()]


def main():
    run = Path(sys.argv[1])
    models = sorted(p for p in (run / "models").iterdir() if (p / "model.c").is_file())
    for m in models:
        idx = int(m.name.split("-")[1])
        rng = random.Random(1000 + idx)
        cases = []
        while len(cases) < 6:
            c = (rng.choice(QUERIES), rng.choice(TYPES), rng.choice(NAMES), rng.choice(RDATS))
            if c not in cases:
                cases.append(c)
        # Shared inputs, so different models rediscover the same tests.
        cases.append(("a.a", "DNAME", "a", "b"))
        cases.append(("a", "A", "a", "a"))
        cases.append((rng.choice(BAD_QUERIES), "A", "", ""))
        if idx in (0, 3, 8):
            cases.append(WITNESS)
        results = run_model(m / "model.c", cases)
        dest = OUT / m.name
        dest.mkdir(parents=True, exist_ok=True)
        for old in dest.glob("*.ktest"):
            old.unlink()
        for n, ((q, t, name, rdat), (ok, res)) in enumerate(zip(cases, results), start=1):
            objs = [
                ("model_version", struct.pack("<I", 1)),
                ("x0", text(q, 6)),
                ("x1", struct.pack("<I", TYPES.index(t))),
                ("x2", text(name, 6)),
                ("x3", text(rdat, 4)),
                ("x4", bytes([res])),
                ("x5", bytes([0 if ok else 1])),
            ]
            (dest / f"test{n:06d}.ktest").write_bytes(ktest(objs))


if __name__ == "__main__":
    main()
