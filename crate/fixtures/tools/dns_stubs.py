"""Writes the canned completions for the DNS DNAME fixture.

File names come from `protomodel stub-keys`, so rerun this after any
change to prompt rendering.
"""
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent.parent / "dns_dname"

HEADER = """#include <stdint.h>
#include <stdbool.h>
#include <string.h>
#include <stdlib.h>
#include <klee/klee.h>
#include <stdio.h>

typedef enum { A, AAAA, NS, TXT, CNAME, DNAME, SOA } RecordType;
typedef char String5[6];
typedef char String3[4];
typedef struct { RecordType rtyp; String5 name; String3 rdat; } RR;
"""

PROTO = "bool dname_applies(char* query, RR record);\n"

# Ten takes on the DNAME rule, some of them wrong in the usual ways.
DNAME = [
    """bool dname_applies(char* query, RR record) {
    int l1 = strlen(query);
    int l2 = strlen(record.name);
    if (l2 > l1) {
        return false;
    }
    for (int i = 1; i <= l2; i++) {
        if (query[l1 - i] != record.name[l2 - i]) {
            return false;
        }
    }
    if (l2 == l1) {
        return true;
    }
    if (query[l1 - l2 - 1] == '.') {
        return true;
    }
    return false;
}""",
    """bool dname_applies(char* query, RR record) {
    size_t lq = strlen(query);
    size_t ln = strlen(record.name);
    if (ln >= lq) {
        return false;
    }
    if (strcmp(query + (lq - ln), record.name) != 0) {
        return false;
    }
    return query[lq - ln - 1] == '.';
}""",
    """static bool ends_with_label(const char* s, const char* suffix) {
    size_t a = strlen(s), b = strlen(suffix);
    if (b > a) return false;
    if (memcmp(s + a - b, suffix, b) != 0) return false;
    return a == b || s[a - b - 1] == '.';
}

bool dname_applies(char* query, RR record) {
    if (record.rtyp != DNAME) return false;
    if (strcmp(query, record.name) == 0) return false;
    return ends_with_label(query, record.name);
}""",
    """bool dname_applies(char* query, RR record) {
    int n = strlen(record.name);
    int q = strlen(query);
    if (n == 1 && record.name[0] == '*') {
        return q > 1;
    }
    if (n >= q) return false;
    for (int i = 0; i < n; i++) {
        if (query[q - n + i] != record.name[i]) return false;
    }
    return query[q - n - 1] == '.';
}""",
    """bool dname_applies(char* query, RR record) {
    // Owner must be a proper ancestor of the query name.
    const char* p = query;
    while (*p) {
        const char* dot = strchr(p, '.');
        if (!dot) break;
        p = dot + 1;
        if (strcmp(p, record.name) == 0) return true;
    }
    return false;
}""",
    """bool dname_applies(char* query, RR record) {
    int lq = strlen(query);
    int ln = strlen(record.name);
    if (ln > lq) return false;
    return strcmp(query + lq - ln, record.name) == 0;
}""",
    """bool dname_applies(char* query, RR record) {
    if (record.rtyp != DNAME) {
        return false;
    }
    int i = strlen(query) - 1;
    int j = strlen(record.name) - 1;
    while (i >= 0 && j >= 0) {
        if (query[i] != record.name[j]) return false;
        i--;
        j--;
    }
    if (j >= 0) return false;
    return i >= 0 && query[i] == '.';
}""",
    """bool dname_applies(char* query, RR record) {
    char buf[8];
    int lq = strlen(query);
    int ln = strlen(record.name);
    if (ln + 1 > lq) return false;
    buf[0] = '.';
    memcpy(buf + 1, record.name, ln + 1);
    return strcmp(query + lq - ln - 1, buf) == 0;
}""",
    """bool dname_applies(char* query, RR record) {
    int lq = strlen(query);
    int ln = strlen(record.name);
    if (lq <= ln) return false;
    for (int k = 0; k < ln; k++) {
        char c = record.name[ln - 1 - k];
        if (c != '*' && c != query[lq - 1 - k]) return false;
    }
    return query[lq - ln - 1] == '.';
}""",
    """bool dname_applies(char* query, RR record) {
    if (record.name[0] == '\\0') return false;
    int lq = strlen(query);
    int ln = strlen(record.name);
    if (ln > lq) return false;
    if (strncmp(query + lq - ln, record.name, ln) != 0) return false;
    if (lq == ln) return false;
    return query[lq - ln - 1] == '.';
}""",
]

RECORD = [
    """bool record_applies(char* query, RR record) {
    if (record.rtyp == DNAME) {
        return dname_applies(query, record);
    }
    return strcmp(query, record.name) == 0;
}""",
    """bool record_applies(char* query, RR record) {
    if (strcmp(query, record.name) == 0) {
        return true;
    }
    if (record.rtyp == DNAME) {
        return dname_applies(query, record);
    }
    return false;
}""",
    """bool record_applies(char* query, RR record) {
    switch (record.rtyp) {
    case DNAME:
        return dname_applies(query, record);
    default:
        return strcmp(query, record.name) == 0;
    }
}""",
    """bool record_applies(char* query, RR record) {
    if (record.rtyp == DNAME && dname_applies(query, record)) {
        return true;
    }
    if (record.name[0] == '*' && record.name[1] == '.') {
        const char* dot = strchr(query, '.');
        return dot != NULL && strcmp(dot, record.name + 1) == 0;
    }
    return strcmp(query, record.name) == 0;
}""",
    """bool record_applies(char* query, RR record) {
    bool exact = strcmp(query, record.name) == 0;
    if (record.rtyp == DNAME) {
        return exact || dname_applies(query, record);
    }
    return exact;
}""",
    """bool record_applies(char* query, RR record) {
    if (record.rtyp == SOA || record.rtyp == NS) {
        return strcmp(query, record.name) == 0;
    }
    if (record.rtyp == DNAME) {
        return dname_applies(query, record);
    }
    if (strcmp(record.name, "*") == 0) {
        return strchr(query, '.') == NULL;
    }
    return strcmp(query, record.name) == 0;
}""",
    """bool record_applies(char* query, RR record) {
    if (record.rtyp == DNAME) return dname_applies(query, record);
    if (record.rtyp == CNAME) return strcmp(query, record.name) == 0;
    return strcmp(query, record.name) == 0;
}""",
    """bool record_applies(char* query, RR record) {
    if (record.rtyp != DNAME) {
        return strcmp(query, record.name) == 0;
    }
    return dname_applies(query, record) && strlen(record.rdat) > 0;
}""",
    """bool record_applies(char* query, RR record) {
    int lq = strlen(query);
    if (lq == 0) return false;
    if (record.rtyp == DNAME) return dname_applies(query, record);
    return strcmp(query, record.name) == 0;
}""",
    """bool record_applies(char* query, RR record) {
    if (record.rtyp == DNAME) {
        return dname_applies(query, record);
    } else if (record.name[0] == '*' && record.name[1] == '\\0') {
        return true;
    }
    return strcmp(query, record.name) == 0;
}""",
]


def main():
    repo = Path(__file__).resolve().parents[2]
    keys = subprocess.run(
        ["cargo", "run", "-q", "-p", "protomodel-cli", "--", "stub-keys",
         "--manifest", str(HERE / "manifest.json")],
        cwd=repo, check=True, capture_output=True, text=True,
    ).stdout
    out = HERE / "stubs"
    out.mkdir(exist_ok=True)
    for line in keys.splitlines():
        module, index, name = line.split("\t")
        i = int(index)
        if module == "dname_applies":
            text = HEADER + "\n" + DNAME[i] + "\n"
        elif module == "record_applies":
            text = HEADER + "\n" + PROTO + "\n" + RECORD[i] + "\n"
        else:
            sys.exit(f"unexpected module {module}")
        # Some samples come back fenced, as chat models often do anyway.
        if i % 3 == 1:
            text = "Here is the implementation:\n\n```c\n" + text + "```\n"
        (out / name).write_text(text)


if __name__ == "__main__":
    main()
