"""Writes the canned SMTP model completion and its state-graph answer."""
import subprocess
import tempfile
from pathlib import Path

HERE = Path(__file__).resolve().parent.parent / "smtp"

MODEL = """#include <stdint.h>
#include <stdbool.h>
#include <string.h>
#include <stdlib.h>

typedef enum { INITIAL, HELO_SENT, EHLO_SENT, MAIL_FROM_RECEIVED, RCPT_TO_RECEIVED, DATA_RECEIVED, QUITTED } State;

char* smtp_server_resp(State state, char* input) {
    char* response = malloc(512 * sizeof(char));
    if(state == INITIAL) {
        if(strcmp(input, "HELO") == 0) {
            strcpy(response, "250 Hello");
            state = HELO_SENT;
        } else if(strcmp(input, "EHLO") == 0) {
            strcpy(response,
            "250-Hello\\n250-SIZE 512\\n250-8BITMIME\\n250 OK");
            state = EHLO_SENT;
        } else {
            strcpy(response, "503 Bad sequence of commands");
        }
    } else if(state == HELO_SENT || state == EHLO_SENT) {
        if(strncmp(input, "MAIL FROM:", 10) == 0) {
            strcpy(response, "250 OK");
            state = MAIL_FROM_RECEIVED;
        } else {
            strcpy(response, "503 Bad sequence of commands");
        }
    } else if(state == MAIL_FROM_RECEIVED) {
        if(strncmp(input, "RCPT TO:", 8) == 0) {
            strcpy(response, "250 OK");
            state = RCPT_TO_RECEIVED;
        } else {
            strcpy(response, "503 Bad sequence of commands");
        }
    } else if(state == RCPT_TO_RECEIVED) {
        if(strcmp(input, "DATA") == 0) {
            strcpy(response, "354 End with <CR><LF>.<CR><LF>");
            state = DATA_RECEIVED;
        } else {
            strcpy(response, "503 Bad sequence of commands");
        }
    } else if(state == DATA_RECEIVED) {
        if(strcmp(input, ".") == 0) {
            strcpy(response, "250 OK");
            state = INITIAL;
        } else {
            strcpy(response, "");
        }
    } else if(state == QUITTED) {
        strcpy(response, "221 Bye");
        state = INITIAL;
    } else {
        strcpy(response, "500 error, command unrecognized");
    }
    return response;
}
"""

GRAPH = """Here is the Python dictionary that maps the state transitions:

```python
state_transitions = {
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
}
```
"""


def cli(*args, cwd):
    return subprocess.run(
        ["cargo", "run", "-q", "-p", "protomodel-cli", "--", *args],
        cwd=cwd, check=True, capture_output=True, text=True,
    ).stdout


def main():
    repo = Path(__file__).resolve().parents[2]
    manifest = str(HERE / "manifest.json")
    stubs = HERE / "stubs"
    stubs.mkdir(exist_ok=True)
    for old in stubs.glob("*.txt"):
        old.unlink()
    for line in cli("stub-keys", "--manifest", manifest, cwd=repo).splitlines():
        _, _, name = line.split("\t")
        (stubs / name).write_text(MODEL)
    with tempfile.TemporaryDirectory() as ws:
        cli("synth", "--manifest", manifest, "--out", ws, cwd=repo)
        model = next(Path(ws).glob("runs/*/models/model-000/model.c"))
        keys = cli("stub-keys", "--manifest", manifest, "--state-graph-of", str(model), cwd=repo)
    name = keys.splitlines()[-1].split("\t")[2]
    (stubs / name).write_text(GRAPH)


if __name__ == "__main__":
    main()
