//! SMTP over TCP, driven into a test's state before its input is sent.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Adapter, AdapterError, Response};
use crate::graph::ArgSpec;
use crate::state::{drive_and_execute, input_prefix, DriveError, PrefixError, Session, StateGraph};
use crate::testcase::{TestCase, Value};
use crate::types::SemanticType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmtpConfig {
    pub addr: SocketAddr,
    pub timeout_ms: u64,
    pub helo_domain: String,
    pub mail_from: String,
    pub rcpt_to: String,
}

impl Default for SmtpConfig {
    fn default() -> Self {
        SmtpConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], 8025)),
            timeout_ms: 1000,
            helo_domain: "localhost".into(),
            mail_from: "a@example.com".into(),
            rcpt_to: "b@example.com".into(),
        }
    }
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

pub struct SmtpTcpAdapter {
    pub id: String,
    pub cfg: SmtpConfig,
    pub graph: StateGraph,
    state_index: usize,
    input_index: usize,
    conn: Option<Conn>,
}

fn fail(e: std::io::Error) -> AdapterError {
    AdapterError::Failed(e.to_string())
}

/// `(code, text)` of a reply; multi-line text is joined with newlines.
fn reply(lines: &[String]) -> Response {
    let code = lines
        .last()
        .map(|l| l.get(..3).unwrap_or(l).to_string())
        .unwrap_or_default();
    let text: Vec<&str> = lines
        .iter()
        .map(|l| l.get(4..).unwrap_or("").trim_end())
        .collect();
    Response::ok([("code", code), ("text", text.join("\n"))])
}

impl SmtpTcpAdapter {
    /// `inputs` are the model's inputs: the first enumeration is the state
    /// and the first text is the command.
    pub fn new(
        id: &str,
        cfg: SmtpConfig,
        inputs: &[ArgSpec],
        graph: StateGraph,
    ) -> Result<Self, String> {
        let find =
            |pred: fn(&SemanticType) -> bool| inputs.iter().position(|a| pred(a.ty.resolved()));
        let state_index = find(|t| matches!(t, SemanticType::Enumeration { .. }))
            .ok_or("model has no state input")?;
        let input_index =
            find(|t| matches!(t, SemanticType::Text { .. })).ok_or("model has no text input")?;
        Ok(SmtpTcpAdapter {
            id: id.to_string(),
            cfg,
            graph,
            state_index,
            input_index,
            conn: None,
        })
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.cfg.timeout_ms)
    }

    fn read_reply(&mut self) -> Result<Response, AdapterError> {
        let conn = self
            .conn
            .as_mut()
            .ok_or_else(|| AdapterError::Failed("not connected".into()))?;
        let mut lines = Vec::new();
        loop {
            let mut line = String::new();
            match conn.reader.read_line(&mut line) {
                Ok(0) if lines.is_empty() => {
                    return Ok(Response::ok([("code", ""), ("text", "<closed>")]))
                }
                Ok(0) => break,
                Ok(_) => {
                    let l = line.trim_end_matches(['\r', '\n']).to_string();
                    let last = l.as_bytes().get(3) != Some(&b'-');
                    lines.push(l);
                    if last {
                        break;
                    }
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    if lines.is_empty() {
                        // Silence, e.g. while the server collects message data.
                        return Ok(Response::ok([("code", ""), ("text", "")]));
                    }
                    return Err(AdapterError::Timeout);
                }
                Err(e) => return Err(fail(e)),
            }
        }
        Ok(reply(&lines))
    }

    fn test_parts(&self, test: &TestCase) -> Result<(String, String), AdapterError> {
        let bad = |m: &str| AdapterError::Untranslatable(m.to_string());
        let state = match test.inputs.get(self.state_index) {
            Some(Value::Enum(s)) => s.clone(),
            _ => return Err(bad("test has no state")),
        };
        let input = match test.inputs.get(self.input_index) {
            Some(Value::Text(t)) => t.iter().map(|&c| c as char).collect(),
            _ => return Err(bad("test has no input text")),
        };
        Ok((state, input))
    }
}

impl Session for SmtpTcpAdapter {
    fn reset(&mut self) -> Result<(), AdapterError> {
        if let Some(c) = self.conn.take() {
            let _ = c.writer.shutdown(std::net::Shutdown::Both);
        }
        let s = TcpStream::connect_timeout(&self.cfg.addr, self.timeout()).map_err(fail)?;
        s.set_read_timeout(Some(self.timeout())).map_err(fail)?;
        let writer = s.try_clone().map_err(fail)?;
        self.conn = Some(Conn {
            reader: BufReader::new(s),
            writer,
        });
        let greeting = self.read_reply()?;
        match greeting.fields().map(|f| f["code"].as_str()) {
            Some("220") => Ok(()),
            _ => Err(AdapterError::Failed(format!(
                "unexpected greeting {greeting:?}"
            ))),
        }
    }

    fn send(&mut self, input: &str) -> Result<Response, AdapterError> {
        let conn = self
            .conn
            .as_mut()
            .ok_or_else(|| AdapterError::Failed("not connected".into()))?;
        if let Err(e) = conn.writer.write_all(format!("{input}\r\n").as_bytes()) {
            return match e.kind() {
                ErrorKind::BrokenPipe | ErrorKind::ConnectionReset => {
                    Ok(Response::ok([("code", ""), ("text", "<closed>")]))
                }
                _ => Err(fail(e)),
            };
        }
        self.read_reply()
    }

    fn accepted(&self, r: &Response) -> bool {
        r.fields().is_some_and(|f| {
            f.get("code")
                .is_some_and(|c| c.starts_with('2') || c.starts_with('3'))
        })
    }

    fn complete_prefix(&self, input: &str) -> String {
        match input.trim_end() {
            "HELO" | "EHLO" => format!("{} {}", input.trim_end(), self.cfg.helo_domain),
            p if p.eq_ignore_ascii_case("MAIL FROM:") => format!("{p}<{}>", self.cfg.mail_from),
            p if p.eq_ignore_ascii_case("RCPT TO:") => format!("{p}<{}>", self.cfg.rcpt_to),
            _ => input.to_string(),
        }
    }
}

impl Adapter for SmtpTcpAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, test: &TestCase) -> Result<String, AdapterError> {
        let (state, input) = self.test_parts(test)?;
        let prefix = input_prefix(&self.graph, &state)
            .map_err(|e| AdapterError::Untranslatable(e.to_string()))?;
        let mut lines: Vec<String> = prefix.iter().map(|p| self.complete_prefix(p)).collect();
        lines.push(input);
        Ok(lines.join("\n"))
    }

    fn setup(&mut self, _test: &TestCase) -> Result<(), AdapterError> {
        Ok(())
    }

    fn execute(&mut self, test: &TestCase) -> Result<Response, AdapterError> {
        let (state, input) = self.test_parts(test)?;
        let graph = self.graph.clone();
        drive_and_execute(self, &graph, &state, &input).map_err(|e| match e {
            DriveError::Prefix(
                p @ (PrefixError::Unreachable(_) | PrefixError::UnknownState(_)),
            ) => AdapterError::Untranslatable(p.to_string()),
            other => AdapterError::Failed(other.to_string()),
        })
    }

    fn teardown(&mut self) -> Result<(), AdapterError> {
        if let Some(c) = self.conn.take() {
            let _ = c.writer.shutdown(std::net::Shutdown::Both);
        }
        Ok(())
    }
}
