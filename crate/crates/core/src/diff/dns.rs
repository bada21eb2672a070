//! DNS: turning tests into zones and queries, a small authoritative
//! resolver for scripted implementations, and a UDP adapter.

use std::fmt::Write as _;
use std::net::{Ipv4Addr, Ipv6Addr, SocketAddr, UdpSocket};
use std::path::PathBuf;
use std::process::Command;
use std::str::FromStr;
use std::time::Duration;

use hickory_proto::op::{Message, MessageType, OpCode, Query};
use hickory_proto::rr::rdata::{CNAME, NS, NULL, SOA, TXT};
use hickory_proto::rr::{Name, RData, Record, RecordType};
use hickory_proto::serialize::binary::{BinDecodable, BinDecoder, BinEncodable};
use serde::{Deserialize, Serialize};

use super::{Adapter, AdapterError, Response};
use crate::graph::ArgSpec;
use crate::testcase::{TestCase, Value};

pub const DEFAULT_SUFFIX: &str = "test.";
pub const NS_TARGET: &str = "ns1.outside.edu.";
pub const SOA_RDATA: &str = "ns1.outside.edu. admin.outside.edu. 1 3600 600 86400 300";
pub const TTL: u32 = 300;
const DNAME_CODE: u16 = 39;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZoneRecord {
    /// Absolute, lower-case, with trailing dot.
    pub name: String,
    pub rtype: String,
    pub rdata: String,
}

impl ZoneRecord {
    pub fn new(name: &str, rtype: &str, rdata: &str) -> Self {
        ZoneRecord {
            name: name.to_ascii_lowercase(),
            rtype: rtype.to_ascii_uppercase(),
            rdata: rdata.to_string(),
        }
    }

    fn canonical(&self) -> String {
        format!("{} {} {}", self.name, self.rtype, self.rdata)
    }
}

/// A zone plus one query, ready to serve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsCase {
    pub apex: String,
    pub records: Vec<ZoneRecord>,
    pub qname: String,
    pub qtype: String,
}

impl DnsCase {
    /// Zone in master-file syntax.
    pub fn zone_text(&self) -> String {
        let mut s = format!("$ORIGIN {}\n$TTL {TTL}\n", self.apex);
        for r in &self.records {
            let _ = writeln!(s, "{}\t{TTL}\tIN\t{}\t{}", r.name, r.rtype, r.rdata);
        }
        s
    }

    pub fn describe(&self) -> String {
        format!("{}query: {} {}\n", self.zone_text(), self.qname, self.qtype)
    }
}

/// Reads records from zone text in the form [`DnsCase::zone_text`] writes.
pub fn parse_zone(text: &str) -> Result<Vec<ZoneRecord>, DnsError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('$') || line.starts_with(';') {
            continue;
        }
        let parts: Vec<&str> = line.splitn(5, char::is_whitespace).map(str::trim).collect();
        let [name, _ttl, class, rtype, rdata] = parts.as_slice() else {
            return Err(DnsError::Zone(format!(
                "line {}: expected 5 columns",
                n + 1
            )));
        };
        if *class != "IN" {
            return Err(DnsError::Zone(format!("line {}: class {class}", n + 1)));
        }
        out.push(ZoneRecord::new(name, rtype, rdata.trim()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DnsError {
    #[error("name `{0}` cannot be placed under the zone suffix")]
    Unrootable(String),
    #[error("test has no query name")]
    NoQuery,
    #[error("bad zone: {0}")]
    Zone(String),
}

/// How tests become zones: every name is re-rooted under `suffix`, the
/// apex gets SOA and NS records, and the query uses `query_type` unless
/// the test carries its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DnsPostprocess {
    pub suffix: String,
    pub query_type: String,
}

impl Default for DnsPostprocess {
    fn default() -> Self {
        DnsPostprocess {
            suffix: DEFAULT_SUFFIX.into(),
            query_type: "CNAME".into(),
        }
    }
}

fn labels(name: &str) -> Vec<&str> {
    name.trim_end_matches('.')
        .split('.')
        .filter(|l| !l.is_empty())
        .collect()
}

fn wire_len(name: &str) -> usize {
    labels(name).iter().map(|l| l.len() + 1).sum::<usize>() + 1
}

fn is_subdomain(child: &str, parent: &str) -> bool {
    let c = labels(child);
    let p = labels(parent);
    c.len() >= p.len() && c[c.len() - p.len()..] == p[..]
}

const TYPE_KEYS: [&str; 5] = ["record_type", "rtyp", "rtype", "type", "qtype"];
const NAME_KEYS: [&str; 4] = ["name", "domain", "owner", "qname"];
const RDATA_KEYS: [&str; 5] = ["rdata", "rdat", "data", "target", "value"];

fn find<'a>(v: &'a Value, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| v.field(k))
}

fn text_of(v: &Value) -> Option<String> {
    v.as_text().map(|b| b.iter().map(|&c| c as char).collect())
}

fn enum_of(v: &Value) -> Option<String> {
    match v {
        Value::Enum(s) => Some(s.to_ascii_uppercase()),
        _ => None,
    }
}

impl DnsPostprocess {
    /// Absolute form of a test name under the suffix.
    pub fn root(&self, name: &str) -> Result<String, DnsError> {
        let bad = || DnsError::Unrootable(name.to_string());
        let name = name.to_ascii_lowercase();
        let rooted = if name.is_empty() {
            self.suffix.clone()
        } else {
            format!("{}.{}", name.trim_end_matches('.'), self.suffix)
        };
        let body = rooted.trim_end_matches('.');
        if body.split('.').any(|l| l.is_empty() || l.len() > 63) || wire_len(&rooted) > 255 {
            return Err(bad());
        }
        if !body
            .bytes()
            .all(|b| b.is_ascii_graphic() && !b"()\";\\@$".contains(&b))
        {
            return Err(bad());
        }
        Ok(rooted)
    }

    fn rdata(&self, rtype: &str, raw: &str) -> Result<String, DnsError> {
        Ok(match rtype {
            "CNAME" | "DNAME" | "NS" => self.root(raw)?,
            "A" => match Ipv4Addr::from_str(raw) {
                Ok(a) => a.to_string(),
                Err(_) => Ipv4Addr::new(192, 0, 2, stable_byte(raw)).to_string(),
            },
            "AAAA" => match Ipv6Addr::from_str(raw) {
                Ok(a) => a.to_string(),
                Err(_) => {
                    Ipv6Addr::new(0x2001, 0xdb8, 0, 0, 0, 0, 0, stable_byte(raw).into()).to_string()
                }
            },
            "TXT" => format!("\"{}\"", raw.replace('\\', "\\\\").replace('"', "\\\"")),
            "SOA" => SOA_RDATA.to_string(),
            _ => raw.to_string(),
        })
    }

    /// Builds the zone and query for a DNS test. `inputs` are the model's
    /// input arguments, in order.
    pub fn apply(&self, inputs: &[ArgSpec], test: &TestCase) -> Result<DnsCase, DnsError> {
        let apex = self.suffix.to_ascii_lowercase();
        let mut records = vec![
            ZoneRecord::new(&apex, "SOA", SOA_RDATA),
            ZoneRecord::new(&apex, "NS", NS_TARGET),
        ];
        let mut query: Option<(String, Option<String>)> = None;
        let mut texts = Vec::new();
        let mut stack: Vec<&Value> = Vec::new();
        for (a, v) in inputs.iter().zip(&test.inputs) {
            if let Some(t) = text_of(v) {
                texts.push((a.name.contains("query"), t));
            } else {
                stack.push(v);
            }
        }
        while let Some(v) = stack.pop() {
            match v {
                Value::Array(items) => stack.extend(items.iter().rev()),
                Value::Record(_) => {
                    let name = find(v, &NAME_KEYS).and_then(text_of);
                    let rtype = find(v, &TYPE_KEYS).and_then(enum_of);
                    let rdata = find(v, &RDATA_KEYS).and_then(text_of);
                    match (name, rtype, rdata) {
                        (Some(n), Some(t), Some(d)) => {
                            let owner = self.root(&n)?;
                            if t == "SOA" && owner == apex {
                                continue;
                            }
                            let rd = self.rdata(&t, &d)?;
                            records.push(ZoneRecord::new(&owner, &t, &rd));
                        }
                        (Some(n), t, None) if query.is_none() => query = Some((n, t)),
                        _ => {}
                    }
                }
                _ => {}
            }
        }
        if query.is_none() {
            let pick = texts.iter().find(|(q, _)| *q).or(texts.first());
            query = pick.map(|(_, t)| (t.clone(), None));
        }
        let (qname, qtype) = query.ok_or(DnsError::NoQuery)?;
        records.dedup();
        Ok(DnsCase {
            apex,
            records,
            qname: self.root(&qname)?,
            qtype: qtype.unwrap_or_else(|| self.query_type.clone()),
        })
    }
}

fn stable_byte(s: &str) -> u8 {
    let h = s
        .bytes()
        .fold(0u32, |h, b| h.wrapping_mul(31).wrapping_add(b.into()));
    (h % 254 + 1) as u8
}

/// An authoritative answer, before normalization.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DnsAnswer {
    pub rcode: String,
    pub flags: Vec<&'static str>,
    pub answer: Vec<ZoneRecord>,
    pub authority: Vec<ZoneRecord>,
    pub additional: Vec<ZoneRecord>,
}

fn section(rs: &[ZoneRecord]) -> String {
    let mut v: Vec<String> = rs.iter().map(ZoneRecord::canonical).collect();
    v.sort();
    v.dedup();
    v.join("\n")
}

impl DnsAnswer {
    /// Field keys answer, authority, additional, flags, rcode. Record sets
    /// are sorted and names case-folded; TTLs are not compared.
    pub fn normalize(&self) -> Response {
        Response::ok([
            ("answer", section(&self.answer)),
            ("authority", section(&self.authority)),
            ("additional", section(&self.additional)),
            ("flags", self.flags.join(" ")),
            ("rcode", self.rcode.clone()),
        ])
    }
}

/// Behavior of the scripted resolver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverBehavior {
    Reference,
    /// A DNAME whose owner starts with a `*` label is returned with the
    /// query name as its owner.
    DnameOwnerBug,
}

/// A deliberately small authoritative lookup: DNAME substitution at the
/// first ancestor carrying one, exact matches, CNAME, empty
/// non-terminals, and wildcard synthesis at the closest encloser. No
/// chasing, no delegation.
pub fn resolve(case: &DnsCase, behavior: ResolverBehavior) -> DnsAnswer {
    let q = case.qname.to_ascii_lowercase();
    let qt = case.qtype.to_ascii_uppercase();
    let soa: Vec<ZoneRecord> = case
        .records
        .iter()
        .filter(|r| r.rtype == "SOA" && r.name == case.apex)
        .cloned()
        .collect();
    if !is_subdomain(&q, &case.apex) {
        return DnsAnswer {
            rcode: "REFUSED".into(),
            ..Default::default()
        };
    }
    let at =
        |n: &str| -> Vec<&ZoneRecord> { case.records.iter().filter(|r| r.name == n).collect() };
    let exists = |n: &str| case.records.iter().any(|r| is_subdomain(&r.name, n));
    let ql = labels(&q);
    let apex_len = labels(&case.apex).len();
    let noerror = |answer: Vec<ZoneRecord>, authority: Vec<ZoneRecord>| DnsAnswer {
        rcode: "NOERROR".into(),
        flags: vec!["aa"],
        answer,
        authority,
        additional: Vec::new(),
    };

    // Proper ancestors, from the apex down.
    for n in apex_len..ql.len() {
        let anc = format!("{}.", ql[ql.len() - n..].join("."));
        let Some(d) = at(&anc).into_iter().find(|r| r.rtype == "DNAME") else {
            continue;
        };
        let prefix = ql[..ql.len() - n].join(".");
        let target = format!("{prefix}.{}", d.rdata);
        let mut shown = d.clone();
        if behavior == ResolverBehavior::DnameOwnerBug && ql[ql.len() - n] == "*" {
            shown.name = q.clone();
        }
        if wire_len(&target) > 255 {
            return DnsAnswer {
                rcode: "YXDOMAIN".into(),
                flags: vec!["aa"],
                answer: vec![shown],
                ..Default::default()
            };
        }
        return noerror(
            vec![shown, ZoneRecord::new(&q, "CNAME", &target)],
            Vec::new(),
        );
    }

    let pick = |rs: Vec<&ZoneRecord>, owner: &str| -> Option<Vec<ZoneRecord>> {
        let hits: Vec<ZoneRecord> = rs
            .iter()
            .filter(|r| r.rtype == qt || qt == "ANY")
            .map(|r| ZoneRecord::new(owner, &r.rtype, &r.rdata))
            .collect();
        if !hits.is_empty() {
            return Some(hits);
        }
        rs.iter()
            .find(|r| r.rtype == "CNAME")
            .map(|r| vec![ZoneRecord::new(owner, "CNAME", &r.rdata)])
    };

    let here = at(&q);
    if !here.is_empty() {
        return match pick(here, &q) {
            Some(a) => noerror(a, Vec::new()),
            None => noerror(Vec::new(), soa),
        };
    }
    if exists(&q) {
        return noerror(Vec::new(), soa);
    }
    let encloser = (apex_len..ql.len())
        .rev()
        .map(|n| format!("{}.", ql[ql.len() - n..].join(".")))
        .find(|a| exists(a))
        .unwrap_or_else(|| case.apex.clone());
    let wild = at(&format!("*.{encloser}"));
    if !wild.is_empty() {
        return match pick(wild, &q) {
            Some(a) => noerror(a, Vec::new()),
            None => noerror(Vec::new(), soa),
        };
    }
    DnsAnswer {
        rcode: "NXDOMAIN".into(),
        flags: vec!["aa"],
        answer: Vec::new(),
        authority: soa,
        additional: Vec::new(),
    }
}

/// An in-process implementation backed by [`resolve`].
pub struct ScriptedDnsAdapter {
    pub id: String,
    pub behavior: ResolverBehavior,
    pub inputs: Vec<ArgSpec>,
    pub post: DnsPostprocess,
    case: Option<DnsCase>,
}

impl ScriptedDnsAdapter {
    pub fn new(
        id: &str,
        behavior: ResolverBehavior,
        inputs: Vec<ArgSpec>,
        post: DnsPostprocess,
    ) -> Self {
        ScriptedDnsAdapter {
            id: id.to_string(),
            behavior,
            inputs,
            post,
            case: None,
        }
    }
}

fn untranslatable(e: DnsError) -> AdapterError {
    AdapterError::Untranslatable(e.to_string())
}

impl Adapter for ScriptedDnsAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, test: &TestCase) -> Result<String, AdapterError> {
        Ok(self
            .post
            .apply(&self.inputs, test)
            .map_err(untranslatable)?
            .describe())
    }

    fn setup(&mut self, test: &TestCase) -> Result<(), AdapterError> {
        self.case = Some(
            self.post
                .apply(&self.inputs, test)
                .map_err(untranslatable)?,
        );
        Ok(())
    }

    fn execute(&mut self, _test: &TestCase) -> Result<Response, AdapterError> {
        let case = self
            .case
            .as_ref()
            .ok_or_else(|| AdapterError::Failed("not set up".into()))?;
        Ok(resolve(case, self.behavior).normalize())
    }

    fn teardown(&mut self) -> Result<(), AdapterError> {
        self.case = None;
        Ok(())
    }
}

fn record_type(s: &str) -> Result<RecordType, AdapterError> {
    if s.eq_ignore_ascii_case("DNAME") {
        return Ok(RecordType::Unknown(DNAME_CODE));
    }
    RecordType::from_str(&s.to_ascii_uppercase())
        .map_err(|_| AdapterError::Untranslatable(format!("unknown query type {s}")))
}

fn type_name(t: RecordType) -> String {
    match t {
        RecordType::Unknown(DNAME_CODE) => "DNAME".into(),
        t => t.to_string(),
    }
}

fn lower(n: &Name) -> String {
    n.to_lowercase().to_string()
}

fn rdata_text(r: &Record) -> String {
    match r.data() {
        Some(RData::A(a)) => a.to_string(),
        Some(RData::AAAA(a)) => a.to_string(),
        Some(RData::CNAME(n)) => lower(&n.0),
        Some(RData::NS(n)) => lower(&n.0),
        Some(RData::SOA(s)) => format!(
            "{} {} {} {} {} {} {}",
            lower(s.mname()),
            lower(s.rname()),
            s.serial(),
            s.refresh(),
            s.retry(),
            s.expire(),
            s.minimum()
        ),
        Some(RData::TXT(t)) => {
            let s: String = t
                .txt_data()
                .iter()
                .map(|c| String::from_utf8_lossy(c))
                .collect();
            format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
        }
        Some(RData::Unknown { code, rdata }) if u16::from(*code) == DNAME_CODE => {
            let mut d = BinDecoder::new(rdata.anything());
            Name::read(&mut d).map_or_else(|_| hex::encode(rdata.anything()), |n| lower(&n))
        }
        Some(other) => other.to_string(),
        None => String::new(),
    }
}

fn to_zone_record(r: &Record) -> ZoneRecord {
    ZoneRecord::new(
        &lower(r.name()),
        &type_name(r.record_type()),
        &rdata_text(r),
    )
}

fn rcode_name(code: u16) -> String {
    match code {
        0 => "NOERROR".into(),
        1 => "FORMERR".into(),
        2 => "SERVFAIL".into(),
        3 => "NXDOMAIN".into(),
        4 => "NOTIMP".into(),
        5 => "REFUSED".into(),
        6 => "YXDOMAIN".into(),
        n => format!("RCODE{n}"),
    }
}

fn rcode_value(name: &str) -> u16 {
    match name {
        "NOERROR" => 0,
        "FORMERR" => 1,
        "SERVFAIL" => 2,
        "NXDOMAIN" => 3,
        "NOTIMP" => 4,
        "REFUSED" => 5,
        "YXDOMAIN" => 6,
        _ => 2,
    }
}

/// Wire query for a case.
pub fn encode_query(case: &DnsCase, id: u16) -> Result<Vec<u8>, AdapterError> {
    let name =
        Name::from_ascii(&case.qname).map_err(|e| AdapterError::Untranslatable(e.to_string()))?;
    let mut m = Message::new();
    m.set_id(id)
        .set_message_type(MessageType::Query)
        .set_op_code(OpCode::Query)
        .set_recursion_desired(false)
        .add_query(Query::query(name, record_type(&case.qtype)?));
    m.to_vec().map_err(|e| AdapterError::Failed(e.to_string()))
}

/// Normalized form of a wire response.
pub fn decode_response(bytes: &[u8]) -> Result<DnsAnswer, AdapterError> {
    let m =
        Message::from_vec(bytes).map_err(|e| AdapterError::Failed(format!("bad response: {e}")))?;
    let mut flags = Vec::new();
    for (on, f) in [
        (m.authoritative(), "aa"),
        (m.truncated(), "tc"),
        (m.recursion_desired(), "rd"),
        (m.recursion_available(), "ra"),
        (m.authentic_data(), "ad"),
        (m.checking_disabled(), "cd"),
    ] {
        if on {
            flags.push(f);
        }
    }
    Ok(DnsAnswer {
        rcode: rcode_name(m.response_code().into()),
        flags,
        answer: m.answers().iter().map(to_zone_record).collect(),
        authority: m.name_servers().iter().map(to_zone_record).collect(),
        additional: m.additionals().iter().map(to_zone_record).collect(),
    })
}

fn to_wire_record(z: &ZoneRecord) -> Option<Record> {
    let name = Name::from_ascii(&z.name).ok()?;
    let n = |s: &str| Name::from_ascii(s).ok();
    let rdata = match z.rtype.as_str() {
        "A" => RData::A(Ipv4Addr::from_str(&z.rdata).ok()?.into()),
        "AAAA" => RData::AAAA(Ipv6Addr::from_str(&z.rdata).ok()?.into()),
        "CNAME" => RData::CNAME(CNAME(n(&z.rdata)?)),
        "NS" => RData::NS(NS(n(&z.rdata)?)),
        "DNAME" => RData::Unknown {
            code: RecordType::Unknown(DNAME_CODE),
            rdata: NULL::with(n(&z.rdata)?.to_bytes().ok()?),
        },
        "TXT" => {
            let body = z
                .rdata
                .trim_matches('"')
                .replace("\\\"", "\"")
                .replace("\\\\", "\\");
            RData::TXT(TXT::new(vec![body]))
        }
        "SOA" => {
            let p: Vec<&str> = z.rdata.split_whitespace().collect();
            let [m, r, serial, refresh, retry, expire, min] = p.as_slice() else {
                return None;
            };
            RData::SOA(SOA::new(
                n(m)?,
                n(r)?,
                serial.parse().ok()?,
                refresh.parse().ok()?,
                retry.parse().ok()?,
                expire.parse().ok()?,
                min.parse().ok()?,
            ))
        }
        _ => return None,
    };
    Some(Record::from_rdata(name, TTL, rdata))
}

/// Wire response for a query, answered by [`resolve`] over `records`.
/// Lets a scripted implementation sit behind a real socket.
pub fn serve_query(
    query: &[u8],
    apex: &str,
    records: &[ZoneRecord],
    behavior: ResolverBehavior,
) -> Result<Vec<u8>, AdapterError> {
    let q = Message::from_vec(query).map_err(|e| AdapterError::Failed(e.to_string()))?;
    let question = q
        .queries()
        .first()
        .ok_or_else(|| AdapterError::Failed("no question".into()))?;
    let case = DnsCase {
        apex: apex.to_string(),
        records: records.to_vec(),
        qname: lower(question.name()),
        qtype: type_name(question.query_type()),
    };
    let a = resolve(&case, behavior);
    let mut m = Message::new();
    m.set_id(q.id())
        .set_message_type(MessageType::Response)
        .set_op_code(OpCode::Query)
        .set_authoritative(a.flags.contains(&"aa"))
        .set_response_code(rcode_value(&a.rcode).into())
        .add_query(question.clone());
    m.add_answers(a.answer.iter().filter_map(to_wire_record));
    m.add_name_servers(a.authority.iter().filter_map(to_wire_record));
    m.to_vec().map_err(|e| AdapterError::Failed(e.to_string()))
}

/// Standard DNS over UDP against a server that serves `zone_file`.
/// `reload` runs after the zone is written (e.g. a control command that
/// makes the server re-read it); `reset` runs after each test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsUdpConfig {
    pub server: SocketAddr,
    pub zone_file: PathBuf,
    #[serde(default)]
    pub reload: Vec<String>,
    #[serde(default)]
    pub reset: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub settle_ms: u64,
}

fn default_timeout_ms() -> u64 {
    2000
}

pub struct DnsUdpAdapter {
    pub id: String,
    pub cfg: DnsUdpConfig,
    pub inputs: Vec<ArgSpec>,
    pub post: DnsPostprocess,
    case: Option<DnsCase>,
    next_id: u16,
}

impl DnsUdpAdapter {
    pub fn new(id: &str, cfg: DnsUdpConfig, inputs: Vec<ArgSpec>, post: DnsPostprocess) -> Self {
        DnsUdpAdapter {
            id: id.to_string(),
            cfg,
            inputs,
            post,
            case: None,
            next_id: 1,
        }
    }
}

pub(crate) fn run_hook(argv: &[String]) -> Result<(), AdapterError> {
    let Some((cmd, args)) = argv.split_first() else {
        return Ok(());
    };
    let out = Command::new(cmd)
        .args(args)
        .output()
        .map_err(|e| AdapterError::Failed(format!("{cmd}: {e}")))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(AdapterError::Failed(format!(
            "{cmd} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )))
    }
}

impl Adapter for DnsUdpAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, test: &TestCase) -> Result<String, AdapterError> {
        Ok(self
            .post
            .apply(&self.inputs, test)
            .map_err(untranslatable)?
            .describe())
    }

    fn setup(&mut self, test: &TestCase) -> Result<(), AdapterError> {
        let case = self
            .post
            .apply(&self.inputs, test)
            .map_err(untranslatable)?;
        std::fs::write(&self.cfg.zone_file, case.zone_text())
            .map_err(|e| AdapterError::Failed(format!("{}: {e}", self.cfg.zone_file.display())))?;
        run_hook(&self.cfg.reload)?;
        if self.cfg.settle_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.cfg.settle_ms));
        }
        self.case = Some(case);
        Ok(())
    }

    fn execute(&mut self, _test: &TestCase) -> Result<Response, AdapterError> {
        let case = self
            .case
            .as_ref()
            .ok_or_else(|| AdapterError::Failed("not set up".into()))?;
        let id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1);
        let q = encode_query(case, id)?;
        let fail = |e: std::io::Error| AdapterError::Failed(e.to_string());
        let bind: SocketAddr = if self.cfg.server.is_ipv4() {
            "0.0.0.0:0".parse().expect("literal")
        } else {
            "[::]:0".parse().expect("literal")
        };
        let sock = UdpSocket::bind(bind).map_err(fail)?;
        sock.set_read_timeout(Some(Duration::from_millis(self.cfg.timeout_ms)))
            .map_err(fail)?;
        sock.send_to(&q, self.cfg.server).map_err(fail)?;
        let mut buf = [0u8; 4096];
        loop {
            let (n, from) = sock.recv_from(&mut buf).map_err(|e| match e.kind() {
                std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => {
                    AdapterError::Timeout
                }
                _ => fail(e),
            })?;
            if from != self.cfg.server || n < 2 || u16::from_be_bytes([buf[0], buf[1]]) != id {
                continue;
            }
            return Ok(decode_response(&buf[..n])?.normalize());
        }
    }

    fn teardown(&mut self) -> Result<(), AdapterError> {
        self.case = None;
        run_hook(&self.cfg.reset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SemanticType;

    fn inputs() -> Vec<ArgSpec> {
        let rtype = SemanticType::enumeration(
            "RecordType",
            ["A", "AAAA", "NS", "TXT", "CNAME", "DNAME", "SOA"],
        );
        vec![
            ArgSpec::new("query", SemanticType::text(5), "Q."),
            ArgSpec::new(
                "record",
                SemanticType::composite(
                    "Record",
                    [
                        ("record_type", rtype),
                        ("name", SemanticType::text(3)),
                        ("rdata", SemanticType::text(3)),
                    ],
                ),
                "R.",
            ),
        ]
    }

    fn test(q: &str, rt: &str, name: &str, rdata: &str) -> TestCase {
        TestCase {
            model_id: "m".into(),
            inputs: vec![
                Value::text(q),
                Value::Record(vec![
                    ("record_type".into(), Value::Enum(rt.into())),
                    ("name".into(), Value::text(name)),
                    ("rdata".into(), Value::text(rdata)),
                ]),
            ],
            output: Value::Bool(false),
            invalid: false,
        }
    }

    #[test]
    fn dname_zone_and_query() {
        let case = DnsPostprocess::default()
            .apply(&inputs(), &test("a.*", "DNAME", "*", "a.a"))
            .unwrap();
        assert_eq!(
            case.records,
            [
                ZoneRecord::new("test.", "SOA", SOA_RDATA),
                ZoneRecord::new("test.", "NS", "ns1.outside.edu."),
                ZoneRecord::new("*.test.", "DNAME", "a.a.test."),
            ]
        );
        assert_eq!(
            (case.qname.as_str(), case.qtype.as_str()),
            ("a.*.test.", "CNAME")
        );
        assert_eq!(parse_zone(&case.zone_text()).unwrap(), case.records);
    }

    #[test]
    fn empty_record_set_and_long_names() {
        let p = DnsPostprocess::default();
        let only_query = TestCase {
            inputs: vec![Value::text("a")],
            ..test("a", "A", "", "")
        };
        let case = p.apply(&inputs()[..1], &only_query).unwrap();
        assert_eq!(case.records.len(), 2);
        let long = vec!["abcdefgh"; 30].join(".");
        assert!(matches!(p.root(&long), Err(DnsError::Unrootable(_))));
        assert!(p.root(&"a".repeat(64)).is_err());
        assert!(p.root("a..b").is_err());
        assert_eq!(p.root("").unwrap(), "test.");
    }

    #[test]
    fn reference_and_buggy_dname() {
        let case = DnsPostprocess::default()
            .apply(&inputs(), &test("a.*", "DNAME", "*", "a.a"))
            .unwrap();
        let good = resolve(&case, ResolverBehavior::Reference);
        assert_eq!(
            good.answer,
            [
                ZoneRecord::new("*.test.", "DNAME", "a.a.test."),
                ZoneRecord::new("a.*.test.", "CNAME", "a.a.a.test."),
            ]
        );
        let bad = resolve(&case, ResolverBehavior::DnameOwnerBug);
        assert_eq!(
            bad.answer[0],
            ZoneRecord::new("a.*.test.", "DNAME", "a.a.test.")
        );
        assert_eq!(bad.answer[1], good.answer[1]);
        let (g, b) = (good.normalize(), bad.normalize());
        let diffs = crate::diff::field_diffs(&b, &g);
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].0, "answer");
    }

    #[test]
    fn lookup_cases() {
        let p = DnsPostprocess::default();
        let r = |q: &str, rt: &str, n: &str, d: &str| {
            resolve(
                &p.apply(&inputs(), &test(q, rt, n, d)).unwrap(),
                ResolverBehavior::Reference,
            )
        };
        assert_eq!(r("b", "A", "a", "a").rcode, "NXDOMAIN");
        assert_eq!(r("a", "A", "a", "a").rcode, "NOERROR");
        assert_eq!(r("a", "CNAME", "a", "b").answer[0].rdata, "b.test.");
        let wild = r("x.y", "CNAME", "*.y", "b");
        assert_eq!(
            wild.answer,
            [ZoneRecord::new("x.y.test.", "CNAME", "b.test.")]
        );
        let ent = r("y", "CNAME", "a.y", "b");
        assert!(ent.answer.is_empty());
        assert_eq!(ent.rcode, "NOERROR");
        assert_eq!(ent.authority[0].rtype, "SOA");
        // The DNAME owner itself is not rewritten.
        assert_eq!(r("a", "CNAME", "a", "b").rcode, "NOERROR");
        let own = r("a", "DNAME", "a", "b");
        assert_eq!(own.answer.len(), 0);
    }

    #[test]
    fn udp_adapter_against_local_server() {
        let server = UdpSocket::bind("127.0.0.1:0").unwrap();
        let addr = server.local_addr().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let zone = dir.path().join("test.zone");
        let zone2 = zone.clone();
        std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok((n, from)) = server.recv_from(&mut buf) {
                let recs = parse_zone(&std::fs::read_to_string(&zone2).unwrap()).unwrap();
                let out =
                    serve_query(&buf[..n], "test.", &recs, ResolverBehavior::Reference).unwrap();
                server.send_to(&out, from).unwrap();
            }
        });
        let cfg = DnsUdpConfig {
            server: addr,
            zone_file: zone,
            reload: vec![],
            reset: vec![],
            timeout_ms: 2000,
            settle_ms: 0,
        };
        let mut a = DnsUdpAdapter::new("udp", cfg, inputs(), DnsPostprocess::default());
        let mut s = ScriptedDnsAdapter::new(
            "toy",
            ResolverBehavior::Reference,
            inputs(),
            DnsPostprocess::default(),
        );
        for t in [
            test("a.*", "DNAME", "*", "a.a"),
            test("b", "A", "a", "a"),
            test("a", "TXT", "a", "x\"y"),
            test("a", "AAAA", "a", "a"),
            test("a", "SOA", "a", "a"),
        ] {
            let wire = crate::diff::run_one(&mut a, &t);
            let toy = crate::diff::run_one(&mut s, &t);
            assert_eq!(wire, toy, "{}", s.translate(&t).unwrap());
        }
    }

    #[test]
    fn udp_timeout_is_reported() {
        let silent = UdpSocket::bind("127.0.0.1:0").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = DnsUdpConfig {
            server: silent.local_addr().unwrap(),
            zone_file: dir.path().join("z"),
            reload: vec![],
            reset: vec![],
            timeout_ms: 50,
            settle_ms: 0,
        };
        let mut a = DnsUdpAdapter::new("udp", cfg, inputs(), DnsPostprocess::default());
        assert_eq!(
            crate::diff::run_one(&mut a, &test("a", "A", "a", "a")),
            Response::Timeout
        );
    }
}
