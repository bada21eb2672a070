//! Builds the DNS DNAME model with the builder API and prints its manifest.
//!
//!     cargo run -q -p protomodel-core --example dns_dname > dname.json
//!     protomodel synth --from-code "cargo run -q -p protomodel-core --example dns_dname" \
//!         --backend stub --stub-dir fixtures/dns_dname/stubs

use protomodel::manifest::Manifest;
use protomodel::{build_graph, ArgSpec, FunctionModule, RegexModule, SemanticType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rtype = SemanticType::enumeration(
        "RecordType",
        ["A", "AAAA", "NS", "TXT", "CNAME", "DNAME", "SOA"],
    );
    let rr = SemanticType::composite(
        "RR",
        [
            ("rtyp", rtype),
            ("name", SemanticType::text(5)),
            ("rdat", SemanticType::text(3)),
        ],
    );
    let query = ArgSpec::new("query", SemanticType::text(5), "A DNS query domain name.");
    let applies = |name: &str, description: &str| {
        FunctionModule::new(
            name,
            description,
            vec![
                query.clone(),
                ArgSpec::new("record", rr.clone(), "A DNS record."),
                ArgSpec::new(
                    "result",
                    SemanticType::boolean(),
                    "If the DNS record matches the query.",
                ),
            ],
        )
        .into()
    };
    let graph = build_graph(
        vec![
            RegexModule {
                name: "valid_query".into(),
                pattern: r"[a-z*](\.[a-z*])*".into(),
                subject: query.clone(),
            }
            .into(),
            applies("dname_applies", "If a DNAME record matches a query."),
            applies("record_applies", "If a DNS record matches a query."),
        ],
        vec![("valid_query".into(), "record_applies".into())],
        vec![("record_applies".into(), vec!["dname_applies".into()])],
    )?;
    println!(
        "{}",
        Manifest::from_graph(&graph, Some("record_applies"))?.to_json()
    );
    Ok(())
}
