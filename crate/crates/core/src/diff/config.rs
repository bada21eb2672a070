//! Adapter configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dns::{
    DnsPostprocess, DnsUdpAdapter, DnsUdpConfig, ResolverBehavior, ScriptedDnsAdapter,
};
use super::smtp::{SmtpConfig, SmtpTcpAdapter};
use super::Adapter;
use crate::graph::ArgSpec;
use crate::state::StateGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdapterKind {
    /// In-process resolver, for pipeline checks without real servers.
    ScriptedDns {
        behavior: ResolverBehavior,
    },
    DnsUdp(DnsUdpConfig),
    SmtpTcp(SmtpConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: AdapterKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptersConfig {
    #[serde(default)]
    pub dns: DnsPostprocess,
    pub adapters: Vec<AdapterSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("adapter config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("adapter `{id}`: {message}")]
    Adapter { id: String, message: String },
}

impl AdaptersConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn needs_state_graph(&self) -> bool {
        self.adapters
            .iter()
            .any(|a| matches!(a.kind, AdapterKind::SmtpTcp(_)))
    }

    /// Instantiates every adapter for a model whose inputs are `inputs`.
    pub fn build(
        &self,
        inputs: &[ArgSpec],
        graph: Option<&StateGraph>,
    ) -> Result<Vec<Box<dyn Adapter>>, ConfigError> {
        self.adapters
            .iter()
            .map(|a| -> Result<Box<dyn Adapter>, ConfigError> {
                let err = |message: String| ConfigError::Adapter {
                    id: a.id.clone(),
                    message,
                };
                Ok(match &a.kind {
                    AdapterKind::ScriptedDns { behavior } => Box::new(ScriptedDnsAdapter::new(
                        &a.id,
                        *behavior,
                        inputs.to_vec(),
                        self.dns.clone(),
                    )),
                    AdapterKind::DnsUdp(cfg) => Box::new(DnsUdpAdapter::new(
                        &a.id,
                        cfg.clone(),
                        inputs.to_vec(),
                        self.dns.clone(),
                    )),
                    AdapterKind::SmtpTcp(cfg) => {
                        let g = graph.ok_or_else(|| err("needs a state graph".into()))?;
                        Box::new(
                            SmtpTcpAdapter::new(&a.id, cfg.clone(), inputs, g.clone())
                                .map_err(err)?,
                        )
                    }
                })
            })
            .collect()
    }
}
