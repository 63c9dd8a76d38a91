//! Probe identifiers: the scalar signals captured per (item, candidate).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Key activation `k_i` of MLP neuron `i` at the final token.
    MlpKey,
    /// L2 norm of one attention head's projected output at the final token.
    AttnHeadNorm,
    /// Summed log-probability of the answer tokens.
    LogLikelihood,
}

impl ProbeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::MlpKey => "mlp_key",
            ProbeKind::AttnHeadNorm => "attn_head_norm",
            ProbeKind::LogLikelihood => "log_likelihood",
        }
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp_key" => Ok(ProbeKind::MlpKey),
            "attn_head_norm" => Ok(ProbeKind::AttnHeadNorm),
            "log_likelihood" => Ok(ProbeKind::LogLikelihood),
            other => Err(Error::InvalidInput(format!("unknown probe kind `{other}`"))),
        }
    }
}

/// Identifies one probe. The derived ordering (kind, layer, index) is the
/// canonical column order of record files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProbeId {
    pub kind: ProbeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl ProbeId {
    pub fn mlp_key(layer: usize, neuron: usize) -> Self {
        ProbeId {
            kind: ProbeKind::MlpKey,
            layer: Some(layer),
            index: Some(neuron),
        }
    }

    pub fn attn_head(layer: usize, head: usize) -> Self {
        ProbeId {
            kind: ProbeKind::AttnHeadNorm,
            layer: Some(layer),
            index: Some(head),
        }
    }

    pub fn log_likelihood() -> Self {
        ProbeId {
            kind: ProbeKind::LogLikelihood,
            layer: None,
            index: None,
        }
    }

    /// Checks that layer/index presence matches the kind.
    pub fn validate_shape(&self) -> Result<()> {
        let ok = match self.kind {
            ProbeKind::MlpKey | ProbeKind::AttnHeadNorm => {
                self.layer.is_some() && self.index.is_some()
            }
            ProbeKind::LogLikelihood => self.layer.is_none() && self.index.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProbe {
                probe: self.to_string(),
                reason: "layer/index presence does not match kind".into(),
            })
        }
    }

    /// Ordering used to break accuracy ties during selection:
    /// lower layer, then lower index, then kind (mlp_key first).
    pub fn tie_break_cmp(&self, other: &Self) -> Ordering {
        let key = |p: &ProbeId| {
            (
                p.layer.unwrap_or(usize::MAX),
                p.index.unwrap_or(usize::MAX),
                p.kind,
            )
        };
        key(self).cmp(&key(other))
    }
}

impl fmt::Display for ProbeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.layer, self.index) {
            (Some(l), Some(i)) => write!(f, "{}:{}:{}", self.kind.as_str(), l, i),
            (Some(l), None) => write!(f, "{}:{}", self.kind.as_str(), l),
            _ => f.write_str(self.kind.as_str()),
        }
    }
}

impl FromStr for ProbeId {
    type Err = Error;

    /// Parses `kind[:layer:index]`, e.g. `mlp_key:1:7`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind: ProbeKind = parts.next().unwrap_or_default().parse()?;
        let num = |p: Option<&str>| -> Result<Option<usize>> {
            p.map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("bad probe number `{v}` in `{s}`")))
            })
            .transpose()
        };
        let layer = num(parts.next())?;
        let index = num(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::InvalidInput(format!("too many fields in probe `{s}`")));
        }
        let id = ProbeId { kind, layer, index };
        id.validate_shape()?;
        Ok(id)
    }
}
