//! Embedding provider selection: `stub[:SEED]`, `echo[:DIM]` or `sidecar:ROOT`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use affectlab::embedding::{EmbeddingProvider, SidecarProvider, StubProvider, DEFAULT_DIM};
use affectlab::image::RgbImage;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    Stub {
        #[serde(default)]
        seed: u64,
    },
    /// Zero vectors; exercises the pipeline without any model.
    Echo {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Sidecar {
        root: PathBuf,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_timeout() -> f64 {
    300.0
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Stub { seed: 0 }
    }
}

impl FromStr for ProviderConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: usize| -> Result<usize, String> {
            a.map_or(Ok(default), |a| {
                a.parse().map_err(|_| format!("bad number {a:?} in provider {s:?}"))
            })
        };
        match kind {
            "stub" => Ok(ProviderConfig::Stub {
                seed: num(arg, 0)? as u64,
            }),
            "echo" => Ok(ProviderConfig::Echo {
                dim: num(arg, DEFAULT_DIM)?,
            }),
            "sidecar" => match arg {
                Some(root) if !root.is_empty() => Ok(ProviderConfig::Sidecar {
                    root: root.into(),
                    dim: DEFAULT_DIM,
                    timeout_s: default_timeout(),
                }),
                _ => Err("sidecar provider needs a root: sidecar:DIR".into()),
            },
            _ => Err(format!(
                "unknown provider {s:?}; expected stub[:SEED], echo[:DIM] or sidecar:DIR"
            )),
        }
    }
}

impl fmt::Display for ProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderConfig::Stub { seed } => write!(f, "stub:{seed}"),
            ProviderConfig::Echo { dim } => write!(f, "echo:{dim}"),
            ProviderConfig::Sidecar { root, .. } => write!(f, "sidecar:{}", root.display()),
        }
    }
}

struct EchoProvider {
    dim: usize,
}

impl EmbeddingProvider for EchoProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("echo:{}", self.dim)
    }

    fn embed_batch(&self, images: &[RgbImage]) -> affectlab::Result<Vec<Vec<f64>>> {
        Ok(vec![vec![0.0; self.dim]; images.len()])
    }
}

impl ProviderConfig {
    pub fn build(&self) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderConfig::Stub { seed } => Box::new(StubProvider::new(*seed)),
            ProviderConfig::Echo { dim } => Box::new(EchoProvider { dim: *dim }),
            ProviderConfig::Sidecar { root, dim, timeout_s } => {
                anyhow::ensure!(*timeout_s > 0.0, "sidecar timeout must be positive");
                Box::new(SidecarProvider::new(root, *dim).with_timeout(Duration::from_secs_f64(*timeout_s)))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(
            "stub".parse::<ProviderConfig>().unwrap(),
            ProviderConfig::Stub { seed: 0 }
        );
        assert_eq!(
            "stub:7".parse::<ProviderConfig>().unwrap(),
            ProviderConfig::Stub { seed: 7 }
        );
        assert_eq!(
            "echo:16".parse::<ProviderConfig>().unwrap(),
            ProviderConfig::Echo { dim: 16 }
        );
        assert!(matches!(
            "sidecar:/x".parse::<ProviderConfig>().unwrap(),
            ProviderConfig::Sidecar { .. }
        ));
        assert!("sidecar".parse::<ProviderConfig>().is_err());
        assert!("stub:x".parse::<ProviderConfig>().is_err());
        assert!("vgg".parse::<ProviderConfig>().is_err());
        let json = r#"{"kind":"sidecar","root":"/ex","timeout_s":5}"#;
        let p: ProviderConfig = serde_json::from_str(json).unwrap();
        assert_eq!(p.to_string(), "sidecar:/ex");
    }
}
