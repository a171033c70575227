use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use scholnet::canonical::{canonical_decode, canonical_encode};

/// Environment variable that overrides the config file location.
pub const CONFIG_ENV: &str = "SCHOLNET_CONFIG";

pub const DEFAULT_CONFIG_FILE: &str = "scholnet.canon";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Text,
    Canonical,
    Feed,
}

/// Settings shared by every command, stored in canonical form.
///
/// Relative paths are resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub data_dir: String,
    /// Store node configuration file; defaults to `node.canon` in the data directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_authority: Option<String>,
    /// Trust anchors file; defaults to `anchors.canon` in the data directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust_anchors: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig { data_dir: ".scholnet".into(), node: None, default_authority: None, trust_anchors: None, format: OutputFormat::Text }
    }
}

impl CliConfig {
    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("config is encodable").into_vec()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        canonical_decode(trim_newline(bytes)).map_err(|e| anyhow!("bad config: {e}"))
    }
}

/// A loaded configuration together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: CliConfig,
    pub path: PathBuf,
    pub exists: bool,
}

impl Loaded {
    /// Reads the config file if present; a missing file means defaults.
    pub fn load(path: PathBuf) -> Result<Self> {
        match fs::read(&path) {
            Ok(bytes) => Ok(Loaded { config: CliConfig::from_bytes(&bytes).with_context(|| path.display().to_string())?, path, exists: true }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Loaded { config: CliConfig::default(), path, exists: false }),
            Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
        }
    }

    pub fn save(&self) -> Result<()> {
        let mut bytes = self.config.to_bytes();
        bytes.push(b'\n');
        fs::write(&self.path, bytes).with_context(|| format!("writing {}", self.path.display()))
    }

    fn base(&self) -> &Path {
        self.path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base().join(p)
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(&self.config.data_dir)
    }

    pub fn node_file(&self) -> PathBuf {
        self.config.node.as_deref().map_or_else(|| self.data_dir().join("node.canon"), |p| self.resolve(p))
    }

    pub fn anchors_file(&self) -> PathBuf {
        self.config.trust_anchors.as_deref().map_or_else(|| self.data_dir().join("anchors.canon"), |p| self.resolve(p))
    }
}

pub fn trim_newline(bytes: &[u8]) -> &[u8] {
    bytes.strip_suffix(b"\n").unwrap_or(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let c = CliConfig {
            data_dir: "data".into(),
            node: Some("node.canon".into()),
            default_authority: Some("tsa".into()),
            trust_anchors: None,
            format: OutputFormat::Canonical,
        };
        let bytes = c.to_bytes();
        assert_eq!(CliConfig::from_bytes(&bytes).unwrap(), c);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            r#"{"data_dir":"data","default_authority":"tsa","format":"canonical","node":"node.canon"}"#
        );
        assert_eq!(CliConfig::from_bytes(br#"{"data_dir":"d"}"#).unwrap().format, OutputFormat::Text);
    }
}
