//! Line-oriented `key = value` server configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::LevelFilter;
use thiserror::Error;
use uaengine::nsimage::{acceptance_image, NamespaceImage};
use uaengine::s3::{EngineConfig, ServicePrograms};
use uaengine::streamvm::VmProgram;
use uaengine::transport::ServerInfo;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {value:?}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    BadFile { path: PathBuf, reason: String },
    #[error("engine: {0}")]
    Engine(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Host name placed in the advertised endpoint URL.
    pub endpoint_host: String,
    pub engine: EngineConfig,
    /// Compiled namespace image; the bundled model when absent.
    pub namespace: Option<PathBuf>,
    /// Service program images; the bundled programs when empty.
    pub programs: Vec<PathBuf>,
    pub max_connections: usize,
    pub idle_timeout_s: u64,
    pub log_level: LevelFilter,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "0.0.0.0".into(),
            port: 4840,
            endpoint_host: "localhost".into(),
            engine: EngineConfig::default(),
            namespace: None,
            programs: Vec::new(),
            max_connections: 16,
            idle_timeout_s: 120,
            log_level: LevelFilter::Info,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

impl ServerConfig {
    /// Parses config text. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = ServerConfig::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let Some((key, value)) = l.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    reason: "expected key = value".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue {
                line,
                key: key.into(),
                value: value.into(),
            };
            fn num<T: FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
                v.replace('_', "").parse().map_err(|_| bad())
            }
            let e = &mut cfg.engine;
            match key {
                "host" => cfg.host = value.into(),
                "port" => {
                    cfg.port = num(value, bad)?;
                    if cfg.port == 0 {
                        return Err(bad());
                    }
                }
                "endpoint_host" => cfg.endpoint_host = value.into(),
                "namespace" => cfg.namespace = Some(base.join(value)),
                "programs" => {
                    cfg.programs = value
                        .split(',')
                        .map(str::trim)
                        .filter(|p| !p.is_empty())
                        .map(|p| base.join(p))
                        .collect()
                }
                "max_connections" => cfg.max_connections = num(value, bad)?,
                "idle_timeout_s" => cfg.idle_timeout_s = num(value, bad)?,
                "log_level" => cfg.log_level = value.parse().map_err(|_| bad())?,
                "num_stages" => e.num_stages = num(value, bad)?,
                "buffer_bytes_per_stage" => e.buffer_bytes_per_stage = num(value, bad)?,
                "total_buffer_bytes" => e.total_buffer_bytes = num(value, bad)?,
                "max_chunk_count" => e.max_chunk_count = num(value, bad)?,
                "fragmentation" => e.fragmentation = parse_bool(value).ok_or_else(bad)?,
                "multi_session" => e.multi_session = parse_bool(value).ok_or_else(bad)?,
                "max_session_timeout_ms" => e.max_session_timeout_ms = num(value, bad)?,
                "cycle_budget" => e.cycle_budget = num(value, bad)?,
                "seed" => {
                    e.seed = match value {
                        "random" => None,
                        v => Some(num(v, bad)?),
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.into(),
                    })
                }
            }
        }
        if cfg.max_connections == 0 {
            return Err(ConfigError::Engine(
                "max_connections must be positive".into(),
            ));
        }
        cfg.engine
            .validate()
            .map_err(|e| ConfigError::Engine(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Config text that parses back to `self`, with absolute paths.
    pub fn to_text(&self) -> String {
        let e = &self.engine;
        let mut s = String::new();
        let _ = writeln!(s, "host = {}", self.host);
        let _ = writeln!(s, "port = {}", self.port);
        let _ = writeln!(s, "endpoint_host = {}", self.endpoint_host);
        if let Some(p) = &self.namespace {
            let _ = writeln!(s, "namespace = {}", absolute(p).display());
        }
        if !self.programs.is_empty() {
            let list: Vec<String> = self
                .programs
                .iter()
                .map(|p| absolute(p).display().to_string())
                .collect();
            let _ = writeln!(s, "programs = {}", list.join(", "));
        }
        let _ = writeln!(s, "max_connections = {}", self.max_connections);
        let _ = writeln!(s, "idle_timeout_s = {}", self.idle_timeout_s);
        let _ = writeln!(s, "log_level = {}", self.log_level);
        let _ = writeln!(s, "num_stages = {}", e.num_stages);
        let _ = writeln!(s, "buffer_bytes_per_stage = {}", e.buffer_bytes_per_stage);
        let _ = writeln!(s, "total_buffer_bytes = {}", e.total_buffer_bytes);
        let _ = writeln!(s, "max_chunk_count = {}", e.max_chunk_count);
        let _ = writeln!(s, "fragmentation = {}", e.fragmentation);
        let _ = writeln!(s, "multi_session = {}", e.multi_session);
        let _ = writeln!(s, "max_session_timeout_ms = {}", e.max_session_timeout_ms);
        let _ = writeln!(s, "cycle_budget = {}", e.cycle_budget);
        match e.seed {
            Some(seed) => writeln!(s, "seed = {seed}"),
            None => writeln!(s, "seed = random"),
        }
        .ok();
        s
    }

    pub fn endpoint_url(&self) -> String {
        format!("opc.tcp://{}:{}/", self.endpoint_host, self.port)
    }

    pub fn server_info(&self) -> ServerInfo {
        ServerInfo {
            endpoint_url: self.endpoint_url(),
            ..ServerInfo::default()
        }
    }

    /// Loads and verifies the namespace image.
    pub fn load_image(&self) -> Result<NamespaceImage, ConfigError> {
        let Some(path) = &self.namespace else {
            return Ok(acceptance_image());
        };
        let bytes = fs::read(path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        NamespaceImage::load(bytes).map_err(|e| ConfigError::BadFile {
            path: path.clone(),
            reason: e.to_string(),
        })
    }

    /// Loads and decodes the service programs.
    pub fn load_programs(&self) -> Result<ServicePrograms, ConfigError> {
        if self.programs.is_empty() {
            return ServicePrograms::bundled().map_err(|e| ConfigError::Engine(e.to_string()));
        }
        let mut out = Vec::new();
        for path in &self.programs {
            let bytes = fs::read(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            let name = path
                .file_stem()
                .map_or("program".into(), |s| s.to_string_lossy().into_owned());
            out.push(
                VmProgram::from_image(&name, &bytes).map_err(|e| ConfigError::BadFile {
                    path: path.clone(),
                    reason: e.to_string(),
                })?,
            );
        }
        Ok(ServicePrograms::new(out))
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        let c = ServerConfig::parse("# nothing\n\n", Path::new(".")).unwrap();
        assert_eq!(c, ServerConfig::default());
        assert_eq!(c.idle_timeout_s, 120);
        assert_eq!(c.endpoint_url(), "opc.tcp://localhost:4840/");
    }

    #[test]
    fn parses_keys() {
        let text = "port = 4841\nnum_stages=2 # two\nseed = random\nfragmentation = off\nnamespace = m.nsim\n";
        let c = ServerConfig::parse(text, Path::new("/etc/ua")).unwrap();
        assert_eq!(c.port, 4841);
        assert_eq!(c.engine.num_stages, 2);
        assert_eq!(c.engine.seed, None);
        assert!(!c.engine.fragmentation);
        assert_eq!(c.namespace, Some(PathBuf::from("/etc/ua/m.nsim")));
    }

    #[test]
    fn rejects_bad_lines() {
        let base = Path::new(".");
        assert!(matches!(
            ServerConfig::parse("port 1", base),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            ServerConfig::parse("\ncolour = red", base),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            ServerConfig::parse("port = 0", base),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ServerConfig::parse("port = 70000", base),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ServerConfig::parse("num_stages = 4", base),
            Err(ConfigError::Engine(_))
        ));
    }

    #[test]
    fn text_roundtrip() {
        let mut c = ServerConfig::default();
        c.engine.seed = None;
        c.port = 5000;
        c.programs = vec![PathBuf::from("/p/a.uavm"), PathBuf::from("/p/b.uavm")];
        assert_eq!(
            ServerConfig::parse(&c.to_text(), Path::new("/")).unwrap(),
            c
        );
    }

    #[test]
    fn missing_image_is_an_error() {
        let c = ServerConfig {
            namespace: Some("/nonexistent/x.nsim".into()),
            ..ServerConfig::default()
        };
        assert!(matches!(c.load_image(), Err(ConfigError::Io { .. })));
    }
}
