//! Scenario config files: loading, `--param` overrides and located errors.

use std::path::{Path, PathBuf};

use mlagent_core::scenarios::ScenarioSpec;
use serde::Deserialize;
use serde_json::Value as Json;

/// Built-in default configs, one per scenario.
pub const SHIPPED: [(&str, &str); 4] = [
    ("epidemic", include_str!("../scenarios/epidemic.json")),
    (
        "configuration",
        include_str!("../scenarios/configuration.json"),
    ),
    ("mediation", include_str!("../scenarios/mediation.json")),
    ("custom", include_str!("../scenarios/custom.json")),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("FileNotFound: {0}")]
    FileNotFound(PathBuf),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("ParseError at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("bad --param {0}")]
    Param(String),
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("config describes scenario {found}, not {expected}")]
    ScenarioMismatch { expected: String, found: String },
    #[error("no scenario given; pass --scenario or --config")]
    Missing,
}

impl ConfigError {
    fn parse(e: serde_json::Error) -> Self {
        ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: crate::strip_location(&e.to_string()),
        }
    }
}

/// A config file: any scenario plus an optional default step count.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub steps: Option<u64>,
    #[serde(flatten)]
    pub spec: ScenarioSpec,
}

impl ScenarioFile {
    /// Parses config text, then applies `key=value` overrides.
    pub fn parse(text: &str, params: &[String]) -> Result<Self, ConfigError> {
        if params.is_empty() {
            return serde_json::from_str(text).map_err(ConfigError::parse);
        }
        let mut doc: Json = serde_json::from_str(text).map_err(ConfigError::parse)?;
        for p in params {
            apply_param(&mut doc, p)?;
        }
        let text = serde_json::to_string_pretty(&doc).expect("json values serialize");
        serde_json::from_str(&text).map_err(|e| match ConfigError::parse(e) {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                line: 0,
                column: 0,
                message: format!("{message} (after --param overrides)"),
            },
            other => other,
        })
    }

    pub fn load(path: &Path, params: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ConfigError::FileNotFound(path.to_path_buf()),
            _ => ConfigError::Io {
                path: path.to_path_buf(),
                message: e.to_string(),
            },
        })?;
        Self::parse(&text, params)
    }

    pub fn shipped(name: &str, params: &[String]) -> Result<Self, ConfigError> {
        let text = shipped_text(name).ok_or_else(|| ConfigError::UnknownScenario(name.into()))?;
        Self::parse(text, params)
    }

    /// Loads from `--config` if given, else the shipped default for
    /// `--scenario`. With both, the file must describe that scenario.
    pub fn resolve(
        scenario: Option<&str>,
        config: Option<&Path>,
        params: &[String],
    ) -> Result<Self, ConfigError> {
        match (scenario, config) {
            (_, Some(path)) => {
                let file = Self::load(path, params)?;
                if let Some(name) = scenario {
                    if shipped_text(name).is_none() {
                        return Err(ConfigError::UnknownScenario(name.into()));
                    }
                    if file.spec.name() != name {
                        return Err(ConfigError::ScenarioMismatch {
                            expected: name.into(),
                            found: file.spec.name().into(),
                        });
                    }
                }
                Ok(file)
            }
            (Some(name), None) => Self::shipped(name, params),
            (None, None) => Err(ConfigError::Missing),
        }
    }

    /// Step count when neither the file nor the command line sets one.
    pub fn default_steps(&self) -> u64 {
        self.steps.unwrap_or(match self.spec {
            ScenarioSpec::Epidemic(_) => 100,
            _ => 20,
        })
    }
}

pub fn shipped_text(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Sets a dotted path (`a.b.0.c`) in a JSON document. The value is read as
/// JSON, or as a string if that fails.
pub fn apply_param(doc: &mut Json, param: &str) -> Result<(), ConfigError> {
    let (path, raw) = param
        .split_once('=')
        .ok_or_else(|| ConfigError::Param(format!("{param}: expected key=value")))?;
    if path.is_empty() {
        return Err(ConfigError::Param(format!("{param}: empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Json::String(raw.into()));
    let mut cur = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        cur = match cur {
            Json::Object(map) => {
                if last {
                    map.insert((*seg).into(), value);
                    return Ok(());
                }
                map.entry(*seg)
                    .or_insert_with(|| Json::Object(Default::default()))
            }
            Json::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| ConfigError::Param(format!("{param}: {seg} is not an index")))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    ConfigError::Param(format!("{param}: index {idx} out of range ({len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(ConfigError::Param(format!(
                    "{param}: {} is not an object or array",
                    segments[..i].join(".")
                )))
            }
        };
    }
    unreachable!("loop returns on the last segment")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_params() {
        let mut doc = json!({"a": {"b": [1, {"c": 2}]}, "s": "x"});
        apply_param(&mut doc, "a.b.1.c=0.5").unwrap();
        apply_param(&mut doc, "a.new=true").unwrap();
        apply_param(&mut doc, "s=plain text").unwrap();
        apply_param(&mut doc, "list=[1,2]").unwrap();
        assert_eq!(
            doc,
            json!({"a": {"b": [1, {"c": 0.5}], "new": true}, "s": "plain text", "list": [1, 2]})
        );
        assert!(apply_param(&mut doc, "a.b.9=1").is_err());
        assert!(apply_param(&mut doc, "s.x=1").is_err());
        assert!(apply_param(&mut doc, "novalue").is_err());
    }

    #[test]
    fn parse_error_has_location() {
        let err =
            ScenarioFile::parse("{\n  \"scenario\": \"mediation\",\n  oops\n}", &[]).unwrap_err();
        match err {
            ConfigError::Parse { line, column, .. } => assert_eq!((line, column), (3, 3)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn shipped_configs_parse() {
        for (name, _) in SHIPPED {
            let f = ScenarioFile::shipped(name, &[]).unwrap();
            assert_eq!(f.spec.name(), name);
        }
    }
}
