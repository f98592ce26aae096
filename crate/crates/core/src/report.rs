//! Output writers that embed the code version and the resolved run
//! configuration.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// What produced an output: crate version plus the configuration as JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Io(e.to_string()))?;
        Ok(Provenance {
            version: crate::VERSION.to_string(),
            command: command.to_string(),
            config,
        })
    }

    /// `#` comment lines placed before a CSV header.
    pub fn csv_preamble(&self) -> String {
        format!(
            "# orthodual {} {}\n# config: {}\n",
            self.version,
            self.command,
            serde_json::to_string(&self.config).unwrap_or_default()
        )
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes the preamble and then whatever `body` emits.
pub fn write_csv<W: Write>(
    mut w: W,
    prov: &Provenance,
    body: impl FnOnce(&mut W) -> std::io::Result<()>,
) -> Result<()> {
    w.write_all(prov.csv_preamble().as_bytes()).map_err(io)?;
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// Pretty JSON of `report` with `version`, `command` and `config` added at
/// the top level (objects), or wrapped under `report` (anything else).
pub fn to_json(report: &impl Serialize, prov: &Provenance) -> Result<String> {
    let body = serde_json::to_value(report).map_err(|e| Error::Io(e.to_string()))?;
    let mut map = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("report".into(), other);
            m
        }
    };
    map.insert("version".into(), Value::String(prov.version.clone()));
    map.insert("command".into(), Value::String(prov.command.clone()));
    map.insert("config".into(), prov.config.clone());
    let mut s =
        serde_json::to_string_pretty(&Value::Object(map)).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<W: Write>(mut w: W, report: &impl Serialize, prov: &Provenance) -> Result<()> {
    w.write_all(to_json(report, prov)?.as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Cfg {
        seed: u64,
        n: Vec<usize>,
    }

    #[test]
    fn csv_has_preamble_then_body() {
        let prov = Provenance::new(
            "kernel",
            &Cfg {
                seed: 3,
                n: vec![1, 2],
            },
        )
        .unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, &prov, |w| writeln!(w, "x0,probability")).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# orthodual "));
        assert_eq!(lines[1], r#"# config: {"n":[1,2],"seed":3}"#);
        assert_eq!(lines[2], "x0,probability");
    }

    #[test]
    fn json_merges_provenance() {
        let prov = Provenance::new("scaling", &Cfg { seed: 1, n: vec![] }).unwrap();
        let s = to_json(&serde_json::json!({"value": 2.5}), &prov).unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["value"], 2.5);
        assert_eq!(v["version"], crate::VERSION);
        assert_eq!(v["config"]["seed"], 1);
        let wrapped: Value = serde_json::from_str(&to_json(&[1, 2], &prov).unwrap()).unwrap();
        assert_eq!(wrapped["report"][1], 2);
    }
}
