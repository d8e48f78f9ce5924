//! Run configuration files.
//!
//! A config is a flat list of `dotted.key = value` assignments (TOML syntax,
//! so `[section]` headers also work). Holes are numbered from 1:
//!
//! ```text
//! hole.1.weight = 0.2
//! hole.1.mean   = [80, 250]
//! hole.1.cov    = [[15, 0], [0, 20]]
//! ```
//!
//! Every other key is optional and falls back to [`SimConfig::with_model`]'s
//! defaults. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use toml_edit::{Document, Item, Table, Value};

use crate::error::{ValidationError, Violation};
use crate::export::fmt_g17;
use crate::sim::{HoleConfig, SimConfig};

/// The bundled three-hole scenario.
pub const THREE_HOLE_CONFIG: &str = include_str!("../configs/three_holes.toml");

const SCALAR_KEYS: &[&str] = &[
    "domain.x_min",
    "domain.x_max",
    "domain.y_min",
    "domain.y_max",
    "grid.nx",
    "grid.ny",
    "robot.start",
    "robot.cov",
    "robot.v_max",
    "timing.beta",
    "timing.gamma",
    "masks.sigma_level",
    "stamp.radius_sigmas",
    "sim.v_every",
    "sim.max_steps",
    "sim.snapshots",
];

const HOLE_FIELDS: &[&str] = &["weight", "mean", "cov"];

/// Weight, mean and covariance of one hole as they are read.
type HoleSlot = (Option<f64>, Option<[f64; 2]>, Option<[[f64; 2]; 2]>);

#[derive(Debug, Clone)]
struct Entry {
    value: Value,
    line: Option<usize>,
}

/// Key/value pairs gathered from a file plus command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn flatten(src: &str, table: &Table, prefix: &str, out: &mut BTreeMap<String, Entry>, errors: &mut Vec<Violation>) {
    for (key, item) in table.iter() {
        let path = if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        };
        let line = table.key(key).and_then(|k| k.span()).map(|s| line_of(src, s.start));
        match item {
            Item::Table(t) => flatten(src, t, &path, out, errors),
            Item::Value(Value::InlineTable(t)) => {
                let t = t.clone().into_table();
                for (k, v) in t.iter() {
                    if let Item::Value(v) = v {
                        out.insert(format!("{path}.{k}"), Entry { value: v.clone(), line });
                    }
                }
            }
            Item::Value(v) => {
                out.insert(path, Entry { value: v.clone(), line });
            }
            Item::ArrayOfTables(_) => {
                errors.push(Violation::new(path, "arrays of tables are not supported").at_line(line))
            }
            Item::None => {}
        }
    }
}

fn known_key(key: &str) -> bool {
    if SCALAR_KEYS.contains(&key) {
        return true;
    }
    let parts: Vec<&str> = key.split('.').collect();
    parts.len() == 3
        && parts[0] == "hole"
        && parts[1].parse::<usize>().is_ok_and(|n| n >= 1)
        && HOLE_FIELDS.contains(&parts[2])
}

impl RawConfig {
    pub fn parse(src: &str) -> Result<Self, ValidationError> {
        let doc = Document::parse(src).map_err(|e| {
            let line = e.span().map(|s| line_of(src, s.start));
            ValidationError {
                violations: vec![Violation::new("config", format!("malformed syntax: {}", e.message())).at_line(line)],
            }
        })?;
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        flatten(src, doc.as_table(), "", &mut entries, &mut errors);
        for (key, entry) in &entries {
            if !known_key(key) {
                errors.push(Violation::new(key.clone(), "unknown key").at_line(entry.line));
            }
        }
        if errors.is_empty() {
            Ok(RawConfig { entries })
        } else {
            Err(ValidationError { violations: errors })
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ValidationError> {
        let src = std::fs::read_to_string(path).map_err(|e| ValidationError {
            violations: vec![Violation::new("config", format!("cannot read {}: {e}", path.display()))],
        })?;
        Self::parse(&src)
    }

    /// Resolves `key` (a full dotted key, or a suffix such as `v_max` that
    /// names exactly one known key) and overrides it with `value`, given in
    /// TOML value syntax.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ValidationError> {
        let mut candidates: Vec<String> = SCALAR_KEYS.iter().map(|s| s.to_string()).collect();
        candidates.extend(self.entries.keys().filter(|k| k.starts_with("hole.")).cloned());
        let resolved = if known_key(key) {
            key.to_string()
        } else {
            let suffix = format!(".{key}");
            let matches: Vec<&String> = candidates.iter().filter(|c| c.ends_with(&suffix)).collect();
            match matches.as_slice() {
                [one] => (*one).clone(),
                [] => return Err(single(key, "unknown key in override")),
                _ => return Err(single(key, "ambiguous override key; use the full dotted name")),
            }
        };
        let value: Value = value
            .trim()
            .parse()
            .map_err(|_| single(&resolved, format!("override value `{value}` is not a valid value")))?;
        self.entries.insert(resolved, Entry { value, line: None });
        Ok(())
    }

    /// Builds and validates the configuration. All problems, including
    /// type errors and failed checks, are reported together.
    pub fn resolve(&self) -> Result<SimConfig, ValidationError> {
        let mut errors = Vec::new();
        let mut holes: BTreeMap<usize, HoleSlot> = BTreeMap::new();
        for (key, entry) in &self.entries {
            let Some(rest) = key.strip_prefix("hole.") else {
                continue;
            };
            let (n, field) = rest.split_once('.').expect("hole keys are validated");
            let n: usize = n.parse().expect("hole keys are validated");
            let slot = holes.entry(n).or_default();
            let at = |e: Violation| e.at_line(entry.line);
            match field {
                "weight" => slot.0 = as_f64(key, &entry.value).map_err(|e| errors.push(at(e))).ok(),
                "mean" => slot.1 = as_point(key, &entry.value).map_err(|e| errors.push(at(e))).ok(),
                "cov" => slot.2 = as_matrix(key, &entry.value).map_err(|e| errors.push(at(e))).ok(),
                _ => unreachable!(),
            }
        }
        if holes.is_empty() {
            errors.push(Violation::new(
                "hole",
                "no holes defined; the mixture model is mandatory",
            ));
        }
        let mut hole_list = Vec::new();
        for (expect, (&n, slot)) in (1..).zip(&holes) {
            if n != expect {
                errors.push(Violation::new(
                    format!("hole.{n}"),
                    format!("holes must be numbered 1..m; hole {expect} is missing"),
                ));
                break;
            }
            let missing: Vec<&str> = [
                ("weight", slot.0.is_none()),
                ("mean", slot.1.is_none()),
                ("cov", slot.2.is_none()),
            ]
            .iter()
            .filter(|(_, m)| *m)
            .map(|(f, _)| *f)
            .collect();
            for f in &missing {
                let key = format!("hole.{n}.{f}");
                if !self.entries.contains_key(&key) {
                    errors.push(Violation::new(key, "missing"));
                }
            }
            if missing.is_empty() {
                hole_list.push(HoleConfig {
                    weight: slot.0.unwrap(),
                    mean: slot.1.unwrap(),
                    cov: slot.2.unwrap(),
                });
            }
        }

        let mut cfg = SimConfig::with_model(hole_list, [0.0, 0.0]);
        let mut start_given = false;
        for (key, entry) in &self.entries {
            if key.starts_with("hole.") {
                continue;
            }
            let v = &entry.value;
            let res: Result<(), Violation> = (|| {
                match key.as_str() {
                    "domain.x_min" => cfg.grid.x_min = as_f64(key, v)?,
                    "domain.x_max" => cfg.grid.x_max = as_f64(key, v)?,
                    "domain.y_min" => cfg.grid.y_min = as_f64(key, v)?,
                    "domain.y_max" => cfg.grid.y_max = as_f64(key, v)?,
                    "grid.nx" => cfg.grid.nx = as_u64(key, v)? as usize,
                    "grid.ny" => cfg.grid.ny = as_u64(key, v)? as usize,
                    "robot.start" => {
                        cfg.start = as_point(key, v)?;
                        start_given = true;
                    }
                    "robot.cov" => cfg.sigma_r = as_matrix(key, v)?,
                    "robot.v_max" => cfg.v_max = as_f64(key, v)?,
                    "timing.beta" => cfg.beta = as_f64(key, v)?,
                    "timing.gamma" => cfg.gamma = as_f64(key, v)?,
                    "masks.sigma_level" => cfg.sigma_level = as_f64(key, v)?,
                    "stamp.radius_sigmas" => cfg.stamp_radius = as_f64(key, v)?,
                    "sim.v_every" => cfg.v_every = as_u64(key, v)?,
                    "sim.max_steps" => cfg.max_steps = as_u64(key, v)?,
                    "sim.snapshots" => {
                        let arr = v
                            .as_array()
                            .ok_or_else(|| Violation::new(key.clone(), "expected an array of steps"))?;
                        cfg.snapshots = Some(arr.iter().map(|x| as_u64(key, x)).collect::<Result<_, _>>()?);
                    }
                    _ => unreachable!("unknown keys are rejected at parse time"),
                }
                Ok(())
            })();
            if let Err(e) = res {
                errors.push(e.at_line(entry.line));
            }
        }
        if !start_given {
            cfg.start = [
                0.5 * (cfg.grid.x_min + cfg.grid.x_max),
                0.5 * (cfg.grid.y_min + cfg.grid.y_max),
            ];
        }
        if errors.is_empty() {
            for v in cfg.violations() {
                let line = self.line_for(&v.key);
                errors.push(v.at_line(line));
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ValidationError { violations: errors })
        }
    }

    fn line_for(&self, key: &str) -> Option<usize> {
        if let Some(e) = self.entries.get(key) {
            return e.line;
        }
        // Wildcard keys such as `hole.*.weight` point at the first match.
        let (head, tail) = key.split_once(".*.")?;
        self.entries
            .iter()
            .find(|(k, _)| k.starts_with(head) && k.ends_with(tail))
            .and_then(|(_, e)| e.line)
    }
}

fn single(key: &str, msg: impl Into<String>) -> ValidationError {
    ValidationError {
        violations: vec![Violation::new(key, msg)],
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, Violation> {
    match v {
        Value::Float(f) => Ok(*f.value()),
        Value::Integer(i) => Ok(*i.value() as f64),
        _ => Err(Violation::new(key, "expected a number")),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, Violation> {
    match v {
        Value::Integer(i) if *i.value() >= 0 => Ok(*i.value() as u64),
        _ => Err(Violation::new(key, "expected a non-negative integer")),
    }
}

fn as_point(key: &str, v: &Value) -> Result<[f64; 2], Violation> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Violation::new(key, "expected [x, y]"))?;
    Ok([as_f64(key, arr.get(0).unwrap())?, as_f64(key, arr.get(1).unwrap())?])
}

fn as_matrix(key: &str, v: &Value) -> Result<[[f64; 2]; 2], Violation> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Violation::new(key, "expected [[a, b], [c, d]]"))?;
    let row =
        |i: usize| as_point(key, arr.get(i).unwrap()).map_err(|_| Violation::new(key, "expected [[a, b], [c, d]]"));
    Ok([row(0)?, row(1)?])
}

/// Reads, applies `overrides` (`key=value` strings) and validates.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<SimConfig, ValidationError> {
    let mut raw = RawConfig::from_file(path)?;
    apply_overrides(&mut raw, overrides)?;
    raw.resolve()
}

pub fn parse_config_str(src: &str) -> Result<SimConfig, ValidationError> {
    RawConfig::parse(src)?.resolve()
}

pub fn apply_overrides(raw: &mut RawConfig, overrides: &[String]) -> Result<(), ValidationError> {
    let mut errors = Vec::new();
    for o in overrides {
        match o.split_once('=') {
            Some((k, v)) => {
                if let Err(e) = raw.set(k.trim(), v) {
                    errors.extend(e.violations);
                }
            }
            None => errors.push(Violation::new(o.clone(), "override must look like key=value")),
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ValidationError { violations: errors })
    }
}

/// Writes `cfg` back out in the config-file format with every default
/// spelled out; parsing the result yields `cfg` again.
pub fn emit_config(cfg: &SimConfig) -> String {
    let mut s = String::new();
    let pt = |p: &[f64; 2]| format!("[{}, {}]", fmt_g17(p[0]), fmt_g17(p[1]));
    let mat = |m: &[[f64; 2]; 2]| format!("[{}, {}]", pt(&m[0]), pt(&m[1]));
    let g = &cfg.grid;
    let _ = writeln!(s, "domain.x_min = {}", fmt_float(g.x_min));
    let _ = writeln!(s, "domain.x_max = {}", fmt_float(g.x_max));
    let _ = writeln!(s, "domain.y_min = {}", fmt_float(g.y_min));
    let _ = writeln!(s, "domain.y_max = {}", fmt_float(g.y_max));
    let _ = writeln!(s, "grid.nx = {}", g.nx);
    let _ = writeln!(s, "grid.ny = {}", g.ny);
    s.push('\n');
    for (i, h) in cfg.holes.iter().enumerate() {
        let n = i + 1;
        let _ = writeln!(s, "hole.{n}.weight = {}", fmt_float(h.weight));
        let _ = writeln!(s, "hole.{n}.mean = {}", pt(&h.mean));
        let _ = writeln!(s, "hole.{n}.cov = {}", mat(&h.cov));
    }
    s.push('\n');
    let _ = writeln!(s, "robot.start = {}", pt(&cfg.start));
    let _ = writeln!(s, "robot.cov = {}", mat(&cfg.sigma_r));
    let _ = writeln!(s, "robot.v_max = {}", fmt_float(cfg.v_max));
    let _ = writeln!(s, "timing.beta = {}", fmt_float(cfg.beta));
    let _ = writeln!(s, "timing.gamma = {}", fmt_float(cfg.gamma));
    let _ = writeln!(s, "masks.sigma_level = {}", fmt_float(cfg.sigma_level));
    let _ = writeln!(s, "stamp.radius_sigmas = {}", fmt_float(cfg.stamp_radius));
    let _ = writeln!(s, "sim.v_every = {}", cfg.v_every);
    let _ = writeln!(s, "sim.max_steps = {}", cfg.max_steps);
    if let Some(snaps) = &cfg.snapshots {
        let list: Vec<String> = snaps.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "sim.snapshots = [{}]", list.join(", "));
    }
    s
}

fn fmt_float(v: f64) -> String {
    fmt_g17(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_values() {
        let cfg = parse_config_str(THREE_HOLE_CONFIG).unwrap();
        assert_eq!(cfg.holes.len(), 3);
        assert_eq!(cfg.holes[0].mean, [80.0, 250.0]);
        assert_eq!(cfg.holes[1].mean, [230.0, 60.0]);
        assert_eq!(cfg.holes[2].mean, [300.0, 310.0]);
        let w: Vec<f64> = cfg.holes.iter().map(|h| h.weight).collect();
        assert_eq!(w, vec![0.2, 0.3, 0.5]);
        assert_eq!(cfg.holes[0].cov, [[15.0, 0.0], [0.0, 20.0]]);
        assert_eq!(cfg.holes[1].cov, [[30.0, 0.0], [0.0, 15.0]]);
        assert_eq!(cfg.holes[2].cov, [[15.0, 0.0], [0.0, 15.0]]);
        assert_eq!(cfg.sigma_r, [[3.0, 0.0], [0.0, 3.0]]);
        assert_eq!(cfg.v_max, 10.0);
        assert_eq!(cfg.start, [180.0, 175.0]);
        assert_eq!(cfg, SimConfig::three_holes());
    }

    #[test]
    fn weights_not_summing_to_one() {
        let src = THREE_HOLE_CONFIG.replace("hole.3.weight = 0.5", "hole.3.weight = 0.4");
        let err = parse_config_str(&src).unwrap_err();
        let v = err
            .violations
            .iter()
            .find(|v| v.key == "hole.*.weight")
            .expect("weight violation");
        assert!(v.message.contains("0.2, 0.3, 0.4"), "{}", v.message);
        assert!(v.line.is_some());
    }

    #[test]
    fn empty_file_needs_model() {
        let err = parse_config_str("").unwrap_err();
        assert!(err.violations.iter().any(|v| v.key == "hole"));
        let err = parse_config_str("# nothing here\n\n").unwrap_err();
        assert!(err.violations.iter().any(|v| v.message.contains("mandatory")));
    }

    #[test]
    fn unknown_key_reports_line() {
        let src = "hole.1.weight = 1\nhole.1.mean = [5, 5]\nhole.1.cov = [[1,0],[0,1]]\nrobot.vmax = 3\n";
        let err = parse_config_str(src).unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert_eq!(err.violations[0].key, "robot.vmax");
        assert_eq!(err.violations[0].line, Some(4));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_config_str("hole.1.weight = 1\nhole.1.mean = [5, \n").unwrap_err();
        assert_eq!(err.violations[0].key, "config");
        assert!(err.violations[0].line.is_some());
    }

    #[test]
    fn type_errors_are_collected() {
        let src = "hole.1.weight = \"x\"\nhole.1.mean = [5]\nhole.1.cov = [[1,0],[0,1]]\ngrid.nx = -4\n";
        let err = parse_config_str(src).unwrap_err();
        let keys: Vec<&str> = err.violations.iter().map(|v| v.key.as_str()).collect();
        assert!(keys.contains(&"hole.1.weight"));
        assert!(keys.contains(&"hole.1.mean"));
        assert!(keys.contains(&"grid.nx"));
    }

    #[test]
    fn section_headers_work() {
        let src = "[hole.1]\nweight = 1.0\nmean = [50, 50]\ncov = [[4, 0], [0, 4]]\n[robot]\nv_max = 2\n";
        let cfg = parse_config_str(src).unwrap();
        assert_eq!(cfg.v_max, 2.0);
        assert_eq!(cfg.start, [200.0, 200.0]);
    }

    #[test]
    fn overrides_resolve_suffixes() {
        let mut raw = RawConfig::parse(THREE_HOLE_CONFIG).unwrap();
        raw.set("v_max", "0").unwrap();
        let err = raw.resolve().unwrap_err();
        assert_eq!(err.violations[0].key, "robot.v_max");
        let mut raw = RawConfig::parse(THREE_HOLE_CONFIG).unwrap();
        assert!(raw.set("weight", "0.1").is_err());
        assert!(raw.set("nope", "1").is_err());
        raw.set("hole.2.mean", "[231, 61]").unwrap();
        raw.set("max_steps", "77").unwrap();
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.holes[1].mean, [231.0, 61.0]);
        assert_eq!(cfg.max_steps, 77);
    }

    #[test]
    fn missing_hole_number() {
        let src = "hole.1.weight = 0.5\nhole.1.mean = [5, 5]\nhole.1.cov = [[1,0],[0,1]]\nhole.3.weight = 0.5\nhole.3.mean = [9, 9]\nhole.3.cov = [[1,0],[0,1]]\n";
        let err = parse_config_str(src).unwrap_err();
        assert!(err.violations.iter().any(|v| v.message.contains("hole 2 is missing")));
    }

    #[test]
    fn emit_roundtrip_bundled() {
        let mut cfg = SimConfig::three_holes();
        cfg.snapshots = Some(vec![0, 5, 99]);
        cfg.beta = 0.1 + 0.2;
        let text = emit_config(&cfg);
        assert_eq!(parse_config_str(&text).unwrap(), cfg);
    }
}
