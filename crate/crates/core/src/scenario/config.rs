use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::domain::{PacketKind, SimTime};
use crate::ncp::NcpParams;
use crate::sim::{ChannelModel, DropTable};
use crate::topology::BeamConstraints;

pub const SECTIONS: [&str; 5] = ["mobility", "time", "beam", "faults", "flags"];
pub const REQUIRED_KEYS: [&str; 3] = ["NumRN", "NumES", "EndTime"];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: expected `[section]` or `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: section [{name}] appears twice")]
    DuplicateSection { line: usize, name: String },
    #[error("line {line}: key {key} appears before any section")]
    NoSection { line: usize, key: String },
    #[error("line {line}: unknown key {key} in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: key {key} set twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: {key} = {value:?} is not {expected}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}: {key} = {value} is out of range ({range})")]
    OutOfRange {
        line: usize,
        key: String,
        value: String,
        range: &'static str,
    },
    #[error("line {line}: missing required section [{section}] (holds {keys})")]
    MissingSection {
        line: usize,
        section: &'static str,
        keys: String,
    },
    #[error("line {line}: missing required key {key} in [{section}]")]
    MissingKey {
        line: usize,
        section: &'static str,
        key: &'static str,
    },
    #[error("empty configuration; required keys: {}", REQUIRED_KEYS.join(", "))]
    Empty,
}

/// One scenario. Field names follow the emulator's input tables; the
/// remaining fields are extensions with defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    // [mobility]
    pub num_rn: u32,
    pub num_es: u32,
    /// Grid spacing between ESs, meters.
    pub es_dist: f64,
    /// MYCALL timer T, seconds.
    pub mycall_timer: f64,
    /// Upper bound of the uniform RN speed draw, m/s.
    pub max_v: f64,
    /// Gap between consecutive node startups, seconds.
    pub stagger: f64,
    pub es_speed: f64,
    pub es_dir: f64,
    pub rn_speed: f64,
    pub rn_dir: f64,
    /// Movement tolerance and handoff hysteresis ε, meters.
    pub tolerance: f64,
    /// Allowed error of a predicted RN position, meters.
    pub predict_tolerance: f64,
    pub gps_interval: f64,
    // [time]
    /// End of the run in tenths of a second.
    pub end_time: u64,
    /// Mean time between call setups per RN, seconds.
    pub vc_call_time: f64,
    /// Mean call holding time, seconds.
    pub vc_call_duration: f64,
    pub rn_retry: f64,
    pub pos_update: f64,
    pub gvt_interval: f64,
    /// How far predictors may run ahead of real time, seconds.
    pub lookahead: f64,
    // [beam]
    pub use_real_topology: bool,
    pub rlink: f64,
    pub fmax: u8,
    pub imult: f64,
    pub twidth: f64,
    pub rwidth: f64,
    pub max_beams: u32,
    pub slots_per_beam: u8,
    pub k_top: f64,
    // [faults]
    pub drops: DropTable,
    /// Kill the current master at this time, seconds.
    pub master_fail_at: Option<f64>,
    // [flags]
    pub vnc: bool,
    pub fixes: bool,
    pub collisions: bool,
    pub pnni: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let c = BeamConstraints::default();
        ScenarioConfig {
            num_rn: 0,
            num_es: 2,
            es_dist: 20.0,
            mycall_timer: 20.0,
            max_v: 5.0,
            stagger: 1.0,
            es_speed: 0.0,
            es_dir: 0.0,
            rn_speed: 5.0,
            rn_dir: 0.0,
            tolerance: 0.0,
            predict_tolerance: 1.0,
            gps_interval: 1.0,
            end_time: 3000,
            vc_call_time: 1200.0,
            vc_call_duration: 600.0,
            rn_retry: 3.0,
            pos_update: 2.0,
            gvt_interval: 1.0,
            lookahead: 10.0,
            use_real_topology: true,
            rlink: c.rlink,
            fmax: c.fmax,
            imult: c.imult,
            twidth: c.twidth,
            rwidth: c.rwidth,
            max_beams: 4,
            slots_per_beam: 4,
            k_top: 1e-9,
            drops: DropTable::none(),
            master_fail_at: None,
            vnc: false,
            fixes: false,
            collisions: true,
            pnni: false,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn end(&self) -> SimTime {
        SimTime::from_millis(self.end_time * 100)
    }

    pub fn constraints(&self) -> BeamConstraints {
        BeamConstraints {
            rlink: self.rlink,
            fmax: self.fmax,
            imult: self.imult,
            twidth: self.twidth,
            rwidth: self.rwidth,
        }
    }

    pub fn ncp_params(&self) -> NcpParams {
        NcpParams {
            mycall_timer: SimTime::from_secs_f64(self.mycall_timer),
            fixes: self.fixes,
            k_top: self.k_top,
            constraints: self.constraints(),
            max_beams: self.max_beams as usize,
            slots_per_beam: self.slots_per_beam,
            tolerance: self.tolerance,
            rn_retry: SimTime::from_secs_f64(self.rn_retry),
            pos_update: SimTime::from_secs_f64(self.pos_update),
            use_real_topology: self.use_real_topology,
            ..NcpParams::default()
        }
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            drop: self.drops,
            collisions: self.collisions,
            ..ChannelModel::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            ..self.clone()
        }
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}

#[derive(Clone, Copy)]
enum Kind {
    Count(u64, u64),
    Real(f64, f64),
    /// Finite, any sign.
    Angle,
    Bool,
    OptReal(f64, f64),
}

struct Field {
    section: &'static str,
    key: &'static str,
    kind: Kind,
    range: &'static str,
}

const fn f(section: &'static str, key: &'static str, kind: Kind, range: &'static str) -> Field {
    Field {
        section,
        key,
        kind,
        range,
    }
}

const POS: &str = "> 0";
const NONNEG: &str = ">= 0";
const R_POS: Kind = Kind::Real(f64::MIN_POSITIVE, f64::MAX);
const R_NONNEG: Kind = Kind::Real(0.0, f64::MAX);

const FIELDS: &[Field] = &[
    f("mobility", "NumRN", Kind::Count(0, 256), "0..=256"),
    f("mobility", "NumES", Kind::Count(1, 64), "1..=64"),
    f("mobility", "ESDist", R_POS, POS),
    f("mobility", "T", R_POS, POS),
    f("mobility", "maxV", R_NONNEG, NONNEG),
    f("mobility", "S", R_NONNEG, NONNEG),
    f("mobility", "ESspd", R_NONNEG, NONNEG),
    f("mobility", "ESdir", Kind::Angle, "finite"),
    f("mobility", "RNspd", R_NONNEG, NONNEG),
    f("mobility", "RNdir", Kind::Angle, "finite"),
    f("mobility", "Tolerance", R_NONNEG, NONNEG),
    f("mobility", "PredictTolerance", R_NONNEG, NONNEG),
    f(
        "mobility",
        "GpsInterval",
        Kind::Real(0.001, 3600.0),
        "0.001..=3600",
    ),
    f("time", "EndTime", Kind::Count(1, 1 << 40), ">= 1"),
    f("time", "VCCallTime", R_POS, POS),
    f("time", "VCCallDuration", R_POS, POS),
    f("time", "RnRetry", Kind::Real(0.001, f64::MAX), ">= 0.001"),
    f("time", "PosUpdate", Kind::Real(0.001, f64::MAX), ">= 0.001"),
    f(
        "time",
        "GvtInterval",
        Kind::Real(0.001, f64::MAX),
        ">= 0.001",
    ),
    f("time", "Lookahead", R_NONNEG, NONNEG),
    f("beam", "UseRealTopology", Kind::Bool, "boolean"),
    f("beam", "Rlink", R_POS, POS),
    f("beam", "Fmax", Kind::Count(1, 255), "1..=255"),
    f("beam", "Imult", R_NONNEG, NONNEG),
    f(
        "beam",
        "Twidth",
        Kind::Real(f64::MIN_POSITIVE, 360.0),
        "(0, 360]",
    ),
    f(
        "beam",
        "Rwidth",
        Kind::Real(f64::MIN_POSITIVE, 360.0),
        "(0, 360]",
    ),
    f("beam", "MaxBeams", Kind::Count(1, 64), "1..=64"),
    f("beam", "SlotsPerBeam", Kind::Count(1, 255), "1..=255"),
    f("beam", "KTop", R_NONNEG, NONNEG),
    f(
        "faults",
        "MasterFailAt",
        Kind::OptReal(0.0, f64::MAX),
        ">= 0 or none",
    ),
    f("flags", "VNC", Kind::Bool, "boolean"),
    f("flags", "Fixes", Kind::Bool, "boolean"),
    f("flags", "Collisions", Kind::Bool, "boolean"),
    f("flags", "PNNI", Kind::Bool, "boolean"),
    f("flags", "Seed", Kind::Count(0, u64::MAX), "u64"),
];

const DROP_PREFIX: &str = "Drop.";

#[derive(Clone, Copy)]
enum Value {
    Count(u64),
    Real(f64),
    Bool(bool),
    None,
}

impl Value {
    fn real(self) -> f64 {
        match self {
            Value::Real(x) => x,
            Value::Count(n) => n as f64,
            _ => unreachable!("kind checked at parse time"),
        }
    }

    fn count(self) -> u64 {
        match self {
            Value::Count(n) => n,
            _ => unreachable!("kind checked at parse time"),
        }
    }

    fn flag(self) -> bool {
        match self {
            Value::Bool(b) => b,
            _ => unreachable!("kind checked at parse time"),
        }
    }
}

fn parse_value(line: usize, field: &Field, raw: &str) -> Result<Value, ConfigError> {
    let bad = |expected| ConfigError::BadValue {
        line,
        key: field.key.into(),
        value: raw.into(),
        expected,
    };
    let out_of_range = || ConfigError::OutOfRange {
        line,
        key: field.key.into(),
        value: raw.into(),
        range: field.range,
    };
    match field.kind {
        Kind::Count(lo, hi) => {
            let n: u64 = raw.parse().map_err(|_| bad("a non-negative integer"))?;
            if n < lo || n > hi {
                return Err(out_of_range());
            }
            Ok(Value::Count(n))
        }
        Kind::Real(lo, hi) => {
            let x: f64 = raw.parse().map_err(|_| bad("a number"))?;
            if !(x.is_finite() && x >= lo && x <= hi) {
                return Err(out_of_range());
            }
            Ok(Value::Real(x))
        }
        Kind::OptReal(lo, hi) => {
            if raw.eq_ignore_ascii_case("none") {
                return Ok(Value::None);
            }
            let x: f64 = raw.parse().map_err(|_| bad("a number or `none`"))?;
            if !(x.is_finite() && x >= lo && x <= hi) {
                return Err(out_of_range());
            }
            Ok(Value::Real(x))
        }
        Kind::Angle => {
            let x: f64 = raw.parse().map_err(|_| bad("a number"))?;
            if !x.is_finite() {
                return Err(out_of_range());
            }
            Ok(Value::Real(x))
        }
        Kind::Bool => match raw.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "on" => Ok(Value::Bool(true)),
            "false" | "0" | "no" | "off" => Ok(Value::Bool(false)),
            _ => Err(bad("a boolean")),
        },
    }
}

fn apply(cfg: &mut ScenarioConfig, key: &str, v: Value) {
    match key {
        "NumRN" => cfg.num_rn = v.count() as u32,
        "NumES" => cfg.num_es = v.count() as u32,
        "ESDist" => cfg.es_dist = v.real(),
        "T" => cfg.mycall_timer = v.real(),
        "maxV" => cfg.max_v = v.real(),
        "S" => cfg.stagger = v.real(),
        "ESspd" => cfg.es_speed = v.real(),
        "ESdir" => cfg.es_dir = v.real(),
        "RNspd" => cfg.rn_speed = v.real(),
        "RNdir" => cfg.rn_dir = v.real(),
        "Tolerance" => cfg.tolerance = v.real(),
        "PredictTolerance" => cfg.predict_tolerance = v.real(),
        "GpsInterval" => cfg.gps_interval = v.real(),
        "EndTime" => cfg.end_time = v.count(),
        "VCCallTime" => cfg.vc_call_time = v.real(),
        "VCCallDuration" => cfg.vc_call_duration = v.real(),
        "RnRetry" => cfg.rn_retry = v.real(),
        "PosUpdate" => cfg.pos_update = v.real(),
        "GvtInterval" => cfg.gvt_interval = v.real(),
        "Lookahead" => cfg.lookahead = v.real(),
        "UseRealTopology" => cfg.use_real_topology = v.flag(),
        "Rlink" => cfg.rlink = v.real(),
        "Fmax" => cfg.fmax = v.count() as u8,
        "Imult" => cfg.imult = v.real(),
        "Twidth" => cfg.twidth = v.real(),
        "Rwidth" => cfg.rwidth = v.real(),
        "MaxBeams" => cfg.max_beams = v.count() as u32,
        "SlotsPerBeam" => cfg.slots_per_beam = v.count() as u8,
        "KTop" => cfg.k_top = v.real(),
        "MasterFailAt" => {
            cfg.master_fail_at = match v {
                Value::None => None,
                v => Some(v.real()),
            }
        }
        "VNC" => cfg.vnc = v.flag(),
        "Fixes" => cfg.fixes = v.flag(),
        "Collisions" => cfg.collisions = v.flag(),
        "PNNI" => cfg.pnni = v.flag(),
        "Seed" => cfg.seed = v.count(),
        _ => unreachable!("key looked up in FIELDS"),
    }
}

/// Parses the sectioned `key = value` format. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut section: Option<&str> = None;
    let mut seen_sections: Vec<(&str, usize)> = Vec::new();
    let mut seen_keys: Vec<String> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name =
                rest.strip_suffix(']')
                    .map(str::trim)
                    .ok_or_else(|| ConfigError::Syntax {
                        line,
                        text: content.into(),
                    })?;
            let Some(known) = SECTIONS.iter().find(|s| **s == name) else {
                return Err(ConfigError::UnknownSection {
                    line,
                    name: name.into(),
                });
            };
            if seen_sections.iter().any(|(s, _)| s == known) {
                return Err(ConfigError::DuplicateSection {
                    line,
                    name: name.into(),
                });
            }
            seen_sections.push((known, line));
            section = Some(known);
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: content.into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: content.into(),
            });
        }
        let Some(sec) = section else {
            return Err(ConfigError::NoSection {
                line,
                key: key.into(),
            });
        };
        if seen_keys.iter().any(|k| k == key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.into(),
            });
        }
        seen_keys.push(key.into());
        if sec == "faults" {
            if let Some(kind) = key.strip_prefix(DROP_PREFIX) {
                let kind: PacketKind = kind.parse().map_err(|_| ConfigError::UnknownKey {
                    line,
                    section: sec.into(),
                    key: key.into(),
                })?;
                let p: f64 = value.parse().map_err(|_| ConfigError::BadValue {
                    line,
                    key: key.into(),
                    value: value.into(),
                    expected: "a probability",
                })?;
                cfg.drops
                    .set(kind, p)
                    .map_err(|_| ConfigError::OutOfRange {
                        line,
                        key: key.into(),
                        value: value.into(),
                        range: "0..=1",
                    })?;
                continue;
            }
        }
        let field = FIELDS
            .iter()
            .find(|f| f.key == key && f.section == sec)
            .ok_or_else(|| ConfigError::UnknownKey {
                line,
                section: sec.into(),
                key: key.into(),
            })?;
        let v = parse_value(line, field, value)?;
        apply(&mut cfg, key, v);
    }
    if seen_keys.is_empty() && seen_sections.is_empty() {
        return Err(ConfigError::Empty);
    }
    for key in REQUIRED_KEYS {
        let field = FIELDS
            .iter()
            .find(|f| f.key == key)
            .expect("required keys are fields");
        if !seen_sections.iter().any(|(s, _)| *s == field.section) {
            let keys: Vec<&str> = REQUIRED_KEYS
                .iter()
                .copied()
                .filter(|k| {
                    FIELDS
                        .iter()
                        .any(|f| f.key == *k && f.section == field.section)
                })
                .collect();
            return Err(ConfigError::MissingSection {
                line: last_line,
                section: field.section,
                keys: keys.join(", "),
            });
        }
        if !seen_keys.iter().any(|k| k == key) {
            let line = seen_sections
                .iter()
                .find(|(s, _)| *s == field.section)
                .map(|(_, l)| *l)
                .unwrap_or(last_line);
            return Err(ConfigError::MissingKey {
                line,
                section: field.section,
                key,
            });
        }
    }
    Ok(cfg)
}

/// Writes every field explicitly, so that parsing the result yields the
/// same config.
pub fn serialize_config(c: &ScenarioConfig) -> String {
    let mut s = String::new();
    let b = |x: bool| if x { "true" } else { "false" };
    let _ = writeln!(s, "[mobility]");
    let _ = writeln!(s, "NumRN = {}", c.num_rn);
    let _ = writeln!(s, "NumES = {}", c.num_es);
    let _ = writeln!(s, "ESDist = {}", c.es_dist);
    let _ = writeln!(s, "T = {}", c.mycall_timer);
    let _ = writeln!(s, "maxV = {}", c.max_v);
    let _ = writeln!(s, "S = {}", c.stagger);
    let _ = writeln!(s, "ESspd = {}", c.es_speed);
    let _ = writeln!(s, "ESdir = {}", c.es_dir);
    let _ = writeln!(s, "RNspd = {}", c.rn_speed);
    let _ = writeln!(s, "RNdir = {}", c.rn_dir);
    let _ = writeln!(s, "Tolerance = {}", c.tolerance);
    let _ = writeln!(s, "PredictTolerance = {}", c.predict_tolerance);
    let _ = writeln!(s, "GpsInterval = {}", c.gps_interval);
    let _ = writeln!(s, "\n[time]");
    let _ = writeln!(s, "EndTime = {}", c.end_time);
    let _ = writeln!(s, "VCCallTime = {}", c.vc_call_time);
    let _ = writeln!(s, "VCCallDuration = {}", c.vc_call_duration);
    let _ = writeln!(s, "RnRetry = {}", c.rn_retry);
    let _ = writeln!(s, "PosUpdate = {}", c.pos_update);
    let _ = writeln!(s, "GvtInterval = {}", c.gvt_interval);
    let _ = writeln!(s, "Lookahead = {}", c.lookahead);
    let _ = writeln!(s, "\n[beam]");
    let _ = writeln!(s, "UseRealTopology = {}", b(c.use_real_topology));
    let _ = writeln!(s, "Rlink = {}", c.rlink);
    let _ = writeln!(s, "Fmax = {}", c.fmax);
    let _ = writeln!(s, "Imult = {}", c.imult);
    let _ = writeln!(s, "Twidth = {}", c.twidth);
    let _ = writeln!(s, "Rwidth = {}", c.rwidth);
    let _ = writeln!(s, "MaxBeams = {}", c.max_beams);
    let _ = writeln!(s, "SlotsPerBeam = {}", c.slots_per_beam);
    let _ = writeln!(s, "KTop = {}", c.k_top);
    let _ = writeln!(s, "\n[faults]");
    for k in PacketKind::ALL {
        let p = c.drops.get(k);
        if p > 0.0 {
            let _ = writeln!(s, "{DROP_PREFIX}{} = {}", k.name(), p);
        }
    }
    match c.master_fail_at {
        Some(t) => {
            let _ = writeln!(s, "MasterFailAt = {}", t);
        }
        None => {
            let _ = writeln!(s, "MasterFailAt = none");
        }
    }
    let _ = writeln!(s, "\n[flags]");
    let _ = writeln!(s, "VNC = {}", b(c.vnc));
    let _ = writeln!(s, "Fixes = {}", b(c.fixes));
    let _ = writeln!(s, "Collisions = {}", b(c.collisions));
    let _ = writeln!(s, "PNNI = {}", b(c.pnni));
    let _ = writeln!(s, "Seed = {}", c.seed);
    s
}
