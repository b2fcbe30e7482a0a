//! Declarative scenario configuration: TOML parsing, validation with
//! field-addressed diagnostics, resolution of adoption curves and a canonical
//! content hash.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adoption::{calibrate_logistic, AdoptionError, LogisticParams, ShareMode};
use crate::carbon::{CarbonParams, CiMode};
use crate::economics::{BlendPriceTable, EconCoefficients, IncentiveSchedule};
use crate::feedstock::{CapacityRamp, MswProfile, YieldOptions};
use crate::forecast::{check_seasonal, ArimaOrder};
use crate::pathway::{default_pathways, Feedstock, PathwayId, PathwaySpec};
use crate::series::{Unit, Year};
use crate::uncertainty::McSpec;

pub const DEFAULT_DEMAND_MGAL: f64 = 4200.0;
pub const DEFAULT_CEILING_FACTOR: f64 = 1.12;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", fmt_parse(.line, .message))]
    Parse { line: Option<usize>, message: String },
    #[error("{} invalid field(s):\n{}", .0.len(), fmt_diags(.0))]
    Invalid(Vec<Diagnostic>),
}

fn fmt_parse(line: &Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("line {l}: {message}"),
        None => message.to_string(),
    }
}

fn fmt_diags(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

/// One validation finding addressed by dotted field path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec {
    /// Flat total demand, million gallons per year.
    Constant {
        #[serde(default = "default_demand")]
        million_gallons: f64,
    },
    /// Historical series extended by an ARIMA forecast.
    Forecast(ForecastDemand),
}

fn default_demand() -> f64 {
    DEFAULT_DEMAND_MGAL
}

impl Default for DemandSpec {
    fn default() -> Self {
        Self::Constant {
            million_gallons: DEFAULT_DEMAND_MGAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastDemand {
    /// `year,value` CSV, relative to the config file.
    pub series: PathBuf,
    #[serde(default = "billion")]
    pub unit: Unit,
    #[serde(default = "default_order")]
    pub order: [usize; 3],
    #[serde(default = "default_seasonal")]
    pub seasonal: [u32; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<bool>,
}

fn billion() -> Unit {
    Unit::BillionGallons
}
fn default_order() -> [usize; 3] {
    [1, 1, 0]
}
fn default_seasonal() -> [u32; 4] {
    [0, 0, 0, 1]
}

impl ForecastDemand {
    pub fn arima_order(&self) -> Result<ArimaOrder, crate::forecast::ForecastError> {
        check_seasonal(self.seasonal)?;
        let [p, d, q] = self.order;
        ArimaOrder::new(p, d, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharePoint {
    pub year: Year,
    pub share: f64,
}

/// How a pathway's logistic curve is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdoptionSpec {
    Explicit {
        ceiling: f64,
        rate: f64,
        midpoint: f64,
    },
    /// Calibrated through observed history and a target-year anchor.
    Anchored {
        anchor: SharePoint,
        /// `[year, share]` pairs; the built-in 2023 observation when empty.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        history: Vec<(Year, f64)>,
        #[serde(default = "ceiling_factor")]
        ceiling_factor: f64,
        /// Explicit ceiling, overriding `anchor.share * ceiling_factor`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ceiling: Option<f64>,
    },
}

fn ceiling_factor() -> f64 {
    DEFAULT_CEILING_FACTOR
}

/// 2023 market shares used when an anchored curve supplies no history.
pub fn builtin_history(id: PathwayId) -> Vec<(Year, f64)> {
    let share = match id {
        PathwayId::E15 | PathwayId::Ev => 0.01,
        _ => 0.0,
    };
    vec![(2023, share)]
}

/// 2035 anchors used by the bundled presets.
pub fn default_anchors() -> BTreeMap<PathwayId, f64> {
    use PathwayId::*;
    BTreeMap::from([(E15, 0.25), (E30, 0.18), (E85, 0.15), (Ev, 0.35), (H2, 0.08)])
}

fn default_adoption() -> BTreeMap<PathwayId, AdoptionSpec> {
    default_anchors()
        .into_iter()
        .map(|(id, share)| {
            (
                id,
                AdoptionSpec::Anchored {
                    anchor: SharePoint { year: 2035, share },
                    history: Vec::new(),
                    ceiling_factor: DEFAULT_CEILING_FACTOR,
                    ceiling: None,
                },
            )
        })
        .collect()
}

impl AdoptionSpec {
    pub fn resolve(&self, id: PathwayId) -> Result<LogisticParams, AdoptionError> {
        match self {
            AdoptionSpec::Explicit {
                ceiling,
                rate,
                midpoint,
            } => LogisticParams::new(*ceiling, *rate, *midpoint),
            AdoptionSpec::Anchored {
                anchor,
                history,
                ceiling_factor,
                ceiling,
            } => {
                let ceiling = ceiling.unwrap_or(anchor.share * ceiling_factor);
                let mut points = if history.is_empty() {
                    builtin_history(id)
                } else {
                    history.clone()
                };
                points.push((anchor.year, anchor.share));
                Ok(calibrate_logistic(&points, ceiling)?.params)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Builtin(String),
    Inline(MswProfile),
}

impl Default for ProfileRef {
    fn default() -> Self {
        Self::Builtin("nyc-2024".into())
    }
}

impl ProfileRef {
    pub fn resolve(&self) -> Result<MswProfile, crate::feedstock::FeedstockError> {
        match self {
            ProfileRef::Builtin(name) => MswProfile::builtin(name),
            ProfileRef::Inline(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedstockConfig {
    #[serde(default)]
    pub profile: ProfileRef,
    #[serde(default)]
    pub ramp: CapacityRamp,
    #[serde(default)]
    pub yields: YieldOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_start")]
    pub start_year: Year,
    #[serde(default = "default_end")]
    pub end_year: Year,
    #[serde(default = "default_remainder")]
    pub remainder: PathwayId,
    #[serde(default)]
    pub share_mode: ShareMode,
    #[serde(default)]
    pub demand: DemandSpec,
    #[serde(default = "default_pathways")]
    pub pathways: Vec<PathwaySpec>,
    #[serde(default = "default_adoption")]
    pub adoption: BTreeMap<PathwayId, AdoptionSpec>,
    #[serde(default)]
    pub carbon: CarbonParams,
    #[serde(default)]
    pub feedstock: FeedstockConfig,
    #[serde(default)]
    pub incentives: IncentiveSchedule,
    #[serde(default)]
    pub economics: EconCoefficients,
    #[serde(default)]
    pub prices: BlendPriceTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSpec>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_start() -> Year {
    2024
}
fn default_end() -> Year {
    2035
}
fn default_remainder() -> PathwayId {
    PathwayId::E10
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: default_name(),
            start_year: default_start(),
            end_year: default_end(),
            remainder: default_remainder(),
            share_mode: ShareMode::default(),
            demand: DemandSpec::default(),
            pathways: default_pathways(),
            adoption: default_adoption(),
            carbon: CarbonParams::default(),
            feedstock: FeedstockConfig::default(),
            incentives: IncentiveSchedule::default(),
            economics: EconCoefficients::default(),
            prices: BlendPriceTable::default(),
            mc: None,
            base_dir: None,
        }
    }
}

/// Command-line mode presets layered over a loaded scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Quoted tables, band not enforced.
    Replication,
    /// 45V only inside its CI band.
    StrictBand,
    /// Energy-weighted blend CIs.
    FormulaCi,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Replication => "replication",
            RunMode::StrictBand => "strict-band",
            RunMode::FormulaCi => "formula-ci",
        }
    }
}

/// Mode flags recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeFlags {
    pub ci_mode: CiMode,
    pub enforce_ci_band: bool,
    pub share_mode: ShareMode,
    pub rin_mode: crate::economics::RinMode,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = read_config(path)?;
        let mut sc = Self::from_toml_str(&text)?;
        sc.base_dir = path.parent().map(Path::to_path_buf);
        sc.check(Some(&text))?;
        Ok(sc)
    }

    /// [`Scenario::validate`] as a result, with diagnostics located in `text`.
    pub fn check(&self, text: Option<&str>) -> Result<(), ConfigError> {
        let mut diags = self.validate();
        if diags.is_empty() {
            return Ok(());
        }
        if let Some(text) = text {
            for d in &mut diags {
                d.line = locate(text, &d.path);
            }
        }
        Err(ConfigError::Invalid(diags))
    }

    pub fn apply_mode(&mut self, mode: RunMode) {
        match mode {
            RunMode::Replication => {
                self.carbon.mode = CiMode::Replication;
                self.incentives.enforce_ci_band = false;
            }
            RunMode::StrictBand => self.incentives.enforce_ci_band = true,
            RunMode::FormulaCi => self.carbon.mode = CiMode::Formula,
        }
    }

    pub fn mode_flags(&self) -> ModeFlags {
        ModeFlags {
            ci_mode: self.carbon.mode,
            enforce_ci_band: self.incentives.enforce_ci_band,
            share_mode: self.share_mode,
            rin_mode: self.incentives.rin_mode,
        }
    }

    pub fn years(&self) -> std::ops::RangeInclusive<Year> {
        self.start_year..=self.end_year
    }

    pub fn pathway(&self, id: PathwayId) -> Option<&PathwaySpec> {
        self.pathways.iter().find(|p| p.id == id)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Logistic parameters for every non-remainder pathway.
    pub fn resolve_adoption(&self) -> Result<BTreeMap<PathwayId, LogisticParams>, AdoptionError> {
        self.adoption
            .iter()
            .map(|(&id, spec)| spec.resolve(id).map(|p| (id, p)))
            .collect()
    }

    /// Every problem found, each addressed by field path. Never runs the engine.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut v = Diags::default();
        if self.start_year > self.end_year {
            v.push("end_year", format!("{} precedes start_year {}", self.end_year, self.start_year));
        }
        if self.start_year < self.carbon.decay.t0 {
            v.push(
                "start_year",
                format!("{} precedes carbon.decay.t0 {}", self.start_year, self.carbon.decay.t0),
            );
        }
        self.validate_demand(&mut v);
        self.validate_pathways(&mut v);
        self.validate_adoption(&mut v);
        self.validate_carbon(&mut v);
        self.validate_feedstock(&mut v);
        if let Err(e) = self.incentives.validate() {
            v.push("incentives", e.to_string());
        }
        for (name, value) in [
            ("jobs_per_million_gal", self.economics.jobs_per_million_gal),
            ("indirect_usd_per_gal", self.economics.indirect_usd_per_gal),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                v.push(format!("economics.{name}"), format!("must be non-negative, got {value}"));
            }
        }
        for p in self.pathways.iter().filter(|p| p.is_liquid()) {
            match self.prices.0.get(&p.id) {
                None => v.push(format!("prices.{}", p.id), "missing price for liquid pathway"),
                Some(&x) if !(x >= 0.0 && x.is_finite()) => {
                    v.push(format!("prices.{}", p.id), format!("must be non-negative, got {x}"))
                }
                _ => {}
            }
        }
        if let Err(e) = self.prices.check_ordering() {
            v.push("prices", e);
        }
        if let Some(mc) = &self.mc {
            for (path, msg) in mc.validate_against(self) {
                v.push(path, msg);
            }
        }
        v.0
    }

    fn validate_demand(&self, v: &mut Diags) {
        match &self.demand {
            DemandSpec::Constant { million_gallons } => {
                if !(*million_gallons >= 0.0 && million_gallons.is_finite()) {
                    v.push("demand.million_gallons", format!("must be non-negative, got {million_gallons}"));
                }
            }
            DemandSpec::Forecast(f) => {
                if !matches!(f.unit, Unit::MillionGallons | Unit::BillionGallons) {
                    v.push("demand.unit", format!("must be a volume unit, got {}", f.unit));
                }
                if let Err(e) = f.arima_order() {
                    v.push("demand.order", e.to_string());
                }
                let path = self.resolve_path(&f.series);
                if !path.exists() {
                    v.push("demand.series", format!("file not found: {}", path.display()));
                }
            }
        }
    }

    fn validate_pathways(&self, v: &mut Diags) {
        for (i, p) in self.pathways.iter().enumerate() {
            if self.pathways[..i].iter().any(|q| q.id == p.id) {
                v.push(format!("pathways[{i}].id"), format!("duplicate pathway {}", p.id));
            }
            let f = p.ethanol_fraction();
            if !(0.0..=1.0).contains(&f) {
                v.push(format!("pathways[{i}].ethanol_vol_frac"), format!("must lie in [0, 1], got {f}"));
            }
            if let Some(lhv) = p.lhv_mj_per_gal {
                if !(lhv > 0.0 && lhv.is_finite()) {
                    v.push(format!("pathways[{i}].lhv_mj_per_gal"), format!("must be positive, got {lhv}"));
                }
            }
        }
        match self.pathway(self.remainder) {
            None => v.push("remainder", format!("{} is not among the pathways", self.remainder)),
            Some(p) if !p.is_liquid() => v.push("remainder", format!("{} is not a liquid pathway", self.remainder)),
            _ => {}
        }
    }

    fn validate_adoption(&self, v: &mut Diags) {
        if self.adoption.contains_key(&self.remainder) {
            v.push(
                format!("adoption.{}", self.remainder),
                "the remainder pathway takes the leftover share and cannot have a curve",
            );
        }
        for p in &self.pathways {
            if p.id != self.remainder && !self.adoption.contains_key(&p.id) {
                v.push(format!("adoption.{}", p.id), "missing adoption curve");
            }
        }
        for (id, spec) in &self.adoption {
            let base = format!("adoption.{id}");
            if self.pathway(*id).is_none() {
                v.push(&base, format!("{id} is not among the pathways"));
                continue;
            }
            match spec {
                AdoptionSpec::Explicit {
                    ceiling,
                    rate,
                    midpoint,
                } => {
                    if !(*ceiling > 0.0 && *ceiling <= 1.0) {
                        v.push(format!("{base}.ceiling"), format!("must lie in (0, 1], got {ceiling}"));
                    }
                    if !(*rate > 0.0 && rate.is_finite()) {
                        v.push(format!("{base}.rate"), format!("must be positive, got {rate}"));
                    }
                    if !midpoint.is_finite() {
                        v.push(format!("{base}.midpoint"), "must be finite");
                    }
                }
                AdoptionSpec::Anchored {
                    anchor,
                    ceiling_factor,
                    ceiling,
                    ..
                } => {
                    if !(anchor.share > 0.0 && anchor.share < 1.0) {
                        v.push(format!("{base}.anchor.share"), format!("must lie in (0, 1), got {}", anchor.share));
                    }
                    match ceiling {
                        Some(c) if !(*c > anchor.share && *c <= 1.0) => v.push(
                            format!("{base}.ceiling"),
                            format!("must lie in ({}, 1], got {c}", anchor.share),
                        ),
                        None if !(*ceiling_factor > 1.0 && anchor.share * ceiling_factor <= 1.0) => v.push(
                            format!("{base}.ceiling_factor"),
                            format!("must exceed 1 and keep the ceiling at most 1, got {ceiling_factor}"),
                        ),
                        _ => {}
                    }
                    if v.is_clean_under(&base) {
                        if let Err(e) = spec.resolve(*id) {
                            v.push(&base, e.to_string());
                        }
                    }
                }
            }
        }
    }

    fn validate_carbon(&self, v: &mut Diags) {
        let c = &self.carbon;
        if let Err(e) = c.decay.validate() {
            v.push("carbon.decay", e.to_string());
        }
        for (name, value) in [
            ("ci_gasoline", c.ci_gasoline),
            ("ci_ethanol_corn", c.ci_ethanol_corn),
            ("lhv_gasoline", c.lhv_gasoline),
            ("lhv_ethanol", c.lhv_ethanol),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(format!("carbon.{name}"), format!("must be positive, got {value}"));
            }
        }
        for p in self.pathways.iter().filter(|p| p.is_liquid() && p.id != PathwayId::Gasoline) {
            for fs in [Feedstock::Corn, Feedstock::Msw] {
                if c.lookup_table.get(p.id, fs).is_err() {
                    v.push(format!("carbon.lookup_table.{fs}.{}", p.id), "missing CI entry");
                }
            }
        }
        if let Err(e) = c.lookup_table.check_ordering() {
            v.push("carbon.lookup_table", e);
        }
    }

    fn validate_feedstock(&self, v: &mut Diags) {
        match self.feedstock.profile.resolve() {
            Ok(p) => {
                if let Err(e) = p.validate() {
                    v.push("feedstock.profile", e.to_string());
                }
            }
            Err(e) => v.push("feedstock.profile", e.to_string()),
        }
        if let Err(e) = self.feedstock.ramp.validate() {
            v.push("feedstock.ramp", e.to_string());
        }
        let y = &self.feedstock.yields;
        if !(0.0..=1.0).contains(&y.yield_point) {
            v.push("feedstock.yields.yield_point", format!("must lie in [0, 1], got {}", y.yield_point));
        }
        if !(y.moisture_factor > 0.0 && y.moisture_factor <= 1.0) {
            v.push(
                "feedstock.yields.moisture_factor",
                format!("must lie in (0, 1], got {}", y.moisture_factor),
            );
        }
    }
}

#[derive(Default)]
struct Diags(Vec<Diagnostic>);

impl Diags {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            path: path.into(),
            message: message.into(),
            line: None,
        });
    }

    fn is_clean_under(&self, prefix: &str) -> bool {
        !self.0.iter().any(|d| d.path.starts_with(prefix))
    }
}

fn read_config(path: &Path) -> Result<String, ConfigError> {
    if !path.exists() {
        return Err(ConfigError::MissingFile(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Best-effort source line for a dotted field path: the last key's assignment
/// inside the table named by the leading segments, else that table's header.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let clean = |s: &str| s.split('[').next().unwrap_or(s).trim_matches('"').to_string();
    let segs: Vec<String> = path.split('.').map(clean).collect();
    segs.last()?;
    let mut table: Vec<String> = Vec::new();
    let mut header_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            let h = h.trim_start_matches('[').trim_end_matches(']').trim_end_matches(']');
            table = h.split('.').map(|s| s.trim().trim_matches('"').to_string()).collect();
            if table == segs {
                header_line.get_or_insert(i + 1);
            }
            continue;
        }
        let Some((key, _)) = line.split_once('=') else {
            continue;
        };
        let mut full = table.clone();
        full.extend(key.trim().split('.').map(|s| s.trim().trim_matches('"').to_string()));
        if full == segs {
            return Some(i + 1);
        }
        if full.starts_with(&segs[..]) {
            header_line.get_or_insert(i + 1);
        }
    }
    header_line
}

/// Hex SHA-256 of the config's canonical form: keys sorted, every number as a
/// 64-bit float, compact JSON.
pub fn config_hash(text: &str) -> Result<String, ConfigError> {
    let value: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    let canonical = canonical_json(&value).to_string();
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

fn canonical_json(v: &toml::Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        toml::Value::String(s) => J::String(s.clone()),
        toml::Value::Integer(i) => num(*i as f64),
        toml::Value::Float(f) => num(*f),
        toml::Value::Boolean(b) => J::Bool(*b),
        toml::Value::Datetime(d) => J::String(d.to_string()),
        toml::Value::Array(a) => J::Array(a.iter().map(canonical_json).collect()),
        toml::Value::Table(t) => {
            let sorted: BTreeMap<_, _> = t.iter().map(|(k, v)| (k.clone(), canonical_json(v))).collect();
            J::Object(sorted.into_iter().collect())
        }
    }
}

fn num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or_else(|| serde_json::Value::String(x.to_string()))
}
