//! Run configurations. Every command reads one JSON document whose
//! `schema` field must equal [`SCHEMA`]; omitted fields take the documented
//! defaults and unknown fields are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thinfilm_core::limit_analysis::LimitRunConfig;
use thinfilm_core::shooting::ShootConfig;

/// Schema tag accepted by this version.
pub const SCHEMA: &str = "thinfilm.v1";

fn schema() -> String {
    SCHEMA.to_string()
}

/// Invalid configuration; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn finite(name: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() {
        Ok(())
    } else {
        bad(format!("{name} must be finite, got {x}"))
    }
}

fn positive(name: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        bad(format!("{name} must be positive and finite, got {x}"))
    }
}

fn range(name: &str, r: (f64, f64)) -> Result<(), ConfigError> {
    finite(name, r.0)?;
    finite(name, r.1)?;
    if r.0 < r.1 {
        Ok(())
    } else {
        bad(format!(
            "{name} must satisfy lo < hi, got ({}, {})",
            r.0, r.1
        ))
    }
}

fn check_sigma(sigma: f64, delta0: f64) -> Result<(), ConfigError> {
    if sigma.is_finite() && sigma < 0.0 && sigma >= -delta0 {
        Ok(())
    } else {
        bad(format!(
            "sigma must lie in [-delta0, 0) = [{}, 0), got {sigma}",
            -delta0
        ))
    }
}

fn check_shooting(s: &ShootConfig) -> Result<(), ConfigError> {
    s.validate()
        .map_err(|e| ConfigError(format!("shooting: {e}")))
}

/// A command configuration.
pub trait RunConfig: Serialize + DeserializeOwned + Default {
    /// Subcommand name.
    const COMMAND: &'static str;

    fn schema(&self) -> &str;

    /// Range checks beyond what deserialisation enforces.
    fn validate(&self) -> Result<(), ConfigError>;
}

/// Reads and validates a configuration; `None` yields the defaults.
pub fn load<T: RunConfig>(path: Option<&Path>) -> Result<T, ConfigError> {
    let cfg: T = match path {
        None => T::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            parse(&text)?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a configuration from JSON text and checks the schema tag.
pub fn parse<T: RunConfig>(text: &str) -> Result<T, ConfigError> {
    let cfg: T =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))?;
    if cfg.schema() != SCHEMA {
        return bad(format!(
            "schema must be \"{SCHEMA}\", got \"{}\"",
            cfg.schema()
        ));
    }
    Ok(cfg)
}

/// Canonical JSON of a configuration.
pub fn canonical_json<T: Serialize>(cfg: &T) -> String {
    serde_json::to_string(cfg).expect("configurations serialise")
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    hex::encode(Sha256::digest(canonical_json(cfg).as_bytes()))
}

/// Configuration of `shoot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootRun {
    #[serde(default = "schema")]
    pub schema: String,
    pub a: f64,
    pub sigma: f64,
    /// `ν` bracket; defaults to `(−δ₀/4, δ₀/4)`.
    pub nu_bracket: Option<(f64, f64)>,
    /// Maximum number of points examined by the residual check.
    pub residual_points: usize,
    pub shooting: ShootConfig,
}

impl Default for ShootRun {
    fn default() -> Self {
        Self {
            schema: schema(),
            a: 1.0,
            sigma: -1e-3,
            nu_bracket: None,
            residual_points: 5000,
            shooting: ShootConfig::default(),
        }
    }
}

impl ShootRun {
    pub fn bracket(&self) -> (f64, f64) {
        self.nu_bracket
            .unwrap_or((-self.shooting.delta0 / 4.0, self.shooting.delta0 / 4.0))
    }
}

impl RunConfig for ShootRun {
    const COMMAND: &'static str = "shoot";

    fn schema(&self) -> &str {
        &self.schema
    }

    fn validate(&self) -> Result<(), ConfigError> {
        finite("a", self.a)?;
        check_shooting(&self.shooting)?;
        check_sigma(self.sigma, self.shooting.delta0)?;
        let b = self.bracket();
        range("nu_bracket", b)?;
        if b.0.abs() > self.shooting.delta0 || b.1.abs() > self.shooting.delta0 {
            return bad("nu_bracket must lie inside the seed box");
        }
        if self.residual_points == 0 {
            return bad("residual_points must be positive");
        }
        Ok(())
    }
}

/// Uniform grid `lo + (hi − lo) i/(n − 1)`, or the single point `lo` when
/// `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self.n {
            0 => vec![],
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Configuration of `classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyRun {
    #[serde(default = "schema")]
    pub schema: String,
    pub a: f64,
    pub sigma: f64,
    /// Explicit `ν` values; when non-empty they replace `grid`.
    pub nus: Vec<f64>,
    pub grid: Option<Grid>,
    pub shooting: ShootConfig,
}

impl Default for ClassifyRun {
    fn default() -> Self {
        let shooting = ShootConfig::default();
        Self {
            schema: schema(),
            a: 0.0,
            sigma: -1e-3,
            nus: vec![],
            grid: Some(Grid {
                lo: -shooting.delta0 / 4.0,
                hi: shooting.delta0 / 4.0,
                n: 32,
            }),
            shooting,
        }
    }
}

impl ClassifyRun {
    pub fn seeds(&self) -> Vec<f64> {
        if self.nus.is_empty() {
            self.grid.map(|g| g.points()).unwrap_or_default()
        } else {
            self.nus.clone()
        }
    }
}

impl RunConfig for ClassifyRun {
    const COMMAND: &'static str = "classify";

    fn schema(&self) -> &str {
        &self.schema
    }

    fn validate(&self) -> Result<(), ConfigError> {
        finite("a", self.a)?;
        check_shooting(&self.shooting)?;
        check_sigma(self.sigma, self.shooting.delta0)?;
        if let Some(g) = self.grid {
            finite("grid.lo", g.lo)?;
            finite("grid.hi", g.hi)?;
            if g.n > 1 && !(g.lo < g.hi) {
                return bad("grid must satisfy lo < hi");
            }
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return bad("the nu grid is empty");
        }
        if let Some(nu) = seeds
            .iter()
            .find(|nu| !(nu.is_finite() && nu.abs() <= self.shooting.delta0))
        {
            return bad(format!("nu = {nu} lies outside the seed box"));
        }
        Ok(())
    }
}

/// Configuration of `phaseplane`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseplaneRun {
    #[serde(default = "schema")]
    pub schema: String,
    pub vbar_range: (f64, f64),
    pub vbar_nodes: usize,
    pub vhat_range: (f64, f64),
    pub vhat_nodes: usize,
    /// Window of the `v̄ − u²/2` exponent fit.
    pub exponent_window: (f64, f64),
    pub region_u: Grid,
    pub region_v: Grid,
}

impl Default for PhaseplaneRun {
    fn default() -> Self {
        Self {
            schema: schema(),
            vbar_range: (-30.0, 30.0),
            vbar_nodes: 601,
            vhat_range: (1.25, 30.0),
            vhat_nodes: 300,
            exponent_window: (10.0, 100.0),
            region_u: Grid {
                lo: -3.0,
                hi: 3.0,
                n: 61,
            },
            region_v: Grid {
                lo: -3.0,
                hi: 3.0,
                n: 61,
            },
        }
    }
}

impl RunConfig for PhaseplaneRun {
    const COMMAND: &'static str = "phaseplane";

    fn schema(&self) -> &str {
        &self.schema
    }

    fn validate(&self) -> Result<(), ConfigError> {
        range("vbar_range", self.vbar_range)?;
        range("vhat_range", self.vhat_range)?;
        range("exponent_window", self.exponent_window)?;
        if self.exponent_window.0 <= 0.0 {
            return bad("exponent_window must lie in u > 0");
        }
        if self.vbar_nodes < 2 || self.vhat_nodes < 2 {
            return bad("separatrix tables need at least 2 nodes");
        }
        for (name, g) in [("region_u", self.region_u), ("region_v", self.region_v)] {
            if g.n < 2 {
                return bad(format!("{name} needs at least 2 points"));
            }
            range(name, (g.lo, g.hi))?;
        }
        Ok(())
    }
}

/// Configuration of `polys`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolysRun {
    #[serde(default = "schema")]
    pub schema: String,
    /// Log-spaced `M` grid: `m_points` values from `m_min` to `m_max`.
    pub m_min: f64,
    pub m_max: f64,
    pub m_points: usize,
    /// `M` of the sampled curves `P(Z; M, β* + offset)`.
    pub sample_m: f64,
    pub beta_offsets: Vec<f64>,
    pub z_range: (f64, f64),
    pub z_points: usize,
}

impl Default for PolysRun {
    fn default() -> Self {
        Self {
            schema: schema(),
            m_min: 1e-8,
            m_max: 1e8,
            m_points: 33,
            sample_m: 1.0,
            beta_offsets: vec![-0.1, 0.0, 0.1],
            z_range: (-3.0, 5.0),
            z_points: 401,
        }
    }
}

impl PolysRun {
    pub fn m_grid(&self) -> Vec<f64> {
        let (a, b) = (self.m_min.ln(), self.m_max.ln());
        match self.m_points {
            1 => vec![self.m_min],
            n => (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect(),
        }
    }
}

impl RunConfig for PolysRun {
    const COMMAND: &'static str = "polys";

    fn schema(&self) -> &str {
        &self.schema
    }

    fn validate(&self) -> Result<(), ConfigError> {
        positive("m_min", self.m_min)?;
        positive("m_max", self.m_max)?;
        positive("sample_m", self.sample_m)?;
        if self.m_min > self.m_max {
            return bad("need m_min <= m_max");
        }
        if self.m_points == 0 || self.z_points < 2 {
            return bad("need m_points >= 1 and z_points >= 2");
        }
        range("z_range", self.z_range)?;
        for b in &self.beta_offsets {
            finite("beta_offsets", *b)?;
        }
        Ok(())
    }
}

/// Configuration of `asymptotics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsRun {
    #[serde(default = "schema")]
    pub schema: String,
    /// Seed offsets of the touchdown runs.
    pub offsets: Vec<f64>,
    pub touchdown_horizon: f64,
    pub blowup_offset: f64,
    pub blowup_horizon: f64,
    /// Incoming slopes `K` of the matching runs.
    pub slopes: Vec<f64>,
    pub limit: LimitRunConfig,
}

impl Default for AsymptoticsRun {
    fn default() -> Self {
        Self {
            schema: schema(),
            offsets: vec![1e-5, 1e-6, 1e-7],
            touchdown_horizon: 50.0,
            blowup_offset: 1e-6,
            blowup_horizon: 50.0,
            slopes: vec![0.5, 1.0, 2.0, 4.0],
            limit: LimitRunConfig::default(),
        }
    }
}

impl RunConfig for AsymptoticsRun {
    const COMMAND: &'static str = "asymptotics";

    fn schema(&self) -> &str {
        &self.schema
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.offsets.is_empty() && self.slopes.is_empty() {
            return bad("nothing to compute: offsets and slopes are both empty");
        }
        for o in self.offsets.iter().chain([&self.blowup_offset]) {
            if !(o.is_finite() && *o > 0.0 && *o <= 1e-4) {
                return bad(format!("offsets must lie in (0, 1e-4], got {o}"));
            }
        }
        positive("touchdown_horizon", self.touchdown_horizon)?;
        positive("blowup_horizon", self.blowup_horizon)?;
        for k in &self.slopes {
            positive("slopes", *k)?;
        }
        self.limit
            .integrator
            .validate()
            .map_err(|e| ConfigError(format!("limit: {e}")))
    }
}

/// Configuration of `oscillation-report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillationRun {
    #[serde(default = "schema")]
    pub schema: String,
    pub a: f64,
    pub sigma: f64,
    /// `ν` offsets from `ν̄` of the detuned seeds.
    pub detune: Vec<f64>,
    /// Backward horizon of the detuned runs.
    pub horizon: f64,
    pub deep_threshold: f64,
    pub prominence: f64,
    pub shooting: ShootConfig,
}

impl Default for OscillationRun {
    fn default() -> Self {
        let shooting = ShootConfig::default();
        Self {
            schema: schema(),
            a: 1.0,
            sigma: -1e-3,
            detune: vec![1e-6, -1e-6],
            horizon: shooting.horizon * shooting.horizon_cap,
            deep_threshold: 1e2,
            prominence: 1e-3,
            shooting,
        }
    }
}

impl RunConfig for OscillationRun {
    const COMMAND: &'static str = "oscillation-report";

    fn schema(&self) -> &str {
        &self.schema
    }

    fn validate(&self) -> Result<(), ConfigError> {
        finite("a", self.a)?;
        check_shooting(&self.shooting)?;
        check_sigma(self.sigma, self.shooting.delta0)?;
        for d in &self.detune {
            finite("detune", *d)?;
        }
        positive("horizon", self.horizon)?;
        positive("deep_threshold", self.deep_threshold)?;
        if !(self.prominence.is_finite() && self.prominence >= 0.0 && self.prominence < 1.0) {
            return bad("prominence must lie in [0, 1)");
        }
        Ok(())
    }
}
