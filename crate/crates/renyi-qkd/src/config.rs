//! Run configuration: a strict TOML schema covering the channel, block-size
//! accounting, security parameters, and solver knobs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::FwConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
pub enum Protocol {
    #[serde(rename = "bb84-pm")]
    Bb84Pm,
}

/// Divergence order: a fixed value or a grid scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaChoice {
    Fixed(f64),
    Scan,
}

impl<'de> Deserialize<'de> for AlphaChoice {
    fn deserialize<D>(de: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(AlphaChoice::Fixed(v)),
            Raw::Word(w) if w == "scan" => Ok(AlphaChoice::Scan),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "alpha must be a number in (1, 2] or the string \"scan\", got \"{w}\""
            ))),
        }
    }
}

impl Serialize for AlphaChoice {
    fn serialize<S>(&self, ser: S) -> std::result::Result<S::Ok, S::Error>
    where
        S: serde::Serializer,
    {
        match self {
            AlphaChoice::Fixed(v) => ser.serialize_f64(*v),
            AlphaChoice::Scan => ser.serialize_str("scan"),
        }
    }
}

/// Log-spaced grid specification for alpha - 1.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaGridSpec {
    pub points: usize,
    pub min_offset: f64,
    pub max_offset: f64,
}

impl Default for AlphaGridSpec {
    fn default() -> Self {
        Self {
            points: 25,
            min_offset: 5e-4,
            max_offset: 1.0,
        }
    }
}

impl AlphaGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::Config("alpha_grid.points must be positive".into()));
        }
        if !(self.min_offset > 0.0 && self.min_offset <= self.max_offset && self.max_offset <= 1.0)
        {
            return Err(Error::Config(format!(
                "alpha_grid offsets must satisfy 0 < min ({}) <= max ({}) <= 1",
                self.min_offset, self.max_offset
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![1.0 + self.max_offset];
        }
        let lo = self.min_offset.log10();
        let hi = self.max_offset.log10();
        (0..self.points)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (self.points - 1) as f64;
                1.0 + 10f64.powf(t)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub depol_p: f64,
    pub loss: f64,
    pub n_total: u64,
    pub p_gen: f64,
    pub eps_pa: f64,
    pub eps_ev: f64,
    pub eps_pe: f64,
    pub f_ec: f64,
    pub alpha: AlphaChoice,
    pub alpha_grid: AlphaGridSpec,
    pub eps_perturb: f64,
    pub gap_tol: f64,
    pub max_iters: usize,
    pub linesearch_tol: f64,
    /// Extra l1 radius for target-frequency uncertainty.
    pub t_ball: f64,
    pub z_basis_prob: f64,
    pub include_no_click: bool,
    /// CSV destination; stdout when absent.
    pub output_path: Option<PathBuf>,
    /// JSON run-log destination; skipped when absent.
    pub runlog_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Bb84Pm,
            depol_p: 0.01,
            loss: 0.0,
            n_total: 1_000_000,
            p_gen: 0.9,
            eps_pa: 1e-10,
            eps_ev: 1e-10,
            eps_pe: 1e-10,
            f_ec: 1.16,
            alpha: AlphaChoice::Scan,
            alpha_grid: AlphaGridSpec::default(),
            eps_perturb: 1e-8,
            gap_tol: 1e-6,
            max_iters: 300,
            linesearch_tol: 1e-4,
            t_ball: 0.0,
            z_basis_prob: 0.5,
            include_no_click: false,
            output_path: None,
            runlog_path: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.depol_p) {
            return Err(Error::Config(format!(
                "depol_p must lie in [0, 1], got {}",
                self.depol_p
            )));
        }
        if !(0.0..1.0).contains(&self.loss) {
            return Err(Error::Config(format!(
                "loss must lie in [0, 1), got {}",
                self.loss
            )));
        }
        if self.n_total < 2 {
            return Err(Error::Config(format!(
                "n_total must be at least 2, got {}",
                self.n_total
            )));
        }
        if !(self.p_gen > 0.0 && self.p_gen < 1.0) {
            return Err(Error::Config(format!(
                "p_gen must lie in (0, 1), got {}",
                self.p_gen
            )));
        }
        for (name, v) in [
            ("eps_pa", self.eps_pa),
            ("eps_ev", self.eps_ev),
            ("eps_pe", self.eps_pe),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::Config(format!(
                "f_ec must be at least 1, got {}",
                self.f_ec
            )));
        }
        if let AlphaChoice::Fixed(a) = self.alpha {
            if !(a > 1.0 && a <= 2.0) {
                return Err(Error::Config(format!("alpha must lie in (1, 2], got {a}")));
            }
        }
        self.alpha_grid.validate()?;
        if !(self.eps_perturb > 0.0 && self.eps_perturb < 1.0) {
            return Err(Error::Config(format!(
                "eps_perturb must lie in (0, 1), got {}",
                self.eps_perturb
            )));
        }
        if !(self.z_basis_prob > 0.0 && self.z_basis_prob < 1.0) {
            return Err(Error::Config(format!(
                "z_basis_prob must lie in (0, 1), got {}",
                self.z_basis_prob
            )));
        }
        if !(self.t_ball >= 0.0 && self.t_ball.is_finite()) {
            return Err(Error::Config(format!(
                "t_ball must be nonnegative, got {}",
                self.t_ball
            )));
        }
        self.fw_config()
            .validate()
            .map_err(|e| Error::Config(format!("solver settings: {e}")))?;
        Ok(())
    }

    pub fn fw_config(&self) -> FwConfig {
        FwConfig {
            gap_tol: self.gap_tol,
            max_iters: self.max_iters,
            linesearch_tol: self.linesearch_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn minimal_toml_fills_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.depol_p, 0.01);
        assert_eq!(cfg.alpha, AlphaChoice::Scan);
        assert_eq!(cfg.max_iters, 300);
    }

    #[test]
    fn full_toml_round_trip() {
        let text = r#"
protocol = "bb84-pm"
depol_p = 0.02
loss = 0.1
n_total = 100000
p_gen = 0.5
alpha = 1.25
f_ec = 1.0
gap_tol = 1e-7
[alpha_grid]
points = 10
min_offset = 1e-3
max_offset = 0.5
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.alpha, AlphaChoice::Fixed(1.25));
        assert_eq!(cfg.n_total, 100_000);
        assert_eq!(cfg.alpha_grid.points, 10);
        let grid = cfg.alpha_grid.build();
        assert_eq!(grid.len(), 10);
        assert!((grid[0] - 1.001).abs() < 1e-12);
        assert!((grid[9] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn scan_keyword_parses() {
        let cfg = RunConfig::from_toml_str("alpha = \"scan\"").unwrap();
        assert_eq!(cfg.alpha, AlphaChoice::Scan);
        assert!(RunConfig::from_toml_str("alpha = \"sweep\"").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml_str("depol = 0.01").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("depol"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_alpha_rejected() {
        assert!(RunConfig::from_toml_str("alpha = 0.9").is_err());
        assert!(RunConfig::from_toml_str("alpha = 1.0").is_err());
        assert!(RunConfig::from_toml_str("alpha = 2.5").is_err());
        assert!(RunConfig::from_toml_str("alpha = 2.0").is_ok());
    }

    #[test]
    fn out_of_range_channel_rejected() {
        assert!(RunConfig::from_toml_str("depol_p = 1.5").is_err());
        assert!(RunConfig::from_toml_str("loss = 1.0").is_err());
        assert!(RunConfig::from_toml_str("p_gen = 0.0").is_err());
        assert!(RunConfig::from_toml_str("f_ec = 0.5").is_err());
        assert!(RunConfig::from_toml_str("eps_pa = 0.0").is_err());
    }

    #[test]
    fn single_point_grid() {
        let spec = AlphaGridSpec {
            points: 1,
            min_offset: 0.5,
            max_offset: 0.5,
        };
        assert_eq!(spec.build(), vec![1.5]);
    }
}
