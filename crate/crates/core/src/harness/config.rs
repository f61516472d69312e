//! Study configuration: flat `key = value` files, `MFGLG_*` environment
//! variables and command-line overrides, applied in that order on top of the
//! per-test defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fp::FpMode;
use crate::grid::UniformGrid;
use crate::hjb::ControlSet;

pub const ENV_PREFIX: &str = "MFGLG_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TestId {
    Lq1d,
    Lq2d,
    Local1d,
    FpOnlyOu,
}

impl TestId {
    pub const ALL: [TestId; 4] = [TestId::Lq1d, TestId::Lq2d, TestId::Local1d, TestId::FpOnlyOu];

    pub fn as_str(self) -> &'static str {
        match self {
            TestId::Lq1d => "lq-1d",
            TestId::Lq2d => "lq-2d",
            TestId::Local1d => "local-1d",
            TestId::FpOnlyOu => "fp-only-ou",
        }
    }

    pub fn dim(self) -> usize {
        if self == TestId::Lq2d {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestId::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown test id `{s}`")))
    }
}

/// `dt = coeff * dx^power`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtRule {
    pub coeff: f64,
    pub power: f64,
}

impl DtRule {
    pub fn dt(&self, dx: f64) -> f64 {
        self.coeff * dx.powf(self.power)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub test: TestId,
    /// `sigma^2 / 2`.
    pub half_sigma_sq: f64,
    pub horizon: f64,
    pub lower: f64,
    pub upper: f64,
    pub dx_list: Vec<f64>,
    pub dt_rule: DtRule,
    pub tau: f64,
    pub max_outer: usize,
    pub damping: f64,
    /// `None` selects the a-priori estimate times `radius_safety`.
    pub control_radius: Option<f64>,
    pub radius_safety: f64,
    pub coarse_points: usize,
    pub refine_rounds: usize,
    pub refine_points: usize,
    pub shrink: f64,
    pub fp_mode: FpMode,
    /// Initial mean of every axis (LQ and OU tests).
    pub mean0: f64,
    /// Initial variance of every axis (LQ and OU tests).
    pub var0: f64,
    /// Mean reversion rate of the OU test.
    pub ou_theta: f64,
    pub ref_dx: f64,
    pub ref_dt_rule: DtRule,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn defaults(test: TestId) -> Self {
        let lq_dt = DtRule {
            coeff: 0.25,
            power: 4.0 / 3.0,
        };
        let local_dt = DtRule {
            coeff: 1.0 / 3.0,
            power: 1.5,
        };
        let base = StudyConfig {
            test,
            half_sigma_sq: 0.05,
            horizon: 0.25,
            lower: -2.0,
            upper: 2.0,
            dx_list: vec![0.2, 0.1, 0.05, 0.025],
            dt_rule: lq_dt,
            tau: 1e-9,
            max_outer: 50,
            damping: 1.0,
            control_radius: None,
            radius_safety: 1.5,
            coarse_points: 15,
            refine_rounds: 6,
            refine_points: 5,
            shrink: 0.25,
            fp_mode: FpMode::Simpson,
            mean0: 0.1,
            var0: 0.1,
            ou_theta: 1.0,
            ref_dx: 1.0 / 1500.0,
            ref_dt_rule: local_dt,
            out_dir: PathBuf::from("results"),
            cache_dir: None,
        };
        match test {
            TestId::Lq1d => base,
            TestId::Lq2d => StudyConfig {
                dx_list: vec![0.2, 0.1, 0.05],
                var0: 0.02,
                ..base
            },
            TestId::Local1d => StudyConfig {
                horizon: 0.05,
                lower: 0.0,
                upper: 1.0,
                dx_list: vec![0.05, 0.025, 0.0125, 0.00625],
                dt_rule: local_dt,
                ..base
            },
            TestId::FpOnlyOu => StudyConfig {
                mean0: 0.3,
                var0: 0.05,
                ..base
            },
        }
    }

    pub fn sigma(&self) -> f64 {
        (2.0 * self.half_sigma_sq).sqrt()
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn grid(&self, dx: f64) -> Result<UniformGrid> {
        UniformGrid::new(self.test.dim(), self.lower, self.upper, dx)
    }

    /// Control search with the given radius.
    pub fn control_set(&self, radius: f64) -> ControlSet {
        ControlSet {
            radius,
            coarse_points: self.coarse_points,
            rounds: self.refine_rounds,
            refine_points: self.refine_points,
            shrink: self.shrink,
        }
    }

    /// Resolves a configuration from optional file contents, environment
    /// pairs (`MFGLG_KEY`, other names ignored) and explicit overrides.
    pub fn resolve(
        file: Option<&str>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut layers: Vec<(String, String)> = Vec::new();
        if let Some(text) = file {
            layers.extend(parse_kv(text)?);
        }
        for (k, v) in env {
            if let Some(key) = k.strip_prefix(ENV_PREFIX) {
                layers.push((key.to_ascii_lowercase(), v));
            }
        }
        layers.extend(overrides.iter().cloned());
        let test = layers
            .iter()
            .rev()
            .find(|(k, _)| k == "test")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(TestId::Lq1d);
        let mut cfg = StudyConfig::defaults(test);
        for (k, v) in &layers {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::resolve(Some(&text), std::iter::empty(), &[])
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "test" => self.test = v.parse()?,
            "half_sigma_sq" => self.half_sigma_sq = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "lower" => self.lower = num(key, v)?,
            "upper" => self.upper = num(key, v)?,
            "dx_list" => {
                self.dx_list = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "dt_coeff" => self.dt_rule.coeff = num(key, v)?,
            "dt_power" => self.dt_rule.power = num(key, v)?,
            "tau" => self.tau = num(key, v)?,
            "max_outer" => self.max_outer = int(key, v)?,
            "damping" => self.damping = num(key, v)?,
            "control_radius" => {
                self.control_radius = if v == "auto" { None } else { Some(num(key, v)?) }
            }
            "radius_safety" => self.radius_safety = num(key, v)?,
            "coarse_points" => self.coarse_points = int(key, v)?,
            "refine_rounds" => self.refine_rounds = int(key, v)?,
            "refine_points" => self.refine_points = int(key, v)?,
            "shrink" => self.shrink = num(key, v)?,
            "fp_mode" => {
                self.fp_mode = match v {
                    "simpson" => FpMode::Simpson,
                    "exact" => FpMode::exact(),
                    _ => return Err(Error::Config(format!("fp_mode must be simpson or exact, got `{v}`"))),
                }
            }
            "mean0" => self.mean0 = num(key, v)?,
            "var0" => self.var0 = num(key, v)?,
            "ou_theta" => self.ou_theta = num(key, v)?,
            "ref_dx" => self.ref_dx = num(key, v)?,
            "ref_dt_coeff" => self.ref_dt_rule.coeff = num(key, v)?,
            "ref_dt_power" => self.ref_dt_rule.power = num(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dx_list.is_empty() {
            return Err(Error::Config("dx_list is empty".into()));
        }
        if self.dx_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("dx_list must be strictly decreasing".into()));
        }
        for &dx in &self.dx_list {
            self.grid(dx)?;
        }
        let positive = [
            ("half_sigma_sq", self.half_sigma_sq),
            ("horizon", self.horizon),
            ("tau", self.tau),
            ("dt_coeff", self.dt_rule.coeff),
            ("var0", self.var0),
            ("radius_safety", self.radius_safety),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(r) = self.control_radius {
            if !(r > 0.0) {
                return Err(Error::Config(format!("control_radius must be positive, got {r}")));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if self.test == TestId::Local1d {
            let finest = self.dx_list[self.dx_list.len() - 1];
            if self.ref_dx * 4.0 > finest * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "reference dx {} is not 4x finer than {finest}",
                    self.ref_dx
                )));
            }
            self.grid(self.ref_dx)?;
        }
        Ok(())
    }

    /// Every resolved key, one `key = value` per line, in a fixed order.
    pub fn to_kv(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("test", self.test.to_string());
        m.insert("half_sigma_sq", fmt_num(self.half_sigma_sq));
        m.insert("horizon", fmt_num(self.horizon));
        m.insert("lower", fmt_num(self.lower));
        m.insert("upper", fmt_num(self.upper));
        m.insert(
            "dx_list",
            self.dx_list.iter().map(|d| fmt_num(*d)).collect::<Vec<_>>().join(","),
        );
        m.insert("dt_coeff", fmt_num(self.dt_rule.coeff));
        m.insert("dt_power", fmt_num(self.dt_rule.power));
        m.insert("tau", fmt_num(self.tau));
        m.insert("max_outer", self.max_outer.to_string());
        m.insert("damping", fmt_num(self.damping));
        m.insert(
            "control_radius",
            self.control_radius.map_or("auto".to_string(), fmt_num),
        );
        m.insert("radius_safety", fmt_num(self.radius_safety));
        m.insert("coarse_points", self.coarse_points.to_string());
        m.insert("refine_rounds", self.refine_rounds.to_string());
        m.insert("refine_points", self.refine_points.to_string());
        m.insert("shrink", fmt_num(self.shrink));
        m.insert(
            "fp_mode",
            match self.fp_mode {
                FpMode::Simpson => "simpson".to_string(),
                FpMode::ExactGauss { .. } => "exact".to_string(),
            },
        );
        m.insert("mean0", fmt_num(self.mean0));
        m.insert("var0", fmt_num(self.var0));
        m.insert("ou_theta", fmt_num(self.ou_theta));
        m.insert("ref_dx", fmt_num(self.ref_dx));
        m.insert("ref_dt_coeff", fmt_num(self.ref_dt_rule.coeff));
        m.insert("ref_dt_power", fmt_num(self.ref_dt_rule.power));
        m.insert("out_dir", self.out_dir.display().to_string());
        m.insert("cache_dir", self.cache_dir().display().to_string());
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hash of everything that determines the local-test reference solution.
    pub fn reference_key(&self) -> String {
        let mut h = Sha256::new();
        let parts = [
            self.test.to_string(),
            fmt_num(self.half_sigma_sq),
            fmt_num(self.horizon),
            fmt_num(self.lower),
            fmt_num(self.upper),
            fmt_num(self.ref_dx),
            fmt_num(self.ref_dt_rule.coeff),
            fmt_num(self.ref_dt_rule.power),
            fmt_num(self.tau),
            self.max_outer.to_string(),
            fmt_num(self.damping),
            self.control_radius.map_or("auto".to_string(), fmt_num),
            fmt_num(self.radius_safety),
            self.coarse_points.to_string(),
            self.refine_rounds.to_string(),
            self.refine_points.to_string(),
            fmt_num(self.shrink),
            format!("{:?}", self.fp_mode),
        ];
        for p in parts {
            h.update(p.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Shortest round-trip decimal in exponent form.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{v}` as a number ({e})")))
}

fn int(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{v}` as a count ({e})")))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{raw}`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn layering_order() {
        let file = "test = local-1d\ntau = 1e-7 # comment\n";
        let env = kv(&[("MFGLG_TAU", "1e-8"), ("PATH", "/bin"), ("MFGLG_MAX_OUTER", "7")]);
        let cfg = StudyConfig::resolve(Some(file), env, &kv(&[("max_outer", "9")])).unwrap();
        assert_eq!(cfg.test, TestId::Local1d);
        assert_eq!(cfg.tau, 1e-8);
        assert_eq!(cfg.max_outer, 9);
        assert_eq!(cfg.horizon, 0.05);
    }

    #[test]
    fn manifest_round_trips() {
        let mut cfg = StudyConfig::defaults(TestId::Lq2d);
        cfg.control_radius = Some(1.25);
        cfg.fp_mode = FpMode::exact();
        let again = StudyConfig::resolve(Some(&cfg.to_kv()), std::iter::empty(), &[]).unwrap();
        assert_eq!(again, StudyConfig { cache_dir: Some(cfg.cache_dir()), ..cfg });
    }

    #[test]
    fn rejects_bad_input() {
        assert!(StudyConfig::resolve(Some("bogus = 1"), std::iter::empty(), &[]).is_err());
        assert!(StudyConfig::resolve(Some("dx_list = 0.1, 0.2"), std::iter::empty(), &[]).is_err());
        assert!(StudyConfig::resolve(Some("dx_list = 0.3"), std::iter::empty(), &[]).is_err());
        assert!(StudyConfig::resolve(Some("noequals"), std::iter::empty(), &[]).is_err());
        assert!("lq-3d".parse::<TestId>().is_err());
    }

    #[test]
    fn reference_key_tracks_relevant_fields() {
        let a = StudyConfig::defaults(TestId::Local1d);
        let mut b = a.clone();
        b.dx_list.pop();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.reference_key(), b.reference_key());
        b.ref_dx = 1.0 / 1000.0;
        assert_ne!(a.reference_key(), b.reference_key());
    }
}
