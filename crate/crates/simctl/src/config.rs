use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use toml::Value;
use txctl_core::sim::{EvalOptions, FixedPointOptions};
use txctl_core::{CollisionParams, ControllerGrid, MerlinOptions, PhyParams, TableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ControllerKind {
    Mh,
    Presto,
    Merlin,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Mh => "mh",
            ControllerKind::Presto => "presto",
            ControllerKind::Merlin => "merlin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mh" => Some(ControllerKind::Mh),
            "presto" => Some(ControllerKind::Presto),
            "merlin" => Some(ControllerKind::Merlin),
            _ => None,
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything one matrix run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub densities: Vec<f64>,
    pub n_a_values: Vec<usize>,
    pub controllers: Vec<ControllerKind>,
    pub seeds: Vec<u64>,
    pub road_length_m: f64,
    pub lanes: usize,
    pub output_dir: PathBuf,
    /// Write every converged scenario as CSV under `output_dir/scenarios`.
    pub dump_scenarios: bool,
    pub phy: PhyParams,
    pub collision: CollisionParams,
    pub table_spec: TableSpec,
    /// PDR table CSV to use instead of the synthetic model.
    pub table_file: Option<PathBuf>,
    pub alpha: f64,
    pub grid: ControllerGrid,
    pub mh_power_dbm: f64,
    pub presto_drop_idle: bool,
    pub merlin: MerlinOptions,
    pub fixed_point: FixedPointOptions,
    pub eval: EvalOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            densities: vec![10.0, 20.0, 30.0],
            n_a_values: vec![1, 2, 3, 4, 5],
            controllers: vec![ControllerKind::Mh, ControllerKind::Presto, ControllerKind::Merlin],
            seeds: vec![1],
            road_length_m: 5000.0,
            lanes: 4,
            output_dir: PathBuf::from("out"),
            dump_scenarios: false,
            phy: PhyParams::default(),
            collision: CollisionParams::default(),
            table_spec: TableSpec::default(),
            table_file: None,
            alpha: 0.05,
            grid: ControllerGrid::table1(),
            mh_power_dbm: 25.0,
            presto_drop_idle: false,
            merlin: MerlinOptions::default(),
            fixed_point: FixedPointOptions::default(),
            eval: EvalOptions::default(),
        }
    }
}

/// Grid fields collected before the grid is rebuilt and checked.
struct GridParts {
    delta_t: f64,
    delta_p: f64,
    t_max: f64,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Some(t) = &cfg.table_file {
            if t.is_relative() {
                cfg.table_file = Some(base.join(t));
            }
        }
        Ok(cfg)
    }

    /// Parses dotted keys (`phy.n1 = 1.8`, or the same inside a `[phy]`
    /// table) over the defaults. Unknown keys are an error listing all of
    /// them.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().context("parsing config")?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);

        let mut cfg = Self::default();
        let mut grid = GridParts {
            delta_t: cfg.grid.delta_t,
            delta_p: cfg.grid.delta_p,
            t_max: cfg.grid.t_max,
        };
        let mut unknown = Vec::new();
        for (key, value) in &flat {
            if !cfg.set(key, value, &mut grid)? {
                unknown.push(key.as_str());
            }
        }
        if !unknown.is_empty() {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
        cfg.grid = ControllerGrid::new(
            grid.delta_t,
            grid.delta_p,
            grid.t_max,
            cfg.phy.p_min_dbm,
            cfg.phy.p_max_dbm,
        )
        .map_err(|e| anyhow!("grid: {e}"))?;
        cfg.merlin.warm_start_grid = cfg.grid;
        cfg.merlin.t_max_hz = cfg.grid.t_max;
        cfg.eval.t_max_hz = cfg.grid.t_max;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Returns false for an unknown key.
    fn set(&mut self, key: &str, v: &Value, grid: &mut GridParts) -> Result<bool> {
        let f = || float(key, v);
        match key {
            "experiment.densities" => self.densities = list(key, v, float)?,
            "experiment.n_a" => self.n_a_values = list(key, v, count)?,
            "experiment.controllers" => {
                self.controllers = list(key, v, |k, x| {
                    let s = x.as_str().ok_or_else(|| anyhow!("{k}: expected a string"))?;
                    ControllerKind::parse(s).ok_or_else(|| anyhow!("{k}: unknown controller {s:?}"))
                })?
            }
            "experiment.seeds" => self.seeds = list(key, v, |k, x| count(k, x).map(|n| n as u64))?,
            "experiment.road_length_m" => self.road_length_m = f()?,
            "experiment.lanes" => self.lanes = count(key, v)?,
            "experiment.output_dir" => self.output_dir = PathBuf::from(string(key, v)?),
            "experiment.dump_scenarios" => self.dump_scenarios = boolean(key, v)?,
            "phy.carrier_freq_hz" => self.phy.carrier_freq_hz = f()?,
            "phy.p_min_dbm" => self.phy.p_min_dbm = f()?,
            "phy.p_max_dbm" => self.phy.p_max_dbm = f()?,
            "phy.carrier_sense_threshold_dbm" => self.phy.carrier_sense_threshold_dbm = f()?,
            "phy.receiver_sensitivity_dbm" => self.phy.receiver_sensitivity_dbm = f()?,
            "phy.shadowing_sigma_db" => self.phy.shadowing_sigma_db = f()?,
            "phy.extra_loss_db" => self.phy.extra_loss_db = f()?,
            "phy.breakpoint_m" => self.phy.breakpoint_m = f()?,
            "phy.n1" => self.phy.n1 = f()?,
            "phy.n2" => self.phy.n2 = f()?,
            "phy.data_rate_bps" => self.phy.data_rate_bps = f()?,
            "phy.message_size_bytes" => self.phy.message_size_bytes = f()?,
            "phy.phy_mac_overhead_s" => self.phy.phy_mac_overhead_s = f()?,
            "collision.gamma" => self.collision.gamma = f()?,
            "collision.kappa" => self.collision.kappa = f()?,
            "table.distance_step_m" => self.table_spec.distance_step_m = f()?,
            "table.max_distance_m" => self.table_spec.max_distance_m = f()?,
            "table.power_step_db" => self.table_spec.power_step_db = f()?,
            "table.cbr_levels" => self.table_spec.cbr_levels = list(key, v, float)?,
            "table.file" => self.table_file = Some(PathBuf::from(string(key, v)?)),
            "wilson.alpha" => self.alpha = f()?,
            "grid.delta_t" => grid.delta_t = f()?,
            "grid.delta_p" => grid.delta_p = f()?,
            "grid.t_max" => grid.t_max = f()?,
            "mh.power_dbm" => self.mh_power_dbm = f()?,
            "presto.drop_idle" => self.presto_drop_idle = boolean(key, v)?,
            "merlin.n_v" => self.merlin.n_v = Some(count(key, v)?),
            "merlin.cap_total_rate" => self.merlin.cap_total_rate = boolean(key, v)?,
            "merlin.spread_starts" => self.merlin.spread_starts = count(key, v)?,
            "merlin.max_iter" => self.merlin.max_iter = count(key, v)?,
            "fixed_point.damping" => self.fixed_point.damping = f()?,
            "fixed_point.tol" => self.fixed_point.tol = f()?,
            "fixed_point.max_iter" => self.fixed_point.max_iter = count(key, v)?,
            "metrics.windows" => self.eval.windows = count(key, v)? as u64,
            "metrics.window_s" => self.eval.window_s = f()?,
            "metrics.dp_bin_m" => self.eval.dp_bin_m = f()?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.densities.is_empty()
            || self.n_a_values.is_empty()
            || self.controllers.is_empty()
            || self.seeds.is_empty()
        {
            bail!("densities, n_a, controllers and seeds must all be non-empty");
        }
        if let Some(d) = self.densities.iter().find(|d| !(**d > 0.0)) {
            bail!("density must be positive, got {d}");
        }
        if let Some(n) = self.n_a_values.iter().find(|n| !(1..=5).contains(*n)) {
            bail!("n_a must lie in 1..=5, got {n}");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            bail!("seeds must be distinct");
        }
        let mut kinds = self.controllers.clone();
        kinds.sort_unstable();
        if kinds.windows(2).any(|w| w[0] == w[1]) {
            bail!("controllers must be distinct");
        }
        if !(self.road_length_m > 0.0) || self.lanes == 0 {
            bail!("road length and lane count must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("wilson.alpha must lie in (0, 1), got {}", self.alpha);
        }
        if !(self.phy.p_min_dbm..=self.phy.p_max_dbm).contains(&self.mh_power_dbm) {
            bail!("mh.power_dbm must lie within [p_min, p_max]");
        }
        if self.eval.windows == 0 || !(self.eval.window_s > 0.0) || !(self.eval.dp_bin_m > 0.0) {
            bail!("metrics windows, window length and DP bin must be positive");
        }
        self.phy.validate().map_err(|e| anyhow!("phy: {e}"))?;
        self.collision.validate().map_err(|e| anyhow!("collision: {e}"))?;
        self.fixed_point.validate().map_err(|e| anyhow!("fixed_point: {e}"))?;
        Ok(())
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => bail!("{key}: expected a number"),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => bail!("{key}: expected a non-negative integer"),
    }
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| anyhow!("{key}: expected true or false"))
}

fn string(key: &str, v: &Value) -> Result<String> {
    v.as_str()
        .map(str::to_owned)
        .ok_or_else(|| anyhow!("{key}: expected a string"))
}

fn list<T>(key: &str, v: &Value, item: impl Fn(&str, &Value) -> Result<T>) -> Result<Vec<T>> {
    let arr = v.as_array().ok_or_else(|| anyhow!("{key}: expected a list"))?;
    arr.iter().map(|x| item(key, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_keys() {
        assert_eq!(
            ExperimentConfig::from_toml_str("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn dotted_and_sectioned_keys_agree() {
        let a = ExperimentConfig::from_toml_str("phy.carrier_sense_threshold_dbm = -90\ngrid.delta_p = 1.0").unwrap();
        let b =
            ExperimentConfig::from_toml_str("[phy]\ncarrier_sense_threshold_dbm = -90\n[grid]\ndelta_p = 1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phy.carrier_sense_threshold_dbm, -90.0);
        assert_eq!(a.grid.n_p, 26);
        assert_eq!(a.merlin.warm_start_grid, a.grid);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = ExperimentConfig::from_toml_str("phy.nope = 1\nexperiment.seeds = [1]\nfoo = 2").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("phy.nope") && msg.contains("foo"), "{msg}");
    }

    #[test]
    fn invalid_values_fail_fast() {
        for text in [
            "experiment.seeds = [1, 1]",
            "experiment.n_a = [6]",
            "experiment.controllers = [\"xyz\"]",
            "experiment.densities = []",
            "grid.delta_t = 0.3",
            "phy.n1 = \"a\"",
            "fixed_point.damping = 0",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
