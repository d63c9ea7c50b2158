use alloc::format;
use alloc::vec::Vec;

use super::{pdr, CollisionParams, PhyParams};
use crate::error::{Error, Result};

/// Grid on which [`build_pdr_table`] tabulates the PDR model.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub distance_step_m: f64,
    pub max_distance_m: f64,
    pub power_step_db: f64,
    pub cbr_levels: Vec<f64>,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self {
            distance_step_m: 10.0,
            max_distance_m: 1000.0,
            power_step_db: 0.5,
            cbr_levels: (1..=8).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    nodes: Vec<f64>,
    /// `(first node, spacing)` when the nodes are evenly spaced, for an O(1)
    /// first guess of the cell.
    uniform: Option<(f64, f64)>,
}

impl Axis {
    fn new(nodes: Vec<f64>, name: &str) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyTable);
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid(format!("{name} grid must be strictly ascending")));
        }
        let uniform = (nodes.len() > 2).then(|| {
            let (x0, step) = (nodes[0], (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64);
            let even = nodes
                .iter()
                .enumerate()
                .all(|(k, &x)| (x - (x0 + k as f64 * step)).abs() <= 1e-9 * step);
            even.then_some((x0, step))
        });
        Ok(Self {
            nodes,
            uniform: uniform.flatten(),
        })
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Cell index and fractional offset of `x`, clamped to the hull. The
    /// offset is exactly zero when `x` is a node.
    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.nodes.len();
        if n == 1 || x <= self.nodes[0] {
            return (0, 0.0);
        }
        if x >= self.nodes[n - 1] {
            return (n - 1, 0.0);
        }
        let i = match self.uniform {
            Some((x0, step)) => {
                // Guess, then settle on the last node not above x.
                let mut i = (((x - x0) / step) as usize).min(n - 2);
                while i + 1 < n && self.nodes[i + 1] <= x {
                    i += 1;
                }
                while self.nodes[i] > x {
                    i -= 1;
                }
                i
            }
            None => self.nodes.partition_point(|&v| v <= x) - 1,
        };
        let upper = i + 1;
        let lo = self.nodes[i];
        if x == lo {
            return (i, 0.0);
        }
        (i, (x - lo) / (self.nodes[upper] - lo))
    }
}

/// PDR tabulated over (distance, power, CBR).
#[derive(Debug, Clone, PartialEq)]
pub struct PdrTable {
    distances: Axis,
    powers: Axis,
    cbr_levels: Axis,
    values: Vec<f64>,
}

impl PdrTable {
    /// Assembles a table from its grids and values laid out distance-major,
    /// then power, then CBR. Rejects out-of-range values and monotonicity
    /// violations.
    pub fn from_parts(distances: Vec<f64>, powers: Vec<f64>, cbr_levels: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let table = Self {
            distances: Axis::new(distances, "distance")?,
            powers: Axis::new(powers, "power")?,
            cbr_levels: Axis::new(cbr_levels, "cbr")?,
            values,
        };
        let expected = table.distances.len() * table.powers.len() * table.cbr_levels.len();
        if table.values.len() != expected {
            return Err(Error::InvalidGrid(format!(
                "expected {expected} values, got {}",
                table.values.len()
            )));
        }
        table.validate()?;
        Ok(table)
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances.nodes
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers.nodes
    }

    pub fn cbr_levels(&self) -> &[f64] {
        &self.cbr_levels.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn index(&self, di: usize, pi: usize, ci: usize) -> usize {
        (di * self.powers.len() + pi) * self.cbr_levels.len() + ci
    }

    /// Stored value at grid cell `(di, pi, ci)`.
    pub fn cell(&self, di: usize, pi: usize, ci: usize) -> f64 {
        self.values[self.index(di, pi, ci)]
    }

    fn validate(&self) -> Result<()> {
        let (nd, np, nc) = (self.distances.len(), self.powers.len(), self.cbr_levels.len());
        for di in 0..nd {
            for pi in 0..np {
                for ci in 0..nc {
                    let v = self.cell(di, pi, ci);
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::ValueOutOfRange {
                            value: v,
                            distance_idx: di,
                            power_idx: pi,
                            cbr_idx: ci,
                        });
                    }
                    let violation = |axis| Error::NonMonotone {
                        axis,
                        distance_idx: di,
                        power_idx: pi,
                        cbr_idx: ci,
                    };
                    if di > 0 && v > self.cell(di - 1, pi, ci) {
                        return Err(violation("distance"));
                    }
                    if pi > 0 && v < self.cell(di, pi - 1, ci) {
                        return Err(violation("power"));
                    }
                    if ci > 0 && v > self.cell(di, pi, ci - 1) {
                        return Err(violation("cbr"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Trilinear interpolation, clamped to the grid hull.
    #[inline]
    pub fn lookup(&self, distance_m: f64, power_dbm: f64, cbr: f64) -> f64 {
        let (di, fd) = self.distances.locate(distance_m);
        let (pi, fp) = self.powers.locate(power_dbm);
        let (ci, fc) = self.cbr_levels.locate(cbr);
        let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + t * (b - a) };
        let along_c = |d: usize, p: usize| {
            let a = self.cell(d, p, ci);
            if fc == 0.0 {
                a
            } else {
                lerp(a, self.cell(d, p, ci + 1), fc)
            }
        };
        let along_p = |d: usize| {
            let a = along_c(d, pi);
            if fp == 0.0 {
                a
            } else {
                lerp(a, along_c(d, pi + 1), fp)
            }
        };
        let v = along_p(di);
        let v = if fd == 0.0 { v } else { lerp(v, along_p(di + 1), fd) };
        v.clamp(0.0, 1.0)
    }
}

/// Tabulates [`pdr`] on the grid described by `spec`, with powers spanning
/// `[p_min, p_max]` of `phy`.
pub fn build_pdr_table(phy: &PhyParams, collision: &CollisionParams, spec: &TableSpec) -> Result<PdrTable> {
    phy.validate()?;
    collision.validate()?;
    if !(spec.distance_step_m > 0.0) || !(spec.max_distance_m >= 0.0) {
        return Err(Error::InvalidGrid("distance step and range must be positive".into()));
    }
    if !(spec.power_step_db > 0.0) {
        return Err(Error::InvalidGrid("power step must be positive".into()));
    }
    if spec.cbr_levels.is_empty() || spec.cbr_levels.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidGrid(
            "cbr levels must be non-empty and within [0, 1]".into(),
        ));
    }
    let grid = |start: f64, stop: f64, step: f64| -> Vec<f64> {
        let n = libm::round((stop - start) / step) as usize;
        (0..=n).map(|k| start + k as f64 * step).collect()
    };
    let distances = grid(0.0, spec.max_distance_m, spec.distance_step_m);
    let powers = grid(phy.p_min_dbm, phy.p_max_dbm, spec.power_step_db);
    if (powers[powers.len() - 1] - phy.p_max_dbm).abs() > 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "power step {} does not divide [{}, {}]",
            spec.power_step_db, phy.p_min_dbm, phy.p_max_dbm
        )));
    }
    let mut values = Vec::with_capacity(distances.len() * powers.len() * spec.cbr_levels.len());
    for &d in &distances {
        for &p in &powers {
            for &c in &spec.cbr_levels {
                values.push(pdr(d, p, c, phy, collision));
            }
        }
    }
    PdrTable::from_parts(distances, powers, spec.cbr_levels.clone(), values)
}

/// Free-function form of [`PdrTable::lookup`].
pub fn pdr_lookup(table: &PdrTable, distance_m: f64, power_dbm: f64, cbr: f64) -> f64 {
    table.lookup(distance_m, power_dbm, cbr)
}
