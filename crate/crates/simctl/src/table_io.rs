//! PDR table CSV: header `distance_m,power_dbm,cbr,pdr`, one row per grid
//! cell, every cell of the full grid present exactly once.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use txctl_core::{Error, PdrTable};

const HEADER: [&str; 4] = ["distance_m", "power_dbm", "cbr", "pdr"];

pub fn write_table<W: Write>(out: W, table: &PdrTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (di, d) in table.distances().iter().enumerate() {
        for (pi, p) in table.powers().iter().enumerate() {
            for (ci, c) in table.cbr_levels().iter().enumerate() {
                let v = table.cell(di, pi, ci);
                w.write_record([d.to_string(), p.to_string(), c.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_table(path: &Path, table: &PdrTable) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_table(std::io::BufWriter::new(file), table)
}

pub fn load_table(path: &Path) -> Result<PdrTable> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_table(file).with_context(|| format!("in {}", path.display()))
}

/// Reads and validates a table. Line numbers in errors count the header as
/// line 1.
pub fn read_table<R: Read>(input: R) -> Result<PdrTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().context("reading header")?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        bail!("line 1: expected header {}", HEADER.join(","));
    }
    let mut rows: Vec<([f64; 3], f64, u64)> = Vec::new();
    for (k, record) in r.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        if record.len() != 4 {
            bail!("line {line}: expected 4 fields, got {}", record.len());
        }
        let mut x = [0.0f64; 4];
        for (i, field) in record.iter().enumerate() {
            x[i] = field
                .trim()
                .parse()
                .map_err(|_| anyhow!("line {line}: {} is not a number: {field:?}", HEADER[i]))?;
            if !x[i].is_finite() {
                bail!("line {line}: {} is not finite", HEADER[i]);
            }
        }
        rows.push(([x[0], x[1], x[2]], x[3], line));
    }
    if rows.is_empty() {
        bail!("table has no rows");
    }

    let axis = |i: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r.0[i]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (distances, powers, cbrs) = (axis(0), axis(1), axis(2));
    let index = |axis: &[f64], x: f64| {
        axis.binary_search_by(|a| a.total_cmp(&x))
            .expect("value taken from rows")
    };
    let (np, nc) = (powers.len(), cbrs.len());
    let cells = distances.len() * np * nc;
    let mut values = vec![f64::NAN; cells];
    let mut line_of: HashMap<usize, u64> = HashMap::new();
    for &(key, v, line) in &rows {
        let (di, pi, ci) = (index(&distances, key[0]), index(&powers, key[1]), index(&cbrs, key[2]));
        let cell = (di * np + pi) * nc + ci;
        if let Some(prev) = line_of.insert(cell, line) {
            bail!("line {line}: duplicates the cell of line {prev}");
        }
        values[cell] = v;
    }
    if rows.len() != cells {
        let missing = values.iter().position(|v| v.is_nan()).expect("fewer rows than cells");
        let (di, rest) = (missing / (np * nc), missing % (np * nc));
        bail!(
            "grid incomplete: {} of {cells} cells present; first missing d={} p={} cbr={}",
            rows.len(),
            distances[di],
            powers[rest / nc],
            cbrs[rest % nc]
        );
    }
    let line = |di: usize, pi: usize, ci: usize| line_of[&((di * np + pi) * nc + ci)];
    PdrTable::from_parts(distances, powers, cbrs, values).map_err(|e| match e {
        Error::NonMonotone {
            axis,
            distance_idx,
            power_idx,
            cbr_idx,
        } => anyhow!(
            "line {}: PDR violates monotonicity along {axis}",
            line(distance_idx, power_idx, cbr_idx)
        ),
        Error::ValueOutOfRange {
            value,
            distance_idx,
            power_idx,
            cbr_idx,
        } => anyhow!(
            "line {}: PDR {value} outside [0, 1]",
            line(distance_idx, power_idx, cbr_idx)
        ),
        other => anyhow!("{other}"),
    })
}
