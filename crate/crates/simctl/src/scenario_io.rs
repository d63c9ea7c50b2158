//! Scenario CSV: `id,position_m,lane,app_class,cr_m,rate_hz`, one row per
//! vehicle and application. `app_class` is empty for untagged applications.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use txctl_core::sim::{Scenario, Vehicle};
use txctl_core::{AppClass, AppRequirement, TxConfig};

const HEADER: [&str; 6] = ["id", "position_m", "lane", "app_class", "cr_m", "rate_hz"];

pub fn write_scenario<W: Write>(out: W, scenario: &Scenario) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for v in &scenario.vehicles {
        for a in &v.apps {
            let class = a.class.map(|c| c.as_char().to_string()).unwrap_or_default();
            w.write_record([
                v.id.to_string(),
                v.position_m.to_string(),
                v.lane.to_string(),
                class,
                a.cr_m.to_string(),
                a.rate_hz.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_scenario(std::io::BufWriter::new(file), scenario)
}

/// Reads vehicles back; rows of one vehicle must be contiguous. Road length,
/// density and seed are not part of the file and are supplied by the caller.
/// Vehicles come back without configuration and with zero CBR.
pub fn read_scenario<R: Read>(input: R, road_length_m: f64, density: f64, rng_seed: u64) -> Result<Scenario> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().context("reading header")?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        bail!("line 1: expected header {}", HEADER.join(","));
    }
    let mut vehicles: Vec<Vehicle> = Vec::new();
    for (k, record) in r.records().enumerate() {
        let line = k + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        if record.len() != 6 {
            bail!("line {line}: expected 6 fields, got {}", record.len());
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("line {line}: {} is not a number", HEADER[i]))
        };
        let int = |i: usize| -> Result<usize> {
            record[i]
                .trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("line {line}: {} is not a non-negative integer", HEADER[i]))
        };
        let (id, position_m, lane) = (int(0)?, num(1)?, int(2)?);
        let class = match record[3].trim() {
            "" => None,
            s => Some(
                s.chars()
                    .next()
                    .filter(|_| s.len() == 1)
                    .and_then(AppClass::from_char)
                    .ok_or_else(|| anyhow!("line {line}: unknown application class {s:?}"))?,
            ),
        };
        let app = AppRequirement::new(num(4)?, num(5)?, class).map_err(|e| anyhow!("line {line}: {e}"))?;
        if !(0.0..=road_length_m).contains(&position_m) {
            bail!("line {line}: position {position_m} outside the road");
        }
        match vehicles.last_mut() {
            Some(v) if v.id == id => {
                if v.position_m != position_m || v.lane != lane {
                    bail!("line {line}: vehicle {id} changes position or lane");
                }
                v.apps.push(app);
            }
            _ => {
                if vehicles.iter().any(|v| v.id == id) {
                    bail!("line {line}: rows of vehicle {id} are not contiguous");
                }
                vehicles.push(Vehicle {
                    id,
                    position_m,
                    lane,
                    apps: vec![app],
                    tx_config: TxConfig::default(),
                    local_cbr: 0.0,
                });
            }
        }
    }
    if vehicles.is_empty() {
        bail!("scenario has no vehicles");
    }
    let lanes = vehicles.iter().map(|v| v.lane).max().unwrap_or(0) + 1;
    Ok(Scenario {
        road_length_m,
        lanes,
        density,
        vehicles,
        rng_seed,
    })
}
