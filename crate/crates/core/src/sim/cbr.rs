use alloc::vec;
use alloc::vec::Vec;

use super::Scenario;
use crate::channel::PsrModel;
use crate::footprint::{load_at, TxConfig};

/// Transmitters whose every entry is sensed with probability below this are
/// left out of a receiver's sum; each contributes under `2e-8 · t_pkt`.
const NEGLIGIBLE_PSR: f64 = 1e-9;

/// Distance beyond which `cfg` contributes no measurable load.
pub(crate) fn sensing_reach(cfg: &TxConfig, psr: &PsrModel) -> f64 {
    cfg.entries()
        .iter()
        .filter(|e| e.rate_hz > 0.0)
        .map(|e| e.power_dbm)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))))
        .map_or(0.0, |p| psr.range_below(p, NEGLIGIBLE_PSR))
}

/// Vehicle indices by ascending position (lanes merged), with positions.
pub(crate) fn by_position(scenario: &Scenario) -> Vec<(f64, usize)> {
    let mut order: Vec<(f64, usize)> = scenario
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| (v.position_m, i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order
}

/// Channel busy ratio sensed by every vehicle: the clamped sum of the load
/// every other vehicle causes at its longitudinal distance.
pub fn compute_cbr(scenario: &Scenario, psr: &PsrModel, t_pkt: f64) -> Vec<f64> {
    let n = scenario.vehicles.len();
    let order = by_position(scenario);
    let mut cbr = vec![0.0; n];
    for (k, &(pos_u, u)) in order.iter().enumerate() {
        let cfg = &scenario.vehicles[u].tx_config;
        let reach = sensing_reach(cfg, psr);
        if reach <= 0.0 {
            continue;
        }
        let mut add = |&(pos_v, v): &(f64, usize)| {
            cbr[v] += load_at(libm::fabs(pos_v - pos_u), cfg, psr, t_pkt);
        };
        order[k + 1..]
            .iter()
            .take_while(|&&(p, _)| p - pos_u <= reach)
            .for_each(&mut add);
        order[..k]
            .iter()
            .rev()
            .take_while(|&&(p, _)| pos_u - p <= reach)
            .for_each(&mut add);
    }
    for c in &mut cbr {
        *c = c.min(1.0);
    }
    cbr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footprint::TxEntry;
    use crate::models::Models;
    use crate::sim::generate_scenario;

    fn with_configs(mut s: Scenario, cfg: TxConfig) -> Scenario {
        for v in &mut s.vehicles {
            v.tx_config = cfg.clone();
        }
        s
    }

    #[test]
    fn lone_vehicle_senses_nothing() {
        let models = Models::default();
        let s = generate_scenario(0.2, 5000.0, 1, 1).unwrap();
        assert_eq!(s.vehicles.len(), 1);
        let s = with_configs(s, TxConfig::new(vec![TxEntry::new(25.0, 10.0)]));
        assert_eq!(compute_cbr(&s, &models.psr, models.t_pkt), vec![0.0]);
    }

    #[test]
    fn two_vehicles_match_single_term() {
        let models = Models::default();
        let mut s = generate_scenario(0.4, 5000.0, 1, 1).unwrap();
        s.vehicles[0].position_m = 1000.0;
        s.vehicles[1].position_m = 1150.0;
        let cfg = TxConfig::new(vec![TxEntry::new(20.0, 10.0)]);
        let s = with_configs(s, cfg);
        let cbr = compute_cbr(&s, &models.psr, models.t_pkt);
        let expect = models.t_pkt * 10.0 * models.psr.psr(150.0, 20.0);
        assert!((cbr[0] - expect).abs() < 1e-15 && (cbr[1] - expect).abs() < 1e-15);
    }

    #[test]
    fn doubling_rates_doubles_load() {
        let models = Models::default();
        let s = generate_scenario(10.0, 5000.0, 4, 2).unwrap();
        let one = with_configs(s.clone(), TxConfig::new(vec![TxEntry::new(15.0, 2.0)]));
        let two = with_configs(s, TxConfig::new(vec![TxEntry::new(15.0, 4.0)]));
        let a = compute_cbr(&one, &models.psr, models.t_pkt);
        let b = compute_cbr(&two, &models.psr, models.t_pkt);
        for (x, y) in a.iter().zip(&b) {
            assert!(*y < 1.0);
            assert!((y - 2.0 * x).abs() <= 1e-12 * y.max(1e-12));
        }
    }

    #[test]
    fn truncated_sum_matches_full_sum() {
        let models = Models::default();
        let s = generate_scenario(10.0, 3000.0, 2, 8).unwrap();
        let s = with_configs(s, TxConfig::new(vec![TxEntry::new(25.0, 10.0), TxEntry::new(5.0, 3.0)]));
        let fast = compute_cbr(&s, &models.psr, models.t_pkt);
        for (i, v) in s.vehicles.iter().enumerate() {
            let full: f64 = s
                .vehicles
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, u)| {
                    load_at(
                        (u.position_m - v.position_m).abs(),
                        &u.tx_config,
                        &models.psr,
                        models.t_pkt,
                    )
                })
                .sum();
            assert!((fast[i] - full.min(1.0)).abs() < 1e-9);
        }
    }
}
