use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{AppClass, AppRequirement};
use crate::error::{Error, Result};
use crate::footprint::TxConfig;

/// Fraction of the road, centred, over which metrics are collected.
pub const STATS_REGION_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    pub position_m: f64,
    pub lane: usize,
    pub apps: Vec<AppRequirement>,
    pub tx_config: TxConfig,
    pub local_cbr: f64,
}

/// A static snapshot of a straight multi-lane road.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub road_length_m: f64,
    pub lanes: usize,
    /// Vehicles per km per lane.
    pub density: f64,
    /// Lane-major, ascending position within each lane.
    pub vehicles: Vec<Vehicle>,
    pub rng_seed: u64,
}

impl Scenario {
    /// Bounds of the central statistics region.
    pub fn stats_region(&self) -> (f64, f64) {
        let margin = 0.5 * (1.0 - STATS_REGION_FRACTION) * self.road_length_m;
        (margin, self.road_length_m - margin)
    }

    pub fn in_stats_region(&self, position_m: f64) -> bool {
        let (lo, hi) = self.stats_region();
        (lo..=hi).contains(&position_m)
    }

    /// Number of applications per vehicle, if all vehicles agree.
    pub fn apps_per_vehicle(&self) -> Option<usize> {
        let n = self.vehicles.first()?.apps.len();
        self.vehicles.iter().all(|v| v.apps.len() == n).then_some(n)
    }
}

/// Places `round(density · length / 1000)` vehicles uniformly at random on
/// each lane. Vehicles start without applications or configuration.
pub fn generate_scenario(density: f64, road_length_m: f64, lanes: usize, seed: u64) -> Result<Scenario> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "density must be positive, got {density}"
        )));
    }
    if !(road_length_m > 0.0) || !road_length_m.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "road length must be positive, got {road_length_m}"
        )));
    }
    let per_lane = libm::round(density * road_length_m / 1000.0) as usize;
    if per_lane == 0 || lanes == 0 {
        return Err(Error::EmptyScenario);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vehicles = Vec::with_capacity(per_lane * lanes);
    for lane in 0..lanes {
        let mut positions: Vec<f64> = (0..per_lane).map(|_| rng.random::<f64>() * road_length_m).collect();
        positions.sort_by(f64::total_cmp);
        for k in 1..positions.len() {
            if positions[k] <= positions[k - 1] {
                positions[k] = positions[k - 1].next_up();
            }
        }
        for position_m in positions {
            vehicles.push(Vehicle {
                id: vehicles.len(),
                position_m: position_m.min(road_length_m),
                lane,
                apps: Vec::new(),
                tx_config: TxConfig::default(),
                local_cbr: 0.0,
            });
        }
    }
    Ok(Scenario {
        road_length_m,
        lanes,
        density,
        vehicles,
        rng_seed: seed,
    })
}

/// Draws one application: a uniformly chosen class, then `(CR, R)` uniform
/// within that class's box.
pub fn draw_application<R: Rng + ?Sized>(rng: &mut R) -> AppRequirement {
    let class = AppClass::ALL[rng.random_range(0..AppClass::ALL.len())];
    let (u, v): (f64, f64) = (rng.random(), rng.random());
    let (cr_lo, cr_hi) = class.range_band();
    let (r_lo, r_hi) = class.rate_band();
    // The range box is open below and the rate box open above; u, v ∈ [0, 1).
    let cr_m = cr_hi - (cr_hi - cr_lo) * u;
    let rate_hz = r_lo + (r_hi - r_lo) * v;
    AppRequirement {
        cr_m,
        rate_hz,
        class: Some(class),
    }
}

/// `n_a` independent applications for `vehicle`, drawn from a stream
/// determined by `seed` and the vehicle id.
pub fn assign_applications(vehicle: &Vehicle, n_a: usize, seed: u64) -> Vec<AppRequirement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(vehicle.id as u64);
    (0..n_a).map(|_| draw_application(&mut rng)).collect()
}

/// Assigns `n_a` applications to every vehicle of `scenario`.
pub fn populate_applications(scenario: &mut Scenario, n_a: usize, seed: u64) -> Result<()> {
    if n_a == 0 {
        return Err(Error::NoApplications);
    }
    for v in &mut scenario.vehicles {
        v.apps = assign_applications(v, n_a, seed);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_density() {
        assert_eq!(generate_scenario(10.0, 5000.0, 4, 1).unwrap().vehicles.len(), 200);
        assert_eq!(generate_scenario(30.0, 5000.0, 4, 1).unwrap().vehicles.len(), 600);
    }

    #[test]
    fn lanes_are_sorted_and_inside_road() {
        let s = generate_scenario(20.0, 5000.0, 4, 9).unwrap();
        for lane in 0..4 {
            let pos: Vec<f64> = s
                .vehicles
                .iter()
                .filter(|v| v.lane == lane)
                .map(|v| v.position_m)
                .collect();
            assert_eq!(pos.len(), 100);
            assert!(pos.windows(2).all(|w| w[0] < w[1]));
            assert!(pos.iter().all(|&p| (0.0..=5000.0).contains(&p)));
        }
    }

    #[test]
    fn seeded_generation_repeats() {
        assert_eq!(
            generate_scenario(10.0, 5000.0, 4, 3),
            generate_scenario(10.0, 5000.0, 4, 3)
        );
        assert_ne!(
            generate_scenario(10.0, 5000.0, 4, 3),
            generate_scenario(10.0, 5000.0, 4, 4)
        );
    }

    #[test]
    fn degenerate_scenarios() {
        assert_eq!(generate_scenario(0.05, 5000.0, 4, 1), Err(Error::EmptyScenario));
        assert!(generate_scenario(0.0, 5000.0, 4, 1).is_err());
    }

    #[test]
    fn stats_region_is_central_sixty_percent() {
        let s = generate_scenario(10.0, 5000.0, 4, 1).unwrap();
        assert_eq!(s.stats_region(), (1000.0, 4000.0));
    }

    #[test]
    fn drawn_apps_stay_in_their_class_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let app = draw_application(&mut rng);
            let class = app.class.unwrap();
            assert!(class.contains(app.cr_m, app.rate_hz), "{app:?}");
            if class == AppClass::C {
                assert!(app.cr_m <= 240.0 && app.rate_hz < 4.0);
            }
        }
    }

    #[test]
    fn app_assignment_is_reproducible() {
        let mut s = generate_scenario(10.0, 5000.0, 4, 1).unwrap();
        populate_applications(&mut s, 5, 42).unwrap();
        let first = s.vehicles[17].apps.clone();
        assert_eq!(first.len(), 5);
        assert_eq!(assign_applications(&s.vehicles[17], 5, 42), first);
        assert_ne!(assign_applications(&s.vehicles[18], 5, 42), first);
    }
}
