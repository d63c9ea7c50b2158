use txctl_core::footprint::load_at;
use txctl_core::sim::{
    compute_cbr, dp_profile, evaluate, fixed_point_run, generate_scenario, populate_applications, sample_receptions,
    sar, Configure, EvalOptions, FixedPointOptions, ReceptionPlan, SarTally, Scenario, Sequential, Vehicle,
};
use txctl_core::{
    AppRequirement, Controller, ControllerGrid, Error, Models, PdrTable, PhyParams, Result, TxConfig, TxEntry,
    WilsonParams,
};

fn models() -> &'static Models {
    use std::sync::OnceLock;
    static M: OnceLock<Models> = OnceLock::new();
    M.get_or_init(Models::default)
}

/// Models with the sensing model of the defaults and a PDR of `f(rho)`
/// applied to the default table.
fn mapped_models(f: impl Fn(f64) -> f64) -> Models {
    let t = &models().table;
    let values = t.values().iter().map(|&v| f(v)).collect();
    let table = PdrTable::from_parts(
        t.distances().to_vec(),
        t.powers().to_vec(),
        t.cbr_levels().to_vec(),
        values,
    )
    .unwrap();
    Models::with_table(&PhyParams::default(), table, WilsonParams::default()).unwrap()
}

fn presto() -> Controller {
    Controller::Presto {
        grid: ControllerGrid::table1(),
        drop_idle: false,
    }
}

fn app(cr: f64, rate: f64) -> AppRequirement {
    AppRequirement::untagged(cr, rate).unwrap()
}

fn vehicle(id: usize, position_m: f64, apps: Vec<AppRequirement>, cfg: TxConfig) -> Vehicle {
    Vehicle {
        id,
        position_m,
        lane: 0,
        apps,
        tx_config: cfg,
        local_cbr: 0.0,
    }
}

fn line(positions: &[f64], apps: Vec<AppRequirement>, cfg: TxConfig) -> Scenario {
    Scenario {
        road_length_m: 1000.0,
        lanes: 1,
        density: positions.len() as f64,
        vehicles: positions
            .iter()
            .enumerate()
            .map(|(i, &p)| vehicle(i, p, apps.clone(), cfg.clone()))
            .collect(),
        rng_seed: 0,
    }
}

fn converged(density: f64, length: f64, n_a: usize, seed: u64, c: &Controller, m: &Models) -> Scenario {
    let mut sc = generate_scenario(density, length, 4, seed).unwrap();
    populate_applications(&mut sc, n_a, seed).unwrap();
    let report = fixed_point_run(&mut sc, c, m, &FixedPointOptions::default(), &Sequential).unwrap();
    assert!(report.converged);
    sc
}

struct Constant(TxConfig);

impl Configure for Constant {
    fn configure(&self, _: &[AppRequirement], _: f64, _: &Models, _: Option<&TxConfig>) -> Result<TxConfig> {
        Ok(self.0.clone())
    }
}

#[test]
fn scenario_sizes_and_layout() {
    assert_eq!(generate_scenario(10.0, 5000.0, 4, 1).unwrap().vehicles.len(), 200);
    let sc = generate_scenario(30.0, 5000.0, 4, 1).unwrap();
    assert_eq!(sc.vehicles.len(), 600);
    assert_eq!(sc, generate_scenario(30.0, 5000.0, 4, 1).unwrap());
    for lane in 0..4 {
        let pos: Vec<f64> = sc
            .vehicles
            .iter()
            .filter(|v| v.lane == lane)
            .map(|v| v.position_m)
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(pos.iter().all(|p| (0.0..=5000.0).contains(p)));
    }
    assert_eq!(sc.stats_region(), (1000.0, 4000.0));
    assert_eq!(generate_scenario(0.01, 10.0, 4, 1).unwrap_err(), Error::EmptyScenario);
}

#[test]
fn constant_controller_converges_in_two_iterations() {
    let m = models();
    let mut sc = generate_scenario(20.0, 2000.0, 2, 3).unwrap();
    populate_applications(&mut sc, 2, 3).unwrap();
    let opts = FixedPointOptions {
        damping: 1.0,
        ..FixedPointOptions::default()
    };
    let c = Constant(TxConfig::new(vec![TxEntry::new(20.0, 10.0)]));
    let report = fixed_point_run(&mut sc, &c, m, &opts, &Sequential).unwrap();
    assert!(report.converged);
    assert!(report.iterations <= 2);
    assert_eq!(report.infeasible_vehicles, 0);
    let direct = compute_cbr(&sc, &m.psr, m.t_pkt);
    for (v, c) in sc.vehicles.iter().zip(direct) {
        assert!((v.local_cbr - c).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&v.local_cbr));
    }
}

#[test]
fn damping_does_not_move_the_fixed_point() {
    let m = models();
    let mut full = generate_scenario(20.0, 2000.0, 4, 4).unwrap();
    populate_applications(&mut full, 3, 4).unwrap();
    let mut half = full.clone();
    let undamped = FixedPointOptions {
        damping: 1.0,
        ..FixedPointOptions::default()
    };
    let a = fixed_point_run(&mut full, &presto(), m, &undamped, &Sequential).unwrap();
    let b = fixed_point_run(&mut half, &presto(), m, &FixedPointOptions::default(), &Sequential).unwrap();
    assert!(a.converged && b.converged);
    let gap = full
        .vehicles
        .iter()
        .zip(&half.vehicles)
        .map(|(x, y)| (x.local_cbr - y.local_cbr).abs())
        .fold(0.0, f64::max);
    assert!(gap < FixedPointOptions::default().tol * 2.0, "{gap}");
}

#[test]
fn lone_vehicle_senses_nothing() {
    let m = models();
    let mut sc = line(&[500.0], vec![app(100.0, 5.0)], TxConfig::default());
    let report = fixed_point_run(&mut sc, &presto(), m, &FixedPointOptions::default(), &Sequential).unwrap();
    assert!(report.converged);
    assert_eq!(sc.vehicles[0].local_cbr, 0.0);
}

#[test]
fn fixed_point_rejects_bad_damping_and_falls_back_on_infeasible() {
    let m = models();
    let mut sc = line(&[400.0, 500.0], vec![app(100.0, 5.0)], TxConfig::default());
    for damping in [0.0, 1.5] {
        let opts = FixedPointOptions {
            damping,
            ..FixedPointOptions::default()
        };
        assert!(fixed_point_run(&mut sc, &presto(), m, &opts, &Sequential).is_err());
    }
    // 19.9 Hz received at 240 m is out of reach on the 20 Hz grid.
    let mut sc = line(&[400.0, 500.0], vec![app(240.0, 19.9)], TxConfig::default());
    let report = fixed_point_run(&mut sc, &presto(), m, &FixedPointOptions::default(), &Sequential).unwrap();
    assert_eq!(report.infeasible_vehicles, 2);
    assert_eq!(sc.vehicles[0].tx_config.entries(), &[TxEntry::new(25.0, 19.9)]);
}

#[test]
fn two_vehicle_cbr_is_one_load_term() {
    let m = models();
    let cfg = TxConfig::new(vec![TxEntry::new(18.0, 6.0), TxEntry::new(8.0, 2.0)]);
    let sc = line(&[100.0, 237.5], vec![app(50.0, 1.0)], cfg.clone());
    let cbr = compute_cbr(&sc, &m.psr, m.t_pkt);
    let term = load_at(137.5, &cfg, &m.psr, m.t_pkt);
    assert!((cbr[0] - term).abs() < 1e-15 && (cbr[1] - term).abs() < 1e-15);
    let single = line(&[100.0], vec![app(50.0, 1.0)], cfg);
    assert_eq!(compute_cbr(&single, &m.psr, m.t_pkt), vec![0.0]);
}

#[test]
fn certain_and_impossible_delivery() {
    let cfg = TxConfig::new(vec![TxEntry::new(20.0, 7.0), TxEntry::new(10.0, 3.0)]);
    let mut sc = line(&[400.0, 450.0, 520.0], vec![app(150.0, 9.5)], cfg);
    sc.vehicles.iter_mut().for_each(|v| v.local_cbr = 0.3);
    let sure = mapped_models(|_| 1.0);
    for seed in 0..20 {
        let r = sample_receptions(&sc, &sure.table, 1.0, seed);
        assert!(!r.links.is_empty());
        for l in 0..r.links.len() {
            assert_eq!(r.entry_counts_of(l, 2), &[7, 3]);
            assert_eq!(r.totals[l], 10);
        }
        assert_eq!(sar(&sc, &r).unwrap(), 100.0);
        let bins = dp_profile(&sc, &r, 10.0).unwrap();
        assert!(bins.iter().all(|b| b.p5 >= 0.0 && (b.mean - 0.5).abs() < 1e-12));
    }
    let never = mapped_models(|_| 0.0);
    let r = sample_receptions(&sc, &never.table, 1.0, 5);
    assert!(r.totals.iter().all(|&t| t == 0));
    assert_eq!(sar(&sc, &r).unwrap(), 0.0);
}

#[test]
fn mean_reception_matches_rate_times_pdr() {
    let m = models();
    let cfg = TxConfig::new(vec![TxEntry::new(15.0, 6.0)]);
    let mut sc = line(&[450.0, 560.0], vec![app(200.0, 1.0)], cfg);
    sc.vehicles.iter_mut().for_each(|v| v.local_cbr = 0.4);
    let plan = ReceptionPlan::new(&sc, &m.table);
    let mut r = plan.empty_receptions(1.0);
    let rho = m.table.lookup(110.0, 15.0, 0.4);
    assert!(rho > 0.2 && rho < 0.95, "{rho}");
    let windows = 10_000;
    let mut sum = [0u64; 2];
    for w in 0..windows {
        plan.sample_into(&sc, 9, w, &mut r);
        for (l, link) in r.links.iter().enumerate() {
            sum[link.tx] += u64::from(r.totals[l]);
        }
    }
    for s in sum {
        let mean = s as f64 / windows as f64;
        assert!((mean - 6.0 * rho).abs() < 0.01 * 6.0 * rho, "{mean} vs {}", 6.0 * rho);
    }
}

#[test]
fn fractional_rates_are_sent_on_average() {
    let sure = mapped_models(|_| 1.0);
    let sc = line(
        &[450.0, 500.0],
        vec![app(100.0, 1.0)],
        TxConfig::new(vec![TxEntry::new(10.0, 2.3)]),
    );
    let plan = ReceptionPlan::new(&sc, &sure.table);
    let mut r = plan.empty_receptions(1.0);
    let mut total = 0u64;
    for w in 0..20_000 {
        plan.sample_into(&sc, 3, w, &mut r);
        assert!(r.totals.iter().all(|&t| t == 2 || t == 3));
        total += u64::from(r.totals[0]);
    }
    assert!((total as f64 / 20_000.0 - 2.3).abs() < 0.02);
}

#[test]
fn pairs_beyond_every_range_are_skipped() {
    let sure = mapped_models(|_| 1.0);
    let cfg = TxConfig::new(vec![TxEntry::new(20.0, 8.0)]);
    let mut sc = line(&[500.0, 530.0, 590.0], vec![app(40.0, 5.0)], cfg);
    sc.vehicles[1].apps = vec![app(100.0, 2.0)];
    let r = sample_receptions(&sc, &sure.table, 1.0, 0);
    // Vehicle 1 reaches both others; each of them reaches only what lies within 40 m.
    assert_eq!(r.links.len(), 3);
    let bins = dp_profile(&sc, &r, 10.0).unwrap();
    let starts: Vec<f64> = bins.iter().map(|b| b.bin_start_m).collect();
    assert_eq!(starts, vec![30.0, 60.0]);
    assert_eq!(bins[0].samples, 2);
    assert!((bins[1].mean - 6.0).abs() < 1e-12);
    let empty = line(&[500.0], vec![app(40.0, 5.0)], TxConfig::default());
    let r = sample_receptions(&empty, &sure.table, 1.0, 0);
    assert_eq!(sar(&empty, &r).unwrap_err(), Error::NoEligibleTriples);
}

#[test]
fn presto_meets_requirements_when_model_matches() {
    let m = models();
    let sc = converged(20.0, 2000.0, 1, 6, &presto(), m);
    let opts = EvalOptions {
        windows: 40,
        ..EvalOptions::default()
    };
    let report = evaluate(&sc, m, &opts).unwrap();
    assert!(report.sar >= 97.5, "{}", report.sar);
    assert!(report
        .dp_profile
        .windows(2)
        .all(|w| w[0].bin_start_m < w[1].bin_start_m));
    let sum = |h: &[f64]| h.iter().sum::<f64>();
    assert!((sum(&report.power_pdf.weights) - 1.0).abs() < 1e-9);
    assert!((sum(&report.rate_pdf.weights) - 1.0).abs() < 1e-9);
    assert!((0.0..=1.0).contains(&report.mean_cbr));
}

#[test]
fn evaluation_is_deterministic() {
    let m = models();
    let sc = converged(10.0, 2000.0, 2, 7, &presto(), m);
    let opts = EvalOptions {
        windows: 10,
        seed: 42,
        ..EvalOptions::default()
    };
    assert_eq!(evaluate(&sc, m, &opts).unwrap(), evaluate(&sc, m, &opts).unwrap());
    let again = converged(10.0, 2000.0, 2, 7, &presto(), m);
    assert_eq!(sc, again);
    let other = EvalOptions {
        seed: 43,
        ..opts.clone()
    };
    assert_ne!(
        evaluate(&sc, m, &opts).unwrap().dp_profile,
        evaluate(&sc, m, &other).unwrap().dp_profile
    );
}

#[test]
fn optimistic_table_never_lowers_sar() {
    let m = models();
    let optimistic = mapped_models(|v| 1.0 - 0.7 * (1.0 - v));
    let mh = Controller::Mh { fixed_power_dbm: 25.0 };
    let sc = converged(20.0, 2000.0, 3, 8, &mh, m);
    for seed in 0..5 {
        let opts = EvalOptions {
            windows: 10,
            seed,
            ..EvalOptions::default()
        };
        let base = evaluate(&sc, m, &opts).unwrap().sar;
        let better = evaluate(&sc, &optimistic, &opts).unwrap().sar;
        assert!(better >= base, "seed {seed}: {better} < {base}");
    }
}

#[test]
fn edges_do_not_leak_into_metrics() {
    // The long road is the short one with 1250 m of traffic added at each end.
    let m = models();
    let mh = Controller::Mh { fixed_power_dbm: 25.0 };
    let mut long = generate_scenario(20.0, 7500.0, 4, 9).unwrap();
    populate_applications(&mut long, 1, 9).unwrap();
    let mut short = long.clone();
    short.road_length_m = 5000.0;
    short.vehicles.retain(|v| (1250.0..6250.0).contains(&v.position_m));
    for v in &mut short.vehicles {
        v.position_m -= 1250.0;
    }
    let opts = FixedPointOptions::default();
    fixed_point_run(&mut long, &mh, m, &opts, &Sequential).unwrap();
    fixed_point_run(&mut short, &mh, m, &opts, &Sequential).unwrap();
    let cbr_of = |sc: &Scenario, shift: f64| {
        let (lo, hi) = (1000.0 + shift, 4000.0 + shift);
        let inside: Vec<f64> = sc
            .vehicles
            .iter()
            .filter(|v| (lo..=hi).contains(&v.position_m))
            .map(|v| v.local_cbr)
            .collect();
        inside.iter().sum::<f64>() / inside.len() as f64
    };
    let (a, b) = (cbr_of(&short, 0.0), cbr_of(&long, 1250.0));
    assert!(((a - b) / a).abs() < 0.02, "{a} vs {b}");

    // SAR over the same receivers: restrict the long road's links to the
    // short road's statistics region.
    let sar_over = |sc: &Scenario, shift: f64| {
        let plan = ReceptionPlan::new(sc, &m.table);
        let mut r = plan.empty_receptions(1.0);
        let mut tally = SarTally::default();
        for w in 0..20 {
            plan.sample_into(sc, 1, w, &mut r);
            let mut kept = r.clone();
            let keep: Vec<bool> = r
                .links
                .iter()
                .map(|l| (1000.0 + shift..=4000.0 + shift).contains(&sc.vehicles[l.rx].position_m))
                .collect();
            kept.links = r.links.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect();
            kept.totals = r.totals.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect();
            tally.add(sc, &kept);
        }
        tally.percentage().unwrap()
    };
    let (sar_short, sar_long) = (sar_over(&short, 0.0), sar_over(&long, 1250.0));
    assert!(
        ((sar_short - sar_long) / sar_short).abs() < 0.02,
        "{sar_short} vs {sar_long}"
    );
}

#[test]
fn pooled_profile_combines_scenarios() {
    use txctl_core::sim::evaluate_with_samples;
    let m = models();
    let opts = EvalOptions {
        windows: 5,
        ..EvalOptions::default()
    };
    let a = converged(10.0, 2000.0, 1, 21, &presto(), m);
    let b = converged(10.0, 2000.0, 1, 22, &presto(), m);
    let (ra, mut pooled) = evaluate_with_samples(&a, m, &opts).unwrap();
    let (rb, db) = evaluate_with_samples(&b, m, &opts).unwrap();
    pooled.merge(db);
    let bins = pooled.finish();
    for bin in &bins {
        let count = |r: &txctl_core::sim::MetricsReport| {
            r.dp_profile
                .iter()
                .find(|x| x.bin_start_m == bin.bin_start_m)
                .map_or(0, |x| x.samples)
        };
        assert_eq!(bin.samples, count(&ra) + count(&rb));
    }
    assert!(!bins.is_empty());
}
