use std::path::Path;
use std::process::Command;

use simctl::bench::benchmark;
use simctl::oracle::{coarse_grid, run_oracle};
use simctl::plots::{emit_plot_data, CBR_VS_DENSITY, DP_VS_DISTANCE, METRICS, SAR_VS_DENSITY};
use simctl::runner::{build_models, cell_seeds, run_matrix, THREADS_ENV};
use simctl::{ControllerKind, ExperimentConfig};
use txctl_core::{ControllerGrid, MerlinOptions, Models};

fn models() -> &'static Models {
    use std::sync::OnceLock;
    static M: OnceLock<Models> = OnceLock::new();
    M.get_or_init(Models::default)
}

fn small_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(
        "[experiment]\ndensities = [10, 20, 30]\nn_a = [1, 2, 3, 4, 5]\nroad_length_m = 1000\nlanes = 2\n[metrics]\nwindows = 2",
    )
    .unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let i = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn full_matrix_has_one_row_per_cell_and_is_byte_stable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_config(a.path());
    let first = run_matrix(&cfg, models()).unwrap();
    assert_eq!(first.cells.len(), 45);
    assert_eq!(first.dp.len(), 45);
    let files = emit_plot_data(a.path(), &first, &models().table).unwrap();

    // A different pool size must not change a byte.
    std::env::set_var(THREADS_ENV, "2");
    let second = run_matrix(&cfg, models());
    std::env::remove_var(THREADS_ENV);
    emit_plot_data(b.path(), &second.unwrap(), &models().table).unwrap();
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(read(f), read(&b.path().join(name)), "{name:?}");
    }

    let metrics = read(&a.path().join(METRICS));
    assert_eq!(metrics.lines().count(), 46);
    assert!(column(&read(&a.path().join(SAR_VS_DENSITY)), "sar")
        .iter()
        .all(|s| (0.0..=100.0).contains(s)));
    assert!(column(&read(&a.path().join(CBR_VS_DENSITY)), "mean_cbr")
        .iter()
        .all(|c| (0.0..=1.0).contains(c)));
    let dp = read(&a.path().join(DP_VS_DISTANCE));
    assert_eq!(dp.lines().next().unwrap(), "controller,density,n_a,bin_m,mean,p5,p95");
    // Rows follow the configured order: controller, density, N_A, seed.
    let keys: Vec<String> = metrics
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(3).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(keys[0], "mh,10,1");
    assert_eq!(keys[5], "mh,20,1");
    assert_eq!(keys[44], "merlin,30,5");
}

#[test]
fn controllers_share_placement_and_requirements() {
    let (p1, a1, s1) = cell_seeds(3, 20.0, 2);
    let (p2, a2, _) = cell_seeds(3, 20.0, 4);
    assert_eq!(p1, p2);
    assert_ne!(a1, a2);
    assert_ne!(cell_seeds(4, 20.0, 2).0, p1);
    assert_ne!(s1, a1);
}

#[test]
fn mh_only_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.controllers = vec![ControllerKind::Mh];
    cfg.n_a_values = vec![1, 3];
    cfg.seeds = vec![1, 2];
    let result = run_matrix(&cfg, models()).unwrap();
    assert_eq!(result.cells.len(), 3 * 2 * 2);
    assert!(result.cells.iter().all(|c| c.controller == ControllerKind::Mh));
    assert!(result.problems().is_empty());
    for c in &result.cells {
        let cfg_power = c.report.power_pdf.weights.iter().rposition(|w| *w > 0.0).unwrap();
        assert_eq!(cfg_power, c.report.power_pdf.weights.len() - 1);
    }
}

#[test]
fn bench_reports_percentiles_and_ratio() {
    let grid = ControllerGrid::table1();
    assert!(benchmark(models(), &grid, &MerlinOptions::default(), &[1], 29, 1).is_err());
    let report = benchmark(models(), &grid, &MerlinOptions::default(), &[1, 2], 30, 1).unwrap();
    assert_eq!(report.rows.len(), 6);
    for r in &report.rows {
        assert_eq!(r.reps, 30);
        assert!(r.percentiles.windows(2).all(|w| w[0] <= w[1]));
    }
    assert!(report.ratio(2).unwrap() > 1.0);
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("controller,n_a,reps,errors,p5_s,"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn oracle_suite_passes() {
    for n_a in 1..=2 {
        let cases = run_oracle(models(), &coarse_grid(), &MerlinOptions::default(), n_a, 6, 2).unwrap();
        assert!(cases.iter().all(|c| c.passed()), "{cases:?}");
    }
}

fn simctl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simctl")).args(args).output().unwrap()
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_owned()
    };
    let base = "experiment.densities = [10]\nexperiment.n_a = [1]\nexperiment.road_length_m = 1000\nexperiment.lanes = 1\nmetrics.windows = 2\n";

    let unknown = write("unknown.toml", &format!("{base}phy.bogus = 1\nother.key = 2\n"));
    let out = simctl(&["run", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("phy.bogus") && err.contains("other.key"), "{err}");

    let ok = write(
        "ok.toml",
        &format!("{base}experiment.controllers = [\"mh\", \"presto\"]\nexperiment.output_dir = \"ok\"\n"),
    );
    let out = simctl(&["run", "--config", &ok]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("ok").join(METRICS).exists());

    // A 2 Hz rate cap leaves most applications unreachable.
    let capped = write(
        "capped.toml",
        &format!("{base}experiment.controllers = [\"presto\"]\ngrid.t_max = 2\nexperiment.output_dir = \"capped\"\n"),
    );
    assert_eq!(simctl(&["run", "--config", &capped]).status.code(), Some(2));
    assert_eq!(
        simctl(&["run", "--config", &capped, "--allow-partial"]).status.code(),
        Some(0)
    );
    assert!(dir.path().join("capped").join(METRICS).exists());
}

#[test]
fn table_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let p = path.to_str().unwrap();
    assert!(simctl(&["table", "export", p]).status.success());
    let out = simctl(&["table", "import", p]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("101 distances"));
    let loaded = simctl::table_io::load_table(&path).unwrap();
    assert_eq!(loaded, models().table);

    let cfg_path = dir.path().join("c.toml");
    std::fs::write(&cfg_path, format!("table.file = \"{p}\"\n")).unwrap();
    let cfg = ExperimentConfig::from_file(&cfg_path).unwrap();
    assert_eq!(build_models(&cfg).unwrap().table, models().table);

    let text = read(&path).replacen("\n0,0,0.1,", "\n0,0,0.1,7", 1);
    std::fs::write(&path, text).unwrap();
    let out = simctl(&["table", "import", p]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn bench_and_oracle_subcommands() {
    assert!(!simctl(&["bench", "--na", "1", "--reps", "5"]).status.success());
    assert!(!simctl(&["bench", "--na", "0..7", "--reps", "30"]).status.success());
    let out = simctl(&["oracle", "--na", "1", "--grid", "coarse", "--cases", "3"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 of 3 cases passed"));
}
