use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use remle_core::{
    builtin_model, compute_suff_stats, fit_mle, simulate_ensemble, Design, FitOptions, ParamSpace,
    SuffStats, Theta,
};

const SIM: &str = "\
# simulated ensemble
model = linear-drift
mu0 = 1.0
omega2_0 = 0.5
mu_lo = -5
mu_hi = 5
omega2_lo = 0
omega2_hi = 5
design = iid
x0 = 1
t_end = 1
dt = 0.01
n = 30
";

const CONSISTENCY: &str = "\
model = unit
mu0 = 1
omega2_0 = 0.5
mu_lo = -5
mu_hi = 5
omega2_lo = 0
omega2_hi = 5
design = iid
x0 = 0
t_end = 1
dt = 0.05
n_schedule = 20,40
replicates = 30
info_replicates = 200
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sde-remle"));
    c.env_remove("SDE_REMLE_SEED");
    c
}

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    bin()
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fit_of_dumped_paths_matches_in_process_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["simulate", "--seed", "4", "--out", "sim"],
        SIM,
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let with_input = format!("{SIM}input = sim/paths.csv\n");
    let o = run(dir.path(), &["fit", "--out", "fit"], &with_input);
    assert!(o.status.success(), "{}", stderr(&o));

    let model = builtin_model("linear-drift").unwrap();
    let design = Design::iid(30, 1.0, 1.0, 0.01, 4).unwrap();
    let paths = simulate_ensemble(&model, Theta::new(1.0, 0.5).unwrap(), &design, 0).unwrap();
    let stats: Vec<SuffStats> = paths
        .iter()
        .map(|p| compute_suff_stats(p, &model).unwrap())
        .collect();
    let space = ParamSpace::new(-5.0, 5.0, 0.0, 5.0).unwrap();
    let fit = fit_mle(&stats, &space, &FitOptions::default()).unwrap();

    let text = fs::read_to_string(dir.path().join("fit/fit.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0].parse::<usize>().unwrap(), 30);
    assert_eq!(row[1].parse::<f64>().unwrap(), fit.theta_hat.mu);
    assert_eq!(row[2].parse::<f64>().unwrap(), fit.theta_hat.omega2);
    assert_eq!(row[3].parse::<f64>().unwrap(), fit.loglik);
    assert_eq!(
        fs::read(dir.path().join("sim/stats.csv")).unwrap(),
        fs::read(dir.path().join("fit/stats.csv")).unwrap()
    );
}

#[test]
fn experiment_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (out, threads) in [("a", "1"), ("b", "4")] {
        let o = run(
            dir.path(),
            &[
                "experiment",
                "consistency",
                "--seed",
                "3",
                "--out",
                out,
                "--threads",
                threads,
            ],
            CONSISTENCY,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("experiment consistency"));
    }
    for file in ["replicates.csv", "summary.csv", "config.txt"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let summary = fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "n,med_err,p90_err,ks_mu,ks_omega2,cov_mu,cov_omega2"
    );
    assert_eq!(summary.lines().count(), 3);
    let echo = fs::read_to_string(dir.path().join("a/config.txt")).unwrap();
    assert!(echo.contains("seed = 3\n"));
}

#[test]
fn decreasing_timestamp_is_rejected_with_subject_and_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("paths.csv"),
        "subject,k,t,x\n0,0,0,1\n0,1,0.5,1.1\n0,2,1,1.3\n4,0,0,2\n4,1,0.5,2.2\n4,2,0.4,2.1\n",
    )
    .unwrap();
    let o = run(
        dir.path(),
        &["fit", "--out", "o"],
        &format!("{SIM}input = paths.csv\n"),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(
        err.contains("subject 4") && err.contains("row 2") && err.contains("line 7"),
        "{err}"
    );
}

#[test]
fn config_errors_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["simulate", "--out", "o"],
        "model = unit\nbogus = 1\n",
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2: unknown key `bogus`"));

    let o = run(
        dir.path(),
        &["simulate", "--out", "o"],
        "model = unit\nmu0 = 1\n",
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("missing key `omega2_0`"),
        "{}",
        stderr(&o)
    );

    let o = run(dir.path(), &["simulate"], SIM);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing key `output_dir`"));

    let o = run(dir.path(), &["experiment", "sideways"], SIM);
    assert_eq!(o.status.code(), Some(1));

    let boundary = CONSISTENCY.replace("omega2_0 = 0.5", "omega2_0 = 0");
    let o = run(
        dir.path(),
        &["experiment", "consistency", "--out", "o"],
        &boundary,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("interior"));
}

#[test]
fn divergence_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SIM.replace("mu0 = 1.0", "mu0 = 1e200");
    let o = run(dir.path(), &["simulate", "--out", "o"], &cfg);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn seed_comes_from_flag_then_config_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let stats = |out: &str| fs::read(dir.path().join(out).join("stats.csv")).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, SIM).unwrap();
    let go = |args: &[&str], env: Option<&str>| {
        let mut c = bin();
        c.args(args)
            .arg("--config")
            .arg(&cfg)
            .current_dir(dir.path());
        if let Some(v) = env {
            c.env("SDE_REMLE_SEED", v);
        }
        assert!(c.output().unwrap().status.success());
    };
    go(&["simulate", "--out", "env9"], Some("9"));
    go(&["simulate", "--out", "flag9", "--seed", "9"], Some("2"));
    go(&["simulate", "--out", "default"], None);
    go(&["simulate", "--out", "zero", "--seed", "0"], None);
    assert_eq!(stats("env9"), stats("flag9"));
    assert_eq!(stats("default"), stats("zero"));
    assert_ne!(stats("env9"), stats("zero"));

    fs::write(&cfg, format!("{SIM}seed = 9\n")).unwrap();
    go(&["simulate", "--out", "cfg9"], Some("2"));
    assert_eq!(stats("cfg9"), stats("flag9"));

    let mut c = bin();
    c.args(["simulate", "--out", "bad"])
        .arg("--config")
        .arg(&cfg);
    fs::write(&cfg, SIM).unwrap();
    let o = c
        .env("SDE_REMLE_SEED", "not-a-number")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn noniid_and_continuity_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let noniid = "model = unit\nmu0 = 1\nomega2_0 = 0.5\nmu1 = 0.5\nomega2_1 = 1\nmu_lo = -5\n\
                  mu_hi = 5\nomega2_lo = 0\nomega2_hi = 5\nx_inf = 0\na = 1\nt_inf = 1\nb = 1\n\
                  dt = 0.05\nn_schedule = 8\nreplicates = 20\ninfo_replicates = 100\n";
    let o = run(dir.path(), &["experiment", "noniid", "--out", "n"], noniid);
    assert!(o.status.success(), "{}", stderr(&o));
    let limits = fs::read_to_string(dir.path().join("n/limits.csv")).unwrap();
    // rows for n = 1, 2, 4, 8 and the limit point
    assert_eq!(limits.lines().count(), 6);
    assert!(limits.lines().last().unwrap().starts_with("inf,"));

    let wrong = format!("{noniid}design = iid\n");
    let o = run(dir.path(), &["experiment", "noniid", "--out", "n"], &wrong);
    assert_eq!(o.status.code(), Some(1));

    let continuity = "model = unit\nmu0 = 1\nomega2_0 = 0.5\nx_inf = 0\na = 1\nt_inf = 1\nb = 1\n\
                      psi = 1\nxi = 1\npowers = 1,2\nm_schedule = 1,2\nreplicates = 200\ndt = 0.05\n";
    let o = run(
        dir.path(),
        &["experiment", "continuity", "--out", "c"],
        continuity,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("c/continuity.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "m,k,x,t,estimate,mc_se,gap,gap_se"
    );
    assert_eq!(table.lines().count(), 1 + 2 * 3);
}
