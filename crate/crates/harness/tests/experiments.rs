use std::path::Path;
use std::process::Command;

use burgulence::dynamics::{run, SimConfig};
use burgulence::noise::NoiseSpec;
use burgulence::spectral::SpectralField;
use burgulence::Error;
use burgulence_harness::manifest::{list_files, Manifest};
use burgulence_harness::plan::Member;
use burgulence_harness::runner::{run_members, with_workers};
use burgulence_harness::{load_plan, run_experiment, ExperimentPlan};

const SMALL: &str = r#"
kind = "scaling"
seed = 11
nu_grid = [0.2, 0.1, 0.07, 0.05]
n_modes = 32
dt = 5e-4
t_end = 2.0
t_start = 0.5
members = 3
save_every = 20
"#;

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    list_files(dir)
        .unwrap()
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn reruns_are_byte_identical_for_any_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::parse(SMALL, &[]).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    run_experiment(&plan, &a, Some(1)).unwrap();
    run_experiment(&plan, &b, Some(1)).unwrap();
    run_experiment(&plan, &c, Some(3)).unwrap();
    let first = read_all(&a);
    assert!(first.len() > 10);
    assert_eq!(first, read_all(&b));
    assert_eq!(first, read_all(&c));
}

#[test]
fn manifest_lists_every_file_and_echoes_the_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::parse(SMALL, &[]).unwrap();
    let m = run_experiment(&plan, tmp.path(), None).unwrap();
    let on_disk: Vec<String> = read_all(tmp.path()).into_iter().map(|(p, _)| p).collect();
    assert_eq!(m.files, on_disk);
    let reread = Manifest::read(tmp.path()).unwrap();
    assert_eq!(reread.plan, plan);
    assert_eq!(reread.members.len(), 12);
    assert_eq!(reread.files, m.files);
}

#[test]
fn scaling_emits_the_table_and_the_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::parse(SMALL, &["analysis.orders=[1]".into()]).unwrap();
    let m = run_experiment(&plan, tmp.path(), None).unwrap();
    let table = std::fs::read_to_string(tmp.path().join("scaling.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "nu,m,value,se");
    assert_eq!(lines.len(), 5);
    for (line, nu) in lines[1..].iter().zip(["0.2", "0.1", "0.07", "0.05"]) {
        assert!(line.starts_with(&format!("{nu},1,")), "{line}");
    }
    let fits = std::fs::read_to_string(tmp.path().join("scaling_fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 2);
    assert!(m.values["fit.m1.slope"].is_finite());
    assert!(m.criteria.iter().any(|c| c.name == "sobolev_slope_m1"));
}

#[test]
fn validate_runs_the_oracles() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::parse("kind = \"validate\"\nseed = 5", &[]).unwrap();
    let m = run_experiment(&plan, tmp.path(), None).unwrap();
    let names: Vec<&str> = m.criteria.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["heat_oracle", "cole_hopf", "noise_moments", "l1_contraction"]);
    assert!(m.passed, "{:?}", m.criteria);
}

#[test]
fn poisoned_member_leaves_the_others_untouched() {
    let cfg = SimConfig::new(0.1, 32, 5e-4, 0.5);
    let spec = NoiseSpec::default_profile();
    let u0 = SpectralField::zeros(32);
    let schedule: Vec<Member> = (0..6).map(|i| Member { nu: 0.1, stream: i }).collect();
    let clean = run_members(&schedule, 9, |_, rng| run(&u0, &cfg, &spec, rng));
    let poisoned = run_members(&schedule, 9, |m, rng| match m.stream {
        2 => Err(Error::BlowUp { t: 0.25 }),
        4 => panic!("poisoned seed"),
        _ => run(&u0, &cfg, &spec, rng),
    });
    assert!(!clean.degraded());
    assert!(poisoned.degraded());
    assert_eq!(poisoned.failures.len(), 2);
    assert_eq!((poisoned.failures[0].stream, poisoned.failures[0].t), (2, Some(0.25)));
    assert_eq!(poisoned.failures[0].master_seed, 9);
    assert!(poisoned.failures[1].message.contains("poisoned seed"));
    let survivors: Vec<_> = clean.records.iter().filter(|r| r.member_index != 2 && r.member_index != 4).collect();
    assert_eq!(survivors.len(), poisoned.records.len());
    for (a, b) in survivors.iter().zip(&poisoned.records) {
        assert_eq!(*a, b);
    }
}

#[test]
fn unstable_plan_is_degraded_not_aborted() {
    let tmp = tempfile::tempdir().unwrap();
    // dt far above the CFL limit: every member is rejected mid-run
    let plan = ExperimentPlan::parse(
        "kind = \"simulate\"\nnu = 0.01\nn_modes = 64\ndt = 5e-3\nt_end = 5\nt_start = 1\nmembers = 2",
        &[],
    )
    .unwrap();
    let m = run_experiment(&plan, tmp.path(), None).unwrap();
    assert!(m.degraded && !m.passed);
    assert!(m.members.iter().all(|e| !e.ok && e.failed_at.is_some() && e.error.is_some()));
    assert!(tmp.path().join("manifest.toml").exists());
}

#[test]
fn workers_pool_is_honoured() {
    assert_eq!(with_workers(Some(2), rayon::current_num_threads).unwrap(), 2);
    assert!(with_workers(Some(0), || ()).is_err());
}

#[test]
fn plans_load_from_files() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("plan.toml");
    std::fs::write(&path, "kind = \"mixing\"\nnu = 0.05\nseed = 3\n").unwrap();
    let plan = load_plan(&path, &["members=7".into()]).unwrap();
    assert_eq!((plan.members, plan.seed, plan.t_end), (7, 3, 20.0));
    assert!(load_plan(&tmp.path().join("missing.toml"), &[]).is_err());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_burgulence")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let bad = cli(&["simulate", "--override", "nu=1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nu out of (0,1]"));

    let args = [
        "simulate",
        "--seed",
        "4",
        "--workers",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "nu=0.1",
        "--override",
        "n_modes=32",
        "--override",
        "dt=5e-4",
        "--override",
        "t_end=1",
        "--override",
        "t_start=0.5",
        "--override",
        "members=2",
    ];
    let ok = cli(&args);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(Manifest::read(&out).unwrap().plan.seed, 4);
    // the directory is now occupied
    assert_eq!(cli(&args).status.code(), Some(2));
}
