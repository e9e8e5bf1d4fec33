use std::path::Path;
use std::process::{Command, Output};

use atlas_lab::io::{self, read_profile_csv, read_trajectory_csv};
use atlas_lab::report::{read_json, Verdict};

fn atlas(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlas"))
        .args(args)
        .current_dir(dir)
        .env_remove("ATLAS_OUT_DIR")
        .output()
        .expect("spawn atlas")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files_with(dir: &Path, ext: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

#[test]
fn stefan_prints_constants_and_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(
        &[
            "stefan",
            "--lambda",
            "2",
            "--profile",
            "u.csv",
            "--width",
            "1",
            "--bin-width",
            "0.25",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("kappa = 0.000000000000000"), "{text}");
    let (meta, p) = read_profile_csv(std::fs::File::open(tmp.path().join("u.csv")).unwrap()).unwrap();
    assert_eq!(meta.t, 1.0);
    assert_eq!(p.bin_count(), 4);
    assert!(p.bin_density.iter().all(|&d| (d - 2.0).abs() < 1e-12));
}

#[test]
fn fd_solve_tracks_the_front() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(
        &[
            "fd-solve",
            "--lambda",
            "1",
            "--t",
            "0.25",
            "--dxi",
            "0.05",
            "--profile",
            "fd.csv",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (meta, p) = read_profile_csv(std::fs::File::open(tmp.path().join("fd.csv")).unwrap()).unwrap();
    assert_eq!(meta.t, 0.25);
    assert!(p.bin_density[0] > 1.9 && p.bin_density[0] < 2.1);
}

#[test]
fn simulate_writes_trajectory_dump_and_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--n",
        "300",
        "--times",
        "0.5,1",
        "--ranks",
        "2,5",
        "--save-initial",
        "init.json",
    ];
    let o = atlas(&[&args[..], &["-o", "run"]].concat(), tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    let traj = files_with(&run, "csv")
        .into_iter()
        .find(|p| p.to_string_lossy().contains("trajectory"))
        .unwrap();
    let (meta, cols) = read_trajectory_csv(std::fs::File::open(&traj).unwrap()).unwrap();
    assert_eq!(meta.get("n"), Some("300"));
    assert_eq!(cols["requested_t"], vec![0.5, 1.0]);
    assert!(cols["t"].iter().zip([0.5, 1.0]).all(|(t, r)| (t - r).abs() < 1e-9));
    assert!(cols["Y1"].iter().zip(&cols["Y2"]).all(|(a, b)| a <= b));
    assert!(cols.contains_key("Y5"));

    let dump = files_with(&run, "bin").pop().unwrap();
    let state = io::load_state_dump(&dump).unwrap();
    assert_eq!(state.len(), 300);
    assert!((state.sim_time() - 1.0).abs() < 1e-9);
    assert_eq!(state.leftmost(), *cols["Y1"].last().unwrap());

    // rerunning from the saved start reproduces the run
    let o = atlas(
        &[
            "simulate",
            "--initial",
            "init.json",
            "--times",
            "0.5,1",
            "--ranks",
            "2,5",
            "-o",
            "again",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let again = io::load_state_dump(&files_with(&tmp.path().join("again"), "bin").pop().unwrap()).unwrap();
    assert_eq!(again.positions(), state.positions());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_atlas"))
        .args(["simulate", "--n", "50", "--times", "0.1"])
        .current_dir(tmp.path())
        .env("ATLAS_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(files_with(&tmp.path().join("from-env"), "bin").len(), 1);
}

#[test]
fn verify_writes_all_formats_and_report_converts() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("small.toml"),
        "experiment = \"leftmost-scaling\"\nlambda = 2.0\nn = 400\ndt = 0.01\nb = 0.1\nreplicas = 3\nseed = 7\n",
    )
    .unwrap();
    let o = atlas(
        &[
            "verify",
            "leftmost-scaling",
            "--config",
            "small.toml",
            "--tolerance",
            "10",
            "-o",
            "rep",
        ],
        tmp.path(),
    );
    assert!(
        o.status.success(),
        "{}\n{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let rep = tmp.path().join("rep");
    for ext in ["csv", "json", "md"] {
        assert_eq!(files_with(&rep, ext).len(), 1, "{ext}");
    }
    let json = files_with(&rep, "json").pop().unwrap();
    let report = read_json(std::fs::File::open(&json).unwrap()).unwrap();
    assert_eq!(report.config.seed, 7);
    assert_eq!(report.config.analysis.tolerance, Some(10.0));
    assert!(report.records.iter().all(|r| r.seeds == vec![7, 8, 9]));
    assert_eq!(report.records[0].verdict, Verdict::Pass);

    let o = atlas(&["report", json.to_str().unwrap(), "--format", "md"], tmp.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains(&report.config_hash));
}

#[test]
fn verify_rejects_a_config_for_another_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.toml"),
        "experiment = \"domination\"\nlambda = 1.0\nn = 100\ndt = 0.01\nb = 1.0\nreplicas = 1\nseed = 1\n",
    )
    .unwrap();
    let o = atlas(&["verify", "quantile-law", "--config", "c.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalidated_runs_exit_distinctly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(
        &[
            "verify",
            "leftmost-scaling",
            "--n",
            "10",
            "--b",
            "0.1",
            "--replicas",
            "2",
            "-o",
            "x",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("invalid"));
}

#[test]
fn print_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let o = atlas(&["verify", "domination", "--lambda", "4", "--print-config"], tmp.path());
    assert!(o.status.success());
    let cfg = atlas_lab::ExperimentConfig::from_toml_str(&stdout(&o)).unwrap();
    assert_eq!(cfg.lambda, 4.0);
    assert_eq!(cfg.experiment, atlas_lab::ExperimentTag::Domination);
}
