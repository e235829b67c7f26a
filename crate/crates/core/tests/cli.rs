use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_espsim");

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn espsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(cwd).env_remove("ESPSIM_SEED").output().unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(col).unwrap().to_string()).collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_staggered_pfirst() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "t5.scn", "alpha = 2\nP = 3\n[generator t5]\nkind = theorem5\npolicies = pfirst\nobjectives = H\n");
    let o = espsim(&["run", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    let h: f64 = column(&csv, "H")[0].parse().unwrap();
    let lb: f64 = column(&csv, "lower_bound")[0].parse().unwrap();
    assert!((h - 2.9528).abs() < 1e-3);
    assert!((lb - 2.7080).abs() < 1e-3);
    assert_eq!(column(&csv, "bound_ok"), vec!["true"]);
}

#[test]
fn run_single_job_uceq() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "one.scn", "alpha = 2\nP = 4\npolicies = uceq\n[instance one]\njob = 4@4\n");
    let o = espsim(&["run", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(column(&csv, "G"), vec!["4"]);
    assert_eq!(column(&csv, "ratio"), vec!["1"]);
}

#[test]
fn alpha_one_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "bad.scn", "alpha = 1.0\nP = 2\n[instance a]\njob = 1@1\n");
    let o = espsim(&["run", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha must exceed 1"), "{err}");
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn simulation_error_exits_3() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "pf.scn", "alpha = 2\nP = 2\npolicies = pfirst\n[instance a]\njob = 1@2\n");
    assert_eq!(espsim(&["run", f.to_str().unwrap()], dir.path()).status.code(), Some(3));
}

#[test]
fn output_paths() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "o.scn", "alpha = 2\nP = 2\noutput = from_file.csv\n[instance a]\njob = 1@1\n");
    let o = espsim(&["run", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let in_file = std::fs::read_to_string(dir.path().join("from_file.csv")).unwrap();
    assert!(in_file.starts_with("instance_id,policy,alpha,P,n_jobs,F,E,M,G,H,"));

    let o = espsim(&["run", f.to_str().unwrap(), "-o", "flag.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("flag.csv")).unwrap(), in_file);

    let o = espsim(&["run", f.to_str().unwrap(), "-o", "-"], dir.path());
    assert_eq!(stdout(&o), in_file);
}

#[test]
fn sweep_game_over_p() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "g.scn", "alpha = 2\nP = 2\n[game robust]\n");
    let o = espsim(&["sweep", f.to_str().unwrap(), "--param", "P", "--values", "2,4,8,16,32"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let ratios: Vec<f64> = column(&csv, "ratio").iter().map(|r| r.parse().unwrap()).collect();
    for (r, p) in ratios.iter().zip([2u32, 4, 8, 16, 32]) {
        let hp: f64 = (1..=p).map(|i| 1.0 / f64::from(i)).sum();
        assert!(*r >= 0.5 * hp.sqrt() * (1.0 - 1e-9), "P={p}: {r}");
    }
    assert_eq!(column(&csv, "sweep_value"), vec!["2", "4", "8", "16", "32"]);
    assert_eq!(column(&csv, "growth_exponent"), vec!["0.5"; 5]);
}

#[test]
fn sweep_alpha_uceq_corpus() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "u.scn",
        "alpha = 2\nP = 8\npolicies = uceq\n[generator c]\nkind = uniform-random\nseed = 3\njobs = 8\nphases = 1..3\nparallelism = 1..12\nfully_parallel = 0.2\nrelease_spread = 2\n",
    );
    let o = espsim(&["sweep", f.to_str().unwrap(), "--param", "alpha", "--values", "1.5,2,3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    for (r, a) in column(&csv, "ratio").iter().zip([1.5f64, 2.0, 3.0]) {
        let bound = (2.0 * a * a / (a - 1.0)).max(2f64.powf(a) * a) + 2.0 * a;
        assert!(r.parse::<f64>().unwrap() <= bound);
    }
}

#[test]
fn sweep_usage_errors() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "g.scn", "alpha = 2\nP = 2\n[game robust]\n");
    let f = f.to_str().unwrap();
    assert_eq!(espsim(&["sweep", f, "--param", "P", "--values", ""], dir.path()).status.code(), Some(2));
    assert_eq!(espsim(&["sweep", f, "--param", "beta", "--values", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(espsim(&["sweep", f, "--param", "alpha", "--values", "0.5"], dir.path()).status.code(), Some(2));
    assert_eq!(espsim(&["run", "missing.scn"], dir.path()).status.code(), Some(2));
}

#[test]
fn bounds_and_game_verbs() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "b.scn", "alpha = 2\nP = 4\n[instance one]\njob = 4@4\n");
    let o = espsim(&["bounds", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(column(&stdout(&o), "g1_lower_bound"), vec!["4"]);
    assert_eq!(column(&stdout(&o), "h_lower_bound"), vec![""]);

    let o = espsim(&["game", "--P", "8", "--alpha", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 9);
    let ratios = column(&csv, "adversary_ratio");
    assert!(ratios.iter().all(|r| r == &ratios[0]));
    assert_eq!(espsim(&["game", "--P", "8", "--alpha", "1"], dir.path()).status.code(), Some(2));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "r.scn",
        "alpha = 3\nP = 6\npolicies = nequi, uceq\n[generator r]\nkind = uniform-random\nseed = 42\njobs = 10\nphases = 1..3\nrelease_spread = 4\n",
    );
    let f = f.to_str().unwrap();
    let a = espsim(&["run", f], dir.path());
    let b = espsim(&["run", f], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let env = |seed: &str| {
        Command::new(BIN).args(["run", f]).current_dir(dir.path()).env("ESPSIM_SEED", seed).output().unwrap()
    };
    assert_eq!(env("42").stdout, a.stdout);
    assert_ne!(env("43").stdout, a.stdout);
    assert_eq!(env("x").status.code(), Some(2));
}
