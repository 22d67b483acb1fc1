use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hlmetro"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hlmetro-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SCALING: &str =
    "mode = scaling\nscenario = two-channel\nphi = 0.6, 0.2, -0.3\nN = 100, 1000, 10000\nn = 100\nR = 8\n";

#[test]
fn missing_config_exits_one() {
    let o = bin().arg("/definitely/not/here.conf").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn config_errors_exit_one_with_line_number() {
    let dir = scratch("errors");
    let cases = [
        (
            "unknown.conf",
            "mode = fisher\nscenario = phase-shift\nphi = 0.3\nN = 100\nfoo = 2\n",
            "line 5",
        ),
        (
            "number.conf",
            "mode = fisher\nscenario = phase-shift\nphi = zero\nN = 100\n",
            "line 3",
        ),
        (
            "k.conf",
            "mode = scaling\nscenario = two-channel\nphi = 0, 0, 0\nN = 1e2, 1e3, 1e4\nk = 0\n",
            "k must be nonzero",
        ),
        (
            "missing.conf",
            "mode = fisher\nscenario = phase-shift\nphi = 0.3\n",
            "missing key `N`",
        ),
    ];
    for (name, text, needle) in cases {
        let o = bin().arg(write(&dir, name, text)).output().unwrap();
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
    }
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn duplicate_key_warns_on_stderr() {
    let dir = scratch("dup");
    let cfg = write(
        &dir,
        "dup.conf",
        "mode = fisher\nscenario = phase-shift\nphi = 0.3\nN = 100\nk = 1\nk = 0.25\n",
    );
    let o = bin().arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning") && stderr(&o).contains("duplicate key `k`"));
    assert!(stdout(&o).contains("k,1,1,2.5000000000000000e-1"));
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn fisher_phase_shift_near_eight_n_squared() {
    let dir = scratch("fisher");
    let cfg = write(
        &dir,
        "f.conf",
        "mode = fisher\nscenario = phase-shift\nphi = 0.3\nN = 100\nk = 1/4\n",
    );
    // `1/4` is not a valid literal
    assert_eq!(bin().arg(&cfg).output().unwrap().status.code(), Some(1));
    let cfg = write(
        &dir,
        "f.conf",
        "mode = fisher\nscenario = phase-shift\nphi = 0.3\nN = 100\nk = 0.25\n",
    );
    let o = bin().arg(&cfg).output().unwrap();
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("exact,1,1,"))
        .unwrap()
        .to_string();
    let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert!((value - 80_000.0).abs() <= 8_000.0, "{value}");
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn output_file_seed_override_and_threads() {
    let dir = scratch("seed");
    let cfg = write(&dir, "s.conf", SMALL_SCALING);
    let run = |out: &str, extra: &[&str]| {
        let path = dir.join(out);
        let o = bin().arg(&cfg).arg("--output").arg(&path).args(extra).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
        fs::read(path).unwrap()
    };
    let a = run("a.csv", &[]);
    let b = run("b.csv", &["--threads", "1"]);
    let c = run("c.csv", &["--seed", "9"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("N,variance,crb,ratio,unconverged\n"));
    assert!(text.lines().last().unwrap().starts_with("# slope="));
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn unreliable_points_still_exit_zero() {
    let dir = scratch("unreliable");
    let cfg = write(&dir, "u.conf", &SMALL_SCALING.replace("R = 8", "R = 1"));
    let o = bin().arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("# unreliable"));
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn scenario_two_channel_prints_unit_probability() {
    let dir = scratch("two");
    let cfg = write(
        &dir,
        "t.conf",
        "mode = scenario-two-channel\nphi = pi/3, 0.1, 0.2\ndelta_alpha = 0.9\n",
    );
    let o = bin().arg(&cfg).output().unwrap();
    assert!(stdout(&o).contains("P=1.000000000000"));
    let _ = fs::remove_dir_all(dir);
}
