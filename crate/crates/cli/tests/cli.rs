use std::path::Path;
use std::process::{Command, Output};

fn ulab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ulab"));
    cmd.args(args).env_remove("ULAB_CACHE");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, out: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    let text = format!(
        "[experiment]\nkind = \"gowers-avg\"\nseed = 7\noutput = {:?}\n\n[params]\nx = [10000, 20000]\nh = \"X^0.4\"\nk = [1, 2]\nsamples = 20\n",
        out.display().to_string()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sieve_prints_values() {
    let out = stdout(&ulab(&["sieve", "--kind", "liouville", "--start", "1", "--end", "100", "--print"], &[]));
    let vals: Vec<i32> = out.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 100);
    assert_eq!(&vals[..6], &[1, -1, -1, 1, -1, 1]);
}

#[test]
fn run_skips_existing_output_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let cfg = write_config(dir.path(), &out);
    let cfg = cfg.to_str().unwrap();
    stdout(&ulab(&["run", cfg], &[]));
    let first = std::fs::read(&out).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 5);

    std::fs::write(&out, "sentinel").unwrap();
    stdout(&ulab(&["run", cfg], &[]));
    assert_eq!(std::fs::read(&out).unwrap(), b"sentinel");

    stdout(&ulab(&["run", cfg, "--force"], &[]));
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn csv_independent_of_thread_count() {
    let args = [
        "weak-gowers", "--X", "10000", "--H", "24", "--k", "2", "--sigma", "0.1", "--samples", "6", "--seed", "3",
    ];
    let one = stdout(&ulab(&args, &[("RAYON_NUM_THREADS", "1")]));
    let four = stdout(&ulab(&args, &[("RAYON_NUM_THREADS", "4")]));
    assert_eq!(one, four);
    let args = ["gowers-avg", "--X", "10^4", "--H", "X^0.5", "--k", "1,2", "--samples", "30", "--seed", "1"];
    let one = stdout(&ulab(&args, &[("RAYON_NUM_THREADS", "1")]));
    let four = stdout(&ulab(&args, &[("RAYON_NUM_THREADS", "4")]));
    assert_eq!(one, four);
}

#[test]
fn config_errors_report_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[experiment]\nkind = \"chowla\"\nseed = 1\noutput = \"x.csv\"\nbogus = 3\n").unwrap();
    let o = ulab(&["run", path.to_str().unwrap()], &[]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn cache_env_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let c = cache.to_str().unwrap();
    let args = ["chowla", "--X", "5000", "--shifts", "0,1", "--eps", "0.3"];
    let a = stdout(&ulab(&args, &[("ULAB_CACHE", c)]));
    let files: Vec<_> = std::fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    let b = stdout(&ulab(&args, &[("ULAB_CACHE", c)]));
    assert_eq!(a, b);

    let mut bytes = std::fs::read(&files[0]).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(&files[0], bytes).unwrap();
    let o = ulab(&args, &[("ULAB_CACHE", c)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cache"));
}

#[test]
fn suite_exit_code() {
    let o = ulab(&["suite", "algebra-verify"], &[]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).lines().all(|l| l.starts_with("PASS")));
    assert!(!ulab(&["suite", "unknown"], &[]).status.success());
}

#[test]
fn patterns_json_lines() {
    let out = stdout(&ulab(&["patterns", "--k", "3", "--N", "1000", "--json"], &[]));
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 8);
    assert!(lines.iter().all(|v| v["k"] == 3));
}
