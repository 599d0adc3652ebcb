use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn netforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netforge")).args(args).output().expect("binary runs")
}

fn profiles() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles")
}

fn profile(name: &str) -> String {
    profiles().join(name).to_str().unwrap().to_string()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generic_projections_build_writes_six_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.txt");
    let out = netforge(&["build", &profile("generic_proj_lds.txt"), "-o", path(&mats), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let file = fs::read_to_string(&mats).unwrap();
    let mut lines = file.lines();
    assert_eq!(lines.next(), Some("b=3 s=6 m=10"));
    let blocks: Vec<&str> = file.split("\n\n").collect();
    assert_eq!(blocks.len(), 6);
    for (i, block) in blocks.iter().enumerate() {
        let rows: Vec<&str> = block.lines().filter(|l| !l.starts_with("b=")).collect();
        assert_eq!(rows.len(), 10, "block {i}");
        assert!(rows.iter().all(|r| r.split(' ').count() == 10));
    }
    let summary = text(&out.stdout);
    assert!(summary.contains("seed 1"));
    assert_eq!(summary.lines().filter(|l| l.starts_with("column")).count(), 10);

    let verify = netforge(&["verify", path(&mats), &profile("generic_proj_lds.txt")]);
    assert_eq!(verify.status.code(), Some(0), "{}", text(&verify.stdout));

    let csv = netforge(&["discrepancy", path(&mats), "--pairs", "-n", "243", "--baselines", "0"]);
    assert_eq!(csv.status.code(), Some(0));
    let rows = text(&csv.stdout).lines().filter(|l| !l.starts_with('#') && !l.starts_with("dims")).count();
    assert_eq!(rows, 15);
}

#[test]
fn too_many_pairwise_nets_exit_infeasible() {
    let out = netforge(&["build", &profile("pairwise3dims_b2.txt"), "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("column 2"), "{err}");
    assert!(err.contains("on dims {"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_keyword_exits_with_line_number() {
    let out = netforge(&["build", &profile("broken.txt")]);
    assert_eq!(out.status.code(), Some(3));
    let err = text(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
    assert!(err.contains("nett"), "{err}");
}

#[test]
fn usage_errors() {
    assert_eq!(netforge(&[]).status.code(), Some(4));
    assert_eq!(netforge(&["build"]).status.code(), Some(4));
    assert_eq!(netforge(&["sample", "/no/such/file"]).status.code(), Some(4));
    assert_eq!(netforge(&["build", &profile("pair_b3.txt"), "--seed", "x"]).status.code(), Some(4));
    let help = netforge(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(text(&help.stdout).contains("discrepancy"));
}

#[test]
fn identity_file_samples_van_der_corput() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("id.txt");
    fs::write(&mats, "b=2 s=1 m=2\n1 0\n0 1\n").unwrap();
    let out = netforge(&["sample", path(&mats), "-n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout), "0.000\n0.500\n0.250\n0.750\n");

    let out = netforge(&["sample", path(&mats), "-n", "5"]);
    assert_eq!(out.status.code(), Some(4));

    let out = netforge(&["sample", path(&mats), "--digits"]);
    assert_eq!(text(&out.stdout), "0 0\n1 0\n0 1\n1 1\n");

    let pts = dir.path().join("pts.txt");
    let out = netforge(&["sample", path(&mats), "-o", path(&pts)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&pts).unwrap().lines().count(), 4);
    let csv = netforge(&["discrepancy", path(&pts), "--baselines", "2"]);
    assert_eq!(csv.status.code(), Some(0), "{}", text(&csv.stderr));
    assert!(text(&csv.stdout).lines().any(|l| l.starts_with("0,4,")));
}

#[test]
fn corrupted_matrix_fails_verification_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.txt");
    let out = netforge(&["build", &profile("pair_b3.txt"), "-o", path(&mats)]);
    assert_eq!(out.status.code(), Some(0));
    let ok = netforge(&["verify", path(&mats), &profile("pair_b3.txt")]);
    assert_eq!(ok.status.code(), Some(0));
    let report = text(&ok.stdout);
    assert!(report.contains("PASS"));
    assert_eq!(report.lines().filter(|l| l.trim_start().starts_with("prefix")).count(), 6);

    // zero the first row of the first matrix
    let file = fs::read_to_string(&mats).unwrap();
    let mut lines: Vec<String> = file.lines().map(String::from).collect();
    lines[1] = ["0"; 6].join(" ");
    fs::write(&mats, lines.join("\n") + "\n").unwrap();
    let csv = dir.path().join("r.csv");
    let bad = netforge(&["verify", path(&mats), &profile("pair_b3.txt"), "--csv", path(&csv)]);
    assert_eq!(bad.status.code(), Some(1));
    let report = text(&bad.stdout);
    assert!(report.contains("FAIL"));
    assert!(report.contains("witness k="), "{report}");
    let table = fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("constraint,prefix,kvectors,satisfied,ratio\n"));
}

#[test]
fn mismatched_profile_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.txt");
    fs::write(&mats, "b=2 s=1 m=2\n1 0\n0 1\n").unwrap();
    let out = netforge(&["verify", path(&mats), &profile("pair_b3.txt")]);
    assert_eq!(out.status.code(), Some(3));
    fs::write(&mats, "b=2 s=1 m=2\n1 0\n").unwrap();
    assert_eq!(netforge(&["sample", path(&mats)]).status.code(), Some(3));
}

#[test]
fn emit_lp_writes_one_file_per_column() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("lp");
    let out = netforge(&["build", &profile("pair_b3.txt"), "--emit-lp", path(&lp)]);
    assert_eq!(out.status.code(), Some(0));
    // without -o the matrices go to stdout and the summary to stderr
    assert!(text(&out.stdout).starts_with("b=3 s=2 m=6\n"));
    assert!(text(&out.stderr).contains("column  6"));
    for c in 1..=6 {
        let file = fs::read_to_string(lp.join(format!("column_{c}.lp"))).unwrap();
        assert!(file.contains("Subject To") && file.trim_end().ends_with("End"));
    }
}

#[test]
fn sweep_over_prefixes_and_seeded_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.txt");
    assert_eq!(netforge(&["build", &profile("pair_b3.txt"), "-o", path(&mats), "--seed", "2"]).status.code(), Some(0));
    let run = || text(&netforge(&["discrepancy", path(&mats), "--prefix-sweep", "--baselines", "16", "--seed", "5"]).stdout);
    let a = run();
    assert_eq!(a, run());
    assert!(a.contains("seed 5"));
    let values: Vec<(f64, f64)> = a
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("dims"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(values.len(), 6);
    assert!(values.windows(2).all(|w| w[1].0 < w[0].0), "{a}");
    assert!(values.iter().all(|(v, mean)| v < mean));
}

#[test]
fn every_shipped_profile_builds_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(profiles()).unwrap() {
        let src = entry.unwrap().path();
        let name = src.file_name().unwrap().to_str().unwrap().to_string();
        if name == "broken.txt" || name == "pairwise3dims_b2.txt" || name == "generic_proj_lds.txt" {
            continue;
        }
        // shrink the large profiles to keep the suite quick
        let body = fs::read_to_string(&src).unwrap().replace("m=10", "m=5");
        let prof = dir.path().join(&name);
        fs::write(&prof, body).unwrap();
        let mats = dir.path().join(format!("{name}.m"));
        let out = netforge(&["build", path(&prof), "-o", path(&mats), "--seed", "3", "--budget", "20000"]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", text(&out.stderr));
        let v = netforge(&["verify", path(&mats), path(&prof)]);
        assert_eq!(v.status.code(), Some(0), "{name}: {}", text(&v.stdout));
    }
}
