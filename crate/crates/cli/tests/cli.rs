use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cre_rom(args: &[&str]) -> Output {
    cre_rom_env(args, &[])
}

fn cre_rom_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cre-rom"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn cre-rom")
}

fn offline(dir: &Path, threads: &str) {
    let out = cre_rom_env(
        &[
            "offline",
            "--model-dir",
            dir.to_str().unwrap(),
            "--mesh-n",
            "12",
            "--n-samples",
            "12",
        ],
        &[("CRE_ROM_THREADS", threads)],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn archive(tmp: &TempDir, name: &str) -> String {
    let dir = tmp.path().join(name);
    offline(&dir, "2");
    dir.to_str().unwrap().to_owned()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn archives_and_csv_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    offline(&a, "1");
    offline(&b, "3");
    assert_eq!(files(&a), files(&b));

    let sweep = |dir: &Path| {
        stdout(&cre_rom(&[
            "sweep",
            "--model-dir",
            dir.to_str().unwrap(),
            "--steps",
            "6",
            "--n-phi",
            "4",
        ]))
    };
    assert_eq!(sweep(&a), sweep(&b));
}

#[test]
fn tampered_archive_fails_validation() {
    let tmp = TempDir::new().unwrap();
    let dir = archive(&tmp, "m");
    let out = cre_rom(&["validate", "--model-dir", &dir, "--quick"]);
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));

    let target = Path::new(&dir).join("displacement_modes.f64");
    let mut bytes = fs::read(&target).unwrap();
    bytes[8 * 40 + 7] ^= 0x10;
    fs::write(&target, bytes).unwrap();
    let out = cre_rom(&["validate", "--model-dir", &dir, "--quick"]);
    assert_eq!(out.status.code(), Some(4));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL")), "{text}");
}

#[test]
fn evaluate_prints_the_certified_fields() {
    let tmp = TempDir::new().unwrap();
    let dir = archive(&tmp, "m");
    let out = stdout(&cre_rom(&[
        "evaluate",
        "--model-dir",
        &dir,
        "--mu",
        "1.6,0,0,1",
        "--n-phi",
        "5",
        "--truth",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in [
        "mu",
        "nu_up",
        "nu_low",
        "nu_up_rel",
        "nu_low_rel",
        "qoi",
        "n_phi",
        "n_phi_stress",
        "n_phi_enriched",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n_phi"], 5);
    assert_eq!(v["n_phi_stress"], 7);
    assert_eq!(v["n_phi_enriched"], 6);
    let (up, low) = (v["nu_up"].as_f64().unwrap(), v["nu_low"].as_f64().unwrap());
    let err = v["truth"]["err_true"].as_f64().unwrap();
    assert!(low <= err && err <= up);

    let out = stdout(&cre_rom(&[
        "evaluate",
        "--model-dir",
        &dir,
        "--mu",
        "1,0,0,1",
    ]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["nu_low"].as_f64(), Some(0.0));
    assert!(v["truth"].is_null());
}

#[test]
fn invalid_input_exits_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let dir = archive(&tmp, "m");
    let out = cre_rom(&[
        "evaluate",
        "--model-dir",
        &dir,
        "--mu",
        "2,0,0,1",
        "--n-phi",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("[1, 11]"), "{err}");

    for mu in ["2,0,0", "a,b,c,d"] {
        let out = cre_rom(&["evaluate", "--model-dir", &dir, "--mu", mu]);
        assert_eq!(out.status.code(), Some(2), "{mu}");
    }
    let out = cre_rom(&["evaluate", "--model-dir", &dir, "--mu", "0,0,0,1"]);
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("nothing");
    let out = cre_rom(&[
        "evaluate",
        "--model-dir",
        missing.to_str().unwrap(),
        "--mu",
        "2,0,0,1",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = cre_rom_env(
        &[
            "offline",
            "--model-dir",
            tmp.path().join("t").to_str().unwrap(),
        ],
        &[("CRE_ROM_THREADS", "zero")],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_of_domain_points_warn_but_succeed() {
    let tmp = TempDir::new().unwrap();
    let dir = archive(&tmp, "m");
    let out = cre_rom(&["evaluate", "--model-dir", &dir, "--mu", "30,0,0,1"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("outside the training domain"));
}

#[test]
fn sweep_and_homogenize_write_fixed_columns() {
    let tmp = TempDir::new().unwrap();
    let dir = archive(&tmp, "m");
    let out = stdout(&cre_rom(&["sweep", "--model-dir", &dir, "--steps", "3"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "mu1,mu2,mu3,mu4,nu_up,nu_low,nu_up_rel,nu_low_rel,qoi"
    );
    assert_eq!(lines.len(), 4);
    assert!(
        lines[1].starts_with(
            "1.0000000000000001e-1,0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0,"
        ),
        "{}",
        lines[1]
    );

    let csv = tmp.path().join("sweep.csv");
    let out = cre_rom(&[
        "sweep",
        "--model-dir",
        &dir,
        "--steps",
        "2",
        "--truth",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "mu1,mu2,mu3,mu4,nu_up,nu_low,nu_up_rel,nu_low_rel,qoi,err_true,theta_up,theta_low\n"
    ));
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 12));

    let out = stdout(&cre_rom(&[
        "homogenize",
        "--model-dir",
        &dir,
        "--contrasts",
        "1,2.5",
        "--truth",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "contrast,shear,shear_lower,shear_upper,lame,lame_lower,lame_upper,shear_truth,lame_truth"
    );
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(f[2] <= f[7] && f[7] <= f[3], "{line}");
        assert!(f[5] <= f[8] && f[8] <= f[6], "{line}");
    }
}
