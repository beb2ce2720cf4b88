use std::path::Path;
use std::process::{Command, Output};

fn mmrope(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmrope"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn rows(dir: &Path, file: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(dir.join(file)).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn alloc_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(
        mmrope(p, &["alloc", "--strategy", "hope", "--out", "h.csv"])
            .status
            .success()
    );
    let hope = rows(p, "h.csv");
    assert_eq!(hope.len(), 64);
    assert_eq!(hope.iter().filter(|r| r[2] == "0e0").count(), 16);

    assert!(mmrope(
        p,
        &[
            "alloc",
            "--strategy",
            "vanilla",
            "--d",
            "4",
            "--out",
            "v.csv"
        ]
    )
    .status
    .success());
    let thetas: Vec<f64> = rows(p, "v.csv")
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(thetas, [1.0, 0.01]);
}

#[test]
fn validation_errors_leave_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = mmrope(
        p,
        &[
            "alloc",
            "--strategy",
            "hope",
            "--d",
            "6",
            "--out",
            "bad.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = mmrope(
        p,
        &[
            "niah",
            "--lengths",
            "64,1",
            "--trials",
            "2",
            "--out",
            "n.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(p).unwrap().count(), 0);
}

#[test]
fn hope_margin_is_flat_in_time() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = [
        "margin",
        "--strategy",
        "hope",
        "--dt-max",
        "100000",
        "--dt-step",
        "250",
        "--out",
        "m.csv",
    ];
    assert!(mmrope(p, &args).status.success());
    let r = rows(p, "m.csv");
    assert_eq!(r.len(), 401);
    assert!(r
        .iter()
        .all(|row| row[3].parse::<f64>().unwrap() == 128.0 && row[4].is_empty()));
    assert!(r
        .iter()
        .all(|row| row[5] == "hope" && row[6] == "closed_form"));

    let first = std::fs::read(p.join("m.csv")).unwrap();
    assert!(mmrope(p, &args).status.success());
    assert_eq!(first, std::fs::read(p.join("m.csv")).unwrap());
}

#[test]
fn monte_carlo_margin_has_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = [
        "margin",
        "--strategy",
        "videorope",
        "--trials",
        "20000",
        "--dts",
        "0,5000,40000",
        "--dxs",
        "0,9",
        "--out",
        "mc.csv",
    ];
    assert!(mmrope(p, &args).status.success());
    let mc = rows(p, "mc.csv");
    let cf_args = [
        "margin",
        "--strategy",
        "videorope",
        "--dts",
        "0,5000,40000",
        "--dxs",
        "0,9",
        "--out",
        "cf.csv",
    ];
    assert!(mmrope(p, &cf_args).status.success());
    for (m, c) in mc.iter().zip(rows(p, "cf.csv")) {
        let se: f64 = m[4].parse().unwrap();
        let gap = m[3].parse::<f64>().unwrap() - c[3].parse::<f64>().unwrap();
        assert!(gap.abs() <= 4.5 * se, "{m:?} vs {c:?}");
    }
}

#[test]
fn critical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = mmrope(p, &["critical", "--strategy", "hope", "--out", "h.csv"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("no violation up to L_max"));
    assert!(rows(p, "h.csv")
        .iter()
        .all(|r| r[4].is_empty() && r[2].is_empty()));

    let half_pi = std::f64::consts::FRAC_PI_2.to_string();
    assert!(
        mmrope(p, &["critical", "--theta-min", &half_pi, "--out", "t.csv"])
            .status
            .success()
    );
    assert_eq!(rows(p, "t.csv")[0][2].parse::<f64>().unwrap(), 2.0);

    assert!(
        mmrope(p, &["critical", "--strategy", "vanilla", "--out", "v.csv"])
            .status
            .success()
    );
    let lc: f64 = rows(p, "v.csv")[0][2].parse().unwrap();
    assert!((lc - 13603.535782694187).abs() < 1e-6);
}

#[test]
fn index_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(mmrope(
        p,
        &[
            "indices",
            "--pre-text",
            "2",
            "--frames",
            "3",
            "--gamma",
            "2",
            "--post-text",
            "2",
            "--out",
            "i.csv"
        ]
    )
    .status
    .success());
    let t: Vec<f64> = rows(p, "i.csv")
        .iter()
        .map(|r| r[5].parse().unwrap())
        .collect();
    assert_eq!(t, [0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 9.0]);

    assert!(mmrope(p, &["indices", "--frames", "5", "--out", "g.csv"])
        .status
        .success());
    let t: Vec<f64> = rows(p, "g.csv")
        .iter()
        .map(|r| r[5].parse().unwrap())
        .collect();
    assert!(t.iter().enumerate().all(|(i, &v)| v == i as f64));

    assert!(mmrope(
        p,
        &["indices", "--frames", "2", "--height", "2", "--width", "2", "--out", "s.csv"]
    )
    .status
    .success());
    let video: Vec<Vec<String>> = rows(p, "s.csv")
        .into_iter()
        .filter(|r| r[1] == "video")
        .collect();
    assert_eq!(video.len(), 8);
    for frame in video.chunks(4) {
        assert!(frame
            .iter()
            .all(|r| r[2] == frame[0][2] && r[5] == frame[0][5]));
    }
}

#[test]
fn niah_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(mmrope(
        p,
        &["niah", "--trials", "1", "--d", "16", "--out", "all.csv"]
    )
    .status
    .success());
    assert_eq!(rows(p, "all.csv").len(), 72);

    let args = [
        "niah",
        "--strategies",
        "hope",
        "--lengths",
        "32",
        "--trials",
        "30",
        "--d",
        "32",
        "--out",
        "h.csv",
    ];
    assert!(mmrope(p, &args).status.success());
    let hope = rows(p, "h.csv");
    assert_eq!(hope.len(), 6);
    assert!(hope.iter().all(|r| r[0] == "hope"));
    let first = std::fs::read(p.join("h.csv")).unwrap();
    assert!(mmrope(p, &args).status.success());
    assert_eq!(first, std::fs::read(p.join("h.csv")).unwrap());
}

#[test]
fn distortion_and_pneg_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(mmrope(
        p,
        &[
            "distortion",
            "--h-max",
            "4",
            "--w-max",
            "5",
            "--out",
            "d.csv"
        ]
    )
    .status
    .success());
    for r in rows(p, "d.csv") {
        let (h, w): (u64, u64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert_eq!(
            (r[2].parse::<u64>().unwrap(), r[3].parse::<u64>().unwrap()),
            (w, h * w)
        );
    }
    assert!(mmrope(
        p,
        &["pneg", "--length", "100", "--points", "20", "--out", "p.csv"]
    )
    .status
    .success());
    let curve = rows(p, "p.csv");
    assert_eq!(curve.len(), 20);
    assert_eq!(curve[0][2], "0e0");
}

#[test]
fn manifest_records_resolved_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(mmrope(
        p,
        &["scores", "--frames", "2", "--seed", "99", "--out", "s.csv"]
    )
    .status
    .success());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("s.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["command"], "scores");
    assert_eq!(m["seed"], 99);
    assert_eq!(m["parameters"]["scores"]["layout"]["frames"], 2);
    assert_eq!(m["outputs"][0], "s.csv");
    assert_eq!(rows(p, "s.csv").len(), 6 * 6);
}
