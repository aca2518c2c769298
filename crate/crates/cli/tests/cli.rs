use std::fs;
use std::process::Command;

fn inttv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inttv"))
}

#[test]
fn tvtable_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = inttv().args(["tvtable", "--levels", "1:4,2:3", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(2).unwrap().starts_with("2,6,"));
    assert!(dir.path().join("table.gp").exists());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("table.json")).unwrap()).unwrap();
    assert_eq!(json[0]["tau_inv"], 4);
}

#[test]
fn denoise_sweeps_over_c() {
    let dir = tempfile::tempdir().unwrap();
    let out = inttv()
        .args(["denoise", "--h-inv", "2", "--ratio", "2", "--c", "1.41421356,4.24264069", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("c,Term.,It.,Obj. val.,TV,TVh,V,Gap,Time"));
    assert_eq!(stdout.lines().count(), 3);
    let summary = fs::read_to_string(dir.path().join("tv_vs_c.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",true")));

    // the recorded configuration replays to the same result
    let replay = tempfile::tempdir().unwrap();
    let out2 = inttv()
        .args(["denoise", "--config"])
        .arg(dir.path().join("run-config.json"))
        .arg("--out")
        .arg(replay.path())
        .output()
        .unwrap();
    assert!(out2.status.success());
    let first = fs::read(dir.path().join("run00_c1.4142/result.pgm")).unwrap();
    let second = fs::read(replay.path().join("run00_c1.4142/result.pgm")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn denoise_reads_pgm_input() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.pgm");
    let rows: Vec<String> = (0..4).map(|r| if r < 2 { "0 0 255 255" } else { "0 0 0 255" }.to_string()).collect();
    fs::write(&img, format!("P2\n4 4\n255\n{}\n", rows.join("\n"))).unwrap();
    let out = inttv()
        .args(["denoise", "--labels", "0,1", "--h-inv", "2", "--ratio", "2", "--sigma", "0", "--image"])
        .arg(&img)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/run00_c1.4142/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["noise"]["clamped_cells"], 0);
    assert_eq!(manifest["result"]["feasible_tv_le_cv"], true);
}

#[test]
fn oracle_reports_agreement() {
    let out = inttv().args(["oracle", "--grid", "2x2", "--labels", "0,1,2", "--trials", "20"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("20 trials, 0 mismatches"));
    let oa = inttv().args(["oracle", "--oa", "--trials", "5", "--seed", "9"]).output().unwrap();
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stdout));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = inttv().args(["oracle", "--grid", "3x3", "--ratio", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("blocks"));
    let out = inttv().args(["tvtable", "--levels", "2-9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
