use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_superlase"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok(args)).expect("json output")
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn steady_reports_lasing_ep() {
    let v = json(&["steady"]);
    assert_eq!(v["command"], "steady");
    assert_eq!(v["result"]["steady"]["lasing"], true);
    assert_eq!(v["result"]["phase"], "ExceptionalPoint");
    let n_a = v["result"]["steady"]["state"]["n_a"].as_f64().unwrap();
    assert!(n_a > 1.0 && n_a < 30.0, "{n_a}");
}

#[test]
fn sweep_is_byte_identical_on_repeat() {
    let args = ["sweep-eta", "--points", "2", "--outputs", "pop,corr,n_a"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn header_carries_overrides_and_version() {
    let out = ok(&["sweep-eta", "--points", "3", "--set", "gamma_phi=0.002", "--outputs", "pop"]);
    assert!(out.starts_with(&format!("# superlase {}", env!("CARGO_PKG_VERSION"))));
    assert!(out.contains("# gamma_phi = 2.00000000000e-3"));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "eta,pop,error");
    assert_eq!(lines.len(), 4);
}

#[test]
fn config_file_and_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "eta = 2.5\natom_count = 5000000\n").unwrap();
    let v = json(&["steady", "--preset", "ptbp", "--config", cfg.to_str().unwrap()]);
    assert_eq!(v["params"]["eta"], 2.5);
    assert_eq!(v["params"]["atom_count"], 5e6);
    assert_eq!(v["params"]["coupling_G"], 3975.0);
}

#[test]
fn bad_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.toml");
    std::fs::write(&cfg, "etta = 2.5\n").unwrap();
    let out = run(&["steady", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("etta"));
}

#[test]
fn unknown_observable_and_axis_fail() {
    let out = run(&["sweep-eta", "--outputs", "nonsense"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
    let out = run(&["map2d", "--x", "bogus:0:1:2", "--y", "eta:1:2:2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn failed_points_stay_in_the_table() {
    let out = ok(&["sweep-G", "--start", "-10", "--stop", "10", "--points", "3", "--outputs", "n_a"]);
    let lines = data_lines(&out);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("-1.00000000000e1,,"), "{}", lines[1]);
    assert!(lines[1].contains("non-negative"));
    assert!(lines[2].ends_with(','));
}

#[test]
fn journal_resume_matches_fresh_run() {
    let dir = tempfile::tempdir().unwrap();
    let j = dir.path().join("j.log");
    let js = j.to_str().unwrap();
    let args = ["sweep-eta", "--points", "7", "--outputs", "pop,corr,linewidth_qrt"];
    let fresh = ok(&args);
    let mut first: Vec<&str> = args.to_vec();
    first.extend(["--journal", js, "--stop-after", "3"]);
    let partial = ok(&first);
    assert!(partial.is_empty());
    assert_eq!(std::fs::read_to_string(&j).unwrap().lines().count(), 3);
    let mut second: Vec<&str> = args.to_vec();
    second.extend(["--journal", js]);
    assert_eq!(ok(&second), fresh);
    assert_eq!(std::fs::read_to_string(&j).unwrap().lines().count(), 7);
}

#[test]
fn map2d_grid_order() {
    let out = ok(&["map2d", "--x", "eta:1:10:2", "--y", "atom_count:1e6:2e6:3", "--outputs", "pop", "--jobs", "2"]);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "eta,atom_count,pop,error");
    let xy: Vec<(String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[1].to_string())
        })
        .collect();
    assert_eq!(xy.len(), 6);
    assert_eq!(xy[0], ("1.00000000000e0".into(), "1.00000000000e6".into()));
    assert_eq!(xy[2], ("1.00000000000e0".into(), "2.00000000000e6".into()));
    assert_eq!(xy[3], ("1.00000000000e1".into(), "1.00000000000e6".into()));
}

#[test]
fn phase_diagram_marks_ep() {
    let out = ok(&["phase-diagram"]);
    let lines = data_lines(&out);
    assert_eq!(lines.len(), 322);
    let ep = lines.iter().find(|l| l.starts_with("3.97500000000e4,")).unwrap();
    assert!(ep.ends_with("ExceptionalPoint"), "{ep}");
}

#[test]
fn qpn_and_allan() {
    let v = json(&["qpn"]);
    let s = v["result"]["sigma"].as_f64().unwrap();
    assert!((s / 1.0e-24 - 1.0).abs() < 0.1);
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("series.txt");
    std::fs::write(&f, "# hz\n1e14\n1e14\n1e14\n").unwrap();
    let v = json(&["allan", f.to_str().unwrap(), "--nu-clock", "1e14"]);
    assert_eq!(v["result"]["sigma"], 0.0);
    assert_eq!(v["result"]["points"], 3);
}

#[test]
fn power_formats() {
    let v = json(&["power", "--n-a", "10", "--set", "nu_sigma=4.3e14"]);
    let w = v["result"]["power_w"].as_f64().unwrap();
    assert!((w / 2.86e-12 - 1.0).abs() < 5e-3);
    assert_eq!(v["result"]["rate"], "kappa_a");
    let csv = ok(&["power", "--n-a", "0", "--format", "csv"]);
    assert!(csv.contains("\npower_w,0.00000000000e0"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("pd.csv");
    let stdout = ok(&["phase-diagram", "--points", "3", "--out", f.to_str().unwrap()]);
    assert!(stdout.is_empty());
    assert_eq!(data_lines(&std::fs::read_to_string(f).unwrap()).len(), 4);
}

#[test]
fn filter_scan_recovers_linewidth() {
    let out = ok(&["filter-scan"]);
    let fw: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("# fwhm_deconvolved = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((fw / 9.3448e-6 - 1.0).abs() < 1e-3, "{fw}");
}

#[test]
fn filter_scan_explicit_grid() {
    let out = ok(&["filter-scan", "--grid", "-5e-5:5e-5:21"]);
    let lines = data_lines(&out);
    assert_eq!(lines.len(), 22);
    assert!(lines[1].starts_with("-5.00000000000e-5,"), "{}", lines[1]);
}

#[test]
fn oracle_check_agrees() {
    let v = json(&["oracle-check"]);
    let r = &v["result"]["rel_diff"];
    assert!(r["n_a"].as_f64().unwrap() < 0.05);
    assert!(r["pop"].as_f64().unwrap() < 0.05);
    assert!(v["result"]["trace_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn json_sweep_roundtrips_numbers() {
    let v = json(&["sweep-eta", "--points", "2", "--outputs", "pop,lasing", "--format", "json"]);
    assert_eq!(v["columns"], serde_json::json!(["pop", "lasing"]));
    assert_eq!(v["rows"][0]["coords"][0], 1e-4);
    assert_eq!(v["rows"][1]["values"][1], false);
}
