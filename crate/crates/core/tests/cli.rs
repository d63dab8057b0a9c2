use std::process::Command;

use gaussian_kraus::fock::FockOperator;
use gaussian_kraus::kraus::{apply_kraus, attenuator_ql, noisy_family, Cutoffs};
use gaussian_kraus::phase_space::{ChannelFamily, GaussianChannel};
use gaussian_kraus::verify::TestState;
use serde_json::Value;

fn gkraus(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gkraus")).args(args).output().expect("run gkraus");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json_line(s: &str) -> Value {
    serde_json::from_str(s.lines().next().expect("no output")).unwrap()
}

#[test]
fn gen_then_apply_matches_in_process_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let fam_path = dir.path().join("c1.json");
    let state_path = dir.path().join("out.json");
    let (code, out, err) = gkraus(&["gen", "--family", "C1", "--kappa", "0.6", "--rep", "limit", "--dim", "24", "--out", fam_path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(json_line(&out)["defect_diagonal"].as_f64().unwrap() < 1e-12);
    let (code, out, err) = gkraus(&["apply", "--family-file", fam_path.to_str().unwrap(), "--state", "coherent:1,0.5", "--out", state_path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let mean = &json_line(&out)["cm"]["mean"];
    assert!((mean[0].as_f64().unwrap() - 0.6 * 2f64.sqrt()).abs() < 1e-12);

    let from_file: FockOperator = serde_json::from_str(&std::fs::read_to_string(&state_path).unwrap()).unwrap();
    let fam = attenuator_ql(0.6, 24, 24).unwrap();
    let direct = apply_kraus(&fam, &TestState::Coherent { re: 1.0, im: 0.5 }.density(24).unwrap()).unwrap();
    assert_eq!(from_file, direct);
}

#[test]
fn noisy_round_trip_and_fock_populations() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("noisy.json");
    let args = ["gen", "--family", "C2", "--kappa", "1.3", "--alpha", "1.2", "--rep", "noisy", "--dim", "12", "--n1", "30", "--n2", "12"];
    let (code, _, err) = gkraus(&[&args[..], &["--out", p.to_str().unwrap()]].concat());
    assert_eq!(code, 0, "{err}");
    let (fam, header) = gaussian_kraus::kraus::load_family(&p).unwrap();
    let ch = GaussianChannel::new(ChannelFamily::C2, 1.3, 1.2).unwrap();
    assert_eq!(fam, noisy_family(&ch, 12, Cutoffs { n1: 30, n2: 12 }).unwrap());
    assert_eq!(header["config"]["n1"], 30);

    let att = dir.path().join("att.json");
    gkraus(&["gen", "--family", "C1", "--kappa", "0.6", "--rep", "limit", "--dim", "8", "--out", att.to_str().unwrap()]);
    let (_, out, _) = gkraus(&["apply", "--family-file", att.to_str().unwrap(), "--state", "fock:1"]);
    let pops = &json_line(&out)["populations"];
    assert!((pops[0].as_f64().unwrap() - 0.64).abs() < 1e-12);
    assert!((pops[1].as_f64().unwrap() - 0.36).abs() < 1e-12);
}

#[test]
fn gen_to_stdout_puts_summary_on_stderr() {
    let (code, out, err) = gkraus(&["gen", "--family", "C1", "--kappa", "0.6", "--rep", "finite_r", "--r", "1.0", "--dim", "6"]);
    assert_eq!(code, 0);
    let file: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(file["params"]["r"], 1.0);
    assert_eq!(json_line(&err)["completeness_target"], "tanh^(2j) r");
}

#[test]
fn classify_verdicts_and_exit_codes() {
    let (code, out, _) = gkraus(&["classify", "--family", "C1", "--kappa", "0.5", "--alpha", "0.75"]);
    let v = json_line(&out);
    assert_eq!((code, v["cp"].as_bool(), v["quantum_limited"].as_bool(), v["eb"].as_bool()), (0, Some(true), Some(true), Some(false)));

    let (code, out, _) = gkraus(&["classify", "--family", "D", "--kappa", "0.7", "--alpha", "1.49"]);
    let v = json_line(&out);
    assert_eq!((code, v["cp"].as_bool(), v["eb"].as_bool()), (0, Some(true), Some(true)));

    let (code, out, _) = gkraus(&["classify", "--family", "C1", "--kappa", "0.5", "--alpha", "0.4"]);
    assert_eq!(code, 2);
    assert_eq!(json_line(&out)["cp"], false);
}

#[test]
fn classify_reads_raw_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ch.json");
    std::fs::write(&p, r#"{"X": [[0.5, 0], [0, 0.5]], "Y": [[1.25, 0], [0, 1.25]]}"#).unwrap();
    let (code, out, err) = gkraus(&["classify", "--channel", p.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v = json_line(&out);
    assert_eq!((v["family"].as_str(), v["eb"].as_bool()), (Some("C1"), Some(true)));
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        &["gen", "--family", "B1", "--alpha", "1", "--rep", "limit"][..],
        &["gen", "--family", "C1", "--kappa", "0.5", "--alpha", "0.4", "--rep", "noisy"][..],
        &["gen", "--family", "C1", "--kappa", "1.5", "--rep", "limit"][..],
        &["gen", "--family", "C1", "--kappa", "0.5", "--rep", "limit", "--dim", "0"][..],
        &["gen", "--family", "C1", "--kappa", "0.5", "--rep", "finite_r"][..],
        &["verify", "--suite", "oracle", "--family", "C1", "--kappa", "0.5", "--tol", "-1"][..],
        &["apply", "--family-file", "x.json", "--state", "squeezed:1"][..],
        &["frobnicate"][..],
    ] {
        let (code, _, err) = gkraus(args);
        assert_eq!(code, 2, "{args:?}: {err}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"dim": 10, "levels": 4}"#).unwrap();
    let (code, out, err) = gkraus(&["gen", "--family", "C1", "--kappa", "0.6", "--rep", "limit", "--config", cfg.to_str().unwrap(), "--dim", "12", "--out", dir.path().join("f.json").to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let v = json_line(&out);
    assert_eq!((v["dim"].as_u64(), v["levels"].as_u64()), (Some(12), Some(4)));
    std::fs::write(&cfg, r#"{"dimension": 10}"#).unwrap();
    let (code, _, _) = gkraus(&["gen", "--family", "C1", "--kappa", "0.6", "--rep", "limit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn verify_suites_report_json_lines_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("summary.csv");
    let (code, out, err) = gkraus(&["verify", "--suite", "oracle", "--family", "D", "--kappa", "0.8", "--dim", "30", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines[0]["config"]["dim"] == 30);
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|r| r["pass"] == true));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("# {"));
    assert_eq!(table.lines().filter(|l| l.starts_with("oracle_equivalence,")).count(), 3);

    let (code, out, _) = gkraus(&["verify", "--suite", "beamsplitter_product", "--states", "coherent:0.5,0.5;fock:3", "--dim", "30", "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.starts_with("beamsplitter_product,")).count(), 2);

    // a tolerance that cannot be met is a verification failure
    let (code, _, _) = gkraus(&["verify", "--suite", "oracle", "--family", "C1", "--kappa", "0.6", "--dim", "10", "--tol", "1e-300"]);
    assert_eq!(code, 3);
}

#[test]
fn verify_convergence_table() {
    let (code, out, _) = gkraus(&["verify", "--suite", "convergence", "--family", "C1", "--kappa", "0.5", "--r", "1,2,4", "--format", "csv", "--tol", "0.01"]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = out.lines().skip_while(|l| *l != "r,max_abs_diff").skip(1).take_while(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 3);
    let gaps: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
}

#[test]
fn verify_composition_names_ordering() {
    let (code, _, err) = gkraus(&["verify", "--suite", "composition", "--k1", "0.6", "--k2", "1.2", "--dim", "25", "--n1", "50", "--n2", "25", "--states", "vacuum"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("matching ordering amplifier_after_attenuator"), "{err}");
}

#[test]
fn verify_selected_criteria() {
    let (code, out, err) = gkraus(&["verify", "--suite", "all", "--criteria", "2,9"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("criterion  2 [PASS]") && err.contains("criterion  9 [PASS]"), "{err}");
    assert!(out.lines().skip(1).all(|l| serde_json::from_str::<Value>(l).unwrap()["params"]["criterion"].is_number()));
}

#[test]
fn schema_files_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/schema");
    let names: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(names.len() >= 6);
    for p in names {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert!(v["$id"].is_string(), "{p:?}");
    }
}
