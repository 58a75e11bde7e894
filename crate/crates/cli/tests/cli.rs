use std::path::Path;
use std::process::{Command, Output};

use boolgrow::process::iterate_exact;
use boolgrow::spectrum::transform;
use boolgrow::{Connective, ProcessSpec, SupportSpec};
use serde_json::Value;

fn boolgrow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boolgrow"))
        .args(args)
        .env_remove("BOOLGROW_THREADS")
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = boolgrow(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn classify_majority() {
    let v = ok_json(&["classify", "--connective", "maj3"]);
    let props = &v["properties"];
    assert_eq!(props["balanced"], true);
    assert_eq!(props["monotone"], true);
    assert_eq!(props["self_dual"], true);
    assert_eq!(v["fixed_point"]["kind"], "Interior");
    assert_eq!(v["fixed_point"]["s"], 0.5);
    assert_eq!(v["char_poly"]["counts"], serde_json::json!([0, 0, 3, 1]));
}

#[test]
fn connective_sources_agree() {
    let preset = ok_json(&["classify", "--connective", "mux"]);
    let inline = ok_json(&["classify", "--connective", r#"{"arity":3,"truth_table":"8d"}"#]);
    assert_eq!(preset["properties"], inline["properties"]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alpha.json");
    std::fs::write(&path, r#"{"arity":3,"truth_table":"8d"}"#).unwrap();
    let file = ok_json(&["classify", "--connective", path.to_str().unwrap()]);
    assert_eq!(file["char_poly"], preset["char_poly"]);
}

#[test]
fn predict_slice() {
    let v = ok_json(&[
        "predict",
        "--n",
        "2",
        "--connective",
        "maj3",
        "--support",
        "proj,const0,const1",
    ]);
    assert_eq!(v["kind"], "UniformOnSet");
    assert_eq!(v["set"]["set"], "Slice");
    assert_eq!(v["theorem_tag"], "SliceUniform");
}

#[test]
fn verify_small_suite_passes() {
    let v = ok_json(&["verify", "--kmax", "4", "--nmax", "2", "--ci"]);
    let rows = v.as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        assert_eq!(r["pass"], true, "{r}");
    }
}

#[test]
fn iterate_then_spectrum_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.json");
    let s = dir.path().join("s.json");
    let base = [
        "--n",
        "2",
        "--connective",
        "maj3",
        "--support",
        "proj,neg,const0,const1",
    ];
    let mut args = vec!["iterate", "--steps", "7", "--every", "7", "--out", d.to_str().unwrap()];
    args.extend(base);
    assert!(boolgrow(&args).status.success());
    let out = boolgrow(&["spectrum", "--in", d.to_str().unwrap(), "--out", s.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dumps: Vec<boolgrow::spectrum::SpectrumDump> = serde_json::from_slice(&read(&s)).unwrap();

    let spec = ProcessSpec::new(SupportSpec::full(2), Connective::preset("maj3").unwrap());
    let pi = iterate_exact::<f64>(&spec, 7).unwrap().distribution;
    let expected = transform(&pi).unwrap().to_dump();
    assert_eq!(dumps.last().unwrap(), &expected);

    // the spectrum subcommand run directly from the spec gives the same bytes
    let mut direct = vec!["spectrum", "--steps", "7", "--every", "7"];
    direct.extend(base);
    let direct = boolgrow(&direct);
    assert_eq!(direct.stdout, read(&s));
}

#[test]
fn outputs_are_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "2", "8"] {
        let p = dir.path().join(format!("mc{threads}.json"));
        let out = boolgrow(&[
            "sample",
            "--n",
            "3",
            "--connective",
            "maj3",
            "--depth",
            "5",
            "--samples",
            "20000",
            "--seed",
            "11",
            "--threads",
            threads,
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        files.push(read(&p));
        let p = dir.path().join(format!("it{threads}.csv"));
        let out = boolgrow(&[
            "iterate",
            "--n",
            "3",
            "--connective",
            "maj3",
            "--steps",
            "3",
            "--format",
            "csv",
            "--threads",
            threads,
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        files.push(read(&p));
    }
    assert_eq!(files[0], files[2]);
    assert_eq!(files[0], files[4]);
    assert_eq!(files[1], files[3]);
    assert_eq!(files[1], files[5]);
}

#[test]
fn thread_count_from_environment() {
    let a = Command::new(env!("CARGO_BIN_EXE_boolgrow"))
        .args([
            "sample",
            "--n",
            "2",
            "--connective",
            "xor3",
            "--depth",
            "4",
            "--samples",
            "5000",
            "--seed",
            "3",
        ])
        .env("BOOLGROW_THREADS", "3")
        .output()
        .unwrap();
    assert!(a.status.success());
    let b = boolgrow(&[
        "sample",
        "--n",
        "2",
        "--connective",
        "xor3",
        "--depth",
        "4",
        "--samples",
        "5000",
        "--seed",
        "3",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn emitted_formulas_match_sampled_functions() {
    let v = ok_json(&[
        "sample",
        "--n",
        "2",
        "--connective",
        "and2",
        "--depth",
        "2",
        "--samples",
        "10",
        "--seed",
        "5",
        "--emit-formula",
    ]);
    let formulas = v["formulas"].as_array().unwrap();
    assert_eq!(formulas.len(), 4);
    assert!(formulas[0]["formula"].as_str().unwrap().starts_with("and2("));
}

#[test]
fn csv_outputs_have_headers() {
    let out = boolgrow(&[
        "converge",
        "--n",
        "2",
        "--connective",
        "xor2",
        "--steps",
        "4",
        "--format",
        "csv",
    ]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("i,distance,bound\n"));
    let out = boolgrow(&[
        "spectrum",
        "--n",
        "2",
        "--connective",
        "maj3",
        "--steps",
        "3",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("i,max_delta,bound\n"));
    assert_eq!(text.lines().count(), 5);
    let out = boolgrow(&[
        "bounds",
        "--n",
        "2",
        "--connective",
        "maj3",
        "--support",
        "proj,neg,const0,const1",
        "--format",
        "csv",
    ]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("\na,5.0000000000000000e-1\n"));
}

#[test]
fn exit_codes() {
    // malformed: unknown preset, bad support flag, missing seed, csv where unsupported
    for args in [
        &["predict", "--n", "2", "--connective", "maj4"][..],
        &["predict", "--n", "2", "--connective", "maj3", "--support", "proj,foo"],
        &["sample", "--n", "2", "--connective", "maj3", "--depth", "3"],
        &["classify", "--connective", "maj3", "--format", "csv"],
        &["converge", "--n", "2", "--connective", "maj3", "--epsilon", "0"],
    ] {
        assert_eq!(boolgrow(args).status.code(), Some(1), "{args:?}");
    }
    // caps
    assert_eq!(
        boolgrow(&["iterate", "--n", "5", "--connective", "maj3", "--steps", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(boolgrow(&["verify", "--kmax", "6"]).status.code(), Some(2));
    assert_eq!(boolgrow(&["--help"]).status.code(), Some(0));
}
