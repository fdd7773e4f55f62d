use std::fs;
use std::path::PathBuf;
use std::process::Command;

use tempfile::TempDir;

fn afpmt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afpmt"))
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn unknown_config_key_exits_1() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "canonicals = []\nvariants = \"v.tsv\"\nontology = \"go.obo\"\nout_dir = \"out\"\nbogus = 1\n").unwrap();
    let out = afpmt().args(["check", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn missing_config_exits_1() {
    let out = afpmt().args(["generate", "--config", "/nonexistent/campaign.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mock_predict_writes_plain_tsv() {
    let tmp = TempDir::new().unwrap();
    let d = data_dir();
    let output = tmp.path().join("out.tsv");
    let status = afpmt()
        .args(["mock-predict", "--behavior", "variant-aware", "--seed", "0"])
        .arg("--ontology")
        .arg(d.join("go/go-subset.obo"))
        .arg("--base")
        .arg(d.join("mock/base_annotations.tsv"))
        .arg("--canonical")
        .arg(d.join("proteins/P14679.fasta"))
        .arg(d.join("proteins/P14679.fasta"))
        .arg(&output)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&output).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line}");
        assert!(fields[1].starts_with("GO:"), "{line}");
    }
}

#[test]
fn generate_writes_inputs_and_pair_table() {
    let tmp = TempDir::new().unwrap();
    let d = fs::canonicalize(data_dir()).unwrap();
    let config = tmp.path().join("c.toml");
    fs::write(
        &config,
        format!(
            "canonicals = [{:?}, {:?}, {:?}]\nvariants = {:?}\nontology = {:?}\nout_dir = \"out\"\n",
            d.join("proteins/P14679.fasta"),
            d.join("proteins/P31785.fasta"),
            d.join("proteins/O00206.fasta"),
            d.join("variants.tsv"),
            d.join("go/go-subset.obo"),
        ),
    )
    .unwrap();
    let status = afpmt().args(["generate", "--config"]).arg(&config).status().unwrap();
    assert!(status.success());
    let pairs = fs::read_to_string(tmp.path().join("out/pairs.tsv")).unwrap();
    assert_eq!(pairs.lines().filter(|l| !l.starts_with('#')).count(), 16, "{pairs}");
    assert_eq!(fs::read_dir(tmp.path().join("out/inputs")).unwrap().count(), 18);
}
