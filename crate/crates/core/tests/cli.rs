use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_netsense");
const KEY: &str = "00112233445566778899aabbccddeeff00112233445566778899aabbccddeeff";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(packets: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("key.hex"), KEY).unwrap();
        let o = run(&["synth", "--seed", "42", "--packets", packets, "--noise-fraction", "0.1", "--out", s(&dir.path().join("in.pcap"))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        Fixture { dir }
    }
    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
    fn process(&self, out: &str, extra: &[&str]) -> Output {
        let (pcap, key, out) = (self.path("in.pcap"), self.path("key.hex"), self.path(out));
        let mut args = vec!["process", s(&pcap), "--key-file", s(&key), "--out", s(&out)];
        args.extend_from_slice(extra);
        run(&args)
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["process", "x.pcap", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(&["synth", "--out", "x", "--noise-fraction", "2"]).status.code(), Some(2));
    assert_eq!(run(&["info"]).status.code(), Some(0));
}

#[test]
fn bad_key_exits_2_before_reading_input() {
    let f = Fixture::new("100");
    fs::write(f.path("short.hex"), "abcd").unwrap();
    let o = run(&["process", "does-not-exist.pcap", "--key-file", s(&f.path("short.hex")), "--out", s(&f.path("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!f.path("o").exists());
    let o = Command::new(BIN)
        .args(["process", s(&f.path("in.pcap")), "--key-env", "NETSENSE_TEST_UNSET_KEY", "--out", s(&f.path("o"))])
        .env_remove("NETSENSE_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    // the key never shows up in error output
    assert!(!String::from_utf8_lossy(&o.stderr).contains(KEY));
}

#[test]
fn key_from_environment_matches_key_file() {
    let f = Fixture::new("3000");
    assert!(f.process("a", &["--window", "500"]).status.success());
    let o = Command::new(BIN)
        .args(["process", s(&f.path("in.pcap")), "--key-env", "NETSENSE_TEST_KEY", "--out", s(&f.path("b")), "--window", "500"])
        .env("NETSENSE_TEST_KEY", KEY)
        .output()
        .unwrap();
    assert!(o.status.success());
    for name in ["tm_0_5.tar", "manifest.json"] {
        assert_eq!(fs::read(f.path("a").join(name)).unwrap(), fs::read(f.path("b").join(name)).unwrap());
    }
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let f = Fixture::new("10");
    let o = run(&["process", s(&f.path("nope.pcap")), "--key-file", s(&f.path("key.hex")), "--out", s(&f.path("o"))]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["analyze", s(&f.path("empty"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn process_then_analyze_matches_verify() {
    let f = Fixture::new("5000");
    let o = f.process("out", &["--window", "1000", "--matrices-per-tar", "2"]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["matrices"], 5);
    assert_eq!(summary["ingest"]["pairs_extracted"], 5000);
    assert!(summary["packets_per_second"].as_f64().unwrap() > 0.0);
    let mut names: Vec<String> = fs::read_dir(f.path("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "tm_0_1.tar", "tm_2_3.tar", "tm_4_4.tar"]);

    let a = run(&["analyze", s(&f.path("out"))]);
    assert!(a.status.success());
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["valid_packets"], 5000);
    assert_eq!(report["meta"]["matrix_count"], 5);
    assert_eq!(report["meta"]["window_size"], 1000);
    assert_eq!(report["meta"]["key_fingerprint"].as_str().unwrap().len(), 8);
    assert!(String::from_utf8_lossy(&a.stderr).contains("unique_links"));

    let v = run(&["verify", s(&f.path("in.pcap")), "--key-file", s(&f.path("key.hex")), "--archives", s(&f.path("out"))]);
    assert_eq!(v.status.code(), Some(0));
    let verdict: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(verdict["match"], true);
    for (field, value) in verdict["oracle"].as_object().unwrap() {
        assert_eq!(&report[field], value, "{field}");
    }
}

#[test]
fn verify_flags_a_tampered_archive_set() {
    let f = Fixture::new("4000");
    assert!(f.process("out", &["--window", "1000", "--matrices-per-tar", "1"]).status.success());
    // drop one window: the pipeline side loses packets, the oracle does not
    fs::remove_file(f.path("out").join("tm_2_2.tar")).unwrap();
    let v = run(&["verify", s(&f.path("in.pcap")), "--key-file", s(&f.path("key.hex")), "--archives", s(&f.path("out"))]);
    assert_eq!(v.status.code(), Some(1));
    let verdict: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(verdict["match"], false);
    assert!(verdict["mismatches"].as_array().unwrap().iter().any(|d| d["field"] == "valid_packets"));

    // archives made under another key: addresses differ, counts do not
    fs::write(f.path("other.hex"), KEY.replace('0', "f")).unwrap();
    assert!(f.process("out2", &["--window", "1000"]).status.success());
    let v = run(&["verify", s(&f.path("in.pcap")), "--key-file", s(&f.path("other.hex")), "--archives", s(&f.path("out2"))]);
    assert_eq!(v.status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let f = Fixture::new("6000");
    for out in ["r1", "r2"] {
        assert!(f.process(out, &["--window", "700", "--workers", "3"]).status.success());
        let report = f.path(&format!("{out}.json"));
        assert!(run(&["analyze", s(&f.path(out)), "--report", s(&report)]).status.success());
    }
    for entry in fs::read_dir(f.path("r1")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(f.path("r1").join(&name)).unwrap(), fs::read(f.path("r2").join(&name)).unwrap());
    }
    assert_eq!(fs::read(f.path("r1.json")).unwrap(), fs::read(f.path("r2.json")).unwrap());
}

#[test]
fn synth_is_deterministic_and_requires_out() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.pcap"), dir.path().join("b.pcap"));
    for p in [&a, &b] {
        let o = run(&["synth", "--seed", "42", "--packets", "8192", "--out", s(p)]);
        assert!(o.status.success());
        let echo: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(echo["config"]["seed"], 42);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&a).unwrap().len(), 24 + 8192 * (16 + 34));
    assert_eq!(run(&["synth", "--seed", "42", "--packets", "8192"]).status.code(), Some(2));
}

#[test]
fn eight_windows_fit_one_archive() {
    let f = Fixture::new("8192");
    let o = f.process("out", &["--window", "1024", "--matrices-per-tar", "8"]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["matrices"], 8);
    assert_eq!(summary["archives"].as_array().unwrap().len(), 1);
    assert!(f.path("out").join("tm_0_7.tar").exists());
}

#[test]
fn zero_packet_input() {
    let f = Fixture::new("10");
    let zero = f.path("zero.pcap");
    assert!(run(&["synth", "--packets", "0", "--out", s(&zero)]).status.success());
    let v = run(&["verify", s(&zero), "--key-file", s(&f.path("key.hex"))]);
    assert_eq!(v.status.code(), Some(0));
    let verdict: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(verdict["pipeline"]["valid_packets"], 0);
    assert_eq!(verdict["oracle"]["unique_links"], 0);

    let empty_tar = f.path("empty.tar");
    tar::Builder::new(fs::File::create(&empty_tar).unwrap()).finish().unwrap();
    assert_eq!(run(&["analyze", s(&empty_tar)]).status.code(), Some(1));
}

#[test]
fn analyze_names_the_corrupt_member() {
    let f = Fixture::new("3000");
    assert!(f.process("out", &["--window", "1000"]).status.success());
    let tar_path = f.path("out").join("tm_0_2.tar");
    let mut bytes = fs::read(&tar_path).unwrap();
    // second member's TMX magic: header 512 + first member padded, then another 512 header
    let first_len = u64::from_str_radix(std::str::from_utf8(&bytes[124..135]).unwrap(), 8).unwrap() as usize;
    let second_data = 512 + first_len.div_ceil(512) * 512 + 512;
    assert_eq!(&bytes[second_data..second_data + 4], b"TMX1");
    bytes[second_data] = b'Q';
    fs::write(&tar_path, bytes).unwrap();
    let o = run(&["analyze", s(&f.path("out"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tm_0_2.tar") && err.contains("tm_00000001.tmx"), "{err}");
}
