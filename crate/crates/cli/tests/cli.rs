use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const EX1: [&str; 10] = ["--n", "6", "--k", "4", "--alpha-base", "4", "--field-w", "4", "--poly", "0b11001"];
const EX2: [&str; 10] = ["--n", "6", "--k", "4", "--alpha-base", "2", "--field-w", "4", "--poly", "0x19"];

fn htplus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htplus")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sample_bytes(len: usize) -> Vec<u8> {
    (0..len).map(|i| (i * 131 + i / 7) as u8).collect()
}

fn encode(dir: &TempDir, data: &[u8], flags: &[&str]) -> std::path::PathBuf {
    let input = dir.path().join("in.bin");
    fs::write(&input, data).unwrap();
    let shards = dir.path().join("shards");
    let mut args = vec!["encode", "--input", p(&input), "--out-dir", p(&shards)];
    args.extend_from_slice(flags);
    let out = htplus(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    shards
}

#[test]
fn gen_code_describes_small_codes() {
    for flags in [EX1, EX2] {
        let mut args = vec!["gen-code"];
        args.extend_from_slice(&flags);
        let out = htplus(&args);
        assert_eq!(code(&out), 0);
        let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(v["params"]["poly"], 25);
        assert_eq!(v["mds"], "verified");
        assert_eq!(v["subsets_checked"], 15);
    }
}

#[test]
fn invalid_params_exit_2() {
    let out = htplus(&["gen-code", "--n", "6", "--k", "7", "--alpha-base", "2"]);
    assert_eq!(code(&out), 2);
    let out = htplus(&["gen-code", "--n", "6", "--k", "4", "--alpha-base", "2", "--field-w", "5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn any_four_of_six_decode() {
    let dir = TempDir::new().unwrap();
    let data = sample_bytes(3001);
    let shards = encode(&dir, &data, &EX1);
    let output = dir.path().join("out.bin");
    for mask in 0u32..64 {
        if mask.count_ones() != 4 {
            continue;
        }
        let files: Vec<String> = (0..6)
            .filter(|m| mask >> m & 1 == 1)
            .map(|m| p(&shards.join(format!("shard_{m:03}"))).to_string())
            .collect();
        let mut args = vec!["decode", "--output", p(&output), "--shards"];
        args.extend(files.iter().map(String::as_str));
        let out = htplus(&args);
        assert_eq!(code(&out), 0, "{mask:b}");
        assert_eq!(fs::read(&output).unwrap(), data, "{mask:b}");
    }
}

#[test]
fn decode_from_directory_and_empty_input() {
    let dir = TempDir::new().unwrap();
    let shards = encode(&dir, &[], &EX2);
    let output = dir.path().join("out.bin");
    let out = htplus(&["decode", "--shards", p(&shards), "--output", p(&output)]);
    assert_eq!(code(&out), 0);
    assert!(fs::read(&output).unwrap().is_empty());
    assert_eq!(fs::metadata(shards.join("shard_000")).unwrap().len(), 41);
}

#[test]
fn three_shards_exit_4() {
    let dir = TempDir::new().unwrap();
    let shards = encode(&dir, &sample_bytes(100), &EX1);
    for m in [0, 2, 4] {
        fs::remove_file(shards.join(format!("shard_{m:03}"))).unwrap();
    }
    let output = dir.path().join("out.bin");
    let out = htplus(&["decode", "--shards", p(&shards), "--output", p(&output)]);
    assert_eq!(code(&out), 4);
}

#[test]
fn mixed_runs_and_corruption_exit_5() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let sa = encode(&a, &sample_bytes(100), &EX1);
    let sb = encode(&b, &sample_bytes(90), &EX1);
    let output = a.path().join("out.bin");
    let files = [sa.join("shard_000"), sa.join("shard_001"), sa.join("shard_002"), sb.join("shard_003")];
    let mut args = vec!["decode", "--output", p(&output), "--shards"];
    args.extend(files.iter().map(|f| p(f)));
    assert_eq!(code(&htplus(&args)), 5);

    let victim = sa.join("shard_001");
    let mut bytes = fs::read(&victim).unwrap();
    bytes[12] ^= 0xff;
    fs::write(&victim, &bytes).unwrap();
    let out = htplus(&["decode", "--shards", p(&sa), "--output", p(&output)]);
    assert_eq!(code(&out), 5);

    let short = sa.join("shard_002");
    let bytes = fs::read(&short).unwrap();
    fs::write(&short, &bytes[..bytes.len() - 1]).unwrap();
    let args = ["decode", "--output", p(&output), "--shards", p(&short)];
    assert_eq!(code(&htplus(&args)), 5);
}

#[test]
fn missing_file_exit_3() {
    let out = htplus(&["decode", "--shards", "/nonexistent/shard_000", "--output", "/tmp/x"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn repair_restores_shards_exactly() {
    for (flags, failed, reads) in [(EX1, "1", 20), (EX1, "5", 20), (EX2, "0", 12), (EX2, "4", 10)] {
        let dir = TempDir::new().unwrap();
        let shards = encode(&dir, &sample_bytes(777), &flags);
        let path = shards.join(format!("shard_{:03}", failed.parse::<usize>().unwrap()));
        let original = fs::read(&path).unwrap();
        fs::remove_file(&path).unwrap();

        let plan = htplus(&["repair", "--shards", p(&shards), "--failed", failed, "--dry-run"]);
        assert_eq!(code(&plan), 0);
        assert!(stdout(&plan).contains(&format!("reads={reads} symbols")));
        assert!(!path.exists());

        let out = htplus(&["repair", "--shards", p(&shards), "--failed", failed]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains(&format!("reads={reads} symbols")));
        assert_eq!(fs::read(&path).unwrap(), original);
    }
}

#[test]
fn repair_rejects_bad_node() {
    let dir = TempDir::new().unwrap();
    let shards = encode(&dir, &sample_bytes(10), &EX1);
    assert_eq!(code(&htplus(&["repair", "--shards", p(&shards), "--failed", "6"])), 2);
}

#[test]
fn verify_passes_and_corrupt_exits_6() {
    let mut args = vec!["verify"];
    args.extend_from_slice(&EX1);
    let out = htplus(&args);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["repair"]["avg_fraction"], 0.625);

    args.extend(["--mds", "--corrupt"]);
    let out = htplus(&args);
    assert_eq!(code(&out), 6);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["passed"], false);
    assert!(v["mds"]["failure"].is_array());
}

#[test]
fn verify_params_file_sweep() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("p.json");
    fs::write(
        &file,
        r#"[{"n":6,"k":4,"alpha_base":2,"field_w":8},{"n":9,"k":6,"alpha_base":3,"field_w":8}]"#,
    )
    .unwrap();
    let out = htplus(&["verify", "--params-file", p(&file)]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("p.json");
    fs::write(&file, r#"[{"n":6,"k":4,"alpha_base":4,"field_w":4,"poly":25},{"n":12,"k":10,"alpha_base":2}]"#).unwrap();
    let out = htplus(&["bench", "--params-file", p(&file)]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v[0]["avg_fraction"], 0.625);
    assert_eq!(v[1]["params"]["field_w"], 16);
    assert!(v[1]["published"].is_object());

    let out = htplus(&["bench", "--params-file", p(&file), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("n,k,alpha_base"));
    let cols = lines[0].split(',').count();
    assert!(lines[1..].iter().all(|l| l.split(',').count() == cols));
    assert!(lines[1].contains("0.625000"));
}
