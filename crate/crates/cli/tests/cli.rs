use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn iawf(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_iawf")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "iawf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn allocate_writes_one_row_per_stream() {
    let dir = tempfile::tempdir().unwrap();
    let streams = dir.path().join("streams.csv");
    fs::write(&streams, "stream_id,omega,L,gain_sq\na,1,10,1\nb,4,10,0.5\nc,16,10,2\n").unwrap();
    let out = iawf(&["allocate", "--streams", path(&streams), "--budget", "30"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "stream_id,omega,L,gain_sq,p,snr,predicted_ber");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    let spent: f64 = rows
        .iter()
        .map(|r| r.split(',').nth(4).unwrap().parse::<f64>().unwrap() * 10.0)
        .sum();
    assert!((spent - 30.0).abs() < 1e-9, "{spent}");
}

#[test]
fn allocate_rejects_two_budgets() {
    let out = Command::new(env!("CARGO_BIN_EXE_iawf"))
        .args(["allocate", "--streams", "x.csv", "--budget", "1", "--snr-db", "3"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn scene_then_partition_from_files() {
    let dir = tempfile::tempdir().unwrap();
    iawf(&["scene", "--width", "32", "--height", "24", "-o", path(dir.path())]);
    let image = dir.path().join("scene.png");
    let segments = dir.path().join("segments.png");
    assert!(image.exists() && segments.exists());
    let out = iawf(&[
        "partition",
        "--image",
        path(&image),
        "--segment-map",
        path(&segments),
        "--criterion",
        "ss-i",
    ]);
    let manifest: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest["streams"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_writes_tables_and_demo_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    iawf(&[
        "simulate",
        "--set",
        "source.size=[32, 24]",
        "--trials",
        "2",
        "--snr-db",
        "4,16",
        "-o",
        path(&sim),
    ]);
    for f in ["curves.csv", "gains.csv", "trials.csv", "config.toml"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let curves = fs::read_to_string(sim.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 2 * 3 * 3);

    let demo = dir.path().join("demo");
    iawf(&[
        "demo",
        "-c",
        path(&sim.join("config.toml")),
        "--snr-db",
        "10",
        "--criteria",
        "sp-i",
        "--set",
        "experiment.gain_snr_db=10",
        "-o",
        path(&demo),
    ]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(demo.join("manifest.json")).unwrap()).unwrap();
    let entries = manifest["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for e in entries {
        assert!(demo.join(e["file"].as_str().unwrap()).exists());
    }
}

#[test]
fn fit_ber_prints_samples() {
    let out = iawf(&["fit-ber", "--points", "0,2,4", "--block-len", "2000", "--blocks", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("snr_db,ber"));
    assert_eq!(text.lines().count(), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn bundled_config_loads() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let out = iawf(&["partition", "-c", path(&cfg), "--criterion", "sp-i"]);
    let manifest: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest["streams"].as_array().unwrap().len(), 8);
}
