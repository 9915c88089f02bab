//! Command behaviors driven through the real binary: exit codes,
//! artifacts on disk, override precedence, determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wisernet"))
}

fn tiny_generate(out: &Path, seed: u64) {
    let status = bin()
        .args([
            "generate",
            "--out",
            out.to_str().unwrap(),
            "--n",
            "12",
            "--n-val",
            "6",
            "--n-target",
            "6",
            "--size",
            "32",
            "--seed",
            &seed.to_string(),
            "--targets",
            "shift_lowlight",
        ])
        .status()
        .unwrap();
    assert!(status.success());
}

const TINY_TRAIN: &[&str] = &[
    "--epochs",
    "2",
    "--patience",
    "2",
    "--batch-size",
    "4",
    "--input-size",
    "32",
    "--val-count",
    "6",
];

#[test]
fn generate_creates_domain_dirs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    tiny_generate(&a, 7);
    tiny_generate(&b, 7);
    for domain in ["source", "shift_lowlight"] {
        assert!(a.join(domain).join("manifest.txt").exists());
        let ma = std::fs::read(a.join(domain).join("manifest.txt")).unwrap();
        let mb = std::fs::read(b.join(domain).join("manifest.txt")).unwrap();
        assert_eq!(ma, mb, "{domain} manifest differs across identical invocations");
        // Spot-check one image byte-for-byte.
        let img = format!("images/{domain}_0000.png");
        assert_eq!(
            std::fs::read(a.join(domain).join(&img)).unwrap(),
            std::fs::read(b.join(domain).join(&img)).unwrap()
        );
    }
    assert!(a.join("run_manifest.txt").exists());
}

#[test]
fn unknown_preset_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "generate",
            "--out",
            tmp.path().to_str().unwrap(),
            "--targets",
            "shift_neon",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("shift_neon"), "stderr must name the preset: {stderr}");
}

#[test]
fn train_writes_artifacts_and_history_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny_generate(&data, 9);
    let run = |out: &Path| {
        let status = bin()
            .args(["train", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(TINY_TRAIN)
            .args(["--seed", "7"])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    run(&r1);
    run(&r2);
    for f in ["best.ckpt", "history.csv", "config.txt", "model_summary.csv", "run_manifest.txt"] {
        assert!(r1.join(f).exists(), "{f} missing");
    }
    // Checkpoints and configs replay byte-for-byte; history matches in
    // all columns except the wall-time one.
    assert_eq!(
        std::fs::read(r1.join("best.ckpt")).unwrap(),
        std::fs::read(r2.join("best.ckpt")).unwrap()
    );
    assert_eq!(
        std::fs::read(r1.join("config.txt")).unwrap(),
        std::fs::read(r2.join("config.txt")).unwrap()
    );
    let strip_wall = |p: &Path| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip_wall(&r1.join("history.csv")), strip_wall(&r2.join("history.csv")));
}

#[test]
fn override_precedence_flag_beats_file_beats_default() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny_generate(&data, 11);
    let cfg_path = tmp.path().join("cfg.txt");
    std::fs::write(&cfg_path, "epochs=1\npatience=1\nbatch_size=4\ninput_size=32\nseed=55\n")
        .unwrap();
    let out_dir = tmp.path().join("run");
    let status = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "77",
            "--val-count",
            "6",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let resolved = std::fs::read_to_string(out_dir.join("config.txt")).unwrap();
    // Flag wins over file.
    assert!(resolved.contains("seed=77"), "{resolved}");
    // File wins over default (epochs default is 100).
    assert!(resolved.contains("epochs=1"), "{resolved}");
    // Default survives where neither overrides (lr).
    assert!(resolved.contains("lr=0.0001"), "{resolved}");
}

#[test]
fn eval_writes_metrics_summary_and_overlays() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny_generate(&data, 13);
    let run_dir = tmp.path().join("run");
    assert!(bin()
        .args(["train", "--data", data.to_str().unwrap(), "--out", run_dir.to_str().unwrap()])
        .args(TINY_TRAIN)
        .status()
        .unwrap()
        .success());
    let eval_dir = tmp.path().join("eval");
    assert!(bin()
        .args([
            "eval",
            "--checkpoint",
            run_dir.join("best.ckpt").to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--domains",
            "source,shift_lowlight",
            "--out",
            eval_dir.to_str().unwrap(),
            "--overlays",
        ])
        .status()
        .unwrap()
        .success());
    let summary = std::fs::read_to_string(eval_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3, "header + one row per domain: {summary}");
    for domain in ["source", "shift_lowlight"] {
        let metrics =
            std::fs::read_to_string(eval_dir.join(format!("metrics_{domain}.csv"))).unwrap();
        // 18 source images (12 train + 6 val are all in the domain dir)
        // or 6 target images, plus header.
        assert!(metrics.lines().count() > 1);
        assert!(metrics.starts_with("image_id,domain,dsc_od,dsc_oc,hd95_od,hd95_oc,flags"));
        let n_pngs = std::fs::read_dir(eval_dir.join("overlays").join(domain)).unwrap().count();
        assert_eq!(n_pngs, metrics.lines().count() - 1, "one overlay per image");
    }
    // Unreadable domain exits 3.
    let out = bin()
        .args([
            "eval",
            "--checkpoint",
            run_dir.join("best.ckpt").to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--domains",
            "nonexistent",
            "--out",
            tmp.path().join("eval2").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn distances_source_vs_source_is_near_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny_generate(&data, 17);
    let base_dir = tmp.path().join("base");
    let wiser_dir = tmp.path().join("wiser");
    for (dir, wiser) in [(&base_dir, "off"), (&wiser_dir, "on")] {
        assert!(bin()
            .args(["train", "--data", data.to_str().unwrap(), "--out", dir.to_str().unwrap()])
            .args(TINY_TRAIN)
            .args(["--wiser", wiser, "--ds", "off"])
            .status()
            .unwrap()
            .success());
    }
    let out_dir = tmp.path().join("dist");
    assert!(bin()
        .args([
            "distances",
            "--base-checkpoint",
            base_dir.join("best.ckpt").to_str().unwrap(),
            "--wiser-checkpoint",
            wiser_dir.join("best.ckpt").to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--targets",
            "source",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());
    let csv = std::fs::read_to_string(out_dir.join("distances.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "pair,space,mmd,jsd,frechet");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "fixed 5-column schema: {line}");
        // Source vs source: every distance inside the tolerance band.
        for v in &fields[2..5] {
            let x: f64 = v.parse().unwrap();
            assert!(x < 1e-3, "{line}");
        }
    }
    assert!(out_dir.join("direction.csv").exists());
}

#[test]
fn verify_passes_clean_and_fails_with_injected_fault() {
    let out = bin().arg("verify").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max gradient-check rel err"));

    let out = bin().args(["verify", "--inject-dwt-fault"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL  wavelet_round_trip"), "{stdout}");
}
