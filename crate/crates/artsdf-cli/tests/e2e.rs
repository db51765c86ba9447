//! End-to-end pipeline runs of the compiled binary: generate data, train,
//! recover codes, render, mesh, edit latents, and evaluate — checking exit
//! codes, output artifacts, and determinism along the way.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_artsdf"))
}

fn work_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed with {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = work_dir("pipeline");
    let data = dir.join("data");

    // Generate a tiny two-instance laptop dataset with one held-out instance.
    let out = run_ok(bin().args([
        "gen-data",
        "--scene",
        "laptop",
        "--instances",
        "2",
        "--holdout",
        "1",
        "--states",
        "2",
        "--views",
        "3",
        "--test-views",
        "2",
        "--res",
        "24x18",
        "--seed",
        "5",
        "--out",
        data.to_str().unwrap(),
    ]));
    let root = PathBuf::from(stdout_line(&out));
    assert!(root.join("manifest.txt").is_file());
    assert!(root.join("instance_001/state_001/test_001.ppm").is_file());
    // stderr echoes the resolved config and seed.
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("resolved config:") && err.contains("seed = 5"));

    // Train briefly.
    let ckpt = dir.join("model.ckpt");
    run_ok(bin().args([
        "train",
        "--threads",
        "1",
        "--data",
        root.to_str().unwrap(),
        "--variant",
        "artdef",
        "--iters",
        "60",
        "--seed",
        "3",
        "--batch",
        "24",
        "--out",
        ckpt.to_str().unwrap(),
    ]));
    assert!(ckpt.is_file());
    assert!(dir.join("model.ckpt.config").is_file());

    // Recover codes for the held-out instance; a codes file appears.
    let codes = dir.join("target.codes");
    let views = root.join("instance_001/state_000");
    run_ok(bin().args([
        "infer",
        "--threads",
        "1",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--views",
        views.to_str().unwrap(),
        "--iters",
        "25",
        "--batch",
        "16",
        "--seed",
        "1",
        "--out",
        codes.to_str().unwrap(),
    ]));
    assert!(codes.is_file());

    // Render the recovered object from its first test camera.
    let img = dir.join("view.ppm");
    run_ok(bin().args([
        "render",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--codes",
        codes.to_str().unwrap(),
        "--camera",
        views.join("cameras.txt").to_str().unwrap(),
        "--out",
        img.to_str().unwrap(),
    ]));
    assert!(img.is_file());

    // Extract a mesh.
    let mesh = dir.join("shape.obj");
    run_ok(bin().args([
        "mesh",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--codes",
        codes.to_str().unwrap(),
        "--res",
        "24",
        "--out",
        mesh.to_str().unwrap(),
    ]));
    assert!(mesh.is_file());

    // Latent edits: midpoint interpolation and an appearance swap of the
    // codes with themselves both produce valid code files.
    let mid = dir.join("mid.codes");
    run_ok(bin().args([
        "interp",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--codes-a",
        codes.to_str().unwrap(),
        "--codes-b",
        codes.to_str().unwrap(),
        "--t",
        "0.5",
        "--out",
        mid.to_str().unwrap(),
    ]));
    let swapped = dir.join("swapped.codes");
    run_ok(bin().args([
        "swap",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--codes-a",
        codes.to_str().unwrap(),
        "--codes-b",
        mid.to_str().unwrap(),
        "--which",
        "appearance",
        "--out",
        swapped.to_str().unwrap(),
    ]));
    assert!(mid.is_file() && swapped.is_file());

    // Animate over both trained states from one camera, meshes included.
    let anim = dir.join("anim");
    run_ok(bin().args([
        "animate",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--codes",
        codes.to_str().unwrap(),
        "--states",
        "0..1",
        "--camera",
        views.join("cameras.txt").to_str().unwrap(),
        "--camera-index",
        "0",
        "--mesh-res",
        "20",
        "--out-dir",
        anim.to_str().unwrap(),
    ]));
    for k in 0..2 {
        assert!(anim.join(format!("frame_{k:03}.ppm")).is_file());
        assert!(anim.join(format!("frame_{k:03}.obj")).is_file());
    }

    // Metrics: chamfer between the two animation meshes prints a number.
    let out = run_ok(bin().args([
        "eval",
        "chamfer",
        "--mesh-a",
        anim.join("frame_000.obj").to_str().unwrap(),
        "--mesh-b",
        anim.join("frame_001.obj").to_str().unwrap(),
        "--samples",
        "2000",
    ]));
    let value: f64 = stdout_line(&out).parse().unwrap();
    assert!(value.is_finite() && value >= 0.0);

    // PSNR of a file against itself is reported as "+inf" exactly.
    let out = run_ok(bin().args([
        "eval",
        "psnr",
        "--a",
        img.to_str().unwrap(),
        "--b",
        img.to_str().unwrap(),
    ]));
    assert_eq!(stdout_line(&out), "+inf");

    // Opening angle of an animation mesh against the scene's hinge.
    let out = run_ok(bin().args([
        "eval",
        "angle",
        "--mesh",
        anim.join("frame_001.obj").to_str().unwrap(),
        "--scene",
        "laptop",
        "--seed",
        "5",
        "--instance",
        "1",
    ]));
    let angle: f64 = stdout_line(&out).parse().unwrap();
    assert!(angle.is_finite());
}

#[test]
fn seeded_training_runs_are_byte_identical() {
    let dir = work_dir("determinism");
    let data = dir.join("data");
    run_ok(bin().args([
        "gen-data",
        "--scene",
        "drawer",
        "--instances",
        "1",
        "--states",
        "1",
        "--views",
        "2",
        "--res",
        "16x12",
        "--seed",
        "8",
        "--out",
        data.to_str().unwrap(),
    ]));
    let root = data.join("drawer");

    let train = |out: &Path| {
        run_ok(bin().args([
            "train",
            "--threads",
            "1",
            "--data",
            root.to_str().unwrap(),
            "--variant",
            "base",
            "--iters",
            "30",
            "--seed",
            "4",
            "--batch",
            "16",
            "--out",
            out.to_str().unwrap(),
        ]));
    };
    let (a, b) = (dir.join("a.ckpt"), dir.join("b.ckpt"));
    train(&a);
    train(&b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn exit_codes_separate_usage_data_and_numerical_failures() {
    let dir = work_dir("exit-codes");

    // Unknown flag: usage error.
    let out = bin().args(["train", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Unknown scene: usage error.
    let out = bin()
        .args(["gen-data", "--scene", "spaceship", "--out", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Missing checkpoint file: data error.
    let out = bin()
        .args([
            "mesh",
            "--ckpt",
            dir.join("missing.ckpt").to_str().unwrap(),
            "--codes",
            dir.join("missing.codes").to_str().unwrap(),
            "--out",
            dir.join("m.obj").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // A degenerate mesh makes the angle estimate a numerical failure.
    let degen = dir.join("degen.obj");
    std::fs::write(&degen, "v 0 0 0\nv 1 0 0\nf 1 1 1\n").unwrap();
    let out = bin()
        .args([
            "eval",
            "angle",
            "--mesh",
            degen.to_str().unwrap(),
            "--scene",
            "laptop",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Help exits cleanly.
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
