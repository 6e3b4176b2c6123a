use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use depth_refine::affinity::{normalize, AffinityField};
use depth_refine::io;
use depth_refine::{DepthGrid, ScalarPlane};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_depth-refine"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn depth-refine")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    const H: usize = 24;
    const W: usize = 40;

    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        let coarse = DepthGrid::from_fn(Self::H, Self::W, |r, c| 5.0 + (r as f32) * 0.5 + (c as f32) * 0.25).unwrap();
        let sparse = DepthGrid::from_fn(Self::H, Self::W, |r, c| {
            if (r * 7 + c * 3) % 19 == 0 {
                20.0 + (c as f32) / 8.0
            } else {
                0.0
            }
        })
        .unwrap();
        io::write_depth_png(&coarse, f.path("coarse.png")).unwrap();
        io::write_depth_png(&sparse, f.path("sparse.png")).unwrap();
        let raw = AffinityField::new(
            3,
            (0..8)
                .map(|k| {
                    ScalarPlane::from_fn(Self::H, Self::W, |r, c| ((r * 5 + c * 11 + k * 3) % 13) as f32 / 13.0)
                        .unwrap()
                })
                .collect(),
        )
        .unwrap();
        io::write_affinity(&normalize(&raw), f.path("field.aff")).unwrap();
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn refine_with_anchor_writes_png_and_keeps_measurements() {
    let f = Fixture::new();
    let out = f.path("refined.png");
    let o = run(&[
        "refine", "--schedule", "c2", "--iterations", "12", "--affinity", s(&f.path("field.aff")), "--coarse",
        s(&f.path("coarse.png")), "--input", s(&f.path("sparse.png")), "--anchor", "--output", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let refined = io::read_depth_png(&out).unwrap();
    let sparse = io::read_depth_png(f.path("sparse.png")).unwrap();
    assert_eq!(refined.shape(), (Fixture::H, Fixture::W));
    let anchored = sparse.values().iter().zip(refined.values()).filter(|(s, _)| **s > 0.0);
    for (s, r) in anchored {
        assert_eq!(s, r);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let f = Fixture::new();
    let mut outputs = Vec::new();
    for (i, imp) in ["accelerated", "accelerated", "naive"].iter().enumerate() {
        let out = f.path(&format!("r{i}.png"));
        let o = run(&[
            "refine", "--schedule", "c4", "--affinity", s(&f.path("field.aff")), "--coarse",
            s(&f.path("coarse.png")), "--input", s(&f.path("sparse.png")), "--anchor", "--impl", imp,
            "--output", s(&out),
        ]);
        assert_eq!(code(&o), 0);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn refine_without_coarse_fills_sparse_input() {
    let f = Fixture::new();
    let out = f.path("filled.png");
    let o = run(&[
        "refine", "--affinity", s(&f.path("field.aff")), "--input", s(&f.path("sparse.png")), "--output", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let refined = io::read_depth_png(&out).unwrap();
    assert_eq!(refined.valid_count(), Fixture::H * Fixture::W);
}

#[test]
fn usage_errors_exit_one_before_io() {
    let f = Fixture::new();
    let out = f.path("never.png");
    let cases: Vec<Vec<&str>> = vec![
        vec!["refine", "--schedule", "c9", "--affinity", "x", "--coarse", "y", "--output", s(&out)],
        vec!["refine", "--affinity", "missing.aff", "--coarse", "missing.png", "--anchor", "--output", s(&out)],
        vec!["refine", "--affinity", "missing.aff", "--output", s(&out)],
        vec!["refine", "--schedule", "c4", "--iterations", "2", "--affinity", "a", "--coarse", "b", "--output", s(&out)],
        vec!["backproject", "--depth", "missing.png", "--fx", "1", "--output", s(&out)],
        vec!["gen-affinity", "--image", "missing.png", "--kernel", "4", "--output", s(&out)],
        vec!["bench", "--shape", "4x4"],
        vec!["frobnicate"],
        vec!["eval", "--pred", "a.png"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert!(!out.exists());
}

#[test]
fn data_errors_exit_two() {
    let f = Fixture::new();
    fs::write(f.path("broken.aff"), b"PRFPLN\0\x01\x01").unwrap();
    let o = run(&[
        "refine", "--affinity", s(&f.path("broken.aff")), "--coarse", s(&f.path("coarse.png")), "--output",
        s(&f.path("o.png")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));

    let o = run(&["eval", "--pred", s(&f.path("sparse.png")), "--gt", s(&f.path("coarse.png"))]);
    assert_eq!(code(&o), 2);

    let o = run(&["eval", "--pred", s(&f.path("nope.png")), "--gt", s(&f.path("coarse.png"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_self_comparison_reports_zeros() {
    let f = Fixture::new();
    let coarse = f.path("coarse.png");
    let o = run(&["eval", "--pred", s(&coarse), "--gt", s(&coarse)]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let first = stdout.lines().next().unwrap();
    assert_eq!(
        first,
        format!("rmse=0.000000 mae=0.000000 irmse=0.000000 imae=0.000000 valid_count={}", Fixture::H * Fixture::W)
    );
    assert!(stdout.contains("RMSE"));
}

#[test]
fn fuse_blends_with_confidences() {
    let f = Fixture::new();
    let a = DepthGrid::filled(4, 5, 10.0).unwrap();
    let b = DepthGrid::filled(4, 5, 20.0).unwrap();
    io::write_depth_png(&a, f.path("a.png")).unwrap();
    io::write_depth_png(&b, f.path("b.png")).unwrap();
    let conf = |v: f32, name: &str| {
        let c = io::PlaneContainer::new(vec![ScalarPlane::filled(4, 5, v).unwrap()]).unwrap();
        io::write_planes(&c, f.path(name)).unwrap();
    };
    conf(2f32.ln(), "ca.pln");
    conf(0.0, "cb.pln");
    let out = f.path("fused.png");
    let o = run(&[
        "fuse", "--cd", s(&f.path("a.png")), "--dd", s(&f.path("b.png")), "--conf-cd", s(&f.path("ca.pln")),
        "--conf-dd", s(&f.path("cb.pln")), "--output", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fused = io::read_depth_png(&out).unwrap();
    assert!(fused.values().iter().all(|&v| (v - 40.0 / 3.0).abs() <= 1.0 / 512.0));
}

#[test]
fn backproject_from_flags_and_calibration_agree() {
    let f = Fixture::new();
    let calib = f.path("calib.txt");
    fs::write(&calib, "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nP2: 721.5 0 20.0 44.9 0 721.5 12.0 0.2 0 0 1 0.003\n").unwrap();
    let a = f.path("a.pln");
    let b = f.path("b.pln");
    let o = run(&[
        "backproject", "--depth", s(&f.path("sparse.png")), "--fx", "721.5", "--fy", "721.5", "--u0", "20", "--v0",
        "12", "--output", s(&a),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["backproject", "--depth", s(&f.path("sparse.png")), "--calib", s(&calib), "--output", s(&b)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let planes = io::read_planes(&a).unwrap();
    assert_eq!(planes.plane_count(), 3);
    assert_eq!((planes.height(), planes.width()), (Fixture::H, Fixture::W));

    let pooled = f.path("pooled.pln");
    let o = run(&[
        "backproject", "--depth", s(&f.path("sparse.png")), "--calib", s(&calib), "--pool", "4", "--output",
        s(&pooled),
    ]);
    assert_eq!(code(&o), 0);
    let planes = io::read_planes(&pooled).unwrap();
    assert_eq!((planes.height(), planes.width()), (6, 10));

    let o = run(&[
        "backproject", "--depth", s(&f.path("sparse.png")), "--calib", s(&calib), "--pool", "7", "--output",
        s(&pooled),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn gen_affinity_feeds_refine() {
    let f = Fixture::new();
    let img = image::RgbImage::from_fn(Fixture::W as u32, Fixture::H as u32, |x, y| {
        if x < 20 {
            image::Rgb([200, 30, 30])
        } else {
            image::Rgb([20, 20, (y * 8) as u8])
        }
    });
    img.save(f.path("guide.png")).unwrap();
    let field = f.path("guided.aff");
    let o = run(&[
        "gen-affinity", "--image", s(&f.path("guide.png")), "--kernel", "3", "--sigma", "0.1", "--output", s(&field),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let loaded = io::read_affinity(&field).unwrap();
    assert_eq!(loaded.kernel_size(), 3);
    loaded.check_normalized().unwrap();

    let o = run(&[
        "refine", "--affinity", s(&field), "--coarse", s(&f.path("coarse.png")), "--output", s(&f.path("g.png")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bench_writes_json_report() {
    let f = Fixture::new();
    let json = f.path("bench.json");
    let o = run(&["bench", "--shape", "64x32", "--schedule", "c2", "--impl", "both", "--json", s(&json)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("speedup"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    let results = report.as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["label"], "naive");
    assert_eq!(results[1]["label"], "accelerated");
    assert_eq!(results[1]["grid_shape"], serde_json::json!([32, 64]));
    assert_eq!(results[1]["schedule"], "2x6,1x6");
    assert_eq!(results[1]["iterations"], 12);
    assert_eq!(results[1]["runs"], 5);
    assert!(results[1]["median_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["refine", "--help"])), 0);
}
