use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = include_str!("../../../configs/quick.cfg");

fn dedvad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dedvad")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn end_to_end_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    let feats = dir.path().join("features.csv");
    ok(&dedvad(&["--config", p(&cfg), "features", "--out", p(&feats)]));

    let hash = |name: &str| {
        let model = dir.path().join(name);
        let stdout = ok(&dedvad(&[
            "--config",
            p(&cfg),
            "--seed",
            "3",
            "train",
            "--features",
            p(&feats),
            "--out",
            p(&model),
        ]));
        let hash = stdout.split_whitespace().last().unwrap().to_string();
        (model, hash)
    };
    let (model, a) = hash("a.dvad");
    let (_, b) = hash("b.dvad");
    assert_eq!(a, b);
    assert_eq!(a.len(), 64);

    let metrics = dir.path().join("metrics.csv");
    ok(&dedvad(&[
        "evaluate",
        "--model",
        p(&model),
        "--features",
        p(&feats),
        "--test-split",
        "--out",
        p(&metrics),
    ]));
    let rows = read_csv(&metrics);
    for mode in ["realtime", "batch"] {
        let acc = rows.iter().find(|r| r[0] == mode && r[1] == "accuracy").expect("accuracy row");
        let acc: f64 = acc[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    let curve = dir.path().join("roc.csv");
    ok(&dedvad(&[
        "roc",
        "--model",
        p(&model),
        "--features",
        p(&feats),
        "--test-split",
        "--out",
        p(&curve),
    ]));
    let pts: Vec<[f64; 3]> = read_csv(&curve)
        .iter()
        .map(|r| [r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()])
        .collect();
    assert!(pts.len() >= 2);
    for w in pts.windows(2) {
        assert!(w[1][0] <= w[0][0], "thresholds not decreasing");
        assert!(w[1][1] >= w[0][1] && w[1][2] >= w[0][2], "rates not monotone");
    }

    // realtime inference on audio agrees with inference on its feature rows
    let scenes = dir.path().join("scenes");
    ok(&dedvad(&["--config", p(&cfg), "mix", "--out-dir", p(&scenes)]));
    let wav = scenes.join("scene0_noisy.wav");
    let wav_feats = dir.path().join("scene0.csv");
    ok(&dedvad(&["features", "--input", p(&wav), "--out", p(&wav_feats)]));
    let streamed = dir.path().join("streamed.csv");
    let offline = dir.path().join("offline.csv");
    ok(&dedvad(&["infer", "--model", p(&model), "--mode", "realtime", "--input", p(&wav), "--out", p(&streamed)]));
    ok(&dedvad(&[
        "infer",
        "--model",
        p(&model),
        "--mode",
        "realtime",
        "--features",
        p(&wav_feats),
        "--out",
        p(&offline),
    ]));
    let (s, o) = (read_csv(&streamed), read_csv(&offline));
    assert_eq!(s.len(), o.len());
    for (a, b) in s.iter().zip(&o) {
        assert_eq!(a[1], b[1]);
        let (x, y): (f64, f64) = (a[2].parse().unwrap(), b[2].parse().unwrap());
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let missing = dir.path().join("missing.dvad");

    assert_eq!(dedvad(&["--help"]).status.code(), Some(0));
    assert_eq!(dedvad(&["frobnicate"]).status.code(), Some(1));
    // both sources given
    assert_eq!(
        dedvad(&["infer", "--model", "m", "--mode", "batch", "--input", "a", "--features", "b", "--out", "o"])
            .status
            .code(),
        Some(1)
    );

    let feats = dir.path().join("f.csv");
    std::fs::write(&feats, "f0,f1\n0.1,0.2\n").unwrap();
    let r = dedvad(&["infer", "--model", p(&missing), "--mode", "batch", "--features", p(&feats), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());

    let garbage = dir.path().join("garbage.dvad");
    std::fs::write(&garbage, b"not a bundle").unwrap();
    let r = dedvad(&["infer", "--model", p(&garbage), "--mode", "realtime", "--features", p(&feats), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));

    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(dedvad(&["--config", p(&bad_cfg), "mix", "--out-dir", p(dir.path())]).status.code(), Some(2));
}
