#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Flow-record style table: a categorical protocol, a few numeric columns
/// shifted for attacks, a constant column, some missing cells and a text label.
pub fn write_flows(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out = String::from("duration,proto,src_bytes,dst_bytes,pkts,flags,const,service,label\n");
    for i in 0..n {
        let attack = i % 3 == 0;
        let shift = if attack { 1.8 } else { 0.0 };
        let proto = ["tcp", "udp", "icmp"][rng.random_range(0..3)];
        let mut cells = vec![
            format!("{:.4}", noise.sample(&mut rng) + shift),
            proto.to_string(),
            format!("{:.4}", noise.sample(&mut rng) - shift),
            format!("{:.4}", noise.sample(&mut rng) + 0.5 * shift),
            format!("{}", rng.random_range(1..20) + if attack { 10 } else { 0 }),
            format!("{:.4}", noise.sample(&mut rng)),
            "1".to_string(),
            ["http", "dns"][rng.random_range(0..2)].to_string(),
            if attack { "ddos".to_string() } else { "normal".to_string() },
        ];
        if i % 37 == 5 {
            cells[2] = "?".into();
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}

/// A small, fast config over `data` writing into `out`.
pub fn small_config(data: &Path, out: &Path) -> String {
    format!(
        r#"[data]
path = "{}"
label_column = "label"
benign_label = "normal"
drop_columns = ["service"]

[prep]
n_components = 4

[qnn]
n_qubits = 4
layers = 2
epochs = 3
batch_size = 16

[forest]
n_trees = 15

[noise]
channels = ["depolarizing", "bit_flip"]
probabilities = [0.0, 0.3]
trajectories = 8

[run]
seed = 11
out_dir = "{}"
"#,
        data.display(),
        out.display()
    )
}

pub fn mqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqe")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) {
    let o = mqe(args);
    assert!(o.status.success(), "mqe {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

/// Runs every verb in dependency order.
pub fn run_all(config: &Path, out: &Path) {
    let c = config.to_str().unwrap();
    let o = out.to_str().unwrap();
    for verb in ["prep", "train-qnn", "train-qsvm", "fuse-eval", "noise-sweep"] {
        run_ok(&[verb, "--config", c, "--out", o]);
    }
}

/// Relative path and bytes of every file under `root`, sorted by path.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, acc: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(&p, root, acc);
            } else {
                acc.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut acc = Vec::new();
    walk(root, root, &mut acc);
    acc.sort_by(|a, b| a.0.cmp(&b.0));
    acc
}
