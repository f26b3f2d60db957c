//! A scratch working directory and the binary that runs in it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use card::harness::{gaussian_prior_image, SyntheticDataset};
use card::io::save_image;
use tempfile::TempDir;

pub const BIN: &str = env!("CARGO_BIN_EXE_card");

pub fn card(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = card(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A working directory with a covariance, a clean image, a measurement and
/// a small dataset tree.
pub fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[
            "make-cov", "--sigma", "1", "--alpha", "0.5", "--bands", "1", "--patch", "8x8", "--out", "c.ct",
        ],
    );
    ok(p, &["make-cov", "--alpha", "0", "--out", "id.ct"]);
    save_image(
        &gaussian_prior_image([1, 16, 16], 0.5, 0.2, 1, 0),
        p.join("clean.png"),
        16,
    )
    .unwrap();
    ok(
        p,
        &[
            "degrade",
            "--input",
            "clean.png",
            "--task",
            "denoise",
            "--cov",
            "c.ct",
            "--sigma-y",
            "0.2",
            "--out",
            "y.ct",
        ],
    );
    SyntheticDataset {
        scenes: 2,
        height: 16,
        width: 16,
        channels: 1,
        ..SyntheticDataset::default()
    }
    .write(p.join("data"))
    .unwrap();
    dir
}

pub fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

const SAMPLER: [&str; 4] = ["--nfe", "4", "--timesteps", "40"];

pub fn subcommand_runs() -> Vec<Vec<&'static str>> {
    let mut runs = vec![
        vec![
            "estimate-cov",
            "--frames",
            "data/dark/high",
            "--patch",
            "4x4",
            "--out",
            "est.ct",
        ],
        vec![
            "make-cov",
            "--alpha",
            "0.3",
            "--bands",
            "1,8",
            "--band-scaling",
            "max-degree",
            "--out",
            "m.ct",
        ],
        vec!["perturb-cov", "--cov", "c.ct", "--level", "0.1", "--out", "p.ct"],
        vec![
            "simulate",
            "--cov",
            "c.ct",
            "--sigma-y",
            "0.3",
            "--size",
            "16x24",
            "--channels",
            "2",
            "--out",
            "n.ct",
        ],
        vec![
            "degrade",
            "--input",
            "clean.png",
            "--task",
            "deblur-gauss",
            "--cov",
            "c.ct",
            "--sigma-y",
            "0.1",
            "--out",
            "d.png",
        ],
        vec![
            "restore",
            "--input",
            "y.ct",
            "--task",
            "denoise",
            "--cov",
            "c.ct",
            "--sigma-y",
            "0.2",
            "--out",
            "r.png",
        ],
        vec![
            "eval",
            "--synthetic",
            "2",
            "--size",
            "16x16",
            "--task",
            "denoise",
            "--cov",
            "c.ct",
            "--sigma-y",
            "0.2",
            "--report",
            "e.csv",
        ],
        vec!["eval", "--manifest", "data", "--task", "sr2", "--report", "m.csv"],
        vec![
            "ablate-perturb",
            "--synthetic",
            "2",
            "--size",
            "16x16",
            "--task",
            "denoise",
            "--cov",
            "c.ct",
            "--sigma-y",
            "0.2",
            "--levels",
            "0,0.1",
            "--report",
            "ap.csv",
        ],
        vec![
            "ablate-patch",
            "--synthetic",
            "1",
            "--size",
            "16x128",
            "--task",
            "denoise",
            "--sigma-y",
            "0.1",
            "--sizes",
            "4x4,8x8",
            "--dark-frames",
            "16",
            "--report",
            "apatch.csv",
        ],
    ];
    for r in runs.iter_mut().skip(5) {
        r.extend(SAMPLER);
    }
    runs
}

/// Run `args` in `first<i>`, replay its `run.json` into `second<i>` and
/// list every artifact that differs.
pub fn replay_mismatches(p: &Path, i: usize, args: &[&str]) -> Vec<String> {
    let first = format!("first{i}");
    let second = format!("second{i}");
    let mut full = args.to_vec();
    full.extend(["--seed", "5", "--out-dir", &first]);
    ok(p, &full);
    let record = format!("{first}/run.json");
    ok(p, &["--config", &record, "--out-dir", &second]);

    let a = files_under(&p.join(&first));
    let mut b = files_under(&p.join(&second));
    let mut problems = Vec::new();
    if a.len() < 2 {
        problems.push(format!("{}: no artifacts", args[0]));
    }
    let ra: serde_json::Value = serde_json::from_slice(&a[Path::new("run.json")]).unwrap();
    let mut rb: serde_json::Value = serde_json::from_slice(&b.remove(Path::new("run.json")).unwrap()).unwrap();
    rb["out-dir"] = ra["out-dir"].clone();
    if ra != rb {
        problems.push(format!("{}: resolved configs differ", args[0]));
    }
    for (name, bytes) in a.iter().filter(|(n, _)| n.as_path() != Path::new("run.json")) {
        if b.get(name) != Some(bytes) {
            problems.push(format!("{}: {} differs", args[0], name.display()));
        }
    }
    problems
}
