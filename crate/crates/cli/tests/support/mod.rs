//! Small configs covering every command, for rerun and exit-code tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MODELS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models");

pub const COMMANDS: [&str; 11] = [
    "simulate-field",
    "tail-estimate",
    "theta-anchored",
    "palm-check",
    "blocks-diagnose",
    "align-validate",
    "align-constants",
    "align-gumbel-check",
    "align-cluster-sample",
    "align-pvalue",
    "heatmap",
];

/// Writes a quick config for `command` into `dir` and returns its path.
pub fn quick_config(dir: &Path, command: &str) -> PathBuf {
    let body = if command.starts_with("align") || command == "heatmap" {
        format!(
            "seed = 5\nmodel = \"{MODELS}/dna_pm1.toml\"\nreplicates = 40\n\n[alignment]\nn = 150\n\
             theta_reps = 20000\nc_reps = 5000\ncount = 40\nscores = [8.0, 12.0, 16.0]\n"
        )
    } else {
        format!(
            "seed = 5\nmodel = \"{MODELS}/ma_reference.toml\"\nreplicates = 40\n\n[field]\nextent = [20000]\n\
             quantiles = [0.99, 0.995]\n\n[blocks]\nn = 2000\n"
        )
    };
    let path = dir.join(format!("{command}.toml"));
    std::fs::write(&path, body).unwrap();
    path
}

pub fn run(args: &[&str]) -> i32 {
    rvfield_cli::run(std::iter::once("rvfield").chain(args.iter().copied()))
}

/// File name to contents for everything in `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}
