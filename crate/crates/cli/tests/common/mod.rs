#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli<S: AsRef<str>>(args: &[S]) -> Output {
    let mut argv = vec!["posetrack".to_string()];
    argv.extend(args.iter().map(|a| a.as_ref().to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = posetrack_cli::run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn ok<S: AsRef<str>>(args: &[S]) -> Output {
    let o = cli(args);
    assert_eq!(o.code, 0, "{}", o.stderr);
    o
}

pub fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

/// Writes a preset bundle into `dir`.
pub fn synth(preset: &str, dir: &Path) {
    ok(&["synth", "--preset", preset, "--out", &p(dir)]);
}

/// Tracks the bundle in `dir` with flow and features; returns the output path.
pub fn track(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let flow = dir.join("flow");
    let features = dir.join("features.txt");
    let mut args = vec![
        "track".to_string(),
        p(&dir.join("detections.json")),
        "--flow-dir".into(),
        p(&flow),
        "--features".into(),
        p(&features),
        "--out".into(),
        p(&out),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    ok(&args);
    out
}

/// Totals parsed from the `eval` text table.
#[derive(Debug, Clone, PartialEq)]
pub struct Totals {
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    pub gt: u64,
    pub mota: f64,
    pub map: f64,
    pub text: String,
}

pub fn eval(pred: &Path, gt: &Path, extra: &[&str]) -> Totals {
    let mut args = vec!["eval".to_string(), p(pred), p(gt)];
    args.extend(extra.iter().map(|s| s.to_string()));
    let text = ok(&args).stdout;
    let field = |key: &str| -> String {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("no {key} in\n{text}"))
            .trim()
            .to_string()
    };
    let row: Vec<String> = field("total ").split_whitespace().map(String::from).collect();
    Totals {
        fp: row[2].parse().unwrap(),
        fn_: row[3].parse().unwrap(),
        idsw: row[4].parse().unwrap(),
        gt: row[5].parse().unwrap(),
        mota: field("total_mota ").parse().unwrap(),
        map: field("total_map ").parse().unwrap(),
        text,
    }
}
