#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spherelight"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn spherelight")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Value of `name` in `metric,value,unit` CSV output.
pub fn metric(csv: &str, name: &str) -> Option<f64> {
    csv.lines().find_map(|l| {
        let mut f = l.split(',');
        (f.next()? == name).then(|| f.next()?.parse().ok()).flatten()
    })
}

pub fn record(scenario: &str, frames: usize, dir: &Path) {
    run_ok(&["record-synthetic", "--scenario", scenario, "--frames", &frames.to_string(), "--out", dir.to_str().unwrap()]);
}

/// `serve` on an ephemeral port; killed on drop.
pub struct Server {
    child: Child,
    pub url: String,
}

impl Server {
    pub fn start() -> Self {
        let mut child = bin()
            .args(["serve", "--listen", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let url = line.trim().strip_prefix("listening on ").expect("address line").to_string();
        Self { child, url }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
