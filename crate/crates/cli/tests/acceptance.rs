//! Acceptance gate, binary side: reproducibility of simulation output across
//! worker-thread counts. Prints a `criterion NN: PASS/FAIL` line (visible
//! with `--nocapture`) before asserting.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

fn run_simulation(threads: &str, trace_dir: &Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_hoskip"))
        .args([
            "simulate", "--policy", "periodic", "--s", "40", "--lambda", "1",
            "--beta", "3", "--vbar", "2e-3", "--reps", "64", "--horizon", "400",
            "--seed", "10", "--no-timestamp", "--trace-dir",
            trace_dir.to_str().unwrap(),
        ])
        .env("HOSKIP_THREADS", threads)
        .output()
        .expect("spawn hoskip");
    assert!(
        out.status.success(),
        "{threads} threads: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn trace_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("trace dir")
        .map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().into_string().unwrap();
            let body = std::fs::read(entry.path()).unwrap();
            (name, body)
        })
        .collect()
}

#[test]
fn criterion_10_output_is_thread_count_invariant() {
    let scratch = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for threads in ["1", "2", "8"] {
        let dir = scratch.path().join(format!("threads_{threads}"));
        reports.push(run_simulation(threads, &dir));
        traces.push(trace_bytes(&dir));
    }
    let reports_match = reports.iter().all(|r| r == &reports[0]);
    let traces_match = traces.iter().all(|t| t == &traces[0])
        && traces[0].len() == 64
        && traces[0].values().all(|body| !body.is_empty());
    let ok = reports_match && traces_match;
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!(
        "criterion 10: {verdict} — identical seeds give byte-identical reports and {} traces across 1, 2, and 8 worker threads",
        traces[0].len()
    );
    assert!(
        reports_match,
        "simulation reports differ between thread counts"
    );
    assert!(traces_match, "trace files differ between thread counts");
}
