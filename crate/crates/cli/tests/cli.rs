use std::path::PathBuf;
use std::process::{Command, Output};

fn roenum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roenum")).args(args).output().expect("binary runs")
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("roenum-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn enumerate_lists_every_solution_once() {
    let inst = scratch("k.txt", "knapsack 4 5\n2 3 1 4\n");
    let out = roenum(&["enumerate", "--instance", inst.to_str().unwrap(), "--algo", "axa", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("algorithm,instance,seed,index,solution,lo,hi,width,attempts,tick,delay")
    );
    let mut solutions: Vec<String> = lines.map(|l| l.split(',').nth(4).unwrap().to_string()).collect();
    let n = solutions.len();
    solutions.sort();
    solutions.dedup();
    assert_eq!(solutions.len(), n);
    // subsets of {2, 3, 1, 4} with total at most 5
    assert_eq!(n, 9);
}

#[test]
fn generated_instances_round_trip_through_enumerate() {
    let gen = roenum(&["gen", "--problem", "allbits", "--n", "3"]);
    assert!(gen.status.success());
    let inst = scratch("gen.txt", &stdout(&gen));
    let out = roenum(&["enumerate", "--instance", inst.to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    assert!(stdout(&out).trim_start().starts_with(['{', '[']));
}

#[test]
fn parallel_run_reports_pacing() {
    let inst = scratch("a6.txt", "allbits 6\n");
    let out = roenum(&["parallel", "--instance", inst.to_str().unwrap(), "--slaves", "2", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = stdout(&out);
    assert!(trace.starts_with("output,slave,solution,time,gap,stalled,queue_depths,remaining"));
    assert_eq!(trace.lines().count(), 65);
}

#[test]
fn verify_suite_passes() {
    let out = roenum(&["verify"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn failed_check_exits_one() {
    let inst = scratch("a2.txt", "allbits 2\n");
    let out = roenum(&[
        "uniformity",
        "--instance",
        inst.to_str().unwrap(),
        "--runs",
        "400",
        "--significance",
        "0.999",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_input_exits_two() {
    let garbled = scratch("bad.txt", "knapsack two\n");
    let out = roenum(&["enumerate", "--instance", garbled.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let inst = scratch("a3.txt", "allbits 3\n");
    let out = roenum(&["uniformity", "--instance", inst.to_str().unwrap(), "--runs", "10"]);
    assert_eq!(out.status.code(), Some(2), "too few runs");

    assert_eq!(roenum(&["enumerate"]).status.code(), Some(2));
    assert_eq!(roenum(&["enumerate", "--instance", "/nonexistent/x"]).status.code(), Some(2));
}
