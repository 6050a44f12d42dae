//! End-to-end tests driving the built binary as a subprocess.

use std::io::Write;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_simref");
const CHAIN: &str = "ts 3\n0 1\n1 2\nend\n";
const CHAIN_RESULT: &str = "blocks 3\n0: 0\n1: 1\n2: 2\nrel\n1 0\n2 0\n2 1\nend\n";

fn run_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn simref");
    child.stdin.as_mut().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().expect("wait for simref")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn sim_reads_stdin_and_writes_stdout() {
    let out = run_with_stdin(&["sim"], CHAIN);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), CHAIN_RESULT);
}

#[test]
fn sim_works_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("chain.txt");
    let output = dir.path().join("result.txt");
    std::fs::write(&input, CHAIN).unwrap();
    let out = run_with_stdin(
        &[
            "sim",
            "--input",
            input.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&output).unwrap(), CHAIN_RESULT);
}

#[test]
fn malformed_input_exits_one_with_line_number() {
    let out = run_with_stdin(&["sim"], "ts 2\n0 7\nend\n");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("line 2:"), "{}", stderr_of(&out));
    assert_eq!(stdout_of(&out), "");
}

#[test]
fn missing_input_file_exits_one() {
    let out = run_with_stdin(&["sim", "--input", "/no/such/file"], "");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_confirms_the_chain() {
    let out = run_with_stdin(&["verify", "--checks", "full"], CHAIN);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "ok\n");
}

#[test]
fn verify_rejects_inputs_over_the_cap() {
    let out = run_with_stdin(&["verify"], "ts 65\nend\n");
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("oracle cap exceeded"),
        "{}",
        stderr_of(&out)
    );
    let raised = run_with_stdin(&["verify", "--oracle-cap", "70"], "ts 65\nend\n");
    assert_eq!(raised.status.code(), Some(0));
}

#[test]
fn quotient_collapses_equivalent_sources() {
    let out = run_with_stdin(&["quotient"], "ts 3\n0 2\n1 2\nend\n");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout_of(&out),
        "ts 2\n0 1\nend\n# state 0 = {0 1}\n# state 1 = {2}\n"
    );
}

#[test]
fn stats_reports_chain_counters() {
    let out = run_with_stdin(&["stats"], CHAIN);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("iterations 2\n"), "{text}");
    assert!(text.contains("final_blocks 3\n"), "{text}");
}

#[test]
fn gen_is_deterministic_and_feeds_sim() {
    let args = ["gen", "--seed", "9", "--states", "20", "--arcs", "50"];
    let first = run_with_stdin(&args, "");
    let second = run_with_stdin(&args, "");
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let sim = run_with_stdin(&["sim"], &stdout_of(&first));
    assert_eq!(sim.status.code(), Some(0), "{}", stderr_of(&sim));
}

#[test]
fn gen_covers_every_preorder_mode() {
    for mode in ["qxq", "labels", "explicit"] {
        let out = run_with_stdin(
            &["gen", "--seed", "4", "--states", "10", "--arcs", "18", "--preorder", mode],
            "",
        );
        assert_eq!(out.status.code(), Some(0), "mode {mode}");
        let verify = run_with_stdin(&["verify"], &stdout_of(&out));
        assert_eq!(verify.status.code(), Some(0), "mode {mode}: {}", stderr_of(&verify));
    }
}

#[test]
fn gen_rejects_impossible_sizes() {
    let out = run_with_stdin(&["gen", "--seed", "1", "--states", "2", "--arcs", "5"], "");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sim_output_is_byte_identical_across_runs() {
    let gen = run_with_stdin(
        &["gen", "--seed", "31", "--states", "15", "--arcs", "40", "--preorder", "explicit"],
        "",
    );
    let doc = stdout_of(&gen);
    let a = run_with_stdin(&["sim", "--checks", "full"], &doc);
    let b = run_with_stdin(&["sim", "--checks", "full"], &doc);
    assert_eq!(a.status.code(), Some(0), "{}", stderr_of(&a));
    assert_eq!(a.stdout, b.stdout);
}
