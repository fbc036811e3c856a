//! CLI side of the error-branch acceptance gate: the exit-status contract
//! on three documented invocations.

use std::fs;
use std::process::Command;

fn run(args: &[&str], dir: &std::path::Path) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_qfock"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
        .status
        .code()
}

#[test]
fn criterion_8_cli_exit_status_contract() {
    let dir = std::env::temp_dir().join(format!("qfock-acceptance-cli-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();

    let cases = [
        (
            "trivial verify passes",
            vec!["verify", "--q", "1", "--u", "0", "--dim", "16"],
            0,
        ),
        (
            "deformed verify runs checks and some fail",
            vec!["verify", "--q", "1.2", "--u", "0.7", "--dim", "16"],
            1,
        ),
        (
            "unsolvable parameters error before checks",
            vec!["verify", "--q", "2", "--u", "0", "--dim", "16"],
            2,
        ),
    ];

    let mut ok = true;
    for (name, args, want) in &cases {
        let got = run(args, &dir);
        let pass = got == Some(*want);
        println!(
            "acceptance 8 cli exit status ({name}): got {got:?} want {want} -> {}",
            if pass { "PASS" } else { "FAIL" }
        );
        ok &= pass;
    }
    println!(
        "acceptance criterion 8 (error-branch contract, CLI side): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "exit-status contract violated");
}
