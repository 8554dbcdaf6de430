use std::path::Path;
use std::process::Command;

fn cutnmf(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_cutnmf"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn synthetic_round_trip_through_every_verb() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    cutnmf(&[
        "gen-synthetic", "--users", "30", "--items", "40", "--rank", "3", "--observed", "500",
        "--seed", "2", "--out", data.to_str().unwrap(),
    ]);
    let ratings = read(&data.join("ratings.csv"));
    assert_eq!(ratings.lines().count(), 500);
    assert_eq!(read(&data.join("ground_truth.csv")).lines().count(), 30 * 40);

    let config = root.join("sweep.cfg");
    std::fs::write(
        &config,
        format!(
            "# small sweep\nformat = generic_csv\ndataset = {}\nk = 2, 4\njmax = 500\ntrace-every = 5\nseed = 3\n",
            data.join("ratings.csv").display()
        ),
    )
    .unwrap();

    let conv = root.join("conv");
    // flags override the file
    cutnmf(&["converge", "--config", config.to_str().unwrap(), "--jmax", "30", "--out", conv.to_str().unwrap()]);
    let trace = read(&conv.join("trace_cutnmf_k4.csv"));
    assert!(trace.starts_with("iteration,mfe,mie,mae,cmae,zero_one,precision,recall\n"));
    assert!(trace.lines().count() <= 31);
    assert!(conv.join("timing_cutnmf_k2.csv").is_file());
    let results = read(&conv.join("results.csv"));
    assert_eq!(results.lines().count(), 3);
    assert!(results.lines().skip(1).all(|l| l.starts_with("cutnmf,generic_csv,omega,")));

    let eval = root.join("eval");
    cutnmf(&[
        "evaluate", "--config", config.to_str().unwrap(), "--jmax", "20", "--algo",
        "cutnmf,knn,nmf,rnmf", "--k", "3", "--out", eval.to_str().unwrap(),
    ]);
    let results = read(&eval.join("results.csv"));
    // omega80 and theta20 rows for each of four algorithms
    assert_eq!(results.lines().count(), 9);
    assert!(results.contains("knn,generic_csv,theta20,,"));
    assert_eq!(read(&eval.join("scatter.csv")).lines().count(), 5);

    let again = root.join("again");
    cutnmf(&[
        "evaluate", "--config", config.to_str().unwrap(), "--jmax", "20", "--algo",
        "cutnmf,knn,nmf,rnmf", "--k", "3", "--out", again.to_str().unwrap(),
    ]);
    assert_eq!(results, read(&again.join("results.csv")));
    assert_eq!(read(&eval.join("trace_cutnmf_k3.csv")), read(&again.join("trace_cutnmf_k3.csv")));

    let report = root.join("report");
    cutnmf(&["report", eval.join("results.csv").to_str().unwrap(), "--out", report.to_str().unwrap()]);
    let summary = read(&report.join("summary.csv"));
    assert_eq!(summary.lines().count(), 1 + 4 + 2);
    assert_eq!(summary.matches("quoted,pnmf").count(), 2);
}

#[test]
fn bad_settings_fail_cleanly() {
    for args in [
        vec!["converge", "--format", "synthetic", "--users", "10"],
        vec!["converge", "--split", "0.8", "--format", "synthetic", "--users", "5", "--items", "5", "--rank", "1", "--observed", "10"],
        vec!["report", "/nonexistent/results.csv"],
        vec!["converge", "--dataset", "/nonexistent/u.data"],
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_cutnmf")).args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}
