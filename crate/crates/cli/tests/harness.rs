use std::process::Command;

use hdmn_cli::*;

const SMALL: &str = r#"
version = 1
variants = ["model3"]
seeds = [4]

[[scenario]]
name = "small"
horizon = 15

[[algorithm]]
kind = "ijgp-s"
i = 1
"#;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, None).unwrap()
}

fn report(c: &ExperimentConfig, workers: usize) -> Report {
    let out = run_cells(c, &cells(c), workers).unwrap();
    Report::new(&out, c.metrics())
}

#[test]
fn one_cell_gives_one_row_and_an_average() {
    let c = cfg(SMALL);
    let r = report(&c, 1);
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].status, Status::Ok);
    assert_eq!(r.average.goal_accuracy, r.rows[0].goal_accuracy);
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().last().unwrap().starts_with("Average"));
    let table = r.to_table(&[0.5]);
    assert!(table.lines().any(|l| l.starts_with("Average")));
}

#[test]
fn particle_grid_has_one_row_per_setting() {
    let text = SMALL.replace(
        "kind = \"ijgp-s\"\ni = 1",
        "kind = \"rbpf\"\ni = 1\nw = [1, 2]\nn = [100, 200, 500]",
    );
    let c = cfg(&text);
    let r = report(&c, 1);
    let labels: Vec<&str> = r.rows.iter().map(|r| r.algorithm.as_str()).collect();
    assert_eq!(
        labels,
        [
            "IJGP-RBPF(1,1,100)",
            "IJGP-RBPF(1,2,100)",
            "IJGP-RBPF(1,1,200)",
            "IJGP-RBPF(1,2,200)",
            "IJGP-RBPF(1,1,500)",
            "IJGP-RBPF(1,2,500)"
        ]
    );
    assert!(r.rows.iter().all(|r| r.status == Status::Ok && r.ess.is_some() && r.rejection_rate.is_some()));
}

#[test]
fn reports_are_byte_identical_across_runs_and_worker_counts() {
    let text = SMALL.replace("seeds = [4]", "seeds = [1, 2, 3]").replace(
        "i = 1\n",
        "i = 1\n\n[[algorithm]]\nkind = \"rbpf\"\ni = 1\nw = 1\nn = 40\n",
    );
    let c = cfg(&text);
    let a = report(&c, 1);
    let b = report(&c, 1);
    let p = report(&c, 3);
    assert_eq!(a.rows.len(), 6);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_json(), p.to_json());
    assert_eq!(a.to_csv(), p.to_csv());
    assert_eq!(Report::from_json(&a.to_json()).unwrap(), a);
}

#[test]
fn failing_cells_are_marked_and_the_rest_still_run() {
    let text = format!("{SMALL}\n[[scenario]]\nname = \"cramped\"\nrows = 1\ncols = 2\ngoals = 3\nhorizon = 5\n");
    let c = cfg(&text);
    let r = report(&c, 2);
    assert_eq!(r.rows.len(), 2);
    assert_eq!(r.rows[0].status, Status::Ok);
    assert_eq!(r.rows[1].status, Status::Failed);
    assert!(r.rows[1].error.is_some());
    assert_eq!(r.failed(), 1);
    assert!(r.to_table(&[0.0, 0.0]).contains("FAILED"));
}

#[test]
fn bad_configs_are_rejected() {
    for bad in [
        SMALL.replace("version = 1", "version = 2"),
        SMALL.replace("i = 1", "i = 0"),
        SMALL.replace("kind = \"ijgp-s\"\ni = 1", "kind = \"rbpf\"\ni = 1\nw = 0\nn = 0"),
        SMALL.replace("seeds = [4]", "seeds = []"),
        SMALL.replace("horizon = 15", "horizon = 15\ngraph_file = \"/nonexistent/g.txt\""),
        SMALL.replace("version = 1", "version = 1\nbogus = 3"),
    ] {
        assert!(ExperimentConfig::parse(&bad, None).is_err(), "{bad}");
    }
}

#[test]
fn algorithm_names_parse() {
    assert_eq!("exact".parse::<Algorithm>().unwrap(), Algorithm::Exact);
    assert_eq!("ijgp-s:2".parse::<Algorithm>().unwrap(), Algorithm::IjgpS { i: 2 });
    assert_eq!("rbpf:1,2,500".parse::<Algorithm>().unwrap(), Algorithm::Rbpf { i: 1, w: 2, n: 500 });
    for bad in ["ijgp-s", "ijgp-s:0", "rbpf:1,1", "rbpf:1,1,0", "bp:1"] {
        assert!(bad.parse::<Algorithm>().is_err(), "{bad}");
    }
}

#[test]
fn binary_simulates_filters_scores_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.toml");
    std::fs::write(&conf, SMALL).unwrap();
    let bin = env!("CARGO_BIN_EXE_hdmn");
    let run = |args: &[&str]| Command::new(bin).args(args).arg("--config").arg(&conf).output().unwrap();

    let out = dir.path().join("out");
    let o = run(&["simulate", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = out.join("small-4.csv");
    assert!(traj.exists());

    let o = run(&[
        "filter",
        "--trajectory",
        traj.to_str().unwrap(),
        "--variant",
        "model3",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let preds = Predictions::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(preds.goals.len(), 15);

    let o = run(&[
        "score",
        "--trajectory",
        traj.to_str().unwrap(),
        "--predictions",
        out.join("predictions.json").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let s: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();

    // the experiment scores the same cell identically
    let exp = dir.path().join("exp");
    let o = run(&["experiment", "--format", "json", "--out", exp.to_str().unwrap()]);
    assert!(o.status.success());
    let r = Report::from_json(&std::fs::read_to_string(exp.join("report.json")).unwrap()).unwrap();
    assert_eq!(r.rows[0].goal_accuracy, s["goal_accuracy"].as_f64());
    assert_eq!(r.rows[0].route_fp, s["route_fp"].as_f64());
    for f in ["report.csv", "report.txt", "timings.csv"] {
        assert!(exp.join(f).exists());
    }
    let again = run(&["experiment", "--format", "json"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), std::fs::read_to_string(exp.join("report.json")).unwrap());
}

#[test]
fn partial_failure_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.toml");
    let text = format!("{SMALL}\n[[scenario]]\nname = \"cramped\"\nrows = 1\ncols = 2\ngoals = 3\nhorizon = 5\n");
    std::fs::write(&conf, text).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hdmn")).arg("experiment").arg("--config").arg(&conf).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAILED"));
    let o = Command::new(env!("CARGO_BIN_EXE_hdmn")).arg("experiment").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn model_files_filter_with_evidence() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("hmm.hdmn");
    std::fs::write(
        &model,
        "hdmn/1
VARIABLES
discrete x a b
discrete y lo hi
CPDS
table prior x
  0.6 0.4
table prior y | x
  0.9 0.1 0.2 0.8
table transition x | x'
  0.7 0.3 0.3 0.7
table transition y | x
  0.9 0.1 0.2 0.8
DYNAMICS
observed y
",
    )
    .unwrap();
    let ev = dir.path().join("ev.csv");
    std::fs::write(&ev, "y\nhi\n1\n?\nlo\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hdmn"))
        .args(["filter", "--algorithm", "exact", "--format", "json", "--model"])
        .arg(&model)
        .arg("--evidence")
        .arg(&ev)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    // forward algorithm by hand for the first slice
    let p0 = [0.6 * 0.1, 0.4 * 0.8];
    let want = p0[0] / (p0[0] + p0[1]);
    let got = rows[0]["marginals"]["x"]["Discrete"][0].as_f64().unwrap();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn readme_config_is_valid() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").unwrap() + 8;
    let text = &readme[start..start + readme[start..].find("```").unwrap()];
    let c = cfg(text);
    c.validate().unwrap();
    // exact, two ijgp-s and four rbpf settings
    assert_eq!(c.grid().len(), 7);
    assert_eq!(c.metrics().len(), 6);
    assert_eq!(c.propagation.max_iters, 30);
}
