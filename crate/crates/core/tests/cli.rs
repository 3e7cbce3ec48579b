use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ppt_core::chart::RankDiagram;
use ppt_core::survey::{SurveyReport, SurveyTable};

fn ppt() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ppt"));
    c.env_remove("PPT_SEED");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    ppt().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn search_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["search", "--dims", "3x3", "--ranks", "4,4", "--seed", "7", "--out", "s.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ranks=(4,4) residual="));
    assert!(dir.path().join("s.json").exists());

    let o = run(&["search", "--dims", "3x3", "--ranks", "0,4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["search", "--dims", "3y3", "--ranks", "4,4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["search", "--dims", "3x3"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = run(
        &["search", "--dims", "3x3", "--ranks", "4,4", "--restarts", "1", "--max-iter", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_system_search_is_separable() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["search", "--dims", "2x2", "--ranks", "3,4", "--out", "s.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["classify", "s.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["verdict"].as_str().unwrap().starts_with("separable"));
}

#[test]
fn seed_from_environment_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["search", "--dims", "3x3", "--ranks", "5,5", "--out"];
    let a = ppt()
        .args(args)
        .arg("env.json")
        .env("PPT_SEED", "31")
        .current_dir(dir.path())
        .output()
        .unwrap();
    let b = run(&[&args[..], &["flag.json", "--seed", "31"]].concat(), dir.path());
    let c = run(&[&args[..], &["other.json", "--seed", "32"]].concat(), dir.path());
    assert_eq!(a.status.code(), Some(0));
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    assert_eq!(read("env.json"), read("flag.json"));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(c.status.code(), Some(0));
    assert_ne!(read("env.json"), read("other.json"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# search settings\ndims = 3x3\nranks = 4,4\nrestarts = 1\nmax_iter = 2\n",
    )
    .unwrap();
    let o = run(&["--config", "run.cfg", "search"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["search", "--config", "run.cfg", "--max-iter", "200", "--restarts", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0));

    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    let o = run(&["--config", "bad.cfg", "search", "--dims", "2x2", "--ranks", "4,4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(dir.path().join("junk.cfg"), "no equals sign\n").unwrap();
    let o = run(&["--config", "junk.cfg", "search", "--dims", "2x2", "--ranks", "4,4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn classify_fixture_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("3x3_rank44.json");
    let o = run(&["classify", f.to_str().unwrap(), "--seed", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["dimF"], 1);
    assert_eq!(v["local_ranks"], serde_json::json!([3, 3]));
    assert_eq!(v["pv_im"]["total"], 0);
    assert_eq!(v["pv_ker"], serde_json::json!({"total": 6, "independent": 5}));

    let mixed: Vec<Vec<[f64; 2]>> = (0..9)
        .map(|i| (0..9).map(|j| [if i == j { 1.0 / 9.0 } else { 0.0 }, 0.0]).collect())
        .collect();
    std::fs::write(
        dir.path().join("mixed.json"),
        serde_json::json!({"dims": [3, 3], "matrix": mixed}).to_string(),
    )
    .unwrap();
    let o = run(&["classify", "mixed.json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ranks"], serde_json::json!([9, 9]));
    assert_eq!(v["dimF"], 81);

    let s = 0.5f64.sqrt();
    let psi = [s, 0.0, 0.0, s];
    let bell: Vec<Vec<[f64; 2]>> = (0..4)
        .map(|i| (0..4).map(|j| [psi[i] * psi[j], 0.0]).collect())
        .collect();
    std::fs::write(
        dir.path().join("bell.json"),
        serde_json::json!({"dims": [2, 2], "matrix": bell}).to_string(),
    )
    .unwrap();
    let o = run(&["classify", "bell.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not PPT"));

    std::fs::write(dir.path().join("bad.json"), "{\"dims\": [2, 2], \"matrix\": [[[1, 0]]]}").unwrap();
    assert_eq!(run(&["classify", "bad.json"], dir.path()).status.code(), Some(1));
    std::fs::write(dir.path().join("nonsense.json"), "not json").unwrap();
    assert_eq!(run(&["classify", "nonsense.json"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["classify", "missing.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn scan_writes_outputs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scan", "--dims", "1x1", "--out", "one"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "ranks,bound,dimF,local_ranks,pv_im,pv_ker,verdict");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("\"(1,1)\",1,1,\"(1,1)\",1/1,0,"));

    let args = ["scan", "--dims", "2x2", "--restarts", "3", "--seed", "5", "--out", "two", "--jobs", "2"];
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let journal = std::fs::read_to_string(dir.path().join("two.journal.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), 10);
    let first = std::fs::read_to_string(dir.path().join("two.json")).unwrap();
    let report: SurveyReport = serde_json::from_str(&first).unwrap();
    assert_eq!(report.targets.len(), 10);
    let csv_table =
        SurveyTable::read_csv(report.dims, std::fs::File::open(dir.path().join("two.csv")).unwrap())
            .unwrap();
    assert_eq!(csv_table, report.table);

    // Drop the last journal line and tear the one before it.
    let mut kept: Vec<&str> = journal.lines().collect();
    kept.pop();
    let torn = &kept.pop().unwrap()[..20];
    let text = format!("{}\n{}", kept.join("\n"), torn);
    std::fs::write(dir.path().join("two.journal.jsonl"), text).unwrap();
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resuming: 8 targets"));
    let again: SurveyReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("two.json")).unwrap())
            .unwrap();
    assert_eq!(again, report);

    let o = run(&["scan", "--dims", "2x2", "--restarts", "4", "--seed", "5", "--out", "two"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn chart_outputs_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.json");
    std::fs::write(
        &table,
        serde_json::json!({"dims": [3, 3], "rows": [
            {"ranks": [4, 4], "bound": -49, "dimF": 1, "local_ranks": [3, 3], "pv_im": {"total": 0, "independent": 0}, "pv_ker": {"total": 6, "independent": 5}, "verdict": "entangled_by_pair_deficit"},
            {"ranks": [6, 5], "bound": -20, "dimF": 1, "local_ranks": [3, 3], "pv_im": {"total": "inf", "independent": 6}, "pv_ker": {"total": 0, "independent": 0}, "verdict": "entangled_by_pair_deficit"},
            {"ranks": [8, 8], "bound": 47, "dimF": 47, "local_ranks": [3, 3], "pv_im": {"total": "inf", "independent": 8}, "pv_ker": {"total": 0, "independent": 0}, "verdict": "inconclusive_out_of_range"},
            {"ranks": [3, 3], "bound": -63, "dimF": 3, "local_ranks": [3, 3], "pv_im": {"total": 3, "independent": 3}, "pv_ker": {"total": "inf", "independent": 6}, "verdict": "separable_with_decomposition"}
        ]})
        .to_string(),
    )
    .unwrap();
    let o = run(&["chart", "t.json", "--out", "c.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let txt = std::fs::read_to_string(dir.path().join("c.txt")).unwrap();
    let golden = std::fs::read_to_string(fixture("chart_3x3.txt")).unwrap();
    assert_eq!(txt, golden);

    let o = run(&["chart", "t.json", "--out", "c.svg", "--dims", "3x3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("c.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("version=\"1.1\""));
    assert!(svg.contains("id=\"conjecture\""));
    assert_eq!(svg.matches("<circle").count(), 5);

    assert_eq!(run(&["chart", "t.json", "--out", "c.png"], dir.path()).status.code(), Some(1));
    assert_eq!(
        run(&["chart", "t.json", "--out", "c.txt", "--dims", "2x4"], dir.path()).status.code(),
        Some(1)
    );
    let bad = std::fs::read_to_string(&table).unwrap().replace("\"dims\":[3,3]", "\"dims\":[2,2]");
    std::fs::write(dir.path().join("bad.json"), bad).unwrap();
    assert_eq!(run(&["chart", "bad.json", "--out", "c.txt"], dir.path()).status.code(), Some(1));

    let empty = SurveyTable {
        dims: ppt_core::BipartiteDims::new(2, 4).unwrap(),
        rows: vec![],
    };
    let dia = RankDiagram::from_table(&empty);
    assert!(!dia.render_svg().contains("id=\"conjecture\""));
}

#[test]
fn construct_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["construct", "separable", "--dims", "3x3", "--k", "3", "--seed", "2", "--out", "sep.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ranks=(3,3)"));
    let o = run(&["classify", "sep.json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["dimF"], 3);

    let o = run(
        &["construct", "hlvc", "--levels", "1", "--seed", "3", "--mixing", "0.4", "--out", "h.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("ranks=(5,5) local_ranks=(4,4) dims=4x4"));
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("h.json")).unwrap()).unwrap();
    let recipe = &saved["meta"]["recipe"];
    assert_eq!(recipe["kind"], "hlvc_saturating");
    std::fs::write(dir.path().join("recipe.json"), recipe.to_string()).unwrap();
    let o = run(&["construct", "--recipe", "recipe.json", "--out", "h2.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("h.json")).unwrap(),
        std::fs::read_to_string(dir.path().join("h2.json")).unwrap()
    );

    let o = run(&["construct", "separable", "--out", "x.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(
        &["construct", "hlvc", "--mixing", "1.5", "--out", "x.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}
