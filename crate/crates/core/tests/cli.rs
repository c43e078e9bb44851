mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collab_ppm::event_model::{EventLog, Trace};
use collab_ppm::ingest::{parse_csv, write_csv, ColumnMapping};
use collab_ppm::predict::{Dataset, MODEL_VERSION};
use collab_ppm::simulate::{builtin_model, simulate, SimConfig};
use collab_ppm::tasks::{label, TaskRequest};
use collab_ppm::views::apply_view;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collab-ppm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Simulated healthcare training log.
    fn train_log(&self, cases: usize) -> PathBuf {
        let path = self.path("train.csv");
        let n = cases.to_string();
        ok(&[
            "simulate",
            "--model",
            "healthcare",
            "--cases",
            &n,
            "--seed",
            "42",
            "--out",
            p(&path),
        ]);
        path
    }
}

#[test]
fn help_and_version() {
    let out = ok(&["--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
    let out = ok(&["--version"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("collab-ppm "));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--model", "healthcare", "--cases", "many"])
            .status
            .code(),
        Some(2)
    );
    let ws = Workspace::new();
    let log = ws.train_log(3);
    let out = run(&["dataset", p(&log), "--task", "next-thing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("UnknownTask"));
    let out = run(&["dataset", p(&log), "--task", "remaining-time", "--scope", "participant"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MissingParticipant"));
}

#[test]
fn unknown_model_is_a_domain_error() {
    let out = run(&["simulate", "--model", "bank", "--cases", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("UnknownModel"));
}

#[test]
fn model_file_with_deadlock_is_rejected() {
    let ws = Workspace::new();
    let model = ws.path("stuck.collab");
    fs::write(
        &model,
        "collaboration stuck\nparticipant A\n  receive \"x\" from B\n  send \"y\" to B\nend\n\
         participant B\n  receive \"y\" from A\n  send \"x\" to A\nend\n",
    )
    .unwrap();
    let out = run(&["simulate", "--model", p(&model), "--cases", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ModelDeadlock"));
}

#[test]
fn simulate_from_model_file_matches_builtin() {
    let ws = Workspace::new();
    let file = common::manifest_dir().join("models/healthcare.collab");
    let a = ok(&["simulate", "--model", p(&file), "--cases", "4", "--seed", "1"]).stdout;
    let b = ok(&["simulate", "--model", "healthcare", "--cases", "4", "--seed", "1"]).stdout;
    assert_eq!(a, b);
    let xes = ws.path("h.xes");
    ok(&[
        "simulate",
        "--model",
        "healthcare",
        "--cases",
        "4",
        "--seed",
        "1",
        "--out",
        p(&xes),
    ]);
    assert!(fs::read_to_string(&xes).unwrap().starts_with("<?xml"));
}

#[test]
fn split_then_merge_reproduces_the_log() {
    let ws = Workspace::new();
    let log = ws.path("collab.xes");
    let parts = ws.path("parts");
    ok(&[
        "simulate",
        "--model",
        "healthcare",
        "--cases",
        "30",
        "--seed",
        "8",
        "--out",
        p(&log),
        "--split",
        p(&parts),
    ]);
    let mut inputs: Vec<PathBuf> = fs::read_dir(&parts).unwrap().map(|e| e.unwrap().path()).collect();
    inputs.sort();
    assert_eq!(inputs.len(), 3);
    let merged = ws.path("merged.xes");
    let mut args = vec!["merge"];
    args.extend(inputs.iter().map(|i| p(i)));
    args.extend(["--out", p(&merged)]);
    ok(&args);
    assert_eq!(fs::read(&merged).unwrap(), fs::read(&log).unwrap());
}

#[test]
fn view_with_unknown_participant() {
    let ws = Workspace::new();
    let log = ws.train_log(3);
    let out = run(&["view", p(&log), "--participant", "Pharmacy"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("UnknownParticipant"));
}

#[test]
fn view_writes_only_participant_events() {
    let ws = Workspace::new();
    let log = ws.train_log(5);
    let out = ok(&["view", p(&log), "--participant", "Laboratory", "--content", "messages"]);
    let viewed = parse_csv(&out.stdout, &ColumnMapping::default()).unwrap();
    assert!(viewed.events().all(|e| e.participant == "Laboratory" && e.is_message()));
    assert!(!viewed.is_empty());
}

#[test]
fn dataset_rows_match_enumeration() {
    let ws = Workspace::new();
    let log_path = ws.train_log(20);
    let out_path = ws.path("ds.json");
    ok(&[
        "dataset",
        p(&log_path),
        "--task",
        "next-message-send",
        "--participant",
        "Gynecologist",
        "--out",
        p(&out_path),
    ]);
    let ds: Dataset = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();

    let log = parse_csv(&fs::read(&log_path).unwrap(), &ColumnMapping::default()).unwrap();
    let task = TaskRequest {
        id: "next-message-send".into(),
        participant: Some("Gynecologist".into()),
        ..TaskRequest::default()
    }
    .resolve()
    .unwrap();
    let viewed = apply_view(&log, &task.view).unwrap();
    let expected: usize = viewed
        .traces()
        .iter()
        .map(|t| t.len() - (1..=t.len()).filter(|&k| label(&task, t, k).is_undefined()).count())
        .sum();
    assert_eq!(ds.len(), expected);
    assert_eq!(ds.provenance.task, task);
}

fn truncate_at(t: &Trace, activity: &str) -> Trace {
    let k = t.events.iter().position(|e| e.activity == activity).unwrap() + 1;
    Trace::new(t.case_id.clone(), t.events[..k].to_vec())
}

#[test]
fn predicts_next_send_for_running_cases() {
    let ws = Workspace::new();
    let train = ws.train_log(1000);
    let model = ws.path("model.json");
    ok(&["train", p(&train), "--task", "next-message-send", "--out", p(&model)]);

    // three running cases: after the blood sample arrived at the lab, right
    // after the disease info arrived, and after the results came back
    let running = simulate(&builtin_model("healthcare").unwrap(), &SimConfig::new(50, 77));
    let log = EventLog::new(vec![
        truncate_at(running.trace("case_44").unwrap(), "Receive blood sample"),
        truncate_at(running.trace("case_9").unwrap(), "Receive disease info"),
        truncate_at(running.trace("case_20").unwrap(), "Receive results"),
    ]);
    let incomplete = ws.path("running.csv");
    fs::write(&incomplete, write_csv(&log, &ColumnMapping::default())).unwrap();

    let out_path = ws.path("pred.csv");
    ok(&["predict", "--model", p(&model), p(&incomplete), "--out", p(&out_path)]);
    let text = fs::read_to_string(&out_path).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["case_id", "prediction", "confidence"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][..2], ["case_44", "Send results"]);
    assert!(rows[1][2].parse::<f64>().unwrap() >= 0.99);
    assert_eq!(rows[2][..2], ["case_9", "Send blood sample"]);
    assert_eq!(rows[3][..2], ["case_20", "Send treatment"]);

    // pure function of the inputs
    let again = ok(&["predict", "--model", p(&model), p(&incomplete)]).stdout;
    assert_eq!(again, text.as_bytes());
}

#[test]
fn predict_on_empty_log_writes_header() {
    let ws = Workspace::new();
    let model = ws.path("model.json");
    ok(&[
        "train",
        p(&ws.train_log(20)),
        "--task",
        "next-activity",
        "--out",
        p(&model),
    ]);
    let empty = ws.path("empty.csv");
    fs::write(&empty, write_csv(&EventLog::empty(), &ColumnMapping::default())).unwrap();
    let out = ok(&["predict", "--model", p(&model), p(&empty)]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "case_id,prediction,confidence\n"
    );
}

#[test]
fn prefix_without_events_in_view_gets_empty_row() {
    let ws = Workspace::new();
    let model = ws.path("model.json");
    ok(&[
        "train",
        p(&ws.train_log(20)),
        "--task",
        "next-message-participant-send",
        "--participant",
        "Laboratory",
        "--out",
        p(&model),
    ]);
    let running = simulate(&builtin_model("healthcare").unwrap(), &SimConfig::new(1, 3));
    let log = EventLog::new(vec![truncate_at(&running.traces()[0], "Send disease info")]);
    let incomplete = ws.path("running.csv");
    fs::write(&incomplete, write_csv(&log, &ColumnMapping::default())).unwrap();
    let out = ok(&["predict", "--model", p(&model), p(&incomplete)]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "case_id,prediction,confidence\ncase_1,,\n"
    );
}

#[test]
fn numeric_predictions_have_no_confidence() {
    let ws = Workspace::new();
    let train = ws.train_log(50);
    let model = ws.path("model.json");
    ok(&[
        "train",
        p(&train),
        "--task",
        "remaining-messages-process",
        "--out",
        p(&model),
    ]);
    let out = ok(&["predict", "--model", p(&model), p(&train)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 3);
    assert!(fields[1].parse::<f64>().is_ok());
    assert_eq!(fields[2], "");
}

#[test]
fn task_and_version_mismatch() {
    let ws = Workspace::new();
    let train = ws.train_log(20);
    let model = ws.path("model.json");
    ok(&["train", p(&train), "--task", "next-message-send", "--out", p(&model)]);

    let out = run(&["predict", "--model", p(&model), p(&train), "--task", "next-activity"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ModelTaskMismatch"));
    ok(&[
        "predict",
        "--model",
        p(&model),
        p(&train),
        "--task",
        "next-message-process-send",
    ]);

    let text = fs::read_to_string(&model).unwrap();
    let old = format!("\"version\": {MODEL_VERSION}");
    assert!(text.contains(&old));
    let future = ws.path("future.json");
    fs::write(&future, text.replacen(&old, "\"version\": 99", 1)).unwrap();
    let out = run(&["predict", "--model", p(&future), p(&train)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ModelVersionMismatch"));
}

#[test]
fn training_from_dataset_equals_training_from_log() {
    let ws = Workspace::new();
    let train = ws.train_log(40);
    let ds = ws.path("ds.json");
    let task = [
        "--task",
        "remaining-time-participant",
        "--participant",
        "Gynecologist",
        "--order",
        "2",
    ];
    let mut args = vec!["dataset", p(&train), "--out", p(&ds)];
    args.extend(task);
    ok(&args);
    let from_ds = ok(&["train", "--dataset", p(&ds)]).stdout;
    let mut args = vec!["train", p(&train)];
    args.extend(task);
    let from_log = ok(&args).stdout;
    assert_eq!(from_ds, from_log);
    assert_eq!(ok(&args).stdout, from_log);
}

#[test]
fn evaluate_writes_metrics() {
    let ws = Workspace::new();
    let train = ws.train_log(200);
    let model = ws.path("model.json");
    ok(&[
        "train",
        p(&train),
        "--task",
        "next-activity",
        "--participant",
        "Gynecologist",
        "--out",
        p(&model),
    ]);
    let test = ws.path("test.xes");
    ok(&[
        "simulate",
        "--model",
        "healthcare",
        "--cases",
        "50",
        "--seed",
        "43",
        "--out",
        p(&test),
    ]);
    let metrics = ws.path("metrics.csv");
    let out = ok(&["evaluate", "--model", p(&model), p(&test), "--out", p(&metrics)]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("accuracy"));
    let text = fs::read_to_string(&metrics).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,label,value,support"));
    for line in lines {
        let support = line.rsplit(',').next().unwrap();
        assert!(support.parse::<usize>().unwrap() > 0, "{line}");
    }
}
