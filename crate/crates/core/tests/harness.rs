use screenagent::backend::{read_transcript, write_transcript, BackendError, ScriptedBackend};
use screenagent::env::instantiate;
use screenagent::harness::{
    episode_paths, read_report, read_trace, replay_episode, run_episode, run_matrix, BackendSpec, EpisodeConfig,
    HarnessError, MatrixConfig, PlannerMode, TraceLine,
};
use screenagent::planner::EndingStatus;

fn record(dir: &std::path::Path, tasks: &[&str], seeds: Vec<u64>) -> MatrixConfig {
    let mut cfg =
        MatrixConfig::new(tasks.iter().map(|t| t.to_string()).collect(), seeds, BackendSpec::Scripted { faults: true });
    cfg.out = Some(dir.to_path_buf());
    run_matrix(&cfg).unwrap();
    cfg
}

#[test]
fn empty_matrix_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = MatrixConfig::new(Vec::new(), vec![1, 2], BackendSpec::Scripted { faults: false });
    cfg.out = Some(dir.path().to_path_buf());
    let report = run_matrix(&cfg).unwrap();
    assert!(report.tasks.is_empty());
    assert_eq!(std::fs::read_to_string(dir.path().join("report.json")).unwrap(), "{}\n");
}

#[test]
fn unknown_task_is_rejected() {
    let cfg = MatrixConfig::new(vec!["count-shape".into()], vec![1], BackendSpec::Scripted { faults: false });
    assert!(matches!(run_matrix(&cfg), Err(HarnessError::Env(_))));
}

#[test]
fn oracle_solves_easy_tasks_first_try() {
    let tasks = ["click-button", "click-widget", "click-checkboxes", "login-user"];
    let mut cfg = MatrixConfig::new(
        tasks.iter().map(|t| t.to_string()).collect(),
        (1000..1025).collect(),
        BackendSpec::Scripted { faults: false },
    );
    cfg.trials = 1;
    let report = run_matrix(&cfg).unwrap();
    for t in tasks {
        assert_eq!(report.tasks[t].completion_rate_by_t[&1], Some(1.0), "{t}");
    }
}

#[test]
fn wrong_first_click_recovers_on_trial_two() {
    let blueprint = instantiate("click-button", 3).unwrap();
    let fault = screenagent::backend::Fault { trial: 1, step: 0, wrong: None };
    let mut backend = ScriptedBackend::with_faults(blueprint, vec![fault]);
    let ep = run_episode(&EpisodeConfig::new("click-button", 3).with_trials(3), &mut backend).unwrap();
    assert_eq!(ep.result.trial_statuses, vec![EndingStatus::Failed, EndingStatus::Correct]);
    assert_eq!(ep.result.first_success_trial, Some(2));
    assert_eq!(ep.result.reflector_calls, 1);
    // The forced step in trial 2 needs no planner call.
    assert_eq!(ep.traces[1].planner_calls, 0);
}

#[test]
fn files_written_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    record(dir.path(), &["click-tab-2"], vec![5, 6]);
    let report = read_report(&dir.path().join("report.json")).unwrap();
    assert_eq!(report.tasks["click-tab-2"].seeds.len(), 2);

    let mut csv = csv::Reader::from_path(dir.path().join("report.csv")).unwrap();
    let headers = csv.headers().unwrap().clone();
    assert_eq!(&headers[0], "task");
    assert_eq!(csv.records().count(), 2);
    let mut rates = csv::Reader::from_path(dir.path().join("rates.csv")).unwrap();
    let trials: Vec<String> = rates.records().map(|r| r.unwrap()[1].to_string()).collect();
    assert_eq!(trials, ["1", "3", "5"]);

    let (trace, transcript) = episode_paths(&dir.path().join("episodes"), "click-tab-2", 5);
    let lines = read_trace(&trace).unwrap();
    assert!(matches!(lines.last(), Some(TraceLine::Episode { .. })));
    assert!(lines.iter().any(|l| matches!(l, TraceLine::TrialEnd { .. })));
    assert!(!read_transcript(&transcript).unwrap().is_empty());
    assert!(replay_episode(&trace, &transcript).is_ok());
}

#[test]
fn truncated_transcript_is_a_replay_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    record(dir.path(), &["search-engine"], vec![1003]);
    let (trace, transcript) = episode_paths(&dir.path().join("episodes"), "search-engine", 1003);
    let mut entries = read_transcript(&transcript).unwrap();
    let kept = entries.len() / 2;
    entries.truncate(kept);
    write_transcript(&transcript, &entries).unwrap();
    match replay_episode(&trace, &transcript) {
        Err(HarnessError::Backend(BackendError::ReplayMismatch { index, .. })) => assert_eq!(index, kept),
        other => panic!("expected a replay mismatch, got {other:?}"),
    }
}

#[test]
fn edited_prompt_is_a_replay_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    record(dir.path(), &["login-user"], vec![7]);
    let (trace, transcript) = episode_paths(&dir.path().join("episodes"), "login-user", 7);
    let mut entries = read_transcript(&transcript).unwrap();
    entries[1].prompt.push_str(" (edited)");
    write_transcript(&transcript, &entries).unwrap();
    match replay_episode(&trace, &transcript) {
        Err(HarnessError::Backend(BackendError::ReplayMismatch { index, .. })) => assert_eq!(index, 1),
        other => panic!("expected a replay mismatch, got {other:?}"),
    }
}

#[test]
fn replayed_matrix_matches_recording() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec");
    let mut cfg = record(&rec, &["use-autocomplete", "click-checkboxes"], (1000..1006).collect());
    cfg.backend = BackendSpec::Replay { dir: rec.join("episodes") };
    cfg.out = Some(dir.path().join("rep"));
    run_matrix(&cfg).unwrap();
    assert_eq!(
        std::fs::read(rec.join("report.json")).unwrap(),
        std::fs::read(dir.path().join("rep/report.json")).unwrap()
    );
}

#[test]
fn missing_transcript_marks_episode_errored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        MatrixConfig::new(vec!["click-button".into()], vec![1], BackendSpec::Replay { dir: dir.path().to_path_buf() });
    let report = run_matrix(&cfg).unwrap();
    assert!(report.any_errored());
    assert_eq!(report.tasks["click-button"].completion_rate_by_t[&1], None);
}

#[test]
fn iterative_mode_runs_through_the_harness() {
    let mut cfg =
        MatrixConfig::new(vec!["click-checkboxes".into()], (0..5).collect(), BackendSpec::Scripted { faults: false });
    cfg.mode = PlannerMode::Iterative;
    cfg.trials = 1;
    let report = run_matrix(&cfg).unwrap();
    let t = &report.tasks["click-checkboxes"];
    assert_eq!(t.mode, PlannerMode::Iterative);
    assert_eq!(t.completion_rate_by_t[&1], Some(1.0));
}
