use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::mpsc;
use std::time::Duration;

use screenagent::action::{ActionCommand, Key};
use screenagent::backend::prompt::{
    build_iterative_prompt, build_plan_prompt, build_reflect_prompt, build_summarize_prompt, PromptError,
};
use screenagent::backend::{
    BackendError, CompletionBackend, FixedBackend, HttpBackend, HttpConfig, PromptBundle, PromptKind, ScriptedBackend,
};
use screenagent::compact::CompactScreen;
use screenagent::env::instantiate;
use screenagent::harness::{run_episode, EpisodeConfig};
use screenagent::planner::{EndingStatus, StepRecord, TrialTrace};
use screenagent::reflection::{parse_reflection, reflect, ReflectError, ReflectionParseError};

fn screen() -> CompactScreen {
    CompactScreen::parse(
        "<label text=\"Username\" position=top-left>\n\
         <input id=4 placeholder=\"username\" position=top-center>\n\
         <button id=7 text=\"Login\" position=middle-center>",
    )
    .unwrap()
}

fn step(index: usize, action: ActionCommand, summary: &str) -> StepRecord {
    StepRecord { index, screen: screen(), raw_snapshot: String::new(), action, summary: summary.to_string() }
}

fn enter_alice() -> ActionCommand {
    ActionCommand::Type { id: 4, text: "alice".into() }
}

/// Compares against `tests/golden/{name}.txt`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, text: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, text).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(text, want, "{name} drifted from its golden file");
}

#[test]
fn golden_prompts() {
    let goal = "Log in with username alice and password x1y2.";
    let plan = build_plan_prompt(goal, &screen(), &[], 8000).unwrap();
    golden("plan", &plan.text);
    let history = ["Entered the username alice into the username field".to_string()];
    golden("plan_history", &build_plan_prompt(goal, &screen(), &history, 8000).unwrap().text);
    golden("iterative", &build_iterative_prompt(goal, &[(screen(), enter_alice())], &screen(), 8000).unwrap().text);
    golden("summarize", &build_summarize_prompt(&screen(), &enter_alice(), 8000).text);
    let steps = [
        step(0, enter_alice(), "Entered the username alice"),
        step(1, ActionCommand::Click { id: 7 }, "Pressed login"),
    ];
    golden("reflect", &build_reflect_prompt("login-user", goal, &steps, EndingStatus::Failed, 8000).text);

    // Same inputs, same bytes.
    assert_eq!(plan, build_plan_prompt(goal, &screen(), &[], 8000).unwrap());
}

#[test]
fn plan_prompt_layout() {
    let p = build_plan_prompt("Click Login.", &screen(), &[], 8000).unwrap();
    assert_eq!(p.kind, PromptKind::Plan);
    let prefix = p.text.find("You can generate a series of atomic actions").unwrap();
    let at_screen = p.text.find("<screen>").unwrap();
    let suffix = p.text.find("Now, you need to plan actions that are executable on and only on this screen").unwrap();
    assert!(prefix < at_screen && at_screen < suffix);
    assert!(!p.text.contains("You have already done"));

    let summaries: Vec<String> = (1..=3).map(|i| format!("summary number {i}")).collect();
    let p = build_plan_prompt("Click Login.", &screen(), &summaries, 8000).unwrap();
    assert!(summaries.iter().all(|s| p.text.contains(s.as_str())));
    assert_eq!(p.text.matches("<screen>").count(), 1);

    assert!(matches!(build_plan_prompt("Click Login.", &screen(), &[], 20), Err(PromptError::OverBudget { .. })));
}

#[test]
fn reflect_prompt_status_sentences() {
    let steps = [step(0, enter_alice(), "typed")];
    let failed = build_reflect_prompt("login-user", "goal", &steps, EndingStatus::Failed, 8000);
    assert!(failed.text.contains("your actions did not complete the goal"));
    let nochange = build_reflect_prompt("login-user", "goal", &steps, EndingStatus::NoChange, 8000);
    assert!(nochange.text.contains("did not cause anything to change"));
    assert!(failed.text.contains("For action index=A, you should B."));
}

#[test]
fn over_budget_reflection_keeps_one_screen() {
    let steps: Vec<StepRecord> = (0..12).map(|i| step(i, ActionCommand::Click { id: 7 }, "clicked")).collect();
    let full = build_reflect_prompt("login-user", "goal", &steps, EndingStatus::Failed, 100_000);
    assert_eq!(full.text.matches("<screen>").count(), 12);
    let budget = full.text.len() / 8;
    let tight = build_reflect_prompt("login-user", "goal", &steps, EndingStatus::Failed, budget);
    assert_eq!(tight.text.matches("<screen>").count(), 1);
    assert_eq!(tight.text.lines().filter(|l| l.starts_with("Your index=")).count(), 12);
}

#[test]
fn reflection_reply_parsing() {
    assert_eq!(
        parse_reflection("For action index=0, you should click id=4.", 3).unwrap(),
        (0, ActionCommand::Click { id: 4 })
    );
    assert!(matches!(parse_reflection("You should try harder.", 3), Err(ReflectionParseError::Unrecognized)));
    assert!(matches!(
        parse_reflection("For action index=5, you should click id=4.", 3),
        Err(ReflectionParseError::IndexOutOfRange { index: 5, len: 3 })
    ));
}

#[test]
fn reflect_builds_entry_from_trace() {
    let trace = TrialTrace {
        trial_index: 1,
        steps: vec![step(0, ActionCommand::Click { id: 2 }, "a"), step(1, ActionCommand::Click { id: 7 }, "b")],
        status: EndingStatus::Failed,
        planner_calls: 1,
        reflector_calls: 0,
        summary_calls: 2,
        detail: None,
    };
    let mut backend = FixedBackend::new(["For action index=0, you should click id=4."]);
    let (j, entry) = reflect(&mut backend, "login-user", "goal", &trace, 8000).unwrap();
    assert_eq!(j, 0);
    assert_eq!((entry.wrong, entry.suggested), (ActionCommand::Click { id: 2 }, ActionCommand::Click { id: 4 }));

    let mut same = FixedBackend::new(["For action index=1, you should click id=7."]);
    let err = reflect(&mut same, "login-user", "goal", &trace, 8000).unwrap_err();
    assert!(matches!(err, ReflectError::Parse(ReflectionParseError::SameAction(_))));
}

#[test]
fn scripted_reflector_finds_the_injected_fault() {
    for seed in 0..10 {
        let blueprint = instantiate("login-user", seed).unwrap();
        // Step 2 is the login click; a wrong click there cannot be repaired in-trial.
        let fault = screenagent::backend::Fault { trial: 1, step: 2, wrong: None };
        let mut backend = ScriptedBackend::with_faults(blueprint, vec![fault]);
        let ep = run_episode(&EpisodeConfig::new("login-user", seed).with_trials(2), &mut backend).unwrap();
        let st = &ep.result.trial_statuses;
        assert!(
            st.len() == 2 && st[0] != EndingStatus::Correct && st[1] == EndingStatus::Correct,
            "seed {seed}: {st:?}"
        );
        let wrong = &ep.traces[0].steps[2].action;
        assert_eq!(ep.memory.entry(2).map(|e| &e.wrong), Some(wrong));
    }
}

#[test]
fn scripted_fault_fires_only_in_trial_one() {
    let blueprint = instantiate("click-button", 5).unwrap();
    let wrong = ActionCommand::Click { id: 9 };
    let fault = screenagent::backend::Fault { trial: 1, step: 1, wrong: Some(wrong.clone()) };
    let mut backend = ScriptedBackend::with_faults(blueprint.clone(), vec![fault]);
    let plan = |b: &mut ScriptedBackend, trial: usize| {
        b.begin_trial(trial);
        let history = vec!["done".to_string()];
        let screen = screenagent::compact::compact(&blueprint.tree, &Default::default());
        b.complete(&build_plan_prompt(&blueprint.goal, &screen, &history, 8000).unwrap()).unwrap()
    };
    assert_eq!(plan(&mut backend, 1), wrong.to_string());
    assert_ne!(plan(&mut backend, 1), wrong.to_string());
    assert_ne!(plan(&mut backend, 2), wrong.to_string());
}

#[test]
fn arrow_keys_in_summaries() {
    let inst = instantiate("use-autocomplete", 1).unwrap();
    let mut backend = ScriptedBackend::new(inst.clone());
    let screen = screenagent::compact::compact(&inst.tree, &Default::default());
    let action = ActionCommand::KeyPress { key: Key::ArrowDown, count: 2 };
    let reply = backend.complete(&build_summarize_prompt(&screen, &action, 8000)).unwrap();
    assert_eq!(reply, "Moved the list highlight down 2 times");
}

struct Seen {
    auth: Option<String>,
    body: serde_json::Value,
}

/// Serves one canned `(status, body)` per connection and reports each request.
fn mock_server(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/complete", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut auth) = (0usize, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => len = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let _ = tx.send(Seen { auth, body: serde_json::from_slice(&buf).unwrap_or_default() });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn prompt() -> PromptBundle {
    build_summarize_prompt(&screen(), &enter_alice(), 8000)
}

fn fast(url: String) -> HttpConfig {
    let mut cfg = HttpConfig::new(url);
    cfg.backoff = Duration::from_millis(1);
    cfg.timeout = Duration::from_secs(5);
    cfg
}

#[test]
fn http_sends_prompt_and_reads_text() {
    let (url, seen) = mock_server(vec![(200, r#"{"text":"click id=7"}"#.into())]);
    let mut cfg = fast(url);
    cfg.token = Some("sekrit".into());
    let reply = HttpBackend::new(cfg).complete(&prompt()).unwrap();
    assert_eq!(reply, "click id=7");
    let req = seen.recv().unwrap();
    assert_eq!(req.auth.as_deref(), Some("Bearer sekrit"));
    assert_eq!(req.body["prompt"], prompt().text);
    assert_eq!(req.body["temperature"], 0.0);
    assert_eq!(req.body["max_output_tokens"], 512);
}

#[test]
fn http_retries_then_succeeds() {
    let (url, seen) = mock_server(vec![(500, "{}".into()), (503, "{}".into()), (200, r#"{"text":"ok"}"#.into())]);
    assert_eq!(HttpBackend::new(fast(url)).complete(&prompt()).unwrap(), "ok");
    assert_eq!(seen.iter().take(3).count(), 3);
}

#[test]
fn http_gives_up_after_retries() {
    let (url, _seen) = mock_server(vec![(500, "{}".into()), (500, "{}".into()), (500, "{}".into())]);
    let err = HttpBackend::new(fast(url)).complete(&prompt()).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)));
}

#[test]
fn http_unreachable_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut cfg = fast(format!("http://127.0.0.1:{port}/complete"));
    cfg.retries = 0;
    assert!(matches!(HttpBackend::new(cfg).complete(&prompt()), Err(BackendError::Transport(_))));
}
