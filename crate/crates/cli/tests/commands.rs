mod common;

use std::net::TcpListener;

use breadthcloud::{AssignmentTable, ConceptVocabulary};
use common::{latest_run, run, run_ok, stderr, study_dir};

fn table(dir: &std::path::Path, condition: &str) -> AssignmentTable {
    AssignmentTable::load(&latest_run(dir).join(format!("tables/{condition}.csv"))).unwrap()
}

#[test]
fn elicit_writes_twenty_concepts() {
    let dir = study_dir();
    let out = run_ok(dir.path(), &["elicit", "--condition", "insta", "--n", "20"]);
    assert!(out.contains("insta: 20 concepts"), "{out}");
    let vocab = ConceptVocabulary::load(&latest_run(dir.path()).join("vocab/insta.json")).unwrap();
    assert_eq!(vocab.len(), 20);
    assert_eq!(vocab.concepts()[0].text(), "Small and compact");
}

#[test]
fn zero_topics_fails_before_any_network_call() {
    let dir = study_dir();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let endpoint = format!("http://{}/v1", listener.local_addr().unwrap());
    std::fs::write(
        dir.path().join("live.toml"),
        format!("corpus_root = \"corpus.jsonl\"\ncorpus_format = \"line-delimited-records\"\nbackend = \"live\"\nendpoint = \"{endpoint}\"\n"),
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "--config",
            "live.toml",
            "elicit",
            "--condition",
            "insta",
            "--n",
            "0",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(
        listener.accept().is_err(),
        "a connection reached the endpoint"
    );
}

#[test]
fn unreachable_endpoint_exits_with_gateway_status() {
    let dir = study_dir();
    std::fs::write(
        dir.path().join("live.toml"),
        "corpus_root = \"corpus.jsonl\"\ncorpus_format = \"line-delimited-records\"\nbackend = \"live\"\nendpoint = \"http://127.0.0.1:1/v1\"\ntimeout_secs = 2\n",
    )
    .unwrap();
    let out = run(
        dir.path(),
        &["--config", "live.toml", "elicit", "--condition", "insta"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn map_without_vocabulary_names_elicit() {
    let dir = study_dir();
    let out = run(dir.path(), &["map", "--condition", "insta"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("breadthcloud elicit --condition insta"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn full_insta_map_has_31_rows() {
    let dir = study_dir();
    run_ok(dir.path(), &["elicit", "--condition", "insta"]);
    run_ok(dir.path(), &["map", "--condition", "insta"]);
    let t = table(dir.path(), "insta");
    assert_eq!(t.rows().len(), 31);
    assert!(t.is_complete());
}

#[test]
fn soft_mode_records_tau() {
    let dir = study_dir();
    run_ok(dir.path(), &["elicit", "--condition", "logitech"]);
    run_ok(
        dir.path(),
        &[
            "map",
            "--condition",
            "logitech",
            "--tau",
            "0.8",
            "--mode",
            "soft",
        ],
    );
    let meta =
        std::fs::read_to_string(latest_run(dir.path()).join("tables/logitech.meta.json")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(meta["tau"], 0.8);
    assert_eq!(meta["mode"], "soft");
    assert_eq!(table(dir.path(), "logitech").tau, 0.8);
}

#[test]
fn invalid_tau_is_a_validation_error() {
    let dir = study_dir();
    run_ok(dir.path(), &["elicit", "--condition", "insta"]);
    let out = run(dir.path(), &["map", "--condition", "insta", "--tau", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pins_survive_reelicitation() {
    let dir = study_dir();
    run_ok(dir.path(), &["elicit", "--condition", "insta"]);
    run_ok(
        dir.path(),
        &[
            "seed",
            "--condition",
            "insta",
            "--phrase",
            "Battery life",
            "--pin",
        ],
    );
    run_ok(
        dir.path(),
        &["pin", "--condition", "insta", "--concept", "Odd angle"],
    );
    let out = run_ok(dir.path(), &["elicit", "--condition", "insta"]);
    assert!(out.contains("kept 2 pinned"), "{out}");
    let vocab = ConceptVocabulary::load(&latest_run(dir.path()).join("vocab/insta.json")).unwrap();
    assert_eq!(vocab.len(), 20);
    let pinned: Vec<&str> = vocab
        .concepts()
        .iter()
        .filter(|c| c.pinned)
        .map(|c| c.key())
        .collect();
    assert_eq!(pinned, ["odd angle", "battery life"]);
}

#[test]
fn cloud_is_byte_identical_across_runs() {
    let dir = study_dir();
    run_ok(dir.path(), &["pipeline"]);
    let path = latest_run(dir.path()).join("clouds/insta.svg");
    let first = std::fs::read(&path).unwrap();
    run_ok(
        dir.path(),
        &[
            "cloud",
            "--condition",
            "insta",
            "--scale",
            "linear",
            "--seed",
            "7",
        ],
    );
    let second = std::fs::read(&path).unwrap();
    run_ok(
        dir.path(),
        &[
            "cloud",
            "--condition",
            "insta",
            "--scale",
            "linear",
            "--seed",
            "7",
        ],
    );
    assert_eq!(first, second);
    assert_eq!(second, std::fs::read(&path).unwrap());
    assert_eq!(
        String::from_utf8(second)
            .unwrap()
            .matches("data-concept=")
            .count(),
        20
    );
}

#[test]
fn scale_and_top_k_change_the_cloud() {
    let dir = study_dir();
    run_ok(dir.path(), &["pipeline"]);
    let path = latest_run(dir.path()).join("clouds/obsbot.svg");
    run_ok(
        dir.path(),
        &[
            "cloud",
            "--condition",
            "obsbot",
            "--scale",
            "log",
            "--top-k",
            "5",
        ],
    );
    let svg = std::fs::read_to_string(&path).unwrap();
    assert_eq!(svg.matches("data-concept=").count(), 5);
}

#[test]
fn diff_cloud_has_legend() {
    let dir = study_dir();
    run_ok(dir.path(), &["pipeline"]);
    run_ok(
        dir.path(),
        &["diff", "--a", "insta", "--b", "logitech", "--margin", "1"],
    );
    let svg =
        std::fs::read_to_string(latest_run(dir.path()).join("clouds/insta__vs__logitech.svg"))
            .unwrap();
    assert!(svg.contains("class=\"legend\""));
    assert!(svg.contains("more in insta"));
    assert!(svg.contains("height=\"572\""), "legend band missing");
    run_ok(
        dir.path(),
        &["diff", "--a", "insta", "--b", "logitech", "--separate"],
    );
    let svg =
        std::fs::read_to_string(latest_run(dir.path()).join("clouds/insta__vs__logitech.svg"))
            .unwrap();
    assert!(svg.contains("<line "));
}

#[test]
fn frequency_baseline_surfaces_fillers() {
    let dir = study_dir();
    run_ok(
        dir.path(),
        &["freq", "--condition", "insta", "--top-k", "20"],
    );
    let svg =
        std::fs::read_to_string(latest_run(dir.path()).join("clouds/insta.freq.svg")).unwrap();
    assert_eq!(svg.matches("data-concept=").count(), 20);
    assert!(svg.contains("data-concept=\"like\""));
    assert!(svg.contains("data-concept=\"participant\""));
}

#[test]
fn audit_examples() {
    let dir = study_dir();
    run_ok(dir.path(), &["pipeline"]);
    let before = table(dir.path(), "insta");
    let (tid, key) = before
        .rows()
        .iter()
        .find_map(|r| {
            let col = before.column("easy to ignore").unwrap();
            (!r.cells[col].value).then(|| (r.transcript_id.clone(), "easy to ignore"))
        })
        .unwrap();
    let breadth = |t: &AssignmentTable| breadthcloud::compute_breadth(t, false).unwrap().get(key);

    let out = run_ok(
        dir.path(),
        &[
            "audit",
            "--condition",
            "insta",
            "--transcript",
            &tid,
            "--concept",
            "Easy to ignore",
            "--value",
            "1",
            "--note",
            "see line 42",
        ],
    );
    assert!(out.contains("0 -> 1*"), "{out}");
    let flipped = table(dir.path(), "insta");
    assert_eq!(breadth(&flipped), breadth(&before) + 1);
    assert_eq!(
        flipped.cell(&tid, key).unwrap().note.as_deref(),
        Some("see line 42")
    );

    let (tid2, key2) = (
        before.rows()[0].transcript_id.clone(),
        before.concept_keys()[0].clone(),
    );
    let current = before.cell(&tid2, &key2).unwrap().value;
    run_ok(
        dir.path(),
        &[
            "audit",
            "--condition",
            "insta",
            "--transcript",
            &tid2,
            "--concept",
            &key2,
            "--value",
            if current { "1" } else { "0" },
        ],
    );
    let same = table(dir.path(), "insta");
    assert_eq!(same.cell(&tid2, &key2).unwrap().value, current);
    assert_eq!(
        same.cell(&tid2, &key2).unwrap().provenance,
        breadthcloud::mapping::CellProvenance::Human
    );
    assert_eq!(same.journal().len(), 2);
    assert_eq!(breadth(&same), breadth(&flipped));

    let out = run(
        dir.path(),
        &[
            "audit",
            "--condition",
            "insta",
            "--transcript",
            &tid,
            "--concept",
            "Battery life",
            "--value",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("no column for concept \"Battery life\""),
        "{}",
        stderr(&out)
    );
    assert_eq!(table(dir.path(), "insta"), same);
}

#[test]
fn vocabulary_edit_makes_table_stale() {
    let dir = study_dir();
    run_ok(dir.path(), &["pipeline"]);
    std::fs::write(
        dir.path().join("edits.json"),
        r#"[{"remove": ["Not too visible", "Less noticeable"], "add": ["Low visibility"]}]"#,
    )
    .unwrap();
    let out = run_ok(
        dir.path(),
        &["edit", "--condition", "insta", "--edits", "edits.json"],
    );
    assert!(out.contains("19 concepts"), "{out}");

    let out = run(dir.path(), &["cloud", "--condition", "insta"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let out = run(
        dir.path(),
        &[
            "audit",
            "--condition",
            "insta",
            "--transcript",
            "p01__insta",
            "--concept",
            "convenient",
            "--value",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("re-run mapping"), "{}", stderr(&out));

    run_ok(dir.path(), &["cloud", "--condition", "insta", "--force"]);

    // The edited vocabulary changes the mapping prompt, which the recorded
    // fixtures do not cover: every row fails and is kept as incomplete.
    let out = run(dir.path(), &["map", "--condition", "insta"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("31 of 31 transcripts could not be mapped"));
    let t = table(dir.path(), "insta");
    assert_eq!(t.incomplete_rows().len(), 31);
    assert!(
        std::fs::read_to_string(latest_run(dir.path()).join("tables/insta.csv"))
            .unwrap()
            .contains(",?,")
    );
    let out = run(dir.path(), &["cloud", "--condition", "insta"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_condition_and_bad_config_are_validation_errors() {
    let dir = study_dir();
    let out = run(dir.path(), &["cloud", "--condition", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("known conditions"));

    std::fs::write(dir.path().join("bad.toml"), "n_topics = 0\n").unwrap();
    let out = run(dir.path(), &["--config", "bad.toml", "pipeline"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("typo.toml"), "seeed = 3\n").unwrap();
    let out = run(dir.path(), &["--config", "typo.toml", "pipeline"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seeed"));
}

#[test]
fn missing_fixture_is_reported_as_gateway_failure() {
    let dir = study_dir();
    std::fs::write(dir.path().join("fixtures.jsonl"), "").unwrap();
    let out = run(dir.path(), &["elicit", "--condition", "insta"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("re-record"), "{}", stderr(&out));
}

#[test]
fn run_selection() {
    let dir = study_dir();
    run_ok(
        dir.path(),
        &["--run-id", "first", "elicit", "--condition", "insta"],
    );
    assert!(latest_run(dir.path()).ends_with("first"));
    run_ok(dir.path(), &["--new-run", "elicit", "--condition", "insta"]);
    let second = latest_run(dir.path());
    assert!(!second.ends_with("first"));
    let name = second.file_name().unwrap().to_str().unwrap().to_string();
    assert_eq!(name.len(), "20260101T000000Z-".len() + 8, "{name}");
    run_ok(
        dir.path(),
        &["--run-id", "first", "map", "--condition", "insta"],
    );
    assert!(dir.path().join("runs/first/tables/insta.csv").exists());
    assert!(dir.path().join("runs/first/log/completions.jsonl").exists());
    assert!(dir.path().join("runs/first/log/config.toml").exists());
    let out = run(dir.path(), &["--run-id", "../escape", "elicit"]);
    assert_eq!(out.status.code(), Some(2));
}
