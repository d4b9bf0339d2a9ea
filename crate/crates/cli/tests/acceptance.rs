//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the report is always printed; exits non-zero on any failure.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use breadthcloud::baseline::{frequency_counts, StopWords};
use breadthcloud::concepts::{elicit_vocabulary, ElicitOptions, DEFAULT_N_TOPICS};
use breadthcloud::layout::{
    font_sizes, measure, place, render_svg, weighted_items, Canvas, FontRange, Palette,
    RenderOptions, SpiralConfig, WeightedItem,
};
use breadthcloud::llm::{
    default_elicitation_template, default_mapping_template, parse_line_list, FixtureBackend,
    GatewayError, MockBackend, RunLog,
};
use breadthcloud::mapping::{binarize, map_condition, AssignmentRow, MapOptions, DEFAULT_TAU};
use breadthcloud::synth::{self, DEFAULT_SEED};
use breadthcloud::{
    compute_breadth, diff_breadth, normalize_phrase, scale_weights, AssignmentCell,
    AssignmentTable, BreadthCounts, ConceptVocabulary, Corpus, MappingMode, ScaleMode, Transcript,
};
use common::{latest_run, run_ok, study_dir};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xacce_0000 + salt)
}

fn vocab(condition: &str, n: usize) -> ConceptVocabulary {
    let texts: Vec<String> = (0..n).map(|i| format!("theme {}", letters(i))).collect();
    ConceptVocabulary::from_phrases(condition, texts.iter().map(String::as_str)).unwrap()
}

/// 0 → "a", 25 → "z", 26 → "ba", …
fn letters(mut i: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

fn table_from(vocab: &ConceptVocabulary, cells: &[Vec<bool>]) -> AssignmentTable {
    let rows = cells
        .iter()
        .enumerate()
        .map(|(j, row)| AssignmentRow {
            transcript_id: format!("t{j:03}"),
            participant_id: format!("p{j:03}"),
            cells: row.iter().map(|&v| AssignmentCell::model(v)).collect(),
            incomplete: None,
        })
        .collect();
    AssignmentTable::new(vocab, "acceptance", DEFAULT_TAU, MappingMode::Binary, rows).unwrap()
}

fn breadth_of(condition: &str, pairs: impl IntoIterator<Item = (String, u32)>) -> BreadthCounts {
    BreadthCounts {
        condition_id: condition.to_string(),
        m_total: 0,
        counts: pairs.into_iter().collect(),
        forced: None,
    }
}

fn breadth_oracle() -> Outcome {
    let mut rng = rng(1);
    let start = Instant::now();
    for trial in 0..500 {
        let m = rng.random_range(1..=50);
        let n = rng.random_range(1..=30);
        let density = rng.random_range(0.0..=1.0);
        let cells: Vec<Vec<bool>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_bool(density)).collect())
            .collect();
        let v = vocab("c", n);
        let got = compute_breadth(&table_from(&v, &cells), false).map_err(|e| e.to_string())?;
        for (i, key) in v.keys().enumerate() {
            let mut expected = 0;
            for row in &cells {
                if row[i] {
                    expected += 1;
                }
            }
            ensure!(
                got.get(key) == expected,
                "trial {trial}: b({key}) = {} but oracle says {expected}",
                got.get(key)
            );
        }
        ensure!(
            got.m_total as usize == m,
            "trial {trial}: m_total {} != {m}",
            got.m_total
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("500 tables in {elapsed:.2?}"))
}

/// Answers mapping prompts by checking which synthetic theme sentences occur
/// in the prompt text, i.e. a mapper that reads the transcript.
fn reading_backend(condition: &str) -> MockBackend<'static> {
    let themes = synth::CONDITIONS
        .iter()
        .find(|(c, _)| *c == condition)
        .unwrap()
        .1;
    MockBackend::from_fn(move |r| {
        Ok(themes
            .iter()
            .filter(|(_, sentence)| r.prompt.contains(sentence))
            .map(|(theme, _)| theme.to_string())
            .collect::<Vec<_>>()
            .join("\n"))
    })
}

fn length_invariance() -> Outcome {
    let condition = "insta";
    let study = synth::synthetic_study(DEFAULT_SEED);
    let truth = &study.truth[condition];
    let (target, _) = truth
        .mentions
        .iter()
        .max_by_key(|(id, m)| (m.len(), std::cmp::Reverse(*id)))
        .unwrap();

    let mut transcripts: Vec<Transcript> = study.corpus.transcripts().to_vec();
    let original = transcripts
        .iter()
        .find(|t| &t.id == target)
        .unwrap()
        .clone();
    for t in &mut transcripts {
        if &t.id == target {
            t.text = t.text.repeat(10);
        }
    }
    let loud = Corpus::new(transcripts).map_err(|e| e.to_string())?;

    let v = ConceptVocabulary::from_phrases(condition, truth.themes.iter().map(String::as_str))
        .unwrap();
    let backend = reading_backend(condition);
    let map = |corpus: &Corpus| -> Result<BreadthCounts, String> {
        let table = map_condition(
            corpus,
            condition,
            &v,
            &default_mapping_template(),
            &backend,
            MappingMode::Binary,
            DEFAULT_TAU,
            "acceptance",
            &MapOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        compute_breadth(&table, false).map_err(|e| e.to_string())
    };
    let quiet_breadth = map(&study.corpus)?;
    let loud_breadth = map(&loud)?;
    ensure!(
        quiet_breadth.counts.values().copied().collect::<Vec<_>>() == study.breadth(condition),
        "reading mapper disagrees with ground truth"
    );
    ensure!(
        quiet_breadth == loud_breadth,
        "breadth changed when {target} was repeated"
    );

    let stop = StopWords::bundled();
    let quiet = frequency_counts(
        condition,
        study.corpus.transcripts_for(condition).unwrap(),
        &stop,
    );
    let loud_counts = frequency_counts(condition, loud.transcripts_for(condition).unwrap(), &stop);
    let own = frequency_counts(condition, [&original], &stop);
    let repeated = loud.get(target).map_err(|e| e.to_string())?;
    let own_loud = frequency_counts(condition, [repeated], &stop);
    ensure!(
        own_loud.counts.len() == own.counts.len(),
        "repeating {target} changed its vocabulary"
    );
    for (token, &k) in &own.counts {
        ensure!(
            own_loud.get(token) == 10 * k,
            "{token}: {k} in {target}, {} after repeating",
            own_loud.get(token)
        );
    }
    let mut tenfold = 0;
    for (token, &k) in &own.counts {
        let (q, l) = (quiet.get(token), loud_counts.get(token));
        ensure!(l == q + 9 * k, "{token}: {q} -> {l}, expected +9×{k}");
        if q == k {
            ensure!(l == 10 * q, "{token}: only in {target} but {q} -> {l}");
            tenfold += 1;
        }
    }
    for (token, &q) in &quiet.counts {
        if own.get(token) == 0 {
            ensure!(
                loud_counts.get(token) == q,
                "{token} changed without appearing in {target}"
            );
        }
    }
    ensure!(
        loud_counts.tokens_total == quiet.tokens_total + 9 * own.tokens_total,
        "token totals off"
    );
    Ok(format!(
        "{target} ×10: breadth identical; its {} tokens counted exactly 10×, condition totals +9×own ({tenfold} tokens unique to it)",
        own.counts.len()
    ))
}

fn scaling_monotonicity() -> Outcome {
    let mut rng = rng(3);
    for trial in 0..1000 {
        let n = rng.random_range(1..=30);
        let hi = *[5, 31, 1000].get(rng.random_range(0..3)).unwrap();
        let b: Vec<u32> = (0..n).map(|_| rng.random_range(0..=hi)).collect();
        let counts = breadth_of(
            "c",
            b.iter().enumerate().map(|(i, &x)| (format!("k{i}"), x)),
        );
        for mode in [ScaleMode::Linear, ScaleMode::Log, ScaleMode::Sqrt] {
            let w: Vec<f64> = scale_weights(&counts, mode)
                .weights
                .values()
                .copied()
                .collect();
            for i in 0..n {
                ensure!(
                    b[i] != 0 || w[i] == 0.0,
                    "trial {trial} {mode:?}: g(0) = {}",
                    w[i]
                );
                for j in 0..n {
                    if b[i] <= b[j] {
                        ensure!(
                            w[i] <= w[j],
                            "trial {trial} {mode:?}: {} <= {} but {} > {}",
                            b[i],
                            b[j],
                            w[i],
                            w[j]
                        );
                    }
                    if mode != ScaleMode::Linear && 0 < b[i] && b[i] < b[j] {
                        ensure!(
                            w[i] < w[j],
                            "trial {trial} {mode:?}: not strict at {} < {}",
                            b[i],
                            b[j]
                        );
                    }
                }
            }
        }
    }
    Ok("1000 vectors × 3 modes".into())
}

fn threshold_monotonicity() -> Outcome {
    let mut rng = rng(4);
    let grid: Vec<f64> = (1..=9).map(|i| f64::from(i) / 10.0).collect();
    for trial in 0..200 {
        let n = rng.random_range(1..=30);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    grid[rng.random_range(0..grid.len())]
                } else {
                    rng.random_range(0.0..=1.0)
                }
            })
            .collect();
        let mut previous = usize::MAX;
        for &tau in &grid {
            let flags = binarize(&scores, tau);
            for (s, f) in scores.iter().zip(&flags) {
                ensure!(
                    AssignmentCell::scored(*s, tau).value == *f,
                    "cell and binarize disagree at {s} / {tau}"
                );
            }
            let positives = flags.iter().filter(|&&f| f).count();
            ensure!(
                positives <= previous,
                "trial {trial}: positives rose to {positives} at tau {tau}"
            );
            previous = positives;
        }
    }
    Ok("200 rows × 9 thresholds".into())
}

fn diff_algebra() -> Outcome {
    let mut rng = rng(5);
    for trial in 0..200 {
        let mut side = |name: &str| {
            let keys: BTreeSet<usize> = (0..rng.random_range(1..=25))
                .map(|_| rng.random_range(0..30))
                .collect();
            breadth_of(
                name,
                keys.into_iter()
                    .map(|k| (format!("k{k}"), rng.random_range(0..=31)))
                    .collect::<Vec<_>>(),
            )
        };
        let (a, b) = (side("a"), side("b"));
        let margin = rng.random_range(0..4);
        let ab = diff_breadth(&a, &b, margin).map_err(|e| e.to_string())?;
        let ba = diff_breadth(&b, &a, margin).map_err(|e| e.to_string())?;
        let union: BTreeSet<&String> = a.counts.keys().chain(b.counts.keys()).collect();
        ensure!(
            ab.deltas.len() == union.len() && ba.deltas.len() == union.len(),
            "trial {trial}: key set is not the union"
        );
        for key in union {
            let expected = i64::from(a.get(key)) - i64::from(b.get(key));
            ensure!(
                ab.deltas[key.as_str()] == expected,
                "trial {trial}: Δ({key}) wrong"
            );
            ensure!(
                ba.deltas[key.as_str()] == -expected,
                "trial {trial}: Δ not antisymmetric at {key}"
            );
        }
        let mut twin = a.clone();
        twin.condition_id = "a-again".into();
        let same = diff_breadth(&a, &twin, margin).map_err(|e| e.to_string())?;
        ensure!(
            same.deltas.values().all(|&d| d == 0),
            "trial {trial}: Δ on identical counts is not 0"
        );
    }
    Ok("200 pairs".into())
}

fn random_label(rng: &mut ChaCha8Rng) -> String {
    let words = rng.random_range(1..=3);
    (0..words)
        .map(|_| {
            let len = rng.random_range(2..=9);
            (0..len)
                .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn layout_soundness() -> Outcome {
    let mut rng = rng(6);
    let start = Instant::now();
    let (mut placed, mut overflowed) = (0, 0);
    for trial in 0..300 {
        let n = rng.random_range(1..=40);
        let mut seen = HashSet::new();
        let items: Vec<WeightedItem> = (0..n)
            .filter_map(|i| {
                let text = format!("{} {i}", random_label(&mut rng));
                seen.insert(text.clone()).then(|| WeightedItem {
                    key: text.clone(),
                    display_text: text,
                    weight: rng.random_range(0.0..50.0),
                    breadth: None,
                    participants: Vec::new(),
                })
            })
            .collect();
        let entries = font_sizes(&items, FontRange::default(), None).map_err(|e| e.to_string())?;
        let canvas = if rng.random_bool(0.3) {
            Canvas {
                width: rng.random_range(200.0..700.0),
                height: rng.random_range(150.0..400.0),
            }
        } else {
            Canvas::default()
        };
        let padding = rng.random_range(0.0..4.0);
        let seed = rng.next_u64();
        let layout = place(
            "t",
            &entries,
            canvas,
            seed,
            padding,
            SpiralConfig::default(),
        )
        .map_err(|e| e.to_string())?;

        let mut out: Vec<&str> = layout
            .boxes
            .iter()
            .map(|b| b.entry.concept_key.as_str())
            .chain(layout.overflow.iter().map(|e| e.concept_key.as_str()))
            .collect();
        let mut input: Vec<&str> = entries.iter().map(|e| e.concept_key.as_str()).collect();
        out.sort_unstable();
        input.sort_unstable();
        ensure!(
            out == input,
            "trial {trial}: placed ∪ overflow differs from the input"
        );

        let inflated: Vec<[f64; 4]> = layout
            .boxes
            .iter()
            .map(|b| {
                [
                    b.x - padding,
                    b.y - padding,
                    b.x + b.width + padding,
                    b.y + b.height + padding,
                ]
            })
            .collect();
        for (i, b) in layout.boxes.iter().enumerate() {
            let (w, h) = measure(&b.entry.display_text, b.entry.font_size);
            ensure!(
                b.width == w && b.height == h,
                "trial {trial}: box size is not the measured size"
            );
            ensure!(
                b.x >= 0.0
                    && b.y >= 0.0
                    && b.x + b.width <= canvas.width
                    && b.y + b.height <= canvas.height,
                "trial {trial}: {} leaves the canvas",
                b.entry.concept_key
            );
            for j in 0..i {
                let (p, q) = (inflated[i], inflated[j]);
                let dx = p[2].min(q[2]) - p[0].max(q[0]);
                let dy = p[3].min(q[3]) - p[1].max(q[1]);
                ensure!(
                    dx <= 0.0 || dy <= 0.0,
                    "trial {trial}: padded boxes {i} and {j} intersect"
                );
            }
        }
        placed += layout.boxes.len();
        overflowed += layout.overflow.len();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "300 sets, {placed} placed, {overflowed} overflowed, {elapsed:.2?}"
    ))
}

const ARTIFACTS: [&str; 3] = ["vocab/{c}.json", "tables/{c}.csv", "clouds/{c}.svg"];

fn determinism() -> Outcome {
    let (first, second) = (study_dir(), study_dir());
    run_ok(first.path(), &["pipeline"]);
    run_ok(second.path(), &["pipeline"]);
    let (r1, r2) = (latest_run(first.path()), latest_run(second.path()));
    let mut compared = 0;
    for (c, _) in synth::CONDITIONS {
        for pattern in ARTIFACTS {
            let rel = pattern.replace("{c}", c);
            let (a, b) = (
                std::fs::read(r1.join(&rel)).map_err(|e| format!("{rel}: {e}"))?,
                std::fs::read(r2.join(&rel)).map_err(|e| format!("{rel}: {e}"))?,
            );
            ensure!(a == b, "{rel} differs between runs");
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} files byte-identical across two pipeline runs"
    ))
}

fn fixture_digests(dir: &Path) -> Result<HashSet<String>, String> {
    let text =
        std::fs::read_to_string(dir.join(synth::FIXTURES_FILE)).map_err(|e| e.to_string())?;
    text.lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
            Ok(v["digest"].as_str().unwrap_or_default().to_string())
        })
        .collect()
}

fn end_to_end_replay() -> Outcome {
    let dir = study_dir();
    let config =
        std::fs::read_to_string(dir.path().join("breadthcloud.toml")).map_err(|e| e.to_string())?;
    ensure!(
        config.contains("backend = \"fixture\""),
        "bundled study is not configured for replay"
    );

    let start = Instant::now();
    let out = run_ok(dir.path(), &["pipeline"]);
    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(60),
        "pipeline took {elapsed:?}"
    );
    ensure!(
        !out.contains("did not fit"),
        "some entries overflowed:\n{out}"
    );

    let run = latest_run(dir.path());
    let digests = fixture_digests(dir.path())?;
    let log = RunLog::read(&run.join("log/completions.jsonl")).map_err(|e| e.to_string())?;
    ensure!(
        log.len() == 5 + 155,
        "log has {} completions, expected 160",
        log.len()
    );
    ensure!(
        log.iter().all(|r| digests.contains(&r.digest)),
        "a logged completion is not a recorded fixture"
    );

    let mut transcripts = 0;
    for (c, _) in synth::CONDITIONS {
        let svg = std::fs::read_to_string(run.join(format!("clouds/{c}.svg")))
            .map_err(|e| e.to_string())?;
        ensure!(
            svg.matches("data-concept=").count() == DEFAULT_N_TOPICS,
            "{c}: cloud does not have 20 themes"
        );

        let table = AssignmentTable::load(&run.join(format!("tables/{c}.csv")))
            .map_err(|e| e.to_string())?;
        transcripts += table.rows().len();
        let breadth = compute_breadth(&table, false).map_err(|e| e.to_string())?;
        let weights = scale_weights(&breadth, ScaleMode::Linear);
        let items = weighted_items(&weights, Some(&table), |k| breadth.get(k));
        let entries = font_sizes(&items, FontRange::default(), None).map_err(|e| e.to_string())?;
        let layout = place(
            c,
            &entries,
            Canvas::default(),
            DEFAULT_SEED,
            2.0,
            SpiralConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            layout.boxes.len() == DEFAULT_N_TOPICS && layout.overflow.is_empty(),
            "{c}: reconstruction placed {}",
            layout.boxes.len()
        );
        let rebuilt = render_svg(&layout, &Palette::default(), &RenderOptions::default());
        ensure!(
            rebuilt == svg,
            "{c}: reconstructed cloud differs from the pipeline output"
        );
    }
    ensure!(transcripts == 155, "tables cover {transcripts} transcripts");
    Ok(format!("155 transcripts, 5 clouds × 20 themes in {elapsed:.2?}, all reconstructed byte-identically"))
}

fn audit_round_trip() -> Outcome {
    let dir = study_dir();
    run_ok(dir.path(), &["pipeline"]);
    let run = latest_run(dir.path());
    let load = |c: &str| {
        AssignmentTable::load(&run.join(format!("tables/{c}.csv"))).map_err(|e| e.to_string())
    };

    let mut rng = rng(9);
    let conditions: Vec<&str> = synth::CONDITIONS.iter().map(|(c, _)| *c).take(3).collect();
    let before: BTreeMap<&str, AssignmentTable> = conditions
        .iter()
        .map(|&c| Ok((c, load(c)?)))
        .collect::<Result<_, String>>()?;
    let mut expected: BTreeMap<(&str, String), i64> = BTreeMap::new();
    let mut touched = HashSet::new();
    let mut script = Vec::new();
    while script.len() < 10 {
        let c = conditions[rng.random_range(0..conditions.len())];
        let t = &before[c];
        let row = &t.rows()[rng.random_range(0..t.rows().len())];
        let col = rng.random_range(0..t.concept_keys().len());
        if !touched.insert((c, row.transcript_id.clone(), col)) {
            continue;
        }
        let old = row.cells[col].value;
        // mostly flips, with a few confirmations of the model's value
        let new = if script.len() % 4 == 3 { old } else { !old };
        *expected
            .entry((c, t.concept_keys()[col].clone()))
            .or_default() += i64::from(new) - i64::from(old);
        script.push((
            c,
            row.transcript_id.clone(),
            t.concept_texts()[col].clone(),
            new,
        ));
    }
    for (i, (c, tid, concept, new)) in script.iter().enumerate() {
        let note = format!("scripted correction {}", i + 1);
        run_ok(
            dir.path(),
            &[
                "audit",
                "--condition",
                c,
                "--transcript",
                tid,
                "--concept",
                concept,
                "--value",
                if *new { "1" } else { "0" },
                "--note",
                &note,
            ],
        );
    }

    let mut journal = 0;
    for &c in &conditions {
        let after = load(c)?;
        let b0 = compute_breadth(&before[c], false).map_err(|e| e.to_string())?;
        let b1 = compute_breadth(&after, false).map_err(|e| e.to_string())?;
        for key in after.concept_keys() {
            let delta = i64::from(b1.get(key)) - i64::from(b0.get(key));
            let want = expected.get(&(c, key.clone())).copied().unwrap_or(0);
            ensure!(
                delta == want,
                "{c}/{key}: breadth moved by {delta}, script says {want}"
            );
        }
        let original = after.original();
        ensure!(
            original == before[c],
            "{c}: undoing the journal does not restore the mapped table"
        );
        let replayed = original
            .replay(after.journal())
            .map_err(|e| e.to_string())?;
        ensure!(
            replayed == after,
            "{c}: journal replay does not reproduce the final table"
        );
        journal += after.journal().len();
    }
    ensure!(journal == 10, "{journal} journal entries, expected 10");
    let flips = script.iter().filter(|s| s.3).count();
    Ok(format!(
        "10 corrections ({flips} set to 1) over {} conditions; deltas exact, replay exact",
        conditions.len()
    ))
}

const JUNK: [&str; 8] = [
    "",
    "   ",
    "Here are the concepts present:",
    "(no other terms are clearly supported)",
    "- none",
    "1.",
    "N/A",
    "The participant did not mention anything else.",
];

fn garble(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut s = match rng.random_range(0..4) {
        0 => text.to_uppercase(),
        1 => text.to_lowercase(),
        _ => text.to_string(),
    };
    if rng.random_bool(0.3) {
        s = format!("  {s}  ");
    }
    if rng.random_bool(0.3) {
        s.push('.');
    }
    if rng.random_bool(0.2) {
        s = s.replace(' ', "   ");
    }
    s
}

fn parser_subset() -> Outcome {
    let mut rng = rng(10);
    let (mut capped, mut matched_total) = (0, 0);
    for trial in 0..1000 {
        let size = rng.random_range(1..=40);
        let v = vocab("c", size);
        let mut lines = Vec::new();
        for _ in 0..rng.random_range(0..=60) {
            let line = match rng.random_range(0..10) {
                0..=5 => garble(v.concepts()[rng.random_range(0..size)].text(), &mut rng),
                6 | 7 => JUNK[rng.random_range(0..JUNK.len())].to_string(),
                8 => format!("theme {}", letters(size + rng.random_range(0..100))),
                _ => random_label(&mut rng),
            };
            lines.push(line);
        }
        if rng.random_bool(0.2) {
            let again = lines.clone();
            lines.extend(again);
        }
        let raw = lines.join(if rng.random_bool(0.1) { "\r\n" } else { "\n" });
        let parsed = std::panic::catch_unwind(|| parse_line_list(&raw, &v, 20))
            .map_err(|_| format!("trial {trial}: parser panicked"))?;

        let supported: HashSet<String> = raw.lines().map(normalize_phrase).collect();
        let distinct: HashSet<usize> = parsed.matched.iter().copied().collect();
        ensure!(
            parsed.matched.len() <= 20,
            "trial {trial}: {} matches",
            parsed.matched.len()
        );
        ensure!(
            distinct.len() == parsed.matched.len(),
            "trial {trial}: duplicate matches"
        );
        for &i in &parsed.matched {
            ensure!(
                i < v.len(),
                "trial {trial}: index {i} outside the vocabulary"
            );
            ensure!(
                supported.contains(v.concepts()[i].key()),
                "trial {trial}: {} was not in the response",
                v.concepts()[i].key()
            );
        }
        let available = v.keys().filter(|k| supported.contains(*k)).count();
        ensure!(
            parsed.matched.len() == available.min(20),
            "trial {trial}: kept {} of {available} matches",
            parsed.matched.len()
        );
        capped += usize::from(available > 20);
        matched_total += parsed.matched.len();
    }
    Ok(format!(
        "1000 responses, {matched_total} matches, {capped} hit the cap of 20"
    ))
}

/// Elicitation is not part of a criterion of its own but every replayed
/// cloud depends on it; checked here so a broken vocabulary fails loudly.
fn replayed_vocabularies_match_truth() -> Result<(), String> {
    let study = synth::synthetic_study(DEFAULT_SEED);
    let backend = FixtureBackend::load(&common::bundled_study().join(synth::FIXTURES_FILE))
        .map_err(|e: GatewayError| e.to_string())?;
    for (c, truth) in &study.truth {
        let v = elicit_vocabulary(
            &study.corpus,
            c,
            DEFAULT_N_TOPICS,
            &default_elicitation_template(),
            &backend,
            &ElicitOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let texts: Vec<&str> = v.concepts().iter().map(|x| x.text()).collect();
        ensure!(
            texts == truth.themes,
            "{c}: elicited vocabulary differs from the recorded themes"
        );
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("breadth oracle", breadth_oracle),
        ("length invariance", length_invariance),
        ("scaling monotonicity", scaling_monotonicity),
        ("threshold monotonicity", threshold_monotonicity),
        ("diff algebra", diff_algebra),
        ("layout soundness", layout_soundness),
        ("determinism", determinism),
        ("end-to-end fixture replay", end_to_end_replay),
        ("audit round-trip", audit_round_trip),
        ("parser subset guarantee", parser_subset),
    ];
    if let Err(e) = replayed_vocabularies_match_truth() {
        println!("FAIL precondition: {e}");
        std::process::exit(1);
    }
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
