//! A synthetic interview study with recorded model responses.
//!
//! 31 participants each discuss 5 recording setups, giving 155 transcripts.
//! Every setup has 20 ground-truth themes; each transcript paraphrases a
//! seeded subset of them amid filler speech and interviewer prompts. The
//! matching fixture file holds the responses a well-behaved model would give
//! to the bundled prompts, keyed by request digest, so the whole pipeline
//! can be replayed offline.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::concepts::{elicitation_request, ConceptVocabulary, ElicitOptions};
use crate::corpus::{Corpus, Transcript};
use crate::llm::{
    default_elicitation_template, default_mapping_template, default_soft_mapping_template,
    FixtureEntry, GatewayError, PromptTemplate, RenderedRequest,
};
use crate::mapping::{mapping_request, MapOptions};
use crate::util::{write_atomic, FileError};

/// Seed of the bundled study.
pub const DEFAULT_SEED: u64 = 7;
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const FIXTURES_FILE: &str = "fixtures.jsonl";

pub const PARTICIPANTS: usize = 31;
pub const THEMES_PER_CONDITION: usize = 20;

/// (theme, sentence a participant might say about it)
type Theme = (&'static str, &'static str);

const INSTA: [Theme; 20] = [
    (
        "Small and compact",
        "it's really tiny, it barely takes up any room",
    ),
    ("Not distracting", "I didn't get pulled away by it at all"),
    (
        "Easy to ignore",
        "after a minute I just stopped thinking about it",
    ),
    (
        "Less noticeable",
        "you don't really see it unless you look for it",
    ),
    ("Not too visible", "it isn't sticking out in your face"),
    (
        "Fades into the background",
        "it kind of melts into the room",
    ),
    (
        "Simple and straightforward",
        "there's nothing complicated going on with it",
    ),
    ("Convenient", "it was handy to just clip it on and go"),
    (
        "Reminds me of a Polaroid",
        "it honestly looks like one of those instant photo cameras",
    ),
    (
        "Compact and spacious",
        "small body but the view still feels roomy",
    ),
    ("Playful look", "the shape is sort of cute and fun"),
    (
        "Wide field of view",
        "it catches the whole table in one shot",
    ),
    ("Easy to set up", "getting it running took no effort"),
    ("Feels like a toy", "it almost seems like a gadget for kids"),
    ("Unclear if recording", "I couldn't tell whether it was on"),
    (
        "Light and portable",
        "you could carry it around in a pocket",
    ),
    ("Friendly appearance", "it looks approachable, not scary"),
    (
        "Blends into the desk",
        "it sits there like a regular desk item",
    ),
    ("Odd angle", "the view seemed tilted from where it sat"),
    (
        "Less intimidating",
        "I felt way more relaxed than with a big camera",
    ),
];

const SINGLE_IPHONE: [Theme; 20] = [
    ("Familiar device", "everybody has a phone so it felt normal"),
    (
        "Felt watched",
        "I kept feeling like someone was looking at me",
    ),
    ("Image quality", "the picture looked really sharp"),
    ("Distracting screen", "the screen kept catching my eye"),
    (
        "Notification worries",
        "I was nervous a message would pop up",
    ),
    ("Easy to position", "it was simple to point where we needed"),
    ("Looks personal", "it seemed like somebody's own phone"),
    ("Privacy concerns", "I wondered where the video ends up"),
    ("Steady mount", "the stand held it firmly"),
    ("Too close", "it felt right in my space"),
    ("Battery anxiety", "I worried it would die in the middle"),
    ("Professional enough", "it looked good enough for a clinic"),
    ("Awkward stand", "the holder looked clumsy"),
    ("Single viewpoint", "it only sees from one side"),
    ("Heats up", "the phone got warm after a while"),
    ("Obvious recording", "it was clear it was filming"),
    ("Low setup effort", "nobody had to fiddle with it"),
    ("Bright light", "the flash light was a bit harsh"),
    (
        "Reflective surface",
        "the glass caught reflections from the window",
    ),
    ("Trust in brand", "I trust that company with my data"),
];

const DUAL_IPHONES: [Theme; 20] = [
    (
        "Double the cameras",
        "having two phones pointed at me was a lot",
    ),
    ("Crowded desk", "the table got really cluttered"),
    ("Better coverage", "between the two they caught everything"),
    ("Felt surrounded", "I felt boxed in from both sides"),
    ("Complex setup", "lining them up took forever"),
    ("Clinical feel", "it looked like a lab experiment"),
    ("Hard to ignore", "I couldn't stop noticing them"),
    ("Sync concerns", "I wondered if the two videos match up"),
    ("Redundant", "one phone would have been enough"),
    ("Intimidating", "it was honestly a bit scary"),
    ("Good angles", "the views from the sides were nice"),
    (
        "Expensive looking",
        "that's a lot of money sitting on the table",
    ),
    ("Cable clutter", "wires were running everywhere"),
    (
        "Self-conscious",
        "I was thinking about how I looked the whole time",
    ),
    ("Reliable backup", "if one fails the other still records"),
    ("Stage-like", "it felt like being on a film set"),
    (
        "Eye contact confusion",
        "I didn't know which one to look at",
    ),
    ("Bulky mounts", "the stands took up a lot of space"),
    ("Glare", "the screens threw light back at me"),
    ("Research grade", "it looked serious and scientific"),
];

const LOGITECH: [Theme; 20] = [
    ("Standard webcam", "it's just the normal computer camera"),
    ("Familiar from work calls", "I use one like it for meetings"),
    ("Reliable", "it just works every time"),
    ("Grainy image", "the picture was kind of fuzzy"),
    ("Fixed angle", "you can't really move where it looks"),
    ("Unobtrusive", "it stays out of the way up on the monitor"),
    ("Outdated look", "it looks like something from years ago"),
    ("Clip wobbles", "the clip kept shifting on the screen"),
    ("Plug and play", "you plug it in and it's ready"),
    ("Limited view", "it misses a lot of the room"),
    (
        "Neutral presence",
        "it doesn't make me feel one way or another",
    ),
    ("Cheap feel", "the plastic felt flimsy"),
    ("Good in low light", "even in the dim room it looked fine"),
    ("Indicator light", "the little light told me when it was on"),
    ("Too high up", "it was looking down at me"),
    ("Corporate vibe", "it feels like an office"),
    ("Sound pickup", "the microphone caught my voice well"),
    ("Cable length", "the cord barely reached"),
    ("Privacy shutter", "I liked that you can cover it"),
    ("Boring design", "it's plain and forgettable"),
];

const OBSBOT: [Theme; 20] = [
    ("Moves on its own", "it turned by itself to follow me"),
    ("Creepy tracking", "the way it followed me was unsettling"),
    ("Futuristic", "it looks like something from the future"),
    ("Sharp image", "the video was super crisp"),
    ("Motor noise", "I could hear it whirring"),
    ("Attention grabbing", "every time it moved I looked at it"),
    ("Smart features", "the auto zoom was clever"),
    ("Robot-like", "it felt like a little robot"),
    ("Follows gestures", "it reacted when I moved my hands"),
    ("Impressive tech", "the technology was really cool"),
    ("Felt studied", "it was like being examined"),
    ("Compact gimbal", "the head is small for what it does"),
    ("Unpredictable", "I never knew when it would move"),
    ("High quality", "everything looked professional"),
    ("Overkill", "it's more than we need for this"),
    ("Fun novelty", "it was entertaining to watch it"),
    ("Setup learning curve", "the app took a while to figure out"),
    ("Eye-like lens", "the lens looks like an eye"),
    ("Discreet size", "it's smaller than I expected"),
    (
        "Distracting movement",
        "the motion pulled me off my train of thought",
    ),
];

pub const CONDITIONS: [(&str, &[Theme; 20]); 5] = [
    ("dual-iphones", &DUAL_IPHONES),
    ("insta", &INSTA),
    ("logitech", &LOGITECH),
    ("obsbot", &OBSBOT),
    ("single-iphone", &SINGLE_IPHONE),
];

const FILLERS: [&str; 8] = [
    "Um, yeah, so",
    "Like, I mean,",
    "You know,",
    "Uh, honestly,",
    "Okay so, like,",
    "I guess, um,",
    "Yeah, like,",
    "So, uh,",
];

const INTERVIEWER: [&str; 4] = [
    "Interviewer: What did you think about this setup?",
    "Interviewer: Can you say more about that?",
    "Interviewer: How did it feel during the session?",
    "Interviewer: Anything else you noticed?",
];

#[derive(Debug, Clone)]
pub struct SyntheticCondition {
    pub themes: Vec<String>,
    /// Transcript id → indices of themes the transcript mentions.
    pub mentions: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticStudy {
    pub corpus: Corpus,
    pub truth: BTreeMap<String, SyntheticCondition>,
}

impl SyntheticStudy {
    /// Ground-truth breadth per theme for one condition.
    pub fn breadth(&self, condition: &str) -> Vec<u32> {
        let c = &self.truth[condition];
        let mut counts = vec![0; c.themes.len()];
        for idxs in c.mentions.values() {
            for &i in idxs {
                counts[i] += 1;
            }
        }
        counts
    }
}

pub fn participant_id(i: usize) -> String {
    format!("p{:02}", i + 1)
}

/// Builds the study. Every theme is mentioned by at least one participant.
pub fn synthetic_study(seed: u64) -> SyntheticStudy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transcripts = Vec::new();
    let mut truth = BTreeMap::new();
    for (condition, themes) in CONDITIONS {
        let mut mentions = BTreeMap::new();
        for p in 0..PARTICIPANTS {
            let pid = participant_id(p);
            let id = format!("{pid}__{condition}");
            let mut picked: Vec<usize> = (0..themes.len())
                .filter(|&rank| {
                    // earlier themes are more widely shared
                    let prob = 0.8 * 0.86_f64.powi(rank as i32);
                    rank % PARTICIPANTS == p || rng.random_bool(prob.max(0.08))
                })
                .collect();
            picked.sort_unstable();

            let mut lines = vec![INTERVIEWER[0].to_string()];
            let verbose = rng.random_bool(0.15);
            for (n, &theme) in picked.iter().enumerate() {
                let filler = FILLERS[rng.random_range(0..FILLERS.len())];
                lines.push(format!("Participant: {filler} {}.", themes[theme].1));
                if verbose {
                    lines.push(format!("Participant: Like I said, {}.", themes[theme].1));
                }
                if n % 4 == 3 {
                    lines.push(INTERVIEWER[1 + (n / 4) % 3].to_string());
                }
            }
            if picked.is_empty() {
                lines.push("Participant: Um, I don't know, it was fine I guess.".to_string());
            }
            transcripts.push(Transcript {
                id: id.clone(),
                participant_id: pid,
                condition_id: condition.to_string(),
                text: lines.join("\n") + "\n",
                source_ref: format!("synthetic:{id}"),
            });
            mentions.insert(id, picked);
        }
        truth.insert(
            condition.to_string(),
            SyntheticCondition {
                themes: themes.iter().map(|(t, _)| t.to_string()).collect(),
                mentions,
            },
        );
    }
    SyntheticStudy {
        corpus: Corpus::new(transcripts).expect("synthetic corpus is valid"),
        truth,
    }
}

/// Request settings the fixtures are recorded for.
pub struct RecordingSettings<'a> {
    pub elicitation: &'a PromptTemplate,
    pub mapping: &'a PromptTemplate,
    pub soft_mapping: Option<&'a PromptTemplate>,
    pub elicit: &'a ElicitOptions<'a>,
    pub map: &'a MapOptions<'a>,
}

fn elicitation_response(condition: &str, themes: &[String]) -> String {
    let mut out = format!("### {condition}\n");
    for t in themes {
        out.push_str(&format!("- {t}\n"));
    }
    out.push_str("\nThese descriptors reflect recurring participant reactions.\n");
    out
}

/// Mapping answer with the surface noise real responses show: varied
/// casing, trailing periods, repeats and an explanatory line that matches
/// nothing.
fn mapping_response(rng: &mut ChaCha8Rng, themes: &[String], present: &[usize]) -> String {
    let mut lines = Vec::new();
    for &i in present {
        let text = &themes[i];
        lines.push(match rng.random_range(0..4) {
            0 => text.to_lowercase(),
            1 => format!("{text}."),
            _ => text.clone(),
        });
    }
    if let Some(&first) = present.first() {
        if rng.random_bool(0.2) {
            lines.push(themes[first].to_uppercase());
        }
    }
    if rng.random_bool(0.25) {
        lines.push("(no other terms are clearly supported)".to_string());
    }
    lines.join("\n")
}

fn soft_response(rng: &mut ChaCha8Rng, themes: &[String], present: &[usize]) -> String {
    themes
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let score = if present.contains(&i) {
                rng.random_range(60..=100)
            } else {
                rng.random_range(0..=45)
            };
            format!("{t}: {:.2}", f64::from(score) / 100.0)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn entry(request: RenderedRequest, raw_response: String) -> FixtureEntry {
    FixtureEntry {
        digest: request.digest,
        raw_response,
    }
}

/// Recorded responses for per-condition elicitation and per-transcript
/// mapping (binary, and soft when a soft template is given).
pub fn record_fixtures(
    study: &SyntheticStudy,
    settings: &RecordingSettings<'_>,
    seed: u64,
) -> Result<Vec<FixtureEntry>, GatewayError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Vec::new();
    for (condition, truth) in &study.truth {
        let request = elicitation_request(
            &study.corpus,
            &[condition.as_str()],
            truth.themes.len(),
            settings.elicitation,
            settings.elicit,
        )
        .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?
        .render()?;
        out.push(entry(
            request,
            elicitation_response(condition, &truth.themes),
        ));

        let vocab =
            ConceptVocabulary::from_phrases(condition, truth.themes.iter().map(String::as_str))
                .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        for (tid, present) in &truth.mentions {
            let transcript = study.corpus.get(tid).expect("truth references corpus");
            let request = mapping_request(transcript, &vocab, settings.mapping, settings.map)?;
            out.push(entry(
                request,
                mapping_response(&mut rng, &truth.themes, present),
            ));
            if let Some(soft) = settings.soft_mapping {
                let request = mapping_request(transcript, &vocab, soft, settings.map)?;
                out.push(entry(
                    request,
                    soft_response(&mut rng, &truth.themes, present),
                ));
            }
        }
    }
    Ok(out)
}

/// Fixtures for the bundled prompts and default request settings.
pub fn default_fixtures(study: &SyntheticStudy, seed: u64) -> Vec<FixtureEntry> {
    let elicitation = default_elicitation_template();
    let mapping = default_mapping_template();
    let soft = default_soft_mapping_template();
    let settings = RecordingSettings {
        elicitation: &elicitation,
        mapping: &mapping,
        soft_mapping: Some(&soft),
        elicit: &ElicitOptions::default(),
        map: &MapOptions::default(),
    };
    record_fixtures(study, &settings, seed).expect("bundled prompts render")
}

pub fn corpus_jsonl(corpus: &Corpus) -> Vec<u8> {
    let mut out = Vec::new();
    corpus.write_records(&mut out).expect("in-memory write");
    out
}

pub fn fixtures_jsonl(entries: &[FixtureEntry]) -> Vec<u8> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("fixture entry serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

/// Writes `corpus.jsonl` and `fixtures.jsonl` for the study into `dir`.
pub fn write_study(dir: &Path, seed: u64) -> Result<SyntheticStudy, FileError> {
    let study = synthetic_study(seed);
    write_atomic(&dir.join(CORPUS_FILE), &corpus_jsonl(&study.corpus))?;
    write_atomic(
        &dir.join(FIXTURES_FILE),
        &fixtures_jsonl(&default_fixtures(&study, seed)),
    )?;
    Ok(study)
}
