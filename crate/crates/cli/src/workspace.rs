//! A run directory plus everything needed to execute pipeline stages in it.
//!
//! Layout under `output_dir`:
//!
//! ```text
//! latest                      id of the most recently used run
//! <run_id>/vocab/<c>.json
//! <run_id>/tables/<c>.csv     (+ <c>.meta.json sidecar)
//! <run_id>/clouds/<c>.svg, <c>.freq.svg, <a>__vs__<b>.svg
//! <run_id>/log/completions.jsonl, config.toml
//! ```

use std::path::{Path, PathBuf};

use breadthcloud::baseline::{frequency_cloud, frequency_counts, StopWords};
use breadthcloud::concepts::{
    elicit_vocabulary, merge_reelicited, seed_concepts, set_pinned, split_or_merge, ConceptError,
    ElicitOptions, VocabEdit,
};
use breadthcloud::layout::{
    diff_entries, font_sizes, place, place_separated, render_svg, render_svg_separated,
    weighted_items, CloudLayout, Palette, RenderOptions,
};
use breadthcloud::llm::{
    Backend, FixtureBackend, LiveBackend, RecordingBackend, RetryPolicy, RunLog,
};
use breadthcloud::mapping::{map_condition, MapOptions, DEFAULT_MAX_ITEMS};
use breadthcloud::util::write_atomic;
use breadthcloud::{
    compute_breadth, diff_breadth, load_corpus, scale_weights, AssignmentTable, BreadthCounts,
    ConceptVocabulary, Corpus, DiffResult, MappingMode, ScaleMode,
};

use crate::config::{BackendChoice, RunConfig};
use crate::error::CliError;

/// Which run directory a command works in.
#[derive(Debug, Clone, Default)]
pub struct RunSelection {
    pub run_id: Option<String>,
    /// Start a fresh run even when a `latest` pointer exists.
    pub new_run: bool,
}

pub struct Workspace {
    pub config: RunConfig,
    pub run_id: String,
    pub run_dir: PathBuf,
    corpus: Corpus,
    backend: Box<dyn Backend>,
    log: RunLog,
}

#[derive(Debug, Clone, Copy)]
pub struct CloudParams {
    pub scale: ScaleMode,
    pub seed: u64,
    pub top_k: Option<usize>,
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct ElicitOutcome {
    pub vocabulary: ConceptVocabulary,
    pub path: PathBuf,
    /// Pinned concepts carried over from the previous vocabulary file.
    pub kept_pins: usize,
}

pub struct Rendered {
    pub path: PathBuf,
    pub svg: String,
    pub placed: usize,
    pub overflow: usize,
}

fn latest_pointer(output_dir: &Path) -> PathBuf {
    output_dir.join("latest")
}

fn generated_run_id(config: &RunConfig) -> String {
    format!(
        "{}-{}",
        chrono::Utc::now().format("%Y%m%dT%H%M%SZ"),
        config.hash()
    )
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id != "latest"
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

fn build_backend(config: &RunConfig) -> Result<Box<dyn Backend>, CliError> {
    Ok(match config.backend {
        BackendChoice::Fixture => Box::new(FixtureBackend::load(&config.fixtures)?),
        BackendChoice::Live => {
            let live =
                LiveBackend::new(config.live_config().ok_or_else(|| {
                    CliError::Validation("live backend needs an endpoint".into())
                })?);
            if config.record {
                Box::new(RecordingBackend::new(live, &config.fixtures)?)
            } else {
                Box::new(live)
            }
        }
    })
}

impl Workspace {
    /// Validates the config, loads the corpus and backend, and selects (or
    /// creates) the run directory.
    pub fn open(config: RunConfig, selection: &RunSelection) -> Result<Self, CliError> {
        config.validate()?;
        let corpus = load_corpus(&config.corpus_root, config.corpus_format)?;
        for c in &config.conditions {
            corpus.transcripts_for(c)?;
        }
        let backend = build_backend(&config)?;
        Self::with_backend(config, corpus, backend, selection)
    }

    /// Like [`Workspace::open`] with a caller-supplied backend and corpus.
    pub fn with_backend(
        config: RunConfig,
        corpus: Corpus,
        backend: Box<dyn Backend>,
        selection: &RunSelection,
    ) -> Result<Self, CliError> {
        let pointer = latest_pointer(&config.output_dir);
        let run_id = match (&selection.run_id, selection.new_run) {
            (Some(id), _) => id.clone(),
            (None, false) if pointer.exists() => std::fs::read_to_string(&pointer)
                .map_err(|e| CliError::Data(format!("{}: {e}", pointer.display())))?
                .trim()
                .to_string(),
            _ => generated_run_id(&config),
        };
        if !valid_run_id(&run_id) {
            return Err(CliError::Validation(format!("invalid run id {run_id:?}")));
        }
        let run_dir = config.output_dir.join(&run_id);
        for sub in ["vocab", "tables", "clouds", "log"] {
            let dir = run_dir.join(sub);
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        }
        write_atomic(&pointer, format!("{run_id}\n").as_bytes())?;
        write_atomic(
            &run_dir.join("log/config.toml"),
            config.to_toml().as_bytes(),
        )?;
        let log = RunLog::open(&run_dir.join("log/completions.jsonl"))?;
        Ok(Self {
            config,
            run_id,
            run_dir,
            corpus,
            backend,
            log,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Conditions in scope: the configured list, or every corpus condition.
    pub fn conditions(&self) -> Vec<String> {
        if self.config.conditions.is_empty() {
            self.corpus.conditions().map(str::to_string).collect()
        } else {
            self.config.conditions.clone()
        }
    }

    fn check_condition(&self, condition: &str) -> Result<(), CliError> {
        self.corpus.transcripts_for(condition)?;
        Ok(())
    }

    pub fn vocab_path(&self, condition: &str) -> PathBuf {
        self.run_dir.join("vocab").join(format!("{condition}.json"))
    }

    pub fn table_path(&self, condition: &str) -> PathBuf {
        self.run_dir.join("tables").join(format!("{condition}.csv"))
    }

    pub fn cloud_path(&self, condition: &str) -> PathBuf {
        self.run_dir.join("clouds").join(format!("{condition}.svg"))
    }

    pub fn freq_path(&self, condition: &str) -> PathBuf {
        self.run_dir
            .join("clouds")
            .join(format!("{condition}.freq.svg"))
    }

    pub fn diff_path(&self, a: &str, b: &str) -> PathBuf {
        self.run_dir
            .join("clouds")
            .join(format!("{a}__vs__{b}.svg"))
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    fn elicit_options(&self) -> ElicitOptions<'_> {
        ElicitOptions {
            model_id: self.config.model_id.clone(),
            decoding: self.config.decoding(),
            policy: RetryPolicy::default(),
            log: Some(&self.log),
            ..ElicitOptions::default()
        }
    }

    fn map_options(&self) -> MapOptions<'_> {
        MapOptions {
            model_id: self.config.model_id.clone(),
            decoding: self.config.decoding(),
            policy: RetryPolicy::default(),
            log: Some(&self.log),
            max_items: DEFAULT_MAX_ITEMS,
        }
    }

    /// Elicits `n` concepts for `condition`. Pinned concepts of an existing
    /// vocabulary file survive the re-run. An underfull response leaves the
    /// recovered concepts in `<c>.partial.json` for seeding.
    pub fn elicit(&self, condition: &str, n: usize) -> Result<ElicitOutcome, CliError> {
        if n == 0 {
            return Err(CliError::Validation("--n must be at least 1".into()));
        }
        self.check_condition(condition)?;
        let path = self.vocab_path(condition);
        let existing = if path.exists() {
            Some(ConceptVocabulary::load(&path)?)
        } else {
            None
        };
        let template = self.config.elicitation_template()?;
        let fresh = match elicit_vocabulary(
            &self.corpus,
            condition,
            n,
            &template,
            self.backend.as_ref(),
            &self.elicit_options(),
        ) {
            Ok(v) => v,
            Err(ConceptError::Underfull {
                condition,
                expected,
                got,
                partial,
            }) => {
                let mut hint = String::new();
                if let Some(partial) = partial {
                    let partial_path = path.with_extension("partial.json");
                    partial.save(&partial_path)?;
                    hint = format!("; recovered concepts saved to {}", partial_path.display());
                }
                return Err(CliError::Gateway(format!(
                    "elicitation for {condition} returned {got} distinct concepts, expected {expected}{hint}; \
                     re-run or add concepts with `seed`"
                )));
            }
            Err(e) => return Err(e.into()),
        };
        let kept_pins = existing
            .as_ref()
            .map_or(0, |v| v.concepts().iter().filter(|c| c.pinned).count());
        let vocabulary = match &existing {
            Some(existing) => merge_reelicited(existing, &fresh)?,
            None => fresh,
        };
        vocabulary.save(&path)?;
        Ok(ElicitOutcome {
            vocabulary,
            path,
            kept_pins,
        })
    }

    pub fn load_vocab(&self, condition: &str) -> Result<ConceptVocabulary, CliError> {
        self.check_condition(condition)?;
        let path = self.vocab_path(condition);
        if !path.exists() {
            return Err(CliError::Missing(format!(
                "no vocabulary for {condition} in run {} ({}); run `breadthcloud elicit --condition {condition}` first",
                self.run_id,
                path.display()
            )));
        }
        Ok(ConceptVocabulary::load(&path)?)
    }

    fn save_vocab(&self, vocab: &ConceptVocabulary) -> Result<(), CliError> {
        Ok(vocab.save(&self.vocab_path(vocab.condition_id()))?)
    }

    pub fn pin(
        &self,
        condition: &str,
        concept: &str,
        pinned: bool,
    ) -> Result<ConceptVocabulary, CliError> {
        let vocab = set_pinned(
            &self.load_vocab(condition)?,
            &breadthcloud::normalize_phrase(concept),
            pinned,
        )?;
        self.save_vocab(&vocab)?;
        Ok(vocab)
    }

    pub fn seed(
        &self,
        condition: &str,
        phrases: &[String],
        pin: bool,
    ) -> Result<(ConceptVocabulary, Vec<String>), CliError> {
        let phrases: Vec<&str> = phrases.iter().map(String::as_str).collect();
        let (vocab, notices) = seed_concepts(&self.load_vocab(condition)?, &phrases, pin);
        self.save_vocab(&vocab)?;
        Ok((vocab, notices))
    }

    pub fn edit(
        &self,
        condition: &str,
        edits: &[VocabEdit],
    ) -> Result<ConceptVocabulary, CliError> {
        let vocab = split_or_merge(&self.load_vocab(condition)?, edits)?;
        self.save_vocab(&vocab)?;
        Ok(vocab)
    }

    /// Maps every transcript of `condition`. The table is written even when
    /// some rows failed; those rows are marked incomplete and the call errors.
    pub fn map(
        &self,
        condition: &str,
        tau: f64,
        mode: MappingMode,
    ) -> Result<AssignmentTable, CliError> {
        let vocab = self.load_vocab(condition)?;
        let template = self.config.mapping_template(mode)?;
        let table = map_condition(
            &self.corpus,
            condition,
            &vocab,
            &template,
            self.backend.as_ref(),
            mode,
            tau,
            &self.run_id,
            &self.map_options(),
        )?;
        let path = self.table_path(condition);
        table.save(&path)?;
        let failed = table.incomplete_rows();
        if let Some((first, why)) = failed.first() {
            return Err(CliError::Gateway(format!(
                "{} of {} transcripts could not be mapped (first: {first}: {why}); \
                 table saved with incomplete rows to {}; re-run `map`",
                failed.len(),
                table.rows().len(),
                path.display()
            )));
        }
        Ok(table)
    }

    /// Loads the table for `condition`, flagged stale when the vocabulary
    /// file has changed since mapping.
    pub fn load_table(&self, condition: &str) -> Result<AssignmentTable, CliError> {
        let vocab = self.load_vocab(condition)?;
        let path = self.table_path(condition);
        if !path.exists() {
            return Err(CliError::Missing(format!(
                "no assignment table for {condition} in run {}; run `breadthcloud map --condition {condition}` first",
                self.run_id
            )));
        }
        let mut table = AssignmentTable::load(&path)?;
        table.check_against(&vocab);
        Ok(table)
    }

    pub fn breadth(
        &self,
        condition: &str,
        force: bool,
    ) -> Result<(AssignmentTable, BreadthCounts), CliError> {
        let table = self.load_table(condition)?;
        let breadth = compute_breadth(&table, force)?;
        Ok((table, breadth))
    }

    /// Applies one analyst correction and persists the table.
    pub fn audit(
        &self,
        condition: &str,
        transcript_id: &str,
        concept: &str,
        value: bool,
        note: Option<&str>,
    ) -> Result<AssignmentTable, CliError> {
        let table = self.load_table(condition)?;
        let updated = table.apply_correction(transcript_id, concept, value, note.unwrap_or(""))?;
        updated.save(&self.table_path(condition))?;
        Ok(updated)
    }

    pub fn cloud_layout(
        &self,
        condition: &str,
        params: CloudParams,
    ) -> Result<CloudLayout, CliError> {
        let (table, breadth) = self.breadth(condition, params.force)?;
        if let Some(note) = &breadth.forced {
            tracing::warn!(condition, note = %note, "forced breadth");
        }
        let weights = scale_weights(&breadth, params.scale);
        let items = weighted_items(&weights, Some(&table), |k| breadth.get(k));
        let entries = font_sizes(&items, self.config.font_range(), params.top_k)?;
        Ok(place(
            condition,
            &entries,
            self.config.canvas(),
            params.seed,
            self.config.padding,
            self.config.spiral(),
        )?)
    }

    /// Renders the participant-weighted cloud of `condition` and writes it
    /// to the run's clouds directory.
    pub fn cloud(&self, condition: &str, params: CloudParams) -> Result<Rendered, CliError> {
        let layout = self.cloud_layout(condition, params)?;
        let svg = render_svg(&layout, &Palette::default(), &RenderOptions::default());
        let path = self.cloud_path(condition);
        write_atomic(&path, svg.as_bytes())?;
        Ok(Rendered {
            path,
            placed: layout.boxes.len(),
            overflow: layout.overflow.len(),
            svg,
        })
    }

    pub fn diff_result(
        &self,
        a: &str,
        b: &str,
        margin: u32,
        force: bool,
    ) -> Result<DiffResult, CliError> {
        let (_, ba) = self.breadth(a, force)?;
        let (_, bb) = self.breadth(b, force)?;
        Ok(diff_breadth(&ba, &bb, margin)?)
    }

    /// Contrast cloud sized by |Δb|; `separate` draws A- and B-dominant
    /// concepts in two panels.
    pub fn diff(
        &self,
        a: &str,
        b: &str,
        margin: u32,
        separate: bool,
        params: CloudParams,
    ) -> Result<Rendered, CliError> {
        let (ta, ba) = self.breadth(a, params.force)?;
        let (tb, bb) = self.breadth(b, params.force)?;
        let diff = diff_breadth(&ba, &bb, margin)?;
        let display = |key: &str| {
            [&ta, &tb]
                .iter()
                .find_map(|t| t.column(key).map(|i| t.concept_texts()[i].clone()))
                .unwrap_or_else(|| key.to_string())
        };
        let entries = diff_entries(&diff, display, self.config.font_range(), params.top_k)?;
        let label = format!("{a} vs {b}");
        let options = RenderOptions {
            diff_legend: Some((a.to_string(), b.to_string(), margin)),
        };
        let palette = Palette::default();
        let (svg, placed, overflow) = if separate {
            let (left, right) = place_separated(
                &entries,
                &label,
                self.config.canvas(),
                params.seed,
                self.config.padding,
                self.config.spiral(),
            )?;
            (
                render_svg_separated(&left, &right, &palette, &options),
                left.boxes.len() + right.boxes.len(),
                left.overflow.len() + right.overflow.len(),
            )
        } else {
            let layout = place(
                &label,
                &entries,
                self.config.canvas(),
                params.seed,
                self.config.padding,
                self.config.spiral(),
            )?;
            (
                render_svg(&layout, &palette, &options),
                layout.boxes.len(),
                layout.overflow.len(),
            )
        };
        let path = self.diff_path(a, b);
        write_atomic(&path, svg.as_bytes())?;
        Ok(Rendered {
            path,
            svg,
            placed,
            overflow,
        })
    }

    pub fn stopwords(&self) -> Result<StopWords, CliError> {
        match &self.config.stopwords {
            Some(path) => Ok(StopWords::load(path)?),
            None => Ok(StopWords::bundled()),
        }
    }

    /// Token-frequency baseline cloud of `condition`.
    pub fn freq(&self, condition: &str, top_k: usize, seed: u64) -> Result<Rendered, CliError> {
        let transcripts = self.corpus.transcripts_for(condition)?;
        let counts = frequency_counts(condition, transcripts, &self.stopwords()?);
        let entries = frequency_cloud(&counts, top_k, self.config.font_range())?;
        let layout = place(
            condition,
            &entries,
            self.config.canvas(),
            seed,
            self.config.padding,
            self.config.spiral(),
        )?;
        let svg = render_svg(&layout, &Palette::default(), &RenderOptions::default());
        let path = self.freq_path(condition);
        write_atomic(&path, svg.as_bytes())?;
        Ok(Rendered {
            path,
            placed: layout.boxes.len(),
            overflow: layout.overflow.len(),
            svg,
        })
    }

    pub fn default_cloud_params(&self) -> CloudParams {
        CloudParams {
            scale: self.config.scale,
            seed: self.config.seed,
            top_k: self.config.top_k,
            force: false,
        }
    }

    /// elicit → map → cloud for every condition in scope.
    pub fn pipeline(&self) -> Result<Vec<Rendered>, CliError> {
        let mut out = Vec::new();
        for condition in self.conditions() {
            self.elicit(&condition, self.config.n_topics)?;
            self.map(&condition, self.config.tau, self.config.mode)?;
            out.push(self.cloud(&condition, self.default_cloud_params())?);
        }
        Ok(out)
    }
}
