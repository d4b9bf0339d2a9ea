use std::io::Write;
use std::path::{Path, PathBuf};

use breadthcloud::concepts::VocabEdit;
use breadthcloud::mapping::CellProvenance;
use breadthcloud::synth;
use breadthcloud::{MappingMode, ScaleMode};
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::workspace::{CloudParams, Rendered, RunSelection, Workspace};

pub const DEFAULT_CONFIG_FILE: &str = "breadthcloud.toml";

#[derive(Debug, Parser)]
#[command(
    name = "breadthcloud",
    version,
    about = "Participant-weighted concept clouds from interview transcripts"
)]
pub struct Cli {
    /// Run configuration (TOML). Defaults to ./breadthcloud.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Work in this run directory instead of the latest one.
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    /// Start a new run directory.
    #[arg(long, global = true)]
    pub new_run: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CloudArgs {
    #[arg(long)]
    pub scale: Option<ScaleMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Build from an incomplete or stale table, excluding unusable rows.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propose a concept vocabulary for a condition (all conditions when omitted).
    Elicit {
        #[arg(long)]
        condition: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Judge every transcript of a condition against its vocabulary.
    Map {
        #[arg(long)]
        condition: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        mode: Option<MappingMode>,
    },
    /// Render the participant-weighted cloud of a condition.
    Cloud {
        #[arg(long)]
        condition: Option<String>,
        #[command(flatten)]
        cloud: CloudArgs,
    },
    /// Render a contrast cloud of two conditions.
    Diff {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        margin: Option<u32>,
        /// Two panels instead of one shared cloud.
        #[arg(long)]
        separate: bool,
        #[command(flatten)]
        cloud: CloudArgs,
    },
    /// Render the token-frequency baseline cloud of a condition.
    Freq {
        #[arg(long)]
        condition: String,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print breadth counts of a condition as JSON.
    Breadth {
        #[arg(long)]
        condition: String,
        #[arg(long)]
        force: bool,
    },
    /// Correct one cell of an assignment table.
    Audit {
        #[arg(long)]
        condition: String,
        #[arg(long)]
        transcript: String,
        #[arg(long)]
        concept: String,
        /// 1/0, true/false, yes/no.
        #[arg(long, value_parser = parse_bool, action = clap::ArgAction::Set)]
        value: bool,
        #[arg(long)]
        note: Option<String>,
    },
    /// Pin (or unpin) a concept so re-elicitation keeps it.
    Pin {
        #[arg(long)]
        condition: String,
        #[arg(long)]
        concept: String,
        #[arg(long)]
        unpin: bool,
    },
    /// Add analyst concepts to a vocabulary.
    Seed {
        #[arg(long)]
        condition: String,
        #[arg(long = "phrase", required = true)]
        phrases: Vec<String>,
        #[arg(long)]
        pin: bool,
    },
    /// Apply split/merge edits from a JSON file holding a list of {remove, add, unpin}.
    Edit {
        #[arg(long)]
        condition: String,
        #[arg(long)]
        edits: PathBuf,
    },
    /// elicit, map and cloud for every condition.
    Pipeline,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Write the synthetic study (corpus, fixtures, config) into a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        seed: u64,
    },
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(format!("expected 1/0, true/false or yes/no, got {s:?}")),
    }
}

/// Config used when none is named: ./breadthcloud.toml if present, else defaults.
pub fn resolve_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None if Path::new(DEFAULT_CONFIG_FILE).exists() => {
            RunConfig::load(Path::new(DEFAULT_CONFIG_FILE))
        }
        None => {
            let mut config = RunConfig::default();
            config.apply_env(|k| std::env::var(k).ok())?;
            Ok(config)
        }
    }
}

fn scoped(ws: &Workspace, condition: Option<String>) -> Vec<String> {
    condition.map_or_else(|| ws.conditions(), |c| vec![c])
}

fn cloud_params(ws: &Workspace, args: &CloudArgs) -> Result<CloudParams, CliError> {
    if args.top_k == Some(0) {
        return Err(CliError::Validation("--top-k must be at least 1".into()));
    }
    let defaults = ws.default_cloud_params();
    Ok(CloudParams {
        scale: args.scale.unwrap_or(defaults.scale),
        seed: args.seed.unwrap_or(defaults.seed),
        top_k: args.top_k.or(defaults.top_k),
        force: args.force,
    })
}

fn report(out: &mut dyn Write, r: &Rendered) -> std::io::Result<()> {
    write!(out, "wrote {} ({} placed", r.path.display(), r.placed)?;
    if r.overflow > 0 {
        write!(out, ", {} did not fit", r.overflow)?;
    }
    writeln!(out, ")")
}

fn io(e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write output: {e}"))
}

pub fn write_synth(dir: &Path, seed: u64) -> Result<(), CliError> {
    synth::write_study(dir, seed)?;
    let config = format!(
        "corpus_root = \"{}\"\ncorpus_format = \"line-delimited-records\"\nbackend = \"fixture\"\nfixtures = \"{}\"\noutput_dir = \"runs\"\n",
        synth::CORPUS_FILE,
        synth::FIXTURES_FILE
    );
    breadthcloud::util::write_atomic(&dir.join(DEFAULT_CONFIG_FILE), config.as_bytes())?;
    Ok(())
}

/// Executes one parsed command, printing human-readable results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if let Command::Synth { out: dir, seed } = &cli.command {
        write_synth(dir, *seed)?;
        writeln!(out, "wrote synthetic study to {}", dir.display()).map_err(io)?;
        return Ok(());
    }

    let mut config = resolve_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Elicit { n: Some(n), .. } => config.n_topics = *n,
        Command::Map { tau, mode, .. } => {
            config.tau = tau.unwrap_or(config.tau);
            config.mode = mode.unwrap_or(config.mode);
        }
        _ => {}
    }
    if let Command::Elicit { n: Some(0), .. } = &cli.command {
        return Err(CliError::Validation("--n must be at least 1".into()));
    }
    let selection = RunSelection {
        run_id: cli.run_id.clone(),
        new_run: cli.new_run,
    };

    if let Command::Serve { bind } = &cli.command {
        let ws = Workspace::open(config, &selection)?;
        let runtime =
            tokio::runtime::Runtime::new().map_err(|e| CliError::Data(format!("runtime: {e}")))?;
        writeln!(out, "serving run {} on http://{bind}", ws.run_id).map_err(io)?;
        return runtime.block_on(crate::server::serve(ws, bind));
    }

    let ws = Workspace::open(config, &selection)?;
    match cli.command {
        Command::Elicit { condition, .. } => {
            for c in scoped(&ws, condition) {
                let outcome = ws.elicit(&c, ws.config.n_topics)?;
                writeln!(
                    out,
                    "{c}: {} concepts -> {}",
                    outcome.vocabulary.len(),
                    outcome.path.display()
                )
                .map_err(io)?;
                if outcome.kept_pins > 0 {
                    writeln!(out, "  kept {} pinned concept(s)", outcome.kept_pins).map_err(io)?;
                }
                for concept in outcome.vocabulary.concepts() {
                    let pin = if concept.pinned { " [pinned]" } else { "" };
                    writeln!(out, "  - {}{pin}", concept.text()).map_err(io)?;
                }
            }
        }
        Command::Map { condition, .. } => {
            for c in scoped(&ws, condition) {
                let table = ws.map(&c, ws.config.tau, ws.config.mode)?;
                writeln!(
                    out,
                    "{c}: {} rows x {} concepts (tau {}, {}) -> {}",
                    table.rows().len(),
                    table.concept_keys().len(),
                    table.tau,
                    match table.mode {
                        MappingMode::Binary => "binary",
                        MappingMode::Soft => "soft",
                    },
                    ws.table_path(&c).display()
                )
                .map_err(io)?;
            }
        }
        Command::Cloud { condition, cloud } => {
            let params = cloud_params(&ws, &cloud)?;
            for c in scoped(&ws, condition) {
                report(out, &ws.cloud(&c, params)?).map_err(io)?;
            }
        }
        Command::Diff {
            a,
            b,
            margin,
            separate,
            cloud,
        } => {
            let params = cloud_params(&ws, &cloud)?;
            let margin = margin.unwrap_or(ws.config.margin);
            report(out, &ws.diff(&a, &b, margin, separate, params)?).map_err(io)?;
        }
        Command::Freq {
            condition,
            top_k,
            seed,
        } => {
            let top_k = top_k.unwrap_or(ws.config.freq_top_k);
            if top_k == 0 {
                return Err(CliError::Validation("--top-k must be at least 1".into()));
            }
            report(
                out,
                &ws.freq(&condition, top_k, seed.unwrap_or(ws.config.seed))?,
            )
            .map_err(io)?;
        }
        Command::Breadth { condition, force } => {
            let (_, breadth) = ws.breadth(&condition, force)?;
            writeln!(out, "{}", breadth.to_json()).map_err(io)?;
        }
        Command::Audit {
            condition,
            transcript,
            concept,
            value,
            note,
        } => {
            let before = ws.load_table(&condition)?;
            let old = before
                .cell(&transcript, &concept)
                .map(|c| (c.value, c.provenance));
            let after = ws.audit(&condition, &transcript, &concept, value, note.as_deref())?;
            let mark = |(v, p): (bool, CellProvenance)| {
                format!(
                    "{}{}",
                    u8::from(v),
                    if p == CellProvenance::Human { "*" } else { "" }
                )
            };
            let new = after
                .cell(&transcript, &concept)
                .map(|c| (c.value, c.provenance));
            writeln!(
                out,
                "{condition} {transcript} {concept}: {} -> {} (journal entry {})",
                old.map(mark).unwrap_or_default(),
                new.map(mark).unwrap_or_default(),
                after.journal().len()
            )
            .map_err(io)?;
        }
        Command::Pin {
            condition,
            concept,
            unpin,
        } => {
            let vocab = ws.pin(&condition, &concept, !unpin)?;
            writeln!(out, "{condition}: vocabulary {}", vocab.version()).map_err(io)?;
        }
        Command::Seed {
            condition,
            phrases,
            pin,
        } => {
            let (vocab, notices) = ws.seed(&condition, &phrases, pin)?;
            for n in notices {
                writeln!(out, "note: {n}").map_err(io)?;
            }
            writeln!(
                out,
                "{condition}: {} concepts, vocabulary {}",
                vocab.len(),
                vocab.version()
            )
            .map_err(io)?;
        }
        Command::Edit { condition, edits } => {
            let text = std::fs::read_to_string(&edits).map_err(|e| {
                CliError::Validation(format!("cannot read {}: {e}", edits.display()))
            })?;
            let edits: Vec<VocabEdit> = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", edits.display())))?;
            let vocab = ws.edit(&condition, &edits)?;
            writeln!(
                out,
                "{condition}: {} concepts, vocabulary {}",
                vocab.len(),
                vocab.version()
            )
            .map_err(io)?;
        }
        Command::Pipeline => {
            for r in ws.pipeline()? {
                report(out, &r).map_err(io)?;
            }
            writeln!(out, "run {}", ws.run_id).map_err(io)?;
        }
        Command::Serve { .. } | Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}
