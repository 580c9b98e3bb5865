use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use sentipolis::enrichment::{parse_anchor_rows, parse_raw_anchor_rows, write_anchors};
use sentipolis::eval::{
    inter_judge_report, judge_transcript, read_scorecards, render_transcript, write_report, write_scorecards,
    JudgeScorecard, DEFAULT_RUBRIC,
};
use sentipolis::gateway::{ChatBackend, LiveBackend, ScriptedBackend};
use sentipolis::network::{analyze, write_metrics_csv, AnalysisConfig, MetricsRow};
use sentipolis::network::{DEFAULT_RESOLUTION, DEFAULT_SEED, DEFAULT_TAU};
use sentipolis::sim::{parse_personas, read_snapshots, ConversationRecord, SimConfig, SimError, World};
use sentipolis::sim::DEFAULT_PERSONAS_JSONL;

mod selftest;

const EXIT_CODES: &str = "Exit codes:
  0  success
  1  selftest check failed
  2  configuration or input parse error (including missing input files)
  3  chat backend error (for example, live backend without an API key)
  4  I/O error while writing outputs";

#[derive(Parser)]
#[command(name = "sentipolis", version, about = "Emotion-aware agent town simulation and analysis", after_help = EXIT_CODES)]
struct Cli {
    /// Increase log verbosity (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Mock,
    Live,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots, transcripts, memories and a manifest.
    #[command(after_help = EXIT_CODES)]
    Simulate {
        /// TOML configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Persona JSONL; the bundled 25 personas when omitted.
        #[arg(long)]
        personas: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
        backend: BackendKind,
        /// Reply script for the mock backend.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Overrides rng_seed from the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute per-snapshot network metrics from a snapshot log.
    #[command(after_help = EXIT_CODES)]
    Analyze {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Metrics CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an anchor CSV into the normalized [-1, 1] form.
    #[command(after_help = EXIT_CODES)]
    Anchors {
        #[arg(long = "in")]
        input: PathBuf,
        /// Treat every value as raw 0-7 and map it to [-1, 1].
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score transcripts with one or more judges and report agreement.
    #[command(after_help = EXIT_CODES)]
    Judge {
        /// Transcript JSONL written by `simulate`.
        #[arg(long, required_unless_present = "scorecards")]
        transcripts: Option<PathBuf>,
        /// `ID=SCRIPT` for the mock backend or `ID=MODEL` for the live one. Repeatable.
        #[arg(long = "judge", value_name = "ID=SPEC", required_unless_present = "scorecards")]
        judges: Vec<String>,
        #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
        backend: BackendKind,
        /// Rubric text used as the judge system prompt.
        #[arg(long)]
        rubric: Option<PathBuf>,
        /// Skip judging and compute agreement from an existing scorecard CSV.
        #[arg(long, conflicts_with_all = ["transcripts", "judges"])]
        scorecards: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in validation checks.
    #[command(after_help = EXIT_CODES)]
    Selftest,
}

#[derive(Debug)]
enum Failure {
    Check,
    Input(String),
    Backend(String),
    Output(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Input(_) => 2,
            Failure::Backend(_) => 3,
            Failure::Output(_) => 4,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io { .. } => Failure::Output(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Output(format!("cannot create {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Failure::Output(format!("cannot create {}: {e}", path.display())))
}

fn output_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Output(format!("cannot write {}: {e}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn script_backend(path: &Path) -> Result<ScriptedBackend> {
    ScriptedBackend::from_jsonl(&read_input(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn live_backend() -> Result<LiveBackend> {
    LiveBackend::from_env().map_err(|e| Failure::Backend(e.to_string()))
}

struct Input {
    label: String,
    digest: String,
}

fn simulate(
    config: Option<&Path>,
    personas: Option<&Path>,
    out: &Path,
    backend: BackendKind,
    script: Option<&Path>,
    seed: Option<u64>,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => SimConfig::from_toml(&read_input(p)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }

    let (persona_text, persona_label) = match personas {
        Some(p) => (read_input(p)?, p.display().to_string()),
        None => (DEFAULT_PERSONAS_JSONL.to_string(), "bundled".to_string()),
    };
    let profiles = parse_personas(&persona_text).map_err(|e| Failure::Input(format!("personas: {e}")))?;
    let mut inputs = vec![(
        "personas",
        Input { label: persona_label, digest: sha256_hex(persona_text.as_bytes()) },
    )];

    let chat: Arc<dyn ChatBackend> = match backend {
        BackendKind::Mock => {
            let path = script.ok_or_else(|| Failure::Input("the mock backend requires --script".into()))?;
            let text = read_input(path)?;
            inputs.push(("script", Input { label: path.display().to_string(), digest: sha256_hex(text.as_bytes()) }));
            Arc::new(ScriptedBackend::from_jsonl(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?)
        }
        BackendKind::Live => Arc::new(live_backend()?),
    };
    let mut world = World::new(cfg.clone(), profiles, chat)?;

    create_dir(out)?;
    let snap_path = out.join("snapshots.jsonl");
    let tx_path = out.join("transcripts.jsonl");
    let mut snaps = create(&snap_path)?;
    let mut txs = create(&tx_path)?;
    let summary = world.run(&mut snaps, &mut txs)?;
    snaps.flush().map_err(output_err(&snap_path))?;
    txs.flush().map_err(output_err(&tx_path))?;
    drop((snaps, txs));

    let mem_dir = out.join("memory");
    create_dir(&mem_dir)?;
    for agent in world.agents() {
        let path = mem_dir.join(format!("{}.jsonl", agent.profile.id));
        let mut w = create(&path)?;
        agent
            .memory
            .write_jsonl(&mut w, false)
            .map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))?;
        w.flush().map_err(output_err(&path))?;
    }

    let mut outputs = BTreeMap::new();
    let mut files = vec![snap_path.clone(), tx_path.clone()];
    files.extend(world.agents().iter().map(|a| mem_dir.join(format!("{}.jsonl", a.profile.id))));
    for path in &files {
        let bytes = fs::read(path).map_err(output_err(path))?;
        let rel = path.strip_prefix(out).unwrap_or(path).to_string_lossy().replace('\\', "/");
        outputs.insert(rel, sha256_hex(&bytes));
    }
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.rng_seed,
        "backend": format!("{backend:?}").to_lowercase(),
        "config": cfg,
        "inputs": inputs
            .iter()
            .map(|(k, i)| (k.to_string(), serde_json::json!({ "source": i.label, "sha256": i.digest })))
            .collect::<BTreeMap<_, _>>(),
        "outputs": outputs,
        "summary": {
            "steps": summary.steps,
            "conversations": summary.conversations,
            "snapshots": summary.snapshots,
            "reflections": summary.reflections,
        },
    });
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(output_err(&manifest_path))?;

    println!(
        "ran {} steps: {} conversations, {} reflections, {} snapshots written to {}",
        summary.steps,
        summary.conversations,
        summary.reflections,
        summary.snapshots,
        out.display()
    );
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn show(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

fn print_summary(rows: &[MetricsRow]) {
    let last = rows.last();
    println!("snapshots: {}", rows.len());
    println!("final Q: {}", show(last.map(|r| r.q)));
    println!("mean NMI: {}", show(mean(rows.iter().filter_map(|r| r.nmi_prev))));
    println!("mean drift: {}", show(mean(rows.iter().filter_map(|r| r.drift_prev))));
    println!("final r: {}", show(last.map(|r| r.r)));
    println!("final r_w: {}", show(last.map(|r| r.r_w)));
    let flagged: Vec<String> = rows.iter().filter(|r| r.r == 0.0).map(|r| r.step.to_string()).collect();
    if !flagged.is_empty() {
        println!("no reciprocal pairs (r_w reported as 0) at steps: {}", flagged.join(","));
    }
}

fn analyze_cmd(snapshots: &Path, cfg: AnalysisConfig, out: &Path) -> Result<()> {
    let file = File::open(snapshots).map_err(|e| Failure::Input(format!("cannot read {}: {e}", snapshots.display())))?;
    let log = read_snapshots(BufReader::new(file)).map_err(|e| Failure::Input(format!("{}: {e}", snapshots.display())))?;
    if !(cfg.tau.is_finite() && cfg.resolution.is_finite() && cfg.resolution > 0.0) {
        return Err(Failure::Input("tau must be finite and resolution positive".into()));
    }
    let rows = analyze(&log, &cfg).map_err(|e| Failure::Input(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut w = create(out)?;
    write_metrics_csv(&mut w, &rows).map_err(|e| Failure::Output(format!("cannot write {}: {e}", out.display())))?;
    w.flush().map_err(output_err(out))?;
    print_summary(&rows);
    Ok(())
}

fn anchors_cmd(input: &Path, normalize: bool, out: &Path) -> Result<()> {
    let text = read_input(input)?;
    let rows = if normalize { parse_raw_anchor_rows(&text) } else { parse_anchor_rows(&text) }
        .map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    let mut w = create(out)?;
    write_anchors(&rows, &mut w).map_err(|e| Failure::Output(format!("cannot write {}: {e}", out.display())))?;
    w.flush().map_err(output_err(out))?;
    println!("wrote {} anchors to {}", rows.len(), out.display());
    Ok(())
}

fn transcript_id(rec: &ConversationRecord) -> String {
    format!("s{:03}_{}_{}", rec.step, rec.participants[0], rec.participants[1])
}

fn load_transcripts(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_input(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: ConversationRecord = serde_json::from_str(line)
            .map_err(|e| Failure::Input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push((transcript_id(&rec), render_transcript(&rec)));
    }
    Ok(out)
}

fn parse_judge_spec(spec: &str) -> Result<(String, String)> {
    match spec.split_once('=') {
        Some((id, rest)) if !id.trim().is_empty() && !rest.trim().is_empty() => {
            Ok((id.trim().to_string(), rest.trim().to_string()))
        }
        _ => Err(Failure::Input(format!("judge {spec:?} must look like ID=SPEC"))),
    }
}

fn judge_cmd(
    transcripts: Option<&Path>,
    judges: &[String],
    backend: BackendKind,
    rubric: Option<&Path>,
    scorecards: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cards: Vec<JudgeScorecard> = if let Some(path) = scorecards {
        let file = File::open(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        read_scorecards(file).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
    } else {
        let rubric_text = match rubric {
            Some(p) => read_input(p)?,
            None => DEFAULT_RUBRIC.to_string(),
        };
        let items = load_transcripts(transcripts.expect("clap enforces --transcripts"))?;
        let mut panel: Vec<(String, Box<dyn ChatBackend>)> = Vec::new();
        let mut base_live: Option<LiveBackend> = None;
        for spec in judges {
            let (id, target) = parse_judge_spec(spec)?;
            if panel.iter().any(|(j, _)| *j == id) {
                return Err(Failure::Input(format!("judge id {id:?} given twice")));
            }
            let chat: Box<dyn ChatBackend> = match backend {
                BackendKind::Mock => Box::new(script_backend(Path::new(&target))?.with_id(id.clone())),
                BackendKind::Live => {
                    if base_live.is_none() {
                        base_live = Some(live_backend()?);
                    }
                    Box::new(base_live.as_ref().expect("set above").with_model(target))
                }
            };
            panel.push((id, chat));
        }
        let mut cards = Vec::new();
        for (tid, text) in &items {
            for (jid, chat) in &panel {
                match judge_transcript(tid, text, chat.as_ref(), jid, &rubric_text) {
                    Ok((card, _)) => cards.push(card),
                    Err(e) => log::warn!("judge {jid} on {tid}: {e}; cell left missing"),
                }
            }
        }
        cards
    };

    create_dir(out)?;
    let report = inter_judge_report(&cards).map_err(|e| Failure::Input(e.to_string()))?;
    let cards_path = out.join("scorecards.csv");
    let mut w = create(&cards_path)?;
    write_scorecards(&mut w, &cards).map_err(|e| Failure::Output(format!("cannot write {}: {e}", cards_path.display())))?;
    w.flush().map_err(output_err(&cards_path))?;
    let report_path = out.join("agreement.csv");
    let mut w = create(&report_path)?;
    write_report(&mut w, &report).map_err(|e| Failure::Output(format!("cannot write {}: {e}", report_path.display())))?;
    w.flush().map_err(output_err(&report_path))?;

    println!("scorecards: {}", cards.len());
    for ((a, b), pair) in &report.pairs {
        println!("{a} vs {b}: mean rho {} over {} transcripts", show(pair.mean), pair.shared_items);
    }
    println!("overall mean rho: {}", show(report.overall_mean));
    Ok(())
}

fn selftest_cmd() -> Result<()> {
    let checks = selftest::run_all();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, personas, out, backend, script, seed } => simulate(
            config.as_deref(),
            personas.as_deref(),
            &out,
            backend,
            script.as_deref(),
            seed,
        ),
        Command::Analyze { snapshots, tau, resolution, seed, out } => {
            analyze_cmd(&snapshots, AnalysisConfig { tau, resolution, seed }, &out)
        }
        Command::Anchors { input, normalize, out } => anchors_cmd(&input, normalize, &out),
        Command::Judge { transcripts, judges, backend, rubric, scorecards, out } => judge_cmd(
            transcripts.as_deref(),
            &judges,
            backend,
            rubric.as_deref(),
            scorecards.as_deref(),
            &out,
        ),
        Command::Selftest => selftest_cmd(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Check => eprintln!("selftest failed"),
                Failure::Input(m) | Failure::Backend(m) | Failure::Output(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
