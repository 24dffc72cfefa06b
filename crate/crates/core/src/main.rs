use clap::{ArgAction, Args, Parser, Subcommand};
use slicetrack::bytetrack::TrackerConfig;
use slicetrack::io::{self, RecordKind};
use slicetrack::metrics::{evaluate_corpus, CorpusEval, DEFAULT_IOU_THRESHOLD};
use slicetrack::pipeline::{run_mode, HybridBase, MethodConfig, Mode};
use slicetrack::sweep::{default_grid, grid_search, threshold_tune, SweepRow, TuneRow};
use slicetrack::synth::{generate, SynthParams};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "slicetrack",
    version,
    about = "Link, refilter, and score per-slice detections across image volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Re-link a detection file and write the refiltered result.
    Track(TrackArgs),
    /// Score a prediction file against a truth file.
    Eval(EvalArgs),
    /// Grid-search tracker parameters against a truth file.
    Sweep(SweepArgs),
    /// Score the stock confidence thresholds against a truth file.
    Tune(TuneArgs),
    /// Generate a synthetic corpus of truth boxes and noisy detections.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ModeArgs {
    /// How detections are linked and refiltered.
    #[arg(long, value_enum, default_value_t = Mode::Hybrid)]
    mode: Mode,
    /// Score a detection must exceed to be kept outside tracking.
    #[arg(long, default_value_t = 0.20)]
    confidence: f64,
    /// IoU at or above which a merged pair collapses to one box.
    #[arg(long, default_value_t = 0.7)]
    dedup_iou: f64,
    /// Tracked output the hybrid union builds on.
    #[arg(long, value_enum, default_value_t = HybridBase::Bidirectional)]
    hybrid_base: HybridBase,
    /// Run the confidence filter before the neighbor-support filter.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    filter_baseline_first: bool,
}

#[derive(Args)]
struct TrackerArgs {
    /// Score at or above which a detection may start or confirm a track.
    #[arg(long, default_value_t = 0.35)]
    track_activation: f64,
    /// IoU floor for linking a detection to a predicted track box.
    #[arg(long, default_value_t = 0.95)]
    min_match: f64,
    /// Slices a track may go unseen before it is dropped.
    #[arg(long, default_value_t = 5)]
    lost_buffer: u32,
}

impl TrackerArgs {
    fn config(&self) -> TrackerConfig {
        TrackerConfig {
            track_activation: self.track_activation,
            min_match: self.min_match,
            lost_buffer: self.lost_buffer,
        }
    }
}

fn method_config(mode: &ModeArgs, tracker: TrackerConfig) -> MethodConfig {
    MethodConfig {
        mode: mode.mode,
        tracker,
        confidence: mode.confidence,
        dedup_iou: mode.dedup_iou,
        hybrid_base: mode.hybrid_base,
        filter_baseline_first: mode.filter_baseline_first,
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Detection records to process.
    #[arg(long)]
    input: PathBuf,
    /// Where the processed records go.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    mode: ModeArgs,
    #[command(flatten)]
    tracker: TrackerArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction records to score.
    #[arg(long)]
    input: PathBuf,
    /// Truth records defining the studies.
    #[arg(long)]
    truth: PathBuf,
    /// Optional JSON report path; the table always goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Detection records to process at every grid point.
    #[arg(long)]
    input: PathBuf,
    /// Truth records to score against.
    #[arg(long)]
    truth: PathBuf,
    /// Optional path for the ranked table; stdout gets it either way.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    mode: ModeArgs,
    /// Worker threads; 0 or absent picks the machine default.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct TuneArgs {
    /// Detection records to filter at every threshold.
    #[arg(long)]
    input: PathBuf,
    /// Truth records to score against.
    #[arg(long)]
    truth: PathBuf,
    /// Optional path for the table; stdout gets it either way.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; 0 or absent picks the machine default.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Where the noisy detection records go.
    #[arg(long)]
    output: PathBuf,
    /// Where the truth records go.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 8)]
    studies: usize,
    #[arg(long, default_value_t = 24)]
    slices: usize,
    /// Lesions per study.
    #[arg(long, default_value_t = 3)]
    lesions: usize,
    #[arg(long, default_value_t = 512.0)]
    image_size: f64,
    /// Per-slice probability of one clutter detection.
    #[arg(long, default_value_t = 0.2)]
    clutter_rate: f64,
    /// Probability that a truth box goes unobserved.
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    /// Half-width of the uniform noise on observed coordinates.
    #[arg(long, default_value_t = 1.0)]
    jitter: f64,
    /// Largest per-slice lesion displacement along either axis.
    #[arg(long, default_value_t = 2.0)]
    drift_cap: f64,
    /// Lowest score an observation of a real lesion can get.
    #[arg(long, default_value_t = 0.195)]
    score_floor: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Track(args) => track(args),
        Command::Eval(args) => eval(args),
        Command::Sweep(args) => sweep(args),
        Command::Tune(args) => tune(args),
        Command::Synth(args) => synth(args),
    }
}

fn track(args: TrackArgs) -> Result<(), Box<dyn std::error::Error>> {
    let config = method_config(&args.mode, args.tracker.config());
    config.validate()?;
    let volumes = io::read_file(&args.input, RecordKind::WithScores)?;
    let processed = volumes
        .iter()
        .map(|v| run_mode(v, &config))
        .collect::<Result<Vec<_>, _>>()?;
    io::write_file(
        &args.output,
        &processed,
        RecordKind::WithScores,
        Some(config.mode.name()),
    )?;
    Ok(())
}

fn eval_table(eval: &CorpusEval) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<20} {:>6} {:>6} {:>6} {:>10} {:>8} {:>8}",
        "study", "tp", "fp", "fn", "precision", "recall", "f1"
    )
    .unwrap();
    for r in eval.studies.iter().chain(std::iter::once(&eval.corpus)) {
        writeln!(
            out,
            "{:<20} {:>6} {:>6} {:>6} {:>10.4} {:>8.4} {:>8.4}",
            r.scope, r.true_positives, r.false_positives, r.false_negatives,
            r.precision, r.recall, r.f1
        )
        .unwrap();
    }
    out
}

fn eval(args: EvalArgs) -> Result<(), Box<dyn std::error::Error>> {
    let preds = io::read_file(&args.input, RecordKind::WithScores)?;
    let truth = io::read_file(&args.truth, RecordKind::BoxesOnly)?;
    let report = evaluate_corpus(&preds, &truth, DEFAULT_IOU_THRESHOLD)?;
    print!("{}", eval_table(&report));
    if let Some(path) = &args.output {
        let json = serde_json::to_string_pretty(&report)? + "\n";
        io::write_text_atomic(path, &json)?;
    }
    Ok(())
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool")
            .install(f),
        _ => f(),
    }
}

fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("track_activation\tmin_match\tlost_buffer\tprecision\trecall\tf1\n");
    for r in rows {
        writeln!(
            out,
            "{:.2}\t{:.2}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.point.track_activation, r.point.min_match, r.point.lost_buffer,
            r.precision, r.recall, r.f1
        )
        .unwrap();
    }
    out
}

fn sweep(args: SweepArgs) -> Result<(), Box<dyn std::error::Error>> {
    let config = method_config(&args.mode, TrackerConfig::default());
    config.validate()?;
    let dets = io::read_file(&args.input, RecordKind::WithScores)?;
    let truth = io::read_file(&args.truth, RecordKind::BoxesOnly)?;
    let grid = default_grid();
    let rows = with_jobs(args.jobs, || {
        grid_search(&dets, &truth, &config, &grid, DEFAULT_IOU_THRESHOLD)
    })?;
    let table = sweep_table(&rows);
    print!("{table}");
    if let Some(path) = &args.output {
        io::write_text_atomic(path, &table)?;
    }
    Ok(())
}

fn tune_table(rows: &[TuneRow]) -> String {
    let mut out = String::from("confidence\tprecision\trecall\tf1\tbest\n");
    for r in rows {
        writeln!(
            out,
            "{:.2}\t{:.6}\t{:.6}\t{:.6}\t{}",
            r.confidence, r.precision, r.recall, r.f1, r.best
        )
        .unwrap();
    }
    out
}

fn tune(args: TuneArgs) -> Result<(), Box<dyn std::error::Error>> {
    let dets = io::read_file(&args.input, RecordKind::WithScores)?;
    let truth = io::read_file(&args.truth, RecordKind::BoxesOnly)?;
    let rows = with_jobs(args.jobs, || threshold_tune(&dets, &truth, DEFAULT_IOU_THRESHOLD))?;
    let table = tune_table(&rows);
    print!("{table}");
    if let Some(path) = &args.output {
        io::write_text_atomic(path, &table)?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Box<dyn std::error::Error>> {
    let params = SynthParams {
        studies: args.studies,
        slices: args.slices,
        lesions: args.lesions,
        image_size: args.image_size,
        clutter_rate: args.clutter_rate,
        dropout: args.dropout,
        jitter: args.jitter,
        drift_cap: args.drift_cap,
        score_floor: args.score_floor,
        seed: args.seed,
    };
    let studies = generate(&params)?;
    let truth: Vec<_> = studies.iter().map(|s| s.truth.clone()).collect();
    let dets: Vec<_> = studies.iter().map(|s| s.detections.clone()).collect();
    io::write_file(&args.truth, &truth, RecordKind::BoxesOnly, None)?;
    io::write_file(&args.output, &dets, RecordKind::WithScores, None)?;
    Ok(())
}
