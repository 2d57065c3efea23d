//! The `agentbank` command line. `run_with` takes explicit streams so tests can
//! drive it in-process.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use agentbank::agent::{generate_expert_reflections, PredictionTrace, Variant};
use agentbank::corpus::{store_json, CorpusDir, CorpusError, InterviewTranscript};
use agentbank::interviewer::{
    checkpoint_path, resume, run_simulated, ActionKind, InterviewError, InterviewScript, Interviewer,
    InterviewerAction, InterviewerConfig, SessionState, SimulatedInterviewee,
};
use agentbank::llm::ChatBackend;
use agentbank::runner::{
    predict_population, run_bias_study, run_prediction_study, run_replication_study, BackendSpec, Backends, Population,
    RunnerError, StudyPlan, StudyReport,
};
use agentbank_server::{BankConfig, ServerError};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Interview(#[from] InterviewError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(
    name = "agentbank",
    version,
    about = "Interview people, build generative agents of them and measure how well the agents predict their answers"
)]
struct Cli {
    /// Overrides the plan seed; every random choice derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// echo | uniform | mock:PATH | remote:MODEL. Defaults to the plan's backend.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<BackendSpec>,
    /// Debug logging on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scripted interview, from stdin or from a simulated interviewee.
    Interview(InterviewArgs),
    /// Generate expert reflections for every transcript in the corpus.
    Reflect(PlanArgs),
    /// Predict every battery item for one conditioning variant.
    Predict {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        condition: String,
    },
    /// Prediction fidelity against the participants' own answers.
    Evaluate(PlanArgs),
    /// Run the experiments on agents and compare with the humans.
    Replicate(PlanArgs),
    /// Fidelity gaps across demographic groups.
    Bias(PlanArgs),
    /// Serve the agent bank and interview sessions over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Render a stored report.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
        #[arg(long, default_value = "out/prediction/report.json")]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    plan: PathBuf,
}

#[derive(Debug, Args)]
struct InterviewArgs {
    #[arg(long)]
    script: PathBuf,
    #[arg(long)]
    participant: String,
    /// JSON file with scripted answers; without it answers are read from stdin, one per line.
    #[arg(long)]
    simulated_answers: Option<PathBuf>,
    #[arg(long, default_value = "out/interviews")]
    out: PathBuf,
    /// Continue from the participant's last checkpoint.
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value_t = 10_000)]
    max_turns: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

fn parse_backend(s: &str) -> Result<BackendSpec, String> {
    match s.split_once(':') {
        None if s == "echo" => Ok(BackendSpec::Echo),
        None if s == "uniform" => Ok(BackendSpec::Uniform),
        Some(("mock", path)) if !path.is_empty() => Ok(BackendSpec::Mock { script: path.into() }),
        Some(("remote", model)) if !model.is_empty() => {
            Ok(BackendSpec::Remote { model: model.into(), base_url: None, rate_limit: None })
        }
        _ => Err(format!("`{s}` is not one of echo, uniform, mock:PATH, remote:MODEL")),
    }
}

pub struct Streams<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Entry point for the binary.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    run_with(argv, Streams { input: &mut input, out: &mut out, err: &mut err })
}

pub fn run_with<I, T>(argv: I, io: Streams<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(io.out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(io.err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    init_logging(cli.verbose);
    let Streams { input, out, err } = io;
    match dispatch(&cli, input, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    // a second init in the same process (tests) is harmless
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.cli.workdir.join(p)
        }
    }

    fn backend_override(&self) -> Option<BackendSpec> {
        self.cli.backend.clone().map(|mut b| {
            if let BackendSpec::Mock { script } = &mut b {
                *script = self.path(script);
            }
            b
        })
    }

    fn plan(&self, args: &PlanArgs) -> Result<StudyPlan, CliError> {
        let mut plan = StudyPlan::load(&self.path(&args.plan))?.rebased(&self.cli.workdir);
        if let Some(seed) = self.cli.seed {
            plan.seed = seed;
        }
        if let Some(b) = self.backend_override() {
            plan.backend = b;
        }
        Ok(plan)
    }
}

fn dispatch(cli: &Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Interview(args) => interview(&ctx, args, input, out),
        Command::Reflect(args) => reflect(&ctx.plan(args)?, out),
        Command::Predict { plan, condition } => {
            let mut plan = ctx.plan(plan)?;
            let variant: Variant = condition.parse().map_err(|e| CliError::Usage(format!("--condition: {e}")))?;
            plan.conditions = vec![variant];
            predict(&plan, variant, out)
        }
        Command::Evaluate(args) => {
            let plan = ctx.plan(args)?;
            let (report, traces) = run_prediction_study(&plan)?;
            write_report(&plan, &StudyReport::Prediction(report), &traces, out)
        }
        Command::Replicate(args) => {
            let plan = ctx.plan(args)?;
            let (report, traces) = run_replication_study(&plan)?;
            write_report(&plan, &StudyReport::Replication(report), &traces, out)
        }
        Command::Bias(args) => {
            let plan = ctx.plan(args)?;
            let (prediction, _) = run_prediction_study(&plan)?;
            let report = run_bias_study(&plan, &prediction)?;
            write_report(&plan, &StudyReport::Bias(report), &[], out)
        }
        Command::Serve { config, port } => {
            let path = ctx.path(config);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let mut config = BankConfig::from_toml(&text)?.rebased(&cli.workdir);
            if let Some(p) = port {
                config.port = *p;
            }
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if let Some(b) = ctx.backend_override() {
                config.backend = Some(b);
            }
            agentbank_server::serve(&config)?;
            Ok(())
        }
        Command::Report { format, input } => {
            let report = StudyReport::load(&ctx.path(input))?;
            let body = match format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
                Format::Md => report.to_markdown(),
            };
            emit(out, &body)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn write_report(
    plan: &StudyPlan,
    report: &StudyReport,
    traces: &[PredictionTrace],
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let dir = report.write(&plan.output_dir, traces)?;
    emit(out, &report.to_markdown())?;
    emit(out, &format!("wrote {}\n", dir.display()))
}

fn write_traces(path: &Path, traces: &[PredictionTrace]) -> Result<(), CliError> {
    let mut buf = String::new();
    for t in traces {
        buf.push_str(&serde_json::to_string(t).expect("trace serializes"));
        buf.push('\n');
    }
    fs::write(path, buf).map_err(io_err(path))
}

fn predict(plan: &StudyPlan, variant: Variant, out: &mut dyn Write) -> Result<(), CliError> {
    let runs = predict_population(plan)?;
    let dir = plan.output_dir.join("predictions").join(variant.to_string().replace(':', "_"));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for set in runs.predictions(variant) {
        store_json(set, &dir.join(format!("{}.json", set.subject_id)))?;
    }
    write_traces(&dir.join("trace.jsonl"), &runs.traces())?;
    emit(
        out,
        &format!("predicted {} subjects under {variant}\nwrote {}\n", runs.population.subjects.len(), dir.display()),
    )
}

fn reflect(plan: &StudyPlan, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = CorpusDir::new(&plan.corpus);
    let population = Population::load(&corpus)?;
    let batteries = plan.load_batteries()?;
    let backends = Backends::build(&plan.backend, &batteries, plan.seed)?;
    let mut written = 0;
    for subject in &population.subjects {
        let Some(transcript) = &subject.transcript else { continue };
        let backend = backends.for_subject(subject);
        let notes = generate_expert_reflections(transcript, &backend).map_err(RunnerError::from)?;
        store_json(&notes, &corpus.reflections_path(subject.id()))?;
        written += 1;
    }
    emit(out, &format!("wrote reflections for {written} participants\n"))
}

fn interview(
    ctx: &Ctx<'_>,
    args: &InterviewArgs,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if args.participant.trim().is_empty() {
        return Err(CliError::Usage("--participant is empty".into()));
    }
    let script = InterviewScript::load(&ctx.path(&args.script))?;
    let spec = ctx.backend_override().unwrap_or(BackendSpec::Uniform);
    let backend = Backends::build(&spec, &[], ctx.cli.seed.unwrap_or(0))?.conversational();
    let dir = ctx.path(&args.out);
    let config = InterviewerConfig { checkpoint_dir: Some(dir.clone()), ..InterviewerConfig::default() };
    let interviewer = Interviewer::new(backend, config);
    let transcript_path = dir.join(format!("{}.jsonl", args.participant));

    let state = match &args.simulated_answers {
        Some(path) => {
            let path = ctx.path(path);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let mut who: SimulatedInterviewee = agentbank::corpus::from_json_str(&text)?;
            who.participant_id = args.participant.clone();
            run_simulated(&interviewer, script, &who, args.max_turns)?
        }
        None => {
            let (mut s, action) = if args.resume {
                let mut s = resume(&checkpoint_path(&dir, &args.participant))?;
                let a = interviewer.next_action(&mut s)?;
                (s, a)
            } else {
                interviewer.begin_session(script, &args.participant)?
            };
            if !converse(&interviewer, &mut s, action, input, out, args.max_turns)? {
                s.transcript.store(&transcript_path)?;
                return emit(
                    out,
                    &format!(
                        "\npaused at question {} of {}; resume with --resume\n",
                        s.checkpoint_index + 1,
                        s.script.len()
                    ),
                );
            }
            s
        }
    };
    finish(&state.transcript, &transcript_path, out)
}

/// Speaks actions and reads answers until the interview ends (true) or input runs out (false).
fn converse(
    interviewer: &Interviewer<std::sync::Arc<dyn ChatBackend>>,
    s: &mut SessionState,
    mut action: InterviewerAction,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    max_turns: usize,
) -> Result<bool, CliError> {
    let stdout = Path::new("<stdout>");
    for _ in 0..max_turns {
        for line in &action.preamble {
            writeln!(out, "{line}").map_err(io_err(stdout))?;
        }
        match action.kind {
            ActionKind::Finish => return Ok(true),
            ActionKind::Advance => {
                action = interviewer.next_action(s)?;
                continue;
            }
            ActionKind::AskScripted | ActionKind::FollowUp => {}
        }
        write!(out, "[{}/{}] {}\n> ", s.current_question_index + 1, s.script.len(), action.utterance)
            .map_err(io_err(stdout))?;
        out.flush().map_err(io_err(stdout))?;
        let asked = Instant::now();
        let mut line = String::new();
        loop {
            line.clear();
            if input.read_line(&mut line).map_err(io_err(Path::new("<stdin>")))? == 0 {
                return Ok(false);
            }
            if !line.trim().is_empty() {
                break;
            }
        }
        action = interviewer.submit_answer(s, line.trim(), asked.elapsed().as_secs_f64())?;
    }
    Err(CliError::Usage(format!("interview did not finish within {max_turns} answers")))
}

fn finish(t: &InterviewTranscript, path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    t.store(path)?;
    emit(
        out,
        &format!(
            "interview complete: {} turns\nwords: interviewer={} participant={}\nwrote {}\n",
            t.turns.len(),
            t.word_counts.interviewer,
            t.word_counts.participant,
            path.display()
        ),
    )
}
