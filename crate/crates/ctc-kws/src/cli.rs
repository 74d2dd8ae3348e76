//! The `ctc-kws` command line: scoring, windowed VAD, live stream
//! detection, ROC evaluation, model inspection and fixture synthesis.
//!
//! Results go to stdout, diagnostics to stderr. Exit codes: 0 on success,
//! 1 for usage errors, 2 for data or model errors.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::alphabet::Alphabet;
use crate::detector::{Detector, DetectorConfig};
use crate::eval::{
    evaluate, load_manifest, synth_posteriors, EvalConfig, EvalTask as Task, SYNTH_FRAME_DURATION,
};
use crate::features::{
    compute_spectrogram, read_wav, FeatureConfig, SpectrogramStreamer, MODEL_SAMPLE_RATE,
};
use crate::label::Keyword;
use crate::model::io::load_model;
use crate::model::AcousticModel;
use crate::posterior::{read_posteriors, write_posteriors, PosteriorMatrix};
use crate::scoring::{score_keyword, vad_score};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(
    name = "ctc-kws",
    about = "Keyword spotting and voice activity detection over CTC posteriors",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a keyword against one utterance and print the log score.
    Score(ScoreArgs),
    /// Print per-window speech probabilities for one utterance.
    Vad(VadArgs),
    /// Detect keyword/speech events in raw PCM16 audio on stdin.
    Stream(StreamArgs),
    /// Evaluate a manifest of labeled utterances and report the ROC.
    Eval(EvalArgs),
    /// Print a model's configuration and parameter count.
    Info(InfoArgs),
    /// Write synthetic posterior files plus a manifest.
    Synth(SynthArgs),
}

/// Exactly one utterance source: audio (through the model) or a
/// precomputed posterior file.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// 8 kHz mono PCM16 WAV file (requires --model)
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Precomputed .ctcp posterior file
    #[arg(long)]
    posteriors: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Keyword to score
    #[arg(long)]
    keyword: String,
    #[command(flatten)]
    input: InputArgs,
    /// Acoustic model (.kwsm), needed for --audio input
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct VadArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Acoustic model (.kwsm), needed for --audio input
    #[arg(long)]
    model: Option<PathBuf>,
    /// Scoring window in milliseconds
    #[arg(long, default_value_t = 800.0)]
    window_ms: f64,
    /// Evaluation period in milliseconds
    #[arg(long, default_value_t = 100.0)]
    hop_ms: f64,
}

#[derive(Args)]
struct StreamArgs {
    /// Acoustic model (.kwsm)
    #[arg(long)]
    model: PathBuf,
    /// Keyword to spot (enables the keyword task)
    #[arg(long)]
    keyword: Option<String>,
    /// Log-score threshold for keyword events
    #[arg(long, requires = "keyword", allow_hyphen_values = true)]
    kws_threshold: Option<f64>,
    /// Speech-probability threshold for onset/offset events
    #[arg(long)]
    vad_threshold: Option<f64>,
    /// Scoring window in milliseconds
    #[arg(long, default_value_t = 800.0)]
    window_ms: f64,
    /// Evaluation period in milliseconds
    #[arg(long, default_value_t = 100.0)]
    hop_ms: f64,
    /// Suppression period after a keyword event, milliseconds
    #[arg(long, default_value_t = 1000.0)]
    refractory_ms: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalTaskArg {
    Kws,
    Vad,
}

#[derive(Args)]
struct EvalArgs {
    /// Which score to evaluate
    #[arg(long, value_enum)]
    task: EvalTaskArg,
    /// Manifest of `path<TAB>label[<TAB>transcript]` lines
    #[arg(long)]
    manifest: PathBuf,
    /// Acoustic model (.kwsm), needed for audio entries
    #[arg(long)]
    model: Option<PathBuf>,
    /// Keyword (required for --task kws)
    #[arg(long)]
    keyword: Option<String>,
    /// False-positive rate at which to report TPR
    #[arg(long, default_value_t = 0.05)]
    fpr: f64,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the two-column ROC dump here (default: <out>.curve)
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Scoring window in milliseconds
    #[arg(long, default_value_t = 800.0)]
    window_ms: f64,
    /// Evaluation period in milliseconds
    #[arg(long, default_value_t = 100.0)]
    hop_ms: f64,
}

#[derive(Args)]
struct InfoArgs {
    /// Acoustic model (.kwsm)
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Keyword embedded in positive samples
    #[arg(long)]
    keyword: String,
    /// Number of samples (alternating positive/negative)
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Posterior frames per sample
    #[arg(long, default_value_t = 80)]
    frames: usize,
    /// Noise level in [0, 1]
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Base RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the .ctcp files and manifest.tsv
    #[arg(long)]
    out_dir: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
    /// The consumer of stdout went away (e.g. piped into `head`); treated
    /// as success, matching conventional CLI behavior.
    StdoutClosed,
}

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

fn write_err(e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        CliError::StdoutClosed
    } else {
        CliError::Data(e.to_string())
    }
}

/// Parses `args` and runs the selected subcommand against the given
/// streams. Returns the process exit code.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            }
        }
    };
    match dispatch(cli, stdin, stdout) {
        Ok(()) | Err(CliError::StdoutClosed) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn dispatch(cli: Cli, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Score(args) => cmd_score(args, stdout),
        Command::Vad(args) => cmd_vad(args, stdout),
        Command::Stream(args) => cmd_stream(args, stdin, stdout),
        Command::Eval(args) => cmd_eval(args, stdout),
        Command::Info(args) => cmd_info(args, stdout),
        Command::Synth(args) => cmd_synth(args, stdout),
    }
}

fn load_model_arg(path: &Path) -> Result<AcousticModel, CliError> {
    load_model(path).map_err(data)
}

/// Resolves the audio-vs-posteriors input to a posterior matrix.
fn load_input(
    input: &InputArgs,
    model_path: Option<&PathBuf>,
) -> Result<PosteriorMatrix, CliError> {
    if let Some(path) = &input.posteriors {
        return read_posteriors(path).map_err(data);
    }
    let audio_path = input
        .audio
        .as_ref()
        .expect("clap guarantees one input source");
    let model_path =
        model_path.ok_or_else(|| CliError::Usage("--audio input requires --model".to_string()))?;
    let model = load_model_arg(model_path)?;
    let audio = read_wav(audio_path).map_err(data)?;
    let spectrogram = compute_spectrogram(&audio, &FeatureConfig::default()).map_err(data)?;
    model.forward_full(&spectrogram).map_err(data)
}

fn parse_keyword(text: &str) -> Result<Keyword, CliError> {
    Keyword::new(text).map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_score(args: ScoreArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let keyword = parse_keyword(&args.keyword)?;
    let posteriors = load_input(&args.input, args.model.as_ref())?;
    let score = score_keyword(&keyword, &posteriors).map_err(data)?;
    writeln!(stdout, "{:.6}", score.log_prob()).map_err(write_err)?;
    Ok(())
}

fn cmd_vad(args: VadArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let posteriors = load_input(&args.input, args.model.as_ref())?;
    let fd = posteriors.frame_duration();
    if fd <= 0.0 {
        return Err(CliError::Data(
            "posterior frame duration must be positive".into(),
        ));
    }
    let window = crate::detector::window_frames_for(args.window_ms, fd)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let hop = crate::detector::hop_frames_for(args.hop_ms, fd);
    for (start, len) in crate::detector::hop_aligned_windows(posteriors.num_frames(), window, hop) {
        let speech = vad_score(&posteriors, start, len).map_err(data)?;
        writeln!(
            stdout,
            "{:.3} {:.6}",
            (start + len) as f64 * fd,
            speech.linear()
        )
        .map_err(write_err)?;
    }
    Ok(())
}

fn cmd_stream(
    args: StreamArgs,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if args.keyword.is_none() && args.vad_threshold.is_none() {
        return Err(CliError::Usage(
            "enable at least one task: --keyword with --kws-threshold, or --vad-threshold".into(),
        ));
    }
    let keyword = args.keyword.as_deref().map(parse_keyword).transpose()?;
    if keyword.is_some() && args.kws_threshold.is_none() {
        return Err(CliError::Usage("--keyword requires --kws-threshold".into()));
    }
    let model = load_model_arg(&args.model)?;
    let feature_config = FeatureConfig::default();
    let mut streamer =
        SpectrogramStreamer::new(&feature_config, MODEL_SAMPLE_RATE).map_err(data)?;
    let frame_duration = model.posterior_frame_duration(streamer.frame_hop());
    let detector_config = DetectorConfig {
        window_ms: args.window_ms,
        hop_ms: args.hop_ms,
        keyword,
        kws_log_threshold: args.kws_threshold.unwrap_or(0.0),
        vad_speech_threshold: args.vad_threshold,
        refractory_ms: args.refractory_ms,
    };
    let mut detector =
        Detector::new(&detector_config, model.alphabet(), frame_duration).map_err(data)?;
    let mut state = model.new_state();

    // 100 ms of PCM16 per read
    let mut buf = vec![0u8; (MODEL_SAMPLE_RATE as usize / 10) * 2];
    let mut carry: Option<u8> = None;
    loop {
        let n = stdin.read(&mut buf).map_err(data)?;
        if n == 0 {
            break;
        }
        let mut bytes = Vec::with_capacity(n + 1);
        if let Some(b) = carry.take() {
            bytes.push(b);
        }
        bytes.extend_from_slice(&buf[..n]);
        if bytes.len() % 2 == 1 {
            carry = bytes.pop();
        }
        let samples: Vec<f32> = bytes
            .chunks_exact(2)
            .map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
            .collect();
        let frames = streamer.push(&samples);
        let rows = model.forward_step(&frames, &mut state).map_err(data)?;
        for event in detector.push_frames(&rows).map_err(data)? {
            writeln!(stdout, "{event}").map_err(write_err)?;
        }
        stdout.flush().map_err(write_err)?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let task = match args.task {
        EvalTaskArg::Kws => Task::Kws,
        EvalTaskArg::Vad => Task::Vad,
    };
    let keyword = args.keyword.as_deref().map(parse_keyword).transpose()?;
    if task == Task::Kws && keyword.is_none() {
        return Err(CliError::Usage("--task kws requires --keyword".into()));
    }
    let model = args.model.as_ref().map(|p| load_model_arg(p)).transpose()?;
    let entries = load_manifest(&args.manifest).map_err(data)?;
    let config = EvalConfig {
        window_ms: args.window_ms,
        hop_ms: args.hop_ms,
        fprs: vec![args.fpr],
    };
    let report =
        evaluate(task, &entries, model.as_ref(), keyword.as_ref(), &config).map_err(data)?;
    let text = report.render_text();
    match &args.out {
        Some(path) => {
            std::fs::write(path, text).map_err(data)?;
            let curve_path = args
                .curve_out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{}.curve", path.display())));
            std::fs::write(curve_path, report.curve_dump()).map_err(data)?;
        }
        None => {
            write!(stdout, "{text}").map_err(write_err)?;
            if let Some(curve_path) = &args.curve_out {
                std::fs::write(curve_path, report.curve_dump()).map_err(data)?;
            }
        }
    }
    Ok(())
}

fn cmd_info(args: InfoArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model_arg(&args.model)?;
    let c = model.config();
    writeln!(stdout, "conv_filter_time: {}", c.conv_filter_time).map_err(write_err)?;
    writeln!(stdout, "conv_filter_freq: {}", c.conv_filter_freq).map_err(write_err)?;
    writeln!(stdout, "conv_filters: {}", c.conv_filters).map_err(write_err)?;
    writeln!(stdout, "conv_stride_time: {}", c.conv_stride_time).map_err(write_err)?;
    writeln!(stdout, "conv_stride_freq: {}", c.conv_stride_freq).map_err(write_err)?;
    writeln!(stdout, "num_recurrent_layers: {}", c.num_recurrent_layers).map_err(write_err)?;
    writeln!(stdout, "hidden_size: {}", c.hidden_size).map_err(write_err)?;
    writeln!(stdout, "input_bins: {}", c.input_bins).map_err(write_err)?;
    writeln!(stdout, "alphabet_size: {}", c.alphabet.len()).map_err(write_err)?;
    writeln!(stdout, "alphabet: {}", c.alphabet).map_err(write_err)?;
    writeln!(stdout, "param_count: {}", model.param_count()).map_err(write_err)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let keyword = parse_keyword(&args.keyword)?;
    let alphabet = Alphabet::default();
    std::fs::create_dir_all(&args.out_dir).map_err(data)?;
    let digits = args.count.max(1).to_string().len();
    let mut manifest = String::new();
    for i in 0..args.count {
        let positive = i % 2 == 0;
        let (matrix, label) = synth_posteriors(
            &keyword,
            &alphabet,
            args.frames,
            args.noise,
            args.seed.wrapping_add(i as u64),
            positive,
        )
        .map_err(data)?;
        debug_assert!((matrix.frame_duration() - SYNTH_FRAME_DURATION).abs() < 1e-12);
        let name = format!("s{i:0digits$}.ctcp");
        write_posteriors(&matrix, args.out_dir.join(&name)).map_err(data)?;
        manifest.push_str(&format!(
            "{name}\t{}{}\n",
            u8::from(label),
            if label {
                format!("\t{keyword}")
            } else {
                String::new()
            }
        ));
    }
    let manifest_path = args.out_dir.join("manifest.tsv");
    std::fs::write(&manifest_path, manifest).map_err(data)?;
    writeln!(stdout, "{}", manifest_path.display()).map_err(write_err)?;
    Ok(())
}
