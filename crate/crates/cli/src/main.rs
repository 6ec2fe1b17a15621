mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use camtraj_core::PixelOrigin;

/// Camera trajectory toolkit: pose files, synthesis, Plücker embeddings,
/// pose metrics and the camera encoder.
#[derive(Debug, Parser)]
#[command(name = "camtraj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a RealEstate10K pose file into trajectory JSON.
    Parse(ParseArgs),
    /// Build a trajectory from a JSON synthesis spec.
    Synth(SynthArgs),
    /// Write the Plücker embedding of a trajectory as an .npy tensor.
    Embed(EmbedArgs),
    /// Compare a generated trajectory against ground truth.
    Eval(EvalArgs),
    /// Run the camera encoder on a Plücker tensor.
    Encode(EncodeArgs),
}

#[derive(Debug, Args)]
struct ParseArgs {
    #[arg(long)]
    input: PathBuf,
    /// Target image width in pixels.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    width: u32,
    /// Target image height in pixels.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    height: u32,
    /// Comma-separated record indices; all records when omitted.
    #[arg(long, value_delimiter = ',', conflicts_with = "stride")]
    frames: Option<Vec<usize>>,
    /// Take `--count` records every `--stride` records from `--start`.
    #[arg(long, requires = "count")]
    stride: Option<usize>,
    #[arg(long, requires = "stride")]
    count: Option<usize>,
    #[arg(long, default_value_t = 0, requires = "stride")]
    start: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OriginArg {
    Center,
    Corner,
}

impl From<OriginArg> for PixelOrigin {
    fn from(o: OriginArg) -> Self {
        match o {
            OriginArg::Center => PixelOrigin::Center,
            OriginArg::Corner => PixelOrigin::Corner,
        }
    }
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "center")]
    pixel_origin: OriginArg,
    /// Re-read the written file and report ray statistics.
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    plucker: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Channel widths of the four encoder scales.
    #[arg(long, value_delimiter = ',', default_value = "320,640,1280,1280")]
    channels: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    heads: usize,
    #[arg(long, default_value_t = 4)]
    mlp_ratio: usize,
    #[arg(long, default_value_t = 8)]
    unshuffle: usize,
    /// Skip the sinusoidal positional term in temporal attention.
    #[arg(long)]
    no_pos_emb: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Parse(a) => commands::parse(a),
        Command::Synth(a) => commands::synth(a),
        Command::Embed(a) => commands::embed(a),
        Command::Eval(a) => commands::eval(a),
        Command::Encode(a) => commands::encode(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
