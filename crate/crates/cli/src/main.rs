//! `hdrsteg` command-line front end.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 capacity or
//! payload error. Failures print one line on stderr of the form
//! `hdrsteg: error[<kind>]: <message>` where kind is `usage`, `data` or
//! `capacity`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdrsteg::CostModel;

#[derive(Parser, Debug)]
#[command(name = "hdrsteg", version, about = "Mantissa-plane steganography for float HDR images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hide a message file in a cover image.
    Embed(EmbedArgs),
    /// Recover a message from a stego image.
    Extract(ExtractArgs),
    /// Apply the optimal flip distribution without coding a message.
    Simulate(SimulateArgs),
    /// Print capacity, n_x and dynamic range of images.
    Inspect(InspectArgs),
    /// Convert images to luminance tiles and keep those with enough capacity.
    Prep(PrepArgs),
    /// Compare a cover with its stego.
    Report(ReportArgs),
    /// Write a key file.
    Keygen(KeygenArgs),
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Raw bytes to hide, most significant bit first.
    #[arg(long)]
    message: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    stego: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Payload in bits; defaults to the key's full payload.
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Optional PGM of pixels changed in any plane.
    #[arg(long)]
    change_map: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Write the per-pixel capacity as a PGM (maxval 16). Only valid with a
    /// single image.
    #[arg(long)]
    capacity_map: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrepArgs {
    /// Source images (gray or RGB float TIFF).
    images: Vec<PathBuf>,
    /// File listing further source images, one per line.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 512)]
    tile: usize,
    #[arg(long, default_value_t = 10)]
    min_nx: usize,
    /// Minimum max/min pixel ratio; 0 disables the check.
    #[arg(long, default_value_t = 256.0)]
    min_range: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    stego: PathBuf,
    #[arg(long, default_value_t = CostModel::default())]
    cost_model: CostModel,
    #[arg(long)]
    change_map: Option<PathBuf>,
    /// Clamped integer export of the stego for external steganalysis.
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KeygenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Message bits per pixel per plane.
    #[arg(long, default_value_t = 0.05)]
    payload: f64,
    #[arg(long, default_value_t = 10)]
    planes: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = CostModel::default())]
    cost_model: CostModel,
    #[arg(long, default_value_t = hdrsteg::coder::DEFAULT_HEIGHT)]
    stc_h: u32,
    /// Embed the message without a length header.
    #[arg(long)]
    no_framing: bool,
}

/// Failure classes and their exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Usage,
    Data,
    Capacity,
}

impl Kind {
    fn code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Capacity => 3,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Data => "data",
            Kind::Capacity => "capacity",
        }
    }
}

/// Argument combinations clap cannot rule out on its own.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn classify(err: &anyhow::Error) -> Kind {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return Kind::Usage;
        }
        if let Some(e) = cause.downcast_ref::<hdrsteg::Error>() {
            return if e.is_capacity() { Kind::Capacity } else { Kind::Data };
        }
    }
    Kind::Data
}

fn fail(kind: Kind, msg: &str) -> ExitCode {
    eprintln!("hdrsteg: error[{}]: {msg}", kind.label());
    ExitCode::from(kind.code())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("HDRSTEG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("HDRSTEG_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help / --version
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            let code = fail(Kind::Usage, first);
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        return fail(Kind::Usage, &msg);
    }
    let result = match cli.command {
        Command::Embed(a) => commands::embed(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Inspect(a) => commands::inspect(&a),
        Command::Prep(a) => commands::prep(&a),
        Command::Report(a) => commands::report(&a),
        Command::Keygen(a) => commands::keygen(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(classify(&e), &format!("{e:#}")),
    }
}
