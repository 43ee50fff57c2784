//! Command-line surface for the synesthete library.
//!
//! [`run`] parses a command line, executes one subcommand and maps the
//! outcome to an exit code: 0 success, 1 usage error, 2 data or parse
//! error, 3 contract violation or checkpoint mismatch.

mod commands;
pub mod config;
pub mod files;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use synesthete_core::Error;

pub use manifest::Manifest;

/// Failure of a CLI command.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, arguments or configuration.
    Usage(String),
    /// Inputs on disk are malformed or inconsistent.
    Data(String),
    /// A library error, classified by its kind.
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) => match e {
                Error::Config(_) => 1,
                Error::Shape(_)
                | Error::Domain(_)
                | Error::Midi { .. }
                | Error::Png(_)
                | Error::CheckpointParse(_)
                | Error::Io { .. } => 2,
                Error::Contract(_) | Error::CheckpointMismatch { .. } => 3,
            },
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "synesthete", version, about = "Translate between images and melodies")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Random seed (default 7).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Melody length in bars: 2 or 16 (default 2).
    #[arg(long, global = true)]
    pub bars: Option<usize>,
    /// `key = value` configuration file; flags win over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory holding image_vae.avsyn, melody_vae.avsyn and translator.avsyn.
    #[arg(long, global = true, default_value = "models")]
    pub models: PathBuf,
    /// Translator checkpoint, overriding `<models>/translator.avsyn`.
    #[arg(long, global = true)]
    pub translator: Option<PathBuf>,
}

/// VAE training hyperparameters.
#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// KL weight after warm-up.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Latent dimension.
    #[arg(long)]
    pub latent: Option<usize>,
    /// Hidden layer width.
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    /// Image (PNG) to melody (MIDI).
    I2m,
    /// Melody (MIDI) to image (PNG).
    M2i,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CodecDirection {
    ImageToMelody,
    MelodyToImage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Modality {
    Image,
    Melody,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write procedural melodies as MIDI files.
    GenMelodies {
        /// Number of melodies (default 2000).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Render melodies to 64x64 training images with the note-color codec.
    RenderDataset {
        /// Render the MIDI files in this directory instead of procedural melodies.
        #[arg(long)]
        melodies: Option<PathBuf>,
        /// Number of procedural melodies (default 1000).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Cut every PNG under a directory into 64x64 tiles.
    IngestTiles { dir: PathBuf },
    /// Train the image VAE on one or more PNG directories.
    TrainImageVae {
        #[arg(long, required = true, num_args = 1..)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train the melody VAE on one or more MIDI directories.
    TrainMelodyVae {
        #[arg(long, required = true, num_args = 1..)]
        melodies: Vec<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Decode samples drawn from a VAE prior.
    SamplePrior {
        #[arg(value_enum)]
        modality: Modality,
        /// Number of samples (default 16).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Build synthetic latent pairs from melody-prior samples.
    MakePairs {
        /// Number of pairs (default 2000).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train the latent translator.
    TrainTranslator {
        /// 1: synthetic pairs only; 2: refine a stage-1 translator with tiles.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        /// Synthetic pairs checkpoint.
        #[arg(long)]
        pairs: PathBuf,
        /// Tile directory (stage 2).
        #[arg(long)]
        tiles: Option<PathBuf>,
        /// Training epochs (default 200).
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Translate an image to a melody or a melody to an image.
    Translate {
        #[arg(value_enum)]
        direction: Direction,
        input: PathBuf,
        output: PathBuf,
    },
    /// Write an interpolation sequence between two images.
    Interpolate {
        image_a: PathBuf,
        image_b: PathBuf,
        out_dir: PathBuf,
        /// Frames per second (default 24).
        #[arg(long)]
        fps: Option<u32>,
        /// Melodies between the two endpoint translations (default 7).
        #[arg(long)]
        intermediates: Option<usize>,
    },
    /// Heterogeneity of each MIDI file's segment series in both latent spaces.
    Heterogeneity {
        #[arg(required = true, num_args = 1..)]
        midi: Vec<PathBuf>,
    },
    /// Apply the note-color codec directly, without any model.
    Transpose {
        #[arg(value_enum)]
        direction: CodecDirection,
        input: PathBuf,
        output: PathBuf,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck,
    /// Check checkpoint files and their mutual compatibility.
    Validate {
        #[arg(required = true, num_args = 1..)]
        paths: Vec<PathBuf>,
    },
}

/// Run one command line (including the program name) and return its exit
/// code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("synesthete: {e}");
            e.exit_code()
        }
    }
}
