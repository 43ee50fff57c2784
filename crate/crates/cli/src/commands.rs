use std::path::{Path, PathBuf};

use serde::Serialize;
use synesthete_core::analysis::{interpolation_sequence, midi_series_stats};
use synesthete_core::checkpoint::ModelKind;
use synesthete_core::imaging::{png_files_in, read_png_file, tile64};
use synesthete_core::melody::{check_bars, procedural_generate};
use synesthete_core::nn::{grad_check, Activation, LossSpec};
use synesthete_core::translator::{
    make_synthetic_pairs, pairs_from_checkpoint, pairs_to_checkpoint, TranslatorConfig, TranslatorEpoch,
};
use synesthete_core::vae::{vae_grad_check, EpochLoss, ReconKind, Vae, VaeArch};
use synesthete_core::{
    image_to_melody, melody_to_image, DenseNet, Error, ImageVae, InterpSpec, MelodyVae, Models, PairOrigin, Prng,
    Tensor2, TrainConfig, Translator,
};

use crate::config::ConfigFile;
use crate::files::{
    clear_items, ensure_dir, image_dataset, item_name, load_checkpoint, melody_dataset, read_bytes,
    read_image64, read_melody, read_melody_windows, save_checkpoint, sidecar_manifest, write_bytes, write_image64,
    write_melody,
};
use crate::manifest::{Manifest, DATASET_MANIFEST};
use crate::{Cli, CliError, CliResult, CodecDirection, Command, Direction, Modality, TrainArgs};

pub const IMAGE_VAE_FILE: &str = "image_vae.avsyn";
pub const MELODY_VAE_FILE: &str = "melody_vae.avsyn";
pub const TRANSLATOR_FILE: &str = "translator.avsyn";
pub const PAIRS_FILE: &str = "pairs.avsyn";

const DEFAULT_SEED: u64 = 7;
const DEFAULT_BARS: usize = 2;
const GRADCHECK_TOL: f64 = 1e-4;

/// Resolved settings shared by all subcommands.
struct Ctx {
    file: ConfigFile,
    seed: u64,
    /// Bars requested by flag or config file, if any.
    bars_set: Option<usize>,
    out: PathBuf,
    models: PathBuf,
    translator: PathBuf,
}

impl Ctx {
    fn bars(&self) -> usize {
        self.bars_set.unwrap_or(DEFAULT_BARS)
    }

    /// Bars for commands that run loaded models: the models decide unless
    /// the user asked for something else.
    fn bars_for(&self, models: &Models) -> CliResult<usize> {
        match self.bars_set {
            Some(b) if b != models.bars() => Err(mismatch(
                "bars",
                format!("requested {b} bars but the models use {}", models.bars()),
            )),
            _ => Ok(models.bars()),
        }
    }

    fn model_path(&self, file: &str) -> PathBuf {
        self.models.join(file)
    }
}

fn mismatch(field: &str, message: impl Into<String>) -> CliError {
    CliError::Core(Error::CheckpointMismatch {
        field: field.into(),
        message: message.into(),
    })
}

/// Prefix a checkpoint error with the file it came from.
fn in_file(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| {
        let at = path.display();
        CliError::Core(match e {
            Error::CheckpointMismatch { field, message } => Error::CheckpointMismatch {
                field,
                message: format!("{at}: {message}"),
            },
            Error::CheckpointParse(m) => Error::CheckpointParse(format!("{at}: {m}")),
            other => other,
        })
    }
}

pub(crate) fn execute(cli: Cli) -> CliResult {
    let c = cli.common;
    let file = match &c.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = file.pick(c.seed, "seed", DEFAULT_SEED)?;
    let bars_set = match c.bars {
        Some(b) => Some(b),
        None => file.pick(None, "bars", 0usize).map(|b| (b != 0).then_some(b))?,
    };
    if let Some(b) = bars_set {
        check_bars(b).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let translator = c.translator.unwrap_or_else(|| c.models.join(TRANSLATOR_FILE));
    let ctx = Ctx {
        file,
        seed,
        bars_set,
        out: c.out.unwrap_or_else(|| PathBuf::from("out")),
        models: c.models,
        translator,
    };
    match cli.command {
        Command::GenMelodies { count } => gen_melodies(&ctx, count),
        Command::RenderDataset { melodies, count } => render_dataset(&ctx, melodies, count),
        Command::IngestTiles { dir } => ingest_tiles(&ctx, &dir),
        Command::TrainImageVae { images, train } => train_image_vae(&ctx, &images, &train),
        Command::TrainMelodyVae { melodies, train } => train_melody_vae(&ctx, &melodies, &train),
        Command::SamplePrior { modality, count } => sample_prior(&ctx, modality, count),
        Command::MakePairs { count } => make_pairs(&ctx, count),
        Command::TrainTranslator {
            stage,
            pairs,
            tiles,
            epochs,
            lr,
        } => train_translator(&ctx, stage, &pairs, tiles.as_deref(), epochs, lr),
        Command::Translate {
            direction,
            input,
            output,
        } => translate(&ctx, direction, &input, &output),
        Command::Interpolate {
            image_a,
            image_b,
            out_dir,
            fps,
            intermediates,
        } => interpolate(&ctx, &image_a, &image_b, &out_dir, fps, intermediates),
        Command::Heterogeneity { midi } => heterogeneity(&ctx, &midi),
        Command::Transpose {
            direction,
            input,
            output,
        } => transpose(&ctx, direction, &input, &output),
        Command::Gradcheck => gradcheck(&ctx),
        Command::Validate { paths } => validate(&paths),
    }
}

fn dataset_manifest(kind: &str, count: usize, source: &str, seed: Option<u64>) -> Manifest {
    let mut m = Manifest::new(kind);
    m.set("count", count).set("source", source);
    match seed {
        Some(s) => m.set("seed", s),
        None => m.set("seed", "none"),
    };
    m
}

fn write_melody_set(dir: &Path, prefix: &str, grids: &[synesthete_core::TokenGrid]) -> CliResult {
    ensure_dir(dir)?;
    clear_items(dir, prefix, "mid")?;
    for (i, g) in grids.iter().enumerate() {
        write_melody(&dir.join(item_name(prefix, i, "mid")), g)?;
    }
    Ok(())
}

fn write_image_set(dir: &Path, prefix: &str, images: &[synesthete_core::ImageRgb64]) -> CliResult {
    ensure_dir(dir)?;
    clear_items(dir, prefix, "png")?;
    for (i, img) in images.iter().enumerate() {
        write_image64(&dir.join(item_name(prefix, i, "png")), img)?;
    }
    Ok(())
}

fn gen_melodies(ctx: &Ctx, count: Option<usize>) -> CliResult {
    let count = ctx.file.pick(count, "count", 2000)?;
    let grids = procedural_generate(ctx.seed, ctx.bars(), count)?;
    write_melody_set(&ctx.out, "melody", &grids)?;
    let mut m = dataset_manifest("melodies", count, "procedural", Some(ctx.seed));
    m.set("bars", ctx.bars());
    m.write(&ctx.out.join(DATASET_MANIFEST))?;
    println!("wrote {count} melodies to {}", ctx.out.display());
    Ok(())
}

fn render_dataset(ctx: &Ctx, melodies: Option<PathBuf>, count: Option<usize>) -> CliResult {
    let (grids, source, seed) = match &melodies {
        Some(dir) => {
            let mut grids = Vec::new();
            for f in melody_dataset(dir)? {
                grids.extend(read_melody_windows(&f, ctx.bars())?);
            }
            (grids, format!("rendered from {}", dir.display()), None)
        }
        None => {
            let count = ctx.file.pick(count, "count", 1000)?;
            let grids = procedural_generate(ctx.seed, ctx.bars(), count)?;
            (grids, "rendered procedural melodies".to_string(), Some(ctx.seed))
        }
    };
    let images: Vec<_> = grids.iter().map(melody_to_image).collect();
    write_image_set(&ctx.out, "image", &images)?;
    let mut m = dataset_manifest("images", images.len(), &source, seed);
    m.set("bars", ctx.bars());
    m.write(&ctx.out.join(DATASET_MANIFEST))?;
    println!("wrote {} images to {}", images.len(), ctx.out.display());
    Ok(())
}

fn ingest_tiles(ctx: &Ctx, dir: &Path) -> CliResult {
    let files = png_files_in(dir)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("no PNG files under {}", dir.display())));
    }
    let mut tiles = Vec::new();
    for f in &files {
        tiles.extend(tile64(&read_png_file(f)?));
    }
    write_image_set(&ctx.out, "tile", &tiles)?;
    let mut m = dataset_manifest("tiles", tiles.len(), &dir.display().to_string(), None);
    m.set("source_images", files.len());
    m.write(&ctx.out.join(DATASET_MANIFEST))?;
    println!("wrote {} tiles from {} images to {}", tiles.len(), files.len(), ctx.out.display());
    Ok(())
}

fn train_config(ctx: &Ctx, t: &TrainArgs, default_beta: f64) -> CliResult<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: ctx.file.pick(t.epochs, "epochs", d.epochs)?,
        batch_size: ctx.file.pick(t.batch_size, "batch_size", d.batch_size)?,
        seed: ctx.seed,
        beta: ctx.file.pick(t.beta, "beta", default_beta)?,
        kl_warmup_frac: ctx.file.pick(None, "kl_warmup_frac", d.kl_warmup_frac)?,
        learning_rate: ctx.file.pick(t.lr, "learning_rate", d.learning_rate)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn arch_dims(ctx: &Ctx, t: &TrainArgs) -> CliResult<(usize, usize)> {
    Ok((
        ctx.file.pick(t.latent, "latent", 32)?,
        ctx.file.pick(t.hidden, "hidden", 512)?,
    ))
}

fn print_trace(trace: &[EpochLoss]) {
    for e in trace {
        println!(
            "epoch {:3}  total {:.4}  recon {:.4}  kl {:.4}  beta {:.3}",
            e.epoch + 1, e.total, e.recon, e.kl, e.beta
        );
    }
}

fn training_manifest(kind: &str, inputs: &[PathBuf], items: usize, cfg: &TrainConfig, trace: &[EpochLoss]) -> Manifest {
    let inputs: Vec<_> = inputs.iter().map(|p| p.display().to_string()).collect();
    let mut m = Manifest::new(kind);
    m.set("inputs", inputs.join(","))
        .set("items", items)
        .set("seed", cfg.seed)
        .set("epochs", cfg.epochs)
        .set("batch_size", cfg.batch_size)
        .set("beta", cfg.beta)
        .set("kl_warmup_frac", cfg.kl_warmup_frac)
        .set("learning_rate", cfg.learning_rate);
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        m.set("first_epoch_loss", first.total).set("final_epoch_loss", last.total);
    }
    m
}

fn train_image_vae(ctx: &Ctx, dirs: &[PathBuf], t: &TrainArgs) -> CliResult {
    let cfg = train_config(ctx, t, 1.0)?;
    let (latent, hidden) = arch_dims(ctx, t)?;
    let mut images = Vec::new();
    for dir in dirs {
        for f in image_dataset(dir)? {
            images.push(read_image64(&f)?);
        }
    }
    if images.is_empty() {
        return Err(CliError::Data("no training images found".into()));
    }
    let mut vae = ImageVae::new(latent, hidden, ctx.seed)?;
    let trace = vae.train(&images, &cfg)?;
    print_trace(&trace);
    let path = ctx.out.join(IMAGE_VAE_FILE);
    let id = save_checkpoint(&path, &vae.to_checkpoint())?;
    let mut m = training_manifest("image_vae", dirs, images.len(), &cfg, &trace);
    m.set("latent", latent).set("hidden", hidden).set("identity", &id);
    m.write(&ctx.out.join("image_vae.manifest.txt"))?;
    println!("wrote {} ({id})", path.display());
    Ok(())
}

fn train_melody_vae(ctx: &Ctx, dirs: &[PathBuf], t: &TrainArgs) -> CliResult {
    let cfg = train_config(ctx, t, 0.5)?;
    let (latent, hidden) = arch_dims(ctx, t)?;
    let bars = ctx.bars();
    let mut grids = Vec::new();
    for dir in dirs {
        for f in melody_dataset(dir)? {
            grids.extend(read_melody_windows(&f, bars)?);
        }
    }
    if grids.is_empty() {
        return Err(CliError::Data("no training melodies found".into()));
    }
    let mut vae = MelodyVae::new(bars, latent, hidden, ctx.seed)?;
    let trace = vae.train(&grids, &cfg)?;
    print_trace(&trace);
    let path = ctx.out.join(MELODY_VAE_FILE);
    let id = save_checkpoint(&path, &vae.to_checkpoint())?;
    let mut m = training_manifest("melody_vae", dirs, grids.len(), &cfg, &trace);
    m.set("bars", bars)
        .set("latent", latent)
        .set("hidden", hidden)
        .set("identity", &id);
    m.write(&ctx.out.join("melody_vae.manifest.txt"))?;
    println!("wrote {} ({id})", path.display());
    Ok(())
}

fn load_image_vae(path: &Path) -> CliResult<(ImageVae, String)> {
    let (ckpt, id) = load_checkpoint(path)?;
    Ok((ImageVae::from_checkpoint(&ckpt).map_err(in_file(path))?, id))
}

fn load_melody_vae(path: &Path) -> CliResult<(MelodyVae, String)> {
    let (ckpt, id) = load_checkpoint(path)?;
    Ok((MelodyVae::from_checkpoint(&ckpt).map_err(in_file(path))?, id))
}

fn load_translator(path: &Path) -> CliResult<(Translator, String)> {
    let (ckpt, id) = load_checkpoint(path)?;
    Ok((Translator::from_checkpoint(&ckpt).map_err(in_file(path))?, id))
}

/// Identities of the checkpoints behind a [`Models`] bundle.
struct ModelIds {
    image: String,
    melody: String,
    translator: String,
}

impl ModelIds {
    fn record(&self, m: &mut Manifest) {
        m.set("image_vae", &self.image)
            .set("melody_vae", &self.melody)
            .set("translator", &self.translator);
    }
}

fn load_models(ctx: &Ctx) -> CliResult<(Models, ModelIds)> {
    let (image, image_id) = load_image_vae(&ctx.model_path(IMAGE_VAE_FILE))?;
    let (melody, melody_id) = load_melody_vae(&ctx.model_path(MELODY_VAE_FILE))?;
    let (translator, translator_id) = load_translator(&ctx.translator)?;
    let models = Models::new(image, melody, translator).map_err(in_file(&ctx.translator))?;
    models.require_trained()?;
    Ok((
        models,
        ModelIds {
            image: image_id,
            melody: melody_id,
            translator: translator_id,
        },
    ))
}

fn sample_prior(ctx: &Ctx, modality: Modality, count: Option<usize>) -> CliResult {
    let count = ctx.file.pick(count, "count", 16)?;
    let (kind, file, id) = match modality {
        Modality::Image => {
            let (vae, id) = load_image_vae(&ctx.model_path(IMAGE_VAE_FILE))?;
            write_image_set(&ctx.out, "sample", &vae.sample_prior(ctx.seed, count)?)?;
            ("images", IMAGE_VAE_FILE, id)
        }
        Modality::Melody => {
            let (vae, id) = load_melody_vae(&ctx.model_path(MELODY_VAE_FILE))?;
            write_melody_set(&ctx.out, "sample", &vae.sample_prior(ctx.seed, count)?)?;
            ("melodies", MELODY_VAE_FILE, id)
        }
    };
    let mut m = dataset_manifest(kind, count, &format!("prior of {file}"), Some(ctx.seed));
    m.set("model", id);
    m.write(&ctx.out.join(DATASET_MANIFEST))?;
    println!("wrote {count} prior samples to {}", ctx.out.display());
    Ok(())
}

fn make_pairs(ctx: &Ctx, count: Option<usize>) -> CliResult {
    let count = ctx.file.pick(count, "count", 2000)?;
    let (image, image_id) = load_image_vae(&ctx.model_path(IMAGE_VAE_FILE))?;
    let (melody, melody_id) = load_melody_vae(&ctx.model_path(MELODY_VAE_FILE))?;
    let pairs = make_synthetic_pairs(&melody, &image, count, ctx.seed)?;
    let ckpt = pairs_to_checkpoint(&pairs, image.latent_dim(), melody.latent_dim())?;
    let path = ctx.out.join(PAIRS_FILE);
    let id = save_checkpoint(&path, &ckpt)?;
    let mut m = dataset_manifest("pairs", pairs.len(), "melody prior through the codec", Some(ctx.seed));
    m.set("bars", melody.bars())
        .set("image_vae", image_id)
        .set("melody_vae", melody_id)
        .set("identity", &id);
    m.write(&ctx.out.join("pairs.manifest.txt"))?;
    println!("wrote {count} pairs to {} ({id})", path.display());
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn print_translator_trace(trace: &[TranslatorEpoch]) {
    let best = |f: fn(&TranslatorEpoch) -> f64| {
        trace
            .iter()
            .map(f)
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min)
    };
    if let Some(last) = trace.last() {
        println!(
            "epoch {}: i2m {:.6} m2i {:.6}; best validation i2m {:.6} m2i {:.6}",
            last.epoch + 1,
            last.i2m,
            last.m2i,
            best(|e| e.val_i2m),
            best(|e| e.val_m2i)
        );
    }
}

fn train_translator(
    ctx: &Ctx,
    stage: u8,
    pairs_path: &Path,
    tiles: Option<&Path>,
    epochs: Option<usize>,
    lr: Option<f64>,
) -> CliResult {
    let d = TranslatorConfig::default();
    let cfg = TranslatorConfig {
        epochs: ctx.file.pick(epochs, "translator_epochs", d.epochs)?,
        learning_rate: ctx.file.pick(lr, "translator_learning_rate", d.learning_rate)?,
        seed: ctx.seed,
        ..d
    };
    cfg.validate()?;
    let (image, image_id) = load_image_vae(&ctx.model_path(IMAGE_VAE_FILE))?;
    let (melody, melody_id) = load_melody_vae(&ctx.model_path(MELODY_VAE_FILE))?;
    let (pairs_ckpt, pairs_id) = load_checkpoint(pairs_path)?;
    let pairs = pairs_from_checkpoint(&pairs_ckpt).map_err(in_file(pairs_path))?;
    for (field, got, want) in [
        ("d_img", pairs_ckpt.parse_field::<usize>("d_img")?, image.latent_dim()),
        ("d_mel", pairs_ckpt.parse_field::<usize>("d_mel")?, melody.latent_dim()),
    ] {
        if got != want {
            return Err(mismatch(
                field,
                format!("{} has {got}, the VAE has {want}", pairs_path.display()),
            ));
        }
    }
    let synthetic: Vec<_> = pairs.into_iter().filter(|p| p.origin == PairOrigin::Synthetic).collect();
    let out_path = ctx.out.join(TRANSLATOR_FILE);
    let mut m = Manifest::new("translator");
    m.set("stage", stage)
        .set("pairs", pairs_path.display())
        .set("pairs_identity", pairs_id)
        .set("synthetic_pairs", synthetic.len())
        .set("image_vae", image_id)
        .set("melody_vae", melody_id)
        .set("seed", ctx.seed)
        .set("epochs", cfg.epochs)
        .set("learning_rate", cfg.learning_rate);

    let translator = if stage == 1 {
        let mut t = Translator::for_models(&image, &melody, ctx.seed)?;
        print_translator_trace(&t.train_stage1(&synthetic, &cfg)?);
        t
    } else {
        let tiles_dir =
            tiles.ok_or_else(|| CliError::Usage("stage 2 needs --tiles <dir>".into()))?;
        if same_file(&ctx.translator, &out_path) {
            return Err(CliError::Usage(format!(
                "stage 2 would overwrite its input {}; choose another --out",
                ctx.translator.display()
            )));
        }
        let (mut t, from_id) = load_translator(&ctx.translator)?;
        let tiles = image_dataset(tiles_dir)?
            .iter()
            .map(|f| read_image64(f))
            .collect::<CliResult<Vec<_>>>()?;
        let (tile_pairs, trace) = t
            .refine_stage2(&synthetic, &tiles, &image, &melody, &cfg)
            .map_err(in_file(&ctx.translator))?;
        print_translator_trace(&trace);
        m.set("from_translator", from_id)
            .set("tiles", tiles_dir.display())
            .set("tile_pairs", tile_pairs.len());
        t
    };
    let id = save_checkpoint(&out_path, &translator.to_checkpoint())?;
    m.set("identity", &id);
    m.write(&ctx.out.join("translator.manifest.txt"))?;
    println!("wrote stage-{stage} translator {} ({id})", out_path.display());
    Ok(())
}

fn translate(ctx: &Ctx, direction: Direction, input: &Path, output: &Path) -> CliResult {
    let (models, ids) = load_models(ctx)?;
    let bars = ctx.bars_for(&models)?;
    let name = match direction {
        Direction::I2m => {
            let grid = models.translate_full_image(&read_png_file(input)?)?;
            write_melody(output, &grid)?;
            "i2m"
        }
        Direction::M2i => {
            let img = models.translate_melody_to_image(&read_melody(input, bars)?)?;
            write_image64(output, &img)?;
            "m2i"
        }
    };
    let mut m = Manifest::new("translation");
    m.set("direction", name)
        .set("input", input.display())
        .set("output", output.display())
        .set("bars", bars)
        .set("seed", "none");
    ids.record(&mut m);
    m.write(&sidecar_manifest(output))?;
    println!("wrote {}", output.display());
    Ok(())
}

#[derive(Serialize)]
struct InterpManifest {
    kind: &'static str,
    fps: u32,
    frame_count: usize,
    tempo_bpm: u32,
    bars: usize,
    segments: usize,
    midi_ticks: u64,
    image_a: String,
    image_b: String,
    checkpoints: CheckpointIds,
}

#[derive(Serialize)]
struct CheckpointIds {
    image_vae: String,
    melody_vae: String,
    translator: String,
}

fn interpolate(
    ctx: &Ctx,
    image_a: &Path,
    image_b: &Path,
    out_dir: &Path,
    fps: Option<u32>,
    intermediates: Option<usize>,
) -> CliResult {
    let (models, ids) = load_models(ctx)?;
    let mut spec = InterpSpec::new(read_image64(image_a)?, read_image64(image_b)?);
    spec.bars = ctx.bars_for(&models)?;
    spec.fps = ctx.file.pick(fps, "fps", spec.fps)?;
    spec.intermediate_count = ctx.file.pick(intermediates, "intermediates", spec.intermediate_count)?;
    let seq = interpolation_sequence(&spec, &models)?;
    let frames_dir = out_dir.join("frames");
    ensure_dir(&frames_dir)?;
    clear_items(&frames_dir, "frame", "png")?;
    for (j, frame) in seq.frames.iter().enumerate() {
        write_image64(&frames_dir.join(format!("frame_{j:06}.png")), frame)?;
    }
    write_bytes(&out_dir.join("audio.mid"), &seq.midi)?;
    let manifest = InterpManifest {
        kind: "interpolation",
        fps: spec.fps,
        frame_count: seq.frames.len(),
        tempo_bpm: spec.tempo_bpm,
        bars: spec.bars,
        segments: seq.melodies.len(),
        midi_ticks: seq.midi_ticks(),
        image_a: image_a.display().to_string(),
        image_b: image_b.display().to_string(),
        checkpoints: CheckpointIds {
            image_vae: ids.image,
            melody_vae: ids.melody,
            translator: ids.translator,
        },
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
    json.push('\n');
    write_bytes(&out_dir.join("manifest.json"), json.as_bytes())?;
    println!(
        "wrote {} segments and {} frames to {}",
        seq.melodies.len(),
        seq.frames.len(),
        out_dir.display()
    );
    Ok(())
}

fn heterogeneity(ctx: &Ctx, files: &[PathBuf]) -> CliResult {
    let (models, _) = load_models(ctx)?;
    let bars = ctx.bars_for(&models)?;
    println!("file\tsegments\tmelody\timage");
    for f in files {
        let s = midi_series_stats(&read_bytes(f)?, &models, bars)?;
        println!(
            "{}\t{}\t{:.6}\t{:.6}",
            f.display(),
            s.melody.n,
            s.melody.heterogeneity,
            s.image.heterogeneity
        );
    }
    Ok(())
}

fn transpose(ctx: &Ctx, direction: CodecDirection, input: &Path, output: &Path) -> CliResult {
    let bars = ctx.bars();
    let name = match direction {
        CodecDirection::ImageToMelody => {
            write_melody(output, &image_to_melody(&read_image64(input)?, bars)?)?;
            "image-to-melody"
        }
        CodecDirection::MelodyToImage => {
            write_image64(output, &melody_to_image(&read_melody(input, bars)?))?;
            "melody-to-image"
        }
    };
    let mut m = Manifest::new("transposition");
    m.set("direction", name)
        .set("input", input.display())
        .set("output", output.display())
        .set("bars", bars)
        .set("seed", "none");
    m.write(&sidecar_manifest(output))?;
    println!("wrote {}", output.display());
    Ok(())
}

fn gradcheck(ctx: &Ctx) -> CliResult {
    let mut rng = Prng::new(ctx.seed);
    let mut results = Vec::new();
    let nets: [(&[usize], &[Activation]); 3] = [
        (&[5, 4], &[Activation::Identity]),
        (&[6, 5, 4], &[Activation::Tanh, Activation::Sigmoid]),
        (&[4, 6, 5, 10], &[Activation::Relu, Activation::Tanh, Activation::Identity]),
    ];
    for (dims, acts) in nets {
        let net = DenseNet::<f64>::xavier(dims, acts, &mut rng)?;
        let x = rng.gaussian_vec(dims[0]);
        let out = *dims.last().unwrap_or(&1);
        let mse = LossSpec::Mse {
            target: rng.gaussian_vec(out),
        };
        results.push((format!("dense {dims:?} mse"), grad_check(&net, &mse, &x)?));
        if out % 5 == 0 {
            let targets = (0..out / 5).map(|_| rng.range_inclusive(0, 4) as usize).collect();
            let ce = LossSpec::SoftmaxCrossEntropy { alphabet: 5, targets };
            results.push((format!("dense {dims:?} cross-entropy"), grad_check(&net, &ce, &x)?));
        }
    }
    let vaes = [
        ("vae sigmoid-mse", 12, ReconKind::SigmoidMse),
        (
            "vae categorical",
            10,
            ReconKind::Categorical { steps: 2, alphabet: 5 },
        ),
    ];
    for (name, input, recon) in vaes {
        let arch = VaeArch {
            input,
            hidden: 8,
            latent: 3,
            recon,
        };
        let vae = Vae::<f32>::new(arch, ctx.seed)?.cast::<f64>();
        let x = match recon {
            ReconKind::SigmoidMse => Tensor2::from_fn(3, input, |_, _| rng.uniform()),
            ReconKind::Categorical { steps, alphabet } => {
                let hot: Vec<usize> = (0..3 * steps).map(|_| rng.range_inclusive(0, alphabet as i64 - 1) as usize).collect();
                Tensor2::from_fn(3, input, |r, c| f64::from(u8::from(hot[r * steps + c / alphabet] == c % alphabet)))
            }
        };
        let eps = Tensor2::from_fn(3, 3, |_, _| rng.gaussian());
        results.push((name.to_string(), vae_grad_check(&vae, &x, &eps, 1.0)?));
    }
    let mut failed = Vec::new();
    for (name, err) in &results {
        let ok = *err <= GRADCHECK_TOL;
        println!("{} {name}: max relative error {err:.3e}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failed.push(name.as_str());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Core(Error::Contract(format!(
            "gradient check above {GRADCHECK_TOL:e} for {}",
            failed.join(", ")
        ))))
    }
}

/// Dimension claims gathered from checkpoints, checked for agreement.
#[derive(Default)]
struct Claims {
    entries: Vec<(&'static str, usize, String)>,
}

impl Claims {
    fn add(&mut self, field: &'static str, value: usize, source: &Path) {
        self.entries.push((field, value, source.display().to_string()));
    }

    fn check(&self) -> CliResult {
        for field in ["d_img", "d_mel", "bars"] {
            let claims: Vec<_> = self.entries.iter().filter(|(f, _, _)| *f == field).collect();
            if claims.windows(2).any(|w| w[0].1 != w[1].1) {
                let detail: Vec<_> = claims.iter().map(|(_, v, s)| format!("{s}={v}")).collect();
                return Err(mismatch(field, format!("disagreement: {}", detail.join(", "))));
            }
        }
        Ok(())
    }
}

fn validate(paths: &[PathBuf]) -> CliResult {
    let mut claims = Claims::default();
    for path in paths {
        let (ckpt, id) = load_checkpoint(path)?;
        let kind = ckpt.kind().map_err(in_file(path))?;
        let detail = match kind {
            ModelKind::ImageVae => {
                let vae = ImageVae::from_checkpoint(&ckpt).map_err(in_file(path))?;
                claims.add("d_img", vae.latent_dim(), path);
                format!("latent={}", vae.latent_dim())
            }
            ModelKind::MelodyVae => {
                let vae = MelodyVae::from_checkpoint(&ckpt).map_err(in_file(path))?;
                claims.add("d_mel", vae.latent_dim(), path);
                claims.add("bars", vae.bars(), path);
                format!("latent={} bars={}", vae.latent_dim(), vae.bars())
            }
            ModelKind::Translator => {
                let t = Translator::from_checkpoint(&ckpt).map_err(in_file(path))?;
                claims.add("d_img", t.d_img(), path);
                claims.add("d_mel", t.d_mel(), path);
                claims.add("bars", t.bars(), path);
                format!("d_img={} d_mel={} bars={} stage={}", t.d_img(), t.d_mel(), t.bars(), t.stage())
            }
            ModelKind::Pairs => {
                let pairs = pairs_from_checkpoint(&ckpt).map_err(in_file(path))?;
                let d_img = ckpt.parse_field::<usize>("d_img").map_err(in_file(path))?;
                let d_mel = ckpt.parse_field::<usize>("d_mel").map_err(in_file(path))?;
                claims.add("d_img", d_img, path);
                claims.add("d_mel", d_mel, path);
                format!("count={} d_img={d_img} d_mel={d_mel}", pairs.len())
            }
        };
        println!("{}: OK {} {detail} identity={id}", path.display(), kind.as_str());
    }
    claims.check()?;
    println!("all {} checkpoints are compatible", paths.len());
    Ok(())
}
