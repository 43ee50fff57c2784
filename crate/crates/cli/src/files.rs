//! File-system helpers shared by the subcommands.

use std::path::{Path, PathBuf};

use synesthete_core::checkpoint::{identity, Checkpoint};
use synesthete_core::imaging::{downsample64, png_files_in, read_png_file};
use synesthete_core::melody::{parse_midi, quantize, segment_midi, write_midi};
use synesthete_core::{Error, ImageRgb64, TokenGrid};

use crate::manifest::{Manifest, DATASET_MANIFEST};
use crate::{CliError, CliResult};

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e).into())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e).into())
}

pub fn ensure_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

/// Item file name inside a dataset directory, e.g. `melody_00042.mid`.
pub fn item_name(prefix: &str, index: usize, ext: &str) -> String {
    format!("{prefix}_{index:05}.{ext}")
}

/// Remove files named like [`item_name`] output from an earlier run so a
/// rerun with a smaller count leaves a consistent directory.
pub fn clear_items(dir: &Path, prefix: &str, ext: &str) -> CliResult {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Ok(());
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let stem = name
            .strip_prefix(prefix)
            .and_then(|s| s.strip_prefix('_'))
            .and_then(|s| s.strip_suffix(ext))
            .and_then(|s| s.strip_suffix('.'));
        if stem.is_some_and(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())) {
            let path = entry.path();
            std::fs::remove_file(&path).map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// Files under `dir` (recursively) with one of `exts`, sorted.
pub fn files_with_ext(dir: &Path, exts: &[&str]) -> CliResult<Vec<PathBuf>> {
    fn walk(dir: &Path, exts: &[&str], out: &mut Vec<PathBuf>) -> CliResult {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, exts, out)?;
            } else if path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
            {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, exts, &mut out)?;
    out.sort();
    Ok(out)
}

/// If `dir` carries a dataset manifest, check its kind and item count.
pub fn check_dataset(dir: &Path, kinds: &[&str], found: usize) -> CliResult {
    let path = dir.join(DATASET_MANIFEST);
    if !path.exists() {
        return Ok(());
    }
    let m = Manifest::read(&path)?;
    let kind = m.get("kind").unwrap_or("");
    if !kinds.contains(&kind) {
        return Err(CliError::Data(format!(
            "{} describes a `{kind}` dataset, expected one of {kinds:?}",
            path.display()
        )));
    }
    let count: Option<usize> = m.get("count").and_then(|c| c.parse().ok());
    if count != Some(found) {
        return Err(CliError::Data(format!(
            "{} lists {} items but {found} are on disk",
            path.display(),
            m.get("count").unwrap_or("no count")
        )));
    }
    Ok(())
}

/// All PNGs of an image dataset directory.
pub fn image_dataset(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let files = png_files_in(dir)?;
    check_dataset(dir, &["images", "tiles"], files.len())?;
    Ok(files)
}

/// All MIDI files of a melody dataset directory.
pub fn melody_dataset(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let files = files_with_ext(dir, &["mid", "midi"])?;
    check_dataset(dir, &["melodies"], files.len())?;
    Ok(files)
}

/// Consecutive `bars`-bar windows of a MIDI file. A file shorter than one
/// full window of notes yields a single zero-padded window.
pub fn read_melody_windows(path: &Path, bars: usize) -> CliResult<Vec<TokenGrid>> {
    let midi = parse_midi(&read_bytes(path)?)?;
    let windows = segment_midi(&midi.events, midi.ticks_per_quarter, bars)?;
    if windows.is_empty() {
        Ok(vec![quantize(&midi.events, midi.ticks_per_quarter, bars)?])
    } else {
        Ok(windows)
    }
}

/// The first `bars`-bar window of a MIDI file.
pub fn read_melody(path: &Path, bars: usize) -> CliResult<TokenGrid> {
    let midi = parse_midi(&read_bytes(path)?)?;
    Ok(quantize(&midi.events, midi.ticks_per_quarter, bars)?)
}

pub fn write_melody(path: &Path, grid: &TokenGrid) -> CliResult {
    write_bytes(path, &write_midi(grid))
}

/// A PNG at the 64x64 working resolution; 64x64 inputs convert exactly.
pub fn read_image64(path: &Path) -> CliResult<ImageRgb64> {
    let full = read_png_file(path)?;
    if full.width() == 64 && full.height() == 64 {
        Ok(ImageRgb64::from_full(&full)?)
    } else {
        Ok(downsample64(&full))
    }
}

pub fn write_image64(path: &Path, image: &ImageRgb64) -> CliResult {
    write_bytes(path, &image.to_png()?)
}

/// A checkpoint and its identity (hash prefix of the file bytes).
pub fn load_checkpoint(path: &Path) -> CliResult<(Checkpoint, String)> {
    let bytes = read_bytes(path)?;
    let ckpt = Checkpoint::from_bytes(&bytes).map_err(|e| match e {
        Error::CheckpointParse(m) => Error::CheckpointParse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((ckpt, identity(&bytes)))
}

/// Write a checkpoint and return its identity.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> CliResult<String> {
    let bytes = ckpt.to_bytes();
    write_bytes(path, &bytes)?;
    Ok(identity(&bytes))
}

/// `out.mid` → `out.mid.manifest.txt`.
pub fn sidecar_manifest(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.txt");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clear_items_only_touches_numbered_outputs() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["melody_00000.mid", "melody_00001.mid", "melody_x.mid", "keep.mid", "melody_00002.png"] {
            std::fs::write(dir.path().join(name), b"x").unwrap();
        }
        clear_items(dir.path(), "melody", "mid").unwrap();
        let mut left: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        left.sort();
        assert_eq!(left, ["keep.mid", "melody_00002.png", "melody_x.mid"]);
    }

    #[test]
    fn dataset_count_must_match_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("melodies");
        m.set("count", 2);
        m.write(&dir.path().join(DATASET_MANIFEST)).unwrap();
        assert!(check_dataset(dir.path(), &["melodies"], 2).is_ok());
        assert_eq!(check_dataset(dir.path(), &["melodies"], 1).unwrap_err().exit_code(), 2);
        assert_eq!(check_dataset(dir.path(), &["tiles"], 2).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_manifest(Path::new("a/b.mid")), PathBuf::from("a/b.mid.manifest.txt"));
    }
}
