//! On-disk formats: JSON Lines chains and audit logs, JSON snapshots, CSV
//! tables and raw angle images.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tbict_core::identity::{AuthorizedRegistry, NodeIdentity};
use tbict_core::ledger::{Block, InfectedUsersPool, IupEntry};
use tbict_core::signal::{AngleImage, ChannelKind, IMAGE_SIDE};

use crate::error::{Error, Result};

/// Marker left in an output directory whose run did not complete.
pub const PARTIAL_MARKER: &str = ".partial";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes one compact JSON document per line.
pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| Error::Json { path: path.into(), source })?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// Reads JSON Lines, skipping blank lines. Parse failures name the line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::Validation(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json { path: path.into(), source })?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Writes rows with a header derived from the row type's field names.
pub fn write_csv<'a, T: Serialize + 'a>(path: &Path, rows: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.into(), source })?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|source| Error::Csv { path: path.into(), source })
}

pub fn write_chain(path: &Path, blocks: &[Block]) -> Result<()> {
    write_jsonl(path, blocks)
}

pub fn read_chain(path: &Path) -> Result<Vec<Block>> {
    read_jsonl(path)
}

pub fn write_iup(path: &Path, iup: &InfectedUsersPool) -> Result<()> {
    write_json(path, &iup.entries())
}

pub fn read_iup(path: &Path) -> Result<Vec<IupEntry>> {
    read_json(path)
}

/// Authorized registry together with the manager key that signed it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegistryFile {
    pub manager: NodeIdentity,
    pub registry: AuthorizedRegistry,
}

impl RegistryFile {
    pub fn verify(&self) -> Result<()> {
        self.registry
            .verify(self.manager.public_key())
            .map_err(|e| Error::Validation(format!("registry signature: {e}")))
    }
}

/// Layout of `images.bin`, stored next to it as `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageManifest {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub entries: Vec<ImageEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub snr_db: Option<f64>,
    pub channel_kind: ChannelKind,
    pub trial: usize,
    pub beacon_ids: Vec<u32>,
    pub true_xy: [f64; 2],
}

/// Writes images as consecutive row-major 28x28 little-endian `f32` blocks.
pub fn write_images(dir: &Path, images: &[(ImageEntry, AngleImage)]) -> Result<()> {
    let bin = dir.join("images.bin");
    let mut w = create(&bin)?;
    for (_, image) in images {
        for v in &image.padded {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(|e| Error::io(&bin, e))?;
        }
    }
    finish(&bin, w)?;
    let manifest = ImageManifest {
        count: images.len(),
        rows: IMAGE_SIDE,
        cols: IMAGE_SIDE,
        dtype: "f32le".into(),
        entries: images.iter().map(|(e, _)| e.clone()).collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Reads `images.bin` back into flat 784-entry images.
pub fn read_images(dir: &Path) -> Result<(ImageManifest, Vec<Vec<f32>>)> {
    let manifest: ImageManifest = read_json(&dir.join("manifest.json"))?;
    let bin = dir.join("images.bin");
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let per_image = manifest.rows * manifest.cols;
    if bytes.len() != manifest.count * per_image * 4 {
        return Err(Error::Validation(format!(
            "{} holds {} bytes, manifest implies {}",
            bin.display(),
            bytes.len(),
            manifest.count * per_image * 4
        )));
    }
    let values: Vec<f32> =
        bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("chunk of four"))).collect();
    let images = values.chunks(per_image.max(1)).map(<[f32]>::to_vec).collect();
    Ok((manifest, images))
}

/// Tracks the files of one run and flags the directory if the run fails.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    /// Clears a stale marker from an earlier failed run.
    pub fn open(dir: &Path) -> Result<Self> {
        let marker = dir.join(PARTIAL_MARKER);
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
        Ok(OutputDir { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Records `name` as produced by this run.
    pub fn track(&mut self, name: &str) -> PathBuf {
        let p = self.path(name);
        self.written.push(p.clone());
        p
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes the `.partial` marker with the error text and the files this
    /// run wrote or started.
    pub fn mark_partial(&self, error: &Error) -> Result<()> {
        let marker = self.path(PARTIAL_MARKER);
        let mut text = format!("{error}\n");
        for p in &self.written {
            if let Some(name) = p.file_name() {
                text.push_str(&name.to_string_lossy());
                text.push('\n');
            }
        }
        fs::write(&marker, text).map_err(|e| Error::io(&marker, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tbict_core::ledger::Chain;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        a: u32,
        b: f64,
        c: Option<f64>,
    }

    #[test]
    fn csv_round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![Row { a: 1, b: 0.1, c: None }, Row { a: 2, b: -1e-300, c: Some(2.5) }];
        write_csv(&p, &rows).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("a,b,c\n"), "{text}");
        assert_eq!(read_csv::<Row>(&p).unwrap(), rows);
    }

    #[test]
    fn chain_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("chain.jsonl");
        let chain = Chain::new();
        write_chain(&p, chain.blocks()).unwrap();
        let first = fs::read(&p).unwrap();
        let back = read_chain(&p).unwrap();
        assert_eq!(back, chain.blocks());
        write_chain(&p, &back).unwrap();
        assert_eq!(fs::read(&p).unwrap(), first);
        assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 1);
    }

    #[test]
    fn bad_jsonl_line_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("chain.jsonl");
        fs::write(&p, "{\"index\": 0}\n").unwrap();
        let err = read_chain(&p).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn partial_marker_lists_flushed_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::open(dir.path()).unwrap();
        let p = out.track("metrics.csv");
        fs::write(&p, "x\n").unwrap();
        out.mark_partial(&Error::Validation("boom".into())).unwrap();
        let text = fs::read_to_string(dir.path().join(PARTIAL_MARKER)).unwrap();
        assert!(text.contains("boom") && text.contains("metrics.csv"));
        OutputDir::open(dir.path()).unwrap();
        assert!(!dir.path().join(PARTIAL_MARKER).exists());
    }
}
