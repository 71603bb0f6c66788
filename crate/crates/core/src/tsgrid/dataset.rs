//! `TSDS` pair files and their JSON sidecar.
//!
//! Layout: magic `TSDS`, then `u32` LE `version`, `pair_count`, `H`, `W`,
//! then `pair_count` records, each two `H x W` row-major `f32` LE grids
//! (input, target). The sidecar (`<file>.json`) lists run id, lane,
//! segment and window starts per pair, plus the run-level split.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::{COLS, ROWS};
use super::pairs::SamplePair;

pub const TSDS_MAGIC: &[u8; 4] = b"TSDS";
pub const TSDS_VERSION: u32 = 1;
const HEADER_BYTES: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub run_id: u64,
    pub lane: u8,
    pub segment_origin: f64,
    pub input_window_start: f64,
    pub target_window_start: f64,
}

impl PairMeta {
    pub fn of(pair: &SamplePair) -> Self {
        Self {
            run_id: pair.run_id,
            lane: pair.input.origin.lane,
            segment_origin: pair.input.origin.segment_origin,
            input_window_start: pair.input.origin.window_start,
            target_window_start: pair.target.origin.window_start,
        }
    }
}

/// Run ids assigned to each split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train: Vec<u64>,
    pub validation: Vec<u64>,
    pub test: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub pairs: Vec<PairMeta>,
    pub split: Option<SplitAssignment>,
}

pub fn sidecar_path(dataset: &Path) -> PathBuf {
    let mut s = dataset.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Random access to supervised pairs.
pub trait PairSource {
    fn len(&self) -> usize;
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn meta(&self, index: usize) -> &PairMeta;
    /// `(input, target)` grids, row-major.
    fn read_pair(&self, index: usize) -> Result<(Vec<f32>, Vec<f32>)>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pairs held in memory.
#[derive(Debug, Clone, Default)]
pub struct InMemoryDataset {
    pub height: usize,
    pub width: usize,
    pub metas: Vec<PairMeta>,
    pub inputs: Vec<Vec<f32>>,
    pub targets: Vec<Vec<f32>>,
}

impl InMemoryDataset {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            ..Self::default()
        }
    }

    pub fn push(&mut self, meta: PairMeta, input: Vec<f32>, target: Vec<f32>) -> Result<()> {
        let n = self.height * self.width;
        if input.len() != n || target.len() != n {
            return Err(Error::Shape(format!("pair grids must have {n} cells")));
        }
        self.metas.push(meta);
        self.inputs.push(input);
        self.targets.push(target);
        Ok(())
    }

    pub fn push_pair(&mut self, pair: &SamplePair) -> Result<()> {
        let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        self.push(PairMeta::of(pair), to_f32(&pair.input.cells), to_f32(&pair.target.cells))
    }
}

impl PairSource for InMemoryDataset {
    fn len(&self) -> usize {
        self.metas.len()
    }

    fn height(&self) -> usize {
        self.height
    }

    fn width(&self) -> usize {
        self.width
    }

    fn meta(&self, index: usize) -> &PairMeta {
        &self.metas[index]
    }

    fn read_pair(&self, index: usize) -> Result<(Vec<f32>, Vec<f32>)> {
        if index >= self.len() {
            return Err(Error::Invalid(format!("pair {index} out of range ({} pairs)", self.len())));
        }
        Ok((self.inputs[index].clone(), self.targets[index].clone()))
    }
}

/// Streams pairs into a `TSDS` file.
pub struct TsdsWriter {
    path: PathBuf,
    out: BufWriter<File>,
    height: usize,
    width: usize,
    metas: Vec<PairMeta>,
}

impl TsdsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Self::with_dims(path, ROWS, COLS)
    }

    pub fn with_dims(path: &Path, height: usize, width: usize) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(TSDS_MAGIC)?;
        for v in [TSDS_VERSION, 0, height as u32, width as u32] {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            out,
            height,
            width,
            metas: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn write(&mut self, meta: PairMeta, input: &[f32], target: &[f32]) -> Result<()> {
        let n = self.height * self.width;
        if input.len() != n || target.len() != n {
            return Err(Error::Shape(format!("pair grids must have {n} cells")));
        }
        let mut buf = Vec::with_capacity(8 * n);
        for v in input.iter().chain(target) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.metas.push(meta);
        Ok(())
    }

    pub fn write_pair(&mut self, pair: &SamplePair) -> Result<()> {
        let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        self.write(PairMeta::of(pair), &to_f32(&pair.input.cells), &to_f32(&pair.target.cells))
    }

    /// Patches the pair count and writes the sidecar.
    pub fn finish(mut self, split: Option<SplitAssignment>) -> Result<DatasetIndex> {
        self.out.flush()?;
        let mut file = self.out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        file.seek(SeekFrom::Start(8))?;
        file.write_all(&(self.metas.len() as u32).to_le_bytes())?;
        file.flush()?;
        let index = DatasetIndex {
            version: TSDS_VERSION,
            height: self.height,
            width: self.width,
            pairs: self.metas,
            split,
        };
        write_index(&self.path, &index)?;
        Ok(index)
    }
}

pub fn write_index(dataset: &Path, index: &DatasetIndex) -> Result<()> {
    let file = File::create(sidecar_path(dataset))?;
    serde_json::to_writer_pretty(BufWriter::new(file), index)?;
    Ok(())
}

/// Random-access reader over a `TSDS` file and its sidecar.
pub struct TsdsReader {
    file: Mutex<File>,
    index: DatasetIndex,
}

impl TsdsReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path)?;
        let mut header = [0u8; HEADER_BYTES as usize];
        file.read_exact(&mut header)
            .map_err(|_| Error::Format(format!("{}: truncated TSDS header", path.display())))?;
        if &header[..4] != TSDS_MAGIC {
            return Err(Error::Format(format!("{}: missing TSDS magic", path.display())));
        }
        let word = |k: usize| u32::from_le_bytes(header[4 + 4 * k..8 + 4 * k].try_into().unwrap());
        let (version, count, height, width) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize);
        if version != TSDS_VERSION {
            return Err(Error::Format(format!("TSDS version {version}, expected {TSDS_VERSION}")));
        }
        let expected = HEADER_BYTES + (count * 2 * height * width * 4) as u64;
        let actual = file.metadata()?.len();
        if actual != expected {
            return Err(Error::Format(format!(
                "{}: {actual} bytes, expected {expected} for {count} pairs",
                path.display()
            )));
        }
        let index: DatasetIndex = serde_json::from_reader(File::open(sidecar_path(path))?)?;
        if index.pairs.len() != count || index.height != height || index.width != width {
            return Err(Error::Format(format!(
                "sidecar describes {} pairs of {}x{}, file has {count} of {height}x{width}",
                index.pairs.len(),
                index.height,
                index.width
            )));
        }
        Ok(Self {
            file: Mutex::new(file),
            index,
        })
    }

    pub fn index(&self) -> &DatasetIndex {
        &self.index
    }
}

impl PairSource for TsdsReader {
    fn len(&self) -> usize {
        self.index.pairs.len()
    }

    fn height(&self) -> usize {
        self.index.height
    }

    fn width(&self) -> usize {
        self.index.width
    }

    fn meta(&self, index: usize) -> &PairMeta {
        &self.index.pairs[index]
    }

    fn read_pair(&self, index: usize) -> Result<(Vec<f32>, Vec<f32>)> {
        if index >= self.len() {
            return Err(Error::Invalid(format!("pair {index} out of range ({} pairs)", self.len())));
        }
        let n = self.height() * self.width();
        let mut bytes = vec![0u8; 8 * n];
        {
            let mut file = self.file.lock().expect("dataset file lock");
            file.seek(SeekFrom::Start(HEADER_BYTES + (index * 8 * n) as u64))?;
            file.read_exact(&mut bytes)?;
        }
        let mut grid = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let input: Vec<f32> = grid.by_ref().take(n).collect();
        let target: Vec<f32> = grid.collect();
        Ok((input, target))
    }
}
