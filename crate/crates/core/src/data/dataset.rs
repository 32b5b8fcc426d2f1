//! Canonical trajectory CSV, dataset manifest and the train/test split.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mnmr::WindowSpec;

use super::trajectory::{TrajectoryPair, TrajectorySample};
use super::windows::{windows_for_all, WindowMatrix, Windowing};

pub const CANONICAL_HEADER: [&str; 6] = ["pair_id", "time_s", "v_fv", "v_lv", "gap_m", "a_fv"];
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalRow {
    pair_id: String,
    time_s: f64,
    v_fv: f64,
    v_lv: f64,
    gap_m: f64,
    a_fv: f64,
}

/// Serializes pairs in canonical CSV form.
pub fn canonical_csv_bytes(pairs: &[TrajectoryPair]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CANONICAL_HEADER)?;
    for p in pairs {
        for s in &p.samples {
            w.serialize(CanonicalRow {
                pair_id: p.pair_id.clone(),
                time_s: s.time,
                v_fv: s.v_fv,
                v_lv: s.v_lv,
                gap_m: s.gap,
                a_fv: s.a_fv,
            })?;
        }
    }
    w.into_inner()
        .map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

/// Parses canonical CSV. Rows must be grouped by pair and time-sorted; the
/// rate is inferred from the sample spacing (`default_rate_hz` for
/// single-sample pairs).
pub fn parse_canonical_csv(bytes: &[u8], default_rate_hz: f64) -> Result<Vec<TrajectoryPair>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CANONICAL_HEADER {
        return Err(Error::Data(format!(
            "canonical header must be `{}`, found `{}`",
            CANONICAL_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut pairs: Vec<TrajectoryPair> = Vec::new();
    for row in rdr.deserialize::<CanonicalRow>() {
        let row = row?;
        let sample = TrajectorySample {
            time: row.time_s,
            v_fv: row.v_fv,
            v_lv: row.v_lv,
            gap: row.gap_m,
            a_fv: row.a_fv,
        };
        match pairs.last_mut() {
            Some(p) if p.pair_id == row.pair_id => p.samples.push(sample),
            _ => {
                if pairs.iter().any(|p| p.pair_id == row.pair_id) {
                    return Err(Error::Data(format!(
                        "rows of pair {} are not contiguous",
                        row.pair_id
                    )));
                }
                pairs.push(TrajectoryPair {
                    pair_id: row.pair_id,
                    samples: vec![sample],
                    rate_hz: default_rate_hz,
                });
            }
        }
    }
    for p in &mut pairs {
        if p.samples.len() > 1 {
            let span = p.duration();
            p.rate_hz = ((p.samples.len() - 1) as f64 / span * 1e6).round() / 1e6;
        }
        p.validate()?;
    }
    Ok(pairs)
}

pub fn read_canonical_csv(path: &Path) -> Result<Vec<TrajectoryPair>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_canonical_csv(&bytes, 5.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
    pub pairs: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub train_fraction: f64,
    /// Train count is `ceil(train_fraction · N)`, clamped to `[1, N − 1]`.
    pub rounding: String,
    pub seed: u64,
}

/// Where a dataset came from and how it was cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub source_files: Vec<String>,
    pub seed: u64,
    pub downsample_factor: Option<usize>,
    pub min_duration_s: Option<f64>,
    pub split: SplitParams,
    pub windowing: Windowing,
    pub gap_convention: String,
    /// Free-form extra metadata (ingest drop counts, synthetic settings).
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub files: Vec<FileEntry>,
    pub counts: DatasetCounts,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub pairs: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<TrajectoryPair>,
    pub test: Vec<TrajectoryPair>,
    pub provenance: Provenance,
}

pub const GAP_CONVENTION: &str = "positive bumper-to-bumper gap (leader rear minus follower front)";

impl Dataset {
    pub fn train_windows(&self, spec: &WindowSpec) -> Result<Vec<WindowMatrix>> {
        windows_for_all(&self.train, spec, self.provenance.windowing)
    }

    pub fn test_windows(&self, spec: &WindowSpec) -> Result<Vec<WindowMatrix>> {
        windows_for_all(&self.test, spec, self.provenance.windowing)
    }

    pub fn find_pair(&self, pair_id: &str) -> Option<&TrajectoryPair> {
        self.train
            .iter()
            .chain(self.test.iter())
            .find(|p| p.pair_id == pair_id)
    }

    /// Digest over both canonical files, used as a cache key.
    pub fn checksum(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(canonical_csv_bytes(&self.train)?);
        h.update(b"\x00");
        h.update(canonical_csv_bytes(&self.test)?);
        h.update(serde_json::to_vec(&self.provenance.windowing)?);
        Ok(hex::encode(h.finalize()))
    }

    /// Writes `train.csv`, `test.csv` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for (name, pairs) in [(TRAIN_FILE, &self.train), (TEST_FILE, &self.test)] {
            let bytes = canonical_csv_bytes(pairs)?;
            write_file(&dir.join(name), &bytes)?;
            files.push(FileEntry {
                name: name.to_string(),
                rows: pairs.iter().map(|p| p.len()).sum(),
                pairs: pairs.len(),
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = Manifest {
            schema_version: 1,
            files,
            counts: DatasetCounts {
                pairs: self.train.len() + self.test.len(),
                train_pairs: self.train.len(),
                test_pairs: self.test.len(),
            },
            provenance: self.provenance.clone(),
        };
        write_json(&dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }

    /// Loads a dataset directory, verifying file checksums against the
    /// manifest.
    pub fn read(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = std::fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_slice(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", mpath.display())))?;
        let load = |name: &str| -> Result<Vec<TrajectoryPair>> {
            let path = dir.join(name);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if let Some(entry) = manifest.files.iter().find(|f| f.name == name) {
                let digest = sha256_hex(&bytes);
                if digest != entry.sha256 {
                    return Err(Error::Data(format!(
                        "{}: checksum mismatch with manifest",
                        path.display()
                    )));
                }
            }
            parse_canonical_csv(&bytes, 5.0)
        };
        let train = load(TRAIN_FILE)?;
        let test = load(TEST_FILE)?;
        Ok(Self {
            train,
            test,
            provenance: manifest.provenance,
        })
    }
}

/// Seeded pair-level split. Pairs are sorted by id before shuffling so the
/// result does not depend on input order.
pub fn split(
    mut pairs: Vec<TrajectoryPair>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<TrajectoryPair>, Vec<TrajectoryPair>, SplitParams)> {
    if pairs.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 pairs to split, got {}",
            pairs.len()
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    let n = pairs.len();
    let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let test = pairs.split_off(n_train);
    Ok((
        pairs,
        test,
        SplitParams {
            train_fraction,
            rounding: "ceil".to_string(),
            seed,
        },
    ))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
