//! Codebook tables for residual quantization.
//!
//! A [`CodebookSet`] holds the ordered per-level tables `C_1..C_L`; level `i`
//! quantizes whatever residual the levels before it left behind. Entries are
//! kept in memory as `f64` and persisted as little-endian `f32`, so every
//! generator and trainer in this module rounds its output to `f32` precision.
//! That keeps `save` followed by `load` bit-exact for everything produced here.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvqError};
use crate::kmeans;
use crate::quantizer::nearest;

pub const FILE_MAGIC: &[u8; 4] = b"RVQC";
pub const FILE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 4 + 4;

/// One quantization level: `size` code vectors of `dim` components, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    level: usize,
    size: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl Codebook {
    /// Builds a codebook from a flat row-major table.
    pub fn new(level: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        if level == 0 {
            return Err(RvqError::arg("codebook level is 1-based"));
        }
        if dim == 0 {
            return Err(RvqError::arg("codebook dimension must be at least 1"));
        }
        if entries.is_empty() || !entries.len().is_multiple_of(dim) {
            return Err(RvqError::arg(format!(
                "codebook table of {} values is not a non-empty multiple of dim {dim}",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(RvqError::arg(format!(
                "level {level} entry {} component {} is not finite",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            level,
            size: entries.len() / dim,
            dim,
            entries,
        })
    }

    pub fn from_rows(level: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(RvqError::arg("codebook rows have differing lengths"));
        }
        Self::new(level, dim, rows.concat())
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of code vectors (`S`).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entry(&self, index: usize) -> &[f64] {
        &self.entries[index * self.dim..(index + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.dim)
    }
}

/// The ordered family of codebooks used by one residual quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    codebooks: Vec<Codebook>,
    dim: usize,
}

impl CodebookSet {
    pub fn new(codebooks: Vec<Codebook>) -> Result<Self> {
        let first = codebooks
            .first()
            .ok_or_else(|| RvqError::arg("a codebook set needs at least one level"))?;
        let dim = first.dim;
        for (i, cb) in codebooks.iter().enumerate() {
            if cb.level != i + 1 {
                return Err(RvqError::arg(format!(
                    "codebook at position {} has level {}, expected {}",
                    i,
                    cb.level,
                    i + 1
                )));
            }
            if cb.dim != dim {
                return Err(RvqError::arg(format!(
                    "level {} has dim {}, level 1 has dim {dim}",
                    cb.level, cb.dim
                )));
            }
        }
        Ok(Self { codebooks, dim })
    }

    /// Builds a set from flat per-level tables, assigning levels 1..L in order.
    pub fn from_tables(dim: usize, tables: Vec<Vec<f64>>) -> Result<Self> {
        let codebooks = tables
            .into_iter()
            .enumerate()
            .map(|(i, t)| Codebook::new(i + 1, dim, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(codebooks)
    }

    /// Number of levels (`L`).
    pub fn levels(&self) -> usize {
        self.codebooks.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Codebook at 0-based position `pos` (level `pos + 1`).
    pub fn codebook(&self, pos: usize) -> &Codebook {
        &self.codebooks[pos]
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn max_size(&self) -> usize {
        self.codebooks.iter().map(Codebook::size).max().unwrap_or(0)
    }

    /// `Some(S)` when every level has the same size.
    pub fn uniform_size(&self) -> Option<usize> {
        let s = self.codebooks[0].size;
        self.codebooks.iter().all(|c| c.size == s).then_some(s)
    }

    /// Seeded standard-normal codebooks scaled by `scale`.
    ///
    /// Values are drawn from one ChaCha8 stream, level-major, then row-major,
    /// then column-major, and rounded to `f32`.
    pub fn generate_random(
        seed: u64,
        levels: usize,
        size: usize,
        dim: usize,
        scale: f64,
    ) -> Result<Self> {
        if levels == 0 || size == 0 || dim == 0 {
            return Err(RvqError::arg(format!(
                "L, S and D must be at least 1 (got L={levels}, S={size}, D={dim})"
            )));
        }
        if levels > u16::MAX as usize {
            return Err(RvqError::arg(format!(
                "L={levels} does not fit the file format"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(RvqError::arg(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = (0..levels)
            .map(|_| {
                (0..size * dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        round_f32(z * scale)
                    })
                    .collect()
            })
            .collect();
        Self::from_tables(dim, tables)
    }

    /// Fits `levels` codebooks of `size` entries by residual k-means.
    ///
    /// Level 1 clusters the samples; level `i` clusters the residuals left by
    /// greedy quantization through the already-trained levels. Centroids are
    /// rounded to `f32` before the next level's residuals are formed.
    pub fn train_residual_kmeans(
        samples: &[Vec<f64>],
        levels: usize,
        size: usize,
        iters: usize,
        seed: u64,
    ) -> Result<Self> {
        if levels == 0 || size == 0 {
            return Err(RvqError::arg("L and S must be at least 1"));
        }
        if iters == 0 {
            return Err(RvqError::arg("k-means needs at least one iteration"));
        }
        if samples.len() < size {
            return Err(RvqError::arg(format!(
                "{} samples cannot seed {size} centroids",
                samples.len()
            )));
        }
        let dim = samples[0].len();
        if dim == 0 {
            return Err(RvqError::arg("samples must have at least one component"));
        }
        let mut residuals = Vec::with_capacity(samples.len() * dim);
        for (i, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(RvqError::arg(format!(
                    "sample {i} has dim {}, expected {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(RvqError::arg(format!(
                    "sample {i} has a non-finite component"
                )));
            }
            residuals.extend_from_slice(s);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut codebooks = Vec::with_capacity(levels);
        for level in 1..=levels {
            let mut centroids = kmeans::fit(&residuals, dim, size, iters, &mut rng);
            centroids.iter_mut().for_each(|v| *v = round_f32(*v));
            let cb = Codebook::new(level, dim, centroids)?;
            for r in residuals.chunks_exact_mut(dim) {
                let (idx, _) = nearest(r, &cb);
                for (v, c) in r.iter_mut().zip(cb.entry(idx)) {
                    *v -= c;
                }
            }
            codebooks.push(cb);
        }
        Self::new(codebooks)
    }

    /// Serializes to the `.rvqc` layout. Entries are narrowed to `f32`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let size = self.uniform_size().ok_or_else(|| {
            RvqError::format(
                "S",
                "the file format requires every level to have the same size",
            )
        })?;
        let levels = u16::try_from(self.levels())
            .map_err(|_| RvqError::format("L", format!("{} levels exceed u16", self.levels())))?;
        let size = u32::try_from(size).map_err(|_| RvqError::format("S", "size exceeds u32"))?;
        let dim = u32::try_from(self.dim).map_err(|_| RvqError::format("D", "dim exceeds u32"))?;

        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(FILE_MAGIC);
        header.extend_from_slice(&FILE_VERSION.to_le_bytes());
        header.extend_from_slice(&levels.to_le_bytes());
        header.extend_from_slice(&size.to_le_bytes());
        header.extend_from_slice(&dim.to_le_bytes());
        header.extend_from_slice(&0u32.to_le_bytes());
        w.write_all(&header)?;
        for cb in &self.codebooks {
            let bytes: Vec<u8> = cb
                .entries
                .iter()
                .flat_map(|&v| (v as f32).to_le_bytes())
                .collect();
            w.write_all(&bytes)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        read_exact_or(&mut r, &mut header, "header")?;
        if &header[0..4] != FILE_MAGIC {
            return Err(RvqError::format(
                "magic",
                format!("expected {:?}, found {:?}", FILE_MAGIC, &header[0..4]),
            ));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FILE_VERSION {
            return Err(RvqError::format(
                "version",
                format!("unsupported version {version}, expected {FILE_VERSION}"),
            ));
        }
        let levels = u16::from_le_bytes([header[6], header[7]]) as usize;
        let size = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let reserved = u32::from_le_bytes(header[16..20].try_into().unwrap());
        if levels == 0 {
            return Err(RvqError::format("L", "must be at least 1"));
        }
        if size == 0 {
            return Err(RvqError::format("S", "must be at least 1"));
        }
        if dim == 0 {
            return Err(RvqError::format("D", "must be at least 1"));
        }
        if reserved != 0 {
            return Err(RvqError::format(
                "reserved",
                format!("expected 0, found {reserved}"),
            ));
        }

        let per_level = size
            .checked_mul(dim)
            .ok_or_else(|| RvqError::format("S", "S*D overflows"))?;
        let mut buf = vec![0u8; per_level * 4];
        let mut codebooks = Vec::with_capacity(levels);
        for level in 1..=levels {
            read_exact_or(&mut r, &mut buf, "payload")?;
            let mut entries = Vec::with_capacity(per_level);
            for (i, b) in buf.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(b.try_into().unwrap());
                if !v.is_finite() {
                    return Err(RvqError::format(
                        "payload",
                        format!(
                            "level {level} entry {} component {} is {v}",
                            i / dim,
                            i % dim
                        ),
                    ));
                }
                entries.push(v as f64);
            }
            codebooks.push(Codebook::new(level, dim, entries)?);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(RvqError::format(
                "payload",
                "trailing bytes after the last level",
            ));
        }
        Self::new(codebooks)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], field: &'static str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            RvqError::format(field, "file is truncated")
        } else {
            RvqError::Io(e)
        }
    })
}

#[inline]
pub(crate) fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// Per-group residual quantizers over consecutive slices of one input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCodebookSet {
    groups: Vec<CodebookSet>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupManifest {
    version: u32,
    levels: usize,
    groups: Vec<GroupEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupEntry {
    file: String,
    dim: usize,
}

pub const GROUP_MANIFEST: &str = "manifest.json";

impl GroupedCodebookSet {
    pub fn new(groups: Vec<CodebookSet>) -> Result<Self> {
        let levels = groups
            .first()
            .ok_or_else(|| RvqError::arg("a grouped set needs at least one group"))?
            .levels();
        if let Some(g) = groups.iter().position(|g| g.levels() != levels) {
            return Err(RvqError::arg(format!(
                "group {g} has {} levels, group 0 has {levels}",
                groups[g].levels()
            )));
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[CodebookSet] {
        &self.groups
    }

    pub fn group_dims(&self) -> Vec<usize> {
        self.groups.iter().map(CodebookSet::dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.groups.iter().map(CodebookSet::dim).sum()
    }

    pub fn levels(&self) -> usize {
        self.groups[0].levels()
    }

    /// Writes one `.rvqc` file per group plus a JSON manifest into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.groups.len());
        for (g, set) in self.groups.iter().enumerate() {
            let file = format!("group_{g:03}.rvqc");
            set.save(dir.join(&file))?;
            entries.push(GroupEntry {
                file,
                dim: set.dim(),
            });
        }
        let manifest = GroupManifest {
            version: 1,
            levels: self.levels(),
            groups: entries,
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| RvqError::format("manifest", e.to_string()))?;
        fs::write(dir.join(GROUP_MANIFEST), json)?;
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join(GROUP_MANIFEST))?;
        let manifest: GroupManifest =
            serde_json::from_str(&text).map_err(|e| RvqError::format("manifest", e.to_string()))?;
        if manifest.version != 1 {
            return Err(RvqError::format(
                "version",
                format!("unsupported manifest version {}", manifest.version),
            ));
        }
        let mut groups = Vec::with_capacity(manifest.groups.len());
        for entry in &manifest.groups {
            let set = CodebookSet::load(dir.join(&entry.file))?;
            if set.dim() != entry.dim {
                return Err(RvqError::format(
                    "group_dims",
                    format!(
                        "{} has dim {}, manifest says {}",
                        entry.file,
                        set.dim(),
                        entry.dim
                    ),
                ));
            }
            if set.levels() != manifest.levels {
                return Err(RvqError::format(
                    "levels",
                    format!(
                        "{} has {} levels, manifest says {}",
                        entry.file,
                        set.levels(),
                        manifest.levels
                    ),
                ));
            }
            groups.push(set);
        }
        Self::new(groups)
    }
}
