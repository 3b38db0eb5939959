//! On-disk form of traffic matrices.
//!
//! # TMX
//!
//! A sorted-COO container, all fields little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "TMX1"
//!      4     4  format_version = 1
//!      8     4  flags = 0
//!     12     4  reserved = 0
//!     16     8  window_index (0xFFFF_FFFF_FFFF_FFFF = aggregate)
//!     24     8  nnz
//!     32  16*n  nnz triples (row: u32, col: u32, count: u64), ascending by (row, col)
//! ```
//!
//! # Archives
//!
//! Consecutive matrices are grouped into POSIX ustar archives named
//! `tm_<first_window>_<last_window>.tar`, each member named
//! `tm_<window:08>.tmx`. Member metadata is fixed (mtime 0, mode 0644, uid and
//! gid 0, empty owner names) so identical matrices give identical archives.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::matrix::{Entry, MatrixError, TrafficMatrix};

pub const TMX_MAGIC: [u8; 4] = *b"TMX1";
pub const TMX_VERSION: u32 = 1;
pub const TMX_HEADER_LEN: usize = 32;
pub const TMX_TRIPLE_LEN: usize = 16;

/// Default number of matrices per archive.
pub const DEFAULT_MATRICES_PER_TAR: u32 = 1 << 6;

#[derive(Debug, Error)]
pub enum TmxError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported TMX version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed TMX: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{archive}: member {member}: {source}")]
    Member {
        archive: PathBuf,
        member: String,
        #[source]
        source: TmxError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no matrices to store")]
    EmptyInput,
    #[error("matrices_per_tar must be at least 1")]
    ZeroGroupSize,
    #[error("matrix window {0} written out of order")]
    OutOfOrder(u64),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Exact TMX byte length for a matrix with `nnz` entries.
pub fn tmx_len(nnz: usize) -> usize {
    TMX_HEADER_LEN + TMX_TRIPLE_LEN * nnz
}

pub fn write_matrix(m: &TrafficMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(tmx_len(m.nnz()));
    write_matrix_to(m, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_matrix_to<W: Write>(m: &TrafficMatrix, w: &mut W) -> io::Result<()> {
    let mut header = [0u8; TMX_HEADER_LEN];
    header[0..4].copy_from_slice(&TMX_MAGIC);
    header[4..8].copy_from_slice(&TMX_VERSION.to_le_bytes());
    header[16..24].copy_from_slice(&m.window_index().to_le_bytes());
    header[24..32].copy_from_slice(&(m.nnz() as u64).to_le_bytes());
    w.write_all(&header)?;
    for e in m.entries() {
        let mut t = [0u8; TMX_TRIPLE_LEN];
        t[0..4].copy_from_slice(&e.row.to_le_bytes());
        t[4..8].copy_from_slice(&e.col.to_le_bytes());
        t[8..16].copy_from_slice(&e.count.to_le_bytes());
        w.write_all(&t)?;
    }
    Ok(())
}

/// Fields of a TMX header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TmxHeader {
    pub window_index: u64,
    pub nnz: u64,
}

pub fn read_header(bytes: &[u8]) -> Result<TmxHeader, TmxError> {
    if bytes.len() >= 4 && bytes[0..4] != TMX_MAGIC {
        return Err(TmxError::BadMagic(bytes[0..4].try_into().unwrap()));
    }
    if bytes.len() < TMX_HEADER_LEN {
        return Err(TmxError::Malformed(format!(
            "header truncated: {} of {TMX_HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != TMX_VERSION {
        return Err(TmxError::UnsupportedVersion(version));
    }
    if u32_at(8) != 0 || u32_at(12) != 0 {
        return Err(TmxError::Malformed("nonzero flags or reserved field".into()));
    }
    Ok(TmxHeader {
        window_index: u64_at(16),
        nnz: u64_at(24),
    })
}

pub fn read_matrix(bytes: &[u8]) -> Result<TrafficMatrix, TmxError> {
    let header = read_header(bytes)?;
    let body = &bytes[TMX_HEADER_LEN..];
    let expected = (header.nnz as u128) * TMX_TRIPLE_LEN as u128;
    if body.len() as u128 != expected {
        return Err(TmxError::Malformed(format!(
            "nnz {} needs {expected} payload bytes, found {}",
            header.nnz,
            body.len()
        )));
    }
    let entries = body
        .chunks_exact(TMX_TRIPLE_LEN)
        .map(|t| {
            Entry::new(
                u32::from_le_bytes(t[0..4].try_into().unwrap()),
                u32::from_le_bytes(t[4..8].try_into().unwrap()),
                u64::from_le_bytes(t[8..16].try_into().unwrap()),
            )
        })
        .collect();
    TrafficMatrix::from_entries(header.window_index, entries).map_err(|e| match e {
        MatrixError::Unsorted(i) => {
            TmxError::Malformed(format!("entry {i} out of order or duplicated"))
        }
        MatrixError::ZeroCount(i) => TmxError::Malformed(format!("entry {i} has zero count")),
        other => TmxError::Malformed(other.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreLayout {
    pub matrices_per_tar: u32,
    pub output_directory: PathBuf,
}

impl StoreLayout {
    pub fn new(output_directory: impl Into<PathBuf>, matrices_per_tar: u32) -> Result<Self, StoreError> {
        if matrices_per_tar == 0 {
            return Err(StoreError::ZeroGroupSize);
        }
        Ok(StoreLayout {
            matrices_per_tar,
            output_directory: output_directory.into(),
        })
    }
}

pub fn member_name(window_index: u64) -> String {
    format!("tm_{window_index:08}.tmx")
}

pub fn archive_name(first_window: u64, last_window: u64) -> String {
    format!("tm_{first_window}_{last_window}.tar")
}

fn member_header(name: &str, size: u64) -> io::Result<tar::Header> {
    let mut h = tar::Header::new_ustar();
    h.set_path(name)?;
    h.set_size(size);
    h.set_entry_type(tar::EntryType::Regular);
    h.set_mode(0o644);
    h.set_mtime(0);
    h.set_uid(0);
    h.set_gid(0);
    h.set_username("")?;
    h.set_groupname("")?;
    h.set_cksum();
    Ok(h)
}

struct OpenArchive {
    builder: tar::Builder<BufWriter<File>>,
    temp_path: PathBuf,
    first_window: u64,
    last_window: u64,
    members: u32,
}

/// Writes matrices into archives as they arrive, one member in memory at a time.
///
/// Each archive is written under a temporary name and renamed once its last
/// member is in, so a failed run never leaves a half-written `.tar` behind
/// under a final name.
pub struct GroupWriter {
    layout: StoreLayout,
    open: Option<OpenArchive>,
    written: Vec<PathBuf>,
    next_expected: Option<u64>,
}

impl GroupWriter {
    pub fn new(layout: StoreLayout) -> Result<Self, StoreError> {
        if layout.matrices_per_tar == 0 {
            return Err(StoreError::ZeroGroupSize);
        }
        fs::create_dir_all(&layout.output_directory).map_err(io_err(&layout.output_directory))?;
        Ok(GroupWriter {
            layout,
            open: None,
            written: Vec::new(),
            next_expected: None,
        })
    }

    /// Archives completed so far.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn push(&mut self, m: &TrafficMatrix) -> Result<(), StoreError> {
        let w = m.window_index();
        if self.next_expected.is_some_and(|n| w < n) {
            return Err(StoreError::OutOfOrder(w));
        }
        self.next_expected = Some(w.saturating_add(1));
        if self.open.is_none() {
            let temp_path = self.layout.output_directory.join(format!(".tm_{w}.tar.partial"));
            let file = File::create(&temp_path).map_err(io_err(&temp_path))?;
            self.open = Some(OpenArchive {
                builder: tar::Builder::new(BufWriter::new(file)),
                temp_path,
                first_window: w,
                last_window: w,
                members: 0,
            });
        }
        let archive = self.open.as_mut().unwrap();
        let bytes = write_matrix(m);
        let header = member_header(&member_name(w), bytes.len() as u64)
            .map_err(io_err(&archive.temp_path))?;
        archive
            .builder
            .append(&header, &bytes[..])
            .map_err(io_err(&archive.temp_path))?;
        archive.last_window = w;
        archive.members += 1;
        if archive.members >= self.layout.matrices_per_tar {
            self.close_open()?;
        }
        Ok(())
    }

    fn close_open(&mut self) -> Result<(), StoreError> {
        let Some(archive) = self.open.take() else {
            return Ok(());
        };
        let temp = archive.temp_path;
        let mut inner = archive.builder.into_inner().map_err(io_err(&temp))?;
        inner.flush().map_err(io_err(&temp))?;
        drop(inner);
        let path = self
            .layout
            .output_directory
            .join(archive_name(archive.first_window, archive.last_window));
        fs::rename(&temp, &path).map_err(io_err(&path))?;
        self.written.push(path);
        Ok(())
    }

    /// Close the trailing archive and return every archive written.
    pub fn finish(mut self) -> Result<Vec<PathBuf>, StoreError> {
        self.close_open()?;
        Ok(std::mem::take(&mut self.written))
    }

    /// Delete everything this writer produced, finished or not.
    pub fn abort(mut self) {
        if let Some(archive) = self.open.take() {
            drop(archive.builder);
            let _ = fs::remove_file(&archive.temp_path);
        }
        for path in self.written.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

/// Write `matrices` (ordered by window) as `ceil(n / matrices_per_tar)` archives.
pub fn write_group(matrices: &[TrafficMatrix], layout: &StoreLayout) -> Result<Vec<PathBuf>, StoreError> {
    if matrices.is_empty() {
        return Err(StoreError::EmptyInput);
    }
    let mut writer = GroupWriter::new(layout.clone())?;
    for m in matrices {
        if let Err(e) = writer.push(m) {
            writer.abort();
            return Err(e);
        }
    }
    writer.finish()
}

/// Totals from a pass over a set of archives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadSummary {
    pub archives: u64,
    pub matrices: u64,
    /// Places where a window index did not follow its predecessor by one.
    pub window_gaps: u64,
}

/// Streams matrices from a set of archives in window order.
#[derive(Debug, Clone)]
pub struct GroupReader {
    archives: Vec<PathBuf>,
}

impl GroupReader {
    /// Order archives by the window index of their first member.
    ///
    /// Only the first member's 32-byte header is read here.
    pub fn open<P: AsRef<Path>>(paths: &[P]) -> Result<Self, StoreError> {
        let mut keyed = Vec::with_capacity(paths.len());
        for p in paths {
            let path = p.as_ref().to_path_buf();
            if let Some(first) = first_window(&path)? {
                keyed.push((first, path));
            } else {
                log::warn!("{}: archive has no matrices", path.display());
            }
        }
        keyed.sort();
        Ok(GroupReader {
            archives: keyed.into_iter().map(|(_, p)| p).collect(),
        })
    }

    pub fn archives(&self) -> &[PathBuf] {
        &self.archives
    }

    /// Hand every matrix, in order, to `f`. Stops at the first error.
    pub fn try_for_each<E, F>(&self, mut f: F) -> Result<ReadSummary, E>
    where
        E: From<StoreError>,
        F: FnMut(TrafficMatrix) -> Result<(), E>,
    {
        let mut summary = ReadSummary::default();
        let mut previous: Option<u64> = None;
        for path in &self.archives {
            let file = File::open(path).map_err(io_err(path))?;
            let mut archive = tar::Archive::new(io::BufReader::new(file));
            let entries = archive.entries().map_err(io_err(path))?;
            for entry in entries {
                let mut entry = entry.map_err(io_err(path))?;
                if entry.header().entry_type() != tar::EntryType::Regular {
                    continue;
                }
                let member = entry
                    .path()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|_| "<invalid name>".into());
                let mut bytes = Vec::with_capacity(entry.size() as usize);
                entry.read_to_end(&mut bytes).map_err(io_err(path))?;
                let m = read_matrix(&bytes).map_err(|source| StoreError::Member {
                    archive: path.clone(),
                    member: member.clone(),
                    source,
                })?;
                let w = m.window_index();
                if previous.is_some_and(|p| p.checked_add(1) != Some(w)) {
                    log::warn!(
                        "non-contiguous windows: {} follows {} ({} {member})",
                        w,
                        previous.unwrap(),
                        path.display()
                    );
                    summary.window_gaps += 1;
                }
                previous = Some(w);
                summary.matrices += 1;
                f(m)?;
            }
            summary.archives += 1;
        }
        Ok(summary)
    }

    pub fn read_all(&self) -> Result<Vec<TrafficMatrix>, StoreError> {
        let mut out = Vec::new();
        self.try_for_each(|m| {
            out.push(m);
            Ok::<_, StoreError>(())
        })?;
        Ok(out)
    }
}

/// Read every matrix from `paths` in window order.
pub fn read_group<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<TrafficMatrix>, StoreError> {
    GroupReader::open(paths)?.read_all()
}

fn first_window(path: &Path) -> Result<Option<u64>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut archive = tar::Archive::new(io::BufReader::new(file));
    for entry in archive.entries().map_err(io_err(path))? {
        let entry = entry.map_err(io_err(path))?;
        if entry.header().entry_type() != tar::EntryType::Regular {
            continue;
        }
        let member = entry
            .path()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|_| "<invalid name>".into());
        let mut head = Vec::with_capacity(TMX_HEADER_LEN);
        entry
            .take(TMX_HEADER_LEN as u64)
            .read_to_end(&mut head)
            .map_err(io_err(path))?;
        let header = read_header(&head).map_err(|source| StoreError::Member {
            archive: path.to_path_buf(),
            member,
            source,
        })?;
        return Ok(Some(header.window_index));
    }
    Ok(None)
}

/// Archive paths (`*.tar`) directly inside `dir`, sorted by name.
pub fn list_archives(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "tar") && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
