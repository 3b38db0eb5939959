//! Hypersparse traffic matrices over the anonymized 2^32 x 2^32 address space.
//!
//! Entry `(row, col)` counts packets from anonymized source `row` to anonymized
//! destination `col`. Entries are kept in sorted coordinate form: strictly
//! increasing in `(row, col)` with every count at least one.

use rayon::prelude::*;
use thiserror::Error;

use crate::anonymizer::AnonPair;

/// `window_index` of a matrix that is a sum of windows.
pub const AGGREGATE: u64 = u64::MAX;

/// Default number of address pairs per window matrix.
pub const DEFAULT_PACKETS_PER_WINDOW: u64 = 1 << 17;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("entries not strictly sorted at position {0}")]
    Unsorted(usize),
    #[error("zero count at position {0}")]
    ZeroCount(usize),
    #[error("cannot sum an empty set of matrices")]
    EmptyInput,
    #[error("count overflow at coordinate ({row}, {col})")]
    CountOverflow { row: u32, col: u32 },
    #[error("packets per window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Entry {
    pub row: u32,
    pub col: u32,
    pub count: u64,
}

impl Entry {
    pub fn new(row: u32, col: u32, count: u64) -> Self {
        Entry { row, col, count }
    }

    fn key(&self) -> u64 {
        pack(self.row, self.col)
    }
}

fn pack(row: u32, col: u32) -> u64 {
    (u64::from(row) << 32) | u64::from(col)
}

fn unpack(key: u64) -> (u32, u32) {
    ((key >> 32) as u32, key as u32)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficMatrix {
    window_index: u64,
    entries: Vec<Entry>,
}

impl TrafficMatrix {
    pub fn empty(window_index: u64) -> Self {
        TrafficMatrix {
            window_index,
            entries: Vec::new(),
        }
    }

    /// Build from sorted coordinate entries, validating the matrix invariants.
    pub fn from_entries(window_index: u64, entries: Vec<Entry>) -> Result<Self, MatrixError> {
        for (i, e) in entries.iter().enumerate() {
            if e.count == 0 {
                return Err(MatrixError::ZeroCount(i));
            }
            if i > 0 && entries[i - 1].key() >= e.key() {
                return Err(MatrixError::Unsorted(i));
            }
        }
        Ok(TrafficMatrix {
            window_index,
            entries,
        })
    }

    pub fn window_index(&self) -> u64 {
        self.window_index
    }

    pub fn is_aggregate(&self) -> bool {
        self.window_index == AGGREGATE
    }

    pub fn with_window_index(mut self, window_index: u64) -> Self {
        self.window_index = window_index;
        self
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    /// Number of nonzero cells.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Total packet mass. Saturates rather than wrapping.
    pub fn total_count(&self) -> u64 {
        self.entries
            .iter()
            .fold(0u64, |acc, e| acc.saturating_add(e.count))
    }

    /// Count at one coordinate, zero if absent.
    pub fn get(&self, row: u32, col: u32) -> u64 {
        let key = pack(row, col);
        self.entries
            .binary_search_by_key(&key, Entry::key)
            .map(|i| self.entries[i].count)
            .unwrap_or(0)
    }
}

/// Tally pairs into one window matrix.
pub fn tally(window_index: u64, pairs: &[AnonPair]) -> TrafficMatrix {
    let mut keys: Vec<u64> = pairs.iter().map(|p| pack(p.src(), p.dst())).collect();
    tally_keys(window_index, &mut keys)
}

fn tally_keys(window_index: u64, keys: &mut [u64]) -> TrafficMatrix {
    keys.sort_unstable();
    let mut entries: Vec<Entry> = Vec::new();
    for &key in keys.iter() {
        match entries.last_mut() {
            Some(last) if last.key() == key => last.count += 1,
            _ => {
                let (row, col) = unpack(key);
                entries.push(Entry::new(row, col, 1));
            }
        }
    }
    TrafficMatrix {
        window_index,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    packets_per_window: u64,
}

impl WindowConfig {
    pub fn new(packets_per_window: u64) -> Result<Self, MatrixError> {
        if packets_per_window == 0 {
            return Err(MatrixError::ZeroWindow);
        }
        Ok(WindowConfig { packets_per_window })
    }

    pub fn packets_per_window(&self) -> u64 {
        self.packets_per_window
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            packets_per_window: DEFAULT_PACKETS_PER_WINDOW,
        }
    }
}

/// Cuts a pair stream into consecutive fixed-size windows.
pub struct WindowAccumulator {
    config: WindowConfig,
    next_index: u64,
    pending: Vec<u64>,
}

impl WindowAccumulator {
    pub fn new(config: WindowConfig) -> Self {
        WindowAccumulator {
            config,
            next_index: 0,
            pending: Vec::new(),
        }
    }

    /// Add one pair; returns the window matrix it completes, if any.
    pub fn push(&mut self, pair: AnonPair) -> Option<TrafficMatrix> {
        self.pending.push(pack(pair.src(), pair.dst()));
        if self.pending.len() as u64 >= self.config.packets_per_window {
            Some(self.flush())
        } else {
            None
        }
    }

    /// Emit the trailing partial window, if it holds any pairs.
    pub fn finish(mut self) -> Option<TrafficMatrix> {
        (!self.pending.is_empty()).then(|| self.flush())
    }

    /// Index the next emitted window will carry.
    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    fn flush(&mut self) -> TrafficMatrix {
        let m = tally_keys(self.next_index, &mut self.pending);
        self.pending.clear();
        self.next_index += 1;
        m
    }
}

/// Iterator adapter returned by [`accumulate`].
pub struct Accumulate<I> {
    pairs: I,
    acc: Option<WindowAccumulator>,
}

impl<I: Iterator<Item = AnonPair>> Iterator for Accumulate<I> {
    type Item = TrafficMatrix;

    fn next(&mut self) -> Option<TrafficMatrix> {
        let acc = self.acc.as_mut()?;
        for pair in self.pairs.by_ref() {
            if let Some(m) = acc.push(pair) {
                return Some(m);
            }
        }
        self.acc.take().and_then(WindowAccumulator::finish)
    }
}

/// Sequential window matrices over an anonymized pair stream.
///
/// Matrix `k` covers pairs `[k * W, (k + 1) * W)`; a partial final window is
/// emitted as well.
pub fn accumulate<I>(pairs: I, config: WindowConfig) -> Accumulate<I::IntoIter>
where
    I: IntoIterator<Item = AnonPair>,
{
    Accumulate {
        pairs: pairs.into_iter(),
        acc: Some(WindowAccumulator::new(config)),
    }
}

/// Coordinate-wise sum of two matrices. The result is an aggregate.
pub fn add(a: &TrafficMatrix, b: &TrafficMatrix) -> Result<TrafficMatrix, MatrixError> {
    let (x, y) = (&a.entries, &b.entries);
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].key().cmp(&y[j].key()) {
            std::cmp::Ordering::Less => {
                out.push(x[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(y[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let count = x[i].count.checked_add(y[j].count).ok_or(
                    MatrixError::CountOverflow {
                        row: x[i].row,
                        col: x[i].col,
                    },
                )?;
                out.push(Entry::new(x[i].row, x[i].col, count));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&x[i..]);
    out.extend_from_slice(&y[j..]);
    Ok(TrafficMatrix {
        window_index: AGGREGATE,
        entries: out,
    })
}

/// Streaming summation.
///
/// Incoming matrices are buffered until their combined size reaches that of
/// the running total, then reduced as a tree and folded in. Each entry is
/// merged O(log n) times and memory stays within a small multiple of the
/// aggregate.
#[derive(Debug, Default)]
pub struct MatrixSum {
    total: Option<TrafficMatrix>,
    pending: Vec<TrafficMatrix>,
    pending_nnz: usize,
    inputs: u64,
}

impl MatrixSum {
    const MIN_BATCH_NNZ: usize = 1 << 16;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: TrafficMatrix) -> Result<(), MatrixError> {
        self.pending_nnz += m.nnz();
        self.pending.push(m);
        self.inputs += 1;
        let total_nnz = self.total.as_ref().map_or(0, TrafficMatrix::nnz);
        if self.pending_nnz >= total_nnz.max(Self::MIN_BATCH_NNZ) {
            self.fold_pending()?;
        }
        Ok(())
    }

    pub fn inputs(&self) -> u64 {
        self.inputs
    }

    pub fn finish(mut self) -> Result<TrafficMatrix, MatrixError> {
        self.fold_pending()?;
        self.total.ok_or(MatrixError::EmptyInput)
    }

    fn fold_pending(&mut self) -> Result<(), MatrixError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let batch = par_sum(std::mem::take(&mut self.pending))?;
        self.pending_nnz = 0;
        self.total = Some(match self.total.take() {
            None => batch,
            Some(acc) => add(&acc, &batch)?,
        });
        Ok(())
    }
}

/// Sum a stream of matrices into one aggregate matrix.
pub fn sum<I>(matrices: I) -> Result<TrafficMatrix, MatrixError>
where
    I: IntoIterator<Item = TrafficMatrix>,
{
    let mut total = MatrixSum::new();
    for m in matrices {
        total.push(m)?;
    }
    total.finish()
}

/// Pairwise tree reduction on the current rayon pool.
///
/// Integer addition is associative and commutative, so the result does not
/// depend on how the work is split.
pub fn par_sum(matrices: Vec<TrafficMatrix>) -> Result<TrafficMatrix, MatrixError> {
    if matrices.is_empty() {
        return Err(MatrixError::EmptyInput);
    }
    matrices
        .into_par_iter()
        .map(|m| Ok(m.with_window_index(AGGREGATE)))
        .try_reduce_with(|a, b| add(&a, &b))
        .expect("non-empty input")
}
