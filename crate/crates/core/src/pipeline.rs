//! End-to-end runs: captures to archives, archives to statistics, and the
//! oracle cross-check.
//!
//! `process` is staged. A reader thread cuts the extracted pairs into
//! windows, a pool of workers anonymizes and tallies whole windows, and the
//! calling thread restores window order and writes archives. Queues are
//! bounded, so a slow writer throttles the reader. Every worker count yields
//! the same bytes as a single worker.

use std::collections::BTreeMap;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crossbeam_channel::bounded;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymizer::{AnonPair, Anonymizer, CachedAnonymizer};
use crate::matrix::{tally, MatrixError, MatrixSum, TrafficMatrix, WindowConfig};
use crate::netstats::{compute_stats, oracle_stats, FieldDiff, NetStats, ReportMeta, StatsReport};
use crate::pcap::{ingest_files, ingest_files_until, IngestError, IngestReport, IpPair};
use crate::store::{list_archives, GroupReader, GroupWriter, ReadSummary, StoreError, StoreLayout};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("no archives found")]
    NoArchives,
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("pipeline worker stopped unexpectedly")]
    WorkerLost,
}

#[derive(Debug, Clone)]
pub struct ProcessConfig {
    pub inputs: Vec<PathBuf>,
    pub window: WindowConfig,
    pub matrices_per_tar: u32,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Log progress every this many extracted pairs; 0 disables it.
    pub progress_every: u64,
}

impl ProcessConfig {
    pub fn new(inputs: Vec<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        ProcessConfig {
            inputs,
            window: WindowConfig::default(),
            matrices_per_tar: crate::store::DEFAULT_MATRICES_PER_TAR,
            output_dir: output_dir.into(),
            workers: default_workers(),
            progress_every: 1 << 20,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Written next to the archives; everything needed to interpret them later.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub window_size: u64,
    pub matrices_per_tar: u32,
    pub matrix_count: u64,
    pub key_fingerprint: String,
    pub archives: Vec<String>,
    pub ingest: IngestReport,
}

#[derive(Debug, Clone)]
pub struct ProcessOutcome {
    pub ingest: IngestReport,
    pub matrices: u64,
    pub archives: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub elapsed: Duration,
}

impl ProcessOutcome {
    pub fn packets_per_second(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs > 0.0 {
            self.ingest.packets_read as f64 / secs
        } else {
            0.0
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Captures to archives: ingest, anonymize, window, store.
///
/// On failure every archive written by this run is removed.
pub fn process(
    config: &ProcessConfig,
    anonymizer: &Anonymizer,
    key_fingerprint: &str,
) -> Result<ProcessOutcome, PipelineError> {
    if config.workers == 0 {
        return Err(PipelineError::ZeroWorkers);
    }
    let started = Instant::now();
    let layout = StoreLayout::new(&config.output_dir, config.matrices_per_tar)?;
    let mut writer = GroupWriter::new(layout)?;
    let manifest_path = config.output_dir.join(MANIFEST_NAME);

    let result = run_stages(config, anonymizer, &mut writer);
    let (ingest, matrices) = match result {
        Ok(r) => r,
        Err(e) => {
            writer.abort();
            return Err(e);
        }
    };
    let archives = writer.finish()?;

    let manifest = Manifest {
        window_size: config.window.packets_per_window(),
        matrices_per_tar: config.matrices_per_tar,
        matrix_count: matrices,
        key_fingerprint: key_fingerprint.to_string(),
        archives: archives
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        ingest,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    if let Err(e) = fs::write(&manifest_path, text) {
        for a in &archives {
            let _ = fs::remove_file(a);
        }
        return Err(io_err(&manifest_path)(e));
    }

    Ok(ProcessOutcome {
        ingest,
        matrices,
        archives,
        manifest: manifest_path,
        elapsed: started.elapsed(),
    })
}

fn run_stages(
    config: &ProcessConfig,
    anonymizer: &Anonymizer,
    writer: &mut GroupWriter,
) -> Result<(IngestReport, u64), PipelineError> {
    let window = config.window.packets_per_window();
    let batch_cap = window.min(1 << 17) as usize;
    let queue = config.workers * 2;
    let (raw_tx, raw_rx) = bounded::<(u64, Vec<IpPair>)>(queue);
    let (mat_tx, mat_rx) = bounded::<TrafficMatrix>(queue);

    std::thread::scope(|scope| {
        let reader = scope.spawn(move || {
            let mut index = 0u64;
            let mut batch: Vec<IpPair> = Vec::with_capacity(batch_cap);
            let mut seen = 0u64;
            let report = ingest_files_until(&config.inputs, |pair| {
                batch.push(pair);
                seen += 1;
                if config.progress_every > 0 && seen.is_multiple_of(config.progress_every) {
                    log::info!("{seen} address pairs read");
                }
                if batch.len() as u64 == window {
                    let full = std::mem::replace(&mut batch, Vec::with_capacity(batch_cap));
                    if raw_tx.send((index, full)).is_err() {
                        return ControlFlow::Break(());
                    }
                    index += 1;
                }
                ControlFlow::Continue(())
            });
            if !batch.is_empty() {
                let _ = raw_tx.send((index, batch));
            }
            report
        });

        for _ in 0..config.workers {
            let raw_rx = raw_rx.clone();
            let mat_tx = mat_tx.clone();
            scope.spawn(move || {
                let mut cache = CachedAnonymizer::new(anonymizer);
                let mut anon: Vec<AnonPair> = Vec::new();
                for (index, pairs) in raw_rx {
                    anon.clear();
                    anon.extend(pairs.into_iter().map(|p| cache.anonymize_pair(p)));
                    if mat_tx.send(tally(index, &anon)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(raw_rx);
        drop(mat_tx);

        // restore window order before writing
        let mut pending: BTreeMap<u64, TrafficMatrix> = BTreeMap::new();
        let mut next = 0u64;
        let mut written = 0u64;
        let mut failure: Option<PipelineError> = None;
        for m in mat_rx.iter() {
            pending.insert(m.window_index(), m);
            while let Some(m) = pending.remove(&next) {
                if let Err(e) = writer.push(&m) {
                    failure = Some(e.into());
                    break;
                }
                next += 1;
                written += 1;
            }
            if failure.is_some() {
                // dropping the receiver unblocks workers and stops the reader
                break;
            }
        }
        drop(mat_rx);
        let report = reader.join().map_err(|_| PipelineError::WorkerLost)?;
        if let Some(e) = failure {
            return Err(e);
        }
        let report = report?;
        if !pending.is_empty() {
            return Err(PipelineError::WorkerLost);
        }
        Ok((report, written))
    })
}

/// Archive paths from a mix of archive files and directories holding them,
/// plus the manifest of the first directory that has one.
pub fn resolve_archives(inputs: &[PathBuf]) -> Result<(Vec<PathBuf>, Option<Manifest>), PipelineError> {
    let mut archives = Vec::new();
    let mut manifest = None;
    for input in inputs {
        if input.is_dir() {
            archives.extend(list_archives(input)?);
            let path = input.join(MANIFEST_NAME);
            if manifest.is_none() && path.is_file() {
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                let parsed = serde_json::from_str(&text).map_err(|source| PipelineError::Manifest {
                    path: path.clone(),
                    source,
                })?;
                manifest = Some(parsed);
            }
        } else {
            archives.push(input.clone());
        }
    }
    Ok((archives, manifest))
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub aggregate: TrafficMatrix,
    pub stats: NetStats,
    pub read: ReadSummary,
}

/// Read and sum every matrix in `archives`, then compute statistics.
///
/// The sum runs as a tree reduction on a pool of `workers` threads.
pub fn analyze(archives: &[PathBuf], workers: usize) -> Result<AnalyzeOutcome, PipelineError> {
    if workers == 0 {
        return Err(PipelineError::ZeroWorkers);
    }
    if archives.is_empty() {
        return Err(PipelineError::NoArchives);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| {
        let reader = GroupReader::open(archives)?;
        let mut total = MatrixSum::new();
        let read = reader.try_for_each(|m| total.push(m).map_err(PipelineError::from))?;
        let aggregate = total.finish()?;
        let stats = compute_stats(&aggregate);
        Ok(AnalyzeOutcome {
            aggregate,
            stats,
            read,
        })
    })
}

/// The JSON report for an analysis, with whatever context the manifest offers.
pub fn stats_report(outcome: &AnalyzeOutcome, manifest: Option<&Manifest>) -> StatsReport {
    StatsReport {
        stats: outcome.stats,
        meta: ReportMeta {
            window_size: manifest.map(|m| m.window_size),
            matrix_count: outcome.read.matrices,
            key_fingerprint: manifest.map(|m| m.key_fingerprint.clone()),
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub pipeline: NetStats,
    pub oracle: NetStats,
    pub diffs: Vec<FieldDiff>,
    pub pairs: u64,
}

impl VerifyOutcome {
    pub fn matches(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// What the oracle compares against.
#[derive(Debug, Clone)]
pub enum PipelineSide {
    /// Run `process` on the captures into a scratch directory, then analyze it.
    Fresh { window: WindowConfig, workers: usize },
    /// Analyze archives that already exist.
    Archives(Vec<PathBuf>),
}

/// Brute-force statistics over the anonymized pairs of `inputs`, compared
/// field by field with the matrix pipeline.
pub fn verify(
    inputs: &[PathBuf],
    anonymizer: &Anonymizer,
    side: &PipelineSide,
) -> Result<VerifyOutcome, PipelineError> {
    let mut pairs: Vec<AnonPair> = Vec::new();
    ingest_files(inputs, |p| pairs.push(anonymizer.anonymize_pair(p)))?;
    let oracle = oracle_stats(&pairs);

    let pipeline = match side {
        PipelineSide::Fresh { window, workers } => {
            let scratch = tempfile::tempdir().map_err(io_err(Path::new("scratch directory")))?;
            let mut config = ProcessConfig::new(inputs.to_vec(), scratch.path());
            config.window = *window;
            config.workers = *workers;
            config.progress_every = 0;
            let outcome = process(&config, anonymizer, "")?;
            stats_or_zero(&outcome.archives, *workers)?
        }
        PipelineSide::Archives(archives) => stats_or_zero(archives, default_workers())?,
    };
    Ok(VerifyOutcome {
        diffs: pipeline.diff(&oracle),
        pipeline,
        oracle,
        pairs: pairs.len() as u64,
    })
}

fn stats_or_zero(archives: &[PathBuf], workers: usize) -> Result<NetStats, PipelineError> {
    match analyze(archives, workers) {
        Ok(o) => Ok(o.stats),
        Err(PipelineError::NoArchives) | Err(PipelineError::Matrix(MatrixError::EmptyInput)) => {
            Ok(NetStats::default())
        }
        Err(e) => Err(e),
    }
}
