//! Checkpointed range sweeps over the map, testing that every value in a
//! range reaches 1 and measuring descent times.
//!
//! Work is split into ascending chunks. Workers evaluate chunks of a wave
//! in parallel; a single committer then appends checkpoint records and
//! advances the verified frontier in order. Early exit uses only the
//! committed frontier, never in-flight results, so reports are identical
//! for any worker count.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{Budget, Value};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub start: u64,
    pub end: u64,
    pub budget: Budget,
    pub chunk_size: u64,
    pub workers: usize,
    pub checkpoint_path: Option<PathBuf>,
    /// Declare a trajectory converged as soon as it drops below the
    /// committed frontier (everything smaller is already verified).
    pub memoize_descent: bool,
}

impl SweepConfig {
    pub fn new(start: u64, end: u64) -> Self {
        assert!(start >= 1 && start <= end);
        SweepConfig {
            start,
            end,
            budget: Budget::default(),
            chunk_size: 65_536,
            workers: 1,
            checkpoint_path: None,
            memoize_descent: true,
        }
    }
}

/// Per-value result, one JSON object per checkpoint line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub n: u64,
    /// Present iff the trajectory converged within budget.
    pub steps_to_one: Option<u64>,
    pub descent_time: Option<u64>,
    pub peak_bits: u64,
    pub odd_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    /// Largest m such that every n in [start, m] has a converged record.
    pub verified_frontier: u64,
    pub undecided: Vec<u64>,
    /// (n, steps) attaining the maximum, smallest such n.
    pub max_steps_to_one: Option<(u64, u64)>,
    pub max_descent_time: Option<(u64, u64)>,
    pub max_peak_bits: Option<(u64, u64)>,
    /// Values per second; informational only, excluded from comparisons.
    pub throughput: f64,
}

impl SweepReport {
    /// Equality modulo throughput, for determinism and restart checks.
    pub fn same_results(&self, other: &SweepReport) -> bool {
        self.verified_frontier == other.verified_frontier
            && self.undecided == other.undecided
            && self.max_steps_to_one == other.max_steps_to_one
            && self.max_descent_time == other.max_descent_time
            && self.max_peak_bits == other.max_peak_bits
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint at line {line}: {message}")]
    CorruptCheckpoint { line: usize, message: String },
    #[error("checkpoint range [{found_start}, ..] is not a prefix of [{expected_start}, ..]")]
    RangeMismatch {
        expected_start: u64,
        found_start: u64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CheckpointLine {
    Record(CheckpointRecord),
    Frontier { frontier: u64 },
}

/// Per-value memo for converged prefixes, indexed by n - start.
struct Memo {
    start: u64,
    steps: Vec<u64>,
    peak: Vec<u64>,
    odd: Vec<u64>,
    converged: Vec<bool>,
}

impl Memo {
    fn new(start: u64, end: u64) -> Self {
        let len = (end - start + 1) as usize;
        Memo {
            start,
            steps: vec![0; len],
            peak: vec![0; len],
            odd: vec![0; len],
            converged: vec![false; len],
        }
    }

    fn record(&mut self, rec: &CheckpointRecord) {
        let i = (rec.n - self.start) as usize;
        if let Some(s) = rec.steps_to_one {
            self.steps[i] = s;
            self.peak[i] = rec.peak_bits;
            self.odd[i] = rec.odd_steps;
            self.converged[i] = true;
        }
    }
}

/// Full statistics for one value. With memoization, the walk stops at the
/// first converged value at or below the frontier and splices in its
/// memoized tail; the resulting record is exactly the unmemoized one.
fn evaluate(n: u64, frontier: Option<u64>, memo: &Memo, budget: &Budget) -> CheckpointRecord {
    let mut value = Value::Small(n);
    let mut steps = 0u64;
    let mut odd_steps = 0u64;
    let mut peak_bits = value.bits();
    let mut descent_time: Option<u64> = None;
    loop {
        if let Value::Small(v) = value {
            if v == 1 {
                return CheckpointRecord {
                    n,
                    steps_to_one: Some(steps),
                    descent_time: descent_time.or(Some(steps)),
                    peak_bits,
                    odd_steps,
                };
            }
            if let Some(f) = frontier {
                if v >= memo.start && v <= f {
                    let i = (v - memo.start) as usize;
                    if memo.converged[i] {
                        return CheckpointRecord {
                            n,
                            steps_to_one: Some(steps + memo.steps[i]),
                            descent_time,
                            peak_bits: peak_bits.max(memo.peak[i]),
                            odd_steps: odd_steps + memo.odd[i],
                        };
                    }
                }
            }
        }
        if steps >= budget.max_steps {
            return CheckpointRecord {
                n,
                steps_to_one: None,
                descent_time,
                peak_bits,
                odd_steps,
            };
        }
        let was_odd = value.is_odd();
        value = match value.step(budget.factor_effort) {
            Ok(v) => v,
            Err(_) => {
                return CheckpointRecord {
                    n,
                    steps_to_one: None,
                    descent_time,
                    peak_bits,
                    odd_steps,
                }
            }
        };
        steps += 1;
        if was_odd {
            odd_steps += 1;
        }
        peak_bits = peak_bits.max(value.bits());
        if descent_time.is_none() {
            if let Value::Small(v) = value {
                if v <= n {
                    descent_time = Some(steps);
                }
            }
        }
        if value.bits() > budget.max_bits {
            return CheckpointRecord {
                n,
                steps_to_one: None,
                descent_time,
                peak_bits,
                odd_steps,
            };
        }
    }
}

struct Aggregates {
    undecided: Vec<u64>,
    max_steps_to_one: Option<(u64, u64)>,
    max_descent_time: Option<(u64, u64)>,
    max_peak_bits: Option<(u64, u64)>,
    frontier: u64,
    frontier_blocked: bool,
}

impl Aggregates {
    fn new(start: u64) -> Self {
        Aggregates {
            undecided: Vec::new(),
            max_steps_to_one: None,
            max_descent_time: None,
            max_peak_bits: None,
            frontier: start - 1,
            frontier_blocked: false,
        }
    }

    fn absorb(&mut self, rec: &CheckpointRecord) {
        match rec.steps_to_one {
            Some(s) => {
                if self.max_steps_to_one.map(|(_, m)| s > m).unwrap_or(true) {
                    self.max_steps_to_one = Some((rec.n, s));
                }
                if !self.frontier_blocked && rec.n == self.frontier + 1 {
                    self.frontier = rec.n;
                }
            }
            None => {
                self.undecided.push(rec.n);
                self.frontier_blocked = true;
            }
        }
        if let Some(d) = rec.descent_time {
            if self.max_descent_time.map(|(_, m)| d > m).unwrap_or(true) {
                self.max_descent_time = Some((rec.n, d));
            }
        }
        if self
            .max_peak_bits
            .map(|(_, m)| rec.peak_bits > m)
            .unwrap_or(true)
        {
            self.max_peak_bits = Some((rec.n, rec.peak_bits));
        }
    }

    fn into_report(self, elapsed_values: u64, seconds: f64) -> SweepReport {
        SweepReport {
            verified_frontier: self.frontier,
            undecided: self.undecided,
            max_steps_to_one: self.max_steps_to_one,
            max_descent_time: self.max_descent_time,
            max_peak_bits: self.max_peak_bits,
            throughput: if seconds > 0.0 {
                elapsed_values as f64 / seconds
            } else {
                f64::INFINITY
            },
        }
    }
}

struct CheckpointWriter {
    out: BufWriter<File>,
}

impl CheckpointWriter {
    fn append(path: &Path) -> Result<Self, HarnessError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CheckpointWriter {
            out: BufWriter::new(file),
        })
    }

    fn write_records(&mut self, records: &[CheckpointRecord]) -> Result<(), HarnessError> {
        for rec in records {
            serde_json::to_writer(&mut self.out, rec).map_err(std::io::Error::from)?;
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }

    fn write_frontier(&mut self, frontier: u64) -> Result<(), HarnessError> {
        let line = CheckpointLine::Frontier { frontier };
        serde_json::to_writer(&mut self.out, &line).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(feature = "parallel")]
fn evaluate_wave(
    chunks: &[(u64, u64)],
    frontier: Option<u64>,
    memo: &Memo,
    budget: &Budget,
    workers: usize,
) -> Vec<Vec<CheckpointRecord>> {
    use rayon::prelude::*;
    if workers <= 1 {
        return chunks
            .iter()
            .map(|&(lo, hi)| (lo..=hi).map(|n| evaluate(n, frontier, memo, budget)).collect())
            .collect();
    }
    chunks
        .par_iter()
        .map(|&(lo, hi)| (lo..=hi).map(|n| evaluate(n, frontier, memo, budget)).collect())
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn evaluate_wave(
    chunks: &[(u64, u64)],
    frontier: Option<u64>,
    memo: &Memo,
    budget: &Budget,
    _workers: usize,
) -> Vec<Vec<CheckpointRecord>> {
    chunks
        .iter()
        .map(|&(lo, hi)| (lo..=hi).map(|n| evaluate(n, frontier, memo, budget)).collect())
        .collect()
}

/// Sweeps the configured range, resolving convergence for every value.
/// Budget exhaustion becomes an undecided entry, never an abort.
pub fn sweep(config: &SweepConfig) -> Result<SweepReport, HarnessError> {
    run_sweep(config, BTreeMap::new(), None)
}

/// Continues a sweep from an existing checkpoint file. The final report
/// is identical to an uninterrupted run over the same range.
pub fn resume(path: &Path, config: &SweepConfig) -> Result<SweepReport, HarnessError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut records: BTreeMap<u64, CheckpointRecord> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CheckpointLine = serde_json::from_str(&line).map_err(|e| {
            HarnessError::CorruptCheckpoint {
                line: idx + 1,
                message: e.to_string(),
            }
        })?;
        if let CheckpointLine::Record(rec) = parsed {
            records.insert(rec.n, rec);
        }
    }
    if let Some((&first, _)) = records.iter().next() {
        if first != config.start {
            return Err(HarnessError::RangeMismatch {
                expected_start: config.start,
                found_start: first,
            });
        }
        // committed records must form a contiguous prefix of the range
        let mut expected = config.start;
        for &n in records.keys() {
            if n != expected {
                return Err(HarnessError::CorruptCheckpoint {
                    line: 0,
                    message: format!("record gap: expected n = {expected}, found n = {n}"),
                });
            }
            expected += 1;
        }
    }
    run_sweep(config, records, Some(path))
}

fn run_sweep(
    config: &SweepConfig,
    existing: BTreeMap<u64, CheckpointRecord>,
    resume_path: Option<&Path>,
) -> Result<SweepReport, HarnessError> {
    assert!(config.start >= 1 && config.start <= config.end && config.chunk_size >= 1);
    let clock = Instant::now();
    let mut memo = Memo::new(config.start, config.end);
    let mut agg = Aggregates::new(config.start);
    let mut committed = config.start - 1;
    for rec in existing.values().filter(|r| r.n <= config.end) {
        memo.record(rec);
        agg.absorb(rec);
        committed = rec.n;
    }

    let mut writer = match (resume_path, &config.checkpoint_path) {
        (Some(p), _) => Some(CheckpointWriter::append(p)?),
        (None, Some(p)) => {
            // fresh sweep: truncate any stale file
            File::create(p)?;
            Some(CheckpointWriter::append(p)?)
        }
        (None, None) => None,
    };

    if committed >= config.end {
        let total = config.end - config.start + 1;
        return Ok(agg.into_report(total, clock.elapsed().as_secs_f64()));
    }

    let mut chunks: Vec<(u64, u64)> = Vec::new();
    let mut lo = committed + 1;
    while lo <= config.end {
        let hi = lo.saturating_add(config.chunk_size - 1).min(config.end);
        chunks.push((lo, hi));
        lo = hi + 1;
    }

    let wave_width = config.workers.max(1);
    for wave in chunks.chunks(wave_width) {
        let frontier = if config.memoize_descent && agg.frontier >= config.start {
            Some(agg.frontier)
        } else {
            None
        };
        let results = evaluate_wave(wave, frontier, &memo, &config.budget, config.workers);
        for chunk_records in &results {
            for rec in chunk_records {
                memo.record(rec);
                agg.absorb(rec);
            }
            if let Some(w) = writer.as_mut() {
                w.write_records(chunk_records)?;
            }
        }
        if let Some(w) = writer.as_mut() {
            w.write_frontier(agg.frontier)?;
        }
    }

    let total = config.end - config.start + 1;
    Ok(agg.into_report(total, clock.elapsed().as_secs_f64()))
}

/// Exact histogram of descent times over a range; the maximum is the
/// empirical lower bound on the constant of the bounded-descent conjecture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DescentStats {
    pub histogram: BTreeMap<u64, u64>,
    pub max: Option<(u64, u64)>,
    pub undecided: Vec<u64>,
}

pub fn descent_statistics(start: u64, end: u64, budget: &Budget) -> DescentStats {
    assert!(start >= 1 && start <= end);
    let chunk = 1u64 << 16;
    let starts: Vec<u64> = (start..=end).step_by(chunk as usize).collect();
    let partials = descent_chunks(&starts, |lo| {
        let hi = (lo + chunk - 1).min(end);
        let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
        let mut max: Option<(u64, u64)> = None;
        let mut undecided = Vec::new();
        for n in lo..=hi {
            match descent_time_u64(n, budget) {
                Some(k) => {
                    *hist.entry(k).or_insert(0) += 1;
                    if max.map(|(_, m)| k > m).unwrap_or(true) {
                        max = Some((n, k));
                    }
                }
                None => undecided.push(n),
            }
        }
        (hist, max, undecided)
    });
    let mut stats = DescentStats {
        histogram: BTreeMap::new(),
        max: None,
        undecided: Vec::new(),
    };
    for (hist, max, undecided) in partials {
        for (k, c) in hist {
            *stats.histogram.entry(k).or_insert(0) += c;
        }
        if let Some((n, k)) = max {
            if stats.max.map(|(_, m)| k > m).unwrap_or(true) {
                stats.max = Some((n, k));
            }
        }
        stats.undecided.extend(undecided);
    }
    stats
}

type DescentPartial = (BTreeMap<u64, u64>, Option<(u64, u64)>, Vec<u64>);

#[cfg(feature = "parallel")]
fn descent_chunks<F: Fn(u64) -> DescentPartial + Sync>(starts: &[u64], f: F) -> Vec<DescentPartial> {
    use rayon::prelude::*;
    starts.par_iter().map(|&lo| f(lo)).collect()
}

#[cfg(not(feature = "parallel"))]
fn descent_chunks<F: Fn(u64) -> DescentPartial + Sync>(starts: &[u64], f: F) -> Vec<DescentPartial> {
    starts.iter().map(|&lo| f(lo)).collect()
}

/// Word-size descent time; evens are immediate, odds run the map.
fn descent_time_u64(n: u64, budget: &Budget) -> Option<u64> {
    if n & 1 == 0 {
        return Some(1);
    }
    crate::trajectory::descent_time(&crate::arithmetic::Natural::from(n), budget)
}
