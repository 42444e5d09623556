//! Subcommand implementations and the multi-threaded alignment engine.
//!
//! Workers pull byte ranges of the FASTQ input from a shared cursor. Each
//! range is about half the remaining input divided by the worker count (but
//! at least `chunk_min`), so ranges shrink towards the end and fast workers
//! pick up the slack. Range ends are moved forward to the next record start.
//! Finished ranges go to a single writer through a bounded channel.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read as _, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::sync_channel;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::aligner::{Aligner, AlignerParams, AlignerStats, ResultKind};
use crate::error::{Error, Result};
use crate::eval::{compile_report, score_sam_record, EvalCounts, EvalReport};
use crate::genome::{load_fasta, PackedGenome};
use crate::index::SeedIndex;
use crate::io::{next_record_start, parse_sam_record, to_sam_record, write_sam_header, FastqReader};
use crate::simulate::{decode_truth, simulate, SimProfile};

pub const DEFAULT_CHUNK_MIN: u64 = 4 << 20;

/// Size of the next work range.
pub fn next_chunk(remaining: u64, workers: usize, min_chunk: u64) -> u64 {
    let workers = workers.max(1) as u64;
    (remaining / (2 * workers)).max(min_chunk.max(1)).min(remaining)
}

/// FASTQ input that supports positioned reads. Gzip input is inflated into
/// memory.
pub enum ReadSource {
    File(File, u64),
    Memory(Vec<u8>),
}

impl ReadSource {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut magic = [0u8; 2];
        if len >= 2 && file.read_at(&mut magic, 0)? == 2 && magic == [0x1f, 0x8b] {
            let mut data = Vec::new();
            MultiGzDecoder::new(BufReader::new(&mut file)).read_to_end(&mut data)?;
            return Ok(ReadSource::Memory(data));
        }
        Ok(ReadSource::File(file, len))
    }

    pub fn len(&self) -> u64 {
        match self {
            ReadSource::File(_, n) => *n,
            ReadSource::Memory(v) => v.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn read_at(&self, buf: &mut [u8], at: u64) -> io::Result<usize> {
        match self {
            ReadSource::File(f, _) => f.read_at(buf, at),
            ReadSource::Memory(v) => {
                let start = (at as usize).min(v.len());
                let n = buf.len().min(v.len() - start);
                buf[..n].copy_from_slice(&v[start..start + n]);
                Ok(n)
            }
        }
    }

    fn read_range(&self, at: u64, len: usize) -> io::Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        let mut filled = 0;
        while filled < len {
            let n = self.read_at(&mut buf[filled..], at + filled as u64)?;
            if n == 0 {
                break;
            }
            filled += n;
        }
        buf.truncate(filled);
        Ok(buf)
    }

    /// First record start at or after `at`.
    pub fn snap_to_record(&self, at: u64) -> Result<u64> {
        let len = self.len();
        if at == 0 || at >= len {
            return Ok(at.min(len));
        }
        let mut probe = 64usize << 10;
        loop {
            // One byte of look-behind tells whether `at` begins a line.
            let buf = self.read_range(at - 1, probe)?;
            let at_eof = at - 1 + buf.len() as u64 >= len;
            if let Some(i) = next_record_start(&buf, 1, at_eof) {
                return Ok(at - 1 + i as u64);
            }
            probe *= 2;
        }
    }
}

struct RangeReader<'a> {
    source: &'a ReadSource,
    pos: u64,
    end: u64,
}

impl io::Read for RangeReader<'_> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let want = (buf.len() as u64).min(self.end - self.pos) as usize;
        if want == 0 {
            return Ok(0);
        }
        let n = self.source.read_at(&mut buf[..want], self.pos)?;
        self.pos += n as u64;
        Ok(n)
    }
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    pub threads: usize,
    pub chunk_min: u64,
    pub stable_order: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { threads: 1, chunk_min: DEFAULT_CHUNK_MIN, stable_order: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub elapsed_seconds: f64,
    pub threads: usize,
    pub chunks: u64,
    pub stats: AlignerStats,
}

struct ChunkOutput {
    start: u64,
    end: u64,
    sam: Vec<u8>,
}

/// Aligns every record of `source` and writes one SAM line per read to
/// `out` (no header). Returns the merged counters and the number of chunks.
pub fn align_source<W: Write>(
    source: &ReadSource,
    index: &SeedIndex,
    genome: &PackedGenome,
    params: &AlignerParams,
    opts: &EngineOptions,
    out: &mut W,
) -> Result<(AlignerStats, u64)> {
    if opts.threads == 0 {
        return Err(Error::invalid("thread count must be at least 1"));
    }
    // Fail early on bad parameters rather than inside every worker.
    Aligner::new(index, genome, params.clone())?;
    let len = source.len();
    let cursor = Mutex::new(0u64);
    let abort = AtomicBool::new(false);
    let (tx, rx) = sync_channel::<ChunkOutput>(2 * opts.threads);

    let take_chunk = || -> Result<Option<(u64, u64)>> {
        let mut cur = cursor.lock().unwrap();
        if *cur >= len || abort.load(Ordering::Relaxed) {
            return Ok(None);
        }
        let start = *cur;
        let end = source.snap_to_record(start + next_chunk(len - start, opts.threads, opts.chunk_min))?;
        *cur = end;
        Ok(Some((start, end)))
    };

    std::thread::scope(|scope| {
        let mut workers = Vec::with_capacity(opts.threads);
        for _ in 0..opts.threads {
            let tx = tx.clone();
            let take_chunk = &take_chunk;
            let abort = &abort;
            workers.push(scope.spawn(move || -> Result<AlignerStats> {
                let mut aligner = Aligner::new(index, genome, params.clone())?;
                let mut run = || -> Result<()> {
                    while let Some((start, end)) = take_chunk()? {
                        let reader = BufReader::with_capacity(
                            256 << 10,
                            RangeReader { source, pos: start, end },
                        );
                        let mut sam = Vec::new();
                        for read in FastqReader::with_offset(reader, start) {
                            let read = read?;
                            let result = aligner.align(&read.bases);
                            writeln!(sam, "{}", to_sam_record(&result, &read, genome))?;
                        }
                        if tx.send(ChunkOutput { start, end, sam }).is_err() {
                            break;
                        }
                    }
                    Ok(())
                };
                let outcome = run();
                if outcome.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                outcome.map(|_| aligner.take_stats())
            }));
        }
        drop(tx);

        let mut chunks = 0u64;
        let mut write_all = || -> Result<()> {
            let mut pending = BTreeMap::new();
            let mut next = 0u64;
            for chunk in rx.iter() {
                chunks += 1;
                if !opts.stable_order {
                    out.write_all(&chunk.sam)?;
                    continue;
                }
                pending.insert(chunk.start, chunk);
                while let Some(c) = pending.remove(&next) {
                    out.write_all(&c.sam)?;
                    next = c.end;
                }
            }
            Ok(())
        };
        let written = write_all();
        if written.is_err() {
            abort.store(true, Ordering::Relaxed);
        }
        // Unblocks any worker still waiting to send.
        drop(rx);

        let mut stats = AlignerStats::default();
        let mut first_err = written.err();
        for w in workers {
            match w.join().expect("worker panicked") {
                Ok(s) => stats.merge(&s),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok((stats, chunks)),
        }
    })
}

pub fn load_index(path: &Path, reference: Option<&Path>) -> Result<(SeedIndex, PackedGenome)> {
    let expected = reference.map(|p| -> Result<PackedGenome> { load_fasta(BufReader::new(File::open(p)?)) }).transpose()?;
    SeedIndex::load(BufReader::new(File::open(path)?), expected.as_ref())
}

#[derive(Clone, Debug)]
pub struct AlignJob {
    pub index: PathBuf,
    pub reads: PathBuf,
    pub output: PathBuf,
    /// FASTA to check against the genome stored in the index.
    pub reference: Option<PathBuf>,
    pub params: AlignerParams,
    pub engine: EngineOptions,
    pub command_line: String,
}

/// Path of the run summary written next to the SAM output.
pub fn sidecar_path(sam: &Path) -> PathBuf {
    let mut s = sam.as_os_str().to_owned();
    s.push(".stats");
    PathBuf::from(s)
}

/// Aligns a FASTQ file against a saved index, writing SAM to the output
/// path and a JSON run summary next to it.
pub fn run_align(job: &AlignJob) -> Result<RunSummary> {
    let (index, genome) = load_index(&job.index, job.reference.as_deref())?;
    job.params.validate()?;
    let source = ReadSource::open(&job.reads)?;
    let mut out = BufWriter::new(File::create(&job.output)?);
    write_sam_header(&mut out, &genome, &job.command_line)?;
    let started = Instant::now();
    let (stats, chunks) = align_source(&source, &index, &genome, &job.params, &job.engine, &mut out)?;
    out.flush()?;
    let summary = RunSummary {
        elapsed_seconds: started.elapsed().as_secs_f64(),
        threads: job.engine.threads,
        chunks,
        stats,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(sidecar_path(&job.output), json)?;
    Ok(summary)
}

/// Builds and saves an index for a FASTA file.
pub fn run_index(fasta: &Path, seed_size: usize, output: &Path) -> Result<SeedIndex> {
    let genome = load_fasta(BufReader::new(File::open(fasta)?))?;
    let index = SeedIndex::build(&genome, seed_size)?;
    let mut out = BufWriter::new(File::create(output)?);
    index.save(&genome, &mut out)?;
    out.flush()?;
    Ok(index)
}

/// Simulates `count` reads from a FASTA file into a FASTQ file.
pub fn run_simulate(fasta: &Path, profile: SimProfile, count: u64, output: &Path) -> Result<()> {
    let genome = load_fasta(BufReader::new(File::open(fasta)?))?;
    let mut out = BufWriter::new(File::create(output)?);
    for sim in simulate(&genome, profile, count)? {
        sim.read.write_fastq(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

/// Scores SAM output whose read names carry simulated truth. Timing and
/// counters come from the run summary next to the SAM file when present.
pub fn run_eval(sam: &Path, tolerance: u64) -> Result<EvalReport> {
    let reader = BufReader::new(File::open(sam)?);
    let mut counts = EvalCounts::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('@') {
            continue;
        }
        let rec = parse_sam_record(&line, i + 1)?;
        let kind = rec.kind.unwrap_or(if rec.is_mapped() { ResultKind::SingleHit } else { ResultKind::NotFound });
        let verdict = decode_truth(&rec.qname).map(|(truth, _)| score_sam_record(&rec, &truth, tolerance));
        counts.add(kind, verdict);
    }
    let summary: Option<RunSummary> = match std::fs::read_to_string(sidecar_path(sam)) {
        Ok(text) => Some(
            serde_json::from_str(&text).map_err(|e| Error::invalid(format!("bad run summary: {e}")))?,
        ),
        Err(e) if e.kind() == io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let elapsed = summary.as_ref().map_or(Duration::ZERO, |s| Duration::from_secs_f64(s.elapsed_seconds));
    compile_report(counts, elapsed, summary.map(|s| s.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::GenomeRecipe;

    #[test]
    fn chunk_examples() {
        assert_eq!(next_chunk(1000, 4, 10), 125);
        assert_eq!(next_chunk(8, 4, 10), 8);
        assert_eq!(next_chunk(1000, 1, 10), 500);
        assert_eq!(next_chunk(0, 3, 10), 0);
    }

    #[test]
    fn schedule_covers_work_once() {
        for (total, workers, min) in [(1_000_000u64, 8, 1_000), (77, 3, 5), (1, 1, 1), (10_000, 2, 20_000)] {
            let mut assigned = 0;
            let mut sizes = vec![];
            while assigned < total {
                let s = next_chunk(total - assigned, workers, min);
                assert!(s >= 1);
                sizes.push(s);
                assigned += s;
            }
            assert_eq!(assigned, total);
            let (last, rest) = sizes.split_last().unwrap();
            assert!(rest.iter().all(|&s| s >= min));
            assert!(*last <= total);
        }
    }

    fn fixture(reads: u64) -> (PackedGenome, SeedIndex, Vec<u8>) {
        let g = GenomeRecipe::random(50_000, 3).build().unwrap();
        let idx = SeedIndex::build(&g, 20).unwrap();
        let mut fastq = Vec::new();
        for sim in simulate(&g, SimProfile::short_reads(100, 0.02, 1), reads).unwrap() {
            sim.read.write_fastq(&mut fastq).unwrap();
        }
        (g, idx, fastq)
    }

    fn sorted_lines(b: &[u8]) -> Vec<String> {
        let mut v: Vec<String> = String::from_utf8_lossy(b).lines().map(String::from).collect();
        v.sort();
        v
    }

    #[test]
    fn snapping_lands_on_record_starts() {
        let (_, _, fastq) = fixture(50);
        let src = ReadSource::Memory(fastq.clone());
        let starts: Vec<u64> = {
            let mut v = vec![0u64];
            let mut pos = 0;
            for line_no in 0.. {
                let Some(nl) = fastq[pos..].iter().position(|&b| b == b'\n') else { break };
                pos += nl + 1;
                if line_no % 4 == 3 {
                    v.push(pos as u64);
                }
            }
            v
        };
        for at in 0..=fastq.len() as u64 {
            let snapped = src.snap_to_record(at).unwrap();
            let expected = *starts.iter().find(|&&s| s >= at).unwrap();
            assert_eq!(snapped, expected, "at {at}");
        }
    }

    #[test]
    fn thread_count_and_chunking_do_not_change_results() {
        let (g, idx, fastq) = fixture(400);
        let src = ReadSource::Memory(fastq);
        let params = AlignerParams::default();
        let mut reference = Vec::new();
        let opts = EngineOptions { threads: 1, chunk_min: 1 << 30, stable_order: true };
        let (stats, chunks) = align_source(&src, &idx, &g, &params, &opts, &mut reference).unwrap();
        assert_eq!(chunks, 1);
        assert_eq!(stats.reads, 400);
        for threads in [2, 3, 8] {
            for chunk_min in [1, 997, 8_000] {
                let mut out = Vec::new();
                let opts = EngineOptions { threads, chunk_min, stable_order: false };
                let (s, _) = align_source(&src, &idx, &g, &params, &opts, &mut out).unwrap();
                assert_eq!(s, stats);
                assert_eq!(sorted_lines(&out), sorted_lines(&reference));
                let mut stable = Vec::new();
                let opts = EngineOptions { threads, chunk_min, stable_order: true };
                align_source(&src, &idx, &g, &params, &opts, &mut stable).unwrap();
                assert_eq!(stable, reference);
            }
        }
    }

    #[test]
    fn empty_input_and_bad_records() {
        let (g, idx, _) = fixture(1);
        let params = AlignerParams::default();
        let mut out = Vec::new();
        let (stats, chunks) =
            align_source(&ReadSource::Memory(vec![]), &idx, &g, &params, &EngineOptions::default(), &mut out).unwrap();
        assert_eq!((stats.reads, chunks, out.len()), (0, 0, 0));
        let bad = ReadSource::Memory(b"@r1\nACGT\n+\nIIII\n@r2\nACXT\n+\nIIII\n".to_vec());
        let opts = EngineOptions { threads: 2, chunk_min: 1, stable_order: false };
        let err = align_source(&bad, &idx, &g, &params, &opts, &mut out).unwrap_err();
        assert!(matches!(err, Error::Fastq { offset: 20, .. }), "{err}");
    }
}
