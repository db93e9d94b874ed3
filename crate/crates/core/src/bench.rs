//! Scoring latency. Only the work after the image encoder is timed.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use crate::error::{GdcError, Result};
use crate::gmm::GdcModel;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub k: usize,
    pub d: usize,
    pub batch_size: usize,
    pub repetitions: usize,
    /// Unbatched single-embedding posterior latency, seconds.
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
    /// Mean seconds per embedding through the batched path.
    pub batched_mean: f64,
    /// Embeddings per second through the batched path.
    pub throughput: f64,
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Times `posterior` on every row `repetitions` times, then the batched path.
pub fn run_bench<T: Real>(model: &GdcModel<T>, rows: &[T], repetitions: usize) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(GdcError::InvalidArgument("repetitions must be at least 1".into()));
    }
    let d = model.dim();
    if rows.is_empty() {
        return Err(GdcError::EmptyInput("no embeddings to score"));
    }
    if !rows.len().is_multiple_of(d) {
        return Err(GdcError::DimensionMismatch { expected: d, found: rows.len() % d });
    }
    let m = rows.len() / d;

    let mut latencies = Vec::with_capacity(m * repetitions);
    for _ in 0..repetitions {
        for e in rows.chunks_exact(d) {
            let t = Instant::now();
            black_box(model.posterior(black_box(e))?);
            latencies.push(t.elapsed().as_secs_f64().max(1e-9));
        }
    }
    let mut batch_secs = 0.0;
    for _ in 0..repetitions {
        let t = Instant::now();
        black_box(model.classify_batch(black_box(rows))?);
        batch_secs += t.elapsed().as_secs_f64();
    }

    let mean = latencies.iter().sum::<f64>() / latencies.len() as f64;
    latencies.sort_by(|a, b| a.partial_cmp(b).expect("finite latency"));
    Ok(BenchReport {
        k: model.k(),
        d,
        batch_size: m,
        repetitions,
        mean,
        p50: percentile(&latencies, 0.50),
        p99: percentile(&latencies, 0.99),
        batched_mean: batch_secs / (m * repetitions) as f64,
        throughput: (m * repetitions) as f64 / batch_secs.max(1e-9),
    })
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "classes k:          {}", self.k);
        let _ = writeln!(out, "dimension d:        {}", self.d);
        let _ = writeln!(out, "batch size:         {}", self.batch_size);
        let _ = writeln!(out, "repetitions:        {}", self.repetitions);
        let _ = writeln!(out, "single mean (s):    {:.6}", self.mean);
        let _ = writeln!(out, "single p50 (s):     {:.6}", self.p50);
        let _ = writeln!(out, "single p99 (s):     {:.6}", self.p99);
        let _ = writeln!(out, "batched mean (s):   {:.6}", self.batched_mean);
        let _ = writeln!(out, "throughput (emb/s): {:.2}", self.throughput);
        let _ = writeln!(out, "note: encoder time excluded; timings cover posterior scoring only");
        out
    }
}
