//! Training-time scaling sweeps and a few code-quality diagnostics.

use std::fmt::Write as _;
use std::time::Instant;

use crate::data::{gen_synthetic, SyntheticSpec};
use crate::error::{Error, Result};
use crate::index::{pack, rank_all, PackedCodes};
use crate::linalg::DenseMatrix;
use crate::trainer::{train_with, Hyperparams, TrainControl};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    pub bits_list: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
    /// Repetitions per cell; the fastest is reported.
    pub reps: usize,
    /// Base hyperparameters; `bits` is overridden per cell. Early stopping is
    /// disabled so every cell runs exactly `max_outer` iterations.
    pub hyperparams: Hyperparams,
    pub data_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_list: vec![2000, 4000, 8000],
            bits_list: vec![16, 32, 64],
            dim: 50,
            classes: 10,
            reps: 3,
            hyperparams: Hyperparams {
                max_outer: 10,
                ..Hyperparams::default()
            },
            data_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub n: usize,
    pub bits: usize,
    pub seconds: f64,
    pub iterations: usize,
}

impl BenchCell {
    pub fn seconds_per_iteration(&self) -> f64 {
        self.seconds / self.iterations.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub cells: Vec<BenchCell>,
}

impl ScalingReport {
    fn column(&self, bits: usize) -> Vec<&BenchCell> {
        let mut cells: Vec<&BenchCell> = self.cells.iter().filter(|c| c.bits == bits).collect();
        cells.sort_by_key(|c| c.n);
        cells
    }

    /// Least-squares slope of seconds against n at fixed bit length.
    pub fn slope_vs_n(&self, bits: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .column(bits)
            .iter()
            .map(|c| (c.n as f64, c.seconds))
            .collect();
        least_squares_slope(&pts)
    }

    /// `time(2n) / time(n)` for every pair in the sweep where n exactly doubles.
    pub fn doubling_ratios(&self, bits: usize) -> Vec<(usize, f64)> {
        let col = self.column(bits);
        let mut out = Vec::new();
        for a in &col {
            if let Some(b) = col.iter().find(|b| b.n == 2 * a.n) {
                out.push((a.n, b.seconds / a.seconds));
            }
        }
        out
    }

    /// `metric,n,bits,value` rows; the set of rows depends only on the config.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,n,bits,value\n");
        for c in &self.cells {
            writeln!(out, "train_seconds,{},{},{:.6}", c.n, c.bits, c.seconds).unwrap();
            writeln!(out, "seconds_per_iteration,{},{},{:.6}", c.n, c.bits, c.seconds_per_iteration()).unwrap();
        }
        let mut bits: Vec<usize> = self.cells.iter().map(|c| c.bits).collect();
        bits.sort_unstable();
        bits.dedup();
        for b in bits {
            if let Some(s) = self.slope_vs_n(b) {
                writeln!(out, "slope_seconds_per_sample,0,{b},{s:.9}").unwrap();
            }
            for (n, r) in self.doubling_ratios(b) {
                writeln!(out, "doubling_ratio,{n},{b},{r:.4}").unwrap();
            }
        }
        out
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Time training over the (n, bits) grid on synthetic clusters.
pub fn scaling_sweep(cfg: &BenchConfig) -> Result<ScalingReport> {
    if cfg.n_list.is_empty() || cfg.bits_list.is_empty() || cfg.reps == 0 {
        return Err(Error::usage("bench needs non-empty n and bits lists and reps >= 1"));
    }
    let control = TrainControl { early_stop: false };
    let mut cells = Vec::new();
    for &n in &cfg.n_list {
        if n < cfg.classes {
            return Err(Error::usage(format!("n = {n} is smaller than the class count")));
        }
        let ds = gen_synthetic(&SyntheticSpec {
            num_classes: cfg.classes,
            dim: cfg.dim,
            per_class: n / cfg.classes,
            cluster_spread: 0.3,
            center_scale: 3.0,
            seed: cfg.data_seed,
        })?;
        for &bits in &cfg.bits_list {
            let hp = Hyperparams { bits, ..cfg.hyperparams.clone() };
            let mut best = f64::INFINITY;
            let mut iterations = 0;
            for _ in 0..cfg.reps {
                let start = Instant::now();
                let (_, _, report) = train_with(ds.features(), ds.labels(), &hp, control)?;
                best = best.min(start.elapsed().as_secs_f64());
                iterations = report.iterations_run;
            }
            cells.push(BenchCell {
                n: ds.len(),
                bits,
                seconds: best,
                iterations,
            });
        }
    }
    Ok(ScalingReport { cells })
}

/// Mean absolute Pearson correlation over all pairs of bit rows. Constant
/// rows count as uncorrelated.
pub fn inter_bit_correlation(h: &DenseMatrix) -> f64 {
    let (bits, n) = h.shape();
    if bits < 2 || n == 0 {
        return 0.0;
    }
    let stats: Vec<(f64, f64)> = (0..bits)
        .map(|l| {
            let row = h.row(l);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            (mean, var.sqrt())
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..bits {
        for b in (a + 1)..bits {
            pairs += 1;
            let (ma, sa) = stats[a];
            let (mb, sb) = stats[b];
            if sa == 0.0 || sb == 0.0 {
                continue;
            }
            let cov: f64 = h.row(a).iter().zip(h.row(b)).map(|(x, y)| (x - ma) * (y - mb)).sum();
            total += (cov / (sa * sb)).abs();
        }
    }
    total / pairs as f64
}

/// Database codes compared per second by a full ranking of every query.
pub fn scan_throughput(db: &PackedCodes, queries: &PackedCodes) -> Result<f64> {
    let start = Instant::now();
    let ranked = rank_all(db, queries)?;
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    Ok((ranked.len() * db.len()) as f64 / secs)
}

/// Random ±1 codes for throughput runs.
pub fn random_codes(bits: usize, n: usize, seed: u64) -> Result<PackedCodes> {
    pack(&crate::trainer::initial_codes(bits, n, seed))
}
