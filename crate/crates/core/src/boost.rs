//! Hash boosting: train T times, then keep the L best-balanced bit rows from
//! the T·L candidates together with their projection columns.
//!
//! Row `l` of a run's hash matrix pairs with column `l` of that run's
//! projection, since codes are `sgn(Pᵀx)` with `P` of shape d×L.

use std::fmt::Write as _;
use std::path::Path;
use std::thread;

use crate::codec::write_atomic;
use crate::error::{Error, Result};
use crate::features::RbfMap;
use crate::linalg::DenseMatrix;
use crate::trainer::{train, Hyperparams, TrainReport, TrainedModel};

/// The ensemble size used when none is given.
pub const DEFAULT_RUNS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostRun {
    pub h: DenseMatrix,
    pub p: DenseMatrix,
    pub seed: u64,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostEnsemble {
    pub runs: Vec<BoostRun>,
}

impl BoostEnsemble {
    pub fn new(runs: Vec<BoostRun>) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::usage("empty ensemble"))?;
        let (bits, n) = first.h.shape();
        let d = first.p.rows();
        for (t, r) in runs.iter().enumerate() {
            if r.h.shape() != (bits, n) || r.p.shape() != (d, bits) {
                return Err(Error::usage(format!(
                    "run {t} has H {:?} and P {:?}, expected {:?} and {:?}",
                    r.h.shape(),
                    r.p.shape(),
                    (bits, n),
                    (d, bits)
                )));
            }
        }
        let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::usage("ensemble seeds must be pairwise distinct"));
        }
        Ok(Self { runs })
    }

    pub fn bits(&self) -> usize {
        self.runs[0].h.rows()
    }
}

/// Where a selected bit came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitSource {
    /// Index into [`BoostEnsemble::runs`].
    pub run: usize,
    /// Bit row within that run.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostResult {
    /// L×n
    pub h_f: DenseMatrix,
    /// d×L
    pub p_f: DenseMatrix,
    pub provenance: Vec<BitSource>,
    pub balance_degrees: Vec<u64>,
}

impl BoostResult {
    /// Provenance sidecar: one `k,t,l,balance_degree` line per selected bit.
    pub fn provenance_csv(&self) -> String {
        let mut out = String::from("k,t,l,balance_degree\n");
        for (k, (src, deg)) in self.provenance.iter().zip(&self.balance_degrees).enumerate() {
            writeln!(out, "{k},{},{},{deg}", src.run, src.row).unwrap();
        }
        out
    }

    pub fn save_provenance(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.provenance_csv().as_bytes())
    }
}

/// `|Σ row|` for a ±1 row.
pub fn balance_degree(row: &[f64]) -> Result<u64> {
    let mut sum: i64 = 0;
    for &v in row {
        if v == 1.0 {
            sum += 1;
        } else if v == -1.0 {
            sum -= 1;
        } else {
            return Err(Error::usage(format!("balance_degree: entry {v} is not ±1")));
        }
    }
    Ok(sum.unsigned_abs())
}

/// The `bits` stacked rows with the smallest balance degree.
///
/// Ties go to the run with the smaller seed, then the smaller row index, so
/// the choice does not depend on the order runs are listed in. The result is
/// ordered by that same key.
pub fn select_rows(ensemble: &BoostEnsemble, bits: usize) -> Result<Vec<BitSource>> {
    let total: usize = ensemble.runs.iter().map(|r| r.h.rows()).sum();
    if bits > total {
        return Err(Error::usage(format!(
            "cannot select {bits} rows from {total} candidates"
        )));
    }
    let mut candidates = Vec::with_capacity(total);
    for (t, run) in ensemble.runs.iter().enumerate() {
        for l in 0..run.h.rows() {
            candidates.push((balance_degree(run.h.row(l))?, run.seed, l, t));
        }
    }
    candidates.sort_unstable();
    Ok(candidates
        .into_iter()
        .take(bits)
        .map(|(_, _, row, run)| BitSource { run, row })
        .collect())
}

/// Gather the selected rows of H and columns of P.
pub fn assemble(ensemble: &BoostEnsemble, provenance: Vec<BitSource>) -> Result<BoostResult> {
    let n = ensemble.runs[0].h.cols();
    let d = ensemble.runs[0].p.rows();
    let mut h_f = DenseMatrix::zeros(provenance.len(), n);
    let mut p_f = DenseMatrix::zeros(d, provenance.len());
    let mut degrees = Vec::with_capacity(provenance.len());
    for (k, src) in provenance.iter().enumerate() {
        let run = ensemble
            .runs
            .get(src.run)
            .ok_or_else(|| Error::usage(format!("provenance names missing run {}", src.run)))?;
        if src.row >= run.h.rows() {
            return Err(Error::usage(format!("provenance row {} out of range", src.row)));
        }
        h_f.row_mut(k).copy_from_slice(run.h.row(src.row));
        p_f.set_column(k, &run.p.column(src.row));
        degrees.push(balance_degree(run.h.row(src.row))?);
    }
    Ok(BoostResult {
        h_f,
        p_f,
        provenance,
        balance_degrees: degrees,
    })
}

/// Number of worker threads from `MLRH_THREADS` (unset or 0 means all cores).
pub fn thread_budget() -> usize {
    let auto = || thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("MLRH_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        Some(0) | None => auto(),
        Some(k) => k,
    }
}

/// Train `runs` times with seeds `seed, seed+1, …` and assemble the boosted code.
pub fn boost_train(
    v: &DenseMatrix,
    y: &DenseMatrix,
    hp: &Hyperparams,
    runs: usize,
) -> Result<(BoostResult, BoostEnsemble)> {
    boost_train_with_threads(v, y, hp, runs, thread_budget())
}

pub fn boost_train_with_threads(
    v: &DenseMatrix,
    y: &DenseMatrix,
    hp: &Hyperparams,
    runs: usize,
    threads: usize,
) -> Result<(BoostResult, BoostEnsemble)> {
    if runs == 0 {
        return Err(Error::usage("boosting needs at least one run"));
    }
    hp.validate()?;
    let seeds: Vec<u64> = (0..runs as u64).map(|t| hp.seed.wrapping_add(t)).collect();
    let threads = threads.clamp(1, runs);

    let mut results: Vec<Option<Result<BoostRun>>> = (0..runs).map(|_| None).collect();
    let run_one = |t: usize| -> Result<BoostRun> {
        let hp_t = Hyperparams { seed: seeds[t], ..hp.clone() };
        let (_, state, report) =
            train(v, y, &hp_t).map_err(|e| e.context(format!("boost run {t}")))?;
        Ok(BoostRun {
            h: state.h,
            p: state.p,
            seed: seeds[t],
            report,
        })
    };
    // Strided assignment; each slot is written by exactly one worker.
    thread::scope(|scope| {
        let workers: Vec<_> = (0..threads)
            .map(|w| {
                let run_one = &run_one;
                scope.spawn(move || {
                    (w..runs)
                        .step_by(threads)
                        .map(|t| (t, run_one(t)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for worker in workers {
            for (t, r) in worker.join().expect("boost worker panicked") {
                results[t] = Some(r);
            }
        }
    });

    let runs: Vec<BoostRun> = results
        .into_iter()
        .map(|r| r.expect("every run slot filled"))
        .collect::<Result<_>>()?;
    let ensemble = BoostEnsemble::new(runs)?;
    let provenance = select_rows(&ensemble, hp.bits)?;
    let result = assemble(&ensemble, provenance)?;
    Ok((result, ensemble))
}

/// Wrap the boosted projection as an encoder for queries and database alike.
pub fn finalize_model(result: &BoostResult, rbf: Option<RbfMap>, hp: &Hyperparams) -> Result<TrainedModel> {
    TrainedModel::new(result.p_f.clone(), rbf, Hyperparams { bits: result.p_f.cols(), ..hp.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sgn, SeededRng};

    fn report() -> TrainReport {
        TrainReport {
            objective_trace: vec![1.0],
            iterations_run: 0,
            converged: true,
        }
    }

    fn run_from_rows(rows: &[&[f64]], seed: u64) -> BoostRun {
        let h = DenseMatrix::from_rows(rows).unwrap();
        let p = DenseMatrix::from_fn(2, h.rows(), |i, j| (seed * 100 + 10 * j as u64 + i as u64) as f64);
        BoostRun { h, p, seed, report: report() }
    }

    #[test]
    fn balance_degree_examples() {
        assert_eq!(balance_degree(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 4);
        assert_eq!(balance_degree(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 0);
        assert_eq!(balance_degree(&[1.0, 1.0, -1.0, 1.0]).unwrap(), 2);
        assert!(matches!(balance_degree(&[1.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn three_by_three_toy_ensemble() {
        // Degrees per run: (0,2,4), (0,2,2), (4,0,2).
        let d0: &[f64] = &[1.0, -1.0, 1.0, -1.0];
        let d2: &[f64] = &[1.0, 1.0, -1.0, 1.0];
        let d4: &[f64] = &[1.0, 1.0, 1.0, 1.0];
        let ens = BoostEnsemble::new(vec![
            run_from_rows(&[d0, d2, d4], 10),
            run_from_rows(&[d0, d2, d2], 11),
            run_from_rows(&[d4, d0, d2], 12),
        ])
        .unwrap();
        let sel = select_rows(&ens, 3).unwrap();
        assert_eq!(
            sel,
            vec![
                BitSource { run: 0, row: 0 },
                BitSource { run: 1, row: 0 },
                BitSource { run: 2, row: 1 }
            ]
        );
        let res = assemble(&ens, sel).unwrap();
        assert_eq!(res.balance_degrees, vec![0, 0, 0]);
        assert_eq!(res.p_f.column(2), ens.runs[2].p.column(1));
        assert_eq!(
            res.provenance_csv(),
            "k,t,l,balance_degree\n0,0,0,0\n1,1,0,0\n2,2,1,0\n"
        );
    }

    #[test]
    fn single_run_keeps_all_rows_sorted() {
        let ens = BoostEnsemble::new(vec![run_from_rows(
            &[&[1.0, 1.0, 1.0], &[1.0, -1.0, 1.0], &[-1.0, 1.0, 1.0]],
            0,
        )])
        .unwrap();
        let rows: Vec<usize> = select_rows(&ens, 3).unwrap().iter().map(|s| s.row).collect();
        assert_eq!(rows, vec![1, 2, 0]);
    }

    #[test]
    fn all_balanced_picks_first_run() {
        let b: &[f64] = &[1.0, -1.0];
        let ens = BoostEnsemble::new(vec![
            run_from_rows(&[b, b], 5),
            run_from_rows(&[b, b], 6),
        ])
        .unwrap();
        assert_eq!(
            select_rows(&ens, 2).unwrap(),
            vec![BitSource { run: 0, row: 0 }, BitSource { run: 0, row: 1 }]
        );
    }

    #[test]
    fn listing_order_does_not_change_selection() {
        let mut rng = SeededRng::new(3);
        let runs: Vec<BoostRun> = (0..4)
            .map(|t| {
                let h = DenseMatrix::from_fn(5, 6, |_, _| sgn(rng.gaussian()));
                BoostRun { p: DenseMatrix::zeros(3, 5), h, seed: 40 + t, report: report() }
            })
            .collect();
        let a = BoostEnsemble::new(runs.clone()).unwrap();
        let mut rev = runs;
        rev.reverse();
        let b = BoostEnsemble::new(rev).unwrap();
        let key = |e: &BoostEnsemble, sel: Vec<BitSource>| -> Vec<(u64, usize)> {
            sel.iter().map(|s| (e.runs[s.run].seed, s.row)).collect()
        };
        assert_eq!(key(&a, select_rows(&a, 5).unwrap()), key(&b, select_rows(&b, 5).unwrap()));
    }

    #[test]
    fn ensemble_validation() {
        let r = run_from_rows(&[&[1.0, -1.0]], 1);
        assert!(BoostEnsemble::new(vec![r.clone(), r.clone()]).is_err());
        assert!(BoostEnsemble::new(vec![]).is_err());
        let other = run_from_rows(&[&[1.0, -1.0, 1.0]], 2);
        assert!(BoostEnsemble::new(vec![r, other]).is_err());
    }

    #[test]
    fn boost_rejects_zero_runs() {
        let v = DenseMatrix::identity(2);
        assert!(matches!(
            boost_train(&v, &v, &Hyperparams::default(), 0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn threads_do_not_change_result() {
        let ds = crate::data::gen_synthetic(&crate::data::SyntheticSpec {
            num_classes: 3,
            dim: 4,
            per_class: 15,
            cluster_spread: 1.0,
            center_scale: 1.0,
            seed: 8,
        })
        .unwrap();
        let hp = Hyperparams { bits: 6, ..Hyperparams::default() };
        let (r1, e1) = boost_train_with_threads(ds.features(), ds.labels(), &hp, 3, 1).unwrap();
        let (r3, e3) = boost_train_with_threads(ds.features(), ds.labels(), &hp, 3, 3).unwrap();
        assert_eq!(r1, r3);
        assert_eq!(e1, e3);
        assert_eq!(e1.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}
