//! Alternating optimiser for mutual-regression discrete hashing.
//!
//! The objective over `W` (L×c), `H` (L×n, ±1) and `P` (d×L) is
//!
//! ```text
//! ‖Y − WᵀH‖² + α‖H − WY‖² + β‖H − PᵀV‖² + λ(‖P‖² + ‖W‖²)
//! ```
//!
//! and each outer iteration runs a W-step (Sylvester equation), an H-step
//! (discrete cyclic coordinate descent over bit rows) and a P-step (ridge
//! regression from features to codes).

mod baseline;
mod model_file;

pub use baseline::{mutual_inequality_witness, solve_ph, solve_py};
pub use model_file::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::RbfMap;
use crate::linalg::{
    dot, frob_dist_sq, frob_norm_sq, gram, matmul, matmul_nt, matmul_tn, sgn, sign_matrix,
    sylvester_solve, Cholesky, DenseMatrix, SeededRng,
};

/// Which linear system the W-step and P-step solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SylvesterForm {
    /// Exact block minimisers of the full objective:
    /// `HHᵀW + W(αYYᵀ + λI) = (1+α)HYᵀ` and `P = (VVᵀ + (λ/β)I)⁻¹VHᵀ`.
    /// Guarantees a non-increasing objective trace.
    #[default]
    Exact,
    /// The equations as usually printed for this method:
    /// `HHᵀW + αW(YYᵀ + λI) = (1+α)HYᵀ` and `P = (VVᵀ + λI)⁻¹VHᵀ`.
    Paper,
}

impl SylvesterForm {
    pub fn code(self) -> u8 {
        match self {
            SylvesterForm::Exact => 0,
            SylvesterForm::Paper => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SylvesterForm::Exact),
            1 => Some(SylvesterForm::Paper),
            _ => None,
        }
    }
}

impl fmt::Display for SylvesterForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SylvesterForm::Exact => "exact",
            SylvesterForm::Paper => "paper",
        })
    }
}

impl FromStr for SylvesterForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(SylvesterForm::Exact),
            "paper" => Ok(SylvesterForm::Paper),
            other => Err(Error::usage(format!(
                "unknown sylvester form {other:?} (expected exact or paper)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Code length L.
    pub bits: usize,
    pub max_outer: usize,
    pub dcc_sweeps: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub sylvester_form: SylvesterForm,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1e-5,
            lambda: 1.0,
            bits: 32,
            max_outer: 30,
            dcc_sweeps: 3,
            rel_tol: 1e-6,
            seed: 0,
            sylvester_form: SylvesterForm::Exact,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::usage(format!("{name} must be positive, got {v}")));
            }
        }
        if self.bits == 0 {
            return Err(Error::usage("bits must be at least 1"));
        }
        if self.max_outer == 0 || self.dcc_sweeps == 0 {
            return Err(Error::usage("max_outer and dcc_sweeps must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::usage("rel_tol must be positive"));
        }
        Ok(())
    }

    /// Ridge strength used by the P-step inside training.
    pub fn p_ridge(&self) -> f64 {
        match self.sylvester_form {
            SylvesterForm::Exact => self.lambda / self.beta,
            SylvesterForm::Paper => self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// L×c
    pub w: DenseMatrix,
    /// d×L
    pub p: DenseMatrix,
    /// L×n, entries ±1
    pub h: DenseMatrix,
}

impl ModelState {
    fn check(&self, v: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
        let l = self.h.rows();
        let n = self.h.cols();
        let ok = self.w.shape() == (l, y.rows())
            && self.p.shape() == (v.rows(), l)
            && v.cols() == n
            && y.cols() == n;
        if !ok {
            return Err(Error::usage(format!(
                "inconsistent shapes: W {:?}, P {:?}, H {:?}, V {:?}, Y {:?}",
                self.w.shape(),
                self.p.shape(),
                self.h.shape(),
                v.shape(),
                y.shape()
            )));
        }
        if !self.h.is_sign_matrix() {
            return Err(Error::usage("hash matrix entries must be ±1"));
        }
        Ok(())
    }
}

/// The learned out-of-sample encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// d×L, where d is the dimension after the optional RBF map.
    pub p: DenseMatrix,
    pub rbf: Option<RbfMap>,
    pub bits: usize,
    pub hyperparams: Hyperparams,
}

impl TrainedModel {
    pub fn new(p: DenseMatrix, rbf: Option<RbfMap>, hyperparams: Hyperparams) -> Result<Self> {
        if let Some(map) = &rbf {
            if map.output_dim() != p.rows() {
                return Err(Error::usage(format!(
                    "rbf map yields {} features but projection expects {}",
                    map.output_dim(),
                    p.rows()
                )));
            }
        }
        Ok(Self {
            bits: p.cols(),
            p,
            rbf,
            hyperparams,
        })
    }

    /// Dimension of raw inputs accepted by [`TrainedModel::encode`].
    pub fn input_dim(&self) -> usize {
        self.rbf.as_ref().map_or(self.p.rows(), RbfMap::input_dim)
    }

    /// Apply the feature map (if any), then `sgn(Pᵀx)`.
    pub fn encode(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.rbf {
            Some(map) => encode(&self.p, &map.apply(x)?),
            None => encode(&self.p, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Objective after initialisation, then after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Full objective value.
pub fn objective(state: &ModelState, v: &DenseMatrix, y: &DenseMatrix, hp: &Hyperparams) -> Result<f64> {
    state.check(v, y)?;
    let wt_h = matmul_tn(&state.w, &state.h)?;
    let wy = matmul(&state.w, y)?;
    let pt_v = matmul_tn(&state.p, v)?;
    Ok(frob_dist_sq(y, &wt_h)
        + hp.alpha * frob_dist_sq(&state.h, &wy)
        + hp.beta * frob_dist_sq(&state.h, &pt_v)
        + hp.lambda * (frob_norm_sq(&state.p) + frob_norm_sq(&state.w)))
}

/// Closed-form W for fixed H via a Sylvester equation.
pub fn w_step(h: &DenseMatrix, y: &DenseMatrix, hp: &Hyperparams) -> Result<DenseMatrix> {
    if h.cols() != y.cols() {
        return Err(Error::usage(format!(
            "w_step: H has {} columns, Y has {}",
            h.cols(),
            y.cols()
        )));
    }
    let hht = gram(h);
    let yyt = gram(y);
    let b = match hp.sylvester_form {
        SylvesterForm::Exact => yyt.scale(hp.alpha).add_diagonal(hp.lambda),
        SylvesterForm::Paper => yyt.add_diagonal(hp.lambda).scale(hp.alpha),
    };
    let c = matmul_nt(h, y)?.scale(1.0 + hp.alpha);
    sylvester_solve(&hht, &b, &c)
}

/// `M = (1+α)WY + βPᵀV`, the linear coupling of the H-subproblem.
pub fn coupling_matrix(
    state: &ModelState,
    v: &DenseMatrix,
    y: &DenseMatrix,
    hp: &Hyperparams,
) -> Result<DenseMatrix> {
    let wy = matmul(&state.w, y)?;
    let pt_v = matmul_tn(&state.p, v)?;
    wy.scale(1.0 + hp.alpha).add(&pt_v.scale(hp.beta))
}

/// New value of bit row `l`: `sgn(m − H′ᵀW′q)` where `q` is row `l` of W and
/// the primes drop row `l`.
///
/// Expanding the H-subproblem gives `‖WᵀH‖² − 2·Tr(HᵀM)` plus constants; as a
/// function of one row `h` this is `2hᵀ(H′ᵀW′q − m)` plus constants, so the
/// update is an exact minimiser for that row.
pub fn dcc_row_update(l: usize, state: &ModelState, m_mat: &DenseMatrix) -> Result<Vec<f64>> {
    let (bits, n) = state.h.shape();
    if l >= bits || m_mat.shape() != (bits, n) || state.w.rows() != bits {
        return Err(Error::usage(format!(
            "dcc_row_update: row {l}, H {:?}, M {:?}, W {:?}",
            state.h.shape(),
            m_mat.shape(),
            state.w.shape()
        )));
    }
    let q = state.w.row(l);
    let coupling: Vec<f64> = (0..bits).map(|k| dot(q, state.w.row(k))).collect();
    Ok(row_update(l, &state.h, &coupling, m_mat.row(l)))
}

/// `coupling[k] = q_l · q_k`; entry `l` is ignored.
fn row_update(l: usize, h: &DenseMatrix, coupling: &[f64], m_row: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; h.cols()];
    for (k, &g) in coupling.iter().enumerate() {
        if k == l || g == 0.0 {
            continue;
        }
        for (zi, &hk) in z.iter_mut().zip(h.row(k)) {
            *zi += g * hk;
        }
    }
    m_row.iter().zip(&z).map(|(&m, &zi)| sgn(m - zi)).collect()
}

/// Discrete cyclic coordinate descent over the bit rows of H.
pub fn h_step(state: &ModelState, v: &DenseMatrix, y: &DenseMatrix, hp: &Hyperparams) -> Result<DenseMatrix> {
    h_step_inner(state, v, y, hp, true)
}

fn h_step_inner(
    state: &ModelState,
    v: &DenseMatrix,
    y: &DenseMatrix,
    hp: &Hyperparams,
    stop_when_stable: bool,
) -> Result<DenseMatrix> {
    state.check(v, y)?;
    let m_mat = coupling_matrix(state, v, y, hp)?;
    let g = gram(&state.w);
    let mut h = state.h.clone();
    for _ in 0..hp.dcc_sweeps {
        let mut changed = false;
        for l in 0..h.rows() {
            let new_row = row_update(l, &h, g.row(l), m_mat.row(l));
            if new_row.as_slice() != h.row(l) {
                changed = true;
                h.row_mut(l).copy_from_slice(&new_row);
            }
        }
        if stop_when_stable && !changed {
            break;
        }
    }
    Ok(h)
}

/// `P = (VVᵀ + λI)⁻¹VHᵀ`, the ridge regression from features to codes.
pub fn p_step(h: &DenseMatrix, v: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    PStep::new(v, lambda)?.solve(h)
}

/// P-step with the factorisation of `VVᵀ + λI` kept across iterations.
pub struct PStep<'a> {
    v: &'a DenseMatrix,
    chol: Cholesky,
}

impl<'a> PStep<'a> {
    pub fn new(v: &'a DenseMatrix, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::usage(format!("p_step: lambda must be > 0, got {lambda}")));
        }
        let chol = Cholesky::new(&gram(v).add_diagonal(lambda))?;
        Ok(Self { v, chol })
    }

    pub fn solve(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        if h.cols() != self.v.cols() {
            return Err(Error::usage(format!(
                "p_step: H has {} columns, V has {}",
                h.cols(),
                self.v.cols()
            )));
        }
        self.chol.solve(&matmul_nt(self.v, h)?)
    }
}

/// Out-of-sample codes `sgn(pᵀx)`, L×k.
pub fn encode(p: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if p.rows() != x.rows() {
        return Err(Error::usage(format!(
            "encode: projection expects {}-dimensional inputs, got {}",
            p.rows(),
            x.rows()
        )));
    }
    Ok(sign_matrix(&matmul_tn(p, x)?))
}

/// Random ±1 initial codes, `sgn` of i.i.d. standard normals.
pub fn initial_codes(bits: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = SeededRng::new(seed);
    DenseMatrix::from_fn(bits, n, |_, _| sgn(rng.gaussian()))
}

/// Knobs that do not change the optimisation problem, only how long it runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainControl {
    /// Stop on small relative decrease and skip DCC sweeps once H is stable.
    /// Turning this off runs exactly `max_outer × dcc_sweeps`, for timing.
    pub early_stop: bool,
}

impl Default for TrainControl {
    fn default() -> Self {
        Self { early_stop: true }
    }
}

pub fn train(v: &DenseMatrix, y: &DenseMatrix, hp: &Hyperparams) -> Result<(TrainedModel, ModelState, TrainReport)> {
    train_with(v, y, hp, TrainControl::default())
}

pub fn train_with(
    v: &DenseMatrix,
    y: &DenseMatrix,
    hp: &Hyperparams,
    control: TrainControl,
) -> Result<(TrainedModel, ModelState, TrainReport)> {
    hp.validate()?;
    if v.cols() != y.cols() {
        return Err(Error::usage(format!(
            "features have {} samples, labels have {}",
            v.cols(),
            y.cols()
        )));
    }
    if v.cols() == 0 {
        return Err(Error::usage("cannot train on an empty dataset"));
    }

    let pstep = PStep::new(v, hp.p_ridge()).map_err(|e| e.context("initial P-step"))?;
    let h = initial_codes(hp.bits, v.cols(), hp.seed);
    let p = pstep.solve(&h).map_err(|e| e.context("initial P-step"))?;
    let w = w_step(&h, y, hp).map_err(|e| e.context("initial W-step"))?;
    let mut state = ModelState { w, p, h };
    let mut trace = vec![objective(&state, v, y, hp)?];
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=hp.max_outer {
        let ctx = |step: &str| format!("iteration {it}, {step}");
        state.w = w_step(&state.h, y, hp).map_err(|e| e.context(ctx("W-step")))?;
        state.h = h_step_inner(&state, v, y, hp, control.early_stop)
            .map_err(|e| e.context(ctx("H-step")))?;
        state.p = pstep.solve(&state.h).map_err(|e| e.context(ctx("P-step")))?;
        let obj = objective(&state, v, y, hp)?;
        let prev = *trace.last().unwrap();
        trace.push(obj);
        iterations = it;
        let rel = if prev.abs() > 0.0 { (prev - obj) / prev.abs() } else { 0.0 };
        if rel < hp.rel_tol {
            converged = true;
            if control.early_stop {
                break;
            }
        }
    }

    let model = TrainedModel::new(state.p.clone(), None, hp.clone())?;
    let report = TrainReport {
        objective_trace: trace,
        iterations_run: iterations,
        converged,
    };
    Ok((model, state, report))
}
