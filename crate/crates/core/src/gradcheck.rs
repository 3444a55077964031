//! Central-difference verification of the analytic gradients.
//!
//! Every trial draws its inputs from its own generator seeded with
//! `seed + trial_index`, so the report list does not depend on how trials are
//! scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{diagonal_ratio, lq_reduced, qr_reduced, LqFactors, QrFactors};
use crate::jvp::{lq_jvp, qr_jvp, Tangent};
use crate::lq_grad::{lq_backward, LqAdjoints};
use crate::matrix::{Matrix, Order, Shape};
use crate::qr_grad::{qr_backward, qr_backward_deep, qr_backward_walter, QrAdjoints};
use crate::random::{gaussian, trial_rng, TrialRng};
use crate::toolkit::frobenius_inner;

/// Absolute floor in the denominator of the elementwise relative error.
pub const ABS_FLOOR: f64 = 1e-8;
/// Default pass threshold for central-difference comparisons.
pub const DEFAULT_TOL: f64 = 1e-6;
pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const DUALITY_TOL: f64 = 1e-10;
pub const RECONSTRUCTION_TOL: f64 = 1e-13;
/// Orthogonality tolerance per row of `Q` (QR) or column of `Q` (LQ).
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Trials whose triangular factor exceeds this condition estimate are redrawn.
pub const CONDITION_GATE: f64 = 1e6;
pub const MAX_REGENERATIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "QR")]
    Qr,
    #[serde(rename = "LQ")]
    Lq,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Qr => "QR",
            Mode::Lq => "LQ",
        })
    }
}

/// Factors of either decomposition.
#[derive(Debug, Clone, PartialEq)]
pub enum Factors {
    Qr(QrFactors),
    Lq(LqFactors),
}

impl Factors {
    pub fn compute(mode: Mode, a: &Matrix) -> Result<Factors> {
        Ok(match mode {
            Mode::Qr => Factors::Qr(qr_reduced(a)?),
            Mode::Lq => Factors::Lq(lq_reduced(a)?),
        })
    }

    /// The orthogonal factor.
    pub fn orthogonal(&self) -> &Matrix {
        match self {
            Factors::Qr(f) => f.q(),
            Factors::Lq(f) => f.q(),
        }
    }

    /// `R` for QR, `L` for LQ.
    pub fn triangular(&self) -> &Matrix {
        match self {
            Factors::Qr(f) => f.r(),
            Factors::Lq(f) => f.l(),
        }
    }
}

/// Upstream adjoints for either decomposition.
#[derive(Debug, Clone, PartialEq)]
pub enum Adjoints {
    Qr(QrAdjoints),
    Lq(LqAdjoints),
}

impl Adjoints {
    /// Standard normal adjoints conforming to `f`.
    pub fn random(f: &Factors, rng: &mut TrialRng) -> Adjoints {
        match f {
            Factors::Qr(f) => {
                let q_bar = gaussian(rng, f.q().rows(), f.q().cols());
                let r_bar = gaussian(rng, f.r().rows(), f.r().cols());
                Adjoints::Qr(QrAdjoints::new(q_bar, r_bar).expect("gaussian draws are finite"))
            }
            Factors::Lq(f) => {
                let l_bar = gaussian(rng, f.l().rows(), f.l().cols());
                let q_bar = gaussian(rng, f.q().rows(), f.q().cols());
                Adjoints::Lq(LqAdjoints::new(l_bar, q_bar).expect("gaussian draws are finite"))
            }
        }
    }

    /// `Tr(Ōᵀ O) + Tr(T̄ᵀ T)` against the factors `f`: the adjoint-weighted
    /// linear functional whose gradient the backward pass computes.
    pub fn pair(&self, f: &Factors) -> Result<f64> {
        match (self, f) {
            (Adjoints::Qr(g), Factors::Qr(f)) => {
                Ok(frobenius_inner(g.q_bar(), f.q()) + frobenius_inner(g.r_bar(), f.r()))
            }
            (Adjoints::Lq(g), Factors::Lq(f)) => {
                Ok(frobenius_inner(g.l_bar(), f.l()) + frobenius_inner(g.q_bar(), f.q()))
            }
            _ => Err(mode_mismatch()),
        }
    }
}

fn mode_mismatch() -> Error {
    Error::InvalidInput("adjoints and factors belong to different decompositions".into())
}

/// Reverse-mode gradient for either decomposition.
pub fn backward(a: &Matrix, f: &Factors, g: &Adjoints) -> Result<Matrix> {
    match (f, g) {
        (Factors::Qr(f), Adjoints::Qr(g)) => qr_backward(a, f, g),
        (Factors::Lq(f), Adjoints::Lq(g)) => lq_backward(a, f, g),
        _ => Err(mode_mismatch()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// `Tr(Q̄ᵀ Q) + Tr(R̄ᵀ R)` (or `Tr(L̄ᵀ L) + Tr(Q̄ᵀ Q)`) for fixed adjoints.
    AdjointTrace,
    /// `½‖Q‖²_F`, constant for orthonormal `Q`.
    FrobeniusQ,
    /// `½‖R‖²_F` (or `½‖L‖²_F`), which equals `½‖A‖²_F`.
    FrobeniusR,
    /// `Σ a_ij`, a plain function of `A` with no factorization involved.
    SumEntries,
}

/// A scalar function of `A`, usually routed through a factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarLoss {
    kind: LossKind,
    mode: Mode,
    adjoints: Option<Adjoints>,
}

impl ScalarLoss {
    pub fn adjoint_trace(adjoints: Adjoints) -> Self {
        let mode = match adjoints {
            Adjoints::Qr(_) => Mode::Qr,
            Adjoints::Lq(_) => Mode::Lq,
        };
        ScalarLoss {
            kind: LossKind::AdjointTrace,
            mode,
            adjoints: Some(adjoints),
        }
    }

    pub fn frobenius_q(mode: Mode) -> Self {
        ScalarLoss {
            kind: LossKind::FrobeniusQ,
            mode,
            adjoints: None,
        }
    }

    pub fn frobenius_r(mode: Mode) -> Self {
        ScalarLoss {
            kind: LossKind::FrobeniusR,
            mode,
            adjoints: None,
        }
    }

    pub fn sum_entries() -> Self {
        ScalarLoss {
            kind: LossKind::SumEntries,
            mode: Mode::Qr,
            adjoints: None,
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn evaluate(&self, a: &Matrix) -> Result<f64> {
        let half_sq = |m: &Matrix| 0.5 * frobenius_inner(m, m);
        match self.kind {
            LossKind::SumEntries => Ok(a.as_slice().iter().sum()),
            LossKind::AdjointTrace => {
                let g = self
                    .adjoints
                    .as_ref()
                    .expect("adjoint trace carries adjoints");
                g.pair(&Factors::compute(self.mode, a)?)
            }
            LossKind::FrobeniusQ => Ok(half_sq(Factors::compute(self.mode, a)?.orthogonal())),
            LossKind::FrobeniusR => Ok(half_sq(Factors::compute(self.mode, a)?.triangular())),
        }
    }

    /// Analytic gradient: the backward pass seeded with this loss's adjoints.
    pub fn analytic_gradient(&self, a: &Matrix) -> Result<Matrix> {
        if self.kind == LossKind::SumEntries {
            return Ok(a.map(|_| 1.0));
        }
        let f = Factors::compute(self.mode, a)?;
        let seeded;
        let g = match self.kind {
            LossKind::AdjointTrace => self
                .adjoints
                .as_ref()
                .expect("adjoint trace carries adjoints"),
            LossKind::FrobeniusQ | LossKind::FrobeniusR => {
                let keep_q = self.kind == LossKind::FrobeniusQ;
                let pick = |m: &Matrix, keep: bool| {
                    if keep {
                        m.clone()
                    } else {
                        Matrix::zeros(m.rows(), m.cols())
                    }
                };
                seeded = match &f {
                    Factors::Qr(f) => {
                        Adjoints::Qr(QrAdjoints::new(pick(f.q(), keep_q), pick(f.r(), !keep_q))?)
                    }
                    Factors::Lq(f) => {
                        Adjoints::Lq(LqAdjoints::new(pick(f.l(), !keep_q), pick(f.q(), keep_q))?)
                    }
                };
                &seeded
            }
            LossKind::SumEntries => unreachable!(),
        };
        backward(a, &f, g)
    }
}

/// Default central-difference step `cbrt(ε) · (1 + max|A|)`.
pub fn default_step(a: &Matrix) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + a.max_abs())
}

/// Central differences of an arbitrary scalar function:
/// entry `(i, j)` is `(f(A + h e_ij) − f(A − h e_ij)) / 2h`.
pub fn central_difference<F>(f: F, a: &Matrix, h: f64) -> Result<Matrix>
where
    F: Fn(&Matrix) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step must be positive and finite, got {h}"
        )));
    }
    let (m, n) = a.dims();
    let mut grad = Matrix::zeros(m, n);
    let mut probe = a.clone();
    for i in 0..m {
        for j in 0..n {
            let orig = a[(i, j)];
            let at = |probe: &Matrix| {
                f(probe).map_err(|e| Error::PerturbationFailure {
                    row: i,
                    col: j,
                    source: Box::new(e),
                })
            };
            probe.set(i, j, orig + h);
            let plus = at(&probe)?;
            probe.set(i, j, orig - h);
            let minus = at(&probe)?;
            probe.set(i, j, orig);
            grad.set(i, j, (plus - minus) / (2.0 * h));
        }
    }
    Ok(grad)
}

/// Central-difference gradient of `loss` at `A`.
pub fn central_difference_grad(loss: &ScalarLoss, a: &Matrix, h: f64) -> Result<Matrix> {
    central_difference(|x| loss.evaluate(x), a, h)
}

/// Largest elementwise discrepancy between two equally shaped matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstEntry {
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Elementwise comparison: returns `(max relative error, max absolute
/// error, entry with the largest relative error)`, where the relative error
/// is `|a − n| / max(|a|, |n|, ABS_FLOOR)`.
pub fn compare(analytic: &Matrix, numeric: &Matrix) -> (f64, f64, WorstEntry) {
    assert_eq!(
        analytic.dims(),
        numeric.dims(),
        "compare: dimension mismatch"
    );
    let mut worst = WorstEntry {
        row: 0,
        col: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let (mut max_rel, mut max_abs) = (-1.0_f64, 0.0_f64);
    for i in 0..analytic.rows() {
        for j in 0..analytic.cols() {
            let (x, y) = (analytic[(i, j)], numeric[(i, j)]);
            let abs = (x - y).abs();
            let rel = abs / x.abs().max(y.abs()).max(ABS_FLOOR);
            max_abs = max_abs.max(abs);
            if rel > max_rel {
                max_rel = rel;
                worst = WorstEntry {
                    row: i,
                    col: j,
                    analytic: x,
                    numeric: y,
                };
            }
        }
    }
    (max_rel.max(0.0), max_abs, worst)
}

/// Outcome of one verification trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub shape: Shape,
    pub mode: Mode,
    pub loss_kind: String,
    pub seed: u64,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub fd_step: f64,
    pub analytic_norm: f64,
    pub passed: bool,
    pub per_entry_worst: WorstEntry,
}

/// A random input that factorizes with a triangular factor of condition at
/// most [`CONDITION_GATE`], together with its factors.
pub fn draw_trial_input(mode: Mode, shape: Shape, rng: &mut TrialRng) -> Result<(Matrix, Factors)> {
    for attempt in 0..=MAX_REGENERATIONS {
        let a = gaussian(rng, shape.m, shape.n);
        match Factors::compute(mode, &a) {
            Ok(f) if diagonal_ratio(f.triangular()) <= CONDITION_GATE => return Ok((a, f)),
            Ok(f) => log::debug!(
                "{mode} {shape}: regenerating input (attempt {attempt}, condition {:e})",
                diagonal_ratio(f.triangular())
            ),
            Err(e) => log::debug!("{mode} {shape}: regenerating input (attempt {attempt}, {e})"),
        }
    }
    Err(Error::GenerationFailure {
        attempts: MAX_REGENERATIONS + 1,
    })
}

fn run_trials<T, F>(trials: usize, seed: u64, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|i| trial(seed.wrapping_add(i)))
        .collect()
}

/// Compares the analytic gradient of the adjoint-trace loss with central
/// differences for `trials` random inputs and adjoints.
pub fn run_gradcheck(
    mode: Mode,
    shape: Shape,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<GradCheckReport>> {
    run_trials(trials, seed, |trial_seed| {
        let mut rng = trial_rng(trial_seed);
        let (a, f) = draw_trial_input(mode, shape, &mut rng)?;
        let g = Adjoints::random(&f, &mut rng);
        let analytic = backward(&a, &f, &g)?;
        let loss = ScalarLoss::adjoint_trace(g);
        let h = default_step(&a);
        let numeric = central_difference_grad(&loss, &a, h)?;
        let (max_rel, max_abs, worst) = compare(&analytic, &numeric);
        Ok(GradCheckReport {
            shape,
            mode,
            loss_kind: "adjoint_trace".into(),
            seed: trial_seed,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            fd_step: h,
            analytic_norm: analytic.frobenius_norm(),
            passed: max_rel <= tol,
            per_entry_worst: worst,
        })
    })
}

/// Relative Frobenius discrepancy between the two QR gradient formulations,
/// with the raw inputs exposed for callers that pick their own adjoints.
pub fn equivalence_discrepancy(
    f: &QrFactors,
    g: &QrAdjoints,
) -> Result<(f64, f64, Matrix, Matrix)> {
    let compact = qr_backward_deep(f, g)?;
    let masked = qr_backward_walter(f, g)?;
    let abs = compact.sub(&masked).frobenius_norm();
    let rel = if abs == 0.0 {
        0.0
    } else {
        abs / compact.frobenius_norm()
    };
    Ok((rel, abs, compact, masked))
}

/// Compares the compact QR gradient with the strictly-lower-mask form.
pub fn run_equivalence_check(
    shape: Shape,
    trials: usize,
    seed: u64,
) -> Result<Vec<GradCheckReport>> {
    if shape.order == Order::Wide {
        return Err(Error::InvalidDimension(format!(
            "equivalence check needs m >= n, got {shape}"
        )));
    }
    run_trials(trials, seed, |trial_seed| {
        let mut rng = trial_rng(trial_seed);
        let (_, f) = draw_trial_input(Mode::Qr, shape, &mut rng)?;
        let Adjoints::Qr(g) = Adjoints::random(&f, &mut rng) else {
            unreachable!("QR factors yield QR adjoints")
        };
        let Factors::Qr(f) = f else { unreachable!() };
        let (rel, abs, compact, masked) = equivalence_discrepancy(&f, &g)?;
        let (_, _, worst) = compare(&compact, &masked);
        Ok(GradCheckReport {
            shape,
            mode: Mode::Qr,
            loss_kind: "walter_equivalence".into(),
            seed: trial_seed,
            max_rel_error: rel,
            max_abs_error: abs,
            fd_step: 0.0,
            analytic_norm: compact.frobenius_norm(),
            passed: rel <= EQUIVALENCE_TOL,
            per_entry_worst: worst,
        })
    })
}

/// Both sides of `Tr(Āᵀ dA) = Tr(Ōᵀ dO) + Tr(T̄ᵀ dT)`: the reverse-mode
/// gradient paired with `dA`, and the adjoints paired with the JVP.
pub fn duality_sides(a: &Matrix, f: &Factors, g: &Adjoints, da: &Tangent) -> Result<(f64, f64)> {
    let grad = backward(a, f, g)?;
    let lhs = frobenius_inner(&grad, da.matrix());
    let rhs = match (f, g) {
        (Factors::Qr(f), Adjoints::Qr(g)) => {
            let t = qr_jvp(a, f, da)?;
            frobenius_inner(g.q_bar(), &t.dq) + frobenius_inner(g.r_bar(), &t.dr)
        }
        (Factors::Lq(f), Adjoints::Lq(g)) => {
            let t = lq_jvp(a, f, da)?;
            frobenius_inner(g.l_bar(), &t.dl) + frobenius_inner(g.q_bar(), &t.dq)
        }
        _ => return Err(mode_mismatch()),
    };
    Ok((lhs, rhs))
}

/// Checks the adjoint/tangent trace identity with random inputs, adjoints
/// and perturbation directions.
pub fn run_duality_check(
    mode: Mode,
    shape: Shape,
    trials: usize,
    seed: u64,
) -> Result<Vec<GradCheckReport>> {
    run_trials(trials, seed, |trial_seed| {
        let mut rng = trial_rng(trial_seed);
        let (a, f) = draw_trial_input(mode, shape, &mut rng)?;
        let g = Adjoints::random(&f, &mut rng);
        let da = Tangent::new(gaussian(&mut rng, shape.m, shape.n))?;
        let (lhs, rhs) = duality_sides(&a, &f, &g, &da)?;
        let abs = (lhs - rhs).abs();
        let rel = abs / (1.0 + lhs.abs());
        Ok(GradCheckReport {
            shape,
            mode,
            loss_kind: "trace_duality".into(),
            seed: trial_seed,
            max_rel_error: rel,
            max_abs_error: abs,
            fd_step: 0.0,
            analytic_norm: lhs.abs(),
            passed: rel <= DUALITY_TOL,
            per_entry_worst: WorstEntry {
                row: 0,
                col: 0,
                analytic: lhs,
                numeric: rhs,
            },
        })
    })
}

/// Reconstruction and orthogonality residuals of one factorization:
/// `(‖factors product − A‖_F / ‖A‖_F, ‖orthogonality defect‖_F)`.
pub fn forward_residuals(a: &Matrix, f: &Factors) -> (f64, f64) {
    let (product, gram) = match f {
        Factors::Qr(f) => (f.q().matmul(f.r()), f.q().tr_matmul(f.q())),
        Factors::Lq(f) => (f.l().matmul(f.q()), f.q().matmul_tr(f.q())),
    };
    let recon = product.sub(a).frobenius_norm() / a.frobenius_norm();
    let orth = gram.sub(&Matrix::identity(gram.rows())).frobenius_norm();
    (recon, orth)
}

/// Reconstruction and orthogonality of the forward factorization.
///
/// `max_rel_error` is the relative reconstruction residual and
/// `max_abs_error` the orthogonality residual; a trial passes when they are
/// within [`RECONSTRUCTION_TOL`] and `ORTHOGONALITY_TOL · m` (QR) or
/// `ORTHOGONALITY_TOL · n` (LQ).
pub fn run_forward_check(
    mode: Mode,
    shape: Shape,
    trials: usize,
    seed: u64,
) -> Result<Vec<GradCheckReport>> {
    run_trials(trials, seed, |trial_seed| {
        let mut rng = trial_rng(trial_seed);
        let (a, f) = draw_trial_input(mode, shape, &mut rng)?;
        let (recon, orth) = forward_residuals(&a, &f);
        let product = match &f {
            Factors::Qr(f) => f.q().matmul(f.r()),
            Factors::Lq(f) => f.l().matmul(f.q()),
        };
        let (_, _, worst) = compare(&a, &product);
        let orth_scale = match mode {
            Mode::Qr => shape.m,
            Mode::Lq => shape.n,
        } as f64;
        Ok(GradCheckReport {
            shape,
            mode,
            loss_kind: "forward_residuals".into(),
            seed: trial_seed,
            max_rel_error: recon,
            max_abs_error: orth,
            fd_step: 0.0,
            analytic_norm: a.frobenius_norm(),
            passed: recon <= RECONSTRUCTION_TOL && orth <= ORTHOGONALITY_TOL * orth_scale,
            per_entry_worst: worst,
        })
    })
}
