//! Block updates, the BSUM inner loop, the PDD outer loop and the
//! exterior-penalty wrapper.
//!
//! The inner loop cycles δ → F → W → Q → φ, each block minimizing either
//! the augmented Lagrangian itself (δ, W) or a tight convex upper bound of
//! it (F, Q, φ). The outer loop either takes a dual step on Ψ or shrinks the
//! penalty parameter ρ, depending on how far `Q` still is from `FW`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    al_value_weighted, beampattern_mse, beampattern_of, secrecy_gap, secrecy_rate,
    BeamformerState, ObjectiveWeights, SteeringGrid,
};
use crate::numerics::{frobenius_sq, hermitian_eig, max_abs, unit_phase, CMatrix, CVector, Complex64};
use crate::scenario::{desired_beampattern, ChannelSet, DesiredBeampattern, PenaltyMode, SystemConfig};
use crate::surrogates::{
    build_f_update_terms, build_phi_quadratic, build_q_surrogate, phi_linear_target,
    radar_gram_lambda_max,
};

/// Condition number of `FᴴF` above which the digital update is regularized.
const COND_LIMIT: f64 = 1e12;
/// Relative ridge added to `FᴴF` when regularizing.
const RIDGE: f64 = 1e-10;
/// Target accuracy of the power bisection.
const POWER_TOL: f64 = 1e-6;
/// Doublings allowed while bracketing the power multiplier.
const MAX_BRACKET_DOUBLINGS: usize = 60;
/// ChaCha stream used for the initial point, disjoint from the channel streams.
const INIT_STREAM: u64 = 16;

/// Structural switches that distinguish the architecture variants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverMode {
    /// Keep `F` at its initial value (fully-digital architectures).
    pub fixed_analog: bool,
    /// Drop the IRS: zero its channels and leave φ untouched.
    pub no_irs: bool,
    /// Leave δ untouched (the radar term carries no weight).
    pub skip_delta: bool,
    /// Constrain `F` to the block-diagonal sub-connected pattern.
    pub subconnected: bool,
}

/// Everything a solve reads but never modifies.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub ch: &'a ChannelSet,
    pub desired: &'a DesiredBeampattern,
    pub grid: &'a SteeringGrid,
    pub cfg: &'a SystemConfig,
    pub mode: SolverMode,
    /// Current objective weights. The escalating penalty mode scales the
    /// radar weight between rounds.
    pub weights: ObjectiveWeights,
    gram_lambda_max: f64,
}

impl<'a> Problem<'a> {
    pub fn new(
        ch: &'a ChannelSet,
        desired: &'a DesiredBeampattern,
        grid: &'a SteeringGrid,
        cfg: &'a SystemConfig,
        mode: SolverMode,
    ) -> Result<Self> {
        cfg.validate()?;
        ch.validate(cfg)?;
        if grid.n_tx() != cfg.n_tx || grid.len() != desired.values.len() {
            return Err(Error::Dimension(format!(
                "grid of {} angles for N_t = {} against {} desired samples (config N_t = {})",
                grid.len(),
                grid.n_tx(),
                desired.values.len(),
                cfg.n_tx
            )));
        }
        if mode.subconnected && cfg.n_tx % cfg.n_rf != 0 {
            return Err(Error::Config(format!(
                "sub-connected arrays need n_rf ({}) to divide n_tx ({})",
                cfg.n_rf, cfg.n_tx
            )));
        }
        if mode.fixed_analog && cfg.n_rf != cfg.n_tx {
            return Err(Error::Config(format!(
                "a fixed analog precoder needs n_rf = n_tx, got {} and {}",
                cfg.n_rf, cfg.n_tx
            )));
        }
        Ok(Problem {
            ch,
            desired,
            grid,
            cfg,
            mode,
            weights: ObjectiveWeights::from_mu(cfg.mu),
            gram_lambda_max: radar_gram_lambda_max(grid)?,
        })
    }

    /// `λ_max` of the unweighted radar Gram matrix.
    pub fn gram_lambda_max(&self) -> f64 {
        self.gram_lambda_max
    }

    pub fn al(&self, state: &BeamformerState) -> Result<f64> {
        al_value_weighted(state, self.ch, self.desired, self.grid, self.weights)
    }
}

/// One inner iteration (one full block cycle).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerRecord {
    pub outer_idx: usize,
    pub inner_idx: usize,
    /// AL value when the cycle started.
    pub al_start: f64,
    /// AL value after δ, F, W, Q and φ, in that order.
    pub block_values: [f64; 5],
    /// `‖Q − FW‖_∞` after the cycle.
    pub violation: f64,
    pub rho: f64,
    pub kappa: f64,
    /// Set on the last cycle of an outer iteration whose dual step fired.
    pub dual_updated: bool,
    /// `‖Q‖²_F` after the cycle.
    pub q_power: f64,
    /// Power multiplier found by the Q update (zero when inactive).
    pub q_alpha: f64,
    /// Largest `||x| − 1|` over the free entries of `F` and φ.
    pub modulus_error: f64,
}

impl InnerRecord {
    /// AL value at the end of the cycle.
    pub fn al_value(&self) -> f64 {
        self.block_values[4]
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterRecord {
    pub outer_idx: usize,
    pub violation: f64,
    /// ρ used during this iteration's inner solve.
    pub rho: f64,
    /// κ compared against the violation.
    pub kappa: f64,
    pub dual_updated: bool,
    pub inner_iters: usize,
}

/// One exterior-penalty round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyRecord {
    pub round: usize,
    /// Beampattern MSE of `FW` at the end of the round.
    pub radar_penalty: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverTrace {
    pub inner: Vec<InnerRecord>,
    pub outer: Vec<OuterRecord>,
    pub penalty: Vec<PenaltyRecord>,
    /// Number of digital updates that needed a ridge.
    pub regularized_solves: usize,
}

impl SolverTrace {
    /// Largest relative AL increase over all block updates (zero or
    /// negative when every block descended).
    pub fn worst_block_increase(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for rec in &self.inner {
            let mut prev = rec.al_start;
            for &v in &rec.block_values {
                worst = worst.max((v - prev) / prev.abs().max(f64::MIN_POSITIVE));
                prev = v;
            }
        }
        worst
    }

    /// Writes one row per inner iteration.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            outer_idx: usize,
            inner_idx: usize,
            al_value: f64,
            violation: f64,
            rho: f64,
            kappa: f64,
            dual_updated: bool,
        }
        let mut w = csv::Writer::from_writer(out);
        for rec in &self.inner {
            w.serialize(Row {
                outer_idx: rec.outer_idx,
                inner_idx: rec.inner_idx,
                al_value: rec.al_value(),
                violation: rec.violation,
                rho: rec.rho,
                kappa: rec.kappa,
                dual_updated: rec.dual_updated,
            })?;
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}

/// Summary numbers of a finished solve, all evaluated at `FW`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveMetrics {
    pub secrecy_gap: f64,
    pub secrecy_rate: f64,
    pub beampattern_mse: f64,
    pub iterations_inner_total: usize,
    pub iterations_outer: usize,
    pub penalty_rounds: usize,
    pub final_violation: f64,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub state: BeamformerState,
    pub trace: SolverTrace,
    pub metrics: SolveMetrics,
    /// Whether `‖Q − FW‖_∞ ≤ eps_stop` was reached (and, in escalating
    /// mode, the radar target).
    pub converged: bool,
}

/// Closed-form δ: `Σ P_d(θ_k) P_b(θ_k) / Σ P_d(θ_k)²`.
pub fn update_delta(q: &CMatrix, desired: &DesiredBeampattern, grid: &SteeringGrid) -> Result<f64> {
    if desired.values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "desired pattern has {} samples, grid has {}",
            desired.values.len(),
            grid.len()
        )));
    }
    let energy = desired.energy();
    if energy == 0.0 {
        return Err(Error::ZeroDesiredPattern);
    }
    let pattern = beampattern_of(q, grid);
    let num: f64 = pattern.iter().zip(&desired.values).map(|(p, d)| p * d).sum();
    Ok(num / energy)
}

/// MM step on the analog precoder. Every row is replaced by the conjugate
/// unit-phase of its alignment target.
pub fn update_analog(
    f_anchor: &CMatrix,
    w: &CMatrix,
    q: &CMatrix,
    psi: &CMatrix,
    rho: f64,
) -> Result<CMatrix> {
    if f_anchor.ncols() != w.nrows() || f_anchor.nrows() != q.nrows() {
        return Err(Error::Dimension(format!(
            "F {:?}, W {:?}, Q {:?}",
            f_anchor.shape(),
            w.shape(),
            q.shape()
        )));
    }
    let terms = build_f_update_terms(w, q, psi, rho)?;
    let mut f = CMatrix::zeros(f_anchor.nrows(), f_anchor.ncols());
    for i in 0..f.nrows() {
        let target = terms.row_target(f_anchor, i);
        for (j, t) in target.iter().enumerate() {
            f[(i, j)] = unit_phase(*t).conj();
        }
    }
    Ok(f)
}

/// Output of [`update_digital`].
#[derive(Debug, Clone)]
pub struct DigitalUpdate {
    pub w: CMatrix,
    /// `FᴴF` was too ill-conditioned and a ridge was added.
    pub regularized: bool,
}

/// Least-squares digital precoder `W = (FᴴF)⁻¹Fᴴ(ρΨ + Q)`.
pub fn update_digital(f: &CMatrix, q: &CMatrix, psi: &CMatrix, rho: f64) -> Result<DigitalUpdate> {
    if f.nrows() != q.nrows() || q.shape() != psi.shape() {
        return Err(Error::Dimension(format!(
            "F {:?}, Q {:?}, Ψ {:?}",
            f.shape(),
            q.shape(),
            psi.shape()
        )));
    }
    let gram = f.adjoint() * f;
    let rhs = f.adjoint() * (psi.scale(rho) + q);
    let eig = hermitian_eig(&gram)?;
    let (lo, hi) = (eig.min(), eig.max());
    let regularized = !(lo > 0.0) || hi / lo > COND_LIMIT;
    let system = if regularized {
        let n = gram.nrows();
        let ridge = RIDGE * gram.trace().re / n as f64;
        &gram + CMatrix::identity(n, n).scale(ridge.max(f64::MIN_POSITIVE))
    } else {
        gram
    };
    let chol = Cholesky::new(system)
        .ok_or_else(|| Error::Numerical("FᴴF is not positive definite".into()))?;
    Ok(DigitalUpdate {
        w: chol.solve(&rhs),
        regularized,
    })
}

/// Output of [`solve_q_closed_form`].
#[derive(Debug, Clone)]
pub struct QUpdate {
    pub q: CMatrix,
    /// Multiplier of the power constraint.
    pub alpha: f64,
    pub power: f64,
}

/// Minimizer of `Re Tr{QᴴZ₁Q} + Re Tr{Qᴴ(Z₃ + Ψ)} + ‖Q − FW‖²/(2ρ)` subject
/// to `‖Q‖² ≤ P_max`:
///
/// `Q = (2ρZ₁ + (1 + 2ρα)I)⁻¹(FW − ρZ₃ − ρΨ)`, with α found by bisection.
pub fn solve_q_closed_form(
    z1: &CMatrix,
    z3: &CMatrix,
    fw: &CMatrix,
    psi: &CMatrix,
    rho: f64,
    p_max: f64,
) -> Result<QUpdate> {
    let n = z1.nrows();
    if z3.shape() != fw.shape() || fw.shape() != psi.shape() || fw.nrows() != n {
        return Err(Error::Dimension(format!(
            "Z₁ {:?}, Z₃ {:?}, FW {:?}, Ψ {:?}",
            z1.shape(),
            z3.shape(),
            fw.shape(),
            psi.shape()
        )));
    }
    if !(rho > 0.0) {
        return Err(Error::Contract(format!("ρ must be positive, got {rho}")));
    }
    let eig = hermitian_eig(&z1.scale(2.0 * rho))?;
    let pi = &eig.eigenvalues;
    if pi.iter().any(|&p| p + 1.0 <= 0.0) {
        return Err(Error::Numerical(
            "2ρZ₁ + I is not positive definite".into(),
        ));
    }
    let r = fw - z3.scale(rho) - psi.scale(rho);
    let y = eig.eigenvectors.adjoint() * r;
    // Δ_nn = ‖row n of UᴴR‖²
    let weights: Vec<f64> = y
        .row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let power_at = |alpha: f64| -> f64 {
        weights
            .iter()
            .zip(pi.iter())
            .map(|(d, p)| d / (p + 1.0 + 2.0 * rho * alpha).powi(2))
            .sum()
    };
    let assemble = |alpha: f64| -> CMatrix {
        let mut scaled = y.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= Complex64::from(1.0 / (pi[i] + 1.0 + 2.0 * rho * alpha));
        }
        &eig.eigenvectors * scaled
    };

    let unconstrained = power_at(0.0);
    if unconstrained <= p_max {
        let q = assemble(0.0);
        let power = frobenius_sq(&q);
        return Ok(QUpdate { q, alpha: 0.0, power });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while power_at(hi) > p_max {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Numerical(format!(
                "power multiplier not bracketed after {MAX_BRACKET_DOUBLINGS} doublings"
            )));
        }
    }
    // `hi` always stays on the feasible side.
    for _ in 0..200 {
        let p_hi = power_at(hi);
        if p_max - p_hi <= 1e-3 * POWER_TOL * p_max.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power_at(mid) > p_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = assemble(hi);
    let mut power = frobenius_sq(&q);
    let q = if power > p_max {
        // Rounding in the reconstruction; pull back onto the ball.
        let q = q.scale((p_max / power).sqrt());
        power = frobenius_sq(&q);
        q
    } else {
        q
    };
    Ok(QUpdate { q, alpha: hi, power })
}

/// MM step on the auxiliary precoder.
pub fn update_q(state: &BeamformerState, prob: &Problem<'_>) -> Result<QUpdate> {
    let sur = build_q_surrogate(
        &state.q_aux,
        state.delta,
        &state.phi,
        prob.ch,
        prob.desired,
        prob.grid,
        prob.weights,
        prob.cfg.p_max,
        prob.gram_lambda_max,
    )?;
    solve_q_closed_form(
        &sur.z1,
        &sur.z3,
        &state.fw(),
        &state.psi_dual,
        state.rho,
        prob.cfg.p_max,
    )
}

/// MM step on the IRS phases for precoder `q`.
pub fn update_phi(phi_anchor: &CVector, ch: &ChannelSet, q: &CMatrix) -> Result<CVector> {
    let pq = build_phi_quadratic(ch, q)?;
    let t = phi_linear_target(&pq, phi_anchor)?;
    Ok(t.map(unit_phase))
}

/// Zeroes `F` outside the block-diagonal sub-connected pattern: column `j`
/// keeps rows `j·N_t/N_RF .. (j+1)·N_t/N_RF`.
pub fn project_subconnected(f: &CMatrix, n_rf: usize) -> Result<CMatrix> {
    let n_tx = f.nrows();
    if n_rf == 0 || f.ncols() != n_rf || n_tx % n_rf != 0 {
        return Err(Error::Config(format!(
            "cannot split {n_tx} antennas over {n_rf} RF chains ({} columns)",
            f.ncols()
        )));
    }
    let block = n_tx / n_rf;
    Ok(CMatrix::from_fn(n_tx, n_rf, |i, j| {
        if i / block == j {
            f[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// `N × N` DFT matrix with unit-modulus entries `exp(−j2πmn/N)`.
pub fn dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |m, k| {
        Complex64::from_polar(1.0, -2.0 * PI * (m * k) as f64 / n as f64)
    })
}

/// Largest `||x| − 1|` over the nonzero entries of `F` and all of φ.
fn modulus_error(f: &CMatrix, phi: &CVector) -> f64 {
    let f_err = f
        .iter()
        .filter(|z| z.norm() > 0.5)
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    phi.iter().map(|z| (z.norm() - 1.0).abs()).fold(f_err, f64::max)
}

/// Seeded starting point.
///
/// `F` has random phases (a DFT matrix when held fixed), φ is all ones, `W`
/// is the least-squares fit of `FW` to a random `Q₀` with `‖Q₀‖² = P_max`,
/// `Q = FW`, Ψ = 0, δ is the closed-form optimum and ρ = ρ₀.
pub fn init_state(prob: &Problem<'_>, seed: u64) -> Result<BeamformerState> {
    let cfg = prob.cfg;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);

    let mut f = if prob.mode.fixed_analog {
        dft_matrix(cfg.n_tx)
    } else {
        CMatrix::from_fn(cfg.n_tx, cfg.n_rf, |_, _| {
            Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
        })
    };
    if prob.mode.subconnected {
        f = project_subconnected(&f, cfg.n_rf)?;
    }

    let q0 = CMatrix::from_fn(cfg.n_tx, cfg.n_streams, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(x, y)
    });
    let q0 = q0.scale((cfg.p_max / frobenius_sq(&q0)).sqrt());
    let zeros = CMatrix::zeros(cfg.n_tx, cfg.n_streams);
    let mut w = update_digital(&f, &q0, &zeros, cfg.hyper.rho0)?.w;
    let mut q = &f * &w;
    let power = frobenius_sq(&q);
    if power > cfg.p_max {
        let s = (cfg.p_max / power).sqrt();
        w = w.scale(s);
        q = q.scale(s);
    }
    let delta = if prob.mode.skip_delta {
        0.0
    } else {
        update_delta(&q, prob.desired, prob.grid)?
    };
    Ok(BeamformerState {
        delta,
        f_analog: f,
        w_digital: w,
        q_aux: q,
        phi: CVector::from_element(prob.ch.n_irs(), Complex64::new(1.0, 0.0)),
        psi_dual: zeros,
        rho: cfg.hyper.rho0,
    })
}

/// Result of one block cycle.
struct CycleOutcome {
    block_values: [f64; 5],
    q_alpha: f64,
    regularized: bool,
}

fn block_cycle(state: &mut BeamformerState, prob: &Problem<'_>) -> Result<CycleOutcome> {
    let mut values = [0.0; 5];

    if !prob.mode.skip_delta {
        state.delta = update_delta(&state.q_aux, prob.desired, prob.grid)?;
    }
    values[0] = prob.al(state)?;

    if !prob.mode.fixed_analog {
        let mut f = update_analog(
            &state.f_analog,
            &state.w_digital,
            &state.q_aux,
            &state.psi_dual,
            state.rho,
        )?;
        if prob.mode.subconnected {
            f = project_subconnected(&f, prob.cfg.n_rf)?;
        }
        state.f_analog = f;
    }
    values[1] = prob.al(state)?;

    let dig = update_digital(&state.f_analog, &state.q_aux, &state.psi_dual, state.rho)?;
    state.w_digital = dig.w;
    values[2] = prob.al(state)?;

    let qu = update_q(state, prob)?;
    state.q_aux = qu.q;
    values[3] = prob.al(state)?;

    if !prob.mode.no_irs {
        state.phi = update_phi(&state.phi, prob.ch, &state.q_aux)?;
    }
    values[4] = prob.al(state)?;

    Ok(CycleOutcome {
        block_values: values,
        q_alpha: qu.alpha,
        regularized: dig.regularized,
    })
}

/// Repeats block cycles until the relative AL change drops to `eps` or
/// `max_inner_iters` is hit. Returns the number of cycles.
pub fn bsum_inner(
    state: &mut BeamformerState,
    prob: &Problem<'_>,
    eps: f64,
    outer_idx: usize,
    kappa: f64,
    trace: &mut SolverTrace,
) -> Result<usize> {
    let mut al_old = prob.al(state)?;
    for inner_idx in 0..prob.cfg.hyper.max_inner_iters {
        let out = block_cycle(state, prob)?;
        let al_new = out.block_values[4];
        if !al_new.is_finite() {
            return Err(Error::Numerical(format!(
                "augmented Lagrangian became {al_new} at outer {outer_idx}, inner {inner_idx}"
            )));
        }
        if out.regularized {
            trace.regularized_solves += 1;
        }
        trace.inner.push(InnerRecord {
            outer_idx,
            inner_idx,
            al_start: al_old,
            block_values: out.block_values,
            violation: max_abs(&state.residual()),
            rho: state.rho,
            kappa,
            dual_updated: false,
            q_power: frobenius_sq(&state.q_aux),
            q_alpha: out.q_alpha,
            modulus_error: modulus_error(&state.f_analog, &state.phi),
        });
        let change = (al_old - al_new).abs();
        let scale = al_old.abs();
        let done = if scale > 0.0 { change / scale <= eps } else { change <= eps };
        al_old = al_new;
        if done {
            return Ok(inner_idx + 1);
        }
    }
    Ok(prob.cfg.hyper.max_inner_iters)
}

/// Outer PDD loop run in place on `state`. Returns whether the equality
/// constraint reached `eps_stop`.
pub fn pdd_outer(
    state: &mut BeamformerState,
    prob: &Problem<'_>,
    trace: &mut SolverTrace,
) -> Result<bool> {
    let h = &prob.cfg.hyper;
    let mut kappa = h.kappa0;
    let mut eps = h.eps_inner;
    let outer_base = trace.outer.len();
    for k in 0..h.max_outer_iters {
        let outer_idx = outer_base + k;
        let inner_iters = bsum_inner(state, prob, eps, outer_idx, kappa, trace)?;
        let resid = state.residual();
        let error = max_abs(&resid);
        let rho_used = state.rho;
        let dual_updated = error <= kappa;
        if dual_updated {
            state.psi_dual += resid.scale(1.0 / state.rho);
            if let Some(last) = trace.inner.last_mut() {
                last.dual_updated = true;
            }
        } else {
            state.rho *= h.c_shrink;
        }
        trace.outer.push(OuterRecord {
            outer_idx,
            violation: error,
            rho: rho_used,
            kappa,
            dual_updated,
            inner_iters,
        });
        kappa = (0.9 * error).max(h.eps_stop);
        eps = (0.9 * error).max(h.eps_stop);
        if error <= h.eps_stop {
            return Ok(true);
        }
    }
    Ok(false)
}

fn finish(
    state: BeamformerState,
    trace: SolverTrace,
    prob: &Problem<'_>,
    converged: bool,
    started: Instant,
) -> Result<SolveReport> {
    let fw = state.fw();
    let metrics = SolveMetrics {
        secrecy_gap: secrecy_gap(prob.ch, &state)?,
        secrecy_rate: secrecy_rate(prob.ch, &state)?,
        beampattern_mse: beampattern_mse(state.delta, &fw, prob.desired, prob.grid)?,
        iterations_inner_total: trace.inner.len(),
        iterations_outer: trace.outer.len(),
        penalty_rounds: trace.penalty.len().max(1),
        final_violation: max_abs(&state.residual()),
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok(SolveReport {
        state,
        trace,
        metrics,
        converged,
    })
}

/// Full solve from `state`.
///
/// In fixed-weight mode this is one PDD run at the configured μ. In
/// escalating mode the radar weight is multiplied by ς after every round
/// until the beampattern MSE of `FW` reaches `penalty_target` or the round
/// budget runs out.
pub fn exterior_penalty(prob: &Problem<'_>, mut state: BeamformerState) -> Result<SolveReport> {
    let started = Instant::now();
    let mut trace = SolverTrace::default();
    match prob.cfg.hyper.penalty_mode {
        PenaltyMode::FixedWeight => {
            let converged = pdd_outer(&mut state, prob, &mut trace)?;
            finish(state, trace, prob, converged, started)
        }
        PenaltyMode::Escalating => {
            let h = &prob.cfg.hyper;
            let base = ObjectiveWeights::from_mu(prob.cfg.mu);
            let mut multiplier = 1.0;
            let mut converged = false;
            let mut local = prob.clone();
            for round in 0..h.max_penalty_rounds {
                local.weights = ObjectiveWeights {
                    secrecy: base.secrecy,
                    radar: base.radar * multiplier,
                };
                let pdd_ok = pdd_outer(&mut state, &local, &mut trace)?;
                let penalty = beampattern_mse(state.delta, &state.fw(), prob.desired, prob.grid)?;
                trace.penalty.push(PenaltyRecord {
                    round,
                    radar_penalty: penalty,
                    multiplier,
                });
                if penalty <= h.penalty_target {
                    converged = pdd_ok;
                    break;
                }
                multiplier *= h.varsigma;
            }
            finish(state, trace, prob, converged, started)
        }
    }
}

/// Generates the desired pattern and grid for `cfg`, seeds the start point
/// and runs [`exterior_penalty`]. Channels are taken as given except that
/// the IRS links are zeroed when the mode drops the IRS.
pub fn solve(ch: &ChannelSet, cfg: &SystemConfig, mode: SolverMode, seed: u64) -> Result<SolveReport> {
    let desired = desired_beampattern(&cfg.targets, &cfg.angle_grid)?;
    let grid = SteeringGrid::new(&cfg.angle_grid, cfg.n_tx)?;
    let stripped;
    let ch = if mode.no_irs {
        stripped = ch.without_irs();
        &stripped
    } else {
        ch
    };
    let prob = Problem::new(ch, &desired, &grid, cfg, mode)?;
    let state = init_state(&prob, seed)?;
    exterior_penalty(&prob, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_channels;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_mat(rng: &mut impl Rng, r: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(r, k, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            n_tx: 6,
            n_rf: 3,
            n_streams: 2,
            n_irs: 8,
            n_bob: 2,
            n_eve: 2,
            ..SystemConfig::default()
        }
    }

    struct Fixture {
        cfg: SystemConfig,
        ch: ChannelSet,
        desired: DesiredBeampattern,
        grid: SteeringGrid,
    }

    fn fixture(cfg: SystemConfig, seed: u64) -> Fixture {
        let ch = generate_channels(&cfg, seed).unwrap();
        let desired = desired_beampattern(&cfg.targets, &cfg.angle_grid).unwrap();
        let grid = SteeringGrid::new(&cfg.angle_grid, cfg.n_tx).unwrap();
        Fixture { cfg, ch, desired, grid }
    }

    #[test]
    fn delta_examples() {
        let fx = fixture(small_cfg(), 1);
        let zero = CMatrix::zeros(6, 2);
        assert_eq!(update_delta(&zero, &fx.desired, &fx.grid).unwrap(), 0.0);
        let empty = DesiredBeampattern {
            targets: vec![],
            values: vec![0.0; fx.grid.len()],
        };
        assert!(matches!(
            update_delta(&zero, &empty, &fx.grid),
            Err(Error::ZeroDesiredPattern)
        ));
    }

    #[test]
    fn delta_exact_match_case() {
        // a single steering vector on a one-angle grid: P_b = N_t² · |w|²
        let grid = SteeringGrid::new(&[0.3], 4).unwrap();
        let desired = DesiredBeampattern {
            targets: vec![],
            values: vec![1.0],
        };
        let a = grid.steering.column(0).into_owned();
        let q = CMatrix::from_column_slice(4, 1, a.scale(0.5).as_slice());
        let d = update_delta(&q, &desired, &grid).unwrap();
        assert!((d - 0.25 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn analog_single_chain_aligns_with_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = rand_mat(&mut rng, 5, 1);
        let w = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let anchor = CMatrix::from_fn(5, 1, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * 6.0));
        let f = update_analog(&anchor, &w, &q, &CMatrix::zeros(5, 1), 0.5).unwrap();
        for i in 0..5 {
            assert!((f[(i, 0)] - unit_phase(q[(i, 0)])).norm() < 1e-12);
        }
    }

    #[test]
    fn analog_entries_are_unit_modulus_and_descend() {
        let fx = fixture(small_cfg(), 3);
        let prob = Problem::new(&fx.ch, &fx.desired, &fx.grid, &fx.cfg, SolverMode::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..30 {
            let mut s = init_state(&prob, seed).unwrap();
            s.q_aux = rand_mat(&mut rng, 6, 2).scale(0.3);
            s.psi_dual = rand_mat(&mut rng, 6, 2);
            let before = prob.al(&s).unwrap();
            s.f_analog = update_analog(&s.f_analog, &s.w_digital, &s.q_aux, &s.psi_dual, s.rho).unwrap();
            assert!(s.f_analog.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let after = prob.al(&s).unwrap();
            assert!(after <= before + 1e-8 * before.abs(), "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn digital_exact_fit_and_orthogonal_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = CMatrix::from_fn(6, 3, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * 6.0));
        let w0 = rand_mat(&mut rng, 3, 2);
        let q = &f * &w0;
        let out = update_digital(&f, &q, &CMatrix::zeros(6, 2), 0.3).unwrap();
        assert!(!out.regularized);
        assert!(frobenius_sq(&(&out.w - &w0)).sqrt() < 1e-10);

        let dft = dft_matrix(4);
        let q = rand_mat(&mut rng, 4, 2);
        let psi = rand_mat(&mut rng, 4, 2);
        let out = update_digital(&dft, &q, &psi, 0.2).unwrap();
        let expected = dft.adjoint() * (psi.scale(0.2) + &q) / c(4.0, 0.0);
        assert!(frobenius_sq(&(&out.w - expected)).sqrt() < 1e-12);
    }

    #[test]
    fn digital_regularizes_rank_deficient_f() {
        let col = CVector::from_element(4, c(1.0, 0.0));
        let f = CMatrix::from_columns(&[col.clone(), col]);
        let out = update_digital(&f, &CMatrix::identity(4, 1), &CMatrix::zeros(4, 1), 1.0).unwrap();
        assert!(out.regularized);
        assert!(out.w.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn q_closed_form_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fw = rand_mat(&mut rng, 4, 2);
        let z1 = CMatrix::zeros(4, 4);
        let z3 = CMatrix::zeros(4, 2);
        let psi = CMatrix::zeros(4, 2);
        let p = frobenius_sq(&fw);

        let out = solve_q_closed_form(&z1, &z3, &fw, &psi, 0.5, p * 2.0).unwrap();
        assert_eq!(out.alpha, 0.0);
        assert!(frobenius_sq(&(&out.q - &fw)) < 1e-24);

        let out = solve_q_closed_form(&z1, &z3, &fw, &psi, 0.5, p / 4.0).unwrap();
        assert!(out.alpha > 0.0);
        assert!((out.power - p / 4.0).abs() <= 1e-6);
        assert!(out.power <= p / 4.0 + 1e-12);
        assert!(frobenius_sq(&(&out.q - fw.scale(0.5))).sqrt() < 1e-5);
    }

    #[test]
    fn q_power_is_decreasing_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = rand_mat(&mut rng, 5, 5);
        let z1 = &b * b.adjoint();
        let z3 = rand_mat(&mut rng, 5, 2);
        let fw = rand_mat(&mut rng, 5, 2);
        let psi = rand_mat(&mut rng, 5, 2);
        // a tighter budget needs a larger multiplier
        let mut prev = 0.0;
        for p in [10.0, 1.0, 0.1, 0.01, 0.001] {
            let out = solve_q_closed_form(&z1, &z3, &fw, &psi, 0.3, p).unwrap();
            assert!(out.power <= p + 1e-12);
            assert!(out.alpha >= prev);
            if out.alpha > 0.0 {
                assert!((out.power - p).abs() <= 1e-6);
                assert!(out.alpha > prev);
            }
            prev = out.alpha;
        }
    }

    #[test]
    fn phi_descends_secrecy_objective() {
        let fx = fixture(small_cfg(), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let q = rand_mat(&mut rng, 6, 2);
            let phi0 = CVector::from_fn(8, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * 6.0));
            let obj = |phi: &CVector| {
                let eff = crate::metrics::effective_channels(&fx.ch, phi).unwrap();
                let (b, e) = crate::metrics::snr_pair(&eff, &q);
                e - b
            };
            let phi1 = update_phi(&phi0, &fx.ch, &q).unwrap();
            assert!(phi1.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let (o0, o1) = (obj(&phi0), obj(&phi1));
            assert!(o1 <= o0 + 1e-8 * o0.abs().max(1e-300), "{o0} -> {o1}");
        }
    }

    #[test]
    fn subconnected_projection_examples() {
        let f = CMatrix::from_element(4, 1, c(0.0, 1.0));
        assert_eq!(project_subconnected(&f, 1).unwrap(), f);
        let f = CMatrix::from_element(4, 2, c(1.0, 0.0));
        let p = project_subconnected(&f, 2).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                let kept = (i < 2 && j == 0) || (i >= 2 && j == 1);
                assert_eq!(p[(i, j)], if kept { c(1.0, 0.0) } else { c(0.0, 0.0) });
            }
        }
        assert!(project_subconnected(&CMatrix::zeros(5, 2), 2).is_err());
    }

    #[test]
    fn init_is_deterministic_and_feasible() {
        let fx = fixture(small_cfg(), 8);
        let prob = Problem::new(&fx.ch, &fx.desired, &fx.grid, &fx.cfg, SolverMode::default()).unwrap();
        let a = init_state(&prob, 42).unwrap();
        let b = init_state(&prob, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_state(&prob, 43).unwrap());
        assert!(frobenius_sq(&a.q_aux) <= fx.cfg.p_max + 1e-12);
        assert!(max_abs(&a.residual()) < 1e-12);
        assert!(prob.al(&a).unwrap().is_finite());
    }

    #[test]
    fn dft_is_unit_modulus_and_orthogonal() {
        let f = dft_matrix(5);
        assert!(f.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        let g = f.adjoint() * &f;
        assert!(frobenius_sq(&(g - CMatrix::identity(5, 5).scale(5.0))).sqrt() < 1e-12);
    }

    #[test]
    fn small_solve_descends_and_converges() {
        let fx = fixture(small_cfg(), 9);
        let report = solve(&fx.ch, &fx.cfg, SolverMode::default(), 9).unwrap();
        assert!(report.trace.worst_block_increase() <= 1e-8);
        assert!(report.converged, "violation {}", report.metrics.final_violation);
        assert!(report.metrics.final_violation <= fx.cfg.hyper.eps_stop);
        let mut buf = Vec::new();
        report.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("outer_idx,inner_idx,al_value,violation,rho,kappa,dual_updated\n"));
        assert_eq!(text.lines().count(), report.trace.inner.len() + 1);
    }

    #[test]
    fn forced_shrink_path_scales_rho() {
        let mut cfg = small_cfg();
        cfg.hyper.kappa0 = 1e-300;
        cfg.hyper.eps_stop = 1e-300;
        cfg.hyper.max_outer_iters = 3;
        cfg.hyper.max_inner_iters = 3;
        let fx = fixture(cfg, 10);
        let report = solve(&fx.ch, &fx.cfg, SolverMode::default(), 1).unwrap();
        let outer = &report.trace.outer;
        assert_eq!(outer.len(), 3);
        assert!(!report.converged);
        for pair in outer.windows(2) {
            if !pair[0].dual_updated {
                assert!((pair[1].rho - 0.7 * pair[0].rho).abs() < 1e-15);
            }
        }
        assert!(!outer[0].dual_updated);
    }
}
