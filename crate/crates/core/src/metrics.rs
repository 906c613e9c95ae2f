//! Evaluation quantities: effective channels, secrecy gap and rate,
//! transmit beampattern, beampattern MSE and the augmented Lagrangian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{diag, frobenius_sq, re_inner, CMatrix, CVector};
use crate::scenario::{steering_matrix, ChannelSet, DesiredBeampattern, SystemConfig};

/// All optimization variables of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    /// Radar scaling factor δ.
    pub delta: f64,
    /// Analog precoder `F`, `N_t × N_RF`, unit-modulus (zero outside the
    /// block pattern for sub-connected arrays).
    pub f_analog: CMatrix,
    /// Digital precoder `W`, `N_RF × M`.
    pub w_digital: CMatrix,
    /// Auxiliary copy `Q` of `FW`, `N_t × M`.
    pub q_aux: CMatrix,
    /// IRS reflection coefficients φ.
    pub phi: CVector,
    /// Dual variable Ψ of `Q = FW`.
    pub psi_dual: CMatrix,
    /// Penalty parameter ρ.
    pub rho: f64,
}

impl BeamformerState {
    /// The hybrid precoder `FW`.
    pub fn fw(&self) -> CMatrix {
        &self.f_analog * &self.w_digital
    }

    /// `Q − FW`.
    pub fn residual(&self) -> CMatrix {
        &self.q_aux - self.fw()
    }

    pub fn beamformer(&self, form: BeamformerForm) -> CMatrix {
        match form {
            BeamformerForm::Hybrid => self.fw(),
            BeamformerForm::Auxiliary => self.q_aux.clone(),
        }
    }
}

/// Which matrix stands in for the transmit precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformerForm {
    /// `FW`, used for reporting.
    Hybrid,
    /// `Q`, used inside the solver.
    Auxiliary,
}

/// Angle grid together with its steering vectors.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    pub angles: Vec<f64>,
    /// `N_t × K`, column `k` is `a(θ_k)`.
    pub steering: CMatrix,
}

impl SteeringGrid {
    pub fn new(angles: &[f64], n_tx: usize) -> Result<Self> {
        Ok(SteeringGrid {
            angles: angles.to_vec(),
            steering: steering_matrix(angles, n_tx)?,
        })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn n_tx(&self) -> usize {
        self.steering.nrows()
    }
}

/// `H_b(Φ)` and `H_e(Φ)`.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    pub h_bob: CMatrix,
    pub h_eve: CMatrix,
}

/// `H_b(Φ) = H_ab + H_ib Φ H_ai` and `H_e(Φ) = H_ae + H_ie Φ H_ai`.
pub fn effective_channels(ch: &ChannelSet, phi: &CVector) -> Result<EffectiveChannels> {
    if phi.len() != ch.h_ai.nrows()
        || ch.h_ib.ncols() != phi.len()
        || ch.h_ie.ncols() != phi.len()
        || ch.h_ab.ncols() != ch.h_ai.ncols()
        || ch.h_ae.ncols() != ch.h_ai.ncols()
        || ch.h_ab.nrows() != ch.h_ib.nrows()
        || ch.h_ae.nrows() != ch.h_ie.nrows()
    {
        return Err(Error::Dimension(format!(
            "IRS of {} elements does not fit the channel set",
            phi.len()
        )));
    }
    let reflected = diag(phi) * &ch.h_ai;
    Ok(EffectiveChannels {
        h_bob: &ch.h_ab + &ch.h_ib * &reflected,
        h_eve: &ch.h_ae + &ch.h_ie * &reflected,
    })
}

/// Received SNRs `(‖H_b X‖², ‖H_e X‖²)` for precoder `X` under unit noise.
pub fn snr_pair(eff: &EffectiveChannels, x: &CMatrix) -> (f64, f64) {
    (frobenius_sq(&(&eff.h_bob * x)), frobenius_sq(&(&eff.h_eve * x)))
}

/// `[SNR_b − SNR_e]⁺` evaluated at `FW`.
pub fn secrecy_gap(ch: &ChannelSet, state: &BeamformerState) -> Result<f64> {
    let eff = effective_channels(ch, &state.phi)?;
    let (b, e) = snr_pair(&eff, &state.fw());
    Ok((b - e).max(0.0))
}

/// `[log₂(1 + SNR_b) − log₂(1 + SNR_e)]⁺`.
pub fn secrecy_rate_from_snr(snr_b: f64, snr_e: f64) -> f64 {
    ((1.0 + snr_b).log2() - (1.0 + snr_e).log2()).max(0.0)
}

/// Secrecy rate evaluated at `FW`.
pub fn secrecy_rate(ch: &ChannelSet, state: &BeamformerState) -> Result<f64> {
    let eff = effective_channels(ch, &state.phi)?;
    let (b, e) = snr_pair(&eff, &state.fw());
    Ok(secrecy_rate_from_snr(b, e))
}

/// `P(θ_k) = a(θ_k)ᴴ X Xᴴ a(θ_k)` for every grid angle.
pub fn beampattern_of(x: &CMatrix, grid: &SteeringGrid) -> Vec<f64> {
    let proj = grid.steering.adjoint() * x;
    proj.row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

pub fn transmit_beampattern(
    state: &BeamformerState,
    grid: &SteeringGrid,
    form: BeamformerForm,
) -> Vec<f64> {
    beampattern_of(&state.beamformer(form), grid)
}

/// `(1/K) Σ_k |δ P_d(θ_k) − P(θ_k)|²` for precoder `x`.
pub fn beampattern_mse(
    delta: f64,
    x: &CMatrix,
    desired: &DesiredBeampattern,
    grid: &SteeringGrid,
) -> Result<f64> {
    if desired.values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "desired pattern has {} samples, grid has {}",
            desired.values.len(),
            grid.len()
        )));
    }
    let p = beampattern_of(x, grid);
    Ok(mse_from_pattern(delta, &p, &desired.values))
}

pub(crate) fn mse_from_pattern(delta: f64, pattern: &[f64], desired: &[f64]) -> f64 {
    let k = pattern.len() as f64;
    pattern
        .iter()
        .zip(desired)
        .map(|(p, d)| (delta * d - p).powi(2))
        .sum::<f64>()
        / k
}

/// Weights of the secrecy and radar parts of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub secrecy: f64,
    pub radar: f64,
}

impl ObjectiveWeights {
    /// `(μ, 1 − μ)`.
    pub fn from_mu(mu: f64) -> Self {
        ObjectiveWeights {
            secrecy: mu,
            radar: 1.0 - mu,
        }
    }
}

/// Term-by-term breakdown of the augmented Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlTerms {
    /// `‖H_e(Φ)Q‖² − ‖H_b(Φ)Q‖²` (unweighted).
    pub secrecy: f64,
    /// Beampattern MSE of `Q` at δ (unweighted).
    pub radar: f64,
    /// `Re Tr{Ψᴴ(Q − FW)}`.
    pub dual: f64,
    /// `‖Q − FW‖²_F`.
    pub penalty: f64,
}

impl AlTerms {
    pub fn value(&self, w: ObjectiveWeights, rho: f64) -> f64 {
        w.secrecy * self.secrecy + w.radar * self.radar + self.dual + self.penalty / (2.0 * rho)
    }
}

pub fn al_terms(
    state: &BeamformerState,
    ch: &ChannelSet,
    desired: &DesiredBeampattern,
    grid: &SteeringGrid,
) -> Result<AlTerms> {
    let eff = effective_channels(ch, &state.phi)?;
    let (b, e) = snr_pair(&eff, &state.q_aux);
    let radar = beampattern_mse(state.delta, &state.q_aux, desired, grid)?;
    let resid = state.residual();
    Ok(AlTerms {
        secrecy: e - b,
        radar,
        dual: re_inner(&state.psi_dual, &resid),
        penalty: frobenius_sq(&resid),
    })
}

/// Augmented Lagrangian with explicit objective weights.
pub fn al_value_weighted(
    state: &BeamformerState,
    ch: &ChannelSet,
    desired: &DesiredBeampattern,
    grid: &SteeringGrid,
    weights: ObjectiveWeights,
) -> Result<f64> {
    Ok(al_terms(state, ch, desired, grid)?.value(weights, state.rho))
}

/// `μ(‖H_e Q‖² − ‖H_b Q‖²) + (1−μ) MSE(δ, Q) + Re Tr{Ψᴴ(Q − FW)} + ‖Q − FW‖²/(2ρ)`.
pub fn al_value(
    state: &BeamformerState,
    ch: &ChannelSet,
    desired: &DesiredBeampattern,
    grid: &SteeringGrid,
    cfg: &SystemConfig,
) -> Result<f64> {
    al_value_weighted(state, ch, desired, grid, ObjectiveWeights::from_mu(cfg.mu))
}
