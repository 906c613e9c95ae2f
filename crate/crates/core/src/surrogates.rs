//! Majorization surrogates and their closed-form minimizers.
//!
//! Every block of the inner loop that is not solved exactly (the analog
//! precoder `F`, the auxiliary precoder `Q` and the IRS phases φ) is updated
//! by minimizing a convex upper bound that touches the true objective at the
//! current iterate. The builders here assemble those bounds.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metrics::{beampattern_of, effective_channels, ObjectiveWeights, SteeringGrid};
use crate::numerics::{
    hadamard, max_eigenvalue, max_eigenvalue_real, re_inner, unit_phase, CMatrix,
    CVector, Complex64,
};
use crate::scenario::{ChannelSet, DesiredBeampattern};

/// Slack allowed when checking `s_max ≥ λ_max(T)`.
const MAJORIZER_SLACK: f64 = 1e-9;

/// Value of the quadratic upper bound of `xᴴ T x` built at `x_anchor` with
/// curvature `s_max·I`:
///
/// `s‖x‖² + 2Re{xᴴ(T − sI)x₀} + x₀ᴴ(sI − T)x₀`.
pub fn quadratic_majorizer_value(
    t: &CMatrix,
    s_max: f64,
    x: &CVector,
    x_anchor: &CVector,
) -> Result<f64> {
    if !t.is_square() || t.nrows() != x.len() || x.len() != x_anchor.len() {
        return Err(Error::Dimension(format!(
            "majorizer of {:?} with vectors of length {} and {}",
            t.shape(),
            x.len(),
            x_anchor.len()
        )));
    }
    let lmax = max_eigenvalue(t)?;
    if s_max < lmax - MAJORIZER_SLACK * lmax.abs().max(1.0) {
        return Err(Error::Contract(format!(
            "curvature {s_max} is below λ_max = {lmax}"
        )));
    }
    let t_x0 = t * x_anchor;
    let shifted = &t_x0 - x_anchor.scale(s_max);
    Ok(s_max * x.norm_squared() + 2.0 * x.dotc(&shifted).re - x_anchor.dotc(&shifted).re)
}

/// Minimizer of `−2Re{fᴴ k}` over unit-modulus `f`: `f = exp(j·arg k)`,
/// with `arg 0 := 0`.
pub fn unit_modulus_linear_min(k: &CVector) -> CVector {
    k.map(unit_phase)
}

/// Ingredients of the row-wise surrogate for the analog precoder.
#[derive(Debug, Clone)]
pub struct FUpdateTerms {
    /// `G = WWᴴ`.
    pub g: CMatrix,
    /// `D = W(Q + ρΨ)ᴴ`; column `i` pairs with row `i` of `F`.
    pub d: CMatrix,
    pub lambda_max_g: f64,
}

pub fn build_f_update_terms(
    w: &CMatrix,
    q: &CMatrix,
    psi: &CMatrix,
    rho: f64,
) -> Result<FUpdateTerms> {
    if q.shape() != psi.shape() || w.ncols() != q.ncols() {
        return Err(Error::Dimension(format!(
            "W {:?}, Q {:?}, Ψ {:?}",
            w.shape(),
            q.shape(),
            psi.shape()
        )));
    }
    if !(rho > 0.0) {
        return Err(Error::Contract(format!("ρ must be positive, got {rho}")));
    }
    let g = w * w.adjoint();
    let target = q + psi.scale(rho);
    let d = w * target.adjoint();
    let lambda_max_g = max_eigenvalue(&g)?;
    Ok(FUpdateTerms { g, d, lambda_max_g })
}

impl FUpdateTerms {
    /// Alignment target of row `i`: `(λI − G) f_iᴴ + d_i`, where `f_i` is
    /// row `i` of the anchor. The minimizing row is the conjugate of the
    /// unit-phase of this vector.
    pub fn row_target(&self, f_anchor: &CMatrix, i: usize) -> CVector {
        let g_col: CVector = f_anchor.row(i).adjoint();
        let shifted = g_col.scale(self.lambda_max_g) - &self.g * &g_col;
        shifted + self.d.column(i)
    }

    /// `Σ_i f_i G f_iᴴ − 2Re{f_i d_i}`, which equals
    /// `‖FW − (Q + ρΨ)‖² − ‖Q + ρΨ‖²`.
    pub fn exact_value(&self, f: &CMatrix) -> f64 {
        (0..f.nrows())
            .map(|i| {
                let g_col: CVector = f.row(i).adjoint();
                let quad = g_col.dotc(&(&self.g * &g_col)).re;
                let lin = g_col.dotc(&self.d.column(i).into_owned()).re;
                quad - 2.0 * lin
            })
            .sum()
    }

    /// The row-wise quadratic upper bound of [`Self::exact_value`] built at
    /// `f_anchor`.
    pub fn surrogate_value(&self, f: &CMatrix, f_anchor: &CMatrix) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..f.nrows() {
            let x: CVector = f.row(i).adjoint();
            let x0: CVector = f_anchor.row(i).adjoint();
            let quad = quadratic_majorizer_value(&self.g, self.lambda_max_g, &x, &x0)?;
            let lin = x.dotc(&self.d.column(i).into_owned()).re;
            total += quad - 2.0 * lin;
        }
        Ok(total)
    }
}

/// `λ_max` of the Gram matrix `Σ_k vec(A_k) vec(A_k)ᴴ`, `A_k = a_k a_kᴴ`.
///
/// Computed through the `K × K` matrix `[|a_kᴴ a_l|²]`, which shares its
/// nonzero spectrum with the `N_t² × N_t²` Gram matrix.
pub fn radar_gram_lambda_max(grid: &SteeringGrid) -> Result<f64> {
    let cross = grid.steering.adjoint() * &grid.steering;
    let k = grid.len();
    let gram = DMatrix::from_fn(k, k, |i, j| cross[(i, j)].norm_sqr());
    max_eigenvalue_real(&gram)
}

/// `A_k = a(θ_k) a(θ_k)ᴴ` for every grid angle.
pub fn radar_outer_products(grid: &SteeringGrid) -> Vec<CMatrix> {
    grid.steering
        .column_iter()
        .map(|a| &a * a.adjoint())
        .collect()
}

/// Explicit `C = (w/K) Σ_k vec(A_k) vec(A_k)ᴴ` (size `N_t² × N_t²`).
pub fn radar_gram_matrix(grid: &SteeringGrid, radar_weight: f64) -> CMatrix {
    let n2 = grid.n_tx() * grid.n_tx();
    let mut c = CMatrix::zeros(n2, n2);
    for a in radar_outer_products(grid) {
        let v = crate::numerics::vec(&a);
        c += &v * v.adjoint();
    }
    c.scale(radar_weight / grid.len() as f64)
}

/// `A diag(weights) Aᴴ = Σ_k weights_k a_k a_kᴴ`.
fn weighted_outer_sum(grid: &SteeringGrid, weights: &[f64]) -> CMatrix {
    let mut scaled = grid.steering.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::from(weights[k]);
    }
    scaled * grid.steering.adjoint()
}

/// Convex quadratic upper bound of the `Q`-dependent part of the objective,
/// `w_s(‖H_e Q‖² − ‖H_b Q‖²) + w_r·MSE(δ, Q)`, at the anchor `Q^k`:
///
/// `Re Tr{Qᴴ Z₁ Q} + Re Tr{Qᴴ Z₃} + const`.
///
/// The quartic radar term is majorized through `C ⪯ λ_max(C) I`; the
/// remaining `λ_max(C)‖QQᴴ − Q^k Q^kᴴ‖²` is bounded on the power ball by
/// `s‖Q − Q^k‖²` with `s = λ_max(C)(√P_max + ‖Q^k‖₂)²`, which enters as `C₂ = sI`
/// and a matching `+sI` in `Z₁`. Concave parts (`Z₂`) are linearized.
#[derive(Debug, Clone)]
pub struct QSurrogate {
    pub z1: CMatrix,
    pub z2: CMatrix,
    pub z3: CMatrix,
    pub c1: CMatrix,
    pub c2: CMatrix,
    pub b_t: CMatrix,
    pub lambda_max_c: f64,
    /// Curvature `s` of the isotropic bound.
    pub curvature: f64,
}

impl QSurrogate {
    /// `Re Tr{Qᴴ Z₁ Q} + Re Tr{Qᴴ Z₃}`.
    pub fn value(&self, q: &CMatrix) -> f64 {
        re_inner(q, &(&self.z1 * q)) + re_inner(q, &self.z3)
    }
}

/// Exact `Q`-dependent part `w_s(‖H_e Q‖² − ‖H_b Q‖²) + w_r·MSE(δ, Q)`.
pub fn q_exact_objective(
    q: &CMatrix,
    delta: f64,
    phi: &CVector,
    ch: &ChannelSet,
    desired: &DesiredBeampattern,
    grid: &SteeringGrid,
    weights: ObjectiveWeights,
) -> Result<f64> {
    let eff = effective_channels(ch, phi)?;
    let (b, e) = crate::metrics::snr_pair(&eff, q);
    let mse = crate::metrics::beampattern_mse(delta, q, desired, grid)?;
    Ok(weights.secrecy * (e - b) + weights.radar * mse)
}

/// Spectral norm `‖Q‖₂`.
fn spectral_norm(q: &CMatrix) -> Result<f64> {
    Ok(max_eigenvalue(&(q.adjoint() * q))?.max(0.0).sqrt())
}

#[allow(clippy::too_many_arguments)]
pub fn build_q_surrogate(
    q_anchor: &CMatrix,
    delta: f64,
    phi: &CVector,
    ch: &ChannelSet,
    desired: &DesiredBeampattern,
    grid: &SteeringGrid,
    weights: ObjectiveWeights,
    p_max: f64,
    gram_lambda_max: f64,
) -> Result<QSurrogate> {
    let n = grid.n_tx();
    if q_anchor.nrows() != n || ch.n_tx() != n || desired.values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "Q {:?} against N_t = {n}, channels with N_t = {}, {} desired samples on {} angles",
            q_anchor.shape(),
            ch.n_tx(),
            desired.values.len(),
            grid.len()
        )));
    }
    let eff = effective_channels(ch, phi)?;
    let k = grid.len() as f64;
    let wr = weights.radar;

    let anchor_pattern = beampattern_of(q_anchor, grid);
    let c1_weights: Vec<f64> = anchor_pattern.iter().map(|t| 2.0 * wr * t / k).collect();
    let bt_weights: Vec<f64> = desired
        .values
        .iter()
        .map(|pd| 2.0 * wr * delta * pd / k)
        .collect();
    let c1 = weighted_outer_sum(grid, &c1_weights);
    let b_t = weighted_outer_sum(grid, &bt_weights);

    let lambda_max_c = wr / k * gram_lambda_max;
    let radius = p_max.sqrt() + spectral_norm(q_anchor)?;
    let curvature = lambda_max_c * radius * radius;
    let c2 = CMatrix::identity(n, n).scale(curvature);

    let hb = eff.h_bob.adjoint() * &eff.h_bob;
    let he = eff.h_eve.adjoint() * &eff.h_eve;
    let z1 = he.scale(weights.secrecy) + &c1 + &c2;
    let z2 = -hb.scale(weights.secrecy) - &c2 - &b_t;
    let z3 = z2.adjoint().scale(2.0) * q_anchor;
    Ok(QSurrogate {
        z1,
        z2,
        z3,
        c1,
        c2,
        b_t,
        lambda_max_c,
        curvature,
    })
}

/// Quadratic form of the secrecy objective in the IRS phases:
///
/// `‖H_e(Φ)Q‖² − ‖H_b(Φ)Q‖² = φᴴ((B − M) ⊙ Eᵀ)φ + 2Re{φᴴ(j* − o*)} + const`.
#[derive(Debug, Clone)]
pub struct PhiQuadratic {
    /// `B = H_ieᴴ H_ie`.
    pub b_mat: CMatrix,
    /// `E = H_ai Q Qᴴ H_aiᴴ`.
    pub e_mat: CMatrix,
    /// `j = diag(H_ai Q Qᴴ H_aeᴴ H_ie)`.
    pub j_vec: CVector,
    /// `M = H_ibᴴ H_ib`.
    pub m_mat: CMatrix,
    /// `o = diag(H_ai Q Qᴴ H_abᴴ H_ib)`.
    pub o_vec: CVector,
    /// `P = B − M`.
    pub p_mat: CMatrix,
}

/// `diag(L Rᴴ)` without forming the product.
fn diag_of_product_adjoint(l: &CMatrix, r: &CMatrix) -> CVector {
    CVector::from_fn(l.nrows(), |n, _| {
        l.row(n)
            .iter()
            .zip(r.row(n).iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    })
}

pub fn build_phi_quadratic(ch: &ChannelSet, q: &CMatrix) -> Result<PhiQuadratic> {
    if ch.n_tx() != q.nrows() {
        return Err(Error::Dimension(format!(
            "Q has {} rows, channels have N_t = {}",
            q.nrows(),
            ch.n_tx()
        )));
    }
    let aq = &ch.h_ai * q;
    let e_mat = &aq * aq.adjoint();
    let b_mat = ch.h_ie.adjoint() * &ch.h_ie;
    let m_mat = ch.h_ib.adjoint() * &ch.h_ib;
    let j_vec = diag_of_product_adjoint(&aq, &(ch.h_ie.adjoint() * (&ch.h_ae * q)));
    let o_vec = diag_of_product_adjoint(&aq, &(ch.h_ib.adjoint() * (&ch.h_ab * q)));
    let p_mat = &b_mat - &m_mat;
    Ok(PhiQuadratic {
        b_mat,
        e_mat,
        j_vec,
        m_mat,
        o_vec,
        p_mat,
    })
}

impl PhiQuadratic {
    /// `(B − M) ⊙ Eᵀ`, the matrix of the quadratic in φ.
    pub fn hessian(&self) -> CMatrix {
        hadamard(&self.p_mat, &self.e_mat.transpose()).expect("B, M and E share one shape")
    }

    /// `j* − o*`.
    pub fn linear(&self) -> CVector {
        (&self.j_vec - &self.o_vec).map(|z| z.conj())
    }

    /// `φᴴ((B − M) ⊙ Eᵀ)φ + 2Re{φᴴ(j* − o*)}`.
    pub fn objective(&self, phi: &CVector) -> f64 {
        let h = self.hessian();
        phi.dotc(&(&h * phi)).re + 2.0 * phi.dotc(&self.linear()).re
    }

    /// Value of the quadratic upper bound of [`Self::objective`] at `phi`
    /// built at `phi_anchor`.
    pub fn surrogate_value(&self, phi: &CVector, phi_anchor: &CVector) -> Result<f64> {
        let h = self.hessian();
        let lmax = max_eigenvalue(&h)?;
        Ok(quadratic_majorizer_value(&h, lmax, phi, phi_anchor)?
            + 2.0 * phi.dotc(&self.linear()).re)
    }
}

/// Alignment target `t = (λ_max(Pʜ) I − Pʜ)φ₀ + (o* − j*)` with
/// `Pʜ = (B − M) ⊙ Eᵀ`. The updated phases are `exp(j·arg t)`.
pub fn phi_linear_target(pq: &PhiQuadratic, phi_anchor: &CVector) -> Result<CVector> {
    if phi_anchor.len() != pq.p_mat.nrows() {
        return Err(Error::Dimension(format!(
            "φ of length {} for an IRS of {} elements",
            phi_anchor.len(),
            pq.p_mat.nrows()
        )));
    }
    let h = pq.hessian();
    let lmax = max_eigenvalue(&h)?;
    let shifted = phi_anchor.scale(lmax) - &h * phi_anchor;
    Ok(shifted - pq.linear())
}
