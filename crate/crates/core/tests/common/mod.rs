//! Oracles and probe suites shared by the integration tests and the
//! acceptance run. Every oracle here recomputes its answer by a route that
//! does not reuse the closed form it checks.

#![allow(dead_code)]

use isac_core::metrics::{
    al_value_weighted, beampattern_mse, beampattern_of, effective_channels, snr_pair,
    BeamformerState, ObjectiveWeights, SteeringGrid,
};
use isac_core::numerics::{frobenius_sq, max_abs, unit_phase, CMatrix, CVector, Complex64};
use isac_core::scenario::{
    desired_beampattern, generate_channels, ChannelSet, DesiredBeampattern, SystemConfig,
};
use isac_core::solver::{solve_q_closed_form, update_delta, update_digital};
use isac_core::surrogates::{
    build_f_update_terms, build_phi_quadratic, build_q_surrogate, q_exact_objective,
    radar_gram_lambda_max, unit_modulus_linear_min,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut impl Rng) -> Complex64 {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cgauss(rng))
}

pub fn cvec(rng: &mut impl Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| cgauss(rng))
}

pub fn unit_vec(rng: &mut impl Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    })
}

pub fn unit_mat(rng: &mut impl Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| {
        Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    })
}

pub fn hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = cmat(rng, n, n);
    (&a + a.adjoint()).scale(0.5)
}

/// Channels with unit-variance entries, so that the secrecy terms are of
/// order one instead of being swamped by path loss.
pub fn unit_channels(rng: &mut impl Rng, cfg: &SystemConfig) -> ChannelSet {
    ChannelSet {
        h_ab: cmat(rng, cfg.n_bob, cfg.n_tx),
        h_ae: cmat(rng, cfg.n_eve, cfg.n_tx),
        h_ai: cmat(rng, cfg.n_irs, cfg.n_tx),
        h_ib: cmat(rng, cfg.n_bob, cfg.n_irs),
        h_ie: cmat(rng, cfg.n_eve, cfg.n_irs),
    }
}

/// Small but complete problem set up for probing one block in isolation.
pub struct Instance {
    pub cfg: SystemConfig,
    pub ch: ChannelSet,
    pub desired: DesiredBeampattern,
    pub grid: SteeringGrid,
    pub state: BeamformerState,
    pub weights: ObjectiveWeights,
}

/// Random instance for `seed`: odd seeds use unit-variance channels,
/// even ones the path-loss model at the default geometry. The iterate is
/// random with `‖Q‖²` spread around `P_max`.
pub fn instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let mut cfg = SystemConfig::default();
    cfg.n_tx = r.random_range(2..=8);
    cfg.n_rf = r.random_range(1..=cfg.n_tx);
    cfg.n_streams = r.random_range(1..=cfg.n_rf);
    cfg.n_irs = r.random_range(1..=12);
    cfg.n_bob = r.random_range(1..=4);
    cfg.n_eve = r.random_range(1..=4);
    cfg.mu = r.random_range(0.0..=1.0);
    cfg.p_max = r.random_range(0.5..2.0);
    cfg.validate().expect("random instance config");
    let ch = if seed % 2 == 1 {
        unit_channels(&mut r, &cfg)
    } else {
        generate_channels(&cfg, seed).expect("channels")
    };
    let desired = desired_beampattern(&cfg.targets, &cfg.angle_grid).expect("pattern");
    let grid = SteeringGrid::new(&cfg.angle_grid, cfg.n_tx).expect("grid");
    let q = cmat(&mut r, cfg.n_tx, cfg.n_streams);
    let q = q.scale((cfg.p_max * r.random_range(0.2..1.5) / frobenius_sq(&q)).sqrt());
    let state = BeamformerState {
        delta: r.random_range(0.0..2.0),
        f_analog: unit_mat(&mut r, cfg.n_tx, cfg.n_rf),
        w_digital: cmat(&mut r, cfg.n_rf, cfg.n_streams).scale(0.3),
        q_aux: q,
        phi: unit_vec(&mut r, cfg.n_irs),
        psi_dual: cmat(&mut r, cfg.n_tx, cfg.n_streams).scale(r.random_range(0.0..0.5)),
        rho: 10f64.powf(r.random_range(-2.0..0.0)),
    };
    let weights = ObjectiveWeights::from_mu(cfg.mu);
    Instance {
        cfg,
        ch,
        desired,
        grid,
        state,
        weights,
    }
}

/// Outcome of one oracle or probe suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub cases: usize,
    pub failures: usize,
    /// Largest ratio of observed error to its tolerance (at most one when
    /// every case passed).
    pub worst: f64,
}

impl SuiteResult {
    fn new() -> Self {
        SuiteResult {
            cases: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, err: f64, tol: f64) {
        self.cases += 1;
        self.worst = self.worst.max(err / tol);
        if !(err <= tol) {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

// ---------------------------------------------------------------------------
// δ

/// Minimizes `MSE(δ)` by a coarse scan followed by golden-section search.
pub fn delta_oracle(q: &CMatrix, desired: &DesiredBeampattern, grid: &SteeringGrid) -> f64 {
    let mse = |d: f64| beampattern_mse(d, q, desired, grid).expect("mse");
    let top = beampattern_of(q, grid).into_iter().fold(0.0, f64::max) * 1.5 + 1e-12;
    let n = 400;
    let step = top / n as f64;
    let best = (0..=n)
        .map(|i| i as f64 * step)
        .min_by(|a, b| mse(*a).total_cmp(&mse(*b)))
        .unwrap();
    let (mut a, mut b) = ((best - step).max(0.0), best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (mse(c), mse(d));
    for _ in 0..200 {
        if b - a <= 1e-15 * top {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = mse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = mse(d);
        }
    }
    0.5 * (a + b)
}

pub fn delta_suite(instances: u64, tol: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    for i in 0..instances {
        let inst = instance(10_000 + i);
        let closed = update_delta(&inst.state.q_aux, &inst.desired, &inst.grid).unwrap();
        let oracle = delta_oracle(&inst.state.q_aux, &inst.desired, &inst.grid);
        out.record((closed - oracle).abs(), tol);
    }
    out
}

// ---------------------------------------------------------------------------
// unit-modulus linear minimization

fn linear_objective(f: &CVector, k: &CVector) -> f64 {
    -2.0 * f.dotc(k).re
}

/// Minimizes `−2Re{fᴴk}` over phases on a grid of spacing `step`. The
/// objective is a sum of per-entry terms, so scanning each entry on its own
/// grid gives the minimum over the full product grid.
pub fn unit_modulus_oracle(k: &CVector, step: f64) -> f64 {
    let n_grid = (std::f64::consts::TAU / step).ceil() as usize;
    k.iter()
        .map(|kn| {
            (0..n_grid)
                .map(|j| {
                    let f = Complex64::from_polar(1.0, j as f64 * step);
                    -2.0 * (f.conj() * kn).re
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

pub fn unit_modulus_suite(instances: u64, step: f64, slack: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    for i in 0..instances {
        let mut r = rng(20_000 + i);
        let n = r.random_range(1..=4);
        let mut k = cvec(&mut r, n).scale(r.random_range(0.1..10.0));
        if i % 10 == 0 {
            k[0] = Complex64::new(0.0, 0.0);
        }
        let f = unit_modulus_linear_min(&k);
        let closed = linear_objective(&f, &k);
        let oracle = unit_modulus_oracle(&k, step);
        out.record(closed - oracle, slack);
    }
    out
}

// ---------------------------------------------------------------------------
// Q

/// Solves the Q subproblem by dense LU solves and a bisection on the power
/// multiplier, without any eigendecomposition.
pub fn q_oracle(
    z1: &CMatrix,
    z3: &CMatrix,
    fw: &CMatrix,
    psi: &CMatrix,
    rho: f64,
    p_max: f64,
) -> CMatrix {
    let n = z1.nrows();
    let rhs = fw - z3.scale(rho) - psi.scale(rho);
    let at = |alpha: f64| {
        let a = z1.scale(2.0 * rho) + CMatrix::identity(n, n).scale(1.0 + 2.0 * rho * alpha);
        a.lu().solve(&rhs).expect("nonsingular")
    };
    let q0 = at(0.0);
    if frobenius_sq(&q0) <= p_max {
        return q0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while frobenius_sq(&at(hi)) > p_max {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if frobenius_sq(&at(mid)) > p_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

pub fn q_suite(instances: u64, tol: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    for i in 0..instances {
        let inst = instance(30_000 + i);
        let s = &inst.state;
        let lam = radar_gram_lambda_max(&inst.grid).unwrap();
        let sur = build_q_surrogate(
            &s.q_aux,
            s.delta,
            &s.phi,
            &inst.ch,
            &inst.desired,
            &inst.grid,
            inst.weights,
            inst.cfg.p_max,
            lam,
        )
        .unwrap();
        // Alternate between targets inside and far outside the power ball so
        // both the inactive and the active branch are exercised.
        let mut r = rng(31_000 + i);
        let fw = cmat(&mut r, inst.cfg.n_tx, inst.cfg.n_streams)
            .scale(if i % 2 == 0 { 0.05 } else { 3.0 });
        let closed =
            solve_q_closed_form(&sur.z1, &sur.z3, &fw, &s.psi_dual, s.rho, inst.cfg.p_max)
                .unwrap();
        let oracle = q_oracle(&sur.z1, &sur.z3, &fw, &s.psi_dual, s.rho, inst.cfg.p_max);
        out.record(max_abs(&(&closed.q - &oracle)), tol);
    }
    out
}

/// Q updates whose target lies far outside the power ball, so the power
/// multiplier is always active. Records `|‖Q‖² − P_max|`.
pub fn active_power_suite(instances: u64, tol: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    for i in 0..instances {
        let inst = instance(35_000 + i);
        let s = &inst.state;
        let lam = radar_gram_lambda_max(&inst.grid).unwrap();
        let sur = build_q_surrogate(
            &s.q_aux,
            s.delta,
            &s.phi,
            &inst.ch,
            &inst.desired,
            &inst.grid,
            inst.weights,
            inst.cfg.p_max,
            lam,
        )
        .unwrap();
        let mut r = rng(36_000 + i);
        // Grow the target until the unconstrained minimizer leaves the ball;
        // a stiff majorizer can otherwise pull it back inside.
        let n = inst.cfg.n_tx;
        let stiff = sur.z1.scale(2.0 * s.rho) + CMatrix::identity(n, n);
        let mut fw = cmat(&mut r, n, inst.cfg.n_streams).scale(10.0);
        for _ in 0..12 {
            let rhs = &fw - sur.z3.scale(s.rho) - s.psi_dual.scale(s.rho);
            let free = stiff.clone().lu().solve(&rhs).expect("nonsingular");
            if frobenius_sq(&free) > 4.0 * inst.cfg.p_max {
                break;
            }
            fw = fw.scale(10.0);
        }
        let up = solve_q_closed_form(&sur.z1, &sur.z3, &fw, &s.psi_dual, s.rho, inst.cfg.p_max)
            .unwrap();
        assert!(up.alpha > 0.0, "instance {i} did not activate the power constraint");
        out.record((frobenius_sq(&up.q) - inst.cfg.p_max).abs(), tol);
    }
    out
}

// ---------------------------------------------------------------------------
// W

/// Central-difference gradient of the augmented Lagrangian in the real and
/// imaginary parts of every entry of `W`, evaluated at the digital update.
pub fn digital_gradient_norm(inst: &Instance, h: f64) -> f64 {
    let mut state = inst.state.clone();
    state.w_digital = update_digital(&state.f_analog, &state.q_aux, &state.psi_dual, state.rho)
        .unwrap()
        .w;
    let al = |s: &BeamformerState| {
        al_value_weighted(s, &inst.ch, &inst.desired, &inst.grid, inst.weights).unwrap()
    };
    let mut sq = 0.0;
    for idx in 0..state.w_digital.len() {
        for dir in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
            let mut plus = state.clone();
            plus.w_digital[idx] += dir;
            let mut minus = state.clone();
            minus.w_digital[idx] -= dir;
            let g = (al(&plus) - al(&minus)) / (2.0 * h);
            sq += g * g;
        }
    }
    sq.sqrt()
}

pub fn digital_suite(instances: u64, tol: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    for i in 0..instances {
        let inst = instance(40_000 + i);
        out.record(digital_gradient_norm(&inst, 1e-5), tol);
    }
    out
}

// ---------------------------------------------------------------------------
// Surrogate tightness

/// Scale used to turn the absolute slack into a relative one.
fn magnitude(values: &[f64]) -> f64 {
    values.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()))
}

/// Analog-precoder bound: for random unit-modulus `F`, the bound minus the
/// exact value is at least its (zero) value at the anchor, and the exact
/// value differs from the augmented Lagrangian by a constant times `1/2ρ`.
pub fn f_surrogate_suite(probes: usize, slack: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    let mut seed = 50_000;
    while out.cases < probes {
        let inst = instance(seed);
        seed += 1;
        let s = &inst.state;
        let terms = build_f_update_terms(&s.w_digital, &s.q_aux, &s.psi_dual, s.rho).unwrap();
        let f0 = &s.f_analog;
        let al = |f: &CMatrix| {
            let mut st = s.clone();
            st.f_analog = f.clone();
            al_value_weighted(&st, &inst.ch, &inst.desired, &inst.grid, inst.weights).unwrap()
        };
        let exact0 = terms.exact_value(f0);
        let sur0 = terms.surrogate_value(f0, f0).unwrap();
        let offset = al(f0) - exact0 / (2.0 * s.rho);
        out.record((sur0 - exact0).abs() / magnitude(&[sur0, exact0]), slack);
        let mut r = rng(seed * 7);
        for _ in 0..9 {
            let f = unit_mat(&mut r, inst.cfg.n_tx, inst.cfg.n_rf);
            let exact = terms.exact_value(&f);
            let sur = terms.surrogate_value(&f, f0).unwrap();
            let gap = (exact - sur) / magnitude(&[sur, exact, sur0, exact0]);
            out.record(gap, slack);
            let al_f = al(&f);
            let fitted = exact / (2.0 * s.rho) + offset;
            out.record((al_f - fitted).abs() / magnitude(&[al_f, fitted, offset]), slack);
        }
    }
    out
}

/// Auxiliary-precoder bound on the power ball: after fitting the constant
/// at the anchor, `bound(Q) ≥ exact(Q)`, with equal slopes at the anchor.
pub fn q_surrogate_suite(probes: usize, slack: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    let mut seed = 60_000;
    while out.cases < probes {
        let mut inst = instance(seed);
        seed += 1;
        // The bound is only claimed inside the ball, so keep the anchor there.
        let p0 = frobenius_sq(&inst.state.q_aux);
        if p0 > inst.cfg.p_max {
            inst.state.q_aux = inst.state.q_aux.scale((inst.cfg.p_max / p0).sqrt() * 0.999);
        }
        let s = &inst.state;
        let lam = radar_gram_lambda_max(&inst.grid).unwrap();
        let sur = build_q_surrogate(
            &s.q_aux,
            s.delta,
            &s.phi,
            &inst.ch,
            &inst.desired,
            &inst.grid,
            inst.weights,
            inst.cfg.p_max,
            lam,
        )
        .unwrap();
        let exact = |q: &CMatrix| {
            q_exact_objective(q, s.delta, &s.phi, &inst.ch, &inst.desired, &inst.grid, inst.weights)
                .unwrap()
        };
        let q0 = &s.q_aux;
        let offset = exact(q0) - sur.value(q0);
        let gap_at = |q: &CMatrix| {
            let e = exact(q);
            let b = sur.value(q) + offset;
            ((e - b), magnitude(&[e, b, offset, sur.value(q)]))
        };
        let mut r = rng(seed * 11);
        for _ in 0..8 {
            let dir = cmat(&mut r, inst.cfg.n_tx, inst.cfg.n_streams);
            let radius2 = inst.cfg.p_max * r.random_range(0.0..1.0);
            let q = dir.scale((radius2 / frobenius_sq(&dir)).sqrt());
            let (gap, scale) = gap_at(&q);
            out.record(gap / scale, slack);
        }
        // Touching to first order: the bound minus the objective is flat
        // at the anchor along a random direction.
        let dir = cmat(&mut r, inst.cfg.n_tx, inst.cfg.n_streams);
        let dir = dir.scale(1.0 / frobenius_sq(&dir).sqrt());
        let t = 1e-5;
        let (gp, sp) = gap_at(&(q0 + dir.scale(t)));
        let (gm, sm) = gap_at(&(q0 - dir.scale(t)));
        // Second-order remainder is at most curvature·t².
        let allowed = 2.0 * (sur.curvature + 1.0) * t * t + slack * sp.max(sm);
        out.record(((gp - gm) / 2.0).abs(), allowed);
    }
    out
}

/// IRS-phase bound: the quadratic in φ reproduces the secrecy objective up
/// to a constant, and its majorizer bounds it from above with equality at
/// the anchor.
pub fn phi_surrogate_suite(probes: usize, slack: f64) -> SuiteResult {
    let mut out = SuiteResult::new();
    let mut seed = 70_000;
    while out.cases < probes {
        let inst = instance(seed);
        seed += 1;
        let s = &inst.state;
        let pq = build_phi_quadratic(&inst.ch, &s.q_aux).unwrap();
        let phi0 = &s.phi;
        let secrecy = |phi: &CVector| {
            let eff = effective_channels(&inst.ch, phi).unwrap();
            let (b, e) = snr_pair(&eff, &s.q_aux);
            e - b
        };
        let obj0 = pq.objective(phi0);
        let sur0 = pq.surrogate_value(phi0, phi0).unwrap();
        let offset = secrecy(phi0) - obj0;
        out.record((sur0 - obj0).abs() / magnitude(&[sur0, obj0]), slack);
        let mut r = rng(seed * 13);
        for _ in 0..4 {
            let phi = unit_vec(&mut r, inst.cfg.n_irs);
            let obj = pq.objective(&phi);
            let sur = pq.surrogate_value(&phi, phi0).unwrap();
            out.record((obj - sur) / magnitude(&[obj, sur, obj0, sur0]), slack);
            let direct = secrecy(&phi);
            let fitted = obj + offset;
            out.record(
                (direct - fitted).abs() / magnitude(&[direct, fitted, obj, offset]),
                slack,
            );
        }
    }
    out
}

/// `exp(j·arg)` applied entry-wise, re-exported for tests that build unit
/// vectors from arbitrary targets.
pub fn phases(v: &CVector) -> CVector {
    v.map(unit_phase)
}

// ---------------------------------------------------------------------------
// Statistics

/// Average ranks (ties share the mean of their positions), starting at 1.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of the ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
