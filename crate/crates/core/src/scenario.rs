//! Simulation world: system configuration, seeded fading channels,
//! steering vectors and the desired radar beampattern.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{all_finite, CMatrix, CVector, Complex64};

/// Angular tolerance (radians) when deciding whether a grid angle lies on
/// a plateau edge.
const EDGE_TOL: f64 = 1e-9;

/// Link distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub ab: f64,
    pub ai: f64,
    pub ae: f64,
    pub ib: f64,
    pub ie: f64,
}

impl Default for Distances {
    fn default() -> Self {
        Distances {
            ab: 80.0,
            ai: 30.0,
            ae: 80.0,
            ib: 40.0,
            ie: 40.0,
        }
    }
}

/// How the radar-similarity penalty weight is handled by the outer wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// A single PDD solve with the configured `mu`.
    #[default]
    FixedWeight,
    /// Repeated PDD solves with a geometrically growing radar weight.
    Escalating,
}

/// Solver hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Growth factor of the radar penalty multiplier (escalating mode).
    pub varsigma: f64,
    /// Initial penalty parameter ρ.
    pub rho0: f64,
    /// Initial dual-update threshold κ.
    pub kappa0: f64,
    /// Initial relative tolerance of the inner BSUM loop.
    pub eps_inner: f64,
    /// Outer stop tolerance on `‖Q − FW‖_∞`.
    pub eps_stop: f64,
    /// Shrink factor applied to ρ when the dual step is rejected.
    pub c_shrink: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub max_penalty_rounds: usize,
    /// Radar MSE level that ends the escalating penalty loop.
    pub penalty_target: f64,
    pub penalty_mode: PenaltyMode,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            varsigma: 1.1,
            rho0: 0.1,
            kappa0: 0.9,
            eps_inner: 1e-5,
            eps_stop: 1e-5,
            c_shrink: 0.7,
            max_inner_iters: 200,
            max_outer_iters: 60,
            max_penalty_rounds: 30,
            penalty_target: 1e-5,
            penalty_mode: PenaltyMode::FixedWeight,
        }
    }
}

/// A sensing target: plateau center and full width, both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub center: f64,
    pub width: f64,
}

impl Target {
    pub fn from_degrees(center_deg: f64, width_deg: f64) -> Self {
        Target {
            center: center_deg.to_radians(),
            width: width_deg.to_radians(),
        }
    }
}

/// Every scenario and solver parameter of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rf: usize,
    pub n_streams: usize,
    pub n_irs: usize,
    pub n_bob: usize,
    pub n_eve: usize,
    /// Transmit power budget, linear.
    pub p_max: f64,
    /// Weight of the secrecy term; `1 − mu` weighs the radar term.
    pub mu: f64,
    /// Sampled angles in radians, ascending.
    pub angle_grid: Vec<f64>,
    pub targets: Vec<Target>,
    pub distances: Distances,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub hyper: Hyper,
}

/// `K` angles from −90° to 90° at 1° spacing.
pub fn default_angle_grid() -> Vec<f64> {
    (-90..=90).map(|d| (d as f64).to_radians()).collect()
}

/// Three 20°-wide targets at −40°, 0° and 40°.
pub fn three_target_case() -> Vec<Target> {
    [-40.0, 0.0, 40.0]
        .into_iter()
        .map(|c| Target::from_degrees(c, 20.0))
        .collect()
}

/// One 60°-wide target at broadside.
pub fn single_wide_target_case() -> Vec<Target> {
    vec![Target::from_degrees(0.0, 60.0)]
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_tx: 10,
            n_rf: 4,
            n_streams: 2,
            n_irs: 32,
            n_bob: 4,
            n_eve: 4,
            p_max: 1.0,
            mu: 0.5,
            angle_grid: default_angle_grid(),
            targets: three_target_case(),
            distances: Distances::default(),
            pathloss_ref_db: -30.0,
            pathloss_exponent: 3.0,
            hyper: Hyper::default(),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("n_tx", self.n_tx),
            ("n_rf", self.n_rf),
            ("n_streams", self.n_streams),
            ("n_irs", self.n_irs),
            ("n_bob", self.n_bob),
            ("n_eve", self.n_eve),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.n_rf > self.n_tx {
            return fail(format!("n_rf ({}) exceeds n_tx ({})", self.n_rf, self.n_tx));
        }
        if self.n_streams > self.n_rf {
            return fail(format!(
                "n_streams ({}) exceeds n_rf ({})",
                self.n_streams, self.n_rf
            ));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return fail(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return fail(format!("p_max must be positive, got {}", self.p_max));
        }
        if self.angle_grid.is_empty() {
            return fail("angle_grid is empty".into());
        }
        if self.angle_grid.windows(2).any(|w| w[1] < w[0])
            || self
                .angle_grid
                .iter()
                .any(|t| !t.is_finite() || t.abs() > PI / 2.0 + EDGE_TOL)
        {
            return fail("angle_grid must be ascending within [-90°, 90°]".into());
        }
        if self.targets.is_empty() {
            return fail("at least one target is required".into());
        }
        if self.targets.iter().any(|t| !(t.width >= 0.0) || !t.center.is_finite()) {
            return fail("target widths must be nonnegative and centers finite".into());
        }
        let d = &self.distances;
        if [d.ab, d.ai, d.ae, d.ib, d.ie]
            .iter()
            .any(|&x| !(x > 0.0 && x.is_finite()))
        {
            return fail("all distances must be positive".into());
        }
        if !self.pathloss_ref_db.is_finite() || !self.pathloss_exponent.is_finite() {
            return fail("path-loss parameters must be finite".into());
        }
        let h = &self.hyper;
        if !(h.varsigma > 1.0) {
            return fail(format!("varsigma must exceed 1, got {}", h.varsigma));
        }
        if !(h.c_shrink > 0.0 && h.c_shrink < 1.0) {
            return fail(format!("c_shrink must lie in (0, 1), got {}", h.c_shrink));
        }
        for (name, v) in [
            ("rho0", h.rho0),
            ("kappa0", h.kappa0),
            ("eps_inner", h.eps_inner),
            ("eps_stop", h.eps_stop),
            ("penalty_target", h.penalty_target),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if h.max_inner_iters == 0 || h.max_outer_iters == 0 || h.max_penalty_rounds == 0 {
            return fail("iteration caps must be at least 1".into());
        }
        Ok(())
    }

    /// Large-scale gain `10^(ref/10) · d^(−exponent)` for a link of length `d`.
    pub fn pathloss(&self, d: f64) -> f64 {
        10f64.powf(self.pathloss_ref_db / 10.0) * d.powf(-self.pathloss_exponent)
    }

    /// Names accepted by [`SystemConfig::set_param`].
    pub const SWEEPABLE: &'static [&'static str] = &[
        "n_tx",
        "n_rf",
        "n_streams",
        "n_irs",
        "n_bob",
        "n_eve",
        "p_max",
        "mu",
        "pathloss_ref_db",
        "pathloss_exponent",
        "distance_ab",
        "distance_ai",
        "distance_ae",
        "distance_ib",
        "distance_ie",
        "varsigma",
        "rho0",
        "kappa0",
        "eps_inner",
        "eps_stop",
        "c_shrink",
        "max_inner_iters",
        "max_outer_iters",
        "max_penalty_rounds",
        "penalty_target",
    ];

    /// Set one scalar field by its snake_case name.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{name} needs a nonnegative integer, got {v}")))
            }
        };
        match name {
            "n_tx" => self.n_tx = count(value)?,
            "n_rf" => self.n_rf = count(value)?,
            "n_streams" => self.n_streams = count(value)?,
            "n_irs" => self.n_irs = count(value)?,
            "n_bob" => self.n_bob = count(value)?,
            "n_eve" => self.n_eve = count(value)?,
            "p_max" => self.p_max = value,
            "mu" => self.mu = value,
            "pathloss_ref_db" => self.pathloss_ref_db = value,
            "pathloss_exponent" => self.pathloss_exponent = value,
            "distance_ab" => self.distances.ab = value,
            "distance_ai" => self.distances.ai = value,
            "distance_ae" => self.distances.ae = value,
            "distance_ib" => self.distances.ib = value,
            "distance_ie" => self.distances.ie = value,
            "varsigma" => self.hyper.varsigma = value,
            "rho0" => self.hyper.rho0 = value,
            "kappa0" => self.hyper.kappa0 = value,
            "eps_inner" => self.hyper.eps_inner = value,
            "eps_stop" => self.hyper.eps_stop = value,
            "c_shrink" => self.hyper.c_shrink = value,
            "max_inner_iters" => self.hyper.max_inner_iters = count(value)?,
            "max_outer_iters" => self.hyper.max_outer_iters = count(value)?,
            "max_penalty_rounds" => self.hyper.max_penalty_rounds = count(value)?,
            "penalty_target" => self.hyper.penalty_target = value,
            other => {
                return Err(Error::Config(format!(
                    "`{other}` is not a sweepable configuration field"
                )))
            }
        }
        Ok(())
    }
}

/// The five propagation matrices of one fading realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → Bob, `N_b × N_t`.
    pub h_ab: CMatrix,
    /// BS → Eve, `N_e × N_t`.
    pub h_ae: CMatrix,
    /// BS → IRS, `N_i × N_t`.
    pub h_ai: CMatrix,
    /// IRS → Bob, `N_b × N_i`.
    pub h_ib: CMatrix,
    /// IRS → Eve, `N_e × N_i`.
    pub h_ie: CMatrix,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.h_ab.ncols()
    }

    pub fn n_irs(&self) -> usize {
        self.h_ai.nrows()
    }

    /// Checks the shapes against each other and against `cfg`.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let expect = [
            ("h_ab", &self.h_ab, cfg.n_bob, cfg.n_tx),
            ("h_ae", &self.h_ae, cfg.n_eve, cfg.n_tx),
            ("h_ai", &self.h_ai, cfg.n_irs, cfg.n_tx),
            ("h_ib", &self.h_ib, cfg.n_bob, cfg.n_irs),
            ("h_ie", &self.h_ie, cfg.n_eve, cfg.n_irs),
        ];
        for (name, m, r, c) in expect {
            if m.shape() != (r, c) {
                return Err(Error::Dimension(format!(
                    "{name} is {:?}, expected ({r}, {c})",
                    m.shape()
                )));
            }
            if !all_finite(m) {
                return Err(Error::Numerical(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// The same realization with every IRS link removed.
    pub fn without_irs(&self) -> ChannelSet {
        ChannelSet {
            h_ab: self.h_ab.clone(),
            h_ae: self.h_ae.clone(),
            h_ai: CMatrix::zeros(self.h_ai.nrows(), self.h_ai.ncols()),
            h_ib: CMatrix::zeros(self.h_ib.nrows(), self.h_ib.ncols()),
            h_ie: CMatrix::zeros(self.h_ie.nrows(), self.h_ie.ncols()),
        }
    }
}

/// `a(θ)` for a half-wavelength uniform linear array: entry `m` is
/// `exp(j·π·m·sin θ)`.
pub fn steering_vector(theta: f64, n: usize) -> Result<CVector> {
    if n == 0 {
        return Err(Error::Dimension("steering vector needs n >= 1".into()));
    }
    let s = theta.sin();
    Ok(CVector::from_fn(n, |m, _| {
        Complex64::from_polar(1.0, PI * m as f64 * s)
    }))
}

/// Steering vectors for every grid angle, one per column (`N_t × K`).
pub fn steering_matrix(angle_grid: &[f64], n: usize) -> Result<CMatrix> {
    let mut a = CMatrix::zeros(n, angle_grid.len());
    for (k, &theta) in angle_grid.iter().enumerate() {
        a.set_column(k, &steering_vector(theta, n)?);
    }
    Ok(a)
}

/// Draws an `r × c` matrix of i.i.d. `CN(0, scale)` entries.
fn gaussian_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize, scale: f64) -> CMatrix {
    let amp = (scale / 2.0).sqrt();
    CMatrix::from_fn(r, c, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        Complex64::new(amp * x, amp * y)
    })
}

/// Generates one Rayleigh fading realization with distance-based path loss.
///
/// The generator is ChaCha20 seeded with `seed`; each matrix draws from its
/// own stream, in the order ab (0), ai (1), ae (2), ib (3), ie (4), so
/// changing one matrix's shape never perturbs the others.
pub fn generate_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let d = &cfg.distances;
    let draw = |stream: u64, r: usize, c: usize, dist: f64| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        gaussian_matrix(&mut rng, r, c, cfg.pathloss(dist))
    };
    Ok(ChannelSet {
        h_ab: draw(0, cfg.n_bob, cfg.n_tx, d.ab),
        h_ai: draw(1, cfg.n_irs, cfg.n_tx, d.ai),
        h_ae: draw(2, cfg.n_eve, cfg.n_tx, d.ae),
        h_ib: draw(3, cfg.n_bob, cfg.n_irs, d.ib),
        h_ie: draw(4, cfg.n_eve, cfg.n_irs, d.ie),
    })
}

/// Indicator beampattern sampled on the angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredBeampattern {
    pub targets: Vec<Target>,
    /// `P_d(θ_k)` ∈ {0, 1}, aligned with the angle grid.
    pub values: Vec<f64>,
}

impl DesiredBeampattern {
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// `P_d(θ_k) = 1` when `θ_k` lies within half a width of some target center.
pub fn desired_beampattern(targets: &[Target], angle_grid: &[f64]) -> Result<DesiredBeampattern> {
    if targets.is_empty() {
        return Err(Error::Config("desired beampattern needs at least one target".into()));
    }
    let values: Vec<f64> = angle_grid
        .iter()
        .map(|&theta| {
            let hit = targets.iter().any(|t| {
                let half = t.width / 2.0;
                theta >= t.center - half - EDGE_TOL && theta <= t.center + half + EDGE_TOL
            });
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroDesiredPattern);
    }
    Ok(DesiredBeampattern {
        targets: targets.to_vec(),
        values,
    })
}
