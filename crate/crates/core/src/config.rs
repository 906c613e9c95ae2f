//! Flat key-value configuration files.
//!
//! A config file is a TOML document whose top-level keys are snake_case
//! names of [`SystemConfig`] fields (distances as `distance_ab` and so on,
//! solver hyperparameters without a prefix). Angles may be given in radians
//! or, with a `_deg` suffix, in degrees. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    single_wide_target_case, three_target_case, PenaltyMode, SystemConfig, Target,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_tx: Option<usize>,
    pub n_rf: Option<usize>,
    pub n_streams: Option<usize>,
    pub n_irs: Option<usize>,
    pub n_bob: Option<usize>,
    pub n_eve: Option<usize>,
    /// Linear transmit power.
    pub p_max: Option<f64>,
    /// Transmit power in dBW, converted to linear.
    pub p_max_db: Option<f64>,
    pub mu: Option<f64>,

    pub distance_ab: Option<f64>,
    pub distance_ai: Option<f64>,
    pub distance_ae: Option<f64>,
    pub distance_ib: Option<f64>,
    pub distance_ie: Option<f64>,
    pub pathloss_ref_db: Option<f64>,
    pub pathloss_exponent: Option<f64>,

    pub angle_min: Option<f64>,
    pub angle_min_deg: Option<f64>,
    pub angle_max: Option<f64>,
    pub angle_max_deg: Option<f64>,
    pub angle_step: Option<f64>,
    pub angle_step_deg: Option<f64>,

    /// `1` for one wide target at broadside, `2` for three narrow targets.
    pub target_case: Option<u8>,
    pub target_centers: Option<Vec<f64>>,
    pub target_centers_deg: Option<Vec<f64>>,
    pub target_widths: Option<Vec<f64>>,
    pub target_widths_deg: Option<Vec<f64>>,

    pub varsigma: Option<f64>,
    pub rho0: Option<f64>,
    pub kappa0: Option<f64>,
    pub eps_inner: Option<f64>,
    pub eps_stop: Option<f64>,
    pub c_shrink: Option<f64>,
    pub max_inner_iters: Option<usize>,
    pub max_outer_iters: Option<usize>,
    pub max_penalty_rounds: Option<usize>,
    pub penalty_target: Option<f64>,
    pub penalty_mode: Option<PenaltyMode>,
}

/// Picks the radian value, converting a degree value if that is the one
/// given. Supplying both is an error.
fn angle(name: &str, rad: Option<f64>, deg: Option<f64>) -> Result<Option<f64>> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "both `{name}` and `{name}_deg` are set"
        ))),
        (Some(r), None) => Ok(Some(r)),
        (None, Some(d)) => Ok(Some(d.to_radians())),
        (None, None) => Ok(None),
    }
}

fn angles(name: &str, rad: &Option<Vec<f64>>, deg: &Option<Vec<f64>>) -> Result<Option<Vec<f64>>> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "both `{name}` and `{name}_deg` are set"
        ))),
        (Some(r), None) => Ok(Some(r.clone())),
        (None, Some(d)) => Ok(Some(d.iter().map(|x| x.to_radians()).collect())),
        (None, None) => Ok(None),
    }
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies every key present to `cfg` and validates the result.
    pub fn apply(&self, cfg: &mut SystemConfig) -> Result<()> {
        let counts = [
            ("n_tx", self.n_tx),
            ("n_rf", self.n_rf),
            ("n_streams", self.n_streams),
            ("n_irs", self.n_irs),
            ("n_bob", self.n_bob),
            ("n_eve", self.n_eve),
            ("max_inner_iters", self.max_inner_iters),
            ("max_outer_iters", self.max_outer_iters),
            ("max_penalty_rounds", self.max_penalty_rounds),
        ];
        for (name, v) in counts {
            if let Some(v) = v {
                cfg.set_param(name, v as f64)?;
            }
        }
        if self.p_max.is_some() && self.p_max_db.is_some() {
            return Err(Error::Config("both `p_max` and `p_max_db` are set".into()));
        }
        let p_max = self.p_max.or(self.p_max_db.map(|db| 10f64.powf(db / 10.0)));
        let reals = [
            ("p_max", p_max),
            ("mu", self.mu),
            ("distance_ab", self.distance_ab),
            ("distance_ai", self.distance_ai),
            ("distance_ae", self.distance_ae),
            ("distance_ib", self.distance_ib),
            ("distance_ie", self.distance_ie),
            ("pathloss_ref_db", self.pathloss_ref_db),
            ("pathloss_exponent", self.pathloss_exponent),
            ("varsigma", self.varsigma),
            ("rho0", self.rho0),
            ("kappa0", self.kappa0),
            ("eps_inner", self.eps_inner),
            ("eps_stop", self.eps_stop),
            ("c_shrink", self.c_shrink),
            ("penalty_target", self.penalty_target),
        ];
        for (name, v) in reals {
            if let Some(v) = v {
                cfg.set_param(name, v)?;
            }
        }
        if let Some(mode) = self.penalty_mode {
            cfg.hyper.penalty_mode = mode;
        }

        let lo = angle("angle_min", self.angle_min, self.angle_min_deg)?;
        let hi = angle("angle_max", self.angle_max, self.angle_max_deg)?;
        let step = angle("angle_step", self.angle_step, self.angle_step_deg)?;
        if lo.is_some() || hi.is_some() || step.is_some() {
            let lo = lo.unwrap_or(-std::f64::consts::FRAC_PI_2);
            let hi = hi.unwrap_or(std::f64::consts::FRAC_PI_2);
            let step = step.unwrap_or(1f64.to_radians());
            cfg.angle_grid = angle_grid(lo, hi, step)?;
        }

        let centers = angles("target_centers", &self.target_centers, &self.target_centers_deg)?;
        let widths = angles("target_widths", &self.target_widths, &self.target_widths_deg)?;
        match (self.target_case, centers, widths) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(Error::Config(
                    "`target_case` cannot be combined with explicit targets".into(),
                ))
            }
            (Some(1), None, None) => cfg.targets = single_wide_target_case(),
            (Some(2), None, None) => cfg.targets = three_target_case(),
            (Some(k), None, None) => {
                return Err(Error::Config(format!("`target_case` must be 1 or 2, got {k}")))
            }
            (None, Some(c), Some(w)) => {
                if c.len() != w.len() {
                    return Err(Error::Config(format!(
                        "{} target centers but {} widths",
                        c.len(),
                        w.len()
                    )));
                }
                cfg.targets = c
                    .into_iter()
                    .zip(w)
                    .map(|(center, width)| Target { center, width })
                    .collect();
            }
            (None, Some(_), None) | (None, None, Some(_)) => {
                return Err(Error::Config(
                    "target centers and widths must be given together".into(),
                ))
            }
            (None, None, None) => {}
        }
        cfg.validate()
    }

    /// Default configuration with this file applied.
    pub fn to_config(&self) -> Result<SystemConfig> {
        let mut cfg = SystemConfig::default();
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

/// Evenly spaced grid from `lo` to `hi` inclusive (up to rounding).
fn angle_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::Config(format!(
            "bad angle grid: min {lo}, max {hi}, step {step}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

/// Loads a config file into a validated [`SystemConfig`].
pub fn load_config(path: &Path) -> Result<SystemConfig> {
    ConfigFile::load(path)?.to_config()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let cfg = ConfigFile::parse("", "mem").unwrap().to_config().unwrap();
        assert_eq!(cfg, SystemConfig::default());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ConfigFile::parse("n_tx = 8\nbogus = 1\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn degree_keys_convert() {
        let text = "target_centers_deg = [10.0]\ntarget_widths_deg = [30.0]\nangle_step_deg = 2.0\n";
        let cfg = ConfigFile::parse(text, "mem").unwrap().to_config().unwrap();
        assert!((cfg.targets[0].center - 10f64.to_radians()).abs() < 1e-15);
        assert!((cfg.targets[0].width - 30f64.to_radians()).abs() < 1e-15);
        assert_eq!(cfg.angle_grid.len(), 91);
        assert!((cfg.angle_grid[90] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn conflicting_units_are_rejected() {
        let text = "angle_min = -1.0\nangle_min_deg = -60.0\n";
        assert!(ConfigFile::parse(text, "mem").unwrap().to_config().is_err());
    }

    #[test]
    fn scalars_and_modes_apply() {
        let text = "n_tx = 24\nmu = 0.25\ndistance_ie = 55.0\npenalty_mode = \"escalating\"\ntarget_case = 1\np_max_db = 10.0\n";
        let cfg = ConfigFile::parse(text, "mem").unwrap().to_config().unwrap();
        assert_eq!(cfg.n_tx, 24);
        assert_eq!(cfg.mu, 0.25);
        assert_eq!(cfg.distances.ie, 55.0);
        assert_eq!(cfg.hyper.penalty_mode, PenaltyMode::Escalating);
        assert_eq!(cfg.targets, single_wide_target_case());
        assert!((cfg.p_max - 10.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(ConfigFile::parse("mu = 1.5\n", "mem").unwrap().to_config().is_err());
        assert!(ConfigFile::parse("n_rf = 20\n", "mem").unwrap().to_config().is_err());
        assert!(ConfigFile::parse("target_case = 3\n", "mem").unwrap().to_config().is_err());
    }
}
