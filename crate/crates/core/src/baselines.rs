//! Comparison architectures, each expressed as a configuration change plus
//! solver switches on top of the same PDD machinery.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::solver::{solve, SolveReport, SolverMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureVariant {
    /// Hybrid beamforming with IRS, joint secrecy and radar objective.
    ProposedHb,
    /// Fully-digital beamforming with IRS.
    IrsIsacFdb,
    /// Fully-digital beamforming without IRS.
    WoirsIsacFdb,
    /// Hybrid beamforming with IRS, communication only.
    IrsCHb,
    /// Hybrid beamforming without IRS, communication only.
    WoirsCHb,
    /// Fully-digital beamforming without IRS, communication only.
    WoirsCFdb,
    /// Hybrid beamforming that only matches the radar beampattern.
    RadarOnly,
    /// Hybrid beamforming where each RF chain drives its own antenna block.
    SubconnectedHb,
}

impl ArchitectureVariant {
    pub const ALL: [ArchitectureVariant; 8] = [
        ArchitectureVariant::ProposedHb,
        ArchitectureVariant::IrsIsacFdb,
        ArchitectureVariant::WoirsIsacFdb,
        ArchitectureVariant::IrsCHb,
        ArchitectureVariant::WoirsCHb,
        ArchitectureVariant::WoirsCFdb,
        ArchitectureVariant::RadarOnly,
        ArchitectureVariant::SubconnectedHb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureVariant::ProposedHb => "proposed_hb",
            ArchitectureVariant::IrsIsacFdb => "irs_isac_fdb",
            ArchitectureVariant::WoirsIsacFdb => "woirs_isac_fdb",
            ArchitectureVariant::IrsCHb => "irs_c_hb",
            ArchitectureVariant::WoirsCHb => "woirs_c_hb",
            ArchitectureVariant::WoirsCFdb => "woirs_c_fdb",
            ArchitectureVariant::RadarOnly => "radar_only",
            ArchitectureVariant::SubconnectedHb => "subconnected_hb",
        }
    }

    pub fn is_fully_digital(self) -> bool {
        matches!(
            self,
            ArchitectureVariant::IrsIsacFdb
                | ArchitectureVariant::WoirsIsacFdb
                | ArchitectureVariant::WoirsCFdb
        )
    }

    pub fn uses_irs(self) -> bool {
        !matches!(
            self,
            ArchitectureVariant::WoirsIsacFdb
                | ArchitectureVariant::WoirsCHb
                | ArchitectureVariant::WoirsCFdb
        )
    }

    pub fn is_comm_only(self) -> bool {
        matches!(
            self,
            ArchitectureVariant::IrsCHb | ArchitectureVariant::WoirsCHb | ArchitectureVariant::WoirsCFdb
        )
    }

    /// Human-readable list of the changes applied to the base setup.
    pub fn transforms(self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.is_fully_digital() {
            out.push("n_rf = n_tx with a fixed DFT analog stage");
        }
        if !self.uses_irs() {
            out.push("IRS channels zeroed, phases frozen");
        }
        if self.is_comm_only() {
            out.push("mu = 1, delta frozen");
        }
        match self {
            ArchitectureVariant::RadarOnly => out.push("mu = 0"),
            ArchitectureVariant::SubconnectedHb => out.push("block-diagonal analog precoder"),
            _ => {}
        }
        out
    }
}

impl fmt::Display for ArchitectureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchitectureVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Configuration and solver switches that realize `v` on top of `base`.
pub fn materialize_variant(
    v: ArchitectureVariant,
    base: &SystemConfig,
) -> Result<(SystemConfig, SolverMode)> {
    base.validate()?;
    let mut cfg = base.clone();
    let mut mode = SolverMode::default();
    if v.is_fully_digital() {
        cfg.n_rf = cfg.n_tx;
        mode.fixed_analog = true;
    }
    if !v.uses_irs() {
        mode.no_irs = true;
    }
    if v.is_comm_only() {
        cfg.mu = 1.0;
        mode.skip_delta = true;
    }
    match v {
        ArchitectureVariant::RadarOnly => cfg.mu = 0.0,
        ArchitectureVariant::SubconnectedHb => {
            if cfg.n_tx % cfg.n_rf != 0 {
                return Err(Error::Config(format!(
                    "subconnected_hb needs n_rf ({}) to divide n_tx ({})",
                    cfg.n_rf, cfg.n_tx
                )));
            }
            mode.subconnected = true;
        }
        _ => {}
    }
    cfg.validate()?;
    Ok((cfg, mode))
}

/// Materializes `v` and solves it on `ch` with initial-point seed `seed`.
pub fn solve_variant(
    v: ArchitectureVariant,
    base: &SystemConfig,
    ch: &ChannelSet,
    seed: u64,
) -> Result<SolveReport> {
    let (cfg, mode) = materialize_variant(v, base)?;
    solve(ch, &cfg, mode, seed)
}
