//! Receiver-mode evaluation and SLER-based selection between the two mixed
//! modes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamformers::{self, StrategyId, UpdateOrder};
use crate::boundary::{BoundarySolver, REBoundary, DEFAULT_MAX_ITERATIONS};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeTag {
    #[serde(rename = "ID_ID")]
    IdId,
    #[serde(rename = "EH_EH")]
    EhEh,
    /// First receiver harvests, second decodes.
    #[serde(rename = "EH1_ID2")]
    Eh1Id2,
    /// First receiver decodes, second harvests.
    #[serde(rename = "ID1_EH2")]
    Id1Eh2,
}

impl ModeTag {
    pub const ALL: [ModeTag; 4] = [ModeTag::IdId, ModeTag::EhEh, ModeTag::Eh1Id2, ModeTag::Id1Eh2];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeTag::IdId => "ID_ID",
            ModeTag::EhEh => "EH_EH",
            ModeTag::Eh1Id2 => "EH1_ID2",
            ModeTag::Id1Eh2 => "ID1_EH2",
        }
    }
}

impl fmt::Display for ModeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModeTag::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModePair {
    pub tag: ModeTag,
    pub rate: f64,
    pub energy: f64,
}

/// Channel seen by the mixed-mode solver when the second receiver harvests:
/// transmitter and receiver indices swap roles.
pub fn mode_channel(cs: &ChannelSet, mode: ModeTag) -> Result<ChannelSet> {
    match mode {
        ModeTag::Eh1Id2 => Ok(cs.clone()),
        ModeTag::Id1Eh2 => Ok(cs.swapped()),
        other => Err(Error::invalid(format!("{other} is not a mixed mode"))),
    }
}

/// `(SLER^(1), SLER^(2))` at full power, each maximized over the beam.
pub fn sler_pair(cs: &ChannelSet, e_bar: f64, power: f64) -> Result<(f64, f64)> {
    if !(power > 0.0) {
        return Err(Error::invalid(format!("power {power} must be > 0")));
    }
    let value = |h_own, h_cross| -> Result<f64> {
        let b = beamformers::sler_beam(h_own, h_cross, e_bar, power)?;
        metrics::sler(&b.beam, h_own, h_cross, e_bar, true)
    };
    Ok((value(cs.h11(), cs.h21())?, value(cs.h22(), cs.h12())?))
}

/// The harvesting role goes to receiver 1 when `SLER^(1) >= SLER^(2)`; values
/// within `1e-12` relative count as equal.
pub fn choose_mode(sler1: f64, sler2: f64) -> ModeTag {
    let tie = sler1.is_finite() && sler2.is_finite() && (sler1 - sler2).abs() <= 1e-12 * sler1.abs().max(sler2.abs());
    if sler1 >= sler2 || tie {
        ModeTag::Eh1Id2
    } else {
        ModeTag::Id1Eh2
    }
}

pub fn select_mode(cs: &ChannelSet, e_bar: f64, power: f64) -> Result<ModeTag> {
    let (s1, s2) = sler_pair(cs, e_bar, power)?;
    Ok(choose_mode(s1, s2))
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTable {
    pub id_id: ModePair,
    pub eh_eh: ModePair,
    pub eh1_id2: REBoundary,
    pub id1_eh2: REBoundary,
}

/// All four receiver-mode pairs. Mixed modes are swept with `mixed` on the
/// given grid of targets.
pub fn evaluate_all_modes(cs: &ChannelSet, power: f64, e_grid: &[f64], mixed: StrategyId) -> Result<ModeTable> {
    let iwf = beamformers::iterative_waterfilling(cs, power, DEFAULT_MAX_ITERATIONS, UpdateOrder::Simultaneous)?;
    let (q1, q2) = beamformers::eh_eh_optimal(cs, power)?;
    let energy = metrics::harvested_energy(cs, q1.matrix(), q2.matrix(), 1)
        + metrics::harvested_energy(cs, q1.matrix(), q2.matrix(), 2);
    let sweep = |mode| -> Result<REBoundary> {
        let ch = mode_channel(cs, mode)?;
        let mut b = BoundarySolver::new(&ch, mixed, power)?.sweep(e_grid)?;
        b.channel_digest = cs.digest();
        Ok(b)
    };
    Ok(ModeTable {
        id_id: ModePair {
            tag: ModeTag::IdId,
            rate: iwf.sum_rate(),
            energy: 0.0,
        },
        eh_eh: ModePair {
            tag: ModeTag::EhEh,
            rate: 0.0,
            energy,
        },
        eh1_id2: sweep(ModeTag::Eh1Id2)?,
        id1_eh2: sweep(ModeTag::Id1Eh2)?,
    })
}

/// Mixed-mode boundaries of one channel on a target grid normalized by the
/// larger of the two modes' maximum energies, with the scheduled selection.
#[derive(Debug, Clone, Serialize)]
pub struct ScheduledCurves {
    pub strategy: StrategyId,
    /// `max(E_max(EH1_ID2), E_max(ID1_EH2))`.
    pub e_ref: f64,
    /// Normalized targets `E / e_ref`.
    pub grid: Vec<f64>,
    /// Rate per grid point in each fixed mode; zero where the mode cannot
    /// reach the target.
    pub eh1_id2: Vec<f64>,
    pub id1_eh2: Vec<f64>,
    pub modes: Vec<ModeTag>,
    pub scheduled: Vec<f64>,
}

pub fn scheduled_curves(
    cs: &ChannelSet,
    strategy: StrategyId,
    power: f64,
    normalized_grid: &[f64],
) -> Result<ScheduledCurves> {
    let ch1 = mode_channel(cs, ModeTag::Eh1Id2)?;
    let ch2 = mode_channel(cs, ModeTag::Id1Eh2)?;
    let s1 = BoundarySolver::new(&ch1, strategy, power)?;
    let s2 = BoundarySolver::new(&ch2, strategy, power)?;
    let e_ref = s1.emax()?.max(s2.emax()?);
    let targets: Vec<f64> = normalized_grid.iter().map(|x| x * e_ref).collect();
    let rates = |b: REBoundary| -> Vec<f64> {
        targets
            .iter()
            .map(|&e| b.points.iter().find(|p| p.e_bar == e).map_or(0.0, |p| p.rate))
            .collect()
    };
    let r1 = rates(s1.sweep(&targets)?);
    let r2 = rates(s2.sweep(&targets)?);
    let mut modes = Vec::with_capacity(targets.len());
    let mut scheduled = Vec::with_capacity(targets.len());
    for (k, &e) in targets.iter().enumerate() {
        let mode = select_mode(cs, e, power)?;
        scheduled.push(if mode == ModeTag::Eh1Id2 { r1[k] } else { r2[k] });
        modes.push(mode);
    }
    Ok(ScheduledCurves {
        strategy,
        e_ref,
        grid: normalized_grid.to_vec(),
        eh1_id2: r1,
        id1_eh2: r2,
        modes,
        scheduled,
    })
}
