//! Time sharing between a full-power rank-one operating point and the point
//! where the first transmitter is silent.

use serde::Serialize;

use crate::beamformers::{self, StrategyId};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::metrics;

use super::constrained::CrossLink;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSharingPoint {
    /// Fraction of time spent at the full-power point.
    pub tau: f64,
    pub rate: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeSharingCurve {
    pub strategy: StrategyId,
    pub channel_digest: String,
    /// Tx1 at full power along the strategy beam, Tx2 on the cross-link beam.
    pub full_power: TimeSharingPoint,
    /// Tx1 silent, Tx2 water-filling.
    pub silent: TimeSharingPoint,
    /// Ascending in `tau`.
    pub points: Vec<TimeSharingPoint>,
}

impl TimeSharingCurve {
    /// Best rate of the time-sharing line at harvested energy of at least
    /// `e_bar`, or `None` beyond the full-power energy.
    pub fn rate_for_energy(&self, e_bar: f64) -> Option<f64> {
        let (a, b) = (&self.full_power, &self.silent);
        if e_bar <= b.energy {
            Some(b.rate.max(a.rate))
        } else if e_bar <= a.energy {
            let tau = (e_bar - b.energy) / (a.energy - b.energy);
            Some(tau * a.rate + (1.0 - tau) * b.rate)
        } else {
            None
        }
    }
}

pub fn time_sharing_curve(
    cs: &ChannelSet,
    strategy: StrategyId,
    power: f64,
    weights: &[f64],
) -> Result<TimeSharingCurve> {
    let beam = match strategy {
        StrategyId::Meb => beamformers::meb(cs.h11(), power)?,
        StrategyId::Mlb => beamformers::mlb(cs.h21(), power)?,
        other => {
            return Err(Error::invalid(format!(
                "time sharing is defined for MEB and MLB, not {other}"
            )))
        }
    };
    if let Some(t) = weights.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::invalid(format!("time-sharing weight {t} outside [0, 1]")));
    }
    let m = cs.m_t();
    let cross = CrossLink::new(cs.h12(), power)?;

    let q1 = beam.covariance();
    let q2 = cross.beam_covariance();
    let r2 = metrics::interference_cov(cs.h21(), &q1)?;
    let full_power = TimeSharingPoint {
        tau: 1.0,
        rate: metrics::achievable_rate(cs.h22(), &r2, &q2)?,
        energy: metrics::link_energy(cs.h11(), &q1) + cross.energy(&q2),
    };

    let wf = beamformers::waterfill(cs.h22(), &linalg::identity(m), power)?;
    let silent = TimeSharingPoint {
        tau: 0.0,
        rate: metrics::whitened_rate(cs.h22(), wf.matrix())?,
        energy: metrics::link_energy(cs.h11(), &CMatrix::zeros(m, m)) + cross.energy(wf.matrix()),
    };

    let mut taus = weights.to_vec();
    taus.sort_by(f64::total_cmp);
    let points = taus
        .into_iter()
        .map(|tau| TimeSharingPoint {
            tau,
            rate: tau * full_power.rate + (1.0 - tau) * silent.rate,
            energy: tau * full_power.energy + (1.0 - tau) * silent.energy,
        })
        .collect();
    Ok(TimeSharingCurve {
        strategy,
        channel_digest: cs.digest(),
        full_power,
        silent,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{uniform_grid, BoundarySolver};

    const ALPHA: [[f64; 2]; 2] = [[1.0, 0.8], [0.8, 1.0]];

    #[test]
    fn endpoints_are_exact() {
        let cs = ChannelSet::draw(4, 4, ALPHA, 11).unwrap();
        let c = time_sharing_curve(&cs, StrategyId::Meb, 50.0, &[1.0, 0.0, 0.5]).unwrap();
        assert_eq!(c.points[0], c.silent);
        assert_eq!(c.points[2], c.full_power);
        let solver = BoundarySolver::new(&cs, StrategyId::Meb, 50.0).unwrap();
        assert!((c.full_power.energy - solver.emax().unwrap()).abs() < 1e-9 * c.full_power.energy);
        let mid = c.points[1];
        assert!((mid.rate - 0.5 * (c.silent.rate + c.full_power.rate)).abs() < 1e-12);
    }

    #[test]
    fn rejects_other_strategies_and_weights() {
        let cs = ChannelSet::draw(2, 2, ALPHA, 1).unwrap();
        assert!(time_sharing_curve(&cs, StrategyId::Sler, 1.0, &[0.5]).is_err());
        assert!(time_sharing_curve(&cs, StrategyId::Meb, 1.0, &[1.5]).is_err());
    }

    #[test]
    fn line_interpolation() {
        let cs = ChannelSet::draw(4, 4, ALPHA, 6).unwrap();
        let c = time_sharing_curve(&cs, StrategyId::Mlb, 50.0, &[]).unwrap();
        assert_eq!(c.rate_for_energy(0.0), Some(c.silent.rate));
        assert_eq!(c.rate_for_energy(c.full_power.energy * 1.01), None);
        let e = 0.5 * (c.silent.energy + c.full_power.energy);
        let r = c.rate_for_energy(e).unwrap();
        assert!((r - 0.5 * (c.silent.rate + c.full_power.rate)).abs() < 1e-12);
    }

    #[test]
    fn time_sharing_bounds_the_silent_point_from_above() {
        let cs = ChannelSet::draw(4, 4, ALPHA, 7).unwrap();
        let c = time_sharing_curve(&cs, StrategyId::Meb, 50.0, &[]).unwrap();
        let solver = BoundarySolver::new(&cs, StrategyId::Meb, 50.0).unwrap();
        for e in uniform_grid(c.silent.energy, 4) {
            let p = solver.point(e).unwrap();
            assert!(p.rate <= c.rate_for_energy(e).unwrap() + 1e-9);
        }
    }
}
