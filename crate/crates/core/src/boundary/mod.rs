//! Rate-energy boundary for the mixed modes: the first receiver harvests, the
//! second decodes. The first transmitter sends along a fixed strategy shape
//! with power `P1`; the second solves the energy-constrained rate problem.
//! `P1` is shrunk from `P` until the energy target is met with no surplus.

pub mod constrained;
pub mod gsvd;
pub mod time_sharing;

use serde::Serialize;

use crate::beamformers::{self, StrategyId};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::metrics::{self, TxCovariance};

pub use constrained::{
    inner_max, solve_constrained_rate, ConstrainedBranch, ConstrainedRateSolution, ConstrainedRateSolver, CrossLink,
    DualState,
};
pub use gsvd::{gsvd_transform, GsvdTransform};
pub use time_sharing::{time_sharing_curve, TimeSharingCurve, TimeSharingPoint};

pub const DEFAULT_MAX_ITERATIONS: usize = 20;
pub const DEFAULT_GRID_POINTS: usize = 64;
/// Slack allowed on reported energy against the target.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Second transmitter water-fills without an active energy constraint.
    #[serde(rename = "WF")]
    Wf,
    /// Energy constraint active at the second transmitter.
    #[serde(rename = "DUAL")]
    Dual,
    /// First transmitter silent and the second water-fills.
    #[serde(rename = "NO_TX")]
    NoTx,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Wf => "WF",
            Branch::Dual => "DUAL",
            Branch::NoTx => "NO_TX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct REPoint {
    pub e_bar: f64,
    /// Bits per channel use at the decoding receiver.
    pub rate: f64,
    /// Energy harvested at the first receiver.
    pub energy: f64,
    pub p1: f64,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub iterations: usize,
    pub branch: Branch,
    /// The target sat marginally above what the strategy can deliver and was
    /// lowered to the attainable maximum.
    pub clamped: bool,
    /// Set when the operating point was solved for this larger target and
    /// carried down the grid because it beats the point solved here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_e_bar: Option<f64>,
}

/// A grid point the solver could not produce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapMarker {
    pub e_bar: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct REBoundary {
    pub strategy: StrategyId,
    pub channel_digest: String,
    /// Ascending in `e_bar`.
    pub points: Vec<REPoint>,
    pub gaps: Vec<GapMarker>,
}

impl REBoundary {
    pub fn is_partial(&self) -> bool {
        !self.gaps.is_empty()
    }

    /// Largest rate increase between consecutive points (zero for a
    /// non-increasing curve).
    pub fn monotonicity_violation(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].rate - w[0].rate).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Trapezoidal area under rate over `e_bar`, gaps counted as zero rate.
    pub fn area(&self) -> f64 {
        let mut samples: Vec<(f64, f64)> = self.points.iter().map(|p| (p.e_bar, p.rate)).collect();
        samples.extend(self.gaps.iter().map(|g| (g.e_bar, 0.0)));
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        samples
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }
}

/// A boundary point together with the transmit covariances that achieve it.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub point: REPoint,
    pub q1: CMatrix,
    pub q2: TxCovariance,
}

#[derive(Debug, Clone)]
enum Tx1Policy {
    /// Unit-trace covariance independent of the target.
    Fixed(CMatrix),
    Sler,
    Slnr,
    Off,
}

/// Boundary solver for one channel, strategy and power budget.
#[derive(Debug, Clone)]
pub struct BoundarySolver<'a> {
    cs: &'a ChannelSet,
    strategy: StrategyId,
    policy: Tx1Policy,
    rate_solver: ConstrainedRateSolver,
    h11_norm_sq: f64,
    power: f64,
    max_iterations: usize,
}

impl<'a> BoundarySolver<'a> {
    pub fn new(cs: &'a ChannelSet, strategy: StrategyId, power: f64) -> Result<Self> {
        let policy = match strategy {
            StrategyId::Meb => Tx1Policy::Fixed(beamformers::meb(cs.h11(), 1.0)?.covariance()),
            StrategyId::Mlb => Tx1Policy::Fixed(beamformers::mlb(cs.h21(), 1.0)?.covariance()),
            StrategyId::MebRank2 => Tx1Policy::Fixed(beamformers::meb_rank2(cs.h11(), 1.0, 0.5)?.into_matrix()),
            StrategyId::Sler => Tx1Policy::Sler,
            StrategyId::Slnr => Tx1Policy::Slnr,
            StrategyId::NoTx => Tx1Policy::Off,
            StrategyId::Iwf | StrategyId::EhOpt => {
                return Err(Error::invalid(format!(
                    "{strategy} does not define a mixed-mode boundary"
                )))
            }
        };
        Self::build(cs, strategy, policy, power)
    }

    /// Solver whose first transmitter uses the given shape (unit trace) at
    /// every power level; the result is labelled with `tag`.
    pub fn with_shape(cs: &'a ChannelSet, tag: StrategyId, shape: CMatrix, power: f64) -> Result<Self> {
        let tx = TxCovariance::new(shape, 1.0)?;
        if (tx.trace() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("shape trace {} is not 1", tx.trace())));
        }
        Self::build(cs, tag, Tx1Policy::Fixed(tx.into_matrix()), power)
    }

    fn build(cs: &'a ChannelSet, strategy: StrategyId, policy: Tx1Policy, power: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid(format!("power {power} must be > 0")));
        }
        Ok(BoundarySolver {
            cs,
            strategy,
            policy,
            rate_solver: ConstrainedRateSolver::new(cs.h12(), power)?,
            h11_norm_sq: linalg::spectral_norm(cs.h11())?.powi(2),
            power,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        })
    }

    pub fn with_max_iterations(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("at least one power-control iteration is required"));
        }
        self.max_iterations = n;
        Ok(self)
    }

    pub fn strategy(&self) -> StrategyId {
        self.strategy
    }

    pub fn cross(&self) -> &CrossLink {
        self.rate_solver.cross()
    }

    /// Unit-trace transmit shape of the first transmitter at `(e_bar, p1)`.
    fn shape(&self, e_bar: f64, p1: f64) -> Result<Option<CMatrix>> {
        Ok(match &self.policy {
            Tx1Policy::Fixed(s) => Some(s.clone()),
            Tx1Policy::Sler => {
                let b = beamformers::sler_beam_with_norm(self.cs.h11(), self.cs.h21(), e_bar, p1, self.h11_norm_sq)?;
                Some(linalg::outer(b.beam.direction()))
            }
            Tx1Policy::Slnr => Some(
                beamformers::slnr_beam(self.cs.h11(), self.cs.h21(), p1)?
                    .covariance()
                    .unscale(p1),
            ),
            Tx1Policy::Off => None,
        })
    }

    fn kappa(&self, shape: &CMatrix) -> f64 {
        metrics::link_energy(self.cs.h11(), shape)
    }

    /// Largest energy deliverable with both transmitters at full power. For
    /// SLER the beam depends on the target, so the target is iterated to the
    /// fixed point `E = P (kappa(E) + sigma_12^2)` from the MEB value down.
    pub fn emax(&self) -> Result<f64> {
        let cross = self.rate_solver.cross().max_energy();
        match &self.policy {
            Tx1Policy::Off => Ok(cross),
            Tx1Policy::Fixed(s) => Ok(self.power * self.kappa(s) + cross),
            Tx1Policy::Slnr => {
                let s = self.shape(0.0, self.power)?.expect("beam policy");
                Ok(self.power * self.kappa(&s) + cross)
            }
            Tx1Policy::Sler => {
                let deliver = |e: f64| -> Result<f64> {
                    let s = self.shape(e, self.power)?.expect("beam policy");
                    Ok(self.power * self.kappa(&s) + cross)
                };
                let mut e = self.power * self.h11_norm_sq + cross;
                for _ in 0..64 {
                    let next = deliver(e)?;
                    if next >= e * (1.0 - 1e-13) {
                        return Ok(e.min(next));
                    }
                    e = next;
                }
                // The iterates approach the fixed point from above, where the
                // target is never quite met. kappa grows with the target, so
                // the zero-floor delivery is itself deliverable; bisect
                // keeping that feasible end.
                let mut lo = deliver(0.0)?;
                let mut hi = e;
                if deliver(lo)? < lo {
                    return Ok(e);
                }
                while hi - lo > 1e-14 * hi {
                    let mid = 0.5 * (lo + hi);
                    if deliver(mid)? >= mid {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo)
            }
        }
    }

    pub fn point(&self, e_bar: f64) -> Result<REPoint> {
        Ok(self.solve_point(e_bar)?.point)
    }

    pub fn solve_point(&self, e_bar: f64) -> Result<BoundaryPoint> {
        if !(e_bar >= 0.0 && e_bar.is_finite()) {
            return Err(Error::invalid(format!("energy target {e_bar} must be finite and >= 0")));
        }
        let cs = self.cs;
        let m = cs.m_t();
        let cross_max = self.rate_solver.cross().max_energy();
        let tx1_off = matches!(self.policy, Tx1Policy::Off);

        let mut p1 = if tx1_off { 0.0 } else { self.power };
        let mut kappa = 0.0;
        let mut accepted: Option<BoundaryPoint> = None;
        for n in 0..self.max_iterations {
            let shape = if p1 > 0.0 {
                self.shape(e_bar, p1).map_err(|e| e.at_iteration(n))?
            } else {
                None
            };
            if let Some(s) = &shape {
                kappa = self.kappa(s);
            }
            let q1 = shape.map_or_else(|| CMatrix::zeros(m, m), |s| s.scale(p1));
            let e11 = if p1 > 0.0 { p1 * kappa } else { 0.0 };

            let r = metrics::interference_cov(cs.h21(), &q1)?;
            let h_tilde = linalg::inv_sqrt_psd(&r, 0.0)? * cs.h22();

            let mut target = (e_bar - e11).max(0.0);
            let mut clamped = false;
            if target > cross_max {
                if target - cross_max <= ENERGY_TOLERANCE * e_bar.max(1.0) {
                    target = cross_max;
                    clamped = true;
                } else {
                    return Err(Error::Infeasible {
                        target: e_bar,
                        max_attainable: e11 + cross_max,
                    }
                    .at_iteration(n));
                }
            }
            let sol = self
                .rate_solver
                .solve(&h_tilde, target)
                .map_err(|e| e.at_iteration(n))?;

            let next = if tx1_off {
                0.0
            } else if kappa > 0.0 {
                ((e_bar - sol.energy) / kappa).clamp(0.0, p1)
            } else if sol.energy >= e_bar {
                0.0
            } else {
                p1
            };
            let settled = (next - p1).abs() < 1e-8 * self.power;

            let branch = match sol.branch {
                ConstrainedBranch::Wf if p1 == 0.0 => Branch::NoTx,
                ConstrainedBranch::Wf => Branch::Wf,
                ConstrainedBranch::Dual | ConstrainedBranch::CrossBeam => Branch::Dual,
            };
            let point = REPoint {
                e_bar,
                rate: sol.rate,
                energy: e11 + sol.energy,
                p1,
                lambda: sol.dual.map(|d| d.lambda),
                mu: sol.dual.map(|d| d.mu),
                iterations: n + 1,
                branch,
                clamped,
                source_e_bar: None,
            };
            accepted = Some(BoundaryPoint { point, q1, q2: sol.q2 });
            if settled {
                break;
            }
            p1 = next;
        }
        Ok(accepted.expect("at least one iteration"))
    }

    /// Maps the solver over an ascending grid; failed points become gaps.
    /// An operating point meeting a larger target also meets every smaller
    /// one, so each target takes the best point solved at or above it. This
    /// makes the rate non-increasing and fills gaps below a feasible target.
    pub fn sweep(&self, grid: &[f64]) -> Result<REBoundary> {
        let raw = self.sweep_raw(grid)?;
        let mut solved = raw.points.into_iter().peekable();
        let mut failed = raw.gaps.into_iter().peekable();
        let mut slots: Vec<std::result::Result<REPoint, GapMarker>> = Vec::with_capacity(grid.len());
        for &e in grid {
            if solved.peek().is_some_and(|p| p.e_bar == e) {
                slots.push(Ok(solved.next().expect("peeked")));
            } else {
                slots.push(Err(failed.next().expect("every target is a point or a gap")));
            }
        }
        let mut best: Option<REPoint> = None;
        for slot in slots.iter_mut().rev() {
            let e_bar = match slot {
                Ok(p) => p.e_bar,
                Err(g) => g.e_bar,
            };
            let carried = |b: &REPoint| REPoint {
                e_bar,
                source_e_bar: Some(b.source_e_bar.unwrap_or(b.e_bar)),
                ..b.clone()
            };
            match (&slot, &best) {
                (Ok(p), Some(b)) if b.rate > p.rate => *slot = Ok(carried(b)),
                (Ok(p), _) => best = Some(p.clone()),
                (Err(_), Some(b)) => *slot = Ok(carried(b)),
                (Err(_), None) => {}
            }
        }
        let (mut points, mut gaps) = (Vec::new(), Vec::new());
        for slot in slots {
            match slot {
                Ok(p) => points.push(p),
                Err(g) => gaps.push(g),
            }
        }
        Ok(REBoundary {
            strategy: raw.strategy,
            channel_digest: raw.channel_digest,
            points,
            gaps,
        })
    }

    /// Per-target solver output without the monotone envelope.
    pub fn sweep_raw(&self, grid: &[f64]) -> Result<REBoundary> {
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("energy grid must be strictly increasing"));
        }
        let mut points = Vec::with_capacity(grid.len());
        let mut gaps = Vec::new();
        for &e_bar in grid {
            match self.point(e_bar) {
                Ok(p) => points.push(p),
                Err(e) => gaps.push(GapMarker {
                    e_bar,
                    reason: e.to_string(),
                }),
            }
        }
        Ok(REBoundary {
            strategy: self.strategy,
            channel_digest: self.cs.digest(),
            points,
            gaps,
        })
    }
}

/// `n` uniformly spaced targets on `[0, e_max]`.
pub fn uniform_grid(e_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| e_max * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn emax(cs: &ChannelSet, strategy: StrategyId, power: f64) -> Result<f64> {
    BoundarySolver::new(cs, strategy, power)?.emax()
}

pub fn re_boundary_point(
    cs: &ChannelSet,
    strategy: StrategyId,
    e_bar: f64,
    power: f64,
    max_iterations: usize,
) -> Result<REPoint> {
    BoundarySolver::new(cs, strategy, power)?
        .with_max_iterations(max_iterations)?
        .point(e_bar)
}

pub fn re_sweep(cs: &ChannelSet, strategy: StrategyId, grid: &[f64], power: f64) -> Result<REBoundary> {
    BoundarySolver::new(cs, strategy, power)?.sweep(grid)
}
