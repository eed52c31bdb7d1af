//! Transmit strategies: water-filling, iterative water-filling for (ID, ID),
//! the energy-optimal beams for (EH, EH), and the rank-one beams used by the
//! first transmitter in the mixed modes (MEB, MLB, SLER, SLNR) plus the
//! rank-two MEB baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::metrics::{self, Beamformer, TxCovariance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyId {
    #[serde(rename = "IWF")]
    Iwf,
    #[serde(rename = "EH_OPT")]
    EhOpt,
    #[serde(rename = "MEB")]
    Meb,
    #[serde(rename = "MLB")]
    Mlb,
    #[serde(rename = "SLER")]
    Sler,
    #[serde(rename = "SLNR")]
    Slnr,
    #[serde(rename = "MEB_RANK2")]
    MebRank2,
    #[serde(rename = "NO_TX")]
    NoTx,
}

impl StrategyId {
    pub const ALL: [StrategyId; 8] = [
        StrategyId::Iwf,
        StrategyId::EhOpt,
        StrategyId::Meb,
        StrategyId::Mlb,
        StrategyId::Sler,
        StrategyId::Slnr,
        StrategyId::MebRank2,
        StrategyId::NoTx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::Iwf => "IWF",
            StrategyId::EhOpt => "EH_OPT",
            StrategyId::Meb => "MEB",
            StrategyId::Mlb => "MLB",
            StrategyId::Sler => "SLER",
            StrategyId::Slnr => "SLNR",
            StrategyId::MebRank2 => "MEB_RANK2",
            StrategyId::NoTx => "NO_TX",
        }
    }

    /// Strategies that can drive the first transmitter in a mixed-mode sweep.
    pub fn is_mixed_mode(self) -> bool {
        matches!(
            self,
            StrategyId::Meb | StrategyId::Mlb | StrategyId::Sler | StrategyId::Slnr | StrategyId::MebRank2
        )
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown strategy '{s}'")))
    }
}

/// Full water-filling solution, kept for KKT inspection.
#[derive(Debug, Clone)]
pub struct WaterFilling {
    pub covariance: TxCovariance,
    /// Common water level `mu` of the active modes.
    pub level: f64,
    /// Eigenvalues of `H^H R^{-1} H`, descending.
    pub gains: Vec<f64>,
    /// Power per eigenmode, aligned with `gains`.
    pub powers: Vec<f64>,
}

/// `WF(H, R, P) = U (mu I - D^{-1})^+ U^H` with `H^H R^{-1} H = U D U^H` and
/// the water level chosen so that the trace equals `P`.
pub fn waterfill(h: &CMatrix, r: &CMatrix, power: f64) -> Result<TxCovariance> {
    Ok(waterfill_detailed(h, r, power)?.covariance)
}

pub fn waterfill_detailed(h: &CMatrix, r: &CMatrix, power: f64) -> Result<WaterFilling> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::invalid(format!("water-filling power {power} must be > 0")));
    }
    let w = linalg::inv_sqrt_psd(r, 0.0)?;
    waterfill_whitened(&(w * h), power)
}

/// Water-filling over `I + H Q H^H` (noise already whitened).
pub(crate) fn waterfill_whitened(h_eff: &CMatrix, power: f64) -> Result<WaterFilling> {
    let n = h_eff.ncols();
    let gram = h_eff.adjoint() * h_eff;
    let eig = linalg::hermitian_eig_unchecked(&linalg::hermitian_part(&gram), n);
    let gains = eig.values;
    let top = gains[0];
    if !(top > 0.0) {
        return Err(Error::DegenerateChannel);
    }
    let usable = gains.iter().take_while(|&&d| d > 1e-12 * top).count();

    // Largest active set whose level clears the weakest member's inverse gain.
    let mut level = power + 1.0 / top;
    let mut active = 1;
    let mut inv_sum = 0.0;
    for k in 1..=usable {
        inv_sum += 1.0 / gains[k - 1];
        let mu = (power + inv_sum) / k as f64;
        if mu > 1.0 / gains[k - 1] {
            level = mu;
            active = k;
        } else {
            break;
        }
    }
    let powers: Vec<f64> = gains
        .iter()
        .enumerate()
        .map(|(k, &d)| if k < active { (level - 1.0 / d).max(0.0) } else { 0.0 })
        .collect();
    let q = linalg::scaled_projector(&eig.vectors, &powers);
    Ok(WaterFilling {
        covariance: TxCovariance::from_parts_unchecked(linalg::hermitian_part(&q), power),
        level,
        gains,
        powers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Both transmitters respond to the previous round's covariances.
    #[default]
    Simultaneous,
    /// Transmitter 2 responds to transmitter 1's fresh update.
    Sequential,
}

#[derive(Debug, Clone)]
pub struct IwfOutcome {
    pub q1: TxCovariance,
    pub q2: TxCovariance,
    /// `[R_1, R_2]` in bits.
    pub rates: [f64; 2],
    pub rounds: usize,
    /// Largest Frobenius change of either covariance in the final round.
    pub last_change: f64,
}

impl IwfOutcome {
    pub fn sum_rate(&self) -> f64 {
        self.rates[0] + self.rates[1]
    }
}

/// Iterative water-filling for (ID1, ID2), starting from `(P / M_t) I`.
pub fn iterative_waterfilling(
    cs: &ChannelSet,
    power: f64,
    max_rounds: usize,
    order: UpdateOrder,
) -> Result<IwfOutcome> {
    if max_rounds == 0 {
        return Err(Error::invalid("iterative water-filling needs at least one round"));
    }
    let m = cs.m_t();
    let mut q1 = TxCovariance::uniform(m, power);
    let mut q2 = TxCovariance::uniform(m, power);
    let mut last_change = f64::INFINITY;
    for _ in 0..max_rounds {
        let r1 = metrics::interference_cov(cs.h12(), q2.matrix())?;
        let next1 = waterfill(cs.h11(), &r1, power)?;
        let q1_for_rx2 = match order {
            UpdateOrder::Simultaneous => q1.matrix(),
            UpdateOrder::Sequential => next1.matrix(),
        };
        let r2 = metrics::interference_cov(cs.h21(), q1_for_rx2)?;
        let next2 = waterfill(cs.h22(), &r2, power)?;
        let d1 = linalg::frobenius_sq(&(next1.matrix() - q1.matrix())).sqrt();
        let d2 = linalg::frobenius_sq(&(next2.matrix() - q2.matrix())).sqrt();
        last_change = d1.max(d2);
        q1 = next1;
        q2 = next2;
    }
    let r1 = metrics::interference_cov(cs.h12(), q2.matrix())?;
    let r2 = metrics::interference_cov(cs.h21(), q1.matrix())?;
    let rates = [
        metrics::achievable_rate(cs.h11(), &r1, q1.matrix())?,
        metrics::achievable_rate(cs.h22(), &r2, q2.matrix())?,
    ];
    Ok(IwfOutcome {
        q1,
        q2,
        rates,
        rounds: max_rounds,
        last_change,
    })
}

/// Energy-optimal (EH1, EH2) covariances: `Q_j = P v_j v_j^H` with `v_j` the
/// top right singular vector of `[H_1j; H_2j]`.
pub fn eh_eh_optimal(cs: &ChannelSet, power: f64) -> Result<(TxCovariance, TxCovariance)> {
    let beam = |j: usize| -> Result<TxCovariance> {
        let (_, v) = linalg::right_singular_basis(&cs.stacked(j))?;
        Beamformer::new(linalg::column(&v, 0), power)?.to_tx(power)
    };
    Ok((beam(1)?, beam(2)?))
}

/// Maximum-energy beam: top right singular vector of `H11`.
pub fn meb(h11: &CMatrix, p1: f64) -> Result<Beamformer> {
    let (_, v) = linalg::right_singular_basis(h11)?;
    Beamformer::new(linalg::column(&v, 0), p1)
}

/// Minimum-leakage beam: least right singular vector of `H21` (a null-space
/// direction when `H21` is wide).
pub fn mlb(h21: &CMatrix, p1: f64) -> Result<Beamformer> {
    let (_, v) = linalg::right_singular_basis(h21)?;
    Beamformer::new(linalg::column(&v, v.ncols() - 1), p1)
}

/// Diagnostics of the GSVD-based ratio maximizer.
#[derive(Debug, Clone)]
pub struct GsvdBeam {
    pub beam: Beamformer,
    /// Diagonal loading on the denominator, `max(E/P1 - |H11|^2, 0)` for SLER.
    pub floor: f64,
    /// Step 4 used `R^{-1} = P_beta / sqrt(floor)` instead of a triangular solve.
    pub inversion_free: bool,
    /// The stacked matrix was rank deficient and a `1e-12` ridge was added.
    pub ridge_fallback: bool,
}

const GSVD_RIDGE: f64 = 1e-12;

/// Direction maximizing `|A u|^2 / (|B u|^2 + floor |u|^2)` through a QR
/// decomposition of `K = [A; B; sqrt(floor) I]` and an SVD of the leading
/// block of its orthonormal factor.
pub(crate) fn gsvd_max_direction(
    h_own: &CMatrix,
    h_cross: &CMatrix,
    floor: f64,
    own_norm_sq: f64,
) -> Result<(CVector, bool, bool)> {
    let m_t = h_own.ncols();
    let m_r = h_own.nrows();
    let build = |load: f64| {
        let loading = linalg::identity(m_t).scale(load.sqrt());
        linalg::vstack(&[h_own, h_cross, &loading])
    };
    let (qr, load, ridge_fallback) = match linalg::qrd(&build(floor)) {
        Ok(qr) => (qr, floor, false),
        Err(Error::RankDeficient { .. }) if floor == 0.0 => (linalg::qrd(&build(GSVD_RIDGE))?, GSVD_RIDGE, true),
        Err(e) => return Err(e),
    };
    let p_top = qr.q.rows(0, m_r).into_owned();
    let dec = linalg::svd(&p_top)?;
    let w = linalg::column(&dec.v, 0);

    let inversion_free = load > 1e-6 * own_norm_sq.max(f64::MIN_POSITIVE);
    let v = if inversion_free {
        let p_beta = qr.q.rows(2 * m_r, m_t);
        (p_beta * w).unscale(load.sqrt())
    } else {
        qr.r.solve_upper_triangular(&w)
            .ok_or(Error::Singular { min_eigenvalue: 0.0 })?
    };
    Ok((v, inversion_free, ridge_fallback))
}

/// SLER-maximizing beam via GSVD.
pub fn sler_beam(h11: &CMatrix, h21: &CMatrix, e_bar: f64, p1: f64) -> Result<GsvdBeam> {
    if !(p1 > 0.0) {
        return Err(Error::invalid(format!("SLER beam needs P1 > 0, got {p1}")));
    }
    let norm_sq = linalg::spectral_norm(h11)?.powi(2);
    sler_beam_with_norm(h11, h21, e_bar, p1, norm_sq)
}

pub(crate) fn sler_beam_with_norm(
    h11: &CMatrix,
    h21: &CMatrix,
    e_bar: f64,
    p1: f64,
    h11_norm_sq: f64,
) -> Result<GsvdBeam> {
    let floor = (e_bar / p1 - h11_norm_sq).max(0.0);
    let (v, inversion_free, ridge_fallback) = gsvd_max_direction(h11, h21, floor, h11_norm_sq)?;
    Ok(GsvdBeam {
        beam: Beamformer::new(v, p1)?,
        floor,
        inversion_free,
        ridge_fallback,
    })
}

/// Denominator loading of the SLNR baseline: `M_r / P1`.
pub fn slnr_noise_floor(m_r: usize, p1: f64) -> f64 {
    m_r as f64 / p1
}

/// SLNR-maximizing beam with noise loading `M_r / P1`.
pub fn slnr_beam(h11: &CMatrix, h21: &CMatrix, p1: f64) -> Result<Beamformer> {
    if !(p1 > 0.0) {
        return Err(Error::invalid(format!("SLNR beam needs P1 > 0, got {p1}")));
    }
    let floor = slnr_noise_floor(h11.nrows(), p1);
    let norm_sq = linalg::spectral_norm(h11)?.powi(2);
    let (v, _, _) = gsvd_max_direction(h11, h21, floor, norm_sq)?;
    Beamformer::new(v, p1)
}

/// Rank-two MEB: `P1 (split v1 v1^H + (1 - split) v2 v2^H)` over the two
/// strongest right singular vectors of `H11`.
pub fn meb_rank2(h11: &CMatrix, p1: f64, split: f64) -> Result<TxCovariance> {
    if h11.ncols() < 2 {
        return Err(Error::invalid("rank-two MEB needs at least two transmit antennas"));
    }
    if !(0.0..=1.0).contains(&split) {
        return Err(Error::invalid(format!("split {split} outside [0, 1]")));
    }
    let (_, v) = linalg::right_singular_basis(h11)?;
    let q =
        linalg::outer(&linalg::column(&v, 0)).scale(split) + linalg::outer(&linalg::column(&v, 1)).scale(1.0 - split);
    TxCovariance::new(q.scale(p1), p1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real_rows, identity};

    fn scalar(x: f64) -> CMatrix {
        from_real_rows(1, 1, &[x])
    }

    #[test]
    fn strategy_names_round_trip() {
        for id in StrategyId::ALL {
            assert_eq!(id.as_str().parse::<StrategyId>().unwrap(), id);
        }
        assert!("FOO".parse::<StrategyId>().is_err());
    }

    #[test]
    fn waterfill_examples() {
        let q = waterfill(&scalar(1.0), &scalar(1.0), 1.0).unwrap();
        assert!((q.matrix()[(0, 0)].re - 1.0).abs() < 1e-14);

        let q = waterfill(&identity(2), &identity(2), 2.0).unwrap();
        assert!(linalg::frobenius_sq(&(q.matrix() - identity(2))).sqrt() < 1e-14);

        // Gains 4 and 0.01: level 1.25 < 100, single mode.
        let h = diag_real(&[2.0, 0.1]);
        let wf = waterfill_detailed(&h, &identity(2), 1.0).unwrap();
        assert!((wf.level - 1.25).abs() < 1e-14);
        assert!(linalg::frobenius_sq(&(wf.covariance.matrix() - diag_real(&[1.0, 0.0]))).sqrt() < 1e-14);
    }

    #[test]
    fn waterfill_rejects_zero_channel() {
        assert!(matches!(
            waterfill(&CMatrix::zeros(2, 2), &identity(2), 1.0),
            Err(Error::DegenerateChannel)
        ));
    }

    #[test]
    fn iwf_decoupled_matches_single_user() {
        let cs = ChannelSet::draw(3, 3, [[1.0; 2]; 2], 31).unwrap();
        let zero = CMatrix::zeros(3, 3);
        let dec = ChannelSet::unnormalized([[cs.h11().clone(), zero.clone()], [zero, cs.h22().clone()]]);
        let out = iterative_waterfilling(&dec, 5.0, 1, UpdateOrder::Simultaneous).unwrap();
        let single = waterfill(cs.h11(), &identity(3), 5.0).unwrap();
        assert!(linalg::frobenius_sq(&(out.q1.matrix() - single.matrix())).sqrt() < 1e-12);
    }

    #[test]
    fn iwf_scalar_uses_full_power() {
        let h = |x: f64| scalar(x);
        let cs = ChannelSet::unnormalized([[h(1.0), h(0.9)], [h(0.8), h(1.2)]]);
        for order in [UpdateOrder::Simultaneous, UpdateOrder::Sequential] {
            let out = iterative_waterfilling(&cs, 50.0, 20, order).unwrap();
            assert!((out.q1.trace() - 50.0).abs() < 1e-9);
            let r2 = (1.0_f64 + 50.0 * 1.44 / (1.0 + 50.0 * 0.64)).log2();
            assert!((out.rates[1] - r2).abs() < 1e-10);
        }
    }

    #[test]
    fn eh_eh_examples() {
        let cs = ChannelSet::unnormalized([[scalar(1.0), scalar(2.0)], [scalar(3.0), scalar(4.0)]]);
        let (q1, q2) = eh_eh_optimal(&cs, 2.0).unwrap();
        assert!((q1.matrix()[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((q2.matrix()[(0, 0)].re - 2.0).abs() < 1e-14);

        // stacked [diag(3,1); 0] has sigma = [3, 1]: energy 9 P from Tx1
        let z = CMatrix::zeros(2, 2);
        let cs = ChannelSet::unnormalized([[diag_real(&[3.0, 1.0]), identity(2)], [z, identity(2)]]);
        let (q1, _) = eh_eh_optimal(&cs, 1.5).unwrap();
        let e = metrics::link_energy(cs.h11(), q1.matrix()) + metrics::link_energy(cs.h21(), q1.matrix());
        assert!((e - 9.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn meb_mlb_examples() {
        let h = diag_real(&[2.0, 1.0]);
        let b = meb(&h, 3.0).unwrap();
        assert!((b.direction()[0].re - 1.0).abs() < 1e-14);
        assert!((metrics::link_energy(&h, &b.covariance()) - 12.0).abs() < 1e-12);

        let b = mlb(&h, 3.0).unwrap();
        assert!((b.direction()[1].re - 1.0).abs() < 1e-14);
        assert!((metrics::link_energy(&h, &b.covariance()) - 3.0).abs() < 1e-12);

        assert_eq!(meb(&scalar(0.5), 1.0).unwrap().direction()[0].re, 1.0);
        assert_eq!(mlb(&scalar(0.5), 1.0).unwrap().direction()[0].re, 1.0);
    }

    #[test]
    fn sler_beam_isotropic_leakage_picks_strongest_mode() {
        let b = sler_beam(&diag_real(&[2.0, 1.0]), &identity(2), 0.0, 1.0).unwrap();
        assert!((b.beam.direction()[0].norm() - 1.0).abs() < 1e-12);
        assert!(!b.inversion_free);
    }

    #[test]
    fn sler_beam_large_target_uses_inversion_free_step() {
        let cs = ChannelSet::draw(4, 4, [[1.0; 2]; 2], 77).unwrap();
        let b = sler_beam(cs.h11(), cs.h21(), 1e9, 1.0).unwrap();
        assert!(b.inversion_free);
        let m = meb(cs.h11(), 1.0).unwrap();
        let overlap = (b.beam.direction().adjoint() * m.direction())[(0, 0)].norm();
        assert!(overlap > 0.999, "{overlap}");
    }

    #[test]
    fn sler_beam_ridge_fallback_on_rank_deficient_stack() {
        let h11 = from_real_rows(1, 2, &[1.0, 0.0]);
        let h21 = from_real_rows(1, 2, &[1.0, 0.0]);
        let b = sler_beam(&h11, &h21, 0.0, 1.0).unwrap();
        assert!(b.ridge_fallback);
    }

    #[test]
    fn slnr_beam_without_leakage_matches_meb() {
        let cs = ChannelSet::draw(4, 4, [[1.0; 2]; 2], 5).unwrap();
        let zero = CMatrix::zeros(4, 4);
        let b = slnr_beam(cs.h11(), &zero, 1.0).unwrap();
        let m = meb(cs.h11(), 1.0).unwrap();
        let overlap = (b.direction().adjoint() * m.direction())[(0, 0)].norm();
        assert!(overlap > 1.0 - 1e-9);
        assert_eq!(
            slnr_beam(&scalar(1.0), &scalar(1.0), 1.0).unwrap().direction()[0].re,
            1.0
        );
    }

    #[test]
    fn rank_two_meb() {
        let h = diag_real(&[2.0, 1.0]);
        let q = meb_rank2(&h, 2.0, 0.5).unwrap();
        assert!(linalg::frobenius_sq(&(q.matrix() - identity(2))).sqrt() < 1e-14);
        assert!((metrics::link_energy(&h, q.matrix()) - 5.0).abs() < 1e-12);
        assert_eq!(q.rank(1e-9), 2);

        let full = meb_rank2(&h, 2.0, 1.0).unwrap();
        assert!(linalg::frobenius_sq(&(full.matrix() - meb(&h, 2.0).unwrap().covariance())).sqrt() < 1e-14);
        assert!(meb_rank2(&scalar(1.0), 1.0, 0.5).is_err());
    }
}
