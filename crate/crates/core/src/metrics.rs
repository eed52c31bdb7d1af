//! Rates, harvested energies and the SLER / SLNR beamforming ratios.
//!
//! Rates are in bits per channel use (`log2`). Harvested energy follows the
//! high-SNR model with unit conversion efficiency: `E_i = sum_j tr(H_ij Q_j H_ij^H)`,
//! noise excluded.

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, Tolerances};

/// Hermitian PSD transmit covariance with a trace budget (Watts).
#[derive(Debug, Clone, PartialEq)]
pub struct TxCovariance {
    q: CMatrix,
    budget: f64,
}

impl TxCovariance {
    pub fn new(q: CMatrix, budget: f64) -> Result<Self> {
        let tol = Tolerances::DEFAULT.psd;
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::invalid(format!("power budget {budget} must be finite and >= 0")));
        }
        if !linalg::is_psd(&q, tol) {
            return Err(Error::invalid("transmit covariance is not Hermitian PSD"));
        }
        let tr = linalg::trace_re(&q);
        if tr > budget + tol * budget.max(1.0) {
            return Err(Error::invalid(format!("trace {tr} exceeds budget {budget}")));
        }
        Ok(Self {
            q: linalg::hermitian_part(&q),
            budget,
        })
    }

    pub fn zero(n: usize, budget: f64) -> Self {
        Self {
            q: CMatrix::zeros(n, n),
            budget,
        }
    }

    /// `(budget / n) I`.
    pub fn uniform(n: usize, budget: f64) -> Self {
        Self {
            q: linalg::identity(n).scale(budget / n as f64),
            budget,
        }
    }

    pub(crate) fn from_parts_unchecked(q: CMatrix, budget: f64) -> Self {
        Self { q, budget }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.q
    }

    pub fn into_matrix(self) -> CMatrix {
        self.q
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.q)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Number of eigenvalues above `rel_tol * budget`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let eig = linalg::hermitian_eig_unchecked(&self.q, self.dim());
        let floor = rel_tol * self.budget.max(f64::MIN_POSITIVE);
        eig.values.iter().filter(|&&l| l > floor).count()
    }
}

/// Unit-norm steering vector with an allocated power.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    v: CVector,
    power: f64,
}

impl Beamformer {
    /// Normalizes `direction` to unit length and fixes its phase so the first
    /// non-negligible entry is real positive.
    pub fn new(direction: CVector, power: f64) -> Result<Self> {
        let n = direction.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("beamformer direction must be nonzero and finite"));
        }
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::invalid(format!("beamformer power {power} must be >= 0")));
        }
        let mut v = direction.unscale(n);
        linalg::normalize_phase(&mut v);
        Ok(Self { v, power })
    }

    pub fn direction(&self) -> &CVector {
        &self.v
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn with_power(&self, power: f64) -> Self {
        Self {
            v: self.v.clone(),
            power,
        }
    }

    /// `power * v v^H`.
    pub fn covariance(&self) -> CMatrix {
        linalg::outer(&self.v).scale(self.power)
    }

    pub fn to_tx(&self, budget: f64) -> Result<TxCovariance> {
        TxCovariance::new(self.covariance(), budget)
    }
}

/// `I + H Q H^H`.
pub fn interference_cov(h_cross: &CMatrix, q_other: &CMatrix) -> Result<CMatrix> {
    if h_cross.ncols() != q_other.nrows() || !q_other.is_square() {
        return Err(Error::invalid("interference_cov: dimension mismatch"));
    }
    let n = h_cross.nrows();
    Ok(linalg::identity(n) + h_cross * q_other * h_cross.adjoint())
}

/// `log2 det(I + H Q H^H)`.
pub fn whitened_rate(h_eff: &CMatrix, q: &CMatrix) -> Result<f64> {
    let n = h_eff.nrows();
    let m = linalg::identity(n) + h_eff * q * h_eff.adjoint();
    linalg::log2_det_hpd(&m)
}

/// `log2 det(I + H^H R^{-1} H Q)`, evaluated as
/// `log2 det(I + R^{-1/2} H Q H^H R^{-1/2})`.
pub fn achievable_rate(h_own: &CMatrix, r_minus: &CMatrix, q: &CMatrix) -> Result<f64> {
    if h_own.ncols() != q.nrows() || r_minus.nrows() != h_own.nrows() {
        return Err(Error::invalid("achievable_rate: dimension mismatch"));
    }
    let w = linalg::inv_sqrt_psd(r_minus, 0.0)?;
    Ok(whitened_rate(&(w * h_own), q)?.max(0.0))
}

/// `Re tr(H Q H^H)`.
pub fn link_energy(h: &CMatrix, q: &CMatrix) -> f64 {
    linalg::trace_re(&(h * q * h.adjoint())).max(0.0)
}

/// Energy harvested at `receiver` (1 or 2): `E_i1 + E_i2`.
pub fn harvested_energy(cs: &ChannelSet, q1: &CMatrix, q2: &CMatrix, receiver: usize) -> f64 {
    link_energy(cs.h(receiver, 1), q1) + link_energy(cs.h(receiver, 2), q2)
}

/// Returned when a ratio's denominator vanishes.
pub const RATIO_INFINITY: f64 = f64::INFINITY;
const RATIO_DENOM_FLOOR: f64 = 1e-15;

/// Signal-to-leakage-and-harvested-energy ratio
/// `P1 |H_own u|^2 / (P1 |H_cross u|^2 + max(E_bar - P1 |H_own|^2, 0))`
/// with `|H_own|` the spectral norm. Without the floor the ratio reduces to
/// signal over leakage. Returns [`RATIO_INFINITY`] for a vanishing denominator.
pub fn sler(beam: &Beamformer, h_own: &CMatrix, h_cross: &CMatrix, e_bar: f64, with_floor: bool) -> Result<f64> {
    let norm_sq = linalg::spectral_norm(h_own)?.powi(2);
    Ok(sler_with_norm(beam, h_own, h_cross, e_bar, with_floor, norm_sq))
}

pub(crate) fn sler_with_norm(
    beam: &Beamformer,
    h_own: &CMatrix,
    h_cross: &CMatrix,
    e_bar: f64,
    with_floor: bool,
    own_norm_sq: f64,
) -> f64 {
    let p1 = beam.power();
    let signal = p1 * (h_own * beam.direction()).norm_squared();
    let leak = p1 * (h_cross * beam.direction()).norm_squared();
    let floor = if with_floor {
        (e_bar - p1 * own_norm_sq).max(0.0)
    } else {
        0.0
    };
    ratio(signal, leak + floor)
}

/// Signal-to-leakage-and-noise ratio of a unit direction:
/// `|H_own u|^2 / (|H_cross u|^2 + noise_floor)`.
pub fn slnr(beam: &Beamformer, h_own: &CMatrix, h_cross: &CMatrix, noise_floor: f64) -> f64 {
    let u = beam.direction();
    ratio((h_own * u).norm_squared(), (h_cross * u).norm_squared() + noise_floor)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den < RATIO_DENOM_FLOOR {
        RATIO_INFINITY
    } else {
        num / den
    }
}
