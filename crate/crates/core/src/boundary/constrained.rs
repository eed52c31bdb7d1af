//! Second-transmitter subproblem: maximize `log det(I + Ht Q Ht^H)` subject to
//! `tr(H12 Q H12^H) >= e` and `tr(Q) <= P`, where `Ht` is the direct link
//! already whitened by the first transmitter's interference.
//!
//! The dual is minimized by nested root finding on the partial derivatives of
//! `g(lambda, mu)`: for fixed `lambda`, `mu` is chosen so that `tr(Q) = P`;
//! `lambda` is then chosen so that the energy constraint holds with equality.
//! Multipliers are expressed for the natural-log objective.

use serde::Serialize;

use crate::beamformers;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::metrics::{self, TxCovariance};
use crate::roots;

/// Dual iterate reported with every dual-branch solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualState {
    pub lambda: f64,
    pub mu: f64,
    /// Outer (lambda) evaluations performed.
    pub step_index: usize,
    /// `g(lambda, mu)` minus the reported primal rate, in bits.
    pub best_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstrainedBranch {
    /// Unconstrained water-filling already meets the energy target.
    #[serde(rename = "WF")]
    Wf,
    /// Energy constraint active, solved through the dual.
    #[serde(rename = "DUAL")]
    Dual,
    /// Target equals the cross-link maximum; the feasible set is the single
    /// cross-link beam.
    #[serde(rename = "CROSS_BEAM")]
    CrossBeam,
}

#[derive(Debug, Clone)]
pub struct ConstrainedRateSolution {
    pub q2: TxCovariance,
    /// Achievable rate in bits.
    pub rate: f64,
    /// `tr(H12 Q2 H12^H)`.
    pub energy: f64,
    pub branch: ConstrainedBranch,
    pub dual: Option<DualState>,
}

/// Eigenstructure of `H12^H H12`, shared by every subproblem on one channel.
#[derive(Debug, Clone)]
pub struct CrossLink {
    h12: CMatrix,
    gains: Vec<f64>,
    basis: CMatrix,
    power: f64,
}

impl CrossLink {
    pub fn new(h12: &CMatrix, power: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid(format!("power {power} must be > 0")));
        }
        let n = h12.ncols();
        let eig = linalg::hermitian_eig_unchecked(&linalg::hermitian_part(&(h12.adjoint() * h12)), n);
        let gains: Vec<f64> = eig.values.iter().map(|g| g.max(0.0)).collect();
        if !(gains[0] > 0.0) {
            return Err(Error::DegenerateChannel);
        }
        Ok(CrossLink {
            h12: h12.clone(),
            gains,
            basis: eig.vectors,
            power,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `P sigma_{12,1}^2`, the most energy the second transmitter can deliver.
    pub fn max_energy(&self) -> f64 {
        self.power * self.gains[0]
    }

    pub fn energy(&self, q: &CMatrix) -> f64 {
        metrics::link_energy(&self.h12, q)
    }

    /// Top right singular vector of `H12`.
    pub fn beam(&self) -> CVector {
        let mut v = linalg::column(&self.basis, 0);
        linalg::normalize_phase(&mut v);
        v
    }

    pub fn beam_covariance(&self) -> CMatrix {
        linalg::outer(&self.beam()).scale(self.power)
    }

    fn infeasibility_tolerance(&self) -> f64 {
        1e-9 * self.max_energy().max(1.0)
    }
}

/// Maximizer of `ln det(I + Ht Q Ht^H) - tr(A Q)` over `Q >= 0`:
/// `A^{-1/2} V diag((1 - 1/s_i^2)^+) V^H A^{-1/2}` from the SVD of `Ht A^{-1/2}`.
pub fn inner_max(a: &CMatrix, h_tilde: &CMatrix) -> Result<TxCovariance> {
    if a.nrows() != h_tilde.ncols() || !a.is_square() {
        return Err(Error::invalid("weighting matrix does not match the channel width"));
    }
    linalg::hermitian_eig(a)?;
    let a_isqrt = match linalg::inv_sqrt_psd(a, 0.0) {
        Err(Error::Singular { .. }) => return Err(Error::DualInfeasible),
        other => other?,
    };
    let dec = linalg::svd(&(h_tilde * &a_isqrt))?;
    let p: Vec<f64> = dec.sigma.iter().map(|s| (1.0 - 1.0 / (s * s)).max(0.0)).collect();
    let core = linalg::scaled_projector(&dec.v, &p);
    let q = linalg::hermitian_part(&(&a_isqrt * core * &a_isqrt));
    let trace = linalg::trace_re(&q);
    Ok(TxCovariance::from_parts_unchecked(q, trace))
}

/// Evaluation of the inner maximizer at `A = mu I - lambda G`, carried out in
/// the eigenbasis of `G` where `A^{-1/2}` is diagonal.
struct InnerEval {
    trace: f64,
    energy: f64,
    scale: Vec<f64>,
    modes: CMatrix,
    gains: Vec<f64>,
    powers: Vec<f64>,
}

struct Weighted<'a> {
    cross: &'a CrossLink,
    /// `W^H Ht^H Ht W`.
    gram: CMatrix,
}

impl Weighted<'_> {
    /// `u = mu - lambda g_1 > 0`.
    fn eval(&self, lambda: f64, u: f64) -> InnerEval {
        let n = self.gram.nrows();
        let g = &self.cross.gains;
        let scale: Vec<f64> = g.iter().map(|gk| 1.0 / (u + lambda * (g[0] - gk)).sqrt()).collect();
        let b = CMatrix::from_fn(n, n, |i, j| self.gram[(i, j)] * (scale[i] * scale[j]));
        let eig = linalg::hermitian_eig_unchecked(&b, n);
        let powers: Vec<f64> = eig
            .values
            .iter()
            .map(|&d| if d > 1.0 { 1.0 - 1.0 / d } else { 0.0 })
            .collect();
        let mut trace = 0.0;
        let mut energy = 0.0;
        for k in 0..n {
            let diag: f64 = (0..n).map(|i| powers[i] * eig.vectors[(k, i)].norm_sqr()).sum();
            let contrib = scale[k] * scale[k] * diag;
            trace += contrib;
            energy += g[k] * contrib;
        }
        InnerEval {
            trace,
            energy,
            scale,
            modes: eig.vectors,
            gains: eig.values,
            powers,
        }
    }

    fn covariance(&self, ev: &InnerEval) -> CMatrix {
        let core = linalg::scaled_projector(&ev.modes, &ev.powers);
        let n = core.nrows();
        let scaled = CMatrix::from_fn(n, n, |i, j| core[(i, j)] * (ev.scale[i] * ev.scale[j]));
        let w = &self.cross.basis;
        linalg::hermitian_part(&(w * scaled * w.adjoint()))
    }

    /// `g(lambda, mu)` in nats.
    fn dual_value(&self, ev: &InnerEval, lambda: f64, mu: f64, e_target: f64) -> f64 {
        let lagrangian: f64 = ev
            .gains
            .iter()
            .zip(&ev.powers)
            .map(|(&d, &p)| (1.0 + d * p).ln() - p)
            .sum();
        lagrangian + mu * self.cross.power - lambda * e_target
    }

    /// Solves `tr(Q(lambda, u)) = P` for `x = ln u`, starting near `guess`.
    fn solve_trace(&self, lambda: f64, guess: Option<f64>) -> Result<(f64, InnerEval)> {
        let power = self.cross.power;
        let x_cap = linalg::trace_re(&self.gram).max(f64::MIN_POSITIVE).ln();
        let f = |x: f64| self.eval(lambda, x.exp()).trace - power;

        let x0 = guess.unwrap_or(x_cap - 1.0).min(x_cap);
        let f0 = f(x0);
        let (mut lo, mut flo, mut hi, mut fhi);
        if f0 > 0.0 {
            (lo, flo) = (x0, f0);
            (hi, fhi) = (x_cap, -power);
            let mut step = 0.5;
            while lo + step < x_cap {
                let fx = f(lo + step);
                if fx <= 0.0 {
                    (hi, fhi) = (lo + step, fx);
                    break;
                }
                (lo, flo) = (lo + step, fx);
                step *= 2.0;
            }
        } else {
            (hi, fhi) = (x0, f0);
            let mut step = 0.5;
            loop {
                let x = hi - step;
                let fx = f(x);
                if fx > 0.0 {
                    (lo, flo) = (x, fx);
                    break;
                }
                (hi, fhi) = (x, fx);
                step *= 2.0;
                if step > 2048.0 {
                    return Err(Error::DegenerateChannel);
                }
            }
        }
        let root = roots::brent(f, lo, flo, hi, fhi, 1e-14, 1e-13 * power, 200);
        Ok((root, self.eval(lambda, root.exp())))
    }
}

/// Solver for repeated subproblems sharing one cross link and budget.
#[derive(Debug, Clone)]
pub struct ConstrainedRateSolver {
    cross: CrossLink,
}

impl ConstrainedRateSolver {
    pub fn new(h12: &CMatrix, power: f64) -> Result<Self> {
        Ok(ConstrainedRateSolver {
            cross: CrossLink::new(h12, power)?,
        })
    }

    pub fn from_cross_link(cross: CrossLink) -> Self {
        ConstrainedRateSolver { cross }
    }

    pub fn cross(&self) -> &CrossLink {
        &self.cross
    }

    pub fn solve(&self, h_tilde: &CMatrix, e_target: f64) -> Result<ConstrainedRateSolution> {
        if h_tilde.ncols() != self.cross.h12.ncols() {
            return Err(Error::invalid("whitened channel width does not match the cross link"));
        }
        let power = self.cross.power;
        let e_max = self.cross.max_energy();
        if e_target > e_max + self.cross.infeasibility_tolerance() {
            return Err(Error::Infeasible {
                target: e_target,
                max_attainable: e_max,
            });
        }

        let wf = beamformers::waterfill_whitened(h_tilde, power)?;
        let wf_energy = self.cross.energy(wf.covariance.matrix());
        if e_target <= 0.0 || wf_energy >= e_target {
            let rate = metrics::whitened_rate(h_tilde, wf.covariance.matrix())?;
            return Ok(ConstrainedRateSolution {
                q2: wf.covariance,
                rate,
                energy: wf_energy,
                branch: ConstrainedBranch::Wf,
                dual: None,
            });
        }

        if e_target >= e_max * (1.0 - 1e-12) {
            let q = self.cross.beam_covariance();
            return Ok(ConstrainedRateSolution {
                rate: metrics::whitened_rate(h_tilde, &q)?,
                energy: self.cross.energy(&q),
                q2: TxCovariance::from_parts_unchecked(q, power),
                branch: ConstrainedBranch::CrossBeam,
                dual: None,
            });
        }

        self.solve_dual(h_tilde, e_target)
    }

    fn solve_dual(&self, h_tilde: &CMatrix, e_target: f64) -> Result<ConstrainedRateSolution> {
        let power = self.cross.power;
        let w = &self.cross.basis;
        let gram = linalg::hermitian_part(&(w.adjoint() * (h_tilde.adjoint() * h_tilde) * w));
        let problem = Weighted {
            cross: &self.cross,
            gram,
        };

        let mut warm: Option<f64> = None;
        let mut steps = 0usize;
        let mut failure: Option<Error> = None;
        let mut phi = |lambda: f64| -> f64 {
            steps += 1;
            match problem.solve_trace(lambda, warm) {
                Ok((x, ev)) => {
                    warm = Some(x);
                    ev.energy - e_target
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        };

        let mut lo = 0.0;
        let mut flo = phi(0.0);
        let mut hi = 1.0 / self.cross.max_energy();
        let mut fhi = phi(hi);
        let mut doublings = 0;
        while fhi <= 0.0 && doublings < 200 {
            (lo, flo) = (hi, fhi);
            hi *= 2.0;
            fhi = phi(hi);
            doublings += 1;
        }
        let lambda = if fhi > 0.0 && flo <= 0.0 {
            let xtol = 1e-15 * hi;
            let ftol = 1e-12 * e_target.max(1.0);
            roots::brent(&mut phi, lo, flo, hi, fhi, xtol, ftol, 300)
        } else {
            hi
        };
        if let Some(e) = failure {
            return Err(e);
        }

        let (x, ev) = problem.solve_trace(lambda, warm)?;
        let u = x.exp();
        let mu = u + lambda * self.cross.gains[0];
        let dual_nats = problem.dual_value(&ev, lambda, mu, e_target);

        let q = self.repair(problem.covariance(&ev), e_target);
        let energy = self.cross.energy(&q);
        let rate = metrics::whitened_rate(h_tilde, &q)?;
        Ok(ConstrainedRateSolution {
            q2: TxCovariance::from_parts_unchecked(q, power),
            rate,
            energy,
            branch: ConstrainedBranch::Dual,
            dual: Some(DualState {
                lambda,
                mu,
                step_index: steps,
                best_gap: dual_nats / std::f64::consts::LN_2 - rate,
            }),
        })
    }

    /// Restores `tr(Q) <= P` by scaling, then `tr(G Q) >= e` by mixing with
    /// the cross-link beam at the smallest sufficient weight.
    fn repair(&self, mut q: CMatrix, e_target: f64) -> CMatrix {
        let power = self.cross.power;
        let trace = linalg::trace_re(&q);
        if trace > power {
            q *= linalg::re(power / trace);
        }
        let energy = self.cross.energy(&q);
        if energy < e_target {
            let t = ((e_target - energy) / (self.cross.max_energy() - energy)).clamp(0.0, 1.0);
            q = q.scale(1.0 - t) + self.cross.beam_covariance().scale(t);
        }
        q
    }
}

/// One-shot form of [`ConstrainedRateSolver::solve`].
pub fn solve_constrained_rate(
    h22_tilde: &CMatrix,
    h12: &CMatrix,
    e_target: f64,
    power: f64,
) -> Result<ConstrainedRateSolution> {
    ConstrainedRateSolver::new(h12, power)?.solve(h22_tilde, e_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSet;
    use crate::linalg::{diag_real, from_real_rows, identity};

    fn fro(a: &CMatrix) -> f64 {
        linalg::frobenius_sq(a).sqrt()
    }

    #[test]
    fn inner_max_examples() {
        let q = inner_max(&identity(2), &identity(2)).unwrap();
        assert!(fro(q.matrix()) < 1e-14);

        let q = inner_max(&identity(2).scale(0.25), &identity(2)).unwrap();
        assert!(fro(&(q.matrix() - identity(2).scale(3.0))) < 1e-12);
        assert!((q.trace() - 6.0).abs() < 1e-12);

        // scalar: q = (1/a - 1/h^2)^+
        let q = inner_max(&from_real_rows(1, 1, &[0.5]), &from_real_rows(1, 1, &[2.0])).unwrap();
        assert!((q.matrix()[(0, 0)].re - 1.75).abs() < 1e-14);
        let q = inner_max(&from_real_rows(1, 1, &[5.0]), &from_real_rows(1, 1, &[2.0])).unwrap();
        assert_eq!(q.trace(), 0.0);
    }

    #[test]
    fn inner_max_rejects_indefinite_weight() {
        assert!(matches!(
            inner_max(&diag_real(&[1.0, -1.0]), &identity(2)),
            Err(Error::DualInfeasible)
        ));
    }

    #[test]
    fn weighted_evaluation_matches_inner_max() {
        let cs = ChannelSet::draw(3, 3, [[1.0, 0.8], [0.8, 1.0]], 4).unwrap();
        let cross = CrossLink::new(cs.h12(), 10.0).unwrap();
        let h = cs.h22();
        let w = &cross.basis;
        let gram = linalg::hermitian_part(&(w.adjoint() * (h.adjoint() * h) * w));
        let problem = Weighted { cross: &cross, gram };
        let g = cs.h12().adjoint() * cs.h12();
        for &(lambda, u) in &[(0.0, 0.3), (0.2, 0.1), (1.5, 0.05)] {
            let mu = u + lambda * cross.gains[0];
            let a = identity(3).scale(mu) - g.scale(lambda);
            let reference = inner_max(&a, h).unwrap();
            let ev = problem.eval(lambda, u);
            let q = problem.covariance(&ev);
            assert!(fro(&(q - reference.matrix())) < 1e-9 * (1.0 + reference.trace()));
            assert!((ev.trace - reference.trace()).abs() < 1e-9 * (1.0 + reference.trace()));
        }
    }

    #[test]
    fn zero_target_is_water_filling() {
        let cs = ChannelSet::draw(4, 4, [[1.0, 0.8], [0.8, 1.0]], 8).unwrap();
        let sol = solve_constrained_rate(cs.h22(), cs.h12(), 0.0, 50.0).unwrap();
        assert_eq!(sol.branch, ConstrainedBranch::Wf);
        let wf = beamformers::waterfill(cs.h22(), &identity(4), 50.0).unwrap();
        let rate = metrics::whitened_rate(cs.h22(), wf.matrix()).unwrap();
        assert!((sol.rate - rate).abs() < 1e-12);
    }

    #[test]
    fn full_target_is_cross_beam() {
        let cs = ChannelSet::draw(4, 4, [[1.0, 0.8], [0.8, 1.0]], 9).unwrap();
        let solver = ConstrainedRateSolver::new(cs.h12(), 50.0).unwrap();
        let e = solver.cross().max_energy();
        let sol = solver.solve(cs.h22(), e).unwrap();
        assert_eq!(sol.branch, ConstrainedBranch::CrossBeam);
        let beam = solver.cross().beam_covariance();
        assert!(fro(&(sol.q2.matrix() - &beam)) < 1e-12);

        // The dual branch approaches the same beam from below.
        let near = solver.solve(cs.h22(), e * (1.0 - 1e-7)).unwrap();
        assert_eq!(near.branch, ConstrainedBranch::Dual);
        assert!(fro(&(near.q2.matrix() - &beam)) < 1e-2 * 50.0);
        assert!(near.rate >= sol.rate - 1e-9);
    }

    #[test]
    fn infeasible_target_reports_limit() {
        let cs = ChannelSet::draw(2, 2, [[1.0; 2]; 2], 3).unwrap();
        let solver = ConstrainedRateSolver::new(cs.h12(), 1.0).unwrap();
        let e = solver.cross().max_energy();
        match solver.solve(cs.h22(), 1.01 * e) {
            Err(Error::Infeasible { max_attainable, .. }) => assert!((max_attainable - e).abs() < 1e-15),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn dual_branch_is_feasible_tight_and_dual_consistent() {
        for seed in 0..20 {
            let cs = ChannelSet::draw(4, 4, [[1.0, 0.8], [0.8, 1.0]], seed).unwrap();
            let solver = ConstrainedRateSolver::new(cs.h12(), 50.0).unwrap();
            let wf = beamformers::waterfill(cs.h22(), &identity(4), 50.0).unwrap();
            let lo = solver.cross().energy(wf.matrix());
            let hi = solver.cross().max_energy();
            for frac in [0.1, 0.5, 0.9, 0.999] {
                let e = lo + frac * (hi - lo);
                let sol = solver.solve(cs.h22(), e).unwrap();
                assert_eq!(sol.branch, ConstrainedBranch::Dual);
                let dual = sol.dual.unwrap();
                assert!(sol.energy >= e - 1e-9 * e, "seed {seed}: {} < {e}", sol.energy);
                assert!(sol.energy <= e + 1e-6 * e);
                assert!(sol.q2.trace() <= 50.0 + 1e-9);
                assert!(linalg::is_psd(sol.q2.matrix(), 1e-9));
                assert!(dual.best_gap > -1e-9 && dual.best_gap < 1e-6, "gap {}", dual.best_gap);
                assert!(dual.mu > dual.lambda * solver.cross().gains[0]);
            }
        }
    }

    #[test]
    fn rate_decreases_with_target() {
        let cs = ChannelSet::draw(3, 3, [[1.0, 0.8], [0.8, 1.0]], 12).unwrap();
        let solver = ConstrainedRateSolver::new(cs.h12(), 10.0).unwrap();
        let hi = solver.cross().max_energy();
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let sol = solver.solve(cs.h22(), hi * k as f64 / 40.0).unwrap();
            assert!(sol.rate <= prev + 1e-9);
            prev = sol.rate;
        }
    }

    #[test]
    fn scalar_problem_closed_form() {
        // One antenna: Q = max(WF power, e / g) capped by P.
        let h22 = from_real_rows(1, 1, &[1.0]);
        let h12 = from_real_rows(1, 1, &[0.5]);
        let sol = solve_constrained_rate(&h22, &h12, 0.1, 2.0).unwrap();
        assert!((sol.q2.trace() - 2.0).abs() < 1e-10);
        assert!((sol.rate - 3f64.log2()).abs() < 1e-10);
    }
}
