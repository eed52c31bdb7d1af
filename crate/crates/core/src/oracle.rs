//! Brute-force verifiers that share no code path with the solvers they check:
//! random covariance search, whitened generalized eigenproblems, and random
//! local perturbation of subproblem solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::channel::gaussian_matrix;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::metrics::{self, TxCovariance};

/// Uniformly distributed unit vector in `C^m`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CVector {
    let v = CVector::from_fn(m, |_, _| {
        c64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let n = v.norm();
    v.unscale(n)
}

/// Random trace-`power` covariance of the given rank: orthonormal directions
/// from a Gaussian QR, powers uniform on the simplex.
pub fn random_covariance<R: Rng + ?Sized>(rng: &mut R, m: usize, power: f64, rank: usize) -> CMatrix {
    let g = gaussian_matrix(rng, m, rank);
    let q = g.qr().q();
    let weights: Vec<f64> = (0..rank).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| power * w / total).collect();
    linalg::hermitian_part(&linalg::scaled_projector(&q, &p))
}

/// Best of `trials` random covariances under `objective`. Deterministic per
/// seed.
pub fn random_psd_search<F: FnMut(&CMatrix) -> f64>(
    mut objective: F,
    m: usize,
    power: f64,
    rank: usize,
    trials: usize,
    seed: u64,
) -> Result<(TxCovariance, f64)> {
    if trials == 0 || rank == 0 || rank > m {
        return Err(Error::invalid(format!(
            "random search needs trials >= 1 and 1 <= rank <= {m}, got {trials} and {rank}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<(CMatrix, f64)> = None;
    for _ in 0..trials {
        let q = random_covariance(&mut rng, m, power, rank);
        let value = objective(&q);
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((q, value));
        }
    }
    let (q, value) = best.expect("at least one trial");
    Ok((TxCovariance::new(q, power)?, value))
}

/// Largest generalized eigenvalue of `(a_num, a_den)` and its unit vector,
/// through `a_den^{-1/2} a_num a_den^{-1/2}`.
pub fn generalized_eig_max(a_num: &CMatrix, a_den: &CMatrix) -> Result<(f64, CVector)> {
    linalg::hermitian_eig(a_num)?;
    let w = linalg::inv_sqrt_psd(a_den, 0.0)?;
    let whitened = &w * a_num * &w;
    let eig = linalg::hermitian_eig(&linalg::hermitian_part(&whitened))?;
    let mut v = &w * linalg::column(&eig.vectors, 0);
    v.normalize_mut();
    linalg::normalize_phase(&mut v);
    let num = (v.adjoint() * a_num * &v)[(0, 0)].re;
    let den = (v.adjoint() * a_den * &v)[(0, 0)].re;
    Ok((num / den, v))
}

/// Instance of the second transmitter's energy-constrained rate problem.
#[derive(Debug, Clone)]
pub struct ConstrainedRateProblem {
    pub h_tilde: CMatrix,
    pub h12: CMatrix,
    pub e_target: f64,
    pub power: f64,
}

impl ConstrainedRateProblem {
    pub fn is_feasible(&self, q: &CMatrix, tol: f64) -> bool {
        linalg::is_psd(q, tol)
            && linalg::trace_re(q) <= self.power * (1.0 + tol)
            && metrics::link_energy(&self.h12, q) >= self.e_target - tol * self.e_target.max(1.0)
    }

    pub fn objective(&self, q: &CMatrix) -> f64 {
        metrics::whitened_rate(&self.h_tilde, q).unwrap_or(f64::NEG_INFINITY)
    }
}

/// True when `candidate` is feasible and none of `perturbations` random
/// feasible points at Frobenius distance about `step * P` improves the rate
/// by more than `1e-7`. Perturbed points are projected onto the PSD cone and
/// scaled into the budget; those missing the energy target are discarded.
pub fn grid_kkt_check(
    problem: &ConstrainedRateProblem,
    candidate: &CMatrix,
    perturbations: usize,
    step: f64,
    seed: u64,
) -> bool {
    if !problem.is_feasible(candidate, 1e-9) {
        return false;
    }
    let base = problem.objective(candidate);
    let m = candidate.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..perturbations {
        let g = gaussian_matrix(&mut rng, m, m);
        let d = linalg::hermitian_part(&g);
        let d = d.unscale(linalg::frobenius_sq(&d).sqrt()).scale(step * problem.power);
        let moved = project_psd(&(candidate + d));
        let trace = linalg::trace_re(&moved);
        let moved = if trace > problem.power {
            moved.scale(problem.power / trace)
        } else {
            moved
        };
        if metrics::link_energy(&problem.h12, &moved) < problem.e_target {
            continue;
        }
        if problem.objective(&moved) > base + 1e-7 {
            return false;
        }
    }
    true
}

fn project_psd(a: &CMatrix) -> CMatrix {
    let eig = linalg::hermitian_eig_unchecked(&linalg::hermitian_part(a), a.nrows());
    let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    linalg::scaled_projector(&eig.vectors, &clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamformers;
    use crate::boundary::ConstrainedRateSolver;
    use crate::channel::ChannelSet;
    use crate::linalg::{diag_real, identity};

    #[test]
    fn random_covariances_are_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for rank in 1..=4 {
            let q = random_covariance(&mut rng, 4, 2.5, rank);
            assert!((linalg::trace_re(&q) - 2.5).abs() < 1e-12);
            assert!(linalg::is_psd(&q, 1e-12));
            let t = TxCovariance::new(q, 2.5).unwrap();
            assert_eq!(t.rank(1e-12), rank);
        }
    }

    #[test]
    fn search_never_beats_rank_one_energy_optimum() {
        let cs = ChannelSet::draw(3, 3, [[1.0; 2]; 2], 8).unwrap();
        let h = cs.stacked(1);
        let top = linalg::svd(&h).unwrap().sigma[0];
        let (_, best) = random_psd_search(|q| metrics::link_energy(&h, q), 3, 2.0, 2, 2000, 1).unwrap();
        assert!(best <= 2.0 * top * top + 1e-9);
        let (_, best) = random_psd_search(linalg::trace_re, 3, 2.0, 3, 10, 1).unwrap();
        assert!(best <= 2.0 + 1e-12);
    }

    #[test]
    fn search_is_deterministic_and_validates() {
        let f = |q: &CMatrix| q[(0, 0)].re;
        let a = random_psd_search(f, 2, 1.0, 1, 50, 9).unwrap();
        let b = random_psd_search(f, 2, 1.0, 1, 50, 9).unwrap();
        assert_eq!(a.1, b.1);
        assert!(random_psd_search(f, 2, 1.0, 3, 5, 0).is_err());
        assert!(random_psd_search(f, 2, 1.0, 1, 0, 0).is_err());
    }

    #[test]
    fn generalized_eig_examples() {
        let (v, x) = generalized_eig_max(&diag_real(&[4.0, 1.0]), &identity(2)).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
        assert!((x[0].norm() - 1.0).abs() < 1e-14);

        let a = diag_real(&[2.0, 3.0]);
        let (v, _) = generalized_eig_max(&a, &a).unwrap();
        assert!((v - 1.0).abs() < 1e-14);

        assert!(matches!(
            generalized_eig_max(&identity(2), &diag_real(&[1.0, 0.0])),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn generalized_eig_scale_invariance() {
        let cs = ChannelSet::draw(4, 4, [[1.0; 2]; 2], 1).unwrap();
        let a = cs.h11().adjoint() * cs.h11();
        let b = cs.h21().adjoint() * cs.h21() + identity(4);
        let (v1, _) = generalized_eig_max(&a, &b).unwrap();
        let (v2, _) = generalized_eig_max(&a.scale(7.5), &b.scale(7.5)).unwrap();
        assert!((v1 - v2).abs() < 1e-10 * v1);
    }

    #[test]
    fn kkt_check_accepts_solver_output_and_rejects_infeasible() {
        let cs = ChannelSet::draw(2, 2, [[1.0, 0.8], [0.8, 1.0]], 21).unwrap();
        let solver = ConstrainedRateSolver::new(cs.h12(), 10.0).unwrap();
        let wf = beamformers::waterfill(cs.h22(), &identity(2), 10.0).unwrap();
        let lo = solver.cross().energy(wf.matrix());
        let hi = solver.cross().max_energy();

        let problem = ConstrainedRateProblem {
            h_tilde: cs.h22().clone(),
            h12: cs.h12().clone(),
            e_target: 0.0,
            power: 10.0,
        };
        assert!(grid_kkt_check(&problem, wf.matrix(), 300, 1e-3, 1));

        let e = 0.5 * (lo + hi);
        let sol = solver.solve(cs.h22(), e).unwrap();
        let problem = ConstrainedRateProblem { e_target: e, ..problem };
        assert!(grid_kkt_check(&problem, sol.q2.matrix(), 300, 1e-3, 2));
        assert!(!grid_kkt_check(&problem, &CMatrix::zeros(2, 2), 10, 1e-3, 3));
        // Water-filling misses an active target.
        assert!(!grid_kkt_check(&problem, wf.matrix(), 10, 1e-3, 4));
    }
}
