//! Simultaneous diagonalization of the direct and cross links to the first
//! transmitter: an invertible `T` with `U_G^H H11 T = Sigma_G` and
//! `V_G^H H21 T = I`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

#[derive(Debug, Clone)]
pub struct GsvdTransform {
    pub t: CMatrix,
    pub u_g: CMatrix,
    pub v_g: CMatrix,
    /// Generalized singular values, descending.
    pub sigma_g: Vec<f64>,
}

impl GsvdTransform {
    /// Frobenius residuals of the two defining identities.
    pub fn residuals(&self, h11: &CMatrix, h21: &CMatrix) -> (f64, f64) {
        let n = self.t.ncols();
        let first = self.u_g.adjoint() * h11 * &self.t - linalg::diag_real(&self.sigma_g);
        let second = self.v_g.adjoint() * h21 * &self.t - linalg::identity(n);
        (
            linalg::frobenius_sq(&first).sqrt(),
            linalg::frobenius_sq(&second).sqrt(),
        )
    }
}

/// GSVD route: `[H11; H21] = [Q1; Q2] R`, `Q1 = U_G C Z^H`, and with
/// `S = diag(|Q2 z_k|)` one gets `V_G = Q2 Z S^{-1}`, `T = R^{-1} Z S^{-1}`
/// and `Sigma_G = C S^{-1}`.
pub fn gsvd_transform(h11: &CMatrix, h21: &CMatrix) -> Result<GsvdTransform> {
    let (m_r, m_t) = h11.shape();
    if h21.shape() != (m_r, m_t) {
        return Err(Error::invalid("H11 and H21 must have the same shape"));
    }
    if m_r < m_t {
        return Err(Error::invalid(
            "transform needs at least as many receive as transmit antennas",
        ));
    }
    let dec21 = linalg::svd(h21)?;
    let smax = dec21.sigma[0];
    let smin = dec21.sigma[m_t - 1];
    if !(smin > 1e-12 * smax.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular {
            min_eigenvalue: smin * smin,
        });
    }

    let qr = linalg::qrd(&linalg::vstack(&[h11, h21]))?;
    let q1 = qr.q.rows(0, m_r).into_owned();
    let q2 = qr.q.rows(m_r, m_r).into_owned();
    let dec = linalg::svd(&q1)?;
    let z = dec.v;
    let mut v_g = &q2 * &z;
    let mut sigma_g = Vec::with_capacity(m_t);
    let mut scale = Vec::with_capacity(m_t);
    for k in 0..m_t {
        let s = v_g.column(k).norm();
        if !(s > 0.0) {
            return Err(Error::Singular { min_eigenvalue: 0.0 });
        }
        v_g.column_mut(k).unscale_mut(s);
        sigma_g.push(dec.sigma[k] / s);
        scale.push(1.0 / s);
    }
    let r_inv_z =
        qr.r.solve_upper_triangular(&z)
            .ok_or(Error::Singular { min_eigenvalue: 0.0 })?;
    let t = r_inv_z * linalg::diag_real(&scale);
    Ok(GsvdTransform {
        t,
        u_g: dec.u,
        v_g,
        sigma_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSet;
    use crate::linalg::{from_real_rows, identity};

    #[test]
    fn identity_pair() {
        let l = gsvd_transform(&identity(3), &identity(3)).unwrap();
        let (a, b) = l.residuals(&identity(3), &identity(3));
        assert!(a < 1e-12 && b < 1e-12);
        for s in &l.sigma_g {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_residuals_and_order() {
        for seed in 0..50 {
            let m = 2 + (seed as usize % 5);
            let cs = ChannelSet::draw(m, m, [[1.0; 2]; 2], seed).unwrap();
            let l = gsvd_transform(cs.h11(), cs.h21()).unwrap();
            let (a, b) = l.residuals(cs.h11(), cs.h21());
            assert!(a < 1e-8 && b < 1e-8, "seed {seed}: {a:e} {b:e}");
            assert!(l.sigma_g.windows(2).all(|w| w[0] >= w[1]));
            assert!(l.sigma_g.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn singular_cross_link_is_rejected() {
        let h21 = from_real_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            gsvd_transform(&identity(2), &h21),
            Err(Error::Singular { .. })
        ));
    }
}
