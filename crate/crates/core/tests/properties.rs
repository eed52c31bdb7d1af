use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ifc_swipt::beamformers::{self, StrategyId};
use ifc_swipt::boundary::{self, BoundarySolver};
use ifc_swipt::channel::gaussian_matrix;
use ifc_swipt::linalg::{self, c, CMatrix};
use ifc_swipt::oracle;
use ifc_swipt::scheduler::{self, ModeTag};
use ifc_swipt::ChannelSet;

fn matrix(seed: u64, rows: usize, cols: usize) -> CMatrix {
    gaussian_matrix(&mut ChaCha8Rng::seed_from_u64(seed), rows, cols)
}

fn alpha(cross: f64) -> [[f64; 2]; 2] {
    [[1.0, cross], [cross, 1.0]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn draw_meets_frobenius_normalization(m_t in 1usize..6, m_r in 1usize..6, a in 0.05f64..1.0, seed: u64) {
        let cs = ChannelSet::draw(m_t, m_r, alpha(a), seed).unwrap();
        let m = m_t.max(m_r) as f64;
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let want = alpha(a)[i][j] * m;
            let got = linalg::frobenius_sq(cs.h(i + 1, j + 1));
            prop_assert!((got - want).abs() <= 1e-9 * want);
        }
        let back = ChannelSet::from_json(&cs.to_json(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back.digest(), cs.digest());
    }

    #[test]
    fn generalized_eig_scales_with_the_pencil(m in 1usize..6, seed: u64, a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let x = matrix(seed, m + 1, m);
        let y = matrix(seed ^ 1, m + 2, m);
        let num = x.adjoint() * &x;
        let den = y.adjoint() * &y + linalg::identity(m).scale(0.1);
        let (base, v) = oracle::generalized_eig_max(&num, &den).unwrap();
        let (scaled, w) = oracle::generalized_eig_max(&num.scale(a), &den.scale(b)).unwrap();
        prop_assert!((scaled - base * a / b).abs() <= 1e-8 * scaled);
        prop_assert!((v.dotc(&w).norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sler_beam_ignores_a_common_channel_scale(m in 2usize..6, seed: u64, e in 0.0f64..200.0, s in 0.1f64..10.0) {
        let h11 = matrix(seed, m, m);
        let h21 = matrix(seed ^ 7, m, m);
        let p1 = 50.0;
        let base = beamformers::sler_beam(&h11, &h21, e, p1).unwrap();
        let scaled = beamformers::sler_beam(&h11.scale(s), &h21.scale(s), e * s * s, p1).unwrap();
        let overlap = base.beam.direction().dotc(scaled.beam.direction()).norm();
        prop_assert!(overlap > 1.0 - 1e-8, "overlap {}", overlap);
        prop_assert!((scaled.floor - base.floor * s * s).abs() <= 1e-9 * (1.0 + scaled.floor));
    }

    #[test]
    fn waterfilling_satisfies_kkt(rows in 1usize..7, cols in 1usize..7, seed: u64, power in 0.01f64..100.0) {
        let h = matrix(seed, rows, cols);
        let g = matrix(seed ^ 3, rows, rows);
        let r = linalg::identity(rows) + &g * g.adjoint();
        let wf = beamformers::waterfill_detailed(&h, &r, power).unwrap();
        prop_assert!((wf.covariance.trace() - power).abs() <= 1e-10 * power);
        for (&gain, &p) in wf.gains.iter().zip(&wf.powers) {
            if p > 0.0 {
                prop_assert!((p + 1.0 / gain - wf.level).abs() <= 1e-8 * wf.level);
            } else if gain > 0.0 {
                prop_assert!(1.0 / gain >= wf.level * (1.0 - 1e-12));
            }
        }
        let eig = linalg::hermitian_eig(wf.covariance.matrix()).unwrap();
        prop_assert!(eig.values.iter().all(|&v| v >= -1e-10 * power));
    }

    #[test]
    fn mode_choice_follows_the_user_swap(seed: u64, a in 0.1f64..1.0, frac in 0.0f64..1.0) {
        let cs = ChannelSet::draw(2, 2, alpha(a), seed).unwrap();
        let e_bar = frac * 50.0 * linalg::spectral_norm(cs.h11()).unwrap().powi(2);
        let (s1, s2) = scheduler::sler_pair(&cs, e_bar, 50.0).unwrap();
        let direct = scheduler::select_mode(&cs, e_bar, 50.0).unwrap();
        let swapped = scheduler::select_mode(&cs.swapped(), e_bar, 50.0).unwrap();
        if s1 != s2 {
            prop_assert_ne!(direct, swapped);
        } else {
            prop_assert_eq!(direct, ModeTag::Eh1Id2);
        }
    }

    #[test]
    fn sweeps_are_monotone_and_feasible(seed in 0u64..10_000, m in 2usize..5, k in 0usize..4) {
        let strategy = [StrategyId::Meb, StrategyId::Mlb, StrategyId::Sler, StrategyId::Slnr][k];
        let cs = ChannelSet::draw(m, m, alpha(0.8), seed).unwrap();
        let solver = BoundarySolver::new(&cs, strategy, 50.0).unwrap();
        let grid = boundary::uniform_grid(solver.emax().unwrap(), 12);
        let b = solver.sweep(&grid).unwrap();
        prop_assert!(b.gaps.is_empty());
        prop_assert!(b.monotonicity_violation() <= 1e-6);
        for p in &b.points {
            prop_assert!(p.energy >= p.e_bar - 1e-6, "{} < {}", p.energy, p.e_bar);
            prop_assert!(p.p1 >= 0.0 && p.p1 <= 50.0 * (1.0 + 1e-12));
        }
    }
}

#[test]
fn zero_cross_link_makes_mlb_and_sler_leakage_free() {
    let h = |re: f64| linalg::from_real_rows(2, 2, &[re, 0.0, 0.0, 0.5 * re]);
    let mut h21 = h(1.0);
    h21[(0, 0)] = c(0.0, 0.0);
    let cs = ChannelSet::unnormalized([[h(2.0), h(1.0)], [h21, h(2.0)]]);
    let beam = beamformers::mlb(cs.h21(), 1.0).unwrap();
    assert!((cs.h21() * beam.direction()).norm() < 1e-12);
    let sler = beamformers::sler_beam(cs.h11(), cs.h21(), 0.0, 1.0).unwrap();
    assert!((cs.h21() * sler.beam.direction()).norm() < 1e-9);
}
