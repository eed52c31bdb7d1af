use std::fs;

use ifc_swipt::beamformers::StrategyId;
use ifc_swipt::boundary::{self, BoundarySolver};
use ifc_swipt::experiment::{emit_plot_data, read_curve};
use ifc_swipt::ChannelSet;

fn sweep(seed: u64, points: usize) -> boundary::REBoundary {
    let cs = ChannelSet::draw(4, 4, [[1.0, 0.8], [0.8, 1.0]], seed).unwrap();
    let solver = BoundarySolver::new(&cs, StrategyId::Sler, 50.0).unwrap();
    solver
        .sweep(&boundary::uniform_grid(solver.emax().unwrap(), points))
        .unwrap()
}

#[test]
fn two_point_boundary_is_three_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.csv");
    emit_plot_data(&sweep(1, 2), 1, &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 3);
}

#[test]
fn csv_round_trip_is_within_1e10() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 1..=5 {
        let b = sweep(seed, 32);
        let path = dir.path().join(format!("nested/seed{seed}.csv"));
        emit_plot_data(&b, seed, &path).unwrap();
        let back = read_curve(&path).unwrap();
        assert_eq!(back.len(), b.points.len());
        for (p, (e_bar, rate, energy)) in b.points.iter().zip(back) {
            for (x, y) in [(p.e_bar, e_bar), (p.rate, rate), (p.energy, energy)] {
                assert!((x - y).abs() <= 1e-10 * x.abs(), "{x} vs {y}");
            }
        }
    }
}

#[test]
fn unwritable_path_reports_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let err = emit_plot_data(&sweep(1, 2), 1, &blocker.join("x.csv")).unwrap_err();
    assert!(err.to_string().contains("blocker"), "{err}");
}
