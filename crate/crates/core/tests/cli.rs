use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ifc_swipt::experiment::{read_curve, CURVE_HEADER};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifc-swipt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_preset(preset: &str, dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--preset", preset, "--output", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn fig2_writes_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_preset("fig2", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let curves = dir.path().join("curves/m4x4_a0.80/EH1_ID2");
    let meb = read_curve(&curves.join("MEB_seed1.csv")).unwrap();
    let mlb = read_curve(&curves.join("MLB_seed1.csv")).unwrap();
    assert_eq!(meb.len(), 64);
    assert!(meb.last().unwrap().2 > mlb.last().unwrap().2);
    assert!(meb.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 <= w[0].1 + 1e-6));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["config"]["figure_preset"], "fig2");
    assert_eq!(summary["channels"][0]["digest"].as_str().unwrap().len(), 64);
    for artifact in summary["artifacts"].as_array().unwrap() {
        assert!(dir.path().join(artifact["path"].as_str().unwrap()).exists());
    }
}

#[test]
fn curve_header_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_preset("fig2", dir.path(), &[]).status.success());
    let text = fs::read_to_string(dir.path().join("curves/m4x4_a0.80/EH1_ID2/MEB_seed1.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CURVE_HEADER.join(","));
}

#[test]
fn no_tx_rows_have_zero_power_and_empty_multipliers() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_preset("fig2", dir.path(), &[]).status.success());
    let text = fs::read_to_string(dir.path().join("curves/m4x4_a0.80/EH1_ID2/MEB_seed1.csv")).unwrap();
    let no_tx: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[6] == "NO_TX")
        .collect();
    assert!(!no_tx.is_empty());
    for f in no_tx {
        assert_eq!(f[5].parse::<f64>().unwrap(), 0.0);
        assert_eq!((f[8], f[9]), ("", ""));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert!(
            run_preset("fig8", dir.path(), &["--set", "seeds=[1,2]", "--workers", "1"])
                .status
                .success()
        );
    }
    let csv = |root: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|x| x == "csv") {
                    let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                    files.push((rel, fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    };
    let (fa, fb) = (csv(a.path()), csv(b.path()));
    assert!(fa.len() > 5);
    assert_eq!(fa, fb);
}

#[test]
fn set_overrides_reach_the_config() {
    let out = cli(&[
        "run",
        "--preset",
        "fig4",
        "--set",
        "seeds=[5,6,7]",
        "--set",
        "e_grid_points=9",
        "--print-config",
    ]);
    assert!(out.status.success());
    let cfg: toml::Table = stdout(&out).parse().unwrap();
    assert_eq!(cfg["seeds"].as_array().unwrap().len(), 3);
    assert_eq!(cfg["e_grid_points"].as_integer(), Some(9));
    assert_eq!(cfg["power"].as_float(), Some(0.1));
}

#[test]
fn config_file_layers_over_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, "figure_preset = \"fig5\"\nseeds = [9]\n").unwrap();
    let out = cli(&["run", "--config", path.to_str().unwrap(), "--print-config"]);
    assert!(out.status.success());
    let cfg: toml::Table = stdout(&out).parse().unwrap();
    assert_eq!(cfg["m_t"].as_integer(), Some(15));
    assert_eq!(cfg["seeds"].as_array().unwrap()[0].as_integer(), Some(9));
}

#[test]
fn startup_errors_exit_one_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_preset("fig9", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    let out = run_preset("fig2", dir.path(), &["--set", "power=-1"]);
    assert_eq!(out.status.code(), Some(1));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = run_preset("fig2", &blocker.join("sub"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(fs::read_dir(dir.path()).unwrap().count() == 1);
}

#[test]
fn table1_reports_orderings() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_preset("table1", dir.path(), &["--set", "seeds=[1,2,3,4,5]"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("of 5 seeds"), "{text}");
    let table = fs::read_to_string(dir.path().join("single_modes.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 5 * 2 * 2);
}

#[test]
fn show_preset_and_validate_channels() {
    let out = cli(&["show-preset", "fig7"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("m_t = 3"));

    let dir = tempfile::tempdir().unwrap();
    assert!(run_preset("fig2", dir.path(), &[]).status.success());
    let file = dir.path().join("channels/m4x4_a0.80/seed1.json");
    let out = cli(&["validate-channels", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("4x4 sha256 "));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{}").unwrap();
    assert_eq!(
        cli(&["validate-channels", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn oracle_suite_selects_criteria() {
    let out = cli(&["oracle-suite", "--quick", "--criteria", "2,3"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.starts_with("[PASS]")));
}
