//! Experiment configuration, figure presets, Monte-Carlo runs and their CSV
//! and JSON artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamformers::{self, StrategyId, UpdateOrder};
use crate::boundary::{self, BoundarySolver, REBoundary, TimeSharingCurve};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics;
use crate::scheduler::{self, ModePair, ModeTag, ScheduledCurves};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Table1,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig8,
        Preset::Table1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
            Preset::Table1 => "table1",
        }
    }

    /// Embedded TOML for the preset. Fields left out take the
    /// [`ExperimentConfig`] defaults.
    pub fn toml(self) -> &'static str {
        match self {
            Preset::Fig2 => {
                "# MEB and MLB boundaries with time-sharing baselines.\n\
                 figure_preset = \"fig2\"\n\
                 m_t = 4\nm_r = 4\nalpha = [[1.0, 0.8], [0.8, 1.0]]\npower = 50.0\n\
                 strategies = [\"MEB\", \"MLB\"]\ntime_sharing = true\nseeds = [1]\n"
            }
            Preset::Fig3 => {
                "# Rank-one MEB against the rank-two MEB and MLB.\n\
                 figure_preset = \"fig3\"\n\
                 m_t = 4\nm_r = 4\nalpha = [[1.0, 0.8], [0.8, 1.0]]\npower = 50.0\n\
                 strategies = [\"MEB\", \"MEB_RANK2\", \"MLB\"]\nseeds = [1]\n"
            }
            Preset::Fig4 => {
                "# Low transmit power.\n\
                 figure_preset = \"fig4\"\n\
                 m_t = 4\nm_r = 4\nalpha = [[1.0, 0.8], [0.8, 1.0]]\npower = 0.1\n\
                 strategies = [\"MEB\", \"MLB\"]\nseeds = [1]\n"
            }
            Preset::Fig5 => {
                "# Fifteen antennas per node.\n\
                 figure_preset = \"fig5\"\n\
                 m_t = 15\nm_r = 15\nalpha = [[1.0, 0.8], [0.8, 1.0]]\npower = 50.0\n\
                 strategies = [\"MEB\", \"MLB\"]\nseeds = [1]\n"
            }
            Preset::Fig6 => {
                "# All rank-one beamformers.\n\
                 figure_preset = \"fig6\"\n\
                 m_t = 4\nm_r = 4\nalpha = [[1.0, 0.8], [0.8, 1.0]]\npower = 50.0\n\
                 strategies = [\"MEB\", \"MLB\", \"SLNR\", \"SLER\"]\nseeds = [1]\n"
            }
            Preset::Fig7 => {
                "# Three transmit and four receive antennas.\n\
                 figure_preset = \"fig7\"\n\
                 m_t = 3\nm_r = 4\nalpha = [[1.0, 0.8], [0.8, 1.0]]\npower = 50.0\n\
                 strategies = [\"MEB\", \"MLB\", \"SLNR\", \"SLER\"]\nseeds = [1]\n"
            }
            Preset::Fig8 => {
                "# SLER beamforming with and without mode scheduling, two cross-link strengths.\n\
                 figure_preset = \"fig8\"\n\
                 m_t = 2\nm_r = 2\ncross_alphas = [0.7, 1.0]\npower = 50.0\n\
                 strategies = [\"SLER\"]\nmodes = [\"EH1_ID2\", \"ID1_EH2\"]\nscheduling = true\nseeds = [1]\n"
            }
            Preset::Table1 => {
                "# Single-mode rate and energy for two and four antennas.\n\
                 figure_preset = \"table1\"\n\
                 antenna_counts = [2, 4]\nalpha = [[1.0, 0.8], [0.8, 1.0]]\npower = 50.0\n\
                 strategies = []\nmodes = [\"ID_ID\", \"EH_EH\"]\nseeds = [1]\n"
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.as_str()).collect();
                Error::invalid(format!("unknown preset '{s}'; expected one of {}", names.join(", ")))
            })
    }
}

fn default_alpha() -> [[f64; 2]; 2] {
    [[1.0, 0.8], [0.8, 1.0]]
}

fn default_strategies() -> Vec<StrategyId> {
    vec![StrategyId::Meb, StrategyId::Mlb]
}

fn default_modes() -> Vec<ModeTag> {
    vec![ModeTag::Eh1Id2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub m_t: usize,
    pub m_r: usize,
    pub alpha: [[f64; 2]; 2],
    /// Transmit power budget of each transmitter in Watts.
    pub power: f64,
    /// Rank-one strategies swept in every mixed mode.
    pub strategies: Vec<StrategyId>,
    pub e_grid_points: usize,
    pub seeds: Vec<u64>,
    /// Mixed modes are swept; `ID_ID` and `EH_EH` add single-mode table rows.
    pub modes: Vec<ModeTag>,
    pub output_dir: PathBuf,
    pub figure_preset: Option<Preset>,
    /// Time-sharing baselines for the MEB and MLB strategies.
    pub time_sharing: bool,
    /// SLER mode scheduling between the two mixed modes.
    pub scheduling: bool,
    pub scheduling_strategy: StrategyId,
    /// When non-empty, one variant per value with `alpha_ij` replaced and
    /// `alpha_ii = 1`.
    pub cross_alphas: Vec<f64>,
    /// When non-empty, one square variant per antenna count.
    pub antenna_counts: Vec<usize>,
    pub max_iterations: usize,
    pub iwf_rounds: usize,
    pub iwf_order: UpdateOrder,
    pub rank2_split: f64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m_t: 4,
            m_r: 4,
            alpha: default_alpha(),
            power: 50.0,
            strategies: default_strategies(),
            e_grid_points: boundary::DEFAULT_GRID_POINTS,
            seeds: vec![1],
            modes: default_modes(),
            output_dir: PathBuf::from("out"),
            figure_preset: None,
            time_sharing: false,
            scheduling: false,
            scheduling_strategy: StrategyId::Sler,
            cross_alphas: Vec::new(),
            antenna_counts: Vec::new(),
            max_iterations: boundary::DEFAULT_MAX_ITERATIONS,
            iwf_rounds: boundary::DEFAULT_MAX_ITERATIONS,
            iwf_order: UpdateOrder::Simultaneous,
            rank2_split: 0.5,
            workers: 1,
        }
    }
}

fn parse_toml(text: &str, origin: &Path) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parses `key=value`; the value is read as a TOML value and falls back to a
/// bare string.
fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override '{item}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::invalid(format!("override '{item}' has an empty key")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

impl ExperimentConfig {
    pub fn from_preset(preset: Preset) -> Result<Self> {
        Self::resolve(Some(preset), None, &[])
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_table(parse_toml(text, Path::new("<inline>"))?)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Layers a preset, a config file and `key=value` overrides, later
    /// layers winning. A file naming a `figure_preset` uses it as its base
    /// unless `preset` is given.
    pub fn resolve(preset: Option<Preset>, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let file_table = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Some(parse_toml(&text, path)?)
            }
            None => None,
        };
        let base = match preset {
            Some(p) => Some(p),
            None => match file_table.as_ref().and_then(|t| t.get("figure_preset")) {
                Some(toml::Value::String(s)) => Some(s.parse()?),
                _ => None,
            },
        };
        let mut table = match base {
            Some(p) => parse_toml(p.toml(), Path::new(p.as_str()))?,
            None => toml::Table::new(),
        };
        table.extend(file_table.unwrap_or_default());
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key, value);
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if !(self.power > 0.0 && self.power.is_finite()) {
            return fail(format!("power must be positive, got {}", self.power));
        }
        if self.e_grid_points < 2 {
            return fail(format!("e_grid_points must be at least 2, got {}", self.e_grid_points));
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.m_t == 0 || self.m_r == 0 || self.antenna_counts.contains(&0) {
            return fail("antenna counts must be positive".into());
        }
        let in_unit = |a: f64| (0.0..=1.0).contains(&a);
        if !self.alpha.iter().flatten().all(|&a| in_unit(a)) || !self.cross_alphas.iter().all(|&a| in_unit(a)) {
            return fail("alpha coefficients must lie in [0, 1]".into());
        }
        if let Some(s) = self.strategies.iter().find(|s| !s.is_mixed_mode()) {
            return fail(format!("strategy {s} cannot drive a mixed-mode sweep"));
        }
        let mixed = self
            .modes
            .iter()
            .any(|m| matches!(m, ModeTag::Eh1Id2 | ModeTag::Id1Eh2));
        if mixed && self.strategies.is_empty() {
            return fail("mixed modes requested without any strategy".into());
        }
        if self.modes.is_empty() && !self.scheduling {
            return fail("modes must not be empty".into());
        }
        if self.scheduling && !self.scheduling_strategy.is_mixed_mode() {
            return fail(format!(
                "scheduling strategy {} is not a rank-one strategy",
                self.scheduling_strategy
            ));
        }
        if self.max_iterations == 0 || self.iwf_rounds == 0 {
            return fail("iteration limits must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.rank2_split) {
            return fail(format!("rank2_split must lie in [0, 1], got {}", self.rank2_split));
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        Ok(())
    }

    /// The `(m_t, m_r, alpha)` combinations this config expands to.
    pub fn variants(&self) -> Vec<Variant> {
        let sizes: Vec<(usize, usize)> = if self.antenna_counts.is_empty() {
            vec![(self.m_t, self.m_r)]
        } else {
            self.antenna_counts.iter().map(|&m| (m, m)).collect()
        };
        let alphas: Vec<[[f64; 2]; 2]> = if self.cross_alphas.is_empty() {
            vec![self.alpha]
        } else {
            self.cross_alphas.iter().map(|&a| [[1.0, a], [a, 1.0]]).collect()
        };
        let mut out = Vec::new();
        for &(m_t, m_r) in &sizes {
            for &alpha in &alphas {
                out.push(Variant { m_t, m_r, alpha });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Variant {
    pub m_t: usize,
    pub m_r: usize,
    pub alpha: [[f64; 2]; 2],
}

impl Variant {
    /// Directory-safe label, e.g. `m4x4_a0.80`.
    pub fn label(&self) -> String {
        let a = self.alpha;
        let alpha = if a[0][0] == 1.0 && a[1][1] == 1.0 && a[0][1] == a[1][0] {
            format!("{:.2}", a[0][1])
        } else {
            format!("{:.2}-{:.2}-{:.2}-{:.2}", a[0][0], a[0][1], a[1][0], a[1][1])
        };
        format!("m{}x{}_a{alpha}", self.m_t, self.m_r)
    }
}

/// One mixed-mode sweep of one strategy on one draw.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub mode: ModeTag,
    pub strategy: StrategyId,
    pub e_max: f64,
    pub boundary: REBoundary,
}

#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub variant: Variant,
    pub seed: u64,
    pub channels: ChannelSet,
    pub sweeps: Vec<SweepRecord>,
    pub time_sharing: Vec<(ModeTag, TimeSharingCurve)>,
    pub scheduling: Option<ScheduledCurves>,
    pub single_modes: Vec<ModePair>,
    pub seconds: f64,
}

fn mixed_modes(cfg: &ExperimentConfig) -> Vec<ModeTag> {
    cfg.modes
        .iter()
        .copied()
        .filter(|m| matches!(m, ModeTag::Eh1Id2 | ModeTag::Id1Eh2))
        .collect()
}

fn solver_for<'a>(cfg: &ExperimentConfig, cs: &'a ChannelSet, strategy: StrategyId) -> Result<BoundarySolver<'a>> {
    let solver = if strategy == StrategyId::MebRank2 {
        let shape = beamformers::meb_rank2(cs.h11(), 1.0, cfg.rank2_split)?.into_matrix();
        BoundarySolver::with_shape(cs, strategy, shape, cfg.power)?
    } else {
        BoundarySolver::new(cs, strategy, cfg.power)?
    };
    solver.with_max_iterations(cfg.max_iterations)
}

/// Everything computed for one `(variant, seed)`.
pub fn run_task(cfg: &ExperimentConfig, variant: Variant, seed: u64) -> Result<TaskOutput> {
    let start = Instant::now();
    let cs = ChannelSet::draw(variant.m_t, variant.m_r, variant.alpha, seed)?;
    let digest = cs.digest();
    let mut sweeps = Vec::new();
    let mut time_sharing = Vec::new();
    for mode in mixed_modes(cfg) {
        let ch = scheduler::mode_channel(&cs, mode)?;
        for &strategy in &cfg.strategies {
            let solver = solver_for(cfg, &ch, strategy)?;
            let e_max = solver.emax()?;
            let mut b = solver.sweep(&boundary::uniform_grid(e_max, cfg.e_grid_points))?;
            b.channel_digest.clone_from(&digest);
            sweeps.push(SweepRecord {
                mode,
                strategy,
                e_max,
                boundary: b,
            });
            if cfg.time_sharing && matches!(strategy, StrategyId::Meb | StrategyId::Mlb) {
                let weights = boundary::uniform_grid(1.0, cfg.e_grid_points);
                let mut ts = boundary::time_sharing_curve(&ch, strategy, cfg.power, &weights)?;
                ts.channel_digest.clone_from(&digest);
                time_sharing.push((mode, ts));
            }
        }
    }
    let scheduling = if cfg.scheduling {
        let grid = boundary::uniform_grid(1.0, cfg.e_grid_points);
        Some(scheduler::scheduled_curves(
            &cs,
            cfg.scheduling_strategy,
            cfg.power,
            &grid,
        )?)
    } else {
        None
    };
    let mut single_modes = Vec::new();
    if cfg.modes.contains(&ModeTag::IdId) {
        let iwf = beamformers::iterative_waterfilling(&cs, cfg.power, cfg.iwf_rounds, cfg.iwf_order)?;
        single_modes.push(ModePair {
            tag: ModeTag::IdId,
            rate: iwf.sum_rate(),
            energy: 0.0,
        });
    }
    if cfg.modes.contains(&ModeTag::EhEh) {
        let (q1, q2) = beamformers::eh_eh_optimal(&cs, cfg.power)?;
        let energy = metrics::harvested_energy(&cs, q1.matrix(), q2.matrix(), 1)
            + metrics::harvested_energy(&cs, q1.matrix(), q2.matrix(), 2);
        single_modes.push(ModePair {
            tag: ModeTag::EhEh,
            rate: 0.0,
            energy,
        });
    }
    Ok(TaskOutput {
        variant,
        seed,
        channels: cs,
        sweeps,
        time_sharing,
        scheduling,
        single_modes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Twelve significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

pub const CURVE_HEADER: [&str; 10] = [
    "strategy",
    "seed",
    "e_bar",
    "rate_bits",
    "energy",
    "p1",
    "branch",
    "iterations",
    "lambda",
    "mu",
];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Boundary rows in the curve schema, gaps included with branch `GAP`,
/// sorted by `e_bar`.
pub fn boundary_rows(b: &REBoundary, seed: u64) -> Vec<Vec<String>> {
    let mut rows: Vec<(f64, Vec<String>)> = b
        .points
        .iter()
        .map(|p| {
            (
                p.e_bar,
                vec![
                    b.strategy.to_string(),
                    seed.to_string(),
                    fmt_float(p.e_bar),
                    fmt_float(p.rate),
                    fmt_float(p.energy),
                    fmt_float(p.p1),
                    p.branch.as_str().to_string(),
                    p.iterations.to_string(),
                    opt_float(p.lambda),
                    opt_float(p.mu),
                ],
            )
        })
        .collect();
    rows.extend(b.gaps.iter().map(|g| {
        let mut row = vec![String::new(); CURVE_HEADER.len()];
        row[0] = b.strategy.to_string();
        row[1] = seed.to_string();
        row[2] = fmt_float(g.e_bar);
        row[6] = "GAP".into();
        (g.e_bar, row)
    }));
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.into_iter().map(|(_, r)| r).collect()
}

/// Writes a boundary in the curve schema.
pub fn emit_plot_data(b: &REBoundary, seed: u64, path: &Path) -> Result<()> {
    write_rows(path, &CURVE_HEADER, &boundary_rows(b, seed))
}

fn time_sharing_rows(ts: &TimeSharingCurve, seed: u64, power: f64) -> Vec<Vec<String>> {
    let mut points = ts.points.clone();
    points.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    points
        .iter()
        .map(|p| {
            vec![
                ts.strategy.to_string(),
                seed.to_string(),
                fmt_float(p.energy),
                fmt_float(p.rate),
                fmt_float(p.energy),
                fmt_float(p.tau * power),
                "TIME_SHARING".into(),
                "0".into(),
                String::new(),
                String::new(),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelRecord {
    pub variant: String,
    pub seed: u64,
    pub digest: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskTiming {
    pub variant: String,
    pub seed: u64,
    pub seconds: f64,
}

/// Fraction of seeds on which the larger antenna count beats the smaller
/// one in both single-mode energy and rate.
#[derive(Debug, Clone, Serialize)]
pub struct SingleModeOrdering {
    pub smaller: String,
    pub larger: String,
    pub pairs: usize,
    pub energy_larger: f64,
    pub rate_larger: f64,
    pub both_larger: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Partial,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Partial => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub status: RunStatus,
    pub gap_points: usize,
    pub channels: Vec<ChannelRecord>,
    pub artifacts: Vec<Artifact>,
    pub tasks: Vec<TaskTiming>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub single_mode_orderings: Vec<SingleModeOrdering>,
    pub wall_seconds: f64,
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Runs every `(variant, seed)` task on a pool of `cfg.workers` threads and
/// writes all artifacts under `cfg.output_dir` in task order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    prepare_output(&cfg.output_dir)?;
    let start = Instant::now();
    let tasks: Vec<(Variant, u64)> = cfg
        .variants()
        .into_iter()
        .flat_map(|v| cfg.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let outputs: Vec<TaskOutput> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(v, s)| run_task(cfg, v, s).map_err(|e| Error::invalid(format!("{} seed {s}: {e}", v.label()))))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut writer = ArtifactWriter::new(&cfg.output_dir);
    write_task_artifacts(cfg, &outputs, &mut writer)?;
    write_aggregates(cfg, &outputs, &mut writer)?;

    let gap_points: usize = outputs
        .iter()
        .flat_map(|o| &o.sweeps)
        .map(|s| s.boundary.gaps.len())
        .sum();
    let manifest = Manifest {
        config: cfg.clone(),
        status: if gap_points == 0 {
            RunStatus::Ok
        } else {
            RunStatus::Partial
        },
        gap_points,
        channels: outputs
            .iter()
            .map(|o| ChannelRecord {
                variant: o.variant.label(),
                seed: o.seed,
                digest: o.channels.digest(),
            })
            .collect(),
        artifacts: writer.artifacts,
        tasks: outputs
            .iter()
            .map(|o| TaskTiming {
                variant: o.variant.label(),
                seed: o.seed,
                seconds: o.seconds,
            })
            .collect(),
        single_mode_orderings: single_mode_orderings(&outputs),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let path = cfg.output_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

struct ArtifactWriter {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    fn new(root: &Path) -> Self {
        ArtifactWriter {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        }
    }

    fn record(&mut self, rel: &Path) -> Result<()> {
        let path = self.root.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn csv(&mut self, rel: PathBuf, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_rows(&self.root.join(&rel), header, rows)?;
        self.record(&rel)
    }
}

fn write_task_artifacts(cfg: &ExperimentConfig, outputs: &[TaskOutput], w: &mut ArtifactWriter) -> Result<()> {
    let mut single_rows = Vec::new();
    for o in outputs {
        let label = o.variant.label();
        let rel = PathBuf::from("channels")
            .join(&label)
            .join(format!("seed{}.json", o.seed));
        let path = w.root.join(&rel);
        let dir = path.parent().expect("nested path");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        o.channels.save(&path)?;
        w.record(&rel)?;
        for s in &o.sweeps {
            let rel = PathBuf::from("curves")
                .join(&label)
                .join(s.mode.as_str())
                .join(format!("{}_seed{}.csv", s.strategy, o.seed));
            w.csv(rel, &CURVE_HEADER, &boundary_rows(&s.boundary, o.seed))?;
        }
        for (mode, ts) in &o.time_sharing {
            let rel = PathBuf::from("time_sharing")
                .join(&label)
                .join(mode.as_str())
                .join(format!("{}_seed{}.csv", ts.strategy, o.seed));
            w.csv(rel, &CURVE_HEADER, &time_sharing_rows(ts, o.seed, cfg.power))?;
        }
        if let Some(sc) = &o.scheduling {
            let rows: Vec<Vec<String>> = (0..sc.grid.len())
                .map(|k| {
                    vec![
                        fmt_float(sc.grid[k]),
                        fmt_float(sc.grid[k] * sc.e_ref),
                        sc.modes[k].to_string(),
                        fmt_float(sc.eh1_id2[k]),
                        fmt_float(sc.id1_eh2[k]),
                        fmt_float(sc.scheduled[k]),
                    ]
                })
                .collect();
            let rel = PathBuf::from("scheduling")
                .join(&label)
                .join(format!("seed{}.csv", o.seed));
            w.csv(rel, &SCHEDULING_HEADER, &rows)?;
        }
        for m in &o.single_modes {
            single_rows.push(vec![
                label.clone(),
                o.seed.to_string(),
                m.tag.to_string(),
                fmt_float(m.rate),
                fmt_float(m.energy),
            ]);
        }
    }
    if !single_rows.is_empty() {
        w.csv(
            PathBuf::from("single_modes.csv"),
            &["variant", "seed", "mode", "rate_bits", "energy"],
            &single_rows,
        )?;
    }
    Ok(())
}

const SCHEDULING_HEADER: [&str; 6] = ["x", "e_bar", "mode", "eh1_id2_rate", "id1_eh2_rate", "scheduled_rate"];

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-grid-index means across seeds. Every seed's grid is uniform on its
/// own `[0, E_max]`, so index `k` sits at the same normalized target
/// `k / (n - 1)`.
fn write_aggregates(cfg: &ExperimentConfig, outputs: &[TaskOutput], w: &mut ArtifactWriter) -> Result<()> {
    let n = cfg.e_grid_points;
    for variant in cfg.variants() {
        let label = variant.label();
        let mine: Vec<&TaskOutput> = outputs.iter().filter(|o| o.variant == variant).collect();
        for mode in mixed_modes(cfg) {
            let mut rows = Vec::new();
            for &strategy in &cfg.strategies {
                let sweeps: Vec<(Vec<f64>, &REBoundary)> = mine
                    .iter()
                    .flat_map(|o| &o.sweeps)
                    .filter(|s| s.mode == mode && s.strategy == strategy)
                    .map(|s| (boundary::uniform_grid(s.e_max, n), &s.boundary))
                    .collect();
                for k in 0..n {
                    let x = k as f64 / (n - 1) as f64;
                    let at_k: Vec<_> = sweeps
                        .iter()
                        .filter_map(|(grid, b)| b.points.iter().find(|p| p.e_bar == grid[k]))
                        .collect();
                    rows.push(vec![
                        strategy.to_string(),
                        k.to_string(),
                        fmt_float(x),
                        opt_float(mean(at_k.iter().map(|p| p.e_bar))),
                        opt_float(mean(at_k.iter().map(|p| p.rate))),
                        opt_float(mean(at_k.iter().map(|p| p.energy))),
                        at_k.len().to_string(),
                    ]);
                }
            }
            let rel = PathBuf::from("aggregate")
                .join(&label)
                .join(format!("{}.csv", mode.as_str()));
            w.csv(
                rel,
                &[
                    "strategy",
                    "k",
                    "x",
                    "e_bar_mean",
                    "rate_mean",
                    "energy_mean",
                    "samples",
                ],
                &rows,
            )?;
        }
        let curves: Vec<&ScheduledCurves> = mine.iter().filter_map(|o| o.scheduling.as_ref()).collect();
        if !curves.is_empty() {
            let rows: Vec<Vec<String>> = (0..n)
                .map(|k| {
                    let avg = |f: fn(&ScheduledCurves) -> &Vec<f64>| opt_float(mean(curves.iter().map(|c| f(c)[k])));
                    vec![
                        fmt_float(k as f64 / (n - 1) as f64),
                        avg(|c| &c.eh1_id2),
                        avg(|c| &c.id1_eh2),
                        avg(|c| &c.scheduled),
                        curves.len().to_string(),
                    ]
                })
                .collect();
            let rel = PathBuf::from("aggregate").join(&label).join("scheduling.csv");
            w.csv(
                rel,
                &["x", "eh1_id2_mean", "id1_eh2_mean", "scheduled_mean", "samples"],
                &rows,
            )?;
        }
    }
    Ok(())
}

fn single_mode_orderings(outputs: &[TaskOutput]) -> Vec<SingleModeOrdering> {
    let mut by_variant: BTreeMap<(usize, String), BTreeMap<u64, (Option<f64>, Option<f64>)>> = BTreeMap::new();
    for o in outputs {
        let entry = by_variant
            .entry((o.variant.m_t, o.variant.label()))
            .or_default()
            .entry(o.seed)
            .or_default();
        for m in &o.single_modes {
            match m.tag {
                ModeTag::EhEh => entry.0 = Some(m.energy),
                ModeTag::IdId => entry.1 = Some(m.rate),
                _ => {}
            }
        }
    }
    let keys: Vec<_> = by_variant.keys().cloned().collect();
    let mut out = Vec::new();
    for pair in keys.windows(2) {
        let (small, large) = (&by_variant[&pair[0]], &by_variant[&pair[1]]);
        if pair[0].0 == pair[1].0 {
            continue;
        }
        let (mut n, mut e, mut r, mut both) = (0usize, 0usize, 0usize, 0usize);
        for (seed, &(e_s, r_s)) in small {
            let Some(&(e_l, r_l)) = large.get(seed) else { continue };
            let (Some(e_s), Some(r_s), Some(e_l), Some(r_l)) = (e_s, r_s, e_l, r_l) else {
                continue;
            };
            n += 1;
            e += usize::from(e_l > e_s);
            r += usize::from(r_l > r_s);
            both += usize::from(e_l > e_s && r_l > r_s);
        }
        if n > 0 {
            out.push(SingleModeOrdering {
                smaller: pair[0].1.clone(),
                larger: pair[1].1.clone(),
                pairs: n,
                energy_larger: e as f64 / n as f64,
                rate_larger: r as f64 / n as f64,
                both_larger: both as f64 / n as f64,
            });
        }
    }
    out
}

/// Reads a curve CSV back into `(e_bar, rate, energy)` triples, skipping gap
/// rows.
pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != CURVE_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "unexpected header".into(),
        });
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            message: format!("bad number '{s}'"),
        })
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if &rec[6] == "GAP" {
            continue;
        }
        out.push((parse(&rec[2])?, parse(&rec[3])?, parse(&rec[4])?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_validates() {
        for p in Preset::ALL {
            let cfg = ExperimentConfig::from_preset(p).unwrap();
            assert_eq!(cfg.figure_preset, Some(p));
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
    }

    #[test]
    fn preset_parameters() {
        let fig4 = ExperimentConfig::from_preset(Preset::Fig4).unwrap();
        assert_eq!(fig4.power, 0.1);
        let fig7 = ExperimentConfig::from_preset(Preset::Fig7).unwrap();
        assert_eq!((fig7.m_t, fig7.m_r), (3, 4));
        let fig8 = ExperimentConfig::from_preset(Preset::Fig8).unwrap();
        let labels: Vec<_> = fig8.variants().iter().map(Variant::label).collect();
        assert_eq!(labels, ["m2x2_a0.70", "m2x2_a1.00"]);
        assert!(fig8.scheduling);
    }

    #[test]
    fn overrides_win_over_preset() {
        let cfg = ExperimentConfig::resolve(
            Some(Preset::Fig2),
            None,
            &["seeds=[3, 4]".into(), "power = 10".into(), "output_dir=runs/a".into()],
        )
        .unwrap();
        assert_eq!(cfg.seeds, [3, 4]);
        assert_eq!(cfg.power, 10.0);
        assert_eq!(cfg.output_dir, Path::new("runs/a"));
        assert!(cfg.time_sharing);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            "power = 0.0",
            "e_grid_points = 1",
            "seeds = []",
            "strategies = [\"IWF\"]",
            "alpha = [[1.0, 1.5], [0.8, 1.0]]",
            "workers = 0",
            "unknown_key = 1",
        ] {
            assert!(ExperimentConfig::from_toml(bad).is_err(), "{bad} accepted");
        }
        assert!(ExperimentConfig::resolve(None, None, &["power".into()]).is_err());
        assert!("fig9".parse::<Preset>().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_preset(Preset::Fig8).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn asymmetric_alpha_label() {
        let v = Variant {
            m_t: 3,
            m_r: 4,
            alpha: [[1.0, 0.5], [0.8, 1.0]],
        };
        assert_eq!(v.label(), "m3x4_a1.00-0.50-0.80-1.00");
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(0.0), "0.00000000000e0");
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_float(-12345.678901234), "-1.23456789012e4");
    }

    #[test]
    fn gap_rows_sort_into_place() {
        let point = |e_bar: f64| boundary::REPoint {
            e_bar,
            rate: 1.0,
            energy: e_bar,
            p1: 1.0,
            lambda: Some(0.5),
            mu: Some(0.25),
            iterations: 3,
            branch: boundary::Branch::Dual,
            clamped: false,
            source_e_bar: None,
        };
        let b = REBoundary {
            strategy: StrategyId::Meb,
            channel_digest: String::new(),
            points: vec![point(0.0), point(2.0)],
            gaps: vec![boundary::GapMarker {
                e_bar: 1.0,
                reason: "test".into(),
            }],
        };
        let rows = boundary_rows(&b, 7);
        let branches: Vec<_> = rows.iter().map(|r| r[6].as_str()).collect();
        assert_eq!(branches, ["DUAL", "GAP", "DUAL"]);
        assert!(rows[1][3].is_empty() && rows[1][8].is_empty());
    }
}
