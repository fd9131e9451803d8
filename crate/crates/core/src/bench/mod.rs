//! Experiment orchestration: β sweeps over controllers, CSV tables and plot series.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{
    ArrivalKind, BetaRange, ConfigError, ControllerKind, ExperimentConfig, ParamsBlock, SimulationBlock, SolverBlock,
};

use crate::baselines::SignalPlan;
use crate::graph::{build_scenario, ConflictGraph, GraphError};
use crate::model::{ModelError, MovementDemand};
use crate::schedule::{explain, Controller, ScheduleError, ScheduleFile};
use crate::sim::{capacity_sweep, CmatFactory, ControllerFactory, ModelUsed, RcFactory, SimError, SweepRow, TscFactory};

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "CMAT_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("cannot write `{path}`: {message}")]
    Write { path: String, message: String },
    #[error("{controller} at beta {beta}: {message}")]
    Build {
        controller: &'static str,
        beta: f64,
        message: String,
    },
}

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        if let Some(h) = self.horizon {
            cfg.simulation.horizon = h;
        }
        if let Some(s) = self.seed {
            cfg.simulation.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ControllerRows {
    pub controller: ControllerKind,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub results: Vec<ControllerRows>,
    pub files: Vec<PathBuf>,
    pub errors: usize,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.errors == 0
    }
}

pub fn scenario_graph(cfg: &ExperimentConfig) -> Result<ConflictGraph, BenchError> {
    Ok(build_scenario(cfg.scenario, &cfg.geometry)?)
}

pub fn base_demand(cfg: &ExperimentConfig, g: &ConflictGraph) -> Result<MovementDemand, BenchError> {
    Ok(MovementDemand::from_classes(g, &cfg.base_demand_vph, 1.0)?)
}

fn factory(kind: ControllerKind, cfg: &ExperimentConfig, g: &ConflictGraph) -> Box<dyn ControllerFactory> {
    let params = cfg.params.to_params();
    match kind {
        ControllerKind::Cmat => Box::new(CmatFactory::new(g.clone(), params, cfg.solver.to_options())),
        ControllerKind::Rc => Box::new(RcFactory::new(g.clone(), params, cfg.solver.to_options())),
        ControllerKind::Tsc => Box::new(TscFactory {
            graph: g.clone(),
            params,
            config: cfg.tsc.clone(),
        }),
    }
}

/// Run every configured controller over the β grid without touching the file system.
pub fn execute(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<ControllerRows>, BenchError> {
    let g = scenario_graph(cfg)?;
    let base = base_demand(cfg, &g)?;
    let params = cfg.params.to_params();
    let sim = cfg.simulation.to_config();
    let betas = cfg.beta.values();
    let mut out = Vec::new();
    for &kind in &cfg.controllers {
        let f = factory(kind, cfg, &g);
        log::info!("{}: {} over {} demand levels", cfg.name, kind.name(), betas.len());
        let rows = capacity_sweep(f.as_ref(), &g, &base, &betas, &params, &sim, workers)?;
        out.push(ControllerRows { controller: kind, rows });
    }
    Ok(out)
}

/// First β solved with the throughput model, if any.
pub fn switch_beta(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .find(|r| matches!(&r.result, Ok(p) if p.built.model_used == ModelUsed::M2))
        .map(|r| r.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub scenario: String,
    pub controller: String,
    pub beta: f64,
    pub demand_total_vph: f64,
    pub throughput_vph: Option<f64>,
    pub mean_delay_s: Option<f64>,
    pub cycle_s: Option<f64>,
    pub platoon_sizes: String,
    pub model_used: String,
    pub tsc_feasible: Option<bool>,
    pub safety_ok: bool,
}

pub fn csv_rows(cfg: &ExperimentConfig, results: &[ControllerRows]) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for cr in results {
        for r in &cr.rows {
            let row = match &r.result {
                Ok(p) => CsvRow {
                    scenario: cfg.scenario.to_string(),
                    controller: cr.controller.name().into(),
                    beta: r.beta,
                    demand_total_vph: r.demand_total_vph,
                    throughput_vph: Some(p.metrics.throughput_vph),
                    mean_delay_s: Some(p.metrics.mean_delay),
                    cycle_s: Some(p.built.cycle),
                    platoon_sizes: p.built.platoon_sizes.iter().map(u32::to_string).collect::<Vec<_>>().join(";"),
                    model_used: p.built.model_used.to_string(),
                    tsc_feasible: p.built.tsc_feasible,
                    safety_ok: p.built.safety_ok,
                },
                Err(_) => CsvRow {
                    scenario: cfg.scenario.to_string(),
                    controller: cr.controller.name().into(),
                    beta: r.beta,
                    demand_total_vph: r.demand_total_vph,
                    throughput_vph: None,
                    mean_delay_s: None,
                    cycle_s: None,
                    platoon_sizes: String::new(),
                    model_used: "error".into(),
                    tsc_feasible: None,
                    safety_ok: false,
                },
            };
            out.push(row);
        }
    }
    out
}

fn write_err(path: &Path, e: impl ToString) -> BenchError {
    BenchError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

/// One plot panel: β against a metric, one column per controller.
fn panel(results: &[ControllerRows], metric: impl Fn(&crate::sim::SweepPoint) -> Option<f64>) -> String {
    let mut by_beta: BTreeMap<u64, (f64, Vec<String>)> = BTreeMap::new();
    for (k, cr) in results.iter().enumerate() {
        for r in &cr.rows {
            let entry = by_beta
                .entry((r.beta * 1e9).round() as u64)
                .or_insert_with(|| (r.beta, vec![String::new(); results.len()]));
            if let Some(v) = r.result.as_ref().ok().and_then(&metric) {
                entry.1[k] = v.to_string();
            }
        }
    }
    let mut s = String::from("beta");
    for cr in results {
        s.push(',');
        s.push_str(cr.controller.name());
    }
    s.push('\n');
    for (beta, cells) in by_beta.values() {
        let _ = writeln!(s, "{beta},{}", cells.join(","));
    }
    s
}

/// Write the CSV table, one plot-data file per panel and the annotation file.
pub fn write_outputs(cfg: &ExperimentConfig, results: &[ControllerRows], dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let mut files = Vec::new();
    let table = dir.join(format!("{}.csv", cfg.name));
    write_csv(&table, &csv_rows(cfg, results))?;
    files.push(table);

    let panels: [(&str, Box<dyn Fn(&crate::sim::SweepPoint) -> Option<f64>>); 4] = [
        ("throughput", Box::new(|p| Some(p.metrics.throughput_vph))),
        ("delay", Box::new(|p| Some(p.metrics.mean_delay))),
        ("cycle", Box::new(|p| Some(p.built.cycle))),
        (
            "platoon",
            Box::new(|p| {
                let l = &p.built.platoon_sizes;
                (!l.is_empty()).then(|| l.iter().map(|&x| x as f64).sum::<f64>() / l.len() as f64)
            }),
        ),
    ];
    for (tag, metric) in panels {
        let path = dir.join(format!("{}_{tag}.csv", cfg.name));
        std::fs::write(&path, panel(results, metric)).map_err(|e| write_err(&path, e))?;
        files.push(path);
    }

    let mut notes = String::from("event,controller,beta\n");
    for cr in results {
        if cr.controller == ControllerKind::Cmat {
            if let Some(b) = switch_beta(&cr.rows) {
                let _ = writeln!(notes, "m1_to_m2_switch,cmat,{b}");
            }
        }
        if cr.controller == ControllerKind::Tsc {
            let first = cr
                .rows
                .iter()
                .find(|r| matches!(&r.result, Ok(p) if p.built.tsc_feasible == Some(false)));
            if let Some(r) = first {
                let _ = writeln!(notes, "tsc_infeasible,tsc,{}", r.beta);
            }
        }
    }
    let path = dir.join(format!("{}_annotations.csv", cfg.name));
    std::fs::write(&path, notes).map_err(|e| write_err(&path, e))?;
    files.push(path);
    Ok(files)
}

/// Output directory: the environment override if set, else the config value.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output_dir.clone())
}

/// Load, sweep and write artifacts. Row failures are counted, not returned.
pub fn run(path: &Path, overrides: &Overrides) -> Result<RunReport, BenchError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if overrides.output_dir.is_none() {
        cfg.output_dir = output_dir(&cfg);
    }
    overrides.apply(&mut cfg)?;
    let workers = overrides
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = execute(&cfg, workers)?;
    let errors = results
        .iter()
        .flat_map(|c| &c.rows)
        .filter(|r| r.result.is_err())
        .count();
    let files = write_outputs(&cfg, &results, &cfg.output_dir)?;
    Ok(RunReport { results, files, errors })
}

/// Build one controller for the config's scenario at `beta`.
pub fn solve_schedule(cfg: &ExperimentConfig, beta: f64, controller: ControllerKind) -> Result<ScheduleFile, BenchError> {
    let g = scenario_graph(cfg)?;
    let demands = base_demand(cfg, &g)?.scaled(beta);
    let built = factory(controller, cfg, &g)
        .build(&demands)
        .map_err(|message| BenchError::Build {
            controller: controller.name(),
            beta,
            message,
        })?;
    Ok(ScheduleFile {
        scenario: Some(cfg.scenario),
        geometry: Some(cfg.geometry),
        beta: Some(beta),
        controller: built.controller,
    })
}

pub fn explain_plan(plan: &SignalPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "fixed-time plan  cycle = {:.4} s  {}",
        plan.cycle,
        if plan.feasible { "feasible" } else { "oversaturated" }
    );
    for ip in &plan.intersections {
        let _ = writeln!(
            out,
            "intersection {}  offset {:.4} s  critical ratio {:.4}",
            ip.intersection, ip.offset, ip.critical_ratio
        );
        for (k, ph) in ip.phases.iter().enumerate() {
            let _ = writeln!(
                out,
                "  phase {}  green {:>8.4} s  lost {:>6.4} s  {}",
                k + 1,
                ph.green,
                ph.lost,
                ph.movements.join(" ")
            );
        }
    }
    out
}

/// Timing table of a schedule file.
pub fn explain_file(path: &Path) -> Result<String, BenchError> {
    let f = ScheduleFile::read(path)?;
    let mut out = String::new();
    if let Some(s) = f.scenario {
        let _ = write!(out, "scenario {s}");
        if let Some(b) = f.beta {
            let _ = write!(out, "  beta {b}");
        }
        out.push('\n');
    }
    out.push_str(&match &f.controller {
        Controller::Cyclic { schedule } => explain(schedule),
        Controller::Signal { plan } => explain_plan(plan),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "name": "unit",
                "scenario": "single_conflict",
                "base_demand_vph": [1000, 1000],
                "beta": {"min": 0.5, "max": 1.0, "step": 0.5},
                "controllers": ["cmat", "tsc"],
                "simulation": {"horizon": 600}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn rows_are_ordered_and_reproducible() {
        let cfg = config();
        let a = csv_rows(&cfg, &execute(&cfg, 2).unwrap());
        let b = csv_rows(&cfg, &execute(&cfg, 1).unwrap());
        assert_eq!(a, b);
        let order: Vec<(String, f64)> = a.iter().map(|r| (r.controller.clone(), r.beta)).collect();
        assert_eq!(
            order,
            vec![("cmat".into(), 0.5), ("cmat".into(), 1.0), ("tsc".into(), 0.5), ("tsc".into(), 1.0)]
        );
        assert_eq!(a[1].platoon_sizes, "2;2");
    }

    #[test]
    fn artifacts_are_written() {
        let cfg = config();
        let dir = tempfile::tempdir().unwrap();
        let results = execute(&cfg, 1).unwrap();
        let files = write_outputs(&cfg, &results, dir.path()).unwrap();
        assert_eq!(files.len(), 6);
        let table = std::fs::read_to_string(dir.path().join("unit.csv")).unwrap();
        assert!(table.starts_with(
            "scenario,controller,beta,demand_total_vph,throughput_vph,mean_delay_s,cycle_s,platoon_sizes,model_used,tsc_feasible,safety_ok"
        ));
    }

    #[test]
    fn solved_schedule_explains() {
        let cfg = config();
        let f = solve_schedule(&cfg, 1.0, ControllerKind::Cmat).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        f.write(&path).unwrap();
        let text = explain_file(&path).unwrap();
        assert!(text.contains("cycle C = 7.2000"), "{text}");
    }
}
