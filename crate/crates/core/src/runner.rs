//! Experiment execution: build the discretization a RunConfig describes, run
//! the requested experiment, and write plot-ready CSV/JSON outputs.

use crate::analysis::{
    l2_error, linf_error, periodicity_report, spectrum_check, write_spectrum_csv,
    PeriodicityReport, SpectrumReport,
};
use crate::config::{Experiment, Linearization, RunConfig};
use crate::error::{Error, Result};
use crate::integrate::{
    simulate, simulate_with, IntegratorConfig, MethodOfLines, SimulationRecord,
};
use crate::kernels::KernelConfig;
use crate::models::{
    build_rhs, BoundaryPolicy, ForcingSpec, OperatorSet, Rhs, SolitonSpec,
};
use crate::nodes::{build_nodes, build_stencils, Layout, NodeSet};
use crate::operators::DiffOperator;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Everything assembled from a config before time stepping begins.
pub struct Discretization {
    pub nodes: NodeSet,
    pub kernel: KernelConfig,
    pub operators: OperatorSet,
    pub boundary: BoundaryPolicy,
    pub rhs: Rhs,
    pub soliton: Option<SolitonSpec>,
    pub neumann_right: bool,
}

pub fn discretize(cfg: &RunConfig) -> Result<Discretization> {
    cfg.validate()?;
    let (a, b) = cfg.interval;
    let nodes = build_nodes(a, b, cfg.num_nodes, Layout::Uniform)?;
    let stencils = build_stencils(&nodes, cfg.stencil_size)?;
    let kernel = KernelConfig::new(cfg.shape.shape_for(nodes.spacing_h()))?;
    let operators = OperatorSet::for_model(&nodes, &stencils, &cfg.model, &kernel)?;
    let neumann_right = cfg
        .neumann_right
        .unwrap_or_else(|| cfg.model.family.default_neumann_right());
    let soliton = match &cfg.soliton {
        Some(s) => Some(SolitonSpec::new(s.speed, cfg.model.beta, cfg.model.mu)?),
        None => None,
    };
    let boundary = match cfg.experiment {
        Experiment::ValidateSoliton => {
            BoundaryPolicy::soliton_trace(soliton.unwrap(), &nodes, operators.d1(), neumann_right)?
        }
        Experiment::Spectrum => match cfg.linearization {
            Linearization::Soliton => BoundaryPolicy::soliton_trace(
                soliton.unwrap(),
                &nodes,
                operators.d1(),
                neumann_right,
            )?,
            Linearization::Zero => BoundaryPolicy::forced(
                cfg.forcing.clone().unwrap_or(ForcingSpec::Zero),
                &nodes,
                operators.d1(),
                neumann_right,
            )?,
        },
        Experiment::Periodicity => BoundaryPolicy::forced(
            cfg.forcing.clone().unwrap(),
            &nodes,
            operators.d1(),
            neumann_right,
        )?,
    };
    let rhs = build_rhs(&cfg.model, &operators, &boundary)?;
    Ok(Discretization { nodes, kernel, operators, boundary, rhs, soliton, neumann_right })
}

/// One row of the validation error table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    pub wall_seconds: f64,
}

/// In-memory results of a run; `execute` serializes these to disk.
pub struct RunArtifacts {
    pub name: String,
    pub config: RunConfig,
    pub disc: Discretization,
    pub record: Option<SimulationRecord>,
    pub error_rows: Option<Vec<ErrorRow>>,
    pub spectrum: Option<SpectrumReport>,
    pub periodicity: Option<PeriodicityReport>,
}

fn integrator_config(cfg: &RunConfig) -> IntegratorConfig {
    IntegratorConfig {
        dt: cfg.dt,
        t_max: cfg.t_max,
        snapshot_stride: cfg.snapshot_stride,
        probes: cfg.probes.clone(),
    }
}

fn run_validate(cfg: &RunConfig, disc: &Discretization) -> Result<(Vec<ErrorRow>, SimulationRecord)> {
    let soliton = disc.soliton.unwrap();
    let sys = MethodOfLines::new(disc.rhs.clone(), disc.boundary.clone())?;
    let int_cfg = integrator_config(cfg);
    let steps = int_cfg.steps()?;

    let mut targets: BTreeMap<usize, f64> = BTreeMap::new();
    for &t in &cfg.error_times {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Config(format!("error time {t} must be >= 0")));
        }
        let k = (t / cfg.dt).round();
        if (k * cfg.dt - t).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "error time {t} is not an integer multiple of dt = {}",
                cfg.dt
            )));
        }
        let k = k as usize;
        if k <= steps {
            // times beyond the horizon are silently dropped (t_max = 0 gives
            // an empty table)
            targets.insert(k, t);
        }
    }

    let h = disc.nodes.spacing_h();
    let initial = soliton.sample(&disc.nodes, 0.0);
    let started = Instant::now();
    let mut rows: Vec<ErrorRow> = Vec::with_capacity(targets.len());
    let record = simulate_with(&sys, &disc.nodes, &int_cfg, &initial, |step, _t, u| {
        if let Some(&te) = targets.get(&step) {
            let exact = soliton.sample(&disc.nodes, te);
            rows.push(ErrorRow {
                t: te,
                linf: linf_error(&exact, u)?,
                l2: l2_error(&exact, u, h)?,
                wall_seconds: started.elapsed().as_secs_f64(),
            });
        }
        Ok(())
    })?;
    Ok((rows, record))
}

fn run_spectrum(cfg: &RunConfig, disc: &Discretization) -> Result<SpectrumReport> {
    let n = disc.nodes.len();
    let mut state = match cfg.linearization {
        Linearization::Zero => vec![0.0; n],
        Linearization::Soliton => disc.soliton.unwrap().sample(&disc.nodes, 0.0),
    };
    // linearize about the state the integrator would actually start from
    disc.boundary.apply(&mut state, 0.0)?;
    spectrum_check(&disc.rhs, &state, cfg.dt)
}

fn run_periodicity(
    cfg: &RunConfig,
    disc: &Discretization,
) -> Result<(SimulationRecord, PeriodicityReport)> {
    let sys = MethodOfLines::new(disc.rhs.clone(), disc.boundary.clone())?;
    let int_cfg = integrator_config(cfg);
    let initial = vec![0.0; disc.nodes.len()];
    let record = simulate(&sys, &disc.nodes, &int_cfg, &initial)?;
    let period = cfg.forcing.as_ref().unwrap().period();
    let report = periodicity_report(&record, period, cfg.periodicity_tol)?;
    Ok((record, report))
}

/// Run the experiment fully in memory.
pub fn run(name: &str, cfg: &RunConfig) -> Result<RunArtifacts> {
    let disc = discretize(cfg)?;
    let mut artifacts = RunArtifacts {
        name: name.to_string(),
        config: cfg.clone(),
        record: None,
        error_rows: None,
        spectrum: None,
        periodicity: None,
        disc,
    };
    match cfg.experiment {
        Experiment::ValidateSoliton => {
            let (rows, record) = run_validate(cfg, &artifacts.disc)?;
            artifacts.error_rows = Some(rows);
            artifacts.record = Some(record);
        }
        Experiment::Spectrum => {
            artifacts.spectrum = Some(run_spectrum(cfg, &artifacts.disc)?);
        }
        Experiment::Periodicity => {
            let (record, report) = run_periodicity(cfg, &artifacts.disc)?;
            artifacts.record = Some(record);
            artifacts.periodicity = Some(report);
        }
    }
    Ok(artifacts)
}

fn write_probes_csv<W: Write>(record: &SimulationRecord, mut w: W) -> Result<()> {
    write!(w, "t")?;
    for p in &record.probes {
        write!(w, ",x={}", p.requested_x)?;
    }
    writeln!(w)?;
    for (k, t) in record.times.iter().enumerate() {
        write!(w, "{t:.16e}")?;
        for p in &record.probes {
            write!(w, ",{:.16e}", p.values[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn write_errors_csv<W: Write>(rows: &[ErrorRow], mut w: W) -> Result<()> {
    writeln!(w, "t,linf,l2,wall_seconds")?;
    for r in rows {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", r.t, r.linf, r.l2, r.wall_seconds)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeMapEntry {
    requested_x: f64,
    node_index: usize,
    node_x: f64,
}

#[derive(Serialize)]
struct SolverMeta {
    n_nodes: usize,
    spacing_h: f64,
    stencil_size: usize,
    shape_c: f64,
    neumann_right: bool,
    constrained_rows: Vec<usize>,
    dt: f64,
    t_max: f64,
    steps: usize,
    /// Requested probe coordinates vs. the nodes actually sampled; the
    /// published probe values do not all coincide with grid nodes.
    probe_mapping: Vec<ProbeMapEntry>,
    wall_seconds: f64,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Meta<'a> {
    name: &'a str,
    config: &'a RunConfig,
    solver: SolverMeta,
}

fn dump_operator_files(disc: &Discretization, out_dir: &Path) -> Result<Vec<String>> {
    let named: [(&str, Option<&DiffOperator>); 3] = [
        ("operator_d1.txt", Some(disc.operators.d1())),
        ("operator_d2.txt", disc.operators.d2()),
        ("operator_d3.txt", disc.operators.d3()),
    ];
    let mut files = Vec::new();
    for (name, op) in named {
        if let Some(op) = op {
            let f = fs::File::create(out_dir.join(name))?;
            op.dump_coo(BufWriter::new(f))?;
            files.push(name.to_string());
        }
    }
    Ok(files)
}

pub struct RunOutcome {
    pub name: String,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

/// Run an experiment and write its outputs under `out_dir`:
/// probes.csv / errors.csv / spectrum.{csv,json} / periodicity.json as
/// applicable, always ending with meta.json.
pub fn execute(
    name: &str,
    cfg: &RunConfig,
    out_dir: &Path,
    dump_operators: bool,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let artifacts = run(name, cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    if let Some(record) = &artifacts.record {
        let f = fs::File::create(out_dir.join("probes.csv"))?;
        write_probes_csv(record, BufWriter::new(f))?;
        files.push("probes.csv".to_string());
    }
    if let Some(rows) = &artifacts.error_rows {
        let f = fs::File::create(out_dir.join("errors.csv"))?;
        write_errors_csv(rows, BufWriter::new(f))?;
        files.push("errors.csv".to_string());
    }
    if let Some(spectrum) = &artifacts.spectrum {
        let f = fs::File::create(out_dir.join("spectrum.csv"))?;
        write_spectrum_csv(spectrum, BufWriter::new(f))?;
        files.push("spectrum.csv".to_string());
        let f = fs::File::create(out_dir.join("spectrum.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(f), spectrum)?;
        files.push("spectrum.json".to_string());
    }
    if let Some(report) = &artifacts.periodicity {
        let f = fs::File::create(out_dir.join("periodicity.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(f), report)?;
        files.push("periodicity.json".to_string());
    }
    if dump_operators {
        files.extend(dump_operator_files(&artifacts.disc, out_dir)?);
    }

    let disc = &artifacts.disc;
    let probe_mapping = match &artifacts.record {
        Some(rec) => rec
            .probes
            .iter()
            .map(|p| ProbeMapEntry {
                requested_x: p.requested_x,
                node_index: p.node_index,
                node_x: p.node_x,
            })
            .collect(),
        None => Vec::new(),
    };
    files.push("meta.json".to_string());
    let meta = Meta {
        name,
        config: cfg,
        solver: SolverMeta {
            n_nodes: disc.nodes.len(),
            spacing_h: disc.nodes.spacing_h(),
            stencil_size: cfg.stencil_size,
            shape_c: disc.kernel.shape(),
            neumann_right: disc.neumann_right,
            constrained_rows: disc.boundary.constrained_rows(),
            dt: cfg.dt,
            t_max: cfg.t_max,
            steps: integrator_config(cfg).steps()?,
            probe_mapping,
            wall_seconds: started.elapsed().as_secs_f64(),
            files: files.clone(),
        },
    };
    let f = fs::File::create(out_dir.join("meta.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &meta)?;

    Ok(RunOutcome { name: name.to_string(), out_dir: out_dir.to_path_buf(), files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, ShapeRule, SolitonConfig};
    use crate::models::ModelSpec;

    fn tiny_channel() -> RunConfig {
        let mut cfg = preset("fig2").unwrap();
        cfg.num_nodes = 40;
        cfg.stencil_size = 8;
        cfg.shape = ShapeRule::Absolute { value: 0.005 };
        cfg.t_max = 0.2;
        cfg.snapshot_stride = 0;
        cfg
    }

    fn tiny_validation() -> RunConfig {
        let mut cfg = preset("table1").unwrap();
        cfg.num_nodes = 60;
        cfg.stencil_size = 10;
        cfg.t_max = 0.01;
        cfg.dt = 0.001;
        cfg.error_times = vec![0.0, 0.005, 0.01];
        cfg
    }

    #[test]
    fn toy_advection_reports_one_eigenvalue_per_node() {
        let cfg = preset("toy-advection").unwrap();
        let art = run("toy-advection", &cfg).unwrap();
        let rep = art.spectrum.unwrap();
        assert_eq!(rep.scaled_eigenvalues.len(), 8);
    }

    #[test]
    fn zero_forcing_produces_an_all_zero_channel() {
        let mut cfg = tiny_channel();
        cfg.forcing = Some(ForcingSpec::Zero);
        let art = run("quiet", &cfg).unwrap();
        let rec = art.record.unwrap();
        assert!(rec.probes.iter().all(|p| p.values.iter().all(|&v| v == 0.0)));
        let rep = art.periodicity.unwrap();
        assert!(rep.probes.iter().all(|p| p.onset_time == Some(0.0)));
    }

    #[test]
    fn validation_rows_report_requested_times_in_order() {
        let cfg = tiny_validation();
        let art = run("v", &cfg).unwrap();
        let rows = art.error_rows.unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].t, 0.0);
        assert_eq!(rows[2].t, 0.01);
        // exact data projected onto the grid at t = 0: only interpolation
        // noise, and errors grow with time from there
        assert!(rows[0].linf <= rows[2].linf);
        assert!(rows.iter().all(|r| r.linf.is_finite() && r.l2.is_finite()));
        assert!(rows.windows(2).all(|w| w[0].wall_seconds <= w[1].wall_seconds));
    }

    #[test]
    fn zero_horizon_validation_gives_an_empty_table() {
        let mut cfg = tiny_validation();
        cfg.t_max = 0.0;
        cfg.error_times = vec![1.0, 2.0];
        let art = run("v0", &cfg).unwrap();
        assert!(art.error_rows.unwrap().is_empty());
    }

    #[test]
    fn misaligned_error_times_are_config_errors() {
        let mut cfg = tiny_validation();
        cfg.error_times = vec![0.0015];
        match run("bad", &cfg) {
            Err(e @ Error::Config(_)) => assert_eq!(e.exit_code(), 2),
            other => panic!("expected config error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn execute_writes_the_documented_files() {
        let dir = tempfile::tempdir().unwrap();

        let out = dir.path().join("chan");
        let res = execute("chan", &tiny_channel(), &out, false).unwrap();
        assert!(out.join("probes.csv").is_file());
        assert!(out.join("periodicity.json").is_file());
        assert!(out.join("meta.json").is_file());
        assert!(!out.join("errors.csv").exists());
        assert!(res.files.contains(&"meta.json".to_string()));

        let out = dir.path().join("val");
        execute("val", &tiny_validation(), &out, true).unwrap();
        assert!(out.join("errors.csv").is_file());
        assert!(out.join("probes.csv").is_file());
        // kdv-classic uses D1 and D3 only
        assert!(out.join("operator_d1.txt").is_file());
        assert!(!out.join("operator_d2.txt").exists());
        assert!(out.join("operator_d3.txt").is_file());

        let out = dir.path().join("spec");
        execute("spec", &preset("toy-advection").unwrap(), &out, false).unwrap();
        assert!(out.join("spectrum.csv").is_file());
        assert!(out.join("spectrum.json").is_file());
    }

    #[test]
    fn meta_echoes_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_channel();
        let out = dir.path().join("echo");
        execute("echo", &cfg, &out, false).unwrap();
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
        let echoed: RunConfig = serde_json::from_value(meta["config"].clone()).unwrap();
        assert_eq!(echoed, cfg);
        assert_eq!(meta["solver"]["n_nodes"], 40);
        let mapping = meta["solver"]["probe_mapping"].as_array().unwrap();
        assert_eq!(mapping.len(), 6);
        // right-boundary probe pins to the last node
        assert_eq!(mapping[5]["node_index"], 39);
    }

    #[test]
    fn probes_csv_is_rectangular() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_channel();
        let out = dir.path().join("csv");
        execute("csv", &cfg, &out, false).unwrap();
        let text = fs::read_to_string(out.join("probes.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 201); // header + t = 0..0.2 by 0.001
        assert!(lines[0].starts_with("t,x=-0.95067,"));
        for row in &lines {
            assert_eq!(row.split(',').count(), 7);
        }
    }

    #[test]
    fn spectrum_run_rejects_wrong_speed_sign() {
        let mut cfg = preset("fig1").unwrap();
        cfg.soliton = Some(SolitonConfig { speed: -0.5 });
        assert!(run("bad-speed", &cfg).is_err());
    }

    #[test]
    fn neumann_override_is_respected() {
        let mut cfg = tiny_channel();
        cfg.model = ModelSpec::kdv(1.0, 0.0, 1e-5).unwrap();
        let default_rows = run("kdv-def", &cfg).unwrap().disc.boundary.constrained_rows();
        assert_eq!(default_rows, vec![0, 38, 39]);
        cfg.neumann_right = Some(false);
        let overridden = run("kdv-ovr", &cfg).unwrap().disc.boundary.constrained_rows();
        assert_eq!(overridden, vec![0, 39]);
    }
}
