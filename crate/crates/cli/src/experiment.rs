use std::time::Instant;

use apcl_core::lift::interpolate;
use apcl_core::{
    cube_seminorm, evolve, evolve_pair, exact_cell_average, exact_counterexample, l1_distance,
    lift_problem, lift_problems, nondegeneracy_check, parse_rational, run, Degeneracy,
    LiftedProblem, NdVerdict, SolverError, TorusGrid, TravelingWave,
};
use log::info;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::report::{Cell, Plot, RunReport, Table};
use crate::HarnessError;

const CONTRACTION_TOL: f64 = 1e-12;
const DEFAULT_MAX_OUTSIDE: f64 = 0.01;
const DEFAULT_MEAN_TOL: f64 = 1e-3;

struct Outcome {
    verdicts: Map<String, Value>,
    tables: Vec<Table>,
    plots: Vec<Plot>,
    failures: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            verdicts: Map::new(),
            tables: Vec::new(),
            plots: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn verdict(&mut self, key: &str, v: impl Into<Value>) {
        self.verdicts.insert(key.into(), v.into());
    }

    fn require(&mut self, ok: bool, msg: String) {
        if !ok {
            self.failures.push(msg);
        }
    }
}

fn solver_err(e: SolverError) -> HarnessError {
    HarnessError::Validation(e.to_string())
}

fn validation(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Validation(e.to_string())
}

/// Grid for an `m`-torus: a single size is used on every axis.
fn grid_for(m: usize, cells: &[usize]) -> Result<TorusGrid, HarnessError> {
    match (m, cells.len()) {
        (0, _) => Ok(TorusGrid::point()),
        (_, 1) => TorusGrid::uniform(m, cells[0]).map_err(solver_err),
        (_, l) if l == m => TorusGrid::new(cells).map_err(solver_err),
        (_, l) => Err(HarnessError::Config(format!(
            "grid: {l} sizes given for a torus of dimension {m}"
        ))),
    }
}

fn verdict_json(v: &NdVerdict) -> Value {
    match v {
        NdVerdict::NonDegenerate => json!({"verdict": "non-degenerate"}),
        NdVerdict::Degenerate(Degeneracy {
            k,
            piece,
            interval,
            tau,
            offset,
        }) => json!({
            "verdict": "degenerate",
            "k": k,
            "piece": piece,
            "interval": [interval.0.to_string(), interval.1.to_string()],
            "tau": tau,
            "offset": offset,
        }),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    info!("running {} experiment", cfg.kind.name());
    let out = match cfg.kind {
        Kind::CheckFlux => check_flux(cfg)?,
        Kind::Decay => decay(cfg)?,
        Kind::Contraction => contraction(cfg)?,
        Kind::Counterexample => counterexample(cfg)?,
        Kind::Convergence => convergence(cfg)?,
        Kind::Spectrum => spectrum(cfg)?,
    };
    let mut verdicts = out.verdicts;
    verdicts.insert("failures".into(), json!(out.failures));
    Ok(RunReport {
        kind: cfg.kind.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        passed: out.failures.is_empty(),
        verdicts,
        tables: out.tables,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        plots: out.plots,
        failures: out.failures,
    })
}

fn check_flux(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let basis = cfg.frequency_basis()?;
    let flux = cfg.parsed_flux(&basis)?;
    let group = if cfg.spectrum.is_none() && !cfg.data.is_empty() {
        lift_problems(&cfg.parsed_data(&basis)?, &flux)
            .map_err(validation)?
            .remove(0)
            .group()
            .clone()
    } else {
        cfg.group(&basis)?
    };
    let verdict = nondegeneracy_check(&flux, &group).map_err(validation)?;
    let mut out = Outcome::new();
    out.verdict("rank", group.rank());
    out.verdict("nd", verdict_json(&verdict));
    let mut t = Table::new(
        "check-flux",
        &[
            "verdict",
            "k",
            "piece",
            "interval_lo",
            "interval_hi",
            "tau",
            "offset",
        ],
    );
    match &verdict {
        NdVerdict::NonDegenerate => t.push(vec![
            Cell::Text("non-degenerate".into()),
            Cell::Text(String::new()),
            Cell::Text(String::new()),
            Cell::Text(String::new()),
            Cell::Text(String::new()),
            Cell::Text(String::new()),
            Cell::Text(String::new()),
        ]),
        NdVerdict::Degenerate(d) => t.push(vec![
            Cell::Text("degenerate".into()),
            Cell::Text(format!("{:?}", d.k).replace(", ", ";")),
            d.piece.into(),
            d.interval.0.to_string().into(),
            d.interval.1.to_string().into(),
            d.tau.into(),
            d.offset.into(),
        ]),
    }
    out.tables.push(t);
    if let Some(expect) = cfg.thresholds.expect_degenerate {
        out.require(
            verdict.is_degenerate() == expect,
            format!(
                "expected degenerate = {expect}, got {}",
                verdict.is_degenerate()
            ),
        );
    }
    Ok(out)
}

fn lifted(cfg: &ExperimentConfig) -> Result<LiftedProblem, HarnessError> {
    let basis = cfg.frequency_basis()?;
    let flux = cfg.parsed_flux(&basis)?;
    let u0 = cfg.parse_data(&basis, &cfg.data[0])?;
    let mut pb = lift_problem(&u0, &flux).map_err(validation)?;
    if let Some(z) = &cfg.offset {
        pb = pb
            .with_offset(z.clone())
            .map_err(|e| HarnessError::Config(format!("offset: {e}")))?;
    }
    Ok(pb)
}

fn max_increase(xs: &[f64]) -> f64 {
    xs.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn decay(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let pb = lifted(cfg)?;
    let grid = grid_for(pb.m(), &cfg.grid)?;
    let solver = cfg.solver_config(cfg.solver.as_ref().expect("validated"));
    info!("lifted to m = {}, grid {:?}", pb.m(), grid.cells());
    let traj = run(&pb, &grid, &solver).map_err(solver_err)?;
    let mut out = Outcome::new();
    let mut t = Table::new("decay", &["t", "l1_to_mean", "min", "max", "mass"]);
    for r in &traj.records {
        t.push(vec![
            r.t.into(),
            r.l1_to_mean.into(),
            r.min.into(),
            r.max.into(),
            r.mass.into(),
        ]);
    }
    let l1 = t.column("l1_to_mean").expect("numeric column");
    let last = *l1.last().expect("at least the initial record");
    out.verdict("m", pb.m());
    out.verdict("mean", traj.mean);
    out.verdict("coordinate_set", json!(pb.coordinate_set()));
    out.verdict("offset", json!(pb.offset()));
    out.verdict("steps", traj.steps);
    out.verdict("final_l1_to_mean", last);
    if l1.len() > 1 {
        out.verdict("max_increase", max_increase(&l1));
    }
    if let Some(limit) = cfg.thresholds.max_final_l1 {
        out.require(
            last <= limit,
            format!("final l1_to_mean {last:e} exceeds {limit:e}"),
        );
    }
    if let Some(series) = t.series("l1_to_mean", "t", "l1_to_mean") {
        out.plots.push(Plot {
            name: "decay".into(),
            series: vec![series],
            log_y: true,
        });
    }
    out.tables.push(t);

    if let Some(cube) = &cfg.cube {
        let v = traj.final_field();
        let mean = traj.mean;
        let report = cube_seminorm(
            |x| interpolate(v, &pb.orbit_point(x)) - mean,
            pb.n(),
            1,
            &cube.radii,
            cube.samples_per_unit,
        )
        .map_err(validation)?;
        let mut c = Table::new("cube", &["radius", "n1_estimate"]);
        for (r, e) in report.radii.iter().zip(&report.estimates) {
            c.push(vec![(*r).into(), (*e).into()]);
        }
        out.verdict("n1_final", report.value);
        out.tables.push(c);
    }
    Ok(out)
}

fn contraction(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let basis = cfg.frequency_basis()?;
    let flux = cfg.parsed_flux(&basis)?;
    let data = cfg.parsed_data(&basis)?;
    let pbs = lift_problems(&data, &flux).map_err(validation)?;
    let grid = grid_for(pbs[0].m(), &cfg.grid)?;
    let fields = pbs
        .iter()
        .map(|pb| exact_cell_average(pb.v0(), &grid))
        .collect::<Result<Vec<_>, _>>()
        .map_err(solver_err)?;
    let cfl = cfg
        .solver
        .as_ref()
        .map_or(apcl_core::DEFAULT_CFL, |s| s.cfl);
    let [a, b]: [_; 2] = fields.try_into().expect("two data sets");
    let (_, _, dist) = evolve_pair(
        a,
        b,
        pbs[0].lifted_flux(),
        cfl,
        cfg.steps.expect("validated"),
    )
    .map_err(solver_err)?;
    let mut out = Outcome::new();
    let mut t = Table::new("contraction", &["step", "l1_distance"]);
    for (i, d) in dist.iter().enumerate() {
        t.push(vec![i.into(), (*d).into()]);
    }
    let inc = max_increase(&dist);
    out.verdict("m", pbs[0].m());
    out.verdict("initial_distance", dist[0]);
    out.verdict("final_distance", *dist.last().expect("nonempty"));
    out.verdict(
        "max_increase",
        if inc.is_finite() {
            json!(inc)
        } else {
            Value::Null
        },
    );
    out.require(
        !(inc > CONTRACTION_TOL),
        format!("distance increased by {inc:e} in one step"),
    );
    if let Some(s) = t.series("l1 distance", "step", "l1_distance") {
        out.plots.push(Plot {
            name: "contraction".into(),
            series: vec![s],
            log_y: false,
        });
    }
    out.tables.push(t);
    Ok(out)
}

fn wave(cfg: &ExperimentConfig) -> Result<(TravelingWave, apcl_core::PiecewiseFlux), HarnessError> {
    let basis = cfg.frequency_basis()?;
    let flux = cfg.parsed_flux(&basis)?;
    let group = cfg.group(&basis)?;
    let w = cfg.wave.as_ref().expect("validated");
    if w.k.len() != group.rank() {
        return Err(HarnessError::Config(format!(
            "wave.k: {} coordinates for a group of rank {}",
            w.k.len(),
            group.rank()
        )));
    }
    let a = parse_rational(&w.a).map_err(|e| HarnessError::Config(format!("wave.a: {e}")))?;
    let b = parse_rational(&w.b).map_err(|e| HarnessError::Config(format!("wave.b: {e}")))?;
    let wave = exact_counterexample(&flux, &group, &a, &b, &w.k).map_err(solver_err)?;
    // the traveling wave lives on the torus of the group
    let lifted = apcl_core::lift_flux(&flux, &group).map_err(validation)?;
    Ok((wave, lifted))
}

fn counterexample(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let (wave, flux) = wave(cfg)?;
    let grid = grid_for(wave.k.len(), &cfg.grid)?;
    let solver = cfg.solver_config(cfg.solver.as_ref().expect("validated"));
    let init = exact_cell_average(&wave.torus_poly(0.0), &grid).map_err(solver_err)?;
    let traj = evolve(init, &flux, wave.mid(), &solver, |_, _, _, _| {}).map_err(solver_err)?;
    let mut t = Table::new(
        "counterexample",
        &["t", "l1_to_mean", "l1_to_mean_exact", "l1_error"],
    );
    for (r, f) in traj.records.iter().zip(&traj.fields) {
        let exact = exact_cell_average(&wave.torus_poly(r.t), &grid).map_err(solver_err)?;
        let err = l1_distance(f, &exact).map_err(solver_err)?;
        t.push(vec![
            r.t.into(),
            r.l1_to_mean.into(),
            wave.l1_to_mean().into(),
            err.into(),
        ]);
    }
    let ratio = traj.final_record().l1_to_mean / traj.records[0].l1_to_mean;
    let mut out = Outcome::new();
    out.verdict("tau", wave.tau);
    out.verdict("k", json!(wave.k));
    out.verdict("exact_l1_to_mean", wave.l1_to_mean());
    out.verdict("non_decay_ratio", ratio);
    if let Some(min) = cfg.thresholds.min_ratio {
        out.require(ratio >= min, format!("non-decay ratio {ratio} below {min}"));
    }
    let numeric = t.series("numeric", "t", "l1_to_mean");
    let exact = t.series("exact", "t", "l1_to_mean_exact");
    out.plots.push(Plot {
        name: "counterexample".into(),
        series: numeric.into_iter().chain(exact).collect(),
        log_y: false,
    });
    out.tables.push(t);
    Ok(out)
}

fn convergence(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let (wave, flux) = wave(cfg)?;
    let solver = cfg.solver_config(cfg.solver.as_ref().expect("validated"));
    let mut t = Table::new("convergence", &["cells", "l1_error", "order"]);
    let mut errors: Vec<f64> = Vec::new();
    let mut orders = Vec::new();
    for &n in &cfg.grids {
        let grid = grid_for(wave.k.len(), &[n])?;
        let init = exact_cell_average(&wave.torus_poly(0.0), &grid).map_err(solver_err)?;
        let traj = evolve(init, &flux, wave.mid(), &solver, |_, _, _, _| {}).map_err(solver_err)?;
        let exact =
            exact_cell_average(&wave.torus_poly(solver.t_end), &grid).map_err(solver_err)?;
        let err = l1_distance(traj.final_field(), &exact).map_err(solver_err)?;
        let order = errors.last().map(|&prev| {
            (prev / err).log2() / (n as f64 / cfg.grids[errors.len() - 1] as f64).log2()
        });
        info!("N = {n}: error {err:e}");
        t.push(vec![
            n.into(),
            err.into(),
            order.map_or(Cell::Text(String::new()), Cell::Float),
        ]);
        orders.extend(order);
        errors.push(err);
    }
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = Outcome::new();
    out.verdict("orders", json!(orders));
    out.verdict("min_order", min_order);
    if let Some(min) = cfg.thresholds.min_order {
        out.require(
            min_order >= min,
            format!("observed order {min_order} below {min}"),
        );
    }
    if let Some(s) = t.series("l1 error", "cells", "l1_error") {
        out.plots.push(Plot {
            name: "convergence".into(),
            series: vec![s],
            log_y: true,
        });
    }
    out.tables.push(t);
    Ok(out)
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let basis = cfg.frequency_basis()?;
    let pb = lifted(cfg)?;
    let m0 = pb.m();
    let pb = if cfg.enlarge.is_empty() {
        pb
    } else {
        pb.enlarge(&cfg.enlarge_rows(&basis)?).map_err(validation)?
    };
    let grid = grid_for(pb.m(), &cfg.grid)?;
    let solver = cfg.solver_config(cfg.solver.as_ref().expect("validated"));
    let traj = run(&pb, &grid, &solver).map_err(solver_err)?;
    let (first, last) = (&traj.fields[0], traj.final_field());
    let mut t = Table::new(
        "spectrum",
        &["k", "in_data_group", "initial_abs", "final_abs"],
    );
    let mut worst_outside: f64 = 0.0;
    for (i, k) in cfg.probes.iter().enumerate() {
        if k.len() != pb.m() {
            return Err(HarnessError::Config(format!(
                "probes[{i}]: {} components, torus has {}",
                k.len(),
                pb.m()
            )));
        }
        let inside = k[m0..].iter().all(|&x| x == 0);
        let (a, b) = (first.fourier_coeff(k).norm(), last.fourier_coeff(k).norm());
        if !inside {
            worst_outside = worst_outside.max(b);
        }
        t.push(vec![
            Cell::Text(format!("{k:?}").replace(", ", ";")),
            Cell::Text(inside.to_string()),
            a.into(),
            b.into(),
        ]);
    }
    let a0 = last.mass();
    let mut out = Outcome::new();
    let max_outside = cfg.thresholds.max_outside.unwrap_or(DEFAULT_MAX_OUTSIDE);
    let mean_tol = cfg.thresholds.mean_tolerance.unwrap_or(DEFAULT_MEAN_TOL);
    out.verdict("m", pb.m());
    out.verdict("data_rank", m0);
    out.verdict("initial_mean", traj.mean);
    out.verdict("final_mean", a0);
    out.verdict("max_outside", worst_outside);
    out.require(
        worst_outside <= max_outside,
        format!("coefficient {worst_outside:e} outside the data group exceeds {max_outside:e}"),
    );
    out.require(
        (a0 - traj.mean).abs() <= mean_tol,
        format!("mean drifted from {} to {a0}", traj.mean),
    );
    out.tables.push(t);
    Ok(out)
}
