//! Runs a parsed configuration and writes the trajectory CSV, optional state
//! dumps and the summary JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::config::{InitialProfile, RunConfig};
use super::json::Json;
use crate::error::{Error, Result};
use crate::limit::{radial_sup_bound_check, run_continuation, ContinuationPlan, ContinuationReport, Verdict};
use crate::mesh::{build_mesh, parse_dump, profiles, Domain, Field, Mesh, Resolution};
use crate::model::{
    check_f_conditions, default_dictionary, default_grid, estimate_dp, nehari_scale, well_status, WellReport,
    ENERGY_STRICT_TOL, NEHARI_STRICT_TOL, ON_NEHARI_TOL,
};
use crate::solver::{
    detect_tmax, energy_audit, growth_audit, gradient_bound_audit, l2_audit, residual_audit, run,
    well_invariance_audit, RunStatus, Trajectory, LINEAR_SOLVE_TOL,
};

pub const FORMAT_VERSION: i64 = 1;

/// Relative energy-ledger slack above which the energy audit is flagged.
pub const ENERGY_AUDIT_TOL: f64 = 1e-3;
/// Absolute slack on the L² monotonicity audit.
pub const L2_AUDIT_TOL: f64 = 1e-8;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_STEP_FAILURE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Completed(_) | RunStatus::Extinct(_) => EXIT_OK,
        RunStatus::BlowUp(_) => EXIT_BLOWUP,
        RunStatus::StepFailure(_) => EXIT_STEP_FAILURE,
    }
}

/// Exit code for an error raised before or after the numerics.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: Json,
}

pub fn build_experiment_mesh(cfg: &RunConfig) -> Result<Arc<Mesh>> {
    build_mesh(cfg.domain, cfg.resolution).map_err(|e| Error::config("domain", e.to_string()))
}

pub fn initial_field(cfg: &RunConfig, mesh: &Arc<Mesh>, p: f64) -> Result<Field> {
    let bad = |e: Error| Error::config("initial", e.to_string());
    Ok(match &cfg.initial {
        InitialProfile::Flat { c } => profiles::flat(mesh, *c),
        InitialProfile::Hat { amplitude } => profiles::hat(mesh).scaled(*amplitude),
        InitialProfile::Bump { center, width, amplitude } => profiles::bump(mesh, *center, *width, *amplitude),
        InitialProfile::Dictionary { index, scale } => {
            let phi = default_dictionary(mesh, cfg.audits.dictionary_size).swap_remove(*index);
            let t = nehari_scale(&phi, p, &cfg.nl).map_err(bad)?;
            phi.scaled(scale * t)
        }
        InitialProfile::File { path } => {
            let text = fs::read_to_string(path)?;
            let dump = parse_dump(&text).map_err(bad)?;
            dump.check_against(mesh).map_err(bad)?;
            let values = dump.values.ok_or_else(|| Error::config("initial.path", "dump has no value column"))?;
            let mut u = Field::new(Arc::clone(mesh), values).map_err(bad)?;
            u.apply_dirichlet();
            u
        }
    })
}

fn d_hat_for(cfg: &RunConfig, mesh: &Arc<Mesh>, u0: &Field, p: f64) -> Result<f64> {
    if cfg.nl.theta().is_none() {
        return Ok(f64::INFINITY);
    }
    let mut dictionary = default_dictionary(mesh, cfg.audits.dictionary_size);
    if !u0.is_zero() {
        dictionary.push(u0.clone());
    }
    if dictionary.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(estimate_dp(mesh, p, &cfg.nl, &dictionary)?.d_hat)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = format!("# tvflow-trajectory format_version={FORMAT_VERSION}\n");
    out.push_str("t,E_p,I_p,tv,l2,sup,dissipation_cum,dt\n");
    for s in &traj.snapshots {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.time, s.energy, s.nehari, s.tv, s.l2, s.sup, s.dissipation_cum, s.dt
        );
    }
    out
}

fn well_json(r: &WellReport) -> Json {
    Json::object()
        .with("status", r.status.name())
        .with("d_hat", r.d_hat)
        .with("margin_e", r.margin_e)
        .with("margin_i", r.margin_i)
        .with("energy", r.energy)
}

fn config_json(cfg: &RunConfig) -> Json {
    let mut domain = Json::object().with("kind", cfg.domain.kind());
    match cfg.domain {
        Domain::Interval { length } => domain.set("length", length),
        Domain::Annulus { inner, outer, dim } => domain.set("a", inner).set("b", outer).set("N", dim),
        Domain::Rectangle { width, height } => domain.set("width", width).set("height", height),
    };
    match cfg.resolution {
        Resolution::Uniform(n) => domain.set("n", n),
        Resolution::Grid(nx, ny) => domain.set("nx", nx).set("ny", ny),
    };
    let mut reaction = Json::object().with("kind", cfg.nl.name()).with("theta", cfg.nl.theta()).with("p0", cfg.p0);
    match cfg.nl {
        crate::model::Nonlinearity::Zero => &mut reaction,
        crate::model::Nonlinearity::Power { q } => reaction.set("q", q),
        crate::model::Nonlinearity::SumPowers { q, s } => reaction.set("q", q).set("s", s),
        crate::model::Nonlinearity::ExpPower { q, alpha } => reaction.set("q", q).set("alpha", alpha),
    };
    let s = &cfg.solver;
    let mut solver = Json::object()
        .with("eps", s.eps)
        .with("dt0", s.dt0)
        .with("dt_min", s.dt_min)
        .with("t_end", s.t_end)
        .with("u_max", s.u_max)
        .with("tol_ext", s.tol_ext)
        .with("energy_residual_tol", s.energy_residual_tol)
        .with("adapt", s.adapt)
        .with("store_stride", s.store_stride)
        .with("checkpoints", s.checkpoints.clone())
        .with("max_steps", s.max_steps);
    if cfg.continuation.is_none() {
        solver.set("p", s.p);
    }
    let initial = match &cfg.initial {
        InitialProfile::Flat { c } => Json::object().with("profile", "flat").with("c", *c),
        InitialProfile::Hat { amplitude } => Json::object().with("profile", "hat").with("amplitude", *amplitude),
        InitialProfile::Bump { center, width, amplitude } => Json::object()
            .with("profile", "bump")
            .with("center", center.to_vec())
            .with("width", *width)
            .with("amplitude", *amplitude),
        InitialProfile::Dictionary { index, scale } => {
            Json::object().with("profile", "dictionary").with("index", *index).with("scale", *scale)
        }
        InitialProfile::File { path } => {
            Json::object().with("profile", "file").with("path", path.display().to_string())
        }
    };
    let a = &cfg.audits;
    let audits = Json::object()
        .with("energy", a.energy)
        .with("residual", a.residual)
        .with("well", a.well)
        .with("l2", a.l2)
        .with("gradient_bound", a.gradient_bound)
        .with("growth", a.growth)
        .with("radial", a.radial)
        .with("reaction", a.reaction)
        .with("dictionary_size", a.dictionary_size);
    let output = Json::object()
        .with("trajectory", cfg.output.trajectory.as_str())
        .with("summary", cfg.output.summary.as_str())
        .with("dump_states", cfg.output.dump_states);
    let mut out = Json::object()
        .with("domain", domain)
        .with("reaction", reaction)
        .with("solver", solver)
        .with("initial", initial)
        .with("audits", audits)
        .with("output", output);
    if let Some(c) = &cfg.continuation {
        out.set(
            "continuation",
            Json::object()
                .with("p_sequence", c.p_sequence.clone())
                .with("eps_schedule", c.eps_schedule.clone())
                .with("checkpoints", c.checkpoints.clone()),
        );
    }
    out
}

fn provenance(cfg: &RunConfig) -> Json {
    Json::object()
        .with("config", config_json(cfg))
        .with("code_version", env!("CARGO_PKG_VERSION"))
        .with(
            "tolerances",
            Json::object()
                .with("energy_audit", ENERGY_AUDIT_TOL)
                .with("l2_audit", L2_AUDIT_TOL)
                .with("energy_residual", cfg.solver.energy_residual_tol)
                .with("linear_solve", LINEAR_SOLVE_TOL)
                .with("nehari_strict", NEHARI_STRICT_TOL)
                .with("energy_strict", ENERGY_STRICT_TOL)
                .with("on_nehari", ON_NEHARI_TOL),
        )
}

/// Audits of a single run, each either a report or `"skipped"`, plus the
/// names of the audits that flagged a violation.
fn audits_json(cfg: &RunConfig, traj: &Trajectory, d_hat: f64) -> Result<(Json, Vec<String>)> {
    let a = &cfg.audits;
    let p = traj.p;
    let mut out = Json::object();
    let mut violations = Vec::new();
    let mut flag = |name: &str, bad: bool| {
        if bad {
            violations.push(name.to_string());
        }
    };

    if a.energy {
        let e = energy_audit(traj);
        flag("energy", !(e.worst_relative <= ENERGY_AUDIT_TOL));
        out.set(
            "energy",
            Json::object()
                .with("worst_slack", e.worst_slack)
                .with("worst_relative", e.worst_relative)
                .with("k_constant", e.k_constant)
                .with("dt_max", e.dt_max)
                .with("final_slack", e.final_slack),
        );
    } else {
        out.set("energy", Json::skipped());
    }

    if a.residual {
        let r = residual_audit(traj, cfg.solver.energy_residual_tol);
        flag("residual", r.violations > 0);
        out.set(
            "residual",
            Json::object().with("steps", r.steps).with("worst_ratio", r.worst_ratio).with("violations", r.violations),
        );
    } else {
        out.set("residual", Json::skipped());
    }

    if a.well {
        let w = well_invariance_audit(traj, p, &cfg.nl, d_hat)?;
        flag("well", !w.all_inside());
        let first = w.first_violation.map(|v| {
            Json::object()
                .with("time", v.time)
                .with("status", v.status.name())
                .with("margin_e", v.margin_e)
                .with("margin_i", v.margin_i)
        });
        out.set(
            "well",
            Json::object()
                .with("d_hat", d_hat)
                .with("checked", w.checked)
                .with("all_inside", w.all_inside())
                .with("first_violation", first)
                .with("min_margin_e", w.min_margin_e)
                .with("min_margin_i", w.min_margin_i),
        );
    } else {
        out.set("well", Json::skipped());
    }

    if a.l2 {
        let l = l2_audit(traj);
        flag("l2", l.nehari_positive && !(l.max_increase <= L2_AUDIT_TOL));
        out.set(
            "l2",
            Json::object()
                .with("max_increase", l.max_increase)
                .with("max_excess", l.max_excess)
                .with("nehari_positive", l.nehari_positive)
                .with("strictly_decreasing", l.strictly_decreasing)
                .with("identity_worst", l.identity_worst),
        );
    } else {
        out.set("l2", Json::skipped());
    }

    match cfg.nl.theta().filter(|&t| a.gradient_bound && t > p) {
        Some(theta) => {
            let g = gradient_bound_audit(traj, p, theta, d_hat)?;
            flag("gradient_bound", !g.holds());
            out.set(
                "gradient_bound",
                Json::object()
                    .with("bound", g.bound)
                    .with("worst_margin", g.worst_margin)
                    .with("dissipation_total", g.dissipation_total)
                    .with("dissipation_margin", g.dissipation_margin),
            );
        }
        None => {
            out.set("gradient_bound", Json::skipped());
        }
    }

    match growth_audit(traj, &cfg.nl).filter(|_| a.growth) {
        Some(g) => {
            flag("growth", !(g.worst_ratio <= 1.0));
            out.set("growth", Json::object().with("bound", g.bound).with("worst_ratio", g.worst_ratio));
        }
        None => {
            out.set("growth", Json::skipped());
        }
    }

    if a.radial && matches!(cfg.domain, Domain::Annulus { .. }) {
        let mut worst: Option<(f64, f64)> = None;
        for s in &traj.states {
            let r = radial_sup_bound_check(&s.field)?;
            if worst.is_none_or(|(w, _)| r.worst_slack < w) {
                worst = Some((r.worst_slack, s.time));
            }
        }
        let (slack, time) = worst.unwrap_or((0.0, 0.0));
        flag("radial", slack < 0.0);
        out.set("radial", Json::object().with("worst_slack", slack).with("time", time).with("holds", slack >= 0.0));
    } else {
        out.set("radial", Json::skipped());
    }

    out.set("reaction", reaction_json(cfg, &mut flag));
    Ok((out, violations))
}

fn reaction_json(cfg: &RunConfig, flag: &mut impl FnMut(&str, bool)) -> Json {
    match cfg.p0.filter(|_| cfg.audits.reaction) {
        Some(p0) => {
            let r = check_f_conditions(&cfg.nl, p0, &default_grid());
            flag("reaction", !(r.f1_holds && r.f2_holds && r.f3_holds != Some(false)));
            Json::object()
                .with("f1_ratio_max", r.f1_ratio_max)
                .with("f1_holds", r.f1_holds)
                .with("f2_min_slack", r.f2_min_slack)
                .with("f2_holds", r.f2_holds)
                .with("growth_exponent_fit", r.growth_exponent_fit)
                .with("f3_holds", r.f3_holds)
        }
        None => Json::skipped(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

fn single_run(cfg: &RunConfig, mesh: &Arc<Mesh>) -> Result<Outcome> {
    let p = cfg.solver.p;
    let u0 = initial_field(cfg, mesh, p)?;
    let d_hat = d_hat_for(cfg, mesh, &u0, p)?;
    let traj = run(mesh, &u0, &cfg.solver, &cfg.nl)?;
    let (audits, violations) = audits_json(cfg, &traj, d_hat)?;
    let last = traj.last();
    let extinction = match traj.status {
        RunStatus::Extinct(t) => Some(t),
        _ => None,
    };
    let summary = Json::object()
        .with("format_version", FORMAT_VERSION)
        .with("mode", "run")
        .with("p", p)
        .with("eps", traj.eps)
        .with("status", traj.status.name())
        .with("status_time", traj.status.time())
        .with("t_max", detect_tmax(&traj, &cfg.solver))
        .with("extinction_time", extinction)
        .with("failure", traj.failure.clone())
        .with("steps", traj.steps.len())
        .with("rejected_steps", traj.rejected_steps)
        .with("initial_well", well_json(&well_status(&u0, p, &cfg.nl, d_hat)?))
        .with(
            "final",
            Json::object()
                .with("time", last.time)
                .with("energy", last.energy)
                .with("nehari", last.nehari)
                .with("tv", last.tv)
                .with("l2", last.l2)
                .with("sup", last.sup)
                .with("dissipation_cum", last.dissipation_cum),
        )
        .with("audits", audits)
        .with("audit_violations", violations)
        .with("provenance", provenance(cfg));

    let dir = &cfg.output.dir;
    write_file(&dir.join(&cfg.output.trajectory), &trajectory_csv(&traj))?;
    if cfg.output.dump_states {
        let states = dir.join("states");
        prepare_dir(&states)?;
        let mut index = format!("# tvflow-states format_version={FORMAT_VERSION}\nk,t,file\n");
        for (k, s) in traj.states.iter().enumerate() {
            let name = format!("state_{k:05}.txt");
            write_file(&states.join(&name), &mesh.dump(Some(s.field.values()))?)?;
            let _ = writeln!(index, "{k},{:.16e},{name}", s.time);
        }
        write_file(&states.join("index.csv"), &index)?;
    }
    Ok(Outcome { exit_code: exit_code(traj.status), summary })
}

fn verdict_json(v: &Verdict) -> Json {
    Json::object().with("holds", v.holds).with("value", v.value).with("tolerance", v.tolerance)
}

pub fn continuation_json(report: &ContinuationReport) -> Json {
    let records: Vec<Json> = report
        .records
        .iter()
        .map(|r| {
            Json::object()
                .with("p", r.p)
                .with("eps", r.eps)
                .with("status", r.status.name())
                .with("status_time", r.status.time())
                .with("failure", r.failure.clone())
                .with("u0_well", r.u0_well.name())
                .with("d_hat", r.d_hat)
                .with("max_abs_z", r.max_abs_z)
                .with("alignment_min", r.alignment_min)
                .with("boundary_sign_worst", r.boundary_sign_worst)
                .with("grad_bound_worst", r.grad_bound_worst)
                .with("grad_bound_ceiling", r.grad_bound_ceiling)
                .with("dissipation_total", r.dissipation_total)
                .with("energy_inequality_worst_residual", r.energy_inequality_worst_residual)
                .with("energy_p_worst_residual", r.energy_p_worst_residual)
                .with("young_min_gap", r.young_min_gap)
                .with("equation_residual_worst", r.equation_residual_worst)
                .with("div_z_l2_max", r.div_z_l2_max)
                .with("tv_max", r.tv_max)
        })
        .collect();
    let t = report.tolerances;
    let verdicts = match &report.verdicts {
        Some(v) => Json::object()
            .with("z_bound", verdict_json(&v.z_bound))
            .with("pairing", verdict_json(&v.pairing))
            .with("boundary_sign", verdict_json(&v.boundary_sign))
            .with("equation", verdict_json(&v.equation))
            .with("energy_inequality", verdict_json(&v.energy_inequality)),
        None => Json::skipped(),
    };
    Json::object()
        .with("records", Json::Array(records))
        .with("z_cauchy", report.z_cauchy.clone())
        .with("uniform_grad_bound", report.uniform_grad_bound)
        .with("uniform_dissipation", report.uniform_dissipation)
        .with("z_growth_ok", report.z_growth_ok.clone())
        .with("energy_u0", report.energy_u0)
        .with("verdicts", verdicts)
        .with(
            "tolerances",
            Json::object()
                .with("z_bound", t.z_bound)
                .with("pairing", t.pairing)
                .with("boundary_sign", t.boundary_sign)
                .with("boundary_zero", t.boundary_zero)
                .with("equation", t.equation)
                .with("energy", t.energy),
        )
}

fn continuation_run(cfg: &RunConfig, mesh: &Arc<Mesh>) -> Result<Outcome> {
    let c = cfg.continuation.as_ref().expect("continuation section present");
    let u0 = initial_field(cfg, mesh, c.p_sequence[0])?;
    let mut plan = ContinuationPlan::new(u0, cfg.nl, c.p_sequence.len());
    plan.p_sequence = c.p_sequence.clone();
    plan.eps_schedule = c.eps_schedule.clone();
    plan.checkpoints = c.checkpoints.clone();
    plan.cfg = cfg.solver.clone();
    plan.dictionary = default_dictionary(mesh, cfg.audits.dictionary_size);
    plan.p0 = if matches!(cfg.domain, Domain::Annulus { .. }) { cfg.p0 } else { None };
    let report = run_continuation(&plan)?;
    let exit = report.records.iter().map(|r| exit_code(r.status)).max().unwrap_or(EXIT_OK);
    let mut violations = Vec::new();
    if let Some(v) = &report.verdicts {
        for (name, v) in [
            ("z_bound", v.z_bound),
            ("pairing", v.pairing),
            ("boundary_sign", v.boundary_sign),
            ("equation", v.equation),
            ("energy_inequality", v.energy_inequality),
        ] {
            if !v.holds {
                violations.push(name.to_string());
            }
        }
    }
    let mut reaction_flags = Vec::new();
    let reaction = reaction_json(cfg, &mut |n: &str, bad: bool| {
        if bad {
            reaction_flags.push(n.to_string());
        }
    });
    violations.extend(reaction_flags);
    let last = report.records.last().expect("plan is non-empty");
    let summary = Json::object()
        .with("format_version", FORMAT_VERSION)
        .with("mode", "continuation")
        .with("status", last.status.name())
        .with("status_time", last.status.time())
        .with("continuation", continuation_json(&report))
        .with("audits", Json::object().with("reaction", reaction))
        .with("audit_violations", violations)
        .with("provenance", provenance(cfg));
    let dir = &cfg.output.dir;
    let mut csv = format!("# tvflow-continuation format_version={FORMAT_VERSION}\n");
    csv.push_str("p,eps,max_abs_z,alignment_min,boundary_sign_worst,grad_bound_worst,dissipation_total,d_hat,energy_inequality_worst_residual\n");
    for r in &report.records {
        let _ = writeln!(
            csv,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.p,
            r.eps,
            r.max_abs_z,
            r.alignment_min,
            r.boundary_sign_worst,
            r.grad_bound_worst,
            r.dissipation_total,
            r.d_hat,
            r.energy_inequality_worst_residual
        );
    }
    write_file(&dir.join(&cfg.output.trajectory), &csv)?;
    Ok(Outcome { exit_code: exit, summary })
}

/// Runs the experiment and writes its artifacts. Audit violations are
/// recorded in the summary and never change the exit code.
pub fn run_experiment(cfg: &RunConfig) -> Result<Outcome> {
    prepare_dir(&cfg.output.dir)?;
    let mesh = build_experiment_mesh(cfg)?;
    let outcome = if cfg.continuation.is_some() { continuation_run(cfg, &mesh)? } else { single_run(cfg, &mesh)? };
    write_file(&cfg.output.dir.join(&cfg.output.summary), &outcome.summary.render())?;
    Ok(outcome)
}
