//! Single-scenario runs and their on-disk artifacts.

use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::solver::{run, Form, Termination, Trajectory};

use super::config::Scenario;
use super::output::{fmt_f64, fmt_opt, time_tag, write_table, MISSING};

#[derive(Debug, Clone)]
pub struct FormRun {
    pub form: Form,
    pub trajectory: Trajectory,
}

/// Outcome of simulating one scenario in each requested form.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub mesh: Mesh,
    pub inside_theorem: bool,
    pub runs: Vec<FormRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GronwallVerdict {
    Pass,
    Fail,
    /// No admissible bound at any output time.
    Unavailable,
}

impl GronwallVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            GronwallVerdict::Pass => "pass",
            GronwallVerdict::Fail => "fail",
            GronwallVerdict::Unavailable => "unavailable",
        }
    }
}

/// Run verdicts and sup-over-time of the monitored quantities for one form.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub form: Form,
    pub completed: bool,
    pub vacuum_time: Option<f64>,
    pub failure: Option<String>,
    pub end_time: f64,
    pub steps: usize,
    pub min_rho: f64,
    pub min_mu: f64,
    pub sup_v_inf: f64,
    pub sup_wvel_inf: f64,
    pub sup_energy: f64,
    pub sup_bd_entropy: f64,
    pub sup_inv_rho_max: f64,
    pub sup_rho_h1: f64,
    pub sup_v_moments: Vec<(u32, f64)>,
    /// `max_t |E(t) + D(t) - E(0)| / E(0)`.
    pub energy_defect: f64,
    /// Same for the BD entropy and its dissipation.
    pub bd_defect: f64,
    pub gronwall: GronwallVerdict,
}

/// Relative defect of a balance `F(t) + D(t) = F(0)`; absolute when `F(0) = 0`.
fn balance_defect(frames: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> (f64, f64)) -> f64 {
    let Some(first) = frames.first() else { return 0.0 };
    let f0 = f(first).0;
    let scale = if f0 > 0.0 { f0 } else { 1.0 };
    frames
        .iter()
        .map(|r| {
            let (v, d) = f(r);
            (v + d - f0).abs() / scale
        })
        .fold(0.0, f64::max)
}

pub fn gronwall_verdict(frames: &[DiagnosticsRecord], slack: f64) -> GronwallVerdict {
    let any_bound = frames.iter().any(|r| r.v_bounds.iter().any(Option::is_some));
    if !any_bound {
        GronwallVerdict::Unavailable
    } else if frames.iter().all(|r| r.moments_within_bounds(slack)) {
        GronwallVerdict::Pass
    } else {
        GronwallVerdict::Fail
    }
}

pub fn summarize(form: Form, traj: &Trajectory, slack: f64) -> RunSummary {
    let recs: Vec<DiagnosticsRecord> = traj.frames.iter().map(|f| f.diag.clone()).collect();
    let sup = |g: fn(&DiagnosticsRecord) -> f64| recs.iter().map(g).fold(f64::NEG_INFINITY, f64::max);
    let sup_v_moments = recs[0]
        .v_moments
        .iter()
        .enumerate()
        .map(|(k, (o, _))| (*o, recs.iter().map(|r| r.v_moments[k].1).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    let (vacuum_time, failure) = match &traj.termination {
        Termination::Completed => (None, None),
        Termination::Vacuum { t, .. } => (Some(*t), None),
        Termination::Failed { reason, .. } => (None, Some(reason.clone())),
    };
    RunSummary {
        form,
        completed: traj.termination == Termination::Completed,
        vacuum_time,
        failure,
        end_time: traj.last().state.t,
        steps: traj.steps,
        min_rho: traj.min_rho_seen,
        min_mu: traj.min_mu_seen,
        sup_v_inf: sup(|r| r.v_inf),
        sup_wvel_inf: sup(|r| r.wvel_inf),
        sup_energy: sup(|r| r.energy),
        sup_bd_entropy: sup(|r| r.bd_entropy),
        sup_inv_rho_max: sup(|r| r.inv_rho_max),
        sup_rho_h1: sup(|r| r.rho_h1),
        sup_v_moments,
        energy_defect: balance_defect(&recs, |r| (r.energy, r.diss_u)),
        bd_defect: balance_defect(&recs, |r| (r.bd_entropy, r.diss_bd)),
        gronwall: gronwall_verdict(&recs, slack),
    }
}

impl ScenarioRun {
    pub fn get(&self, form: Form) -> Option<&Trajectory> {
        self.runs.iter().find(|r| r.form == form).map(|r| &r.trajectory)
    }

    pub fn summaries(&self) -> Vec<RunSummary> {
        self.runs.iter().map(|r| summarize(r.form, &r.trajectory, self.scenario.run.gronwall_slack)).collect()
    }

    /// `(t, ||rho_U - rho_V||_inf)` at output times reached by both forms.
    pub fn form_difference(&self) -> Vec<(f64, f64)> {
        let (Some(u), Some(v)) = (self.get(Form::U), self.get(Form::V)) else { return Vec::new() };
        u.frames
            .iter()
            .filter_map(|fu| {
                let fv = v.frames.iter().find(|fv| fv.state.t == fu.state.t)?;
                let d = fu.state.rho.iter().zip(&fv.state.rho).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
                Some((fu.state.t, d))
            })
            .collect()
    }
}

/// Runs every requested form of `s` without touching the filesystem.
pub fn simulate(s: &Scenario) -> Result<ScenarioRun> {
    let report = s.validate()?;
    let mesh = s.mesh()?;
    let profile = s.profile(&mesh)?;
    let mut runs = Vec::new();
    for form in s.run.form.forms() {
        let initial = s.initial_state(&mesh, &profile, form)?;
        let trajectory = run(&initial, &mesh, &s.params, &profile, &s.run_config(form))?;
        if let Termination::Vacuum { t, x, rho, .. } = trajectory.termination {
            log::warn!("{} ({form:?}): vacuum breach at t = {t}, x = {x}, rho = {rho}", s.name);
        }
        runs.push(FormRun { form, trajectory });
    }
    Ok(ScenarioRun { scenario: s.clone(), mesh, inside_theorem: report.inside_theorem, runs })
}

fn form_name(f: Form) -> &'static str {
    match f {
        Form::U => "U",
        Form::V => "V",
    }
}

pub fn summary_header(moments: &[u32]) -> Vec<String> {
    let mut h: Vec<String> = [
        "name",
        "form",
        "inside_theorem",
        "completed",
        "vacuum",
        "vacuum_time",
        "failure",
        "end_time",
        "steps",
        "min_rho",
        "min_mu",
        "sup_v_inf",
        "sup_wvel_inf",
        "sup_energy",
        "sup_bd_entropy",
        "sup_inv_rho_max",
        "sup_rho_h1",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(moments.iter().map(|p| format!("sup_v_moment_{p}")));
    h.extend(["energy_defect", "bd_defect", "gronwall"].iter().map(|s| s.to_string()));
    h
}

fn summary_row(name: &str, inside: bool, s: &RunSummary) -> Vec<String> {
    let mut r = vec![
        name.to_string(),
        form_name(s.form).to_string(),
        inside.to_string(),
        s.completed.to_string(),
        if s.vacuum_time.is_some() { "yes" } else { "no" }.to_string(),
        fmt_opt(s.vacuum_time),
        s.failure.clone().unwrap_or_else(|| MISSING.to_string()),
        fmt_f64(s.end_time),
        s.steps.to_string(),
    ];
    r.extend(
        [
            s.min_rho,
            s.min_mu,
            s.sup_v_inf,
            s.sup_wvel_inf,
            s.sup_energy,
            s.sup_bd_entropy,
            s.sup_inv_rho_max,
            s.sup_rho_h1,
        ]
        .into_iter()
        .map(fmt_f64),
    );
    r.extend(s.sup_v_moments.iter().map(|(_, m)| fmt_f64(*m)));
    r.extend([fmt_f64(s.energy_defect), fmt_f64(s.bd_defect), s.gronwall.as_str().to_string()]);
    r
}

/// Writes `timeseries.csv`, `summary.csv`, optional `fields_*.csv` snapshots
/// and, for two-form runs, `formdiff.csv` into `dir`.
pub fn write_outputs(res: &ScenarioRun, dir: &Path) -> Result<()> {
    let s = &res.scenario;
    let moments = &s.run.moments;

    let mut header = vec!["form".to_string()];
    header.extend(DiagnosticsRecord::header(moments));
    let mut rows = Vec::new();
    for r in &res.runs {
        for f in &r.trajectory.frames {
            let mut row = vec![form_name(r.form).to_string()];
            row.extend(f.diag.values().into_iter().map(fmt_opt));
            rows.push(row);
        }
    }
    write_table(&dir.join("timeseries.csv"), &header, &rows)?;

    let summaries: Vec<Vec<String>> =
        res.summaries().iter().map(|sm| summary_row(&s.name, res.inside_theorem, sm)).collect();
    write_table(&dir.join("summary.csv"), &summary_header(moments), &summaries)?;

    if s.run.snapshots {
        let both = res.runs.len() > 1;
        let header: Vec<String> = ["x", "rho", "u", "v"].iter().map(|s| s.to_string()).collect();
        for r in &res.runs {
            for f in &r.trajectory.frames {
                let u = f.state.to_form(Form::U, &res.mesh, &s.params)?;
                let v = f.state.to_form(Form::V, &res.mesh, &s.params)?;
                let rows: Vec<Vec<String>> = (0..res.mesh.len())
                    .map(|i| {
                        vec![fmt_f64(res.mesh.x()[i]), fmt_f64(f.state.rho[i]), fmt_f64(u.vel[i]), fmt_f64(v.vel[i])]
                    })
                    .collect();
                let name = if both {
                    format!("fields_{}_{}.csv", form_name(r.form), time_tag(f.state.t))
                } else {
                    format!("fields_{}.csv", time_tag(f.state.t))
                };
                write_table(&dir.join(name), &header, &rows)?;
            }
        }
    }

    if res.runs.len() > 1 {
        let rows: Vec<Vec<String>> =
            res.form_difference().into_iter().map(|(t, d)| vec![fmt_f64(t), fmt_f64(d)]).collect();
        write_table(&dir.join("formdiff.csv"), &["t".into(), "rho_diff_inf".into()], &rows)?;
    }
    Ok(())
}

/// [`simulate`] followed by [`write_outputs`].
pub fn run_scenario(s: &Scenario, dir: &Path) -> Result<ScenarioRun> {
    let res = simulate(s)?;
    write_outputs(&res, dir)?;
    Ok(res)
}
