//! Parameter sweeps, grid-refinement and regularization studies.

use std::path::Path;

use rayon::prelude::*;

use crate::constitutive::validate_params;
use crate::error::{Error, Result};
use crate::solver::{restrict, Form, Termination, Trajectory};

use super::config::{Scenario, SolverForm};
use super::output::{fmt_f64, fmt_opt, write_table, MISSING};
use super::run::{simulate, summarize, GronwallVerdict};

fn inf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

/// Sweeps and studies run a single form; `both` falls back to `U`.
fn study_form(s: &Scenario) -> Form {
    s.run.form.forms()[0]
}

fn single_form(s: &Scenario) -> Scenario {
    let mut s = s.clone();
    s.run.form = match study_form(&s) {
        Form::U => SolverForm::U,
        Form::V => SolverForm::V,
    };
    s.run.snapshots = false;
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Completed,
    Vacuum,
    Failed(String),
    Error(String),
}

impl RowStatus {
    fn label(&self) -> &'static str {
        match self {
            RowStatus::Completed => "completed",
            RowStatus::Vacuum => "vacuum",
            RowStatus::Failed(_) => "failed",
            RowStatus::Error(_) => "error",
        }
    }

    fn message(&self) -> String {
        match self {
            RowStatus::Failed(m) | RowStatus::Error(m) => m.clone(),
            _ => MISSING.to_string(),
        }
    }
}

fn status_of(t: &Trajectory) -> RowStatus {
    match &t.termination {
        Termination::Completed => RowStatus::Completed,
        Termination::Vacuum { .. } => RowStatus::Vacuum,
        Termination::Failed { reason, .. } => RowStatus::Failed(reason.clone()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub gamma: f64,
    /// `None` when the parameters were rejected outright.
    pub inside_theorem: Option<bool>,
    /// `gamma - (alpha + 1/2 + eps)`
    pub threshold_margin: f64,
    pub status: RowStatus,
    pub min_rho: Option<f64>,
    pub vacuum_time: Option<f64>,
    pub sup_v_inf: Option<f64>,
    pub gronwall: Option<GronwallVerdict>,
}

fn sweep_point(base: &Scenario, alpha: f64, gamma: f64) -> SweepRow {
    let mut s = single_form(base);
    s.params.alpha = alpha;
    s.params.gamma = gamma;
    let mut row = SweepRow {
        alpha,
        gamma,
        inside_theorem: None,
        threshold_margin: gamma - (alpha + 0.5 + s.params.eps),
        status: RowStatus::Error(String::new()),
        min_rho: None,
        vacuum_time: None,
        sup_v_inf: None,
        gronwall: None,
    };
    if let Ok(r) = validate_params(&s.params) {
        row.inside_theorem = Some(r.inside_theorem);
    }
    match simulate(&s) {
        Ok(res) => {
            let t = &res.runs[0].trajectory;
            let sm = summarize(res.runs[0].form, t, s.run.gronwall_slack);
            row.status = status_of(t);
            row.min_rho = Some(sm.min_rho);
            row.vacuum_time = sm.vacuum_time;
            row.sup_v_inf = Some(sm.sup_v_inf);
            row.gronwall = Some(sm.gronwall);
        }
        Err(e) => row.status = RowStatus::Error(e.to_string()),
    }
    row
}

/// Runs `base` at every `(alpha, gamma)` of the product grid, alpha-major.
/// Rows are independent; a failing point is recorded and the sweep continues.
pub fn sweep(base: &Scenario, alphas: &[f64], gammas: &[f64]) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() || gammas.is_empty() {
        return Err(Error::config("sweep grids must be non-empty"));
    }
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| gammas.iter().map(move |&g| (a, g))).collect();
    Ok(points.par_iter().map(|&(a, g)| sweep_point(base, a, g)).collect())
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let header: Vec<String> = [
        "alpha",
        "gamma",
        "inside_theorem",
        "threshold_margin",
        "status",
        "min_rho",
        "vacuum_time",
        "sup_v_inf",
        "gronwall",
        "message",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.alpha),
                fmt_f64(r.gamma),
                r.inside_theorem.map_or_else(|| MISSING.to_string(), |b| b.to_string()),
                fmt_f64(r.threshold_margin),
                r.status.label().to_string(),
                fmt_opt(r.min_rho),
                fmt_opt(r.vacuum_time),
                fmt_opt(r.sup_v_inf),
                r.gronwall.map_or(MISSING, |g| g.as_str()).to_string(),
                r.status.message(),
            ]
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Observed order between two error levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Defined(f64),
    /// Finer error at round-off level.
    RoundOff,
    /// Error did not decrease.
    NonMonotone,
    /// One of the runs did not reach the end time.
    Incomplete,
}

impl Order {
    pub fn value(self) -> Option<f64> {
        match self {
            Order::Defined(v) => Some(v),
            _ => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Order::Defined(_) => "ok",
            Order::RoundOff => "undefined-roundoff",
            Order::NonMonotone => "undefined-non-monotone",
            Order::Incomplete => "undefined-incomplete",
        }
    }
}

/// Errors below this fraction of the field scale count as round-off.
const ROUNDOFF: f64 = 1e-12;

pub fn observed_order(coarse: f64, fine: f64, ratio: f64, scale: f64) -> Order {
    if !(coarse.is_finite() && fine.is_finite()) {
        Order::Incomplete
    } else if fine <= ROUNDOFF * scale.max(1.0) || coarse <= ROUNDOFF * scale.max(1.0) {
        Order::RoundOff
    } else if fine >= coarse {
        Order::NonMonotone
    } else {
        Order::Defined((coarse / fine).ln() / ratio.ln())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub quantity: String,
    pub form: String,
    /// Resolutions the two error levels belong to.
    pub n_a: usize,
    pub n_b: usize,
    pub err_a: f64,
    pub err_b: f64,
    pub order: Order,
}

/// One resolution of a refinement study.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub cells: usize,
    pub runs: Vec<(Form, Trajectory)>,
}

impl Resolution {
    pub fn get(&self, form: Form) -> Option<&Trajectory> {
        self.runs.iter().find(|(f, _)| *f == form).map(|(_, t)| t)
    }
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub resolutions: Vec<Resolution>,
    pub rows: Vec<OrderRow>,
}

impl Refinement {
    pub fn find(&self, quantity: &str, form: &str) -> Vec<&OrderRow> {
        self.rows.iter().filter(|r| r.quantity == quantity && r.form == form).collect()
    }
}

fn check_ladder(n_list: &[usize]) -> Result<usize> {
    if n_list.len() < 3 {
        return Err(Error::config("refinement needs at least three resolutions"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("resolutions must be strictly increasing"));
    }
    let r = n_list[1] / n_list[0];
    if n_list.windows(2).any(|w| w[1] % w[0] != 0 || w[1] / w[0] != r) {
        return Err(Error::config("resolutions must share a constant integer ratio"));
    }
    Ok(r)
}

/// Runs `s` at every resolution in `n_list` to its end time and measures
/// self-convergence orders. Field orders use differences between
/// consecutive resolutions (cell-average restriction); residual orders
/// use the residual at each resolution.
pub fn refinement_study(s: &Scenario, n_list: &[usize]) -> Result<Refinement> {
    let ratio = check_ladder(n_list)?;
    s.validate()?;
    let forms = s.run.form.forms();
    let jobs: Vec<(usize, Form)> = n_list.iter().flat_map(|&n| forms.iter().map(move |&f| (n, f))).collect();
    let done: Vec<Result<(usize, Form, Trajectory)>> = jobs
        .par_iter()
        .map(|&(n, f)| {
            let mut sc = s.clone();
            sc.grid.cells = n;
            sc.run.form = match f {
                Form::U => SolverForm::U,
                Form::V => SolverForm::V,
            };
            sc.run.snapshots = false;
            let mut res = simulate(&sc)?;
            Ok((n, f, res.runs.remove(0).trajectory))
        })
        .collect();
    let mut resolutions: Vec<Resolution> = n_list.iter().map(|&cells| Resolution { cells, runs: Vec::new() }).collect();
    for d in done {
        let (n, f, t) = d?;
        resolutions.iter_mut().find(|r| r.cells == n).expect("job resolution").runs.push((f, t));
    }

    let ratio_f = ratio as f64;
    let mut rows = Vec::new();
    let complete = |t: &Trajectory| t.termination == Termination::Completed;
    for &form in &forms {
        let fname = format!("{form:?}");
        let vel_name = match form {
            Form::U => "u",
            Form::V => "v",
        };
        // fields: consecutive differences on resolution triples
        for (name, pick) in [("rho", 0usize), (vel_name, 1usize)] {
            let field = |t: &Trajectory| -> Vec<f64> {
                let st = &t.last().state;
                if pick == 0 {
                    st.rho.clone()
                } else {
                    st.vel.clone()
                }
            };
            for w in resolutions.windows(3) {
                let t: Vec<&Trajectory> = w.iter().map(|r| r.get(form).expect("form run")).collect();
                let (e_a, e_b, scale) = if t.iter().all(|t| complete(t)) {
                    let f: Vec<Vec<f64>> = t.iter().map(|t| field(t)).collect();
                    let e_a = inf_diff(&restrict(&f[1], w[0].cells)?, &f[0]);
                    let e_b = inf_diff(&restrict(&f[2], w[1].cells)?, &f[1]);
                    (e_a, e_b, f[2].iter().fold(0.0, |m: f64, x| m.max(x.abs())))
                } else {
                    (f64::NAN, f64::NAN, 1.0)
                };
                rows.push(OrderRow {
                    quantity: name.to_string(),
                    form: fname.clone(),
                    n_a: w[0].cells,
                    n_b: w[1].cells,
                    err_a: e_a,
                    err_b: e_b,
                    order: observed_order(e_a, e_b, ratio_f, scale),
                });
            }
        }
        // residuals: level at each resolution
        for (name, get) in [
            ("reciprocal_residual", (|t: &Trajectory| t.last().diag.resid_recip) as fn(&Trajectory) -> f64),
            ("pressure_identity_residual", |t: &Trajectory| t.last().diag.resid_pident),
        ] {
            for w in resolutions.windows(2) {
                let t: Vec<&Trajectory> = w.iter().map(|r| r.get(form).expect("form run")).collect();
                let (e_a, e_b) =
                    if t.iter().all(|t| complete(t)) { (get(t[0]), get(t[1])) } else { (f64::NAN, f64::NAN) };
                rows.push(OrderRow {
                    quantity: name.to_string(),
                    form: fname.clone(),
                    n_a: w[0].cells,
                    n_b: w[1].cells,
                    err_a: e_a,
                    err_b: e_b,
                    order: observed_order(e_a, e_b, ratio_f, 0.0),
                });
            }
        }
    }
    if forms.len() == 2 {
        let d: Vec<f64> = resolutions
            .iter()
            .map(|r| {
                let (u, v) = (r.get(Form::U).expect("U run"), r.get(Form::V).expect("V run"));
                if complete(u) && complete(v) {
                    inf_diff(&u.last().state.rho, &v.last().state.rho)
                } else {
                    f64::NAN
                }
            })
            .collect();
        for k in 0..resolutions.len() - 1 {
            rows.push(OrderRow {
                quantity: "rho_form_difference".to_string(),
                form: "U-V".to_string(),
                n_a: resolutions[k].cells,
                n_b: resolutions[k + 1].cells,
                err_a: d[k],
                err_b: d[k + 1],
                order: observed_order(d[k], d[k + 1], ratio_f, 1.0),
            });
        }
    }
    Ok(Refinement { resolutions, rows })
}

pub fn write_orders(study: &Refinement, path: &Path) -> Result<()> {
    let header: Vec<String> =
        ["quantity", "form", "n_a", "n_b", "err_a", "err_b", "order", "status"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.quantity.clone(),
                r.form.clone(),
                r.n_a.to_string(),
                r.n_b.to_string(),
                fmt_f64(r.err_a),
                fmt_f64(r.err_b),
                fmt_opt(r.order.value()),
                r.order.label().to_string(),
            ]
        })
        .collect();
    write_table(path, &header, &rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationRow {
    pub n: u32,
    /// `1/n > min mu(rho)` at some step of the regularized run.
    pub floor_active: bool,
    /// Mollifier support `1/n` below the grid spacing.
    pub kernel_below_dx: bool,
    pub min_mu: f64,
    pub status: RowStatus,
    /// `||rho_n - rho_{n_max}||_inf` at the end time.
    pub diff_to_nmax: Option<f64>,
    /// `||rho_n - rho_base||_inf` against the unregularized run.
    pub diff_to_base: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Regularization {
    pub rows: Vec<RegularizationRow>,
    pub base: Trajectory,
}

impl Regularization {
    /// Increases of `diff_to_nmax` along the list.
    pub fn inversions(&self) -> usize {
        let d: Vec<f64> = self.rows.iter().filter_map(|r| r.diff_to_nmax).collect();
        d.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

/// Runs `s` with viscosity floor `1/n` and `K_n`-mollified data for each `n`,
/// and once without either.
pub fn regularization_study(s: &Scenario, n_list: &[u32]) -> Result<Regularization> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::config("regularization indices must be positive and non-empty"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("regularization indices must be strictly increasing"));
    }
    let base_s = single_form(s);
    let dx = base_s.mesh()?.dx();
    let mut jobs: Vec<Option<u32>> = vec![None];
    jobs.extend(n_list.iter().map(|&n| Some(n)));
    let runs: Vec<Result<Trajectory>> = jobs
        .par_iter()
        .map(|n| {
            let mut sc = base_s.clone();
            sc.params.reg_n = *n;
            if n.is_some() {
                sc.initial.mollify_n = *n;
            }
            Ok(simulate(&sc)?.runs.remove(0).trajectory)
        })
        .collect();
    let mut runs = runs.into_iter();
    let base = runs.next().expect("base job")?;
    let regs: Vec<Trajectory> = runs.collect::<Result<_>>()?;
    let end = |t: &Trajectory| (t.termination == Termination::Completed).then(|| t.last().state.rho.clone());
    let base_rho = end(&base);
    let top_rho = end(regs.last().expect("non-empty list"));
    let rows = n_list
        .iter()
        .zip(&regs)
        .map(|(&n, t)| {
            let rho = end(t);
            let diff = |other: &Option<Vec<f64>>| match (&rho, other) {
                (Some(a), Some(b)) => Some(inf_diff(a, b)),
                _ => None,
            };
            RegularizationRow {
                n,
                floor_active: 1.0 / n as f64 > t.min_mu_seen,
                kernel_below_dx: 1.0 / (n as f64) < dx,
                min_mu: t.min_mu_seen,
                status: status_of(t),
                diff_to_nmax: diff(&top_rho),
                diff_to_base: diff(&base_rho),
            }
        })
        .collect();
    Ok(Regularization { rows, base })
}

pub fn write_regularization(study: &Regularization, path: &Path) -> Result<()> {
    let header: Vec<String> =
        ["n", "floor_active", "kernel_below_dx", "min_mu", "status", "diff_to_nmax", "diff_to_base", "message"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.floor_active.to_string(),
                r.kernel_below_dx.to_string(),
                fmt_f64(r.min_mu),
                r.status.label().to_string(),
                fmt_opt(r.diff_to_nmax),
                fmt_opt(r.diff_to_base),
                r.status.message(),
            ]
        })
        .collect();
    write_table(path, &header, &rows)
}
