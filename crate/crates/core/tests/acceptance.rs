//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::time::Instant;

use ns1d::constitutive::{dphi, phi, pressure, relative_pressure, validate_params, viscosity, Params};
use ns1d::diagnostics::dissipation_bd_rate;
use ns1d::harness::{
    refinement_study, regularization_study, simulate, sweep, write_sweep, GronwallVerdict, Refinement, Scenario,
};
use ns1d::mesh::{background_profile, build_mesh, diffuse, div_flux, grad_c, integrate, mollify, norm, NormKind};
use ns1d::solver::Form;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn scenario(text: &str) -> Scenario {
    Scenario::from_toml_str(text).expect("acceptance scenario parses")
}

fn bump(cells: usize, t_end: f64, form: &str, amplitude: f64, output_dt: f64) -> Scenario {
    scenario(&format!(
        r#"
name = "bump"
[params]
alpha = 1.0
gamma = 2.0
eps = 0.125
[grid]
L = 10.0
N = {cells}
[initial]
family = "gaussian-bump"
amplitude = {amplitude}
[run]
T = {t_end}
output_dt = {output_dt}
form = "{form}"
"#
    ))
}

fn hoff(cells: usize) -> Scenario {
    scenario(&format!(
        r#"
name = "hoff"
[params]
alpha = 1.0
gamma = 2.0
eps = 0.125
[grid]
N = {cells}
[initial]
family = "hoff-step"
rho_minus = 1.0
rho_plus = 2.0
amplitude = 0.5
[run]
T = 1.0
output_dt = 0.1
"#
    ))
}

fn c1_fixed_point() -> Outcome {
    let res = simulate(&bump(256, 0.5, "both", 0.0, 0.1)).unwrap();
    let mut worst = 0.0f64;
    for r in &res.runs {
        let init = &r.trajectory.frames[0].state;
        for f in &r.trajectory.frames {
            let u = f.state.to_form(Form::U, &res.mesh, &res.scenario.params).unwrap();
            let v = f.state.to_form(Form::V, &res.mesh, &res.scenario.params).unwrap();
            for i in 0..init.len() {
                worst = worst.max((f.state.rho[i] - init.rho[i]).abs()).max(u.vel[i].abs()).max(v.vel[i].abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:e}"))
}

fn c2_mass() -> Outcome {
    let res = simulate(&bump(512, 1.0, "U", 0.5, 0.1)).unwrap();
    let frames = &res.runs[0].trajectory.frames;
    let m0 = frames[0].diag.mass;
    let worst = frames.iter().map(|f| ((f.diag.mass - m0) / m0).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 1e-10 && res.runs[0].trajectory.frames.last().unwrap().state.t == 1.0,
        format!("rel. mass drift {worst:e}"),
    )
}

fn orders(study: &Refinement, quantity: &str, form: &str) -> Vec<Option<f64>> {
    study.find(quantity, form).iter().map(|r| r.order.value()).collect()
}

fn show(o: &[Option<f64>]) -> String {
    o.iter().map(|x| x.map_or("undefined".to_string(), |v| format!("{v:.3}"))).collect::<Vec<_>>().join(", ")
}

fn c3_equivalence(study: &Refinement) -> Outcome {
    let o = orders(study, "rho_form_difference", "U-V");
    let d: Vec<String> = study.find("rho_form_difference", "U-V").iter().map(|r| format!("{:.2e}", r.err_a)).collect();
    outcome(
        !o.is_empty() && o.iter().all(|x| x.is_some_and(|v| v >= 1.0)),
        format!("orders [{}], diffs [{}]", show(&o), d.join(", ")),
    )
}

/// `(N, delta_N, worst excess of F + D over F(0) (1 + delta_N))` per resolution.
fn balance(study: &Refinement, form: Form, bd: bool) -> Vec<(usize, f64, f64)> {
    study
        .resolutions
        .iter()
        .map(|r| {
            let t = r.get(form).unwrap();
            let pick = |d: &ns1d::diagnostics::DiagnosticsRecord| {
                if bd {
                    (d.bd_entropy, d.diss_bd)
                } else {
                    (d.energy, d.diss_u)
                }
            };
            let f0 = pick(&t.frames[0].diag).0;
            let delta = t
                .frames
                .iter()
                .map(|f| {
                    let (e, d) = pick(&f.diag);
                    (e + d - f0).abs() / f0
                })
                .fold(0.0, f64::max);
            let excess = t
                .frames
                .iter()
                .map(|f| {
                    let (e, d) = pick(&f.diag);
                    e + d - f0 * (1.0 + delta)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (r.cells, delta, excess)
        })
        .collect()
}

fn balance_verdict(rows: &[(usize, f64, f64)]) -> (bool, String) {
    let holds = rows.iter().all(|r| r.2 <= 0.0);
    let n = rows.len();
    let (d_mid, d_fine) = (rows[n - 2].1, rows[n - 1].1);
    let ratio = d_mid / d_fine;
    let text = rows.iter().map(|r| format!("delta_{}={:.2e}", r.0, r.1)).collect::<Vec<_>>().join(" ");
    (holds && d_fine <= d_mid / 1.8, format!("{text} ratio {ratio:.2}"))
}

fn c4_energy(study: &Refinement) -> Outcome {
    let (pass, text) = balance_verdict(&balance(study, Form::U, false));
    outcome(pass, format!("U-form: {text}"))
}

fn c5_bd(study: &Refinement) -> Outcome {
    let (pass, text) = balance_verdict(&balance(study, Form::V, true));
    let mut min_integrand = f64::INFINITY;
    for r in &study.resolutions {
        let t = r.get(Form::V).unwrap();
        let mesh = build_mesh(10.0, r.cells).unwrap();
        for f in &t.frames {
            min_integrand = min_integrand
                .min(dissipation_bd_rate(&f.state, &mesh, &Params::shallow_water()).unwrap().min_integrand);
        }
    }
    outcome(pass && min_integrand >= -1e-10, format!("V-form: {text}, min integrand {min_integrand:e}"))
}

fn c6_pressure_identity(study: &Refinement) -> Outcome {
    let mut all = orders(study, "pressure_identity_residual", "U");
    all.extend(orders(study, "pressure_identity_residual", "V"));
    let pass = all.iter().all(|o| o.is_some_and(|v| (1.7..=2.3).contains(&v)));
    outcome(pass, format!("orders U,V [{}]", show(&all)))
}

fn c7_reciprocal(study: &Refinement) -> Outcome {
    let o = orders(study, "reciprocal_residual", "V");
    outcome(o.iter().all(|x| x.is_some_and(|v| v >= 1.0)), format!("V-form orders [{}]", show(&o)))
}

fn c8_gronwall() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut hoff_both = hoff(512);
    hoff_both.run.form = ns1d::harness::SolverForm::Both;
    for s in [bump(512, 1.0, "both", 0.5, 0.1), hoff_both] {
        let res = simulate(&s).unwrap();
        for sm in res.summaries() {
            pass &= sm.gronwall == GronwallVerdict::Pass && sm.completed;
            // tightest ratio of measured moment to bound after t = 0, where the two coincide
            let t = res.get(sm.form).unwrap();
            let worst = t
                .frames
                .iter()
                .skip(1)
                .flat_map(|f| f.diag.v_moments.iter().zip(&f.diag.v_bounds).filter_map(|((_, m), b)| b.map(|b| m / b)))
                .fold(0.0, f64::max);
            lines.push(format!("{} {:?} {} (max moment/bound {worst:.3})", s.name, sm.form, sm.gronwall.as_str()));
        }
    }
    outcome(pass, lines.join("; "))
}

fn c9_no_vacuum() -> Outcome {
    let mins: Vec<(bool, f64)> = [512, 1024]
        .iter()
        .map(|&n| {
            let res = simulate(&hoff(n)).unwrap();
            let t = &res.runs[0].trajectory;
            (t.termination == ns1d::solver::Termination::Completed, t.min_rho_seen)
        })
        .collect();
    let change = (mins[0].1 - mins[1].1).abs() / mins[1].1;
    let pass = mins.iter().all(|(done, m)| *done && *m > 0.0) && change <= 0.05;
    outcome(pass, format!("min rho N=512 {:.6}, N=1024 {:.6}, change {:.3}%", mins[0].1, mins[1].1, 100.0 * change))
}

fn c10_regularization() -> Outcome {
    let mut s = bump(256, 0.5, "U", -0.5, 0.1);
    s.run.snapshots = false;
    let study = regularization_study(&s, &[1, 2, 4, 8, 16, 32, 64, 128]).unwrap();
    let inactive: Vec<_> = study.rows.iter().filter(|r| !r.floor_active && r.kernel_below_dx).collect();
    let identical = !inactive.is_empty() && inactive.iter().all(|r| r.diff_to_base.is_some_and(|d| d <= 1e-13));
    let inv = study.inversions();
    let trend: Vec<String> =
        study.rows.iter().map(|r| format!("{}:{:.1e}", r.n, r.diff_to_nmax.unwrap_or(f64::NAN))).collect();
    outcome(
        identical && inv <= 1 && study.rows[0].floor_active,
        format!(
            "{} inactive rows identical={identical}, inversions {inv}, diffs [{}]",
            inactive.len(),
            trend.join(" ")
        ),
    )
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn c11_unit_suite() -> Outcome {
    let mut failed: Vec<&str> = Vec::new();
    let mut check = |name: &'static str, ok: bool| {
        if !ok {
            failed.push(name);
        }
    };
    let p = |alpha: f64, gamma: f64| Params::new(alpha, gamma);

    check("viscosity 1", close(viscosity(1.0, &p(0.75, 2.0)).unwrap(), 1.0, 1e-15));
    check("viscosity 4", close(viscosity(4.0, &p(1.0, 2.0)).unwrap(), 4.0, 1e-15));
    check("viscosity floor", close(viscosity(0.001, &p(1.0, 2.0).with_reg(Some(100))).unwrap(), 0.01, 1e-15));
    check("viscosity negative", viscosity(-1.0, &p(1.0, 2.0)).is_err());
    check("pressure 2", close(pressure(2.0, &p(1.0, 2.0)).unwrap(), 4.0, 1e-15));
    check("pressure 1", close(pressure(1.0, &p(1.0, 3.7)).unwrap(), 1.0, 1e-15));
    check("pressure 3", close(pressure(3.0, &p(1.0, 1.6)).unwrap(), 5.7995, 1e-4));
    check("phi e", close(phi(E, &p(1.0, 2.0)).unwrap(), 1.0, 1e-15));
    check("phi 1", phi(1.0, &p(1.0, 2.0)).unwrap().abs() <= 1e-15);
    check("phi 16", close(phi(16.0, &p(0.75, 2.0)).unwrap(), -2.0, 1e-14));
    check("phi vacuum", phi(0.0, &p(1.0, 2.0)).is_err());
    check("dphi 2", close(dphi(2.0, &p(1.0, 2.0)).unwrap(), 0.5, 1e-15));
    check("dphi 7", close(dphi(7.0, &p(2.0, 2.0)).unwrap(), 1.0, 1e-15));
    check("dphi 16", close(dphi(16.0, &p(0.75, 2.0)).unwrap(), 1.0 / 32.0, 1e-14));
    // centered difference of phi converges to phi' at second order
    let q = p(0.75, 2.0);
    let fd = |h: f64| ((phi(16.0 + h, &q).unwrap() - phi(16.0 - h, &q).unwrap()) / (2.0 * h) - 1.0 / 32.0).abs();
    let fd_order = (fd(0.4) / fd(0.2)).log2();
    check("phi' finite difference O(h^2)", (1.8..=2.2).contains(&fd_order));
    check("relative pressure identity", relative_pressure(1.0, 1.0, &p(1.0, 2.0)).unwrap().abs() <= 1e-15);
    check("relative pressure 2", close(relative_pressure(2.0, 1.0, &p(1.0, 2.0)).unwrap(), 1.0, 1e-15));
    check("relative pressure 0", close(relative_pressure(0.0, 1.0, &p(1.0, 2.0)).unwrap(), 1.0, 1e-15));
    let mut sw = p(1.0, 2.0);
    sw.eps = 0.125;
    check("validate inside", validate_params(&sw).unwrap().inside_theorem);
    sw.alpha = 0.5;
    check("validate alpha boundary", !validate_params(&sw).unwrap().inside_theorem);
    let mut r = p(0.6, 1.05);
    r.eps = 0.1;
    check("validate gamma threshold", !validate_params(&r).unwrap().gamma_threshold);
    r.gamma = -1.0;
    check("validate hard error", validate_params(&r).is_err());

    // N = 4 lies below the 8-cell minimum; the same spacing uses L = 4, N = 8.
    let m = build_mesh(4.0, 8).unwrap();
    check("mesh spacing", m.dx() == 1.0 && m.x()[3] == -0.5 && m.x()[4] == 0.5);
    check("mesh 1000", close(build_mesh(10.0, 1000).unwrap().dx(), 0.02, 1e-15));
    check("mesh minimum", build_mesh(2.0, 7).is_err());
    let m = build_mesh(2.0, 400).unwrap();
    let flat = background_profile(&m, 1.0, 1.0).unwrap();
    check("profile constant", flat.values.iter().all(|&v| v == 1.0));
    let step = background_profile(&m, 1.0, 2.0).unwrap();
    check("profile ends", step.at(-1.5) == 1.0 && step.at(1.5) == 2.0 && close(step.at(0.0), 1.5, 1e-15));
    check("profile non-positive", background_profile(&m, 0.0, 1.0).is_err());
    let c = vec![3.0; m.len()];
    check("mollify constant", mollify(&c, &m, 4).unwrap().iter().all(|v| close(*v, 3.0, 1e-14)));
    let xs = m.x().to_vec();
    let ramp: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    check("mollify narrow kernel", mollify(&ramp, &m, 10_000).unwrap() == ramp);
    let m10 = build_mesh(10.0, 1000).unwrap();
    let st: Vec<f64> = m10.x().iter().map(|&x| if x < 0.0 { 0.0 } else { 1.0 }).collect();
    let sm = mollify(&st, &m10, 2).unwrap();
    let width = m10.x().iter().zip(&sm).filter(|(_, v)| **v > 1e-12 && **v < 1.0 - 1e-12).count() as f64 * m10.dx();
    check(
        "mollify step",
        (integrate(&sm, &m10) - integrate(&st, &m10)).abs() <= 1e-12 && width <= 1.0 + 2.0 * m10.dx(),
    );
    check("mollify too wide", mollify(&c, &m, 0).is_err());

    let m = build_mesh(2.0, 400).unwrap();
    let xs = m.x().to_vec();
    check("grad constant", grad_c(&vec![5.0; m.len()], &m).iter().all(|g| *g == 0.0));
    check("grad affine", grad_c(&xs, &m).iter().all(|g| close(*g, 1.0, 1e-12)));
    let m2 = build_mesh(2.0, 400).unwrap();
    let sq: Vec<f64> = m2.x().iter().map(|x| x * x).collect();
    let g = grad_c(&sq, &m2);
    check("grad quadratic", (1..m2.len() - 1).all(|i| (g[i] - 2.0 * m2.x()[i]).abs() <= 1e-10));
    check("div constant", div_flux(&vec![2.0; m.len()], &m).iter().all(|d| d.abs() <= 1e-12));
    let errs: Vec<f64> = [200, 400]
        .iter()
        .map(|&n| {
            let m = build_mesh(2.0, n).unwrap();
            let s: Vec<f64> = m.x().iter().map(|x| x.sin()).collect();
            let d = div_flux(&s, &m);
            (1..n - 1).map(|i| (d[i] - m.x()[i].cos()).abs()).fold(0.0, f64::max)
        })
        .collect();
    check("div sin O(dx^2)", (errs[0] / errs[1]).log2() > 1.8);
    let d = diffuse(&vec![1.0; m2.len()], &sq, &m2).unwrap();
    check("diffuse quadratic", (1..m2.len() - 1).all(|i| close(d[i], 2.0, 1e-9)));
    check("diffuse constant", diffuse(&vec![1.0; m.len()], &vec![4.0; m.len()], &m).unwrap().iter().all(|v| *v == 0.0));
    let a: Vec<f64> = xs.iter().map(|x| x + 3.0).collect();
    let d = diffuse(&a, &xs, &m).unwrap();
    check("diffuse variable", (1..m.len() - 1).all(|i| close(d[i], 1.0, 1e-9)));
    check("diffuse negative", diffuse(&vec![-1.0; m.len()], &xs, &m).is_err());
    check("integrate one", close(integrate(&vec![1.0; m.len()], &m), 4.0, 1e-14));
    check("integrate odd", integrate(&xs, &m).abs() <= 1e-13);
    let mq = build_mesh(10.0, 4000).unwrap();
    let gauss: Vec<f64> = mq.x().iter().map(|x| (-x * x).exp()).collect();
    check("quadrature exp(-x^2)", (integrate(&gauss, &mq) - PI.sqrt()).abs() <= 1e-8);
    check("norm L2", close(norm(&vec![1.0; m.len()], &m, NormKind::Lp(2.0)).unwrap(), 2.0, 1e-14));
    check(
        "norm zero",
        [NormKind::Lp(1.0), NormKind::Linf, NormKind::H1]
            .iter()
            .all(|&k| norm(&vec![0.0; m.len()], &m, k).unwrap() == 0.0),
    );
    let mut one = vec![0.0; m.len()];
    one[7] = 7.0;
    check("norm Linf", norm(&one, &m, NormKind::Linf).unwrap() == 7.0);
    check("norm p < 1", norm(&one, &m, NormKind::Lp(0.5)).is_err());

    outcome(
        failed.is_empty(),
        if failed.is_empty() { "all examples hold".to_string() } else { format!("failed: {}", failed.join(", ")) },
    )
}

fn c12_sweep() -> Outcome {
    let mut base = bump(256, 0.5, "U", 0.5, 0.1);
    base.run.snapshots = false;
    let alphas = [0.6, 0.7, 0.8, 0.9, 1.0];
    let gammas = [1.2, 1.4, 1.6, 1.8, 2.0];
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    let mut populated = true;
    for k in 0..2 {
        let rows = sweep(&base, &alphas, &gammas).unwrap();
        populated &= rows.len() == 25
            && rows.iter().all(|r| {
                !matches!(r.status, ns1d::harness::studies::RowStatus::Error(_))
                    && r.inside_theorem.is_some()
                    && r.min_rho.is_some()
                    && r.sup_v_inf.is_some()
                    && r.gronwall.is_some()
            });
        let path = dir.path().join(format!("sweep_{k}.csv"));
        write_sweep(&rows, &path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    let identical = bytes[0] == bytes[1];
    outcome(populated && identical, format!("25 rows populated={populated}, bit-identical={identical}"))
}

fn main() -> ExitCode {
    let started = Instant::now();
    // criteria 3 to 7 share one refinement study
    let study = {
        let mut s = bump(256, 0.2, "both", 0.5, 0.1);
        s.run.snapshots = false;
        refinement_study(&s, &[256, 512, 1024]).expect("refinement study runs")
    };
    type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + Sync + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 stationary fixed point", Box::new(c1_fixed_point)),
        ("2 mass conservation", Box::new(c2_mass)),
        ("3 formulation equivalence", Box::new(|| c3_equivalence(&study))),
        ("4 energy inequality", Box::new(|| c4_energy(&study))),
        ("5 BD inequality", Box::new(|| c5_bd(&study))),
        ("6 pressure identity", Box::new(|| c6_pressure_identity(&study))),
        ("7 reciprocal-density equation", Box::new(|| c7_reciprocal(&study))),
        ("8 moment/Gronwall chain", Box::new(c8_gronwall)),
        ("9 no vacuum", Box::new(c9_no_vacuum)),
        ("10 regularization consistency", Box::new(c10_regularization)),
        ("11 constitutive and mesh examples", Box::new(c11_unit_suite)),
        ("12 sweep sanity", Box::new(c12_sweep)),
    ];
    use rayon::prelude::*;
    let results: Vec<(Outcome, f64)> = criteria
        .par_iter()
        .map(|(_, f)| {
            let t = Instant::now();
            let o = f();
            (o, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut failures = 0;
    for ((name, _), (o, secs)) in criteria.iter().zip(&results) {
        if !o.pass {
            failures += 1;
        }
        println!("{} criterion {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failures,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
