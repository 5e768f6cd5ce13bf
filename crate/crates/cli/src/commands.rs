use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use fbstab::cmtoy::cm_demo;
use fbstab::eigenc::{alpha_for_mode, solve_mode_eigen_on, EigenModeResult, EigenRow, ModeDiscretization};
use fbstab::liegroup::{basis_label, translate_graph, GraphFunction, SphereGrid, DEFAULT_KMAX_2D};
use fbstab::modalsim::{assemble_mode_operator, mode_run};
use fbstab::output::{to_json, write_json, Cell, CsvTable};
use fbstab::radial::uniform_nodes;
use fbstab::radialsim::{run_radial, RadialOptions};
use fbstab::spectrum::{spectral_report, SpectralReport};
use fbstab::stationary::{pressure_profile, solve_stationary_steps, solve_unit};
use fbstab::{Error, Result, StationaryState, TumorModel};
use rayon::prelude::*;
use serde_json::json;

use crate::settings::Settings;

const MODE_DT: f64 = 0.01;
const MODE_T_END: f64 = 200.0;
const CM_T_END: f64 = 40.0;
const CM_DT: f64 = 1e-3;

/// Files written by one command, reported on stdout.
#[derive(Default)]
pub struct Written(Vec<PathBuf>);

impl Written {
    fn csv(&mut self, s: &Settings, name: &str, table: &CsvTable) -> Result<()> {
        if s.run.format.csv() {
            let path = s.path(name);
            table.write(&path)?;
            self.0.push(path);
        }
        Ok(())
    }

    fn json(&mut self, s: &Settings, name: &str, value: &serde_json::Value) -> Result<()> {
        if s.run.format.json() {
            let path = s.path(name);
            write_json(&path, value)?;
            self.0.push(path);
        }
        Ok(())
    }

    pub fn report(&self) {
        for p in &self.0 {
            println!("wrote {}", p.display());
        }
    }
}

pub fn verdict(rep: &SpectralReport) -> String {
    if rep.gamma > rep.gamma_star {
        "stable (gamma > gamma_star)".into()
    } else if rep.gamma < rep.gamma_star {
        "unstable".into()
    } else {
        "critical (gamma = gamma_star)".into()
    }
}

struct UnitFrame {
    model: TumorModel,
    unit: StationaryState,
    unit_model: TumorModel,
    phys: StationaryState,
}

fn unit_frame(s: &Settings) -> Result<UnitFrame> {
    let model = s.model()?;
    let (unit, unit_model, phys) = solve_unit(&model, s.run.tol, s.run.stationary_steps)?;
    Ok(UnitFrame {
        model,
        unit,
        unit_model,
        phys,
    })
}

/// Unit-frame surface tension: the model value rescaled, or
/// `gamma_factor * gamma_star` when requested.
fn unit_gamma(s: &Settings, f: &UnitFrame) -> Result<f64> {
    match s.run.gamma_factor {
        Some(factor) => {
            let rep = spectral_report(&f.unit_model, &f.unit, s.run.k_max, f.unit_model.gamma, s.run.strict)?;
            Ok(factor * rep.gamma_star)
        }
        None => Ok(f.unit_model.gamma),
    }
}

fn mode_eigen(s: &Settings, f: &UnitFrame, k: usize, gamma: f64, c: f64) -> Result<EigenModeResult> {
    let disc = ModeDiscretization::new(&f.unit_model, &f.unit, k, s.run.grid_n)?;
    let alpha = alpha_for_mode(&f.unit_model, &f.unit, k, gamma)?;
    solve_mode_eigen_on(&disc, alpha, gamma, c, s.run.eig_tol, s.run.max_iter)
}

pub fn stationary(s: &Settings) -> Result<Written> {
    let model = s.model()?;
    let st = solve_stationary_steps(&model, s.run.tol, s.run.stationary_steps)?;
    let p = pressure_profile(&st, &model)?;
    let mut out = Written::default();
    let mut table = CsvTable::new(&["r", "sigma_s", "p_s"]);
    for r in uniform_nodes(st.r_s, s.run.grid_n) {
        table.push(vec![r.into(), st.sigma_s.eval(r).into(), p.eval(r).into()]);
    }
    out.csv(s, "stationary.csv", &table)?;
    let summary = serde_json::to_value(st.summary()).map_err(|e| Error::numerical(e.to_string()))?;
    out.json(s, "stationary.json", &summary)?;
    println!("R_s = {:.12e}", st.r_s);
    println!("sigma_s(0) = {:.12e}", st.sigma_center);
    println!("sigma_s'(R_s) = {:.12e}", st.sigma_prime_boundary);
    Ok(out)
}

pub fn spectrum(s: &Settings) -> Result<Written> {
    let f = unit_frame(s)?;
    let base = spectral_report(&f.unit_model, &f.unit, s.run.k_max, f.unit_model.gamma, s.run.strict)?;
    let gamma = match s.run.gamma_factor {
        Some(factor) => factor * base.gamma_star,
        None => f.unit_model.gamma,
    };
    let rep = base.at_gamma(gamma);
    let c = f.model.c;
    let eig: Option<Vec<EigenModeResult>> = if c > 0.0 {
        Some(
            (0..=s.run.k_max)
                .into_par_iter()
                .map(|k| mode_eigen(s, &f, k, gamma, c))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let mut header = vec!["k", "lambda_k", "a_k", "d_k", "ubar_1", "gamma_k", "alpha_k"];
    if eig.is_some() {
        header.push("lambda");
    }
    let mut table = CsvTable::new(&header);
    for row in &rep.rows {
        let mut cells: Vec<Cell> = vec![
            row.k.into(),
            row.lambda_k.into(),
            row.a_k.into(),
            row.d_k.to_string().into(),
            row.ubar_1.into(),
            row.gamma_k.unwrap_or(f64::NAN).into(),
            row.alpha_k.into(),
        ];
        if let Some(e) = &eig {
            cells.push(e[row.k].lambda.into());
        }
        table.push(cells);
    }
    let mut out = Written::default();
    out.csv(s, "spectrum.csv", &table)?;

    let verdict = verdict(&rep);
    let unstable = rep.unstable_modes();
    let mut summary = json!({
        "n": rep.n,
        "R_s": f.phys.r_s,
        "gamma": rep.gamma,
        "gamma_star": rep.gamma_star,
        "argmax_k": rep.argmax_k,
        "alpha_star": rep.alpha_star,
        "alpha_0": rep.alpha_0,
        "nu1": rep.nu1,
        "c0": rep.c0,
        "k_max": rep.k_max,
        "verdict": verdict,
        "unstable_modes": unstable,
    });
    if let Some(e) = &eig {
        let positive: Vec<usize> = e.iter().filter(|r| r.k != 1 && r.lambda > 0.0).map(|r| r.k).collect();
        let max_lambda = e.iter().filter(|r| r.k != 1).map(|r| r.lambda).fold(f64::NEG_INFINITY, f64::max);
        summary["c"] = json!(c);
        summary["max_lambda"] = json!(max_lambda);
        summary["positive_lambda_modes"] = json!(positive);
    }
    out.json(s, "spectrum.json", &summary)?;

    println!("gamma_star = {:.12e} (argmax k = {})", rep.gamma_star, rep.argmax_k);
    println!("gamma = {:.12e}", rep.gamma);
    match rep.c0 {
        Some(c0) => println!("c0 = {c0:.6e}"),
        None => println!("c0 = none"),
    }
    if unstable.is_empty() {
        println!("verdict: {verdict}");
    } else {
        println!("verdict: {verdict}, alpha_k > 0 for k = {}", join(&unstable));
    }
    Ok(out)
}

fn join(v: &[usize]) -> String {
    v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}

pub fn eigen(s: &Settings) -> Result<Written> {
    let f = unit_frame(s)?;
    let gamma = unit_gamma(s, &f)?;
    let jobs: Vec<(usize, f64)> =
        s.run.c_list.iter().flat_map(|&c| s.run.modes.iter().map(move |&k| (k, c))).collect();
    let rows: Vec<EigenRow> = jobs
        .par_iter()
        .map(|&(k, c)| mode_eigen(s, &f, k, gamma, c).map(|r| r.row()))
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new(&["k", "c", "gamma", "alpha_k", "mu", "lambda", "iterations", "residual"]);
    for r in &rows {
        table.push(vec![
            r.k.into(),
            r.c.into(),
            r.gamma.into(),
            r.alpha_k.into(),
            r.mu.into(),
            r.lambda.into(),
            r.iterations.into(),
            r.residual.into(),
        ]);
        println!("k = {:2}  c = {:.3e}  lambda = {:.12e}", r.k, r.c, r.lambda);
    }
    let mut out = Written::default();
    out.csv(s, "eigen.csv", &table)?;
    out.json(s, "eigen.json", &serde_json::to_value(&rows).map_err(|e| Error::numerical(e.to_string()))?)?;
    Ok(out)
}

pub fn simulate_radial(s: &Settings) -> Result<Written> {
    let mut model = s.model()?;
    if s.run.quasi_static {
        model.c = 0.0;
    }
    let phys = solve_stationary_steps(&model, s.run.tol, s.run.stationary_steps)?;
    let d = RadialOptions::default();
    let opts = RadialOptions {
        intervals: s.run.grid_n,
        dt: s.run.dt.unwrap_or(d.dt),
        t_end: s.run.t_end.unwrap_or(d.t_end),
        stride: s.run.stride,
        reaction: d.reaction,
    };
    let traj = run_radial(&model, &phys, model.gamma, s.run.r0 * phys.r_s, None, &opts)?;
    let sum = traj.summary(phys.r_s, s.run.rate_window, s.run.conv_tol * phys.r_s);
    let mut table = CsvTable::new(&["t", "R", "sigma_err"]);
    for i in 0..traj.t.len() {
        table.push(vec![traj.t[i].into(), traj.r[i].into(), traj.sigma_err[i].into()]);
    }
    let mut out = Written::default();
    out.csv(s, "radial.csv", &table)?;
    out.json(
        s,
        "radial.json",
        &json!({
            "final_R": sum.final_r,
            "rate": sum.rate,
            "converged": sum.converged,
            "R_s": phys.r_s,
        }),
    )?;
    println!("R_s = {:.12e}", phys.r_s);
    println!("final R = {:.12e}", sum.final_r);
    println!("rate = {:.6e}", sum.rate);
    println!("converged = {}", sum.converged);
    Ok(out)
}

pub fn simulate_mode(s: &Settings) -> Result<Written> {
    let f = unit_frame(s)?;
    let gamma = unit_gamma(s, &f)?;
    let c = if f.model.c > 0.0 { f.model.c } else { s.run.c_list[0] };
    let k = s.run.k;
    let op = assemble_mode_operator(&f.unit_model, &f.unit, k, gamma, c, s.run.grid_n)?;
    let (traj, sum) = mode_run(
        &op,
        s.run.dt.unwrap_or(MODE_DT),
        s.run.t_end.unwrap_or(MODE_T_END),
        s.run.scheme,
        s.run.stride,
        s.run.rate_window,
    )?;
    let fixed = solve_mode_eigen_on(&op.disc, op.alpha, gamma, c, s.run.eig_tol, s.run.max_iter)?;
    let rel_gap = (sum.dominant_re - fixed.lambda).abs() / fixed.lambda.abs();
    let rate_err = (sum.measured_rate + fixed.lambda).abs() / fixed.lambda.abs();

    let mut table = CsvTable::new(&["t", "norm"]);
    for (t, n) in traj.t.iter().zip(&traj.norm) {
        table.push(vec![(*t).into(), (*n).into()]);
    }
    let mut out = Written::default();
    out.csv(s, &format!("mode_k{k}.csv"), &table)?;
    let mut summary = serde_json::to_value(&sum).map_err(|e| Error::numerical(e.to_string()))?;
    summary["lambda"] = json!(fixed.lambda);
    summary["eigen_rel_gap"] = json!(rel_gap);
    summary["rate_rel_error"] = json!(rate_err);
    out.json(s, &format!("mode_k{k}.json"), &summary)?;
    println!("k = {k}  gamma = {gamma:.6e}  c = {c:.3e}");
    println!("lambda (fixed point) = {:.12e}", fixed.lambda);
    println!("dominant eigenvalue  = {:.12e} {:+.3e}i", sum.dominant_re, sum.dominant_im);
    println!("measured decay rate  = {:.12e}", sum.measured_rate);
    Ok(out)
}

fn read_coefficients(path: &Path, grid: &std::sync::Arc<SphereGrid>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or_default();
    if header.split(',').map(str::trim).ne(["k", "l", "b_kl"]) {
        return Err(Error::invalid(format!("{}: expected header `k,l,b_kl`", path.display())));
    }
    let index: HashMap<(usize, usize), usize> =
        (0..grid.basis_len()).map(|i| (basis_label(grid.n, i), i)).collect();
    let mut coeffs = vec![0.0; grid.basis_len()];
    for (no, line) in lines.enumerate() {
        let bad = || Error::invalid(format!("{}: malformed row {}", path.display(), no + 2));
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let k: usize = parts[0].parse().map_err(|_| bad())?;
        let l: usize = parts[1].parse().map_err(|_| bad())?;
        let b: f64 = parts[2].parse().map_err(|_| bad())?;
        let &i = index
            .get(&(k, l))
            .ok_or_else(|| Error::invalid(format!("{}: no basis function ({k}, {l})", path.display())))?;
        coeffs[i] = b;
    }
    Ok(coeffs)
}

pub fn translate(s: &Settings) -> Result<Written> {
    let n = s.map.get_usize("n")?.unwrap_or(3);
    let k_max = match s.map.get_usize("sh_k_max")? {
        Some(k) => k,
        None if n == 2 => DEFAULT_KMAX_2D,
        None => s.run.sh_k_max,
    };
    let grid = SphereGrid::new(n, k_max)?;
    let rho = match &s.run.input {
        Some(path) => GraphFunction::from_coeffs(&grid, read_coefficients(path, &grid)?)?,
        None => GraphFunction::zero(&grid),
    };
    let mut z = s.run.shift.clone();
    if !s.map.contains("shift") {
        z.resize(n, 0.0);
    }
    let moved = translate_graph(&rho, &z, s.run.epsilon, s.run.delta)?;

    let mut coeffs = CsvTable::new(&["k", "l", "b_kl"]);
    for (k, l, b) in moved.coefficient_rows() {
        coeffs.push(vec![k.into(), l.into(), b.into()]);
    }
    let mut samples = if n == 2 { CsvTable::new(&["theta", "rho"]) } else { CsvTable::new(&["theta", "phi", "rho"]) };
    for (theta, phi, r) in moved.sample_rows() {
        if n == 2 {
            samples.push(vec![theta.into(), r.into()]);
        } else {
            samples.push(vec![theta.into(), phi.into(), r.into()]);
        }
    }
    let mut out = Written::default();
    out.csv(s, "graph.csv", &coeffs)?;
    out.csv(s, "graph_samples.csv", &samples)?;
    out.json(
        s,
        "graph.json",
        &json!({
            "n": n,
            "k_max": k_max,
            "shift": z,
            "sup_norm_in": rho.sup_norm(),
            "sup_norm_out": moved.sup_norm(),
        }),
    )?;
    println!("n = {n}  k_max = {k_max}  |rho|_inf: {:.6e} -> {:.6e}", rho.sup_norm(), moved.sup_norm());
    Ok(out)
}

pub fn cm(s: &Settings) -> Result<Written> {
    let rep = cm_demo(
        s.run.r0,
        s.run.theta0,
        s.run.slice_r0,
        s.run.t_end.unwrap_or(CM_T_END),
        s.run.dt.unwrap_or(CM_DT),
    )?;
    let value = serde_json::to_value(&rep).map_err(|e| Error::numerical(e.to_string()))?;
    let mut out = Written::default();
    out.json(s, "cm.json", &value)?;
    print!("{}", to_json(&rep)?);
    Ok(out)
}
