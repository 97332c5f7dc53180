use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use spectral3::forward::ForwardOptions;
use spectral3::grid::{l2_norm, w2m1_distance};
use spectral3::inverse::stability::{ratio_spread, stability_experiment, Perturbation};
use spectral3::inverse::verify::{verify_spectral, verify_weyl, weyl_test_points, VerifyMode, VerifyReport, VerifyTolerances};
use spectral3::inverse::{inverse as run_inverse, InverseOptions, ReconstructionResult};
use spectral3::io::{read_spectral, spectral_diagnostics, write_json_file, write_spectral};
use spectral3::model::{model_coefficients, ModelCache, ModelOptions};
use spectral3::selfadjoint::check_symmetry;
use spectral3::{CoefficientPair, Error, ForwardProblem, Grid, Result, SpectralData};

use crate::{ForwardArgs, InverseArgs, ModelArgs, RoundtripArgs, SolverArgs, StabilityArgs, VerifyArgs};

pub const MIN_GRID: usize = 64;

fn forward_options(a: &SolverArgs) -> ForwardOptions {
    ForwardOptions {
        newton_tol: a.newton_tol,
        pair_tol: a.pair_tol,
        pole_tol: a.pole_tol,
        ..ForwardOptions::default()
    }
}

fn check_grid(m: usize) -> Result<Grid> {
    if m < MIN_GRID || m % 2 != 0 {
        return Err(Error::InvalidGrid(format!("grid must be even and at least {MIN_GRID}, got {m}")));
    }
    Grid::new(m)
}

fn load_coeffs(path: &Path, grid: Option<usize>) -> Result<CoefficientPair> {
    let c = CoefficientPair::read_csv(path).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    match grid {
        Some(m) => Ok(c.resample(check_grid(m)?)),
        None => {
            check_grid(c.grid().m())?;
            Ok(c)
        }
    }
}

fn inverse_options(a: &ModelArgs, data: &SpectralData) -> Result<InverseOptions> {
    if a.big_n == 0 || a.big_n > data.n_max {
        return Err(Error::IndexOutOfRange(format!(
            "--big-n {} must lie in 1..={} (entries in the data)",
            a.big_n, data.n_max
        )));
    }
    let mut o = InverseOptions::new(a.big_n);
    o.force = a.force;
    o.solve.cond_limit = a.cond_limit;
    o.model = ModelOptions {
        jitter: a.model_jitter,
        forward: forward_options(&a.solver),
        ..ModelOptions::default()
    };
    Ok(o)
}

fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn forward(a: &ForwardArgs) -> Result<()> {
    let coeffs = load_coeffs(&a.coeffs, a.grid)?;
    let fp = ForwardProblem::with_options(&coeffs, forward_options(&a.solver))?;
    let data = fp.spectral_data(a.n_max)?;
    let diag = spectral_diagnostics(&data);
    write_spectral(&a.out, &data, Some(diag))?;
    let sym = check_symmetry(&data, 1e-8);
    println!(
        "forward: {} eigenvalue pairs on M = {}, K = {:?}, theta = {:.6}",
        data.n_max,
        coeffs.grid().m(),
        data.k_set(),
        data.theta
    );
    println!(
        "symmetry: {} (lambda {:.2e}, beta {:.2e})",
        if sym.passed { "pass" } else { "fail" },
        sym.max_lambda,
        sym.max_beta
    );
    Ok(())
}

fn run_verify(
    mode: VerifyMode,
    data: &SpectralData,
    coeffs: &CoefficientPair,
    big_n: usize,
    model: &SpectralData,
    solved: Option<(&ModelCache, &ReconstructionResult)>,
    forward: ForwardOptions,
) -> Result<VerifyReport> {
    let tol = VerifyTolerances::default();
    match mode {
        VerifyMode::Spectral => Ok(verify_spectral(coeffs, data, Some(model), big_n, forward, tol)),
        VerifyMode::Weyl => {
            let (cache, rec) = solved.expect("weyl mode needs the solved tables");
            verify_weyl(data, cache, rec, &weyl_test_points(), tol)
        }
    }
}

pub fn inverse(a: &InverseArgs) -> Result<()> {
    let data = read_spectral(&a.data)?;
    let grid = check_grid(a.model.grid)?;
    let opts = inverse_options(&a.model, &data)?;
    let (mut rec, cache) = run_inverse(&data, grid, &opts)?;
    rec.coeffs.write_csv(&a.out)?;
    if let Some(mode) = &a.verify {
        let mode: VerifyMode = mode.parse()?;
        let report = run_verify(
            mode,
            &data,
            &rec.coeffs,
            opts.big_n,
            &cache.model_data,
            Some((&cache, &rec)),
            opts.model.forward,
        )?;
        rec.diagnostics.verify = Some(serde_json::to_value(&report)?);
    }
    if let Some(p) = &a.diag {
        write_json_file(p, &rec.diagnostics)?;
    }
    let d = &rec.diagnostics;
    println!(
        "inverse: N = {}, M = {}, cond_max = {:.3e}, residual_max = {:.3e}, d = {:.3e}",
        d.big_n,
        grid.m(),
        d.cond_max,
        d.residual_max,
        d.d
    );
    if let Some(v) = &d.verify {
        println!("verify: {}", if v["passed"] == Value::Bool(true) { "pass" } else { "fail" });
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RoundtripRow {
    big_n: usize,
    grid: usize,
    tau1_l2_err: f64,
    sigma0_w2m1_err: f64,
    max_rel_lambda_err: f64,
    max_rel_beta_err: f64,
    cond_max: f64,
    residual_max: f64,
    d: f64,
    passed: bool,
}

pub fn roundtrip(a: &RoundtripArgs) -> Result<()> {
    if a.big_n.is_empty() {
        return Err(Error::Parse("--big-n needs at least one value".into()));
    }
    let truth = load_coeffs(&a.coeffs, Some(a.grid))?;
    let grid = truth.grid();
    let fwd = forward_options(&a.solver);
    let n_max = *a.big_n.iter().max().expect("non-empty");
    let data = ForwardProblem::with_options(&truth, fwd)?.spectral_data(n_max)?;
    let mut rows = Vec::new();
    for &big_n in &a.big_n {
        let margs = ModelArgs {
            big_n,
            grid: a.grid,
            model_jitter: a.model_jitter,
            force: false,
            cond_limit: a.cond_limit,
            solver: a.solver.clone(),
        };
        let opts = inverse_options(&margs, &data)?;
        let (rec, cache) = run_inverse(&data, grid, &opts)?;
        let report = verify_spectral(&rec.coeffs, &data, Some(&cache.model_data), big_n, fwd, VerifyTolerances::default());
        let row = RoundtripRow {
            big_n,
            grid: grid.m(),
            tau1_l2_err: l2_norm(&rec.coeffs.tau1.sub(&truth.tau1)?)?,
            sigma0_w2m1_err: w2m1_distance(&rec.coeffs.sigma0, &truth.sigma0)?,
            max_rel_lambda_err: report.max_rel_lambda_err,
            max_rel_beta_err: report.max_rel_beta_err,
            cond_max: rec.diagnostics.cond_max,
            residual_max: rec.diagnostics.residual_max,
            d: rec.diagnostics.d,
            passed: report.passed,
        };
        println!(
            "N = {:3}: tau1 L2 {:.3e}, sigma0 W-1 {:.3e}, lambda {:.2e}, beta {:.2e}, {}",
            row.big_n,
            row.tau1_l2_err,
            row.sigma0_w2m1_err,
            row.max_rel_lambda_err,
            row.max_rel_beta_err,
            if row.passed { "pass" } else { "fail" }
        );
        rows.push(row);
    }
    write_table(&a.out, &rows)
}

pub fn stability(a: &StabilityArgs) -> Result<()> {
    let data = read_spectral(&a.data)?;
    let grid = check_grid(a.model.grid)?;
    let opts = inverse_options(&a.model, &data)?;
    let pert: Perturbation = a.perturb.parse()?;
    let (_, rows) = stability_experiment(&data, grid, &opts, pert, &a.deltas)?;
    for r in &rows {
        match (&r.error, r.ratio_tau1) {
            (Some(e), _) => println!("delta = {:.3e}: {e}", r.delta),
            (None, Some(q)) => println!("delta = {:.3e}: d = {:.3e}, ratio = {q:.4e}", r.delta, r.d),
            (None, None) => println!("delta = {:.3e}: d = {:.3e}", r.delta, r.d),
        }
    }
    if let Some(s) = ratio_spread(&rows) {
        println!("ratio spread: {:.2}%", 100.0 * s);
    }
    write_table(&a.out, &rows)
}

pub fn verify(a: &VerifyArgs) -> Result<()> {
    let data = read_spectral(&a.data)?;
    let coeffs = CoefficientPair::read_csv(&a.rec)?;
    let grid = check_grid(coeffs.grid().m())?;
    let big_n = a.big_n.unwrap_or(data.n_max);
    let mode: VerifyMode = a.mode.parse()?;
    let fwd = forward_options(&a.solver);
    let margs = ModelArgs {
        big_n,
        grid: grid.m(),
        model_jitter: a.model_jitter,
        force: false,
        cond_limit: 1e14,
        solver: a.solver.clone(),
    };
    let opts = inverse_options(&margs, &data)?;
    let mut extra = serde_json::Map::new();
    let report = match mode {
        VerifyMode::Spectral => {
            let model_coeffs = model_coefficients(data.theta, grid, a.model_jitter);
            let model = ForwardProblem::with_options(&model_coeffs, fwd)?.spectral_data(big_n + opts.model.extra)?;
            run_verify(mode, &data, &coeffs, big_n, &model, None, fwd)?
        }
        VerifyMode::Weyl => {
            let (rec, cache) = run_inverse(&data, grid, &opts)?;
            let mismatch = rec.coeffs.tau1.sub(&coeffs.tau1)?.max_abs().max(rec.coeffs.sigma0.sub(&coeffs.sigma0)?.max_abs());
            extra.insert("rec_mismatch".into(), serde_json::json!(mismatch));
            run_verify(mode, &data, &coeffs, big_n, &cache.model_data, Some((&cache, &rec)), fwd)?
        }
    };
    let mut value = serde_json::to_value(&report)?;
    if let Value::Object(m) = &mut value {
        m.extend(extra);
    }
    write_json_file(&a.out, &value)?;
    println!(
        "verify ({}): {} (lambda {:.2e}, beta {:.2e}, weyl {:.2e}, {} breaches)",
        a.mode,
        if report.passed { "pass" } else { "fail" },
        report.max_rel_lambda_err,
        report.max_rel_beta_err,
        report.max_weyl_residual,
        report.breaches.len()
    );
    Ok(())
}
