//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spectral3::asymptotics::extract_remainders;
use spectral3::forward::{characteristic, weight_matrix_n};
use spectral3::grid::{l2_norm, w2m1_distance};
use spectral3::inverse::kernel::{kernel_d_form, KernelForm};
use spectral3::inverse::stability::{ratio_spread, stability_experiment, Perturbation};
use spectral3::inverse::verify::{verify_spectral, VerifyTolerances};
use spectral3::model::model_coefficients;
use spectral3::quasi_ode::{fundamental_solutions, wronskian};
use spectral3::selfadjoint::{check_symmetry, complete, restrict};
use spectral3::*;

type Outcome = std::result::Result<(bool, String), String>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn grid(m: usize) -> Grid {
    Grid::new(m).expect("grid")
}

fn smooth(m: usize) -> CoefficientPair {
    CoefficientPair::from_fns(grid(m), |x| c((2.0 * PI * x).cos(), 0.0), |x| c(0.0, 0.3 * (PI * x).sin()))
}

fn shifted(m: usize) -> CoefficientPair {
    CoefficientPair::from_fns(grid(m), |x| c((2.0 * PI * x).cos() + 0.3, 0.0), |x| c(0.0, 0.3 * (PI * x).sin()))
}

fn generic(m: usize) -> CoefficientPair {
    CoefficientPair::from_fns(grid(m), |x| c(0.5 + x * x, 0.3 * (3.0 * x).sin()), |x| c(1.0 - x, 0.4 * x))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn random_lambda(rng: &mut StdRng, radius: f64, min_im: f64) -> C64 {
    loop {
        let z = c(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius));
        if z.norm() <= radius && z.im.abs() >= min_im {
            return z;
        }
    }
}

fn criterion1() -> Outcome {
    let zero = CoefficientPair::zero(grid(512));
    let at0 = characteristic(&zero, c(0.0, 0.0), false).map_err(e)?;
    let at1 = characteristic(&zero, c(1.0, 0.0), false).map_err(e)?;
    let e22 = (at0.d22 - 0.5).norm();
    let e11 = (at0.d11 + 0.5).norm();
    let eo = (at1.d22 - 0.508_358_159_984_216_86).norm();
    let ok = e22 <= 1e-12 && e11 <= 1e-12 && eo <= 1e-9;
    Ok((ok, format!("|D22(0)-1/2| = {e22:.1e}, |D11(0)+1/2| = {e11:.1e}, |D22(1)-oracle| = {eo:.1e}")))
}

fn criterion2() -> Outcome {
    let coeffs = generic(512);
    let fp = ForwardProblem::new(&coeffs).map_err(e)?;
    let mut rng = StdRng::seed_from_u64(2);
    let mut det_err: f64 = 0.0;
    let mut id_err: f64 = 0.0;
    for _ in 0..20 {
        let lam = random_lambda(&mut rng, 100.0, 0.0);
        for variant in [SystemVariant::Direct, SystemVariant::Star] {
            let sol = fundamental_solutions(&coeffs, variant, lam, coeffs.grid(), false).map_err(e)?;
            for w in wronskian(&sol) {
                det_err = det_err.max((w - 1.0).norm());
            }
        }
        let lam = random_lambda(&mut rng, 2000.0, 5.0);
        let m = fp.weyl_matrix(lam, SystemVariant::Direct).map_err(e)?;
        let s = fp.weyl_matrix(lam, SystemVariant::Star).map_err(e)?;
        id_err = id_err
            .max((m.m21 - s.m32).norm() / (1.0 + m.m21.norm()))
            .max((m.m32 - s.m21).norm() / (1.0 + m.m32.norm()))
            .max((s.m31 - s.m21 * m.m21 + m.m31).norm() / (1.0 + m.m31.norm()));
    }
    let ok = det_err <= 5e-10 && id_err <= 1e-8;
    Ok((ok, format!("max |det - 1| = {det_err:.2e} (|lambda| <= 100), max identity gap = {id_err:.2e}")))
}

fn criterion3() -> Outcome {
    let data = compute_spectral_data(&shifted(512), 20).map_err(e)?;
    let mut fitted: f64 = 0.0;
    for n in 1..=20 {
        for k in 1..=2 {
            let r = (data.beta(n, k) / (data.lambda(n, k) * 3.0) - 1.0).norm();
            fitted = fitted.max(n as f64 * r);
        }
    }
    let frame = extract_remainders(&data).map_err(e)?;
    let tail = frame.kappa[9..20].iter().flat_map(|r| r.iter().map(|z| z.norm())).fold(0.0, f64::max);
    let ok = fitted < 2.0 && tail < 0.2;
    Ok((ok, format!("fitted C = {fitted:.3}, max |kappa_n| on [10,20] = {tail:.3e}")))
}

fn criterion4() -> Outcome {
    let base = generic(512);
    let a = compute_spectral_data(&base, 8).map_err(e)?;
    let b = compute_spectral_data(&base.gauge_shift(c(5.0, 0.0)), 8).map_err(e)?;
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        for k in 1..=2 {
            worst = worst.max((a.lambda(n, k) - b.lambda(n, k)).norm() / a.lambda(n, k).norm());
            worst = worst.max((a.beta(n, k) - b.beta(n, k)).norm() / a.beta(n, k).norm());
        }
    }
    Ok((worst <= 1e-8, format!("max relative change = {worst:.2e}")))
}

fn criterion5() -> Outcome {
    let g = grid(512);
    let model = model_coefficients(c(0.3, 0.0), g, 0.0);
    let data = compute_spectral_data(&model, 12).map_err(e)?;
    let (rec, _) = inverse(&data, g, &InverseOptions::new(12)).map_err(e)?;
    let l2 = l2_norm(&rec.coeffs.tau1.sub(&model.tau1).map_err(e)?).map_err(e)?;
    let wm = w2m1_distance(&rec.coeffs.sigma0, &model.sigma0).map_err(e)?;
    let ok = l2 <= 1e-10 && wm <= 1e-10;
    Ok((ok, format!("L2(tau1) = {l2:.2e}, W-1(sigma0) = {wm:.2e} at N = 12, M = 512")))
}

fn criterion6() -> Outcome {
    let g = grid(512);
    let truth = smooth(512);
    let data = compute_spectral_data(&truth, 16).map_err(e)?;
    let mut errs = Vec::new();
    let mut detail = String::new();
    let mut rematch = true;
    for big_n in [8, 16] {
        let (rec, cache) = inverse(&data, g, &InverseOptions::new(big_n)).map_err(e)?;
        let t = l2_norm(&rec.coeffs.tau1.sub(&truth.tau1).map_err(e)?).map_err(e)?;
        let s = w2m1_distance(&rec.coeffs.sigma0, &truth.sigma0).map_err(e)?;
        errs.push((t, s));
        if big_n == 8 {
            let rep = verify_spectral(
                &rec.coeffs,
                &data,
                Some(&cache.model_data),
                big_n,
                ForwardOptions::default(),
                VerifyTolerances::default(),
            );
            let lam = rep.rows.iter().filter(|r| r.n <= big_n).map(|r| r.rel_lambda_err).fold(0.0, f64::max);
            let beta = rep.rows.iter().filter(|r| r.n <= big_n).map(|r| r.rel_beta_err).fold(0.0, f64::max);
            rematch = rep.error.is_none() && lam <= 1e-3 && beta <= 5e-3;
            detail.push_str(&format!("N = 8 re-match: lambda {lam:.2e}, beta {beta:.2e}; "));
        }
    }
    let decreasing = errs[1].0 < errs[0].0 && errs[1].1 < errs[0].1;
    detail.push_str(&format!(
        "tau1 L2 {:.3e} -> {:.3e}, sigma0 W-1 {:.3e} -> {:.3e}",
        errs[0].0, errs[1].0, errs[0].1, errs[1].1
    ));
    Ok((rematch && decreasing, detail))
}

fn criterion7() -> Outcome {
    let g = grid(512);
    let data = compute_spectral_data(&smooth(512), 12).map_err(e)?;
    let pert: Perturbation = "beta:1,1".parse().map_err(e)?;
    let (_, rows) = stability_experiment(&data, g, &InverseOptions::new(12), pert, &[1e-2, 5e-3, 2.5e-3]).map_err(e)?;
    let singular = rows.iter().any(|r| r.singular || r.error.is_some());
    let spread = ratio_spread(&rows).unwrap_or(f64::INFINITY);
    let ratios: Vec<String> = rows.iter().map(|r| r.ratio_tau1.map_or("-".into(), |q| format!("{q:.4e}"))).collect();
    Ok((
        !singular && spread < 0.5,
        format!("ratios [{}], spread {:.2e}, failures: {singular}", ratios.join(", "), spread),
    ))
}

fn criterion8() -> Outcome {
    let g = grid(512);
    let data = compute_spectral_data(&shifted(512), 10).map_err(e)?;
    let sym = check_symmetry(&data, 1e-8);
    let completed = complete(&restrict(&data)).map_err(e)?;
    let (rec, _) = inverse(&completed, g, &InverseOptions::new(8)).map_err(e)?;
    let im_tau = rec.coeffs.tau1.max_abs_im();
    let re_sigma = rec.coeffs.sigma0.max_abs_re();
    let ok = sym.passed && im_tau <= 1e-6 && re_sigma <= 1e-6;
    Ok((
        ok,
        format!(
            "symmetry lambda {:.1e}, beta {:.1e}; reconstruction max|Im tau1| = {im_tau:.1e}, max|Re sigma0| = {re_sigma:.1e}",
            sym.max_lambda, sym.max_beta
        ),
    ))
}

fn criterion9() -> Outcome {
    let g = grid(512);
    let fp = ForwardProblem::new(&generic(512)).map_err(e)?;
    let mut rng = StdRng::seed_from_u64(9);
    let pairs = [(2, 2), (2, 3), (3, 2), (3, 3)];
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (k, j) = pairs[rng.gen_range(0..4)];
        let lam = random_lambda(&mut rng, 800.0, 5.0);
        let mu = loop {
            let mu = random_lambda(&mut rng, 800.0, 5.0);
            if (mu - lam).norm() > 10.0 {
                break mu;
            }
        };
        let node = rng.gen_range(0..=512);
        let z = fp.weyl_solution(lam, SystemVariant::Star, k).map_err(e)?;
        let y = fp.weyl_solution(mu, SystemVariant::Direct, j).map_err(e)?;
        let b = kernel_d_form(&z.states, &y.states, g, (k, j), lam, mu, false, Some(KernelForm::Bracket)).map_err(e)?;
        let i = kernel_d_form(&z.states, &y.states, g, (k, j), lam, mu, false, Some(KernelForm::Integral)).map_err(e)?;
        let scale = 1.0 + b.max_abs();
        worst = worst.max((b.get(node) - i.get(node)).norm() / scale);
    }
    Ok((worst <= 1e-7, format!("max gap / (1 + max|D|) = {worst:.2e} over 50 samples")))
}

fn criterion10() -> Outcome {
    let fp = ForwardProblem::new(&generic(512)).map_err(e)?;
    let data = fp.spectral_data(6).map_err(e)?;
    let mut beta_gap: f64 = 0.0;
    let mut w_gap: f64 = 0.0;
    for n in 1..=6 {
        for k in 1..=2 {
            let lam = data.lambda(n, k);
            let beta = data.beta(n, k);
            let r = fp.residue_beta(k, lam).map_err(e)?;
            beta_gap = beta_gap.max((r - beta).norm() / beta.norm());
            let w = fp.weight_matrix_laurent(lam).map_err(e)?;
            let expect = weight_matrix_n(&data, n, k).map_err(e)?;
            for i in 0..3 {
                for jj in 0..3 {
                    w_gap = w_gap.max((w[i][jj] - expect[i][jj]).norm() / (1.0 + beta.norm()));
                }
            }
        }
    }
    Ok((
        beta_gap <= 1e-6 && w_gap <= 1e-5,
        format!("beta residue gap {beta_gap:.2e} (relative), weight matrix gap {w_gap:.2e} (relative to 1 + |beta|)"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, u64, fn() -> Outcome); 10] = [
        (1, "analytic forward checks", 1, criterion1),
        (2, "Wronskian and Weyl identities", 30, criterion2),
        (3, "asymptotics", 120, criterion3),
        (4, "gauge invariance", 60, criterion4),
        (5, "inverse fixed point", 60, criterion5),
        (6, "round trip", 600, criterion6),
        (7, "stability", 600, criterion7),
        (8, "self-adjoint symmetry", 120, criterion8),
        (9, "kernel equivalence", 60, criterion9),
        (10, "residues and weight matrices", 60, criterion10),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(budget);
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id:2} ({name}): {} | {detail} | {:.2}s of {budget}s",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
