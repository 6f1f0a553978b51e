//! Acceptance run: one line per criterion with its key numbers and runtime.
//! Exits nonzero if any criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polaron_core::convergence::{convergence_study, ConvergenceReport, AGREEMENT_TOL, GAUSSIAN_LADDER, SHARP_LADDER};
use polaron_core::delta::{delta_ladder, DEFAULT_LADDER as DELTA_LADDER};
use polaron_core::fock::two_body_check;
use polaron_core::lattice::{CutoffKind, CutoffScheme, FermiSea, ModelParams, Momentum};
use polaron_core::molecule::{crossover_sweep, solve_molecule_ladder, Winner, DEFAULT_LADDER as MOLECULE_LADDER};
use polaron_core::polaron::{interlacing_report, solve_polaron};
use polaron_core::renorm::{g_mu, mu_tau, phi_limit_molecule_form, reference_sum, GEvaluator};
use polaron_core::suite::{
    fock_counting_suite, identity_suite, monotonicity_suite, random_counting_suite, DEFAULT_SEED,
};
use polaron_core::{Error, Result};

fn relay(e: &Error) -> Error {
    Error::InvalidParameter(format!("ladder failed: {e}"))
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn unit(m: f64, eb: f64, mu: f64) -> ModelParams {
    ModelParams::unit_lattice(m, eb, mu).unwrap()
}

fn c1_two_body() -> Result<Outcome> {
    let p = unit(1.0, -1.0, 0.0);
    let (mut worst_e, mut worst_v) = (0.0f64, 0.0f64);
    for kind in [CutoffKind::Sharp, CutoffKind::Gaussian] {
        for r in [4.0, 8.0, 16.0] {
            let rep = two_body_check(&CutoffScheme::new(kind, r, 1.0)?, &p)?;
            worst_e = worst_e.max(rep.ground_error);
            worst_v = worst_v.max(rep.predicted_residual).max(rep.misalignment.abs());
        }
    }
    Ok(Outcome {
        passed: worst_e <= 1e-10 && worst_v <= 1e-9,
        detail: format!("max |E0 - E_B| = {worst_e:.2e} (<= 1e-10), max eigenvector residual = {worst_v:.2e} (<= 1e-9)"),
    })
}

fn c2_identities() -> Result<Outcome> {
    let r = identity_suite(DEFAULT_SEED, 100)?;
    Ok(Outcome {
        passed: r.passed,
        detail: format!(
            "100 models: resolvent {:.2e}, inverse phi {:.2e} (<= 1e-10), factorizations {:.2e} (<= 1e-12)",
            r.max_resolvent, r.max_inverse_phi, r.max_factorization
        ),
    })
}

fn c3_counting() -> Result<Outcome> {
    let random = random_counting_suite(DEFAULT_SEED + 1, 100, 20)?;
    let p = unit(1.0, -1.0, 0.0);
    let scheme = CutoffScheme::sharp(8.0, 1.0)?;
    let mut comparisons = random.comparisons;
    let mut mismatches = random.mismatches.len();
    let mut dims = Vec::new();
    for n in [1, 2] {
        let r = fock_counting_suite(&scheme, &p, n, 8.0, 20)?;
        comparisons += r.comparisons;
        mismatches += r.mismatches.len();
        dims.push(r.label);
    }
    Ok(Outcome {
        passed: mismatches == 0,
        detail: format!("{comparisons} comparisons, {mismatches} mismatches; sectors: {}", dims.join("; ")),
    })
}

fn c4_monotonicity() -> Result<Outcome> {
    let r = monotonicity_suite(DEFAULT_SEED + 2, 100)?;
    Ok(Outcome {
        passed: r.passed && r.all_strictly_decreasing,
        detail: format!(
            "100 models, strictly decreasing: {}, min PSD eigenvalue {:.2e} (>= -1e-12)",
            r.all_strictly_decreasing, r.min_psd_eigenvalue
        ),
    })
}

fn c5_renormalized_sums() -> Result<Outcome> {
    let mut worst_ratio = 0.0f64;
    let mut ok = true;
    let mut points = 0;
    let masses = [0.5, 1.0, 2.0];
    let bindings = [-0.25, -1.0, -4.0];
    let qs = [Momentum::ZERO, Momentum::new(1, 0), Momentum::new(1, 1), Momentum::new(2, 1)];
    for i in 0..13 {
        let p = unit(masses[i % 3], bindings[(i / 3) % 3], 0.0);
        let q = qs[i % 4];
        let tau = p.binding_energy * (1.0 + 0.37 * i as f64);
        let p2 = 0.25 * (i % 3) as f64;
        let v = mu_tau(&p, tau, q, p2)?;
        let r = reference_sum(&p, q, p2 - tau, f64::NEG_INFINITY, 10.0 * v.inner_radius);
        worst_ratio = worst_ratio.max((v.value - r).abs() / v.error_bound);
        ok &= (v.value - r).abs() <= v.error_bound;
        points += 1;
    }
    for i in 0..12 {
        let mu = [0.0, 0.5, 1.0, 2.0][i % 4];
        let p = unit(masses[(i + 1) % 3], bindings[i % 3], mu);
        let q = qs[(i + 2) % 4];
        let lambda = 0.3 + 0.8 * i as f64;
        let v = g_mu(&p, lambda, q)?;
        let r = reference_sum(&p, q, lambda, mu, 10.0 * v.inner_radius);
        worst_ratio = worst_ratio.max((v.value - r).abs() / v.error_bound);
        ok &= (v.value - r).abs() <= v.error_bound;
        points += 1;
    }
    let p = unit(1.0, -1.0, 0.0);
    let lambda = 1e4;
    let slope = std::f64::consts::PI / p.mass_factor();
    let ratio = g_mu(&p, lambda, Momentum::ZERO)?.value / lambda.ln() / slope;
    let log_ok = (ratio - 1.0).abs() <= 0.05;
    Ok(Outcome {
        passed: ok && log_ok && points == 25,
        detail: format!(
            "{points} points, max |sum - reference| / bound = {worst_ratio:.3} (<= 1); \
             G(1e4, 0) / (log(1e4) pi/c) = {ratio:.4} (within 5%)"
        ),
    })
}

fn c6_polaron() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for mu in [0.0, 1.0] {
        let p = unit(1.0, -1.0, mu);
        let s = solve_polaron(&p)?;
        let eval = GEvaluator::new(p, 1e-10);
        let mut interlaced = 0;
        for i in 0..20 {
            let lambda = s.lambda_star * 0.5 * 8f64.powf(i as f64 / 19.0);
            interlaced += interlacing_report(&eval, lambda)?.passed as usize;
        }
        ok &= s.residual <= 1e-10 && s.mu1_check.abs() <= 1e-8 && s.kernel_residual <= 1e-8 && interlaced == 20;
        parts.push(format!(
            "N_mu={}: E_P={:.10}, residual {:.1e}, mu1 {:.1e}, kernel {:.1e}, interlacing {interlaced}/20",
            s.n_mu, s.e_polaron, s.residual, s.mu1_check, s.kernel_residual
        ));
        if s.n_mu == 1 {
            // The N_mu = 1 sector is the two-body problem; its ground energy
            // is cutoff independent once g is renormalized.
            let ed = two_body_check(&CutoffScheme::sharp(32.0, 1.0)?, &p)?.ground;
            let ed_ok = ed <= s.e_polaron + 1e-6;
            ok &= ed_ok;
            parts.push(format!("ED(N=1, sharp 32) = {ed:.12} <= E_P + 1e-6: {ed_ok}"));
        }
    }
    parts.push("N_mu=5 sector not diagonalized (basis too large at a converged cutoff)".into());
    Ok(Outcome {
        passed: ok,
        detail: parts.join("; "),
    })
}

fn c7_molecule(sharp: &ConvergenceReport) -> Result<Outcome> {
    let p = unit(1.0, -1.0, 0.5);
    let ladder = solve_molecule_ladder(&p, &MOLECULE_LADDER)?;
    let mut ok = ladder.nonincreasing();
    let mut worst_res = 0.0f64;
    let mut energies = Vec::new();
    for (_, s) in &ladder.rungs {
        let s = s.as_ref().expect("bound molecule at E_B = -1");
        worst_res = worst_res.max(s.stationarity_residual).max(s.scalar_residual);
        energies.push(format!("{:.10}", s.e_molecule));
    }
    ok &= worst_res <= 1e-8;

    // Finite-difference gradient of the term-by-term form against the
    // gradient of the assembled matrix, at random amplitudes.
    let best = ladder.best().unwrap();
    let e4 = ladder.rungs[0].1.as_ref().unwrap().e_molecule;
    let eval = GEvaluator::new(p, 1e-9);
    let form = phi_limit_molecule_form(&eval, e4, 4.0)?;
    let a = form.amplitude_matrix();
    let y = form.linear_vector();
    let n = form.n_amplitudes();
    let mut worst_grad = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    for _ in 0..5 {
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        for r in 0..n {
            let h = 1e-3;
            let mut gp = gamma.clone();
            let mut gm = gamma.clone();
            gp[r] += h;
            gm[r] -= h;
            let fd = (form.value(&gp) - form.value(&gm)) / (2.0 * h);
            let exact = 2.0 * (y[r] + (0..n).map(|c| a[(r, c)] * gamma[c]).sum::<f64>());
            worst_grad = worst_grad.max((fd - exact).abs() / exact.abs().max(1e-3));
        }
    }
    ok &= worst_grad <= 1e-6;

    let ed = sharp.summaries[0].extrapolation.expect("sharp ladder fit");
    let ed_ok = ed.value <= best.e_molecule + 1e-6;
    ok &= ed_ok;
    Ok(Outcome {
        passed: ok,
        detail: format!(
            "E_M along K_cap {{4,8,16}} = [{}] nonincreasing: {}; max residual {worst_res:.1e} (<= 1e-8); \
             gradient rel. error {worst_grad:.1e} (<= 1e-6); ED(N=2, sharp extrapolated) = {:.10} +- {:.1e} <= E_M + 1e-6: {ed_ok}",
            energies.join(", "),
            ladder.nonincreasing(),
            ed.value,
            ed.error_estimate
        ),
    })
}

fn c8_crossover() -> Result<Outcome> {
    let base = unit(1.0, -1.0, 0.5);
    let rows = crossover_sweep(&base, &[-0.25, -1.0, -4.0, -16.0], 8.0);
    let finite = rows.iter().all(|r| {
        r.error.is_none()
            && r.e_polaron.is_some_and(f64::is_finite)
            && (r.no_molecule || r.e_molecule.is_some_and(f64::is_finite))
    });
    let last = rows.last().unwrap();
    let sign = match (last.e_polaron, last.e_molecule_minus_mu) {
        (Some(p), Some(m)) => p - m,
        _ => f64::NAN,
    };
    let winners: Vec<&str> = rows.iter().map(|r| r.winner.map_or("-", Winner::name)).collect();
    Ok(Outcome {
        passed: finite && sign > 0.0,
        detail: format!(
            "winners [{}]; E_P - (E_M - mu) at E_B=-16: {sign:.6} (> 0); all rows finite: {finite}",
            winners.join(", ")
        ),
    })
}

fn c9_delta() -> Result<Outcome> {
    let p = unit(1.0, -1.0, 0.0);
    let r = delta_ladder(&p, &DELTA_LADDER)?;
    let ground = r.rungs.iter().map(|x| x.ground_error).fold(0.0, f64::max);
    let resolvent = r.rungs.iter().map(|x| x.resolvent_residual).fold(0.0, f64::max);
    let phi = r.phi_at_binding.value.abs();
    Ok(Outcome {
        passed: phi <= 1e-13 && ground <= 1e-12 && resolvent <= 1e-10,
        detail: format!(
            "|phi(E_B)| = {phi:.1e} (<= 1e-13), max |E0 - E_B| = {ground:.1e} (<= 1e-12), resolvent {resolvent:.1e} (<= 1e-10)"
        ),
    })
}

fn c10_schemes(sharp: &ConvergenceReport, gaussian: &ConvergenceReport) -> Result<Outcome> {
    let s = sharp.summaries[0].extrapolation.unwrap();
    let g = gaussian.summaries[0].extrapolation.unwrap();
    let spread = (s.value - g.value).abs();
    Ok(Outcome {
        passed: spread <= AGREEMENT_TOL,
        detail: format!(
            "sharp {SHARP_LADDER:?} -> {:.8} +- {:.1e}, gaussian {GAUSSIAN_LADDER:?} -> {:.8} +- {:.1e}, |difference| = {spread:.2e} (<= 1e-3)",
            s.value, s.error_estimate, g.value, g.error_estimate
        ),
    })
}

fn report(number: usize, name: &str, limit_s: u64, elapsed: Duration, outcome: Result<Outcome>) -> bool {
    let in_time = elapsed.as_secs_f64() <= limit_s as f64;
    let (passed, detail) = match outcome {
        Ok(o) => (o.passed && in_time, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let line = format!(
        "criterion {number:>2} {} {name}: {detail} [{:.1} s, limit {limit_s} s]\n",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    // Written past the test harness capture so the lines always show.
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    passed
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    assert_eq!(FermiSea::new(&unit(1.0, -1.0, 1.0)).n_mu, 5);
    let mut all = true;
    let (o, t) = timed(c1_two_body);
    all &= report(1, "two-body exactness", 5, t, o);
    let (o, t) = timed(c2_identities);
    all &= report(2, "Schur/Krein identities", 10, t, o);
    let (o, t) = timed(c3_counting);
    all &= report(3, "counting principle", 60, t, o);
    let (o, t) = timed(c4_monotonicity);
    all &= report(4, "monotonicity", 10, t, o);
    let (o, t) = timed(c5_renormalized_sums);
    all &= report(5, "renormalized sums", 30, t, o);
    let (o, t) = timed(c6_polaron);
    all &= report(6, "polaron solve", 300, t, o);

    let p = unit(1.0, -1.0, 0.0);
    let (sharp, t_sharp) = timed(|| convergence_study(&p, &[(CutoffKind::Sharp, SHARP_LADDER.to_vec())]));
    let (o, t) = timed(|| sharp.as_ref().map_err(relay).and_then(c7_molecule));
    all &= report(7, "molecule solve", 600, t + t_sharp, o);
    let (o, t) = timed(c8_crossover);
    all &= report(8, "crossover", 900, t, o);
    let (o, t) = timed(c9_delta);
    all &= report(9, "delta example", 5, t, o);
    let (gaussian, t_gauss) = timed(|| convergence_study(&p, &[(CutoffKind::Gaussian, GAUSSIAN_LADDER.to_vec())]));
    let o = match (&sharp, &gaussian) {
        (Ok(s), Ok(g)) => c10_schemes(s, g),
        (Err(e), _) | (_, Err(e)) => Err(relay(e)),
    };
    all &= report(10, "scheme independence", 600, t_sharp + t_gauss, o);
    if !all {
        std::process::exit(1);
    }
}
