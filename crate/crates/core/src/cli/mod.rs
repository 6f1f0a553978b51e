//! The `polaron` command line: subcommands, output tables and exit codes.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::convergence::{convergence_study, AGREEMENT_TOL};
use crate::delta::delta_ladder;
use crate::error::{Error, Result};
use crate::fock::two_body_check;
use crate::lattice::{CutoffKind, CutoffScheme};
use crate::molecule::{crossover_sweep_with_tol, solve_molecule_ladder_with_tol, CROSSOVER_COLUMNS};
use crate::polaron::solve_polaron;
use crate::suite::{fock_counting_suite, identity_suite, monotonicity_suite, random_counting_suite};

pub use config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Polaron solve acceptance bounds.
pub const POLARON_RESIDUAL_TOL: f64 = 1e-10;
pub const POLARON_KERNEL_TOL: f64 = 1e-8;
/// Molecule stationarity and scalar residual bound.
pub const MOLECULE_RESIDUAL_TOL: f64 = 1e-8;
pub const TWOBODY_VECTOR_TOL: f64 = 1e-9;
pub const DELTA_PHI_TOL: f64 = 1e-13;
pub const DELTA_GROUND_TOL: f64 = 1e-12;
pub const DELTA_RESOLVENT_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "polaron", version, about = "Birman-Schwinger spectral toolkit for the 2D Fermi polaron")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized suites; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Two-body exactness over the cutoff ladder for sharp and gaussian profiles.
    Twobody,
    /// Randomized identity, counting and monotonicity suites plus sector counting.
    Bscheck,
    /// Solve the polaron equation.
    Polaron,
    /// Solve the molecule problem along the `K_cap` ladder.
    Molecule,
    /// Polaron against molecule over the binding-energy grid.
    Crossover,
    /// Two-fermion ground energy along cutoff ladders and the extrapolated comparison.
    Convergence,
    /// The single-particle point interaction.
    Delta,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Twobody => "twobody",
            Command::Bscheck => "bscheck",
            Command::Polaron => "polaron",
            Command::Molecule => "molecule",
            Command::Crossover => "crossover",
            Command::Convergence => "convergence",
            Command::Delta => "delta",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Rows of a CSV table, already formatted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| Error::Io(io::Error::other(e));
        w.write_record(&self.columns).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `x` rounded to 15 significant digits.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.14e}").parse().expect("formatted float parses");
    format!("{rounded:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A finished command: its JSON document, CSV table and verdict.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub json: Value,
    pub table: Table,
    pub passed: bool,
    pub summary: String,
}

impl Outcome {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json)? + "\n"),
            Format::Csv => self.table.to_csv(),
        }
    }
}

fn envelope(command: Command, config: &RunConfig, passed: bool, body: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "passed": passed,
        "seed": config.seed,
        "params": config.params,
        "result": body,
    })
}

pub fn execute(command: Command, config: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Twobody => cmd_twobody(config),
        Command::Bscheck => cmd_bscheck(config),
        Command::Polaron => cmd_polaron(config),
        Command::Molecule => cmd_molecule(config),
        Command::Crossover => cmd_crossover(config),
        Command::Convergence => cmd_convergence(config),
        Command::Delta => cmd_delta(config),
    }
}

pub fn cmd_twobody(config: &RunConfig) -> Result<Outcome> {
    let p = &config.params;
    let mut table = Table::new(&[
        "scheme",
        "cutoff_radius",
        "dimension",
        "ground",
        "abs_error",
        "predicted_residual",
        "misalignment",
        "solver_residual",
        "passed",
    ]);
    let mut reports = Vec::new();
    let mut all = true;
    for kind in [CutoffKind::Sharp, CutoffKind::Gaussian] {
        for &r in &config.twobody_ladder {
            let scheme = CutoffScheme::new(kind, r * p.kappa, p.kappa)?;
            let rep = two_body_check(&scheme, p)?;
            let err = (rep.ground - p.binding_energy).abs();
            let ok = err <= config.twobody_tolerance && rep.predicted_residual <= TWOBODY_VECTOR_TOL;
            all &= ok;
            table.push(vec![
                kind.name().into(),
                num(r),
                rep.dimension.to_string(),
                num(rep.ground),
                num(err),
                num(rep.predicted_residual),
                num(rep.misalignment),
                num(rep.solver_residual),
                ok.to_string(),
            ]);
            reports.push(json!({ "report": rep, "abs_error": err, "passed": ok }));
        }
    }
    Ok(Outcome {
        summary: format!("{} rungs, tolerance {:e}", reports.len(), config.twobody_tolerance),
        json: envelope(Command::Twobody, config, all, json!({ "rows": reports })),
        table,
        passed: all,
    })
}

pub fn cmd_bscheck(config: &RunConfig) -> Result<Outcome> {
    let seed = config.seed;
    let models = config.suite_models;
    let scheme = config.scheme()?;
    let basis = config.basis_radius * config.params.kappa;
    let ident = identity_suite(seed, models)?;
    let counting = random_counting_suite(seed.wrapping_add(1), models, config.suite_energies)?;
    let mono = monotonicity_suite(seed.wrapping_add(2), models)?;
    let fock: Vec<_> = [1usize, 2]
        .iter()
        .map(|&n| fock_counting_suite(&scheme, &config.params, n, basis, config.suite_energies))
        .collect::<Result<_>>()?;

    let mut table = Table::new(&["suite", "label", "comparisons", "mismatches", "max_residual", "passed"]);
    table.push(vec![
        "identities".into(),
        format!("random models (seed {seed})"),
        (2 * models).to_string(),
        String::new(),
        num(ident.max_resolvent.max(ident.max_inverse_phi).max(ident.max_factorization)),
        ident.passed.to_string(),
    ]);
    for c in std::iter::once(&counting).chain(fock.iter()) {
        table.push(vec![
            "counting".into(),
            c.label.clone(),
            c.comparisons.to_string(),
            c.mismatches.len().to_string(),
            String::new(),
            c.passed().to_string(),
        ]);
    }
    table.push(vec![
        "monotonicity".into(),
        format!("random models (seed {})", seed.wrapping_add(2)),
        mono.models.to_string(),
        String::new(),
        num(mono.min_psd_eigenvalue),
        mono.passed.to_string(),
    ]);
    let mismatches = counting.mismatches.len() + fock.iter().map(|c| c.mismatches.len()).sum::<usize>();
    let passed = ident.passed && mono.passed && mismatches == 0;
    let body = json!({
        "identities": ident,
        "counting": counting,
        "fock_counting": fock,
        "monotonicity": mono,
        "mismatch_census": mismatches,
    });
    Ok(Outcome {
        summary: format!("{models} models, {mismatches} counting mismatches"),
        json: envelope(Command::Bscheck, config, passed, body),
        table,
        passed,
    })
}

pub fn cmd_polaron(config: &RunConfig) -> Result<Outcome> {
    let sol = solve_polaron(&config.params)?;
    let passed = sol.residual <= POLARON_RESIDUAL_TOL
        && sol.mu1_check <= POLARON_KERNEL_TOL
        && sol.kernel_residual <= POLARON_KERNEL_TOL;
    let mut table = Table::new(&[
        "lambda_star",
        "e_polaron",
        "residual",
        "mu1_check",
        "kernel_residual",
        "g_error_bound",
        "n_mu",
    ]);
    table.push(vec![
        num(sol.lambda_star),
        num(sol.e_polaron),
        num(sol.residual),
        num(sol.mu1_check),
        num(sol.kernel_residual),
        num(sol.g_error_bound),
        sol.n_mu.to_string(),
    ]);
    Ok(Outcome {
        summary: format!("E_P = {}", num(sol.e_polaron)),
        json: envelope(Command::Polaron, config, passed, sol.to_json()),
        table,
        passed,
    })
}

pub fn cmd_molecule(config: &RunConfig) -> Result<Outcome> {
    let ladder = solve_molecule_ladder_with_tol(&config.params, &config.molecule_ladder, config.tolerance)?;
    let mut table = Table::new(&[
        "k_cap",
        "e_molecule",
        "energy_error",
        "stationarity_residual",
        "scalar_residual",
        "form_value",
        "g_error_bound",
        "amplitudes",
    ]);
    let mut passed = ladder.nonincreasing();
    let mut rungs = Vec::new();
    for (k, s) in &ladder.rungs {
        match s {
            Some(s) => {
                passed &= s.stationarity_residual <= MOLECULE_RESIDUAL_TOL && s.scalar_residual <= MOLECULE_RESIDUAL_TOL;
                table.push(vec![
                    num(*k),
                    num(s.e_molecule),
                    num(s.energy_error),
                    num(s.stationarity_residual),
                    num(s.scalar_residual),
                    num(s.form_value),
                    num(s.g_error_bound),
                    s.gamma.len().to_string(),
                ]);
                rungs.push(json!({ "k_cap": k, "solution": s.to_json() }));
            }
            None => {
                let mut row = vec![String::new(); 8];
                row[0] = num(*k);
                table.push(row);
                rungs.push(json!({ "k_cap": k, "solution": null }));
            }
        }
    }
    let body = json!({
        "rungs": rungs,
        "extrapolated": ladder.extrapolated,
        "nonincreasing": ladder.nonincreasing(),
    });
    let summary = match ladder.best() {
        Some(s) => format!("E_M = {} at K_cap {}", num(s.e_molecule), num(s.k_cap / config.params.kappa)),
        None => "no molecule below the Fermi energy".into(),
    };
    Ok(Outcome {
        summary,
        json: envelope(Command::Molecule, config, passed, body),
        table,
        passed,
    })
}

pub fn cmd_crossover(config: &RunConfig) -> Result<Outcome> {
    let rows = crossover_sweep_with_tol(&config.params, &config.e_b_grid, config.k_cap, config.tolerance);
    let mut table = Table::new(&CROSSOVER_COLUMNS);
    for r in &rows {
        table.push(vec![
            num(r.e_b),
            opt(r.e_polaron),
            opt(r.polaron_residual),
            opt(r.e_molecule),
            opt(r.e_molecule_minus_mu),
            opt(r.stationarity_residual),
            opt(r.scalar_residual),
            r.winner.map(|w| w.name().to_string()).unwrap_or_default(),
            r.no_molecule.to_string(),
            num(r.k_cap),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let passed = failed == 0;
    Ok(Outcome {
        summary: format!("{} rows, {failed} failed", rows.len()),
        json: envelope(Command::Crossover, config, passed, json!({ "rows": rows })),
        table,
        passed,
    })
}

pub fn cmd_convergence(config: &RunConfig) -> Result<Outcome> {
    let mut ladders = Vec::new();
    if !config.sharp_ladder.is_empty() {
        ladders.push((CutoffKind::Sharp, config.sharp_ladder.clone()));
    }
    if !config.gaussian_ladder.is_empty() {
        ladders.push((CutoffKind::Gaussian, config.gaussian_ladder.clone()));
    }
    let report = convergence_study(&config.params, &ladders)?;
    let mut table = Table::new(&["scheme", "cutoff", "ground_energy", "error_estimate", "mu_tau_n", "mu_tau_gap"]);
    for r in &report.rows {
        table.push(vec![
            r.scheme.clone(),
            num(r.cutoff),
            num(r.ground_energy),
            String::new(),
            num(r.mu_tau_n),
            num(r.mu_tau_gap),
        ]);
    }
    for s in &report.summaries {
        if let Some(x) = s.extrapolation {
            table.push(vec![
                s.scheme.clone(),
                "inf".into(),
                num(x.value),
                num(x.error_estimate),
                String::new(),
                String::new(),
            ]);
        }
    }
    let passed = report.passed != Some(false);
    let summary = match report.spread {
        Some(d) => format!("extrapolated spread {} (tolerance {AGREEMENT_TOL:e})", num(d)),
        None => "table only".into(),
    };
    Ok(Outcome {
        summary,
        json: envelope(Command::Convergence, config, passed, serde_json::to_value(&report)?),
        table,
        passed,
    })
}

pub fn cmd_delta(config: &RunConfig) -> Result<Outcome> {
    let report = delta_ladder(&config.params, &config.delta_ladder)?;
    let mut table = Table::new(&[
        "cutoff_radius",
        "dimension",
        "ground",
        "ground_error",
        "phi_at_binding",
        "eigenvector_residual",
        "resolvent_residual",
        "distance_to_limit",
    ]);
    let mut passed = report.phi_at_binding.value.abs() <= DELTA_PHI_TOL;
    for r in &report.rungs {
        passed &= r.ground_error <= DELTA_GROUND_TOL && r.resolvent_residual <= DELTA_RESOLVENT_TOL;
        table.push(vec![
            num(r.cutoff_radius),
            r.dimension.to_string(),
            num(r.ground),
            num(r.ground_error),
            num(r.phi_at_binding),
            num(r.eigenvector_residual),
            num(r.resolvent_residual),
            num(r.distance_to_limit),
        ]);
    }
    Ok(Outcome {
        summary: format!("phi(E_B) = {}", num(report.phi_at_binding.value)),
        json: envelope(Command::Delta, config, passed, serde_json::to_value(&report)?),
        table,
        passed,
    })
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(t) = cli.threads {
        config.threads = t;
    }
    if cli.out.is_some() {
        config.output = cli.out.clone();
    }
    Ok(config)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            let where_ = cli.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
            eprintln!("polaron: config error {where_}: {e}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("polaron: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = match pool.install(|| execute(cli.command, &config)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("polaron {}: {e}", cli.command.name());
            return EXIT_FAIL;
        }
    };
    let text = match outcome.render(cli.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("polaron: {e}");
            return EXIT_FAIL;
        }
    };
    let written = match &config.output {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("polaron: cannot write output: {e}");
        return EXIT_FAIL;
    }
    let verdict = if outcome.passed { "PASS" } else { "FAIL" };
    eprintln!("{} {verdict}: {}", cli.command.name(), outcome.summary);
    if outcome.passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_significant_digits() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1.0 / 3.0), "0.333333333333333");
        assert_eq!(num(-2.0e-300 / 3.0), "-6.66666666666667e-301");
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn csv_quotes_fields() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x, y".into(), num(1.5)]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n\"x, y\",1.5\n");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["polaron", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["polaron", "delta", "--format", "xml"]), EXIT_USAGE);
        assert_eq!(run(["polaron", "delta", "--config", "/nonexistent/polaron.cfg"]), EXIT_USAGE);
    }
}
