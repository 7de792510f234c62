use std::path::Path;
use std::process::ExitCode;

use fisher_noise::problem::DEFAULT_GRID_POINTS;
use fisher_noise::{
    design as design_noise, format_real, frontier as sweep, monte_carlo_attack, oracle_suite,
    sample as draw, validate, write_frontier_csv, DesignProblem, DesignResult,
};

use crate::output::{check_destination, read_input, write_atomic, Failure};

/// Overrides the grid size of every problem, and of `verify`.
pub const GRID_ENV: &str = "FISHER_NOISE_GRID_N";

fn grid_override() -> Result<Option<usize>, Failure> {
    match std::env::var(GRID_ENV) {
        Ok(raw) => raw.trim().parse().map(Some).map_err(|_| {
            Failure::input(
                "invalid_grid_override",
                format!("{GRID_ENV}={raw:?} is not a node count"),
            )
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Failure::input(
            "invalid_grid_override",
            format!("{GRID_ENV}: {e}"),
        )),
    }
}

fn load_problem(path: &Path) -> Result<DesignProblem, Failure> {
    let text = read_input(path)?;
    let mut problem = DesignProblem::from_json(&text)
        .map_err(|e| Failure::input("malformed_input", format!("{}: {e}", path.display())))?;
    if let Some(n) = grid_override()? {
        problem.grid.n_points = n;
    }
    Ok(problem)
}

fn designed(path: &Path) -> Result<DesignResult, Failure> {
    let problem = validate(&load_problem(path)?)?;
    Ok(design_noise(&problem)?)
}

pub fn design(problem: &Path, out: &Path) -> Result<ExitCode, Failure> {
    check_destination(out)?;
    let result = designed(problem)?;
    let json = result.to_json();
    write_atomic(out, |w| writeln!(w, "{json}"))?;
    write_atomic(&out.with_extension("density.csv"), |w| {
        result.density.write_csv(w)
    })?;
    println!(
        "fisher={} quality={} product={}",
        result.fisher,
        result.quality,
        result.fisher * result.quality
    );
    Ok(ExitCode::SUCCESS)
}

pub fn frontier(problem: &Path, out: &Path, rhos: &[f64]) -> Result<ExitCode, Failure> {
    check_destination(out)?;
    let mut template = load_problem(problem)?;
    template.rho = rhos[0];
    let points = sweep(&validate(&template)?, rhos)?;
    write_atomic(out, |w| write_frontier_csv(&points, w))?;
    Ok(ExitCode::SUCCESS)
}

pub fn sample(problem: &Path, out: &Path, count: usize, seed: u64) -> Result<ExitCode, Failure> {
    check_destination(out)?;
    let result = designed(problem)?;
    let draws = draw(&result.density, seed, count);
    write_atomic(out, |w| {
        writeln!(w, "w")?;
        draws
            .iter()
            .try_for_each(|x| writeln!(w, "{}", format_real(*x)))
    })?;
    Ok(ExitCode::SUCCESS)
}

pub fn attack(
    problem: &Path,
    out: &Path,
    trials: usize,
    seed: u64,
    x: f64,
) -> Result<ExitCode, Failure> {
    check_destination(out)?;
    if !x.is_finite() {
        return Err(Failure::input(
            "invalid_query",
            format!("query answer {x} is not finite"),
        ));
    }
    let result = designed(problem)?;
    let report = monte_carlo_attack(&result.density, x, trials, seed)?;
    let json = report.to_json();
    write_atomic(out, |w| writeln!(w, "{json}"))?;
    Ok(ExitCode::SUCCESS)
}

pub fn verify(out: Option<&Path>) -> Result<ExitCode, Failure> {
    if let Some(path) = out {
        check_destination(path)?;
    }
    let n = grid_override()?.unwrap_or(DEFAULT_GRID_POINTS);
    let checks = oracle_suite(n)?;
    let lines: Vec<String> = checks.iter().map(|c| c.to_string()).collect();
    for line in &lines {
        println!("{line}");
    }
    if let Some(path) = out {
        write_atomic(path, |w| lines.iter().try_for_each(|l| writeln!(w, "{l}")))?;
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(Failure::compute(
            "oracle_mismatch",
            format!("{failed} of {} checks failed", checks.len()),
        ));
    }
    Ok(ExitCode::SUCCESS)
}
