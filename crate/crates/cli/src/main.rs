//! `asymp`: command-line front end for almost-symplectic action-angle
//! systems described by TOML experiment files.
//!
//! Exit status: 0 on success, 1 for invalid input or a violated
//! precondition, 2 for a numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use almost_symplectic::dynamics::{integrate, is_strongly_hamiltonian, Dop853, IntegrateOptions, PhaseState};
use almost_symplectic::harness::{nekhoroshev_report, ExperimentConfig};
use almost_symplectic::lattice::{
    change_action_angle, common_kernel_lattice, complete_to_unimodular, consistency_error, reduce, IntegerLattice,
    KernelSampling,
};
use almost_symplectic::normalform::{
    check_strong_preservation, default_delta, lie_transform_field, remainder_estimate, remainder_scaling,
    residual_grid, resonance_set_at, solve_homological, LieDirection,
};
use almost_symplectic::structure::is_symplectic;
use almost_symplectic::{Error, MultiIndex, Result};

#[derive(Parser, Debug)]
#[command(name = "asymp", version, about = "Hamiltonian dynamics on almost-symplectic action-angle spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (a directory for `sweep`); standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `experiment.rtol`.
    #[arg(long)]
    rtol: Option<f64>,
    /// Override `experiment.atol`.
    #[arg(long)]
    atol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structure tensor, symplecticity and the common kernel lattice.
    Analyze(Common),
    /// Strong-Hamiltonian verdicts for the perturbation and the Hamiltonian.
    Classify(Common),
    /// Torus reduction at the momenta of `[reduce]` with a consistency check.
    Reduce(Common),
    /// One normalization step with residual and remainder diagnostics.
    Normalform(Common),
    /// A single trajectory from `[simulate]` as CSV.
    Simulate(Common),
    /// The action-drift sweep and stability report.
    Sweep(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.experiment.seed = s;
    }
    if let Some(r) = common.rtol {
        cfg.experiment.rtol = r;
    }
    if let Some(a) = common.atol {
        cfg.experiment.atol = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, v: &Value) -> Result<()> {
    emit(out, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn solver(cfg: &ExperimentConfig) -> Dop853 {
    Dop853::new(cfg.experiment.rtol, cfg.experiment.atol)
}

fn kernel_options(cfg: &ExperimentConfig) -> KernelSampling {
    KernelSampling { seed: cfg.experiment.seed, ..KernelSampling::default() }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Analyze(c) => analyze(&c),
        Command::Classify(c) => classify(&c),
        Command::Reduce(c) => reduce_cmd(&c),
        Command::Normalform(c) => normalform(&c),
        Command::Simulate(c) => simulate(&c),
        Command::Sweep(c) => sweep(&c),
    }
}

fn analyze(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let sys = cfg.system()?;
    let c = sys.c_tensor();
    let components: BTreeMap<String, String> =
        c.components().map(|((i, j, k), p)| (format!("{},{},{}", i + 1, j + 1, k + 1), p.to_string())).collect();
    let lattice = common_kernel_lattice(&c, &sys.domain, &kernel_options(&cfg))?;
    let unit = lattice.unit_coordinates();
    let completion = if unit.is_none() && lattice.is_saturated() {
        Some(serde_json::to_value(complete_to_unimodular(&lattice)?)?)
    } else {
        None
    };
    emit_json(
        common.out.as_deref(),
        &json!({
            "n": sys.n,
            "symplectic": is_symplectic(&sys.structure),
            "structure": sys.structure.to_expr_map(),
            "c_tensor": components,
            "kernel_lattice": lattice,
            "saturated": lattice.is_saturated(),
            "elementary_divisors": lattice.elementary_divisors(),
            "unit_coordinates": unit.map(|u| u.iter().map(|i| i + 1).collect::<Vec<_>>()),
            "completion": completion,
        }),
    )
}

fn classify(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let sys = cfg.system()?;
    let c = sys.c_tensor();
    emit_json(
        common.out.as_deref(),
        &json!({
            "perturbation": is_strongly_hamiltonian(&sys.f, &c),
            "hamiltonian": is_strongly_hamiltonian(&sys.hamiltonian(), &c),
        }),
    )
}

/// Kernel lattice of the config (given or computed) and, when it is not
/// spanned by coordinate vectors, the system rewritten so that it is.
fn reduction_setup(
    cfg: &ExperimentConfig,
) -> Result<(almost_symplectic::dynamics::SystemDefinition, IntegerLattice, Option<Value>)> {
    let sys = cfg.system()?;
    let section = cfg.reduce.as_ref().ok_or_else(|| Error::Validation("the config has no [reduce] section".into()))?;
    let lattice = match &section.lattice {
        Some(b) => IntegerLattice::new(sys.n, b.clone())?,
        None => common_kernel_lattice(&sys.c_tensor(), &sys.domain, &kernel_options(cfg))?,
    };
    if lattice.unit_coordinates().is_some() {
        return Ok((sys, lattice, None));
    }
    let t = complete_to_unimodular(&lattice)?;
    let moved = change_action_angle(&sys, &t)?;
    let basis: Vec<Vec<i64>> =
        lattice.basis().iter().map(|nu| t.map_harmonic(&MultiIndex(nu.clone())).0).collect();
    let lattice = IntegerLattice::new(sys.n, basis)?;
    Ok((moved, lattice, Some(serde_json::to_value(&t)?)))
}

fn reduce_cmd(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let section = cfg.reduce.clone().ok_or_else(|| Error::Validation("the config has no [reduce] section".into()))?;
    let (sys, lattice, transform) = reduction_setup(&cfg)?;
    let verdict = is_strongly_hamiltonian(&sys.f, &sys.c_tensor());
    let reduced = reduce(&sys, &verdict, &lattice, &section.j)?;
    let solver = solver(&cfg);
    let mut entries = Vec::new();
    for r in &reduced {
        let x0 = r
            .domain
            .center()
            .map(|a| PhaseState::new(a, (0..r.dof()).map(|i| 0.1 * (i + 1) as f64).collect()))
            .unwrap_or_else(|| PhaseState::new(vec![0.5; r.dof()], vec![0.1; r.dof()]));
        let psi0 = vec![0.0; r.removed.len()];
        let err = consistency_error(&sys, r, &x0, &psi0, section.check_time, &solver, 100)?;
        entries.push(json!({ "reduced": r.report(), "check_time": section.check_time, "consistency_error": err }));
    }
    emit_json(
        common.out.as_deref(),
        &json!({ "verdict": verdict, "lattice": lattice, "transform": transform, "systems": entries }),
    )
}

fn normalform(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let sys = cfg.system()?;
    let section = cfg.normalform.clone().unwrap_or_default();
    let a_star = match section.a_star {
        Some(a) => a,
        None => sys.domain.center().ok_or_else(|| Error::Validation("normalform needs a_star or a finite box domain".into()))?,
    };
    let omega: Vec<f64> = sys.k.gradient().iter().map(|g| g.eval(&a_star)).collect();
    let delta = section.delta.unwrap_or_else(|| default_delta(sys.epsilon, &omega));
    let lambda = resonance_set_at(&sys.k, &a_star, section.cutoff, delta)?;
    let result = solve_homological(&sys.k, &sys.f, &lambda, section.cutoff, &a_star)?;
    let mut report = result.report();
    report.preservation = Some(check_strong_preservation(&sys, &result, &sys.c_tensor()));
    let points = residual_grid(&a_star, section.scaling_points.max(1), cfg.experiment.seed);
    if sys.epsilon != 0.0 {
        let t = lie_transform_field(&sys, &result, LieDirection::Forward)?;
        report.remainder_sup = Some(remainder_estimate(&t, &sys, &result, &points)?);
    }
    if !section.scaling_epsilons.is_empty() {
        report.scaling = Some(remainder_scaling(&sys, &result, &section.scaling_epsilons, &points)?);
    }
    emit_json(common.out.as_deref(), &serde_json::to_value(&report)?)
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let sys = cfg.system()?;
    let s = cfg.simulate.clone().ok_or_else(|| Error::Validation("the config has no [simulate] section".into()))?;
    if s.actions.len() != sys.n || s.angles.len() != sys.n {
        return Err(Error::DimensionMismatch { expected: sys.n, got: s.actions.len().min(s.angles.len()) });
    }
    let opts = IntegrateOptions {
        rtol: cfg.experiment.rtol,
        atol: cfg.experiment.atol,
        sample_count: s.samples,
        ..IntegrateOptions::default()
    };
    let energy = sys.hamiltonian().compile();
    let rec = integrate(
        &sys.vector_field().compile(),
        &PhaseState::new(s.actions, s.angles),
        s.t_end,
        &opts,
        Some(&sys.domain),
        Some(&energy),
    )?;
    emit(common.out.as_deref(), &rec.to_csv_string())
}

fn sweep(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let report = nekhoroshev_report(&cfg)?;
    let json = report.to_json() + "\n";
    let csv = report.table.to_csv_string();
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("drift.csv"), csv)?;
            fs::write(dir.join("report.json"), json)?;
        }
        None => emit(None, &json)?,
    }
    eprintln!("sweep {}", if report.passed { "passed" } else { "failed" });
    for f in &report.failures {
        eprintln!("  {f}");
    }
    if report.passed {
        Ok(())
    } else {
        Err(Error::Validation(format!("stability report failed: {}", report.failures.join("; "))))
    }
}
