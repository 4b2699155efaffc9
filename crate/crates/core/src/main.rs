//! Command-line front end: `solve` (both solutions), `sweep` (ε-ladder
//! continuation), `barrier` (supersolution construction), and `verify`
//! (randomized operator/gradient/identity checks). Exit status 0 iff every
//! certificate passes, 1 on a failed certificate, 2 on operational errors.
//! All floating output carries 17 significant digits and no run timestamps,
//! so identical configs produce byte-identical artifacts.

mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcs_vortex::background::{bind_background, Background};
use mcs_vortex::barrier::{build_barrier, find_lambda0, verify_supersolution, Barrier};
use mcs_vortex::energy::{
    eval_i0, eval_i_eps, grad_i0, grad_i_eps, identity_checks, recover_v, residual_system,
};
use mcs_vortex::grid::{band_limited_noise, Grid, RealField};
use mcs_vortex::io::write_field_file;
use mcs_vortex::operators::{helmholtz_inverse, laplacian};
use mcs_vortex::profile::ModelParams;
use mcs_vortex::solver::{
    auto_lambda, continue_in_eps, floor_tolerance, minimize_constrained, mountain_pass,
    newton_refine, Functional,
};
use mcs_vortex::{Error, Result};

use config::{parse_config, EpsSpec, LambdaSpec, RunConfig, DEFAULT_LADDER};
use report::{all_pass, check_table, BarrierFacts, Check};

#[derive(Parser)]
#[command(
    name = "mcs-vortex",
    version,
    about = "Doubly periodic vortex solver: two critical points of a \
             fourth-order functional on the unit torus"
)]
struct Cli {
    /// Configuration file (key = value with [vortices] and [solver]
    /// sections); defaults apply when absent.
    #[arg(long, global = true, value_name = "path")]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true, value_name = "dir")]
    out: Option<PathBuf>,
    /// Grid resolution override.
    #[arg(long, global = true, value_name = "int")]
    grid_n: Option<usize>,
    /// Suppress the report on stdout; files are still written.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Constrained descent + Newton for the minimizer, then a mountain-pass
    /// deformation for the second solution; dumps u1, u2, v1, v2.
    Solve,
    /// ε-continuation down a ladder toward the limit equation; writes the
    /// diagnostics table as CSV.
    Sweep,
    /// Construct the supersolution barrier, search the smallest workable
    /// coupling, and dump the barrier and margin fields.
    Barrier,
    /// Randomized screened-resolvent, gradient, and identity checks.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Everything a subcommand needs: validated config, bound background,
/// barrier with λ₀ filled in, and the resolved coupling.
struct Session {
    config: RunConfig,
    out_dir: PathBuf,
    quiet: bool,
    bg: Background,
    barrier: Barrier,
    lambda: f64,
}

fn run(cli: &Cli) -> Result<bool> {
    let session = prepare(cli)?;
    match cli.command {
        Command::Solve => cmd_solve(&session),
        Command::Sweep => cmd_sweep(&session),
        Command::Barrier => cmd_barrier(&session),
        Command::Verify => cmd_verify(&session),
    }
}

fn prepare(cli: &Cli) -> Result<Session> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut config = parse_config(&text)?;
    if let Some(n) = cli.grid_n {
        config.n = n;
        config.validate(&text)?;
    }
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.out));

    let grid = Grid::new(config.n)?;
    let bg = bind_background(&config.vortex_config()?, &grid)?;
    let mut barrier = build_barrier(&bg, config.profile()?, config.s)?;
    let lambda0 = find_lambda0(&barrier, &bg)?;
    barrier.lambda0 = Some(lambda0);
    let lambda = match &config.lambda {
        LambdaSpec::Fixed(l) => *l,
        LambdaSpec::Auto(_) => auto_lambda(&barrier)?,
    };

    fs::create_dir_all(&out_dir)?;
    // The normalized config is part of the artifact set: re-running with it
    // reproduces the run byte for byte.
    fs::write(out_dir.join("config.txt"), config::serialize_config(&config))?;
    Ok(Session {
        config,
        out_dir,
        quiet: cli.quiet,
        bg,
        barrier,
        lambda,
    })
}

/// Write a report file into the output directory and mirror it on stdout.
fn emit(session: &Session, name: &str, text: &str) -> Result<()> {
    fs::write(session.out_dir.join(name), text)?;
    if !session.quiet {
        print!("{text}");
    }
    Ok(())
}

fn dump(session: &Session, file: &str, name: &str, field: &RealField) -> Result<()> {
    write_field_file(&session.out_dir.join(file), name, field)
}

/// Check the supersolution inequality at the session coupling and collect
/// the printable barrier facts; the margin minimum is taken off the vortex
/// disks, where the inequality is asserted.
fn barrier_facts(session: &Session) -> Result<(BarrierFacts, RealField)> {
    let (ok, margin) = verify_supersolution(&session.barrier, &session.bg, session.lambda)?;
    let margin_min = margin
        .values()
        .iter()
        .zip(session.bg.mask())
        .filter(|&(_, &excluded)| !excluded)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    let facts = BarrierFacts {
        rho: session.barrier.rho,
        c_bar: session.barrier.c_bar,
        c0: session.barrier.c0,
        lambda0: session.barrier.lambda0.unwrap_or(f64::NAN),
        margin_min,
        supersolution_ok: ok,
    };
    Ok((facts, margin))
}

/// The single ε demanded by `solve`.
fn single_eps(config: &RunConfig) -> Result<f64> {
    match &config.eps {
        EpsSpec::One(e) => Ok(*e),
        EpsSpec::Ladder(_) => Err(Error::InvalidParameter(
            "solve needs a single eps; an eps ladder drives the sweep subcommand".into(),
        )),
    }
}

/// ε used by randomized checks: the given one, or the ladder's small end.
fn smallest_eps(config: &RunConfig) -> f64 {
    match &config.eps {
        EpsSpec::One(e) => *e,
        EpsSpec::Ladder(v) => *v.last().expect("validated ladder is nonempty"),
    }
}

fn cmd_barrier(session: &Session) -> Result<bool> {
    let (facts, margin) = barrier_facts(session)?;
    dump(session, "ubar.bin", "ubar", &session.barrier.u_bar)?;
    dump(session, "margin.bin", "margin", &margin)?;
    let text = report::barrier_report(&session.config, session.lambda, &facts);
    emit(session, "barrier.txt", &text)?;
    Ok(facts.supersolution_ok)
}

fn cmd_solve(session: &Session) -> Result<bool> {
    let config = &session.config;
    let bg = &session.bg;
    let eps = single_eps(config)?;
    let params = ModelParams::new(session.lambda, eps, config.s, config.profile()?)?;

    let (facts, _) = barrier_facts(session)?;
    if !facts.supersolution_ok {
        // No admissible obstacle at this coupling: report the failed
        // certificate instead of descending against a broken constraint.
        let checks = vec![Check::flag("supersolution_holds", false)];
        let mut text = report::barrier_report(config, session.lambda, &facts);
        text.push('\n');
        text.push_str("[certificates]\n");
        text.push_str(&check_table(&checks));
        emit(session, "report.txt", &text)?;
        return Ok(false);
    }

    let sc = &config.solver;
    let coarse = minimize_constrained(
        bg,
        &params,
        &session.barrier,
        None,
        Functional::Full,
        sc.descent_tol,
        sc.max_iter,
    )?;
    // The configured Newton tolerance is clamped to the spectral rounding
    // floor of the biharmonic term, which no iteration can beat.
    let newton_tol = sc.newton_tol.max(floor_tolerance(config.n, eps));
    let u1 = newton_refine(
        &coarse.u,
        bg,
        &params,
        Functional::Full,
        Some(&session.barrier),
        newton_tol,
        60,
    )?;
    let u2 = mountain_pass(&u1.u, bg, &params, sc.descent_tol, sc.path_nodes)?;

    let v1 = recover_v(&u1.u, bg, &params)?;
    let v2 = recover_v(&u2.u, bg, &params)?;
    let sys1 = residual_system(&u1.u, &v1, bg, &params)?;
    let sys2 = residual_system(&u2.u, &v2, bg, &params)?;
    let gap = (&u2.u - &u1.u).linf_norm();

    dump(session, "u1.bin", "u1", &u1.u)?;
    dump(session, "u2.bin", "u2", &u2.u)?;
    dump(session, "v1.bin", "v1", &v1)?;
    dump(session, "v2.bin", "v2", &v2)?;

    let checks = vec![
        Check::flag("supersolution_holds", facts.supersolution_ok),
        Check::flag("u1_converged", u1.converged),
        Check::flag("u2_converged", u2.converged),
        Check::upper("u1_residual_masked_l2", u1.residuals.masked_l2, 1e-6),
        Check::upper("u2_residual_masked_l2", u2.residuals.masked_l2, 1e-6),
        Check::lower("separation_sup_gap", gap, 1e-3),
        Check::lower("energy_order_i2_minus_i1", u2.energy.total - u1.energy.total, 0.0),
        Check::lower("u1_constraint_margin", u1.constraint_margin, 0.0),
        Check::flag("u1_obstacle_inactive", !u1.obstacle_active),
        Check::flag("u2_not_degenerate", !u2.degenerate),
        Check::upper("u1_system_r1_rel", sys1.r1_relative(), 1e-5),
        Check::upper("u1_system_r2_rel", sys1.r2_relative(), 1e-5),
        Check::upper("u2_system_r1_rel", sys2.r1_relative(), 1e-5),
        Check::upper("u2_system_r2_rel", sys2.r2_relative(), 1e-5),
    ];
    let text = report::solve_report(
        config,
        session.lambda,
        &facts,
        &u1,
        &u2,
        &sys1,
        &sys2,
        gap,
        &checks,
    );
    emit(session, "report.txt", &text)?;
    Ok(all_pass(&checks))
}

fn cmd_sweep(session: &Session) -> Result<bool> {
    let config = &session.config;
    let ladder: Vec<f64> = match &config.eps {
        EpsSpec::Ladder(v) => v.clone(),
        EpsSpec::One(_) => DEFAULT_LADDER.to_vec(),
    };
    let params = ModelParams::new(session.lambda, ladder[0], config.s, config.profile()?)?;

    let (facts, _) = barrier_facts(session)?;
    if !facts.supersolution_ok {
        let checks = vec![Check::flag("supersolution_holds", false)];
        let mut text = report::barrier_report(config, session.lambda, &facts);
        text.push('\n');
        text.push_str("[certificates]\n");
        text.push_str(&check_table(&checks));
        emit(session, "sweep.txt", &text)?;
        return Ok(false);
    }

    let sc = &config.solver;
    let table = continue_in_eps(
        &session.bg,
        &params,
        &session.barrier,
        &ladder,
        sc.descent_tol,
        sc.max_iter,
    )?;
    fs::write(session.out_dir.join("sweep.csv"), report::sweep_csv(&table))?;

    let flux_gap = identity_checks(&table.u0.u, &session.bg, &params)?.flux_gap;
    let checks = vec![
        Check::flag("supersolution_holds", facts.supersolution_ok),
        Check::flag("ladder_complete", !table.failed),
        Check::flag("limit_converged", table.u0.converged),
        Check::lower("limit_constraint_margin", table.u0.constraint_margin, 0.0),
        Check::flag("limit_obstacle_inactive", !table.u0.obstacle_active),
        Check::flag("columns_weakly_decreasing", table.monotone_ok(0.10)),
        Check::flag("energy_gaps_shrink", table.gaps_shrink()),
        Check::upper("flux_identity_gap", flux_gap, 1e-4),
    ];
    let text = report::sweep_report(config, session.lambda, &facts, &table, &checks);
    emit(session, "sweep.txt", &text)?;
    Ok(all_pass(&checks))
}

/// Randomized check suites: screened-resolvent bounds on band-limited
/// fields, Gâteaux derivatives against Richardson central differences, and
/// the analytic identities on smooth fields over a vortex-free background.
fn cmd_verify(session: &Session) -> Result<bool> {
    let config = &session.config;
    let grid = session.bg.grid();
    let profile = config.profile()?;
    let params = ModelParams::new(session.lambda, smallest_eps(config), config.s, profile)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks: Vec<Check> = Vec::new();

    // Screened resolvent G_ε = (−ε²Δ + 1)⁻¹: every Lᵠ norm contracts, and
    // G_ε h − h = ε²·G_ε(Δh) keeps the approximation ratio at most one.
    let qs = [1.0, 2.0, f64::INFINITY];
    for eps in [1.0, 0.1, 0.01] {
        let mut worst_contraction = [0.0_f64; 3];
        let mut worst_approx = [0.0_f64; 3];
        for _ in 0..100 {
            let mut h = band_limited_noise(grid, 8, &mut rng);
            h.add_scalar_in_place(rng.gen_range(-0.5..0.5));
            let gh = helmholtz_inverse(&h, eps)?;
            let diff = &gh - &h;
            let lap = laplacian(&h);
            for (j, &q) in qs.iter().enumerate() {
                let hq = h.lq_norm(q).max(f64::MIN_POSITIVE);
                let lq = lap.lq_norm(q).max(f64::MIN_POSITIVE);
                worst_contraction[j] = worst_contraction[j].max(gh.lq_norm(q) / hq);
                worst_approx[j] = worst_approx[j].max(diff.lq_norm(q) / (eps * eps * lq));
            }
        }
        for (j, &q) in qs.iter().enumerate() {
            let qn = if q.is_finite() {
                format!("{}", q as u32)
            } else {
                "inf".into()
            };
            checks.push(Check::upper(
                format!("green_contraction_q{qn}_eps{eps}"),
                worst_contraction[j],
                1.0 + 1e-12,
            ));
            checks.push(Check::upper(
                format!("green_approx_q{qn}_eps{eps}"),
                worst_approx[j],
                1.0 + 1e-10,
            ));
        }
    }

    // Gâteaux derivative of both functionals against Richardson-extrapolated
    // central differences on the configured vortex background.
    let mut worst_full = 0.0_f64;
    let mut worst_limit = 0.0_f64;
    for _ in 0..20 {
        let mut u = band_limited_noise(grid, 8, &mut rng);
        u.scale_in_place(1.1);
        let phi = band_limited_noise(grid, 8, &mut rng);

        let lhs = grad_i_eps(&u, &session.bg, &params)?.dot(&phi);
        let rhs = directional_fd(
            |v| Ok(eval_i_eps(v, &session.bg, &params)?.total),
            &u,
            &phi,
            1e-4,
        )?;
        worst_full = worst_full.max((lhs - rhs).abs() / rhs.abs().max(1e-12));

        let lhs = grad_i0(&u, &session.bg, &params)?.dot(&phi);
        let rhs = directional_fd(|v| eval_i0(v, &session.bg, &params), &u, &phi, 1e-4)?;
        worst_limit = worst_limit.max((lhs - rhs).abs() / rhs.abs().max(1e-12));
    }
    checks.push(Check::upper("gradient_fd_rel_full", worst_full, 1e-6));
    checks.push(Check::upper("gradient_fd_rel_limit", worst_limit, 1e-6));

    // Analytic identities on smooth fields: vortex-free background, so the
    // composites are fully resolved and the masked norms are global.
    let smooth_bg = Background::vortex_free(grid);
    let mut worst_chain = 0.0_f64;
    let mut worst_parts = 0.0_f64;
    for _ in 0..20 {
        let mut u = band_limited_noise(grid, 2, &mut rng);
        u.scale_in_place(0.5);
        let report = identity_checks(&u, &smooth_bg, &params)?;
        worst_chain = worst_chain.max(report.chain_rel);
        worst_parts = worst_parts.max(report.parts_rel);
    }
    checks.push(Check::upper("identity_chain_rel_smooth", worst_chain, 1e-6));
    checks.push(Check::upper("identity_parts_rel_smooth", worst_parts, 1e-6));

    let text = check_table(&checks);
    emit(session, "verify.txt", &text)?;
    Ok(all_pass(&checks))
}

/// Richardson-extrapolated central difference of t ↦ I(u + tφ) at t = 0.
fn directional_fd(
    mut energy: impl FnMut(&RealField) -> Result<f64>,
    u: &RealField,
    phi: &RealField,
    h: f64,
) -> Result<f64> {
    let mut at = |t: f64| -> Result<f64> {
        let mut v = u.clone();
        v.axpy(t, phi);
        energy(&v)
    };
    let d1 = (at(h)? - at(-h)?) / (2.0 * h);
    let d2 = (at(0.5 * h)? - at(-0.5 * h)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}
