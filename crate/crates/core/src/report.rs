//! Deterministic run reports: fixed field order, 17-significant-digit
//! floats, no timestamps — identical runs produce identical bytes.

use std::fmt::Write as _;

use mcs_vortex::energy::SystemResiduals;
use mcs_vortex::solver::{ContinuationTable, SolveReport};

use crate::config::RunConfig;

/// All floating output uses 17 significant digits.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One certificate or verification row.
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// value must not exceed tolerance.
    pub fn upper(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// value must be at least tolerance.
    pub fn lower(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }

    /// Boolean certificate (value 1 = holds).
    pub fn flag(name: impl Into<String>, holds: bool) -> Check {
        Check {
            name: name.into(),
            value: if holds { 1.0 } else { 0.0 },
            tolerance: 1.0,
            pass: holds,
        }
    }
}

/// One check per line: name, value, tolerance, pass/fail.
pub fn check_table(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        let _ = writeln!(
            out,
            "{:<40} {:>24} {:>24} {}",
            c.name,
            f17(c.value),
            f17(c.tolerance),
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    out
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

fn push_params(out: &mut String, config: &RunConfig, lambda: f64, lambda0: f64) {
    let _ = writeln!(out, "[parameters]");
    let _ = writeln!(out, "n = {}", config.n);
    let _ = writeln!(out, "profile = {}", config.profile);
    let _ = writeln!(out, "s = {}", f17(config.s));
    let _ = writeln!(out, "lambda = {}", f17(lambda));
    let _ = writeln!(out, "lambda0 = {}", f17(lambda0));
    let _ = writeln!(out, "seed = {}", config.seed);
    let _ = writeln!(out, "m = {}", config.vortices.positives.len());
    let _ = writeln!(out, "n_negative = {}", config.vortices.negatives.len());
    let _ = writeln!(out, "descent_tol = {}", f17(config.solver.descent_tol));
    let _ = writeln!(out, "newton_tol = {}", f17(config.solver.newton_tol));
    let _ = writeln!(out, "max_iter = {}", config.solver.max_iter);
    let _ = writeln!(out, "path_nodes = {}", config.solver.path_nodes);
}

fn push_solution(out: &mut String, tag: &str, rep: &SolveReport) {
    let _ = writeln!(out, "[solution.{tag}]");
    let _ = writeln!(out, "energy_total = {}", f17(rep.energy.total));
    let _ = writeln!(out, "energy_biharmonic = {}", f17(rep.energy.biharmonic));
    let _ = writeln!(out, "energy_dirichlet = {}", f17(rep.energy.dirichlet));
    let _ = writeln!(out, "energy_mixed = {}", f17(rep.energy.mixed));
    let _ = writeln!(out, "energy_potential = {}", f17(rep.energy.potential));
    let _ = writeln!(out, "energy_linear = {}", f17(rep.energy.linear));
    let _ = writeln!(out, "grad_norm = {}", f17(rep.grad_norm));
    let _ = writeln!(out, "measure = {}", f17(rep.measure));
    let _ = writeln!(out, "residual_global_l2 = {}", f17(rep.residuals.global_l2));
    let _ = writeln!(out, "residual_masked_l2 = {}", f17(rep.residuals.masked_l2));
    let _ = writeln!(out, "residual_masked_linf = {}", f17(rep.residuals.linf_masked));
    let _ = writeln!(out, "constraint_margin = {}", f17(rep.constraint_margin));
    let _ = writeln!(out, "iterations = {}", rep.iterations);
    let _ = writeln!(out, "converged = {}", rep.converged);
    let _ = writeln!(out, "obstacle_active = {}", rep.obstacle_active);
    let _ = writeln!(out, "stalled = {}", rep.stalled);
    let _ = writeln!(out, "degenerate = {}", rep.degenerate);
}

pub struct BarrierFacts {
    pub rho: f64,
    pub c_bar: f64,
    pub c0: f64,
    pub lambda0: f64,
    pub margin_min: f64,
    pub supersolution_ok: bool,
}

fn push_barrier(out: &mut String, facts: &BarrierFacts) {
    let _ = writeln!(out, "[barrier]");
    let _ = writeln!(out, "rho = {}", f17(facts.rho));
    let _ = writeln!(out, "c_bar = {}", f17(facts.c_bar));
    let _ = writeln!(out, "c0 = {}", f17(facts.c0));
    let _ = writeln!(out, "lambda0 = {}", f17(facts.lambda0));
    let _ = writeln!(out, "margin_min = {}", f17(facts.margin_min));
    let _ = writeln!(out, "supersolution = {}", facts.supersolution_ok);
}

#[allow(clippy::too_many_arguments)]
pub fn solve_report(
    config: &RunConfig,
    lambda: f64,
    barrier: &BarrierFacts,
    u1: &SolveReport,
    u2: &SolveReport,
    sys1: &SystemResiduals,
    sys2: &SystemResiduals,
    gap: f64,
    checks: &[Check],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# solve report");
    let _ = writeln!(out);
    push_params(&mut out, config, lambda, barrier.lambda0);
    let _ = writeln!(out);
    push_barrier(&mut out, barrier);
    let _ = writeln!(out);
    push_solution(&mut out, "u1", u1);
    let _ = writeln!(out);
    push_solution(&mut out, "u2", u2);
    let _ = writeln!(out);
    let _ = writeln!(out, "[system_residuals]");
    let _ = writeln!(out, "u1_r1_rel = {}", f17(sys1.r1_relative()));
    let _ = writeln!(out, "u1_r2_rel = {}", f17(sys1.r2_relative()));
    let _ = writeln!(out, "u2_r1_rel = {}", f17(sys2.r1_relative()));
    let _ = writeln!(out, "u2_r2_rel = {}", f17(sys2.r2_relative()));
    let _ = writeln!(out);
    let _ = writeln!(out, "[separation]");
    let _ = writeln!(out, "sup_gap = {}", f17(gap));
    let _ = writeln!(out, "energy_gap = {}", f17(u2.energy.total - u1.energy.total));
    let _ = writeln!(out);
    let _ = writeln!(out, "[certificates]");
    let _ = write!(out, "{}", check_table(checks));
    out
}

pub fn barrier_report(config: &RunConfig, lambda: f64, facts: &BarrierFacts) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# barrier report");
    let _ = writeln!(out);
    push_params(&mut out, config, lambda, facts.lambda0);
    let _ = writeln!(out);
    push_barrier(&mut out, facts);
    out
}

/// The ε-continuation table as CSV; one row per ladder rung.
pub fn sweep_csv(table: &ContinuationTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "eps,i_eps,eps_lap_l2,mixed,sup_dist_to_limit,i0_gap,converged,obstacle_active"
    );
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f17(r.eps),
            f17(r.i_eps),
            f17(r.eps_lap),
            f17(r.mixed),
            f17(r.sup_dist),
            f17(r.i0_gap),
            r.converged,
            r.obstacle_active
        );
    }
    out
}

pub fn sweep_report(
    config: &RunConfig,
    lambda: f64,
    facts: &BarrierFacts,
    table: &ContinuationTable,
    checks: &[Check],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sweep report");
    let _ = writeln!(out);
    push_params(&mut out, config, lambda, facts.lambda0);
    let _ = writeln!(out);
    push_barrier(&mut out, facts);
    let _ = writeln!(out);
    push_solution(&mut out, "u0", &table.u0);
    let _ = writeln!(out);
    let _ = writeln!(out, "[ladder]");
    let _ = writeln!(out, "rows = {}", table.rows.len());
    let _ = writeln!(out, "failed = {}", table.failed);
    match table.eps_lambda {
        Some(e) => {
            let _ = writeln!(out, "eps_lambda = {}", f17(e));
        }
        None => {
            let _ = writeln!(out, "eps_lambda = none");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[certificates]");
    let _ = write!(out, "{}", check_table(checks));
    out
}
