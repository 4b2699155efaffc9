//! Numerical mountain pass: deform a path from the constrained minimum to
//! a lower-energy constant until its maximum-energy node settles on a
//! saddle, then polish that node with Newton. Single-node steepest-descent
//! deformation with periodic arclength redistribution.

use crate::background::Background;
use crate::energy::{build_state, eval_i_eps};
use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::operators::precond_inverse;
use crate::profile::ModelParams;
use crate::solver::newton::newton_refine;
use crate::solver::{Functional, SolveReport, ARMIJO, ETA_STALL};

/// Outer deformation iteration cap (per attempt).
const MAX_OUTER: usize = 20_000;
/// Redistribute the path nodes every this many outer iterations.
const REDISTRIBUTE_EVERY: usize = 10;
/// Minimal ∞-norm separation from the minimizer for a valid second point.
const GAP_MIN: f64 = 1e-3;
/// Hand the candidate to Newton once the pass level has gone this many
/// outer iterations without a relative improvement of 1e−4.
const STALL_WINDOW: usize = 300;

struct PathNode {
    u: RealField,
    energy: f64,
}

enum Deformed {
    /// Max node's preconditioned gradient reached the tolerance.
    Converged(RealField),
    /// The path maximum stopped descending: at a finite resolution the
    /// sampled max hovers one node-spacing off the saddle, so a level
    /// stall is the designed hand-off point to the Newton polish.
    LevelStalled(RealField),
    /// Path max collapsed onto the minimizer before converging.
    Collapsed,
    /// Iteration budget exhausted; best node returned.
    Exhausted(RealField),
}

/// Energy of the constant field c·1.
fn constant_energy(c: f64, bg: &Background, params: &ModelParams) -> Result<f64> {
    let field = RealField::constant(bg.grid(), c);
    Ok(eval_i_eps(&field, bg, params)?.total)
}

/// Norm induced by the descent preconditioner ε²Δ² − Δ + 1 (the
/// linearization's energy metric); used for arclength redistribution.
fn metric_norm(v: &RealField, eps: f64) -> f64 {
    let spec = v.spectrum();
    let lap = spec.laplacian().inverse();
    let (gx, gy) = spec.gradient();
    let px = gx.inverse();
    let py = gy.inverse();
    (eps * eps * lap.dot(&lap) + px.dot(&px) + py.dot(&py) + v.dot(v))
        .max(0.0)
        .sqrt()
}

fn rebuild_energies(
    nodes: &mut [PathNode],
    bg: &Background,
    params: &ModelParams,
) -> Result<()> {
    for node in nodes.iter_mut() {
        node.energy = eval_i_eps(&node.u, bg, params)?.total;
    }
    Ok(())
}

/// Interior index of the maximum-energy node.
fn interior_max(nodes: &[PathNode]) -> usize {
    let mut jmax = 1;
    for j in 1..nodes.len() - 1 {
        if nodes[j].energy > nodes[jmax].energy {
            jmax = j;
        }
    }
    jmax
}

/// Resample the polyline `nodes[lo..=hi]` at uniform arclength in the
/// path metric, keeping both end vertices. Interior samples are chord
/// interpolants of the current polyline.
fn resample_span(nodes: &mut [PathNode], lo: usize, hi: usize, eps: f64) {
    if hi <= lo + 1 {
        return;
    }
    let m = hi - lo;
    let mut cum = vec![0.0_f64; m + 1];
    for j in 1..=m {
        let d = &nodes[lo + j].u - &nodes[lo + j - 1].u;
        cum[j] = cum[j - 1] + metric_norm(&d, eps);
    }
    let total = cum[m];
    if total <= 0.0 {
        return;
    }
    let mut fresh: Vec<RealField> = Vec::with_capacity(m - 1);
    let mut seg = 0_usize;
    for j in 1..m {
        let target = total * j as f64 / m as f64;
        while seg + 1 < m && cum[seg + 1] < target {
            seg += 1;
        }
        let span = (cum[seg + 1] - cum[seg]).max(f64::MIN_POSITIVE);
        let theta = ((target - cum[seg]) / span).clamp(0.0, 1.0);
        let mut u = nodes[lo + seg].u.clone();
        let step = &nodes[lo + seg + 1].u - &nodes[lo + seg].u;
        u.axpy(theta, &step);
        fresh.push(u);
    }
    for (j, u) in fresh.into_iter().enumerate() {
        nodes[lo + 1 + j] = PathNode { u, energy: 0.0 };
    }
}

/// Re-spline the path by arclength. When `pin` names an interior vertex
/// (the current max node) it is kept as a knot and the two sides are
/// resampled separately, so redistribution cannot undo the descent
/// progress stored in that vertex; `pin = None` resamples the whole
/// polyline (used to repair a tunnelled path).
fn redistribute(
    nodes: &mut [PathNode],
    pin: Option<usize>,
    bg: &Background,
    params: &ModelParams,
) -> Result<()> {
    let p = nodes.len();
    let eps = params.eps;
    match pin {
        Some(j) if j > 0 && j < p - 1 => {
            resample_span(nodes, 0, j, eps);
            resample_span(nodes, j, p - 1, eps);
        }
        _ => resample_span(nodes, 0, p - 1, eps),
    }
    rebuild_energies(&mut nodes[1..p - 1], bg, params)?;
    Ok(())
}

/// One deformation attempt at path resolution `p`.
#[allow(clippy::too_many_arguments)]
fn deform(
    u_min: &RealField,
    e_min: f64,
    c_star: f64,
    bg: &Background,
    params: &ModelParams,
    tol: f64,
    p: usize,
    trace: &mut Vec<(f64, f64)>,
) -> Result<Deformed> {
    let mut nodes: Vec<PathNode> = Vec::with_capacity(p);
    for j in 0..p {
        let t = j as f64 / (p - 1) as f64;
        let mut u = u_min.map(|v| (1.0 - t) * v);
        u.add_scalar_in_place(t * c_star);
        nodes.push(PathNode { u, energy: 0.0 });
    }
    rebuild_energies(&mut nodes, bg, params)?;
    debug_assert!((nodes[0].energy - e_min).abs() < 1e-9 * (1.0 + e_min.abs()));

    // The sampled maximum never needs to descend below the endpoint
    // energies — the pass level sits above the starting minimum — so any
    // step landing under this floor is overshoot into the unbounded
    // downhill region beyond the ridge and is rejected.
    let e_floor = nodes[0].energy.max(nodes[p - 1].energy);

    let mut eta = 1.0_f64;
    let mut repairs = 0_u8;
    // Champion: the sampled max with the smallest preconditioned-gradient
    // measure seen so far. Saturated nodes in the downhill plain beyond
    // the ridge have measure pinned near the constant-forcing norm, while
    // nodes approaching the saddle drive it toward zero, so the champion
    // tracks the best saddle candidate through resampling churn.
    let mut champion: Option<(f64, RealField)> = None;
    let mut no_improve = 0_usize;
    let mut outer = 0_usize;
    while outer < MAX_OUTER {
        let jmax = interior_max(&nodes);
        let e_max = nodes[jmax].energy;
        let e_ends = nodes[0].energy.max(nodes[p - 1].energy);
        if e_max < e_ends {
            // Every interior node fell below an endpoint: the polyline has
            // tunnelled under the ridge inside one segment. Re-splining by
            // arclength puts interior nodes back onto that segment, which
            // restores a genuine sampled maximum.
            if repairs >= 2 {
                return Ok(Deformed::Exhausted(nodes[jmax].u.clone()));
            }
            redistribute(&mut nodes, None, bg, params)?;
            repairs += 1;
            eta = 1.0;
            outer += 1;
            continue;
        }
        repairs = 0;
        let st = build_state(&nodes[jmax].u, bg, params.profile)?;
        let g = Functional::Full.gradient_at(&st, &nodes[jmax].u, bg, params);
        let pg = precond_inverse(&g, params.eps, 1.0);
        let measure = pg.l2_norm();
        trace.push((e_max, measure));
        if measure <= tol {
            return Ok(Deformed::Converged(nodes[jmax].u.clone()));
        }
        let gap = (&nodes[jmax].u - u_min).linf_norm();
        if gap < GAP_MIN {
            return Ok(Deformed::Collapsed);
        }

        // Champion update and stall detector: at resolution P the sampled
        // max cannot sit exactly on the saddle, so once the best measure
        // stops improving the remaining error is a discretization artifact
        // and the champion is handed to the Newton polish.
        let improved = match champion.as_ref() {
            Some((best, _)) => measure < 0.999 * best,
            None => true,
        };
        if improved && e_max >= e_ends {
            champion = Some((measure, nodes[jmax].u.clone()));
            no_improve = 0;
        } else {
            no_improve += 1;
            if no_improve >= STALL_WINDOW {
                if let Some((_, u)) = champion {
                    return Ok(Deformed::LevelStalled(u));
                }
                return Ok(Deformed::Exhausted(nodes[jmax].u.clone()));
            }
        }

        // Locality cap: one step may not carry the node farther (in the
        // path metric) than half the distance to its nearer neighbour,
        // so a single line search can neither tunnel past the ridge nor
        // ride the unbounded constant direction out of the sampled path.
        let d_left = metric_norm(&(&nodes[jmax].u - &nodes[jmax - 1].u), params.eps);
        let d_right = metric_norm(&(&nodes[jmax + 1].u - &nodes[jmax].u), params.eps);
        let pg_len = metric_norm(&pg, params.eps);
        let eta_cap = 0.5 * d_left.min(d_right) / pg_len.max(f64::MIN_POSITIVE);

        // Backtracking descent step on the max node only, kept above the
        // endpoint-energy floor.
        let mut eta_try = eta.min(eta_cap);
        let mut accepted = false;
        while eta_try >= ETA_STALL {
            let mut trial = nodes[jmax].u.clone();
            trial.axpy(-eta_try, &pg);
            let e_t = eval_i_eps(&trial, bg, params)?.total;
            let slope = -eta_try * g.dot(&pg);
            if slope <= 0.0 && e_t <= e_max + ARMIJO * slope && e_t >= e_floor {
                nodes[jmax] = PathNode {
                    u: trial,
                    energy: e_t,
                };
                accepted = true;
                break;
            }
            eta_try *= 0.5;
        }
        if !accepted {
            // The max node cannot descend further in this metric; treat
            // as converged-at-stall and let Newton decide.
            return Ok(Deformed::LevelStalled(nodes[jmax].u.clone()));
        }
        eta = (eta_try * 2.0).min(1e3);
        outer += 1;

        if outer % REDISTRIBUTE_EVERY == 0 {
            // Chord interpolants can land above the current ridge samples
            // (the initial chord maximum is exactly such a point), which
            // would break the non-increasing pass level; revert when the
            // resample raises the sampled maximum.
            let snapshot: Vec<PathNode> = nodes
                .iter()
                .map(|n| PathNode {
                    u: n.u.clone(),
                    energy: n.energy,
                })
                .collect();
            let old_max = nodes[interior_max(&nodes)].energy;
            redistribute(&mut nodes, Some(jmax), bg, params)?;
            if nodes[interior_max(&nodes)].energy > old_max {
                nodes = snapshot;
            }
        }
    }
    if let Some((_, u)) = champion {
        return Ok(Deformed::Exhausted(u));
    }
    let jmax = interior_max(&nodes);
    Ok(Deformed::Exhausted(nodes[jmax].u.clone()))
}

/// Find a second critical point above the constrained minimizer `u_min`
/// by the mountain-pass deformation, then polish it with Newton. The
/// report's `degenerate` flag is set when the output fails the separation
/// or energy-ordering checks instead of forcing them.
pub fn mountain_pass(
    u_min: &RealField,
    bg: &Background,
    params: &ModelParams,
    tol: f64,
    p: usize,
) -> Result<SolveReport> {
    if p < 5 {
        return Err(Error::InvalidParameter(format!(
            "mountain-pass path needs at least 5 nodes, got {p}"
        )));
    }
    let e_min = eval_i_eps(u_min, bg, params)?.total;

    // Far endpoint: double c until the constant field drops well below
    // the minimum (the energy is unbounded below along constants).
    let mut c_star = 1.0_f64;
    while constant_energy(c_star, bg, params)? >= e_min - 1.0 {
        c_star *= 2.0;
        if c_star > 1e18 {
            return Err(Error::AssumptionViolation(
                "no low-energy constant endpoint found: the energy does not \
                 descend along constants (is m > n?)"
                    .into(),
            ));
        }
    }

    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut outcome = deform(u_min, e_min, c_star, bg, params, tol, p, &mut trace)?;
    if matches!(outcome, Deformed::Collapsed) {
        // One retry at doubled resolution.
        trace.clear();
        outcome = deform(
            u_min,
            e_min,
            c_star,
            bg,
            params,
            tol,
            2 * p - 1,
            &mut trace,
        )?;
    }

    let (candidate, descent_ok) = match outcome {
        Deformed::Converged(u) | Deformed::LevelStalled(u) => (u, true),
        Deformed::Exhausted(u) => (u, false),
        Deformed::Collapsed => {
            let mut report = SolveReport::new(
                u_min.clone(),
                bg,
                params,
                Functional::Full,
                f64::INFINITY,
                0,
                false,
                true,
                None,
                trace,
            )?;
            report.degenerate = true;
            return Ok(report);
        }
    };

    // The saddle's spectral rounding floor scales with its field size, so
    // the polish targets a residual band safely above it; the report's
    // residuals record what was actually achieved.
    let polish = newton_refine(&candidate, bg, params, Functional::Full, None, 1e-9, 60)?;
    let mut report = SolveReport::new(
        polish.u,
        bg,
        params,
        Functional::Full,
        polish.measure,
        polish.iterations,
        polish.converged && descent_ok,
        false,
        None,
        trace,
    )?;
    let gap = (&report.u - u_min).linf_norm();
    if gap <= GAP_MIN || report.energy.total <= e_min {
        report.degenerate = true;
    }
    Ok(report)
}
