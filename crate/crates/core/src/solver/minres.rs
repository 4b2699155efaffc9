//! Preconditioned MINRES for symmetric (possibly indefinite) operators.
//!
//! Newton steps for the fourth-order equation need a Krylov method that
//! tolerates the indefinite Jacobians that show up along the mountain-pass
//! deformation; MINRES with a symmetric positive preconditioner is the
//! standard choice. The implementation is the Paige–Saunders recurrence
//! with the residual tracked in the preconditioned norm.

use crate::grid::RealField;

/// Outcome of a MINRES solve: solution estimate, relative residual in the
/// preconditioned norm, and the number of iterations performed.
pub struct KrylovResult {
    pub x: RealField,
    pub rel_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solve A x = b for a symmetric operator `apply_a`, preconditioned by the
/// symmetric positive definite `apply_minv` (an approximation of A⁻¹).
/// Stops when the preconditioned residual norm drops below `tol` relative
/// to its initial value, or after `max_iter` iterations.
pub fn minres(
    apply_a: impl Fn(&RealField) -> RealField,
    apply_minv: impl Fn(&RealField) -> RealField,
    b: &RealField,
    tol: f64,
    max_iter: usize,
) -> KrylovResult {
    let grid = b.grid();
    let mut x = RealField::zeros(grid);

    // r1, r2 track the two most recent unpreconditioned Lanczos residuals.
    let mut r1 = b.clone();
    let mut y = apply_minv(&r1);
    let beta1 = r1.dot(&y);
    if beta1 <= 0.0 {
        // b = 0 (or a broken preconditioner): x = 0 is the answer.
        return KrylovResult {
            x,
            rel_residual: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let beta1 = beta1.sqrt();

    let mut r2 = r1.clone();
    let mut oldb = 0.0_f64;
    let mut beta = beta1;
    let mut dbar = 0.0_f64;
    let mut epsln = 0.0_f64;
    let mut phibar = beta1;
    let mut cs = -1.0_f64;
    let mut sn = 0.0_f64;
    let mut w = RealField::zeros(grid);
    let mut w2 = RealField::zeros(grid);

    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iter {
        iterations += 1;
        // Lanczos step.
        let s = 1.0 / beta;
        let v = y.map(|t| t * s);
        y = apply_a(&v);
        if iterations >= 2 {
            y.axpy(-beta / oldb, &r1);
        }
        let alfa = v.dot(&y);
        y.axpy(-alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y);
        y = apply_minv(&r2);
        oldb = beta;
        let beta_sq = r2.dot(&y);
        // A loss of positivity here signals round-off exhaustion; stop
        // with the current iterate rather than emit NaNs.
        if beta_sq < 0.0 {
            break;
        }
        beta = beta_sq.sqrt();

        // Update the QR factorization of the tridiagonal system.
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // Update the solution.
        let w1 = w2;
        w2 = w;
        w = v;
        w.axpy(-oldeps, &w1);
        w.axpy(-delta, &w2);
        w.scale_in_place(1.0 / gamma);
        x.axpy(phi, &w);

        if phibar <= tol * beta1 {
            converged = true;
            break;
        }
    }

    KrylovResult {
        x,
        rel_residual: phibar / beta1,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{band_limited_noise, Grid};
    use crate::operators::{laplacian, precond_inverse};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise(grid: &Grid, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        band_limited_noise(grid, 10, &mut rng)
    }

    /// Direct spectral solve of (−Δ + c) x = b (c ≠ any −4π²|k|² gap).
    fn shifted_solve(b: &RealField, c: f64) -> RealField {
        let mut spec = b.spectrum();
        let n = b.grid().n();
        let coef = spec.coef_mut();
        for k2 in 0..n {
            for k1 in 0..n {
                let f1 = crate::grid::bin_to_freq(k1, n) as f64;
                let f2 = crate::grid::bin_to_freq(k2, n) as f64;
                let sym = 4.0 * std::f64::consts::PI * std::f64::consts::PI
                    * (f1 * f1 + f2 * f2)
                    + c;
                coef[k2 * n + k1] /= sym;
            }
        }
        spec.inverse()
    }

    #[test]
    fn spd_solve_matches_direct_inverse() {
        let grid = Grid::new(64).unwrap();
        let b = noise(&grid, 1);
        let apply = |u: &RealField| {
            let mut a = laplacian(u).map(|v| -v);
            a.axpy(1.0, u);
            a
        };
        let res = minres(apply, |r| precond_inverse(r, 0.0, 1.0), &b, 1e-12, 50);
        assert!(res.converged);
        // Exact preconditioner: one or two iterations suffice.
        assert!(res.iterations <= 2, "iterations {}", res.iterations);
        let exact = shifted_solve(&b, 1.0);
        let err = (&res.x - &exact).l2_norm() / exact.l2_norm();
        assert!(err < 1e-10, "rel err {err:e}");
    }

    #[test]
    fn spd_solve_with_weak_preconditioner() {
        // Identity preconditioner: plain MINRES still converges.
        let grid = Grid::new(32).unwrap();
        let b = noise(&grid, 2);
        let apply = |u: &RealField| {
            let mut a = laplacian(u).map(|v| -v);
            a.axpy(5.0, u);
            a
        };
        let res = minres(apply, |r| r.clone(), &b, 1e-10, 400);
        assert!(res.converged, "rel residual {:e}", res.rel_residual);
        let exact = shifted_solve(&b, 5.0);
        let err = (&res.x - &exact).l2_norm() / exact.l2_norm();
        assert!(err < 1e-8, "rel err {err:e}");
    }

    #[test]
    fn indefinite_solve_converges() {
        // A = −Δ − 50: eigenvalues 4π²|k|² − 50 straddle zero, so the
        // operator is symmetric indefinite but invertible.
        let grid = Grid::new(32).unwrap();
        let b = noise(&grid, 3);
        let shift = -50.0;
        let apply = |u: &RealField| {
            let mut a = laplacian(u).map(|v| -v);
            a.axpy(shift, u);
            a
        };
        let res = minres(
            apply,
            |r| precond_inverse(r, 0.0, 1.0),
            &b,
            1e-11,
            2000,
        );
        assert!(res.converged, "rel residual {:e}", res.rel_residual);
        let exact = shifted_solve(&b, shift);
        let err = (&res.x - &exact).l2_norm() / exact.l2_norm();
        assert!(err < 1e-8, "rel err {err:e}");
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let grid = Grid::new(16).unwrap();
        let b = RealField::zeros(&grid);
        let res = minres(|u| u.clone(), |r| r.clone(), &b, 1e-12, 10);
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.x.l2_norm(), 0.0);
    }
}
