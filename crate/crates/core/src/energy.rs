//! The energy functionals, their gradients, strong-form residuals, the
//! two-field recovery, and the integral identities used as certificates.
//!
//! Full functional on H²:
//!
//!   I_ε(u) = ½ε²∫(Δu)² + ½∫|∇u|² + ελ∫F2(w)|∇w|²
//!            + ½λ²∫(F1(w)−s)² − A∫u,        w = σ + u,
//!
//! and its ε = 0 reduction I₀ (no biharmonic, no mixed term). Everything
//! is evaluated with the stable composites and the analytic ∇σ; the
//! distributional Δσ is replaced by its regular value A away from vortices
//! (the delta parts are annihilated by the vanishing of F2 at the vortex
//! points, which is why every formula below stays bounded).
//!
//! The L² gradient is returned in strong divergence form,
//!
//!   I_ε′(u) = ε²Δ²u − Δu + ελF3(w)|∇w|² − 2ελ∇·(F2(w)∇w)
//!             − λ²F2(w)(s−F1(w)) − A,
//!
//! which is simultaneously (i) the PDE residual of the fourth-order
//! equation and (ii) the exact derivative of the discrete energy for the
//! quadrature and spectral operators used here (the divergence is the
//! exact negative adjoint of the gradient), up to content in the Nyquist
//! modes, which all smooth fields carry only at rounding level.

use crate::background::Background;
use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::operators::{divergence, laplacian};
use crate::profile::{composites, Composites, ModelParams, Profile};

/// The five terms of I_ε. `total` is biharmonic + mixed + (the I₀ sum),
/// grouped so the ε-decomposition is exact in floating point.
#[derive(Clone, Copy, Debug)]
pub struct EnergyBreakdown {
    /// ½ε²∫(Δu)²
    pub biharmonic: f64,
    /// ½∫|∇u|²
    pub dirichlet: f64,
    /// ελ∫F2(w)|∇w|²
    pub mixed: f64,
    /// ½λ²∫(F1(w)−s)²
    pub potential: f64,
    /// −A∫u
    pub linear: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// The I₀ portion with the same floating-point grouping used by
    /// [`eval_i0`]: dirichlet + potential + linear.
    pub fn limit_part(&self) -> f64 {
        self.dirichlet + self.potential + self.linear
    }
}

/// Residual norms, globally and outside the vortex disks.
#[derive(Clone, Copy, Debug)]
pub struct ResidualReport {
    pub global_l2: f64,
    pub masked_l2: f64,
    pub linf_masked: f64,
    pub mean_residual: f64,
}

impl ResidualReport {
    /// Norms of a residual field; `mask` marks excluded (near-vortex) nodes.
    pub fn from_field(r: &RealField, mask: &[bool]) -> ResidualReport {
        assert_eq!(r.values().len(), mask.len(), "mask/field length mismatch");
        let h2 = r.grid().h() * r.grid().h();
        let mut sum_all = 0.0;
        let mut sum_masked = 0.0;
        let mut linf_masked = 0.0f64;
        let mut mean = 0.0;
        for (&v, &m) in r.values().iter().zip(mask) {
            sum_all += v * v;
            mean += v;
            if !m {
                sum_masked += v * v;
                linf_masked = linf_masked.max(v.abs());
            }
        }
        ResidualReport {
            global_l2: (h2 * sum_all).sqrt(),
            masked_l2: (h2 * sum_masked).sqrt(),
            linf_masked,
            mean_residual: h2 * mean,
        }
    }
}

/// Everything downstream formulas need at a state (u, background): w = σ+u,
/// its composites, the full gradient ∇w (analytic ∇σ + spectral ∇u), and
/// the spectral derivatives of u.
pub struct State {
    pub w: RealField,
    pub comps: Composites,
    /// ∇w = ∇u + ∇σ
    pub wx: RealField,
    pub wy: RealField,
    /// |∇w|²
    pub grad_w_sq: RealField,
    /// ∇u (spectral)
    pub ux: RealField,
    pub uy: RealField,
    pub lap_u: RealField,
}

pub fn build_state(u: &RealField, bg: &Background, profile: Profile) -> Result<State> {
    if u.grid() != bg.grid() {
        return Err(Error::GridMismatch {
            a: u.grid().n(),
            b: bg.grid().n(),
        });
    }
    if !u.is_finite() {
        return Err(Error::NonFinite {
            context: "state field u".into(),
        });
    }
    let w = u + bg.sigma();
    let comps = composites(profile, &w)?;
    let spec = u.spectrum();
    let (sx, sy) = spec.gradient();
    let ux = sx.inverse();
    let uy = sy.inverse();
    let lap_u = spec.laplacian().inverse();
    let (gsx, gsy) = bg.grad_sigma();
    let wx = &ux + gsx;
    let wy = &uy + gsy;
    let grad_w_sq = wx.zip_map(&wy, |a, b| a * a + b * b);
    Ok(State {
        w,
        comps,
        wx,
        wy,
        grad_w_sq,
        ux,
        uy,
        lap_u,
    })
}

/// Full energy I_ε(u).
pub fn eval_i_eps(u: &RealField, bg: &Background, params: &ModelParams) -> Result<EnergyBreakdown> {
    let st = build_state(u, bg, params.profile)?;
    Ok(eval_i_eps_at(&st, u, bg, params))
}

/// Energy from a prebuilt state (solver hot path).
pub fn eval_i_eps_at(
    st: &State,
    u: &RealField,
    bg: &Background,
    params: &ModelParams,
) -> EnergyBreakdown {
    let (dirichlet, mixed_integral, potential, linear) = core_terms(st, u, bg, params);
    let biharmonic = 0.5 * params.eps * params.eps * st.lap_u.dot(&st.lap_u);
    let mixed = params.eps * params.lambda * mixed_integral;
    let limit = dirichlet + potential + linear;
    EnergyBreakdown {
        biharmonic,
        dirichlet,
        mixed,
        potential,
        linear,
        total: biharmonic + mixed + limit,
    }
}

/// Limit energy I₀(u) = ½∫|∇u|² + ½λ²∫(F1−s)² − A∫u.
pub fn eval_i0(u: &RealField, bg: &Background, params: &ModelParams) -> Result<f64> {
    let st = build_state(u, bg, params.profile)?;
    Ok(eval_i0_at(&st, u, bg, params))
}

pub fn eval_i0_at(st: &State, u: &RealField, bg: &Background, params: &ModelParams) -> f64 {
    let (dirichlet, _, potential, linear) = core_terms(st, u, bg, params);
    dirichlet + potential + linear
}

/// (dirichlet, ∫F2|∇w|², potential, linear) with one fixed evaluation and
/// grouping order shared by I_ε and I₀.
fn core_terms(
    st: &State,
    u: &RealField,
    bg: &Background,
    params: &ModelParams,
) -> (f64, f64, f64, f64) {
    let dirichlet = 0.5 * (st.ux.dot(&st.ux) + st.uy.dot(&st.uy));
    let mixed_integral = st.comps.f2.dot(&st.grad_w_sq);
    let dev = st.comps.f1.map(|v| v - params.s);
    let potential = 0.5 * params.lambda * params.lambda * dev.dot(&dev);
    let linear = -bg.flux_constant() * u.integrate();
    (dirichlet, mixed_integral, potential, linear)
}

/// L² gradient of I_ε (strong form of the fourth-order equation).
pub fn grad_i_eps(u: &RealField, bg: &Background, params: &ModelParams) -> Result<RealField> {
    let st = build_state(u, bg, params.profile)?;
    Ok(grad_i_eps_at(&st, u, bg, params))
}

pub fn grad_i_eps_at(
    st: &State,
    u: &RealField,
    bg: &Background,
    params: &ModelParams,
) -> RealField {
    let eps = params.eps;
    let lambda = params.lambda;
    let spec = u.spectrum();
    let mut g = spec.bilaplacian().inverse();
    g.scale_in_place(eps * eps);
    g.axpy(-1.0, &st.lap_u);
    // ελ F3|∇w|²
    g.axpy(
        eps * lambda,
        &st.comps.f3.zip_map(&st.grad_w_sq, |a, b| a * b),
    );
    // −2ελ ∇·(F2 ∇w)
    let fx = st.comps.f2.zip_map(&st.wx, |a, b| a * b);
    let fy = st.comps.f2.zip_map(&st.wy, |a, b| a * b);
    g.axpy(-2.0 * eps * lambda, &divergence(&fx, &fy));
    // −λ² F2 (s − F1)  and the constant −A
    g.axpy(
        -lambda * lambda,
        &st.comps.f2.zip_map(&st.comps.f1, |f2, f1| f2 * (params.s - f1)),
    );
    g.add_scalar_in_place(-bg.flux_constant());
    g
}

/// L² gradient of I₀ (strong form of the limit equation).
pub fn grad_i0(u: &RealField, bg: &Background, params: &ModelParams) -> Result<RealField> {
    let st = build_state(u, bg, params.profile)?;
    Ok(grad_i0_at(&st, bg, params))
}

pub fn grad_i0_at(st: &State, bg: &Background, params: &ModelParams) -> RealField {
    let lambda = params.lambda;
    let mut g = st.lap_u.map(|v| -v);
    g.axpy(
        -lambda * lambda,
        &st.comps.f2.zip_map(&st.comps.f1, |f2, f1| f2 * (params.s - f1)),
    );
    g.add_scalar_in_place(-bg.flux_constant());
    g
}

/// Residual report of the fourth-order equation (the strong-form gradient).
pub fn residual_fourth(
    u: &RealField,
    bg: &Background,
    params: &ModelParams,
) -> Result<ResidualReport> {
    let r = grad_i_eps(u, bg, params)?;
    Ok(ResidualReport::from_field(&r, bg.mask()))
}

/// Residual report of the limit equation.
pub fn residual_limit(
    u: &RealField,
    bg: &Background,
    params: &ModelParams,
) -> Result<ResidualReport> {
    let r = grad_i0(u, bg, params)?;
    Ok(ResidualReport::from_field(&r, bg.mask()))
}

/// The second field of the system, recovered from u:
/// v = −(ε/λ)Δu − (ε/λ)A + F1(σ+u).
pub fn recover_v(u: &RealField, bg: &Background, params: &ModelParams) -> Result<RealField> {
    let st = build_state(u, bg, params.profile)?;
    Ok(recover_v_at(&st, bg, params))
}

pub fn recover_v_at(st: &State, bg: &Background, params: &ModelParams) -> RealField {
    let c = params.eps / params.lambda;
    let mut v = st.lap_u.map(|x| -c * x);
    v.add_scalar_in_place(-c * bg.flux_constant());
    v.add_in_place(&st.comps.f1);
    v
}

/// Residuals of the original two-field system, with the per-equation
/// normalization scale (largest masked-L² term magnitude) reported so the
/// caller can form relative residuals. `r2_cross_gap` is the masked-L∞
/// disagreement between the two algebraically equivalent forms of the
/// second equation — a pure rounding diagnostic.
#[derive(Clone, Copy, Debug)]
pub struct SystemResiduals {
    pub r1: ResidualReport,
    pub r2: ResidualReport,
    pub r1_scale: f64,
    pub r2_scale: f64,
    pub r2_cross_gap: f64,
}

impl SystemResiduals {
    pub fn r1_relative(&self) -> f64 {
        self.r1.masked_l2 / self.r1_scale.max(f64::MIN_POSITIVE)
    }

    pub fn r2_relative(&self) -> f64 {
        self.r2.masked_l2 / self.r2_scale.max(f64::MIN_POSITIVE)
    }
}

pub fn residual_system(
    u: &RealField,
    v: &RealField,
    bg: &Background,
    params: &ModelParams,
) -> Result<SystemResiduals> {
    let st = build_state(u, bg, params.profile)?;
    if v.grid() != bg.grid() {
        return Err(Error::GridMismatch {
            a: v.grid().n(),
            b: bg.grid().n(),
        });
    }
    let mask = bg.mask();
    let eps = params.eps;
    let lambda = params.lambda;
    let s = params.s;
    let a = bg.flux_constant();
    let masked_l2 = |f: &RealField| ResidualReport::from_field(f, mask).masked_l2;

    // r1 = −Δu − ε⁻¹λ(v − F1) − A
    let t1 = st.lap_u.map(|x| -x);
    let t2 = v.zip_map(&st.comps.f1, |vv, f1| -(lambda / eps) * (vv - f1));
    let r1_field = t1.zip_map(&t2, |a1, a2| a1 + a2).map(|x| x - a);
    let const_a = RealField::constant(u.grid(), a);
    let r1_scale = masked_l2(&t1)
        .max(masked_l2(&t2))
        .max(masked_l2(&const_a));
    let r1 = ResidualReport::from_field(&r1_field, mask);

    // r2 = −Δv − ε⁻¹[λF2(s−v) − ε⁻¹(v−F1)]
    let lap_v = laplacian(v);
    let t1 = lap_v.map(|x| -x);
    let t2 = st.comps.f2.zip_map(v, |f2, vv| -(lambda / eps) * f2 * (s - vv));
    let t3 = v.zip_map(&st.comps.f1, |vv, f1| (vv - f1) / (eps * eps));
    let mut r2_field = t1.clone();
    r2_field.add_in_place(&t2);
    r2_field.add_in_place(&t3);
    let r2_scale = masked_l2(&t1).max(masked_l2(&t2)).max(masked_l2(&t3));
    let r2 = ResidualReport::from_field(&r2_field, mask);

    // Cross-check form: −Δv + ε⁻²(1+ελF2)v − ε⁻²[F1 + ελF2·s]
    let e2 = eps * eps;
    let alt = {
        let mut f = lap_v.map(|x| -x);
        f.add_in_place(&st.comps.f2.zip_map(v, |f2, vv| (1.0 + eps * lambda * f2) * vv / e2));
        f.add_in_place(
            &st.comps
                .f1
                .zip_map(&st.comps.f2, |f1, f2| -(f1 + eps * lambda * f2 * s) / e2),
        );
        f
    };
    let r2_cross_gap = ResidualReport::from_field(
        &r2_field.zip_map(&alt, |x, y| x - y),
        mask,
    )
    .linf_masked;

    Ok(SystemResiduals {
        r1,
        r2,
        r1_scale,
        r2_scale,
        r2_cross_gap,
    })
}

/// Mismatches of the analytic identities behind the variational structure,
/// in masked norms (relative where a natural scale exists).
#[derive(Clone, Copy, Debug)]
pub struct IdentityReport {
    /// Masked-L² mismatch of ΔF1(w) = F3(w)|∇w|² + F2(w)(Δu + A).
    pub chain_abs: f64,
    /// The same, relative to the masked-L² size of ΔF1(w).
    pub chain_rel: f64,
    /// Integration-by-parts identity
    /// ∫F3|∇w|²u + ∫F2∇w·∇u + ∫F2(Δu+A)u = 0, relative to its largest term.
    pub parts_rel: f64,
    /// |∫F2(w)(F1(w)−s) − A/λ²| (exact at limit-equation solutions).
    pub flux_gap: f64,
}

pub fn identity_checks(
    u: &RealField,
    bg: &Background,
    params: &ModelParams,
) -> Result<IdentityReport> {
    let st = build_state(u, bg, params.profile)?;
    let a = bg.flux_constant();
    let mask = bg.mask();

    // (a) chain rule with the regular value of Δσ.
    let lhs = laplacian(&st.comps.f1);
    let rhs = &st.comps.f3.zip_map(&st.grad_w_sq, |x, y| x * y)
        + &st.comps.f2.zip_map(&st.lap_u, |f2, l| f2 * (l + a));
    let diff = &lhs - &rhs;
    let chain_abs = ResidualReport::from_field(&diff, mask).masked_l2;
    let lhs_norm = ResidualReport::from_field(&lhs, mask).masked_l2;
    let chain_rel = chain_abs / lhs_norm.max(f64::MIN_POSITIVE);

    // (b) integration by parts: t1 + t2 + t3 = 0.
    let t1 = st
        .comps
        .f3
        .zip_map(&st.grad_w_sq, |x, y| x * y)
        .zip_map(u, |x, y| x * y)
        .integrate();
    let grad_dot = st.wx.zip_map(&st.ux, |x, y| x * y);
    let grad_dot = grad_dot.zip_map(&st.wy.zip_map(&st.uy, |x, y| x * y), |p, q| p + q);
    let t2 = st.comps.f2.zip_map(&grad_dot, |x, y| x * y).integrate();
    let t3 = st
        .comps
        .f2
        .zip_map(&st.lap_u, |f2, l| f2 * (l + a))
        .zip_map(u, |x, y| x * y)
        .integrate();
    let parts_scale = t1.abs().max(t2.abs()).max(t3.abs());
    let parts_rel = (t1 + t2 + t3).abs() / parts_scale.max(f64::MIN_POSITIVE);

    // (c) flux identity from integrating the limit equation.
    let flux = st
        .comps
        .f2
        .zip_map(&st.comps.f1, |f2, f1| f2 * (f1 - params.s))
        .integrate();
    let flux_gap = (flux - a / (params.lambda * params.lambda)).abs();

    Ok(IdentityReport {
        chain_abs,
        chain_rel,
        parts_rel,
        flux_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{bind_background, Background, VortexConfig};
    use crate::grid::{band_limited_noise, Grid, RealField};
    use crate::profile::Profile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params(lambda: f64, eps: f64, s: f64) -> ModelParams {
        ModelParams::new(lambda, eps, s, Profile::Cp1).unwrap()
    }

    fn one_vortex_bg(n: usize) -> Background {
        let cfg = VortexConfig::new(vec![[0.5, 0.5]], vec![]).unwrap();
        bind_background(&cfg, &Grid::new(n).unwrap()).unwrap()
    }

    #[test]
    fn energy_of_zero_field_without_vortices_is_pure_potential() {
        let grid = Grid::new(32).unwrap();
        let bg = Background::vortex_free(&grid);
        let u = RealField::zeros(&grid);
        let b = eval_i_eps(&u, &bg, &params(2.0, 0.37, 0.5)).unwrap();
        // ½λ²(F1(0)−s)² = ½·4·0.25 = 0.5, all other terms zero.
        assert!((b.total - 0.5).abs() < 1e-14, "total {}", b.total);
        assert_eq!(b.biharmonic, 0.0);
        assert_eq!(b.dirichlet, 0.0);
        assert_eq!(b.mixed, 0.0);
        assert_eq!(b.linear, 0.0);
    }

    #[test]
    fn linear_term_of_constant_shift() {
        let bg = one_vortex_bg(64);
        let u = RealField::constant(bg.grid(), 0.7);
        let b = eval_i_eps(&u, &bg, &params(1.0, 0.1, 0.0)).unwrap();
        assert!(
            (b.linear - (-4.0 * PI * 0.7)).abs() < 1e-12,
            "linear {}",
            b.linear
        );
    }

    #[test]
    fn energy_decomposition_into_limit_part_is_exact() {
        let bg = one_vortex_bg(64);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut u = band_limited_noise(bg.grid(), 6, &mut rng);
        u.scale_in_place(0.8);
        let p = params(1.7, 0.05, 0.3);
        let b = eval_i_eps(&u, &bg, &p).unwrap();
        let i0 = eval_i0(&u, &bg, &p).unwrap();
        // Same code path, same grouping: bitwise agreement.
        assert_eq!(b.limit_part(), i0);
        assert_eq!(b.total, b.biharmonic + b.mixed + i0);
        assert!(b.mixed >= 0.0 && b.biharmonic >= 0.0 && b.potential >= 0.0);
        // And the loose sum agrees to rounding.
        let loose = b.biharmonic + b.dirichlet + b.mixed + b.potential + b.linear;
        assert!((b.total - loose).abs() <= 1e-12 * b.total.abs().max(1.0));
    }

    #[test]
    fn energy_is_stable_under_refinement() {
        let p = params(1.0, 0.1, 0.0);
        let coarse = {
            let bg = one_vortex_bg(64);
            let u = RealField::zeros(bg.grid());
            eval_i_eps(&u, &bg, &p).unwrap().total
        };
        let fine = {
            let bg = one_vortex_bg(128);
            let u = RealField::zeros(bg.grid());
            eval_i_eps(&u, &bg, &p).unwrap().total
        };
        let rel = (coarse - fine).abs() / fine.abs();
        assert!(rel < 1e-3, "refinement drift {rel:e} ({coarse} vs {fine})");
    }

    #[test]
    fn gradient_vanishes_at_trivial_critical_point() {
        let grid = Grid::new(32).unwrap();
        let bg = Background::vortex_free(&grid);
        let u = RealField::zeros(&grid);
        let g = grad_i_eps(&u, &bg, &params(2.0, 0.2, 0.0)).unwrap();
        assert!(g.linf_norm() < 1e-14, "grad {}", g.linf_norm());
        let g0 = grad_i0(&u, &bg, &params(2.0, 0.2, 0.0)).unwrap();
        assert!(g0.linf_norm() < 1e-14);
    }

    /// Richardson-extrapolated central difference of t ↦ I(u + tφ) at 0.
    fn directional_fd(
        mut energy: impl FnMut(&RealField) -> f64,
        u: &RealField,
        phi: &RealField,
        h: f64,
    ) -> f64 {
        let mut at = |t: f64| {
            let mut v = u.clone();
            v.axpy(t, phi);
            energy(&v)
        };
        let d = |h: f64, at: &mut dyn FnMut(f64) -> f64| (at(h) - at(-h)) / (2.0 * h);
        let d1 = d(h, &mut at);
        let d2 = d(0.5 * h, &mut at);
        (4.0 * d2 - d1) / 3.0
    }

    #[test]
    fn gradients_match_finite_differences() {
        let bg = one_vortex_bg(64);
        let p = params(1.3, 0.08, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..3 {
            let mut u = band_limited_noise(bg.grid(), 8, &mut rng);
            u.scale_in_place(1.1);
            let phi = band_limited_noise(bg.grid(), 8, &mut rng);

            let g = grad_i_eps(&u, &bg, &p).unwrap();
            let lhs = g.dot(&phi);
            let rhs = directional_fd(
                |v| eval_i_eps(v, &bg, &p).unwrap().total,
                &u,
                &phi,
                1e-4,
            );
            let rel = (lhs - rhs).abs() / rhs.abs().max(1e-12);
            assert!(rel < 1e-6, "I_eps gradient mismatch {rel:e}");

            let g0 = grad_i0(&u, &bg, &p).unwrap();
            let lhs = g0.dot(&phi);
            let rhs = directional_fd(|v| eval_i0(v, &bg, &p).unwrap(), &u, &phi, 1e-4);
            let rel = (lhs - rhs).abs() / rhs.abs().max(1e-12);
            assert!(rel < 1e-6, "I_0 gradient mismatch {rel:e}");
        }
    }

    #[test]
    fn gradient_mean_matches_constant_directional_derivative() {
        let bg = one_vortex_bg(64);
        let p = params(2.1, 0.15, -0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = band_limited_noise(bg.grid(), 5, &mut rng);
        let g = grad_i_eps(&u, &bg, &p).unwrap();
        let mean_g = g.integrate();
        let one = RealField::constant(bg.grid(), 1.0);
        // h = 1e−3: Richardson truncation is O(h⁴) while the rounding noise
        // of the big mixed-term integrals scales like machine-eps/h.
        let fd = directional_fd(
            |v| eval_i_eps(v, &bg, &p).unwrap().total,
            &u,
            &one,
            1e-3,
        );
        let rel = (mean_g - fd).abs() / fd.abs().max(1e-12);
        assert!(rel < 1e-8, "mean-gradient mismatch {rel:e}");
    }

    #[test]
    fn recover_v_on_constants() {
        let grid = Grid::new(16).unwrap();
        let bg = Background::vortex_free(&grid);
        let p = params(1.0, 0.2, 0.0);
        let v = recover_v(&RealField::zeros(&grid), &bg, &p).unwrap();
        assert!(v.linf_norm() < 1e-15);
        let v = recover_v(&RealField::constant(&grid, 1.3), &bg, &p).unwrap();
        let want = Profile::Cp1.comp1(1.3);
        assert!((v.min_value() - want).abs() < 1e-15);
        assert!((v.max_value() - want).abs() < 1e-15);
    }

    #[test]
    fn system_residuals_vanish_at_trivial_solution() {
        // m=n=0, u ≡ 0, v ≡ F1(0), s = F1(0): both equations hold exactly.
        let grid = Grid::new(16).unwrap();
        let bg = Background::vortex_free(&grid);
        let p = params(1.5, 0.1, 0.0);
        let u = RealField::zeros(&grid);
        let v = RealField::zeros(&grid); // F1(0) = 0
        let r = residual_system(&u, &v, &bg, &p).unwrap();
        assert_eq!(r.r1.global_l2, 0.0);
        assert_eq!(r.r2.global_l2, 0.0);
        assert!(r.r2_cross_gap < 1e-12);
    }

    #[test]
    fn second_residual_is_affine_in_v() {
        // Around the exact trivial solution (u ≡ 0, v ≡ F1(0), s = F1(0))
        // the base residual is exactly zero, so the affine dependence on v
        // shows up as exactly linear growth of the residual norm in δ.
        let grid = Grid::new(32).unwrap();
        let bg = Background::vortex_free(&grid);
        let p = params(1.2, 0.05, 0.0);
        let u = RealField::zeros(&grid);
        let c = RealField::from_fn(&grid, |x1, _| (2.0 * PI * x1).cos());
        let r_at = |delta: f64| {
            let v = &c * delta;
            residual_system(&u, &v, &bg, &p).unwrap().r2.masked_l2
        };
        assert_eq!(r_at(0.0), 0.0);
        let r1 = r_at(1e-3);
        let r2 = r_at(2e-3);
        let ratio = r2 / r1;
        assert!((ratio - 2.0).abs() < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn recovered_v_solves_first_equation_identically() {
        // r1 with v = recover_v(u) telescopes to zero for ANY u.
        let bg = one_vortex_bg(64);
        let p = params(1.4, 0.07, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut u = band_limited_noise(bg.grid(), 10, &mut rng);
        u.scale_in_place(2.0);
        let v = recover_v(&u, &bg, &p).unwrap();
        let r = residual_system(&u, &v, &bg, &p).unwrap();
        // Not an equation being solved — an algebraic identity; rounding
        // only, relative to the huge ε⁻¹λ scale.
        assert!(r.r1_relative() < 1e-11, "r1 rel {:e}", r.r1_relative());
    }

    #[test]
    fn identity_checks_on_smooth_fields() {
        // m=n=0, gentle band-limited u: the chain-rule identity holds to
        // the aliasing floor, integration by parts to quadrature exactness.
        let grid = Grid::new(64).unwrap();
        let bg = Background::vortex_free(&grid);
        let p = params(1.0, 0.1, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut u = band_limited_noise(&grid, 2, &mut rng);
        u.scale_in_place(0.5);
        let rep = identity_checks(&u, &bg, &p).unwrap();
        assert!(rep.chain_rel < 1e-8, "chain {:e}", rep.chain_rel);
        assert!(rep.parts_rel < 1e-6, "parts {:e}", rep.parts_rel);
    }

    #[test]
    fn identity_checks_with_vortex_background() {
        // With the singular σ the identities hold in masked norms at the
        // composite-aliasing level; pinned loose here, tightened on solver
        // outputs by the acceptance suite.
        let bg = one_vortex_bg(64);
        let p = params(1.0, 0.1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut u = band_limited_noise(bg.grid(), 3, &mut rng);
        u.scale_in_place(0.5);
        let rep = identity_checks(&u, &bg, &p).unwrap();
        assert!(rep.chain_rel.is_finite() && rep.chain_rel < 0.1);
        assert!(rep.parts_rel.is_finite() && rep.parts_rel < 0.1);
    }

    #[test]
    fn coercivity_pattern_on_constants() {
        let bg = one_vortex_bg(64);
        let p = params(1.0, 0.1, 0.0);
        let i_at = |c: f64| {
            eval_i_eps(&RealField::constant(bg.grid(), c), &bg, &p)
                .unwrap()
                .total
        };
        // Eventually increasing toward c → −∞ and decreasing toward +∞.
        assert!(i_at(-20.0) > i_at(-15.0));
        assert!(i_at(-15.0) > i_at(-10.0));
        assert!(i_at(10.0) > i_at(15.0));
        assert!(i_at(15.0) > i_at(20.0));
    }

    #[test]
    fn residual_report_masked_inequality() {
        let grid = Grid::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let r = band_limited_noise(&grid, 8, &mut rng);
        let mut mask = vec![false; grid.num_nodes()];
        for (i, m) in mask.iter_mut().enumerate() {
            *m = i % 7 == 0;
        }
        let rep = ResidualReport::from_field(&r, &mask);
        assert!(rep.masked_l2 <= rep.global_l2 * (1.0 + 1e-12));
        assert!(rep.linf_masked <= r.linf_norm());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let bg = one_vortex_bg(64);
        let other = Grid::new(32).unwrap();
        let u = RealField::zeros(&other);
        assert!(matches!(
            eval_i_eps(&u, &bg, &params(1.0, 0.1, 0.0)),
            Err(Error::GridMismatch { .. })
        ));
    }
}
