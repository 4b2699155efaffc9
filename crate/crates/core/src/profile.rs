//! Nonlinearity profiles and their stable composite evaluators.
//!
//! The equations never see the raw profile f(t): every nonlinear term is a
//! composite in the substituted variable w = σ + u,
//!
//!   F1(w) = f(e^w),   F2(w) = F1′(w) = f′(e^w)e^w,
//!   F3(w) = F2′(w),   F4(w) = F3′(w),
//!
//! and near positive vortices w → +∞ so e^w overflows while the composites
//! stay bounded. Each profile therefore supplies closed forms in w directly
//! (hyperbolic functions for the rational sigma-model profile), never
//! forming e^w as an intermediate number. No automatic differentiation:
//! stability near vortices is profile-specific.
//!
//! The model assumptions on f — monotone (f0), bounded above with the
//! target level inside (f(0), sup f) (f1), and the weighted-derivative decay
//! bound (hypf) that makes every energy term well defined — are audited
//! numerically by [`check_assumptions`] over a log-spaced scan of t.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::RealField;

/// Numerically stable sech(x) = 2e^{−|x|}/(1 + e^{−2|x|}): no overflow for
/// any argument, monotone underflow to 0 for large |x|.
#[inline]
fn sech(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// Exponent cap for the linear profile: e^700 is representable, e^710 not.
const EXP_SATURATION: f64 = 700.0;

/// Available nonlinearity profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// f(t) = (t−1)/(t+1): the rational profile of the gauged sigma model.
    /// Satisfies all assumptions for every −1 < s < 1.
    Cp1,
    /// f(t) = t: the Abelian-Higgs limit profile. Violates the boundedness
    /// assumption (f1); usable only for the second-order limit problem.
    Linear,
}

/// The rational sigma-model profile.
pub fn cp1_profile() -> Profile {
    Profile::Cp1
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Cp1 => "cp1",
            Profile::Linear => "linear",
        }
    }

    pub fn by_name(name: &str) -> Result<Profile> {
        match name {
            "cp1" => Ok(Profile::Cp1),
            "linear" => Ok(Profile::Linear),
            other => Err(Error::InvalidParameter(format!(
                "unknown profile '{other}' (available: cp1, linear)"
            ))),
        }
    }

    /// f(0).
    pub fn f_at_zero(self) -> f64 {
        match self {
            Profile::Cp1 => -1.0,
            Profile::Linear => 0.0,
        }
    }

    /// sup f = lim_{t→∞} f(t) (infinite for unbounded profiles).
    pub fn f_sup(self) -> f64 {
        match self {
            Profile::Cp1 => 1.0,
            Profile::Linear => f64::INFINITY,
        }
    }

    /// Is s strictly inside (f(0), sup f)?
    pub fn s_admissible(self, s: f64) -> bool {
        s.is_finite() && s > self.f_at_zero() && s < self.f_sup()
    }

    /// Raw profile value f(t), t ≥ 0 — audit use only.
    pub fn f_raw(self, t: f64) -> f64 {
        match self {
            Profile::Cp1 => (t - 1.0) / (t + 1.0),
            Profile::Linear => t,
        }
    }

    /// f′(t).
    pub fn df_raw(self, t: f64) -> f64 {
        match self {
            Profile::Cp1 => 2.0 / ((t + 1.0) * (t + 1.0)),
            Profile::Linear => 1.0,
        }
    }

    /// f″(t).
    pub fn d2f_raw(self, t: f64) -> f64 {
        match self {
            Profile::Cp1 => -4.0 / (t + 1.0).powi(3),
            Profile::Linear => 0.0,
        }
    }

    /// f‴(t).
    pub fn d3f_raw(self, t: f64) -> f64 {
        match self {
            Profile::Cp1 => 12.0 / (t + 1.0).powi(4),
            Profile::Linear => 0.0,
        }
    }

    /// F1(w) = f(e^w).
    #[inline]
    pub fn comp1(self, w: f64) -> f64 {
        match self {
            // (e^w − 1)/(e^w + 1) = tanh(w/2), stable for all w.
            Profile::Cp1 => (0.5 * w).tanh(),
            Profile::Linear => w.min(EXP_SATURATION).exp(),
        }
    }

    /// F2(w) = f′(e^w)e^w = F1′(w) > 0.
    #[inline]
    pub fn comp2(self, w: f64) -> f64 {
        match self {
            // 2e^w/(e^w+1)² = ½ sech²(w/2).
            Profile::Cp1 => {
                let s = sech(0.5 * w);
                0.5 * s * s
            }
            Profile::Linear => w.min(EXP_SATURATION).exp(),
        }
    }

    /// F3(w) = F2′(w) = [f″(e^w)e^w + f′(e^w)]e^w.
    #[inline]
    pub fn comp3(self, w: f64) -> f64 {
        match self {
            Profile::Cp1 => -self.comp1(w) * self.comp2(w),
            Profile::Linear => w.min(EXP_SATURATION).exp(),
        }
    }

    /// F4(w) = F3′(w); needed by the second variation.
    #[inline]
    pub fn comp4(self, w: f64) -> f64 {
        match self {
            // d/dw(−F1·F2) = −F2² − F1·F3 = F2·(F1² − F2).
            Profile::Cp1 => {
                let f1 = self.comp1(w);
                let f2 = self.comp2(w);
                f2 * (f1 * f1 - f2)
            }
            Profile::Linear => w.min(EXP_SATURATION).exp(),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three composite fields every energy expression is built from.
pub struct Composites {
    pub f1: RealField,
    pub f2: RealField,
    pub f3: RealField,
}

/// Evaluate F1, F2, F3 of a finite field w = σ + u.
pub fn composites(profile: Profile, w: &RealField) -> Result<Composites> {
    if !w.is_finite() {
        return Err(Error::NonFinite {
            context: "composite input field w".into(),
        });
    }
    Ok(Composites {
        f1: w.map(|v| profile.comp1(v)),
        f2: w.map(|v| profile.comp2(v)),
        f3: w.map(|v| profile.comp3(v)),
    })
}

/// Model parameters of the full fourth-order problem.
#[derive(Clone, Copy, Debug)]
pub struct ModelParams {
    pub lambda: f64,
    pub eps: f64,
    pub s: f64,
    pub profile: Profile,
}

impl ModelParams {
    pub fn new(lambda: f64, eps: f64, s: f64, profile: Profile) -> Result<ModelParams> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling lambda must be positive and finite, got {lambda}"
            )));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale eps must be positive and finite, got {eps}"
            )));
        }
        if !profile.s_admissible(s) {
            return Err(Error::InvalidParameter(format!(
                "target level s = {s} outside the admissible range ({}, {}) of profile {}",
                profile.f_at_zero(),
                profile.f_sup(),
                profile.name()
            )));
        }
        Ok(ModelParams {
            lambda,
            eps,
            s,
            profile,
        })
    }

    pub fn with_eps(self, eps: f64) -> Result<ModelParams> {
        ModelParams::new(self.lambda, eps, self.s, self.profile)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<ModelParams> {
        ModelParams::new(lambda, self.eps, self.s, self.profile)
    }
}

/// Convert the physics constants (charge q, Chern–Simons coupling κ,
/// asymptotic level S) into the analysis parameters (λ, ε, s).
pub fn map_physical_params(q: f64, kappa: f64, s_phys: f64) -> Result<(f64, f64, f64)> {
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "charge q must be positive, got {q}"
        )));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "coupling kappa must be positive, got {kappa}"
        )));
    }
    Ok((2.0 / kappa, 1.0 / (kappa * q), -s_phys))
}

/// Numeric audit of the model assumptions for a profile and target level.
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub profile: Profile,
    pub s: f64,
    /// (f0): f′(t) > 0 at every scan point.
    pub monotone: bool,
    /// (f1), boundedness half: sup f finite (ratio test at the scan edge).
    pub bounded_above: bool,
    /// (f1), bracket half: f(0) < s < sup over the scan of f.
    pub s_in_range: bool,
    /// Largest scanned f value.
    pub f_sup_scan: f64,
    /// (hypf): sup over the scan of t|f−f_∞| + t²f′ + t³|f″| + t⁴|f‴|.
    pub hypf_sup: f64,
    /// The (hypf) sup moved by < 0.1% when the scan density doubles.
    pub hypf_stable: bool,
    /// sup of t²f′(t) alone (the Lipschitz constant driver).
    pub sup_t2_df: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.monotone
            && self.bounded_above
            && self.s_in_range
            && self.hypf_sup.is_finite()
            && self.hypf_stable
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "profile {} with s = {:.6e}: {}",
            self.profile,
            self.s,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        writeln!(f, "  (f0) monotone:        {}", self.monotone)?;
        writeln!(
            f,
            "  (f1) bounded above:   {} (scan sup f = {:.6e})",
            self.bounded_above, self.f_sup_scan
        )?;
        writeln!(f, "  (f1) s in range:      {}", self.s_in_range)?;
        write!(
            f,
            "  (hypf) sup = {:.6e}, stable under refinement: {}",
            self.hypf_sup, self.hypf_stable
        )
    }
}

fn hypf_scan_sup(profile: Profile, f_inf: f64, points: usize) -> f64 {
    let (lo, hi) = (1e-8f64.ln(), 1e8f64.ln());
    let mut sup = 0.0f64;
    for i in 0..points {
        let t = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
        let tail = if f_inf.is_finite() {
            t * (profile.f_raw(t) - f_inf).abs()
        } else {
            f64::INFINITY
        };
        let h = tail
            + t * t * profile.df_raw(t)
            + t.powi(3) * profile.d2f_raw(t).abs()
            + t.powi(4) * profile.d3f_raw(t).abs();
        sup = sup.max(h);
    }
    sup
}

/// Scan-based audit of (f0), (f1) and (hypf). Always returns a report:
/// violations are findings, not errors.
pub fn check_assumptions(profile: Profile, s: f64) -> AuditReport {
    const POINTS: usize = 400;
    let (lo, hi) = (1e-8f64.ln(), 1e8f64.ln());
    let mut monotone = true;
    let mut f_sup_scan = f64::NEG_INFINITY;
    let mut sup_t2_df = 0.0f64;
    for i in 0..POINTS {
        let t = (lo + (hi - lo) * i as f64 / (POINTS - 1) as f64).exp();
        if profile.df_raw(t) <= 0.0 {
            monotone = false;
        }
        f_sup_scan = f_sup_scan.max(profile.f_raw(t));
        sup_t2_df = sup_t2_df.max(t * t * profile.df_raw(t));
    }
    // Unboundedness shows up as persistent growth at the top of the scan.
    let t_hi = 1e8;
    let bounded_above = profile.f_raw(t_hi) / profile.f_raw(t_hi / 10.0).max(1e-300) < 1.001
        || profile.f_raw(t_hi) <= profile.f_raw(t_hi / 10.0) + 1e-9;
    let s_in_range = s > profile.f_at_zero() && s < f_sup_scan;

    let f_inf = if bounded_above {
        profile.f_sup()
    } else {
        f64::INFINITY
    };
    let sup_a = hypf_scan_sup(profile, f_inf, POINTS);
    let sup_b = hypf_scan_sup(profile, f_inf, 2 * POINTS);
    let hypf_stable = if sup_a.is_finite() && sup_b.is_finite() {
        (sup_a - sup_b).abs() <= 1e-3 * sup_b.abs().max(1e-300)
    } else {
        false
    };

    AuditReport {
        profile,
        s,
        monotone,
        bounded_above,
        s_in_range,
        f_sup_scan,
        hypf_sup: sup_b,
        hypf_stable,
        sup_t2_df,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{bind_background, VortexConfig};
    use crate::grid::{band_limited_noise, Grid};
    use crate::operators::{gradient, laplacian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cp1_composites_at_zero() {
        let p = cp1_profile();
        assert_eq!(p.comp1(0.0), 0.0); // f(1) = 0
        assert_eq!(p.comp2(0.0), 0.5); // f'(1)·1 = 2/4
        assert_eq!(p.comp3(0.0), 0.0); // −F1·F2 = 0
        assert_eq!(p.comp4(0.0), -0.25); // F2(F1²−F2) = ½(0−½)
    }

    #[test]
    fn cp1_composites_match_raw_chain_rule_at_moderate_w() {
        // Closed hyperbolic forms vs the raw t-space chain rule.
        let p = Profile::Cp1;
        for &w in &[-3.0f64, -0.7, 0.0, 0.4, 2.5, 8.0] {
            let t = w.exp();
            assert!((p.comp1(w) - p.f_raw(t)).abs() < 1e-14);
            assert!((p.comp2(w) - p.df_raw(t) * t).abs() < 1e-14);
            let f3_raw = (p.d2f_raw(t) * t + p.df_raw(t)) * t;
            assert!((p.comp3(w) - f3_raw).abs() < 1e-14, "w={w}");
            // F4 via the raw third derivative:
            // d³/dw³ f(e^w) = t f′ + 3t² f″ + t³ f‴.
            let f4_raw = t * p.df_raw(t) + 3.0 * t * t * p.d2f_raw(t)
                + t.powi(3) * p.d3f_raw(t);
            assert!((p.comp4(w) - f4_raw).abs() < 1e-13, "w={w}");
        }
    }

    #[test]
    fn cp1_extreme_arguments_saturate_without_overflow() {
        let p = Profile::Cp1;
        assert_eq!(p.comp1(700.0), 1.0);
        assert_eq!(p.comp1(-700.0), -1.0);
        let f2 = p.comp2(700.0);
        assert!(f2.is_finite() && f2 >= 0.0 && f2 < 1e-300);
        assert_eq!(p.comp2(1500.0), 0.0); // clean underflow, no NaN
        assert_eq!(p.comp3(1500.0), 0.0);
        assert_eq!(p.comp4(1500.0), 0.0);
    }

    #[test]
    fn composite_derivative_ladder_matches_finite_differences() {
        // dF1/dw = F2, dF2/dw = F3, dF3/dw = F4 by central differences.
        let p = Profile::Cp1;
        let d = 1e-6;
        for &w in &[-4.0, -1.0, 0.3, 1.7, 5.0] {
            let fd1 = (p.comp1(w + d) - p.comp1(w - d)) / (2.0 * d);
            assert!((fd1 - p.comp2(w)).abs() < 1e-8 * (1.0 + p.comp2(w).abs()));
            let fd2 = (p.comp2(w + d) - p.comp2(w - d)) / (2.0 * d);
            assert!((fd2 - p.comp3(w)).abs() < 1e-8);
            let fd3 = (p.comp3(w + d) - p.comp3(w - d)) / (2.0 * d);
            assert!((fd3 - p.comp4(w)).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_profile_saturates() {
        let p = Profile::Linear;
        assert!(p.comp1(800.0).is_finite());
        assert_eq!(p.comp1(800.0), p.comp1(700.0));
        assert_eq!(p.comp2(-2.0), (-2.0f64).exp());
    }

    #[test]
    fn composites_of_constant_field() {
        let grid = Grid::new(16).unwrap();
        let w = RealField::zeros(&grid);
        let c = composites(Profile::Cp1, &w).unwrap();
        assert_eq!(c.f1.linf_norm(), 0.0);
        assert!((c.f2.min_value() - 0.5).abs() < 1e-15);
        assert!((c.f2.max_value() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn composites_reject_non_finite_input() {
        let grid = Grid::new(8).unwrap();
        let mut w = RealField::zeros(&grid);
        w.values_mut()[3] = f64::NAN;
        assert!(matches!(
            composites(Profile::Cp1, &w),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn chain_rule_identity_on_smooth_fields() {
        // Δ F1(w) = F3(w)|∇w|² + F2(w)Δw for smooth band-limited w.
        // Sampled composites alias: the identity holds to the size of the
        // composite's Fourier tail beyond N/2, exponentially small in
        // N/kmax for analytic composites of band-limited fields.
        let grid = Grid::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = band_limited_noise(&grid, 3, &mut rng);
        w.scale_in_place(0.75);
        let c = composites(Profile::Cp1, &w).unwrap();
        let lap_f1 = laplacian(&c.f1);
        let (w1, w2) = gradient(&w);
        let grad_sq = w1.zip_map(&w2, |a, b| a * a + b * b);
        let lap_w = laplacian(&w);
        let rhs = &c.f3.zip_map(&grad_sq, |a, b| a * b)
            + &c.f2.zip_map(&lap_w, |a, b| a * b);
        let rel = (&lap_f1 - &rhs).l2_norm() / lap_f1.l2_norm();
        assert!(rel < 1e-6, "chain-rule mismatch {rel:e}");
    }

    #[test]
    fn near_vortex_composite_product_stays_bounded_under_refinement() {
        // F2(σ)|∇σ|² is bounded near positive vortices (the composite decay
        // beats the gradient blowup); its grid max must not grow as N doubles.
        let cfg = VortexConfig::new(vec![[0.5, 0.5]], vec![]).unwrap();
        let max_at = |nn: usize| {
            let grid = Grid::new(nn).unwrap();
            let bg = bind_background(&cfg, &grid).unwrap();
            let (g1, g2) = bg.grad_sigma();
            let p = Profile::Cp1;
            bg.sigma()
                .values()
                .iter()
                .zip(g1.values().iter().zip(g2.values()))
                .map(|(&s, (&a, &b))| p.comp2(s) * (a * a + b * b) / 3.0)
                .fold(0.0f64, f64::max)
        };
        let coarse = max_at(64);
        let fine = max_at(128);
        assert!(coarse.is_finite() && fine.is_finite());
        assert!(fine < 1.5 * coarse + 1.0, "blowup: {coarse} -> {fine}");
    }

    #[test]
    fn audit_cp1_passes_with_expected_scan_values() {
        let report = check_assumptions(Profile::Cp1, 0.0);
        assert!(report.passed(), "{report}");
        // sup t²f′(t) = 2 in the limit; the scan should land within 1e−6.
        assert!((report.sup_t2_df - 2.0).abs() < 1e-6, "{}", report.sup_t2_df);
        // (hypf) sum tends to 2 + 2 + 4 + 12 = 20.
        assert!((report.hypf_sup - 20.0).abs() < 1e-5, "{}", report.hypf_sup);
    }

    #[test]
    fn audit_rejects_out_of_range_s_and_unbounded_profile() {
        let report = check_assumptions(Profile::Cp1, 1.5);
        assert!(!report.passed() && !report.s_in_range);
        let report = check_assumptions(Profile::Linear, 1.0);
        assert!(!report.passed() && !report.bounded_above);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 0.1, 0.0, Profile::Cp1).is_ok());
        assert!(ModelParams::new(0.0, 0.1, 0.0, Profile::Cp1).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.0, Profile::Cp1).is_err());
        assert!(ModelParams::new(1.0, 0.1, 1.0, Profile::Cp1).is_err());
        assert!(ModelParams::new(1.0, 0.1, -1.0, Profile::Cp1).is_err());
        assert!(ModelParams::new(1.0, 0.1, 2.0, Profile::Linear).is_ok());
    }

    #[test]
    fn physical_parameter_map() {
        let (l, e, s) = map_physical_params(2.0, 1.0, 0.5).unwrap();
        assert_eq!((l, e, s), (2.0, 0.5, -0.5));
        let (l, e, s) = map_physical_params(1.0, 2.0, 0.0).unwrap();
        assert_eq!((l, e, s), (1.0, 0.5, 0.0));
        // Round trip.
        let (lambda, eps) = (l, e);
        let kappa = 2.0 / lambda;
        let q = 1.0 / (kappa * eps);
        assert!((kappa - 2.0).abs() < 1e-15 && (q - 1.0).abs() < 1e-15);
        assert!(map_physical_params(-1.0, 1.0, 0.0).is_err());
        assert!(map_physical_params(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn monotonicity_of_f1() {
        let p = Profile::Cp1;
        let mut prev = p.comp1(-30.0);
        for i in 1..=60 {
            let w = -30.0 + i as f64;
            let v = p.comp1(w);
            assert!(v > prev);
            prev = v;
        }
    }
}
