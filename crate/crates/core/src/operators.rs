//! Diagonal-symbol spectral operators on the periodic grid.
//!
//! Every operator is an exact Fourier multiplier of the trigonometric
//! interpolant: Laplacian −4π²|k|², bilaplacian its square, first
//! derivatives i·2πk with the Nyquist column dropped (the standard choice
//! that keeps derivatives of real fields real), and the resolvent-type
//! inverses used by the solver. Mean-zero Poisson inversion zeroes the k=0
//! bin; the screened (Helmholtz) inverse and the descent preconditioner are
//! strictly positive symbols and need no special casing.

use crate::error::{Error, Result};
use crate::grid::{FieldSpectrum, RealField};

/// Δu via the full spectral symbol.
pub fn laplacian(u: &RealField) -> RealField {
    debug_assert!(u.is_finite(), "laplacian input has non-finite entries");
    u.spectrum().laplacian().inverse()
}

/// Δ²u (symbol squared; equals laplacian∘laplacian to rounding).
pub fn bilaplacian(u: &RealField) -> RealField {
    u.spectrum().bilaplacian().inverse()
}

/// (∂₁u, ∂₂u) with Nyquist first-derivative modes dropped.
pub fn gradient(u: &RealField) -> (RealField, RealField) {
    let (c1, c2) = u.spectrum().gradient();
    (c1.inverse(), c2.inverse())
}

/// ∂₁v₁ + ∂₂v₂, the exact negative adjoint of [`gradient`] under grid
/// quadrature.
pub fn divergence(v1: &RealField, v2: &RealField) -> RealField {
    assert!(v1.grid() == v2.grid(), "divergence components on different grids");
    let (d1, _) = v1.spectrum().gradient();
    let (_, d2) = v2.spectrum().gradient();
    let mut out = d1.inverse();
    out.add_in_place(&d2.inverse());
    out
}

/// Screened resolvent G_ε h = (−ε²Δ + 1)⁻¹ h.
pub fn helmholtz_inverse(h: &RealField, eps: f64) -> Result<RealField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "helmholtz_inverse needs eps > 0, got {eps}"
        )));
    }
    let mut spec = h.spectrum();
    scale_by(&mut spec, |lap| 1.0 / (1.0 - eps * eps * lap));
    Ok(spec.inverse())
}

/// Mean-zero solution of −Δu = h − mean(h); the k=0 bin is zeroed.
pub fn poisson_inverse_meanzero(h: &RealField) -> RealField {
    let mut spec = h.spectrum();
    let lap = h.grid().lap_symbol().to_vec();
    for (idx, c) in spec.coef_mut().iter_mut().enumerate() {
        if idx == 0 {
            *c *= 0.0;
        } else {
            *c /= -lap[idx];
        }
    }
    spec.inverse()
}

/// Preconditioner solve (ε²Δ² − Δ + τ)⁻¹ h. Accepts ε = 0 (the limit-equation
/// preconditioner (−Δ + τ)⁻¹); τ must be positive.
pub fn precond_inverse(h: &RealField, eps: f64, tau: f64) -> RealField {
    assert!(tau > 0.0 && eps >= 0.0, "precond_inverse needs tau > 0, eps >= 0");
    let mut spec = h.spectrum();
    scale_by(&mut spec, |lap| 1.0 / (eps * eps * lap * lap - lap + tau));
    spec.inverse()
}

fn scale_by(spec: &mut FieldSpectrum, f: impl Fn(f64) -> f64) {
    let lap = spec.grid().lap_symbol().to_vec();
    for (c, &sym) in spec.coef_mut().iter_mut().zip(lap.iter()) {
        *c *= f(sym);
    }
}
