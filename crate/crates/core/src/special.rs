//! Scalar special functions needed by the lattice sums.
//!
//! Only the exponential integral E₁ is required. For x ≤ 1 the power series
//! around the logarithmic singularity is used; for x > 1 the standard
//! continued fraction (modified Lentz) converges rapidly. Both branches are
//! accurate to close to machine precision, which the Ewald split needs to
//! deliver its 1e-12 absolute target for the periodic Green function.

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral E₁(x) = ∫ₓ^∞ e^(−t)/t dt for x > 0.
pub fn exp_int_e1(x: f64) -> f64 {
    assert!(x > 0.0 && x.is_finite(), "E1 requires finite x > 0, got {x}");
    if x <= 1.0 {
        -EULER_GAMMA - x.ln() + e1_series_tail(x)
    } else {
        e1_continued_fraction(x)
    }
}

/// The entire part E₁(x) + ln x + γ. Smooth through x = 0 (value 0 there),
/// which is what the near-field Ewald term needs after its logarithm is
/// split off analytically.
pub fn exp_int_e1_plus_log(x: f64) -> f64 {
    assert!(x >= 0.0 && x.is_finite());
    if x == 0.0 {
        0.0
    } else if x <= 1.0 {
        e1_series_tail(x)
    } else {
        e1_continued_fraction(x) + x.ln() + EULER_GAMMA
    }
}

/// Σ_{k≥1} (−1)^(k+1) x^k / (k · k!) — converges fast for x ≤ 1.
fn e1_series_tail(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0; // x^k / k!
    for k in 1..=40u32 {
        term *= x / k as f64;
        let contrib = term / k as f64;
        if k % 2 == 1 {
            sum += contrib;
        } else {
            sum -= contrib;
        }
        if contrib < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// E₁(x) = e^(−x) · 1/(x + 1 − 1²/(x + 3 − 2²/(x + 5 − …))) via modified Lentz.
fn e1_continued_fraction(x: f64) -> f64 {
    const FPMIN: f64 = 1e-290;
    let mut b = x + 1.0;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200u32 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}
