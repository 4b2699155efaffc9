//! Run configuration: structured-text parsing (`key = value` with
//! `[vortices]` and `[solver]` sections), early validation against every
//! module precondition, and a deterministic normalized serialization.

use serde::{Deserialize, Serialize};

use mcs_vortex::background::VortexConfig;
use mcs_vortex::grid::Grid;
use mcs_vortex::profile::{check_assumptions, Profile};
use mcs_vortex::{Error, Result};

/// Coupling constant: a number, or `"auto"` for 1.2·λ₀ from the barrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Fixed(f64),
    Auto(String),
}

/// One ε for `solve`/`barrier`/`verify`, or a decreasing ladder for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSpec {
    One(f64),
    Ladder(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Vortices {
    pub positives: Vec<[f64; 2]>,
    pub negatives: Vec<[f64; 2]>,
}

impl Default for Vortices {
    fn default() -> Self {
        Vortices {
            positives: vec![[0.5, 0.5]],
            negatives: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Descent stop on the preconditioned-gradient L² norm.
    pub descent_tol: f64,
    /// Newton stop on the raw residual L² norm.
    pub newton_tol: f64,
    /// Outer iteration budget for the constrained descent.
    pub max_iter: usize,
    /// Mountain-pass path resolution.
    pub path_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            descent_tol: 1e-8,
            newton_tol: 1e-11,
            max_iter: 20_000,
            path_nodes: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Grid resolution per side.
    pub n: usize,
    /// Profile name; only `cp1` passes the full model audit (the `linear`
    /// profile is unbounded above and serves the library's limit problem).
    pub profile: String,
    /// Target level s.
    pub s: f64,
    pub lambda: LambdaSpec,
    pub eps: EpsSpec,
    /// Seed for every randomized check.
    pub seed: u64,
    /// Output directory for reports and field dumps.
    pub out: String,
    pub vortices: Vortices,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 64,
            profile: "cp1".into(),
            s: 0.0,
            lambda: LambdaSpec::Auto("auto".into()),
            eps: EpsSpec::One(0.01),
            seed: 7,
            out: "out".into(),
            vortices: Vortices::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// Default ladder used by `sweep` when the config gives a single ε.
pub const DEFAULT_LADDER: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];

/// 1-indexed line of the first occurrence of `key` as a key or section
/// header, for semantic-error diagnostics; whole-file errors use line 1.
fn key_line(text: &str, key: &str) -> usize {
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_start();
        if t.starts_with(&format!("{key} "))
            || t.starts_with(&format!("{key}="))
            || t.starts_with(&format!("[{key}]"))
        {
            return i + 1;
        }
    }
    1
}

fn config_err(text: &str, key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        line: key_line(text, key),
        msg: msg.into(),
    }
}

impl RunConfig {
    /// Validate every module precondition the config can check before any
    /// compute, normalizing `lambda = "auto"` spelling in place.
    pub fn validate(&mut self, text: &str) -> Result<()> {
        Grid::new(self.n).map_err(|e| config_err(text, "n", e.to_string()))?;

        let profile = Profile::by_name(&self.profile)
            .map_err(|e| config_err(text, "profile", e.to_string()))?;
        let audit = check_assumptions(profile, self.s);
        if !audit.passed() {
            return Err(config_err(
                text,
                "s",
                format!(
                    "profile {} fails the model audit at s = {} (monotone: {}, \
                     bounded above: {}, s in range ({}, {}): {}, stable: {})",
                    profile.name(),
                    self.s,
                    audit.monotone,
                    audit.bounded_above,
                    profile.f_at_zero(),
                    profile.f_sup(),
                    audit.s_in_range,
                    audit.hypf_stable,
                ),
            ));
        }

        match &mut self.lambda {
            LambdaSpec::Fixed(l) => {
                if !(l.is_finite() && *l > 0.0) {
                    return Err(config_err(
                        text,
                        "lambda",
                        format!("lambda must be positive and finite or \"auto\", got {l}"),
                    ));
                }
            }
            LambdaSpec::Auto(word) => {
                if !word.eq_ignore_ascii_case("auto") {
                    return Err(config_err(
                        text,
                        "lambda",
                        format!("lambda must be a number or \"auto\", got {word:?}"),
                    ));
                }
                *word = "auto".into();
            }
        }

        match &self.eps {
            EpsSpec::One(e) => {
                if !(e.is_finite() && *e > 0.0) {
                    return Err(config_err(
                        text,
                        "eps",
                        format!("eps must be positive and finite, got {e}"),
                    ));
                }
            }
            EpsSpec::Ladder(v) => {
                if v.is_empty()
                    || v.iter().any(|e| !(e.is_finite() && *e > 0.0))
                    || v.windows(2).any(|w| w[1] >= w[0])
                {
                    return Err(config_err(
                        text,
                        "eps",
                        "eps ladder must be nonempty, positive, and strictly decreasing",
                    ));
                }
            }
        }

        if self.out.is_empty() {
            return Err(config_err(text, "out", "output directory must be nonempty"));
        }

        let m = self.vortices.positives.len();
        let nneg = self.vortices.negatives.len();
        if m <= nneg {
            return Err(config_err(
                text,
                "vortices",
                format!(
                    "need more positive than negative vortices (m > n), got m={m}, n={nneg}"
                ),
            ));
        }
        VortexConfig::new(
            self.vortices.positives.iter().copied().collect(),
            self.vortices.negatives.iter().copied().collect(),
        )
        .map_err(|e| config_err(text, "vortices", e.to_string()))?;

        let sc = &self.solver;
        if !(sc.descent_tol.is_finite() && sc.descent_tol > 0.0)
            || !(sc.newton_tol.is_finite() && sc.newton_tol > 0.0)
        {
            return Err(config_err(
                text,
                "solver",
                "tolerances must be positive and finite",
            ));
        }
        if sc.max_iter == 0 {
            return Err(config_err(text, "solver", "max_iter must be at least 1"));
        }
        if sc.path_nodes < 5 {
            return Err(config_err(
                text,
                "solver",
                format!("path_nodes must be at least 5, got {}", sc.path_nodes),
            ));
        }
        Ok(())
    }

    /// The parsed profile (valid only after `validate`).
    pub fn profile(&self) -> Result<Profile> {
        Profile::by_name(&self.profile)
    }

    /// The vortex configuration (valid only after `validate`).
    pub fn vortex_config(&self) -> Result<VortexConfig> {
        VortexConfig::new(
            self.vortices.positives.iter().copied().collect(),
            self.vortices.negatives.iter().copied().collect(),
        )
    }
}

/// Parse and fully validate a configuration; the first problem is reported
/// with its line number.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        // Serde-level errors (unknown field, wrong type shape) often carry
        // no span; recover the line from the backticked key in the message.
        let line = match e.span() {
            Some(span) if span.start > 0 => {
                text[..span.start.min(text.len())].matches('\n').count() + 1
            }
            _ => msg
                .split('`')
                .nth(1)
                .map(|key| key_line(text, key))
                .unwrap_or(1),
        };
        Error::Config { line, msg }
    })?;
    config.validate(text)?;
    Ok(config)
}

/// Deterministic normalized serialization; `parse_config ∘ serialize_config`
/// is the identity on validated configs.
pub fn serialize_config(config: &RunConfig) -> String {
    toml::to_string_pretty(config).expect("validated config serializes")
}
