//! Run configuration: a TOML file with `[matrix]`, `[params]` and `[run]`
//! sections, validated against the parameter laws of each mode.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::matrices::{continuity_t3, default_t3, default_t4, strong_ph_margin, strong_ph_search};
use super::ExperimentError;
use crate::lattice::{certify_spectrum, Spectrum, ToralAutomorphism};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Spectrum,
    Conditions,
    TheoremA,
    TheoremB,
    BoundLab,
    Partition,
    Continuity,
    Robustness,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Spectrum,
        Mode::Conditions,
        Mode::TheoremA,
        Mode::TheoremB,
        Mode::BoundLab,
        Mode::Partition,
        Mode::Continuity,
        Mode::Robustness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::Conditions => "conditions",
            Mode::TheoremA => "theorem-a",
            Mode::TheoremB => "theorem-b",
            Mode::BoundLab => "bound-lab",
            Mode::Partition => "partition",
            Mode::Continuity => "continuity",
            Mode::Robustness => "robustness",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ExperimentError::Validation(format!("unknown mode {s:?}")))
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    rows: Option<Vec<Vec<i64>>>,
    preset: Option<String>,
    strong_ph: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParams {
    n: Option<Vec<i32>>,
    n_range: Option<[i32; 2]>,
    nu: Option<f64>,
    alpha: Option<f64>,
    t: Option<Vec<f64>>,
    epsilon: Option<Vec<f64>>,
    onset_steps: Option<usize>,
    t_grid: Option<usize>,
    t_max: Option<f64>,
    models: Option<usize>,
    appendix_models: Option<usize>,
    max_depth: Option<usize>,
    tol: Option<f64>,
    atoms: Option<usize>,
    samples: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: Option<String>,
    iterations: Option<usize>,
    orbits: Option<usize>,
    seed: Option<u64>,
    reorth: Option<usize>,
    burn_in: Option<usize>,
    batches: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    matrix: Option<RawMatrix>,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    run: RawRun,
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// As given (statement orientation for Theorem A and the continuity scan).
    pub matrix: ToralAutomorphism,
    /// Where the matrix came from: `rows`, a preset name, or the search.
    pub matrix_source: String,
    pub dim: usize,
    pub ns: Vec<i32>,
    pub nu: f64,
    pub alpha: f64,
    /// Explicit shear strengths; when empty, t follows the mode's law in ν.
    pub ts: Vec<f64>,
    /// Perturbation strengths as multiples of t.
    pub epsilons: Vec<f64>,
    pub iterations: usize,
    pub orbits: usize,
    pub seed: u64,
    pub reorth: usize,
    pub burn_in: usize,
    pub batches: usize,
    /// Extra rows at fractions of ν for the onset scan (0 disables it).
    pub onset_steps: usize,
    pub t_grid: usize,
    /// Upper end of the continuity grid; `None` uses twice the fitted
    /// bunching boundary.
    pub t_max: Option<f64>,
    pub models: usize,
    pub appendix_models: usize,
    pub max_depth: usize,
    pub tol: f64,
    /// Atoms per t for the partition run.
    pub atoms: usize,
    /// Monte Carlo samples for sampled suprema.
    pub samples: usize,
    pub strong_ph: bool,
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Validation(msg.into())
}

fn preset(name: &str) -> Result<ToralAutomorphism, ExperimentError> {
    match name {
        "t3" => Ok(default_t3()),
        "t4" => Ok(default_t4()),
        "continuity" => Ok(continuity_t3()),
        "t4-strong" => strong_ph_search(5)
            .map(|h| h.matrix)
            .ok_or_else(|| invalid("strong-PH search found no matrix")),
        other => Err(invalid(format!(
            "unknown matrix preset {other:?} (expected t3, t4, t4-strong or continuity)"
        ))),
    }
}

/// `(λ_u, λ_ws, λ_ms, λ_ss)` of the one-expanding orientation.
pub(crate) fn engine_values(spec: &Spectrum) -> Vec<f64> {
    let v: Vec<f64> = spec.values().iter().map(|x| x.abs()).collect();
    if spec.expanding_count() == 1 {
        v
    } else {
        v.iter().rev().map(|x| 1.0 / x).collect()
    }
}

/// `min{log λ_u/−log λ_ws, (1/3)(−log λ_ss/−log λ_ws − 1)}` for a
/// one-expanding quartic.
pub fn theorem_b_nu_bound(spec: &Spectrum) -> f64 {
    let v = engine_values(spec);
    let (lu, lws, lss) = (v[0].ln(), v[1].ln(), v[3].ln());
    (lu / -lws).min((lss / lws - 1.0) / 3.0)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, mode: Option<Mode>) -> Result<Self, ExperimentError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        let mode = match (mode, &raw.run.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse()?,
            (None, None) => return Err(invalid("no mode given ([run] mode or a subcommand)")),
        };
        let rm = raw.matrix.ok_or_else(|| invalid("missing [matrix] section"))?;
        let (mut matrix, mut source) = match (&rm.rows, &rm.preset) {
            (Some(rows), None) => (
                ToralAutomorphism::from_rows(rows).map_err(|e| invalid(format!("matrix: {e}")))?,
                "rows".to_string(),
            ),
            (None, Some(p)) => (preset(p)?, p.clone()),
            (Some(_), Some(_)) => return Err(invalid("give either matrix rows or a preset, not both")),
            (None, None) => return Err(invalid("missing matrix: [matrix] needs rows or preset")),
        };
        let strong_ph = rm.strong_ph.unwrap_or(false);
        if strong_ph {
            let spec = certify_spectrum(&matrix).map_err(|e| invalid(format!("matrix: {e}")))?;
            if !strong_ph_margin(&spec).is_some_and(|m| m > 0.0) {
                let hit = strong_ph_search(5).ok_or_else(|| invalid("strong-PH search found no matrix"))?;
                matrix = hit.matrix;
                let [a, b, c, d] = hit.poly;
                source = format!("search: square of the companion of x^4{a:+}x^3{b:+}x^2{c:+}x{d:+}");
            }
        }
        let p = raw.params;
        let r = raw.run;
        let ns = match (p.n, p.n_range) {
            (Some(ns), None) => ns,
            (None, Some([lo, hi])) => (lo..=hi).collect(),
            (None, None) => (4..=12).collect(),
            (Some(_), Some(_)) => return Err(invalid("give either n or n_range, not both")),
        };
        let dim = matrix.dim();
        let cfg = ExperimentConfig {
            mode,
            matrix,
            matrix_source: source,
            dim,
            ns,
            nu: p.nu.unwrap_or(0.2),
            alpha: p.alpha.unwrap_or(0.25),
            ts: p.t.unwrap_or_default(),
            epsilons: p.epsilon.unwrap_or_else(|| vec![0.0, 1e-3, 1e-2]),
            iterations: r.iterations.unwrap_or(1_000_000),
            orbits: r.orbits.unwrap_or(100),
            seed: r.seed.unwrap_or(0),
            reorth: r.reorth.unwrap_or(1),
            burn_in: r.burn_in.unwrap_or(1000),
            batches: r.batches.unwrap_or(50),
            onset_steps: p.onset_steps.unwrap_or(0),
            t_grid: p.t_grid.unwrap_or(121),
            t_max: p.t_max,
            models: p.models.unwrap_or(1000),
            appendix_models: p.appendix_models.unwrap_or(200),
            max_depth: p.max_depth.unwrap_or(20),
            tol: p.tol.unwrap_or(1e-4),
            atoms: p.atoms.unwrap_or(4),
            samples: p.samples.unwrap_or(100_000),
            strong_ph,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same configuration under another mode, revalidated.
    pub fn with_mode(mut self, mode: Mode) -> Result<Self, ExperimentError> {
        self.mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn spectrum(&self) -> Result<Spectrum, ExperimentError> {
        certify_spectrum(&self.matrix).map_err(|e| invalid(format!("matrix: {e}")))
    }

    /// Enforce every law that applies to the mode.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let spec = self.spectrum()?;
        if !spec.hyperbolic || !spec.is_simple_real() {
            return Err(invalid("matrix must be hyperbolic with simple real spectrum"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(invalid(format!("alpha must lie in (0, 1/2), got {}", self.alpha)));
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 1) {
            return Err(invalid("n values must be positive integers"));
        }
        if self.ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("t values must be finite and non-negative"));
        }
        if self.iterations == 0 || self.orbits == 0 || self.reorth == 0 || self.batches < 2 {
            return Err(invalid("iterations, orbits and reorth must be positive and batches at least 2"));
        }
        let ex = spec.expanding_count();
        match self.mode {
            Mode::TheoremA | Mode::Robustness => {
                if self.dim != 3 {
                    return Err(invalid(format!("{} needs a 3x3 matrix", self.mode)));
                }
                if !(self.nu > 0.0 && self.nu < 2.0 / 3.0) {
                    return Err(invalid(format!(
                        "nu must lie in (0, 2/3) for {}, got {}",
                        self.mode, self.nu
                    )));
                }
                if self.mode == Mode::TheoremA && self.orbits < 100 {
                    return Err(invalid("theorem-a pools at least 100 orbits"));
                }
                if self.mode == Mode::Robustness && self.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                    return Err(invalid("epsilon values must be finite and non-negative"));
                }
            }
            Mode::TheoremB => {
                if self.dim != 4 || ex != 1 {
                    return Err(invalid(
                        "theorem-b needs a 4x4 matrix with λ_u > 1 > λ_ws > λ_ms > λ_ss",
                    ));
                }
                let bound = theorem_b_nu_bound(&spec);
                if !(self.nu > 0.0 && self.nu < bound) {
                    return Err(invalid(format!(
                        "nu must lie in (0, min{{log λ_u/−log λ_ws, (1/3)(−log λ_ss/−log λ_ws − 1)}}) = (0, {bound:.6}) for theorem-b, got {}",
                        self.nu
                    )));
                }
                let mix = self.nu - self.alpha - self.nu * self.alpha;
                if !(mix > 0.0) {
                    return Err(invalid(format!(
                        "nu − alpha − nu·alpha must be positive for theorem-b, got {mix}"
                    )));
                }
            }
            Mode::Continuity => {
                let v = spec.values();
                if self.dim != 3 || ex != 2 {
                    return Err(invalid("continuity needs a 3x3 matrix with λ_su > λ_wu > 1 > λ_s"));
                }
                if !(v[1] * v[1] > v[0]) {
                    return Err(invalid("continuity needs λ_wu² > λ_su for a nonempty region"));
                }
                if self.t_grid < 3 {
                    return Err(invalid("t_grid needs at least 3 points"));
                }
            }
            Mode::Spectrum | Mode::Conditions | Mode::Partition => {
                if ex != 1 && ex + 1 != self.dim {
                    return Err(invalid("matrix needs one expanding or one contracting direction"));
                }
            }
            Mode::BoundLab => {
                if self.models == 0 {
                    return Err(invalid("bound-lab needs at least one model"));
                }
            }
        }
        Ok(())
    }

    /// The exploratory flag for `n = 1` rows.
    pub fn exploratory(n: i32) -> bool {
        n == 1
    }
}

/// Read and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    parse_config_as(path, None)
}

pub fn parse_config_as(path: &Path, mode: Option<Mode>) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: &str, params: &str) -> Result<ExperimentConfig, ExperimentError> {
        let matrix = if mode == "theorem-b" { "preset = \"t4-strong\"" } else { "preset = \"t3\"" };
        ExperimentConfig::from_toml_str(
            &format!("[matrix]\n{matrix}\n[params]\n{params}\n[run]\nmode = \"{mode}\"\n"),
            None,
        )
    }

    fn message(r: Result<ExperimentConfig, ExperimentError>) -> String {
        match r {
            Err(ExperimentError::Validation(m)) => m,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn theorem_a_nu_range_enforced() {
        assert!(message(cfg("theorem-a", "nu = 0.9")).contains("nu must lie in (0, 2/3)"));
        assert!(cfg("theorem-a", "nu = 0.5\nalpha = 0.25").is_ok());
    }

    #[test]
    fn theorem_b_accepts_half_and_quarter() {
        let c = cfg("theorem-b", "nu = 0.5\nalpha = 0.25").unwrap();
        assert!(c.nu - c.alpha - c.nu * c.alpha > 0.0);
        assert!(message(cfg("theorem-b", "nu = 0.3\nalpha = 0.25")).contains("nu − alpha − nu·alpha"));
        assert!(message(cfg("theorem-b", "nu = 50.0\nalpha = 0.25")).contains("theorem-b"));
    }

    #[test]
    fn alpha_and_matrix_required() {
        assert!(message(cfg("spectrum", "alpha = 0.5")).contains("alpha must lie in (0, 1/2)"));
        let m = message(ExperimentConfig::from_toml_str("[run]\nmode = \"spectrum\"\n", None));
        assert!(m.contains("missing [matrix]"));
        let m = message(ExperimentConfig::from_toml_str("[matrix]\n[run]\nmode = \"spectrum\"\n", None));
        assert!(m.contains("missing matrix"));
    }

    #[test]
    fn strong_ph_request_falls_back_to_search() {
        let c = ExperimentConfig::from_toml_str(
            "[matrix]\npreset = \"t4\"\nstrong_ph = true\n[params]\nnu = 0.4\nalpha = 0.2\n[run]\nmode = \"theorem-b\"\n",
            None,
        )
        .unwrap();
        assert!(c.matrix_source.starts_with("search"));
        assert!(strong_ph_margin(&c.spectrum().unwrap()).unwrap() > 0.0);
        // the default quartic itself has the narrower ν window of its spectrum
        let d = ExperimentConfig::from_toml_str(
            "[matrix]\npreset = \"t4\"\n[params]\nnu = 0.4\nalpha = 0.2\n[run]\nmode = \"theorem-b\"\n",
            None,
        )
        .unwrap();
        assert!((theorem_b_nu_bound(&d.spectrum().unwrap()) - 0.4345).abs() < 1e-3);
    }

    #[test]
    fn continuity_needs_bunching_room() {
        let ok = ExperimentConfig::from_toml_str(
            "[matrix]\npreset = \"continuity\"\n[run]\nmode = \"continuity\"\n",
            None,
        );
        assert!(ok.is_ok());
        assert!(message(cfg("continuity", "")).contains("λ_wu² > λ_su"));
    }

    #[test]
    fn unknown_keys_and_modes_rejected() {
        assert!(message(cfg("spectrum", "bogus = 1")).contains("bogus"));
        assert!(message(cfg("nonsense", "")).contains("unknown mode"));
    }
}
