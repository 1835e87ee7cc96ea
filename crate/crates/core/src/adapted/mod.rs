//! Lower bounds for the top exponent of rank-2 cocycles that admit an adapted
//! family of vector fields, with finite-state models to test them against.
//!
//! A model replaces the partition by finitely many atoms; each atom splits into
//! weighted children, each child carries one 2×2 matrix and lands on one atom.
//! The base is then a Markov shift and every quantity in the bound (masses,
//! pushed fields, `I_n`) can be enumerated exactly.

mod arc;
mod brute;
mod holder;
mod model;
mod random;

pub use arc::Arc;
pub use brute::{brute_force_exponent, brute_force_exponents, stationary, BruteForce};
pub use holder::{
    appendix_bound, holder_family_check, rescue_structure, HolderModel, HolderReport,
    RescueStructure,
};
pub use model::{
    in_decomposition_check, model_trace, verify_model, AdaptedFamilyModel, Child, Hypothesis,
    ModelCheck, Witness,
};
pub use random::{random_adapted_model, write_results_csv, BoundRow, RandomModel, RandomSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdaptedError {
    #[error("{0}")]
    Domain(String),
    #[error("exponent estimate did not settle by depth {depth} (last change {change:e})")]
    NotConverged { depth: usize, change: f64 },
    #[error("{hypothesis} fails (margin {margin:e})")]
    HypothesisViolated { hypothesis: &'static str, margin: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Constants of an adapted family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    /// Recovery mass of bad fields.
    pub beta: f64,
    /// Bad mass per atom.
    pub delta: f64,
    /// Expansion of good fields over the good region.
    pub lambda: f64,
    /// `‖A⁻¹‖`.
    pub inv_norm: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), AdaptedError> {
        let BoundInputs {
            beta,
            delta,
            lambda,
            inv_norm,
        } = *self;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(AdaptedError::Domain(format!("beta = {beta} must lie in (0, 1]")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(AdaptedError::Domain(format!("delta = {delta} must lie in [0, 1)")));
        }
        if !(lambda > 0.0 && inv_norm.is_finite()) {
            return Err(AdaptedError::Domain(format!(
                "lambda = {lambda} and inv_norm = {inv_norm} must be positive and finite"
            )));
        }
        if !(lambda * inv_norm > 1.0) {
            return Err(AdaptedError::Domain(format!(
                "lambda = {lambda} must exceed 1/‖A⁻¹‖ = {}",
                1.0 / inv_norm
            )));
        }
        Ok(())
    }
}

/// `log λ − ((βδ+δ)/(β+δ))·log(λ‖A⁻¹‖)`.
pub fn lower_bound(b: &BoundInputs) -> Result<f64, AdaptedError> {
    b.validate()?;
    let BoundInputs {
        beta,
        delta,
        lambda,
        inv_norm,
    } = *b;
    Ok(lambda.ln() - (beta * delta + delta) / (beta + delta) * (lambda * inv_norm).ln())
}

/// The same bound in product form, `β/(β+δ)·log(λ^{1−δ}/‖A⁻¹‖^{δ+δ/β})`.
pub fn lower_bound_product_form(b: &BoundInputs) -> Result<f64, AdaptedError> {
    b.validate()?;
    let BoundInputs {
        beta,
        delta,
        lambda,
        inv_norm,
    } = *b;
    Ok(beta / (beta + delta) * ((1.0 - delta) * lambda.ln() - (delta + delta / beta) * inv_norm.ln()))
}

/// Good/bad mass sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodBadTrace {
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    /// `log(g_n − β/(β+δ))` from the shifted recursion; finite means the
    /// strict inequality holds even where `g_n` rounds to the fixed point.
    /// Empty for traces measured on models.
    pub log_excess: Vec<f64>,
}

impl GoodBadTrace {
    pub fn fixed_point(beta: f64, delta: f64) -> f64 {
        beta / (beta + delta)
    }

    /// `g_n > β/(β+δ)` for every recorded `n`.
    pub fn stays_above_fixed_point(&self) -> bool {
        !self.log_excess.is_empty() && self.log_excess.iter().all(|l| l.is_finite())
    }
}

/// Worst case `g_{n+1} = (1−β−δ)g_n + β` from `g_0 = 1`, `n = 0..=n_max`.
///
/// The deviation from the fixed point obeys `e_{n+1} = (1−β−δ)e_n`, tracked in
/// logs so it stays representable. It is positive for all `n` exactly when
/// `β + δ < 1`; for `β + δ ≥ 1` the trace is still produced and
/// [`GoodBadTrace::stays_above_fixed_point`] reports false.
pub fn recursion_trace(beta: f64, delta: f64, n_max: usize) -> GoodBadTrace {
    let rate = 1.0 - beta - delta;
    let mut g = Vec::with_capacity(n_max + 1);
    let mut log_excess = Vec::with_capacity(n_max + 1);
    let mut cur = 1.0;
    let e0 = delta / (beta + delta);
    for n in 0..=n_max {
        g.push(cur);
        cur = rate * cur + beta;
        let le = if delta == 0.0 {
            // g ≡ 1 = fixed point: no strict excess
            f64::NEG_INFINITY
        } else if rate > 0.0 || n == 0 {
            e0.ln() + n as f64 * rate.abs().ln()
        } else {
            f64::NEG_INFINITY
        };
        log_excess.push(le);
    }
    let b = g.iter().map(|x| 1.0 - x).collect();
    GoodBadTrace { g, b, log_excess }
}

/// `g_n = β/(β+δ) + (1−β−δ)^n δ/(β+δ)`.
pub fn recursion_closed_form(beta: f64, delta: f64, n: usize) -> f64 {
    let s = beta + delta;
    beta / s + (1.0 - s).powi(n as i32) * delta / s
}
