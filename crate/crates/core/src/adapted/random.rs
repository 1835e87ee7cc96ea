use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use nalgebra::Matrix2;
use rand::Rng;

use super::arc::Arc;
use super::model::{verify_model, AdaptedFamilyModel, Child, ModelCheck};
use super::AdaptedError;

/// Ranges for random model generation. `beta`, `delta` and `lambda` are drawn
/// log-uniformly; counts uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSpec {
    pub atoms: (usize, usize),
    pub children: (usize, usize),
    pub beta: (f64, f64),
    pub delta: (f64, f64),
    pub lambda: (f64, f64),
    pub max_attempts: usize,
    /// Give the first two good branches of every atom shears that collapse
    /// opposite halves of the complement, so each half is rescued whole.
    pub split_rescue: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            atoms: (2, 5),
            children: (2, 4),
            beta: (0.02, 0.49),
            delta: (0.01, 0.3),
            lambda: (1.1, 8.0),
            max_attempts: 10_000,
            split_rescue: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomModel {
    pub model: AdaptedFamilyModel,
    pub check: ModelCheck,
    /// Draws rejected before this one passed H1–H5.
    pub rejected: usize,
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn rot(a: f64) -> Matrix2<f64> {
    Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos())
}

/// A good branch from cone `src` to cone `dst`: rotate the source center to
/// the axis, shear, contract the transverse direction, rotate onto the target
/// center. The shear moves the direction each branch collapses, so different
/// branches rescue different bad directions.
fn good_matrix<R: Rng>(
    rng: &mut R,
    src: &Arc,
    dst: &Arc,
    lambda: f64,
    side: Option<bool>,
    slot: (usize, usize),
) -> Matrix2<f64> {
    let th = src.half.tan();
    let kappa = match side {
        // collapse the middle of one half of the complement
        Some(pos) => {
            let k = rng.gen_range(0.9..1.1) / ((FRAC_PI_2 + src.half) / 2.0).tan();
            if pos {
                k
            } else {
                -k
            }
        }
        // one shear band per branch keeps the collapsed directions apart
        None => (-0.5 + (slot.0 as f64 + rng.gen_range(0.0..1.0)) / slot.1 as f64) / th,
    };
    // |x + κy| ≥ (1 − |κ| tan h)·cos h on the source cone
    let floor = src.half.cos() * (1.0 - kappa.abs() * th);
    let s1 = lambda * rng.gen_range(1.0..1.5) / floor;
    let ratio = log_uniform(rng, (0.005, 0.3)) * dst.half.tan() / th;
    let s2 = s1 * ratio.min(1.0);
    rot(dst.center) * Matrix2::new(s1, 0.0, 0.0, s2) * Matrix2::new(1.0, kappa, 0.0, 1.0) * rot(-src.center)
}

fn bad_matrix<R: Rng>(rng: &mut R) -> Matrix2<f64> {
    let d = Matrix2::new(rng.gen_range(-1.0..1.5f64).exp(), 0.0, 0.0, rng.gen_range(-1.0..1.5f64).exp());
    rot(rng.gen_range(0.0..PI)) * d * rot(rng.gen_range(0.0..PI))
}

fn draw<R: Rng>(rng: &mut R, spec: &RandomSpec) -> AdaptedFamilyModel {
    let beta = log_uniform(rng, spec.beta);
    let delta = log_uniform(rng, spec.delta);
    let lambda = log_uniform(rng, spec.lambda);
    let k = rng.gen_range(spec.atoms.0..=spec.atoms.1);
    let cones: Vec<Arc> = (0..k)
        .map(|_| Arc::new(rng.gen_range(0.0..PI), rng.gen_range(0.2..0.6)))
        .collect();
    let mut children = Vec::with_capacity(k);
    for i in 0..k {
        let n = rng.gen_range(spec.children.0..=spec.children.1);
        // a ring through all atoms plus a loop at atom 0: irreducible and aperiodic
        let targets: Vec<usize> = (0..n)
            .map(|j| match j {
                0 => (i + 1) % k,
                1 if i == 0 => 0,
                _ => rng.gen_range(0..k),
            })
            .collect();
        let bad_weight = if n > 1 && rng.gen_bool(0.6) {
            delta * rng.gen_range(0.2..0.95)
        } else {
            0.0
        };
        let n_good = if bad_weight > 0.0 { n - 1 } else { n };
        let raw: Vec<f64> = (0..n_good).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = raw.iter().sum();
        let mut ch: Vec<Child> = targets[..n_good]
            .iter()
            .zip(&raw)
            .enumerate()
            .map(|(j, (&t, w))| {
                let side = (spec.split_rescue && j < 2).then_some(j == 0);
                Child {
                    target: t,
                    weight: w / total * (1.0 - bad_weight),
                    matrix: good_matrix(rng, &cones[i], &cones[t], lambda, side, (j, n_good)),
                    good: true,
                }
            })
            .collect();
        if bad_weight > 0.0 {
            ch.push(Child {
                target: targets[n - 1],
                weight: bad_weight,
                matrix: bad_matrix(rng),
                good: false,
            });
        }
        children.push(ch);
    }
    AdaptedFamilyModel {
        cones,
        children,
        beta,
        delta,
        lambda,
    }
}

/// Rejection-sample a model satisfying H1–H5.
pub fn random_adapted_model<R: Rng>(rng: &mut R, spec: &RandomSpec) -> Result<RandomModel, AdaptedError> {
    for rejected in 0..spec.max_attempts {
        let model = draw(rng, spec);
        let check = verify_model(&model);
        if check.all() && model.bound_inputs().validate().is_ok() {
            return Ok(RandomModel {
                model,
                check,
                rejected,
            });
        }
    }
    Err(AdaptedError::Domain(format!(
        "no model passed H1–H5 in {} draws",
        spec.max_attempts
    )))
}

/// One line of the bound-versus-oracle table.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub model_id: usize,
    pub beta: f64,
    pub delta: f64,
    pub lambda: f64,
    pub inv_norm: f64,
    pub bound: f64,
    pub brute_force: f64,
}

impl BoundRow {
    pub fn slack(&self) -> f64 {
        self.brute_force - self.bound
    }
}

pub fn write_results_csv<W: Write>(w: W, rows: &[BoundRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model_id",
        "beta",
        "delta",
        "lambda",
        "inv_norm",
        "bound",
        "brute_force",
        "slack",
    ])?;
    for r in rows {
        out.write_record(&[
            r.model_id.to_string(),
            r.beta.to_string(),
            r.delta.to_string(),
            r.lambda.to_string(),
            r.inv_norm.to_string(),
            r.bound.to_string(),
            r.brute_force.to_string(),
            r.slack().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapted::{brute_force_exponent, in_decomposition_check, lower_bound};
    use crate::sampling::stream_rng;

    #[test]
    fn generated_models_verify_and_round_trip() {
        let mut rng = stream_rng(7, 0);
        for _ in 0..20 {
            let r = random_adapted_model(&mut rng, &RandomSpec::default()).unwrap();
            assert!(verify_model(&r.model).all());
            let back: AdaptedFamilyModel = r.model.to_text().parse().unwrap();
            assert_eq!(back, r.model);
        }
    }

    #[test]
    fn bound_holds_on_a_sample() {
        let mut rng = stream_rng(11, 0);
        let mut rows = Vec::new();
        for id in 0..40 {
            let r = random_adapted_model(&mut rng, &RandomSpec::default()).unwrap();
            let inputs = r.model.bound_inputs();
            let chi = brute_force_exponent(&r.model, 20, 1e-4).unwrap();
            let bound = lower_bound(&inputs).unwrap();
            assert!(chi >= bound, "model {id}: {chi} < {bound}");
            rows.push(BoundRow {
                model_id: id,
                beta: inputs.beta,
                delta: inputs.delta,
                lambda: inputs.lambda,
                inv_norm: inputs.inv_norm,
                bound,
                brute_force: chi,
            });
        }
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model_id,beta,delta,lambda,inv_norm,bound,brute_force,slack\n"));
        assert_eq!(text.lines().count(), 41);
    }

    #[test]
    fn decomposition_on_a_large_model() {
        let spec = RandomSpec {
            atoms: (50, 50),
            children: (3, 3),
            beta: (0.01, 0.02),
            ..RandomSpec::default()
        };
        let r = random_adapted_model(&mut stream_rng(3, 0), &spec).unwrap();
        assert_eq!(r.model.atoms(), 50);
        for atom in [0, 17, 49] {
            assert!(in_decomposition_check(&r.model, atom, 0.4, 8) < 1e-9);
        }
    }
}
