//! The unstable cone field, its invariance threshold, and expansion on the
//! shear plane.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix2, Vector2, Vector4};
use rand::Rng;

use super::{in_good_cone, GeometryError, Region, RegionSpec, ShearSetup};
use crate::sampling::{par_indexed, random_point, stream_rng};

/// Closeness of new and old unstable foliations used for strip crossings.
pub const EPSILON_M: f64 = 1.0 / 20.0;

const C_GRID: usize = 65;
const BATCHES: usize = 64;

/// Smallest invariant cone half-width around a dominant direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeThreshold {
    /// `sup a/(1−K)`; infinite when the complement is not dominated.
    pub gamma: f64,
    /// Sup over shear coefficients of the leak of the dominant direction.
    pub a: f64,
    /// Sup of the complement's norm relative to the dominant rate.
    pub k: f64,
}

/// Orthonormal basis (chart coordinates) of the span of all eigenvectors but `dom`.
fn complement_basis(s: &ShearSetup, dom: usize) -> Vec<Vector4<f64>> {
    let mut q: Vec<Vector4<f64>> = Vec::new();
    for (i, v) in s.vectors.iter().enumerate() {
        if i == dom {
            continue;
        }
        let mut u = *v;
        for b in &q {
            u -= b * b.dot(&u);
        }
        q.push(u / u.norm());
    }
    q
}

/// One shear coefficient: (a, K) for the map `w ↦ Λ^p (w + c (e_x·v) β)`.
fn leak_and_norm(s: &ShearSetup, q: &[Vector4<f64>], dom: usize, power: i32, c: f64) -> (f64, f64) {
    let lam = s.eigenvalues[dom].powi(power).abs();
    let mut e = Vector4::zeros();
    e[dom] = 1.0;
    let mut img = s.tangent_step(&e, c, power);
    img[dom] = 0.0;
    let a = s.from_eigen(&img).norm() / lam;
    let k = q.len();
    let mut m = DMatrix::zeros(k, k);
    for (j, qj) in q.iter().enumerate() {
        let mut w = s.tangent_step(&s.to_eigen(qj), c, power);
        w[dom] = 0.0;
        let img = s.from_eigen(&w);
        for (i, qi) in q.iter().enumerate() {
            m[(i, j)] = qi.dot(&img);
        }
    }
    let norm = m.singular_values().max();
    (a, norm / lam)
}

fn threshold(s: &ShearSetup, dom: usize, power: i32, sign: f64, t: f64) -> ConeThreshold {
    let q = complement_basis(s, dom);
    let mut out = ConeThreshold {
        gamma: 0.0,
        a: 0.0,
        k: 0.0,
    };
    for j in 0..C_GRID {
        let c = sign * TAU * t * (PI * j as f64 / (C_GRID - 1) as f64).cos();
        let (a, k) = leak_and_norm(s, &q, dom, power, c);
        out.a = out.a.max(a);
        out.k = out.k.max(k);
        let g = if k < 1.0 { a / (1.0 - k) } else { f64::INFINITY };
        out.gamma = out.gamma.max(g);
    }
    out
}

/// Invariance threshold of `C^u_γ = {v_u + w : w ∈ E^s, ‖w‖ < γ}` under
/// `D(L^n ∘ f_t)`. Any γ at or above `gamma` gives an invariant cone field.
///
/// With `backward`, the dual cone around `v_ss` under `D(L^{-n} ∘ f_{-t})`
/// (dimension 4), whose complement is `E^u ⊕ E^ws ⊕ E^ms`.
pub fn cone_threshold(s: &ShearSetup, n: i32, t: f64, backward: bool) -> ConeThreshold {
    if backward {
        threshold(s, s.dim() - 1, -n, -1.0, t)
    } else {
        threshold(s, 0, n, 1.0, t)
    }
}

/// Largest γ for which curves tangent to `C^u_γ` cross every vertical strip
/// with length within `ε_M` of `s / sin θ_u`, capped below `min(θ_u/2, ε_M)`.
pub fn gamma_m(s: &ShearSetup) -> f64 {
    // the crossing length of a curve with tangent v_u + w is s/(v_x/‖v‖);
    // v_x ∈ [sinθ − γ, sinθ + γ] and ‖v‖ ∈ [1 − γ, 1 + γ]
    let st = s.sin_theta_u();
    let g1 = EPSILON_M * st / (1.0 + EPSILON_M + st);
    let g2 = EPSILON_M * st / (1.0 - EPSILON_M + st);
    let g = g1.min(g2).min(0.5 * s.theta_u()).min(EPSILON_M);
    g * (1.0 - 1e-9)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeTestReport {
    pub samples: usize,
    pub violations: usize,
    /// Extremes of `‖Dg v‖/‖v‖` over cone vectors.
    pub expansion_min: f64,
    pub expansion_max: f64,
    /// Samples whose expansion left `λ_u^n (1∓γ)/(1±γ)`.
    pub expansion_violations: usize,
}

fn random_unit<R: Rng>(rng: &mut R, q: &[Vector4<f64>]) -> Vector4<f64> {
    loop {
        let mut v = Vector4::zeros();
        for b in q {
            v += b * (2.0 * rng.gen::<f64>() - 1.0);
        }
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Monte Carlo check that `D(L^n ∘ f_t)` maps `C^u_γ` into itself, and that
/// unstable vectors expand at the rate the cone allows.
pub fn unstable_cone_test(
    s: &ShearSetup,
    n: i32,
    t: f64,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> ConeTestReport {
    let q = complement_basis(s, 0);
    let k = q.len() as f64;
    let lam = s.lambda_u().powi(n);
    let lo = lam * (1.0 - gamma) / (1.0 + gamma);
    let hi = lam * (1.0 + gamma) / (1.0 - gamma);
    let shear = s.shear(t);
    let per = samples.div_ceil(BATCHES);
    let parts = par_indexed(BATCHES, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let count = per.min(samples.saturating_sub(b * per));
        let mut rep = ConeTestReport {
            samples: count,
            violations: 0,
            expansion_min: f64::INFINITY,
            expansion_max: 0.0,
            expansion_violations: 0,
        };
        for _ in 0..count {
            let p = random_point(&mut rng, s.dim());
            let c = shear.coefficient_at_x(p.x());
            let r = gamma * rng.gen::<f64>().powf(1.0 / k);
            let w = random_unit(&mut rng, &q) * r;
            let v = s.v_u() + w;
            let mut img = s.tangent_step(&s.to_eigen(&v), c, n);
            let alpha = img[0];
            img[0] = 0.0;
            let leak = s.from_eigen(&img);
            if leak.norm() >= gamma * alpha.abs() {
                rep.violations += 1;
            }
            let factor = (s.v_u() * alpha + leak).norm() / v.norm();
            rep.expansion_min = rep.expansion_min.min(factor);
            rep.expansion_max = rep.expansion_max.max(factor);
            if !(factor > lo && factor < hi) {
                rep.expansion_violations += 1;
            }
        }
        rep
    });
    parts.into_iter().fold(
        ConeTestReport {
            samples: 0,
            violations: 0,
            expansion_min: f64::INFINITY,
            expansion_max: 0.0,
            expansion_violations: 0,
        },
        |acc, r| ConeTestReport {
            samples: acc.samples + r.samples,
            violations: acc.violations + r.violations,
            expansion_min: acc.expansion_min.min(r.expansion_min),
            expansion_max: acc.expansion_max.max(r.expansion_max),
            expansion_violations: acc.expansion_violations + r.expansion_violations,
        },
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionReport {
    /// Min of `‖Av‖/‖v‖` over good points and good-cone vectors.
    pub min_good_factor: f64,
    /// Min of `‖Av‖/‖v‖` over all points and plane vectors.
    pub min_global_factor: f64,
    pub good_samples: usize,
    /// Good samples whose image stayed in `C_g`.
    pub good_in_cone: usize,
    /// `min_good_factor / (λ_ws^n t^{1−α})`.
    pub strong_constant: f64,
    /// `min_global_factor / (λ^n / t)` with λ the strong plane eigenvalue
    /// (`λ_ss` in dim 3, `λ_ms` in dim 4); `/λ^n` at t = 0.
    pub weak_constant: f64,
}

fn adapted_factor(w_inv: &Matrix2<f64>, a: &Matrix2<f64>, v: &Vector2<f64>) -> f64 {
    (w_inv * (a * v)).norm() / (w_inv * v).norm()
}

/// Expansion of the restricted cocycle: strong on good points and good-cone
/// vectors, weak but uniform everywhere. Norms are eigen-adapted.
pub fn expansion_check(
    s: &ShearSetup,
    n: i32,
    t: f64,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<ExpansionReport, GeometryError> {
    let sys = s.system(n, t);
    let (w, w_inv) = s.plane_adapted();
    let region = (t > 1.0).then(|| RegionSpec::new(alpha, t)).transpose()?;
    let is_good = |x: f64| region.is_none_or(|r| r.classify_x(x) != Region::Bad);
    let global = |a: &Matrix2<f64>| (w_inv * a * w).singular_values().min();
    // deterministic points: extremes of |c| and just inside the good edge
    let mut xs = vec![0.0, 0.25, 0.5, 0.75];
    if let Some(r) = region {
        let edge = r.threshold().acos() / TAU;
        xs.extend([edge * (1.0 - 1e-9), 0.5 - edge * (1.0 - 1e-9)]);
    }
    let per = samples.div_ceil(BATCHES);
    let parts: Vec<Result<(f64, f64, usize, usize), GeometryError>> = par_indexed(BATCHES, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let count = per.min(samples.saturating_sub(b * per));
        let (mut g_min, mut all_min, mut good, mut inside) = (f64::INFINITY, f64::INFINITY, 0, 0);
        let mut points = Vec::with_capacity(count + xs.len());
        if b == 0 {
            for &x in &xs {
                let mut p = random_point(&mut rng, s.dim()).coords().to_vec();
                p[0] = x;
                points.push(crate::torus::TorusPoint::new(&p));
            }
        }
        for _ in 0..count {
            points.push(random_point(&mut rng, s.dim()));
        }
        for p in points {
            let (_, a) = sys.restricted_matrix(&p)?;
            all_min = all_min.min(global(&a));
            if !is_good(p.x()) {
                continue;
            }
            for _ in 0..4 {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let v = Vector2::new(sign, 3.0 * (2.0 * rng.gen::<f64>() - 1.0) * (1.0 - 1e-12));
                g_min = g_min.min(adapted_factor(&w_inv, &a, &v));
                good += 1;
                if in_good_cone(&(a * v))? {
                    inside += 1;
                }
            }
        }
        Ok((g_min, all_min, good, inside))
    });
    let mut rep = ExpansionReport {
        min_good_factor: f64::INFINITY,
        min_global_factor: f64::INFINITY,
        good_samples: 0,
        good_in_cone: 0,
        strong_constant: 0.0,
        weak_constant: 0.0,
    };
    for p in parts {
        let (g, a, n_good, n_in) = p?;
        rep.min_good_factor = rep.min_good_factor.min(g);
        rep.min_global_factor = rep.min_global_factor.min(a);
        rep.good_samples += n_good;
        rep.good_in_cone += n_in;
    }
    let lw = s.lambda_ws().powi(n);
    let lp = s.lambda_plane_strong().powi(n);
    rep.strong_constant = rep.min_good_factor / (lw * t.max(1.0).powf(1.0 - alpha));
    rep.weak_constant = if t > 0.0 {
        rep.min_global_factor * t / lp
    } else {
        rep.min_global_factor / lp
    };
    Ok(rep)
}

/// Sup over sampled points of `‖D(L^n ∘ f_t)|plane‖` in the adapted norm,
/// always including the extremes x = 0, 1/2 of the shear.
pub fn plane_norm_sup(s: &ShearSetup, n: i32, t: f64, samples: usize, seed: u64) -> f64 {
    let (w, w_inv) = s.plane_adapted();
    let shear = s.shear(t);
    let norm = |x: f64| (w_inv * s.plane_matrix(n, shear.coefficient_at_x(x)) * w).singular_values().max();
    let mut best = norm(0.0).max(norm(0.5));
    let mut rng = stream_rng(seed, 0);
    for _ in 0..samples {
        best = best.max(norm(rng.gen::<f64>()));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::tests::m3_inv;
    use super::*;

    fn setup() -> ShearSetup {
        ShearSetup::new(&m3_inv()).unwrap()
    }

    #[test]
    fn cone_threshold_scales_linearly_in_t() {
        let s = setup();
        let ts = [1.0, 10.0, 100.0, 1000.0];
        let gs: Vec<f64> = ts.iter().map(|&t| cone_threshold(&s, 8, t, false).gamma).collect();
        let fit = crate::stats::loglog_fit(&ts, &gs);
        assert!((fit.slope - 1.0).abs() < 0.05, "slope {}", fit.slope);
        // at t = 0 the eigen-cone is invariant with zero width
        assert_eq!(cone_threshold(&s, 8, 0.0, false).gamma, 0.0);
    }

    #[test]
    fn cone_invariance_and_negative_control() {
        let s = setup();
        let t = s.lambda_ws().powf(-4.0);
        let g = cone_threshold(&s, 8, t, false).gamma;
        let ok = unstable_cone_test(&s, 8, t, g, 200_000, 5);
        assert_eq!(ok.violations, 0);
        assert_eq!(ok.expansion_violations, 0);
        let bad = unstable_cone_test(&s, 8, t, 0.5 * g, 200_000, 5);
        assert!(bad.violations > 0);
    }

    #[test]
    fn linear_cone_is_exactly_invariant() {
        let s = setup();
        let rep = unstable_cone_test(&s, 6, 0.0, 1e-3, 10_000, 1);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn linear_expansion_is_exact() {
        let s = setup();
        let rep = expansion_check(&s, 5, 0.0, 0.25, 2000, 2).unwrap();
        let exact = s.lambda_ss().powi(5);
        assert!((rep.min_global_factor - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn good_cone_maps_into_itself() {
        let s = setup();
        let t = s.lambda_ws().powf(-4.0);
        let rep = expansion_check(&s, 8, t, 0.25, 20_000, 3).unwrap();
        assert_eq!(rep.good_in_cone, rep.good_samples);
        assert!(rep.strong_constant > 0.0 && rep.weak_constant > 0.0);
    }

    #[test]
    fn gamma_m_below_caps() {
        let s = setup();
        let g = gamma_m(&s);
        assert!(g > 0.0 && g < EPSILON_M && g < 0.5 * s.theta_u());
    }
}
