//! Preimages of the bad cone over the two good regions stay apart.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use rand::Rng;

use super::{angle_dist, projective_angle, GeometryError, RegionSpec, ShearSetup};
use crate::sampling::{random_point, stream_rng};
use crate::stats::loglog_fit;
use crate::torus::TorusPoint;

const DIRECTIONS: usize = 65;

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationRow {
    pub t: f64,
    /// Projective distance between `C⁺` and `C⁻`.
    pub gap: f64,
    /// Every sampled preimage fell in the interval predicted by shearing the
    /// linear preimage cone by `r ↦ r ∓ 2πt cos 2πx`.
    pub contained: bool,
    pub plus_count: usize,
    pub minus_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub rows: Vec<SeparationRow>,
    /// `e` in `gap ≈ s_L t^{-e}`.
    pub exponent: f64,
    pub r2: f64,
    /// `min gap·t` over the scan.
    pub s_l: f64,
}

/// Directions of the bad cone `|s| ≥ 3|r|`, both edges included.
fn bad_directions() -> Vec<Vector2<f64>> {
    let lo = 3f64.atan();
    let hi = PI - lo;
    (0..DIRECTIONS)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / (DIRECTIONS - 1) as f64;
            Vector2::new(a.cos(), a.sin())
        })
        .collect()
}

/// Gap between `C^± = closure of A(p)⁻¹ C_b` over sampled `p ∈ G^{α±}`.
pub fn separation_at(
    s: &ShearSetup,
    n: i32,
    t: f64,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<SeparationRow, GeometryError> {
    let region = RegionSpec::new(alpha, t)?;
    let sys = s.system(n, t);
    let dirs = bad_directions();
    let edge = region.threshold().acos() / TAU;
    let mut rng = stream_rng(seed, 0);
    // linear preimages L^{-n} u and their slopes s/r
    let w = s.plane().eigenbasis();
    let mu = s.plane().eigenvalues();
    let l_inv = w
        * nalgebra::Matrix2::from_diagonal(&Vector2::new(mu[0].powi(-n), mu[1].powi(-n)))
        * w.try_inverse().expect("eigenbasis invertible");
    let slopes: Vec<f64> = dirs.iter().map(|u| l_inv * u).map(|v| v[1] / v[0]).collect();
    let (k_lo, k_hi) = slopes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &k| (a.min(k), b.max(k)));
    let c_max = TAU * t;
    let c_min = TAU * t * region.threshold();
    let mut labelled: Vec<(f64, bool)> = Vec::new();
    let mut contained = k_lo.is_finite() && k_hi.is_finite();
    for plus in [true, false] {
        let centre = if plus { 0.0 } else { 0.5 };
        let mut xs: Vec<f64> = vec![centre, centre - edge * (1.0 - 1e-9), centre + edge * (1.0 - 1e-9)];
        xs.extend((0..samples).map(|_| centre + edge * (2.0 * rng.gen::<f64>() - 1.0)));
        // shear coefficient range on this region; preimage slope is k − c
        let (q_lo, q_hi) = if plus {
            (k_lo - c_max, k_hi - c_min)
        } else {
            (k_lo + c_min, k_hi + c_max)
        };
        for x in xs {
            let mut p = random_point(&mut rng, s.dim()).coords().to_vec();
            p[0] = x;
            let (_, a) = sys.restricted_matrix(&TorusPoint::new(&p))?;
            let a_inv = a.try_inverse().expect("restricted cocycle is invertible");
            for u in &dirs {
                let v = a_inv * u;
                labelled.push((projective_angle(&v), plus));
                let q = v[1] / v[0];
                let tol = 1e-9 * q.abs().max(1.0);
                if !(q >= q_lo - tol && q <= q_hi + tol) {
                    contained = false;
                }
            }
        }
    }
    let plus_count = labelled.iter().filter(|(_, p)| *p).count();
    let minus_count = labelled.len() - plus_count;
    if plus_count == 0 {
        return Err(GeometryError::EmptyCone("C+"));
    }
    if minus_count == 0 {
        return Err(GeometryError::EmptyCone("C-"));
    }
    labelled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gap = f64::INFINITY;
    let m = labelled.len();
    for i in 0..m {
        let (a, la) = labelled[i];
        let (b, lb) = labelled[(i + 1) % m];
        if la != lb {
            gap = gap.min(angle_dist(a, b));
        }
    }
    Ok(SeparationRow {
        t,
        gap,
        contained,
        plus_count,
        minus_count,
    })
}

/// Separation over a t-grid with the power-law fit `gap ≈ s_L t^{-e}`.
pub fn separation_scan(
    s: &ShearSetup,
    n: i32,
    ts: &[f64],
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<SeparationReport, GeometryError> {
    let rows: Vec<SeparationRow> = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| separation_at(s, n, t, alpha, samples, seed.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let fit = loglog_fit(ts, &gaps);
    let s_l = rows.iter().map(|r| r.gap * r.t).fold(f64::INFINITY, f64::min);
    Ok(SeparationReport {
        rows,
        exponent: -fit.slope,
        r2: fit.r2,
        s_l,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::m3_inv;
    use super::*;

    #[test]
    fn gap_decays_like_one_over_t() {
        let s = ShearSetup::new(&m3_inv()).unwrap();
        let t1 = s.lambda_ws().powf(-4.0);
        let ts: Vec<f64> = (0..5).map(|k| t1 * 10f64.powf(0.5 * k as f64)).collect();
        let rep = separation_scan(&s, 8, &ts, 0.25, 200, 4).unwrap();
        assert!(rep.rows.iter().all(|r| r.gap > 0.0 && r.contained));
        assert!((rep.exponent - 1.0).abs() < 0.1, "exponent {}", rep.exponent);
        assert!(rep.s_l > 0.0);
    }
}
