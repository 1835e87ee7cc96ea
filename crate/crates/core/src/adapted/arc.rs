use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};

use crate::geometry::{angle_dist, projective_angle};

const EPS: f64 = 1e-12;

/// A closed interval of lines, `|angle − center| ≤ half` on the projective
/// circle `[0, π)`, with `half < π/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub center: f64,
    pub half: f64,
}

pub fn unit(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

/// Line angle of `m·e(a)`.
pub fn push(m: &Matrix2<f64>, a: f64) -> f64 {
    projective_angle(&(m * unit(a)))
}

impl Arc {
    pub fn new(center: f64, half: f64) -> Self {
        Arc {
            center: center.rem_euclid(PI),
            half,
        }
    }

    /// Signed offset of `a` from the center, in `(−π/2, π/2]`.
    pub fn offset(&self, a: f64) -> f64 {
        let d = (a - self.center).rem_euclid(PI);
        if d > FRAC_PI_2 {
            d - PI
        } else {
            d
        }
    }

    pub fn contains(&self, a: f64) -> bool {
        self.offset(a).abs() <= self.half + EPS
    }

    pub fn endpoints(&self) -> (f64, f64) {
        (
            (self.center - self.half).rem_euclid(PI),
            (self.center + self.half).rem_euclid(PI),
        )
    }

    /// The arc with endpoints `a1`, `a2` that contains `inner`.
    pub fn through(a1: f64, a2: f64, inner: f64) -> Arc {
        let d = angle_dist(a1, a2);
        // midpoint of the short arc
        let off = {
            let x = (a2 - a1).rem_euclid(PI);
            if x > FRAC_PI_2 {
                x - PI
            } else {
                x
            }
        };
        let short = Arc::new(a1 + off / 2.0, d / 2.0);
        if short.contains(inner) {
            short
        } else {
            Arc::new(short.center + FRAC_PI_2, FRAC_PI_2 - d / 2.0)
        }
    }

    /// Image under the projective action of `m`.
    pub fn image(&self, m: &Matrix2<f64>) -> Arc {
        let (a, b) = self.endpoints();
        Arc::through(push(m, a), push(m, b), push(m, self.center))
    }

    pub fn preimage(&self, m: &Matrix2<f64>) -> Arc {
        self.image(&m.try_inverse().expect("invertible matrix"))
    }

    /// `self ⊂ other`.
    pub fn inside(&self, other: &Arc) -> bool {
        self.clearance(other) >= -EPS
    }

    /// Distance from `self` to the boundary of `other` when `self ⊂ other`;
    /// negative otherwise.
    pub fn clearance(&self, other: &Arc) -> f64 {
        let (a, b) = self.endpoints();
        let (oa, ob, oc) = (other.offset(a), other.offset(b), other.offset(self.center));
        let between = oa.min(ob) - EPS <= oc && oc <= oa.max(ob) + EPS;
        // a wide arc sits between its endpoints only the long way round
        if !between || self.half >= other.half + EPS {
            return -1.0;
        }
        other.half - oa.abs().max(ob.abs())
    }

    /// The closure of the complement cut into `s` equal arcs.
    pub fn complement_pieces(&self, s: usize) -> Vec<Arc> {
        let len = PI - 2.0 * self.half;
        let step = len / s as f64;
        (0..s)
            .map(|i| Arc::new(self.center + self.half + step * (i as f64 + 0.5), step / 2.0))
            .collect()
    }

    /// `min ‖m v‖` over unit `v` in the arc.
    pub fn min_norm(&self, m: &Matrix2<f64>) -> f64 {
        // ‖m e(φ)‖² = p + q cos 2φ + r sin 2φ
        let g = m.transpose() * m;
        let p = 0.5 * (g[(0, 0)] + g[(1, 1)]);
        let q = 0.5 * (g[(0, 0)] - g[(1, 1)]);
        let r = g[(0, 1)];
        let f = |phi: f64| (p + q * (2.0 * phi).cos() + r * (2.0 * phi).sin()).max(0.0).sqrt();
        let (a, b) = self.endpoints();
        let mut best = f(a).min(f(b));
        let crit = 0.5 * (r.atan2(q) + PI);
        if self.contains(crit) {
            best = best.min(f(crit));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_of_cone_under_diagonal() {
        let c = Arc::new(0.0, 0.3);
        let m = Matrix2::new(4.0, 0.0, 0.0, 0.5);
        let im = c.image(&m);
        assert!(im.center.abs() < 1e-12 || (im.center - PI).abs() < 1e-12);
        assert!((im.half - (0.3f64.tan() / 8.0).atan()).abs() < 1e-12);
        assert!(im.inside(&c));
        assert!(!c.inside(&im));
        assert!(im.clearance(&c) > 0.2);
        assert!((c.min_norm(&m) - (16.0 * 0.3f64.cos().powi(2) + 0.25 * 0.3f64.sin().powi(2)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wrapping_and_long_arcs() {
        let c = Arc::new(PI - 0.1, 0.3);
        assert!(c.contains(0.15));
        assert!(!c.contains(0.25));
        let long = Arc::through(0.0, 0.2, 1.0);
        assert!((long.half - (FRAC_PI_2 - 0.1)).abs() < 1e-12);
        assert!(long.contains(2.0) && !long.contains(0.1));
        let pieces = Arc::new(0.0, 0.5).complement_pieces(2);
        assert!(pieces.iter().all(|p| !p.contains(0.0)));
        assert!((pieces[0].half + pieces[1].half - (FRAC_PI_2 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn min_norm_matches_sampling() {
        let m = Matrix2::new(1.0, 2.0, -0.5, 3.0);
        for &(c, h) in &[(0.3, 0.2), (2.0, 1.2), (1.0, 0.01)] {
            let arc = Arc::new(c, h);
            let sampled = (0..=20_000)
                .map(|k| arc.center - h + 2.0 * h * k as f64 / 20_000.0)
                .map(|a| (m * unit(a)).norm())
                .fold(f64::INFINITY, f64::min);
            let exact = arc.min_norm(&m);
            assert!(exact <= sampled + 1e-12 && sampled - exact < 1e-7, "{c} {h}: {exact} vs {sampled}");
        }
    }

    #[test]
    fn preimage_round_trip() {
        let m = Matrix2::new(2.0, 1.0, 1.0, 1.0);
        let a = Arc::new(1.0, 0.4);
        let back = a.preimage(&m).image(&m);
        assert!((back.center - a.center).abs() < 1e-12 && (back.half - a.half).abs() < 1e-12);
    }
}
