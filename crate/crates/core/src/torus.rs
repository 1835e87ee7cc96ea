//! Points of T^d = R^d / Z^d for d = 3, 4, and exact integer actions on them.
//!
//! Coordinates are stored as `f64` in `[0, 1)`. Integer matrices act through a
//! 64-bit fixed-point lift, so `L^n` is applied exactly modulo 1 no matter how
//! large its entries get; only the final rounding back to `f64` loses bits.

use std::fmt;

pub const MAX_DIM: usize = 4;

const TWO_64: f64 = 18_446_744_073_709_551_616.0;
const TWO_M53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Reduce a real number into `[0, 1)`.
///
/// Values that land in `[1 - 1e-15, 1)` are clamped to 0 so that points near
/// the seam have a single representative on every platform.
#[inline]
pub fn reduce_unit(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 - 1e-15 || !(r >= 0.0) {
        0.0
    } else {
        r
    }
}

/// Distance between two residues on the circle.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 1.0;
    d.min(1.0 - d)
}

#[derive(Clone, Copy, PartialEq)]
pub struct TorusPoint {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl TorusPoint {
    /// Build a point, reducing every coordinate mod 1.
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "torus dimension must be 1..=4"
        );
        let mut c = [0.0; MAX_DIM];
        for (dst, &src) in c.iter_mut().zip(coords) {
            *dst = reduce_unit(src);
        }
        TorusPoint {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&vec![0.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    /// Padded coordinate array (unused slots are zero).
    #[inline]
    pub fn raw(&self) -> [f64; MAX_DIM] {
        self.coords
    }

    #[inline]
    pub(crate) fn from_raw(coords: [f64; MAX_DIM], dim: usize) -> Self {
        let mut c = [0.0; MAX_DIM];
        for i in 0..dim {
            c[i] = reduce_unit(coords[i]);
        }
        TorusPoint { coords: c, dim: dim as u8 }
    }

    /// Max over coordinates of the circle distance.
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| circle_dist(*a, *b))
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{:?}", self.coords())
    }
}

#[inline]
fn to_fixed(x: f64) -> u64 {
    // x in [0,1): x * 2^64 < 2^64, and `as` truncates toward zero.
    (x * TWO_64) as u64
}

#[inline]
fn from_fixed(k: u64) -> f64 {
    // keep the top 53 bits so the result is exactly representable and < 1
    ((k >> 11) as f64) * TWO_M53
}

/// An integer matrix acting on the torus, stored modulo 2^64.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntAction {
    m: [[u64; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl IntAction {
    /// `entries` is row-major d×d.
    pub fn from_entries(dim: usize, entries: &[i64]) -> Self {
        assert_eq!(entries.len(), dim * dim);
        let mut m = [[0u64; MAX_DIM]; MAX_DIM];
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = entries[i * dim + j] as u64;
            }
        }
        IntAction { m, dim }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = [[0u64; MAX_DIM]; MAX_DIM];
        for (i, row) in m.iter_mut().enumerate().take(dim) {
            row[i] = 1;
        }
        IntAction { m, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matrix product `self * other`, wrapping mod 2^64.
    pub fn compose(&self, other: &IntAction) -> IntAction {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut m = [[0u64; MAX_DIM]; MAX_DIM];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0u64;
                for k in 0..d {
                    acc = acc.wrapping_add(self.m[i][k].wrapping_mul(other.m[k][j]));
                }
                m[i][j] = acc;
            }
        }
        IntAction { m, dim: d }
    }

    pub fn pow(&self, n: u32) -> IntAction {
        let mut result = IntAction::identity(self.dim);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.compose(&base);
            }
            base = base.compose(&base);
            e >>= 1;
        }
        result
    }

    #[inline]
    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        debug_assert_eq!(p.dim(), self.dim);
        let d = self.dim;
        let mut k = [0u64; MAX_DIM];
        for (i, ki) in k.iter_mut().enumerate().take(d) {
            *ki = to_fixed(p.coords[i]);
        }
        let mut out = [0.0; MAX_DIM];
        for i in 0..d {
            let mut acc = 0u64;
            for j in 0..d {
                acc = acc.wrapping_add(self.m[i][j].wrapping_mul(k[j]));
            }
            out[i] = from_fixed(acc);
        }
        TorusPoint::from_raw(out, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_lands_in_unit_interval() {
        for v in [-3.25, -1e-18, 0.0, 0.999_999_999_999_999_9, 1.0, 7.5, 1e9 + 0.25] {
            let r = reduce_unit(v);
            assert!((0.0..1.0).contains(&r), "{v} -> {r}");
        }
        assert_eq!(reduce_unit(-0.25), 0.75);
        assert_eq!(reduce_unit(1.0 - 1e-16), 0.0);
    }

    #[test]
    fn fixed_point_action_matches_exact_rationals() {
        // points with small dyadic denominators are acted on exactly
        let m = IntAction::from_entries(3, &[2, 1, 0, 1, 2, 1, 0, 1, 1]);
        let p = TorusPoint::new(&[0.5, 0.25, 0.125]);
        let q = m.apply(&p);
        assert_eq!(q.coords(), &[0.25, 0.125, 0.375]);
    }

    #[test]
    fn large_powers_stay_exact_mod_one() {
        // on the 2^-40 grid nothing is rounded, so M^k then M^-k is the identity
        let m = IntAction::from_entries(3, &[2, 1, 0, 1, 2, 1, 0, 1, 1]);
        let inv = IntAction::from_entries(3, &[1, -1, 1, -1, 2, -2, 1, -2, 3]);
        let g = 2f64.powi(-40);
        let p = TorusPoint::new(&[123_456_789.0 * g, 987_654_321_123.0 * g, 0.5]);
        let q = inv.pow(25).apply(&m.pow(25).apply(&p));
        assert_eq!(q, p);
        let step = (0..25).fold(p, |acc, _| m.apply(&acc));
        assert_eq!(step, m.pow(25).apply(&p));
    }
}
