use num::{BigRational, ToPrimitive};

use super::poly::{isolate_real_roots, Poly};
use super::LatticeError;
use crate::torus::IntAction;

/// An integer matrix with determinant ±1, acting on T^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ToralAutomorphism {
    dim: usize,
    entries: Vec<i64>,
    det: i64,
}

fn det_i128(d: usize, m: &[i128]) -> i128 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => {
            // cofactor expansion along the first row; d <= 4 keeps this cheap
            let mut acc = 0i128;
            for j in 0..d {
                let mut minor = Vec::with_capacity((d - 1) * (d - 1));
                for r in 1..d {
                    for c in 0..d {
                        if c != j {
                            minor.push(m[r * d + c]);
                        }
                    }
                }
                let sign = if j % 2 == 0 { 1 } else { -1 };
                acc += sign * m[j] * det_i128(d - 1, &minor);
            }
            acc
        }
    }
}

fn matmul_i128(d: usize, a: &[i128], b: &[i128]) -> Vec<i128> {
    let mut out = vec![0i128; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

impl ToralAutomorphism {
    /// `entries` is row-major. Fails unless `dim` is 3 or 4 and `|det| = 1`.
    pub fn new(dim: usize, entries: Vec<i64>) -> Result<Self, LatticeError> {
        if !(3..=4).contains(&dim) || entries.len() != dim * dim {
            return Err(LatticeError::BadShape {
                dim,
                len: entries.len(),
            });
        }
        let wide: Vec<i128> = entries.iter().map(|&v| v as i128).collect();
        let det = det_i128(dim, &wide);
        if det.abs() != 1 {
            return Err(LatticeError::NotUnimodular(det));
        }
        Ok(ToralAutomorphism {
            dim,
            entries,
            det: det as i64,
        })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, LatticeError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LatticeError::BadShape {
                dim,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.dim).map(<[i64]>::to_vec).collect()
    }

    pub fn det(&self) -> i64 {
        self.det
    }

    pub fn identity(dim: usize) -> Self {
        let mut e = vec![0; dim * dim];
        for i in 0..dim {
            e[i * dim + i] = 1;
        }
        Self::new(dim, e).expect("identity is unimodular")
    }

    /// Characteristic polynomial det(xI - M), coefficients ascending, monic.
    ///
    /// Faddeev–LeVerrier in exact integer arithmetic: the divisions by k are exact.
    pub fn char_poly(&self) -> Vec<i64> {
        let d = self.dim;
        let a: Vec<i128> = self.entries.iter().map(|&v| v as i128).collect();
        let mut coeffs = vec![0i128; d + 1];
        coeffs[d] = 1;
        let mut m = vec![0i128; d * d]; // M_0 = 0
        for k in 1..=d {
            // M_k = A M_{k-1} + c_{d-k+1} I
            let mut mk = matmul_i128(d, &a, &m);
            for i in 0..d {
                mk[i * d + i] += coeffs[d - k + 1];
            }
            let am = matmul_i128(d, &a, &mk);
            let tr: i128 = (0..d).map(|i| am[i * d + i]).sum();
            debug_assert_eq!(tr % k as i128, 0);
            coeffs[d - k] = -tr / k as i128;
            m = mk;
        }
        coeffs.into_iter().map(|c| c as i64).collect()
    }

    /// Exact inverse (adjugate times det).
    pub fn inverse(&self) -> ToralAutomorphism {
        let d = self.dim;
        let wide: Vec<i128> = self.entries.iter().map(|&v| v as i128).collect();
        let mut inv = vec![0i64; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut minor = Vec::with_capacity((d - 1) * (d - 1));
                for r in 0..d {
                    for c in 0..d {
                        if r != j && c != i {
                            minor.push(wide[r * d + c]);
                        }
                    }
                }
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                inv[i * d + j] = (sign * det_i128(d - 1, &minor) * self.det as i128) as i64;
            }
        }
        ToralAutomorphism::new(d, inv).expect("inverse of unimodular is unimodular")
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn compose(&self, other: &ToralAutomorphism) -> ToralAutomorphism {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let a: Vec<i128> = self.entries.iter().map(|&v| v as i128).collect();
        let b: Vec<i128> = other.entries.iter().map(|&v| v as i128).collect();
        let p = matmul_i128(d, &a, &b);
        let entries = p
            .into_iter()
            .map(|v| i64::try_from(v).expect("product entries overflow i64"))
            .collect();
        ToralAutomorphism::new(d, entries).expect("product of unimodular is unimodular")
    }

    /// Exact power for `p >= 0`, `None` on i64 overflow.
    pub fn checked_pow(&self, p: u32) -> Option<ToralAutomorphism> {
        let d = self.dim;
        let a: Vec<i128> = self.entries.iter().map(|&v| v as i128).collect();
        let mut acc: Vec<i128> = ToralAutomorphism::identity(d)
            .entries
            .iter()
            .map(|&v| v as i128)
            .collect();
        for _ in 0..p {
            acc = matmul_i128(d, &acc, &a);
            if acc.iter().any(|v| v.abs() > i64::MAX as i128 / 64) {
                return None;
            }
        }
        let entries = acc.into_iter().map(|v| v as i64).collect();
        ToralAutomorphism::new(d, entries).ok()
    }

    /// Torus action of `M^power` (negative powers use the exact inverse).
    pub fn action(&self, power: i32) -> IntAction {
        let base = if power < 0 { self.inverse() } else { self.clone() };
        IntAction::from_entries(self.dim, &base.entries).pow(power.unsigned_abs())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&v| v as f64).collect()
    }
}

/// One real eigenvalue, enclosed in `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootInterval {
    pub lo: f64,
    pub hi: f64,
}

impl RootInterval {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn abs_value(&self) -> f64 {
        self.mid().abs()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Certified real spectrum of a toral automorphism.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// det(xI - M), ascending coefficients.
    pub char_poly: Vec<i64>,
    /// Real eigenvalues sorted by absolute value, descending.
    pub eigenvalues: Vec<RootInterval>,
    pub multiplicities: Vec<usize>,
    /// Number of complex-conjugate pairs (counted with multiplicity).
    pub complex_pairs: usize,
    /// No eigenvalue on the unit circle.
    pub hyperbolic: bool,
}

impl Spectrum {
    /// Point values (interval midpoints) in the same order as `eigenvalues`.
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(RootInterval::mid).collect()
    }

    pub fn log_abs(&self) -> Vec<f64> {
        self.values().iter().map(|v| v.abs().ln()).collect()
    }

    pub fn is_simple_real(&self) -> bool {
        self.complex_pairs == 0 && self.multiplicities.iter().all(|&m| m == 1)
    }

    /// Enclosure of the product of all eigenvalues (with multiplicity).
    pub fn product_enclosure(&self) -> (f64, f64) {
        let mut lo = 1.0f64;
        let mut hi = 1.0f64;
        for (r, &m) in self.eigenvalues.iter().zip(&self.multiplicities) {
            for _ in 0..m {
                let c = [lo * r.lo, lo * r.hi, hi * r.lo, hi * r.hi];
                lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        (lo, hi)
    }

    pub fn ensure_hyperbolic(&self) -> Result<(), LatticeError> {
        if self.hyperbolic {
            Ok(())
        } else {
            Err(LatticeError::EigenvalueOnUnitCircle)
        }
    }

    pub fn expanding_count(&self) -> usize {
        self.eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .filter(|(r, _)| r.lo.abs() > 1.0 && r.hi.abs() > 1.0)
            .map(|(_, m)| *m)
            .sum()
    }

    /// CSV rows `index, lo, hi, abs_value`.
    pub fn csv_rows(&self) -> Vec<(usize, f64, f64, f64)> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.lo, r.hi, r.abs_value()))
            .collect()
    }
}

fn outward(lo: &BigRational, hi: &BigRational) -> RootInterval {
    let l = lo.to_f64().unwrap();
    let h = hi.to_f64().unwrap();
    RootInterval {
        lo: l.next_down(),
        hi: h.next_up(),
    }
}

/// Isolate every real eigenvalue of `m` by exact Sturm sequences.
///
/// Intervals are refined well below the required 1e-12 width so that their
/// midpoints are accurate to the last bit that matters downstream.
pub fn certify_spectrum(m: &ToralAutomorphism) -> Result<Spectrum, LatticeError> {
    if m.det().abs() != 1 {
        return Err(LatticeError::NotUnimodular(m.det() as i128));
    }
    let cp = m.char_poly();
    let poly = Poly::from_ints(&cp);
    let mut roots: Vec<(RootInterval, usize)> = Vec::new();
    let mut real_count = 0;
    let mut on_circle = false;
    for (factor, mult) in poly.square_free() {
        let mut f = factor;
        // a monic integer factor with constant term ±1 can only have ±1 as
        // rational roots; peel them off so bisection midpoints are never roots
        for r in [1i64, -1] {
            let x = BigRational::from_integer(r.into());
            while f.degree() > 0 && f.sign_at(&x) == 0 {
                f = f.div_rem(&Poly::from_ints(&[-r, 1])).0;
                roots.push((
                    RootInterval {
                        lo: r as f64,
                        hi: r as f64,
                    },
                    mult,
                ));
                real_count += mult;
                on_circle = true;
            }
        }
        if f.degree() == 0 {
            continue;
        }
        for r in isolate_real_roots(&f, 1e-18) {
            roots.push((outward(&r.lo, &r.hi), mult));
            real_count += mult;
        }
    }
    let complex_pairs = (m.dim() - real_count) / 2;
    if complex_pairs > 0 && !on_circle {
        on_circle = complex_modulus_near_one(m);
    }
    roots.sort_by(|a, b| b.0.abs_value().total_cmp(&a.0.abs_value()));
    let spec = Spectrum {
        char_poly: cp,
        multiplicities: roots.iter().map(|r| r.1).collect(),
        eigenvalues: roots.into_iter().map(|r| r.0).collect(),
        complex_pairs,
        hyperbolic: !on_circle,
    };
    Ok(spec)
}

fn complex_modulus_near_one(m: &ToralAutomorphism) -> bool {
    let d = m.dim();
    let mat = nalgebra::DMatrix::from_row_slice(d, d, &m.to_f64());
    mat.complex_eigenvalues()
        .iter()
        .any(|z| z.im.abs() > 1e-12 && (z.norm() - 1.0).abs() < 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m3() -> ToralAutomorphism {
        ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 1]]).unwrap()
    }

    #[test]
    fn default_matrix_char_poly() {
        assert_eq!(m3().char_poly(), vec![-1, 6, -5, 1]);
    }

    #[test]
    fn default_matrix_spectrum() {
        let s = certify_spectrum(&m3()).unwrap();
        let v = s.values();
        let want = [3.246_979_603_717_467, 1.554_958_132_087_371, 0.198_062_264_195_162];
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for r in &s.eigenvalues {
            assert!(r.width() <= 1e-12);
        }
        let (lo, hi) = s.product_enclosure();
        assert!(lo <= 1.0 + 1e-9 && hi >= 1.0 - 1e-9);
        assert!(s.hyperbolic && s.is_simple_real());
    }

    #[test]
    fn inverse_spectrum_is_reciprocal() {
        let s = certify_spectrum(&m3().inverse()).unwrap();
        let v = s.values();
        for (a, b) in v.iter().zip([5.0489, 0.6431, 0.3080]) {
            assert!((a - b).abs() < 1e-4);
        }
        let fwd = certify_spectrum(&m3()).unwrap().values();
        assert!((v[0] * fwd[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_flagged_non_hyperbolic() {
        let s = certify_spectrum(&ToralAutomorphism::identity(3)).unwrap();
        assert_eq!(s.values(), vec![1.0]);
        assert_eq!(s.multiplicities, vec![3]);
        assert!(!s.hyperbolic);
        assert!(s.ensure_hyperbolic().is_err());
    }

    #[test]
    fn rejects_non_unimodular() {
        let r = ToralAutomorphism::from_rows(&[vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert!(matches!(r, Err(LatticeError::NotUnimodular(2))));
    }

    #[test]
    fn inverse_and_compose() {
        let m = m3();
        assert_eq!(m.compose(&m.inverse()), ToralAutomorphism::identity(3));
        assert_eq!(m.checked_pow(3).unwrap(), m.compose(&m).compose(&m));
    }

    #[test]
    fn quartic_companion_square() {
        // inverse companion of x^4 - x^3 - 4x^2 + 4x + 1, squared
        let c = ToralAutomorphism::from_rows(&[
            vec![0, 0, 0, -1],
            vec![1, 0, 0, -4],
            vec![0, 1, 0, 4],
            vec![0, 0, 1, 1],
        ])
        .unwrap();
        let ci = c.inverse();
        let m = ci.compose(&ci);
        let s = certify_spectrum(&m).unwrap();
        assert!(s.is_simple_real() && s.hyperbolic);
        assert_eq!(s.expanding_count(), 1);
        let (lo, hi) = s.product_enclosure();
        assert!(lo <= 1.0 + 1e-9 && hi >= 1.0 - 1e-9);
    }
}
