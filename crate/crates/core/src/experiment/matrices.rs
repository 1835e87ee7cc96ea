//! Default matrices and the small-entry search for strongly partially
//! hyperbolic quartics.

use nalgebra::DMatrix;

use crate::lattice::{certify_spectrum, LatticeError, Spectrum, ToralAutomorphism};

/// `[[2,1,0],[1,2,1],[0,1,1]]`: two expanding eigenvalues, one contracting.
pub fn default_t3() -> ToralAutomorphism {
    ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 1]]).expect("unimodular")
}

/// Companion matrix of `x^d + c_{d−1}x^{d−1} + … + c_0`, coefficients given
/// from `c_{d−1}` down to `c_0`.
pub fn companion(coeffs: &[i64]) -> Result<ToralAutomorphism, LatticeError> {
    let d = coeffs.len();
    let mut rows = vec![vec![0i64; d]; d];
    for i in 1..d {
        rows[i][i - 1] = 1;
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[d - 1] = -coeffs[d - 1 - i];
    }
    ToralAutomorphism::from_rows(&rows)
}

fn square(m: &ToralAutomorphism) -> ToralAutomorphism {
    m.compose(m)
}

/// The square of the inverse companion matrix of `x⁴ − x³ − 4x² + 4x + 1`
/// (totally real): one expanding and three contracting eigenvalues.
pub fn default_t4() -> ToralAutomorphism {
    square(&companion(&[-1, -4, 4, 1]).expect("unimodular").inverse())
}

/// `C²` for the companion `C` of `x³ − 4x − 1`: eigenvalues about 4.47,
/// 3.46 and 0.065, so `λ_wu² > λ_su`.
pub fn continuity_t3() -> ToralAutomorphism {
    square(&companion(&[0, -4, -1]).expect("unimodular"))
}

/// `log(λ_ws·λ_ms/λ_ss)` for a one-expanding quartic spectrum; positive
/// means strongly partially hyperbolic.
pub fn strong_ph_margin(s: &Spectrum) -> Option<f64> {
    let v: Vec<f64> = s.values().iter().map(|x| x.abs()).collect();
    (v.len() == 4 && s.expanding_count() == 1).then(|| (v[1] * v[2] / v[3]).ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchHit {
    /// `(a, b, c, d)` of `x⁴ + ax³ + bx² + cx + d`.
    pub poly: [i64; 4],
    pub matrix: ToralAutomorphism,
    pub margin: f64,
}

/// Smallest ratio between consecutive absolute eigenvalues that the search
/// accepts; nearly equal moduli make the frames ill-conditioned.
const MIN_GAP: f64 = 1.1;

fn float_moduli(poly: [i64; 4]) -> Option<Vec<f64>> {
    let [a, b, c, d] = poly;
    let m = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, -d as f64, 1.0, 0.0, 0.0, -c as f64, 0.0, 1.0, 0.0, -b as f64, 0.0, 0.0, 1.0,
            -a as f64,
        ],
    );
    // a few companions make the unbounded Schur iteration cycle
    let ev = m.try_schur(1e-14, 10_000)?.complex_eigenvalues();
    if ev.iter().any(|z| z.im.abs() > 1e-9) {
        return None;
    }
    let mut r: Vec<f64> = ev.iter().map(|z| z.re.abs()).collect();
    r.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Some(r)
}

/// Scan quartics `x⁴ + ax³ + bx² + cx ± 1` with `|a|, |b|, |c| ≤ bound` for a
/// totally real one-expanding spectrum with `λ_ws·λ_ms > λ_ss`, consecutive
/// moduli at least 10% apart. Returns `C²` for the largest strong-PH margin
/// (squaring makes every eigenvalue positive). Ties keep the first candidate
/// in the order `a` descending, then `b`, `c`, `d` ascending.
pub fn strong_ph_search(bound: i64) -> Option<SearchHit> {
    let mut best: Option<([i64; 4], f64)> = None;
    for a in (-bound..=bound).rev() {
        for b in -bound..=bound {
            for c in -bound..=bound {
                for d in [-1, 1] {
                    let poly = [a, b, c, d];
                    let Some(r) = float_moduli(poly) else { continue };
                    if !(r[0] > 1.0 && r[1] < 1.0) || r.windows(2).any(|w| w[0] < MIN_GAP * w[1]) {
                        continue;
                    }
                    let margin = (r[1] * r[2] / r[3]).ln();
                    if margin > 0.0 && best.is_none_or(|(_, m)| margin > m + 1e-9) {
                        best = Some((poly, margin));
                    }
                }
            }
        }
    }
    let (poly, _) = best?;
    let matrix = square(&companion(&poly).ok()?);
    // certify what the floating-point scan suggested
    let spec = certify_spectrum(&matrix).ok()?;
    let margin = strong_ph_margin(&spec).filter(|m| *m > 0.0)?;
    spec.is_simple_real().then_some(SearchHit { poly, matrix, margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_the_advertised_spectra() {
        let s3 = certify_spectrum(&default_t3()).unwrap();
        assert_eq!(s3.char_poly, vec![-1, 6, -5, 1]);
        assert_eq!(s3.expanding_count(), 2);
        let s4 = certify_spectrum(&default_t4()).unwrap();
        assert!(s4.is_simple_real() && s4.expanding_count() == 1);
        assert!(s4.values().iter().all(|v| *v > 0.0));
        // x⁴ − x³ − 4x² + 4x + 1 has roots r with λ = 1/r²
        let roots = [-1.956295, -0.209057, 1.338261, 1.827091];
        for r in roots {
            let lam = 1.0 / (r * r);
            assert!(s4.values().iter().any(|v| (v - lam).abs() < 1e-5 * lam), "{lam}");
        }
        assert!(strong_ph_margin(&s4).unwrap() < 0.0);
        let sc = certify_spectrum(&continuity_t3()).unwrap();
        let v = sc.values();
        assert!(v[1] * v[1] > v[0] && v[1] > 1.0 && v[2] < 1.0);
    }

    #[test]
    fn companion_has_the_polynomial() {
        let c = companion(&[5, 0, -4, -1]).unwrap();
        assert_eq!(c.char_poly(), vec![-1, -4, 0, 5, 1]);
    }

    #[test]
    fn search_finds_a_strongly_ph_square() {
        let hit = strong_ph_search(5).unwrap();
        assert_eq!(hit.poly, [5, 0, -4, -1]);
        assert_eq!(
            hit.matrix.rows(),
            vec![vec![0, 0, 1, -5], vec![0, 0, 4, -19], vec![1, 0, 0, 4], vec![0, 1, -5, 25]]
        );
        assert!(hit.margin > 1.0);
    }
}
