//! Unimodular change of coordinates putting the shear plane "close to horizontal".

use std::collections::{HashSet, VecDeque};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use super::automorphism::ToralAutomorphism;
use super::frames::{frame, line_angle, Role, SubspaceFrame};
use super::LatticeError;

/// Entry bound for the breadth-first search over elementary row operations.
pub const ENTRY_BOUND: i64 = 16;
/// Hard cap on visited matrices.
pub const MAX_STATES: usize = 3_000_000;

/// The normalized chart: new coordinates `u = D x`, old `x = C u`.
///
/// In the new chart the shear plane is spanned by `a_bar = (1, 0, a..)` and
/// `b_bar = (0, 1, b..)`.
#[derive(Clone, Debug)]
pub struct NormalizedBasis {
    pub dim: usize,
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Angle between b̄ and the strongly contracted direction of the plane.
    pub theta0: f64,
    /// `C`, mapping chart coordinates to original ones.
    pub change_of_basis: ToralAutomorphism,
    /// `D = C⁻¹`.
    pub to_normalized: ToralAutomorphism,
    /// Weak and strong eigenvectors of the plane, in chart coordinates (unit).
    pub weak: Vec<f64>,
    pub strong: Vec<f64>,
    pub weak_eigenvalue: f64,
    pub strong_eigenvalue: f64,
    pub swapped: bool,
}

fn apply_int(m: &ToralAutomorphism, v: &[f64]) -> Vec<f64> {
    let d = m.dim();
    (0..d)
        .map(|i| (0..d).map(|j| m.entry(i, j) as f64 * v[j]).sum())
        .collect()
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

impl NormalizedBasis {
    pub fn a_bar_old(&self) -> Vec<f64> {
        apply_int(&self.change_of_basis, &self.a_bar)
    }

    pub fn b_bar_old(&self) -> Vec<f64> {
        apply_int(&self.change_of_basis, &self.b_bar)
    }

    /// Tangent vector from original to chart coordinates.
    pub fn to_chart(&self, v: &[f64]) -> Vec<f64> {
        apply_int(&self.to_normalized, v)
    }

    pub fn from_chart(&self, v: &[f64]) -> Vec<f64> {
        apply_int(&self.change_of_basis, v)
    }

    pub fn angle_ab(&self) -> f64 {
        line_angle(&self.a_bar, &self.b_bar)
    }

    pub fn angle_a_weak(&self) -> f64 {
        line_angle(&self.a_bar, &self.weak)
    }

    /// Re-check the three conditions; returns the name of the first failure.
    pub fn check(&self) -> Result<(), &'static str> {
        check_conditions(&self.a_bar, &self.b_bar, &self.weak, &self.strong)
    }
}

fn check_conditions(
    a_bar: &[f64],
    b_bar: &[f64],
    weak: &[f64],
    strong: &[f64],
) -> Result<(), &'static str> {
    let coeffs_ok = a_bar[2..]
        .iter()
        .chain(&b_bar[2..])
        .all(|&c| c > 0.0 && c < 1.0);
    let ab = line_angle(a_bar, b_bar);
    if !coeffs_ok || !(ab > FRAC_PI_3 && ab < FRAC_PI_2) {
        return Err("horizontal: coefficients in (0,1) and angle(a,b) in (pi/3, pi/2)");
    }
    if line_angle(a_bar, weak) >= 0.5 * ab {
        return Err("weak direction: angle(a, v_ws) < angle(a, b)/2");
    }
    if line_angle(b_bar, strong) <= 1e-9 {
        return Err("theta0: b not aligned with the strong direction");
    }
    Ok(())
}

/// Graph form of span{p, q} over the first two coordinates.
fn graph_form(p: &[f64], q: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let det = p[0] * q[1] - q[0] * p[1];
    let scale = (p[0].abs() + p[1].abs()) * (q[0].abs() + q[1].abs());
    if det.abs() < 1e-12 * scale.max(1e-300) {
        return None;
    }
    // coefficients of e1 and e2 in terms of (p, q) restricted to xy
    let (a1, b1) = (q[1] / det, -p[1] / det);
    let (a2, b2) = (-q[0] / det, p[0] / det);
    let a_bar: Vec<f64> = p.iter().zip(q).map(|(x, y)| a1 * x + b1 * y).collect();
    let b_bar: Vec<f64> = p.iter().zip(q).map(|(x, y)| a2 * x + b2 * y).collect();
    Some((a_bar, b_bar))
}

type Key = [i8; 16];

fn key(m: &[i64]) -> Key {
    let mut k = [0i8; 16];
    for (dst, &v) in k.iter_mut().zip(m) {
        *dst = v as i8;
    }
    k
}

fn neighbours(d: usize, m: &[i64]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            for s in [1i64, -1] {
                let mut n = m.to_vec();
                for c in 0..d {
                    n[i * d + c] += s * m[j * d + c];
                }
                out.push(n);
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut n = m.to_vec();
            for c in 0..d {
                n.swap(i * d + c, j * d + c);
            }
            out.push(n);
        }
    }
    for i in 0..d {
        let mut n = m.to_vec();
        for c in 0..d {
            n[i * d + c] = -n[i * d + c];
        }
        out.push(n);
    }
    out
}

/// Search for the chart of the shear plane of `m` (its stable plane, or E^ws ⊕ E^ms in dim 4).
pub fn normalize_basis(
    m: &ToralAutomorphism,
    frames: &[SubspaceFrame],
) -> Result<NormalizedBasis, LatticeError> {
    let plane = frame(frames, Role::StablePlane).ok_or(LatticeError::NoStablePlane)?;
    let d = m.dim();
    let weak0 = &plane.basis[0];
    let strong0 = &plane.basis[1];
    let start = ToralAutomorphism::identity(d).entries().to_vec();
    let mut seen: HashSet<Key> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(key(&start));
    queue.push_back(start);
    let mut best_fail: Option<(usize, &'static str)> = None;
    while let Some(dm) = queue.pop_front() {
        let dmat = ToralAutomorphism::new(d, dm.clone()).expect("row operations keep |det| = 1");
        let weak = normalized(apply_int(&dmat, weak0));
        let strong = normalized(apply_int(&dmat, strong0));
        if let Some((a_bar, b_bar)) = graph_form(&weak, &strong) {
            for swapped in [false, true] {
                let (ab, bb, dd) = if swapped {
                    // switching ā and b̄ is the coordinate swap x <-> y
                    let mut sw = dm.clone();
                    for c in 0..d {
                        sw.swap(c, d + c);
                    }
                    let mut a2 = b_bar.clone();
                    let mut b2 = a_bar.clone();
                    a2.swap(0, 1);
                    b2.swap(0, 1);
                    (a2, b2, sw)
                } else {
                    (a_bar.clone(), b_bar.clone(), dm.clone())
                };
                let dmat = ToralAutomorphism::new(d, dd).unwrap();
                let weak_n = normalized(apply_int(&dmat, weak0));
                let strong_n = normalized(apply_int(&dmat, strong0));
                match check_conditions(&ab, &bb, &weak_n, &strong_n) {
                    Ok(()) => {
                        return Ok(NormalizedBasis {
                            dim: d,
                            a: ab[2..].to_vec(),
                            b: bb[2..].to_vec(),
                            theta0: line_angle(&bb, &strong_n),
                            change_of_basis: dmat.inverse(),
                            to_normalized: dmat,
                            weak: weak_n,
                            strong: strong_n,
                            weak_eigenvalue: plane.eigenvalues[0],
                            strong_eigenvalue: plane.eigenvalues[1],
                            a_bar: ab,
                            b_bar: bb,
                            swapped,
                        })
                    }
                    Err(why) => {
                        let rank = match why.as_bytes()[0] {
                            b'h' => 0,
                            b'w' => 1,
                            _ => 2,
                        };
                        if best_fail.is_none_or(|(r, _)| rank > r) {
                            best_fail = Some((rank, why));
                        }
                    }
                }
            }
        }
        if seen.len() >= MAX_STATES {
            continue;
        }
        for n in neighbours(d, &dm) {
            if n.iter().any(|v| v.abs() > ENTRY_BOUND) {
                continue;
            }
            let k = key(&n);
            if seen.insert(k) {
                queue.push_back(n);
            }
        }
    }
    Err(LatticeError::NormalizationFailed {
        condition: best_fail.map_or("no admissible graph form", |(_, w)| w),
        visited: seen.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::automorphism::certify_spectrum;
    use super::super::frames::invariant_frames;
    use super::*;

    fn chart_for(m: &ToralAutomorphism) -> NormalizedBasis {
        let s = certify_spectrum(m).unwrap();
        let f = invariant_frames(m, &s).unwrap();
        normalize_basis(m, &f).unwrap()
    }

    fn m3_inv() -> ToralAutomorphism {
        ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 1]])
            .unwrap()
            .inverse()
    }

    #[test]
    fn default_inverse_normalizes() {
        let nb = chart_for(&m3_inv());
        assert!(nb.check().is_ok());
        assert!(nb.a[0] > 0.0 && nb.a[0] < 1.0 && nb.b[0] > 0.0 && nb.b[0] < 1.0);
        let ab = nb.angle_ab();
        assert!(ab > FRAC_PI_3 && ab < FRAC_PI_2);
        assert!(nb.angle_a_weak() < 0.5 * ab);
        assert!(nb.theta0 > 0.0);
        assert_eq!(
            nb.change_of_basis.compose(&nb.to_normalized),
            ToralAutomorphism::identity(3)
        );
    }

    #[test]
    fn already_normalized_gives_identity() {
        let m = m3_inv();
        let nb = chart_for(&m);
        // conjugate so the plane is already in graph form in standard coordinates
        let conj = nb.to_normalized.compose(&m).compose(&nb.change_of_basis);
        let nb2 = chart_for(&conj);
        assert_eq!(nb2.to_normalized, ToralAutomorphism::identity(3));
    }

    #[test]
    fn plane_vectors_lie_in_the_eigenplane() {
        let m = m3_inv();
        let nb = chart_for(&m);
        // M maps the plane to itself: check M·ā_old stays in span(ā_old, b̄_old)
        let a = nb.a_bar_old();
        let b = nb.b_bar_old();
        let ma: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| m.entry(i, j) as f64 * a[j]).sum())
            .collect();
        let n = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let dot: f64 = ma.iter().zip(n).map(|(x, y)| x * y).sum();
        assert!(dot.abs() < 1e-12);
    }
}
