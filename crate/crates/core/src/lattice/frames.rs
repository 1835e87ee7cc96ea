use nalgebra::{DMatrix, DVector};

use super::automorphism::{Spectrum, ToralAutomorphism};
use super::LatticeError;

/// What an invariant subspace is, relative to the dynamics of `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Unstable,
    StrongUnstable,
    MediumUnstable,
    WeakUnstable,
    WeakStable,
    MediumStable,
    StrongStable,
    Stable,
    /// The 2-plane the shears act in: E^ws ⊕ E^ss in dim 3, E^ws ⊕ E^ms in dim 4.
    StablePlane,
    UnstablePlane,
}

#[derive(Clone, Debug)]
pub struct SubspaceFrame {
    pub role: Role,
    /// Unit vectors spanning the subspace (eigenvectors for 1-d frames and planes).
    pub basis: Vec<Vec<f64>>,
    /// Eigenvalue of each basis vector.
    pub eigenvalues: Vec<f64>,
}

impl SubspaceFrame {
    pub fn vector(&self) -> &[f64] {
        &self.basis[0]
    }

    pub fn eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

pub const RESIDUAL_TOL: f64 = 1e-10;

fn roles_for(dim: usize, expanding: usize) -> Vec<Role> {
    use Role::*;
    match (dim, expanding) {
        (3, 1) => vec![Unstable, WeakStable, StrongStable],
        (3, 2) => vec![StrongUnstable, WeakUnstable, Stable],
        (4, 1) => vec![Unstable, WeakStable, MediumStable, StrongStable],
        (4, 2) => vec![StrongUnstable, WeakUnstable, WeakStable, StrongStable],
        (4, 3) => vec![StrongUnstable, MediumUnstable, WeakUnstable, Stable],
        _ => unreachable!("hyperbolic unimodular spectrum has 1..d-1 expanding roots"),
    }
}

fn unit(v: &DVector<f64>) -> DVector<f64> {
    let mut u = v / v.norm();
    // sign convention: the largest-magnitude component is positive
    let (imax, _) = u
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
    if u[imax] < 0.0 {
        u = -u;
    }
    u
}

/// Unit eigenvector for a simple real eigenvalue, by SVD then inverse iteration.
pub fn eigenvector(m: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let d = m.nrows();
    let shifted = m - DMatrix::identity(d, d) * lambda;
    let svd = shifted.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &s)| if s < bv { (i, s) } else { (bi, bv) });
    let mut v: DVector<f64> = vt.row(imin).transpose();
    let eps = 1e-9 * lambda.abs().max(1.0);
    let near = m - DMatrix::identity(d, d) * (lambda + eps);
    if let Some(lu) = near.lu().try_inverse() {
        for _ in 0..2 {
            let w = &lu * &v;
            if w.iter().all(|x| x.is_finite()) && w.norm() > 0.0 {
                v = w.normalize();
            }
        }
    }
    unit(&v)
}

/// Residual ‖(M − λI)v‖ / ‖v‖.
pub fn residual(m: &DMatrix<f64>, lambda: f64, v: &[f64]) -> f64 {
    let vv = DVector::from_column_slice(v);
    (m * &vv - &vv * lambda).norm() / vv.norm().max(f64::MIN_POSITIVE)
}

/// One unit eigenvector per eigenvalue, tagged by role, plus the shear plane.
pub fn invariant_frames(
    m: &ToralAutomorphism,
    s: &Spectrum,
) -> Result<Vec<SubspaceFrame>, LatticeError> {
    s.ensure_hyperbolic()?;
    if s.complex_pairs > 0 {
        return Err(LatticeError::ComplexSpectrumUnsupported);
    }
    if !s.is_simple_real() {
        return Err(LatticeError::NonSimpleSpectrum);
    }
    let d = m.dim();
    let mat = DMatrix::from_row_slice(d, d, &m.to_f64());
    let roles = roles_for(d, s.expanding_count());
    let mut frames = Vec::with_capacity(d + 1);
    for (lam, role) in s.values().into_iter().zip(roles) {
        let v = eigenvector(&mat, lam);
        let r = residual(&mat, lam, v.as_slice());
        if r > RESIDUAL_TOL {
            return Err(LatticeError::EigenvectorResidual { lambda: lam, residual: r });
        }
        frames.push(SubspaceFrame {
            role,
            basis: vec![v.as_slice().to_vec()],
            eigenvalues: vec![lam],
        });
    }
    let find = |r: Role| frames.iter().position(|f| f.role == r);
    let plane = match (d, s.expanding_count()) {
        (3, 1) => Some((Role::StablePlane, Role::WeakStable, Role::StrongStable)),
        (4, 1) => Some((Role::StablePlane, Role::WeakStable, Role::MediumStable)),
        (3, 2) => Some((Role::UnstablePlane, Role::WeakUnstable, Role::StrongUnstable)),
        _ => None,
    };
    if let Some((role, weak, strong)) = plane {
        let (w, st) = (find(weak).unwrap(), find(strong).unwrap());
        frames.push(SubspaceFrame {
            role,
            basis: vec![frames[w].basis[0].clone(), frames[st].basis[0].clone()],
            eigenvalues: vec![frames[w].eigenvalues[0], frames[st].eigenvalues[0]],
        });
    }
    Ok(frames)
}

/// Look up a frame by role.
pub fn frame(frames: &[SubspaceFrame], role: Role) -> Option<&SubspaceFrame> {
    frames.iter().find(|f| f.role == role)
}

/// Angle in [0, π/2] between the lines spanned by `a` and `b`.
pub fn line_angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    // atan2 of (|a∧b|, |a·b|) stays accurate near 0 where acos does not;
    // |a∧b|² via Lagrange's identity on normalized vectors
    let (ua, ub): (Vec<f64>, Vec<f64>) = (
        a.iter().map(|x| x / na).collect(),
        b.iter().map(|x| x / nb).collect(),
    );
    let mut wedge2 = 0.0;
    for i in 0..ua.len() {
        for j in (i + 1)..ua.len() {
            let w = ua[i] * ub[j] - ua[j] * ub[i];
            wedge2 += w * w;
        }
    }
    wedge2.sqrt().atan2((dot / (na * nb)).abs())
}

#[cfg(test)]
mod tests {
    use super::super::automorphism::certify_spectrum;
    use super::*;

    fn m3() -> ToralAutomorphism {
        ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 1]]).unwrap()
    }

    #[test]
    fn frames_are_eigenvectors() {
        let m = m3();
        let s = certify_spectrum(&m).unwrap();
        let fr = invariant_frames(&m, &s).unwrap();
        assert_eq!(fr.len(), 4);
        let mat = DMatrix::from_row_slice(3, 3, &m.to_f64());
        for f in &fr[..3] {
            assert!(residual(&mat, f.eigenvalue(), f.vector()) <= 1e-10);
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(line_angle(fr[i].vector(), fr[j].vector()) > 0.1);
            }
        }
        assert_eq!(fr[3].role, Role::UnstablePlane);
    }

    #[test]
    fn eigenvalue_one_rejected() {
        let m = ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 1, 0], vec![0, 0, 1]]).unwrap();
        let s = certify_spectrum(&m).unwrap();
        assert!(matches!(
            invariant_frames(&m, &s),
            Err(LatticeError::EigenvalueOnUnitCircle)
        ));
    }

    #[test]
    fn inverse_shares_eigenvectors() {
        let m = m3();
        let inv = m.inverse();
        let f1 = invariant_frames(&m, &certify_spectrum(&m).unwrap()).unwrap();
        let f2 = invariant_frames(&inv, &certify_spectrum(&inv).unwrap()).unwrap();
        let up = frame(&f1, Role::UnstablePlane).unwrap();
        let sp = frame(&f2, Role::StablePlane).unwrap();
        // weak stable of M^-1 is weak unstable of M, strong matches strong
        assert!(line_angle(&up.basis[0], &sp.basis[0]) < 1e-12);
        assert!(line_angle(&up.basis[1], &sp.basis[1]) < 1e-12);
    }

    #[test]
    fn line_angle_small_and_right() {
        assert!(line_angle(&[1.0, 0.0], &[1.0, 1e-9]) > 0.9e-9);
        assert!((line_angle(&[1.0, 0.0], &[0.0, -2.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(line_angle(&[1.0, 1.0], &[-1.0, -1.0]) < 1e-15);
    }
}
