//! The derivative restricted to the shear plane, in (ā, b̄) coordinates, and
//! its projective action.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector4};

use super::{CocycleError, ComposedSystem, Factor};
use crate::lattice::{NormalizedBasis, ToralAutomorphism};
use crate::shear::Chart;
use crate::torus::TorusPoint;

/// Grassmannian tolerance for plane invariance.
pub const PLANE_TOL: f64 = 1e-8;

/// The invariant shear plane of a linear map, with coordinates `r ā + s b̄`.
#[derive(Clone, Debug)]
pub struct PlaneCoords {
    pub chart: Chart,
    /// ā and b̄ in original coordinates.
    pub a_old: Vector4<f64>,
    pub b_old: Vector4<f64>,
    base: ToralAutomorphism,
    /// Columns: weak and strong eigenvectors in (ā, b̄) coordinates.
    w: Matrix2<f64>,
    w_inv: Matrix2<f64>,
    mu: [f64; 2],
}

fn pad(v: &[f64]) -> Vector4<f64> {
    let mut out = Vector4::zeros();
    for (i, x) in v.iter().enumerate() {
        out[i] = *x;
    }
    out
}

impl PlaneCoords {
    /// `base` must be the matrix whose plane `nb` normalizes.
    pub fn from_basis(nb: &NormalizedBasis, base: &ToralAutomorphism) -> Self {
        // chart coordinates of a plane vector r ā + s b̄ start with (r, s)
        let w = Matrix2::new(nb.weak[0], nb.strong[0], nb.weak[1], nb.strong[1]);
        PlaneCoords {
            chart: Chart::from_basis(nb),
            a_old: pad(&nb.a_bar_old()),
            b_old: pad(&nb.b_bar_old()),
            base: base.clone(),
            w,
            w_inv: w.try_inverse().expect("weak and strong directions are independent"),
            mu: [nb.weak_eigenvalue, nb.strong_eigenvalue],
        }
    }

    /// Weak and strong eigenvectors, (ā, b̄) coordinates.
    pub fn eigenbasis(&self) -> Matrix2<f64> {
        self.w
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        self.mu
    }

    /// Vector of the plane in original coordinates.
    pub fn to_old(&self, v: &Vector2<f64>) -> Vector4<f64> {
        self.a_old * v[0] + self.b_old * v[1]
    }

    /// Least-squares plane coordinates of `w` and its relative distance to the plane.
    pub fn project(&self, w: &Vector4<f64>) -> (Vector2<f64>, f64) {
        let (a, b) = (&self.a_old, &self.b_old);
        let g = Matrix2::new(a.dot(a), a.dot(b), a.dot(b), b.dot(b));
        let rhs = Vector2::new(a.dot(w), b.dot(w));
        let c = g.try_inverse().expect("ā, b̄ independent") * rhs;
        let res = w - self.to_old(&c);
        let n = w.norm();
        (c, if n > 0.0 { res.norm() / n } else { 0.0 })
    }

    fn restrict(&self, m: &nalgebra::Matrix4<f64>) -> Result<Matrix2<f64>, CocycleError> {
        let (ca, da) = self.project(&(m * self.a_old));
        let (cb, db) = self.project(&(m * self.b_old));
        let dist = da.max(db);
        if dist > PLANE_TOL {
            return Err(CocycleError::PlaneNotInvariant { distance: dist });
        }
        Ok(Matrix2::from_columns(&[ca, cb]))
    }

    pub(super) fn op_for(&self, f: &Factor) -> PlaneOp {
        match f {
            Factor::Linear(l) => {
                let p = if l.matrix == self.base {
                    Some(l.power)
                } else if l.matrix == self.base.inverse() {
                    Some(-l.power)
                } else {
                    None
                };
                match p {
                    Some(p) => PlaneOp::Fixed(Ok(self.w
                        * Matrix2::from_diagonal(&Vector2::new(self.mu[0].powi(p), self.mu[1].powi(p)))
                        * self.w_inv)),
                    None => PlaneOp::Fixed(self.restrict(l.dense())),
                }
            }
            Factor::Shear(s) => {
                if s.chart().d == self.chart.d {
                    let dir = s.direction();
                    let delta_b = dir[1];
                    let mut res = 0.0f64;
                    let mut nrm = 0.0f64;
                    for i in 0..dir.len() {
                        let along = delta_b * if i == 1 { 1.0 } else { self.chart_b(i) };
                        res += (dir[i] - along).powi(2);
                        nrm += dir[i] * dir[i];
                    }
                    let dist = (res / nrm.max(f64::MIN_POSITIVE)).sqrt();
                    if dist > PLANE_TOL {
                        PlaneOp::Fixed(Err(CocycleError::PlaneNotInvariant { distance: dist }))
                    } else {
                        PlaneOp::Shear { delta_b }
                    }
                } else {
                    PlaneOp::GenericShear
                }
            }
        }
    }

    /// Component `i` of b̄ in chart coordinates.
    fn chart_b(&self, i: usize) -> f64 {
        (self.chart.d * self.b_old)[i]
    }

    pub(super) fn step_matrix(
        &self,
        op: &PlaneOp,
        f: &Factor,
        q: &TorusPoint,
    ) -> Result<Matrix2<f64>, CocycleError> {
        match op {
            PlaneOp::Fixed(m) => m.clone(),
            PlaneOp::Shear { delta_b } => {
                let Factor::Shear(s) = f else { unreachable!() };
                let c = s.coefficient_at_x(s.chart_x(q));
                Ok(Matrix2::new(1.0, 0.0, c * delta_b, 1.0))
            }
            PlaneOp::GenericShear => self.restrict(&f.derivative(q)),
        }
    }
}

#[derive(Clone, Debug)]
pub(super) enum PlaneOp {
    Fixed(Result<Matrix2<f64>, CocycleError>),
    /// (r, s) ↦ (r, s + c(x)·δ_b·r)
    Shear { delta_b: f64 },
    GenericShear,
}

/// Image point and image vector of the restricted cocycle.
pub fn restricted_stable_cocycle(
    sys: &ComposedSystem,
    p: &TorusPoint,
    v: &Vector2<f64>,
) -> Result<(TorusPoint, Vector2<f64>), CocycleError> {
    let (q, a) = sys.restricted_matrix(p)?;
    Ok((q, a * v))
}

/// A line in the shear plane over a base point; angle in [0, π).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectivePoint {
    pub base: TorusPoint,
    angle: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI - 1e-15 {
        0.0
    } else {
        r
    }
}

impl ProjectivePoint {
    pub fn new(base: TorusPoint, v: &Vector2<f64>) -> Self {
        assert!(v.norm() > 0.0, "a line needs a nonzero vector");
        // pick the upper half-plane representative so v and -v agree bitwise
        let u = if v[1] < 0.0 || (v[1] == 0.0 && v[0] < 0.0) { -v } else { *v };
        ProjectivePoint {
            base,
            angle: wrap_angle(u[1].atan2(u[0])),
        }
    }

    pub fn from_angle(base: TorusPoint, angle: f64) -> Self {
        ProjectivePoint {
            base,
            angle: wrap_angle(angle),
        }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Unit representative.
    pub fn line(&self) -> Vector2<f64> {
        Vector2::new(self.angle.cos(), self.angle.sin())
    }

    /// Angle between lines, in [0, π/2].
    pub fn distance(&self, other: &ProjectivePoint) -> f64 {
        let d = (self.angle - other.angle).abs();
        d.min(PI - d)
    }
}

pub fn projective_step(
    sys: &ComposedSystem,
    q: &ProjectivePoint,
) -> Result<ProjectivePoint, CocycleError> {
    let (base, v) = restricted_stable_cocycle(sys, &q.base, &q.line())?;
    Ok(ProjectivePoint::new(base, &v))
}

/// `(1/N) Σ log ‖A(p_k) u_k‖` along the projective orbit of `v0`.
pub fn top_stable_exponent(
    sys: &ComposedSystem,
    p0: &TorusPoint,
    v0: &Vector2<f64>,
    n: usize,
) -> Result<f64, CocycleError> {
    stable_run(sys, p0, v0, n, 0, 1).map(|(m, _)| m)
}

/// Top exponent of the restricted cocycle after `burn_in` steps, with a
/// batch-means standard error over `batches` equal blocks.
pub fn stable_exponent_stats(
    sys: &ComposedSystem,
    p0: &TorusPoint,
    v0: &Vector2<f64>,
    n: usize,
    burn_in: usize,
    batches: usize,
) -> Result<(f64, f64), CocycleError> {
    stable_run(sys, p0, v0, n, burn_in, batches.max(2))
}

fn stable_run(
    sys: &ComposedSystem,
    p0: &TorusPoint,
    v0: &Vector2<f64>,
    n: usize,
    burn_in: usize,
    batches: usize,
) -> Result<(f64, f64), CocycleError> {
    if n == 0 || v0.norm() == 0.0 {
        return Err(CocycleError::InvalidArgument(
            "need N >= 1 and a nonzero initial vector".into(),
        ));
    }
    let mut p = *p0;
    let mut u = v0.normalize();
    let step = |p: &mut TorusPoint, u: &mut Vector2<f64>, k: usize| -> Result<f64, CocycleError> {
        let (q, a) = sys.restricted_matrix(p)?;
        let w = a * *u;
        let nw = w.norm();
        if !(1e-300..=1e300).contains(&nw) {
            return Err(CocycleError::NumericalBlowup { step: k, norm: nw });
        }
        *u = w / nw;
        *p = q;
        Ok(nw.ln())
    };
    for k in 0..burn_in {
        step(&mut p, &mut u, k)?;
    }
    let batches = batches.min(n);
    let per = n / batches;
    let mut sums = vec![0.0; batches];
    let mut total = 0.0;
    for k in 0..n {
        let l = step(&mut p, &mut u, burn_in + k)?;
        total += l;
        sums[(k / per).min(batches - 1)] += l;
    }
    let mean = total / n as f64;
    if batches < 2 {
        return Ok((mean, f64::NAN));
    }
    let se = batch_se(&sums, per, n);
    Ok((mean, se))
}

/// Standard error of the mean from batch sums (the last batch absorbs the remainder).
pub(crate) fn batch_se(sums: &[f64], per: usize, n: usize) -> f64 {
    let b = sums.len();
    let means: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let len = if i + 1 == b { n - per * (b - 1) } else { per };
            s / len as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LinearData;
    use crate::sampling::{random_point, stream_rng};
    use crate::shear::ShearMap;
    use rand::Rng;

    fn setup(n: i32, t: f64) -> (ComposedSystem, LinearData) {
        let l = ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 1]])
            .unwrap()
            .inverse();
        let ld = LinearData::new(l.clone()).unwrap();
        let nb = ld.chart();
        let sys = ComposedSystem::identity(3)
            .then_shear(ShearMap::from_basis(nb, t))
            .then_linear(&l, n)
            .with_plane(PlaneCoords::from_basis(nb, &l));
        (sys, ld)
    }

    #[test]
    fn b_bar_fixed_by_the_shear_alone() {
        let (sys, _) = setup(1, 3.0);
        let shear_only = ComposedSystem::new(3, vec![sys.factors()[0].clone()])
            .with_plane(sys.plane().unwrap().clone());
        let p = TorusPoint::new(&[0.1, 0.4, 0.8]);
        let (_, v) = restricted_stable_cocycle(&shear_only, &p, &Vector2::new(0.0, 1.0)).unwrap();
        assert!((v - Vector2::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn restricted_determinant_is_product_of_stable_eigenvalues() {
        let (sys, ld) = setup(1, 2.0);
        let lam = ld.eigenvalues();
        let mut rng = stream_rng(1, 0);
        for _ in 0..1000 {
            let p = random_point(&mut rng, 3);
            let (_, a) = sys.restricted_matrix(&p).unwrap();
            assert!((a.determinant() - lam[1] * lam[2]).abs() < 1e-8);
        }
    }

    #[test]
    fn generic_restriction_agrees_with_fast_path() {
        let (sys, _) = setup(2, 1.3);
        let pc = sys.plane().unwrap().clone();
        let mut rng = stream_rng(2, 0);
        for _ in 0..200 {
            let p = random_point(&mut rng, 3);
            let (_, a) = sys.restricted_matrix(&p).unwrap();
            let (_, d) = sys.derivative(&p);
            let (ca, _) = pc.project(&(d * pc.a_old));
            let (cb, _) = pc.project(&(d * pc.b_old));
            let b = Matrix2::from_columns(&[ca, cb]);
            assert!((a - b).norm() < 1e-9 * a.norm());
        }
    }

    #[test]
    fn linear_restriction_is_diagonal_in_eigenbasis() {
        let (sys, ld) = setup(3, 0.0);
        let pc = sys.plane().unwrap();
        let (_, a) = sys.restricted_matrix(&TorusPoint::new(&[0.2, 0.3, 0.4])).unwrap();
        let diag = pc.eigenbasis().try_inverse().unwrap() * a * pc.eigenbasis();
        let lam = ld.eigenvalues();
        assert!((diag[(0, 0)] - lam[1].powi(3)).abs() < 1e-12);
        assert!((diag[(1, 1)] - lam[2].powi(3)).abs() < 1e-12);
        assert!(diag[(0, 1)].abs() < 1e-12 && diag[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn linear_stable_exponent() {
        let (sys, ld) = setup(2, 0.0);
        let pc = sys.plane().unwrap();
        let want = 2.0 * ld.eigenvalues()[1].ln();
        let p = TorusPoint::new(&[0.2, 0.3, 0.4]);
        let weak = pc.eigenbasis().column(0).into_owned();
        let got = top_stable_exponent(&sys, &p, &weak, 10_000).unwrap();
        assert!((got - want).abs() < 1e-4 * want.abs());
        let generic = top_stable_exponent(&sys, &p, &Vector2::new(0.3, 0.8), 100_000).unwrap();
        assert!((generic - want).abs() < 1e-4 * want.abs());
    }

    #[test]
    fn stable_exponent_dominates_minimal_expansion() {
        let (sys, _) = setup(1, 2.0);
        let p = TorusPoint::new(&[0.7, 0.1, 0.5]);
        let n = 2000;
        let chi = top_stable_exponent(&sys, &p, &Vector2::new(1.0, 0.0), n).unwrap();
        let mut q = p;
        let mut acc = 0.0;
        for _ in 0..n {
            let (next, a) = sys.restricted_matrix(&q).unwrap();
            acc += a.singular_values().min().ln();
            q = next;
        }
        assert!(chi >= acc / n as f64);
    }

    #[test]
    fn projective_steps_respect_the_bunching_bound() {
        let (sys, _) = setup(1, 2.5);
        let mut rng = stream_rng(3, 0);
        let mut b: f64 = 0.0;
        let pts: Vec<_> = (0..2000).map(|_| random_point(&mut rng, 3)).collect();
        for p in &pts {
            let (_, a) = sys.restricted_matrix(p).unwrap();
            b = b.max(a.norm() * a.try_inverse().unwrap().norm());
        }
        for p in &pts {
            let u = ProjectivePoint::from_angle(*p, rng.gen::<f64>() * PI);
            let v = ProjectivePoint::from_angle(*p, rng.gen::<f64>() * PI);
            let (fu, fv) = (projective_step(&sys, &u).unwrap(), projective_step(&sys, &v).unwrap());
            let d0 = u.distance(&v);
            if d0 > 1e-12 {
                assert!(fu.distance(&fv) <= b * (1.0 + 1e-6) * d0);
            }
        }
    }

    #[test]
    fn projective_conventions() {
        let (sys, _) = setup(2, 0.0);
        let pc = sys.plane().unwrap();
        let base = TorusPoint::new(&[0.0, 0.0, 0.0]);
        let weak = pc.eigenbasis().column(0).into_owned();
        let q = ProjectivePoint::new(base, &weak);
        let r = projective_step(&sys, &q).unwrap();
        assert!(q.distance(&r) < 1e-12);
        let anti = ProjectivePoint::new(base, &(-weak));
        assert_eq!(anti.angle(), q.angle());
        let a = ProjectivePoint::new(base, &Vector2::new(0.3, -0.4));
        assert!((0.0..PI).contains(&a.angle()));
    }
}
