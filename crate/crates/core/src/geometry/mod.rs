//! Cones, regions and the parameter conditions of the shear construction,
//! measured rather than assumed.
//!
//! Everything here works in the normalized chart of the linear part: the
//! matrix `D L C` has its shear plane spanned by `ā = (1,0,a..)` and
//! `b̄ = (0,1,b..)`, and the shear is the plain `f_t` of those coordinates.
//!
//! Two norms appear. Cones around the unstable direction use the Euclidean
//! norm of the chart. Expansion on the shear plane uses the eigen-adapted norm
//! (weak and strong eigenvectors orthonormal), so the linear case is exact.

mod cones;
mod conditions;
mod lipschitz;
mod separation;

pub use cones::{
    cone_threshold, expansion_check, gamma_m, plane_norm_sup, unstable_cone_test,
    ConeTestReport, ConeThreshold, ExpansionReport, EPSILON_M,
};
pub use conditions::{
    condition_report, fit_constants, fit_constants_unchecked, write_conditions_csv, write_constants_csv, Condition,
    ConditionReport, FitGrid, FittedConstant, FittedConstants, Margin, MIN_R2,
};
pub use lipschitz::{lipschitz_pushforward, pushforward_constant, LipschitzReport};
pub use separation::{separation_at, separation_scan, SeparationReport, SeparationRow};

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use crate::cocycle::{CocycleError, ComposedSystem, PlaneCoords, TangentFrame};
use crate::lattice::{
    certify_spectrum, invariant_frames, LatticeError, LinearData, NormalizedBasis,
    ToralAutomorphism,
};
use crate::shear::ShearMap;
use crate::torus::TorusPoint;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("fit for {name} is poor (R² = {r2:.3})")]
    PoorFit { name: &'static str, r2: f64 },
    #[error("no preimage directions were sampled for {0}")]
    EmptyCone(&'static str),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
}

/// The linear part in its normalized chart, with everything the geometric
/// checks need: eigen-data, the shear plane and a system builder.
#[derive(Clone, Debug)]
pub struct ShearSetup {
    /// The matrix as given.
    pub original: ToralAutomorphism,
    /// The same map in chart coordinates, `D L C`.
    pub linear: ToralAutomorphism,
    /// Chart data, with the change of basis already applied (identity here).
    pub chart: NormalizedBasis,
    /// Change of basis from chart to original coordinates.
    pub change_of_basis: ToralAutomorphism,
    /// Eigenvalues by decreasing modulus: u, ws, (ms), ss.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors in chart coordinates, same order.
    pub vectors: Vec<Vector4<f64>>,
    f: Matrix4<f64>,
    f_inv: Matrix4<f64>,
    /// b̄ in eigen coordinates.
    beta: Vector4<f64>,
    plane: PlaneCoords,
}

fn pad(v: &[f64]) -> Vector4<f64> {
    let mut out = Vector4::zeros();
    for (i, x) in v.iter().enumerate() {
        out[i] = *x;
    }
    out
}

impl ShearSetup {
    /// `m` must have exactly one expanding eigenvalue. For the Theorem A
    /// orientation (two expanding) pass the inverse matrix.
    pub fn new(m: &ToralAutomorphism) -> Result<Self, GeometryError> {
        let data = LinearData::new(m.clone())?;
        data.spectrum.ensure_hyperbolic()?;
        if data.spectrum.expanding_count() != 1 {
            return Err(GeometryError::InvalidArgument(format!(
                "shear geometry needs exactly one expanding eigenvalue, found {}",
                data.spectrum.expanding_count()
            )));
        }
        let nb = data.chart().clone();
        let linear = nb.to_normalized.compose(m).compose(&nb.change_of_basis);
        let spectrum = certify_spectrum(&linear)?;
        let frames = invariant_frames(&linear, &spectrum)?;
        let eigenvalues = spectrum.values();
        let d = m.dim();
        let mut vectors: Vec<Vector4<f64>> = frames.iter().take(d).map(|f| pad(&f.basis[0])).collect();
        // orient v_u so unstable leaves move to increasing x
        if vectors[0][0] < 0.0 {
            vectors[0] = -vectors[0];
        }
        let mut f = Matrix4::identity();
        for (j, v) in vectors.iter().enumerate() {
            f.set_column(j, v);
        }
        let f_inv = f.try_inverse().expect("simple spectrum");
        let mut chart = nb.clone();
        chart.change_of_basis = ToralAutomorphism::identity(d);
        chart.to_normalized = ToralAutomorphism::identity(d);
        let beta = f_inv * pad(&chart.b_bar);
        let plane = PlaneCoords::from_basis(&chart, &linear);
        Ok(ShearSetup {
            original: m.clone(),
            linear,
            change_of_basis: nb.change_of_basis.clone(),
            chart,
            eigenvalues,
            vectors,
            f,
            f_inv,
            beta,
            plane,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn lambda_u(&self) -> f64 {
        self.eigenvalues[0].abs()
    }

    pub fn lambda_ws(&self) -> f64 {
        self.eigenvalues[1].abs()
    }

    pub fn lambda_ss(&self) -> f64 {
        self.eigenvalues[self.dim() - 1].abs()
    }

    /// Medium stable eigenvalue (dimension 4 only).
    pub fn lambda_ms(&self) -> Option<f64> {
        (self.dim() == 4).then(|| self.eigenvalues[2].abs())
    }

    /// Strong eigenvalue of the shear plane: λ_ss in dim 3, λ_ms in dim 4.
    pub fn lambda_plane_strong(&self) -> f64 {
        self.eigenvalues[2].abs()
    }

    pub fn v_u(&self) -> Vector4<f64> {
        self.vectors[0]
    }

    /// sin θ_u, with θ_u the angle between E^u and the yz-plane.
    pub fn sin_theta_u(&self) -> f64 {
        self.vectors[0][0]
    }

    pub fn theta_u(&self) -> f64 {
        self.sin_theta_u().asin()
    }

    pub fn eigen_frame(&self) -> (&Matrix4<f64>, &Matrix4<f64>) {
        (&self.f, &self.f_inv)
    }

    /// b̄ in eigen coordinates.
    pub fn beta(&self) -> &Vector4<f64> {
        &self.beta
    }

    pub fn plane(&self) -> &PlaneCoords {
        &self.plane
    }

    pub fn shear(&self, t: f64) -> ShearMap {
        ShearMap::from_basis(&self.chart, t)
    }

    /// `L^n ∘ f_t` in chart coordinates, with the eigen frame and plane attached.
    pub fn system(&self, n: i32, t: f64) -> ComposedSystem {
        ComposedSystem::identity(self.dim())
            .then_shear(self.shear(t))
            .then_linear(&self.linear, n)
            .with_frame(self.tangent_frame())
            .with_plane(self.plane.clone())
    }

    pub fn tangent_frame(&self) -> TangentFrame {
        let vs: Vec<Vec<f64>> = self
            .vectors
            .iter()
            .map(|v| v.as_slice()[..self.dim()].to_vec())
            .collect();
        TangentFrame::eigen(&self.linear, &vs, &self.eigenvalues)
    }

    /// Chart vector to eigen coordinates.
    pub fn to_eigen(&self, v: &Vector4<f64>) -> Vector4<f64> {
        self.f_inv * v
    }

    pub fn from_eigen(&self, w: &Vector4<f64>) -> Vector4<f64> {
        self.f * w
    }

    /// `D(L^p ∘ f_{±t})` on an eigen-coordinate vector when the shear
    /// coefficient is `c`: `w ↦ Λ^p (w + c (e_x·v) β)`.
    pub fn tangent_step(&self, w: &Vector4<f64>, c: f64, power: i32) -> Vector4<f64> {
        let vx = self.f.row(0).dot(&w.transpose());
        let mut out = w + self.beta * (c * vx);
        for i in 0..self.dim() {
            out[i] *= self.eigenvalues[i].powi(power);
        }
        out
    }

    /// The restricted 2×2 matrix `L^n Df_t|plane` in (ā, b̄) coordinates for
    /// shear coefficient `c`, without sampling a point.
    pub fn plane_matrix(&self, n: i32, c: f64) -> Matrix2<f64> {
        let w = self.plane.eigenbasis();
        let mu = self.plane.eigenvalues();
        let ln = w
            * Matrix2::from_diagonal(&Vector2::new(mu[0].powi(n), mu[1].powi(n)))
            * w.try_inverse().expect("eigenbasis invertible");
        ln * Matrix2::new(1.0, 0.0, c, 1.0)
    }

    /// Plane (ā, b̄) coordinates to eigen-adapted ones.
    pub fn plane_adapted(&self) -> (Matrix2<f64>, Matrix2<f64>) {
        let w = self.plane.eigenbasis();
        (w, w.try_inverse().expect("eigenbasis invertible"))
    }

    /// Original-coordinate point from a chart point.
    pub fn to_original(&self, p: &TorusPoint) -> TorusPoint {
        self.change_of_basis.action(1).apply(p)
    }
}

/// The three x-strips of the torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    GoodPlus,
    GoodMinus,
    Bad,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::GoodPlus => "G+",
            Region::GoodMinus => "G-",
            Region::Bad => "B",
        }
    }
}

/// Bad region `|cos 2πx| < t^{-α}` and its two good complements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSpec {
    pub alpha: f64,
    pub t: f64,
}

impl RegionSpec {
    pub fn new(alpha: f64, t: f64) -> Result<Self, GeometryError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(GeometryError::InvalidArgument(format!(
                "alpha must lie in (0, 1/2), got {alpha}"
            )));
        }
        if !(t > 1.0) {
            return Err(GeometryError::InvalidArgument(format!("regions need t > 1, got {t}")));
        }
        Ok(RegionSpec { alpha, t })
    }

    /// `t^{-α}`.
    pub fn threshold(&self) -> f64 {
        self.t.powf(-self.alpha)
    }

    /// Half-width in x of each bad strip, centred at 1/4 and 3/4.
    pub fn bad_half_width(&self) -> f64 {
        self.threshold().asin() / std::f64::consts::TAU
    }

    /// Lebesgue measure of the bad region.
    pub fn bad_fraction(&self) -> f64 {
        4.0 * self.bad_half_width()
    }

    pub fn classify_x(&self, x: f64) -> Region {
        let c = (std::f64::consts::TAU * x).cos();
        let s = self.threshold();
        if c > s {
            Region::GoodPlus
        } else if c < -s {
            Region::GoodMinus
        } else {
            Region::Bad
        }
    }
}

/// Region of a point, by its chart x-coordinate. Boundaries count as bad.
pub fn classify_region(p: &TorusPoint, r: &RegionSpec) -> Region {
    r.classify_x(p.x())
}

/// A sector of the projective line of the shear plane.
#[derive(Clone, Debug, PartialEq)]
pub enum SectorSpec {
    /// `|s| < ratio·|r|` in (ā, b̄) coordinates; ratio 3 is the good cone.
    Ratio(f64),
    /// Union of open angle intervals in `[0, π)`.
    Intervals(Vec<(f64, f64)>),
}

impl SectorSpec {
    pub fn good_cone() -> Self {
        SectorSpec::Ratio(3.0)
    }

    pub fn contains(&self, v: &Vector2<f64>) -> Result<bool, GeometryError> {
        if v[0] == 0.0 && v[1] == 0.0 {
            return Err(GeometryError::ZeroVector);
        }
        Ok(match self {
            SectorSpec::Ratio(k) => v[1].abs() < k * v[0].abs(),
            SectorSpec::Intervals(iv) => {
                let a = projective_angle(v);
                iv.iter().any(|&(lo, hi)| a > lo && a < hi)
            }
        })
    }
}

/// `C_g = {r ā + s b̄ : |s| < 3|r|}`.
pub fn in_good_cone(v: &Vector2<f64>) -> Result<bool, GeometryError> {
    SectorSpec::good_cone().contains(v)
}

/// Angle of the line through `v` in `[0, π)`.
pub fn projective_angle(v: &Vector2<f64>) -> f64 {
    let a = v[1].atan2(v[0]);
    let a = if a < 0.0 { a + std::f64::consts::PI } else { a };
    if a >= std::f64::consts::PI {
        0.0
    } else {
        a
    }
}

/// Distance between two line angles on `[0, π)` with its endpoints identified.
pub fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % std::f64::consts::PI;
    d.min(std::f64::consts::PI - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_point, stream_rng};
    use proptest::prelude::*;

    pub(crate) fn m3_inv() -> ToralAutomorphism {
        ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 1]])
            .unwrap()
            .inverse()
    }

    #[test]
    fn setup_is_in_its_own_chart() {
        let s = ShearSetup::new(&m3_inv()).unwrap();
        assert!(s.plane().chart.is_identity());
        assert!((s.lambda_u() - 5.0489).abs() < 1e-3);
        assert!((s.lambda_ws() - 0.6431).abs() < 1e-3);
        assert!((s.lambda_ss() - 0.3080).abs() < 1e-3);
        // b̄ lies in the stable plane: no unstable component
        assert!(s.beta()[0].abs() < 1e-12);
        assert!(s.sin_theta_u() > 0.0);
    }

    #[test]
    fn two_expanding_rejected() {
        let m = m3_inv().inverse();
        assert!(matches!(
            ShearSetup::new(&m),
            Err(GeometryError::InvalidArgument(_))
        ));
    }

    #[test]
    fn plane_matrix_matches_engine() {
        let s = ShearSetup::new(&m3_inv()).unwrap();
        let sys = s.system(3, 2.5);
        let mut rng = stream_rng(1, 0);
        for _ in 0..50 {
            let p = random_point(&mut rng, 3);
            let c = s.shear(2.5).coefficient_at_x(p.x());
            let (_, a) = sys.restricted_matrix(&p).unwrap();
            let b = s.plane_matrix(3, c);
            assert!((a - b).norm() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn tangent_step_matches_derivative() {
        let s = ShearSetup::new(&m3_inv()).unwrap();
        let sys = s.system(2, 1.7);
        let p = TorusPoint::new(&[0.31, 0.2, 0.9]);
        let (_, d) = sys.derivative(&p);
        let c = s.shear(1.7).coefficient_at_x(p.x());
        let v = Vector4::new(0.3, -1.0, 0.5, 0.0);
        let w = s.tangent_step(&s.to_eigen(&v), c, 2);
        assert!((s.from_eigen(&w) - d * v).norm() < 1e-10 * (d * v).norm());
    }

    #[test]
    fn region_examples() {
        let r = RegionSpec::new(0.25, 10.0).unwrap();
        assert_eq!(r.classify_x(0.0), Region::GoodPlus);
        assert_eq!(r.classify_x(0.5), Region::GoodMinus);
        assert_eq!(r.classify_x(0.25), Region::Bad);
        assert!(RegionSpec::new(0.6, 10.0).is_err());
        assert!(RegionSpec::new(0.25, 1.0).is_err());
    }

    #[test]
    fn bad_fraction_matches_sampling_and_scales() {
        let mut rng = stream_rng(3, 0);
        let r = RegionSpec::new(0.25, 50.0).unwrap();
        let n = 1_000_000;
        let mut bad = 0usize;
        for _ in 0..n {
            let p = random_point(&mut rng, 3);
            if classify_region(&p, &r) == Region::Bad {
                bad += 1;
            }
        }
        let frac = bad as f64 / n as f64;
        assert!((frac - r.bad_fraction()).abs() < 3e-3);
        let ts = [1e2, 1e3, 1e4, 1e5, 1e6];
        let fr: Vec<f64> = ts
            .iter()
            .map(|&t| RegionSpec::new(0.25, t).unwrap().bad_fraction())
            .collect();
        let fit = crate::stats::loglog_fit(&ts, &fr);
        assert!((fit.slope + 0.25).abs() < 0.05);
    }

    #[test]
    fn good_cone_examples() {
        assert!(in_good_cone(&Vector2::new(1.0, 0.0)).unwrap());
        assert!(!in_good_cone(&Vector2::new(0.0, 1.0)).unwrap());
        assert!(!in_good_cone(&Vector2::new(1.0, 3.0)).unwrap());
        assert_eq!(in_good_cone(&Vector2::zeros()), Err(GeometryError::ZeroVector));
    }

    proptest! {
        #[test]
        fn good_cone_is_scale_invariant(r in -10.0f64..10.0, s in -10.0f64..10.0, k in 0.01f64..100.0, neg in any::<bool>()) {
            prop_assume!(r != 0.0 || s != 0.0);
            let v = Vector2::new(r, s);
            let k = if neg { -k } else { k };
            prop_assert_eq!(in_good_cone(&v).unwrap(), in_good_cone(&(v * k)).unwrap());
        }

        #[test]
        fn exactly_one_region(x in 0.0f64..1.0, t in 1.01f64..1e6, alpha in 0.01f64..0.49) {
            let r = RegionSpec::new(alpha, t).unwrap();
            let c = (std::f64::consts::TAU * x).cos();
            let lab = r.classify_x(x);
            let s = r.threshold();
            prop_assert_eq!(lab == Region::GoodPlus, c > s);
            prop_assert_eq!(lab == Region::GoodMinus, c < -s);
        }
    }
}
