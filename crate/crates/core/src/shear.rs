//! The conservative shears f_t(x, ·) = · + t sin(2πx) b̄, written in the
//! normalized chart and conjugated back to the original torus coordinates.

use std::f64::consts::TAU;

use nalgebra::{Matrix4, Vector4};

use crate::lattice::{NormalizedBasis, ToralAutomorphism};
use crate::torus::{reduce_unit, IntAction, TorusPoint, MAX_DIM};

/// Both directions of a unimodular change of coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub dim: usize,
    /// old -> chart (`D`)
    pub to_chart: IntAction,
    /// chart -> old (`C`)
    pub from_chart: IntAction,
    pub d: Matrix4<f64>,
    pub c: Matrix4<f64>,
}

fn padded(m: &ToralAutomorphism) -> Matrix4<f64> {
    let mut out = Matrix4::identity();
    let d = m.dim();
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = m.entry(i, j) as f64;
        }
    }
    out
}

impl Chart {
    pub fn identity(dim: usize) -> Self {
        Chart {
            dim,
            to_chart: IntAction::identity(dim),
            from_chart: IntAction::identity(dim),
            d: Matrix4::identity(),
            c: Matrix4::identity(),
        }
    }

    pub fn from_basis(nb: &NormalizedBasis) -> Self {
        Chart {
            dim: nb.dim,
            to_chart: nb.to_normalized.action(1),
            from_chart: nb.change_of_basis.action(1),
            d: padded(&nb.to_normalized),
            c: padded(&nb.change_of_basis),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.d == Matrix4::identity()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShearMap {
    t: f64,
    dim: usize,
    /// Translation direction in chart coordinates; its x-component is 0.
    direction: Vector4<f64>,
    /// The profile is sin(2π(x + phase)).
    phase: f64,
    chart: Chart,
}

/// Analytic value and derivative at a point.
#[derive(Clone, Debug)]
pub struct Jet {
    pub image: TorusPoint,
    /// Padded to 4×4 with the identity in unused slots.
    pub derivative: Matrix4<f64>,
}

impl Jet {
    pub fn det(&self) -> f64 {
        self.derivative.determinant()
    }
}

impl ShearMap {
    /// Shear along b̄ of a normalized chart.
    pub fn from_basis(nb: &NormalizedBasis, t: f64) -> Self {
        let mut dir = Vector4::zeros();
        for (i, v) in nb.b_bar.iter().enumerate() {
            dir[i] = *v;
        }
        ShearMap {
            t,
            dim: nb.dim,
            direction: dir,
            phase: 0.0,
            chart: Chart::from_basis(nb),
        }
    }

    /// The shear of the formula in standard coordinates: direction (0, 1, b..).
    pub fn standard(b_coeffs: &[f64], t: f64) -> Self {
        let dim = b_coeffs.len() + 2;
        assert!((3..=MAX_DIM).contains(&dim));
        let mut dir = Vector4::zeros();
        dir[1] = 1.0;
        for (i, b) in b_coeffs.iter().enumerate() {
            dir[2 + i] = *b;
        }
        ShearMap {
            t,
            dim,
            direction: dir,
            phase: 0.0,
            chart: Chart::identity(dim),
        }
    }

    /// Same chart and profile, different translation direction (chart coordinates).
    pub fn with_direction(mut self, direction: &[f64]) -> Self {
        assert!(direction[0] == 0.0, "shear direction must have zero x-component");
        self.direction = Vector4::zeros();
        for (i, v) in direction.iter().enumerate() {
            self.direction[i] = *v;
        }
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_t(&self, t: f64) -> Self {
        let mut s = self.clone();
        s.t = t;
        s
    }

    /// f_t⁻¹ = f_{-t}.
    pub fn inverse(&self) -> Self {
        self.with_t(-self.t)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction.as_slice()[..self.dim]
    }

    /// b (dim 3) or (b₁, b₂) (dim 4), relative to the unit y-component.
    pub fn b_coeffs(&self) -> Vec<f64> {
        (2..self.dim)
            .map(|i| self.direction[i] / self.direction[1])
            .collect()
    }

    /// Direction in original coordinates.
    pub fn direction_old(&self) -> Vector4<f64> {
        self.chart.c * self.direction
    }

    /// The chart x-coordinate of a point, which the shear leaves fixed.
    #[inline]
    pub fn chart_x(&self, p: &TorusPoint) -> f64 {
        if self.chart.is_identity() {
            p.x()
        } else {
            // only the first row of D is needed
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.chart.d[(0, j)] * p.coords()[j];
            }
            reduce_unit(acc)
        }
    }

    /// The off-diagonal derivative entry 2πt cos(2π(x + phase)).
    #[inline]
    pub fn coefficient_at_x(&self, x: f64) -> f64 {
        TAU * self.t * (TAU * (x + self.phase)).cos()
    }

    #[inline]
    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        if self.t == 0.0 {
            return *p;
        }
        let u = if self.chart.is_identity() {
            *p
        } else {
            self.chart.to_chart.apply(p)
        };
        let s = self.t * (TAU * (u.x() + self.phase)).sin();
        let mut raw = u.raw();
        for i in 1..self.dim {
            raw[i] += s * self.direction[i];
        }
        let moved = TorusPoint::from_raw(raw, self.dim);
        if self.chart.is_identity() {
            moved
        } else {
            self.chart.from_chart.apply(&moved)
        }
    }

    /// Derivative in original coordinates: C (I + c·dir·e_xᵀ) D.
    #[inline]
    pub fn derivative(&self, p: &TorusPoint) -> Matrix4<f64> {
        let c = self.coefficient_at_x(self.chart_x(p));
        let mut inner = Matrix4::identity();
        for i in 0..self.dim {
            inner[(i, 0)] += c * self.direction[i];
        }
        if self.chart.is_identity() {
            inner
        } else {
            self.chart.c * inner * self.chart.d
        }
    }

    pub fn jet(&self, p: &TorusPoint) -> Jet {
        Jet {
            image: self.apply(p),
            derivative: self.derivative(p),
        }
    }

    /// The map on the universal cover R^d (no reduction).
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut v = Vector4::zeros();
        for i in 0..d {
            v[i] = x[i];
        }
        let u = self.chart.d * v;
        let s = self.t * (TAU * (u[0] + self.phase)).sin();
        let moved = u + self.direction * s;
        let back = self.chart.c * moved;
        back.as_slice()[..d].to_vec()
    }

    /// Max entry error between the analytic derivative and central differences of the lift.
    pub fn finite_difference_check(&self, p: &TorusPoint, h: f64) -> f64 {
        assert!(h > 0.0 && h <= 1e-3, "step must lie in (0, 1e-3]");
        let d = self.dim;
        let analytic = self.derivative(p);
        let base = p.coords().to_vec();
        let mut err: f64 = 0.0;
        for j in 0..d {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = self.lift(&plus);
            let fm = self.lift(&minus);
            for i in 0..d {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                err = err.max((fd - analytic[(i, j)]).abs());
            }
        }
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LinearData;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> TorusPoint {
        let c: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        TorusPoint::new(&c)
    }

    fn m3_chart_shear(t: f64) -> ShearMap {
        let m = ToralAutomorphism::from_rows(&[vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 1]])
            .unwrap()
            .inverse();
        let ld = LinearData::new(m).unwrap();
        ShearMap::from_basis(ld.chart(), t)
    }

    #[test]
    fn formula_examples() {
        let f = ShearMap::standard(&[0.4], 0.3);
        let p = TorusPoint::new(&[0.0, 0.3, 0.7]);
        assert!(f.apply(&p).dist(&p) < 1e-15);
        let q = f.apply(&TorusPoint::new(&[0.25, 0.1, 0.2]));
        let want = TorusPoint::new(&[0.25, 0.4, 0.2 + 0.4 * 0.3]);
        assert!(q.dist(&want) < 1e-15);
    }

    #[test]
    fn derivative_rows_match_formula() {
        let (t, b) = (1.7, 0.35);
        let f = ShearMap::standard(&[b], t);
        let p = TorusPoint::new(&[0.1, 0.5, 0.9]);
        let df = f.derivative(&p);
        let c = TAU * t * (TAU * 0.1f64).cos();
        let want = [[1.0, 0.0, 0.0], [c, 1.0, 0.0], [b * c, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((df[(i, j)] - want[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn inverse_roundtrip_in_chart() {
        let f = m3_chart_shear(7.5);
        let g = f.inverse();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            let p = random_point(&mut rng, 3);
            assert!(g.apply(&f.apply(&p)).dist(&p) < 1e-12);
        }
    }

    #[test]
    fn jet_invariants_in_chart() {
        let f = m3_chart_shear(3.0);
        let nb_b = f.direction_old();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let p = random_point(&mut rng, 3);
            let j = f.jet(&p);
            assert!((j.det() - 1.0).abs() < 1e-12);
            // Df b̄ = b̄
            let img = j.derivative * nb_b;
            assert!((img - nb_b).norm() < 1e-12 * nb_b.norm());
            // chart x is preserved
            assert!(
                crate::torus::circle_dist(f.chart_x(&j.image), f.chart_x(&p)) < 1e-12
            );
        }
    }

    #[test]
    fn a_bar_picks_up_b_bar() {
        let t = 2.0;
        let f = ShearMap::standard(&[0.6], t);
        let p = TorusPoint::new(&[0.2, 0.0, 0.0]);
        let a = Vector4::new(1.0, 0.0, 0.3, 0.0);
        let b = Vector4::new(0.0, 1.0, 0.6, 0.0);
        let got = f.derivative(&p) * a;
        let want = a + b * (TAU * t * (TAU * 0.2f64).cos());
        assert!((got - want).norm() < 1e-13);
    }

    #[test]
    fn finite_differences_converge_quadratically() {
        let f = m3_chart_shear(2.0);
        let p = TorusPoint::new(&[0.37, 0.61, 0.13]);
        let errs: Vec<f64> = [1e-3, 1e-4]
            .iter()
            .map(|&h| f.finite_difference_check(&p, h))
            .collect();
        let slope = (errs[0] / errs[1]).log10();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}, errs {errs:?}");
        assert!(f.finite_difference_check(&p, 1e-5) <= 1e-7 * 3.0);
        let id = f.with_t(0.0);
        assert!(id.finite_difference_check(&p, 1e-5) <= 1e-10);
    }

    #[test]
    fn four_dimensional_translation_stays_in_plane() {
        let f = ShearMap::standard(&[0.3, 0.7], 1.3);
        let p = TorusPoint::new(&[0.3, 0.1, 0.2, 0.4]);
        let q = f.apply(&p);
        let s = 1.3 * (TAU * 0.3f64).sin();
        let want = TorusPoint::new(&[0.3, 0.1 + s, 0.2 + 0.3 * s, 0.4 + 0.7 * s]);
        assert!(q.dist(&want) < 1e-15);
        assert!((f.jet(&p).det() - 1.0).abs() < 1e-12);
    }
}
