//! Composition words over linear automorphisms and shears, their orbits and
//! derivative cocycles.
//!
//! A word is applied left to right: `[f_t, L^n]` is the map `L^n ∘ f_t`.
//!
//! Tangent vectors are carried in a fixed frame `w = F⁻¹ v`. When `F` is the
//! eigenbasis of the linear factor, `L^n` acts diagonally and the stable
//! coordinates never mix with the huge unstable ones, which keeps exponents of
//! strongly contracted directions accurate for large `n`.

mod lyapunov;
mod plane;

pub use lyapunov::{
    lyapunov_orbits, lyapunov_spectrum, lyapunov_spectrum_with, write_orbit_csv, LyapunovEstimate,
    LyapunovOptions,
};
pub use plane::{
    projective_step, restricted_stable_cocycle, stable_exponent_stats, top_stable_exponent,
    PlaneCoords, ProjectivePoint,
};

use nalgebra::{Matrix2, Matrix4, RowVector4, Vector4};

use crate::lattice::ToralAutomorphism;
use crate::shear::ShearMap;
use crate::torus::{IntAction, TorusPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CocycleError {
    #[error("tangent vector norm {norm:e} left [1e-300, 1e300] at step {step}; lower reorth_period")]
    NumericalBlowup { step: usize, norm: f64 },
    #[error("image of the shear plane leaves it by {distance:e}")]
    PlaneNotInvariant { distance: f64 },
    #[error("system has no shear plane attached")]
    NoPlane,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `L^power` with its torus action and dense derivative cached.
#[derive(Clone, Debug)]
pub struct LinearFactor {
    pub matrix: ToralAutomorphism,
    pub power: i32,
    action: IntAction,
    dense: Matrix4<f64>,
}

fn padded_f64(m: &ToralAutomorphism) -> Matrix4<f64> {
    let mut out = Matrix4::identity();
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            out[(i, j)] = m.entry(i, j) as f64;
        }
    }
    out
}

impl LinearFactor {
    pub fn new(matrix: &ToralAutomorphism, power: i32) -> Self {
        let base = if power < 0 {
            matrix.inverse()
        } else {
            matrix.clone()
        };
        let b = padded_f64(&base);
        let mut dense = Matrix4::identity();
        for _ in 0..power.unsigned_abs() {
            dense = b * dense;
        }
        LinearFactor {
            matrix: matrix.clone(),
            power,
            action: matrix.action(power),
            dense,
        }
    }

    pub fn dense(&self) -> &Matrix4<f64> {
        &self.dense
    }
}

#[derive(Clone, Debug)]
pub enum Factor {
    Linear(LinearFactor),
    Shear(ShearMap),
}

impl Factor {
    #[inline]
    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        match self {
            Factor::Linear(l) => l.action.apply(p),
            Factor::Shear(s) => s.apply(p),
        }
    }

    /// Derivative at `p` in standard coordinates.
    pub fn derivative(&self, p: &TorusPoint) -> Matrix4<f64> {
        match self {
            Factor::Linear(l) => l.dense,
            Factor::Shear(s) => s.derivative(p),
        }
    }

    pub fn inverse(&self) -> Factor {
        match self {
            Factor::Linear(l) => Factor::Linear(LinearFactor::new(&l.matrix, -l.power)),
            Factor::Shear(s) => Factor::Shear(s.inverse()),
        }
    }
}

/// How one factor acts on frame coordinates.
#[derive(Clone, Debug)]
enum FrameOp {
    Diag(Vector4<f64>),
    Dense(Matrix4<f64>),
    /// `w ↦ w + c(x)·β·(ρ·w)`
    Shear { beta: Vector4<f64>, rho: RowVector4<f64> },
}

/// The basis tangent vectors are expressed in; columns of `f`.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub f: Matrix4<f64>,
    pub f_inv: Matrix4<f64>,
    /// The matrix whose eigenvectors `f` holds, with their eigenvalues.
    eigen_of: Option<(ToralAutomorphism, Vector4<f64>)>,
}

impl TangentFrame {
    pub fn standard() -> Self {
        TangentFrame {
            f: Matrix4::identity(),
            f_inv: Matrix4::identity(),
            eigen_of: None,
        }
    }

    /// Eigenbasis of `m`: `vectors[i]` belongs to `values[i]`.
    pub fn eigen(m: &ToralAutomorphism, vectors: &[Vec<f64>], values: &[f64]) -> Self {
        let mut f = Matrix4::identity();
        let mut lam = Vector4::repeat(1.0);
        for (j, v) in vectors.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                f[(i, j)] = *x;
            }
            lam[j] = values[j];
        }
        let f_inv = f.try_inverse().expect("eigenvectors of a simple spectrum are independent");
        TangentFrame {
            f,
            f_inv,
            eigen_of: Some((m.clone(), lam)),
        }
    }

    fn op_for(&self, factor: &Factor) -> FrameOp {
        match factor {
            Factor::Linear(l) => {
                if let Some((m, lam)) = &self.eigen_of {
                    let sign = if l.matrix == *m {
                        Some(l.power)
                    } else if l.matrix == m.inverse() {
                        Some(-l.power)
                    } else {
                        None
                    };
                    if let Some(p) = sign {
                        let d = m.dim();
                        let mut diag = Vector4::repeat(1.0);
                        for i in 0..d {
                            diag[i] = lam[i].powi(p);
                        }
                        return FrameOp::Diag(diag);
                    }
                }
                FrameOp::Dense(self.f_inv * l.dense * self.f)
            }
            Factor::Shear(s) => {
                let ch = s.chart();
                let mut dir = Vector4::zeros();
                for (i, v) in s.direction().iter().enumerate() {
                    dir[i] = *v;
                }
                let beta = self.f_inv * (ch.c * dir);
                let rho = ch.d.row(0) * self.f;
                FrameOp::Shear { beta, rho }
            }
        }
    }
}

/// A composition word with cached per-factor data.
#[derive(Clone, Debug)]
pub struct ComposedSystem {
    dim: usize,
    factors: Vec<Factor>,
    frame: TangentFrame,
    ops: Vec<FrameOp>,
    plane: Option<PlaneCoords>,
    plane_ops: Vec<plane::PlaneOp>,
}

impl ComposedSystem {
    pub fn identity(dim: usize) -> Self {
        ComposedSystem {
            dim,
            factors: Vec::new(),
            frame: TangentFrame::standard(),
            ops: Vec::new(),
            plane: None,
            plane_ops: Vec::new(),
        }
    }

    pub fn new(dim: usize, factors: Vec<Factor>) -> Self {
        let mut s = Self::identity(dim);
        for f in factors {
            s = s.then(f);
        }
        s
    }

    /// Append a factor (applied after the existing ones).
    pub fn then(mut self, f: Factor) -> Self {
        let dim = match &f {
            Factor::Linear(l) => l.matrix.dim(),
            Factor::Shear(s) => s.dim(),
        };
        assert_eq!(dim, self.dim, "factor dimension mismatch");
        self.ops.push(self.frame.op_for(&f));
        if let Some(pc) = &self.plane {
            self.plane_ops.push(pc.op_for(&f));
        }
        self.factors.push(f);
        self
    }

    pub fn then_linear(self, m: &ToralAutomorphism, power: i32) -> Self {
        self.then(Factor::Linear(LinearFactor::new(m, power)))
    }

    pub fn then_shear(self, s: ShearMap) -> Self {
        self.then(Factor::Shear(s))
    }

    /// Recompute frame coordinates in a new tangent frame.
    pub fn with_frame(mut self, frame: TangentFrame) -> Self {
        self.ops = self.factors.iter().map(|f| frame.op_for(f)).collect();
        self.frame = frame;
        self
    }

    /// Attach the invariant plane used by the restricted cocycle.
    pub fn with_plane(mut self, plane: PlaneCoords) -> Self {
        self.plane_ops = self.factors.iter().map(|f| plane.op_for(f)).collect();
        self.plane = Some(plane);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    pub fn plane(&self) -> Option<&PlaneCoords> {
        self.plane.as_ref()
    }

    /// The inverse word: reversed order, each factor inverted.
    pub fn inverse(&self) -> ComposedSystem {
        let mut s = ComposedSystem::identity(self.dim).with_frame(self.frame.clone());
        if let Some(p) = &self.plane {
            s = s.with_plane(p.clone());
        }
        for f in self.factors.iter().rev() {
            s = s.then(f.inverse());
        }
        s
    }

    #[inline]
    pub fn apply(&self, p: &TorusPoint) -> TorusPoint {
        self.factors.iter().fold(*p, |q, f| f.apply(&q))
    }

    /// `p0, sys(p0), ..., sys^n(p0)`.
    pub fn orbit(&self, p0: &TorusPoint, n: usize) -> Vec<TorusPoint> {
        let mut out = Vec::with_capacity(n + 1);
        let mut p = *p0;
        out.push(p);
        for _ in 0..n {
            p = self.apply(&p);
            out.push(p);
        }
        out
    }

    /// Image and full derivative (standard coordinates) by the chain rule.
    pub fn derivative(&self, p: &TorusPoint) -> (TorusPoint, Matrix4<f64>) {
        let mut q = *p;
        let mut d = Matrix4::identity();
        for f in &self.factors {
            d = f.derivative(&q) * d;
            q = f.apply(&q);
        }
        (q, d)
    }

    /// One step of the map, pushing frame-coordinate vectors along.
    #[inline]
    pub fn step_frame(&self, p: &TorusPoint, vs: &mut [Vector4<f64>]) -> TorusPoint {
        let mut q = *p;
        for (f, op) in self.factors.iter().zip(&self.ops) {
            match op {
                FrameOp::Diag(dg) => {
                    for v in vs.iter_mut() {
                        v.component_mul_assign(dg);
                    }
                }
                FrameOp::Dense(m) => {
                    for v in vs.iter_mut() {
                        *v = m * *v;
                    }
                }
                FrameOp::Shear { beta, rho } => {
                    let Factor::Shear(s) = f else { unreachable!() };
                    let c = s.coefficient_at_x(s.chart_x(&q));
                    for v in vs.iter_mut() {
                        let k = c * rho.dot(&v.transpose());
                        *v += beta * k;
                    }
                }
            }
            q = f.apply(&q);
        }
        q
    }

    /// 2×2 matrix of the derivative restricted to the shear plane, in (ā, b̄)
    /// coordinates, together with the image point.
    pub fn restricted_matrix(&self, p: &TorusPoint) -> Result<(TorusPoint, Matrix2<f64>), CocycleError> {
        let pc = self.plane.as_ref().ok_or(CocycleError::NoPlane)?;
        let mut q = *p;
        let mut a = Matrix2::identity();
        for (f, op) in self.factors.iter().zip(&self.plane_ops) {
            a = pc.step_matrix(op, f, &q)? * a;
            q = f.apply(&q);
        }
        Ok((q, a))
    }
}
