//! Pushing unit vector fields on unstable segments forward by the
//! projectivized restricted cocycle, and how their Lipschitz constants change.

use nalgebra::{Matrix2, Vector2};

use super::{angle_dist, projective_angle, GeometryError};
use crate::partition::{LeafField, UnstableSegment};

const FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzReport {
    /// Lipschitz constant of the input field along the segment.
    pub lip_in: f64,
    /// Lipschitz constant of the pushed field along the image segment.
    pub lip_out: f64,
    /// Total variation of the pushed field.
    pub variation_out: f64,
    pub image_length: f64,
    /// Pointwise bound `sup ((σ₁/σ₂)·lip_in + T)/J` on `lip_out`.
    pub bound: f64,
    /// `κ = sup max(σ₁/σ₂, T)/J`, so `lip_out ≤ κ (lip_in + 1)`.
    pub kappa: f64,
    /// The pushed field's angles.
    pub angles_out: Vec<f64>,
}

/// Projective data of the cocycle at a leaf point: sup of the projective
/// derivative in the fibre (σ₁/σ₂), sup over lines of the rate the image line
/// turns as the base point moves along the leaf (T), and the leaf stretch J.
fn local_rates(
    field: &LeafField,
    x: &nalgebra::Vector4<f64>,
    dir: &nalgebra::Vector4<f64>,
) -> Result<(f64, f64, f64), GeometryError> {
    let d = field.setup.dim();
    let at = |y: nalgebra::Vector4<f64>| -> Result<Matrix2<f64>, GeometryError> {
        let p = crate::torus::TorusPoint::new(&y.as_slice()[..d]);
        Ok(field.system().restricted_matrix(&p)?.1)
    };
    let a = at(*x)?;
    let ap = (at(x + dir * FD_STEP)? - at(x - dir * FD_STEP)?) / (2.0 * FD_STEP);
    let sv = a.singular_values();
    let (s1, s2) = (sv.max(), sv.min());
    // sup_u |Au × A'u| / ‖Au‖²; with w = Au this is the spectral radius of
    // the symmetric part of R A' A⁻¹
    let rot = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let a_inv = a.try_inverse().ok_or_else(|| GeometryError::InvalidArgument("singular cocycle".into()))?;
    let m = rot * ap * a_inv;
    let m = (m + m.transpose()) * 0.5;
    let turn = m.symmetric_eigenvalues().abs().max();
    let p = crate::torus::TorusPoint::new(&x.as_slice()[..d]);
    let j = field.stretch(&p, &(dir / dir.norm()));
    Ok((s1 / s2, turn, j))
}

/// `κ = sup over the segment of max(σ₁/σ₂, T)/J`; a field that is
/// `l`-Lipschitz is pushed to one that is `κ(l+1)`-Lipschitz.
pub fn pushforward_constant(field: &LeafField, seg: &UnstableSegment) -> Result<f64, GeometryError> {
    let mut kappa: f64 = 0.0;
    for i in 0..seg.len() {
        let dir = field.setup.from_eigen(&seg.directions[i]);
        let dir = dir / dir.norm();
        let mut pts = vec![seg.nodes[i]];
        if i + 1 < seg.len() {
            pts.push((seg.nodes[i] + seg.nodes[i + 1]) * 0.5);
        }
        for x in pts {
            let (ratio, turn, j) = local_rates(field, &x, &dir)?;
            kappa = kappa.max(ratio.max(turn) / j);
        }
    }
    Ok(kappa)
}

/// Push the field with angles `angles` (one per node, (ā, b̄) chart) forward
/// along `seg` and measure Lipschitz constants on both sides.
pub fn lipschitz_pushforward(
    field: &LeafField,
    seg: &UnstableSegment,
    angles: &[f64],
) -> Result<LipschitzReport, GeometryError> {
    if angles.len() != seg.len() {
        return Err(GeometryError::InvalidArgument(format!(
            "field has {} angles for {} nodes",
            angles.len(),
            seg.len()
        )));
    }
    let m = seg.len();
    let mut out = Vec::with_capacity(m);
    let mut stretch = Vec::with_capacity(m);
    let mut bound: f64 = 0.0;
    let mut kappa: f64 = 0.0;
    let mut lip_in: f64 = 0.0;
    for i in 1..m {
        lip_in = lip_in.max(angle_dist(angles[i], angles[i - 1]) / (seg.arc[i] - seg.arc[i - 1]));
    }
    for i in 0..m {
        let p = seg.point(i);
        let (_, a) = field.system().restricted_matrix(&p)?;
        out.push(projective_angle(&(a * Vector2::new(angles[i].cos(), angles[i].sin()))));
        let dir = field.setup.from_eigen(&seg.directions[i]);
        let dir = dir / dir.norm();
        stretch.push(field.stretch(&p, &dir));
        let mut pts = vec![seg.nodes[i]];
        if i + 1 < m {
            pts.push((seg.nodes[i] + seg.nodes[i + 1]) * 0.5);
        }
        for x in pts {
            let (ratio, turn, j) = local_rates(field, &x, &dir)?;
            bound = bound.max((ratio * lip_in + turn) / j);
            kappa = kappa.max(ratio.max(turn) / j);
        }
    }
    let mut lip_out: f64 = 0.0;
    let mut variation = 0.0;
    let mut image_length = 0.0;
    for i in 1..m {
        let ds = 0.5 * (stretch[i] + stretch[i - 1]) * (seg.arc[i] - seg.arc[i - 1]);
        let dphi = angle_dist(out[i], out[i - 1]);
        image_length += ds;
        variation += dphi;
        lip_out = lip_out.max(dphi / ds);
    }
    Ok(LipschitzReport {
        lip_in,
        lip_out,
        variation_out: variation,
        image_length,
        bound,
        kappa,
        angles_out: out,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::m3_inv;
    use super::super::ShearSetup;
    use super::*;
    use crate::partition::grow_unstable_segment;
    use crate::torus::TorusPoint;

    #[test]
    fn constant_field_stays_lipschitz() {
        let s = ShearSetup::new(&m3_inv()).unwrap();
        let n = 10;
        let t = s.lambda_ws().powf(-0.3 * n as f64);
        let f = LeafField::new(&s, n, t);
        let len = 2.0 / s.sin_theta_u();
        let seg = grow_unstable_segment(&f, &TorusPoint::new(&[0.0, 0.2, 0.4]), len).unwrap();
        let kappa = pushforward_constant(&f, &seg).unwrap();
        let l = 2.0 * kappa;
        assert!(l < 1.0);
        for k in 0..16 {
            let th = std::f64::consts::PI * k as f64 / 16.0;
            let rep = lipschitz_pushforward(&f, &seg, &vec![th; seg.len()]).unwrap();
            assert!(rep.lip_out <= 1.05 * rep.bound);
            assert!(rep.lip_out <= l, "{} > {}", rep.lip_out, l);
            assert!(rep.lip_out <= rep.kappa * (rep.lip_in + 1.0) * 1.05);
            assert!(rep.variation_out <= l * rep.image_length);
        }
    }

    #[test]
    fn linear_case_contracts() {
        let s = ShearSetup::new(&m3_inv()).unwrap();
        let f = LeafField::new(&s, 3, 0.0);
        let seg = grow_unstable_segment(&f, &TorusPoint::new(&[0.1, 0.2, 0.4]), 2.0).unwrap();
        let angles: Vec<f64> = seg.arc.iter().map(|a| 0.3 + 0.2 * a).collect();
        let rep = lipschitz_pushforward(&f, &seg, &angles).unwrap();
        let a = s.plane_matrix(3, 0.0);
        let sv = a.singular_values();
        let factor = sv.max() / sv.min() / s.lambda_u().powi(3);
        assert!(rep.lip_out <= rep.lip_in * factor * (1.0 + 1e-6));
    }
}
