//! Adapted families built from an expanding base and a non-invariant sector.
//!
//! The base here is a single interval `[0, 1)` whose `d` children
//! `[j/d, (j+1)/d)` are each mapped affinely onto the whole interval, so every
//! inverse branch contracts by exactly `1/d` and the atom diameter is 1.

use nalgebra::Matrix2;

use super::arc::{push, Arc};
use super::model::AdaptedFamilyModel;
use super::{lower_bound, AdaptedError, BoundInputs};
use crate::geometry::angle_dist;

/// Directions used for the projective Lipschitz estimate.
const DIRECTIONS: usize = 64;
/// Grid for the Lipschitz and bolicity estimates.
const LIP_GRID: usize = 20_000;
/// Safety factor on the sampled Lipschitz constant.
const LIP_SAFETY: f64 = 1.02;
const FIELD_GRID: usize = 1000;
const RECOVERY_GRID: usize = 200;
const FIELD_CHILDREN: usize = 64;

fn violated(hypothesis: &'static str, margin: f64) -> AdaptedError {
    AdaptedError::HypothesisViolated { hypothesis, margin }
}

/// Rescue classes of a finite model: for each atom and each of the `s` pieces
/// of the complement of its cone, the mass of children that map the whole
/// piece into the target cone with clearance at least `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct RescueStructure {
    pub s: usize,
    pub alpha: f64,
    /// Smallest integer `k > s` with `1/k` below every rescue mass.
    pub k: usize,
    pub masses: Vec<Vec<f64>>,
    pub min_mass: f64,
    /// Smallest clearance of a good image cone inside its target cone.
    pub good_clearance: f64,
}

fn k_for(s: usize, min_mass: f64) -> usize {
    ((1.0 / min_mass).floor() as usize + 1).max(s + 1)
}

/// Check the sector hypotheses on a finite model and extract `k`.
pub fn rescue_structure(m: &AdaptedFamilyModel, s: usize, alpha: f64) -> Result<RescueStructure, AdaptedError> {
    m.validate()?;
    if s == 0 || !(alpha > 0.0) {
        return Err(AdaptedError::Domain("need s ≥ 1 and alpha > 0".into()));
    }
    let mut good_clearance = f64::INFINITY;
    for (i, ch) in m.children.iter().enumerate() {
        for c in ch.iter().filter(|c| c.good) {
            let cl = m.cones[i].image(&c.matrix).clearance(&m.cones[c.target]);
            good_clearance = good_clearance.min(cl);
        }
    }
    if good_clearance < alpha {
        return Err(violated("H7", good_clearance - alpha));
    }
    let mut masses = Vec::with_capacity(m.atoms());
    let mut min_mass = f64::INFINITY;
    let mut best_shortfall = f64::INFINITY;
    for (i, ch) in m.children.iter().enumerate() {
        let mut row = Vec::with_capacity(s);
        for piece in m.cones[i].complement_pieces(s) {
            let mut mass = 0.0;
            let mut best = f64::NEG_INFINITY;
            for c in ch {
                let cl = piece.image(&c.matrix).clearance(&m.cones[c.target]);
                best = best.max(cl);
                if cl >= alpha {
                    mass += c.weight;
                }
            }
            if mass == 0.0 {
                best_shortfall = best_shortfall.min(best - alpha);
            }
            min_mass = min_mass.min(mass);
            row.push(mass);
        }
        masses.push(row);
    }
    if min_mass == 0.0 {
        return Err(violated("H7", best_shortfall));
    }
    Ok(RescueStructure {
        s,
        alpha,
        k: k_for(s, min_mass),
        masses,
        min_mass,
        good_clearance,
    })
}

/// `(1/(1+kδ))·log(λ^{1−δ}/‖A⁻¹‖^{(k+1)δ})`, the general bound at `β = 1/k`.
pub fn appendix_bound(delta: f64, lambda: f64, inv_norm: f64, k: usize) -> Result<f64, AdaptedError> {
    if k == 0 {
        return Err(AdaptedError::Domain("k must be positive".into()));
    }
    BoundInputs {
        beta: 1.0 / k as f64,
        delta,
        lambda,
        inv_norm,
    }
    .validate()?;
    let k = k as f64;
    Ok(((1.0 - delta) * lambda.ln() - (k + 1.0) * delta * inv_norm.ln()) / (1.0 + k * delta))
}

type Cocycle = Box<dyn Fn(f64) -> Matrix2<f64> + Send + Sync>;

/// A `θ`-Hölder cocycle over the `d`-branch expanding interval map, with a
/// constant sector.
pub struct HolderModel {
    pub d: usize,
    pub theta: f64,
    pub sector: Arc,
    cocycle: Cocycle,
}

impl std::fmt::Debug for HolderModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HolderModel")
            .field("d", &self.d)
            .field("theta", &self.theta)
            .field("sector", &self.sector)
            .finish_non_exhaustive()
    }
}

fn rot(a: f64) -> Matrix2<f64> {
    Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos())
}

impl HolderModel {
    pub fn new(
        d: usize,
        theta: f64,
        sector: Arc,
        cocycle: impl Fn(f64) -> Matrix2<f64> + Send + Sync + 'static,
    ) -> Self {
        HolderModel {
            d,
            theta,
            sector,
            cocycle: Box::new(cocycle),
        }
    }

    pub fn constant(d: usize, theta: f64, sector: Arc, a: Matrix2<f64>) -> Self {
        Self::new(d, theta, sector, move |_| a)
    }

    /// `A(x) = B·R(amp·sin 2πx)` with `B` contracting onto the sector center
    /// by `s2/s1`. The rotation swings the collapsed direction from side to
    /// side, so each half of the complement is rescued on part of the interval.
    pub fn rotating(d: usize, sector: Arc, s1: f64, s2: f64, amp: f64) -> Self {
        let c = sector.center;
        let b = rot(c) * Matrix2::new(s1, 0.0, 0.0, s2) * rot(-c);
        Self::new(d, 1.0, sector, move |x| {
            b * rot(amp * (2.0 * std::f64::consts::PI * x).sin())
        })
    }

    pub fn matrix(&self, x: f64) -> Matrix2<f64> {
        (self.cocycle)(x)
    }

    /// Inverse branch `j`: `y ↦ (j + y)/d`.
    pub fn branch(&self, j: usize, y: f64) -> f64 {
        (j as f64 + y) / self.d as f64
    }

    /// The pushed field `Y(y) = P(A(g_j y))·X(g_j y)` at the points `ys`.
    pub fn push_field(&self, j: usize, field: &dyn Fn(f64) -> f64, ys: &[f64]) -> Vec<f64> {
        ys.iter()
            .map(|&y| {
                let x = self.branch(j, y);
                push(&self.matrix(x), field(x))
            })
            .collect()
    }
}

/// `sup d(v_i, v_j)/|x_i − x_j|^θ` over the sample. For `θ = 1` and sorted
/// points, neighbours suffice by the triangle inequality.
pub fn holder_constant(xs: &[f64], angles: &[f64], theta: f64) -> f64 {
    let mut best: f64 = 0.0;
    if theta == 1.0 {
        for i in 1..xs.len() {
            best = best.max(angle_dist(angles[i], angles[i - 1]) / (xs[i] - xs[i - 1]).abs());
        }
        return best;
    }
    for i in 0..xs.len() {
        for j in 0..i {
            best = best.max(angle_dist(angles[i], angles[j]) / (xs[i] - xs[j]).abs().powf(theta));
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub d: usize,
    pub theta: f64,
    /// Largest atom diameter.
    pub r: f64,
    /// Bolicity `sup ‖A‖‖A⁻¹‖`.
    pub b: f64,
    pub q: f64,
    pub c_pa: f64,
    pub c0: f64,
    /// `α/2 − C²r^θ/((1−q)d^θ)`.
    pub h8_margin: f64,
    pub lambda: f64,
    pub inv_norm: f64,
    /// Mass of children outside the good region.
    pub delta: f64,
    pub k: usize,
    pub rescue_masses: Vec<f64>,
    /// Measured Hölder constants of the test fields and of their pushes.
    pub input_holder_max: f64,
    pub pushed_holder_max: f64,
    /// Good fields stay good over good children.
    pub good_stays_good: bool,
    /// Smallest mass on which a bad test field became good with clearance
    /// `α/2`, and the smallest clearance on its rescue children.
    pub recovered_mass_min: f64,
    pub recovered_clearance_min: f64,
    pub bound: f64,
}

/// Evaluate the sector hypotheses and both transport lemmas on `model`.
///
/// Hypotheses on children are checked at each child's endpoints and
/// midpoint; `C_{P(A)}` is a sampled Lipschitz constant with a 2% margin,
/// converted to a `θ`-Hölder constant on the unit atom.
pub fn holder_family_check(model: &HolderModel, alpha: f64, s: usize) -> Result<HolderReport, AdaptedError> {
    let d = model.d;
    if d < 2 {
        return Err(violated("H6", d as f64 - 1.0));
    }
    let theta = model.theta;
    if !(theta > 0.0 && theta <= 1.0) || !(alpha > 0.0) || s == 0 {
        return Err(AdaptedError::Domain("need 0 < θ ≤ 1, α > 0, s ≥ 1".into()));
    }
    let df = d as f64;
    let r: f64 = 1.0;
    let dirs: Vec<f64> = (0..DIRECTIONS)
        .map(|i| std::f64::consts::PI * i as f64 / DIRECTIONS as f64)
        .collect();
    let mut b: f64 = 0.0;
    let mut lip: f64 = 0.0;
    let mut prev: Option<(f64, Matrix2<f64>)> = None;
    for i in 0..=LIP_GRID {
        let x = i as f64 / LIP_GRID as f64;
        let a = model.matrix(x);
        let sv = a.singular_values();
        b = b.max(sv.max() / sv.min());
        if let Some((px, pa)) = prev {
            for &v in &dirs {
                lip = lip.max(angle_dist(push(&a, v), push(&pa, v)) / (x - px));
            }
        }
        prev = Some((x, a));
    }
    let c_pa = LIP_SAFETY * lip * r.powf(1.0 - theta);
    let q = b / df.powf(theta);
    if q >= 1.0 {
        return Err(violated("H8", 1.0 - q));
    }
    let h8_margin = alpha / 2.0 - c_pa * c_pa * r.powf(theta) / ((1.0 - q) * df.powf(theta));
    if h8_margin <= 0.0 {
        return Err(violated("H8", h8_margin));
    }
    let c0 = c_pa / ((1.0 - q) * df.powf(theta));

    let sector = model.sector;
    let pieces = sector.complement_pieces(s);
    let mut good = vec![true; d];
    let mut rescue = vec![vec![true; d]; s];
    let mut lambda = f64::INFINITY;
    let mut inv_norm: f64 = 0.0;
    let mut worst_good = f64::INFINITY;
    for j in 0..d {
        for y in [0.0, 0.5, 1.0] {
            let a = model.matrix(model.branch(j, y));
            inv_norm = inv_norm.max(1.0 / a.singular_values().min());
            let cl = sector.image(&a).clearance(&sector);
            worst_good = worst_good.min(cl);
            if cl < alpha {
                good[j] = false;
            } else {
                lambda = lambda.min(sector.min_norm(&a));
            }
            for (p, piece) in pieces.iter().enumerate() {
                if piece.image(&a).clearance(&sector) < alpha {
                    rescue[p][j] = false;
                }
            }
        }
    }
    let n_good = good.iter().filter(|g| **g).count();
    if n_good == 0 {
        return Err(violated("H7", worst_good - alpha));
    }
    let delta = (d - n_good) as f64 / df;
    let rescue_masses: Vec<f64> = rescue
        .iter()
        .map(|row| row.iter().filter(|x| **x).count() as f64 / df)
        .collect();
    let min_mass = rescue_masses.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_mass == 0.0 {
        return Err(violated("H7", -alpha));
    }
    let k = k_for(s, min_mass);

    // transport of Hölder fields through a spread of children
    let ys: Vec<f64> = (0..FIELD_GRID).map(|i| i as f64 / (FIELD_GRID - 1) as f64).collect();
    let children: Vec<usize> = (0..FIELD_CHILDREN.min(d))
        .map(|i| i * (d - 1) / (FIELD_CHILDREN.min(d) - 1).max(1))
        .collect();
    let mut input_holder_max: f64 = 0.0;
    let mut pushed_holder_max: f64 = 0.0;
    let mut good_stays_good = true;
    let sample_grid = |n: usize| -> Vec<f64> { (0..n).map(|i| i as f64 / (n - 1) as f64).collect() };
    let holder_grid = if theta == 1.0 { ys.clone() } else { sample_grid(RECOVERY_GRID) };
    for &offset in &[-0.5 * sector.half, 0.0, 0.5 * sector.half] {
        for &anchor in &[0.0, 0.37, 1.0] {
            for &sign in &[1.0, -1.0] {
                let field = move |x: f64| sector.center + offset + sign * c0 * (x - anchor).abs().powf(theta);
                let xs_vals: Vec<f64> = holder_grid.iter().map(|&x| field(x)).collect();
                input_holder_max = input_holder_max.max(holder_constant(&holder_grid, &xs_vals, theta));
                for &j in &children {
                    let y = model.push_field(j, &field, &holder_grid);
                    pushed_holder_max = pushed_holder_max.max(holder_constant(&holder_grid, &y, theta));
                    if good[j] && !y.iter().all(|a| sector.contains(*a)) {
                        good_stays_good = false;
                    }
                }
            }
        }
    }

    let rec_ys = sample_grid(RECOVERY_GRID);
    let mut recovered_mass_min = f64::INFINITY;
    let mut recovered_clearance_min = f64::INFINITY;
    for (p, piece) in pieces.iter().enumerate() {
        for &sign in &[1.0, -1.0] {
            let field = move |x: f64| piece.center + sign * c0 * x.powf(theta);
            let mut recovered = 0usize;
            for j in 0..d {
                let y = model.push_field(j, &field, &rec_ys);
                let clear = y
                    .iter()
                    .map(|a| sector.half - sector.offset(*a).abs())
                    .fold(f64::INFINITY, f64::min);
                if rescue[p][j] {
                    recovered_clearance_min = recovered_clearance_min.min(clear);
                }
                if clear >= alpha / 2.0 {
                    recovered += 1;
                }
            }
            recovered_mass_min = recovered_mass_min.min(recovered as f64 / df);
        }
    }

    let bound = appendix_bound(delta, lambda, inv_norm, k)?;
    Ok(HolderReport {
        d,
        theta,
        r,
        b,
        q,
        c_pa,
        c0,
        h8_margin,
        lambda,
        inv_norm,
        delta,
        k,
        rescue_masses,
        input_holder_max,
        pushed_holder_max,
        good_stays_good,
        recovered_mass_min,
        recovered_clearance_min,
        bound,
    })
}

/// `lower_bound` at `β = 1/k`; equal to [`appendix_bound`].
#[allow(dead_code)]
pub(crate) fn general_at_one_over_k(delta: f64, lambda: f64, inv_norm: f64, k: usize) -> Result<f64, AdaptedError> {
    lower_bound(&BoundInputs {
        beta: 1.0 / k as f64,
        delta,
        lambda,
        inv_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rotating_model() -> HolderModel {
        HolderModel::rotating(10_000, Arc::new(0.3, 0.6), 3.0, 0.6, 0.6)
    }

    #[test]
    fn appendix_bound_is_the_general_bound_at_one_over_k() {
        for k in 3..8 {
            for &(d, l, m) in &[(0.01, 2.0, 3.0), (0.1, 5.0, 1.5), (0.0, 1.3, 10.0)] {
                let a = appendix_bound(d, l, m, k).unwrap();
                let g = general_at_one_over_k(d, l, m, k).unwrap();
                assert!((a - g).abs() < 1e-12);
            }
        }
        // k = 3 is the β = 1/3 form
        let a = appendix_bound(0.1, 4.0, 2.0, 3).unwrap();
        assert!((a - (0.9 * 4f64.ln() - 0.4 * 2f64.ln()) / 1.3).abs() < 1e-12);
    }

    #[test]
    fn doubling_map_with_diagonal_matrix_contracts_holder_constants() {
        let m = HolderModel::constant(2, 1.0, Arc::new(0.0, 0.6), Matrix2::new(1.5, 0.0, 0.0, 1.0));
        let ys: Vec<f64> = (0..FIELD_GRID).map(|i| i as f64 / (FIELD_GRID - 1) as f64).collect();
        for &c in &[0.05, 0.3, 1.0] {
            let field = move |x: f64| 0.2 + c * (3.0 * x).sin() / 3.0;
            let vals: Vec<f64> = ys.iter().map(|&x| field(x)).collect();
            let cx = holder_constant(&ys, &vals, 1.0);
            for j in 0..2 {
                let cy = holder_constant(&ys, &m.push_field(j, &field, &ys), 1.0);
                assert!(cy <= cx, "{cy} > {cx}");
            }
        }
        // a constant diagonal matrix rescues nothing
        match holder_family_check(&m, 0.1, 2) {
            Err(AdaptedError::HypothesisViolated { hypothesis: "H7", .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_q_at_least_one_and_small_d() {
        let m = HolderModel::constant(2, 1.0, Arc::new(0.0, 0.6), Matrix2::new(3.0, 0.0, 0.0, 1.0));
        match holder_family_check(&m, 0.1, 2) {
            Err(AdaptedError::HypothesisViolated { hypothesis: "H8", margin }) => assert!((margin + 0.5).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        let m = HolderModel::constant(1, 1.0, Arc::new(0.0, 0.6), Matrix2::identity());
        assert!(matches!(
            holder_family_check(&m, 0.1, 2),
            Err(AdaptedError::HypothesisViolated { hypothesis: "H6", .. })
        ));
        // too few branches for the Hölder constant
        let m = HolderModel::rotating(500, Arc::new(0.3, 0.6), 3.0, 0.6, 0.6);
        assert!(matches!(
            holder_family_check(&m, 0.1, 2),
            Err(AdaptedError::HypothesisViolated { hypothesis: "H8", .. })
        ));
    }

    #[test]
    fn rotating_model_satisfies_both_lemmas() {
        let rep = holder_family_check(&rotating_model(), 0.1, 2).unwrap();
        assert!(rep.h8_margin > 0.0 && rep.q < 1.0);
        assert!(rep.k > 2);
        assert!(rep.rescue_masses.iter().all(|m| *m > 1.0 / rep.k as f64));
        assert!(rep.pushed_holder_max <= rep.c0 * (1.0 + 1e-9), "{rep:?}");
        assert!(rep.input_holder_max <= rep.c0 * (1.0 + 1e-9));
        assert!(rep.good_stays_good);
        assert!(rep.recovered_mass_min >= 1.0 / rep.k as f64);
        assert!(rep.recovered_clearance_min >= 0.05);
        assert!((rep.bound - rep.lambda.ln()).abs() < 1e-12, "no bad region");
    }

    #[test]
    fn appendix_bound_below_exponent_on_finite_models() {
        use crate::adapted::{brute_force_exponent, random_adapted_model, RandomSpec};
        let spec = RandomSpec {
            children: (3, 4),
            split_rescue: true,
            ..RandomSpec::default()
        };
        let mut rng = crate::sampling::stream_rng(21, 0);
        let mut done = 0;
        while done < 50 {
            let r = random_adapted_model(&mut rng, &spec).unwrap();
            let Ok(rs) = rescue_structure(&r.model, 2, 0.05) else {
                continue;
            };
            assert!(rs.k > 2 && rs.min_mass > 1.0 / rs.k as f64);
            // rescue with clearance is recovery, so β = 1/k is admissible
            assert!(r.check.recovery_min > 1.0 / rs.k as f64);
            let b = appendix_bound(r.model.delta, r.model.lambda, r.model.inv_norm(), rs.k).unwrap();
            assert!(brute_force_exponent(&r.model, 20, 1e-4).unwrap() >= b);
            done += 1;
        }
    }
}
