use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::arc::unit;
use super::model::AdaptedFamilyModel;
use super::AdaptedError;
use crate::geometry::projective_angle;

const PRUNE: f64 = 1e-12;
const LEVEL_BUDGET: usize = 2_000_000;
const MERGE: f64 = 1e-11;
const MIN_DEPTH: usize = 4;

/// Transition matrix of the base Markov shift on atoms.
fn transitions(m: &AdaptedFamilyModel) -> DMatrix<f64> {
    let k = m.atoms();
    let mut p = DMatrix::zeros(k, k);
    for (i, ch) in m.children.iter().enumerate() {
        for c in ch {
            p[(i, c.target)] += c.weight;
        }
    }
    p
}

/// Closed communicating classes, each sorted.
pub(crate) fn closed_classes(m: &AdaptedFamilyModel) -> Vec<Vec<usize>> {
    let k = m.atoms();
    let p = transitions(m);
    let mut reach = vec![vec![false; k]; k];
    for i in 0..k {
        reach[i][i] = true;
        for j in 0..k {
            if p[(i, j)] > 0.0 {
                reach[i][j] = true;
            }
        }
    }
    for via in 0..k {
        for i in 0..k {
            if reach[i][via] {
                for j in 0..k {
                    if reach[via][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut seen = vec![false; k];
    let mut out = Vec::new();
    for i in 0..k {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> = (0..k).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        let closed = class.iter().all(|&a| (0..k).all(|b| !reach[a][b] || class.contains(&b)));
        if closed {
            out.push(class);
        }
    }
    out
}

/// One stationary distribution per closed class, as full-length vectors.
pub fn stationary(m: &AdaptedFamilyModel) -> Vec<Vec<f64>> {
    let p = transitions(m);
    closed_classes(m)
        .into_iter()
        .map(|class| {
            let n = class.len();
            // πP = π on the class, last equation replaced by Σπ = 1
            let mut a = DMatrix::zeros(n, n);
            for (r, &j) in class.iter().enumerate() {
                for (c, &i) in class.iter().enumerate() {
                    a[(r, c)] = p[(i, j)] - if i == j { 1.0 } else { 0.0 };
                }
            }
            let mut rhs = DVector::zeros(n);
            for c in 0..n {
                a[(n - 1, c)] = 1.0;
            }
            rhs[n - 1] = 1.0;
            let pi = a.lu().solve(&rhs).expect("irreducible class has a unique stationary law");
            let mut full = vec![0.0; m.atoms()];
            for (r, &i) in class.iter().enumerate() {
                full[i] = pi[r].max(0.0);
            }
            full
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub class: Vec<usize>,
    pub exponent: f64,
    /// Depth at which the estimate settled.
    pub depth: usize,
    pub change: f64,
}

/// Level-by-level expansion of all branch products, started from the
/// stationary law with the cone centers. Each call to `step` returns the
/// expected growth `D_k = E log‖A^{(k)} v‖ − E log‖A^{(k−1)} v‖` of the next
/// level.
///
/// Branches that reach the same atom with directions closer than `MERGE` are
/// merged; the log-norm is Lipschitz in the direction, so this moves `D_k` by
/// `O(MERGE)` per level while keeping levels small once cones contract.
struct Levels<'a> {
    m: &'a AdaptedFamilyModel,
    level: Vec<(usize, f64, f64)>,
}

impl<'a> Levels<'a> {
    fn new(m: &'a AdaptedFamilyModel, pi: &[f64]) -> Self {
        let level = pi
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (i, m.cones[i].center, *p))
            .collect();
        Levels { m, level }
    }

    fn step(&mut self) -> Option<f64> {
        let mut next: HashMap<(usize, i64), (f64, f64)> = HashMap::new();
        let mut mass = 0.0;
        let mut sum = 0.0;
        for &(atom, angle, prob) in &self.level {
            let v = unit(angle);
            for c in &self.m.children[atom] {
                let p = prob * c.weight;
                let w = c.matrix * v;
                sum += p * w.norm().ln();
                mass += p;
                if p > PRUNE {
                    let a = projective_angle(&w);
                    let key = (c.target, (a / MERGE).round() as i64);
                    next.entry(key).or_insert((a, 0.0)).1 += p;
                }
            }
        }
        if next.len() > LEVEL_BUDGET {
            return None;
        }
        self.level = next.into_iter().map(|((t, _), (a, p))| (t, a, p)).collect();
        // fixed order keeps the floating-point sums reproducible
        self.level.sort_by(|x, y| (x.0, x.1).partial_cmp(&(y.0, y.1)).unwrap());
        // pruned branches drop out; renormalize by the surviving mass
        Some(sum / mass)
    }
}

/// Top exponent of each closed class by direct enumeration to depth at most
/// `max_depth`.
///
/// The estimate at depth `k` averages the last two increments, which also
/// settles for period-two dynamics; it is accepted once the estimates at
/// successive depths differ by less than `tol`.
pub fn brute_force_exponents(
    m: &AdaptedFamilyModel,
    max_depth: usize,
    tol: f64,
) -> Result<Vec<BruteForce>, AdaptedError> {
    m.validate()?;
    let mut out = Vec::new();
    for (class, pi) in closed_classes(m).into_iter().zip(stationary(m)) {
        let mut lv = Levels::new(m, &pi);
        let mut inc = Vec::with_capacity(max_depth);
        let mut prev_est = f64::NAN;
        let mut change = f64::NAN;
        let mut found = None;
        for depth in 1..=max_depth {
            let d = lv
                .step()
                .ok_or(AdaptedError::NotConverged { depth, change })?;
            inc.push(d);
            if depth < 2 {
                continue;
            }
            let est = 0.5 * (inc[depth - 1] + inc[depth - 2]);
            change = (est - prev_est).abs();
            prev_est = est;
            if depth >= MIN_DEPTH && change < tol {
                found = Some(BruteForce {
                    class: class.clone(),
                    exponent: est,
                    depth,
                    change,
                });
                break;
            }
        }
        out.push(found.ok_or(AdaptedError::NotConverged {
            depth: max_depth,
            change,
        })?);
    }
    Ok(out)
}

/// Smallest class exponent.
pub fn brute_force_exponent(m: &AdaptedFamilyModel, max_depth: usize, tol: f64) -> Result<f64, AdaptedError> {
    Ok(brute_force_exponents(m, max_depth, tol)?
        .into_iter()
        .map(|b| b.exponent)
        .fold(f64::INFINITY, f64::min))
}
