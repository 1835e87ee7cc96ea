//! Benettin-style Lyapunov spectra: k tangent vectors, modified Gram–Schmidt,
//! log-norms accumulated directly.

use std::io::Write;

use nalgebra::Vector4;
use rand::Rng;

use super::plane::batch_se;
use super::{CocycleError, ComposedSystem};
use crate::sampling::{par_indexed, random_point, stream_rng};
use crate::torus::TorusPoint;

#[derive(Clone, Debug)]
pub struct LyapunovOptions {
    pub burn_in: usize,
    /// Batches for the per-orbit standard error.
    pub batches: usize,
    /// Seed for the initial tangent frame.
    pub seed: u64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions {
            burn_in: 1000,
            batches: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovEstimate {
    /// Descending.
    pub exponents: Vec<f64>,
    pub n_iters: usize,
    pub n_orbits: usize,
    pub std_errors: Vec<f64>,
    /// One row per orbit.
    pub per_orbit: Vec<Vec<f64>>,
    pub per_orbit_std_errors: Vec<Vec<f64>>,
}

impl LyapunovEstimate {
    pub fn top(&self) -> f64 {
        self.exponents[0]
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }

    /// Standard error of the sum, treating exponents as independent.
    pub fn combined_std_error(&self) -> f64 {
        self.std_errors.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Pool single-orbit estimates: means over orbits, standard errors from the
    /// spread across orbits (or the per-orbit error when there is one orbit).
    pub fn pool(orbits: Vec<LyapunovEstimate>) -> LyapunovEstimate {
        assert!(!orbits.is_empty());
        let k = orbits[0].exponents.len();
        let m = orbits.len();
        let per_orbit: Vec<Vec<f64>> = orbits.iter().flat_map(|o| o.per_orbit.clone()).collect();
        let per_orbit_std_errors: Vec<Vec<f64>> = orbits
            .iter()
            .flat_map(|o| o.per_orbit_std_errors.clone())
            .collect();
        let mut exponents = vec![0.0; k];
        let mut std_errors = vec![0.0; k];
        for i in 0..k {
            let vals: Vec<f64> = per_orbit.iter().map(|r| r[i]).collect();
            let mean = vals.iter().sum::<f64>() / m as f64;
            exponents[i] = mean;
            std_errors[i] = if m > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
                (var / m as f64).sqrt()
            } else {
                per_orbit_std_errors[0][i]
            };
        }
        LyapunovEstimate {
            exponents,
            n_iters: orbits[0].n_iters,
            n_orbits: m,
            std_errors,
            per_orbit,
            per_orbit_std_errors,
        }
    }
}

fn mgs(vs: &mut [Vector4<f64>], logs: &mut [f64], step: usize) -> Result<(), CocycleError> {
    for i in 0..vs.len() {
        for j in 0..i {
            let r = vs[j].dot(&vs[i]);
            let qj = vs[j];
            vs[i] -= qj * r;
        }
        let n = vs[i].norm();
        if !(1e-300..=1e300).contains(&n) {
            return Err(CocycleError::NumericalBlowup { step, norm: n });
        }
        logs[i] += n.ln();
        vs[i] /= n;
    }
    Ok(())
}

/// Spectrum with default options (burn-in 1000, 50 batches, seed 0).
pub fn lyapunov_spectrum(
    sys: &ComposedSystem,
    p0: &TorusPoint,
    n_iters: usize,
    k: usize,
    reorth_period: usize,
) -> Result<LyapunovEstimate, CocycleError> {
    lyapunov_spectrum_with(sys, p0, n_iters, k, reorth_period, &LyapunovOptions::default())
}

pub fn lyapunov_spectrum_with(
    sys: &ComposedSystem,
    p0: &TorusPoint,
    n_iters: usize,
    k: usize,
    reorth_period: usize,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate, CocycleError> {
    let d = sys.dim();
    if !(1..=d).contains(&k) {
        return Err(CocycleError::InvalidArgument(format!("k = {k} must lie in 1..={d}")));
    }
    if !(1..=64).contains(&reorth_period) {
        return Err(CocycleError::InvalidArgument(format!(
            "reorth_period = {reorth_period} must lie in 1..=64"
        )));
    }
    if n_iters == 0 {
        return Err(CocycleError::InvalidArgument("N must be at least 1".into()));
    }
    let mut rng = stream_rng(opts.seed, u64::MAX);
    let mut vs: Vec<Vector4<f64>> = (0..k)
        .map(|_| {
            let mut v = Vector4::zeros();
            for i in 0..d {
                v[i] = rng.gen::<f64>() * 2.0 - 1.0;
            }
            v
        })
        .collect();
    let mut scratch = vec![0.0; k];
    mgs(&mut vs, &mut scratch, 0)?;

    let mut p = *p0;
    for s in 0..opts.burn_in {
        p = sys.step_frame(&p, &mut vs);
        if (s + 1) % reorth_period == 0 {
            mgs(&mut vs, &mut scratch, s)?;
        }
    }
    if opts.burn_in % reorth_period != 0 {
        mgs(&mut vs, &mut scratch, opts.burn_in)?;
    }

    let batches = opts.batches.clamp(2, (n_iters / reorth_period).max(2));
    // batch length rounded to whole reorthonormalization blocks
    let per = ((n_iters / batches) / reorth_period).max(1) * reorth_period;
    let mut sums = vec![vec![0.0; k]; batches];
    let mut logs = vec![0.0; k];
    let mut since = 0;
    for s in 0..n_iters {
        p = sys.step_frame(&p, &mut vs);
        since += 1;
        if since == reorth_period || s + 1 == n_iters {
            logs.iter_mut().for_each(|l| *l = 0.0);
            mgs(&mut vs, &mut logs, opts.burn_in + s)?;
            let b = (s / per).min(batches - 1);
            for i in 0..k {
                sums[b][i] += logs[i];
            }
            since = 0;
        }
    }
    let last_len = n_iters.saturating_sub(per * (batches - 1));
    let usable = last_len > 0;
    let mut exps: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let total: f64 = sums.iter().map(|b| b[i]).sum();
            let col: Vec<f64> = sums.iter().map(|b| b[i]).collect();
            let se = if usable { batch_se(&col, per, n_iters) } else { f64::NAN };
            (total / n_iters as f64, se)
        })
        .collect();
    exps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let exponents: Vec<f64> = exps.iter().map(|e| e.0).collect();
    let std_errors: Vec<f64> = exps.iter().map(|e| e.1).collect();
    Ok(LyapunovEstimate {
        per_orbit: vec![exponents.clone()],
        per_orbit_std_errors: vec![std_errors.clone()],
        exponents,
        n_iters,
        n_orbits: 1,
        std_errors,
    })
}

/// `n_orbits` independent orbits from uniformly random starting points,
/// computed in parallel and pooled in orbit order.
pub fn lyapunov_orbits(
    sys: &ComposedSystem,
    n_orbits: usize,
    seed: u64,
    n_iters: usize,
    k: usize,
    reorth_period: usize,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate, CocycleError> {
    let runs = par_indexed(n_orbits, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let p0 = random_point(&mut rng, sys.dim());
        let o = LyapunovOptions {
            seed: rng.gen(),
            ..opts.clone()
        };
        lyapunov_spectrum_with(sys, &p0, n_iters, k, reorth_period, &o)
    });
    let runs: Result<Vec<_>, _> = runs.into_iter().collect();
    Ok(LyapunovEstimate::pool(runs?))
}

/// Per-orbit CSV: orbit_id, seed, N, exponent_1..k, stderr_1..k.
pub fn write_orbit_csv<W: Write>(
    w: W,
    est: &LyapunovEstimate,
    seed: u64,
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    let k = est.exponents.len();
    let mut header = vec!["orbit_id".to_string(), "seed".into(), "N".into()];
    header.extend((1..=k).map(|i| format!("exponent_{i}")));
    header.extend((1..=k).map(|i| format!("stderr_{i}")));
    out.write_record(&header)?;
    for (i, (row, se)) in est.per_orbit.iter().zip(&est.per_orbit_std_errors).enumerate() {
        let mut rec = vec![i.to_string(), seed.to_string(), est.n_iters.to_string()];
        rec.extend(row.iter().map(|v| format!("{v:.12e}")));
        rec.extend(se.iter().map(|v| format!("{v:.6e}")));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
