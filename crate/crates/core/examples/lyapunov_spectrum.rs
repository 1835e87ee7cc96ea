//! Lyapunov spectrum of `L^n ∘ f_t` for the inverse of the default T³ matrix,
//! against the linear spectrum `n·log|λ_i|`.
//!
//! cargo run --release --example lyapunov_spectrum

use anosov_flex::cocycle::{lyapunov_orbits, LyapunovOptions};
use anosov_flex::experiment::default_t3;
use anosov_flex::geometry::ShearSetup;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = ShearSetup::new(&default_t3().inverse())?;
    let n = 12;
    let linear: Vec<f64> = s.eigenvalues.iter().map(|l| n as f64 * l.abs().ln()).collect();
    println!("linear      {linear:.5?}");
    for nu in [0.0, 0.1, 0.2] {
        let t = if nu == 0.0 { 0.0 } else { s.lambda_ws().powf(-n as f64 * nu) };
        let est = lyapunov_orbits(&s.system(n, t), 20, 7, 50_000, 3, 1, &LyapunovOptions::default())?;
        println!(
            "t = {t:6.3}  {:.5?} ± {:.1e}; weak stable exponent raised by {:.4}",
            est.exponents,
            est.std_errors[2],
            est.exponents[1] - linear[1]
        );
    }
    Ok(())
}
