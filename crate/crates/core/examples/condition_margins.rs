//! Fit the geometric constants of the default T³ matrix and print the
//! condition margins along `t = λ_ws^{−nν}`.
//!
//! cargo run --release --example condition_margins

use anosov_flex::experiment::default_t3;
use anosov_flex::geometry::{condition_report, fit_constants_unchecked, FitGrid, ShearSetup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = ShearSetup::new(&default_t3().inverse())?;
    let k = fit_constants_unchecked(&s, &FitGrid::default())?;
    for c in k.all() {
        println!("{:>8} = {:<12.4e} R² {:.3}", c.name, c.value, c.r2);
    }
    let nu = 0.2;
    for n in [6, 8, 10, 12] {
        let t = s.lambda_ws().powf(-n as f64 * nu);
        let rep = condition_report(&s, n, t, 0.25, &k);
        let cells: Vec<String> = rep
            .margins
            .iter()
            .filter_map(|(c, m)| m.map(|m| format!("{c} {:+.2}{}", m.margin, if m.margin > m.required { "" } else { "?" })))
            .collect();
        println!("n = {n:2}, t = {t:.3}: {}", cells.join("  "));
    }
    println!("(? marks a margin within the fit uncertainty)");
    Ok(())
}
