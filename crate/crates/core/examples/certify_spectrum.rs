//! Certified eigenvalues of the default matrices and the chart of the shear
//! plane.
//!
//! cargo run --release --example certify_spectrum

use anosov_flex::experiment::{default_t3, default_t4, strong_ph_margin};
use anosov_flex::lattice::{certify_spectrum, invariant_frames, normalize_basis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, m) in [("t3", default_t3()), ("t4", default_t4())] {
        let spec = certify_spectrum(&m)?;
        println!("{name}: char poly (low to high) {:?}", spec.char_poly);
        for (i, lo, hi, abs) in spec.csv_rows() {
            println!("  λ_{i} ∈ [{lo:.15}, {hi:.15}]  |λ| = {abs:.6}");
        }
        if let Some(margin) = strong_ph_margin(&spec) {
            println!("  log(λ_ws·λ_ms/λ_ss) = {margin:.4}");
        }
    }
    // the chart is built for the one-expanding orientation
    let m = default_t3().inverse();
    let nb = normalize_basis(&m, &invariant_frames(&m, &certify_spectrum(&m)?)?)?;
    println!("t3⁻¹ chart: ā = {:?}, b̄ = {:?}, θ₀ = {:.4}", nb.a_bar, nb.b_bar, nb.theta0);
    Ok(())
}
