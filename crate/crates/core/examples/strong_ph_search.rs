//! Search small quartics for a strongly partially hyperbolic square.
//!
//! cargo run --release --example strong_ph_search

use anosov_flex::experiment::{default_t4, strong_ph_margin, strong_ph_search, theorem_b_nu_bound};
use anosov_flex::lattice::certify_spectrum;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t4 = certify_spectrum(&default_t4())?;
    println!("default t4 margin {:+.4}", strong_ph_margin(&t4).unwrap());
    let hit = strong_ph_search(5).ok_or("no strongly PH quartic in range")?;
    println!("x^4 + {:?}: margin {:.4}", hit.poly, hit.margin);
    println!("matrix {:?}", hit.matrix.rows());
    let spec = certify_spectrum(&hit.matrix)?;
    println!("eigenvalues {:.5?}", spec.values());
    println!("ν must stay below {:.4}", theorem_b_nu_bound(&spec));
    Ok(())
}
