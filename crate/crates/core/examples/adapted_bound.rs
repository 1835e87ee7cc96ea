//! The lower bound for adapted families against brute-force exponents of
//! random finite models, and the good-mass recursion.
//!
//! cargo run --release --example adapted_bound

use anosov_flex::adapted::{
    brute_force_exponent, lower_bound, random_adapted_model, recursion_closed_form, recursion_trace, RandomSpec,
};
use anosov_flex::sampling::stream_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = stream_rng(5, 0);
    for id in 0..8 {
        let r = random_adapted_model(&mut rng, &RandomSpec::default())?;
        let inputs = r.model.bound_inputs();
        let bound = lower_bound(&inputs)?;
        let chi = brute_force_exponent(&r.model, 20, 1e-4)?;
        println!(
            "model {id}: {} atoms, β {:.3} δ {:.3} λ {:.2}: bound {bound:+.4} ≤ exponent {chi:+.4}",
            r.model.atoms(),
            inputs.beta,
            inputs.delta,
            inputs.lambda
        );
    }
    let (beta, delta) = (0.2, 0.1);
    let trace = recursion_trace(beta, delta, 50);
    println!(
        "g_50 = {:.12} (closed form {:.12}, fixed point {:.12})",
        trace.g[50],
        recursion_closed_form(beta, delta, 50),
        beta / (beta + delta)
    );
    Ok(())
}
