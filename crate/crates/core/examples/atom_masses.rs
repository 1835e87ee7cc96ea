//! Grow unstable segments of `L^n ∘ f_t` and split them into the bad strip
//! and the two good strips.
//!
//! cargo run --release --example atom_masses

use anosov_flex::experiment::default_t3;
use anosov_flex::geometry::ShearSetup;
use anosov_flex::partition::{atom_length_bounds, atom_split, grow_unstable_segment, LeafField};
use anosov_flex::sampling::{random_point, stream_rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = ShearSetup::new(&default_t3().inverse())?;
    let (d_l, big_d_l) = atom_length_bounds(&s);
    let len = 0.5 * (d_l + big_d_l);
    let n = 8;
    let mut rng = stream_rng(3, 0);
    for t in [1.5, 15.0, 150.0] {
        let field = LeafField::new(&s, n, t);
        let seg = grow_unstable_segment(&field, &random_point(&mut rng, 3), len)?;
        let a = atom_split(&field, &seg, 0.25, len)?;
        println!(
            "t = {t:6.1}: B {:.3}  G+ {:.3}  G- {:.3}  density ratio {:.4}  ({} pre-atoms)",
            a.mass_bad, a.mass_good_plus, a.mass_good_minus, a.density_ratio_max, a.pre_atoms
        );
    }
    Ok(())
}
