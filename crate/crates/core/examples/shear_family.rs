//! The conservative shear `f_t` in the chart of the stable plane: it moves
//! points along b̄ by `t·sin 2πx`, preserves volume, and its derivative agrees
//! with finite differences.
//!
//! cargo run --release --example shear_family

use anosov_flex::experiment::default_t3;
use anosov_flex::geometry::ShearSetup;
use anosov_flex::sampling::{random_point, stream_rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = ShearSetup::new(&default_t3().inverse())?;
    let f = s.shear(2.5);
    println!("direction (chart) {:?}", f.direction());
    let mut rng = stream_rng(1, 0);
    for _ in 0..4 {
        let p = random_point(&mut rng, 3);
        let q = f.apply(&p);
        let back = f.inverse().apply(&q);
        println!(
            "x = {:.4}: c(x) = {:+.4}, det Df = {:.15}, fd error {:.2e}, round trip {:.1e}",
            p.x(),
            f.coefficient_at_x(p.x()),
            f.derivative(&p).fixed_view::<3, 3>(0, 0).determinant(),
            f.finite_difference_check(&p, 1e-6),
            p.dist(&back)
        );
    }
    Ok(())
}
