//! Seeded randomness and ordered parallel maps.
//!
//! Every random stream is a ChaCha8 generator keyed by the run seed, with the
//! orbit (or batch) index as the stream id, so results do not depend on which
//! thread handled which index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::torus::TorusPoint;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_point<R: Rng>(rng: &mut R, dim: usize) -> TorusPoint {
    let mut c = [0.0; 4];
    for v in c.iter_mut().take(dim) {
        *v = rng.gen::<f64>();
    }
    TorusPoint::new(&c[..dim])
}

/// `f(0..n)` evaluated in parallel, returned in index order.
pub fn par_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}
