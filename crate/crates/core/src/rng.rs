//! Keyed random streams.
//!
//! A stream is a pure function of `(master seed, purpose, draw, rep)`, so a
//! replicate sees the same numbers whatever order or thread it runs on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps design and error draws disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Design = 1,
    Errors = 2,
    Residuals = 3,
    Fixture = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for replicate `rep` of design draw `draw`.
pub fn stream(master: u64, purpose: Purpose, draw: u64, rep: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(master) ^ purpose as u64) ^ draw);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(rep);
    rng
}
