//! Seeded, counter-addressed random substreams.
//!
//! Every consumer of randomness names a [`Domain`] and an index; the pair
//! selects an independent ChaCha stream under the run seed. Two stages never
//! share a stream, and no stream depends on how work was scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Diffusion = 0,
    Stratify = 0x5354_5241_5449_4659,
    Split = 0x5350_4c49_5400_0000,
    Shuffle = 0x5348_5546_464c_4500,
    Synthetic = 0x5359_4e54_4845_5449,
    GradCheck = 0x4752_4144_4348_4b00,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain as u64);
    rng.set_stream(index);
    rng
}
