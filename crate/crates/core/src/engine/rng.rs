use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Train = 1,
    Report = 2,
    Split = 3,
    Partition = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `(master, client, round, stream)`.
pub fn derive_seed(master: u64, client: usize, round: usize, stream: Stream) -> u64 {
    [client as u64, round as u64, stream as u64]
        .iter()
        .fold(splitmix64(master), |acc, &v| splitmix64(acc ^ splitmix64(v)))
}

pub fn stream_rng(master: u64, client: usize, round: usize, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, client, round, stream))
}
