//! Counter-based derivation of per-chain random streams.
//!
//! The ChaCha key is built from `(master_seed, repeat)` and each chain
//! uses two ChaCha stream ids (`2c` for noise, `2c + 1` for index
//! sampling). Adding chains or repeats never perturbs existing streams,
//! and samplers that draw no indices consume exactly the same noise as
//! those that do.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ChainRngs {
    /// Gaussian injections.
    pub noise: ChaCha8Rng,
    /// Component indices and minibatches.
    pub index: ChaCha8Rng,
}

pub fn chain_rngs(master_seed: u64, repeat: u64, chain: u64) -> ChainRngs {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&repeat.to_le_bytes());
    key[16..24].copy_from_slice(b"svrhmc\0\0");
    let mut noise = ChaCha8Rng::from_seed(key);
    let mut index = noise.clone();
    noise.set_stream(chain.wrapping_mul(2));
    index.set_stream(chain.wrapping_mul(2).wrapping_add(1));
    ChainRngs { noise, index }
}
