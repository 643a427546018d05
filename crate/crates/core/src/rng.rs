//! Reproducible random-number substreams.
//!
//! Every stochastic quantity in the engine draws from a stream identified by
//! `(seed, domain, driver, salt, index)`. The identifier is baked into the
//! ChaCha key and stream position, so a path is a pure function of its index
//! and results cannot depend on thread count or evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which part of the engine owns the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StreamDomain {
    /// One stream per simulated path.
    Path = 0,
    /// Nested validation: outer year-one states.
    NestedOuter = 1,
    /// Nested validation: inner continuations, salted by the outer index.
    NestedInner = 2,
}

/// The stochastic driver a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DriverStream {
    Trend = 0,
    Basis = 1,
    Calamity = 2,
    Lapse = 3,
}

pub(crate) fn substream(
    seed: u64,
    domain: StreamDomain,
    driver: DriverStream,
    salt: u64,
    index: u64,
) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = domain as u8;
    key[9] = driver as u8;
    key[10..18].copy_from_slice(&salt.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
