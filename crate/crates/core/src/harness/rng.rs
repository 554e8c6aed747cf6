//! Deterministic random streams, one per sampling site.
//!
//! Stream seeds are derived by folding (master seed, batch, run, window,
//! purpose) through the SplitMix64 finalizer; the stream itself is ChaCha12,
//! whose block counter makes it cheap to instantiate per site. A new
//! sampling purpose gets a new discriminant, so adding one never perturbs
//! the draws of existing sites.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One independent sampling site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Entity counts: coalitions, clients, services.
    ScenarioShape = 1,
    /// Per-coalition offerings: services, runs, quantities.
    CoalitionMarket = 2,
    /// Member costs and proposal margins.
    MemberEconomics = 3,
    /// Client packages and price caps.
    ClientDemand = 4,
    /// Message-drop streams of the consensus networks.
    ConsensusNet = 5,
}

/// SplitMix64 finalizer (Steele, Lea, Flood's constants).
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fold(state: u64, value: u64) -> u64 {
    splitmix(state ^ value.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Seed for the (batch, run, window, purpose) cell of the master stream.
pub fn derive_seed(master: u64, batch: u32, run: u32, window: u32, purpose: Purpose) -> u64 {
    let mut state = splitmix(master);
    state = fold(state, batch as u64 + 1);
    state = fold(state, run as u64 + 1);
    state = fold(state, window as u64 + 1);
    fold(state, purpose as u64)
}

pub fn stream(master: u64, batch: u32, run: u32, window: u32, purpose: Purpose) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, batch, run, window, purpose))
}

/// Sub-stream of a per-window purpose, e.g. one consensus network per
/// (coalition, service).
pub fn substream(
    master: u64,
    batch: u32,
    run: u32,
    window: u32,
    purpose: Purpose,
    index: u64,
) -> u64 {
    fold(derive_seed(master, batch, run, window, purpose), index + 1)
}
