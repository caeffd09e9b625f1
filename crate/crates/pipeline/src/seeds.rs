//! Stateless per-step seed derivation. Deriving every random decision from
//! (base seed, counters) keeps training exactly resumable: a checkpoint
//! only needs the base seed and the step counter.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Domains keep the seed streams of unrelated consumers disjoint.
#[derive(Debug, Clone, Copy)]
pub enum SeedDomain {
    Patch,
    TextCp,
    Shuffle,
    ModelInit,
}

pub fn derive_seed(base: u64, domain: SeedDomain, a: u64, b: u64) -> u64 {
    let d = match domain {
        SeedDomain::Patch => 0x01,
        SeedDomain::TextCp => 0x02,
        SeedDomain::Shuffle => 0x03,
        SeedDomain::ModelInit => 0x04,
    };
    mix(mix(base ^ mix(d)).wrapping_add(mix(a)).wrapping_add(mix(b).rotate_left(17)))
}

/// Deterministic epoch-wise permutation of sample indices.
pub fn epoch_order(n: usize, base: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    // Fisher-Yates with derived pseudo-randomness.
    for i in (1..n).rev() {
        let r = derive_seed(base, SeedDomain::Shuffle, epoch as u64, i as u64);
        let j = (r % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    order
}
