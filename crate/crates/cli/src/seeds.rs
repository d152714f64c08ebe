//! Deterministic stream derivation: every random draw in a run comes from a
//! ChaCha stream derived from the master seed, a purpose tag and a trial
//! index, so identical configurations produce byte-identical outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for independent streams.
#[derive(Debug, Clone, Copy)]
pub enum Purpose {
    Data = 1,
    Stage1Keys = 2,
    Stage2Keys = 3,
    Trajectory = 4,
    Audit = 5,
    Disturbance = 6,
}

const MIX: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stream for (master seed, purpose, trial index).
pub fn rng_for(seed: u64, purpose: Purpose, trial: u64) -> ChaCha8Rng {
    let tag = (purpose as u64).wrapping_mul(MIX);
    let t = trial.wrapping_mul(0xd134_2543_de82_ef95);
    ChaCha8Rng::seed_from_u64(seed ^ tag ^ t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = rng_for(1, Purpose::Data, 0);
        let mut b = rng_for(1, Purpose::Data, 0);
        assert_eq!(a.random::<u64>(), b.random::<u64>());

        let mut c = rng_for(1, Purpose::Stage1Keys, 0);
        let mut d = rng_for(1, Purpose::Data, 1);
        let x = rng_for(1, Purpose::Data, 0).random::<u64>();
        assert_ne!(x, c.random::<u64>());
        assert_ne!(x, d.random::<u64>());
    }
}
