use chrono::{DateTime, TimeDelta, Utc};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Source of wall-clock time and random bytes for tokens, salts and seeds.
pub trait Entropy: Send {
    fn now(&mut self) -> DateTime<Utc>;
    fn fill_bytes(&mut self, buf: &mut [u8]);

    fn next_u64(&mut self) -> u64 {
        let mut buf = [0u8; 8];
        self.fill_bytes(&mut buf);
        u64::from_le_bytes(buf)
    }
}

/// The real clock and the operating system's generator.
#[derive(Debug, Default)]
pub struct SystemEntropy;

impl Entropy for SystemEntropy {
    fn now(&mut self) -> DateTime<Utc> {
        Utc::now()
    }

    fn fill_bytes(&mut self, buf: &mut [u8]) {
        rand::rng().fill_bytes(buf);
    }
}

/// Reproducible entropy: a seeded generator and a clock that starts at a
/// fixed instant and ticks one second per reading.
#[derive(Debug)]
pub struct SeededEntropy {
    rng: ChaCha20Rng,
    clock: DateTime<Utc>,
}

impl SeededEntropy {
    pub fn new(seed: u64, start: DateTime<Utc>) -> Self {
        SeededEntropy {
            rng: ChaCha20Rng::seed_from_u64(seed),
            clock: start,
        }
    }
}

impl Entropy for SeededEntropy {
    fn now(&mut self) -> DateTime<Utc> {
        let t = self.clock;
        self.clock += TimeDelta::seconds(1);
        t
    }

    fn fill_bytes(&mut self, buf: &mut [u8]) {
        self.rng.fill_bytes(buf);
    }
}
