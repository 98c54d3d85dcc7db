use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Names one independent random substream: which cycle, which event, and
/// which phase inside the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLabel<'a> {
    pub cycle: u32,
    pub event: &'a str,
    pub phase: &'a str,
}

impl<'a> StreamLabel<'a> {
    pub fn new(cycle: u32, event: &'a str, phase: &'a str) -> Self {
        StreamLabel {
            cycle,
            event,
            phase,
        }
    }

    /// 64-bit FNV-1a over `cycle/event/phase`. Stable across platforms and
    /// releases, unlike `std`'s default hasher.
    pub fn stream_id(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let text = format!("{}/{}/{}", self.cycle, self.event, self.phase);
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
        h
    }
}

/// Seeded, portable random stream (ChaCha8). Substreams share the key derived
/// from the run seed and differ in the ChaCha stream number, so any
/// `(seed, label, draw index)` triple always yields the same value.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh stream for `label`, independent of how much of `self` was used.
    pub fn substream(&self, label: StreamLabel<'_>) -> RngStream {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(label.stream_id());
        RngStream {
            seed: self.seed,
            inner,
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
