use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BackendError, BackendMessage, BackendRequest, DecisionBackend};

const GARBAGE: [&str; 5] = [
    "I would switch to the phase with the longest queue.",
    "{\"action\": \"P9\", \"justification\": \"longest queue\"}",
    "{\"phase\": \"P1\"}",
    "{\"action\": \"go\", \"justification\": \"\"}",
    "action: P2",
];

/// Seeded backend that never produces a usable answer. Exercises the
/// retry and fallback path.
#[derive(Debug, Clone)]
pub struct NoiseBackend {
    rng: ChaCha8Rng,
}

impl NoiseBackend {
    pub fn new(seed: u64) -> NoiseBackend {
        NoiseBackend {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl DecisionBackend for NoiseBackend {
    fn kind(&self) -> String {
        "noise".into()
    }

    fn respond(&mut self, _request: &BackendRequest<'_>) -> Result<BackendMessage, BackendError> {
        let text = GARBAGE.choose(&mut self.rng).expect("not empty");
        let suffix: u32 = self.rng.random_range(0..1000);
        Ok(BackendMessage::text(format!("{text} #{suffix}")))
    }
}
