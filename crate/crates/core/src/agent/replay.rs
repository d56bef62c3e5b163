use std::collections::{BTreeMap, VecDeque};

use super::{BackendError, BackendMessage, BackendRequest, DecisionBackend, TranscriptRecord};

/// Replays the assistant turns of a recorded transcript, per junction and
/// cycle. Running out of recorded turns is a backend error, so the agent
/// falls back.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    turns: BTreeMap<(String, u64), VecDeque<BackendMessage>>,
}

impl ReplayBackend {
    pub fn new(records: &[TranscriptRecord]) -> ReplayBackend {
        let mut turns: BTreeMap<(String, u64), VecDeque<BackendMessage>> = BTreeMap::new();
        for r in records.iter().filter(|r| r.role == "assistant") {
            let message = match &r.tool {
                Some(tool) => BackendMessage::call(tool, r.args.clone().unwrap_or_default()),
                None => BackendMessage::text(r.content.clone().unwrap_or_default()),
            };
            turns.entry((r.junction.clone(), r.cycle)).or_default().push_back(message);
        }
        ReplayBackend { turns }
    }

    /// Recorded turns not yet replayed.
    pub fn remaining(&self) -> usize {
        self.turns.values().map(VecDeque::len).sum()
    }
}

impl DecisionBackend for ReplayBackend {
    fn kind(&self) -> String {
        "replay".into()
    }

    fn respond(&mut self, request: &BackendRequest<'_>) -> Result<BackendMessage, BackendError> {
        self.turns
            .get_mut(&(request.junction.to_string(), request.cycle))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| BackendError::Exhausted {
                junction: request.junction.to_string(),
                cycle: request.cycle,
            })
    }
}
