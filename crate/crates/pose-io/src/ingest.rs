//! Validation of incoming tracker traffic and mapping onto the receiver clock.

use std::collections::HashMap;

use silhouette_core::Pose;

use crate::wire::{is_handshake, Handshake, PoseMessage};
use crate::WireError;

/// Largest accepted distance between a corrected message timestamp and the
/// receiver clock.
pub const MAX_CLOCK_SKEW_US: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum IngestOutcome {
    Handshake {
        sender: u32,
        offset_us: i64,
    },
    /// The pose with its timestamp on the receiver clock.
    Accepted(Pose),
    /// Sequence number not above the sender's last accepted one.
    OutOfSequence {
        sender: u32,
        seq: u64,
        last: u64,
    },
    /// Corrected timestamp too far from the receiver clock.
    ClockSkew {
        sender: u32,
        skew_us: i64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub accepted: u64,
    pub handshakes: u64,
    pub malformed: u64,
    pub out_of_sequence: u64,
    pub clock_skew: u64,
}

/// Per-sender bookkeeping for sequence numbers and clock offsets.
///
/// A sender that never handshakes gets its offset from its first message, as
/// if that message arrived instantly. A new handshake resets the sender's
/// sequence tracking, which lets a restarted tracker resume.
#[derive(Debug, Default)]
pub struct Ingestor {
    offsets: HashMap<u32, i64>,
    last_seq: HashMap<u32, u64>,
    stats: IngestStats,
}

impl Ingestor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Handles one UDP datagram: a handshake line or one binary frame.
    pub fn datagram(&mut self, bytes: &[u8], now_us: u64) -> Result<IngestOutcome, WireError> {
        let parsed = if is_handshake(bytes) {
            Handshake::parse(bytes).map(|hs| self.handshake(&hs, now_us))
        } else {
            PoseMessage::decode(bytes).map(|msg| self.message(&msg, now_us))
        };
        if parsed.is_err() {
            self.stats.malformed += 1;
        }
        parsed
    }

    pub fn handshake(&mut self, hs: &Handshake, now_us: u64) -> IngestOutcome {
        let offset_us = now_us as i64 - hs.sender_clock_us as i64;
        self.offsets.insert(hs.sender, offset_us);
        self.last_seq.remove(&hs.sender);
        self.stats.handshakes += 1;
        IngestOutcome::Handshake { sender: hs.sender, offset_us }
    }

    /// Handles an already-decoded message. The caller is responsible for
    /// [`PoseMessage::validate`] when the message did not come from
    /// [`PoseMessage::decode`].
    pub fn message(&mut self, msg: &PoseMessage, now_us: u64) -> IngestOutcome {
        if let Some(&last) = self.last_seq.get(&msg.sender) {
            if msg.seq <= last {
                self.stats.out_of_sequence += 1;
                return IngestOutcome::OutOfSequence { sender: msg.sender, seq: msg.seq, last };
            }
        }
        let offset = *self.offsets.entry(msg.sender).or_insert(now_us as i64 - msg.timestamp_us as i64);
        let local = msg.timestamp_us as i64 + offset;
        let skew = local - now_us as i64;
        if skew.unsigned_abs() > MAX_CLOCK_SKEW_US || local < 0 {
            self.stats.clock_skew += 1;
            return IngestOutcome::ClockSkew { sender: msg.sender, skew_us: skew };
        }
        self.last_seq.insert(msg.sender, msg.seq);
        self.stats.accepted += 1;
        let mut pose = msg.to_pose();
        pose.timestamp_us = local as u64;
        IngestOutcome::Accepted(pose)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use silhouette_core::EntityId;

    fn msg(sender: u32, seq: u64, ts: u64) -> PoseMessage {
        PoseMessage {
            sender,
            seq,
            entity: EntityId::Viewer,
            timestamp_us: ts,
            position: [0.1, 1.6, 1.0],
            orientation: [0.0, 0.0, 0.0, 1.0],
        }
    }

    #[test]
    fn handshake_offset_maps_timestamps() {
        let mut ing = Ingestor::new();
        ing.handshake(&Handshake::new(1, 500), 10_000);
        match ing.message(&msg(1, 0, 600), 10_150) {
            IngestOutcome::Accepted(p) => assert_eq!(p.timestamp_us, 10_100),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequence_must_increase_per_sender() {
        let mut ing = Ingestor::new();
        assert!(matches!(ing.message(&msg(1, 5, 0), 0), IngestOutcome::Accepted(_)));
        assert!(matches!(ing.message(&msg(1, 5, 10), 10), IngestOutcome::OutOfSequence { .. }));
        assert!(matches!(ing.message(&msg(2, 1, 10), 10), IngestOutcome::Accepted(_)));
        ing.handshake(&Handshake::new(1, 20), 20);
        assert!(matches!(ing.message(&msg(1, 0, 30), 30), IngestOutcome::Accepted(_)));
        assert_eq!(ing.stats().out_of_sequence, 1);
    }

    #[test]
    fn skewed_clock_is_rejected() {
        let mut ing = Ingestor::new();
        ing.handshake(&Handshake::new(1, 0), 0);
        assert!(matches!(ing.message(&msg(1, 0, 6_000_000), 0), IngestOutcome::ClockSkew { skew_us: 6_000_000, .. }));
    }

    #[test]
    fn malformed_datagrams_are_counted() {
        let mut ing = Ingestor::new();
        assert!(ing.datagram(&[1, 2, 3], 0).is_err());
        assert!(ing.datagram(b"{\"version\":1}", 0).is_err());
        assert_eq!(ing.stats().malformed, 2);
    }
}
