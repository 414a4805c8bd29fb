//! Binary pose frames and the JSON handshake line.
//!
//! A frame is a little-endian `u32` payload length followed by the payload:
//!
//! | offset | size | field          |
//! |-------:|-----:|----------------|
//! | 0      | 4    | sender (u32)   |
//! | 4      | 8    | seq (u64)      |
//! | 12     | 1    | entity (u8)    |
//! | 13     | 8    | timestamp_us   |
//! | 21     | 12   | position f32×3 |
//! | 33     | 16   | orientation f32×4, x y z w |
//!
//! Before streaming, a sender may emit one UTF-8 JSON line (a [`Handshake`])
//! declaring the protocol version, units and its clock.

use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};
use silhouette_core::{EntityId, Pose};

use crate::WireError;

pub const PROTOCOL_VERSION: u32 = 1;
pub const PAYLOAD_LEN: usize = 49;
pub const FRAME_LEN: usize = 4 + PAYLOAD_LEN;

/// Largest quaternion norm deviation accepted on the wire. Looser than the
/// geometry tolerance because components travel as `f32`.
pub const WIRE_NORM_TOLERANCE: f32 = 1e-5;

/// One tracker sample as sent on the wire.
///
/// The JSON form (used by trace files and the HTTP bridge) keeps the `f32`
/// components, so it round-trips bit-exactly with the binary form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMessage {
    pub sender: u32,
    pub seq: u64,
    pub entity: EntityId,
    pub timestamp_us: u64,
    pub position: [f32; 3],
    /// `[x, y, z, w]`.
    pub orientation: [f32; 4],
}

const FIELDS: [(&str, usize); 6] =
    [("sender", 4), ("seq", 8), ("entity", 1), ("timestamp_us", 8), ("position", 12), ("orientation", 16)];

impl PoseMessage {
    pub fn from_pose(pose: &Pose, sender: u32, seq: u64) -> Self {
        let q = pose.orientation.coords;
        Self {
            sender,
            seq,
            entity: pose.entity,
            timestamp_us: pose.timestamp_us,
            position: [pose.position.x as f32, pose.position.y as f32, pose.position.z as f32],
            orientation: [q.x as f32, q.y as f32, q.z as f32, q.w as f32],
        }
    }

    /// Widens to `f64`, renormalizing the quaternion to absorb `f32` rounding.
    pub fn to_pose(&self) -> Pose {
        let [x, y, z, w] = self.orientation.map(f64::from);
        let q = Quaternion::new(w, x, y, z);
        Pose {
            entity: self.entity,
            position: Vector3::from(self.position.map(f64::from)),
            orientation: q / q.norm(),
            timestamp_us: self.timestamp_us,
        }
    }

    /// Checks the numeric content: finite values and a unit quaternion.
    pub fn validate(&self) -> Result<(), WireError> {
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(WireError::NonFinite { field: "position" });
        }
        if !self.orientation.iter().all(|v| v.is_finite()) {
            return Err(WireError::NonFinite { field: "orientation" });
        }
        let norm = self.orientation.iter().map(|v| v * v).sum::<f32>().sqrt();
        if (norm - 1.0).abs() > WIRE_NORM_TOLERANCE {
            return Err(WireError::NotUnitQuaternion { norm });
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_LEN);
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(PAYLOAD_LEN as u32).to_le_bytes());
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(self.entity.code());
        out.extend_from_slice(&self.timestamp_us.to_le_bytes());
        for v in self.position.iter().chain(&self.orientation) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (msg, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(WireError::TrailingBytes { extra: bytes.len() - used });
        }
        Ok(msg)
    }

    /// Decodes the first frame of `bytes`, returning it and the bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), WireError> {
        let declared = u32::from_le_bytes(take(bytes, "length", 0, 4)?.try_into().unwrap());
        if declared as usize != PAYLOAD_LEN {
            return Err(WireError::BadLength { declared, expected: PAYLOAD_LEN as u32 });
        }
        let mut at = 4;
        let mut slices = [&[][..]; 6];
        for (slot, (name, size)) in slices.iter_mut().zip(FIELDS) {
            *slot = take(bytes, name, at, size)?;
            at += size;
        }
        let [sender, seq, entity, ts, pos, rot] = slices;
        let entity = EntityId::from_code(entity[0]).ok_or(WireError::UnknownEntity(entity[0]))?;
        let msg = Self {
            sender: u32::from_le_bytes(sender.try_into().unwrap()),
            seq: u64::from_le_bytes(seq.try_into().unwrap()),
            entity,
            timestamp_us: u64::from_le_bytes(ts.try_into().unwrap()),
            position: f32s(pos),
            orientation: f32s(rot),
        };
        msg.validate()?;
        Ok((msg, at))
    }
}

fn take<'a>(bytes: &'a [u8], field: &'static str, start: usize, len: usize) -> Result<&'a [u8], WireError> {
    bytes.get(start..start + len).ok_or(WireError::Truncated { field, start, end: start + len, available: bytes.len() })
}

fn f32s<const N: usize>(bytes: &[u8]) -> [f32; N] {
    std::array::from_fn(|i| f32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()))
}

/// First line a sender emits on a new stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub version: u32,
    pub sender: u32,
    /// Must be `"m"`.
    pub position_units: String,
    /// Must be `"us"`.
    pub time_units: String,
    /// The sender's clock when the line was written, in microseconds.
    pub sender_clock_us: u64,
}

impl Handshake {
    pub fn new(sender: u32, sender_clock_us: u64) -> Self {
        Self { version: PROTOCOL_VERSION, sender, position_units: "m".into(), time_units: "us".into(), sender_clock_us }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("handshake serializes");
        line.push('\n');
        line
    }

    pub fn parse(line: &[u8]) -> Result<Self, WireError> {
        let text = std::str::from_utf8(line).map_err(|_| WireError::Handshake("not UTF-8".into()))?;
        let hs: Self = serde_json::from_str(text.trim_end()).map_err(|e| WireError::Handshake(e.to_string()))?;
        if hs.version != PROTOCOL_VERSION {
            return Err(WireError::Handshake(format!(
                "protocol version {} unsupported (expected {PROTOCOL_VERSION})",
                hs.version
            )));
        }
        if hs.position_units != "m" || hs.time_units != "us" {
            return Err(WireError::Handshake(format!(
                "units {}/{} unsupported (expected m/us)",
                hs.position_units, hs.time_units
            )));
        }
        Ok(hs)
    }
}

/// Whether a datagram carries a handshake line rather than a binary frame.
pub fn is_handshake(datagram: &[u8]) -> bool {
    datagram.first() == Some(&b'{')
}
