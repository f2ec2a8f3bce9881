//! Binary frames: a little-endian `u32` header length, a JSON header, then
//! each buffer as a `u32` byte length followed by little-endian elements.

use serde::{Deserialize, Serialize};

use super::Snapshot;
use crate::error::{Error, Result};
use crate::optimize::{HistoryRow, HyperParams, Stage};
use crate::stylize::ElementKind;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    F32,
    U32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferInfo {
    pub name: String,
    pub dtype: DType,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub v: u32,
    #[serde(rename = "type")]
    pub kind: String,
    pub revision: u64,
    pub face_revision: u64,
    pub stage: Stage,
    pub iteration: usize,
    pub vertex_count: usize,
    pub face_count: usize,
    pub paused: bool,
    pub finished: bool,
    pub element: ElementKind,
    pub energy: f64,
    pub params: HyperParams,
    pub history: Vec<HistoryRow>,
    pub buffers: Vec<BufferInfo>,
}

/// A decoded snapshot frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFrame {
    pub header: SnapshotHeader,
    pub vertices: Vec<f32>,
    /// Present only when the sender included the face buffer.
    pub faces: Option<Vec<u32>>,
    pub energies: Vec<f32>,
}

fn f32_bytes(data: &[f32]) -> impl Iterator<Item = u8> + '_ {
    data.iter().flat_map(|x| x.to_le_bytes())
}

fn u32_bytes(data: &[u32]) -> impl Iterator<Item = u8> + '_ {
    data.iter().flat_map(|x| x.to_le_bytes())
}

pub fn encode_snapshot(snap: &Snapshot, include_faces: bool) -> Result<Vec<u8>> {
    let mut buffers = vec![BufferInfo {
        name: "vertices".into(),
        dtype: DType::F32,
        count: snap.vertices.len(),
    }];
    if include_faces {
        buffers.push(BufferInfo {
            name: "faces".into(),
            dtype: DType::U32,
            count: snap.faces.len(),
        });
    }
    buffers.push(BufferInfo {
        name: "energies".into(),
        dtype: DType::F32,
        count: snap.energies.len(),
    });
    let header = SnapshotHeader {
        v: PROTOCOL_VERSION,
        kind: "snapshot".into(),
        revision: snap.revision,
        face_revision: snap.face_revision,
        stage: snap.stage,
        iteration: snap.iteration,
        vertex_count: snap.vertices.len() / 3,
        face_count: snap.faces.len() / 3,
        paused: snap.paused,
        finished: snap.finished,
        element: snap.element,
        energy: snap.energy,
        params: snap.params,
        history: snap.history.clone(),
        buffers,
    };
    let json = serde_json::to_vec(&header)
        .map_err(|e| Error::InvalidParameter(format!("header encoding failed: {e}")))?;
    let mut out = Vec::with_capacity(
        4 + json.len() + 12 + 4 * (snap.vertices.len() + snap.faces.len() + snap.energies.len()),
    );
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&((snap.vertices.len() * 4) as u32).to_le_bytes());
    out.extend(f32_bytes(&snap.vertices));
    if include_faces {
        out.extend_from_slice(&((snap.faces.len() * 4) as u32).to_le_bytes());
        out.extend(u32_bytes(&snap.faces));
    }
    out.extend_from_slice(&((snap.energies.len() * 4) as u32).to_le_bytes());
    out.extend(f32_bytes(&snap.energies));
    Ok(out)
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        message: msg.into(),
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| malformed("frame truncated"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Splits a frame into its JSON header and raw buffers.
pub fn split_frame(frame: &[u8]) -> Result<(serde_json::Value, Vec<&[u8]>)> {
    let mut r = Reader { data: frame, pos: 0 };
    let len = r.u32()? as usize;
    let header: serde_json::Value = serde_json::from_slice(r.take(len)?)
        .map_err(|e| malformed(format!("bad header: {e}")))?;
    let mut buffers = Vec::new();
    while r.pos < frame.len() {
        let n = r.u32()? as usize;
        buffers.push(r.take(n)?);
    }
    Ok((header, buffers))
}

pub fn decode_snapshot(frame: &[u8]) -> Result<SnapshotFrame> {
    let (header, raw) = split_frame(frame)?;
    let header: SnapshotHeader =
        serde_json::from_value(header).map_err(|e| malformed(format!("bad header: {e}")))?;
    if header.v != PROTOCOL_VERSION {
        return Err(malformed(format!("unsupported protocol version {}", header.v)));
    }
    if raw.len() != header.buffers.len() {
        return Err(malformed("buffer count does not match header"));
    }
    let mut out = SnapshotFrame {
        vertices: Vec::new(),
        faces: None,
        energies: Vec::new(),
        header,
    };
    for (info, bytes) in out.header.buffers.iter().zip(raw) {
        if bytes.len() != info.count * 4 {
            return Err(malformed(format!("buffer {} has the wrong length", info.name)));
        }
        let words = bytes.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
        match (info.name.as_str(), info.dtype) {
            ("vertices", DType::F32) => out.vertices = words.map(f32::from_le_bytes).collect(),
            ("energies", DType::F32) => out.energies = words.map(f32::from_le_bytes).collect(),
            ("faces", DType::U32) => out.faces = Some(words.map(u32::from_le_bytes).collect()),
            (name, _) => return Err(malformed(format!("unexpected buffer {name}"))),
        }
    }
    let h = &out.header;
    if out.vertices.len() != 3 * h.vertex_count || out.energies.len() != h.face_count {
        return Err(malformed("buffer lengths disagree with counts"));
    }
    if let Some(f) = &out.faces {
        if f.len() != 3 * h.face_count || f.iter().any(|&i| i as usize >= h.vertex_count) {
            return Err(malformed("face buffer inconsistent with counts"));
        }
    }
    Ok(out)
}

/// Per-connection encoder that resends the face buffer only when the
/// topology changed since the last frame it produced.
#[derive(Debug, Default)]
pub struct FrameEncoder {
    last_face_revision: Option<u64>,
}

impl FrameEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn encode(&mut self, snap: &Snapshot) -> Result<Vec<u8>> {
        let include = self.last_face_revision != Some(snap.face_revision);
        let frame = encode_snapshot(snap, include)?;
        self.last_face_revision = Some(snap.face_revision);
        Ok(frame)
    }
}
