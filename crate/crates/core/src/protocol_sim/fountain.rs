//! XOR fountain codec over a priority-ordered packet stream.
//!
//! Every coded packet is `pi_rec XOR pi_target`, where `pi_rec` is the most
//! recently recovered source packet and the targets are the highest-priority
//! unrecovered packets. A receiver that missed a frame cannot reuse it: once
//! the recovered set moves on, the next frame uses a different base.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which packet stream a frame belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    /// Confidential (region of interest).
    Confidential,
    /// Public (background).
    Public,
}

/// One coded packet: `base XOR target`, or `target` alone when nothing has
/// been recovered yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodedPacket {
    pub base: Option<usize>,
    pub target: usize,
}

/// Recovered / unrecovered split of one stream. Unrecovered packets are kept in
/// priority order (front = most important).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StreamLedger {
    recovered: Vec<usize>,
    unrecovered: VecDeque<usize>,
}

impl StreamLedger {
    /// A fresh stream of packet ids `first..first + len`, highest priority first.
    pub fn new(first: usize, len: usize) -> Self {
        StreamLedger {
            recovered: Vec::new(),
            unrecovered: (first..first + len).collect(),
        }
    }

    /// Ledger with explicit contents; `recovered` is in recovery order.
    pub fn from_parts(recovered: Vec<usize>, unrecovered: Vec<usize>) -> Result<Self> {
        let mut all: Vec<usize> = recovered.iter().chain(&unrecovered).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Contract("recovered and unrecovered sets overlap".into()));
        }
        Ok(StreamLedger {
            recovered,
            unrecovered: unrecovered.into(),
        })
    }

    pub fn recovered(&self) -> &[usize] {
        &self.recovered
    }

    pub fn unrecovered(&self) -> impl Iterator<Item = &usize> {
        self.unrecovered.iter()
    }

    pub fn remaining(&self) -> usize {
        self.unrecovered.len()
    }

    pub fn is_complete(&self) -> bool {
        self.unrecovered.is_empty()
    }
}

/// Both streams of an image. Packet ids are disjoint: confidential packets
/// are `0..n_roi`, public ones `n_roi..n_roi + n_bg`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketLedger {
    pub confidential: StreamLedger,
    pub public: StreamLedger,
}

impl PacketLedger {
    pub fn new(n_roi: usize, n_bg: usize) -> Self {
        PacketLedger {
            confidential: StreamLedger::new(0, n_roi),
            public: StreamLedger::new(n_roi, n_bg),
        }
    }

    pub fn stream(&self, s: Stream) -> &StreamLedger {
        match s {
            Stream::Confidential => &self.confidential,
            Stream::Public => &self.public,
        }
    }

    pub fn stream_mut(&mut self, s: Stream) -> &mut StreamLedger {
        match s {
            Stream::Confidential => &mut self.confidential,
            Stream::Public => &mut self.public,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.confidential.is_complete() && self.public.is_complete()
    }
}

/// Builds the next frame of up to `l` coded packets, or `None` when the stream
/// has nothing left to send.
pub fn fountain_encode(ledger: &StreamLedger, l: usize) -> Result<Option<Vec<CodedPacket>>> {
    if l == 0 {
        return Err(Error::Contract("frame length must be at least 1".into()));
    }
    if ledger.is_complete() {
        return Ok(None);
    }
    let base = ledger.recovered.last().copied();
    Ok(Some(
        ledger
            .unrecovered
            .iter()
            .take(l)
            .map(|&target| CodedPacket { base, target })
            .collect(),
    ))
}

/// Applies the acknowledgement of `frame`. A failed frame leaves the ledger
/// untouched.
pub fn fountain_decode_frame(ledger: &mut StreamLedger, frame: &[CodedPacket], success: bool) {
    if !success {
        return;
    }
    for cp in frame {
        if let Some(pos) = ledger.unrecovered.iter().position(|&p| p == cp.target) {
            ledger.unrecovered.remove(pos);
            ledger.recovered.push(cp.target);
        }
    }
}

/// Source payloads, indexed by packet id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payloads(pub Vec<Vec<u8>>);

impl Payloads {
    /// The bytes on the air for one coded packet.
    pub fn encode(&self, cp: &CodedPacket) -> Vec<u8> {
        let mut out = self.0[cp.target].clone();
        if let Some(b) = cp.base {
            for (o, x) in out.iter_mut().zip(&self.0[b]) {
                *o ^= x;
            }
        }
        out
    }
}

/// Receiver-side payload store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadDecoder(pub Vec<Option<Vec<u8>>>);

impl PayloadDecoder {
    pub fn new(n: usize) -> Self {
        PayloadDecoder(vec![None; n])
    }

    /// Recovers `cp.target` from the received bytes; the base must already be known.
    pub fn decode(&mut self, cp: &CodedPacket, bytes: &[u8]) -> Result<()> {
        let mut out = bytes.to_vec();
        if let Some(b) = cp.base {
            let known = self.0[b]
                .as_ref()
                .ok_or_else(|| Error::Contract(format!("base packet {b} not yet decoded")))?;
            for (o, x) in out.iter_mut().zip(known) {
                *o ^= x;
            }
        }
        self.0[cp.target] = Some(out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_uses_latest_recovered_and_top_priority() {
        let l = StreamLedger::from_parts(vec![5], vec![1, 2, 3, 4]).unwrap();
        let f = fountain_encode(&l, 2).unwrap().unwrap();
        assert_eq!(
            f,
            vec![
                CodedPacket { base: Some(5), target: 1 },
                CodedPacket { base: Some(5), target: 2 }
            ]
        );
    }

    #[test]
    fn bootstrap_is_uncoded() {
        let l = StreamLedger::new(1, 4);
        let f = fountain_encode(&l, 1).unwrap().unwrap();
        assert_eq!(f, vec![CodedPacket { base: None, target: 1 }]);
    }

    #[test]
    fn short_stream_sends_everything_left() {
        let l = StreamLedger::from_parts(vec![0], vec![7, 8, 9]).unwrap();
        assert_eq!(fountain_encode(&l, 10).unwrap().unwrap().len(), 3);
        let done = StreamLedger::from_parts(vec![0, 1], vec![]).unwrap();
        assert_eq!(fountain_encode(&done, 3).unwrap(), None);
    }

    #[test]
    fn decode_success_and_failure() {
        let mut l = StreamLedger::from_parts(vec![5], vec![1, 2, 3, 4]).unwrap();
        let f = fountain_encode(&l, 2).unwrap().unwrap();
        let before = l.clone();
        fountain_decode_frame(&mut l, &f, false);
        assert_eq!(l, before);
        fountain_decode_frame(&mut l, &f, true);
        assert_eq!(l.recovered(), &[5, 1, 2]);
        assert_eq!(l.unrecovered().copied().collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn overlapping_parts_rejected() {
        assert!(StreamLedger::from_parts(vec![1], vec![1, 2]).is_err());
    }
}
