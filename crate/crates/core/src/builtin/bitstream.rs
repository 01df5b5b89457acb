//! Bit prediction: every big step is a one-step game won by guessing the
//! next bit of a stream.

use std::path::Path;

use rand::Rng;

use crate::rng::{self, Stream};
use crate::world::{ActionId, GameSignal, Observation, World, WorldError};

/// Pull-based bit source.
#[derive(Debug, Clone)]
pub enum BitStream {
    /// Raw bytes read most-significant bit first.
    Bytes {
        data: Vec<u8>,
        pos: u64,
    },
    Constant(u8),
    Alternating {
        next: u8,
    },
    /// Fair coin flips from a dedicated stream, independent of the life seed.
    Random(Box<Stream>),
}

impl BitStream {
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_bytes(std::fs::read(path)?))
    }

    pub fn from_bytes(data: Vec<u8>) -> Self {
        BitStream::Bytes { data, pos: 0 }
    }

    /// `zeros`, `ones`, `alternating` or `random:<seed>`.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "zeros" => Some(BitStream::Constant(0)),
            "ones" => Some(BitStream::Constant(1)),
            "alternating" => Some(BitStream::Alternating { next: 0 }),
            _ => {
                let seed = name.strip_prefix("random:")?.parse().ok()?;
                Some(BitStream::Random(Box::new(rng::stream(seed, 0))))
            }
        }
    }

    pub fn pull(&mut self) -> Option<u8> {
        match self {
            BitStream::Bytes { data, pos } => {
                let byte = *data.get((*pos / 8) as usize)?;
                let bit = (byte >> (7 - (*pos % 8))) & 1;
                *pos += 1;
                Some(bit)
            }
            BitStream::Constant(b) => Some(*b),
            BitStream::Alternating { next } => {
                let b = *next;
                *next ^= 1;
                Some(b)
            }
            BitStream::Random(rng) => Some(u8::from(rng.random::<bool>())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BitstreamWorld {
    stream: BitStream,
    history: Vec<u8>,
}

impl BitstreamWorld {
    pub fn new(stream: BitStream) -> Self {
        BitstreamWorld {
            stream,
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[u8] {
        &self.history
    }
}

impl World for BitstreamWorld {
    fn action_count(&self) -> usize {
        2
    }

    fn obs_alphabet(&self) -> usize {
        2
    }

    fn step(&mut self, action: ActionId, _rng: &mut Stream) -> Result<Observation, WorldError> {
        let bit = self
            .stream
            .pull()
            .ok_or(WorldError::StreamExhausted(self.history.len() as u64))?;
        self.history.push(bit);
        let signal = if action.0 == usize::from(bit) {
            GameSignal::Win
        } else {
            GameSignal::Loss
        };
        Ok(Observation::new(u32::from(bit), signal))
    }

    fn decoded_view(&self) -> Option<String> {
        Some(self.history.iter().map(|b| char::from(b'0' + b)).collect())
    }
}
