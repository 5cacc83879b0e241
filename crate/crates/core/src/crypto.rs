//! Optional counter-mode-style encryption layer.
//!
//! A block is sealed as `(counter, payload XOR F(key, counter))` with a
//! strictly increasing counter per seal, so equal payloads never produce
//! equal ciphertexts. There is no authentication: the modeled server is
//! honest but curious, and opening with the wrong key or counter simply
//! yields garbage.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::payload::BlockPayload;

pub type Key = [u8; 32];

fn keystream_xor(key: &Key, counter: u64, buf: &mut [u8]) {
    let mut rng = ChaCha12Rng::from_seed(*key);
    rng.set_stream(counter);
    let mut ks = vec![0u8; buf.len()];
    rng.fill_bytes(&mut ks);
    for (b, k) in buf.iter_mut().zip(ks) {
        *b ^= k;
    }
}

/// A sealed block: the counter travels with the ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sealed {
    pub counter: u64,
    pub data: BlockPayload,
}

/// Seals `payload` under `key` with the given counter.
pub fn seal(payload: &BlockPayload, counter: u64, key: &Key) -> Sealed {
    let mut data = payload.clone();
    keystream_xor(key, counter, data.as_bytes_mut());
    Sealed { counter, data }
}

/// Inverts [`seal`]. Wrong key or tampered counter yields garbage, not an
/// error.
pub fn open(sealed: &Sealed, key: &Key) -> BlockPayload {
    let mut data = sealed.data.clone();
    keystream_xor(key, sealed.counter, data.as_bytes_mut());
    data
}

/// Mode of the store-attached layer. `Identity` keeps payloads in the clear
/// but still advances counters, which exercises the interface in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CipherMode {
    Identity,
    Stream,
}

/// Per-cell sealing state used by the store: each write burns a fresh
/// counter and remembers it for the cell so reads can open it again.
#[derive(Debug)]
pub struct CellCipher {
    mode: CipherMode,
    key: Key,
    next_counter: u64,
    cell_counter: HashMap<u64, u64>,
}

impl CellCipher {
    pub fn new(mode: CipherMode, key: Key) -> Self {
        CellCipher {
            mode,
            key,
            next_counter: 0,
            cell_counter: HashMap::new(),
        }
    }

    pub fn counters_used(&self) -> u64 {
        self.next_counter
    }

    pub fn seal_in_place(&mut self, addr: u64, buf: &mut [u8]) {
        let counter = self.next_counter;
        self.next_counter += 1;
        self.cell_counter.insert(addr, counter);
        if self.mode == CipherMode::Stream {
            keystream_xor(&self.key, counter, buf);
        }
    }

    pub fn open_in_place(&self, addr: u64, buf: &mut [u8]) {
        if self.mode == CipherMode::Stream {
            if let Some(counter) = self.cell_counter.get(&addr) {
                keystream_xor(&self.key, *counter, buf);
            }
        }
    }
}
