//! Canonical Huffman coding over index-word symbols.
//!
//! Code lengths come from a standard Huffman build with deterministic
//! tie-breaking; codes are then reassigned canonically (shorter first,
//! lower symbol first within a length), so the table serializes as plain
//! (symbol, length) pairs and the decoder rebuilds identical codes.

use crate::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

/// Canonical code table: (symbol, code length) sorted by (length, symbol).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    pub lengths: Vec<(u32, u8)>,
}

impl CodeBook {
    pub fn new(mut lengths: Vec<(u32, u8)>) -> Self {
        lengths.sort_by_key(|&(sym, len)| (len, sym));
        CodeBook { lengths }
    }

    /// Codes in canonical order.
    pub fn codes(&self) -> Vec<(u32, u8, u64)> {
        let mut out = Vec::with_capacity(self.lengths.len());
        let mut code = 0u64;
        let mut prev_len = 0u8;
        for &(sym, len) in &self.lengths {
            if prev_len != 0 {
                code += 1;
            }
            code <<= len - prev_len;
            // first code of length `len` when prev_len == 0
            out.push((sym, len, code));
            prev_len = len;
        }
        out
    }

    pub fn max_length(&self) -> u8 {
        self.lengths.iter().map(|&(_, l)| l).max().unwrap_or(0)
    }
}

/// Huffman code lengths for a frequency map; one lone symbol gets length 1
/// so the payload stays prefix-decodable.
pub fn build_lengths(freqs: &BTreeMap<u32, u64>) -> Vec<(u32, u8)> {
    match freqs.len() {
        0 => return Vec::new(),
        1 => {
            let (&sym, _) = freqs.iter().next().unwrap();
            return vec![(sym, 1)];
        }
        _ => {}
    }

    struct Node {
        parent: usize,
        symbol: Option<u32>,
    }
    let mut nodes: Vec<Node> = Vec::with_capacity(freqs.len() * 2);
    // (weight, creation order) keeps merges fully deterministic
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for (&sym, &count) in freqs {
        let id = nodes.len();
        nodes.push(Node {
            parent: usize::MAX,
            symbol: Some(sym),
        });
        heap.push(Reverse((count, id)));
    }
    while heap.len() > 1 {
        let Reverse((w1, n1)) = heap.pop().unwrap();
        let Reverse((w2, n2)) = heap.pop().unwrap();
        let id = nodes.len();
        nodes.push(Node {
            parent: usize::MAX,
            symbol: None,
        });
        nodes[n1].parent = id;
        nodes[n2].parent = id;
        heap.push(Reverse((w1 + w2, id)));
    }

    let mut out = Vec::with_capacity(freqs.len());
    for i in 0..nodes.len() {
        if let Some(sym) = nodes[i].symbol {
            let mut depth = 0u8;
            let mut at = i;
            while nodes[at].parent != usize::MAX {
                at = nodes[at].parent;
                depth += 1;
            }
            out.push((sym, depth));
        }
    }
    out
}

/// A fully encoded stream: table plus MSB-first payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub book: CodeBook,
    pub payload: Vec<u8>,
    pub payload_bits: u64,
    pub symbol_count: u64,
}

impl Encoded {
    /// Mean code length in bits per symbol, payload only.
    pub fn bits_per_symbol(&self) -> f64 {
        self.payload_bits as f64 / self.symbol_count as f64
    }

    /// Bits the serialized table costs: symbol plus length per row.
    pub fn table_bits(&self) -> u64 {
        self.book.lengths.len() as u64 * 40
    }
}

pub fn encode(symbols: &[u32]) -> Result<Encoded> {
    if symbols.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut freqs: BTreeMap<u32, u64> = BTreeMap::new();
    for &s in symbols {
        *freqs.entry(s).or_default() += 1;
    }
    let book = CodeBook::new(build_lengths(&freqs));
    let code_of: BTreeMap<u32, (u8, u64)> = book
        .codes()
        .into_iter()
        .map(|(sym, len, code)| (sym, (len, code)))
        .collect();
    let mut w = BitWriter::new();
    for &s in symbols {
        let (len, code) = code_of[&s];
        w.push(code, u32::from(len));
    }
    let payload_bits = w.bit_len();
    Ok(Encoded {
        book,
        payload: w.into_bytes(),
        payload_bits,
        symbol_count: symbols.len() as u64,
    })
}

pub fn decode(e: &Encoded) -> Result<Vec<u32>> {
    let codes = e.book.codes();
    if codes.is_empty() {
        return if e.symbol_count == 0 {
            Ok(Vec::new())
        } else {
            Err(Error::CountMismatch {
                expected: e.symbol_count,
                got: 0,
            })
        };
    }
    // per-length first code / slice into the canonical symbol order
    let max_len = e.book.max_length();
    let mut first_code = vec![0u64; usize::from(max_len) + 1];
    let mut first_index = vec![0usize; usize::from(max_len) + 1];
    let mut count = vec![0usize; usize::from(max_len) + 1];
    for (idx, &(_, len, code)) in codes.iter().enumerate() {
        let l = usize::from(len);
        if count[l] == 0 {
            first_code[l] = code;
            first_index[l] = idx;
        }
        count[l] += 1;
    }

    let mut out = Vec::with_capacity(e.symbol_count as usize);
    let mut r = BitReader::new(&e.payload);
    for _ in 0..e.symbol_count {
        let mut acc = 0u64;
        let mut len = 0usize;
        loop {
            acc = (acc << 1) | u64::from(r.read_bit()?);
            len += 1;
            if len > usize::from(max_len) {
                return Err(Error::MalformedHeader {
                    reason: "code beyond maximum length".into(),
                });
            }
            if count[len] > 0 {
                let offset = acc.wrapping_sub(first_code[len]);
                if offset < count[len] as u64 {
                    out.push(codes[first_index[len] + offset as usize].0);
                    break;
                }
            }
        }
    }
    Ok(out)
}
