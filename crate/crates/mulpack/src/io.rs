//! Binary file formats: ROM images, packed index streams, parameter and
//! output tensors, and entropy-coded containers. Every format opens with
//! either a fixed magic or a single JSON header line.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bitio::{BitReader, BitWriter};
use crate::config::{default_mode, DspConfig};
use crate::error::{Error, Result};
use crate::huffman::{CodeBook, Encoded};
use crate::manipulate::{Decomposition, Sign};
use crate::packer::{packed_a_word, ParamTuple};
use crate::romdict::{IndexWord, RomEntry, RomImage};

pub const ROM_MAGIC: &[u8; 4] = b"SDMM";

fn read_chunk<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; len];
    let mut filled = 0;
    while filled < len {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(Error::Truncated {
                expected: len,
                got: filled,
            });
        }
        filled += n;
    }
    Ok(buf)
}

fn read_header_line<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::MalformedHeader {
                reason: "header line not terminated".into(),
            });
        }
        if byte[0] == b'\n' {
            return Ok(line);
        }
        line.push(byte[0]);
        if line.len() > 1 << 16 {
            return Err(Error::MalformedHeader {
                reason: "header line too long".into(),
            });
        }
    }
}

/// ROM image: magic, version byte (1 keeps packed words in 32 bits, 2 widens
/// them to 64 for ports past 32 wires), parameter width, input width, lane
/// count, entry count, then per entry the packed word and one
/// (inner shift, shift, zero flag) triple per lane.
pub fn write_rom<W: Write>(w: &mut W, image: &RomImage, cfg: &DspConfig) -> Result<()> {
    let version: u8 = if cfg.a_width > 32 { 2 } else { 1 };
    w.write_all(ROM_MAGIC)?;
    w.write_all(&[
        version,
        cfg.param_bits as u8,
        cfg.input_bits as u8,
        cfg.lanes as u8,
    ])?;
    w.write_all(&(image.entries.len() as u32).to_le_bytes())?;
    for e in &image.entries {
        if version == 1 {
            w.write_all(&(e.a_word as u32).to_le_bytes())?;
        } else {
            w.write_all(&e.a_word.to_le_bytes())?;
        }
        for d in &e.lanes {
            w.write_all(&[d.inner_shift as u8, d.shift as u8, u8::from(d.is_zero)])?;
        }
    }
    Ok(())
}

pub fn read_rom<R: Read>(r: &mut R) -> Result<(RomImage, DspConfig)> {
    let header = read_chunk(r, 12)?;
    if &header[..4] != ROM_MAGIC {
        return Err(Error::BadMagic { expected: "SDMM" });
    }
    let version = header[4];
    if !matches!(version, 1 | 2) {
        return Err(Error::UnsupportedVersion { version });
    }
    let param_bits = u32::from(header[5]);
    let input_bits = u32::from(header[6]);
    let lanes = usize::from(header[7]);
    let cfg = DspConfig::new(input_bits, param_bits, default_mode(input_bits))?;
    if cfg.lanes != lanes {
        return Err(Error::MalformedHeader {
            reason: format!("lane count {lanes} does not fit {input_bits}-bit inputs"),
        });
    }
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let word_len = if version == 1 { 4 } else { 8 };

    let mut entries = Vec::new();
    for _ in 0..count {
        let bytes = read_chunk(r, word_len + 3 * lanes)?;
        let a_word = if version == 1 {
            u64::from(u32::from_le_bytes(bytes[..4].try_into().unwrap()))
        } else {
            u64::from_le_bytes(bytes[..8].try_into().unwrap())
        };
        let mut decoded = Vec::with_capacity(lanes);
        for lane in 0..lanes {
            let off = word_len + 3 * lane;
            let is_zero = match bytes[off + 2] {
                0 => false,
                1 => true,
                flag => {
                    return Err(Error::MalformedHeader {
                        reason: format!("bad zero flag {flag}"),
                    })
                }
            };
            let core = (a_word >> (cfg.lane_slot() * lane as u32) & 7) as u32;
            decoded.push(Decomposition {
                sign: Sign::Positive,
                core: if is_zero { 0 } else { core },
                inner_shift: u32::from(bytes[off]),
                shift: u32::from(bytes[off + 1]),
                is_zero,
            });
        }
        let rebuilt = packed_a_word(&ParamTuple::new(decoded.clone(), &cfg)?, &cfg)?;
        if rebuilt != a_word {
            return Err(Error::MalformedHeader {
                reason: "packed word does not match its lane cores".into(),
            });
        }
        entries.push(RomEntry {
            a_word,
            lanes: decoded,
        });
    }
    Ok((RomImage { entries }, cfg))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub bits: u32,
    pub k: usize,
    pub address_width: u32,
    pub count: u64,
}

/// Index stream: one JSON header line, then the index words packed
/// back to back, most significant bit first.
pub fn write_index_stream<W: Write>(
    w: &mut W,
    words: &[IndexWord],
    cfg: &DspConfig,
) -> Result<()> {
    let header = IndexHeader {
        bits: cfg.index_bits(),
        k: cfg.lanes,
        address_width: cfg.address_width(),
        count: words.len() as u64,
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    let mut bits = BitWriter::new();
    for word in words {
        bits.push(u64::from(word.to_bits(cfg.lanes)), cfg.index_bits());
    }
    w.write_all(&bits.into_bytes())?;
    Ok(())
}

pub fn read_index_stream<R: Read>(r: &mut R) -> Result<(Vec<IndexWord>, IndexHeader)> {
    let line = read_header_line(r)?;
    let header: IndexHeader = serde_json::from_slice(&line)?;
    if header.k == 0 || header.k > 8 || header.bits > 32 {
        return Err(Error::MalformedHeader {
            reason: "index geometry out of range".into(),
        });
    }
    if header.bits != header.address_width + header.k as u32 {
        return Err(Error::MalformedHeader {
            reason: "index width is not address width plus lane count".into(),
        });
    }
    let need = (u64::from(header.bits) * header.count).div_ceil(8) as usize;
    let payload = read_chunk(r, need)?;
    let mut reader = BitReader::new(&payload);
    let mut words = Vec::with_capacity(header.count as usize);
    for _ in 0..header.count {
        let bits = reader.read(header.bits)? as u32;
        words.push(IndexWord::from_bits(bits, header.k));
    }
    Ok((words, header))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub bits: u32,
    pub shape: Vec<usize>,
    pub count: u64,
}

/// Parameter tensor: JSON header line, then one signed byte per value.
pub fn write_params<W: Write>(
    w: &mut W,
    values: &[i8],
    shape: &[usize],
    bits: u32,
) -> Result<()> {
    if !matches!(bits, 4 | 6 | 8) {
        return Err(Error::UnsupportedParamBits { bits });
    }
    let expected: usize = shape.iter().product();
    if expected != values.len() {
        return Err(Error::ShapeMismatch {
            shape: shape.to_vec(),
            got: values.len(),
        });
    }
    check_param_bytes(values, bits)?;
    let header = TensorHeader {
        bits,
        shape: shape.to_vec(),
        count: values.len() as u64,
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    let bytes: Vec<u8> = values.iter().map(|&v| v as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<(Vec<i8>, TensorHeader)> {
    let line = read_header_line(r)?;
    let header: TensorHeader = serde_json::from_slice(&line)?;
    if !matches!(header.bits, 4 | 6 | 8) {
        return Err(Error::UnsupportedParamBits { bits: header.bits });
    }
    let expected: usize = header.shape.iter().product();
    if header.count != expected as u64 {
        return Err(Error::CountMismatch {
            expected: expected as u64,
            got: header.count,
        });
    }
    let payload = read_chunk(r, expected)?;
    let values: Vec<i8> = payload.iter().map(|&b| b as i8).collect();
    check_param_bytes(&values, header.bits)?;
    Ok((values, header))
}

fn check_param_bytes(values: &[i8], bits: u32) -> Result<()> {
    let half = 1i16 << (bits - 1);
    for &v in values {
        if i16::from(v) < -half || i16::from(v) >= half {
            return Err(Error::ParamOutOfRange {
                value: i64::from(v),
                bits,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct OutputHeader {
    shape: Vec<usize>,
    count: u64,
}

/// Output tensor: JSON header line, then little-endian 32-bit words.
pub fn write_outputs<W: Write>(w: &mut W, values: &[i32], shape: &[usize]) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != values.len() {
        return Err(Error::ShapeMismatch {
            shape: shape.to_vec(),
            got: values.len(),
        });
    }
    let header = OutputHeader {
        shape: shape.to_vec(),
        count: values.len() as u64,
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for &v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_outputs<R: Read>(r: &mut R) -> Result<(Vec<i32>, Vec<usize>)> {
    let line = read_header_line(r)?;
    let header: OutputHeader = serde_json::from_slice(&line)?;
    let expected: usize = header.shape.iter().product();
    if header.count != expected as u64 {
        return Err(Error::CountMismatch {
            expected: expected as u64,
            got: header.count,
        });
    }
    let payload = read_chunk(r, expected * 4)?;
    let values = payload
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((values, header.shape))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeHeader {
    pub table: u64,
    pub count: u64,
    pub payload_bits: u64,
}

/// Entropy-coded container: JSON header line, a (symbol, code length) table
/// row per distinct symbol, then the packed payload.
pub fn write_huffman<W: Write>(w: &mut W, e: &Encoded) -> Result<()> {
    let header = CodeHeader {
        table: e.book.lengths.len() as u64,
        count: e.symbol_count,
        payload_bits: e.payload_bits,
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for &(symbol, len) in &e.book.lengths {
        w.write_all(&symbol.to_le_bytes())?;
        w.write_all(&[len])?;
    }
    w.write_all(&e.payload)?;
    Ok(())
}

pub fn read_huffman<R: Read>(r: &mut R) -> Result<Encoded> {
    let line = read_header_line(r)?;
    let header: CodeHeader = serde_json::from_slice(&line)?;
    let mut lengths = Vec::with_capacity(header.table as usize);
    for _ in 0..header.table {
        let row = read_chunk(r, 5)?;
        let symbol = u32::from_le_bytes(row[..4].try_into().unwrap());
        lengths.push((symbol, row[4]));
    }
    let payload = read_chunk(r, header.payload_bits.div_ceil(8) as usize)?;
    Ok(Encoded {
        book: CodeBook::new(lengths),
        payload,
        payload_bits: header.payload_bits,
        symbol_count: header.count,
    })
}
