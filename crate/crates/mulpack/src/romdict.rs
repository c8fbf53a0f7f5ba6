//! Dictionary compression for packed parameter tuples: distinct magnitude
//! tuples live once in a small ROM, the weight stream itself shrinks to an
//! address plus per-lane sign bits.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::DspConfig;
use crate::error::{Error, Result};
use crate::manipulate::{manipulate, Decomposition, Sign};
use crate::packer::{bc_cmp, bray_curtis, packed_a_word, ParamTuple};

/// One dictionary row: the packed multiplier word plus the per-lane shift
/// recipe needed to undo the decomposition when reading products back out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RomEntry {
    pub a_word: u64,
    pub lanes: Vec<Decomposition>,
}

impl RomEntry {
    /// Build a row from unsigned lane magnitudes; zero lanes are allowed,
    /// every other magnitude must carry an approximated core.
    pub fn from_magnitudes(magnitudes: &[u32], cfg: &DspConfig) -> Result<Self> {
        let lanes = magnitudes
            .iter()
            .map(|&m| {
                if m == 0 {
                    Ok(Decomposition::ZERO)
                } else {
                    manipulate(m, cfg)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let tuple = ParamTuple::new(lanes, cfg)?;
        let a_word = packed_a_word(&tuple, cfg)?;
        Ok(RomEntry {
            a_word,
            lanes: tuple.lanes,
        })
    }

    pub fn magnitudes(&self) -> Vec<u32> {
        self.lanes.iter().map(|d| d.magnitude()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RomImage {
    pub entries: Vec<RomEntry>,
}

impl RomImage {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, address: u32) -> Result<&RomEntry> {
        self.entries
            .get(address as usize)
            .ok_or(Error::AddressOutOfRange {
                address,
                entries: self.entries.len(),
            })
    }
}

/// One stored weight: dictionary address above, one sign bit per lane below,
/// bit 0 belonging to the first lane and a set bit meaning negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexWord {
    pub address: u32,
    pub sign_bits: u8,
}

impl IndexWord {
    pub fn to_bits(&self, lanes: usize) -> u32 {
        self.address << lanes | u32::from(self.sign_bits)
    }

    pub fn from_bits(bits: u32, lanes: usize) -> IndexWord {
        IndexWord {
            address: bits >> lanes,
            sign_bits: (bits & ((1 << lanes) - 1)) as u8,
        }
    }

    pub fn sign(&self, lane: usize) -> Sign {
        if self.sign_bits >> lane & 1 == 1 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }
}

/// A magnitude tuple that lost its own dictionary row and now shares the
/// nearest retained one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub from: Vec<u32>,
    pub into: Vec<u32>,
    pub count: u64,
}

#[derive(Debug, Clone)]
pub struct RomBuild {
    pub image: RomImage,
    pub address_of: BTreeMap<Vec<u32>, u32>,
    pub merges: Vec<MergeRecord>,
}

/// Assign dictionary addresses to distinct magnitude tuples, most frequent
/// first, ties in magnitude order. Tuples past the capacity merge into the
/// retained entry with the smallest Bray-Curtis distance, ties again in
/// magnitude order.
pub fn build_rom(
    counts: &[(Vec<u32>, u64)],
    capacity: usize,
    cfg: &DspConfig,
) -> Result<RomBuild> {
    let capacity = capacity.min(cfg.rom_capacity());
    let mut ordered = counts.to_vec();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let split = ordered.len().min(capacity);
    let mut entries = Vec::with_capacity(split);
    let mut address_of = BTreeMap::new();
    for (addr, (mags, _)) in ordered[..split].iter().enumerate() {
        entries.push(RomEntry::from_magnitudes(mags, cfg)?);
        address_of.insert(mags.clone(), addr as u32);
    }

    let mut merges = Vec::new();
    for (mags, freq) in &ordered[split..] {
        if split == 0 {
            return Err(Error::AddressOutOfRange {
                address: 0,
                entries: 0,
            });
        }
        let mut best_addr = 0u32;
        let mut best_mags = &ordered[0].0;
        let mut best_d = bray_curtis(mags, best_mags);
        for (addr, (cand, _)) in ordered[..split].iter().enumerate().skip(1) {
            let d = bray_curtis(mags, cand);
            match bc_cmp(d, best_d) {
                Ordering::Less => {
                    best_addr = addr as u32;
                    best_mags = cand;
                    best_d = d;
                }
                Ordering::Equal if cand < best_mags => {
                    best_addr = addr as u32;
                    best_mags = cand;
                }
                _ => {}
            }
        }
        merges.push(MergeRecord {
            from: mags.clone(),
            into: best_mags.clone(),
            count: *freq,
        });
        address_of.insert(mags.clone(), best_addr);
    }

    Ok(RomBuild {
        image: RomImage { entries },
        address_of,
        merges,
    })
}

/// Turn approximated tuples into index words plus the ROM they refer to.
pub fn encode_stream(
    tuples: &[ParamTuple],
    capacity: usize,
    cfg: &DspConfig,
) -> Result<(Vec<IndexWord>, RomBuild)> {
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    for t in tuples {
        *counts.entry(t.magnitudes()).or_default() += 1;
    }
    let counted: Vec<(Vec<u32>, u64)> = counts.into_iter().collect();
    let built = build_rom(&counted, capacity, cfg)?;

    let words = tuples
        .iter()
        .map(|t| {
            let address = built.address_of[&t.magnitudes()];
            let mut sign_bits = 0u8;
            for (i, d) in t.lanes.iter().enumerate() {
                if !d.is_zero && d.sign == Sign::Negative {
                    sign_bits |= 1 << i;
                }
            }
            IndexWord { address, sign_bits }
        })
        .collect();
    Ok((words, built))
}

/// Rebuild the signed tuple one index word stands for: the entry supplies
/// the magnitudes, the word supplies the signs.
pub fn tuple_for_word(
    word: &IndexWord,
    image: &RomImage,
    cfg: &DspConfig,
) -> Result<ParamTuple> {
    let entry = image.entry(word.address)?;
    let lanes = entry
        .lanes
        .iter()
        .enumerate()
        .map(|(i, d)| Decomposition {
            sign: if d.is_zero { Sign::Positive } else { word.sign(i) },
            ..*d
        })
        .collect();
    ParamTuple::new(lanes, cfg)
}

/// Expand index words back to signed parameter values, lane by lane.
pub fn decode_stream(
    words: &[IndexWord],
    image: &RomImage,
    cfg: &DspConfig,
) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(words.len() * cfg.lanes);
    for w in words {
        let entry = image.entry(w.address)?;
        for (i, d) in entry.lanes.iter().enumerate() {
            if d.is_zero {
                out.push(0);
            } else {
                out.push(w.sign(i).apply(i64::from(d.magnitude())));
            }
        }
    }
    Ok(out)
}

/// Stored index bits over raw parameter bits, in integer permille.
pub fn index_ratio_permille(cfg: &DspConfig) -> u32 {
    cfg.index_bits() * 1000 / (cfg.lanes as u32 * cfg.param_bits)
}

pub fn index_ratio_display(cfg: &DspConfig) -> String {
    let p = index_ratio_permille(cfg);
    format!("{}.{}%", p / 10, p % 10)
}
