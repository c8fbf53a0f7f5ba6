//! End-to-end parameter packing: decompose, fine-tune, approximate, then
//! build the dictionary and index stream, keeping score of the error budget.

use crate::config::DspConfig;
use crate::error::{Error, Result};
use crate::manipulate::approximate_value;
use crate::packer::{approximate_tuple, fine_tune, ParamTuple};
use crate::romdict::{decode_stream, encode_stream, IndexWord, RomBuild};
use serde::Serialize;
use std::collections::BTreeSet;

/// Signed error histogram plus the two summary figures everyone asks for.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ErrorHist {
    pub counts: std::collections::BTreeMap<i64, u64>,
    pub mean_abs: f64,
    pub max_abs: u64,
}

impl ErrorHist {
    fn record(&mut self, delta: i64) {
        *self.counts.entry(delta).or_insert(0) += 1;
    }

    fn finish(&mut self) {
        let mut total = 0u64;
        let mut n = 0u64;
        for (&delta, &count) in &self.counts {
            total += delta.unsigned_abs() * count;
            n += count;
            self.max_abs = self.max_abs.max(delta.unsigned_abs());
        }
        self.mean_abs = if n == 0 { 0.0 } else { total as f64 / n as f64 };
    }
}

/// How the parameter population narrowed on its way into the dictionary.
///
/// `approx_error` measures the value-level approximation step alone;
/// `decode_error` measures the full round trip, so it also carries whatever
/// the tuple tuning and dictionary merges cost.
#[derive(Debug, Clone, Serialize)]
pub struct PackStats {
    pub params: usize,
    pub tuples: usize,
    pub distinct_original: usize,
    pub distinct_tuned: usize,
    pub distinct_approximated: usize,
    pub rom_entries: usize,
    pub merges: usize,
    pub approx_error: ErrorHist,
    pub decode_error: ErrorHist,
}

/// A packed parameter stream with everything needed to run or inspect it.
#[derive(Debug, Clone)]
pub struct Packed {
    pub words: Vec<IndexWord>,
    pub rom: RomBuild,
    pub decoded: Vec<i64>,
    pub stats: PackStats,
}

/// Pack a flat parameter stream: group into lane tuples (zero padded at the
/// tail), tune each tuple onto the core budget, approximate, and encode
/// against a dictionary capped at `capacity` rows.
pub fn pack_params(values: &[i8], capacity: usize, cfg: &DspConfig) -> Result<Packed> {
    pack_matrix(values, 1, values.len(), capacity, cfg)
}

/// Pack a rows x cols parameter matrix in the layout the array streams:
/// each tuple holds `lanes` consecutive columns of one row, rows padded with
/// zero lanes to a whole number of tuples. The word order matches what
/// `run_packed` expects for a weight matrix with `cols` output columns.
pub fn pack_matrix(
    values: &[i8],
    rows: usize,
    cols: usize,
    capacity: usize,
    cfg: &DspConfig,
) -> Result<Packed> {
    if rows * cols != values.len() {
        return Err(Error::ShapeMismatch {
            shape: vec![rows, cols],
            got: values.len(),
        });
    }
    for &v in values {
        cfg.check_param(i64::from(v))?;
    }
    let k = cfg.lanes;
    let groups = cols.div_ceil(k);
    let mut padded = vec![0i64; rows * groups * k];
    for n in 0..rows {
        for p in 0..cols {
            padded[n * groups * k + p] = i64::from(values[n * cols + p]);
        }
    }

    let mut originals = BTreeSet::new();
    let mut tuned_rows = BTreeSet::new();
    let mut approx_rows = BTreeSet::new();
    let mut tuples = Vec::with_capacity(rows * groups);
    for chunk in padded.chunks(k) {
        let t = ParamTuple::from_values(chunk, cfg)?;
        originals.insert(t.magnitudes());
        let tuned = fine_tune(&t, cfg);
        tuned_rows.insert(tuned.magnitudes());
        let approx = approximate_tuple(&tuned, cfg);
        approx_rows.insert(approx.magnitudes());
        tuples.push(approx);
    }

    let (words, rom) = encode_stream(&tuples, capacity, cfg)?;
    let full = decode_stream(&words, &rom.image, cfg)?;
    let mut decoded = vec![0i64; values.len()];
    for n in 0..rows {
        for p in 0..cols {
            decoded[n * cols + p] = full[n * groups * k + p];
        }
    }

    let mut approx_error = ErrorHist::default();
    let mut decode_error = ErrorHist::default();
    for (idx, &v) in values.iter().enumerate() {
        let v = i64::from(v);
        approx_error.record(approximate_value(v, cfg)? - v);
        decode_error.record(decoded[idx] - v);
    }
    approx_error.finish();
    decode_error.finish();

    let stats = PackStats {
        params: values.len(),
        tuples: tuples.len(),
        distinct_original: originals.len(),
        distinct_tuned: tuned_rows.len(),
        distinct_approximated: approx_rows.len(),
        rom_entries: rom.image.entries.len(),
        merges: rom.merges.len(),
        approx_error,
        decode_error,
    };
    Ok(Packed {
        words,
        rom,
        decoded,
        stats,
    })
}
