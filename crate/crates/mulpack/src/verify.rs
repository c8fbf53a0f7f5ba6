//! Exhaustive product checks: sweep every representable parameter against
//! every input word, and audit packed artifacts read back from disk.

use crate::config::DspConfig;
use crate::dspemu::{dsp_execute, extract_lanes};
use crate::error::Result;
use crate::manipulate::representable_magnitudes;
use crate::packer::{build_operands, core_mask, is_feasible, ParamTuple};
use crate::romdict::{tuple_for_word, IndexWord, RomImage};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::collections::BTreeSet;

/// One product that came out wrong: parameter `w` times input `i` on the
/// given lane. Structural faults in a dictionary entry use `i = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub w: i64,
    pub i: i64,
    pub lane: usize,
    pub expected: i64,
    pub got: i64,
}

const MISMATCH_CAP: usize = 16;

/// Outcome of a sweep: how many packed passes were evaluated and the first
/// few mismatches, if any.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepReport {
    pub checked: u64,
    pub mismatches: Vec<Mismatch>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    fn record(&mut self, m: Mismatch) {
        if self.mismatches.len() < MISMATCH_CAP {
            self.mismatches.push(m);
        }
    }
}

/// Every signed parameter value the packed form can carry exactly: zero plus
/// the representable magnitudes under both signs, clipped to the two's
/// complement range. Sorted ascending.
pub fn representable_signed_values(cfg: &DspConfig) -> Vec<i64> {
    let (lo, hi) = cfg.param_range();
    let mut out = BTreeSet::new();
    out.insert(0i64);
    for m in representable_magnitudes(cfg) {
        let m = i64::from(m);
        if m <= hi {
            out.insert(m);
        }
        if -m >= lo {
            out.insert(-m);
        }
    }
    out.into_iter().collect()
}

/// Place every representable value in every lane position, fill the other
/// lanes with random representable co-parameters until the tuple fits the
/// core budget, and run the packed pass against every input word. Each pass
/// checks all lanes; `checked` counts passes.
pub fn lane_sweep(cfg: &DspConfig, seeds: &[u64]) -> Result<SweepReport> {
    let values = representable_signed_values(cfg);
    let (in_lo, in_hi) = cfg.input_range();
    let mut report = SweepReport::default();
    for &seed in seeds {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for &wv in &values {
            for lane in 0..cfg.lanes {
                let tuple = loop {
                    let mut vals = vec![0i64; cfg.lanes];
                    for (j, slot) in vals.iter_mut().enumerate() {
                        *slot = if j == lane {
                            wv
                        } else {
                            *values.choose(&mut rng).expect("non-empty value set")
                        };
                    }
                    let t = ParamTuple::from_values(&vals, cfg)?;
                    if is_feasible(&t, cfg) {
                        break t;
                    }
                };
                let expect = tuple.values();
                for i_val in in_lo..=in_hi {
                    let ops = build_operands(&tuple, i_val, cfg)?;
                    let state = dsp_execute(ops.a_word, ops.b_word, ops.c_word, cfg)?;
                    let got = extract_lanes(&state, &ops, i_val, cfg);
                    for (j, &g) in got.iter().enumerate() {
                        let e = expect[j] * i_val;
                        if g != e {
                            report.record(Mismatch {
                                w: expect[j],
                                i: i_val,
                                lane: j,
                                expected: e,
                                got: g,
                            });
                        }
                    }
                    report.checked += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Shift fields wider than this cannot belong to any in-range magnitude and
/// would overflow the reconstruction arithmetic, so they fail structurally
/// before anything is evaluated.
const SHIFT_LIMIT: u32 = 32;

fn entry_fault(image: &RomImage, address: usize, cfg: &DspConfig) -> Option<Mismatch> {
    let entry = &image.entries[address];
    if entry.lanes.len() != cfg.lanes {
        return Some(Mismatch {
            w: 0,
            i: 0,
            lane: 0,
            expected: cfg.lanes as i64,
            got: entry.lanes.len() as i64,
        });
    }
    for (lane, d) in entry.lanes.iter().enumerate() {
        if d.is_zero {
            continue;
        }
        let fault = |w: i64| {
            Some(Mismatch {
                w,
                i: 0,
                lane,
                expected: 0,
                got: w,
            })
        };
        if core_mask(d.core).is_err() {
            return fault(i64::from(d.core));
        }
        if d.inner_shift > SHIFT_LIMIT || d.shift > SHIFT_LIMIT {
            return fault(i64::from(d.inner_shift.max(d.shift)));
        }
        let magnitude = (1u128 + (u128::from(d.core) << d.inner_shift)) << d.shift;
        if magnitude > u128::from(cfg.max_magnitude()) {
            return fault(magnitude.min(i64::MAX as u128) as i64);
        }
    }
    None
}

/// Audit a packed stream against its dictionary: reject malformed entries,
/// then replay every distinct index word over the full input range and
/// compare each lane with the plain product.
pub fn verify_artifacts(
    words: &[IndexWord],
    image: &RomImage,
    cfg: &DspConfig,
) -> Result<SweepReport> {
    let mut report = SweepReport::default();
    let mut bad_entries = BTreeSet::new();
    for address in 0..image.entries.len() {
        if let Some(m) = entry_fault(image, address, cfg) {
            bad_entries.insert(address);
            report.record(m);
        }
    }

    let distinct: BTreeSet<(u32, u8)> = words.iter().map(|w| (w.address, w.sign_bits)).collect();
    let (in_lo, in_hi) = cfg.input_range();
    for (address, sign_bits) in distinct {
        if bad_entries.contains(&(address as usize)) {
            continue;
        }
        let word = IndexWord { address, sign_bits };
        let tuple = match tuple_for_word(&word, image, cfg) {
            Ok(t) => t,
            Err(_) => {
                report.record(Mismatch {
                    w: i64::from(address),
                    i: 0,
                    lane: 0,
                    expected: 0,
                    got: i64::from(address),
                });
                continue;
            }
        };
        let expect = tuple.values();
        for i_val in in_lo..=in_hi {
            let pass = build_operands(&tuple, i_val, cfg)
                .and_then(|ops| {
                    dsp_execute(ops.a_word, ops.b_word, ops.c_word, cfg).map(|s| (ops, s))
                })
                .map(|(ops, state)| extract_lanes(&state, &ops, i_val, cfg));
            match pass {
                Ok(got) => {
                    for (j, &g) in got.iter().enumerate() {
                        let e = expect[j] * i_val;
                        if g != e {
                            report.record(Mismatch {
                                w: expect[j],
                                i: i_val,
                                lane: j,
                                expected: e,
                                got: g,
                            });
                        }
                    }
                }
                Err(_) => report.record(Mismatch {
                    w: i64::from(address),
                    i: i_val,
                    lane: 0,
                    expected: 0,
                    got: 0,
                }),
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
