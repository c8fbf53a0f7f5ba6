//! Bit-exact emulation of one packed multiplier pass.
//!
//! The multiplier consumes the input's v-bit pattern (negative inputs are
//! not sign-extended; the packed correction word on the accumulator port
//! makes the lanes come out right), multiplies by the stacked cores, adds
//! the 48-bit carry-in and wraps. Lane fields are then cut back out of the
//! product at slot boundaries and reassembled into signed products.

use crate::config::{DspConfig, PortMode};
use crate::error::{Error, Result};
use crate::packer::{build_operands, check_port_fit, DspOperands, ParamTuple};

/// Product register after one pass, 48 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DspState {
    pub p_out: u64,
}

/// One multiplier pass: `p = (a·pattern(b) + c) mod 2^48`.
pub fn dsp_execute(a_word: u64, b_word: i64, c_word: u64, cfg: &DspConfig) -> Result<DspState> {
    check_port_fit(a_word, cfg)?;
    cfg.check_input(b_word)?;
    if c_word >> cfg.acc_width != 0 {
        return Err(Error::PortOverflow {
            port: 'C',
            value: c_word,
            width: cfg.acc_width,
        });
    }
    let pattern = b_word.rem_euclid(1i64 << cfg.input_bits) as u64;
    let mask = (1u64 << cfg.acc_width) - 1;
    let p_out = a_word.wrapping_mul(pattern).wrapping_add(c_word) & mask;
    Ok(DspState { p_out })
}

/// Cut the k lane fields out of the product and rebuild each signed product:
/// sign-interpret the slot, splice the input bits the inner shift folded
/// away, undo both shifts, then apply the stored parameter sign.
pub fn extract_lanes(state: &DspState, ops: &DspOperands, i_val: i64, cfg: &DspConfig) -> Vec<i64> {
    let slot = cfg.lane_slot();
    let slot_mask = (1u64 << slot) - 1;
    let half = 1u64 << (slot - 1);
    (0..cfg.lanes)
        .map(|lane| {
            if ops.lane_zero[lane] {
                return 0;
            }
            let field = (state.p_out >> (slot * lane as u32)) & slot_mask;
            let signed = if field >= half {
                field as i64 - (1i64 << slot)
            } else {
                field as i64
            };
            let sh = ops.lane_shifts[lane];
            let low = i_val.rem_euclid(1i64 << sh.inner);
            let product = ((signed << sh.inner) + low) << sh.outer;
            ops.lane_signs[lane].apply(product)
        })
        .collect()
}

/// Running per-lane accumulators with a signed width bound. A pass commits
/// either all k lane updates or none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSums {
    pub width: u32,
    pub values: Vec<i64>,
}

impl PartialSums {
    pub fn new(width: u32, lanes: usize) -> Self {
        PartialSums {
            width,
            values: vec![0; lanes],
        }
    }

    fn check(&self, value: i64) -> Result<()> {
        let half = 1i64 << (self.width - 1);
        if value < -half || value >= half {
            return Err(Error::PsumOverflow {
                value,
                width: self.width,
            });
        }
        Ok(())
    }
}

/// One processing-element step: multiply the shared input against the k
/// resident parameters and fold the products into the partial sums.
pub fn pe_execute(
    i_val: i64,
    t: &ParamTuple,
    psums: &mut PartialSums,
    cfg: &DspConfig,
) -> Result<()> {
    let ops = build_operands(t, i_val, cfg)?;
    let state = dsp_execute(ops.a_word, ops.b_word, ops.c_word, cfg)?;
    let lanes = extract_lanes(&state, &ops, i_val, cfg);
    let next: Vec<i64> = psums
        .values
        .iter()
        .zip(&lanes)
        .map(|(&acc, &add)| acc + add)
        .collect();
    for &v in &next {
        psums.check(v)?;
    }
    psums.values = next;
    Ok(())
}

/// Port-level trace of one pass; B is the pattern the multiplier saw.
pub fn trace_line(a: u64, b_pattern: u64, c: u64, p: u64) -> String {
    format!("A={a:#x} B={b_pattern:#x} C={c:#x} P={p:#x}")
}

/// Relaxed mode widens the A port; worth a note in verification output.
pub fn port_advisory(cfg: &DspConfig) -> Option<String> {
    match cfg.mode {
        PortMode::Relaxed if cfg.a_width > crate::config::NATIVE_A_WIDTH => Some(format!(
            "relaxed port mode: A port widened to {} bits (native {})",
            cfg.a_width,
            crate::config::NATIVE_A_WIDTH
        )),
        _ => None,
    }
}
