//! Packing k decomposed parameters into the operands of one DSP pass.
//!
//! The multiplier sees the input's v-bit pattern zero-extended on the B port
//! and the k cores stacked at (v+3)-bit slots on the A port. Sign handling
//! for negative inputs rides in on the accumulator port: each lane gets a
//! correction word that simultaneously completes the arithmetic shift and
//! fills the slot so negative fields wrap without touching the lane above.

use crate::config::DspConfig;
use crate::error::{Error, Result};
use crate::manipulate::{approximate, decompose, Decomposition, Sign};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Mask paired with an approximable core: mask + core = 7, so the three core
/// bits of a lane always sum to a full slot with their mask.
pub fn core_mask(core: u32) -> Result<u64> {
    match core {
        0 | 1 | 3 | 5 | 7 => Ok(u64::from(7 - core)),
        _ => Err(Error::MaskUndefined { core }),
    }
}

/// k decomposed parameters sharing one input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamTuple {
    pub lanes: Vec<Decomposition>,
}

impl ParamTuple {
    pub fn new(lanes: Vec<Decomposition>, cfg: &DspConfig) -> Result<Self> {
        if lanes.len() != cfg.lanes {
            return Err(Error::LaneCountMismatch {
                expected: cfg.lanes,
                got: lanes.len(),
            });
        }
        Ok(ParamTuple { lanes })
    }

    pub fn from_values(values: &[i64], cfg: &DspConfig) -> Result<Self> {
        let lanes = values
            .iter()
            .map(|&v| decompose(v, cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::new(lanes, cfg)
    }

    pub fn magnitudes(&self) -> Vec<u32> {
        self.lanes.iter().map(|d| d.magnitude()).collect()
    }

    pub fn values(&self) -> Vec<i64> {
        self.lanes.iter().map(|d| d.value()).collect()
    }

    pub fn is_approximated(&self) -> bool {
        self.lanes.iter().all(|d| d.is_exact())
    }
}

/// A-port bits the tuple needs: (k-1) full slots of lane spacing, the core
/// bits themselves, and the port sign bit.
pub fn required_port_bits(t: &ParamTuple, cfg: &DspConfig) -> u32 {
    let spacing = (cfg.lanes as u32 - 1) * cfg.input_bits;
    spacing + t.lanes.iter().map(|d| d.core_bits()).sum::<u32>() + 1
}

/// Accumulator bits the k product fields need side by side.
pub fn required_acc_bits(t: &ParamTuple, cfg: &DspConfig) -> u32 {
    t.lanes
        .iter()
        .map(|d| cfg.input_bits + d.core_bits())
        .sum()
}

pub fn is_feasible(t: &ParamTuple, cfg: &DspConfig) -> bool {
    required_port_bits(t, cfg) <= cfg.a_width && required_acc_bits(t, cfg) <= cfg.acc_width
}

/// Bray-Curtis dissimilarity over magnitude vectors as an exact rational:
/// (sum of absolute differences, sum of both totals).
pub fn bray_curtis(u: &[u32], w: &[u32]) -> (u64, u64) {
    let num = u
        .iter()
        .zip(w)
        .map(|(&a, &b)| u64::from(a.abs_diff(b)))
        .sum();
    let den = u.iter().chain(w).map(|&x| u64::from(x)).sum();
    (num, den)
}

pub fn bc_cmp(a: (u64, u64), b: (u64, u64)) -> Ordering {
    // a.0/a.1 vs b.0/b.1 with zero denominators treated as zero distance
    let left = u128::from(a.0) * u128::from(b.1);
    let right = u128::from(b.0) * u128::from(a.1);
    left.cmp(&right)
}

/// Core-bit cost of a magnitude (0 stays free).
fn magnitude_bits(m: u32, cfg: &DspConfig) -> u32 {
    if m == 0 {
        0
    } else {
        crate::manipulate::manipulate(m, cfg)
            .map(|d| d.core_bits())
            .unwrap_or(u32::MAX)
    }
}

/// Replace an un-packable tuple with the closest packable one under
/// Bray-Curtis distance over magnitudes; ties resolve to the
/// lexicographically smallest magnitude vector. Signs and zero lanes are
/// preserved positionally; a lane promoted from zero comes back positive.
pub fn fine_tune(t: &ParamTuple, cfg: &DspConfig) -> ParamTuple {
    if is_feasible(t, cfg) {
        return t.clone();
    }
    let u = t.magnitudes();
    let budget = cfg.core_budget();
    let max_mag = cfg.max_magnitude();
    let bits: Vec<u32> = (0..=max_mag).map(|m| magnitude_bits(m, cfg)).collect();

    let best = search_replacement(&u, &bits, budget, max_mag);

    let lanes = t
        .lanes
        .iter()
        .zip(best)
        .map(|(orig, m)| {
            if m == 0 {
                return Decomposition::ZERO;
            }
            let mut d = crate::manipulate::manipulate(m, cfg).expect("candidate in range");
            if !orig.is_zero {
                d.sign = orig.sign;
            }
            d
        })
        .collect();
    ParamTuple { lanes }
}

/// Exact argmin over every magnitude vector whose summed core bits fit the
/// budget. A cheap per-lane dynamic program finds a feasible seed of minimal
/// L1 distance; the seed's distance bounds how far any better candidate can
/// stray per lane, which keeps the exhaustive product walk small.
fn search_replacement(u: &[u32], bits: &[u32], budget: u32, max_mag: u32) -> Vec<u32> {
    let k = u.len();
    let max_bl = 8usize;

    // cost[i][b]: smallest |u_i - m| over magnitudes m needing at most b bits
    let mut cost = vec![vec![u32::MAX; max_bl + 1]; k];
    let mut pick = vec![vec![0u32; max_bl + 1]; k];
    for i in 0..k {
        for m in 0..=max_mag {
            let b = bits[m as usize];
            if b as usize > max_bl {
                continue;
            }
            let d = u[i].abs_diff(m);
            for bb in b as usize..=max_bl {
                if d < cost[i][bb] || (d == cost[i][bb] && m < pick[i][bb]) {
                    cost[i][bb] = d;
                    pick[i][bb] = m;
                }
            }
        }
    }

    // dp over lanes: minimal total L1 within the bit budget, with choices
    let budget = budget as usize;
    let mut dp = vec![u64::MAX; budget + 1];
    dp[0] = 0;
    let mut dp_next = vec![u64::MAX; budget + 1];
    let mut choice = vec![vec![usize::MAX; budget + 1]; k];
    for i in 0..k {
        for v in dp_next.iter_mut() {
            *v = u64::MAX;
        }
        for used in 0..=budget {
            if dp[used] == u64::MAX {
                continue;
            }
            for b in 0..=max_bl.min(budget - used) {
                if cost[i][b] == u32::MAX {
                    continue;
                }
                let total = dp[used] + u64::from(cost[i][b]);
                let slot = used + b;
                if total < dp_next[slot] {
                    dp_next[slot] = total;
                    choice[i][slot] = used;
                }
            }
        }
        std::mem::swap(&mut dp, &mut dp_next);
    }
    let (mut at, _) = dp
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .expect("budget row non-empty");
    let mut seed = vec![0u32; k];
    for i in (0..k).rev() {
        let prev = choice[i][at];
        debug_assert!(prev != usize::MAX);
        let b = at - prev;
        seed[i] = pick[i][b];
        at = prev;
    }

    let su: u64 = u.iter().map(|&x| u64::from(x)).sum();
    let seed_bc = bray_curtis(u, &seed);
    // Any candidate at least as close satisfies
    // L1 <= 2·S_u·num / (den - num); cap the bound when it degenerates.
    let l1_cap: u64 = u
        .iter()
        .map(|&x| u64::from(x.max(max_mag - x)))
        .sum::<u64>();
    let l1_max = if seed_bc.1 > seed_bc.0 && seed_bc.0 > 0 {
        (2 * su * seed_bc.0 / (seed_bc.1 - seed_bc.0)).min(l1_cap)
    } else if seed_bc.0 == 0 {
        0
    } else {
        l1_cap
    };

    // per-lane candidate magnitudes within the deviation bound
    let cands: Vec<Vec<u32>> = (0..k)
        .map(|i| {
            (0..=max_mag)
                .filter(|&m| {
                    bits[m as usize] as usize <= max_bl
                        && u64::from(u[i].abs_diff(m)) <= l1_max
                })
                .collect()
        })
        .collect();

    let mut best = seed.clone();
    let mut best_bc = seed_bc;
    let mut current = vec![0u32; k];
    walk(
        0,
        0,
        0,
        u,
        bits,
        budget as u32,
        l1_max,
        &cands,
        &mut current,
        &mut best,
        &mut best_bc,
    );
    best
}

#[allow(clippy::too_many_arguments)]
fn walk(
    lane: usize,
    used_bits: u32,
    used_l1: u64,
    u: &[u32],
    bits: &[u32],
    budget: u32,
    l1_max: u64,
    cands: &[Vec<u32>],
    current: &mut Vec<u32>,
    best: &mut Vec<u32>,
    best_bc: &mut (u64, u64),
) {
    if lane == u.len() {
        let bc = bray_curtis(u, current);
        match bc_cmp(bc, *best_bc) {
            Ordering::Less => {
                *best = current.clone();
                *best_bc = bc;
            }
            Ordering::Equal => {
                if current.as_slice() < best.as_slice() {
                    *best = current.clone();
                }
            }
            Ordering::Greater => {}
        }
        return;
    }
    for &m in &cands[lane] {
        let b = bits[m as usize];
        if used_bits + b > budget {
            continue;
        }
        let l1 = used_l1 + u64::from(u[lane].abs_diff(m));
        if l1 > l1_max {
            continue;
        }
        current[lane] = m;
        walk(
            lane + 1,
            used_bits + b,
            l1,
            u,
            bits,
            budget,
            l1_max,
            cands,
            current,
            best,
            best_bc,
        );
    }
}

/// Approximate every lane in place.
pub fn approximate_tuple(t: &ParamTuple, cfg: &DspConfig) -> ParamTuple {
    ParamTuple {
        lanes: t.lanes.iter().map(|d| approximate(d, cfg)).collect(),
    }
}

/// Per-lane accumulator-port correction for one input: the arithmetic shift
/// of the input by the inner shift, plus, for negative inputs, the masked
/// sign block that tops the lane's slot up to its modulus.
pub fn sign_extension(i_val: i64, core: u32, inner_shift: u32, cfg: &DspConfig) -> Result<u64> {
    cfg.check_input(i_val)?;
    let mask = core_mask(core)?;
    let shifted = i_val >> inner_shift; // arithmetic: keeps the sign
    let correction = if i_val < 0 {
        (mask + 1) << cfg.input_bits
    } else {
        0
    };
    Ok((shifted + correction as i64) as u64)
}

/// Correction field for the exact (un-approximated) route with an explicit
/// outer shift: the window's all-ones value minus the shifted odd part,
/// reduced to the parameter window. Returns the raw field; it sits directly
/// above the surviving input bits in the accumulator word.
pub fn exact_sign_extension(
    i_val: i64,
    magnitude: u32,
    shift: u32,
    cfg: &DspConfig,
    window: u32,
) -> Result<u64> {
    cfg.check_input(i_val)?;
    if window < cfg.param_bits {
        return Err(Error::WindowTooNarrow {
            window,
            param_bits: cfg.param_bits,
        });
    }
    let available = magnitude.trailing_zeros();
    if shift > available {
        return Err(Error::ShiftExceedsTrailingZeros {
            shift,
            available,
            magnitude,
        });
    }
    if i_val >= 0 {
        return Ok(0);
    }
    let odd = u64::from(magnitude >> shift);
    let modulus = 1u64 << (cfg.param_bits - shift);
    Ok(((1u64 << (window - shift)) - odd) % modulus)
}

/// Full single-lane multiplication over the exact route. Correct for every
/// magnitude in 1..2^c, approximable or not.
pub fn exact_lane_value(
    i_val: i64,
    magnitude: u32,
    shift: u32,
    cfg: &DspConfig,
    window: u32,
) -> Result<i64> {
    let x = exact_sign_extension(i_val, magnitude, shift, cfg, window)?;
    let odd = magnitude >> shift;
    let rest = odd - 1;
    let inner = if rest == 0 { 0 } else { rest.trailing_zeros() };
    let core = rest >> inner;

    let v = cfg.input_bits;
    if inner > v {
        // only reachable with parameters wider than the input word; the
        // correction below concatenates above input bits that do not exist
        return Err(Error::WindowTooNarrow {
            window: v,
            param_bits: cfg.param_bits,
        });
    }
    let iu = i_val.rem_euclid(1i64 << v) as u64;
    let c_lane = (x << (v - inner)) + (iu >> inner);
    let p = u64::from(core) * iu + c_lane;

    let field_bits = v + cfg.param_bits - shift - inner;
    let field = p & ((1u64 << field_bits) - 1);
    let signed = sign_interpret(field, field_bits);
    let low = i_val.rem_euclid(1i64 << inner);
    Ok(((signed << inner) + low) << shift)
}

fn sign_interpret(field: u64, bits: u32) -> i64 {
    let half = 1u64 << (bits - 1);
    if field >= half {
        field as i64 - (1i64 << bits)
    } else {
        field as i64
    }
}

/// Shift pair one lane applies when its field is pulled back out: the inner
/// shift restores the bits folded into the field, the outer shift restores
/// the even factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneShift {
    pub inner: u32,
    pub outer: u32,
}

/// Operand words for one packed DSP pass plus the per-lane recipe needed to
/// interpret the product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DspOperands {
    pub a_word: u64,
    pub b_word: i64,
    pub c_word: u64,
    pub lane_shifts: Vec<LaneShift>,
    pub lane_signs: Vec<Sign>,
    pub lane_zero: Vec<bool>,
}

/// Stack the cores of an approximated tuple at slot spacing.
pub fn packed_a_word(t: &ParamTuple, cfg: &DspConfig) -> Result<u64> {
    let slot = cfg.lane_slot();
    let mut word = 0u64;
    for (i, d) in t.lanes.iter().enumerate() {
        if d.is_zero {
            continue;
        }
        core_mask(d.core)?;
        word |= u64::from(d.core) << (slot * i as u32);
    }
    Ok(word)
}

pub fn build_operands(t: &ParamTuple, i_val: i64, cfg: &DspConfig) -> Result<DspOperands> {
    if t.lanes.len() != cfg.lanes {
        return Err(Error::LaneCountMismatch {
            expected: cfg.lanes,
            got: t.lanes.len(),
        });
    }
    cfg.check_input(i_val)?;
    let slot = cfg.lane_slot();
    let a_word = packed_a_word(t, cfg)?;
    let mut c_word = 0u64;
    for (i, d) in t.lanes.iter().enumerate() {
        if d.is_zero {
            continue;
        }
        let sex = sign_extension(i_val, d.core, d.inner_shift, cfg)?;
        c_word += sex << (slot * i as u32);
    }
    Ok(DspOperands {
        a_word,
        b_word: i_val,
        c_word,
        lane_shifts: t
            .lanes
            .iter()
            .map(|d| LaneShift {
                inner: d.inner_shift,
                outer: d.shift,
            })
            .collect(),
        lane_signs: t.lanes.iter().map(|d| d.sign).collect(),
        lane_zero: t.lanes.iter().map(|d| d.is_zero).collect(),
    })
}

/// The packed word travels the A port as a bit pattern, so it only has to
/// fit the wires; strict mode keeps the native 25, relaxed mode widens them.
pub fn check_port_fit(a_word: u64, cfg: &DspConfig) -> Result<()> {
    if a_word >> cfg.a_width != 0 {
        return Err(Error::PortOverflow {
            port: 'A',
            value: a_word,
            width: cfg.a_width,
        });
    }
    Ok(())
}

