//! Shift-add decomposition of signed parameters.
//!
//! Every nonzero magnitude factors uniquely as `2^s · (1 + 2^n · core)` with
//! the smallest possible core: `s` takes all trailing zeros and `n` takes the
//! trailing zeros of the remaining odd part minus one. A parameter whose core
//! already lies in the approximable set {0, 1, 3, 5, 7} multiplies exactly on
//! the packed datapath; everything else is replaced by the nearest such
//! magnitude when approximated.

use crate::config::DspConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Cores the packed datapath supports directly.
pub const APPROX_CORES: [u32; 5] = [0, 1, 3, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(value: i64) -> Sign {
        if value < 0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn apply(self, magnitude: i64) -> i64 {
        match self {
            Sign::Positive => magnitude,
            Sign::Negative => -magnitude,
        }
    }
}

/// One parameter in decomposed form: `sign · 2^shift · (1 + 2^inner_shift · core)`,
/// or zero when `is_zero` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decomposition {
    pub sign: Sign,
    pub core: u32,
    pub inner_shift: u32,
    pub shift: u32,
    pub is_zero: bool,
}

impl Decomposition {
    pub const ZERO: Decomposition = Decomposition {
        sign: Sign::Positive,
        core: 0,
        inner_shift: 0,
        shift: 0,
        is_zero: true,
    };

    pub fn magnitude(&self) -> u32 {
        if self.is_zero {
            0
        } else {
            (1 + (self.core << self.inner_shift)) << self.shift
        }
    }

    pub fn value(&self) -> i64 {
        self.sign.apply(i64::from(self.magnitude()))
    }

    /// True when the core needs no approximation.
    pub fn is_exact(&self) -> bool {
        self.is_zero || APPROX_CORES.contains(&self.core)
    }

    /// Bits the core occupies in the packed word (0 for a zero core).
    pub fn core_bits(&self) -> u32 {
        if self.is_zero || self.core == 0 {
            0
        } else {
            32 - self.core.leading_zeros()
        }
    }
}

/// Decompose a positive magnitude with the minimal core. Accepts the full
/// unsigned parameter span 1..2^c; magnitudes above 2^(c-1) cannot be
/// approximated but still decompose exactly.
pub fn manipulate(magnitude: u32, cfg: &DspConfig) -> Result<Decomposition> {
    let limit = (1u32 << cfg.param_bits) - 1;
    if magnitude == 0 || magnitude > limit {
        return Err(Error::MagnitudeOutOfRange {
            value: i64::from(magnitude),
            limit,
        });
    }
    let shift = magnitude.trailing_zeros();
    let rest = (magnitude >> shift) - 1;
    let (inner_shift, core) = if rest == 0 {
        (0, 0)
    } else {
        let n = rest.trailing_zeros();
        (n, rest >> n)
    };
    Ok(Decomposition {
        sign: Sign::Positive,
        core,
        inner_shift,
        shift,
        is_zero: false,
    })
}

/// Decompose a signed c-bit parameter. Zero gets the dedicated zero form and
/// -2^(c-1) decomposes through magnitude 2^(c-1).
pub fn decompose(value: i64, cfg: &DspConfig) -> Result<Decomposition> {
    cfg.check_param(value)?;
    if value == 0 {
        return Ok(Decomposition::ZERO);
    }
    let mut d = manipulate(value.unsigned_abs() as u32, cfg)?;
    d.sign = Sign::of(value);
    Ok(d)
}

/// All exactly-representable magnitudes in 1..=2^(c-1), ascending.
pub fn representable_magnitudes(cfg: &DspConfig) -> Vec<u32> {
    let limit = cfg.max_magnitude();
    let mut out: Vec<u32> = (1..=limit)
        .filter(|&w| manipulate(w, cfg).map(|d| d.is_exact()).unwrap_or(false))
        .collect();
    out.sort_unstable();
    out
}

/// Replace the magnitude by the nearest exactly-representable one; ties go to
/// the larger magnitude. Zero and already-exact decompositions pass through.
pub fn approximate(d: &Decomposition, cfg: &DspConfig) -> Decomposition {
    if d.is_exact() && d.magnitude() <= cfg.max_magnitude() {
        return *d;
    }
    let w = i64::from(d.magnitude());
    let mut best: Option<(i64, u32)> = None;
    for r in representable_magnitudes(cfg) {
        let dist = (i64::from(r) - w).abs();
        let better = match best {
            None => true,
            Some((bd, bm)) => dist < bd || (dist == bd && r > bm),
        };
        if better {
            best = Some((dist, r));
        }
    }
    let magnitude = best.expect("representable set is never empty").1;
    let mut a = manipulate(magnitude, cfg).expect("representable magnitude decomposes");
    a.sign = d.sign;
    a
}

/// Value-level convenience: signed c-bit value in, nearest exact value out.
/// The result can be +2^(c-1) (magnitude tie resolved upward).
pub fn approximate_value(value: i64, cfg: &DspConfig) -> Result<i64> {
    let d = decompose(value, cfg)?;
    Ok(approximate(&d, cfg).value())
}
