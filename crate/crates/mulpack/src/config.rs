use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Native DSP48E1 port widths: 25x18 multiplier, 48-bit accumulator path.
pub const NATIVE_A_WIDTH: u32 = 25;
pub const NATIVE_B_WIDTH: u32 = 18;
pub const NATIVE_ACC_WIDTH: u32 = 48;

/// Whether packed operands must fit the native DSP48E1 ports, or the A port
/// may widen to hold every packed word for the chosen lane count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortMode {
    Strict,
    Relaxed,
}

/// Shape of one packed multiplier pass: input width, parameter width, lane
/// count and the port budget the packed words must fit into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DspConfig {
    /// Signed input width in bits (v).
    pub input_bits: u32,
    /// Signed parameter width in bits (c).
    pub param_bits: u32,
    /// Independent products per DSP pass (k).
    pub lanes: usize,
    pub mode: PortMode,
    pub a_width: u32,
    pub b_width: u32,
    pub acc_width: u32,
}

/// Mode used when none is requested: native ports carry the 8-bit shape as
/// is, while the narrower shapes need the widened A port to pack at all.
pub fn default_mode(input_bits: u32) -> PortMode {
    if input_bits == 8 {
        PortMode::Strict
    } else {
        PortMode::Relaxed
    }
}

fn lanes_for(input_bits: u32) -> Result<usize> {
    match input_bits {
        8 => Ok(3),
        6 => Ok(4),
        4 => Ok(6),
        bits => Err(Error::UnsupportedInputBits { bits }),
    }
}

impl DspConfig {
    pub fn new(input_bits: u32, param_bits: u32, mode: PortMode) -> Result<Self> {
        let lanes = lanes_for(input_bits)?;
        if !matches!(param_bits, 4 | 6 | 8) {
            return Err(Error::UnsupportedParamBits { bits: param_bits });
        }
        let a_width = match mode {
            PortMode::Strict => NATIVE_A_WIDTH,
            // Widened so every packed word of approximated cores fits the
            // port wires: (k-1) full slots plus 3 core bits for the top lane.
            PortMode::Relaxed => {
                NATIVE_A_WIDTH.max((lanes as u32 - 1) * (input_bits + 3) + 3)
            }
        };
        Ok(DspConfig {
            input_bits,
            param_bits,
            lanes,
            mode,
            a_width,
            b_width: NATIVE_B_WIDTH,
            acc_width: NATIVE_ACC_WIDTH,
        })
    }

    /// Same width for inputs and parameters, the usual deployment shape.
    pub fn symmetric(bits: u32, mode: PortMode) -> Result<Self> {
        Self::new(bits, bits, mode)
    }

    /// Bit distance between adjacent lanes of the packed operand and product.
    pub fn lane_slot(&self) -> u32 {
        self.input_bits + 3
    }

    /// Total core-bit budget a tuple may spend and still pack: limited by the
    /// signed A port ((k-1)·v spacing + cores + sign bit) and by the
    /// accumulator (k lanes of v + core bits each).
    pub fn core_budget(&self) -> u32 {
        let k = self.lanes as u32;
        let port = self.a_width - 1 - (k - 1) * self.input_bits;
        let acc = self.acc_width - k * self.input_bits;
        port.min(acc)
    }

    /// Dictionary address width: 13 bits for 8-bit parameters, 14 otherwise.
    pub fn address_width(&self) -> u32 {
        if self.param_bits == 8 {
            13
        } else {
            14
        }
    }

    /// One stored index word: address plus one sign bit per lane.
    pub fn index_bits(&self) -> u32 {
        self.address_width() + self.lanes as u32
    }

    pub fn rom_capacity(&self) -> usize {
        1usize << self.address_width()
    }

    /// Largest decomposable magnitude, 2^(c-1); the value -2^(c-1) maps to it.
    pub fn max_magnitude(&self) -> u32 {
        1u32 << (self.param_bits - 1)
    }

    /// Inclusive signed input range.
    pub fn input_range(&self) -> (i64, i64) {
        let half = 1i64 << (self.input_bits - 1);
        (-half, half - 1)
    }

    /// Inclusive signed parameter range.
    pub fn param_range(&self) -> (i64, i64) {
        let half = 1i64 << (self.param_bits - 1);
        (-half, half - 1)
    }

    pub fn check_input(&self, value: i64) -> Result<()> {
        let (lo, hi) = self.input_range();
        if value < lo || value > hi {
            return Err(Error::InputOutOfRange {
                value,
                bits: self.input_bits,
            });
        }
        Ok(())
    }

    pub fn check_param(&self, value: i64) -> Result<()> {
        let (lo, hi) = self.param_range();
        if value < lo || value > hi {
            return Err(Error::ParamOutOfRange {
                value,
                bits: self.param_bits,
            });
        }
        Ok(())
    }
}
