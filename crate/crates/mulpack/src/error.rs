use thiserror::Error;

/// Errors shared across the packing, emulation, codec and simulator layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported input width {bits} (expected 4, 6 or 8)")]
    UnsupportedInputBits { bits: u32 },

    #[error("unsupported parameter width {bits} (expected 4, 6 or 8)")]
    UnsupportedParamBits { bits: u32 },

    #[error("magnitude {value} outside 1..{limit}")]
    MagnitudeOutOfRange { value: i64, limit: u32 },

    #[error("value {value} outside signed {bits}-bit parameter range")]
    ParamOutOfRange { value: i64, bits: u32 },

    #[error("input {value} outside signed {bits}-bit range")]
    InputOutOfRange { value: i64, bits: u32 },

    #[error("core {core} has no mask (approximated cores are 0, 1, 3, 5, 7)")]
    MaskUndefined { core: u32 },

    #[error("shift {shift} exceeds the {available} trailing zero bits of magnitude {magnitude}")]
    ShiftExceedsTrailingZeros {
        shift: u32,
        available: u32,
        magnitude: u32,
    },

    #[error("sign-extension window {window} narrower than parameter width {param_bits}")]
    WindowTooNarrow { window: u32, param_bits: u32 },

    #[error("tuple has {got} lanes, config expects {expected}")]
    LaneCountMismatch { expected: usize, got: usize },

    #[error("{port} port value {value:#x} exceeds {width}-bit capacity")]
    PortOverflow { port: char, value: u64, width: u32 },

    #[error("partial sum {value} overflows signed {width}-bit accumulator")]
    PsumOverflow { value: i64, width: u32 },

    #[error("ROM address {address} out of range (entries: {entries})")]
    AddressOutOfRange { address: u32, entries: usize },

    #[error("empty symbol stream")]
    EmptyStream,

    #[error("bad magic bytes (expected {expected:?})")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {version}")]
    UnsupportedVersion { version: u8 },

    #[error("malformed header: {reason}")]
    MalformedHeader { reason: String },

    #[error("payload truncated: expected {expected} bytes, found {got}")]
    Truncated { expected: usize, got: usize },

    #[error("count mismatch: expected {expected}, found {got}")]
    CountMismatch { expected: u64, got: u64 },

    #[error("shape {shape:?} does not match {got} elements")]
    ShapeMismatch { shape: Vec<usize>, got: usize },

    #[error("matrix dimensions incompatible: {left_rows}x{left_cols} times {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("convolution geometry yields non-positive output dims ({out_h}x{out_w})")]
    BadConvGeometry { out_h: i64, out_w: i64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
