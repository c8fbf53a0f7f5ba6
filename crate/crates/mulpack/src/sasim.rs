//! Weight-stationary array simulator: parameter tuples are packed once into
//! ROM and index artifacts, then every multiply runs through the emulated
//! DSP datapath while plain integer references check the results.

use serde::{Deserialize, Serialize};

use crate::config::DspConfig;
use crate::dspemu::{dsp_execute, extract_lanes};
use crate::error::{Error, Result};
use crate::packer::{approximate_tuple, build_operands, fine_tune, ParamTuple};
use crate::romdict::{
    decode_stream, encode_stream, index_ratio_display, tuple_for_word, IndexWord, RomBuild,
    RomImage,
};

/// Dense row-major integer matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                shape: vec![rows, cols],
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.data[row * self.cols + col]
    }
}

/// Array geometry: a rows×cols grid of multiply slots, every k adjacent
/// columns sharing one emulated DSP, plus the partial-sum width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub cfg: DspConfig,
    pub psum_width: u32,
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize, cfg: DspConfig) -> Self {
        ArrayConfig {
            rows,
            cols,
            cfg,
            psum_width: 32,
        }
    }

    /// Emulated DSP blocks: each covers k adjacent columns.
    pub fn dsp_used(&self) -> u64 {
        (self.rows * self.cols.div_ceil(self.cfg.lanes)) as u64
    }

    /// One-multiply-per-DSP blocks matching the same throughput.
    pub fn dsp_baseline(&self) -> u64 {
        self.dsp_used() * self.cfg.lanes as u64
    }
}

/// Functional counters for one simulated run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub passes: u64,
    pub mults: u64,
    pub weight_loads: u64,
    pub tiles: u64,
    pub dsp_used: u64,
    pub dsp_baseline: u64,
    pub imem_bytes: u64,
    pub wmem_bytes: u64,
    pub wmem_bytes_raw: u64,
    pub pmem_bytes: u64,
    pub omem_bytes: u64,
}

/// Byte accounting for the four memory blocks. The weight memory holds index
/// words referring into the ROM, never raw parameters.
#[derive(Debug, Clone, Default)]
pub struct MemoryModel {
    pub imem_bytes: u64,
    pub wmem_words: Vec<IndexWord>,
    pub pmem_bytes: u64,
    pub omem_bytes: u64,
}

impl MemoryModel {
    /// Index-stream footprint of the weight memory.
    pub fn wmem_bytes(&self, cfg: &DspConfig) -> u64 {
        (self.wmem_words.len() as u64 * u64::from(cfg.index_bits())).div_ceil(8)
    }

    /// What the same weights would cost stored as one byte per parameter.
    pub fn wmem_bytes_raw(&self, cfg: &DspConfig) -> u64 {
        (self.wmem_words.len() * cfg.lanes) as u64
    }
}

#[derive(Debug, Clone)]
pub struct PackedRun {
    pub output: Matrix,
    pub stats: SimStats,
    pub mem: MemoryModel,
}

#[derive(Debug, Clone)]
pub struct GemmRun {
    pub output: Matrix,
    pub decoded: Matrix,
    pub stats: SimStats,
    pub mem: MemoryModel,
    pub rom: RomBuild,
    pub words: Vec<IndexWord>,
}

/// Drive a packed weight stream over the array: inputs stream row by row,
/// each tile loads its tuples once and keeps them stationary while every
/// input row passes through. Partial sums accumulate per output cell and are
/// checked against the configured width once the run is complete.
pub fn run_packed(
    a: &Matrix,
    words: &[IndexWord],
    image: &RomImage,
    out_cols: usize,
    acfg: &ArrayConfig,
) -> Result<PackedRun> {
    let cfg = &acfg.cfg;
    let k = cfg.lanes;
    let n = a.cols;
    let expected = (n * out_cols.div_ceil(k)) as u64;
    if n == 0 || words.len() % n != 0 {
        return Err(Error::CountMismatch {
            expected,
            got: words.len() as u64,
        });
    }
    let groups = words.len() / n;
    let p_pad = groups * k;
    if out_cols > p_pad || p_pad - out_cols >= k {
        return Err(Error::CountMismatch {
            expected,
            got: words.len() as u64,
        });
    }

    let mut acc = vec![0i64; a.rows * p_pad];
    let mut stats = SimStats {
        dsp_used: acfg.dsp_used(),
        dsp_baseline: acfg.dsp_baseline(),
        ..SimStats::default()
    };

    let rows_per_tile = acfg.rows.max(1);
    let groups_per_tile = acfg.cols.div_ceil(k).max(1);
    for tile_n in (0..n).step_by(rows_per_tile) {
        let tile_n_end = (tile_n + rows_per_tile).min(n);
        for tile_g in (0..groups).step_by(groups_per_tile) {
            let tile_g_end = (tile_g + groups_per_tile).min(groups);
            stats.tiles += 1;

            // load phase: tuples stay put for the whole tile
            let mut stationary = Vec::with_capacity(
                (tile_n_end - tile_n) * (tile_g_end - tile_g),
            );
            for wn in tile_n..tile_n_end {
                for g in tile_g..tile_g_end {
                    stationary.push(tuple_for_word(&words[wn * groups + g], image, cfg)?);
                    stats.weight_loads += 1;
                }
            }

            // stream phase: every input row visits the loaded tile
            for m in 0..a.rows {
                for wn in tile_n..tile_n_end {
                    let i_val = a.get(m, wn);
                    for g in tile_g..tile_g_end {
                        let tuple = &stationary
                            [(wn - tile_n) * (tile_g_end - tile_g) + (g - tile_g)];
                        let ops = build_operands(tuple, i_val, cfg)?;
                        let state = dsp_execute(ops.a_word, ops.b_word, ops.c_word, cfg)?;
                        let lanes = extract_lanes(&state, &ops, i_val, cfg);
                        for (lane, product) in lanes.iter().enumerate() {
                            acc[m * p_pad + g * k + lane] += product;
                        }
                        stats.passes += 1;
                    }
                }
            }
        }
    }
    stats.mults = stats.passes * k as u64;

    // overflow is judged on final sums so tiling order cannot matter
    let bound = 1i64 << (acfg.psum_width - 1);
    for &v in &acc {
        if v < -bound || v >= bound {
            return Err(Error::PsumOverflow {
                value: v,
                width: acfg.psum_width,
            });
        }
    }

    let mut output = Matrix::zero(a.rows, out_cols);
    for m in 0..a.rows {
        for p in 0..out_cols {
            output.data[m * out_cols + p] = acc[m * p_pad + p];
        }
    }

    let mem = MemoryModel {
        imem_bytes: (a.rows * a.cols) as u64,
        wmem_words: words.to_vec(),
        pmem_bytes: (a.rows * p_pad * 4) as u64,
        omem_bytes: (a.rows * out_cols * 4) as u64,
    };
    stats.imem_bytes = mem.imem_bytes;
    stats.wmem_bytes = mem.wmem_bytes(cfg);
    stats.wmem_bytes_raw = mem.wmem_bytes_raw(cfg);
    stats.pmem_bytes = mem.pmem_bytes;
    stats.omem_bytes = mem.omem_bytes;

    Ok(PackedRun { output, stats, mem })
}

/// Pack a parameter matrix column-group by column-group: k adjacent output
/// channels of one reduction row form one tuple.
pub fn pack_weight_matrix(
    w: &Matrix,
    capacity: usize,
    cfg: &DspConfig,
) -> Result<(Vec<IndexWord>, RomBuild, Matrix)> {
    let k = cfg.lanes;
    let groups = w.cols.div_ceil(k);
    let mut tuples = Vec::with_capacity(w.rows * groups);
    for n in 0..w.rows {
        for g in 0..groups {
            let mut vals = vec![0i64; k];
            for lane in 0..k {
                let p = g * k + lane;
                if p < w.cols {
                    vals[lane] = w.get(n, p);
                }
            }
            let t = ParamTuple::from_values(&vals, cfg)?;
            tuples.push(approximate_tuple(&fine_tune(&t, cfg), cfg));
        }
    }
    let (words, rom) = encode_stream(&tuples, capacity, cfg)?;

    let flat = decode_stream(&words, &rom.image, cfg)?;
    let mut decoded = Matrix::zero(w.rows, w.cols);
    for n in 0..w.rows {
        for p in 0..w.cols {
            decoded.data[n * w.cols + p] = flat[n * groups * k + p];
        }
    }
    Ok((words, rom, decoded))
}

/// Full GEMM path: pack the weights, then execute from the packed artifacts.
pub fn run_gemm(a: &Matrix, w: &Matrix, acfg: &ArrayConfig) -> Result<GemmRun> {
    if a.cols != w.rows {
        return Err(Error::DimensionMismatch {
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: w.rows,
            right_cols: w.cols,
        });
    }
    let (words, rom, decoded) = pack_weight_matrix(w, acfg.cfg.rom_capacity(), &acfg.cfg)?;
    let run = run_packed(a, &words, &rom.image, w.cols, acfg)?;
    Ok(GemmRun {
        output: run.output,
        decoded,
        stats: run.stats,
        mem: run.mem,
        rom,
        words,
    })
}

/// Plain integer GEMM, no packing anywhere near it.
pub fn reference_gemm(a: &Matrix, w: &Matrix) -> Result<Matrix> {
    if a.cols != w.rows {
        return Err(Error::DimensionMismatch {
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: w.rows,
            right_cols: w.cols,
        });
    }
    let mut out = Matrix::zero(a.rows, w.cols);
    for m in 0..a.rows {
        for n in 0..a.cols {
            let x = a.get(m, n);
            for p in 0..w.cols {
                out.data[m * w.cols + p] += x * w.get(n, p);
            }
        }
    }
    Ok(out)
}

/// Convolution geometry: channel-last input H×W×C_in, kernel laid out
/// kh×kw×C_in×C_out with the output channel fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub height: usize,
    pub width: usize,
    pub channels_in: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub channels_out: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn out_dims(&self) -> Result<(usize, usize)> {
        let span_h = (self.height + 2 * self.padding) as i64 - self.kernel_h as i64;
        let span_w = (self.width + 2 * self.padding) as i64 - self.kernel_w as i64;
        if self.stride == 0 || span_h < 0 || span_w < 0 {
            return Err(Error::BadConvGeometry {
                out_h: span_h,
                out_w: span_w,
            });
        }
        Ok((
            span_h as usize / self.stride + 1,
            span_w as usize / self.stride + 1,
        ))
    }

    pub fn input_len(&self) -> usize {
        self.height * self.width * self.channels_in
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.channels_in * self.channels_out
    }

    fn patch_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.channels_in
    }
}

/// Unfold padded input windows into rows, one per output position, columns
/// ordered kh, kw, then input channel to match the kernel layout.
pub fn im2col(input: &[i64], spec: &ConvSpec) -> Result<Matrix> {
    if input.len() != spec.input_len() {
        return Err(Error::ShapeMismatch {
            shape: vec![spec.height, spec.width, spec.channels_in],
            got: input.len(),
        });
    }
    let (out_h, out_w) = spec.out_dims()?;
    let mut data = Vec::with_capacity(out_h * out_w * spec.patch_len());
    for oy in 0..out_h {
        for ox in 0..out_w {
            for kh in 0..spec.kernel_h {
                for kw in 0..spec.kernel_w {
                    let y = (oy * spec.stride + kh) as i64 - spec.padding as i64;
                    let x = (ox * spec.stride + kw) as i64 - spec.padding as i64;
                    for ci in 0..spec.channels_in {
                        let inside = y >= 0
                            && y < spec.height as i64
                            && x >= 0
                            && x < spec.width as i64;
                        data.push(if inside {
                            let at = (y as usize * spec.width + x as usize)
                                * spec.channels_in
                                + ci;
                            input[at]
                        } else {
                            0
                        });
                    }
                }
            }
        }
    }
    Matrix::new(out_h * out_w, spec.patch_len(), data)
}

#[derive(Debug, Clone)]
pub struct ConvRun {
    pub output: Vec<i64>,
    pub out_h: usize,
    pub out_w: usize,
    pub decoded: Matrix,
    pub stats: SimStats,
    pub mem: MemoryModel,
    pub rom: RomBuild,
    pub words: Vec<IndexWord>,
}

/// Convolution lowered to GEMM: unfold the input, treat the kernel as a
/// patch-length × C_out parameter matrix, run the packed array.
pub fn run_conv(
    input: &[i64],
    kernel: &[i64],
    spec: &ConvSpec,
    acfg: &ArrayConfig,
) -> Result<ConvRun> {
    if kernel.len() != spec.kernel_len() {
        return Err(Error::ShapeMismatch {
            shape: vec![
                spec.kernel_h,
                spec.kernel_w,
                spec.channels_in,
                spec.channels_out,
            ],
            got: kernel.len(),
        });
    }
    let a = im2col(input, spec)?;
    let w = Matrix::new(spec.patch_len(), spec.channels_out, kernel.to_vec())?;
    let run = run_gemm(&a, &w, acfg)?;
    let (out_h, out_w) = spec.out_dims()?;
    Ok(ConvRun {
        output: run.output.data,
        out_h,
        out_w,
        decoded: run.decoded,
        stats: run.stats,
        mem: run.mem,
        rom: run.rom,
        words: run.words,
    })
}

/// Direct sliding-window convolution, the independent check for the lowered
/// path. Kernel layout matches run_conv.
pub fn reference_conv(input: &[i64], kernel: &[i64], spec: &ConvSpec) -> Result<Vec<i64>> {
    if input.len() != spec.input_len() || kernel.len() != spec.kernel_len() {
        return Err(Error::ShapeMismatch {
            shape: vec![spec.height, spec.width, spec.channels_in],
            got: input.len(),
        });
    }
    let (out_h, out_w) = spec.out_dims()?;
    let mut out = vec![0i64; out_h * out_w * spec.channels_out];
    for oy in 0..out_h {
        for ox in 0..out_w {
            for co in 0..spec.channels_out {
                let mut sum = 0i64;
                for kh in 0..spec.kernel_h {
                    for kw in 0..spec.kernel_w {
                        let y = (oy * spec.stride + kh) as i64 - spec.padding as i64;
                        let x = (ox * spec.stride + kw) as i64 - spec.padding as i64;
                        if y < 0 || y >= spec.height as i64 || x < 0 || x >= spec.width as i64
                        {
                            continue;
                        }
                        for ci in 0..spec.channels_in {
                            let iv = input
                                [(y as usize * spec.width + x as usize) * spec.channels_in + ci];
                            let wv = kernel[((kh * spec.kernel_w + kw) * spec.channels_in + ci)
                                * spec.channels_out
                                + co];
                            sum += iv * wv;
                        }
                    }
                }
                out[(oy * out_w + ox) * spec.channels_out + co] = sum;
            }
        }
    }
    Ok(out)
}

/// Static resource summary for an array shape plus the artifacts it runs.
#[derive(Debug, Clone, Serialize)]
pub struct ResourceReport {
    pub input_bits: u32,
    pub param_bits: u32,
    pub lanes: usize,
    pub rows: usize,
    pub cols: usize,
    pub dsp_used: u64,
    pub dsp_baseline: u64,
    pub dsp_reduction_display: String,
    pub index_ratio_display: String,
    pub rom_entries: usize,
    pub rom_bits: u64,
    pub crossover_words: u64,
    pub wmem_bytes: u64,
    pub wmem_bytes_raw: u64,
}

/// ROM storage cost per entry: the packed word at its occupied width plus a
/// 7-bit shift recipe per lane.
pub fn rom_bits(image: &RomImage, cfg: &DspConfig) -> u64 {
    let a_bits = u64::from((cfg.lanes as u32 - 1) * cfg.lane_slot() + 3);
    image.entries.len() as u64 * (a_bits + 7 * cfg.lanes as u64)
}

pub fn resource_report(
    acfg: &ArrayConfig,
    image: &RomImage,
    stream_words: u64,
) -> ResourceReport {
    let cfg = &acfg.cfg;
    let used = acfg.dsp_used();
    let baseline = acfg.dsp_baseline();
    let reduction = (baseline - used) * 1000 / baseline;
    let rom = rom_bits(image, cfg);
    // past this many stream words the ROM pays for itself against raw storage
    let saved_per_word = u64::from(cfg.lanes as u32 * cfg.param_bits - cfg.index_bits());
    let crossover = rom.div_ceil(saved_per_word);
    ResourceReport {
        input_bits: cfg.input_bits,
        param_bits: cfg.param_bits,
        lanes: cfg.lanes,
        rows: acfg.rows,
        cols: acfg.cols,
        dsp_used: used,
        dsp_baseline: baseline,
        dsp_reduction_display: format!("{}.{}%", reduction / 10, reduction % 10),
        index_ratio_display: index_ratio_display(cfg),
        rom_entries: image.entries.len(),
        rom_bits: rom,
        crossover_words: crossover,
        wmem_bytes: (stream_words * u64::from(cfg.index_bits())).div_ceil(8),
        wmem_bytes_raw: stream_words * cfg.lanes as u64,
    }
}
