use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mulpack::config::{default_mode, DspConfig, PortMode, NATIVE_A_WIDTH};
use mulpack::huffman;
use mulpack::io::{
    read_huffman, read_index_stream, read_params, read_rom, write_huffman, write_index_stream,
    write_outputs, write_rom,
};
use mulpack::pipeline::{pack_matrix, pack_params, Packed};
use mulpack::romdict::{index_ratio_display, IndexWord, RomImage};
use mulpack::sasim::{
    resource_report, run_packed, ArrayConfig, ConvSpec, Matrix, ResourceReport, SimStats,
};
use mulpack::verify::{lane_sweep, verify_artifacts, Mismatch, SweepReport};

#[derive(Parser)]
#[command(
    name = "mulpack",
    version,
    about = "Pack narrow signed multiplications onto shared DSP slices: build weight dictionaries, simulate the array, verify bit-exactness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pack a weight tensor into a dictionary and index stream
    Pack(PackArgs),
    /// Build only the dictionary image for a weight tensor
    RomBuild(RomBuildArgs),
    /// Run a GEMM or convolution on the simulated array
    Simulate(SimulateArgs),
    /// Entropy-code an index stream
    Compress(CompressArgs),
    /// Check packed products against plain multiplication
    Verify(VerifyArgs),
    /// Summarize resource and storage figures for packed artifacts
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Relaxed,
}

impl From<ModeArg> for PortMode {
    fn from(m: ModeArg) -> PortMode {
        match m {
            ModeArg::Strict => PortMode::Strict,
            ModeArg::Relaxed => PortMode::Relaxed,
        }
    }
}

#[derive(clap::Args)]
struct PackArgs {
    /// Weight tensor file
    #[arg(long)]
    weights: PathBuf,
    /// Output index stream
    #[arg(long)]
    indices: PathBuf,
    /// Output dictionary image
    #[arg(long)]
    rom: PathBuf,
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Dictionary row limit (defaults to the full address space)
    #[arg(long)]
    rom_capacity: Option<usize>,
    /// Write packing statistics as JSON
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct RomBuildArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    rom: PathBuf,
    #[arg(long)]
    mode: Option<ModeArg>,
    #[arg(long)]
    rom_capacity: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Input tensor: rows x cols for GEMM, height x width x channels for conv
    #[arg(long)]
    inputs: PathBuf,
    /// Weight tensor: 2-d for GEMM, 4-d kernel for conv
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Pre-packed dictionary (replay mode, with --indices)
    #[arg(long)]
    rom: Option<PathBuf>,
    /// Pre-packed index stream (replay mode, with --rom)
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Logical output columns for replay mode
    #[arg(long)]
    out_cols: Option<usize>,
    /// Output tensor file
    #[arg(long)]
    out: PathBuf,
    /// Write run statistics as JSON
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    rows: usize,
    #[arg(long, default_value_t = 12)]
    cols: usize,
    #[arg(long)]
    mode: Option<ModeArg>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 0)]
    padding: usize,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct CompressArgs {
    #[arg(long)]
    indices: PathBuf,
    /// Output entropy-coded stream
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 8)]
    bits: u32,
    #[arg(long)]
    mode: Option<ModeArg>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Audit a stored dictionary instead of sweeping
    #[arg(long)]
    rom: Option<PathBuf>,
    /// Index stream to audit alongside --rom
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Cross-check the artifacts against the original weights
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long)]
    rom: PathBuf,
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Entropy-coded stream, adds a bits-per-parameter figure
    #[arg(long)]
    compressed: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    rows: usize,
    #[arg(long, default_value_t = 12)]
    cols: usize,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Everything that determines a run, written next to the artifacts so the
/// run can be replayed byte for byte.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Option<DspConfig>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    seed: u64,
}

impl RunManifest {
    fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed,
        }
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.display().to_string());
    }

    fn output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.into(), path.display().to_string());
    }

    fn write(&self, path: Option<&PathBuf>) -> Result<()> {
        if let Some(path) = path {
            write_json(path, self)?;
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn resolve_cfg(bits: u32, mode: Option<ModeArg>) -> Result<DspConfig> {
    let mode = mode.map_or_else(|| default_mode(bits), PortMode::from);
    Ok(DspConfig::symmetric(bits, mode)?)
}

fn load_weights(path: &Path, mode: Option<ModeArg>) -> Result<(Vec<i8>, Vec<usize>, DspConfig)> {
    let (values, header) = read_params(&mut open(path)?)?;
    let cfg = resolve_cfg(header.bits, mode)?;
    Ok((values, header.shape, cfg))
}

/// Tensors with two or more dimensions pack in the array's weight layout
/// (lane tuples along the last axis, so the stream replays directly);
/// flat streams pack in plain order.
fn pack_tensor(
    values: &[i8],
    shape: &[usize],
    capacity: usize,
    cfg: &DspConfig,
) -> Result<Packed> {
    if shape.len() >= 2 {
        let cols = *shape.last().expect("non-empty shape");
        let rows = shape[..shape.len() - 1].iter().product();
        Ok(pack_matrix(values, rows, cols, capacity, cfg)?)
    } else {
        Ok(pack_params(values, capacity, cfg)?)
    }
}

fn print_pack_summary(packed: &Packed) {
    let s = &packed.stats;
    println!(
        "tuples: {} → {} → {}",
        s.distinct_original, s.distinct_tuned, s.distinct_approximated
    );
    println!(
        "{} parameters in {} tuples; {} dictionary rows, {} merged away",
        s.params,
        s.tuples,
        s.rom_entries,
        s.merges
    );
    println!(
        "approximation error: mean |d| {:.4}, max {}",
        s.approx_error.mean_abs, s.approx_error.max_abs
    );
    for (delta, count) in &s.approx_error.counts {
        println!("  {delta:+4}: {count}");
    }
    println!(
        "decoded error: mean |d| {:.4}, max {}",
        s.decode_error.mean_abs, s.decode_error.max_abs
    );
}

fn cmd_pack(args: PackArgs) -> Result<ExitCode> {
    let (values, shape, cfg) = load_weights(&args.weights, args.mode)?;
    let capacity = args.rom_capacity.unwrap_or_else(|| cfg.rom_capacity());
    let packed = pack_tensor(&values, &shape, capacity, &cfg)?;

    write_rom(&mut create(&args.rom)?, &packed.rom.image, &cfg)?;
    write_index_stream(&mut create(&args.indices)?, &packed.words, &cfg)?;
    if let Some(report) = &args.report {
        write_json(report, &packed.stats)?;
    }
    print_pack_summary(&packed);

    let mut manifest = RunManifest::new("pack", args.seed);
    manifest.config = Some(cfg);
    manifest.input("weights", &args.weights);
    manifest.output("rom", &args.rom);
    manifest.output("indices", &args.indices);
    manifest.write(args.manifest.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_rom_build(args: RomBuildArgs) -> Result<ExitCode> {
    let (values, shape, cfg) = load_weights(&args.weights, args.mode)?;
    let capacity = args.rom_capacity.unwrap_or_else(|| cfg.rom_capacity());
    let packed = pack_tensor(&values, &shape, capacity, &cfg)?;
    write_rom(&mut create(&args.rom)?, &packed.rom.image, &cfg)?;
    println!(
        "{} dictionary rows ({} merged away)",
        packed.stats.rom_entries, packed.stats.merges
    );

    let mut manifest = RunManifest::new("rom-build", args.seed);
    manifest.config = Some(cfg);
    manifest.input("weights", &args.weights);
    manifest.output("rom", &args.rom);
    manifest.write(args.manifest.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn matrix_from_tensor(values: &[i8], shape: &[usize]) -> Result<Matrix> {
    if shape.len() != 2 {
        bail!("expected a 2-d tensor, shape was {shape:?}");
    }
    Ok(Matrix::new(
        shape[0],
        shape[1],
        values.iter().map(|&v| i64::from(v)).collect(),
    )?)
}

fn write_output_tensor(path: &Path, data: &[i64], shape: &[usize]) -> Result<()> {
    let narrowed: Vec<i32> = data.iter().map(|&v| v as i32).collect();
    write_outputs(&mut create(path)?, &narrowed, shape)?;
    Ok(())
}

fn print_sim_summary(stats: &SimStats) {
    println!(
        "passes {}, multiplications {}, weight loads {}, tiles {}",
        stats.passes, stats.mults, stats.weight_loads, stats.tiles
    );
    println!(
        "DSP {} vs {} unpacked; wmem {} bytes packed ({} raw)",
        stats.dsp_used, stats.dsp_baseline, stats.wmem_bytes, stats.wmem_bytes_raw
    );
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let (inputs, in_header) = read_params(&mut open(&args.inputs)?)?;
    let in_shape = in_header.shape;
    let input_vals: Vec<i64> = inputs.iter().map(|&v| i64::from(v)).collect();

    let mut manifest = RunManifest::new("simulate", args.seed);
    manifest.input("inputs", &args.inputs);
    manifest.output("out", &args.out);

    let (output, shape, stats, cfg) = match (&args.weights, &args.rom, &args.indices) {
        (Some(weights), None, None) => {
            let (wvals, w_shape, cfg) = load_weights(weights, args.mode)?;
            manifest.input("weights", weights);
            let acfg = ArrayConfig::new(args.rows, args.cols, cfg.clone());
            if w_shape.len() == 4 {
                if in_shape.len() != 3 {
                    bail!("conv input must be 3-d, shape was {in_shape:?}");
                }
                let spec = ConvSpec {
                    height: in_shape[0],
                    width: in_shape[1],
                    channels_in: in_shape[2],
                    kernel_h: w_shape[0],
                    kernel_w: w_shape[1],
                    channels_out: w_shape[3],
                    stride: args.stride,
                    padding: args.padding,
                };
                if w_shape[2] != in_shape[2] {
                    bail!(
                        "kernel expects {} input channels, tensor has {}",
                        w_shape[2],
                        in_shape[2]
                    );
                }
                let kernel: Vec<i64> = wvals.iter().map(|&v| i64::from(v)).collect();
                let run = mulpack::sasim::run_conv(&input_vals, &kernel, &spec, &acfg)?;
                let shape = vec![run.out_h, run.out_w, spec.channels_out];
                (run.output, shape, run.stats, cfg)
            } else {
                let a = matrix_from_tensor(&inputs, &in_shape)?;
                let w = matrix_from_tensor(&wvals, &w_shape)?;
                let run = mulpack::sasim::run_gemm(&a, &w, &acfg)?;
                let shape = vec![run.output.rows, run.output.cols];
                (run.output.data, shape, run.stats, cfg)
            }
        }
        (None, Some(rom), Some(indices)) => {
            let (image, cfg) = read_rom(&mut open(rom)?)?;
            let (words, _) = read_index_stream(&mut open(indices)?)?;
            manifest.input("rom", rom);
            manifest.input("indices", indices);
            let out_cols = args
                .out_cols
                .context("--out-cols is required when replaying packed artifacts")?;
            let a = matrix_from_tensor(&inputs, &in_shape)?;
            let acfg = ArrayConfig::new(args.rows, args.cols, cfg.clone());
            let run = run_packed(&a, &words, &image, out_cols, &acfg)?;
            let shape = vec![run.output.rows, run.output.cols];
            (run.output.data, shape, run.stats, cfg)
        }
        _ => bail!("pass either --weights, or --rom with --indices"),
    };

    write_output_tensor(&args.out, &output, &shape)?;
    if let Some(stats_path) = &args.stats {
        write_json(stats_path, &stats)?;
    }
    print_sim_summary(&stats);

    manifest.config = Some(cfg);
    manifest.write(args.manifest.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn param_bits_for_lanes(lanes: usize) -> Result<u32> {
    match lanes {
        3 => Ok(8),
        4 => Ok(6),
        6 => Ok(4),
        _ => bail!("unsupported lane count {lanes} in index stream"),
    }
}

fn cmd_compress(args: CompressArgs) -> Result<ExitCode> {
    let (words, header) = read_index_stream(&mut open(&args.indices)?)?;
    let symbols: Vec<u32> = words.iter().map(|w| w.to_bits(header.k)).collect();
    let encoded = huffman::encode(&symbols)?;
    let decoded = huffman::decode(&encoded)?;
    if decoded != symbols {
        bail!("entropy codec failed its own round trip");
    }
    write_huffman(&mut create(&args.out)?, &encoded)?;

    let raw_bits = param_bits_for_lanes(header.k)?;
    let per_word = encoded.bits_per_symbol();
    println!(
        "{} words at {:.2} bits each ({:.2} bits/parameter, raw {}); table {} bits",
        encoded.symbol_count,
        per_word,
        per_word / header.k as f64,
        raw_bits,
        encoded.table_bits()
    );

    let mut manifest = RunManifest::new("compress", args.seed);
    manifest.input("indices", &args.indices);
    manifest.output("out", &args.out);
    manifest.write(args.manifest.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn print_counterexample(m: &Mismatch) {
    println!(
        "counterexample: W={} I={} lane={} expected={} got={}",
        m.w, m.i, m.lane, m.expected, m.got
    );
}

fn finish_verify(report: &SweepReport) -> ExitCode {
    if report.passed() {
        println!("PASS, 0 mismatches");
        ExitCode::SUCCESS
    } else {
        print_counterexample(&report.mismatches[0]);
        println!("FAIL, {} mismatches", report.mismatches.len());
        ExitCode::from(1)
    }
}

/// Re-derive the whole pipeline from the original weights and demand the
/// stored artifacts match byte for byte.
fn cross_check_weights(
    values: &[i8],
    shape: &[usize],
    words: &[IndexWord],
    image: &RomImage,
    cfg: &DspConfig,
) -> Result<Option<String>> {
    let capacity = image.entries.len().max(1);
    let packed = pack_tensor(values, shape, capacity, cfg)?;
    if packed.rom.image.entries.len() != image.entries.len() {
        return Ok(Some(format!(
            "dictionary should have {} rows, found {}",
            packed.rom.image.entries.len(),
            image.entries.len()
        )));
    }
    for (addr, (want, got)) in packed
        .rom
        .image
        .entries
        .iter()
        .zip(&image.entries)
        .enumerate()
    {
        if want != got {
            return Ok(Some(format!(
                "entry {addr}: expected magnitudes {:?}, found {:?}",
                want.magnitudes(),
                got.magnitudes()
            )));
        }
    }
    if packed.words.len() != words.len() {
        return Ok(Some(format!(
            "stream should have {} words, found {}",
            packed.words.len(),
            words.len()
        )));
    }
    for (n, (want, got)) in packed.words.iter().zip(words).enumerate() {
        if want != got {
            return Ok(Some(format!(
                "word {n}: expected address {} signs {:#b}, found address {} signs {:#b}",
                want.address, want.sign_bits, got.address, got.sign_bits
            )));
        }
    }
    Ok(None)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let mut manifest = RunManifest::new("verify", args.seed);

    if let Some(rom) = &args.rom {
        let (image, cfg) = read_rom(&mut open(rom)?)?;
        manifest.input("rom", rom);
        let words = match &args.indices {
            Some(indices) => {
                manifest.input("indices", indices);
                read_index_stream(&mut open(indices)?)?.0
            }
            None => Vec::new(),
        };
        let report = verify_artifacts(&words, &image, &cfg)?;
        println!(
            "audited {} dictionary rows, {} stored words, {} packed passes",
            image.entries.len(),
            words.len(),
            report.checked
        );
        if !report.passed() {
            manifest.config = Some(cfg);
            manifest.write(args.manifest.as_ref())?;
            return Ok(finish_verify(&report));
        }
        if let Some(weights) = &args.weights {
            manifest.input("weights", weights);
            let (values, header) = read_params(&mut open(weights)?)?;
            if let Some(reason) = cross_check_weights(&values, &header.shape, &words, &image, &cfg)? {
                println!("{reason}");
                println!("FAIL, artifacts do not match the weights");
                manifest.config = Some(cfg);
                manifest.write(args.manifest.as_ref())?;
                return Ok(ExitCode::from(1));
            }
        }
        manifest.config = Some(cfg);
        manifest.write(args.manifest.as_ref())?;
        println!("PASS, 0 mismatches");
        return Ok(ExitCode::SUCCESS);
    }

    let cfg = resolve_cfg(args.bits, args.mode)?;
    let seeds = [args.seed, args.seed.wrapping_add(1), args.seed.wrapping_add(2)];
    let report = lane_sweep(&cfg, &seeds)?;
    println!(
        "swept {} packed passes over every exact {}-bit parameter",
        report.checked, cfg.param_bits
    );
    if cfg.a_width > NATIVE_A_WIDTH {
        println!(
            "port advisory: A port widened to {} bits (native {})",
            cfg.a_width, NATIVE_A_WIDTH
        );
    }
    manifest.config = Some(cfg);
    manifest.write(args.manifest.as_ref())?;
    Ok(finish_verify(&report))
}

#[derive(Serialize)]
struct FullReport {
    #[serde(flatten)]
    resource: ResourceReport,
    stream_words: u64,
    huffman_bits_per_param: Option<f64>,
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    let (image, cfg) = read_rom(&mut open(&args.rom)?)?;
    let mut manifest = RunManifest::new("report", args.seed);
    manifest.input("rom", &args.rom);

    let stream_words = match &args.indices {
        Some(indices) => {
            manifest.input("indices", indices);
            read_index_stream(&mut open(indices)?)?.0.len() as u64
        }
        None => 0,
    };
    let huffman_rate = match &args.compressed {
        Some(compressed) => {
            manifest.input("compressed", compressed);
            let encoded = read_huffman(&mut open(compressed)?)?;
            Some(encoded.bits_per_symbol() / cfg.lanes as f64)
        }
        None => None,
    };

    let acfg = ArrayConfig::new(args.rows, args.cols, cfg.clone());
    let resource = resource_report(&acfg, &image, stream_words);

    println!(
        "config: v={} c={} k={} ({}, A={} bits)",
        cfg.input_bits,
        cfg.param_bits,
        cfg.lanes,
        match cfg.mode {
            PortMode::Strict => "strict",
            PortMode::Relaxed => "relaxed",
        },
        cfg.a_width
    );
    println!(
        "index words: {} bits, {} of raw parameter storage",
        cfg.index_bits(),
        index_ratio_display(&cfg)
    );
    println!(
        "DSP {} (-{} vs {})",
        resource.dsp_used, resource.dsp_reduction_display, resource.dsp_baseline
    );
    println!(
        "dictionary: {} rows, {} bits; crossover at {} stored words",
        resource.rom_entries, resource.rom_bits, resource.crossover_words
    );
    println!(
        "stream: {} words, {} bytes packed ({} raw)",
        stream_words, resource.wmem_bytes, resource.wmem_bytes_raw
    );
    if let Some(rate) = huffman_rate {
        println!(
            "entropy coded: {:.2} bits/parameter (raw {})",
            rate, cfg.param_bits
        );
    }

    let full = FullReport {
        resource,
        stream_words,
        huffman_bits_per_param: huffman_rate,
    };
    match &args.out {
        Some(path) => write_json(path, &full)?,
        None => println!("{}", serde_json::to_string_pretty(&full)?),
    }

    manifest.config = Some(cfg);
    manifest.write(args.manifest.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Pack(args) => cmd_pack(args),
        Command::RomBuild(args) => cmd_rom_build(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compress(args) => cmd_compress(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
