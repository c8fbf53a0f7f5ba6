use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::time::Instant;

use mulpack::config::{default_mode, DspConfig, PortMode};
use mulpack::huffman;
use mulpack::io::{read_index_stream, read_rom, write_index_stream, write_rom};
use mulpack::manipulate::{approximate_value, representable_magnitudes};
use mulpack::packer::{build_operands, sign_extension, ParamTuple};
use mulpack::dspemu::{dsp_execute, extract_lanes};
use mulpack::pipeline::pack_params;
use mulpack::romdict::{index_ratio_display, index_ratio_permille, IndexWord};
use mulpack::sasim::{
    im2col, reference_conv, reference_gemm, resource_report, run_conv, run_gemm, run_packed,
    ArrayConfig, ConvSpec, Matrix,
};
use mulpack::verify::{lane_sweep, representable_signed_values};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Zipf};

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cfg8() -> DspConfig {
    DspConfig::symmetric(8, PortMode::Strict).unwrap()
}

fn all_widths() -> Vec<DspConfig> {
    [8u32, 6, 4]
        .iter()
        .map(|&b| DspConfig::symmetric(b, default_mode(b)).unwrap())
        .collect()
}

fn criterion_1() -> Result<String, String> {
    let cfg = cfg8();
    let report = lane_sweep(&cfg, &[101, 202, 303]).map_err(|e| e.to_string())?;
    if !report.passed() {
        return Err(format!("first mismatch: {:?}", report.mismatches[0]));
    }
    check(
        report.checked == 3 * 128 * 3 * 256,
        format!("expected 294912 passes, ran {}", report.checked),
    )?;
    Ok(format!(
        "every exact 8-bit parameter in every lane, all 256 inputs, {} packed passes, 0 mismatches",
        report.checked
    ))
}

fn criterion_2() -> Result<String, String> {
    let cfg = cfg8();
    let exact: BTreeSet<i64> = representable_signed_values(&cfg).into_iter().collect();
    check(exact.len() == 128, format!("{} exact values, not 128", exact.len()))?;
    for v in -16i64..=15 {
        check(exact.contains(&v), format!("narrow value {v} is not exact"))?;
    }
    let missing: Vec<i64> = (0..=31).filter(|m| !exact.contains(m)).collect();
    check(
        missing == [19, 23, 27, 31],
        format!("gaps below 32 are {missing:?}"),
    )?;
    Ok(
        "128 of 256 signed 8-bit values exact; every value under 6 bits exact; \
         gaps below 32 are exactly 19, 23, 27, 31"
            .into(),
    )
}

fn criterion_3() -> Result<String, String> {
    let cfg = cfg8();
    let a = approximate_value(53, &cfg).map_err(|e| e.to_string())?;
    check(a == 52, format!("53 approximated to {a}"))?;

    let tuple = ParamTuple::from_values(&[52, 52, 52], &cfg).map_err(|e| e.to_string())?;
    for (i_val, want) in [(72i64, 3744i64), (-72, -3744)] {
        let ops = build_operands(&tuple, i_val, &cfg).map_err(|e| e.to_string())?;
        let state = dsp_execute(ops.a_word, ops.b_word, ops.c_word, &cfg).map_err(|e| e.to_string())?;
        let lanes = extract_lanes(&state, &ops, i_val, &cfg);
        check(
            lanes.iter().all(|&p| p == want),
            format!("52 * {i_val} gave {lanes:?}"),
        )?;
    }
    let sex = sign_extension(-72, 3, 2, &cfg).map_err(|e| e.to_string())?;
    check(
        sex == 0b10011101110,
        format!("lane correction for -72 was {sex:#b}"),
    )?;
    Ok("53 rounds to 52; 52*72 = 3744 and 52*(-72) = -3744 through the packed pass; \
        negative-input lane correction is 0b10011101110"
        .into())
}

fn criterion_4() -> Result<String, String> {
    let mut values = Vec::new();
    for x in 103..=112 {
        values.extend([13i8, 68, x]);
    }
    let packed = pack_params(&values, 8192, &cfg8()).map_err(|e| e.to_string())?;
    let s = &packed.stats;
    check(
        s.distinct_original == 10 && s.distinct_tuned == 7 && s.distinct_approximated == 2,
        format!(
            "funnel was {}.. {}.. {}",
            s.distinct_original, s.distinct_tuned, s.distinct_approximated
        ),
    )?;
    let rows: BTreeSet<Vec<u32>> = packed
        .rom
        .image
        .entries
        .iter()
        .map(|e| e.magnitudes())
        .collect();
    let want: BTreeSet<Vec<u32>> = [vec![13, 68, 104], vec![13, 68, 112]].into_iter().collect();
    check(rows == want, format!("surviving rows {rows:?}"))?;
    Ok("10 distinct tuples tune down to 7 and approximate down to 2: (13,68,104) and (13,68,112)".into())
}

fn criterion_5() -> Result<String, String> {
    let widths = all_widths();
    let expect = [
        (16u32, 666u32, "66.6%", 8192usize),
        (18, 750, "75.0%", 16384),
        (20, 833, "83.3%", 16384),
    ];
    for (cfg, (bits, permille, disp, cap)) in widths.iter().zip(expect) {
        check(
            cfg.index_bits() == bits,
            format!("c={} index word is {} bits", cfg.param_bits, cfg.index_bits()),
        )?;
        check(
            index_ratio_permille(cfg) == permille && index_ratio_display(cfg) == disp,
            format!(
                "c={} ratio {} ({})",
                cfg.param_bits,
                index_ratio_permille(cfg),
                index_ratio_display(cfg)
            ),
        )?;
        check(
            cfg.rom_capacity() == cap,
            format!("c={} capacity {}", cfg.param_bits, cfg.rom_capacity()),
        )?;
    }
    Ok("index words cost 66.6%, 75.0%, 83.3% of raw parameter bits for c=8/6/4, \
        dictionaries capped at 8192/16384/16384 rows"
        .into())
}

fn criterion_6() -> Result<String, String> {
    let expect = [(48u64, "66.6%"), (36, "75.0%"), (24, "83.3%")];
    for (cfg, (used, disp)) in all_widths().into_iter().zip(expect) {
        let acfg = ArrayConfig::new(12, 12, cfg.clone());
        check(
            acfg.dsp_used() == used && acfg.dsp_baseline() == 144,
            format!(
                "12x12 at c={} uses {} of {}",
                cfg.param_bits,
                acfg.dsp_used(),
                acfg.dsp_baseline()
            ),
        )?;
        let report = resource_report(&acfg, &Default::default(), 0);
        check(
            report.dsp_reduction_display == disp,
            format!("reduction shown as {}", report.dsp_reduction_display),
        )?;
        let single = ArrayConfig::new(1, 1, cfg.clone());
        check(
            single.dsp_used() == 1 && single.dsp_baseline() == cfg.lanes as u64,
            "degenerate 1x1 accounting broke".to_string(),
        )?;
    }
    Ok("12x12 array runs on 48/36/24 packed DSP slices against a 144-slice baseline \
        (66.6%, 75.0%, 83.3% saved)"
        .into())
}

fn replay_from_artifacts(
    a: &Matrix,
    words: &[IndexWord],
    image: &mulpack::romdict::RomImage,
    out_cols: usize,
    acfg: &ArrayConfig,
) -> Result<Matrix, String> {
    let mut rom_bytes = Vec::new();
    write_rom(&mut rom_bytes, image, &acfg.cfg).map_err(|e| e.to_string())?;
    let mut stream_bytes = Vec::new();
    write_index_stream(&mut stream_bytes, words, &acfg.cfg).map_err(|e| e.to_string())?;

    let (image2, cfg2) = read_rom(&mut Cursor::new(&rom_bytes)).map_err(|e| e.to_string())?;
    check(cfg2 == acfg.cfg, "artifact round trip changed the shape")?;
    let (words2, _) =
        read_index_stream(&mut Cursor::new(&stream_bytes)).map_err(|e| e.to_string())?;
    check(words2 == words, "artifact round trip changed the stream")?;

    let run = run_packed(a, &words2, &image2, out_cols, acfg).map_err(|e| e.to_string())?;
    Ok(run.output)
}

fn criterion_7() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(4242);
    let mut trials = 0u64;

    for cfg in all_widths() {
        let (in_lo, in_hi) = cfg.input_range();
        let (p_lo, p_hi) = cfg.param_range();
        for _ in 0..280 {
            let m = rng.random_range(1..=5usize);
            let n = rng.random_range(1..=5usize);
            let p = rng.random_range(1..=7usize);
            let a = Matrix::new(
                m,
                n,
                (0..m * n).map(|_| rng.random_range(in_lo..=in_hi)).collect(),
            )
            .map_err(|e| e.to_string())?;
            let w = Matrix::new(
                n,
                p,
                (0..n * p).map(|_| rng.random_range(p_lo..=p_hi)).collect(),
            )
            .map_err(|e| e.to_string())?;
            let acfg = ArrayConfig::new(
                rng.random_range(1..=3usize),
                rng.random_range(1..=2 * cfg.lanes),
                cfg.clone(),
            );
            let run = run_gemm(&a, &w, &acfg).map_err(|e| e.to_string())?;
            let oracle = reference_gemm(&a, &run.decoded).map_err(|e| e.to_string())?;
            check(run.output == oracle, "packed GEMM strayed from the oracle")?;
            let replay = replay_from_artifacts(&a, &run.words, &run.rom.image, p, &acfg)?;
            check(replay == run.output, "artifact replay strayed")?;
            trials += 1;
        }

        for _ in 0..70 {
            let spec = loop {
                let s = ConvSpec {
                    height: rng.random_range(3..=6),
                    width: rng.random_range(3..=6),
                    channels_in: rng.random_range(1..=3),
                    kernel_h: rng.random_range(1..=3),
                    kernel_w: rng.random_range(1..=3),
                    channels_out: rng.random_range(1..=4),
                    stride: rng.random_range(1..=2),
                    padding: rng.random_range(0..=1),
                };
                if s.out_dims().is_ok() {
                    break s;
                }
            };
            let input: Vec<i64> = (0..spec.input_len())
                .map(|_| rng.random_range(in_lo..=in_hi))
                .collect();
            let kernel: Vec<i64> = (0..spec.kernel_len())
                .map(|_| rng.random_range(p_lo..=p_hi))
                .collect();
            let acfg = ArrayConfig::new(2, rng.random_range(1..=2 * cfg.lanes), cfg.clone());
            let run = run_conv(&input, &kernel, &spec, &acfg).map_err(|e| e.to_string())?;
            let oracle =
                reference_conv(&input, &run.decoded.data, &spec).map_err(|e| e.to_string())?;
            check(run.output == oracle, "packed conv strayed from the oracle")?;
            let patches = im2col(&input, &spec).map_err(|e| e.to_string())?;
            let replay = replay_from_artifacts(
                &patches,
                &run.words,
                &run.rom.image,
                spec.channels_out,
                &acfg,
            )?;
            check(replay.data == run.output, "conv artifact replay strayed")?;
            trials += 1;
        }
    }

    let elapsed = start.elapsed();
    check(trials >= 1000, format!("only {trials} trials"))?;
    check(
        elapsed.as_secs() < 60,
        format!("took {:.1}s", elapsed.as_secs_f64()),
    )?;
    Ok(format!(
        "{} randomized GEMM and conv trials across all widths replayed from serialized \
         dictionary and stream, bit-exact in {:.1}s",
        trials,
        elapsed.as_secs_f64()
    ))
}

fn criterion_8() -> Result<String, String> {
    // stand-in for the silicon-scale measurements: codec behaviour on a
    // skewed synthetic stream, and the approximation error pinned by full
    // enumeration
    let cfg = cfg8();
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let zipf = Zipf::new(100.0, 1.2).map_err(|e| e.to_string())?;
    let words: Vec<u32> = (0..20000)
        .map(|_| {
            let address = zipf.sample(&mut rng) as u32 - 1;
            IndexWord {
                address,
                sign_bits: rng.random_range(0..8),
            }
            .to_bits(cfg.lanes)
        })
        .collect();
    let encoded = huffman::encode(&words).map_err(|e| e.to_string())?;
    let decoded = huffman::decode(&encoded).map_err(|e| e.to_string())?;
    check(decoded == words, "entropy codec round trip broke")?;
    let rate = encoded.bits_per_symbol();
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &w in &words {
        *counts.entry(w).or_default() += 1;
    }
    let n = words.len() as f64;
    let entropy: f64 = counts
        .values()
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.log2()
        })
        .sum();
    check(
        rate >= entropy - 1e-9 && rate < entropy + 1.0,
        format!("rate {rate:.3} vs entropy {entropy:.3}"),
    )?;
    check(
        rate < f64::from(cfg.index_bits()),
        format!("rate {rate:.3} does not beat the raw index width"),
    )?;

    let values: Vec<i8> = (-128..=127).collect();
    let packed = pack_params(&values, 8192, &cfg).map_err(|e| e.to_string())?;
    let reps: Vec<i64> = representable_magnitudes(&cfg)
        .iter()
        .map(|&m| i64::from(m))
        .collect();
    let mut total = 0u64;
    let mut exact = 0u64;
    for v in -128i64..=127 {
        let d = if v == 0 {
            0
        } else {
            reps.iter()
                .map(|&r| (r - v.abs()).unsigned_abs())
                .min()
                .unwrap()
        };
        total += d;
        if d == 0 {
            exact += 1;
        }
    }
    let hist = &packed.stats.approx_error;
    check(
        hist.mean_abs == total as f64 / 256.0,
        format!("mean error {} vs enumerated {}", hist.mean_abs, total as f64 / 256.0),
    )?;
    check(hist.max_abs == 4, format!("max error {}", hist.max_abs))?;
    check(
        hist.counts.get(&0) == Some(&exact),
        "exact-value count drifted from enumeration".to_string(),
    )?;
    Ok(format!(
        "codec round trip exact at {:.2} bits per 16-bit word (entropy {:.2}); \
         full-range error histogram matches enumeration: mean {:.4}, max 4, {} exact",
        rate,
        entropy,
        hist.mean_abs,
        exact
    ))
}

fn main() {
    let criteria: [(u32, fn() -> Result<String, String>); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failed = false;
    for (n, run) in criteria {
        match run() {
            Ok(msg) => println!("criterion {n}: PASS - {msg}"),
            Err(msg) => {
                failed = true;
                println!("criterion {n}: FAIL - {msg}");
            }
        }
    }
    if failed {
        std::process::exit(1);
    }
}
