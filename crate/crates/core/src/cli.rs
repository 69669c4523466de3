//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on bad input or usage, 2 when `--verify`
//! finds a disagreement with the oracle.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::accumulator::{oracle_sum, Accumulator, ReconstructionStrategy, DEFAULT_GUARD_BITS};
use crate::cost_model::{self, CostParams, Table};
use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::formats::Decoded;
use crate::gen;
use crate::lns::{self, LogFormat, Method};
use crate::mac::{MacConfig, MacState};
use crate::stream::{CodeStream, NumberFormat};
use crate::tensor_core::{matmul_oracle, CodeMatrix, ExactMatrix, TensorCore, TensorCoreMode, DIM};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;

/// Significant digits in the decimal rendering.
const DECIMAL_DIGITS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "eiacc", version, about = "Exact exponent-indexed accumulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact sum of a code stream.
    Sum(SumArgs),
    /// Exact dot product of two code streams.
    Dot(DotArgs),
    /// Sum of 4x4 bfloat16 matrix products through the tensor core model.
    Matmul(MatmulArgs),
    /// Gate-count or flip-count table.
    Cost(CostArgs),
    /// Entropy-coded size estimate for log4.3 weights.
    Compress(CompressArgs),
    /// Timing and naive-summation error on random data.
    Bench(BenchArgs),
    /// Writes a random code stream.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct AccArgs {
    /// Exponents per group, as a power of two.
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Guard bits against carry overflow.
    #[arg(long, default_value_t = DEFAULT_GUARD_BITS)]
    pub nv: u32,
    /// Check the result against the direct big-integer oracle.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct SumArgs {
    /// EIA1 code stream.
    #[arg(long)]
    pub input: PathBuf,
    /// exact, range or window:N
    #[arg(long, default_value = "range")]
    pub strategy: ReconstructionStrategy,
    #[command(flatten)]
    pub acc: AccArgs,
}

#[derive(Debug, Args)]
pub struct DotArgs {
    /// First operand stream.
    #[arg(long)]
    pub a: PathBuf,
    /// Second operand stream, same length as the first.
    #[arg(long)]
    pub b: PathBuf,
    /// Read stream A as two's-complement integers scaled by 2^SCALE.
    #[arg(long, allow_hyphen_values = true)]
    pub fixed_scale: Option<i32>,
    #[command(flatten)]
    pub acc: AccArgs,
}

#[derive(Debug, Args)]
pub struct MatmulArgs {
    /// bfloat16 stream of interleaved A, B pairs, 16 row-major codes each.
    #[arg(long)]
    pub input: PathBuf,
    /// 64mac or 16mac.
    #[arg(long, default_value = "64mac")]
    pub mode: TensorCoreMode,
    #[command(flatten)]
    pub acc: AccArgs,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// gates or flips.
    #[arg(long, default_value = "gates")]
    pub table: Table,
    /// Guard bits assumed by the model.
    #[arg(long, default_value_t = DEFAULT_GUARD_BITS)]
    pub nv: u32,
    /// Show the deviation from the published values.
    #[arg(long)]
    pub diff: bool,
    /// Comma-separated rows instead of an aligned table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Little-endian bfloat16 weights, raw or as an EIA1 bf16 stream.
    #[arg(long)]
    pub weights: PathBuf,
    /// One `offset count` line per matrix, in elements.
    #[arg(long)]
    pub manifest: PathBuf,
    /// a: one symbol per code; b: integer exponent coded, sign and fraction raw.
    #[arg(long, default_value = "a")]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// fp32, bf16, fp16, e5m2, e4m3, e3m4, log4.3, posit16 or posit8.
    #[arg(long, default_value = "bf16", value_parser = parse_format)]
    pub format: NumberFormat,
    /// Elements to generate and sum.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    /// Exponents per group, as a power of two.
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    #[arg(long, default_value_t = gen::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// fp32, bf16, fp16, e5m2, e4m3, e3m4, log4.3, posit16 or posit8.
    #[arg(long, value_parser = parse_format)]
    pub format: NumberFormat,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = gen::DEFAULT_SEED)]
    pub seed: u64,
    /// Destination file.
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_format(s: &str) -> std::result::Result<NumberFormat, String> {
    NumberFormat::by_name(s).ok_or_else(|| format!("unknown format {s:?}"))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_DATA } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Mismatch) => EXIT_MISMATCH,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Mismatch,
}

/// Failure carrying the position of the offending code where one is known.
#[derive(Debug)]
pub struct CliError(String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError(e.to_string())
    }
}

fn at(offset: usize, e: Error) -> CliError {
    match e {
        Error::Overflow { group, width, .. } => CliError(format!(
            "partial sum register {group} overflowed its {width}-bit range at offset {offset}"
        )),
        e => CliError(format!("at offset {offset}: {e}")),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn execute(cmd: &Command, out: &mut dyn Write) -> CliResult<Outcome> {
    match cmd {
        Command::Sum(a) => cmd_sum(a, out),
        Command::Dot(a) => cmd_dot(a, out),
        Command::Matmul(a) => cmd_matmul(a, out),
        Command::Cost(a) => cmd_cost(a, out),
        Command::Compress(a) => cmd_compress(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Gen(a) => cmd_gen(a, out),
    }
}

fn read_stream(path: &PathBuf) -> CliResult<CodeStream> {
    CodeStream::read_file(path).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn print_value(out: &mut dyn Write, label: &str, v: &ExactValue) -> CliResult<()> {
    writeln!(out, "{label}: {v}")?;
    writeln!(out, "decimal: {}", v.to_decimal(DECIMAL_DIGITS))?;
    Ok(())
}

fn print_verdict(out: &mut dyn Write, ok: bool) -> CliResult<Outcome> {
    writeln!(out, "oracle: {}", if ok { "MATCH" } else { "MISMATCH" })?;
    Ok(if ok { Outcome::Ok } else { Outcome::Mismatch })
}

fn print_groups(out: &mut dyn Write, span: Option<(usize, usize)>) -> CliResult<()> {
    match span {
        Some((lo, hi)) => writeln!(out, "groups: {lo}..{hi}")?,
        None => writeln!(out, "groups: none")?,
    }
    Ok(())
}

fn accumulate_stream(acc: &mut Accumulator, xs: &[Decoded]) -> CliResult<()> {
    for (i, x) in xs.iter().enumerate() {
        acc.accumulate(x).map_err(|e| at(i, e))?;
    }
    Ok(())
}

fn cmd_sum(a: &SumArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let s = read_stream(&a.input)?;
    let xs = s.format.decode_all(&s.codes).map_err(|(i, e)| at(i, e))?;
    let cfg = s.format.sum_config(a.acc.k, a.acc.nv)?;
    let scale = cfg.value_scale;
    let mut acc = Accumulator::new(cfg)?;
    accumulate_stream(&mut acc, &xs)?;

    writeln!(out, "format: {}", s.format)?;
    writeln!(out, "count: {}", s.codes.len())?;
    print_groups(out, acc.group_span())?;
    let visited = acc.groups_for(a.strategy);
    let mut rest = acc.clone();
    let value = acc.reconstruct(a.strategy);
    print_value(out, "value", &value)?;
    if !a.acc.verify {
        return Ok(Outcome::Ok);
    }
    // a window result plus the groups it skipped must still be exact
    let skipped = match (visited, rest.group_span()) {
        (Some(r), Some((lo, _))) if *r.start() > lo => rest.reconstruct_range(lo..=r.start() - 1),
        _ => ExactValue::zero(),
    };
    if !skipped.is_zero() {
        print_value(out, "skipped", &skipped)?;
    }
    print_verdict(out, &value + &skipped == oracle_sum(&xs, scale))
}

/// Exact product by rational arithmetic on the decoded operands; for log
/// numbers, from the exponent sum and one table lookup.
fn product_oracle(fmt: &NumberFormat, a: u64, b: u64) -> Result<ExactValue> {
    let NumberFormat::Log(l) = fmt else {
        return Ok(fmt.to_exact(&fmt.decode(a)?)?.mul(&fmt.to_exact(&fmt.decode(b)?)?));
    };
    let (x, y) = (l.decode(a)?, l.decode(b)?);
    if x.is_zero || y.is_zero {
        return Ok(ExactValue::zero());
    }
    let steps = 1i64 << l.n_ef;
    let e = (x.ei as i64 + y.ei as i64) * steps + x.ef as i64 + y.ef as i64;
    let m = l.lut()[e.rem_euclid(steps) as usize];
    Ok(ExactValue::from_parts(
        x.sign.xor(y.sign),
        m,
        e.div_euclid(steps) - (l.lut_bits as i64 - 1),
    ))
}

fn cmd_dot(a: &DotArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let sa = read_stream(&a.a)?;
    let sb = read_stream(&a.b)?;
    if sa.codes.len() != sb.codes.len() {
        return Err(CliError(format!(
            "length mismatch: A has {} codes, B has {}",
            sa.codes.len(),
            sb.codes.len()
        )));
    }
    let (k, nv) = (a.acc.k, a.acc.nv);
    let n = sa.codes.len();
    let pairs = sa.codes.iter().zip(&sb.codes).enumerate();

    let (value, span, oracle) = if let Some(scale) = a.fixed_scale {
        let NumberFormat::Float(fmt) = &sb.format else {
            return Err(CliError("--fixed-scale needs a float format for stream B".into()));
        };
        let bits = sa.format.bits();
        let cfg = MacConfig::new(fmt.clone(), k, nv).with_fixed_bits(bits);
        let mut mac = MacState::new(cfg)?;
        let mut oracle = ExactValue::zero();
        for (i, (&x, &y)) in pairs {
            // sign-extend the raw code from its natural width
            let fixed = ((x << (64 - bits)) as i64) >> (64 - bits);
            mac.fixed_step(fixed, scale, y).map_err(|e| at(i, e))?;
            if a.acc.verify {
                let yv = fmt.to_exact(&fmt.decode(y)?);
                oracle = &oracle + &ExactValue::from_i64(fixed).scale_pow2(scale as i64).mul(&yv);
            }
        }
        let span = mac.accumulator().group_span();
        (mac.reconstruct(ReconstructionStrategy::ExactRange), span, oracle)
    } else {
        if sa.format != sb.format {
            return Err(CliError(format!(
                "format mismatch: A is {}, B is {}",
                sa.format, sb.format
            )));
        }
        let cfg = sa.format.product_config(k, nv)?;
        let mut acc = Accumulator::new(cfg)?;
        let mut oracle = ExactValue::zero();
        let mul = sa.format.multiplier();
        for (i, (&x, &y)) in pairs {
            acc.accumulate(&mul(x, y).map_err(|e| at(i, e))?).map_err(|e| at(i, e))?;
            if a.acc.verify {
                oracle = &oracle + &product_oracle(&sa.format, x, y)?;
            }
        }
        let span = acc.group_span();
        (acc.reconstruct(ReconstructionStrategy::ExactRange), span, oracle)
    };

    writeln!(out, "format: {}", sb.format)?;
    writeln!(out, "count: {n}")?;
    print_groups(out, span)?;
    print_value(out, "value", &value)?;
    if a.acc.verify {
        return print_verdict(out, value == oracle);
    }
    Ok(Outcome::Ok)
}

fn matrix_pairs(codes: &[u64]) -> CliResult<Vec<(CodeMatrix, CodeMatrix)>> {
    let per = 2 * DIM * DIM;
    if !codes.len().is_multiple_of(per) {
        return Err(CliError(format!(
            "payload of {} codes is not a whole number of {per}-code matrix pairs",
            codes.len()
        )));
    }
    let to_matrix = |c: &[u64]| {
        let mut m = [[0u64; DIM]; DIM];
        for (r, row) in m.iter_mut().enumerate() {
            row.copy_from_slice(&c[r * DIM..(r + 1) * DIM]);
        }
        m
    };
    Ok(codes
        .chunks_exact(per)
        .map(|p| (to_matrix(&p[..DIM * DIM]), to_matrix(&p[DIM * DIM..])))
        .collect())
}

fn run_tensor_core(pairs: &[(CodeMatrix, CodeMatrix)], k: u32, nv: u32, mode: TensorCoreMode) -> CliResult<ExactMatrix> {
    let mut tc = TensorCore::new(k, nv, mode)?;
    for (i, (a, b)) in pairs.iter().enumerate() {
        tc.step(a, b).map_err(|e| CliError(format!("matrix pair {i}: {e}")))?;
    }
    Ok(tc.reconstruct())
}

fn cmd_matmul(a: &MatmulArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let s = read_stream(&a.input)?;
    if s.format != NumberFormat::from_id(1)? {
        return Err(CliError(format!("matmul needs a bf16 stream, got {}", s.format)));
    }
    let pairs = matrix_pairs(&s.codes)?;
    let c = run_tensor_core(&pairs, a.acc.k, a.acc.nv, a.mode)?;
    writeln!(out, "pairs: {}", pairs.len())?;
    for (r, row) in c.iter().enumerate() {
        for (l, v) in row.iter().enumerate() {
            writeln!(out, "c[{r}][{l}] = {v}")?;
        }
    }
    if !a.acc.verify {
        return Ok(Outcome::Ok);
    }
    let other = match a.mode {
        TensorCoreMode::Mac64 => TensorCoreMode::Mac16,
        TensorCoreMode::Mac16 => TensorCoreMode::Mac64,
    };
    let modes_agree = run_tensor_core(&pairs, a.acc.k, a.acc.nv, other)? == c;
    writeln!(out, "modes: {}", if modes_agree { "AGREE" } else { "DIFFER" })?;
    print_verdict(out, modes_agree && matmul_oracle(&pairs)? == c)
}

fn cmd_cost(a: &CostArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let params = CostParams::default();
    if a.diff {
        let rows = cost_model::diff_table(a.table, a.nv, &params);
        if a.csv {
            write!(out, "{}", cost_model::render_diff_csv(&rows))?;
        } else {
            writeln!(out, "{:<8}{:>3}{:>10}{:>11}{:>8}{:>9}", "format", "k", "model", "published", "delta", "rel")?;
            for d in &rows {
                let dash = || "-".to_string();
                writeln!(
                    out,
                    "{:<8}{:>3}{:>10}{:>11}{:>8}{:>9}",
                    d.row.format,
                    d.row.k,
                    d.row.value,
                    d.published.map_or_else(dash, |p| p.to_string()),
                    d.delta().map_or_else(dash, |x| x.to_string()),
                    d.relative().map_or_else(dash, |x| format!("{:.2}%", 100.0 * x)),
                )?;
            }
        }
    } else {
        let rows = cost_model::cost_table(a.table, a.nv, &params);
        if a.csv {
            write!(out, "{}", cost_model::render_csv(&rows))?;
        } else {
            write!(out, "{}", cost_model::render_text(&rows))?;
        }
    }
    Ok(Outcome::Ok)
}

/// Raw little-endian bf16, or an EIA1 stream that declares bf16.
fn read_weights(path: &PathBuf) -> CliResult<Vec<u64>> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(crate::stream::MAGIC) {
        let s = CodeStream::from_bytes(&bytes)?;
        if s.format != NumberFormat::from_id(1)? {
            return Err(CliError(format!("weights must be bf16, got {}", s.format)));
        }
        return Ok(s.codes);
    }
    if bytes.len() % 2 != 0 {
        return Err(CliError(format!("{} bytes is not a whole number of bf16 weights", bytes.len())));
    }
    Ok(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u64).collect())
}

fn cmd_compress(a: &CompressArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let weights = read_weights(&a.weights)?;
    let spans = lns::parse_manifest(&std::fs::read_to_string(&a.manifest)?)?;
    let fmt = LogFormat::log43();
    let r = lns::compress_weights(&fmt, &weights, &spans, a.method)?;
    writeln!(out, "method: {:?}", a.method)?;
    for (i, (span, e)) in spans.iter().zip(&r.per_matrix).enumerate() {
        writeln!(
            out,
            "matrix {i}: offset {} count {} bits {:.3} avg {:.4}",
            span.offset, span.count, e.total_bits, e.avg_bits
        )?;
    }
    writeln!(out, "weights: {}", r.weights)?;
    writeln!(out, "total bits: {:.3}", r.total_bits)?;
    writeln!(out, "total bytes: {:.3}", r.total_bytes())?;
    writeln!(out, "raw bits: {}", r.raw_bits)?;
    writeln!(out, "percent of raw: {:.4}%", r.percent_of_raw())?;
    writeln!(out, "avg bits/weight: {:.4}", r.avg_bits())?;
    Ok(Outcome::Ok)
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    writeln!(out, "format: {}", a.format)?;
    writeln!(out, "n: {}", a.n)?;
    if a.n == 0 {
        writeln!(out, "empty stream, nothing to time")?;
        return Ok(Outcome::Ok);
    }
    let codes = gen::random_codes(&a.format, a.n, &mut gen::rng(a.seed));
    let xs = a.format.decode_all(&codes).map_err(|(i, e)| at(i, e))?;
    let cfg = a.format.sum_config(a.k, DEFAULT_GUARD_BITS)?;
    let scale = cfg.value_scale;
    let per = |t: std::time::Duration| t.as_nanos() as f64 / a.n as f64;

    let t = Instant::now();
    let mut acc = Accumulator::new(cfg)?;
    accumulate_stream(&mut acc, &xs)?;
    let exact = acc.reconstruct(ReconstructionStrategy::ExactRange);
    let t_acc = t.elapsed();

    let floats: Vec<f64> = xs.iter().map(|x| x.to_exact(scale).to_f64()).collect();
    let t = Instant::now();
    let naive: f64 = floats.iter().sum();
    let t_naive = t.elapsed();

    let t = Instant::now();
    let oracle = oracle_sum(&xs, scale);
    let t_oracle = t.elapsed();

    writeln!(out, "k: {}", a.k)?;
    writeln!(out, "seed: {}", a.seed)?;
    print_value(out, "exact", &exact)?;
    writeln!(out, "accumulator: {:.2} ns/element", per(t_acc))?;
    writeln!(out, "naive f64: {:.2} ns/element", per(t_naive))?;
    writeln!(out, "oracle_sum: {:.2} ns/element", per(t_oracle))?;
    let err = ExactValue::from_f64(naive).map(|n| (&n - &exact).abs());
    match err {
        Some(e) => {
            writeln!(out, "naive abs error: {}", e.to_decimal(6))?;
            if !exact.is_zero() {
                writeln!(out, "naive rel error: {:e}", e.to_f64() / exact.abs().to_f64())?;
            }
        }
        None => writeln!(out, "naive abs error: non-finite ({naive})")?,
    }
    writeln!(out, "exact matches oracle: {}", exact == oracle)?;
    Ok(if exact == oracle { Outcome::Ok } else { Outcome::Mismatch })
}

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let codes = gen::random_codes(&a.format, a.n, &mut gen::rng(a.seed));
    CodeStream::new(a.format.clone(), codes).write_file(&a.output)?;
    writeln!(out, "wrote {} {} codes to {}", a.n, a.format, a.output.display())?;
    Ok(Outcome::Ok)
}
