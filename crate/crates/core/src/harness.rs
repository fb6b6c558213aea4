//! Monte-Carlo BER engine, sweeps, configuration and CSV output.
//!
//! A point is simulated block by block. Block `b` draws its message, dirt and
//! noise from the streams `(seed, b, role)`, so its outcome does not depend on
//! which worker ran it. Blocks are evaluated in waves and folded in block
//! order; the run stops at the first block after which `min_errors` bit
//! errors have accumulated, or after `max_blocks` blocks (flagged as
//! truncated). The result is therefore identical for any worker count.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::broadcast::{broadcast_encode, strong_user_receive, weak_user_receive, BroadcastScenario};
use crate::channel::{
    add_noise, energy, gen_dirt, random_bits, snr_db, stream_rng, transmit, ChannelParams, CompensatedSum,
    StreamId, StreamRole,
};
use crate::constellation::ConstellationKind;
use crate::decoder::{medd_decode, recover_dirt, tcm_decode};
use crate::encoder::{pip_encode, tcm_encode};
use crate::error::{Error, Result};
use crate::trellis::{build_preset, BinStrategy, DpcSpec, TrellisPreset};

pub const DEFAULT_BLOCK_LENGTH: usize = 100_000;
pub const DEFAULT_MIN_ERRORS: u64 = 100;
pub const DEFAULT_MAX_BLOCKS: u64 = 2000;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// What the `values` list of a config sweeps over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    DesignPower,
    Alpha,
    SigmaS2,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "design_power_db" => Ok(Self::DesignPower),
            "alpha" => Ok(Self::Alpha),
            "sigma_s2" => Ok(Self::SigmaS2),
            _ => Err(Error::Config(format!(
                "unknown sweep {s:?} (expected design_power_db, alpha or sigma_s2)"
            ))),
        }
    }
}

/// Stopping rule and parallelism shared by every run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunLimits {
    pub block_length: usize,
    pub min_errors: u64,
    pub max_blocks: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            block_length: DEFAULT_BLOCK_LENGTH,
            min_errors: DEFAULT_MIN_ERRORS,
            max_blocks: DEFAULT_MAX_BLOCKS,
            seed: 1,
            workers: 1,
        }
    }
}

impl RunLimits {
    fn validate(&self) -> Result<()> {
        if self.block_length == 0 {
            return Err(Error::Config("block_length must be >= 1".into()));
        }
        if self.min_errors == 0 {
            return Err(Error::Config("min_errors must be >= 1".into()));
        }
        if self.max_blocks == 0 {
            return Err(Error::Config("max_blocks must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// A single-link simulation setup.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub trellis: TrellisPreset,
    pub bin_strategy: BinStrategy,
    pub r: usize,
    pub alpha: f64,
    pub sigma_s2: f64,
    pub sigma_w2: f64,
    /// Design power used when the sweep is over something else.
    pub design_power_db: f64,
    pub sweep: SweepKind,
    pub values: Vec<f64>,
    pub limits: RunLimits,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trellis: TrellisPreset::Qam16State8,
            bin_strategy: BinStrategy::default(),
            r: 1,
            alpha: 0.9,
            sigma_s2: 1.0,
            sigma_w2: 1.0,
            design_power_db: 16.3,
            sweep: SweepKind::DesignPower,
            values: vec![16.3],
            limits: RunLimits::default(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimConfig {
    constellation: Option<String>,
    trellis: Option<String>,
    bin_strategy: Option<String>,
    r: Option<usize>,
    alpha: Option<f64>,
    sigma_s2: Option<f64>,
    sigma_w2: Option<f64>,
    design_power_db: Option<f64>,
    sweep: Option<String>,
    values: Option<Vec<f64>>,
    block_length: Option<usize>,
    min_errors: Option<u64>,
    max_blocks: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
}

fn parse_name<T: FromStr<Err = Error>>(v: Option<String>, default: T) -> Result<T> {
    v.map_or(Ok(default), |s| s.parse())
}

fn config_err(e: toml::de::Error) -> Error {
    Error::Config(e.to_string())
}

fn check_constellation(name: Option<String>, trellis: TrellisPreset) -> Result<()> {
    if let Some(name) = name {
        let kind: ConstellationKind = name.parse()?;
        if kind != trellis.constellation_kind() {
            return Err(Error::Config(format!(
                "constellation {kind} does not match trellis {trellis}"
            )));
        }
    }
    Ok(())
}

impl SimConfig {
    /// Parses the flat `key = value` config format (TOML syntax).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSimConfig = toml::from_str(text).map_err(config_err)?;
        let d = Self::default();
        let trellis = parse_name(raw.trellis, d.trellis)?;
        check_constellation(raw.constellation, trellis)?;
        let sweep = parse_name(raw.sweep, d.sweep)?;
        let design_power_db = raw.design_power_db.unwrap_or(d.design_power_db);
        let values = match raw.values {
            Some(v) => v,
            None => match sweep {
                SweepKind::DesignPower => vec![design_power_db],
                SweepKind::Alpha => (0..=10).map(|k| f64::from(k) / 10.0).collect(),
                SweepKind::SigmaS2 => vec![1.0, 5.0, 10.0],
            },
        };
        let cfg = Self {
            trellis,
            bin_strategy: parse_name(raw.bin_strategy, d.bin_strategy)?,
            r: raw.r.unwrap_or(d.r),
            alpha: raw.alpha.unwrap_or(d.alpha),
            sigma_s2: raw.sigma_s2.unwrap_or(d.sigma_s2),
            sigma_w2: raw.sigma_w2.unwrap_or(d.sigma_w2),
            design_power_db,
            sweep,
            values,
            limits: RunLimits {
                block_length: raw.block_length.unwrap_or(d.limits.block_length),
                min_errors: raw.min_errors.unwrap_or(d.limits.min_errors),
                max_blocks: raw.max_blocks.unwrap_or(d.limits.max_blocks),
                seed: raw.seed.unwrap_or(d.limits.seed),
                workers: raw.workers.unwrap_or(d.limits.workers),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        if self.values.is_empty() {
            return Err(Error::Config("sweep values must be non-empty".into()));
        }
        if self.sweep == SweepKind::Alpha && !self.values.iter().all(|a| (0.0..=1.0).contains(a)) {
            return Err(Error::Config("alpha sweep values must lie in [0, 1]".into()));
        }
        ChannelParams::new(self.sigma_s2, self.sigma_w2, 0)?;
        Ok(())
    }

    /// The base point, before the sweep value is applied.
    pub fn base_point(&self) -> PointParams {
        PointParams {
            design_power_db: self.design_power_db,
            alpha: self.alpha,
            sigma_s2: self.sigma_s2,
        }
    }

    /// One point per sweep value.
    pub fn points(&self) -> Vec<PointParams> {
        let base = self.base_point();
        self.values
            .iter()
            .map(|&v| match self.sweep {
                SweepKind::DesignPower => PointParams {
                    design_power_db: v,
                    ..base
                },
                SweepKind::Alpha => PointParams { alpha: v, ..base },
                SweepKind::SigmaS2 => PointParams { sigma_s2: v, ..base },
            })
            .collect()
    }

    fn spec(&self, p: &PointParams) -> Result<DpcSpec> {
        DpcSpec::from_preset(
            self.trellis,
            db_to_linear(p.design_power_db),
            self.r,
            self.bin_strategy,
            p.alpha,
        )
    }
}

/// The per-point quantities a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointParams {
    pub design_power_db: f64,
    pub alpha: f64,
    pub sigma_s2: f64,
}

/// Outcome of one simulated point.
#[derive(Clone, Debug, PartialEq)]
pub struct BerPoint {
    pub design_power_db: f64,
    pub alpha: f64,
    pub sigma_s2: f64,
    pub measured_snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub blocks: u64,
    /// Fraction of symbols whose recovered dirt is off by a constellation
    /// step; `None` when the dirt cannot be recovered (`alpha = 1`).
    pub dirt_ser: Option<f64>,
    /// Set when `max_blocks` ran out before `min_errors` errors.
    pub truncated: bool,
}

/// Counters accumulated over blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Tally {
    bits: u64,
    errors: u64,
    energy: CompensatedSum,
    symbols: u64,
    dirt_errors: u64,
}

impl Tally {
    fn merge(&mut self, o: &Tally) {
        self.bits += o.bits;
        self.errors += o.errors;
        self.energy.merge(&o.energy);
        self.symbols += o.symbols;
        self.dirt_errors += o.dirt_errors;
    }
}

struct RunOutcome<T> {
    total: T,
    blocks: u64,
    truncated: bool,
}

/// Runs blocks `0, 1, ...` until `done(total)` or `max_blocks`.
fn run_blocks<T, F, D>(limits: &RunLimits, block: F, merge: fn(&mut T, &T), done: D) -> Result<RunOutcome<T>>
where
    T: Default + Send,
    F: Fn(u64) -> Result<T> + Sync,
    D: Fn(&T) -> bool,
{
    limits.validate()?;
    let pool = if limits.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(limits.workers)
                .build()
                .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let wave = limits.workers as u64;
    let mut total = T::default();
    let mut blocks = 0u64;
    while blocks < limits.max_blocks {
        let end = (blocks + wave).min(limits.max_blocks);
        let results: Vec<Result<T>> = match &pool {
            Some(pool) => pool.install(|| (blocks..end).into_par_iter().map(&block).collect()),
            None => (blocks..end).map(&block).collect(),
        };
        for r in results {
            merge(&mut total, &r?);
            blocks += 1;
            if done(&total) {
                return Ok(RunOutcome {
                    total,
                    blocks,
                    truncated: false,
                });
            }
        }
    }
    Ok(RunOutcome {
        total,
        blocks,
        truncated: true,
    })
}

fn count_bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn finish_point(p: &PointParams, out: RunOutcome<Tally>, sigma_w2: f64, dirt: bool) -> Result<BerPoint> {
    let t = out.total;
    Ok(BerPoint {
        design_power_db: p.design_power_db,
        alpha: p.alpha,
        sigma_s2: p.sigma_s2,
        measured_snr_db: snr_db(t.energy.value(), t.symbols as usize, sigma_w2)?,
        bits: t.bits,
        errors: t.errors,
        ber: t.errors as f64 / t.bits as f64,
        blocks: out.blocks,
        dirt_ser: dirt.then(|| t.dirt_errors as f64 / t.symbols as f64),
        truncated: out.truncated,
    })
}

/// Simulates one dirty paper point: encode, transmit, decode, count errors.
pub fn run_point(config: &SimConfig, p: &PointParams) -> Result<BerPoint> {
    let spec = config.spec(p)?;
    let params = ChannelParams::new(p.sigma_s2, config.sigma_w2, config.limits.seed)?;
    let n = config.limits.block_length;
    let r = spec.r();
    let alpha = spec.alpha();
    let recoverable = alpha < 1.0;
    // half the minimum point spacing
    let dirt_tol = spec.constellation().scale();
    let block = |b: u64| -> Result<Tally> {
        let bits = random_bits(&mut stream_rng(params.seed, StreamId::new(b, StreamRole::Message)), n * r);
        let s = gen_dirt(n, &params, StreamId::new(b, StreamRole::Dirt));
        let enc = pip_encode(&spec, &bits, &s)?;
        let y = transmit(&enc.x, &s, &params, StreamId::new(b, StreamRole::Noise))?;
        let dec = medd_decode(&spec, &y)?;
        let mut dirt_errors = 0;
        if recoverable {
            let s_hat = recover_dirt(&y, &dec.codeword.points, alpha)?;
            for i in 0..n {
                // s_hat - s equals w / (1 - alpha) exactly when u_hat = u
                let w = y[i] - enc.x[i] - s[i];
                if ((s_hat[i] - s[i]) * (1.0 - alpha) - w).norm() > dirt_tol {
                    dirt_errors += 1;
                }
            }
        }
        Ok(Tally {
            bits: bits.len() as u64,
            errors: count_bit_errors(&bits, &dec.message),
            energy: energy(&enc.x),
            symbols: n as u64,
            dirt_errors,
        })
    };
    let min_errors = config.limits.min_errors;
    let out = run_blocks(&config.limits, block, Tally::merge, |t| t.errors >= min_errors)?;
    finish_point(p, out, config.sigma_w2, recoverable)
}

/// Runs every point of the configured sweep.
pub fn run_sweep(config: &SimConfig) -> Result<Vec<BerPoint>> {
    config.validate()?;
    config.points().iter().map(|p| run_point(config, p)).collect()
}

/// `run_sweep` with the sweep forced to alpha.
pub fn run_alpha_sweep(config: &SimConfig) -> Result<Vec<BerPoint>> {
    let mut c = config.clone();
    if c.sweep != SweepKind::Alpha {
        c.sweep = SweepKind::Alpha;
        c.values = (0..=10).map(|k| f64::from(k) / 10.0).collect();
    }
    run_sweep(&c)
}

/// Plain 4-state 4-QAM TCM over AWGN at each design power in `values`
/// (dirt and alpha are zero). The sweep kind of `config` is ignored.
pub fn run_awgn_baseline(config: &SimConfig) -> Result<Vec<BerPoint>> {
    config.limits.validate()?;
    let preset = TrellisPreset::Qam4State4Awgn;
    config
        .values
        .iter()
        .map(|&db| {
            let p = PointParams {
                design_power_db: db,
                alpha: 0.0,
                sigma_s2: 0.0,
            };
            run_tcm_point(config, preset, &p)
        })
        .collect()
}

fn run_tcm_point(config: &SimConfig, preset: TrellisPreset, p: &PointParams) -> Result<BerPoint> {
    let trellis = build_preset(preset, db_to_linear(p.design_power_db))?;
    let params = ChannelParams::new(0.0, config.sigma_w2, config.limits.seed)?;
    let n = config.limits.block_length;
    let k = trellis.r0();
    let block = |b: u64| -> Result<Tally> {
        let bits = random_bits(&mut stream_rng(params.seed, StreamId::new(b, StreamRole::Message)), n * k);
        let cw = tcm_encode(&trellis, &bits)?;
        let mut y = cw.points.clone();
        add_noise(
            &mut y,
            params.sigma_w2,
            &mut stream_rng(params.seed, StreamId::new(b, StreamRole::Noise)),
        );
        let dec = tcm_decode(&trellis, &y)?;
        Ok(Tally {
            bits: bits.len() as u64,
            errors: count_bit_errors(&bits, &dec.message),
            energy: energy(&cw.points),
            symbols: n as u64,
            dirt_errors: 0,
        })
    };
    let min_errors = config.limits.min_errors;
    let out = run_blocks(&config.limits, block, Tally::merge, |t| t.errors >= min_errors)?;
    finish_point(p, out, config.sigma_w2, false)
}

/// Measured SNR of the encoder output alone over the first `blocks` blocks.
pub fn transmit_snr_db(config: &SimConfig, p: &PointParams, blocks: u64) -> Result<f64> {
    let spec = config.spec(p)?;
    let params = ChannelParams::new(p.sigma_s2, config.sigma_w2, config.limits.seed)?;
    let n = config.limits.block_length;
    let mut acc = CompensatedSum::default();
    for b in 0..blocks.max(1) {
        let bits = random_bits(
            &mut stream_rng(params.seed, StreamId::new(b, StreamRole::Message)),
            n * spec.r(),
        );
        let s = gen_dirt(n, &params, StreamId::new(b, StreamRole::Dirt));
        acc.merge(&energy(&pip_encode(&spec, &bits, &s)?.x));
    }
    snr_db(acc.value(), n * blocks.max(1) as usize, config.sigma_w2)
}

/// Finds the design power (dB) whose encoder output has measured SNR within
/// `tol_db` of `target_db`, by bisection on the first `blocks` blocks.
pub fn design_power_for_snr(
    config: &SimConfig,
    alpha: f64,
    sigma_s2: f64,
    target_db: f64,
    tol_db: f64,
    blocks: u64,
) -> Result<f64> {
    let snr = |pdb: f64| {
        transmit_snr_db(
            config,
            &PointParams {
                design_power_db: pdb,
                alpha,
                sigma_s2,
            },
            blocks,
        )
    };
    let (mut lo, mut hi) = (target_db - 5.0, target_db + 10.0);
    let mut expand = 0;
    while snr(lo)? > target_db {
        lo -= 10.0;
        expand += 1;
        if expand > 10 {
            return Err(Error::Unsupported(format!("cannot reach {target_db} dB from below")));
        }
    }
    while snr(hi)? < target_db {
        hi += 10.0;
        expand += 1;
        if expand > 10 {
            return Err(Error::Unsupported(format!("cannot reach {target_db} dB from above")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let v = snr(mid)?;
        if (v - target_db).abs() <= tol_db {
            return Ok(mid);
        }
        if v < target_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Unsupported(format!(
        "bisection did not reach {target_db} dB within {tol_db} dB"
    )))
}

/// SNR at which the BER curve crosses `target`, interpolating log10(BER)
/// linearly in dB between the two bracketing points. Points with zero
/// errors cannot be interpolated and end the search.
pub fn snr_at_ber(points: &[BerPoint], target: f64) -> Option<f64> {
    let mut pts: Vec<&BerPoint> = points.iter().collect();
    pts.sort_by(|a, b| a.measured_snr_db.total_cmp(&b.measured_snr_db));
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.ber >= target && b.ber <= target {
            if a.ber <= 0.0 || b.ber <= 0.0 {
                return None;
            }
            let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
            if la == lb {
                return Some(a.measured_snr_db);
            }
            return Some(a.measured_snr_db + (lt - la) / (lb - la) * (b.measured_snr_db - a.measured_snr_db));
        }
    }
    None
}

pub const CSV_HEADER: [&str; 10] = [
    "design_power_db",
    "alpha",
    "sigma_s2",
    "measured_snr_db",
    "bits",
    "errors",
    "ber",
    "blocks",
    "dirt_ser",
    "truncated",
];

/// Round-trip exact float formatting.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn emit_csv<W: Write>(points: &[BerPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record([
            fmt_f64(p.design_power_db),
            fmt_f64(p.alpha),
            fmt_f64(p.sigma_s2),
            fmt_f64(p.measured_snr_db),
            p.bits.to_string(),
            p.errors.to_string(),
            fmt_f64(p.ber),
            p.blocks.to_string(),
            p.dirt_ser.map(fmt_f64).unwrap_or_default(),
            p.truncated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(points: &[BerPoint], path: &Path) -> Result<()> {
    emit_csv(points, File::create(path)?)
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let s = rec.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::Config(format!("bad value {s:?} in column {}", CSV_HEADER[i])))
}

/// Parses a file written by [`emit_csv`].
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<BerPoint>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Config("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let dirt = rec.get(8).unwrap_or("");
        out.push(BerPoint {
            design_power_db: field(&rec, 0)?,
            alpha: field(&rec, 1)?,
            sigma_s2: field(&rec, 2)?,
            measured_snr_db: field(&rec, 3)?,
            bits: field(&rec, 4)?,
            errors: field(&rec, 5)?,
            ber: field(&rec, 6)?,
            blocks: field(&rec, 7)?,
            dirt_ser: if dirt.is_empty() { None } else { Some(field(&rec, 8)?) },
            truncated: field(&rec, 9)?,
        });
    }
    Ok(out)
}

/// Two-user broadcast setup.
#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastConfig {
    pub weak_trellis: TrellisPreset,
    pub weak_power_db: f64,
    pub strong_trellis: TrellisPreset,
    pub bin_strategy: BinStrategy,
    pub r: usize,
    pub design_power_db: f64,
    pub alpha: f64,
    pub sigma_w1_2: f64,
    pub sigma_w2_2: f64,
    pub limits: RunLimits,
}

impl Default for BroadcastConfig {
    fn default() -> Self {
        Self {
            weak_trellis: TrellisPreset::Qam4State4Awgn,
            weak_power_db: 10.0,
            strong_trellis: TrellisPreset::Qam16State8,
            bin_strategy: BinStrategy::default(),
            r: 1,
            design_power_db: 20.0,
            alpha: 0.5,
            sigma_w1_2: 0.01,
            sigma_w2_2: 1.0,
            limits: RunLimits::default(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBroadcastConfig {
    weak_trellis: Option<String>,
    weak_power_db: Option<f64>,
    trellis: Option<String>,
    bin_strategy: Option<String>,
    r: Option<usize>,
    design_power_db: Option<f64>,
    alpha: Option<f64>,
    sigma_w1_2: Option<f64>,
    sigma_w2_2: Option<f64>,
    block_length: Option<usize>,
    min_errors: Option<u64>,
    max_blocks: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
}

impl BroadcastConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawBroadcastConfig = toml::from_str(text).map_err(config_err)?;
        let d = Self::default();
        let cfg = Self {
            weak_trellis: parse_name(raw.weak_trellis, d.weak_trellis)?,
            weak_power_db: raw.weak_power_db.unwrap_or(d.weak_power_db),
            strong_trellis: parse_name(raw.trellis, d.strong_trellis)?,
            bin_strategy: parse_name(raw.bin_strategy, d.bin_strategy)?,
            r: raw.r.unwrap_or(d.r),
            design_power_db: raw.design_power_db.unwrap_or(d.design_power_db),
            alpha: raw.alpha.unwrap_or(d.alpha),
            sigma_w1_2: raw.sigma_w1_2.unwrap_or(d.sigma_w1_2),
            sigma_w2_2: raw.sigma_w2_2.unwrap_or(d.sigma_w2_2),
            limits: RunLimits {
                block_length: raw.block_length.unwrap_or(d.limits.block_length),
                min_errors: raw.min_errors.unwrap_or(d.limits.min_errors),
                max_blocks: raw.max_blocks.unwrap_or(d.limits.max_blocks),
                seed: raw.seed.unwrap_or(d.limits.seed),
                workers: raw.workers.unwrap_or(d.limits.workers),
            },
        };
        cfg.limits.validate()?;
        cfg.scenario()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn scenario(&self) -> Result<BroadcastScenario> {
        let weak = build_preset(self.weak_trellis, db_to_linear(self.weak_power_db))?;
        let strong = DpcSpec::from_preset(
            self.strong_trellis,
            db_to_linear(self.design_power_db),
            self.r,
            self.bin_strategy,
            self.alpha,
        )?;
        BroadcastScenario::new(weak, strong, self.sigma_w1_2, self.sigma_w2_2)
    }
}

/// Error counts for one decoded message stream of a broadcast run.
#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastRow {
    /// `strong`, `weak`, or `weak_via_strong` (the weak message read off the
    /// dirt recovered by the strong receiver).
    pub user: &'static str,
    pub noise_variance: f64,
    /// Total transmit power over the receiver's noise variance, in dB
    /// (infinite for a noiseless receiver).
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub blocks: u64,
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct BroadcastTally {
    strong_bits: u64,
    strong_errors: u64,
    weak_bits: u64,
    weak_errors: u64,
    via_strong_errors: u64,
    energy: CompensatedSum,
    symbols: u64,
}

impl BroadcastTally {
    fn merge(&mut self, o: &Self) {
        self.strong_bits += o.strong_bits;
        self.strong_errors += o.strong_errors;
        self.weak_bits += o.weak_bits;
        self.weak_errors += o.weak_errors;
        self.via_strong_errors += o.via_strong_errors;
        self.energy.merge(&o.energy);
        self.symbols += o.symbols;
    }
}

/// Simulates the broadcast scenario until the strong user has accumulated
/// `min_errors` bit errors or `max_blocks` blocks have run.
pub fn run_broadcast(config: &BroadcastConfig) -> Result<Vec<BroadcastRow>> {
    let sc = config.scenario()?;
    let n = config.limits.block_length;
    let seed = config.limits.seed;
    let block = |b: u64| -> Result<BroadcastTally> {
        let mut rng = stream_rng(seed, StreamId::new(b, StreamRole::Message));
        let mw = random_bits(&mut rng, n * sc.weak_rate());
        let ms = random_bits(&mut rng, n * sc.strong_rate());
        let blk = broadcast_encode(&sc, &mw, &ms)?;
        let strong = strong_user_receive(&sc, &blk.x_sum, &mut stream_rng(seed, StreamId::new(b, StreamRole::Noise)))?;
        let weak = weak_user_receive(&sc, &blk.x_sum, &mut stream_rng(seed, StreamId::new(b, StreamRole::WeakNoise)))?;
        Ok(BroadcastTally {
            strong_bits: ms.len() as u64,
            strong_errors: count_bit_errors(&ms, strong.message()),
            weak_bits: mw.len() as u64,
            weak_errors: count_bit_errors(&mw, &weak),
            via_strong_errors: count_bit_errors(&mw, &strong.weak_message),
            energy: energy(&blk.x_sum),
            symbols: n as u64,
        })
    };
    let min_errors = config.limits.min_errors;
    let out = run_blocks(&config.limits, block, BroadcastTally::merge, |t| t.strong_errors >= min_errors)?;
    let t = out.total;
    let power = t.energy.value() / t.symbols as f64;
    let row = |user, noise: f64, bits: u64, errors: u64| BroadcastRow {
        user,
        noise_variance: noise,
        snr_db: linear_to_db(power / noise),
        bits,
        errors,
        ber: errors as f64 / bits as f64,
        blocks: out.blocks,
        truncated: out.truncated,
    };
    Ok(vec![
        row("strong", config.sigma_w1_2, t.strong_bits, t.strong_errors),
        row("weak", config.sigma_w2_2, t.weak_bits, t.weak_errors),
        row("weak_via_strong", config.sigma_w1_2, t.weak_bits, t.via_strong_errors),
    ])
}

pub const BROADCAST_CSV_HEADER: [&str; 8] =
    ["user", "noise_variance", "snr_db", "bits", "errors", "ber", "blocks", "truncated"];

pub fn emit_broadcast_csv<W: Write>(rows: &[BroadcastRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BROADCAST_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.user.to_string(),
            fmt_f64(r.noise_variance),
            fmt_f64(r.snr_db),
            r.bits.to_string(),
            r.errors.to_string(),
            fmt_f64(r.ber),
            r.blocks.to_string(),
            r.truncated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable dump of a preset: constellation labels, partition indices
/// and the per-state transition and bin tables.
pub fn describe(preset: TrellisPreset, r: Option<usize>, strategy: BinStrategy) -> Result<String> {
    let k = f64::from(preset.constellation_kind().power_per_scale_sq());
    let t = build_preset(preset, k)?;
    let c = t.constellation();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "preset {preset}: {} states, r0 = {}, {} edges per state, {} coded bits",
        t.num_states(),
        t.r0(),
        t.edges_per_state(),
        t.coded_bits()
    );
    let _ = writeln!(s, "free distance^2 (unit grid spacing 2): {}", t.free_distance_sq());
    let _ = writeln!(s, "\nconstellation {} (grid coordinates, A = 1):", c.kind());
    let _ = writeln!(s, "label  partition  point");
    for label in 0..c.size() {
        let (x, y) = c.grid()[label];
        let _ = writeln!(s, "{label:5}  {:9}  ({x:+}, {y:+})", c.partition_index_of_label(label));
    }
    let _ = writeln!(s, "\ntransitions: state -> [edge: next/label]");
    for state in 0..t.num_states() {
        let row: Vec<String> = t
            .edges_from(state)
            .iter()
            .enumerate()
            .map(|(e, edge)| format!("{e}:{}/{}", edge.next_state, edge.label))
            .collect();
        let _ = writeln!(s, "{state:3} -> {}", row.join(" "));
    }
    let r = r.unwrap_or(1);
    if r >= 1 && r < t.r0() {
        let bins = crate::trellis::build_bins(&t, r, strategy)?;
        let _ = writeln!(s, "\nbins (r = {r}, {strategy}): state -> [message: edges]");
        for state in 0..t.num_states() {
            let row: Vec<String> = bins
                .bins_of(state)
                .iter()
                .enumerate()
                .map(|(m, edges)| format!("{m}:{edges:?}"))
                .collect();
            let _ = writeln!(s, "{state:3} -> {}", row.join(" "));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trellis: TrellisPreset) -> SimConfig {
        SimConfig {
            trellis,
            limits: RunLimits {
                block_length: 500,
                min_errors: 20,
                max_blocks: 40,
                seed: 9,
                workers: 1,
            },
            ..SimConfig::default()
        }
    }

    fn point(db: f64, alpha: f64, s2: f64) -> PointParams {
        PointParams {
            design_power_db: db,
            alpha,
            sigma_s2: s2,
        }
    }

    #[test]
    fn config_parsing_and_defaults() {
        let c = SimConfig::from_toml_str(
            "trellis = \"qam8_4state_r0_2\"\nconstellation = \"qam8\"\nsweep = \"alpha\"\nseed = 4\nworkers = 2\n",
        )
        .unwrap();
        assert_eq!(c.trellis, TrellisPreset::Qam8State4);
        assert_eq!(c.values.len(), 11);
        assert_eq!(c.limits.seed, 4);
        assert_eq!(c.limits.max_blocks, DEFAULT_MAX_BLOCKS);
        assert_eq!(c.points()[3].alpha, 0.3);
        assert!(SimConfig::from_toml_str("bogus = 1").is_err());
        assert!(SimConfig::from_toml_str("constellation = \"pam8\"").is_err());
        assert!(SimConfig::from_toml_str("block_length = 0").is_err());
        assert!(SimConfig::from_toml_str("values = []").is_err());
        assert!(SimConfig::from_toml_str("sweep = \"alpha\"\nvalues = [1.5]").is_err());
    }

    #[test]
    fn deterministic_replay() {
        let c = small(TrellisPreset::Qam16State8);
        let p = point(12.0, 0.9, 1.0);
        assert_eq!(run_point(&c, &p).unwrap(), run_point(&c, &p).unwrap());
    }

    #[test]
    fn workers_do_not_change_results() {
        let mut c = small(TrellisPreset::Qam8State4);
        let p = point(12.0, 0.9, 1.0);
        let one = run_point(&c, &p).unwrap();
        c.limits.workers = 3;
        assert_eq!(run_point(&c, &p).unwrap(), one);
    }

    #[test]
    fn stopping_rule() {
        let c = small(TrellisPreset::Qam16State8);
        let noisy = run_point(&c, &point(5.0, 0.9, 1.0)).unwrap();
        assert!(!noisy.truncated);
        assert!(noisy.errors >= 20);
        assert_eq!(noisy.bits, noisy.blocks * 500);
        assert_eq!(noisy.ber, noisy.errors as f64 / noisy.bits as f64);
        let clean = run_awgn_baseline(&SimConfig {
            values: vec![20.0],
            limits: RunLimits {
                max_blocks: 3,
                ..c.limits
            },
            ..c.clone()
        })
        .unwrap();
        assert_eq!(clean[0].errors, 0);
        assert!(clean[0].truncated);
        assert_eq!(clean[0].blocks, 3);
    }

    #[test]
    fn alpha_one_has_no_dirt_rate() {
        let c = small(TrellisPreset::Qam16State8);
        assert_eq!(run_point(&c, &point(10.0, 1.0, 1.0)).unwrap().dirt_ser, None);
        assert!(run_point(&c, &point(10.0, 0.9, 1.0)).unwrap().dirt_ser.is_some());
    }

    #[test]
    fn alpha_zero_power_is_codeword_power() {
        // x = u, so the measured SNR is the mean |u|^2 of the chosen codewords.
        let c = small(TrellisPreset::Qam16State8);
        let p = point(10.0, 0.0, 1.0);
        let snr = transmit_snr_db(&c, &p, 2).unwrap();
        let spec = c.spec(&p).unwrap();
        let params = ChannelParams::new(1.0, 1.0, 9).unwrap();
        let mut e = CompensatedSum::default();
        for b in 0..2 {
            let bits = random_bits(&mut stream_rng(9, StreamId::new(b, StreamRole::Message)), 500);
            let s = gen_dirt(500, &params, StreamId::new(b, StreamRole::Dirt));
            e.merge(&energy(pip_encode(&spec, &bits, &s).unwrap().u()));
        }
        assert_eq!(snr, linear_to_db(e.value() / 1000.0));
    }

    #[test]
    fn bisection_hits_target() {
        let c = small(TrellisPreset::Qam16State8);
        let pdb = design_power_for_snr(&c, 0.9, 1.0, 9.0, 0.05, 2).unwrap();
        let got = transmit_snr_db(&c, &point(pdb, 0.9, 1.0), 2).unwrap();
        assert!((got - 9.0).abs() <= 0.05);
    }

    fn bp(snr: f64, ber: f64) -> BerPoint {
        BerPoint {
            design_power_db: snr,
            alpha: 0.9,
            sigma_s2: 1.0,
            measured_snr_db: snr,
            bits: 1000,
            errors: (ber * 1000.0) as u64,
            ber,
            blocks: 1,
            dirt_ser: None,
            truncated: false,
        }
    }

    #[test]
    fn interpolation() {
        let pts = [bp(6.0, 1e-6), bp(4.0, 1e-4)];
        assert!((snr_at_ber(&pts, 1e-5).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(snr_at_ber(&pts, 1e-3), None);
        assert_eq!(snr_at_ber(&[bp(4.0, 1e-4), bp(6.0, 0.0)], 1e-5), None);
    }

    #[test]
    fn csv_shapes_and_roundtrip() {
        let mut buf = Vec::new();
        emit_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
        let mut p = bp(9.123456789012345, 1.0 / 3.0);
        p.dirt_ser = Some(0.1);
        let q = BerPoint {
            truncated: true,
            ..bp(1.0 / 7.0, 0.0)
        };
        let mut buf = Vec::new();
        emit_csv(&[p.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        let mut buf = Vec::new();
        emit_csv(&[p.clone(), q.clone()], &mut buf).unwrap();
        assert_eq!(parse_csv(&buf[..]).unwrap(), vec![p, q]);
    }

    #[test]
    fn broadcast_run_counts_all_users() {
        let cfg = BroadcastConfig {
            limits: RunLimits {
                block_length: 200,
                min_errors: 10,
                max_blocks: 5,
                seed: 3,
                workers: 1,
            },
            ..BroadcastConfig::default()
        };
        let rows = run_broadcast(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.bits == r.blocks * 200));
        let text = "weak_power_db = 8.0\nsigma_w1_2 = 0.0\nsigma_w2_2 = 0.5\nalpha = 0.3\n";
        let c = BroadcastConfig::from_toml_str(text).unwrap();
        assert_eq!(c.sigma_w2_2, 0.5);
        assert!(BroadcastConfig::from_toml_str("sigma_w1_2 = 2.0").is_err());
    }

    #[test]
    fn describe_lists_tables() {
        let d = describe(TrellisPreset::Qam8State4, None, BinStrategy::default()).unwrap();
        assert!(d.contains("4 states"));
        assert!(d.contains("bins (r = 1"));
    }
}
