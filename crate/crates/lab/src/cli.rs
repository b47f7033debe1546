//! Command-line front end.
//!
//! Exit codes: 0 when every verdict passes, 1 when a verification verdict
//! fails, 2 on usage or input errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use muchnik_core::bits::BitString;
use muchnik_core::bounds::{
    check_lemma_preconditions, log2_first_event, log2_second_event, min_family_exponent, min_overlap_constant,
    rejection_family_size, rejection_family_terms, scan_family_exponent, scan_overlap_constant, RejectionParams,
    ScanPoint,
};
use muchnik_core::covering::{
    generate_covering_family, CoveringReport, Mode, VerifyConfig, DEFAULT_EXACT_LIMIT, DEFAULT_TRIALS,
};
use muchnik_core::ddouble::DoubleDouble;
use muchnik_core::messaging::{build_message, decode_message, fresh_filter, message_advice, Advice};
use muchnik_core::negative::{
    build_label_family, check_negative_preconditions, run_negative_pipeline, NegativeParams, NegativeReport,
    PreconditionReport,
};
use muchnik_core::oracle::{Oracle, OracleConfig};
use muchnik_core::ratio::Rational;
use muchnik_core::rejection::{generate_rejection_family, uncovered_pairs, CoveragePairReport};
use serde::Serialize;
use serde_json::{json, Value};

use crate::campaign::{
    all_pairs, make_f, make_h, message_campaign, rejection_campaign, verify_covering_parallel, with_threads, FKind,
    HKind, MessageCampaign, RejectionCampaign,
};
use crate::formats::{load_family, load_hmap, save_family, save_hmap, save_labels};
use crate::manifest::{to_csv, to_json, RunManifest, Tabular};
use crate::oracle_io::{cache_dir, dump_records, load_oracle, save_oracle, write_dump, DumpRecord};

#[derive(Parser, Debug)]
#[command(
    name = "muchnik-lab",
    version,
    about = "Covering families, complexity oracle and secret-message experiments"
)]
pub struct Cli {
    /// Seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate failure bounds for either lemma.
    Bounds(BoundsArgs),
    #[command(subcommand)]
    Covering(CoveringCmd),
    #[command(subcommand)]
    Rejection(RejectionCmd),
    #[command(subcommand)]
    Oracle(OracleCmd),
    #[command(subcommand)]
    Message(MessageCmd),
    #[command(subcommand)]
    Negative(NegativeCmd),
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected lo..hi, got {s:?}"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: u32 = lo.parse().map_err(|_| format!("bad lower bound in {s:?}"))?;
    let hi: u32 = hi.parse().map_err(|_| format!("bad upper bound in {s:?}"))?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_bits(s: &str) -> Result<BitString, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma {
    Covering,
    Rejection,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    pub lemma: Lemma,
    /// Codomain bits (covering).
    #[arg(long)]
    pub m: Option<u32>,
    /// Domain bits (covering).
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub s: Option<u32>,
    #[arg(long)]
    pub t: Option<u32>,
    /// Scan t over lo..hi (inclusive).
    #[arg(long, value_parser = parse_range)]
    pub scan_t: Option<(u32, u32)>,
    /// Scan s over lo..hi (inclusive); needs --t.
    #[arg(long, value_parser = parse_range, conflicts_with = "scan_t")]
    pub scan_s: Option<(u32, u32)>,
    #[arg(long)]
    pub a_size: Option<u64>,
    #[arg(long)]
    pub b_size: Option<u64>,
    #[arg(long, value_parser = parse_rational)]
    pub epsilon: Option<Rational>,
    #[arg(long)]
    pub phi: Option<u64>,
    /// Family size to evaluate (default: the lemma's size).
    #[arg(long)]
    pub c_size: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum CoveringCmd {
    /// Generate a random family of 2^t tables B^n -> B^m.
    Gen(CoveringGen),
    /// Check that every half-subfamily leaves fewer than s 2^m points uncovered on each line.
    Verify(CoveringVerify),
}

#[derive(Args, Debug, Serialize)]
pub struct CoveringGen {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub t: u32,
    /// Output MFAM file.
    #[arg(long)]
    pub family: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Args, Debug, Serialize)]
pub struct CoveringVerify {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub s: u64,
    /// Default: exact when the family has at most --exact-limit members.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
}

#[derive(Subcommand, Debug)]
pub enum RejectionCmd {
    /// Generate C, F or h for the rejection lemma.
    Gen(RejectionGen),
    /// Count uncovered pairs, from files or over a seeded campaign.
    Verify(RejectionVerify),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    C,
    RandomF,
    AdversarialF,
    RandomH,
    AdversarialH,
}

#[derive(Args, Debug, Serialize)]
pub struct RejectionGen {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    /// |A| = 2^a_bits.
    #[arg(long)]
    pub a_bits: Option<u32>,
    /// |B| = 2^b_bits.
    #[arg(long)]
    pub b_bits: Option<u32>,
    #[arg(long, value_parser = parse_rational)]
    pub epsilon: Option<Rational>,
    #[arg(long)]
    pub phi: Option<u64>,
    /// Existing C (for F and h kinds).
    #[arg(long)]
    pub c: Option<PathBuf>,
    /// Existing F (for adversarial h).
    #[arg(long)]
    pub f: Option<PathBuf>,
    /// Members of F (default Phi) or h-line size (default floor(|C|/4)).
    #[arg(long)]
    pub count: Option<usize>,
    /// Output file: MFAM for C and F, JSON for h.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FKindArg {
    Random,
    Adversarial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HKindArg {
    Empty,
    Random,
    Adversarial,
}

#[derive(Args, Debug, Serialize)]
pub struct RejectionVerify {
    #[arg(long, value_parser = parse_rational)]
    pub epsilon: Rational,
    #[arg(long)]
    pub phi: u64,
    #[arg(long, requires = "f")]
    pub c: Option<PathBuf>,
    #[arg(long, requires = "c")]
    pub f: Option<PathBuf>,
    /// h-map JSON; overrides --h-kind.
    #[arg(long, requires = "c")]
    pub h: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = HKindArg::Adversarial)]
    pub h_kind: HKindArg,
    /// Campaign mode (no files): |A| = 2^a_bits.
    #[arg(long, conflicts_with = "c", required_unless_present = "c")]
    pub a_bits: Option<u32>,
    #[arg(long, conflicts_with = "c", required_unless_present = "c")]
    pub b_bits: Option<u32>,
    #[arg(long, value_enum, default_value_t = FKindArg::Random)]
    pub f_kind: FKindArg,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Campaign passes when at least this many runs pass (default: all).
    #[arg(long)]
    pub min_pass: Option<usize>,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct OracleArgs {
    /// Longest program searched.
    #[arg(long, default_value_t = 16)]
    pub l_max: usize,
    /// Step bound T.
    #[arg(long, default_value_t = 1 << 16)]
    pub steps: u64,
    /// Longest memoized output.
    #[arg(long, default_value_t = 10)]
    pub max_out: usize,
}

impl OracleArgs {
    fn config(&self) -> OracleConfig {
        OracleConfig {
            l_max: self.l_max,
            steps: self.steps,
            max_output_len: self.max_out,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum OracleCmd {
    /// K(y) or K(y | x).
    Query(OracleQuery),
    /// Fill the memo for all outputs up to a length and write it as JSON lines.
    Dump(OracleDump),
}

#[derive(Args, Debug, Serialize)]
pub struct OracleQuery {
    #[arg(long, value_parser = parse_bits)]
    pub y: BitString,
    #[arg(long, value_parser = parse_bits)]
    pub x: Option<BitString>,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct OracleDump {
    #[arg(long, default_value_t = 6)]
    pub up_to: usize,
    /// Conditions to tabulate (default: the empty condition).
    #[arg(long = "cond", value_parser = parse_bits)]
    pub conds: Vec<BitString>,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Subcommand, Debug)]
pub enum MessageCmd {
    /// Lines `a_hex b_hex` -> messages with decoder advice.
    Encode(MessageIo),
    /// Lines `a_hex f ordinal` (f as 0/1 text, `-` if empty) -> b.
    Decode(MessageIo),
    /// Secrecy measurements for pairs (or all pairs with --all).
    Report(MessageReport),
    /// Lines `a_hex b_hex` -> the fresh-pair bijection.
    Filter(MessageIo),
}

#[derive(Args, Debug, Serialize)]
pub struct MessageIo {
    /// Input file (default: stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Bit length of a and b.
    #[arg(long, default_value_t = 4)]
    pub bits: usize,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct MessageReport {
    #[command(flatten)]
    pub io: MessageIo,
    /// Use every pair of --bits strings instead of the input.
    #[arg(long)]
    pub all: bool,
}

#[derive(Subcommand, Debug)]
pub enum NegativeCmd {
    /// Evaluate the theorem's preconditions.
    Check(NegativeArgs),
    /// Build the label-indexed family and write it with its labels.
    Build(NegativeBuild),
    /// End-to-end run: C, F, h, counterexamples and the eavesdropper.
    Pipeline(NegativeArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct NegativeArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub l: u32,
    #[arg(long, default_value_t = 1)]
    pub alpha: u32,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

impl NegativeArgs {
    fn params(&self) -> NegativeParams {
        NegativeParams::new(self.m, self.n, self.l, self.alpha)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct NegativeBuild {
    #[command(flatten)]
    pub args: NegativeArgs,
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
}

/// Parses `args` and runs the command, writing reports to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let threads = cli.threads;
    let result = match with_threads(threads, || dispatch(&cli)) {
        Ok(r) => r,
        Err(e) => Err(e.into()),
    };
    match result {
        Ok(output) => {
            let written = match &cli.report {
                Some(path) => fs::write(path, &output.text).with_context(|| format!("writing {}", path.display())),
                None => out.write_all(output.text.as_bytes()).map_err(Into::into),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e:#}");
                return 2;
            }
            if output.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

struct Output {
    text: String,
    pass: bool,
}

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn manifest<P: Serialize>(&self, subcommand: &str, operation: &'static str, params: &P) -> Result<RunManifest> {
        Ok(RunManifest::new(
            subcommand,
            operation,
            serde_json::to_value(params)?,
            self.cli.seed,
        ))
    }

    fn emit<R: Serialize + Tabular>(&self, manifest: &RunManifest, report: &R, pass: bool) -> Result<Output> {
        let text = match self.cli.format {
            OutputFormat::Json => to_json(manifest, report)?,
            OutputFormat::Csv => to_csv(manifest, report)?,
        };
        Ok(Output { text, pass })
    }
}

fn dispatch(cli: &Cli) -> Result<Output> {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Bounds(a) => bounds(&ctx, a),
        Command::Covering(CoveringCmd::Gen(a)) => covering_gen(&ctx, a),
        Command::Covering(CoveringCmd::Verify(a)) => covering_verify(&ctx, a),
        Command::Rejection(RejectionCmd::Gen(a)) => rejection_gen(&ctx, a),
        Command::Rejection(RejectionCmd::Verify(a)) => rejection_verify(&ctx, a),
        Command::Oracle(OracleCmd::Query(a)) => oracle_query(&ctx, a),
        Command::Oracle(OracleCmd::Dump(a)) => oracle_dump(a),
        Command::Message(MessageCmd::Encode(a)) => message_encode(&ctx, a),
        Command::Message(MessageCmd::Decode(a)) => message_decode(&ctx, a),
        Command::Message(MessageCmd::Report(a)) => message_report(&ctx, a),
        Command::Message(MessageCmd::Filter(a)) => message_filter(&ctx, a),
        Command::Negative(NegativeCmd::Check(a)) => negative_check(&ctx, a),
        Command::Negative(NegativeCmd::Build(a)) => negative_build(&ctx, a),
        Command::Negative(NegativeCmd::Pipeline(a)) => negative_pipeline(&ctx, a),
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("--{flag} is required here"))
}

fn kv_rows(v: &Value) -> Vec<Vec<String>> {
    match v {
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                vec![k.clone(), s]
            })
            .collect(),
        other => vec![vec!["value".into(), other.to_string()]],
    }
}

/// Any report viewed as `key,value` rows.
#[derive(Serialize)]
#[serde(transparent)]
struct KeyValue<R: Serialize>(R);

impl<R: Serialize> Tabular for KeyValue<R> {
    fn header(&self) -> Vec<&'static str> {
        vec!["key", "value"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        kv_rows(&serde_json::to_value(&self.0).unwrap_or(Value::Null))
    }
}

fn fmt_dd(v: DoubleDouble) -> String {
    format!("{:.12}", v.to_f64())
}

#[derive(Serialize)]
struct CoveringScanReport {
    m: u32,
    n: u32,
    scanned: &'static str,
    fixed: u32,
    points: Vec<ScanPoint>,
    /// Least feasible value in the scanned range.
    optimum: Option<u32>,
}

impl Tabular for CoveringScanReport {
    fn header(&self) -> Vec<&'static str> {
        vec![self.scanned, "log2_bound", "feasible"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| vec![p.value.to_string(), fmt_dd(p.log2_bound), p.feasible.to_string()])
            .collect()
    }
}

#[derive(Serialize)]
struct RejectionBoundReport {
    a_size: u64,
    b_size: u64,
    epsilon: Rational,
    phi: u64,
    preconditions_hold: bool,
    violation: Option<String>,
    lemma_size: Option<u64>,
    size_terms: [DoubleDouble; 3],
    c_size: Option<u64>,
    log2_first_event: Option<DoubleDouble>,
    log2_second_event: Option<DoubleDouble>,
}

fn bounds(ctx: &Ctx, a: &BoundsArgs) -> Result<Output> {
    match a.lemma {
        Lemma::Covering => {
            let (m, n) = (need(a.m, "m")?, need(a.n, "n")?);
            let report = if let Some((lo, hi)) = a.scan_s {
                let t = need(a.t, "t")?;
                CoveringScanReport {
                    m,
                    n,
                    scanned: "s",
                    fixed: t,
                    points: scan_overlap_constant(m, n, t, lo, hi)?,
                    optimum: min_overlap_constant(m, n, t, hi)?.filter(|&s| s >= lo),
                }
            } else {
                let s = need(a.s, "s")?;
                let (lo, hi) = match (a.scan_t, a.t) {
                    (Some(r), _) => r,
                    (None, Some(t)) => (t, t),
                    (None, None) => (1, muchnik_core::bounds::DEFAULT_T_MAX),
                };
                CoveringScanReport {
                    m,
                    n,
                    scanned: "t",
                    fixed: s,
                    points: scan_family_exponent(m, n, s, lo, hi)?,
                    optimum: min_family_exponent(m, n, s, hi)?.filter(|&t| t >= lo),
                }
            };
            let op = if report.scanned == "s" {
                "bounds::scan_overlap_constant"
            } else {
                "bounds::scan_family_exponent"
            };
            let manifest = ctx.manifest("bounds", op, a)?;
            ctx.emit(&manifest, &report, true)
        }
        Lemma::Rejection => {
            let (a_size, b_size) = (need(a.a_size, "a-size")?, need(a.b_size, "b-size")?);
            let epsilon = need(a.epsilon, "epsilon")?;
            let phi = need(a.phi, "phi")?;
            let pre = check_lemma_preconditions(a_size, b_size, epsilon, phi);
            let mut report = RejectionBoundReport {
                a_size,
                b_size,
                epsilon,
                phi,
                preconditions_hold: pre.is_ok(),
                violation: pre.as_ref().err().map(|v| format!("{}: {}", v.inequality, v.detail)),
                lemma_size: None,
                size_terms: rejection_family_terms(b_size, epsilon, phi),
                c_size: None,
                log2_first_event: None,
                log2_second_event: None,
            };
            if pre.is_ok() {
                let lemma_size = rejection_family_size(a_size, b_size, epsilon, phi)?;
                let params = RejectionParams::new(a_size, b_size, epsilon, phi, a.c_size.unwrap_or(lemma_size))?;
                report.lemma_size = Some(lemma_size);
                report.c_size = Some(params.c_size);
                report.log2_first_event = Some(log2_first_event(&params));
                report.log2_second_event = Some(log2_second_event(&params));
            }
            let manifest = ctx.manifest("bounds", "bounds::log2_first_event+log2_second_event", a)?;
            let pass = report.preconditions_hold;
            ctx.emit(&manifest, &KeyValue(report), pass)
        }
    }
}

fn covering_gen(ctx: &Ctx, a: &CoveringGen) -> Result<Output> {
    let family = generate_covering_family(a.m, a.n, a.t, ctx.cli.seed)?;
    save_family(&a.family, &family).with_context(|| format!("writing {}", a.family.display()))?;
    let report = json!({
        "m": a.m, "n": a.n, "t": a.t, "count": family.len(),
        "family": a.family.display().to_string(),
    });
    let manifest = ctx.manifest("covering gen", "covering::generate_covering_family", a)?;
    ctx.emit(&manifest, &KeyValue(report), true)
}

fn read_family(path: &Path) -> Result<muchnik_core::bits::Family> {
    load_family(path).with_context(|| format!("reading {}", path.display()))
}

impl Tabular for CoveringReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["b", "worst", "removed_count", "threshold"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.per_b
            .iter()
            .map(|l| {
                vec![
                    l.b.to_string(),
                    l.worst.to_string(),
                    l.removed.len().to_string(),
                    self.threshold.to_string(),
                ]
            })
            .collect()
    }
}

fn covering_verify(ctx: &Ctx, a: &CoveringVerify) -> Result<Output> {
    let family = read_family(&a.family)?;
    let config = VerifyConfig {
        mode: a.mode.map(|m| match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Sampled => Mode::Sampled,
        }),
        exact_limit: a.exact_limit,
        trials: a.trials,
        seed: ctx.cli.seed,
    };
    let report = verify_covering_parallel(&family, a.s, &config)?;
    let manifest = ctx.manifest("covering verify", "covering::verify_covering_property", a)?;
    let pass = report.verdict.is_pass();
    ctx.emit(&manifest, &report, pass)
}

fn rejection_gen(ctx: &Ctx, a: &RejectionGen) -> Result<Output> {
    let seed = ctx.cli.seed;
    let load_c = || -> Result<muchnik_core::bits::Family> { read_family(need(a.c.as_ref(), "c")?) };
    let (op, summary) = match a.kind {
        GenKind::C => {
            let (ab, bb) = (need(a.a_bits, "a-bits")?, need(a.b_bits, "b-bits")?);
            if ab >= 63 || bb >= 63 {
                bail!("a-bits and b-bits must be below 63");
            }
            let c =
                generate_rejection_family(1 << ab, 1 << bb, need(a.epsilon, "epsilon")?, need(a.phi, "phi")?, seed)?;
            save_family(&a.out, &c)?;
            ("rejection::generate_rejection_family", json!({"count": c.len()}))
        }
        GenKind::RandomF | GenKind::AdversarialF => {
            let c = load_c()?;
            let count = match a.count {
                Some(k) => k,
                None => need(a.phi, "phi")? as usize,
            };
            let kind = if a.kind == GenKind::RandomF {
                FKind::Random
            } else {
                FKind::Adversarial
            };
            let f = make_f(kind, &c, count, seed)?;
            save_family(&a.out, &f)?;
            (
                if kind == FKind::Random {
                    "rejection::random_f"
                } else {
                    "rejection::adversarial_f"
                },
                json!({"count": f.len()}),
            )
        }
        GenKind::RandomH | GenKind::AdversarialH => {
            let c = load_c()?;
            let budget = a.count.unwrap_or(c.len() / 4);
            let (kind, f, op) = if a.kind == GenKind::RandomH {
                (
                    HKind::Random,
                    muchnik_core::bits::Family::new(c.domain_bits(), c.codomain_bits())?,
                    "rejection::random_h",
                )
            } else {
                (
                    HKind::Adversarial,
                    read_family(need(a.f.as_ref(), "f")?)?,
                    "rejection::adversarial_h",
                )
            };
            let h = make_h(kind, &c, &f, budget, seed)?;
            save_hmap(&a.out, &h, c.codomain_bits())?;
            (op, json!({"budget": budget, "lines": h.b_count()}))
        }
    };
    let mut report = summary;
    report["out"] = json!(a.out.display().to_string());
    let manifest = ctx.manifest("rejection gen", op, a)?;
    ctx.emit(&manifest, &KeyValue(report), true)
}

impl Tabular for RejectionCampaign {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "seed",
            "uncovered",
            "fraction",
            "rejected",
            "verdict",
            "uncovered_random_h",
        ]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.runs
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    r.uncovered.to_string(),
                    r.fraction.to_string(),
                    r.rejected.to_string(),
                    if r.verdict.is_pass() { "pass" } else { "fail" }.to_string(),
                    r.uncovered_random_h.to_string(),
                ]
            })
            .collect()
    }
}

fn h_kind(k: HKindArg) -> HKind {
    match k {
        HKindArg::Empty => HKind::Empty,
        HKindArg::Random => HKind::Random,
        HKindArg::Adversarial => HKind::Adversarial,
    }
}

fn rejection_verify(ctx: &Ctx, a: &RejectionVerify) -> Result<Output> {
    if let (Some(cp), Some(fp)) = (&a.c, &a.f) {
        let c = read_family(cp)?;
        let f = read_family(fp)?;
        let h = match &a.h {
            Some(p) => load_hmap(p, c.codomain_bits()).with_context(|| format!("reading {}", p.display()))?,
            None => make_h(h_kind(a.h_kind), &c, &f, c.len() / 4, ctx.cli.seed)?,
        };
        let report: CoveragePairReport = uncovered_pairs(&c, &f, &h, a.epsilon, a.phi)?;
        let manifest = ctx.manifest("rejection verify", "rejection::uncovered_pairs", a)?;
        let pass = report.verdict.is_pass();
        return ctx.emit(&manifest, &KeyValue(report), pass);
    }
    let (ab, bb) = (need(a.a_bits, "a-bits")?, need(a.b_bits, "b-bits")?);
    if ab >= 63 || bb >= 63 {
        bail!("a-bits and b-bits must be below 63");
    }
    let f_kind = match a.f_kind {
        FKindArg::Random => FKind::Random,
        FKindArg::Adversarial => FKind::Adversarial,
    };
    let report = rejection_campaign(
        1 << ab,
        1 << bb,
        a.epsilon,
        a.phi,
        f_kind,
        h_kind(a.h_kind),
        a.runs,
        ctx.cli.seed,
    )?;
    let pass = report.passes >= a.min_pass.unwrap_or(a.runs);
    let manifest = ctx.manifest("rejection verify", "rejection::uncovered_pairs", a)?;
    ctx.emit(&manifest, &report, pass)
}

fn open_oracle(args: &OracleArgs) -> Result<Oracle> {
    let dir = cache_dir();
    Ok(load_oracle(args.config(), dir.as_deref())?)
}

fn close_oracle(oracle: &Oracle) -> Result<()> {
    if let Some(dir) = cache_dir() {
        save_oracle(oracle, &dir).with_context(|| format!("writing oracle cache to {}", dir.display()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct QueryReport {
    found: bool,
    record: Option<DumpRecord>,
}

impl Tabular for QueryReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["x", "y", "k", "witness_hex", "witness_bits", "T", "machine_id"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.record
            .iter()
            .map(|r| {
                vec![
                    r.x.to_string(),
                    r.y.map(|y| y.to_string()).unwrap_or_default(),
                    r.k.to_string(),
                    r.witness_hex.clone(),
                    r.witness_bits.to_string(),
                    r.steps.to_string(),
                    r.machine_id.clone(),
                ]
            })
            .collect()
    }
}

fn oracle_query(ctx: &Ctx, a: &OracleQuery) -> Result<Output> {
    let mut oracle = open_oracle(&a.oracle)?;
    let x = a.x.unwrap_or_default();
    let steps = oracle.config().steps;
    let l_max = oracle.config().l_max;
    let w = if a.y.len() <= oracle.config().max_output_len {
        oracle.cond_complexity(&a.y, &x)?
    } else {
        oracle.search_within(&a.y, &x, l_max)
    };
    close_oracle(&oracle)?;
    let record = w.map(|w| {
        if a.x.is_some() {
            DumpRecord::new(x, Some(a.y), &w, steps)
        } else {
            DumpRecord::new(a.y, None, &w, steps)
        }
    });
    let report = QueryReport {
        found: record.is_some(),
        record,
    };
    let manifest = ctx.manifest("oracle query", "oracle::cond_complexity", a)?;
    ctx.emit(&manifest, &report, true)
}

fn oracle_dump(a: &OracleDump) -> Result<Output> {
    let mut oracle = open_oracle(&a.oracle)?;
    if a.up_to > oracle.config().max_output_len {
        bail!(
            "--up-to {} exceeds --max-out {}",
            a.up_to,
            oracle.config().max_output_len
        );
    }
    let conds = if a.conds.is_empty() {
        vec![BitString::empty()]
    } else {
        a.conds.clone()
    };
    for x in &conds {
        for y in BitString::all_up_to(a.up_to) {
            oracle.cond_complexity(&y, x)?;
        }
    }
    close_oracle(&oracle)?;
    let mut buf = Vec::new();
    write_dump(&mut buf, &dump_records(&oracle))?;
    Ok(Output {
        text: String::from_utf8(buf)?,
        pass: true,
    })
}

fn read_input(path: Option<&Path>) -> Result<Vec<(usize, String)>> {
    let mut text = String::new();
    match path {
        Some(p) => {
            BufReader::new(fs::File::open(p).with_context(|| format!("reading {}", p.display()))?)
                .read_to_string(&mut text)?;
        }
        None => {
            std::io::stdin().lock().read_to_string(&mut text)?;
        }
    }
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn hex_bits(s: &str, bits: usize, line: usize) -> Result<BitString> {
    if s.len() != bits.div_ceil(4) {
        bail!("line {line}: expected {} hex digits, found {s:?}", bits.div_ceil(4));
    }
    BitString::from_hex(s, bits).with_context(|| format!("line {line}: bad hex {s:?}"))
}

fn read_pairs(io: &MessageIo) -> Result<Vec<(BitString, BitString)>> {
    read_input(io.input.as_deref())?
        .into_iter()
        .map(|(line, text)| {
            let toks: Vec<&str> = text.split_whitespace().collect();
            if toks.len() != 2 {
                bail!("line {line}: expected `a_hex b_hex`");
            }
            Ok((hex_bits(toks[0], io.bits, line)?, hex_bits(toks[1], io.bits, line)?))
        })
        .collect()
}

#[derive(Serialize)]
struct EncodedRow {
    a: BitString,
    b: BitString,
    f: BitString,
    ordinal: usize,
    /// `a_hex f ordinal`, the decoder's input line.
    line: String,
}

#[derive(Serialize)]
#[serde(transparent)]
struct Rows<T>(Vec<T>);

impl Tabular for Rows<EncodedRow> {
    fn header(&self) -> Vec<&'static str> {
        vec!["a", "b", "f", "ordinal"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| vec![r.a.to_string(), r.b.to_string(), r.f.to_string(), r.ordinal.to_string()])
            .collect()
    }
}

fn bits_or_dash(b: &BitString) -> String {
    if b.is_empty() {
        "-".into()
    } else {
        b.to_string()
    }
}

fn message_encode(ctx: &Ctx, a: &MessageIo) -> Result<Output> {
    let pairs = read_pairs(a)?;
    let mut oracle = open_oracle(&a.oracle)?;
    let mut rows = Vec::new();
    for (x, y) in pairs {
        let msg = build_message(&x, &y, &mut oracle)?;
        let advice = message_advice(&msg.f, &x, &y, &mut oracle)?;
        rows.push(EncodedRow {
            a: x,
            b: y,
            f: msg.f,
            ordinal: advice.ordinal,
            line: format!("{} {} {}", x.to_hex(), bits_or_dash(&msg.f), advice.ordinal),
        });
    }
    close_oracle(&oracle)?;
    let manifest = ctx.manifest("message encode", "messaging::build_message", a)?;
    ctx.emit(&manifest, &Rows(rows), true)
}

#[derive(Serialize)]
struct DecodedRow {
    a: BitString,
    f: BitString,
    ordinal: usize,
    b: Option<BitString>,
    error: Option<String>,
}

impl Tabular for Rows<DecodedRow> {
    fn header(&self) -> Vec<&'static str> {
        vec!["a", "f", "ordinal", "b", "error"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| {
                vec![
                    r.a.to_string(),
                    r.f.to_string(),
                    r.ordinal.to_string(),
                    r.b.map(|b| b.to_string()).unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect()
    }
}

fn message_decode(ctx: &Ctx, a: &MessageIo) -> Result<Output> {
    let mut parsed = Vec::new();
    for (line, text) in read_input(a.input.as_deref())? {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 3 {
            bail!("line {line}: expected `a_hex f ordinal`");
        }
        let x = hex_bits(toks[0], a.bits, line)?;
        let f: BitString = if toks[1] == "-" {
            BitString::empty()
        } else {
            toks[1]
                .parse()
                .with_context(|| format!("line {line}: bad message {:?}", toks[1]))?
        };
        let ordinal: usize = toks[2]
            .parse()
            .with_context(|| format!("line {line}: bad ordinal {:?}", toks[2]))?;
        parsed.push((x, f, ordinal));
    }
    let mut oracle = open_oracle(&a.oracle)?;
    let mut rows = Vec::new();
    for (x, f, ordinal) in parsed {
        let advice = Advice { b_len: a.bits, ordinal };
        let (b, error) = match decode_message(&f, &x, &advice, &mut oracle) {
            Ok(b) => (Some(b), None),
            Err(e) => (None, Some(e.to_string())),
        };
        rows.push(DecodedRow {
            a: x,
            f,
            ordinal,
            b,
            error,
        });
    }
    close_oracle(&oracle)?;
    let pass = rows.iter().all(|r| r.b.is_some());
    let manifest = ctx.manifest("message decode", "messaging::decode_message", a)?;
    ctx.emit(&manifest, &Rows(rows), pass)
}

impl Tabular for MessageCampaign {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "a",
            "b",
            "f",
            "candidates",
            "k_a",
            "k_b",
            "k_b_given_a",
            "k_b_given_f",
            "k_b_given_af",
            "slack",
            "upper_holds",
            "k_b_given_xor",
        ]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let s = &r.secrecy;
                vec![
                    r.a.to_string(),
                    r.b.to_string(),
                    r.f.to_string(),
                    r.candidates.to_string(),
                    s.k_a.to_string(),
                    s.k_b.to_string(),
                    s.k_b_given_a.to_string(),
                    s.k_b_given_f.to_string(),
                    s.k_b_given_af.to_string(),
                    s.slack.to_string(),
                    s.upper_holds.to_string(),
                    r.k_b_given_xor.to_string(),
                ]
            })
            .collect()
    }
}

fn message_report(ctx: &Ctx, a: &MessageReport) -> Result<Output> {
    let pairs = if a.all {
        if a.io.bits > 6 {
            bail!("--all supports at most 6 bits");
        }
        all_pairs(a.io.bits)
    } else {
        read_pairs(&a.io)?
    };
    let oracle = open_oracle(&a.io.oracle)?;
    let report = message_campaign(&pairs, &oracle)?;
    let manifest = ctx.manifest("message report", "messaging::secrecy_report", a)?;
    let pass = report.summary.upper_holds;
    ctx.emit(&manifest, &report, pass)
}

#[derive(Serialize)]
struct FilterReport {
    offered: usize,
    kept: Vec<(BitString, BitString)>,
}

impl Tabular for FilterReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["a", "b"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.kept
            .iter()
            .map(|(a, b)| vec![a.to_string(), b.to_string()])
            .collect()
    }
}

fn message_filter(ctx: &Ctx, a: &MessageIo) -> Result<Output> {
    let pairs = read_pairs(a)?;
    let kept = fresh_filter(pairs.iter().copied());
    let report = FilterReport {
        offered: pairs.len(),
        kept: kept.pairs().to_vec(),
    };
    let manifest = ctx.manifest("message filter", "messaging::fresh_filter", a)?;
    ctx.emit(&manifest, &report, true)
}

#[derive(Serialize)]
struct CheckReport {
    preconditions: PreconditionReport,
    big_n: u32,
    epsilon: Option<Rational>,
    phi: Option<u64>,
    c_size: Option<u64>,
}

impl Tabular for CheckReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["inequality", "holds", "detail"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.preconditions
            .items
            .iter()
            .map(|i| vec![i.inequality.to_string(), i.holds.to_string(), i.detail.clone()])
            .collect()
    }
}

fn negative_check(ctx: &Ctx, a: &NegativeArgs) -> Result<Output> {
    let p = a.params();
    let preconditions = check_negative_preconditions(&p);
    let epsilon = p.epsilon().ok();
    let phi = p.phi().ok();
    let c_size = match (epsilon, phi) {
        (Some(e), Some(phi)) if preconditions.pass && p.m < 63 && p.n < 63 => {
            rejection_family_size(1 << p.m, 1 << p.n, e, phi).ok()
        }
        _ => None,
    };
    let pass = preconditions.pass;
    let report = CheckReport {
        preconditions,
        big_n: p.big_n(),
        epsilon,
        phi,
        c_size,
    };
    let manifest = ctx.manifest("negative check", "negative::check_negative_preconditions", a)?;
    ctx.emit(&manifest, &report, pass)
}

fn negative_build(ctx: &Ctx, a: &NegativeBuild) -> Result<Output> {
    let mut oracle = open_oracle(&a.args.oracle)?;
    let lf = build_label_family(&a.args.params(), &mut oracle)?;
    close_oracle(&oracle)?;
    save_family(&a.family, lf.family())?;
    save_labels(&a.labels, lf.labels())?;
    let inv = lf.invariants()?;
    let report = json!({
        "triples": lf.triples().len(),
        "labeled": inv.labeled,
        "phi": inv.phi,
        "all_realized": inv.all_realized,
        "per_label": inv.per_label,
        "holds": inv.holds,
        "family": a.family.display().to_string(),
        "labels": a.labels.display().to_string(),
    });
    let manifest = ctx.manifest("negative build", "negative::build_label_family", a)?;
    ctx.emit(&manifest, &KeyValue(report), inv.holds)
}

fn negative_pipeline(ctx: &Ctx, a: &NegativeArgs) -> Result<Output> {
    let mut oracle = open_oracle(&a.oracle)?;
    let report: NegativeReport = run_negative_pipeline(&a.params(), ctx.cli.seed, &mut oracle)?;
    close_oracle(&oracle)?;
    let manifest = ctx.manifest("negative pipeline", "negative::run_negative_pipeline", a)?;
    let pass = report.pass;
    ctx.emit(&manifest, &KeyValue(report), pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("muchnik-lab").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn range_parser() {
        assert_eq!(parse_range("1..24"), Ok((1, 24)));
        assert_eq!(parse_range("3..=5"), Ok((3, 5)));
        assert!(parse_range("5..3").is_err());
        assert!(parse_range("5").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_args(&["bounds"]).0, 2);
        assert_eq!(run_args(&["bounds", "--lemma", "covering", "--bogus"]).0, 2);
        let (code, _, err) = run_args(&["bounds", "--lemma", "covering", "--m", "3"]);
        assert_eq!(code, 2);
        assert!(err.contains("--n"), "{err}");
    }

    #[test]
    fn covering_scan_finds_optimum() {
        let (code, out, _) = run_args(&[
            "bounds", "--lemma", "covering", "--m", "3", "--n", "6", "--s", "4", "--scan-t", "1..24",
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["report"]["optimum"], 7);
        assert_eq!(v["manifest"]["operation"], "bounds::scan_family_exponent");
    }

    #[test]
    fn rejection_bounds_report() {
        let (code, out, _) = run_args(&[
            "bounds",
            "--lemma",
            "rejection",
            "--a-size",
            "512",
            "--b-size",
            "2",
            "--epsilon",
            "1/9",
            "--phi",
            "64",
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["report"]["lemma_size"], 3456);
        let (code, _, _) = run_args(&[
            "bounds",
            "--lemma",
            "rejection",
            "--a-size",
            "16",
            "--b-size",
            "2",
            "--epsilon",
            "1/9",
            "--phi",
            "64",
        ]);
        assert_eq!(code, 1);
    }
}
