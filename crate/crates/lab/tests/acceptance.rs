//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use muchnik_core::bits::{BitString, Family, FunctionTable};
use muchnik_core::bounds::{
    log2_covering_failure, log2_first_event, log2_second_event, min_family_exponent, CoveringParams, RejectionParams,
    DEFAULT_T_MAX,
};
use muchnik_core::covering::{
    generate_random_family, verify_covering_property, worst_uncovered_exact, Mode, VerifyConfig,
};
use muchnik_core::ddouble::DoubleDouble;
use muchnik_core::messaging::{bad_condition, bad_condition_decode, fresh_filter, xor_decode, xor_encode, C_MACHINE};
use muchnik_core::negative::{build_label_family, check_negative_preconditions, run_negative_pipeline, NegativeParams};
use muchnik_core::oracle::{bounded_search, run, Oracle, OracleConfig};
use muchnik_core::rejection::{generate_rejection_family, is_rejected, overlap_count, RejectionThreshold};
use muchnik_core::rng::derive_seed;
use muchnik_core::Rational;
use muchnik_lab::campaign::{all_pairs, covering_campaign, message_campaign, rejection_campaign, FKind, HKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let e = start.elapsed();
    check(e < limit, format!("runtime {e:.2?} exceeds {limit:?}"))
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

/// Uniform value in `0..bound` from a seed path.
fn draw(seed: u64, path: &[u64], bound: u64) -> u64 {
    derive_seed(seed, path) % bound
}

fn bound_algebra() -> Outcome {
    let start = Instant::now();
    let v = log2_covering_failure(&CoveringParams::new(1, 1, 1, 1).map_err(err)?).map_err(err)?;
    check(
        v == DoubleDouble::from_u64(3),
        format!("log2 bound at (1,1,1,1) is {v:?}, not 3"),
    )?;
    let t = min_family_exponent(3, 6, 4, DEFAULT_T_MAX)
        .map_err(err)?
        .ok_or("no feasible t")?;
    let at = |t: u32| log2_covering_failure(&CoveringParams::new(3, 6, 4, t).map_err(err)?).map_err(err);
    let (here, before) = (at(t)?, at(t - 1)?);
    check(here < DoubleDouble::ZERO, format!("bound at t*={t} is {here:?}"))?;
    check(before >= DoubleDouble::ZERO, format!("bound at t*-1 is {before:?}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!(
        "t*={t}, log2 bound {:.4} at t*, {:.4} at t*-1",
        here.to_f64(),
        before.to_f64()
    ))
}

/// Worst uncovered count over removed 6-subsets, by direct recursion over subsets.
fn naive_worst(family: &Family, b: u32) -> usize {
    let k = family.len();
    let points = 1usize << family.domain_bits();
    let mut best = 0;
    let mut removed = vec![false; k];
    fn rec(i: usize, left: usize, removed: &mut Vec<bool>, family: &Family, b: u32, points: usize, best: &mut usize) {
        if left == 0 {
            let unc = (0..points)
                .filter(|&a| (0..family.len()).all(|j| removed[j] || family.members()[j].get(a) != Some(b)))
                .count();
            *best = (*best).max(unc);
            return;
        }
        if family.len() - i < left {
            return;
        }
        removed[i] = true;
        rec(i + 1, left - 1, removed, family, b, points, best);
        removed[i] = false;
        rec(i + 1, left, removed, family, b, points, best);
    }
    rec(0, k / 2, &mut removed, family, b, points, &mut best);
    best
}

fn covering_exact() -> Outcome {
    let start = Instant::now();
    let mut discrepancies = 0;
    let mut lines = 0;
    for seed in 0..20 {
        let fam = generate_random_family(5, 2, 12, seed, 100).map_err(err)?;
        for b in 0..4 {
            let (fast, _) = worst_uncovered_exact(&fam, b, 12).map_err(err)?;
            if fast != naive_worst(&fam, b) {
                discrepancies += 1;
            }
            lines += 1;
        }
    }
    check(
        discrepancies == 0,
        format!("{discrepancies} discrepancies over {lines} lines"),
    )?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("{lines} lines, 0 discrepancies, {:.2?}", start.elapsed()))
}

fn covering_sampled() -> Outcome {
    let start = Instant::now();
    let t = min_family_exponent(3, 6, 4, DEFAULT_T_MAX)
        .map_err(err)?
        .ok_or("no feasible t")?;
    let config = VerifyConfig {
        mode: Some(Mode::Sampled),
        trials: 10_000,
        ..VerifyConfig::default()
    };
    let c = covering_campaign(3, 6, 4, t, 100, 0, &config).map_err(err)?;
    check(c.failures <= 5, format!("{} of 100 families fail", c.failures))?;
    within(start, Duration::from_secs(300))?;
    let worst = c.families.iter().map(|f| f.worst).max().unwrap_or(0);
    Ok(format!(
        "t={t}, {} of 100 fail threshold {}, largest worst {worst}, {:.2?}",
        c.failures,
        c.threshold,
        start.elapsed()
    ))
}

fn constant_family() -> Outcome {
    let (n, m) = (5u32, 3u32);
    let mut detail = Vec::new();
    for b0 in [0u32, 5] {
        let members = (0..16)
            .map(|_| FunctionTable::constant(n, m, b0))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let fam = Family::from_members(n, m, members).map_err(err)?;
        let r = verify_covering_property(&fam, 1, &VerifyConfig::default()).map_err(err)?;
        check(r.mode == Mode::Exact, "not exact mode")?;
        for line in &r.per_b {
            let want = if line.b == b0 { 0 } else { 1 << n };
            check(
                line.worst == want,
                format!("b0={b0}, b={}: worst {} != {want}", line.b, line.worst),
            )?;
        }
        detail.push(format!("b0={b0}: worst {} on b!=b0, 0 on b0", 1 << n));
    }
    Ok(detail.join("; "))
}

fn rejection_flagship() -> Outcome {
    let start = Instant::now();
    let eps = Rational::new(1, 9).map_err(err)?;
    let p = RejectionParams::with_lemma_size(512, 2, eps, 64).map_err(err)?;
    check(p.c_size == 3456, format!("|C| = {}", p.c_size))?;
    let (e1, e2) = (log2_first_event(&p), log2_second_event(&p));
    let minus_one = -DoubleDouble::ONE;
    check(e1 < minus_one, format!("first event log2 {:.4}", e1.to_f64()))?;
    check(e2 < minus_one, format!("second event log2 {:.4}", e2.to_f64()))?;
    let c = rejection_campaign(512, 2, eps, 64, FKind::Random, HKind::Adversarial, 20, 0).map_err(err)?;
    check(
        c.c_size == 3456 && c.h_budget == 864,
        format!("|C|={} budget={}", c.c_size, c.h_budget),
    )?;
    check(c.passes >= 19, format!("{} of 20 runs within 1/9", c.passes))?;
    within(start, Duration::from_secs(300))?;
    let worst = c.runs.iter().map(|r| r.fraction).fold(0.0, f64::max);
    Ok(format!(
        "log2 events {:.3}, {:.3}; {} of 20 runs pass, worst fraction {worst:.5}, {:.2?}",
        e1.to_f64(),
        e2.to_f64(),
        c.passes,
        start.elapsed()
    ))
}

fn rejection_secondary() -> Outcome {
    let eps = Rational::new(1, 4).map_err(err)?;
    let c = generate_rejection_family(128, 8, eps, 16, 0).map_err(err)?;
    check(c.len() == 2304, format!("|C| = {}", c.len()))?;
    let th = RejectionThreshold::new(128, 8);
    check(th.max_allowed() == 64, format!("threshold {}", th.max_allowed()))?;
    check(!th.exceeded_by(64) && th.exceeded_by(65), "threshold is not 64")?;
    for i in 0..16 {
        let me = c.members()[i].clone();
        let alone = Family::from_members(7, 3, vec![me]).map_err(err)?;
        check(
            is_rejected(&c.members()[i], &alone).map_err(err)?.is_some(),
            format!("member {i} not self-rejected"),
        )?;
    }
    let mut total = 0usize;
    for k in 0..1000u64 {
        let i = draw(0, &[7, k, 0], c.len() as u64) as usize;
        let mut j = draw(0, &[7, k, 1], c.len() as u64 - 1) as usize;
        if j >= i {
            j += 1;
        }
        total += overlap_count(&c.members()[i], &c.members()[j]).map_err(err)?;
    }
    let mean = total as f64 / 1000.0;
    check((12.0..=20.0).contains(&mean), format!("overlap mean {mean}"))?;
    Ok(format!(
        "threshold 64 < 128, self-overlap rejects, overlap mean {mean:.3}"
    ))
}

fn oracle_soundness() -> Outcome {
    let config = OracleConfig::default();
    let mut oracle = Oracle::new(config).map_err(err)?;
    let empty = BitString::empty();
    // Every string of plain complexity below 10 is the output of some program shorter than 10.
    let mut outputs = BTreeSet::new();
    for len in 0..10 {
        for p in BitString::all_of_len(len) {
            if let Some(y) = run(&p, &empty, config.steps).output() {
                outputs.insert(y);
            }
        }
    }
    let mut ks = Vec::new();
    for y in &outputs {
        let w = if y.len() <= config.max_output_len {
            oracle.plain_complexity(y).map_err(err)?
        } else {
            oracle.search_within(y, &empty, 9)
        };
        ks.push(w.ok_or_else(|| format!("no program found for {y}"))?.k);
    }
    for y in BitString::all_up_to(config.max_output_len) {
        if !outputs.contains(&y) {
            let k = oracle.plain_complexity(&y).map_err(err)?.map_or(usize::MAX, |w| w.k);
            check(k >= 10, format!("{y} has K={k} but no short program outputs it"))?;
        }
    }
    let mut counts = Vec::new();
    for k in 1..=10usize {
        let below = ks.iter().filter(|&&v| v < k).count();
        check(below < 1 << k, format!("{below} strings with K < {k}"))?;
        counts.push(below);
    }
    let entries: Vec<_> = oracle.memo_entries().collect();
    let mut replayed = 0;
    for (x, y, w) in &entries {
        check(w.k == w.witness.len(), format!("witness length mismatch for {y}"))?;
        check(
            run(&w.witness, x, config.steps).output() == Some(*y),
            format!("witness for {y} | {x} fails replay"),
        )?;
        replayed += 1;
    }
    let mut mono = 0;
    for i in 0..100u64 {
        let len = 1 + draw(1, &[i, 0], 10) as usize;
        let y = BitString::from_value(draw(1, &[i, 1], 1 << len) as u128, len).map_err(err)?;
        let mut prev = usize::MAX;
        for steps in [1u64 << 4, 1 << 6, 1 << 8, 1 << 16] {
            let k = bounded_search(&y, &empty, config.l_max, steps).map_or(usize::MAX, |w| w.k);
            check(k <= prev, format!("K_T({y}) rises from {prev} to {k} at T={steps}"))?;
            prev = k;
        }
        mono += 1;
    }
    Ok(format!(
        "counts below k=1..10: {counts:?}; {replayed} memo entries replayed; {mono} strings monotone in T"
    ))
}

fn gap_demonstration() -> Outcome {
    let mut oracle = Oracle::new(OracleConfig::default()).map_err(err)?;
    let mut checked = 0;
    let mut strict = 0;
    for y in BitString::all_of_len(6) {
        if checked == 20 {
            break;
        }
        let k = oracle.plain_complexity(&y).map_err(err)?.map_or(usize::MAX, |w| w.k);
        if k < 6 {
            continue;
        }
        let xs = oracle.condition_set(&y, 3, 8).map_err(err)?;
        check(!xs.is_empty(), format!("empty condition set for {y}"))?;
        let mut pointwise = 0;
        for x in &xs {
            let w = oracle
                .cond_complexity(&y, x)
                .map_err(err)?
                .ok_or("conditional search failed")?;
            pointwise = pointwise.max(w.k);
        }
        let uniform = oracle
            .uniform_complexity(&xs, &y)
            .ok_or_else(|| format!("no uniform program for {y}"))?
            .k;
        check(
            uniform >= pointwise,
            format!("{y}: uniform {uniform} < pointwise {pointwise}"),
        )?;
        if uniform > pointwise {
            strict += 1;
        }
        checked += 1;
    }
    check(checked == 20, format!("only {checked} incompressible 6-bit strings"))?;
    check(strict >= 1, "no strict case")?;
    Ok(format!("{checked} strings, strict in {strict}"))
}

fn messaging() -> Outcome {
    let mut violations = 0;
    for s in 0..10_000u64 {
        let len = 1 + draw(2, &[s, 0], 32) as usize;
        let stream: Vec<(BitString, BitString)> = (0..len as u64)
            .map(|i| {
                let a = BitString::from_value(draw(2, &[s, i, 1], 8) as u128, 3).unwrap();
                let b = BitString::from_value(draw(2, &[s, i, 2], 8) as u128, 3).unwrap();
                (a, b)
            })
            .collect();
        let kept = fresh_filter(stream.iter().copied());
        let (mut firsts, mut seconds, mut expect) = (BTreeSet::new(), BTreeSet::new(), Vec::new());
        for (a, b) in &stream {
            if !firsts.contains(a) && !seconds.contains(b) {
                firsts.insert(*a);
                seconds.insert(*b);
                expect.push((*a, *b));
            }
        }
        if kept.pairs() != expect.as_slice() {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} fresh-filter violations"))?;
    let pairs = all_pairs(4);
    for (a, b) in &pairs {
        let f = xor_encode(a, b).map_err(err)?;
        check(
            xor_decode(a, &f).map_err(err)? == *b,
            format!("xor round trip fails on {a},{b}"),
        )?;
    }
    check((0..=8).contains(&C_MACHINE), format!("C_MACHINE = {C_MACHINE}"))?;
    let oracle = Oracle::new(OracleConfig::default()).map_err(err)?;
    let camp = message_campaign(&pairs, &oracle).map_err(err)?;
    let s = &camp.summary;
    check(s.pairs == 256, format!("{} pairs", s.pairs))?;
    check(
        s.upper_holds && s.max_excess <= C_MACHINE,
        format!("upper bound fails, max excess {}", s.max_excess),
    )?;
    let mut bad = 0;
    for a in BitString::all_of_len(6) {
        for b in BitString::all_of_len(6) {
            let c = bad_condition(&a, &b).map_err(err)?;
            if bad_condition_decode(&c, &a.xor(&b).map_err(err)?).map_err(err)? != (a, b) {
                bad += 1;
            }
        }
    }
    check(bad == 0, format!("{bad} bad-condition decode failures"))?;
    Ok(format!(
        "10^4 streams clean; 256 xor round trips; upper bound holds, max excess {} <= c_machine {C_MACHINE}; 4096 bad-condition decodes",
        s.max_excess
    ))
}

fn negative_flagship() -> Outcome {
    let start = Instant::now();
    let p = NegativeParams::new(9, 1, 3, 1);
    let pre = check_negative_preconditions(&p);
    check(pre.pass, format!("preconditions fail: {}", pre.failures()))?;
    let mut oracle = Oracle::new(OracleConfig::default()).map_err(err)?;
    let lf = build_label_family(&p, &mut oracle).map_err(err)?;
    let inv = lf.invariants().map_err(err)?;
    check(inv.holds, "label invariants fail")?;
    for u in &inv.per_label {
        check(
            (u.used as u64) <= u.cap,
            format!("label {} uses {} of {}", u.label, u.used, u.cap),
        )?;
    }
    check(
        inv.labeled <= inv.phi,
        format!("{} labeled of {}", inv.labeled, inv.phi),
    )?;
    let r = run_negative_pipeline(&p, 42, &mut oracle).map_err(err)?;
    check(r.pairs == 1024, format!("{} pairs", r.pairs))?;
    check(
        r.covered * 9 >= r.pairs * 8,
        format!("covered {} of {}", r.covered, r.pairs),
    )?;
    check(r.overlap_bound == 1024, format!("overlap bound {}", r.overlap_bound))?;
    check(r.max_overlap <= 512, format!("max overlap {}", r.max_overlap))?;
    check(r.overlap_ok, "overlap check fails")?;
    check(
        r.eavesdrop_exact == r.eavesdrop_attempts && r.eavesdrop_ok,
        format!(
            "eavesdropper exact on {} of {}",
            r.eavesdrop_exact, r.eavesdrop_attempts
        ),
    )?;
    check(r.pass, "pipeline verdict fails")?;
    within(start, Duration::from_secs(600))?;
    Ok(format!(
        "covered {}/{}, {} counterexamples, max overlap {} <= 512, {} labeled triples, eavesdropper {}/{}, {:.2?}",
        r.covered,
        r.pairs,
        r.counterexamples,
        r.max_overlap,
        r.triples,
        r.eavesdrop_exact,
        r.eavesdrop_attempts,
        start.elapsed()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("bound algebra", bound_algebra),
        ("covering, exact regime", covering_exact),
        ("covering, sampled regime", covering_sampled),
        ("constant family", constant_family),
        ("rejection, flagship instance", rejection_flagship),
        ("rejection, secondary instance", rejection_secondary),
        ("oracle soundness", oracle_soundness),
        ("uniform complexity gap", gap_demonstration),
        ("messaging", messaging),
        ("negative pipeline, flagship", negative_flagship),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
