//! End-to-end acceptance checks. Every criterion runs at its pinned
//! tolerance; the single test prints one line per criterion and fails if
//! any of them does.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use ccf_harness::accuracy::run_methods;
use ccf_harness::config::AccuracySweep;
use ccf_harness::fpr::{count_collisions, run_membership};
use ccf_harness::occupancy::reference_occupancy;
use ccf_harness::{run_occupancy, AccuracyRow, ExperimentConfig, MultiplicityMode};
use ccf_sync::sync::wire::FRAME_OVERHEAD;
use ccf_sync::sync::{diff_decode, diff_query, synchronize, Method, SyncConfig};
use ccf_sync::theory::{ccf_fpr_bound, ccf_fpr_product, fingerprint_bits};
use ccf_sync::{Cbf, CbfParams, Ccf, CcfParams, CollisionDetector, Element, Exact, Multiset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn occupancy_table() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        occupancy_k: (1..=8).collect(),
        repetitions: 10,
        ..ExperimentConfig::default()
    };
    let rows = run_occupancy(&cfg);
    let elapsed = start.elapsed();
    check(rows.len() == 8, || format!("{} rows", rows.len()))?;
    for r in &rows {
        let occ = r.occupancy.0;
        let reference = reference_occupancy(r.k).ok_or("missing reference")?;
        check(r.buckets == 1 << (r.k + 7), || {
            format!("k={} b={}", r.k, r.buckets)
        })?;
        check(u32::from(r.fingerprint_bits) == r.k + 7, || {
            format!("k={} f", r.k)
        })?;
        check((0.955..=0.977).contains(&occ), || {
            format!("k={}: {occ}", r.k)
        })?;
        check((occ - reference).abs() <= 0.01, || {
            format!("k={}: {occ} vs {reference}", r.k)
        })?;
    }
    check(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    let occ: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.4}", r.occupancy.0))
        .collect();
    Ok(format!("occupancy {} in {:.1?}", occ.join(" "), elapsed))
}

fn membership_fpr() -> Outcome {
    let cfg = ExperimentConfig {
        fpr_bucket_exponents: vec![10],
        fpr_fingerprint_bits: (8..=12).collect(),
        probes: 100_000,
        repetitions: 1,
        ..ExperimentConfig::default()
    };
    let rows = run_membership(&cfg);
    let mut rates = Vec::new();
    for r in &rows {
        let bound: f64 = ccf_fpr_bound(4, u32::from(r.fingerprint_bits));
        let rate = r.measured.0;
        check(r.occupancy.unwrap().0 >= 0.9, || {
            format!("f={} underfilled", r.fingerprint_bits)
        })?;
        check(r.probes == Some(100_000), || "probe count".into())?;
        check(rate >= 0.5 * bound && rate <= 2.0 * bound, || {
            format!("f={}: {rate} vs bound {bound}", r.fingerprint_bits)
        })?;
        rates.push(rate);
    }
    check(ccf_fpr_bound::<f64>(4, 10) == 0.0078125, || {
        "bound at f=10".into()
    })?;
    for (w, r) in rows.windows(2).zip(rates.windows(2)) {
        let ratio = r[0] / r[1];
        check((1.4..=2.6).contains(&ratio), || {
            format!(
                "f={}->{}: ratio {ratio}",
                w[0].fingerprint_bits, w[1].fingerprint_bits
            )
        })?;
    }
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.5}")).collect();
    Ok(format!("fpr f=8..12: {}", shown.join(" ")))
}

fn mean_collisions(buckets: u32, f: u8, seeds: u64) -> f64 {
    let p = CcfParams::new(buckets, f);
    let total: usize = (0..seeds)
        .map(|s| count_collisions(&p.with_seed(s), p.slot_count(), 1000 + s))
        .sum();
    total as f64 / seeds as f64
}

fn collision_count() -> Outcome {
    let mut shown = Vec::new();
    for f in [8u8, 10, 12] {
        let m = mean_collisions(1 << f, f, 10);
        check((16.0..=48.0).contains(&m), || format!("b=2^{f}: mean {m}"))?;
        shown.push(format!("f={f}:{m:.1}"));
    }
    let single = mean_collisions(1 << 10, 10, 20);
    let double = mean_collisions(1 << 11, 10, 20);
    let ratio = double / single;
    check((1.5..=2.5).contains(&ratio), || {
        format!("doubling ratio {ratio}")
    })?;
    Ok(format!("{} doubling x{ratio:.2}", shown.join(" ")))
}

fn alphas(rows: &[AccuracyRow], method: &str) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.method == method)
        .map(|r| r.alpha_mean.0)
        .collect()
}

fn accuracy_vs_fingerprint() -> Outcome {
    let cfg = ExperimentConfig {
        accuracy_sweeps: vec![AccuracySweep::FingerprintBits],
        fingerprint_bits: (7..=17).collect(),
        repetitions: 5,
        ..ExperimentConfig::default()
    };
    check(cfg.overlap.distinct_a() == 64_000, || {
        "root set size".into()
    })?;
    let rows = run_methods(&cfg, &[Method::Query, Method::Decode]);
    let mut shown = Vec::new();
    for method in ["ccf-query", "ccf-decode"] {
        let a = alphas(&rows, method);
        check(a.len() == 11, || format!("{method}: {} points", a.len()))?;
        for (i, w) in a.windows(2).enumerate() {
            check(w[1] >= w[0] - 0.002, || {
                format!("{method}: f={} {} -> {}", i + 7, w[0], w[1])
            })?;
        }
        check((0.92..=0.97).contains(&a[0]), || {
            format!("{method}: f=7 {}", a[0])
        })?;
        check(a[10] >= 0.999, || format!("{method}: f=17 {}", a[10]))?;
        shown.push(format!("{method} {:.4}..{:.5}", a[0], a[10]));
    }
    Ok(shown.join(", "))
}

fn method_ordering() -> Outcome {
    let cfg = ExperimentConfig {
        accuracy_sweeps: vec![AccuracySweep::Size],
        repetitions: 10,
        ..ExperimentConfig::default()
    };
    let rows = run_methods(&cfg, &[Method::Query, Method::Decode, Method::Cbf]);
    let (q, d, c) = (
        alphas(&rows, "ccf-query"),
        alphas(&rows, "ccf-decode"),
        alphas(&rows, "cbf"),
    );
    let mut failures = Vec::new();
    for (i, &n) in cfg.sizes.iter().enumerate() {
        if q[i] < d[i] {
            failures.push(format!("N={n}: query {:.6} < decode {:.6}", q[i], d[i]));
        }
        if q[i] < c[i] || d[i] < c[i] {
            failures.push(format!("N={n}: cbf {:.6} above a ccf method", c[i]));
        }
    }
    let above_cbf = (0..q.len())
        .filter(|&i| q[i] >= c[i] && d[i] >= c[i])
        .count();
    if failures.is_empty() {
        Ok(format!(
            "{} sizes, query >= decode >= cbf everywhere",
            q.len()
        ))
    } else {
        Err(format!(
            "{} violations ({above_cbf}/{} sizes have both ccf methods above cbf): {}",
            failures.len(),
            q.len(),
            failures.join("; ")
        ))
    }
}

/// Bits per element where the curve first reaches `target`, interpolated
/// linearly between grid points.
fn bpe_at(rows: &[&AccuracyRow], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.bits_per_element.0, r.alpha_mean.0))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let i = pts.iter().position(|&(_, a)| a >= target)?;
    if i == 0 {
        return Some(pts[0].0);
    }
    let ((x0, y0), (x1, y1)) = (pts[i - 1], pts[i]);
    Some(x0 + (target - y0) / (y1 - y0) * (x1 - x0))
}

fn space_efficiency() -> Outcome {
    let cfg = ExperimentConfig {
        accuracy_sweeps: vec![AccuracySweep::BitsPerElement],
        multiplicity: MultiplicityMode::Fixed(10),
        bpe_fingerprint_bits: (1..=20).collect(),
        repetitions: 3,
        ..ExperimentConfig::default()
    };
    let rows = run_methods(&cfg, &[Method::Query, Method::Decode, Method::Cbf]);
    let of = |m: &str| rows.iter().filter(|r| r.method == m).collect::<Vec<_>>();
    let cbf = of("cbf");
    let missing = |what: String| move || format!("{what} never reached");
    let cbf_99 = bpe_at(&cbf, 0.99).ok_or_else(missing("cbf 0.99".into()))?;
    let cbf_lo = bpe_at(&cbf, 0.7).ok_or_else(missing("cbf 0.7".into()))?;
    let cbf_hi = bpe_at(&cbf, 0.9999).ok_or_else(missing("cbf 0.9999".into()))?;
    let cbf_delta = cbf_hi - cbf_lo;
    check(cbf_delta >= 48.0, || format!("cbf delta {cbf_delta}"))?;
    let mut shown = vec![format!("cbf@0.99={cbf_99:.1} delta={cbf_delta:.1}")];
    for method in ["ccf-query", "ccf-decode"] {
        let r = of(method);
        let at_99 = bpe_at(&r, 0.99).ok_or_else(missing(format!("{method} 0.99")))?;
        let lo = bpe_at(&r, 0.7).ok_or_else(missing(format!("{method} 0.7")))?;
        let hi = bpe_at(&r, 0.9999).ok_or_else(missing(format!("{method} 0.9999")))?;
        check(at_99 < cbf_99, || {
            format!("{method} {at_99} vs cbf {cbf_99}")
        })?;
        check(hi - lo <= 16.0, || format!("{method} delta {}", hi - lo))?;
        shown.push(format!("{method}@0.99={at_99:.1} delta={:.1}", hi - lo));
    }
    Ok(shown.join(", "))
}

/// Transmit and replicate lists, sorted.
type Split = (Vec<(Element, u32)>, Vec<(Element, u32)>);

/// Classification straight from the two multisets.
fn brute_force(local: &Multiset, remote: &Multiset) -> Split {
    let theirs: HashMap<&Element, u32> = remote.iter().collect();
    let mut transmit = Vec::new();
    let mut replicate = Vec::new();
    for (x, m) in local.iter() {
        match theirs.get(x) {
            None => transmit.push((x.clone(), m)),
            Some(&r) if r > m => replicate.push((x.clone(), r - m)),
            Some(_) => {}
        }
    }
    transmit.sort();
    replicate.sort();
    (transmit, replicate)
}

fn small_instance(rng: &mut ChaCha8Rng) -> (Multiset, Multiset) {
    let total = rng.gen_range(1..=200u32);
    let base = rng.gen::<u32>();
    let mut a = Multiset::new();
    let mut b = Multiset::new();
    for v in 0..total {
        let x = Element::from_u32(base.wrapping_add(v));
        let (ma, mb) = (rng.gen_range(1..=50), rng.gen_range(1..=50));
        match rng.gen_range(0..4) {
            0 => a.add(x, ma).unwrap(),
            1 => b.add(x, mb).unwrap(),
            2 => {
                a.add(x.clone(), ma).unwrap();
                b.add(x, ma).unwrap();
            }
            _ => {
                a.add(x.clone(), ma).unwrap();
                b.add(x, mb).unwrap();
            }
        }
    }
    (a, b)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exact = 0;
    for i in 0..1000u64 {
        let (a, b) = small_instance(&mut rng);
        let p = CcfParams::new(128, 20).with_seed(i);
        let union = a.union_max(&b);
        let mut det = CollisionDetector::new();
        for x in union.root_set() {
            det.observe(&p.candidates(x));
        }
        if !det.is_collision_free() {
            continue;
        }
        let build = |ms: &Multiset| {
            let mut f = Ccf::new(p).unwrap();
            for (x, m) in ms.iter() {
                assert!(f.insert(x, m).unwrap(), "instance {i}: insert failed");
            }
            f
        };
        let (fa, fb) = (build(&a), build(&b));
        for (local, lf, remote, rf) in [(&a, &fa, &b, &fb), (&b, &fb, &a, &fa)] {
            let truth = brute_force(local, remote);
            let mut q = diff_query(local, rf).0;
            let mut d = diff_decode(local, lf, rf).unwrap().0;
            for r in [&mut q, &mut d] {
                r.transmit.sort();
                r.replicate.sort();
            }
            check((q.transmit.clone(), q.replicate.clone()) == truth, || {
                format!("instance {i}: query differs from truth")
            })?;
            check(q == d, || {
                format!("instance {i}: decode differs from query")
            })?;
        }
        for method in [Method::Query, Method::Decode] {
            let run = synchronize(&a, &b, &SyncConfig::new_ccf(method, p).unwrap())
                .map_err(|e| e.to_string())?;
            check(run.host_a == union && run.host_b == union, || {
                format!("instance {i}: {} did not reach the union", method.name())
            })?;
            check(run.report.alpha == 1.0, || format!("instance {i}: alpha"))?;
        }
        exact += 1;
    }
    check(exact >= 900, || {
        format!("only {exact} collision-free instances")
    })?;
    Ok(format!("{exact}/1000 collision-free instances exact"))
}

fn theory_consistency() -> Outcome {
    let two = Exact::from_integer(2.into());
    let mut eps = Exact::from_integer(1.into());
    for k in 1..=20u32 {
        eps /= two.clone();
        let f = fingerprint_bits::<Exact>(4, eps.clone()).map_err(|e| e.to_string())?;
        check(ccf_fpr_bound::<Exact>(4, f) <= eps, || {
            format!("k={k}: f={f} misses")
        })?;
        check(f == 1 || ccf_fpr_bound::<Exact>(4, f - 1) > eps, || {
            format!("k={k}: f={f} not minimal")
        })?;
        // w / 2^(f-1) <= 2^-k  <=>  f >= k + 3 for w = 4
        check(f == k + 3, || format!("k={k}: f={f}"))?;
    }
    // three elements over 4 * 2^(2-1) = 8 equally likely tuples
    let tuples = 8u32;
    let mut clash = 0u32;
    for t0 in 0..tuples {
        for t1 in 0..tuples {
            for t2 in 0..tuples {
                clash += u32::from(t0 == t1 || t0 == t2 || t1 == t2);
            }
        }
    }
    let expected = Exact::new(clash.into(), tuples.pow(3).into());
    let got = ccf_fpr_product::<Exact>(4, 2, 3).map_err(|e| e.to_string())?;
    check(got == expected, || format!("product {got} vs {expected}"))?;
    check(got == Exact::new(11.into(), 32.into()), || {
        format!("product {got}")
    })?;
    let as_f64: f64 = ccf_fpr_product(4, 2, 3).map_err(|e| e.to_string())?;
    check(as_f64 == 0.34375, || format!("f64 product {as_f64}"))?;
    Ok("fingerprint_bits minimal for 2^-1..2^-20, product(4,2,3) = 11/32".into())
}

fn round_trips_and_reference_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..50u64 {
        let p = CcfParams::new(64, rng.gen_range(4..=24))
            .with_counter_bits(rng.gen_range(8..=16))
            .with_seed(i);
        let mut f = Ccf::new(p).unwrap();
        for _ in 0..rng.gen_range(0..300) {
            let _ = f.insert(&Element::from_u32(rng.gen()), rng.gen_range(1..=200));
        }
        let bytes = f.to_bytes();
        let g = Ccf::from_bytes(&bytes).map_err(|e| e.to_string())?;
        check(g.params() == f.params() && g.slots() == f.slots(), || {
            format!("ccf {i}: round trip changed the table")
        })?;
        check(g.to_bytes() == bytes, || format!("ccf {i}: bytes differ"))?;

        let cp = CbfParams::new(rng.gen_range(1..=2000), rng.gen_range(1..=8), 16).with_seed(i);
        let mut c = Cbf::new(cp).unwrap();
        for _ in 0..rng.gen_range(0..300) {
            let _ = c.insert(&Element::from_u32(rng.gen()), rng.gen_range(1..=20));
        }
        let back = Cbf::from_bytes(&c.to_bytes()).map_err(|e| e.to_string())?;
        check(back == c, || {
            format!("cbf {i}: round trip changed the filter")
        })?;
    }

    let pool: Vec<Element> = (0..32u32).map(|v| Element::from_u32(v * 7919)).collect();
    let mut mismatches = 0usize;
    let mut underestimates = 0usize;
    for seq in 0..10_000u64 {
        let p = (seq * 64..)
            .map(|s| CcfParams::new(32, 20).with_seed(s))
            .find(|p| {
                let mut det = CollisionDetector::new();
                pool.iter().for_each(|x| {
                    det.observe(&p.candidates(x));
                });
                det.is_collision_free()
            })
            .unwrap();
        let mut ccf = Ccf::new(p).unwrap();
        let mut cbf = Cbf::new(CbfParams::new(48, 3, 16).with_seed(seq)).unwrap();
        let mut reference: HashMap<usize, u32> = HashMap::new();
        let mut cbf_reference: HashMap<usize, u32> = HashMap::new();
        for _ in 0..40 {
            let i = rng.gen_range(0..pool.len());
            let x = &pool[i];
            match rng.gen_range(0..3) {
                0 => {
                    let k = rng.gen_range(1..=100);
                    let before = reference.get(&i).copied().unwrap_or(0);
                    match ccf.insert(x, k) {
                        Ok(true) => {
                            reference.insert(i, before + k);
                        }
                        Ok(false) => mismatches += 1,
                        Err(_) => mismatches += usize::from(before + k <= 255),
                    }
                    if cbf.insert(x, k).is_ok() {
                        *cbf_reference.entry(i).or_insert(0) += k;
                    }
                }
                1 => {
                    let removed = ccf.delete(x);
                    mismatches += usize::from(removed != reference.remove(&i).is_some());
                    if let Some(m) = cbf_reference.remove(&i) {
                        cbf.delete(x, m).map_err(|e| e.to_string())?;
                    }
                }
                _ => {}
            }
            for (j, y) in pool.iter().enumerate() {
                mismatches += usize::from(ccf.query(y) != reference.get(&j).copied().unwrap_or(0));
                underestimates +=
                    usize::from(cbf.query(y) < cbf_reference.get(&j).copied().unwrap_or(0));
            }
        }
    }
    check(mismatches == 0, || {
        format!("{mismatches} mismatches against the map")
    })?;
    check(underestimates == 0, || {
        format!("{underestimates} cbf underestimates")
    })?;
    Ok("round trips exact, 10^4 sequences match the reference map".into())
}

fn write_fixture(dir: &Path, name: &str, ms: &Multiset) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, ms.to_fixture()).unwrap();
    p
}

fn read_report(p: &Path) -> Result<HashMap<String, String>, String> {
    let mut r = csv::Reader::from_path(p).map_err(|e| e.to_string())?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let rec = r
        .records()
        .next()
        .ok_or("empty report")?
        .map_err(|e| e.to_string())?;
    Ok(headers
        .iter()
        .map(String::from)
        .zip(rec.iter().map(String::from))
        .collect())
}

struct Exit {
    ok: bool,
    stderr: String,
}

/// Runs a listener on `b` and a connector on `a`; `flags` are appended to
/// each side's `sync` command line.
fn run_pair(dir: &Path, a: &Path, b: &Path, flags: [&[&str]; 2]) -> Result<[Exit; 2], String> {
    let exe = env!("CARGO_BIN_EXE_ccf-harness");
    let mut listener = Command::new(exe)
        .args(["sync", "--listen", "127.0.0.1:0", "--input"])
        .arg(b)
        .arg("--output")
        .arg(dir.join("out_b"))
        .arg("--out")
        .arg(dir.join("report_b.csv"))
        .args(flags[1])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut line = String::new();
    BufReader::new(listener.stdout.take().unwrap())
        .read_line(&mut line)
        .map_err(|e| e.to_string())?;
    let Some(addr) = line.trim().strip_prefix("listening on ") else {
        let _ = listener.kill();
        return Err(format!("unexpected listener output {line:?}"));
    };
    let connector = Command::new(exe)
        .args(["sync", "--connect", addr, "--patience", "5", "--input"])
        .arg(a)
        .arg("--output")
        .arg(dir.join("out_a"))
        .arg("--out")
        .arg(dir.join("report_a.csv"))
        .args(flags[0])
        .output()
        .map_err(|e| e.to_string())?;
    let listener = listener.wait_with_output().map_err(|e| e.to_string())?;
    let exit = |o: &std::process::Output| Exit {
        ok: o.status.success(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    };
    Ok([exit(&connector), exit(&listener)])
}

fn field(r: &HashMap<String, String>, key: &str) -> Result<usize, String> {
    r.get(key)
        .ok_or_else(|| format!("no {key} column"))?
        .parse()
        .map_err(|e| format!("{key}: {e}"))
}

fn wire_protocol() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a: Multiset = (0..3000u32)
        .map(|v| (Element::from_u32(v), v % 7 + 1))
        .collect();
    let b: Multiset = (2000..5000u32)
        .map(|v| (Element::from_u32(v), v % 5 + 1))
        .collect();
    let (fa, fb) = (
        write_fixture(dir.path(), "a", &a),
        write_fixture(dir.path(), "b", &b),
    );
    let geometry = [
        "--seed",
        "42",
        "--buckets",
        "2048",
        "--fingerprint-bits",
        "14",
    ];
    let params = CcfParams::new(2048, 14).with_seed(42);

    for method in [Method::Query, Method::Decode] {
        let mut flags = geometry.to_vec();
        flags.extend(["--method", method.name()]);
        let [ca, lb] = run_pair(dir.path(), &fa, &fb, [&flags, &flags])?;
        check(ca.ok && lb.ok, || {
            format!(
                "{} session failed: {} | {}",
                method.name(),
                ca.stderr,
                lb.stderr
            )
        })?;
        let cfg = SyncConfig::new_ccf(method, params).map_err(|e| e.to_string())?;
        let run = synchronize(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let reports = [
            read_report(&dir.path().join("report_a.csv"))?,
            read_report(&dir.path().join("report_b.csv"))?,
        ];
        let hello = FRAME_OVERHEAD + cfg.hello().payload().len();
        let done = FRAME_OVERHEAD + 8;
        for (i, r) in reports.iter().enumerate() {
            let peer = &reports[1 - i];
            let filter = field(r, "bytes_filter_sent")?;
            let diff = field(r, "bytes_diff_sent")?;
            let wire = field(r, "bytes_wire_sent")?;
            check(
                filter == cfg.filter_len() && filter == params.serialized_len(),
                || format!("host {i}: filter {filter} vs {}", cfg.filter_len()),
            )?;
            check(filter == run.report.bytes_filter[i], || {
                format!("host {i}: filter bytes")
            })?;
            check(diff == run.report.bytes_diff[i], || {
                format!("host {i}: diff {diff} vs {}", run.report.bytes_diff[i])
            })?;
            check(wire == run.report.bytes_wire[i], || {
                format!("host {i}: wire {wire} vs {}", run.report.bytes_wire[i])
            })?;
            check(
                wire == hello + FRAME_OVERHEAD + filter + FRAME_OVERHEAD + diff + done,
                || format!("host {i}: frame accounting"),
            )?;
            check(
                field(r, "bytes_wire_received")? == field(peer, "bytes_wire_sent")?,
                || format!("host {i}: received != peer sent"),
            )?;
            check(
                field(r, "bytes_diff_received")? == field(peer, "bytes_diff_sent")?,
                || format!("host {i}: diff received != peer sent"),
            )?;
        }
        let load = |name: &str| -> Result<Multiset, String> {
            let text = std::fs::read_to_string(dir.path().join(name)).map_err(|e| e.to_string())?;
            Multiset::from_fixture(&text).map_err(|e| e.to_string())
        };
        check(
            load("out_a")? == run.host_a && load("out_b")? == run.host_b,
            || {
                format!(
                    "{}: final multisets differ from the in-process run",
                    method.name()
                )
            },
        )?;
    }

    // responder rejects the HELLO and tells the initiator why
    let mismatches: [([&str; 2], [&str; 2]); 2] = [
        (["--seed", "42"], ["--seed", "43"]),
        (["--method", "ccf-query"], ["--method", "ccf-decode"]),
    ];
    for (ours, theirs) in mismatches {
        let [ca, lb] = run_pair(dir.path(), &fa, &fb, [&ours, &theirs])?;
        check(!ca.ok && !lb.ok, || {
            format!("{ours:?}/{theirs:?}: a side exited cleanly")
        })?;
        check(lb.stderr.contains("handshake mismatch"), || {
            format!("listener stderr: {}", lb.stderr)
        })?;
        check(ca.stderr.contains("peer aborted"), || {
            format!("connector stderr: {}", ca.stderr)
        })?;
    }
    Ok(
        "query and decode sessions match in-process byte counts; seed and method mismatches abort"
            .into(),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("C1 occupancy table", occupancy_table),
        ("C2 membership false positive rate", membership_fpr),
        ("C3 collision count", collision_count),
        ("C4 accuracy vs fingerprint length", accuracy_vs_fingerprint),
        ("C5 method ordering", method_ordering),
        ("C6 space efficiency", space_efficiency),
        ("C7 oracle equivalence", oracle_equivalence),
        ("C8 theory self-consistency", theory_consistency),
        (
            "C9 round trips and reference map",
            round_trips_and_reference_map,
        ),
        ("C10 wire protocol over TCP", wire_protocol),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match &result {
            Ok(detail) => println!("[PASS] {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                println!("[FAIL] {name} ({secs:.1}s): {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
