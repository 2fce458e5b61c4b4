//! End-to-end acceptance checks. Every check prints one `PASS`/`FAIL` line;
//! the test fails if any check fails. Run with `--nocapture` to see them.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdrift_core::detectors::{
    adwin_epsilon, Adwin, AdwinParams, ChangeDetector, Ddm, DdmParams, DetectorKind, PageHinkley, PhParams, Verdict,
};
use sdrift_core::ebc::{simulated_oracle, EbcSession, Event, Method, Oracle};
use sdrift_core::eval::{
    emit_report, mean_feature_weight, replay_oracle, run_experiment, session_setup, sweep, ExperimentConfig, Grid,
};
use sdrift_core::explain::{
    dissimilarity, entropy, explain_linear, explain_sampling, normalize_relevance, Attribution, RelevanceWeights,
};
use sdrift_core::learners::{Encoder, LearnerKind, LinearForm};
use sdrift_core::streams::{FeatureSchema, FeatureValue};

// Pinned tolerances.
const MAX_QUERIES: usize = 106;
const LOW_BUDGET: f64 = 13.0;
const PAIR_TIME_LIMIT: Duration = Duration::from_secs(120);
const LOCAL_ACCURACY_TOL: f64 = 1e-9;
const SAMPLING_SE_FACTOR: f64 = 2.0;
/// Share of coordinates that must fall within the 2-SE band (nominal 95%).
const SAMPLING_MIN_COVERAGE: f64 = 0.9;
const SAMPLING_MAX_Z: f64 = 4.0;
const SIMPLEX_TOL: f64 = 1e-12;
const EPS_CUT_SPOT: f64 = 0.254;
const EPS_CUT_TOL: f64 = 5e-4;
const MC_STREAMS: u64 = 200;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn c_stagger() -> ExperimentConfig {
    ExperimentConfig::load(&config_path("c_stagger.toml")).expect("c_stagger.toml")
}

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Writes past the test harness's output capture so the lines show up in a
/// plain `cargo test` run.
fn report(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").ok();
    out.flush().ok();
}

fn check(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let (pass, detail) = f();
    let line = format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    report(&line);
    Outcome { name, pass, detail }
}

fn feedback_budget() -> (bool, String) {
    let cfg = c_stagger();
    let mut worst = (usize::MAX, 0usize);
    let mut best_mean = f64::INFINITY;
    let mut best_pair = String::new();
    let mut slowest = Duration::ZERO;
    for &l in &cfg.learners {
        for &d in &cfg.detectors {
            let mut c = cfg.clone();
            c.learners = vec![l];
            c.detectors = vec![d];
            let t0 = Instant::now();
            let out = run_experiment(&c).expect("run");
            slowest = slowest.max(t0.elapsed() / c.seeds.len() as u32);
            let counts: Vec<usize> = out.report.cells.iter().map(|c| c.query_count).collect();
            worst.0 = worst.0.min(*counts.iter().min().unwrap());
            worst.1 = worst.1.max(*counts.iter().max().unwrap());
            let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
            if mean < best_mean {
                best_mean = mean;
                best_pair = format!("{l}+{d}");
            }
        }
    }
    let pass = worst.0 >= 1 && worst.1 <= MAX_QUERIES && best_mean <= LOW_BUDGET && slowest <= PAIR_TIME_LIMIT;
    (
        pass,
        format!(
            "queries per run in [{}, {}], lowest pair mean {best_mean:.1} ({best_pair}), slowest run {:.2}s",
            worst.0,
            worst.1,
            slowest.as_secs_f64()
        ),
    )
}

fn detection_gap() -> (bool, String) {
    let mut cfg = c_stagger();
    cfg.learners = vec![LearnerKind::Nb];
    cfg.detectors = vec![DetectorKind::Ddm];
    let mut mean = [0.0; 2];
    let mut per_seed = [Vec::new(), Vec::new()];
    for (i, m) in [Method::Exstream, Method::Ebc].into_iter().enumerate() {
        cfg.method = m;
        let out = run_experiment(&cfg).expect("run");
        per_seed[i] = out.report.cells.iter().map(|c| c.outcome.detected).collect();
        mean[i] = per_seed[i].iter().sum::<usize>() as f64 / per_seed[i].len() as f64;
    }
    (
        mean[0] <= 1.0 && mean[1] >= 2.0,
        format!(
            "NB+DDM mean detected exstream {:.1} {:?}, ebc {:.1} {:?}",
            mean[0], per_seed[0], mean[1], per_seed[1]
        ),
    )
}

fn lr_three_drifts() -> (bool, String) {
    let mut base = c_stagger();
    base.method = Method::Exstream;
    base.learners = vec![LearnerKind::Lr];
    base.detectors = vec![DetectorKind::Ddm];
    let grid = Grid::load(&config_path("c_stagger_grid.toml")).expect("grid");
    let chosen = sweep(&base, &grid).expect("sweep");
    let out = run_experiment(&chosen.config).expect("run");
    let hits: Vec<(usize, usize)> = out
        .report
        .cells
        .iter()
        .map(|c| (c.outcome.detected, c.outcome.false_alarms))
        .collect();
    let good = hits.iter().filter(|&&(d, fa)| d == 3 && fa >= 1).count();
    (
        good * 2 > hits.len(),
        format!(
            "selected ddm_threshold {}, seeds with 3/3 and >=1 false alarm: {good}/{} (detected, false alarms) {:?}",
            chosen.config.exstream.ddm_threshold,
            hits.len(),
            hits
        ),
    )
}

/// Reference DDM: the drift rule applied literally to recomputed statistics.
fn reference_ddm(bits: &[u8], warmup: u64) -> Vec<Verdict> {
    let (mut n, mut e) = (0u64, 0u64);
    let (mut p_min, mut s_min) = (f64::INFINITY, f64::INFINITY);
    let mut out = Vec::new();
    for &b in bits {
        n += 1;
        e += u64::from(b);
        let p = e as f64 / n as f64;
        let s = (p * (1.0 - p) / n as f64).sqrt();
        if n < warmup {
            out.push(Verdict::None);
            continue;
        }
        if p + s < p_min + s_min {
            p_min = p;
            s_min = s;
        }
        let v = if p + s <= p_min + s_min {
            Verdict::None
        } else if p + s >= p_min + 3.0 * s_min {
            Verdict::Drift
        } else if p + s >= p_min + 2.0 * s_min {
            Verdict::Warning
        } else {
            Verdict::None
        };
        if v == Verdict::Drift {
            n = 0;
            e = 0;
            p_min = f64::INFINITY;
            s_min = f64::INFINITY;
        }
        out.push(v);
    }
    out
}

fn detector_suites() -> (bool, String) {
    let mut failures = Vec::new();

    // DDM: exact agreement with the reference rule, formula and warmup.
    let mut d = Ddm::new(DdmParams::default());
    for i in 0..100 {
        d.update_bit(u8::from(i % 5 == 0));
    }
    if (d.std() - 0.04).abs() > 1e-12 {
        failures.push("ddm std".to_string());
    }
    // Bernoulli(0.1) then Bernoulli(0.5) from t = 1000. The reference rule
    // decides what the verdicts should be; streams that stay quiet before the
    // change must alarm within 300 steps of it.
    let (mut mismatched, mut early, mut timely, mut slow) = (0, 0, 0, 0);
    for seed in 0..MC_STREAMS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..2000)
            .map(|t| u8::from(rng.gen_bool(if t < 1000 { 0.1 } else { 0.5 })))
            .collect();
        let mut ddm = Ddm::new(DdmParams::default());
        let got: Vec<Verdict> = bits.iter().map(|&b| ddm.update_bit(b)).collect();
        if got != reference_ddm(&bits, 30) || got[..29].iter().any(|&v| v != Verdict::None) {
            mismatched += 1;
        }
        match got.iter().position(|&v| v == Verdict::Drift) {
            Some(t) if t < 1000 => early += 1,
            Some(t) if t < 1300 => timely += 1,
            _ => slow += 1,
        }
    }
    if mismatched > 0 {
        failures.push(format!("ddm rule mismatched on {mismatched} streams"));
    }
    if slow > 0 {
        failures.push(format!("ddm missed the change on {slow} quiet streams"));
    }

    // ADWIN: cut threshold, constant stream, mean step.
    let eps = adwin_epsilon(100, 100, 1e-5);
    if (eps - EPS_CUT_SPOT).abs() > EPS_CUT_TOL
        || (eps - ((4e5f64).ln() / 200.0).sqrt()).abs() > 1e-12
    {
        failures.push(format!("eps_cut {eps}"));
    }
    let mut a = Adwin::new(AdwinParams::default());
    let cuts = (0..5000)
        .filter(|_| a.update_window(0.5).unwrap().0 == Verdict::Drift)
        .count();
    if cuts != 0 || a.window_len() != 5000 {
        failures.push(format!("adwin constant: {cuts} cuts, window {}", a.window_len()));
    }
    let mut a = Adwin::new(AdwinParams::default());
    let mut first = None;
    for t in 0..1300 {
        let v = if t < 1000 { 0.2 } else { 0.8 };
        let (verdict, len) = a.update_window(v).unwrap();
        if verdict == Verdict::Drift && first.is_none() {
            first = Some((t, len));
        }
    }
    match first {
        Some((t, len)) if (1000..1150).contains(&t) && len < 1000 => {}
        other => failures.push(format!("adwin step: {other:?}")),
    }

    // Page-Hinkley: flat on constants, prompt on a unit shift, silent at λ=∞.
    let mut p = PageHinkley::new(PhParams::default());
    let flat = (0..1000).all(|_| p.update(0.7).unwrap() == Verdict::None && p.ph_statistic() == 0.0);
    if !flat {
        failures.push("ph constant".into());
    }
    let mut p = PageHinkley::new(PhParams { delta: 0.005, lambda: 5.0 });
    let alarm = (0..1100).position(|t| p.update(if t < 1000 { 0.0 } else { 1.0 }).unwrap() == Verdict::Drift);
    let bound = 1000 + (5.0f64 / (1.0 - 0.005)).ceil() as usize + 3;
    if !matches!(alarm, Some(t) if (1000..=bound).contains(&t)) {
        failures.push(format!("ph shift alarm at {alarm:?}, bound {bound}"));
    }
    let mut p = PageHinkley::new(PhParams { delta: 0.005, lambda: f64::INFINITY });
    if (0..2000).any(|t| p.update(if t < 1000 { 0.0 } else { 100.0 }).unwrap() != Verdict::None) {
        failures.push("ph infinite lambda".into());
    }

    (
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "DDM verdicts match the reference rule on {MC_STREAMS} streams ({timely} timely, {early} alarmed before the change); \
                 eps_cut = {eps:.5}; ADWIN and PH examples hold"
            )
        } else {
            failures.join("; ")
        },
    )
}

/// Interventional Shapley values by enumerating every ordering and every
/// background row.
fn brute_force_shapley(f: &dyn Fn(&[FeatureValue]) -> f64, x: &[FeatureValue], bg: &[Vec<FeatureValue>]) -> Vec<f64> {
    let d = x.len();
    let perms = permutations(d);
    let mut phi = vec![0.0; d];
    for z in bg {
        for perm in &perms {
            let mut cur = z.clone();
            let mut prev = f(&cur);
            for &i in perm {
                cur[i] = x[i];
                let s = f(&cur);
                phi[i] += s - prev;
                prev = s;
            }
        }
    }
    let n = (bg.len() * perms.len()) as f64;
    phi.iter().map(|v| v / n).collect()
}

/// Exact Shapley values and the variance of a single sampled marginal
/// contribution (uniform ordering and background row) per feature.
fn shapley_moments(f: &dyn Fn(&[FeatureValue]) -> f64, x: &[FeatureValue], bg: &[Vec<FeatureValue>]) -> (Vec<f64>, Vec<f64>) {
    let d = x.len();
    let perms = permutations(d);
    let (mut m1, mut m2) = (vec![0.0; d], vec![0.0; d]);
    for z in bg {
        for perm in &perms {
            let mut cur = z.clone();
            let mut prev = f(&cur);
            for &i in perm {
                cur[i] = x[i];
                let s = f(&cur);
                m1[i] += s - prev;
                m2[i] += (s - prev).powi(2);
                prev = s;
            }
        }
    }
    let n = (bg.len() * perms.len()) as f64;
    let mean: Vec<f64> = m1.iter().map(|v| v / n).collect();
    let var = m2.iter().zip(&mean).map(|(m2, m)| m2 / n - m * m).collect();
    (mean, var)
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

fn random_stagger_x(rng: &mut ChaCha8Rng) -> Vec<FeatureValue> {
    (0..3).map(|_| FeatureValue::Cat(rng.gen_range(0..3))).collect()
}

fn shapley_correctness() -> (bool, String) {
    // Exact linear: local accuracy and agreement with enumeration.
    let schema = FeatureSchema::stagger();
    let enc = Encoder::new(&schema);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_gap, mut worst_brute) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let weights: Vec<f64> = (0..enc.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let bias = rng.gen_range(-1.0..1.0);
        let bg: Vec<Vec<FeatureValue>> = (0..rng.gen_range(1..8)).map(|_| random_stagger_x(&mut rng)).collect();
        let x = random_stagger_x(&mut rng);
        let mut mean = vec![0.0; enc.dim()];
        for z in &bg {
            for (m, v) in mean.iter_mut().zip(enc.encode(z)) {
                *m += v / bg.len() as f64;
            }
        }
        let form = LinearForm { weights: &weights, bias };
        let a = explain_linear(form, &enc, &x, &mean).unwrap();
        let score = |v: &[FeatureValue]| enc.dot(&weights, v) + bias;
        worst_gap = worst_gap.max((a.values.iter().sum::<f64>() - (score(&x) - a.base)).abs());
        let phi = brute_force_shapley(&score, &x, &bg);
        for (p, v) in phi.iter().zip(&a.values) {
            worst_brute = worst_brute.max((p - v).abs());
        }
    }

    // Sampling: on random polynomial models with d = 2 and 3, the mean of 50
    // seeded estimates should sit within 2 standard errors of enumeration.
    // The standard error is exact, from the enumerated contribution variance.
    let (mut within, mut coords, mut worst_z) = (0usize, 0usize, 0.0f64);
    for case in 0..40u64 {
        let d = 2 + (case % 2) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let lin: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let pair: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let triple = rng.gen_range(-1.0..1.0);
        let f = move |x: &[FeatureValue]| {
            let v: Vec<f64> = x.iter().map(|v| v.as_num().unwrap()).collect();
            let mut s: f64 = lin.iter().zip(&v).map(|(c, v)| c * v).sum();
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    s += pair[i * v.len() + j] * v[i] * v[j];
                }
            }
            if v.len() == 3 {
                s += triple * v[0] * v[1] * v[2];
            }
            s
        };
        let point = |rng: &mut ChaCha8Rng| (0..d).map(|_| FeatureValue::Num(rng.gen_range(-2.0..2.0))).collect::<Vec<_>>();
        let x = point(&mut rng);
        let bg: Vec<Vec<FeatureValue>> = (0..rng.gen_range(2..6)).map(|_| point(&mut rng)).collect();
        let (exact, var) = shapley_moments(&f, &x, &bg);
        const SEEDS: u64 = 50;
        const PERMS: usize = 20;
        let mut mean = vec![0.0; d];
        for s in 0..SEEDS {
            let a = explain_sampling(&f, &x, &bg, PERMS, s).unwrap();
            for (m, v) in mean.iter_mut().zip(a.values) {
                *m += v / SEEDS as f64;
            }
        }
        for i in 0..d {
            let se = (var[i] / (SEEDS as usize * PERMS) as f64).sqrt();
            let dev = (mean[i] - exact[i]).abs();
            coords += 1;
            if dev <= SAMPLING_SE_FACTOR * se + 1e-12 {
                within += 1;
            }
            if se > 0.0 {
                worst_z = worst_z.max(dev / se);
            }
        }
    }
    let coverage = within as f64 / coords as f64;
    let sampling_ok = coverage >= SAMPLING_MIN_COVERAGE && worst_z <= SAMPLING_MAX_Z;
    (
        worst_gap <= LOCAL_ACCURACY_TOL && worst_brute <= LOCAL_ACCURACY_TOL && sampling_ok,
        format!(
            "linear local accuracy max gap {worst_gap:.2e}, max deviation from enumeration {worst_brute:.2e} (1000 cases); \
             sampling within 2 SE on {within}/{coords} coordinates (d=2,3; 50 seeds), worst |z| {worst_z:.2}"
        ),
    )
}

fn random_weights(rng: &mut ChaCha8Rng) -> RelevanceWeights {
    let d = rng.gen_range(2..9);
    let values: Vec<f64> = (0..d)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(-5.0..5.0) })
        .collect();
    normalize_relevance(&Attribution {
        target_score: values.iter().sum(),
        values,
        base: 0.0,
    })
}

fn entropy_dissimilarity_suites() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0usize;
    let mut triples = 0usize;
    while triples < 10_000 {
        let a = random_weights(&mut rng);
        let d = a.len();
        let draw = |rng: &mut ChaCha8Rng| loop {
            let w = random_weights(rng);
            if w.len() == d {
                break w;
            }
        };
        let b = draw(&mut rng);
        let c = draw(&mut rng);
        triples += 1;
        for w in [&a, &b, &c] {
            let on_simplex = w.w.iter().all(|&v| v >= 0.0) && (w.w.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL;
            let h = entropy(w);
            if !on_simplex || h < -SIMPLEX_TOL || h > (d as f64).ln() + SIMPLEX_TOL {
                violations += 1;
            }
        }
        let ab = dissimilarity(&a, &b).unwrap();
        let ba = dissimilarity(&b, &a).unwrap();
        let bc = dissimilarity(&b, &c).unwrap();
        let ac = dissimilarity(&a, &c).unwrap();
        let aa = dissimilarity(&a, &a).unwrap();
        if !(0.0..=1.0 + SIMPLEX_TOL).contains(&ab)
            || ab != ba
            || aa != 0.0
            || ac > ab + bc + SIMPLEX_TOL
            || (ab == 0.0) != (a.w == b.w)
        {
            violations += 1;
        }
    }
    for d in 2..=8 {
        let uniform = RelevanceWeights::uniform(d);
        let mut one_hot = vec![0.0; d];
        one_hot[d - 1] = 1.0;
        let one_hot = RelevanceWeights { w: one_hot, degenerate: false };
        if (entropy(&uniform) - (d as f64).ln()).abs() > SIMPLEX_TOL || entropy(&one_hot) != 0.0 {
            violations += 1;
        }
    }
    (violations == 0, format!("{violations} violations over {triples} triples"))
}

fn deconfounding_efficacy() -> (bool, String) {
    let mut cfg = c_stagger();
    cfg.learners = vec![LearnerKind::Nb];
    cfg.detectors = vec![DetectorKind::Ddm];
    let confound = cfg.gt_spurious().unwrap();
    let len = cfg.stream_len().unwrap();
    let mut ends = cfg.gold().unwrap();
    ends.push(len);
    let mut means = [Vec::new(), Vec::new()];
    for (i, m) in [Method::Exstream, Method::Ebc].into_iter().enumerate() {
        cfg.method = m;
        let out = run_experiment(&cfg).expect("run");
        for run in &out.runs {
            let per_segment: Vec<f64> = ends
                .iter()
                .map(|&e| mean_feature_weight(&run.trace, &confound, e.saturating_sub(2000), e).unwrap())
                .collect();
            means[i].push(per_segment.iter().sum::<f64>() / per_segment.len() as f64);
        }
    }
    let wins = means[0].iter().zip(&means[1]).filter(|(x, e)| e < x).count();
    let fmt = |v: &[f64]| v.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(",");
    (
        wins == means[0].len(),
        format!(
            "NB confound weight exstream [{}] vs ebc [{}], ebc lower on {wins}/{}",
            fmt(&means[0]),
            fmt(&means[1]),
            means[0].len()
        ),
    )
}

fn files_under(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> (bool, String) {
    let mut cfg = c_stagger();
    cfg.seeds = vec![0, 1];
    let schema = cfg.schema().unwrap();
    let mut identical = true;
    let mut files = 0;
    for m in [Method::Exstream, Method::Ebc] {
        cfg.method = m;
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            emit_report(&run_experiment(&cfg).unwrap(), &schema, d.path()).unwrap();
        }
        let (a, b) = (files_under(dirs[0].path()), files_under(dirs[1].path()));
        files += a.len();
        identical &= a == b;
    }
    (identical && files > 0, format!("{files} output files compared byte for byte"))
}

fn replay_consistency() -> (bool, String) {
    let cfg = c_stagger();
    let stream = cfg.stream(0).unwrap();
    let gt: BTreeSet<usize> = cfg.gt_spurious().unwrap();
    let setup = session_setup(&cfg, LearnerKind::Nb, DetectorKind::Ddm, 0).unwrap();
    let mut human = EbcSession::new(setup.clone(), Oracle::Human).unwrap();
    let mut answered = 0usize;
    for inst in &stream {
        human.step(inst).unwrap();
        if let Some(q) = human.pending() {
            // Alternate between the informed answer and "nothing spurious".
            let answer = if answered % 2 == 0 {
                simulated_oracle(&gt, &q.weights, cfg.ebc.top_m)
            } else {
                Vec::new()
            };
            human.annotate(answer).unwrap();
            answered += 1;
        }
    }
    let log = human.annotations().to_vec();
    let mut replayed = EbcSession::new(setup, replay_oracle(&log)).unwrap();
    for inst in &stream {
        replayed.step(inst).unwrap();
    }
    let alarms = human.events().iter().filter(|e| matches!(e, Event::Alarm(_))).count();
    let same = human.events() == replayed.events() && replayed.pending().is_none();
    (
        same && answered > 0,
        format!(
            "{answered} annotations, {} events ({alarms} alarms) reproduced: {same}",
            human.events().len()
        ),
    )
}

#[test]
fn acceptance() {
    report("");
    let outcomes = vec![
        check("feedback budget", feedback_budget),
        check("detection gap", detection_gap),
        check("LR+DDM three drifts", lr_three_drifts),
        check("detector unit suites", detector_suites),
        check("Shapley correctness", shapley_correctness),
        check("entropy and dissimilarity properties", entropy_dissimilarity_suites),
        check("deconfounding efficacy", deconfounding_efficacy),
        check("determinism", determinism),
        check("replay consistency", replay_consistency),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("{} ({})", o.name, o.detail))
        .collect();
    report(&format!("{}/{} acceptance checks passed", outcomes.len() - failed.len(), outcomes.len()));
    assert!(failed.is_empty(), "failed: {}", failed.join("; "));
}
