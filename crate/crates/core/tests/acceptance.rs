//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any fails.

use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::Rng;

use rehab_core::evaluation::{emit_results_table, loso_evaluate, EvalConfig, EvalResult, Method, MethodScores};
use rehab_core::feedback::{deviation_scores, generate_feedback, profile_for, Templates, DEFAULT_THRESHOLD};
use rehab_core::geometry::{add, Rotation};
use rehab_core::kinematics::{extract_features, feature_family, Family, FeatureConfig, FeatureTable, FeatureVector, Series};
use rehab_core::motion::{Dataset, Exercise, Side};
use rehab_core::nn::{adam_step, full_hidden_grid, AdamState, Gradients, MlpModel, OutputHead};
use rehab_core::seeding::rng_from;
use rehab_core::selector::chain::ChainMdp;
use rehab_core::selector::{select_and_classify, train_dqn, train_selector, RlConfig};
use rehab_core::synth::{
    repetition_spec, synth_dataset, synth_repetition, synth_repetition_with, synth_subjects, CorpusSpec, ImpairmentSpec,
};

const FEATURES: usize = 60;
const GRAD_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
/// Denominator floor for the relative error of near-zero gradient components.
const GRAD_FLOOR: f64 = 1e-6;
const CORPUS_SEED: u64 = 7;
/// Wall-clock budget for the LOSO run on four cores.
const LOSO_BUDGET: Duration = Duration::from_secs(15 * 60);
const REFERENCE_CORES: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let grid = full_hidden_grid();
    let mut rng = rng_from(101);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for pair in 0..20 {
        let hidden = grid[rng.gen_range(0..grid.len())].clone();
        let seed: u64 = rng.gen();
        let model = MlpModel::new(2 * FEATURES, &hidden, 1, OutputHead::SigmoidBinary, seed).unwrap();
        let x =
            Array2::from_shape_fn(
                (16, 2 * FEATURES),
                |(_, j)| if j < FEATURES { rng.gen_range(-2.0..2.0) } else { f64::from(rng.gen_bool(0.5)) },
            );
        let y: Vec<f64> = (0..16).map(|i| f64::from(i % 2 == pair % 2)).collect();
        let analytic = model.loss_and_grad(x.view(), &y).unwrap().1.flatten();
        // Sample components from every layer's weights and biases.
        let mut offsets = Vec::new();
        let mut base = 0;
        for (w, b) in model.weights().iter().zip(model.biases()) {
            for _ in 0..8 {
                offsets.push(base + rng.gen_range(0..w.len()));
            }
            base += w.len();
            for _ in 0..4 {
                offsets.push(base + rng.gen_range(0..b.len()));
            }
            base += b.len();
        }
        for idx in offsets {
            let mut plus = model.clone();
            plus.nudge(idx, GRAD_H);
            let mut minus = model.clone();
            minus.nudge(idx, -GRAD_H);
            let numeric = (plus.loss(x.view(), &y).unwrap() - minus.loss(x.view(), &y).unwrap()) / (2.0 * GRAD_H);
            let a = analytic[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR));
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < GRAD_TOL && elapsed < Duration::from_secs(30),
        format!("20 (architecture, seed) pairs, {checked} components, max relative error {worst:.2e}, {elapsed:.1?}"),
    )
}

fn adam_first_step() -> Outcome {
    let mut rng = rng_from(202);
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let mut model = MlpModel::new(12, &[16, 8], 3, OutputHead::LinearQ, trial).unwrap();
        let mut grads = Gradients::zeros_like(&model);
        grads.weights.iter_mut().for_each(|w| w.mapv_inplace(|_| rng.gen_range(-5.0..5.0)));
        grads.biases.iter_mut().for_each(|b| b.mapv_inplace(|_| rng.gen_range(-5.0..5.0)));
        let lr = [1e-4, 1e-3, 1e-2][trial as usize % 3];
        let before = model.flatten();
        let mut state = AdamState::new(&model);
        adam_step(&mut model, &grads, &mut state, lr).unwrap();
        for ((after, before), g) in model.flatten().iter().zip(&before).zip(grads.flatten()) {
            worst = worst.max((after - before + lr * g.signum()).abs());
        }
    }
    outcome(worst < 1e-6, format!("10 random gradients, max |Δθ + lr·sign(g)| = {worst:.2e}"))
}

fn double_q_oracle() -> Outcome {
    let start = Instant::now();
    let mdp = ChainMdp::default();
    let q_star = mdp.optimal_q();
    let policy = mdp.optimal_policy();
    let cfg = RlConfig { episodes: 1500, train_every: 1, target_sync: 200, ..RlConfig::default() };
    let mut agree = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut env = mdp.clone();
        let q = train_dqn(&mut env, &cfg, &[32], 0.001, seed).unwrap();
        for s in 0..mdp.n_states {
            let out = q.online.forward(&mdp.one_hot(s)).unwrap();
            worst = worst.max((out[0] - q_star[s][0]).abs()).max((out[1] - q_star[s][1]).abs());
            agree += usize::from(usize::from(out[1] > out[0]) == policy[s]);
        }
    }
    let total = 5 * mdp.n_states;
    let elapsed = start.elapsed();
    outcome(
        agree == total && worst < 0.05 && elapsed < Duration::from_secs(60),
        format!("5 seeds: policy agreement {agree}/{total}, max |Q - Q*| = {worst:.4}, {elapsed:.1?}"),
    )
}

fn default_table() -> FeatureTable {
    let ds = synth_dataset(&CorpusSpec { seed: CORPUS_SEED, ..CorpusSpec::default() }).unwrap();
    FeatureTable::extract(&ds, &FeatureConfig::default()).unwrap()
}

fn rl_mean_acquired(res: &EvalResult) -> f64 {
    let mut n = 0usize;
    let mut total = 0.0;
    for s in res.scores.iter().filter(|s| s.method == Method::MlRl) {
        for subj in &s.subjects {
            n += subj.n;
            total += subj.mean_acquired.unwrap_or(f64::NAN) * subj.n as f64;
        }
    }
    total / n as f64
}

fn ordering(res: &EvalResult, elapsed: Duration) -> Outcome {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    // Folds are independent, so wall time on the reference machine scales with
    // the ratio of core counts.
    let scaled = elapsed.mul_f64(cores.min(REFERENCE_CORES) as f64 / REFERENCE_CORES as f64);
    let rl = res.overall[&Method::MlRl].mean;
    let mut per = Vec::new();
    let mut gap_ok = true;
    for &ex in &res.exercises {
        let r = res.get(Method::MlRl, ex).unwrap().mean;
        let f = res.get(Method::MlRfe, ex).unwrap().mean;
        gap_ok &= r >= f - 0.02;
        per.push(format!("{} RL {r:.4} RFE {f:.4}", ex.code()));
    }
    outcome(
        rl >= 0.85 && gap_ok && scaled < LOSO_BUDGET,
        format!("ML-RL mean F1 {rl:.4}; {}; {elapsed:.0?} on {cores} core(s), {scaled:.0?} scaled to {REFERENCE_CORES}", per.join(", ")),
    )
}

fn single_informative(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<u8>) {
    let names: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
    let mut rng = rng_from(seed);
    let mut fvs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let mut v: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.5..1.5)).collect();
        v[0] = if label == 1 { 1.0 } else { -1.0 } + rng.gen_range(-0.5..0.5);
        fvs.push(FeatureVector::new(names.clone(), v));
        labels.push(label);
    }
    (fvs, labels)
}

fn parsimony(res: &EvalResult) -> Outcome {
    let corpus = rl_mean_acquired(res);
    let (train, labels) = single_informative(400, 1);
    let (test, test_labels) = single_informative(200, 2);
    let cfg = RlConfig { episodes: 8000, seed: 3, ..RlConfig::default() };
    let model = train_selector(&train, &labels, &cfg).unwrap();
    let (mut correct, mut acquired) = (0usize, 0usize);
    for (fv, &l) in test.iter().zip(&test_labels) {
        let (mask, pred, _) = select_and_classify(&model, fv, Some(l), &cfg).unwrap();
        correct += usize::from(pred == l);
        acquired += mask.iter().filter(|&&m| m).count();
    }
    let n = test.len() as f64;
    let (acc, acq) = (correct as f64 / n, acquired as f64 / n);
    outcome(
        corpus < 0.5 * FEATURES as f64 && acq <= 2.0 && acc >= 0.95,
        format!("synthetic corpus {corpus:.2} of {FEATURES} features; single-informative corpus {acq:.2} acquisitions, accuracy {acc:.3}"),
    )
}

fn feedback_fidelity() -> Outcome {
    let spec = CorpusSpec { seed: CORPUS_SEED, ..CorpusSpec::default() };
    let ds = synth_dataset(&spec).unwrap();
    let cfg = FeatureConfig::default();
    let table = FeatureTable::extract(&ds, &cfg).unwrap();
    let templates = Templates::default();
    let (mut hits, mut injected_total, mut impaired_reps) = (0usize, 0usize, 0usize);
    let (mut clean, mut fresh) = (0usize, 0usize);
    for s in synth_subjects(&spec).iter().filter(|s| s.patient.is_some()) {
        let imp = s.patient.unwrap().impairment;
        let injected: Vec<Family> =
            [(!imp.rom_ok(), Family::Rom), (!imp.smooth_ok(), Family::Smoothness), (!imp.compensation_ok(), Family::Compensation)]
                .into_iter()
                .filter_map(|(on, f)| on.then_some(f))
                .collect();
        for &ex in &spec.exercises {
            let profile = profile_for(&table.rows, &s.meta.subject_id, ex).unwrap();
            let mask = vec![true; FEATURES];
            if !injected.is_empty() {
                for row in table.rows.iter().filter(|r| r.subject_id == s.meta.subject_id && r.exercise == ex && r.side == Side::Affected) {
                    let scores = deviation_scores(&profile, &row.features, &mask).unwrap();
                    let flagged = generate_feedback(&scores, 0, &templates, DEFAULT_THRESHOLD).unwrap().flagged_families();
                    impaired_reps += 1;
                    injected_total += injected.len();
                    hits += injected.iter().filter(|f| flagged.contains(f)).count();
                }
            }
            // Fresh repetitions of the same subject with the impairment removed.
            for rep in 0..4 {
                let mut rs = repetition_spec(spec.seed, s, ex, Side::Affected, 1000 + rep);
                rs.impairment = ImpairmentSpec::NONE;
                let fv = extract_features(&synth_repetition_with(&rs).unwrap().0, &cfg).unwrap();
                let scores = deviation_scores(&profile, &fv, &mask).unwrap();
                let report = generate_feedback(&scores, 1, &templates, DEFAULT_THRESHOLD).unwrap();
                fresh += 1;
                clean += usize::from(report.flagged_families().is_empty());
            }
        }
    }
    let recall = hits as f64 / injected_total as f64;
    let specificity = clean as f64 / fresh as f64;
    outcome(
        recall >= 0.9 && specificity >= 0.8 && impaired_reps >= 50 && fresh >= 50,
        format!(
            "recall {hits}/{injected_total} = {recall:.3} over {impaired_reps} impaired repetitions; specificity {clean}/{fresh} = {specificity:.3}"
        ),
    )
}

fn geometry_invariance() -> Outcome {
    let (rep, _) = synth_repetition(Exercise::E2Light, ImpairmentSpec::new(0.9, 0.0, 8.0).unwrap(), 2.0, 17).unwrap();
    let cfg = FeatureConfig::default();
    let base = extract_features(&rep, &cfg).unwrap();
    let geometric: Vec<usize> = base
        .names()
        .iter()
        .enumerate()
        .filter(|(_, n)| {
            let series = n.split('.').next().unwrap();
            Series::ALL.iter().any(|s| s.name() == series && s.is_geometric())
        })
        .map(|(i, _)| i)
        .collect();
    let mut rng = rng_from(303);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let rot = Rotation::from_quaternion(q);
        let t = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let mut moved = rep.clone();
        moved.frames = rep.frames.iter().map(|f| f.map_joints(|p| add(rot.apply(p), t))).collect();
        // The vertical reference moves with the scene.
        let moved_cfg = FeatureConfig { up_axis: rot.apply(cfg.up_axis), ..cfg.clone() };
        let fv = extract_features(&moved, &moved_cfg).unwrap();
        for &i in &geometric {
            worst = worst.max((fv.values()[i] - base.values()[i]).abs());
        }
    }
    let families = geometric.iter().filter_map(|&i| feature_family(&base.names()[i])).collect::<std::collections::BTreeSet<_>>();
    outcome(
        worst < 1e-9,
        format!(
            "{} angle/tilt/distance features ({} families), 100 rigid transforms, max deviation {worst:.2e}",
            geometric.len(),
            families.len()
        ),
    )
}

fn table_arithmetic() -> Outcome {
    let scores = [(Exercise::E1Cup, 0.8331), (Exercise::E2Light, 0.7973), (Exercise::E3Cane, 0.8053)]
        .into_iter()
        .map(|(exercise, mean)| MethodScores { method: Method::MlRl, exercise, mean, std: 0.0526, subjects: vec![], mean_acquired: None })
        .collect();
    let res = EvalResult::from_scores(0, FEATURES, Exercise::ALL.to_vec(), vec![Method::MlRl], scores);
    let table = emit_results_table(&res, None);
    let row = table.lines().nth(1).unwrap_or_default().to_string();
    let overall = row.split("  ").filter(|c| !c.trim().is_empty()).last().unwrap_or_default().trim().to_string();
    outcome(overall.starts_with("0.8119"), format!("Overall cell for (0.8331, 0.7973, 0.8053) is \"{overall}\""))
}

fn pipeline_json(spec: &CorpusSpec, cfg: &EvalConfig, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let jsonl = synth_dataset(spec).unwrap().to_jsonl();
        let ds = Dataset::from_jsonl(&jsonl).unwrap();
        let table = FeatureTable::extract(&ds, &FeatureConfig::default()).unwrap();
        loso_evaluate(&table, cfg).unwrap().to_json().unwrap()
    })
}

fn determinism() -> Outcome {
    let spec = CorpusSpec { n_patients: 4, n_healthy: 2, seed: CORPUS_SEED, ..CorpusSpec::default() };
    let cfg = EvalConfig { seed: CORPUS_SEED, rl: RlConfig { episodes: 1000, ..RlConfig::default() }, ..EvalConfig::default() };
    let a = pipeline_json(&spec, &cfg, 1);
    let b = pipeline_json(&spec, &cfg, 2);
    outcome(a == b, format!("synth, extract and LOSO twice (1 and 2 threads): {} vs {} bytes, identical = {}", a.len(), b.len(), a == b))
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    };
    report("gradient-oracle", gradient_oracle());
    report("adam-first-step", adam_first_step());
    report("double-q-chain-oracle", double_q_oracle());
    let start = Instant::now();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cores).build().unwrap();
    let res = pool.install(|| loso_evaluate(&default_table(), &EvalConfig { seed: CORPUS_SEED, ..EvalConfig::default() }));
    let elapsed = start.elapsed();
    match res {
        Ok(res) => {
            print!("{}", emit_results_table(&res, None));
            report("loso-ordering", ordering(&res, elapsed));
            report("parsimony", parsimony(&res));
        }
        Err(e) => {
            report("loso-ordering", outcome(false, format!("evaluation failed: {e}")));
            report("parsimony", outcome(false, "no evaluation result".into()));
        }
    }
    report("feedback-fidelity", feedback_fidelity());
    report("geometry-invariance", geometry_invariance());
    report("table-arithmetic", table_arithmetic());
    report("determinism", determinism());
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
