//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL`
//! line; the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ndarray::Array2;
use prototransport::eval::evaluate;
use prototransport::measures::{action_weights_vs_objects, object_weights, DiscreteMeasure};
use prototransport::ot::{solve_ot, CostMatrix, CouplingMatrix};
use prototransport::pipeline::{
    fuse_scores, score_action, score_object, target_prototypes, transport_actions, transport_objects,
    ActionWeighting, ObjectWeighting, PrototypeSet,
};
use prototransport::sphere::{frechet_mean, normalize, slerp, FrechetDistance, UnitVector};
use prototransport::synth::{generate_scenario, BiasModel, SynthScenario};
use prototransport::{EmbeddingSet, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> UnitVector {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(u) = normalize(&v) {
            return u;
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn angle(a: &UnitVector, b: &UnitVector) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn ot_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_obj, mut worst_marg) = (0.0f64, 0.0f64);
    for inst in 0..200 {
        let n = 2 + inst % 5;
        let c = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
        let w = vec![1.0 / n as f64; n];
        let sol = solve_ot(&w, &w, &CostMatrix::new(c.clone()).unwrap()).map_err(|e| e.to_string())?;
        let best = permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        worst_obj = worst_obj.max((sol.objective - best).abs());
        worst_marg = worst_marg
            .max(max_abs_diff(&sol.coupling.row_sums(), &w))
            .max(max_abs_diff(&sol.coupling.col_sums(), &w));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("max |obj - brute| = {worst_obj:.2e}, max marginal residual = {worst_marg:.2e}, {secs:.3} s");
    if worst_obj <= 1e-9 && worst_marg <= 1e-9 && secs < 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

fn coupling_at_scale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = 16;
    let src: Vec<UnitVector> = (0..101).map(|_| random_unit(&mut rng, d)).collect();
    let dst: Vec<UnitVector> = (0..1000).map(|_| random_unit(&mut rng, d)).collect();
    let a = random_simplex(&mut rng, 101);
    let b = random_simplex(&mut rng, 1000);
    let cost = Array2::from_shape_fn((101, 1000), |(i, j)| 1.0 - src[i].dot(&dst[j]));
    let start = Instant::now();
    let sol = solve_ot(&a, &b, &CostMatrix::new(cost).unwrap()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let resid = max_abs_diff(&sol.coupling.row_sums(), &a).max(max_abs_diff(&sol.coupling.col_sums(), &b));
    let detail = format!(
        "{secs:.3} s, {} pivots, marginal residual = {resid:.2e}, duality gap = {:.2e}",
        sol.iterations,
        sol.duality_gap()
    );
    if secs < 10.0 && resid < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Minimizes the two-point objective along the geodesic from `a` to `b`:
/// dense grid scan, then golden-section refinement around the best cell.
fn geodesic_oracle(a: &UnitVector, b: &UnitVector, wa: f64, wb: f64) -> UnitVector {
    let omega = angle(a, b);
    let tangent: Vec<f64> = {
        let c = a.dot(b);
        let raw: Vec<f64> = b.as_slice().iter().zip(a.as_slice()).map(|(y, x)| y - c * x).collect();
        normalize(&raw).unwrap().into_inner()
    };
    let f = |t: f64| {
        let da = 1.0 - t.cos();
        let db = 1.0 - (omega - t).cos();
        wa * da * da + wb * db * db
    };
    let grid = 2000;
    let step = omega / grid as f64;
    let best = (0..=grid).min_by(|&i, &j| f(i as f64 * step).total_cmp(&f(j as f64 * step))).unwrap();
    let (mut lo, mut hi) = (
        (best as f64 - 1.0).max(0.0) * step,
        (best as f64 + 1.0).min(grid as f64) * step,
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-13 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) < f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let t = 0.5 * (lo + hi);
    let s: Vec<f64> = a.as_slice().iter().zip(&tangent).map(|(x, u)| t.cos() * x + t.sin() * u).collect();
    normalize(&s).unwrap()
}

fn frechet_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut worst_sym) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < 100 {
        let d = 3 + done % 6;
        let a = random_unit(&mut rng, d);
        let b = random_unit(&mut rng, d);
        if angle(&a, &b) > 2.5 {
            continue;
        }
        let wa = rng.random_range(0.05..0.95);
        let pts = [a.clone(), b.clone()];
        let mean = frechet_mean(&pts, &[wa, 1.0 - wa]).map_err(|e| e.to_string())?;
        worst = worst.max(angle(&mean, &geodesic_oracle(&a, &b, wa, 1.0 - wa)));

        let sym = frechet_mean(&pts, &[0.5, 0.5]).map_err(|e| e.to_string())?;
        let mid: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect();
        let mid = normalize(&mid).unwrap();
        worst_sym = worst_sym.max(max_abs_diff(sym.as_slice(), mid.as_slice()));
        done += 1;
    }
    let detail = format!("max angular error = {worst:.2e}, equal-weight max deviation = {worst_sym:.2e}");
    if worst <= 1e-5 && worst_sym <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn slerp_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_end, mut worst_norm) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < 1000 {
        let d = 2 + done % 15;
        let a = random_unit(&mut rng, d);
        let b = random_unit(&mut rng, d);
        if a.dot(&b) < -0.999 {
            continue;
        }
        let lambda = rng.random_range(0.0..1.0);
        let one = slerp(&a, &b, 1.0).map_err(|e| e.to_string())?;
        let zero = slerp(&a, &b, 0.0).map_err(|e| e.to_string())?;
        let mid = slerp(&a, &b, lambda).map_err(|e| e.to_string())?;
        worst_end = worst_end
            .max(max_abs_diff(one.as_slice(), a.as_slice()))
            .max(max_abs_diff(zero.as_slice(), b.as_slice()));
        worst_norm = worst_norm.max((mid.norm() - 1.0).abs());
        done += 1;
    }
    let detail = format!("max endpoint deviation = {worst_end:.2e}, max |norm - 1| = {worst_norm:.2e}");
    if worst_end <= 1e-12 && worst_norm <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hub_scenario() -> SynthScenario {
    SynthScenario {
        n_classes: 20,
        items_per_class: 50,
        imbalance: None,
        dim: 16,
        kappa: 50.0,
        bias_angle: 0.6,
        bias_model: BiasModel::Hub { cap_radius: 0.6, inward_fraction: 0.5 },
        n_objects: 0,
        seed: 0,
    }
}

const HUB_CONFIG: &str = "\
synth_classes=20
synth_items=50
synth_dim=16
synth_kappa=50
synth_bias=0.6
synth_bias_model=hub
synth_cap_radius=0.6
synth_inward_fraction=0.5
k=100
seed=0
";

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_prototransport")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    run_cli_in(Path::new("."), args)
}

fn run_cli_in(cwd: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).current_dir(cwd).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn baseline_identity() -> Outcome {
    // Library path.
    let data = generate_scenario(&hub_scenario()).map_err(|e| e.to_string())?;
    let config = PipelineConfig { k: 100, lambda: 1.0, ..PipelineConfig::default() };
    let moved = transport_actions(&data.prototypes, &data.items, &config).map_err(|e| e.to_string())?;
    let base = evaluate(&score_action(&data.items, &data.prototypes).unwrap(), &data.truth, None).unwrap();
    let ident = evaluate(&score_action(&data.items, &moved.prototypes).unwrap(), &data.truth, None).unwrap();
    if base.render() != ident.render() || base.confusion.to_csv() != ident.confusion.to_csv() {
        return Err("library: lambda = 1 report differs from baseline".into());
    }

    // CLI path.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let cfg = root.join("config.txt");
    fs::write(&cfg, format!("{HUB_CONFIG}lambda=1\n")).unwrap();
    let (data_dir, base_dir, moved_dir) = (root.join("data"), root.join("base"), root.join("moved"));
    run_cli(&["synth", "--config", p(&cfg), "--out", p(&data_dir)])?;
    let items = data_dir.join("items.emb");
    let protos = data_dir.join("prototypes.emb");
    let truth = data_dir.join("truth.csv");
    run_cli(&["infer-actions", "--prototypes", p(&protos), "--videos", p(&items), "--out", p(&base_dir)])?;
    run_cli(&["eval", "--scores", p(&base_dir.join("scores_action.csv")), "--truth", p(&truth), "--out", p(&base_dir)])?;
    run_cli(&["transport-actions", "--config", p(&cfg), "--prototypes", p(&protos), "--videos", p(&items), "--out", p(&moved_dir)])?;
    let moved_protos = moved_dir.join("transported_actions.emb");
    run_cli(&["infer-actions", "--prototypes", p(&moved_protos), "--videos", p(&items), "--out", p(&moved_dir)])?;
    run_cli(&["eval", "--scores", p(&moved_dir.join("scores_action.csv")), "--truth", p(&truth), "--out", p(&moved_dir)])?;
    for file in ["report.txt", "confusion.csv"] {
        if fs::read(base_dir.join(file)).unwrap() != fs::read(moved_dir.join(file)).unwrap() {
            return Err(format!("cli: {file} differs from baseline"));
        }
    }
    Ok(format!(
        "library and CLI reports byte-identical (top1 = {:.4}, top5 = {:.4}, entropy = {:.4})",
        base.top1, base.top5, base.selection_entropy
    ))
}

fn debiasing() -> Outcome {
    let start = Instant::now();
    let data = generate_scenario(&hub_scenario()).map_err(|e| e.to_string())?;
    let config = PipelineConfig { k: 100, lambda: 0.5, seed: 0, ..PipelineConfig::default() };
    let moved = transport_actions(&data.prototypes, &data.items, &config).map_err(|e| e.to_string())?;
    let base = evaluate(&score_action(&data.items, &data.prototypes).unwrap(), &data.truth, None).unwrap();
    let after = evaluate(&score_action(&data.items, &moved.prototypes).unwrap(), &data.truth, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "never-predicted {:.2} -> {:.2}, entropy {:.3} -> {:.3}, top1 {:.3} -> {:.3}, {secs:.2} s",
        base.never_predicted_fraction(),
        after.never_predicted_fraction(),
        base.selection_entropy,
        after.selection_entropy,
        base.top1,
        after.top1
    );
    let ok = base.never_predicted_fraction() >= 0.10
        && after.never_predicted_fraction() < base.never_predicted_fraction()
        && after.selection_entropy > base.selection_entropy
        && after.top1 - base.top1 >= 0.05
        && secs < 60.0;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn normalization_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let (n, m, d) = (2 + inst % 6, 3 + inst % 9, 4 + inst % 5);
        let support: Vec<UnitVector> = (0..m).map(|_| random_unit(&mut rng, d)).collect();
        let targets = DiscreteMeasure::new(support, vec![1.0 / m as f64; m]).unwrap();
        let plan = Array2::from_shape_fn((n, m), |_| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            }
        });
        let mut plan = plan;
        for i in 0..n {
            plan[[i, i % m]] += 0.1;
        }
        let z = plan.sum();
        let global = CouplingMatrix::new(plan / z).unwrap();
        let rows = global.row_normalized();
        let ta = target_prototypes(&global, &targets, FrechetDistance::Cosine).map_err(|e| e.to_string())?;
        let tb = target_prototypes(&rows, &targets, FrechetDistance::Cosine).map_err(|e| e.to_string())?;
        for (x, y) in ta.iter().zip(&tb) {
            worst = worst.max(max_abs_diff(x.as_slice(), y.as_slice()));
        }
    }
    let detail = format!("max coordinate deviation = {worst:.2e}");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn object_scenario() -> SynthScenario {
    SynthScenario {
        n_classes: 10,
        items_per_class: 20,
        imbalance: None,
        dim: 16,
        kappa: 50.0,
        bias_angle: 0.3,
        bias_model: BiasModel::RandomPlane,
        n_objects: 40,
        seed: 5,
    }
}

fn weighting_ablation() -> Outcome {
    let data = generate_scenario(&object_scenario()).map_err(|e| e.to_string())?;
    let objects = data.objects.as_ref().ok_or("scenario has no objects")?;
    let lik = data.likelihoods.as_ref().ok_or("scenario has no likelihoods")?;
    let mut plans = Vec::new();
    for aw in [ActionWeighting::Uniform, ActionWeighting::Inverse] {
        for ow in [ObjectWeighting::Uniform, ObjectWeighting::Transductive] {
            let config = PipelineConfig { action_weighting: aw, object_weighting: ow, ..PipelineConfig::default() };
            let out = transport_objects(&data.prototypes, objects, lik, &config)
                .map_err(|e| format!("{aw}/{ow}: {e}"))?;
            plans.push(out.coupling.into_inner());
        }
    }
    let mut closest = f64::INFINITY;
    for i in 0..plans.len() {
        for j in i + 1..plans.len() {
            let diff = (&plans[i] - &plans[j]).iter().map(|x| x.abs()).fold(0.0, f64::max);
            closest = closest.min(diff);
        }
    }
    if closest <= 1e-9 {
        return Err(format!("two grid configurations share a coupling (min difference {closest:.2e})"));
    }

    // Similarity 1 gives weight 0.
    let o = data.prototypes.vectors()[0].clone();
    let far = data.prototypes.vectors()[1].clone();
    let actions = PrototypeSet::new(vec!["a".into(), "b".into()], vec![o.clone(), far]).unwrap();
    let objs = PrototypeSet::new(vec!["o".into()], vec![o]).unwrap();
    let u = action_weights_vs_objects(&actions, &objs).map_err(|e| e.to_string())?;
    if u[0] != 0.0 {
        return Err(format!("identical action/object weight is {} (expected 0)", u[0]));
    }
    // A single kept object gets weight 1.
    let w = object_weights(lik, &[3]).map_err(|e| e.to_string())?;
    if w != vec![1.0] {
        return Err(format!("single-object weights {w:?} (expected [1])"));
    }
    Ok(format!("4 configurations run, min pairwise coupling difference {closest:.2e}, endpoints exact"))
}

fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = v.iter().zip(q).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn rotate(q: &[Vec<f64>], v: &UnitVector) -> UnitVector {
    let out: Vec<f64> = q.iter().map(|row| row.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum()).collect();
    UnitVector::new(out).expect("rotation preserves norm")
}

fn rotation_equivariance() -> Outcome {
    let data = generate_scenario(&object_scenario()).map_err(|e| e.to_string())?;
    let objects = data.objects.clone().unwrap();
    let lik = data.likelihoods.clone().unwrap();
    let q = random_rotation(&mut ChaCha8Rng::seed_from_u64(9), 16);
    let r_items: EmbeddingSet = data.items.map_vectors(|v| rotate(&q, v));
    let r_protos = data.prototypes.map_vectors(|v| rotate(&q, v));
    let r_objects = objects.map_vectors(|v| rotate(&q, v));
    let config = PipelineConfig { k: 30, top_objects_t: 10, ..PipelineConfig::default() };

    let scores = |items: &EmbeddingSet, protos: &PrototypeSet, objs: &PrototypeSet| {
        let star = transport_actions(protos, items, &config)?.prototypes;
        let ddag = transport_objects(protos, objs, &lik, &config)?.prototypes;
        let base = score_action(items, protos)?;
        let action = score_action(items, &star)?;
        let object = score_object(&lik, objs, &ddag, config.top_objects_t)?;
        let fused = fuse_scores(&action, &object, config.epsilon_fusion, config.fusion_norm)?;
        Ok::<_, prototransport::Error>(vec![base, action, object, fused])
    };
    let plain = scores(&data.items, &data.prototypes, &objects).map_err(|e| e.to_string())?;
    let turned = scores(&r_items, &r_protos, &r_objects).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (a, b) in plain.iter().zip(&turned) {
        let diff = (a.values() - b.values()).iter().map(|x| x.abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    let detail = format!("max elementwise score change over 4 score matrices = {worst:.2e}");
    if worst < 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs every subcommand with paths relative to `root`.
fn full_chain(root: &Path) -> Result<(), String> {
    fs::write(
        root.join("config.txt"),
        "synth_classes=10\nsynth_items=20\nsynth_objects=30\nsynth_bias=0.3\nk=30\ntop_t=10\nseed=4\n",
    )
    .unwrap();
    let run = |args: &[&str]| run_cli_in(root, args);
    let (c, o) = ("config.txt", "out");
    run(&["synth", "--config", c, "--out", o])?;
    run(&["cluster", "--config", c, "--videos", "out/items.emb", "--out", o])?;
    run(&["transport-actions", "--config", c, "--prototypes", "out/prototypes.emb", "--videos", "out/items.emb", "--out", o])?;
    run(&["infer-actions", "--prototypes", "out/transported_actions.emb", "--videos", "out/items.emb", "--out", o])?;
    run(&[
        "transport-objects", "--config", c, "--prototypes", "out/prototypes.emb",
        "--objects", "out/objects.emb", "--likelihoods", "out/likelihoods.csv", "--out", o,
    ])?;
    run(&[
        "infer-objects", "--config", c, "--prototypes", "out/transported_objects.emb",
        "--objects", "out/objects.emb", "--likelihoods", "out/likelihoods.csv", "--out", o,
    ])?;
    run(&["fuse", "--config", c, "--action-scores", "out/scores_action.csv", "--object-scores", "out/scores_object.csv", "--out", o])?;
    run(&["eval", "--scores", "out/scores_fused.csv", "--truth", "out/truth.csv", "--out", o])?;
    run(&["report", "--reports", "out/report.txt", "--out", o])?;
    Ok(())
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    full_chain(a.path())?;
    full_chain(b.path())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    if sa.keys().ne(sb.keys()) {
        return Err("output trees list different files".into());
    }
    for (name, bytes) in &sa {
        if sb[name] != *bytes {
            return Err(format!("{} differs between runs", name.display()));
        }
    }
    Ok(format!("{} files byte-identical across two runs", sa.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 ot-exactness", ot_exactness),
        ("2 coupling-at-scale", coupling_at_scale),
        ("3 frechet-oracle", frechet_oracle),
        ("4 slerp-identities", slerp_identities),
        ("5 baseline-identity", baseline_identity),
        ("6 debiasing", debiasing),
        ("7 normalization-invariance", normalization_invariance),
        ("8 weighting-ablation", weighting_ablation),
        ("9 rotation-equivariance", rotation_equivariance),
        ("10 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())))));
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
