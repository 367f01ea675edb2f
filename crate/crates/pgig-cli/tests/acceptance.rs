//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Tolerances and runtime budgets are pinned in the assertions.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pgig_core::attribution::{
    self, integrated_gradients, pgig as pgig_method, smoothgrad_ig, vargrad, Baseline, Method,
    MethodConfig,
};
use pgig_core::degradation::{run_benchmark, DegradationConfig};
use pgig_core::network::{Activation, BackwardMode, Layer, Network, OutputMode};
use pgig_core::patterns::{collect_batch, estimate_patterns};
use pgig_core::rng::RandomSource;
use pgig_core::stress::{
    build_stress_model, generate_dataset, run_stress_comparison, StressConfig,
};
use pgig_core::tensor::Tensor;
use pgig_core::trainer::{fit_patterns, generate_task, train, TaskConfig, TrainConfig};

fn report(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn vec1(values: &[f64]) -> Tensor {
    Tensor::vector(values.to_vec()).unwrap()
}

fn random_net(rng: &mut RandomSource, max_layers: usize, max_units: usize) -> Network {
    let layer_count = 1 + rng.below(max_layers);
    let mut dims = vec![1 + rng.below(max_units)];
    for _ in 0..layer_count {
        dims.push(1 + rng.below(max_units));
    }
    let mut layers = Vec::new();
    for w in dims.windows(2) {
        let weights = Tensor::matrix(
            w[1],
            w[0],
            (0..w[0] * w[1]).map(|_| rng.uniform() * 2.0 - 1.0).collect(),
        )
        .unwrap();
        let bias = Tensor::vector((0..w[1]).map(|_| rng.uniform() * 0.4 - 0.2).collect()).unwrap();
        let activation = if rng.below(2) == 0 {
            Activation::Relu
        } else {
            Activation::Linear
        };
        layers.push(Layer::new(weights, bias, activation).unwrap());
    }
    Network::new(layers, OutputMode::Raw).unwrap()
}

/// Independent oracle: central finite differences of seed.output over the
/// forward pass only.
fn fd_gradient(net: &Network, x: &Tensor, seed: &Tensor, h: f64) -> Vec<f64> {
    let eval = |point: Vec<f64>| {
        let trace = net.forward(&Tensor::vector(point).unwrap()).unwrap();
        trace
            .output()
            .data()
            .iter()
            .zip(seed.data())
            .map(|(o, s)| o * s)
            .sum::<f64>()
    };
    (0..x.len())
        .map(|i| {
            let mut plus = x.data().to_vec();
            let mut minus = x.data().to_vec();
            plus[i] += h;
            minus[i] -= h;
            (eval(plus) - eval(minus)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let mut rng = RandomSource::new(20_240_501);
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    while checked < 50 {
        let net = random_net(&mut rng, 3, 8);
        let x = Tensor::vector(
            (0..net.input_dim()).map(|_| rng.uniform() * 2.0 - 1.0).collect(),
        )
        .unwrap();
        let trace = net.forward(&x).unwrap();
        // Keep every ReLU pre-activation at least 1e-2 from its kink so the
        // input sits well over 1e-3 away in input space.
        let near_kink = (0..net.layers().len()).any(|k| {
            net.layers()[k].activation() == Activation::Relu
                && trace.pre_activation(k).data().iter().any(|v| v.abs() < 1e-2)
        });
        if near_kink {
            continue;
        }
        let seed = Tensor::vector(vec![1.0; net.output_dim()]).unwrap();
        let grad = net.backward(&trace, &seed, BackwardMode::Standard).unwrap();
        let oracle = fd_gradient(&net, &x, &seed, 1e-6);
        for (g, o) in grad.data().iter().zip(&oracle) {
            let scale = g.abs().max(o.abs());
            if scale > 1e-8 {
                worst = worst.max((g - o).abs() / scale);
            }
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    report(
        1,
        "gradient correctness",
        worst < 1e-6 && elapsed < Duration::from_secs(5),
        &format!("50 nets, worst relative error {worst:.3e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_stress_reproduction() {
    let start = Instant::now();

    let quiet = StressConfig {
        noise_sigma: 0.0,
        ..StressConfig::default()
    };
    let comparison = run_stress_comparison(&quiet).unwrap();
    let mut pa_saturated = true;
    let mut pgig_survives = true;
    for (point, (pa1, pgig1)) in comparison
        .dataset
        .points()
        .iter()
        .zip(comparison.pa.signal.iter().zip(&comparison.pgig.signal))
    {
        if point.z > 1.05 {
            pa_saturated &= *pa1 == 0.0;
            pgig_survives &= *pgig1 > 0.0;
        }
    }
    let pgig_distractor_null = comparison.pgig.distractor.iter().all(|v| *v == 0.0);

    let noisy = StressConfig::default();
    let noisy_comparison = run_stress_comparison(&noisy).unwrap();
    let ig_leak = noisy_comparison.ig.mean_abs_distractor();
    let pgig_leak = noisy_comparison.pgig.mean_abs_distractor();
    let leak_dominates = ig_leak > 10.0 * pgig_leak;

    let elapsed = start.elapsed();
    report(
        2,
        "stress reproduction",
        pa_saturated
            && pgig_survives
            && pgig_distractor_null
            && leak_dominates
            && elapsed < Duration::from_secs(10),
        &format!(
            "pa saturated {pa_saturated}, pgig survives {pgig_survives}, pgig distractor null \
             {pgig_distractor_null}, ig leak {ig_leak:.4} vs pgig leak {pgig_leak:.4}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_3_pattern_estimation() {
    let start = Instant::now();
    let cfg = StressConfig {
        z_step: 0.0004, // 10001 grid points
        ..StressConfig::default()
    };
    let mut rng = RandomSource::new(cfg.seed);
    let dataset = generate_dataset(&cfg, &mut rng).unwrap();
    let inputs: Vec<Tensor> = dataset.points().iter().map(|p| p.input.clone()).collect();
    let net = build_stress_model();
    let batch = collect_batch(&net, &inputs).unwrap();
    let set = estimate_patterns(&batch, &net).unwrap();

    let p1 = set.layer(0).values();
    let p1_err = (p1.get2(0, 0) - (-1.0)).abs().max(p1.get2(0, 1).abs());
    let p2_err = (set.layer(1).values().get2(0, 0) - (-1.0)).abs();

    let mut normalization_ok = true;
    for (layer, patterns) in net.layers().iter().zip(set.layers()) {
        for (j, valid) in patterns.valid().iter().enumerate() {
            if !*valid {
                continue;
            }
            let mut wp = 0.0;
            for i in 0..layer.in_dim() {
                wp += layer.weights().get2(j, i) * patterns.values().get2(j, i);
            }
            normalization_ok &= (wp - 1.0).abs() < 1e-9;
        }
    }
    let elapsed = start.elapsed();
    report(
        3,
        "pattern estimation",
        p1_err < 0.02 && p2_err < 1e-6 && normalization_ok && elapsed < Duration::from_secs(30),
        &format!(
            "|p1 - (-1,0)|_inf = {p1_err:.5}, |p2 + 1| = {p2_err:.1e}, normalized \
             {normalization_ok}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_4_linear_case_reduction() {
    let mut rng = RandomSource::new(44);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let out_dim = 1 + rng.below(4);
        let in_dim = 2 + rng.below(6);
        let weights = Tensor::matrix(
            out_dim,
            in_dim,
            (0..out_dim * in_dim)
                .map(|_| rng.uniform() * 2.0 - 1.0)
                .collect(),
        )
        .unwrap();
        let bias =
            Tensor::vector((0..out_dim).map(|_| rng.uniform() * 0.4 - 0.2).collect()).unwrap();
        let pattern = Tensor::matrix(
            out_dim,
            in_dim,
            (0..out_dim * in_dim)
                .map(|_| rng.uniform() * 3.0 - 1.5)
                .collect(),
        )
        .unwrap();
        let layer = Layer::new(weights, bias, Activation::Linear)
            .unwrap()
            .with_pattern(pattern.clone())
            .unwrap();
        let net = Network::new(vec![layer], OutputMode::Raw).unwrap();
        let x = Tensor::vector(
            (0..in_dim).map(|_| rng.uniform() * 4.0 - 2.0).collect(),
        )
        .unwrap();
        let target = if out_dim == 1 { None } else { Some(rng.below(out_dim)) };
        for steps in [1usize, 5, 25] {
            let cfg = MethodConfig {
                steps,
                ..MethodConfig::default()
            };
            let guided = pgig_method(&net, &x, target, &cfg).unwrap();
            let ig = integrated_gradients(&net, &x, target, &cfg).unwrap();
            let row = target.unwrap_or(0);
            for i in 0..in_dim {
                let expected = pattern.get2(row, i) * ig.values().get(i);
                let got = guided.values().get(i);
                let scale = expected.abs().max(got.abs()).max(1e-300);
                worst = worst.max((got - expected).abs() / scale);
            }
        }
    }
    report(
        4,
        "linear-case reduction",
        worst < 1e-12,
        &format!("20 linear nets, m in {{1,5,25}}, worst relative deviation {worst:.3e}"),
    );
}

#[test]
fn criterion_5_ig_completeness() {
    let net = build_stress_model();
    let x = vec1(&[2.0, 0.0]);
    let f_x = net.forward(&x).unwrap().output().get(0);
    let f_b = net.forward(&vec1(&[0.0, 0.0])).unwrap().output().get(0);
    let delta = f_x - f_b;
    let gap = |steps: usize| -> f64 {
        let cfg = MethodConfig {
            steps,
            ..MethodConfig::default()
        };
        let map = integrated_gradients(&net, &x, None, &cfg).unwrap();
        (map.values().data().iter().sum::<f64>() - delta).abs()
    };
    let g1000 = gap(1000);
    let g2000 = gap(2000);
    let g50 = gap(50);
    report(
        5,
        "ig completeness",
        g1000 < 2e-3 && g2000 < g50,
        &format!("gap(1000) = {g1000:.3e}, gap(2000) = {g2000:.3e}, gap(50) = {g50:.3e}"),
    );
}

#[test]
fn criterion_6_collapse_identities() {
    let bits_eq = |a: &Tensor, b: &Tensor| {
        a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits())
    };

    // sigma = 0: the smoothed path method collapses onto plain integrated
    // gradients and the variance method onto the zero map, bit for bit.
    let net = build_stress_model();
    let mut rng = RandomSource::new(77);
    let mut smooth_collapse = true;
    let mut variance_zero = true;
    for _ in 0..20 {
        let x = vec1(&[rng.uniform() * 4.0 - 2.0, rng.uniform() * 2.0 - 1.0]);
        let cfg = MethodConfig {
            noise_sigma: 0.0,
            ..MethodConfig::default()
        };
        let sgig = smoothgrad_ig(&net, &x, None, &cfg).unwrap();
        let ig = integrated_gradients(&net, &x, None, &cfg).unwrap();
        smooth_collapse &= bits_eq(sgig.values(), ig.values());
        let vg = vargrad(&net, &x, None, &cfg).unwrap();
        variance_zero &= vg.values().data().iter().all(|v| *v == 0.0);
    }

    // Linear nets: gradient x input coincides with integrated gradients
    // from a zero baseline under the default step count.
    let mut gxi_equals_ig = true;
    for _ in 0..20 {
        let in_dim = 2 + rng.below(6);
        let weights = Tensor::matrix(
            1,
            in_dim,
            (0..in_dim).map(|_| rng.uniform() * 2.0 - 1.0).collect(),
        )
        .unwrap();
        let layer = Layer::new(weights, vec1(&[0.1]), Activation::Linear).unwrap();
        let lin = Network::new(vec![layer], OutputMode::Raw).unwrap();
        let x = Tensor::vector(
            (0..in_dim).map(|_| rng.uniform() * 4.0 - 2.0).collect(),
        )
        .unwrap();
        for steps in [1usize, 25] {
            let cfg = MethodConfig {
                steps,
                baseline: Baseline::Zero,
                ..MethodConfig::default()
            };
            let gxi = attribution::gradient_times_input(&lin, &x, None, &cfg).unwrap();
            let ig = integrated_gradients(&lin, &x, None, &cfg).unwrap();
            gxi_equals_ig &= bits_eq(gxi.values(), ig.values());
        }
    }
    report(
        6,
        "collapse identities",
        smooth_collapse && variance_zero && gxi_equals_ig,
        &format!(
            "sigma=0 smoothgrad_ig == ig: {smooth_collapse}, sigma=0 vargrad == 0: \
             {variance_zero}, linear gxi == ig: {gxi_equals_ig}"
        ),
    );
}

#[test]
fn criterion_7_desk_scale_degradation() {
    let start = Instant::now();
    let task = generate_task(&TaskConfig::default()).unwrap();
    assert!(task.val.len() >= 500, "need at least 500 test images");
    let outcome = train(&task, &TrainConfig::default()).unwrap();
    let trained_ok = outcome.best_val_accuracy >= 0.90;
    let (net, _summary, _set) = fit_patterns(&outcome.network, &task).unwrap();

    let references: Vec<Tensor> = task.train[..49].iter().map(|e| e.pixels.clone()).collect();
    let cfg = DegradationConfig {
        method_config: MethodConfig {
            random_seed: 9,
            references: Some(references),
            ..MethodConfig::default()
        },
        ..DegradationConfig::default()
    };
    let curves = run_benchmark(&net, &task.val, &cfg).unwrap();
    assert_eq!(curves.len(), 11);

    let first = &curves[0];
    let mut endpoints_shared = true;
    for curve in &curves[1..] {
        endpoints_shared &= curve.points.first().unwrap().1.to_bits()
            == first.points.first().unwrap().1.to_bits();
        endpoints_shared &=
            curve.points.last().unwrap().1.to_bits() == first.points.last().unwrap().1.to_bits();
    }

    let auc = |m: Method| curves.iter().find(|c| c.method == m).unwrap().auc;
    let random_margin = auc(Method::RandomBaseline) - auc(Method::Pgig);
    let vanilla_margin = auc(Method::VanillaGradient) - auc(Method::Pgig);
    let elapsed = start.elapsed();
    report(
        7,
        "desk-scale degradation",
        trained_ok
            && endpoints_shared
            && random_margin > 0.05
            && vanilla_margin > 0.02
            && elapsed < Duration::from_secs(600),
        &format!(
            "val acc {:.3}, endpoints shared {endpoints_shared}, auc(random) - auc(pgig) = \
             {random_margin:.4}, auc(vanilla) - auc(pgig) = {vanilla_margin:.4}, {elapsed:.2?}",
            outcome.best_val_accuracy
        ),
    );
}

// --- criterion 8: manifest determinism through the binary -----------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pgig")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pgig_accept_{}_{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(args: &[&str]) {
    let output = Command::new(bin()).args(args).output().expect("spawn pgig");
    assert!(
        output.status.success(),
        "pgig {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Byte-compares every CSV and PPM between two directories.
fn artifacts_match(a: &Path, b: &Path) -> bool {
    let mut names: Vec<String> = std::fs::read_dir(a)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            (name.ends_with(".csv") || name.ends_with(".ppm")).then_some(name)
        })
        .collect();
    names.sort();
    assert!(!names.is_empty(), "no artifacts under {}", a.display());
    names.iter().all(|name| {
        let left = std::fs::read(a.join(name)).unwrap();
        let right = std::fs::read(b.join(name)).unwrap_or_default();
        left == right
    })
}

#[test]
fn criterion_8_manifest_determinism() {
    let root = temp_dir("determinism");
    let cfg_path = root.join("pipeline.cfg");
    std::fs::write(
        &cfg_path,
        "[stress]\nsteps = 200\n\n[task]\ntrain_size = 200\nval_size = 60\nseed = 7\n\n\
         [train]\nepochs = 5\nseed = 11\n\n\
         [degrade]\nmethods = vanilla_gradient,smoothgrad_squared,pgig,random_baseline\n\
         max_images = 20\nseed = 9\n",
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let stress_dir = root.join("stress");
    run_ok(&["stress", "--config", cfg, "--out", stress_dir.to_str().unwrap()]);

    let train_dir = root.join("train");
    run_ok(&["train", "--config", cfg, "--out", train_dir.to_str().unwrap()]);
    let model = train_dir.join("model.net");
    let train_csv = train_dir.join("train.csv");
    let val_csv = train_dir.join("val.csv");

    let patterns_dir = root.join("patterns");
    run_ok(&[
        "patterns",
        "--network",
        model.to_str().unwrap(),
        "--data",
        train_csv.to_str().unwrap(),
        "--out",
        patterns_dir.to_str().unwrap(),
    ]);
    let patterned = patterns_dir.join("model_patterns.net");

    let explain_dir = root.join("explain");
    run_ok(&[
        "explain",
        "--config",
        cfg,
        "--network",
        patterned.to_str().unwrap(),
        "--data",
        val_csv.to_str().unwrap(),
        "--index",
        "1",
        "--method",
        "pgig",
        "--render",
        "--out",
        explain_dir.to_str().unwrap(),
    ]);

    let degrade_dir = root.join("degrade");
    run_ok(&[
        "degrade",
        "--config",
        cfg,
        "--network",
        patterned.to_str().unwrap(),
        "--data",
        val_csv.to_str().unwrap(),
        "--out",
        degrade_dir.to_str().unwrap(),
    ]);

    let render_dir = root.join("render");
    run_ok(&[
        "render",
        "--map",
        explain_dir.join("attribution.csv").to_str().unwrap(),
        "--out",
        render_dir.to_str().unwrap(),
    ]);

    let mut all_match = true;
    let mut details = Vec::new();
    for dir in [
        &stress_dir,
        &train_dir,
        &patterns_dir,
        &explain_dir,
        &degrade_dir,
        &render_dir,
    ] {
        let rerun_dir = root.join(format!(
            "{}_rerun",
            dir.file_name().unwrap().to_string_lossy()
        ));
        run_ok(&[
            "rerun",
            dir.join("manifest.txt").to_str().unwrap(),
            "--out",
            rerun_dir.to_str().unwrap(),
        ]);
        let matched = artifacts_match(dir, &rerun_dir);
        all_match &= matched;
        details.push(format!(
            "{}: {}",
            dir.file_name().unwrap().to_string_lossy(),
            if matched { "identical" } else { "DIFFERS" }
        ));
    }
    report(
        8,
        "manifest determinism",
        all_match,
        &format!("rerun artifacts {}", details.join(", ")),
    );
}

#[test]
fn criterion_9_serialization_round_trip() {
    let mut rng = RandomSource::new(990);
    let mut all_exact = true;
    for case in 0..10 {
        let mut net = random_net(&mut rng, 3, 8);
        if case % 2 == 0 {
            for layer in (0..net.layers().len()).collect::<Vec<_>>() {
                let shape = net.layers()[layer].weights().shape().to_vec();
                let pattern = Tensor::new(
                    shape.clone(),
                    (0..shape[0] * shape[1])
                        .map(|_| rng.uniform() * 2.0 - 1.0)
                        .collect(),
                )
                .unwrap();
                // Round-trip the pattern block too.
                let mut layers: Vec<Layer> = net.layers().to_vec();
                layers[layer] = layers[layer].clone().with_pattern(pattern).unwrap();
                net = Network::new(layers, net.output_mode()).unwrap();
            }
        }
        let mut buffer = Vec::new();
        net.write_to(&mut buffer).unwrap();
        let restored = Network::read_from(&mut buffer.as_slice()).unwrap();
        for _ in 0..10 {
            let x = Tensor::vector(
                (0..net.input_dim())
                    .map(|_| rng.uniform() * 6.0 - 3.0)
                    .collect(),
            )
            .unwrap();
            let original = net.forward(&x).unwrap();
            let reloaded = restored.forward(&x).unwrap();
            for (a, b) in original
                .output()
                .data()
                .iter()
                .zip(reloaded.output().data())
            {
                all_exact &= a.to_bits() == b.to_bits();
            }
        }
    }
    report(
        9,
        "serialization round trip",
        all_exact,
        "100 random inputs over 10 nets reproduce forward outputs bit-exactly",
    );
}
