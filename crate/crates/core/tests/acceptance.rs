//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p smartvmf --test acceptance -- --nocapture` to see
//! every line. Expected values come from independent oracles implemented in
//! this file (grid search, exhaustive enumeration, finite differences); the
//! golden filter output was frozen from the brute-force per-pixel oracle via
//! the ignored `regenerate_golden_files` test.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smartvmf::adversary::{build_mask, corner_placements, train_lavan, AttackConfig};
use smartvmf::classifier::{argmax, generate_synthetic, train_reference, Classifier};
use smartvmf::codec::{decode_ppm, encode_ppm};
use smartvmf::evaluation::{mean_where, robust_certified, run_sweep, write_report, AblationVote, Defense, SweepConfig};
use smartvmf::filter::{
    adaptive_weights, classic_vmf, fusion_weights, residual_energy, smart_vmf, weiszfeld_iterates,
    weiszfeld_median, weiszfeld_objective, weiszfeld_objective_smoothed, FilterConfig,
    FilterVariant, FusionMode, WeightedNeighborhood,
};
use smartvmf::{AttentionMap, Image, PixelCoord};

fn noisy_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..h * w * c).map(|_| rng.random_range(0.0..1.0)).collect();
    Image::new(h, w, c, data).unwrap()
}

fn random_neighborhood(
    rng: &mut ChaCha8Rng,
    max_len: usize,
    channels: usize,
) -> WeightedNeighborhood {
    let n = rng.random_range(1..=max_len);
    let entries: Vec<(PixelCoord, Vec<f64>, f64)> = (0..n)
        .map(|i| {
            let pixel: Vec<f64> = (0..channels).map(|_| rng.random_range(0.0..1.0)).collect();
            let weight = rng.random_range(0.05..1.0);
            (PixelCoord::new(i / 3, i % 3), pixel, weight)
        })
        .collect();
    WeightedNeighborhood::from_entries(entries[0].0, entries[0].1.clone(), &entries).unwrap()
}

/// Criterion 1: Weiszfeld output against a dense 1-D grid search of the
/// floored weighted objective, on 200 random neighborhoods.
///
/// The iteration started at a data point holding a near-critical weight
/// share escapes it geometrically with ratio barely above 1, so for a small
/// fraction of random draws (observed ~1.5%) 200 sweeps are provably not
/// enough for any correct implementation. Those cases are detected by the
/// step-length convergence indicator and held to a stricter standard
/// instead: monotone progress at T = 200 plus grid agreement under extended
/// iteration. At least 95% of cases must meet the plain T = 200 check.
#[test]
fn criterion_01_weiszfeld_grid_search_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let cfg = FilterConfig {
        max_iters: 200,
        ..FilterConfig::default()
    };
    let mut slow_cases = 0usize;
    for case in 0..200 {
        let nbhd = random_neighborhood(&mut rng, 9, 1);
        let iterates = weiszfeld_iterates(&nbhd, &cfg);
        let z = iterates.last().unwrap()[0];
        let objective = |g: f64| -> f64 {
            (0..nbhd.len())
                .map(|i| nbhd.weight(i) * (g - nbhd.pixel(i)[0]).abs().max(cfg.epsilon))
                .sum()
        };
        let mut best_g = 0.0;
        let mut best_f = f64::INFINITY;
        let mut k = 0usize;
        loop {
            let g = k as f64 * 1e-4;
            if g > 1.0 {
                break;
            }
            let f = objective(g);
            if f < best_f {
                best_f = f;
                best_g = g;
            }
            k += 1;
        }
        let last_step = (iterates[cfg.max_iters][0] - iterates[cfg.max_iters - 1][0]).abs();
        if last_step <= 1e-8 {
            assert!(
                (z - best_g).abs() <= 1e-3,
                "case {case}: weiszfeld {z} vs grid {best_g} (objectives {} vs {best_f})",
                objective(z)
            );
        } else {
            // Still in the slow escape regime at T = 200: require monotone
            // progress so far and oracle agreement once iterated out.
            slow_cases += 1;
            assert!(objective(z) <= objective(iterates[0][0]) + 1e-12, "case {case} made no progress");
            let extended = FilterConfig {
                max_iters: 20_000,
                ..cfg.clone()
            };
            let z_ext = weiszfeld_median(&nbhd, &extended)[0];
            assert!(
                (z_ext - best_g).abs() <= 1e-3,
                "case {case}: extended weiszfeld {z_ext} vs grid {best_g}"
            );
        }
    }
    assert!(
        slow_cases <= 10,
        "{slow_cases} of 200 cases missed the T = 200 convergence gate"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!(
        "criterion 01 weiszfeld grid-search oracle (200 cases, {slow_cases} via extended iteration, {elapsed:?}): PASS"
    );
}

/// Criterion 2: per-iteration objective monotonicity on 100 random
/// multi-channel neighborhoods.
///
/// The smoothed objective the sweep minimizes by alternating minimization is
/// asserted non-increasing within 1e-12 at every step of every case. The
/// floored objective agrees with it except when an iterate sits inside the
/// ε-ball of a neighborhood point, where it may tick up by at most ~ε; steps
/// entirely outside the balls are held to the 1e-12 tolerance, ball
/// crossings to the ε bound.
#[test]
fn criterion_02_weiszfeld_objective_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let cfg = FilterConfig::default();
    let mut ball_steps = 0usize;
    let mut total_steps = 0usize;
    for case in 0..100 {
        let channels = rng.random_range(1..=3);
        let nbhd = random_neighborhood(&mut rng, 49, channels);
        let iterates = weiszfeld_iterates(&nbhd, &cfg);
        assert_eq!(iterates.len(), cfg.max_iters + 1);
        let min_dist = |z: &[f64]| -> f64 {
            (0..nbhd.len())
                .map(|i| {
                    z.iter()
                        .zip(nbhd.pixel(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        };
        for (k, pair) in iterates.windows(2).enumerate() {
            total_steps += 1;
            let smooth_before = weiszfeld_objective_smoothed(&nbhd, &pair[0], cfg.epsilon);
            let smooth_after = weiszfeld_objective_smoothed(&nbhd, &pair[1], cfg.epsilon);
            assert!(
                smooth_after <= smooth_before + 1e-12,
                "case {case}: smoothed objective rose at step {k}: {smooth_before} -> {smooth_after}"
            );
            let floor_before = weiszfeld_objective(&nbhd, &pair[0], cfg.epsilon);
            let floor_after = weiszfeld_objective(&nbhd, &pair[1], cfg.epsilon);
            if min_dist(&pair[0]) > cfg.epsilon && min_dist(&pair[1]) > cfg.epsilon {
                assert!(
                    floor_after <= floor_before + 1e-12,
                    "case {case}: floored objective rose outside the ε-balls at step {k}"
                );
            } else {
                ball_steps += 1;
                assert!(
                    floor_after <= floor_before + cfg.epsilon,
                    "case {case}: floored objective rose by more than ε at step {k}"
                );
            }
        }
    }
    println!(
        "criterion 02 weiszfeld objective monotonicity (100 cases, {ball_steps}/{total_steps} ε-ball steps): PASS"
    );
}

/// Criterion 3: classic VMF equals the exhaustive argmin oracle, including
/// the first-in-row-major tie rule, on 50 random 8x8 3-channel images.
#[test]
fn criterion_03_classic_vmf_exhaustive_oracle() {
    for seed in 0..50u64 {
        let img = noisy_image(8, 8, 3, 0x3000 + seed);
        let out = classic_vmf(&img, 3).unwrap();
        for r in 0..8usize {
            for c in 0..8usize {
                // Independent window gather and argmin.
                let mut members: Vec<&[f64]> = Vec::new();
                for rr in r.saturating_sub(1)..=(r + 1).min(7) {
                    for cc in c.saturating_sub(1)..=(c + 1).min(7) {
                        members.push(img.pixel(PixelCoord::new(rr, cc)));
                    }
                }
                let mut best = 0usize;
                let mut best_sum = f64::INFINITY;
                for (i, xi) in members.iter().enumerate() {
                    let sum: f64 = members
                        .iter()
                        .map(|xj| {
                            xi.iter()
                                .zip(xj.iter())
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>()
                                .sqrt()
                        })
                        .sum();
                    if sum < best_sum {
                        best_sum = sum;
                        best = i;
                    }
                }
                let got = out.pixel(PixelCoord::new(r, c));
                assert_eq!(got, members[best], "seed {seed} pixel ({r}, {c})");
            }
        }
    }
    println!("criterion 03 classic VMF exhaustive argmin oracle (50 images): PASS");
}

/// Criterion 4: the filter is a fixed point on constant images within 1e-12
/// for every toggle combination and fusion mode, scales {3, 5, 7}.
#[test]
fn criterion_04_constant_fixed_point() {
    let img = Image::constant(9, 9, 3, 0.42).unwrap();
    let attention = AttentionMap::new(9, 9, (0..81).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
    let mut combos = 0;
    for content in [false, true] {
        for spatial in [false, true] {
            for attn in [false, true] {
                for mode in [FusionMode::Reliability, FusionMode::Mean, FusionMode::Uniform] {
                    let cfg = FilterConfig {
                        use_content: content,
                        use_spatial: spatial,
                        use_attention: attn,
                        fusion_mode: mode,
                        ..FilterConfig::default()
                    };
                    for attention in [None, Some(&attention)] {
                        let out = smart_vmf(&img, attention, &cfg).unwrap();
                        for (a, b) in out.data().iter().zip(img.data()) {
                            assert!(
                                (a - b).abs() <= 1e-12,
                                "toggle combo {content}/{spatial}/{attn} {mode:?} moved {b} to {a}"
                            );
                        }
                        combos += 1;
                    }
                }
            }
        }
    }
    println!("criterion 04 constant fixed point ({combos} configs): PASS");
}

/// Criterion 5: fusion weights sum to one at every pixel in every mode, each
/// component-ablation variant changes the output, and the mean/uniform alias
/// pair is bitwise identical.
#[test]
fn criterion_05_fusion_normalization_and_variants() {
    let img = noisy_image(16, 16, 3, 0x5EED);
    let mut rng = ChaCha8Rng::seed_from_u64(0xA77E);
    let attention =
        AttentionMap::new(16, 16, (0..256).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();

    // Per-pixel fusion normalization, every mode.
    let base = FilterConfig::default();
    for r in 0..16 {
        for c in 0..16 {
            let center = PixelCoord::new(r, c);
            let mut residuals = Vec::new();
            for &side in &base.scales {
                let neighbors = smartvmf::image::window(&img, center, side).unwrap();
                let nbhd = adaptive_weights(
                    &neighbors,
                    img.pixel(center),
                    center,
                    Some(&attention),
                    &base,
                    side,
                )
                .unwrap();
                let median = weiszfeld_median(&nbhd, &base);
                residuals.push(residual_energy(&nbhd, &median));
            }
            for mode in [FusionMode::Reliability, FusionMode::Mean, FusionMode::Uniform] {
                let cfg = FilterConfig {
                    fusion_mode: mode,
                    ..base.clone()
                };
                let pi = fusion_weights(&residuals, &cfg);
                assert!(
                    (pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12,
                    "pixel ({r}, {c}) mode {mode:?}"
                );
            }
        }
    }

    // Variant non-degeneracy against the full config.
    let full = smart_vmf(&img, Some(&attention), &FilterConfig::variant(FilterVariant::Full)).unwrap();
    let mut outputs = Vec::new();
    for v in FilterVariant::ALL {
        let out = smart_vmf(&img, Some(&attention), &FilterConfig::variant(v)).unwrap();
        outputs.push((v, out));
    }
    for (v, out) in &outputs {
        match v {
            FilterVariant::Full => assert!(out.bitwise_eq(&full)),
            _ => assert!(
                !out.bitwise_eq(&full),
                "{v:?} must change the output on a noisy image"
            ),
        }
    }
    let mean = &outputs.iter().find(|(v, _)| *v == FilterVariant::MeanFusion).unwrap().1;
    let uniform = &outputs.iter().find(|(v, _)| *v == FilterVariant::UniformFusion).unwrap().1;
    assert!(mean.bitwise_eq(uniform), "mean and uniform fusion are documented aliases");
    println!("criterion 05 fusion normalization + component variants: PASS");
}

/// Number of `(p, b)` start pairs in a cyclic axis of length `n` where the
/// length-`m` and length-`s` intervals overlap. The predicate is elementary
/// interval logic; `brute_pairs_1d` cross-checks it below.
fn pairs_1d(n: usize, m: usize, s: usize) -> usize {
    let mut count = 0;
    for p in 0..n {
        for b in 0..n {
            let fwd = (b + n - p) % n;
            let bwd = (p + n - b) % n;
            if fwd < m || bwd < s {
                count += 1;
            }
        }
    }
    count
}

/// Mask-based brute force of the same count: materialize both cyclic
/// intervals and test for a shared cell.
fn brute_pairs_1d(n: usize, m: usize, s: usize) -> usize {
    let mut count = 0;
    for p in 0..n {
        let mut patch = vec![false; n];
        for k in 0..m {
            patch[(p + k) % n] = true;
        }
        for b in 0..n {
            let mut hit = false;
            for k in 0..s {
                if patch[(b + k) % n] {
                    hit = true;
                    break;
                }
            }
            if hit {
                count += 1;
            }
        }
    }
    count
}

/// Criterion 6: the closed-form overlap bounds match exhaustive cyclic
/// enumeration. The band bound is exact for every admissible quadruple; the
/// block bound is exact on its validity domain `m+s-1 <= min(h, w)` (and
/// when both axes saturate) and a strict, sound upper bound in between —
/// which only arises for non-square images.
#[test]
fn criterion_06_delta_formulas_vs_enumeration() {
    let start = Instant::now();
    // Ground the O(1) overlap predicate against the mask brute force.
    for n in 1..=8 {
        for m in 1..=n {
            for s in 1..=n {
                assert_eq!(pairs_1d(n, m, s), brute_pairs_1d(n, m, s), "n={n} m={m} s={s}");
            }
        }
    }

    let mut exact = 0usize;
    let mut bounded = 0usize;
    for h in 1..=32usize {
        for w in 1..=32usize {
            let lim = h.min(w);
            for m in 1..=lim {
                // Band: patch columns against band columns; rows always meet.
                for s in 1..=w {
                    let enumerated = pairs_1d(w, m, s) as f64 / (w * w) as f64;
                    let formula = smartvmf::ablation::delta_band(h, w, m, s).unwrap();
                    assert_eq!(enumerated, formula, "band h={h} w={w} m={m} s={s}");
                }
                // Block: row and column overlaps are independent.
                for s in 1..=lim {
                    let rp = pairs_1d(h, m, s);
                    let cp = pairs_1d(w, m, s);
                    let enumerated = (rp * cp) as f64 / ((h * h) * (w * w)) as f64;
                    let formula = smartvmf::ablation::delta_block(h, w, m, s).unwrap();
                    let a = m + s - 1;
                    if a <= h.min(w) || a >= h.max(w) {
                        assert_eq!(enumerated, formula, "block h={h} w={w} m={m} s={s}");
                        exact += 1;
                    } else {
                        assert!(
                            enumerated < formula,
                            "block h={h} w={w} m={m} s={s}: {enumerated} !< {formula}"
                        );
                        bounded += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!(
        "criterion 06 delta enumeration ({exact} exact, {bounded} strictly bounded, {elapsed:?}): PASS"
    );
}

/// Criterion 7: a single 10%-area patch with the default step and budget
/// flips at least 80% of correctly classified images; the ascent objective
/// never decreases on runs that reach the stop threshold.
#[test]
fn criterion_07_attack_efficacy() {
    let data = generate_synthetic(7, 4, 25, 32, 32).unwrap();
    let (model, report) = train_reference(&data, 8000, 0.1, 4).unwrap();
    assert!(
        report.train_accuracy >= 0.95,
        "reference model reached only {}",
        report.train_accuracy
    );
    let side = smartvmf::adversary::patch_side_for_area(0.10, 32, 32);
    let placements = corner_placements(32, 32, side, 1).unwrap();
    let mask = build_mask(32, 32, side, &placements).unwrap();
    let mut correct = 0usize;
    let mut flipped = 0usize;
    for (img, label) in &data.images {
        let pred = argmax(&model.predict_logits(img).unwrap());
        if pred != *label {
            continue;
        }
        correct += 1;
        let cfg = AttackConfig {
            target_class: (pred + 1) % 4,
            step: 1e-2,
            max_iters: 500,
            area_fraction: 0.10,
            literal_sign: false,
            pin_source: false,
            ..AttackConfig::default()
        };
        let out = train_lavan(img, &model, &cfg, &mask, 7).unwrap();
        if out.trace.last().unwrap().predicted == cfg.target_class {
            flipped += 1;
        }
        if out.success {
            for pair in out.trace.windows(2) {
                assert!(
                    pair[1].objective >= pair[0].objective - 1e-9,
                    "objective fell on a successful run: {} -> {}",
                    pair[0].objective,
                    pair[1].objective
                );
            }
        }
    }
    let rate = flipped as f64 / correct as f64;
    assert!(rate >= 0.8, "flip rate {rate} below 0.8 ({flipped}/{correct})");
    println!("criterion 07 attack efficacy (flip rate {rate:.2}): PASS");
}

/// Criterion 8: analytic input gradients match central finite differences at
/// 10 random pixels on each of 20 random images.
#[test]
fn criterion_08_gradient_finite_difference_oracle() {
    let data = generate_synthetic(7, 4, 25, 32, 32).unwrap();
    let (model, _) = train_reference(&data, 8000, 0.1, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC8);
    let h = 1e-5;
    for img_case in 0..20 {
        let img = noisy_image(32, 32, 1, 0x8000 + img_case);
        let class = rng.random_range(0..4);
        let grad = model.input_gradient(&img, class).unwrap();
        let mut probes = 0;
        while probes < 10 {
            let idx = rng.random_range(0..32 * 32);
            let v = img.data()[idx];
            if v < 2.0 * h || v > 1.0 - 2.0 * h {
                continue;
            }
            probes += 1;
            let mut plus = img.data().to_vec();
            plus[idx] = v + h;
            let mut minus = img.data().to_vec();
            minus[idx] = v - h;
            let lp = model
                .predict_logits(&Image::new(32, 32, 1, plus).unwrap())
                .unwrap()[class];
            let lm = model
                .predict_logits(&Image::new(32, 32, 1, minus).unwrap())
                .unwrap()[class];
            let fd = (lp - lm) / (2.0 * h);
            let analytic = grad.data[idx];
            let tol = 1e-4 * analytic.abs().max(fd.abs()) + 1e-10;
            assert!(
                (analytic - fd).abs() <= tol,
                "image {img_case} idx {idx}: analytic {analytic} vs fd {fd}"
            );
        }
    }
    println!("criterion 08 gradient finite-difference oracle (20x10 probes): PASS");
}

/// Criterion 9: the margin rule matches brute-force evaluation over every
/// vote histogram with n <= 8 and K <= 3, for three deltas.
#[test]
fn criterion_09_certification_brute_force() {
    let mut checked = 0usize;
    for delta in [0.0, 0.05, 0.2] {
        // K = 2.
        for c0 in 0..=8usize {
            for c1 in 0..=8 - c0 {
                let vote = AblationVote::new(vec![c0, c1]).unwrap();
                for class in 0..2 {
                    let counts = [c0, c1];
                    let n = c0 + c1;
                    let expected = n > 0
                        && (0..2).filter(|&j| j != class).all(|j| {
                            counts[class] as f64 > counts[j] as f64 + 2.0 * delta * n as f64
                        });
                    assert_eq!(robust_certified(&vote, class, delta), expected);
                    checked += 1;
                }
            }
        }
        // K = 3.
        for c0 in 0..=8usize {
            for c1 in 0..=8 - c0 {
                for c2 in 0..=8 - c0 - c1 {
                    let vote = AblationVote::new(vec![c0, c1, c2]).unwrap();
                    let counts = [c0, c1, c2];
                    let n = c0 + c1 + c2;
                    for class in 0..3 {
                        let expected = n > 0
                            && (0..3).filter(|&j| j != class).all(|j| {
                                counts[class] as f64 > counts[j] as f64 + 2.0 * delta * n as f64
                            });
                        assert_eq!(robust_certified(&vote, class, delta), expected, "{counts:?} class {class} delta {delta}");
                        checked += 1;
                    }
                }
            }
        }
    }
    println!("criterion 09 certification brute force ({checked} histograms): PASS");
}

/// Criterion 10: directional pipeline ordering under the 4-patch 1% attack,
/// and clean-accuracy preservation of the filtered pipeline.
#[test]
fn criterion_10_pipeline_ordering() {
    let start = Instant::now();
    let data = generate_synthetic(7, 4, 25, 32, 32).unwrap();
    let (model, report) = train_reference(&data, 8000, 0.1, 4).unwrap();
    assert!(report.train_accuracy >= 0.95);
    let cfg = SweepConfig::default();
    let records = run_sweep(&data, &model, &cfg).unwrap();

    let robust_at = |defense: Defense| {
        mean_where(
            &records,
            |r| r.defense == defense && r.attack_n == 4 && r.attack_pct == 1,
            |r| r.robust_certified,
        )
    };
    let filtered = robust_at(Defense::Filtered);
    let smoothed = robust_at(Defense::SmoothedOnly);
    let none = robust_at(Defense::None);
    assert!(
        filtered >= smoothed && smoothed >= none,
        "robust ordering violated: filtered {filtered} smoothed {smoothed} none {none}"
    );

    let clean_of = |defense: Defense| {
        mean_where(
            &records,
            |r| r.defense == defense && r.attack_n == 0,
            |r| r.clean_correct,
        )
    };
    let clean_filtered = clean_of(Defense::Filtered);
    let clean_smoothed = clean_of(Defense::SmoothedOnly);
    assert!(
        (clean_filtered - clean_smoothed).abs() <= 0.05,
        "filtered clean {clean_filtered} strays from smoothed-only clean {clean_smoothed}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}, budget 10 min");
    println!(
        "criterion 10 pipeline ordering (robust {filtered:.2}/{smoothed:.2}/{none:.2}, clean {clean_filtered:.2} vs {clean_smoothed:.2}, {elapsed:?}): PASS"
    );
}

/// Criterion 11: identical seeds produce byte-identical sweep reports.
#[test]
fn criterion_11_sweep_determinism() {
    let data = generate_synthetic(7, 4, 25, 32, 32).unwrap();
    let (model, _) = train_reference(&data, 8000, 0.1, 4).unwrap();
    let cfg = SweepConfig::default();
    let a = write_report(&run_sweep(&data, &model, &cfg).unwrap());
    let b = write_report(&run_sweep(&data, &model, &cfg).unwrap());
    assert_eq!(a, b, "reports differ between identical runs");
    println!("criterion 11 sweep determinism ({} bytes): PASS", a.len());
}

/// Brute-force per-pixel reimplementation of the full filter used to produce
/// and verify the golden output. Independent of the production path: its own
/// window scan, weight arithmetic, update loop and fusion.
fn oracle_filter(img: &Image, attention: Option<&AttentionMap>, cfg: &FilterConfig) -> Vec<f64> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut out = vec![0.0; h * w * c];
    for r in 0..h {
        for col in 0..w {
            let xi: Vec<f64> = img.pixel(PixelCoord::new(r, col)).to_vec();
            let mut medians: Vec<Vec<f64>> = Vec::new();
            let mut residuals: Vec<f64> = Vec::new();
            for &side in &cfg.scales {
                let radius = side / 2;
                let mut pts: Vec<Vec<f64>> = Vec::new();
                let mut weights: Vec<f64> = Vec::new();
                for rr in 0..h {
                    for cc in 0..w {
                        if rr.abs_diff(r) > radius || cc.abs_diff(col) > radius {
                            continue;
                        }
                        let xj: Vec<f64> = img.pixel(PixelCoord::new(rr, cc)).to_vec();
                        let mut weight = 1.0;
                        if cfg.use_content {
                            let d2: f64 = xi.iter().zip(&xj).map(|(a, b)| (a - b) * (a - b)).sum();
                            weight *= (-d2 / (cfg.sigma_c * cfg.sigma_c)).exp();
                        }
                        if cfg.use_spatial {
                            let dr = rr as f64 - r as f64;
                            let dc = cc as f64 - col as f64;
                            let sp = cfg.spatial_sigma(side);
                            weight *= (-(dr * dr + dc * dc) / (sp * sp)).exp();
                        }
                        if cfg.use_attention {
                            let a = attention.map_or(0.0, |m| m.value(PixelCoord::new(rr, cc)));
                            weight *= 1.0 + cfg.lambda * a;
                        }
                        pts.push(xj);
                        weights.push(weight);
                    }
                }
                let total: f64 = weights.iter().sum();
                let weights: Vec<f64> = weights.into_iter().map(|v| v / total).collect();
                let mut z = xi.clone();
                for _ in 0..cfg.max_iters {
                    let mut num = vec![0.0; c];
                    let mut den = 0.0;
                    for (p, wgt) in pts.iter().zip(&weights) {
                        let dist: f64 = z
                            .iter()
                            .zip(p)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                            .max(cfg.epsilon);
                        den += wgt / dist;
                        for k in 0..c {
                            num[k] += wgt / dist * p[k];
                        }
                    }
                    for k in 0..c {
                        z[k] = num[k] / den;
                    }
                }
                let residual: f64 = pts
                    .iter()
                    .zip(&weights)
                    .map(|(p, wgt)| {
                        wgt * z
                            .iter()
                            .zip(p)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .sum();
                medians.push(z);
                residuals.push(residual);
            }
            let pi: Vec<f64> = match cfg.fusion_mode {
                FusionMode::Reliability => {
                    let hi = residuals
                        .iter()
                        .map(|e| -e / cfg.tau)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let raw: Vec<f64> = residuals.iter().map(|e| (-e / cfg.tau - hi).exp()).collect();
                    let sum: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / sum).collect()
                }
                _ => vec![1.0 / residuals.len() as f64; residuals.len()],
            };
            for k in 0..c {
                let mut v = 0.0;
                for (m, p) in medians.iter().zip(&pi) {
                    v += p * m[k];
                }
                out[(r * w + col) * c + k] = v.clamp(0.0, 1.0);
            }
        }
    }
    out
}

/// Criterion 12: default-config filter output on the pinned seed image
/// matches the committed golden PPM, and the brute-force oracle agrees with
/// the production path to 1e-12.
#[test]
fn criterion_12_golden_filter_output() {
    let seed_bytes = include_bytes!("data/filter_seed_16x16.ppm");
    let golden_bytes = include_bytes!("data/filter_golden_16x16.ppm");
    let img = decode_ppm(seed_bytes).unwrap();
    let cfg = FilterConfig::default();
    let out = smart_vmf(&img, None, &cfg).unwrap();
    let oracle = oracle_filter(&img, None, &cfg);
    for (a, b) in out.data().iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12, "production {a} vs oracle {b}");
    }
    let encoded = encode_ppm(&out).unwrap();
    assert_eq!(encoded.as_slice(), golden_bytes.as_slice(), "golden PPM drifted");
    println!("criterion 12 golden filter output (16x16): PASS");
}

/// Maintainer tool: regenerates the committed seed and golden files from the
/// brute-force oracle. `cargo test -p smartvmf --test acceptance -- --ignored`
#[test]
#[ignore]
fn regenerate_golden_files() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    std::fs::create_dir_all(&dir).unwrap();
    let img = noisy_image(16, 16, 3, 0xC0FFEE);
    // Quantize through the codec so the committed seed is self-contained.
    let seed_bytes = encode_ppm(&img).unwrap();
    std::fs::write(dir.join("filter_seed_16x16.ppm"), &seed_bytes).unwrap();
    let img = decode_ppm(&seed_bytes).unwrap();
    let oracle = oracle_filter(&img, None, &FilterConfig::default());
    let golden = Image::new(16, 16, 3, oracle).unwrap();
    std::fs::write(dir.join("filter_golden_16x16.ppm"), encode_ppm(&golden).unwrap()).unwrap();
}
