//! Cross-module consistency checks for the defense pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smartvmf::ablation::{generate_ablations, AblationKind, AblationSpec};
use smartvmf::adversary::{build_mask, corner_placements, train_lavan, AttackConfig};
use smartvmf::classifier::{argmax, generate_synthetic, train_reference, Classifier};
use smartvmf::codec::decode_attention_pgm;
use smartvmf::evaluation::{run_sweep, write_report, Defense, SweepConfig};
use smartvmf::filter::{smart_vmf, FilterConfig};
use smartvmf::{Image, PixelCoord};

fn noisy_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..h * w * c).map(|_| rng.random_range(0.0..1.0)).collect();
    Image::new(h, w, c, data).unwrap()
}

/// With every weight toggle off and a single scale, the filter degenerates
/// to an unweighted Weiszfeld geometric median per window. This oracle is an
/// independent implementation of exactly that: its own window scan, uniform
/// unnormalized weights, its own update loop.
fn naive_unweighted_median_filter(img: &Image, side: usize, iters: usize, eps: f64) -> Vec<f64> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let radius = side / 2;
    let mut out = vec![0.0; h * w * c];
    for r in 0..h {
        for col in 0..w {
            let mut pts: Vec<&[f64]> = Vec::new();
            for rr in 0..h {
                for cc in 0..w {
                    if rr.abs_diff(r) <= radius && cc.abs_diff(col) <= radius {
                        pts.push(img.pixel(PixelCoord::new(rr, cc)));
                    }
                }
            }
            let mut z: Vec<f64> = img.pixel(PixelCoord::new(r, col)).to_vec();
            for _ in 0..iters {
                let mut num = vec![0.0; c];
                let mut den = 0.0;
                for p in &pts {
                    let dist: f64 = z
                        .iter()
                        .zip(p.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                        .max(eps);
                    den += 1.0 / dist;
                    for k in 0..c {
                        num[k] += p[k] / dist;
                    }
                }
                for k in 0..c {
                    z[k] = num[k] / den;
                }
            }
            for k in 0..c {
                out[(r * w + col) * c + k] = z[k];
            }
        }
    }
    out
}

#[test]
fn toggles_off_degenerates_to_unweighted_geometric_median() {
    let img = noisy_image(10, 10, 3, 101);
    let cfg = FilterConfig {
        scales: vec![5],
        use_content: false,
        use_spatial: false,
        use_attention: false,
        ..FilterConfig::default()
    };
    let ours = smart_vmf(&img, None, &cfg).unwrap();
    let naive = naive_unweighted_median_filter(&img, 5, cfg.max_iters, cfg.epsilon);
    for (a, b) in ours.data().iter().zip(&naive) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn filtering_before_ablation_differs_from_the_swapped_order() {
    let img = noisy_image(12, 12, 1, 55);
    let cfg = FilterConfig::default();
    let spec = AblationSpec {
        kind: AblationKind::Band,
        size: 2,
        stride: 1,
        fill: 0.5,
    };
    let filtered_first = generate_ablations(&smart_vmf(&img, None, &cfg).unwrap(), &spec, 0).unwrap();
    let ablated_first = generate_ablations(&img, &spec, 0).unwrap();
    let mut any_difference = false;
    for (a, b) in filtered_first.members.iter().zip(&ablated_first.members) {
        let swapped = smart_vmf(&b.image, None, &cfg).unwrap();
        if !a.image.bitwise_eq(&swapped) {
            any_difference = true;
            break;
        }
    }
    assert!(any_difference, "pipeline order must be observable in the output");
}

#[test]
fn degenerate_sweep_equals_plain_accuracy() {
    let data = generate_synthetic(21, 4, 3, 16, 16).unwrap();
    let (model, _) = train_reference(&data, 800, 0.1, 4).unwrap();
    let cfg = SweepConfig {
        defenses: vec![Defense::None],
        attack_grid: vec![(0, 0)],
        ..SweepConfig::default()
    };
    let records = run_sweep(&data, &model, &cfg).unwrap();
    assert_eq!(records.len(), data.images.len());
    for record in &records {
        let (img, label) = &data.images[record.image_id];
        let plain_correct = argmax(&model.predict_logits(img).unwrap()) == *label;
        assert_eq!(record.clean_correct, plain_correct);
        // With no attack the full-image votes are unanimous, so the
        // zero-delta certificate coincides with plain correctness.
        assert_eq!(record.robust_certified, plain_correct);
        assert_eq!(record.vote.n, 16);
    }
}

#[test]
fn small_sweep_is_deterministic() {
    let data = generate_synthetic(5, 2, 2, 16, 16).unwrap();
    let (model, _) = train_reference(&data, 500, 0.1, 4).unwrap();
    let cfg = SweepConfig {
        attack_grid: vec![(0, 0), (1, 2)],
        attack_iters: 60,
        ..SweepConfig::default()
    };
    let a = write_report(&run_sweep(&data, &model, &cfg).unwrap());
    let b = write_report(&run_sweep(&data, &model, &cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn attention_maps_steer_the_filter() {
    let img = noisy_image(9, 9, 1, 77);
    // Attention as PGM: bright on the left half, dark on the right.
    let mut pgm = b"P5\n9 9\n255\n".to_vec();
    for _ in 0..9 {
        for col in 0..9 {
            pgm.push(if col < 4 { 255 } else { 0 });
        }
    }
    let attention = decode_attention_pgm(&pgm).unwrap();
    let cfg = FilterConfig::default();
    let with = smart_vmf(&img, Some(&attention), &cfg).unwrap();
    let without = smart_vmf(&img, None, &cfg).unwrap();
    assert!(!with.bitwise_eq(&without));
}

#[test]
fn successful_attack_trace_reports_the_flip() {
    let data = generate_synthetic(7, 4, 2, 32, 32).unwrap();
    let (model, _) = train_reference(&data, 8000, 0.1, 4).unwrap();
    let (img, _) = &data.images[0];
    let side = 10;
    let placements = corner_placements(32, 32, side, 1).unwrap();
    let mask = build_mask(32, 32, side, &placements).unwrap();
    let source = argmax(&model.predict_logits(img).unwrap());
    let cfg = AttackConfig {
        target_class: (source + 1) % 4,
        area_fraction: 0.1,
        ..AttackConfig::default()
    };
    let out = train_lavan(img, &model, &cfg, &mask, 7).unwrap();
    let last = out.trace.last().unwrap();
    assert_eq!(last.predicted, cfg.target_class);
    // Target probability grows over the first iterations.
    assert!(out.trace[5].target_prob > out.trace[0].target_prob);
}
