use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentinel_core::boost::{build_cascade, gen_features, train_strong, BuildStatus, CascadeTargets, Sample, TrainingSet, MIN_EPSILON};
use sentinel_core::cascade_xml::{parse_cascade, serialize_cascade};
use sentinel_core::haar::ScaledCascade;
use sentinel_core::imaging::integral;
use sentinel_core::synthetic::sample_set;
use sentinel_core::{Cascade, GrayImage};

fn accepts(c: &Cascade, w: &GrayImage) -> bool {
    let (ii, sq) = integral(w);
    ScaledCascade::new(c, 1.0).classify(&ii, &sq, 0, 0).unwrap()
}

#[test]
fn synthetic_faces_are_learned_quickly() {
    let (pos, neg) = sample_set(21, 24, 60, 60);
    let samples: Vec<Sample> = pos.into_iter().map(Sample::positive).chain(neg.into_iter().map(Sample::negative)).collect();
    let set = TrainingSet::new(&samples, gen_features(24, 24, 2)).unwrap();
    let (sc, rounds) = train_strong(&set, 10).unwrap();
    assert!(rounds.len() <= 10);
    let mut bound = 1.0;
    for r in &rounds {
        assert!(r.epsilon < 0.5);
        assert!((r.weight_sum - 1.0).abs() < 1e-9);
        let e = r.epsilon.max(MIN_EPSILON);
        bound *= 2.0 * (e * (1.0 - e)).sqrt();
    }
    let errors = samples.iter().filter(|s| sc.predict(&s.window) != s.is_positive()).count();
    assert!(errors as f64 / samples.len() as f64 <= bound);
    assert_eq!(errors, 0, "training accuracy below 100% after {} rounds", rounds.len());
}

#[test]
fn trivially_separable_data_needs_one_stage() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut half = |bright_right: bool| {
        let lo = rng.random_range(10..60u8);
        let hi = rng.random_range(150..250u8);
        GrayImage::from_fn(8, 8, move |x, _| if (x >= 4) == bright_right { hi } else { lo })
    };
    let pos: Vec<_> = (0..30).map(|_| half(true)).collect();
    let neg: Vec<_> = (0..60).map(|_| half(false)).collect();
    let out = build_cascade(&pos, &neg, &CascadeTargets::default(), &gen_features(8, 8, 1)).unwrap();
    assert_eq!(out.status, BuildStatus::Complete);
    assert_eq!(out.cascade.stages().len(), 1);
    assert!(pos.iter().all(|p| accepts(&out.cascade, p)));
    assert!(neg.iter().all(|n| !accepts(&out.cascade, n)));
}

#[test]
fn small_cascade_round_trips_and_bounds_fpr() {
    let (pos, pool) = sample_set(3, 24, 80, 400);
    let targets = CascadeTargets { f_target: 0.02, max_stages: 4, ..CascadeTargets::default() };
    let out = build_cascade(&pos, &pool, &targets, &gen_features(24, 24, 3)).unwrap();
    assert!(!out.stages.is_empty());
    for r in &out.stages {
        assert!(r.tpr >= targets.d_min - 1e-12, "{r:?}");
    }

    let reloaded = parse_cascade(&serialize_cascade(&out.cascade)).unwrap();
    assert_eq!(reloaded, out.cascade);

    // per-stage rates measured on the held-out negatives that reach each stage
    let (_, held_out) = sample_set(99, 24, 0, 2000);
    let mut reaching: Vec<&GrayImage> = held_out.iter().collect();
    let mut product = 1.0;
    for (k, stage) in out.cascade.stages().iter().enumerate() {
        let single = Cascade::new(24, 24, vec![stage.clone()]).unwrap();
        let passed: Vec<&GrayImage> = reaching.iter().copied().filter(|n| accepts(&single, n)).collect();
        if !reaching.is_empty() {
            product *= passed.len() as f64 / reaching.len() as f64;
        }
        reaching = passed;
        let prefix = Cascade::new(24, 24, out.cascade.stages()[..=k].to_vec()).unwrap();
        let cumulative = held_out.iter().filter(|n| accepts(&prefix, n)).count() as f64 / held_out.len() as f64;
        assert!(cumulative <= product + 1e-12, "k={k}: {cumulative} vs {product}");
    }
    let final_rate = reaching.len() as f64 / held_out.len() as f64;
    assert!(final_rate <= 2.0 * out.cumulative_fpr + 0.05, "held-out {final_rate} vs training {}", out.cumulative_fpr);
    eprintln!("stages {:?}, training fpr {}, held-out fpr {final_rate}", out.stages, out.cumulative_fpr);
}

#[test]
fn training_is_reproducible() {
    let (pos, pool) = sample_set(8, 24, 40, 120);
    let targets = CascadeTargets { max_stages: 2, ..CascadeTargets::default() };
    let feats = gen_features(24, 24, 4);
    let a = build_cascade(&pos, &pool, &targets, &feats).unwrap();
    let b = build_cascade(&pos, &pool, &targets, &feats).unwrap();
    assert_eq!(serialize_cascade(&a.cascade), serialize_cascade(&b.cascade));
}
