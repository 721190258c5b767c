use proptest::prelude::*;
use xgen_core::data::{generate, split_by_selection, GeneratorConfig, LabeledDataset};
use xgen_core::likelihood::{
    family, gaussian_nll, LikelihoodModel, Mask, MaskChoice, ModelOptions, TrainConfig, Variant,
};
use xgen_numerics::{Rng, Tensor};

fn seen(seed: u64) -> LabeledDataset {
    let g = GeneratorConfig::default();
    split_by_selection(&generate(&g, seed).unwrap(), &g).unwrap().seen
}

fn small_options(mask: MaskChoice) -> ModelOptions {
    ModelOptions { hidden: vec![8], mask, ..ModelOptions::default() }
}

fn build(v: Variant, options: &ModelOptions, data: &LabeledDataset, seed: u64) -> LikelihoodModel {
    LikelihoodModel::build(family(v.name()).unwrap(), options, data, &mut Rng::new(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn nll_matches_the_closed_form(z in -5.0f64..5.0, mu in -5.0f64..5.0, sigma in 1e-3f64..10.0) {
        // Same printed form, written through the variance.
        let want = 0.5 * (z - mu).powi(2) / (sigma * sigma) + 0.25 * (sigma * sigma).ln()
            + 0.5 * (2.0 * std::f64::consts::PI).ln();
        let got = gaussian_nll(z, mu, sigma).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn loss_is_invariant_to_row_order() {
    let data = seen(0).select(&(0..64).collect::<Vec<_>>()).unwrap();
    let mut rng = Rng::new(1);
    for v in Variant::ALL {
        let m = build(v, &small_options(MaskChoice::Learnable), &data, 2);
        let (input, target) = m.training_pair(&data);
        let perm = rng.permutation(data.len());
        let (a, sa) = m.loss_parts(&input, &target);
        let (b, sb) = m.loss_parts(&input.select_rows(&perm), &target.select_rows(&perm));
        assert!((a - b).abs() < 1e-12, "variant {v}: {a} vs {b}");
        assert_eq!(sa, sb);
    }
}

fn set_logits(m: &mut LikelihoodModel, value: f64) {
    for h in &mut m.heads {
        if let Mask::Learnable { logits } = &mut h.mask {
            *logits = logits.map(|_| value);
        }
    }
}

#[test]
fn sparsity_term_counts_mask_mass() {
    let data = seen(0).select(&(0..16).collect::<Vec<_>>()).unwrap();
    let mut m = build(Variant::A, &small_options(MaskChoice::Learnable), &data, 3);
    let (input, target) = m.training_pair(&data);
    set_logits(&mut m, -60.0);
    assert!(m.loss_parts(&input, &target).1 < 1e-20);
    set_logits(&mut m, 60.0);
    assert!((m.loss_parts(&input, &target).1 - 6.0).abs() < 1e-12);
}

#[test]
fn batch_prediction_equals_row_by_row() {
    let data = seen(1).select(&(0..40).collect::<Vec<_>>()).unwrap();
    for v in Variant::ALL {
        let m = build(v, &ModelOptions::default(), &data, 4);
        let input = if v.is_reverse() { &data.z } else { &data.x };
        let batch = m.predict(input);
        for r in 0..input.rows() {
            let one = m.predict(&input.select_rows(&[r]));
            assert_eq!(one.row(0), batch.row(r), "variant {v} row {r}");
        }
    }
}

#[test]
fn masked_out_feature_never_moves_a_prediction() {
    let data = seen(2);
    let m = LikelihoodModel::fit(
        family("A").unwrap(),
        &ModelOptions::default(),
        &data,
        &TrainConfig { epochs: 2, ..TrainConfig::default() },
        5,
    )
    .unwrap();
    let x = data.x.select_rows(&(0..200).collect::<Vec<_>>());
    let base = m.predict(&x);
    // Z1 ignores X3 and Z2 ignores X1.
    for (feature, spec) in [(2, 0), (0, 1)] {
        let mut moved = x.clone();
        for r in 0..moved.rows() {
            moved.set(r, feature, moved.get(r, feature) * 3.0 - 7.0);
        }
        assert_eq!(m.predict(&moved).column(spec), base.column(spec));
    }
}

#[test]
fn dense_variant_reacts_to_every_feature() {
    let data = seen(2);
    let m = LikelihoodModel::fit(
        family("B").unwrap(),
        &ModelOptions::default(),
        &data,
        &TrainConfig { epochs: 2, ..TrainConfig::default() },
        5,
    )
    .unwrap();
    let x = data.x.select_rows(&(0..50).collect::<Vec<_>>());
    let mut moved = x.clone();
    for r in 0..moved.rows() {
        moved.set(r, 2, 1.0 - moved.get(r, 2));
    }
    assert_ne!(m.predict(&moved).column(0), m.predict(&x).column(0));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let data = seen(3);
    let dir = tempfile::tempdir().unwrap();
    let x = data.x.select_rows(&(0..100).collect::<Vec<_>>());
    for v in Variant::ALL {
        let m = LikelihoodModel::fit(
            family(v.name()).unwrap(),
            &small_options(MaskChoice::Learnable),
            &data,
            &TrainConfig { epochs: 1, ..TrainConfig::default() },
            6,
        )
        .unwrap();
        let path = dir.path().join(format!("{v}.json"));
        m.save(&path).unwrap();
        let back = LikelihoodModel::load_file(&path).unwrap();
        assert_eq!(back, m);
        let input = if v.is_reverse() { &data.z.select_rows(&(0..100).collect::<Vec<_>>()) } else { &x };
        assert_eq!(back.predict(input), m.predict(input));
    }
}

#[test]
fn zero_epochs_keep_the_initialization() {
    let data = seen(4);
    let init = build(Variant::C, &ModelOptions::default(), &data, 7);
    let mut trained = init.clone();
    trained.train(&data, &TrainConfig { epochs: 0, ..TrainConfig::default() }, 8).unwrap();
    assert_eq!(trained.params(), init.params());
}

#[test]
fn reverse_samples_collapse_to_the_mean_at_the_sigma_floor() {
    let data = seen(5);
    let mut m = build(Variant::E, &small_options(MaskChoice::True), &data, 9);
    for h in &mut m.heads {
        // Large negative raw scale drives every sigma to the floor.
        let last = h.scale.biases.len() - 1;
        h.scale.biases[last] = h.scale.biases[last].map(|_| -1e3);
        let w = h.scale.weights.len() - 1;
        h.scale.weights[w] = Tensor::zeros_like(&h.scale.weights[w]);
    }
    let z = data.z.select_rows(&(0..50).collect::<Vec<_>>());
    let samples = m.sample_reverse(&z, &mut Rng::new(10)).unwrap();
    let mean = m.predict(&z);
    for (a, b) in samples.data().iter().zip(mean.data()) {
        assert!((a - b).abs() < 0.01, "{a} vs {b}");
    }
}

#[test]
fn independent_heads_give_uncorrelated_samples() {
    let data = seen(6);
    let m = build(Variant::E, &ModelOptions::default(), &data, 11);
    let n = 10_000;
    let z = Tensor::from_rows(&vec![vec![0.7, 1.1]; n]).unwrap();
    let s = m.sample_reverse(&z, &mut Rng::new(12)).unwrap();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let (u, v) = (s.column(a), s.column(b));
        let (mu, mv) = (u.iter().sum::<f64>() / n as f64, v.iter().sum::<f64>() / n as f64);
        let cov: f64 = u.iter().zip(&v).map(|(x, y)| (x - mu) * (y - mv)).sum();
        let su: f64 = u.iter().map(|x| (x - mu).powi(2)).sum();
        let sv: f64 = v.iter().map(|y| (y - mv).powi(2)).sum();
        assert!((cov / (su * sv).sqrt()).abs() < 0.05);
    }
}

#[test]
fn trained_variant_a_fits_the_conditional_mean() {
    let data = seen(7);
    let m = LikelihoodModel::fit(family("A").unwrap(), &ModelOptions::default(), &data, &TrainConfig::default(), 13)
        .unwrap();
    let pred = m.predict(&data.x);
    let mae = pred.data().iter().zip(data.z.data()).map(|(p, z)| (p - z).abs()).sum::<f64>() / pred.len() as f64;
    assert!(mae < 0.07, "mae {mae}");
}

#[test]
fn learned_masks_recover_the_generator_structure() {
    let data = seen(8);
    let options = ModelOptions { mask: MaskChoice::Learnable, ..ModelOptions::default() };
    let m = LikelihoodModel::fit(family("A").unwrap(), &options, &data, &TrainConfig::default(), 14).unwrap();
    assert_eq!(m.structure(), vec![vec![true, true, false], vec![false, true, true]], "masks {:?}", m.masks());
}

#[test]
fn stronger_sparsity_never_grows_the_mask_mass() {
    let data = seen(9);
    let options = ModelOptions { mask: MaskChoice::Learnable, ..ModelOptions::default() };
    let mut last = f64::INFINITY;
    for beta in [0.0, 1e-4, 5e-4, 1e-3] {
        let config = TrainConfig { beta, ..TrainConfig::default() };
        let m = LikelihoodModel::fit(family("A").unwrap(), &options, &data, &config, 15).unwrap();
        let ls: f64 = m.masks().iter().flatten().sum();
        assert!(ls <= last, "beta {beta}: L_s {ls} > {last}");
        last = ls;
    }
}
