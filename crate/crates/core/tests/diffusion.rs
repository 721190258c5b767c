use xgen_core::data::{generate, split_by_selection, GeneratorConfig, LabeledDataset};
use xgen_core::diffusion::{forward_noise, DiffusionPrior, NoiseSchedule, PriorConfig};
use xgen_core::eval::{median_heuristic, mmd, stack_rows};
use xgen_core::norm::NormStats;
use xgen_numerics::{Rng, Tensor};

fn seen(seed: u64) -> LabeledDataset {
    let g = GeneratorConfig::default();
    split_by_selection(&generate(&g, seed).unwrap(), &g).unwrap().seen
}

#[test]
fn terminal_second_moment_matches_the_forward_process() {
    let data = generate(&GeneratorConfig::default(), 0).unwrap();
    let x0 = NormStats::fit(&data.x).unwrap().normalize(&data.x);
    let s = PriorConfig::default().schedule().unwrap();
    let t = s.steps();
    let eps = Rng::new(1).normal_matrix(x0.rows(), x0.cols());
    let xt = forward_noise(&s, &x0, t, &eps).unwrap();
    let got = xt.data().iter().map(|v| v * v).sum::<f64>() / xt.rows() as f64;
    let ab = s.alpha_bar(t);
    let want = 3.0 * (ab * 1.0 + (1.0 - ab));
    assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    // Gaussian KL to N(0, I) from the moments of x_T, per dimension.
    let var = ab + (1.0 - ab);
    assert!(ab < 0.01 && 0.5 * (var - 1.0 - var.ln()) < 0.05);
}

#[test]
fn noise_is_inverted_by_the_true_epsilon() {
    let s = NoiseSchedule::default();
    let mut rng = Rng::new(2);
    let x0 = rng.normal_matrix(50, 3);
    let eps = rng.normal_matrix(50, 3);
    for t in [1, 37, s.steps()] {
        let xt = forward_noise(&s, &x0, t, &eps).unwrap();
        let ab = s.alpha_bar(t);
        for ((x, e), want) in xt.data().iter().zip(eps.data()).zip(x0.data()) {
            let back = (x - (1.0 - ab).sqrt() * e) / ab.sqrt();
            assert!((back - want).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_epochs_keep_the_initialization() {
    let data = seen(0);
    let c = PriorConfig { epochs: 0, ..PriorConfig::default() };
    let a = DiffusionPrior::fit(&data.x, &c, 3).unwrap();
    let b = DiffusionPrior::fit(&data.x, &PriorConfig { epochs: 1, ..c.clone() }, 3).unwrap();
    let fresh = DiffusionPrior::new(c.schedule().unwrap(), a.norm.clone(), &c.hidden, &mut Rng::new(3).split("init"));
    assert_eq!(a.eps_net, fresh.eps_net);
    assert_ne!(b.eps_net, fresh.eps_net);
}

#[test]
fn trained_prior_reproduces_the_seen_distribution() {
    // Trained on a full seen split as in the pipeline; the held-out rows are
    // an independent seen split.
    let train = seen(1);
    let held = seen(2);
    let prior = DiffusionPrior::fit(&train.x, &PriorConfig::default(), 4).unwrap();
    let curve = prior.curve.as_ref().unwrap();
    // A predictor that always says zero scores E|eps|^2 = d.
    assert!(curve.last() < 3.0, "final loss {}", curve.last());

    let samples = prior.sample_unconditional(held.len(), 5).unwrap();
    assert_eq!(prior.sample_unconditional(held.len(), 5).unwrap(), samples);
    let h = median_heuristic(&stack_rows(&[&samples, &held.x]).unwrap()).unwrap();
    let d = mmd(&samples, &held.x, h).unwrap();
    assert!(d < 0.02, "mmd {d}");

    let norm = &prior.norm;
    let (s, x) = (norm.normalize(&samples), norm.normalize(&held.x));
    for c in 0..3 {
        let mean = |t: &Tensor| t.column(c).iter().sum::<f64>() / t.rows() as f64;
        assert!((mean(&s) - mean(&x)).abs() < 0.05, "column {c}");
    }
    let g = GeneratorConfig::default();
    let (fs, fx) = (g.novel_fraction(&samples).unwrap(), g.novel_fraction(&held.x).unwrap());
    assert!(fs < fx + 0.03, "novel fraction {fs} vs seen {fx}");
}
