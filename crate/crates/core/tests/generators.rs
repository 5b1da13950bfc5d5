use evlstream::datagen::{DriftKind, DriftSpec};
use evlstream::engine::RunConfig;
use evlstream::{run_stream, EvolverKind, Mode};

#[test]
fn presets_produce_balanced_interleaved_streams() {
    for kind in [DriftKind::Translate, DriftKind::Rotate, DriftKind::RandomWalk] {
        let spec = DriftSpec::preset(kind).with_seed(1);
        let data = spec.generate().unwrap();
        assert_eq!(data.len(), spec.samples);
        for (t, item) in data.iter().enumerate() {
            assert_eq!(item.label.as_str(), (t % spec.classes).to_string());
            assert_eq!(item.point.dim(), spec.dimension);
        }
    }
}

#[test]
fn same_seed_same_stream() {
    for kind in [DriftKind::Translate, DriftKind::Rotate, DriftKind::RandomWalk] {
        let a = DriftSpec::preset(kind).with_seed(5).generate().unwrap();
        let b = DriftSpec::preset(kind).with_seed(5).generate().unwrap();
        let c = DriftSpec::preset(kind).with_seed(6).generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

#[test]
fn translating_class_mean_follows_diagonal() {
    let spec = DriftSpec::translating().with_seed(2);
    let data = spec.generate().unwrap();
    let d = spec.dimension as f64;
    for k in [1000usize, 4000, 16_000] {
        let ones: Vec<(usize, &[f64])> = data[..k]
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label.as_str() == "1")
            .map(|(t, s)| (t, s.point.coords()))
            .collect();
        let n = ones.len() as f64;
        let tol = 3.0 * spec.noise_sigma / (k as f64 / 2.0).sqrt();
        for dim in 0..spec.dimension {
            let got = ones.iter().map(|(_, c)| c[dim]).sum::<f64>() / n;
            let want = ones
                .iter()
                .map(|(t, _)| spec.drift_rate * *t as f64 / d.sqrt() + if dim == 0 { spec.class_separation } else { 0.0 })
                .sum::<f64>()
                / n;
            assert!((got - want).abs() <= tol, "k={k} dim={dim}: {got} vs {want} (tol {tol})");
        }
        let zero: Vec<f64> = data[..k].iter().filter(|s| s.label.as_str() == "0").map(|s| s.point.coords()[0]).collect();
        let m0 = zero.iter().sum::<f64>() / zero.len() as f64;
        assert!(m0.abs() <= tol, "stationary class drifted: {m0}");
    }
}

#[test]
fn random_walk_spread_grows_like_sqrt_k() {
    // no noise and no reflection: class-0 points are the walk itself
    let mut spec = DriftSpec::random_walk();
    spec.noise_sigma = 1e-12;
    spec.class_separation = 1e6;
    spec.drift_rate = 0.05;
    spec.samples = 802;
    let d = spec.dimension as f64;
    for k in [100usize, 400] {
        let mut msd = 0.0;
        let seeds = 300;
        for seed in 0..seeds {
            let data = spec.clone().with_seed(seed).generate().unwrap();
            let (a, b) = (data[0].point.coords(), data[2 * k].point.coords());
            msd += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
        msd /= seeds as f64;
        // 2k samples apart means 2k steps of the class mean
        let want = 2.0 * k as f64 * spec.drift_rate * spec.drift_rate * d;
        assert!((msd / want - 1.0).abs() < 0.2, "k={k}: {msd} vs {want}");
    }
}

#[test]
fn no_drift_means_static_model_is_enough() {
    let mut spec = DriftSpec::translating().with_seed(4);
    spec.drift_rate = 0.0;
    spec.samples = 4000;
    let data = spec.generate().unwrap();
    let (training, rest) = data.split_at(250);
    let cfg = RunConfig {
        evolver: evlstream::EvolverConfig::new(EvolverKind::Static),
        mode: Mode::Abstain,
        ..Default::default()
    };
    let r = run_stream(training, rest, &cfg).unwrap();
    assert!(r.mean_f1 > 0.95, "{}", r.mean_f1);
}

#[test]
fn rotation_returns_to_start_after_one_turn() {
    let spec = DriftSpec::rotating();
    let turn = 2.0 * std::f64::consts::PI / spec.drift_rate;
    for class in 0..spec.classes {
        let a = evlstream::datagen::rotating_mean(&spec, class, 0.0);
        let b = evlstream::datagen::rotating_mean(&spec, class, turn);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
    assert!((turn - spec.samples as f64).abs() < 1e-6);
}
