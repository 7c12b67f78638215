use pdmp_impulse::model::{benchmark_model, CostModel};
use pdmp_impulse::quantizer::{
    load_chain, project, save_chain, train_clvq, validation_distortion, ChainSampler, StartSpec, TrainOptions,
};

fn opts(n: u64, seed: u64) -> TrainOptions {
    TrainOptions { n_train: n, n_est: n, n_pilot: 5_000, seed, ..TrainOptions::default() }
}

#[test]
fn benchmark_grid_file_has_six_layers_and_is_reproducible() {
    let (m, _) = benchmark_model();
    let sampler = ChainSampler::new(&m, StartSpec::Fixed(vec![0.0]));
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.grid"), dir.path().join("b.grid"));
    let chain = train_clvq(&sampler, &[1, 50, 50, 50, 50, 50], &opts(50_000, 11)).unwrap();
    save_chain(&chain, &a).unwrap();
    save_chain(&train_clvq(&sampler, &[1, 50, 50, 50, 50, 50], &opts(50_000, 11)).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let back = load_chain(&a).unwrap();
    assert_eq!(back.layers.len(), 6);
    back.check().unwrap();
    let other = train_clvq(&sampler, &[1, 50, 50], &opts(50_000, 12)).unwrap();
    assert_ne!(other.layers[1], chain.layers[1]);
}

#[test]
fn larger_grids_have_smaller_distortion() {
    let (m, _) = benchmark_model();
    let sampler = ChainSampler::new(&m, StartSpec::Fixed(vec![0.0]));
    let small = train_clvq(&sampler, &[1, 50, 50, 50], &opts(200_000, 13)).unwrap();
    let large = train_clvq(&sampler, &[1, 500, 500, 500], &opts(200_000, 13)).unwrap();
    for n in 1..4 {
        assert!(large.distortion_z[n] < small.distortion_z[n], "layer {n}");
        assert!(large.distortion_s[n] < small.distortion_s[n], "layer {n}");
    }
}

#[test]
fn in_sample_and_fresh_distortions_agree() {
    let (m, _) = benchmark_model();
    let sampler = ChainSampler::new(&m, StartSpec::Fixed(vec![0.0]));
    let chain = train_clvq(&sampler, &[1, 40, 40], &opts(100_000, 14)).unwrap();
    let fresh = validation_distortion(&sampler, &chain, 20_000, 99);
    let norm = |v: &[f64]| (v.iter().sum::<f64>() / v.len() as f64).sqrt();
    for n in 1..3 {
        let (z, s) = (norm(&fresh[n].0), norm(&fresh[n].1));
        assert!((z - chain.distortion_z[n]).abs() < 0.1 * chain.distortion_z[n], "layer {n}: {z}");
        assert!((s - chain.distortion_s[n]).abs() < 0.1 * chain.distortion_s[n], "layer {n}: {s}");
    }
}

#[test]
fn cells_are_fixed_points_of_projection() {
    let (m, c) = benchmark_model();
    let sampler = ChainSampler::new(&m, StartSpec::UniformOverControls(c.control_set().to_vec()));
    let chain = train_clvq(&sampler, &[0, 60, 60], &opts(50_000, 15)).unwrap();
    for layer in &chain.layers {
        for j in 0..layer.len() {
            assert_eq!(project(layer.point_z(j), layer.s[j], layer, chain.p).unwrap(), j);
        }
    }
}
