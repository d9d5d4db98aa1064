//! The numeric core is generic over the scalar; exercise the f32 lane end
//! to end (simulation, sensing, training) alongside the f64 default.

use dqs_core::dataset::{label_all, sample_setup, ToolboxConfig};
use dqs_core::graph::encode_setup;
use dqs_core::optics::{postselect, run_setup};
use dqs_core::sensing::{
    qfi_pure, run_sensing, HamiltonianKind, ObservableKind, PauliChannel, Shots,
};
use dqs_core::surrogate::{train, ModelConfig, SurrogateModel, TrainConfig};
use rand_chacha::rand_core::SeedableRng;

#[test]
fn f32_simulation_matches_f64_to_single_precision() {
    let setup = dqs_core::golden::ghz4_setup();
    let probe32 = postselect(&run_setup::<f32>(&setup).unwrap());
    let probe64 = postselect(&run_setup::<f64>(&setup).unwrap());
    let h = HamiltonianKind::SumZ.build(4);
    let q32 = qfi_pure(&probe32, &h).unwrap();
    let q64 = qfi_pure(&probe64, &h).unwrap();
    assert!((q32 as f64 - q64).abs() < 1e-4, "{q32} vs {q64}");
    assert!((probe32.success_prob() - 0.5).abs() < 1e-6);
}

#[test]
fn f32_sensing_run_is_close_to_f64() {
    let probe = dqs_core::optics::QubitState::<f32>::ghz(4, 0.3);
    let channel = PauliChannel::new(
        probe,
        HamiltonianKind::SumZ.build(4),
        ObservableKind::ProdX.build(4),
    );
    let report = run_sensing(&channel, 4, 4, Shots::Infinite, 0).unwrap();
    // the numerator 1 - R^2 cancels catastrophically near the response
    // extremes, so single precision only supports a coarse tolerance here
    let min = report.min_sensitivity.unwrap();
    assert!((min - 1.0 / 16.0).abs() < 5e-3, "{min}");
}

#[test]
fn f32_training_runs_and_stays_finite() {
    let toolbox = ToolboxConfig::new(4);
    let h = HamiltonianKind::SumZ.build(4);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let setups: Vec<_> = (0..24).map(|_| sample_setup(&toolbox, &mut rng)).collect();
    let labeled = label_all(&setups, &h, "sumZ", 1).unwrap();
    let data: Vec<_> = labeled
        .iter()
        .map(|l| (encode_setup(&l.setup, &toolbox).unwrap(), l.qfi))
        .collect();
    let config = ModelConfig {
        latent: 16,
        layers: 2,
        heads: 2,
        feature_dim: data[0].0.feature_dim(),
        bn_momentum: 0.1,
        bn_eps: 1e-5,
        label_scale: 16.0,
    };
    let mut model = SurrogateModel::<f32>::new(config, 3).unwrap();
    let cfg = TrainConfig { epochs: 3, val_fraction: 0.0, ..TrainConfig::desk(3) };
    let history = train(&mut model, &data, &cfg).unwrap();
    assert!(history.iter().all(|s| s.train_mse.is_finite()));
    // saving upcasts to f64 on disk; the f32 values round-trip exactly
    let mut buffer = Vec::new();
    model.save(&mut buffer).unwrap();
    let loaded = SurrogateModel::<f32>::load(std::io::Cursor::new(&buffer)).unwrap();
    for (a, b) in model.params().iter().zip(loaded.params()) {
        assert_eq!(a.value.data, b.value.data, "{}", a.name);
    }
}
