//! Graph-transformer surrogate for QFI prediction: a dense-tensor tape with
//! reverse-mode differentiation, the model, a deterministic trainer, and
//! ranking metrics.

pub mod metrics;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use metrics::{average_ranks, spearman};
pub use model::{BnBuffers, Mode, ModelConfig, Param, SurrogateModel};
pub use tape::{Csr, Tape};
pub use tensor::Matrix;
pub use train::{train, EpochStats, TrainConfig};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ToolboxConfig;
    use crate::graph::{encode_setup, SetupGraph};
    use crate::optics::OpticalSetup;

    fn figure_graph() -> SetupGraph {
        let setup =
            OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d) -> R(b) -> PBS(b,c) -> R(c)").unwrap();
        encode_setup(&setup, &ToolboxConfig::new(4)).unwrap()
    }

    fn tiny_model(seed: u64) -> SurrogateModel<f64> {
        let config = ModelConfig {
            latent: 16,
            layers: 2,
            heads: 2,
            feature_dim: 20,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            label_scale: 16.0,
        };
        SurrogateModel::new(config, seed).unwrap()
    }

    fn permute_graph(graph: &SetupGraph, perm: &[usize]) -> SetupGraph {
        let n = graph.n_nodes;
        let d = graph.feature_dim();
        let mut features = vec![0u8; n * d];
        let mut adjacency = vec![0u8; n * n];
        for i in 0..n {
            for c in 0..d {
                features[perm[i] * d + c] = graph.features[i * d + c];
            }
            for j in 0..n {
                adjacency[perm[i] * n + perm[j]] = graph.adjacency[i * n + j];
            }
        }
        SetupGraph { n_nodes: n, d1: graph.d1, d2: graph.d2, features, adjacency }
    }

    #[test]
    fn prediction_is_permutation_invariant() {
        let graph = figure_graph();
        let model = tiny_model(3);
        let (base, _) = model.forward(&graph, Mode::Eval).unwrap();
        let perm = vec![6, 0, 3, 1, 5, 2, 4];
        let permuted = permute_graph(&graph, &perm);
        let (shuffled, _) = model.forward(&permuted, Mode::Eval).unwrap();
        assert!((base - shuffled).abs() < 1e-9, "{base} vs {shuffled}");
    }

    #[test]
    fn minimal_graph_evaluates_finite() {
        let setup = OpticalSetup::parse("DCBell(a,b)").unwrap();
        let graph = encode_setup(
            &setup,
            &ToolboxConfig::new(2).with_lengths(0, 15),
        )
        .unwrap();
        let config = ModelConfig {
            latent: 16,
            layers: 2,
            heads: 2,
            feature_dim: graph.feature_dim(),
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            label_scale: 4.0,
        };
        let model = SurrogateModel::<f64>::new(config, 0).unwrap();
        let (pred, latent) = model.forward(&graph, Mode::Eval).unwrap();
        assert!(pred.is_finite());
        assert_eq!(latent.len(), 16);
        assert!(latent.iter().all(|z| z.is_finite()));
    }

    #[test]
    fn zero_readout_weight_predicts_bias() {
        let graph = figure_graph();
        let mut model = tiny_model(4);
        for v in model.param_by_name_mut("readout.w").unwrap().data.iter_mut() {
            *v = 0.0;
        }
        model.param_by_name_mut("readout.b").unwrap().data[0] = 0.37;
        let (pred, _) = model.forward(&graph, Mode::Eval).unwrap();
        assert!((pred - 0.37).abs() < 1e-12);
        let other = encode_setup(
            &OpticalSetup::parse("DC00(a,b) -> DC11(c,d) -> BS(a,c)").unwrap(),
            &ToolboxConfig::new(4),
        )
        .unwrap();
        let (pred2, _) = model.forward(&other, Mode::Eval).unwrap();
        assert!((pred2 - 0.37).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_give_zero_loss_and_grads_when_frozen() {
        let graph = figure_graph();
        let model = tiny_model(5);
        let (pred, _) = model.forward(&graph, Mode::Eval).unwrap();
        let batch = vec![(&graph, pred)];
        let (mse, grads, _) = model.loss_and_grads_mode(&batch, Mode::Eval).unwrap();
        assert!(mse.abs() < 1e-18);
        for (g, p) in grads.iter().zip(model.params()) {
            for v in &g.data {
                assert!(v.abs() <= 1e-9, "{}: {v}", p.name);
            }
        }
    }

    #[test]
    fn duplicated_batch_entries_do_not_change_gradients() {
        let g1 = figure_graph();
        let g2 = encode_setup(
            &OpticalSetup::parse("DC00(a,b) -> DC11(c,d) -> HWP(a,0.25pi)").unwrap(),
            &ToolboxConfig::new(4),
        )
        .unwrap();
        let model = tiny_model(6);
        let single: Vec<(&SetupGraph, f64)> = vec![(&g1, 0.5), (&g2, 0.25)];
        let doubled: Vec<(&SetupGraph, f64)> =
            vec![(&g1, 0.5), (&g2, 0.25), (&g1, 0.5), (&g2, 0.25)];
        let (mse_a, grads_a, _) = model.loss_and_grads_mode(&single, Mode::Train).unwrap();
        let (mse_b, grads_b, _) = model.loss_and_grads_mode(&doubled, Mode::Train).unwrap();
        assert!((mse_a - mse_b).abs() < 1e-12);
        for ((ga, gb), p) in grads_a.iter().zip(&grads_b).zip(model.params()) {
            for (x, y) in ga.data.iter().zip(&gb.data) {
                assert!((x - y).abs() < 1e-9, "{}", p.name);
            }
        }
    }

    #[test]
    fn finite_difference_gradient_check() {
        // 3-graph batch, central differences at selected parameters from
        // every group, step 1e-4, relative error <= 1e-4
        use rand::{Rng, SeedableRng};
        let g1 = figure_graph();
        let g2 = encode_setup(
            &OpticalSetup::parse("DC00(a,b) -> DC11(c,d) -> BS(a,c) -> HWP(b,0.75pi)").unwrap(),
            &ToolboxConfig::new(4),
        )
        .unwrap();
        let g3 = encode_setup(
            &OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d) -> QWP(d,0.5pi) -> PBS(a,d)").unwrap(),
            &ToolboxConfig::new(4),
        )
        .unwrap();
        let batch: Vec<(&SetupGraph, f64)> = vec![(&g1, 0.9), (&g2, 0.1), (&g3, 0.4)];
        let mut model = tiny_model(8);
        let (_, grads) = model.loss_and_grads(&batch).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let step = 1e-4;
        let n_params = model.params().len();
        for _ in 0..20 {
            let pi = rng.random_range(0..n_params);
            let len = model.params()[pi].value.data.len();
            let ei = rng.random_range(0..len);
            let original = model.params()[pi].value.data[ei];
            model.params_mut()[pi].value.data[ei] = original + step;
            let (plus, _, _) = model.loss_and_grads_mode(&batch, Mode::Train).unwrap();
            model.params_mut()[pi].value.data[ei] = original - step;
            let (minus, _, _) = model.loss_and_grads_mode(&batch, Mode::Train).unwrap();
            model.params_mut()[pi].value.data[ei] = original;
            let fd = (plus - minus) / (2.0 * step);
            let analytic = grads[pi].data[ei];
            let scale = fd.abs().max(analytic.abs()).max(1e-6);
            assert!(
                (fd - analytic).abs() / scale <= 1e-4,
                "param {} entry {ei}: fd {fd} vs {analytic}",
                model.params()[pi].name
            );
        }
    }

    #[test]
    fn save_load_round_trips_bit_exactly() {
        let graph = figure_graph();
        let model = tiny_model(9);
        let (before, latent_before) = model.forward(&graph, Mode::Eval).unwrap();
        let mut buffer = Vec::new();
        model.save(&mut buffer).unwrap();
        let loaded = SurrogateModel::<f64>::load(std::io::Cursor::new(&buffer)).unwrap();
        let (after, latent_after) = loaded.forward(&graph, Mode::Eval).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
        for (x, y) in latent_before.iter().zip(&latent_after) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(loaded.config, model.config);
    }

    #[test]
    fn corrupt_model_file_rejected() {
        let model = tiny_model(10);
        let mut buffer = Vec::new();
        model.save(&mut buffer).unwrap();
        buffer[0] = b'X';
        assert!(SurrogateModel::<f64>::load(std::io::Cursor::new(&buffer)).is_err());
    }

    #[test]
    fn batched_and_single_eval_agree() {
        let g1 = figure_graph();
        let g2 = encode_setup(
            &OpticalSetup::parse("DC00(a,b) -> DC11(c,d) -> BS(a,c)").unwrap(),
            &ToolboxConfig::new(4),
        )
        .unwrap();
        let model = tiny_model(11);
        let batched = model.predict_qfi_batch(&[&g1, &g2]).unwrap();
        let single1 = model.predict_qfi(&g1).unwrap();
        let single2 = model.predict_qfi(&g2).unwrap();
        assert!((batched[0] - single1).abs() < 1e-12);
        assert!((batched[1] - single2).abs() < 1e-12);
    }
}
