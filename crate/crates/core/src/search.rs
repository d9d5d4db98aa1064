//! Candidate ranking, oracle validation, and QFI-preserving pruning.

use std::io::Write;

use rand::Rng;

use crate::dataset::{canonical_key, label_setup, ToolboxConfig};
use crate::error::{Error, Result};
use crate::graph::encode_setup;
use crate::optics::OpticalSetup;
use crate::scalar::Real;
use crate::sensing::pauli::Hamiltonian;
use crate::surrogate::SurrogateModel;

/// One ranked candidate. `oracle_qfi` is filled by [`validate`].
#[derive(Clone, Debug)]
pub struct RankedEntry {
    pub id: u64,
    pub setup: OpticalSetup,
    pub predicted_qfi: f64,
    pub oracle_qfi: Option<f64>,
}

/// Top-K candidates sorted by descending prediction, ties broken by
/// ascending id.
#[derive(Clone, Debug)]
pub struct RankedCandidates {
    pub entries: Vec<RankedEntry>,
    pub k: usize,
    /// Number of pool entries sharing a canonical key with an earlier one.
    /// Ranking is over the raw pool; duplicates are only reported.
    pub duplicate_count: usize,
}

/// Evaluate the surrogate on every setup (eval mode, deterministic) and
/// keep the top K predictions.
pub fn rank_candidates<R: Real>(
    model: &SurrogateModel<R>,
    setups: &[(u64, OpticalSetup)],
    toolbox: &ToolboxConfig,
    k: usize,
) -> Result<RankedCandidates> {
    if k > setups.len() {
        return Err(Error::Shape(format!("k {} exceeds pool size {}", k, setups.len())));
    }
    let graphs = setups
        .iter()
        .map(|(_, s)| encode_setup(s, toolbox))
        .collect::<Result<Vec<_>>>()?;
    let graph_refs: Vec<&crate::graph::SetupGraph> = graphs.iter().collect();
    let predictions = model.predict_qfi_batch(&graph_refs)?;
    let mut scored: Vec<(u64, &OpticalSetup, f64)> = setups
        .iter()
        .zip(&predictions)
        .map(|((id, setup), p)| (*id, setup, p.to_f64_lossy()))
        .collect();
    scored.sort_by(|a, b| {
        b.2.partial_cmp(&a.2).expect("finite predictions").then(a.0.cmp(&b.0))
    });
    let mut seen = std::collections::HashSet::new();
    let duplicate_count =
        setups.iter().filter(|(_, s)| !seen.insert(canonical_key(s))).count();
    Ok(RankedCandidates {
        entries: scored
            .into_iter()
            .take(k)
            .map(|(id, setup, predicted_qfi)| RankedEntry {
                id,
                setup: setup.clone(),
                predicted_qfi,
                oracle_qfi: None,
            })
            .collect(),
        k,
        duplicate_count,
    })
}

/// Attach exact oracle labels to every entry. Invalid setups record an
/// oracle QFI of zero; nothing is dropped. Idempotent.
pub fn validate(candidates: &mut RankedCandidates, h: &Hamiltonian) -> Result<()> {
    for entry in &mut candidates.entries {
        let labeled = label_setup(entry.id, &entry.setup, h)?;
        entry.oracle_qfi = Some(labeled.qfi);
    }
    Ok(())
}

/// Regret against a fully labeled pool: the best label in the pool minus
/// the best validated label among the candidates.
pub fn regret(candidates: &RankedCandidates, pool_labels: &[f64]) -> Option<f64> {
    let best_pool = pool_labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_validated = candidates
        .entries
        .iter()
        .filter_map(|e| e.oracle_qfi)
        .fold(f64::NEG_INFINITY, f64::max);
    if best_pool.is_finite() && best_validated.is_finite() {
        Some(best_pool - best_validated)
    } else {
        None
    }
}

/// Remove one sequence device if doing so leaves the oracle QFI unchanged
/// (within 1e-9). Returns the shortened setup, or `None` if the removal
/// changes the QFI.
pub fn try_remove(setup: &OpticalSetup, index: usize, h: &Hamiltonian) -> Result<Option<OpticalSetup>> {
    let baseline = label_setup(0, setup, h)?.qfi;
    let mut shorter = setup.clone();
    shorter.sequence.remove(index);
    let candidate_qfi = label_setup(0, &shorter, h)?.qfi;
    if (candidate_qfi - baseline).abs() <= 1e-9 {
        Ok(Some(shorter))
    } else {
        Ok(None)
    }
}

/// Randomly attempt device removals, keeping each one only when the oracle
/// QFI is exactly preserved. The result never has a different QFI and
/// never grows.
pub fn prune_setup(
    setup: &OpticalSetup,
    h: &Hamiltonian,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<OpticalSetup> {
    let mut current = setup.clone();
    for _ in 0..trials {
        if current.sequence.is_empty() {
            break;
        }
        let index = rng.random_range(0..current.sequence.len());
        if let Some(shorter) = try_remove(&current, index, h)? {
            current = shorter;
        }
    }
    Ok(current)
}

/// Default pruning budget: three passes over the sequence.
pub fn default_prune_trials(setup: &OpticalSetup) -> usize {
    3 * setup.sequence.len().max(1)
}

/// Ranked-output CSV: `(rank, id, predicted, oracle, setup text)`.
pub fn write_ranked_csv(candidates: &RankedCandidates, mut out: impl Write) -> Result<()> {
    writeln!(out, "rank,id,predicted_qfi,oracle_qfi,setup")?;
    for (rank, entry) in candidates.entries.iter().enumerate() {
        let oracle = entry.oracle_qfi.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},\"{}\"",
            rank + 1,
            entry.id,
            entry.predicted_qfi,
            oracle,
            entry.setup.text()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sample_setup;
    use crate::golden;
    use crate::sensing::pauli::HamiltonianKind;
    use crate::surrogate::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool(count: usize, seed: u64) -> (Vec<(u64, OpticalSetup)>, ToolboxConfig) {
        let config = ToolboxConfig::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let setups = (0..count).map(|i| (i as u64, sample_setup(&config, &mut rng))).collect();
        (setups, config)
    }

    fn model(seed: u64) -> SurrogateModel<f64> {
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

    #[test]
    fn k_one_returns_argmax() {
        let (setups, toolbox) = pool(40, 1);
        let model = model(2);
        let ranked = rank_candidates(&model, &setups, &toolbox, 1).unwrap();
        assert_eq!(ranked.entries.len(), 1);
        let graphs: Vec<_> = setups
            .iter()
            .map(|(_, s)| encode_setup(s, &toolbox).unwrap())
            .collect();
        let refs: Vec<_> = graphs.iter().collect();
        let preds = model.predict_qfi_batch(&refs).unwrap();
        let best = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((ranked.entries[0].predicted_qfi - best).abs() < 1e-12);
    }

    #[test]
    fn constant_model_tie_breaks_by_id() {
        let (setups, toolbox) = pool(20, 3);
        let mut m = model(4);
        for v in m.param_by_name_mut("readout.w").unwrap().data.iter_mut() {
            *v = 0.0;
        }
        let ranked = rank_candidates(&m, &setups, &toolbox, 5).unwrap();
        let ids: Vec<u64> = ranked.entries.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn ranking_is_invariant_under_increasing_transforms() {
        let (setups, toolbox) = pool(30, 5);
        let m = model(6);
        let ranked = rank_candidates(&m, &setups, &toolbox, 10).unwrap();
        // a strictly increasing transform of the scores cannot reorder them
        let graphs: Vec<_> = setups
            .iter()
            .map(|(_, s)| encode_setup(s, &toolbox).unwrap())
            .collect();
        let refs: Vec<_> = graphs.iter().collect();
        let preds = m.predict_qfi_batch(&refs).unwrap();
        let mut transformed: Vec<(u64, f64)> = setups
            .iter()
            .zip(&preds)
            .map(|((id, _), p)| (*id, (p * 0.25).tanh() * 3.0 + 7.0))
            .collect();
        transformed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (entry, (id, _)) in ranked.entries.iter().zip(&transformed) {
            assert_eq!(entry.id, *id);
        }
    }

    #[test]
    fn validate_fills_oracle_and_is_idempotent() {
        let h = HamiltonianKind::SumZ.build(8);
        let golden_setup = OpticalSetup::parse(
            &golden::candidates()[0].setup_text.replace(" \n", " "),
        )
        .unwrap();
        let invalid = OpticalSetup::parse(
            "DC00(a,b) -> DC00(c,d) -> DC00(e,f) -> DC00(g,h) -> BS(a,b)",
        )
        .unwrap();
        let mut candidates = RankedCandidates {
            entries: vec![
                RankedEntry { id: 0, setup: golden_setup, predicted_qfi: 60.0, oracle_qfi: None },
                RankedEntry { id: 1, setup: invalid, predicted_qfi: 50.0, oracle_qfi: None },
            ],
            k: 2,
            duplicate_count: 0,
        };
        validate(&mut candidates, &h).unwrap();
        assert!((candidates.entries[0].oracle_qfi.unwrap() - 64.0).abs() < 1e-9);
        assert_eq!(candidates.entries[1].oracle_qfi.unwrap(), 0.0);
        let snapshot: Vec<Option<f64>> =
            candidates.entries.iter().map(|e| e.oracle_qfi).collect();
        validate(&mut candidates, &h).unwrap();
        let again: Vec<Option<f64>> = candidates.entries.iter().map(|e| e.oracle_qfi).collect();
        assert_eq!(snapshot, again);
        // regret over a fully labeled pool is non-negative here
        let r = regret(&candidates, &[64.0, 0.0, 16.0]).unwrap();
        assert!(r >= 0.0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn removable_mirror_is_pruned_essential_pbs_is_kept() {
        let h = HamiltonianKind::SumZ.build(4);
        let setup = golden::ghz4_setup();
        // removing R(b) (index 0) keeps the state GHZ up to phase
        let removed = try_remove(&setup, 0, &h).unwrap();
        assert!(removed.is_some());
        let shorter = removed.unwrap();
        assert_eq!(shorter.sequence.len(), 2);
        // removing PBS(b,c) (index 1 in the original) collapses to Bell pairs
        let kept = try_remove(&setup, 1, &h).unwrap();
        assert!(kept.is_none());
    }

    #[test]
    fn pruning_preserves_qfi_and_never_grows() {
        let h = HamiltonianKind::SumZ.build(4);
        let toolbox = ToolboxConfig::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut checked = 0;
        while checked < 30 {
            let setup = sample_setup(&toolbox, &mut rng);
            let before = label_setup(0, &setup, &h).unwrap();
            if !before.valid {
                continue;
            }
            checked += 1;
            let trials = default_prune_trials(&setup);
            let pruned = prune_setup(&setup, &h, trials, &mut rng).unwrap();
            let after = label_setup(0, &pruned, &h).unwrap();
            assert!((before.qfi - after.qfi).abs() <= 1e-9);
            assert!(pruned.sequence.len() <= setup.sequence.len());
        }
    }

    #[test]
    fn single_device_setup_survives_pruning() {
        let h = HamiltonianKind::SumZ.build(4);
        let setup = OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d) -> R(a)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pruned = prune_setup(&setup, &h, 5, &mut rng).unwrap();
        // R only shifts a global phase, so it is removable; the sources stay
        assert!(pruned.sequence.len() <= 1);
        assert_eq!(pruned.sources.len(), 2);
    }

    #[test]
    fn ranked_csv_has_header_and_rows() {
        let (setups, toolbox) = pool(10, 8);
        let m = model(9);
        let ranked = rank_candidates(&m, &setups, &toolbox, 3).unwrap();
        let mut buffer = Vec::new();
        write_ranked_csv(&ranked, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("rank,id,predicted_qfi,oracle_qfi,setup"));
    }
}
