//! Ranking and stability metrics, and the v1-v6 version ladder presets.
//!
//! AUC uses the rank statistic with average-rank tie handling, which equals
//! the brute-force mean over all positive-negative score pairs with ties
//! counted as one half. KS is the maximum gap between the cumulative score
//! distributions of the two classes. Decile edges come from train-score
//! quantiles and feed a population stability index with floored shares.

use crate::model::Mode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PSI_SHARE_FLOOR: f64 = 1e-4;
pub const DECILE_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("need at least one positive and one negative label")]
    DegenerateLabels,
    #[error("need at least {needed} scores, got {got}")]
    TooFewScores { needed: usize, got: usize },
}

/// Rank-statistic AUC with average-rank tie handling.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j]
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }

    let p = n_pos as f64;
    let n = n_neg as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Brute-force AUC over all positive-negative pairs (ties count one half).
/// Quadratic; test oracle for [`auc`].
pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| !y)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricsError::DegenerateLabels);
    }
    let mut total = 0.0;
    for &p in &pos {
        for &n in &neg {
            total += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(total / (pos.len() as f64 * neg.len() as f64))
}

/// Kolmogorov-Smirnov statistic: max over thresholds of |TPR - FPR|.
pub fn ks(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut best: f64 = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let gap = (tp as f64 / n_pos as f64 - fp as f64 / n_neg as f64).abs();
        best = best.max(gap);
    }
    Ok(best)
}

/// Empirical quantile with linear interpolation on the sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let lo = position.floor() as usize;
    let hi = position.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = position - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

fn decile_shares(scores: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; DECILE_COUNT];
    for &s in scores {
        // bin i covers (edge[i-1], edge[i]], open-ended at both extremes
        let bin = edges.iter().position(|&e| s <= e).unwrap_or(edges.len());
        counts[bin] += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / scores.len() as f64)
        .collect()
}

/// PSI between two share vectors over the same bins, with shares floored at
/// `PSI_SHARE_FLOOR` and renormalized.
pub fn psi_from_shares(actual: &[f64], expected: &[f64]) -> f64 {
    let floor_norm = |shares: &[f64]| -> Vec<f64> {
        let floored: Vec<f64> = shares.iter().map(|&s| s.max(PSI_SHARE_FLOOR)).collect();
        let total: f64 = floored.iter().sum();
        floored.into_iter().map(|s| s / total).collect()
    };
    let a = floor_norm(actual);
    let e = floor_norm(expected);
    a.iter()
        .zip(e.iter())
        .map(|(&ai, &ei)| (ai - ei) * (ai / ei).ln())
        .sum()
}

/// Baseline decile edges from train scores (quantiles 0.1..0.9) and the PSI
/// of the evaluation scores against the train shares over those bins.
pub fn deciles_and_psi(
    train_scores: &[f64],
    eval_scores: &[f64],
) -> Result<(Vec<f64>, f64), MetricsError> {
    if train_scores.len() < DECILE_COUNT {
        return Err(MetricsError::TooFewScores {
            needed: DECILE_COUNT,
            got: train_scores.len(),
        });
    }
    let mut sorted = train_scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let edges: Vec<f64> = (1..DECILE_COUNT)
        .map(|k| quantile(&sorted, k as f64 / DECILE_COUNT as f64))
        .collect();
    let train_shares = decile_shares(train_scores, &edges);
    let eval_shares = decile_shares(eval_scores, &edges);
    Ok((edges, psi_from_shares(&eval_shares, &train_shares)))
}

/// Metrics of one scored split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub ks: f64,
    pub n: usize,
    pub event_rate: f64,
    pub excluded_unlabeled: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decile_edges: Option<Vec<f64>>,
}

/// Compute the report for one split; PSI against train deciles is attached
/// when train scores are supplied.
pub fn report(
    scores: &[f64],
    labels: &[bool],
    excluded_unlabeled: usize,
    train_scores: Option<&[f64]>,
) -> Result<MetricsReport, MetricsError> {
    let auc_value = auc(scores, labels)?;
    let ks_value = ks(scores, labels)?;
    let (edges, psi) = match train_scores {
        Some(train) => {
            let (e, p) = deciles_and_psi(train, scores)?;
            (Some(e), Some(p))
        }
        None => (None, None),
    };
    Ok(MetricsReport {
        auc: auc_value,
        ks: ks_value,
        n: scores.len(),
        event_rate: labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64,
        excluded_unlabeled,
        psi,
        decile_edges: edges,
    })
}

/// One rung of the version ladder: which pipeline features are on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionPreset {
    pub id: String,
    pub mode: Mode,
    pub domain_tokenizer: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oversample: Option<f64>,
    pub temporal: bool,
    pub head: (usize, usize),
    pub sharded: bool,
}

pub const SMALL_HEAD: (usize, usize) = (32, 16);
pub const EXPANDED_HEAD: (usize, usize) = (64, 32);
/// Shard count emulating incremental bucket training in sharded presets.
pub const TRAIN_SHARDS: usize = 4;

pub fn preset(id: &str) -> Option<VersionPreset> {
    let p = match id {
        "v1" => VersionPreset {
            id: "v1".into(),
            mode: Mode::PerSegmentVote,
            domain_tokenizer: false,
            oversample: None,
            temporal: false,
            head: SMALL_HEAD,
            sharded: true,
        },
        "v2" => VersionPreset {
            domain_tokenizer: true,
            id: "v2".into(),
            ..preset("v1").unwrap()
        },
        "v3" => VersionPreset {
            oversample: Some(0.30),
            id: "v3".into(),
            ..preset("v2").unwrap()
        },
        "v4" => VersionPreset {
            id: "v4".into(),
            mode: Mode::PerSegmentVote,
            domain_tokenizer: true,
            oversample: Some(0.10),
            temporal: false,
            head: SMALL_HEAD,
            sharded: false,
        },
        "v5" => VersionPreset {
            id: "v5".into(),
            mode: Mode::Pooled,
            domain_tokenizer: true,
            oversample: None,
            temporal: false,
            head: EXPANDED_HEAD,
            sharded: false,
        },
        "v6" => VersionPreset {
            temporal: true,
            id: "v6".into(),
            ..preset("v5").unwrap()
        },
        _ => return None,
    };
    Some(p)
}

pub const ALL_VERSIONS: [&str; 6] = ["v1", "v2", "v3", "v4", "v5", "v6"];

/// One row of an ablation sweep. A failed version carries its error message
/// and leaves the metrics empty; the sweep continues past it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<VersionPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oot: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_some())
    }

    /// Fixed-width table, one line per version.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8} {:>10} {:>10} {:>10} {:>10}\n",
            "version", "holdout", "oot", "ks", "psi"
        );
        for row in &self.rows {
            match (&row.holdout, &row.oot) {
                (Some(h), Some(o)) => {
                    out.push_str(&format!(
                        "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
                        row.version,
                        h.auc,
                        o.auc,
                        h.ks,
                        h.psi.unwrap_or(f64::NAN)
                    ));
                }
                _ => {
                    out.push_str(&format!(
                        "{:<8} error: {}\n",
                        row.version,
                        row.error.as_deref().unwrap_or("unknown")
                    ));
                }
            }
        }
        out
    }
}

/// Train and evaluate each requested version with a common seed and common
/// partitions. Per-version failures are recorded without aborting the sweep;
/// rows come back in request order.
pub fn run_ablation(
    dataset: &crate::dataset::Dataset,
    versions: &[String],
    seed: u64,
) -> AblationReport {
    let mut rows = Vec::with_capacity(versions.len());
    for version in versions {
        let row = match preset(version) {
            None => AblationRow {
                version: version.clone(),
                preset: None,
                holdout: None,
                oot: None,
                error: Some(format!("unknown version {version:?}")),
            },
            Some(p) => {
                let outcome = crate::dataset::train_version(dataset, &p, seed).and_then(|o| {
                    let holdout =
                        crate::dataset::evaluate(&o.model, dataset, crate::labeling::Partition::Holdout)?;
                    let oot =
                        crate::dataset::evaluate(&o.model, dataset, crate::labeling::Partition::Oot)?;
                    Ok((holdout, oot))
                });
                match outcome {
                    Ok((holdout, oot)) => AblationRow {
                        version: version.clone(),
                        preset: Some(p),
                        holdout: Some(holdout),
                        oot: Some(oot),
                        error: None,
                    },
                    Err(e) => AblationRow {
                        version: version.clone(),
                        preset: Some(p),
                        holdout: None,
                        oot: None,
                        error: Some(e.to_string()),
                    },
                }
            }
        };
        rows.push(row);
    }
    AblationReport { seed, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn auc_example_with_mixed_ranks() {
        // two positive-negative pairs, one concordant and one discordant
        let scores = [0.9, 0.8, 0.3];
        let labels = [true, false, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
        assert_eq!(auc_pairwise(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_perfect_ranking() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn auc_ties_count_half() {
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn auc_degenerate_labels() {
        assert!(matches!(
            auc(&[0.1, 0.2], &[true, true]),
            Err(MetricsError::DegenerateLabels)
        ));
    }

    #[test]
    fn auc_matches_pairwise_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n = rng.gen_range(2..=50);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..20) as f64) / 20.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            // force both classes present
            labels[0] = true;
            labels[n - 1] = false;
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairwise(&scores, &labels).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn auc_and_ks_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.gen_bool(s.clamp(0.05, 0.95))).collect();
        if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
            panic!("degenerate draw");
        }
        let mapped: Vec<f64> = scores.iter().map(|&s| (3.0 * s).exp() + 7.0).collect();
        assert!((auc(&scores, &labels).unwrap() - auc(&mapped, &labels).unwrap()).abs() < 1e-12);
        assert!((ks(&scores, &labels).unwrap() - ks(&mapped, &labels).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ks_perfect_separation() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(ks(&scores, &labels).unwrap(), 1.0);
        assert_eq!(ks(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn ks_near_zero_for_independent_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.5)).collect();
        assert!(ks(&scores, &labels).unwrap() < 0.05);
    }

    #[test]
    fn uniform_scores_give_uniform_decile_edges() {
        let train: Vec<f64> = (0..10_001).map(|i| i as f64 / 10_000.0).collect();
        let (edges, psi) = deciles_and_psi(&train, &train).unwrap();
        for (k, &e) in edges.iter().enumerate() {
            let expected = (k + 1) as f64 / 10.0;
            assert!((e - expected).abs() < 1e-3, "edge {k}: {e}");
        }
        assert_eq!(psi, 0.0);
    }

    #[test]
    fn identical_distributions_have_zero_psi() {
        let train: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (_, psi) = deciles_and_psi(&train, &train).unwrap();
        assert_eq!(psi, 0.0);
    }

    #[test]
    fn all_mass_in_one_decile_matches_closed_form() {
        let train: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let eval = vec![0.95; 500];
        let (edges, psi) = deciles_and_psi(&train, &eval).unwrap();
        // closed-form with the floor rule
        let train_shares = decile_shares(&train, &edges);
        let mut eval_shares = vec![0.0; DECILE_COUNT];
        eval_shares[9] = 1.0;
        let expected = psi_from_shares(&eval_shares, &train_shares);
        assert!((psi - expected).abs() < 1e-12);
        assert!(psi > 1.0, "{psi}");
    }

    #[test]
    fn psi_is_symmetric_in_its_shares() {
        let p = [0.5, 0.2, 0.1, 0.1, 0.05, 0.02, 0.01, 0.01, 0.005, 0.005];
        let q = [0.1; 10];
        let a = psi_from_shares(&p, &q);
        let b = psi_from_shares(&q, &p);
        assert!((a - b).abs() < 1e-12);
        assert!(a >= 0.0);
    }

    #[test]
    fn too_few_train_scores_is_an_error() {
        assert!(matches!(
            deciles_and_psi(&[0.1; 5], &[0.5]),
            Err(MetricsError::TooFewScores { needed: 10, got: 5 })
        ));
    }

    #[test]
    fn ablation_isolates_unknown_versions_and_keeps_order() {
        let customers = crate::synthgen::generate(&crate::synthgen::GeneratorConfig {
            n_customers: 1200,
            seed: 9,
            ..crate::synthgen::GeneratorConfig::default()
        })
        .unwrap()
        .customers;
        let dataset = crate::dataset::Dataset::build(
            &customers,
            &crate::story::RuleTable::standard(),
            crate::labeling::SplitSpec::new(
                chrono::NaiveDate::from_ymd_opt(2018, 2, 1).unwrap(),
                42,
            ),
        )
        .unwrap();
        let versions = vec!["v7".to_string(), "v5".to_string()];
        let report = run_ablation(&dataset, &versions, 3);
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].version, "v7");
        assert!(report.rows[0].error.as_deref().unwrap().contains("unknown"));
        assert_eq!(report.rows[1].version, "v5");
        assert!(report.rows[1].holdout.is_some(), "{:?}", report.rows[1].error);
        assert!(!report.all_failed());
        assert!(report.to_table().contains("v5"));
    }

    #[test]
    fn preset_table_matches_the_ladder() {
        let v1 = preset("v1").unwrap();
        assert_eq!(v1.mode, Mode::PerSegmentVote);
        assert!(!v1.domain_tokenizer && v1.sharded && !v1.temporal);
        let v2 = preset("v2").unwrap();
        assert!(v2.domain_tokenizer && v2.sharded);
        let v3 = preset("v3").unwrap();
        assert_eq!(v3.oversample, Some(0.30));
        let v4 = preset("v4").unwrap();
        assert_eq!(v4.oversample, Some(0.10));
        assert!(!v4.sharded);
        assert_eq!(v4.mode, Mode::PerSegmentVote);
        let v5 = preset("v5").unwrap();
        assert_eq!(v5.mode, Mode::Pooled);
        assert_eq!(v5.head, EXPANDED_HEAD);
        assert_eq!(v5.oversample, None);
        let v6 = preset("v6").unwrap();
        assert!(v6.temporal);
        assert!(preset("v7").is_none());
    }
}
