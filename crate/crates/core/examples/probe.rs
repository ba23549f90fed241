use lnb_core::dataset::{evaluate, train_version, Dataset};
use lnb_core::labeling::{Partition, SplitSpec};
use lnb_core::metrics::preset;
use lnb_core::story::RuleTable;
use lnb_core::synthgen::{generate, oracle_auc, GeneratorConfig, Scenario};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let cfg = GeneratorConfig::default(); // n=20000 seed=42
    let corpus = generate(&cfg).unwrap();
    println!("generate: {:?}", t0.elapsed());

    let oracle = oracle_auc(&corpus.truth).unwrap();
    println!("oracle AUC (all): {oracle:.4}");

    let spec = SplitSpec::new(cfg.cutoff, cfg.seed);
    let dataset = Dataset::build(&corpus.customers, &RuleTable::standard(), spec).unwrap();
    let manifest = dataset.manifest();
    println!("labeled event rate: {:.4}, unlabeled: {}", manifest.labeled_event_rate, manifest.unlabeled_count);
    println!("event rates: {:?}", manifest.event_rates);

    // oracle on holdout only
    let holdout_ids: std::collections::HashSet<&String> = manifest.partitions.holdout.iter().collect();
    let ho: Vec<&lnb_core::synthgen::GroundTruth> = corpus.truth.iter().filter(|t| holdout_ids.contains(&t.customer_id)).collect();
    let scores: Vec<f64> = ho.iter().map(|t| t.risk).collect();
    let labels: Vec<bool> = ho.iter().map(|t| t.label).collect();
    println!("oracle AUC (holdout): {:.4}", lnb_core::metrics::auc(&scores, &labels).unwrap());

    for v in ["v6", "v5", "v1"] {
        let t = Instant::now();
        let outcome = train_version(&dataset, &preset(v).unwrap(), 42).unwrap();
        let hold = evaluate(&outcome.model, &dataset, Partition::Holdout).unwrap();
        let oot = evaluate(&outcome.model, &dataset, Partition::Oot).unwrap();
        let epochs: usize = outcome.log.phases.iter().map(|p| p.epochs.len()).sum();
        println!("{v}: holdout {:.4} oot {:.4} ks {:.4} psi {:.4} epochs {} time {:?}",
            hold.auc, oot.auc, hold.ks, hold.psi.unwrap(), epochs, t.elapsed());
    }

    let t = Instant::now();
    let th_cfg = GeneratorConfig { scenario: Scenario::TemporalHeavy, ..GeneratorConfig::default() };
    let th = generate(&th_cfg).unwrap();
    println!("th oracle: {:.4}", oracle_auc(&th.truth).unwrap());
    let th_ds = Dataset::build(&th.customers, &RuleTable::standard(), SplitSpec::new(th_cfg.cutoff, th_cfg.seed)).unwrap();
    for v in ["v5", "v6"] {
        let outcome = train_version(&th_ds, &preset(v).unwrap(), 42).unwrap();
        let hold = evaluate(&outcome.model, &th_ds, Partition::Holdout).unwrap();
        println!("temporal-heavy {v}: holdout {:.4}", hold.auc);
    }
    println!("temporal-heavy block: {:?}", t.elapsed());
    println!("total: {:?}", t0.elapsed());
}
