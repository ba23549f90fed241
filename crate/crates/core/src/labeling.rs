//! Target construction from performance records, run-date splits, and
//! positive-class oversampling.
//!
//! The label looks at performance months inside the 18-month window after the
//! run date: any charge-off sets the charge-off indicator; a 90+ day bucket
//! sets the delinquency indicator unless a charge-off precedes it in the
//! window. The final target is the OR of the two. Customers without a credit
//! card trade, or with fewer than the full 18 performance months in the
//! window, are unlabelable (`None`) and stay out of training and metrics.

use crate::bureau::{CustomerFile, Month, SegmentType, TradeType};
use crate::seeds::unit_hash;
use crate::story::{render_customer, RuleTable, StoryError};
use crate::temporal::{aggregate, compute_deltas, TemporalVector};
use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Outcome observation window after the run date, in months.
pub const WINDOW_MONTHS: i32 = 18;
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelingError {
    #[error("no customers with run date on or before the cutoff")]
    EmptyInTimePool,
    #[error("training partition has no positive examples to oversample")]
    NoPositives,
    #[error("split fractions {0:?} do not sum to 1")]
    BadFractions(String),
}

/// One featurized training row. `label` is `None` for customers the target
/// definition cannot label; those are excluded from training and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub customer_id: String,
    pub run_date: NaiveDate,
    /// Rendered stories in segment order TR, IN, CL.
    pub stories: [String; 3],
    /// True when the segment had no records (the encoder then sees `[EMPTY]`).
    pub empty_segments: [bool; 3],
    pub temporal: TemporalVector,
    pub label: Option<bool>,
}

impl LabeledExample {
    pub fn from_customer(cf: &CustomerFile, rules: &RuleTable) -> Result<Self, StoryError> {
        let stories = render_customer(cf, rules)?;
        let segments = crate::bureau::segment_customer(cf);
        let story_of = |s: SegmentType| stories[&s].text.clone();
        let empty_of = |s: SegmentType| segments[&s].entries.is_empty();
        Ok(LabeledExample {
            customer_id: cf.customer_id.clone(),
            run_date: cf.run_date,
            stories: [
                story_of(SegmentType::Tr),
                story_of(SegmentType::In),
                story_of(SegmentType::Cl),
            ],
            empty_segments: [
                empty_of(SegmentType::Tr),
                empty_of(SegmentType::In),
                empty_of(SegmentType::Cl),
            ],
            temporal: aggregate(&compute_deltas(cf)),
            label: label_customer(cf),
        })
    }
}

/// Apply the target definition to one customer.
pub fn label_customer(cf: &CustomerFile) -> Option<bool> {
    let has_credit_card = cf.trades().any(|t| t.trade_type == TradeType::CreditCard);
    if !has_credit_card {
        return None;
    }

    let run_month = Month::of_date(cf.run_date);
    let window = (run_month.0 + 1)..=(run_month.0 + WINDOW_MONTHS);
    let in_window: Vec<_> = cf
        .performances()
        .filter(|p| window.contains(&p.month.0))
        .collect();

    let distinct_months: BTreeSet<i32> = in_window.iter().map(|p| p.month.0).collect();
    if (distinct_months.len() as i32) < WINDOW_MONTHS {
        return None;
    }

    let first_chargeoff = in_window
        .iter()
        .filter(|p| p.charged_off)
        .map(|p| p.month.0)
        .min();
    let charge_off = first_chargeoff.is_some();
    let delinquency = in_window.iter().any(|p| {
        p.dpd_bucket == 3 && first_chargeoff.map_or(true, |co| p.month.0 <= co)
    });

    Some(charge_off || delinquency)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Holdout,
    Oot,
}

impl Partition {
    pub const ALL: [Partition; 4] = [
        Partition::Train,
        Partition::Validation,
        Partition::Holdout,
        Partition::Oot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Holdout => "holdout",
            Partition::Oot => "oot",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.name() == name)
    }
}

/// In-time/out-of-time cutoff plus the hash-based in-time fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub cutoff: NaiveDate,
    pub fractions: (f64, f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(cutoff: NaiveDate, seed: u64) -> Self {
        SplitSpec {
            cutoff,
            fractions: DEFAULT_FRACTIONS,
            seed,
        }
    }

    fn validate(&self) -> Result<(), LabelingError> {
        let (a, b, c) = self.fractions;
        let sum = a + b + c;
        if !(a >= 0.0 && b >= 0.0 && c >= 0.0 && (sum - 1.0).abs() < 1e-9) {
            return Err(LabelingError::BadFractions(format!("{:?}", self.fractions)));
        }
        Ok(())
    }
}

/// Deterministic partition of one record: records after the cutoff are OOT,
/// the rest are hashed by (customer id, seed) into the in-time fractions.
pub fn assign_partition(customer_id: &str, run_date: NaiveDate, spec: &SplitSpec) -> Partition {
    if run_date > spec.cutoff {
        return Partition::Oot;
    }
    let u = unit_hash(spec.seed, customer_id);
    let (train, validation, _) = spec.fractions;
    if u < train {
        Partition::Train
    } else if u < train + validation {
        Partition::Validation
    } else {
        Partition::Holdout
    }
}

/// Per-partition customer id lists, in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSets {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub holdout: Vec<String>,
    pub oot: Vec<String>,
}

impl SplitSets {
    pub fn of(&self, partition: Partition) -> &[String] {
        match partition {
            Partition::Train => &self.train,
            Partition::Validation => &self.validation,
            Partition::Holdout => &self.holdout,
            Partition::Oot => &self.oot,
        }
    }

    pub fn total(&self) -> usize {
        Partition::ALL.iter().map(|&p| self.of(p).len()).sum()
    }
}

/// Split a dataset of (customer id, run date) rows into the four partitions.
pub fn split(
    records: &[(String, NaiveDate)],
    spec: &SplitSpec,
) -> Result<SplitSets, LabelingError> {
    spec.validate()?;
    if !records.iter().any(|(_, d)| *d <= spec.cutoff) {
        return Err(LabelingError::EmptyInTimePool);
    }
    let mut sets = SplitSets::default();
    for (id, run_date) in records {
        match assign_partition(id, *run_date, spec) {
            Partition::Train => sets.train.push(id.clone()),
            Partition::Validation => sets.validation.push(id.clone()),
            Partition::Holdout => sets.holdout.push(id.clone()),
            Partition::Oot => sets.oot.push(id.clone()),
        }
    }
    Ok(sets)
}

/// Duplicate positives (round-robin over a seeded shuffle) until the positive
/// share reaches `target_share`, with minimal duplication. Negatives are left
/// untouched; duplicates are appended after the originals.
pub fn oversample<T: Clone>(
    items: &[T],
    is_positive: impl Fn(&T) -> bool,
    target_share: Option<f64>,
    seed: u64,
) -> Result<Vec<T>, LabelingError> {
    let Some(share) = target_share else {
        return Ok(items.to_vec());
    };
    let positives: Vec<usize> = (0..items.len()).filter(|&i| is_positive(&items[i])).collect();
    if positives.is_empty() {
        return Err(LabelingError::NoPositives);
    }
    let n_pos = positives.len();
    let n_neg = items.len() - n_pos;

    // Start below the float estimate and step up, so rounding can never
    // overshoot the minimal count.
    let estimate = ((share * n_neg as f64) / (1.0 - share)).floor() as usize;
    let mut needed = estimate.saturating_sub(2);
    while (needed as f64) < share * (needed + n_neg) as f64 {
        needed += 1;
    }
    if n_pos >= needed {
        return Ok(items.to_vec());
    }

    let mut order = positives;
    let mut rng = crate::seeds::substream(seed, "oversample");
    order.shuffle(&mut rng);
    let mut out = items.to_vec();
    for k in 0..(needed - n_pos) {
        out.push(items[order[k % order.len()]].clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bureau::parse_customer;

    const CC_TRADE: &str =
        "TR01AC0000000000000001CC201702010100000010000000100000000000000000000000000000";

    fn customer(pf_lines: &[(i32, u32, u8, bool)], trade: Option<&str>) -> CustomerFile {
        let mut block = String::from("CUST00000000A00120180201\n");
        if let Some(t) = trade {
            block.push_str(t);
            block.push('\n');
        }
        for &(y, m, dpd, co) in pf_lines {
            block.push_str(&format!(
                "PF01{:04}{:02}{}{}\n",
                y,
                m,
                dpd,
                if co { 'Y' } else { 'N' }
            ));
        }
        block.push_str("END0\n");
        parse_customer(&block).unwrap()
    }

    /// Full 18 performance months starting 2018-03, all clean.
    fn clean_window() -> Vec<(i32, u32, u8, bool)> {
        (0..18)
            .map(|k| {
                let m0 = Month::from_ym(2018, 3).0 + k;
                let m = Month(m0);
                (m.year(), m.month(), 0, false)
            })
            .collect()
    }

    #[test]
    fn charge_off_in_window_is_positive() {
        let mut pf = clean_window();
        pf[5].3 = true; // charge-off at t0+6 months
        assert_eq!(label_customer(&customer(&pf, Some(CC_TRADE))), Some(true));
    }

    #[test]
    fn clean_window_is_negative() {
        let mut pf = clean_window();
        pf[3].2 = 1;
        pf[4].2 = 2;
        assert_eq!(label_customer(&customer(&pf, Some(CC_TRADE))), Some(false));
    }

    #[test]
    fn no_credit_card_trade_is_none() {
        let al_trade = CC_TRADE.replace("CC", "AL");
        assert_eq!(label_customer(&customer(&clean_window(), Some(&al_trade))), None);
        assert_eq!(label_customer(&customer(&clean_window(), None)), None);
    }

    #[test]
    fn short_performance_history_is_none() {
        let pf = &clean_window()[..17];
        assert_eq!(label_customer(&customer(pf, Some(CC_TRADE))), None);
    }

    #[test]
    fn truth_table() {
        // (co, dq) = (1, 0)
        let mut co_only = clean_window();
        co_only[9].3 = true;
        assert_eq!(label_customer(&customer(&co_only, Some(CC_TRADE))), Some(true));
        // (0, 1)
        let mut dq_only = clean_window();
        dq_only[9].2 = 3;
        assert_eq!(label_customer(&customer(&dq_only, Some(CC_TRADE))), Some(true));
        // (1, 1): delinquency strictly before the charge-off
        let mut both = clean_window();
        both[4].2 = 3;
        both[9].3 = true;
        assert_eq!(label_customer(&customer(&both, Some(CC_TRADE))), Some(true));
        // (0, 0)
        assert_eq!(
            label_customer(&customer(&clean_window(), Some(CC_TRADE))),
            Some(false)
        );
    }

    #[test]
    fn delinquency_after_charge_off_still_positive_via_chargeoff() {
        // dpd 3 after a charge-off is excluded from the delinquency indicator,
        // but the charge-off alone makes the label positive.
        let mut pf = clean_window();
        pf[3].3 = true;
        pf[10].2 = 3;
        assert_eq!(label_customer(&customer(&pf, Some(CC_TRADE))), Some(true));
    }

    #[test]
    fn window_boundary_is_inclusive_at_plus_18() {
        // charge-off in the 18th month after the run month is inside
        let mut pf = clean_window();
        pf[17].3 = true;
        assert_eq!(label_customer(&customer(&pf, Some(CC_TRADE))), Some(true));

        // a 19th month is outside: event there does not flip the label
        let mut pf = clean_window();
        let m19 = Month(Month::from_ym(2018, 2).0 + 19);
        pf.push((m19.year(), m19.month(), 3, true));
        assert_eq!(label_customer(&customer(&pf, Some(CC_TRADE))), Some(false));
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn split_fractions_hold_within_one_percent() {
        let cutoff = date(2018, 2, 1);
        let spec = SplitSpec::new(cutoff, 42);
        let records: Vec<(String, NaiveDate)> = (0..10_000)
            .map(|i| (format!("CUST{i:08}"), date(2017, 6, 1)))
            .collect();
        let sets = split(&records, &spec).unwrap();
        assert!((sets.train.len() as i64 - 6000).unsigned_abs() <= 100);
        assert!((sets.validation.len() as i64 - 2000).unsigned_abs() <= 100);
        assert!((sets.holdout.len() as i64 - 2000).unsigned_abs() <= 100);
        assert_eq!(sets.total(), 10_000);
    }

    #[test]
    fn post_cutoff_records_are_oot_regardless_of_seed() {
        let spec = SplitSpec::new(date(2018, 2, 1), 1);
        for seed in [1u64, 2, 3] {
            let spec = SplitSpec { seed, ..spec.clone() };
            assert_eq!(
                assign_partition("ANY000000001", date(2018, 3, 1), &spec),
                Partition::Oot
            );
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let records: Vec<(String, NaiveDate)> = (0..500)
            .map(|i| (format!("C{i:011}"), date(2017, 10, 1)))
            .collect();
        let spec = SplitSpec::new(date(2018, 2, 1), 9);
        assert_eq!(split(&records, &spec).unwrap(), split(&records, &spec).unwrap());
        let other = SplitSpec::new(date(2018, 2, 1), 10);
        assert_ne!(split(&records, &spec).unwrap(), split(&records, &other).unwrap());
    }

    #[test]
    fn empty_in_time_pool_is_an_error() {
        let records = vec![("A000000000001".to_string(), date(2018, 5, 1))];
        let spec = SplitSpec::new(date(2018, 2, 1), 1);
        assert!(matches!(
            split(&records, &spec),
            Err(LabelingError::EmptyInTimePool)
        ));
    }

    #[test]
    fn oversample_minimal_duplication() {
        let items: Vec<bool> = std::iter::repeat(false)
            .take(96)
            .chain(std::iter::repeat(true).take(4))
            .collect();
        let out = oversample(&items, |&x| x, Some(0.30), 7).unwrap();
        let pos = out.iter().filter(|&&x| x).count();
        assert_eq!(pos, 42);
        assert_eq!(out.len(), 138);
        // negatives untouched
        assert_eq!(out.iter().filter(|&&x| !x).count(), 96);
        // one fewer positive would undershoot the share
        assert!((41.0) / 137.0 < 0.30);
    }

    #[test]
    fn oversample_none_and_already_balanced_are_identity() {
        let items = vec![true, false];
        assert_eq!(oversample(&items, |&x| x, None, 1).unwrap(), items);
        let balanced = vec![true, true, false];
        assert_eq!(
            oversample(&balanced, |&x| x, Some(0.30), 1).unwrap(),
            balanced
        );
    }

    #[test]
    fn oversample_without_positives_fails() {
        let items = vec![false, false];
        assert!(matches!(
            oversample(&items, |&x| x, Some(0.3), 1),
            Err(LabelingError::NoPositives)
        ));
    }

    #[test]
    fn labeled_example_assembles_stories_and_temporal() {
        let cf = customer(&clean_window(), Some(CC_TRADE));
        let ex = LabeledExample::from_customer(&cf, &RuleTable::standard()).unwrap();
        assert_eq!(ex.label, Some(false));
        assert!(ex.stories[0].starts_with("trade: credit card account"));
        assert_eq!(ex.stories[2], "collections: no records");
        assert_eq!(ex.empty_segments, [false, true, true]);
        let (min, _, _) = ex.temporal.triple(SegmentType::Tr);
        assert_eq!(min, -365.0);
    }
}
