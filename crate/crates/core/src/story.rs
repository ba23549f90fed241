//! Deterministic plain-English rendering of coded segments into credit stories.
//!
//! Every coded field goes through one fixed rule table and one fixed sentence
//! template per segment, so identical inputs always produce identical text and
//! downstream tests can assert exact strings. Money is rendered as dollars
//! with two decimals, dates as ISO `YYYY-MM-DD`, and an empty segment renders
//! the fixed sentence `"<segment name>: no records"`.

use crate::bureau::{
    pay_history_phrase, CollectionStatus, CustomerFile, RecordLine, Segment, SegmentType,
    TradeStatus, TradeType, PAY_HISTORY_CODES,
};
use chrono::NaiveDate;
use std::collections::BTreeMap;
use thiserror::Error;

/// Sentence templates, one per entry kind plus the empty-segment sentence.
/// Placeholders in braces are substituted by [`render_segment`].
pub const TRADE_TEMPLATE: &str = "trade: {type} account opened on {date}, status {status}, balance {bal} of limit {lim}, payment history {summary}";
pub const INQUIRY_TEMPLATE: &str = "inquiry: {purpose} inquiry on {date} by {inquirer}";
pub const COLLECTION_TEMPLATE: &str =
    "collection: {status} collection of {amount} assigned on {date} by {agency}";
pub const EMPTY_TEMPLATE: &str = "{segment}: no records";
pub const ENTRY_SEPARATOR: &str = "; ";
pub const SUMMARY_JOINER: &str = " and ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoryError {
    #[error("no phrase for segment {segment} field {field} code {code:?}")]
    UnknownCode {
        segment: SegmentType,
        field: &'static str,
        code: String,
    },
}

/// Mapping from (segment, field, code) to an English phrase, plus the
/// per-segment templates. [`RuleTable::standard`] is total over the LNB code
/// tables of the three renderable segments.
#[derive(Debug, Clone)]
pub struct RuleTable {
    entries: BTreeMap<(SegmentType, &'static str, String), String>,
}

impl RuleTable {
    pub fn standard() -> Self {
        let mut entries = BTreeMap::new();
        for t in TradeType::ALL {
            entries.insert(
                (SegmentType::Tr, "type", t.code().to_string()),
                t.phrase().to_string(),
            );
            entries.insert(
                (SegmentType::In, "purpose", t.code().to_string()),
                t.phrase().to_string(),
            );
        }
        for s in TradeStatus::ALL {
            entries.insert(
                (SegmentType::Tr, "status", s.code().to_string()),
                s.phrase().to_string(),
            );
        }
        for c in PAY_HISTORY_CODES {
            entries.insert(
                (SegmentType::Tr, "pay_history", c.to_string()),
                pay_history_phrase(c).unwrap().to_string(),
            );
        }
        for s in CollectionStatus::ALL {
            entries.insert(
                (SegmentType::Cl, "status", s.code().to_string()),
                s.phrase().to_string(),
            );
        }
        RuleTable { entries }
    }

    pub fn phrase(
        &self,
        segment: SegmentType,
        field: &'static str,
        code: &str,
    ) -> Result<&str, StoryError> {
        self.entries
            .get(&(segment, field, code.to_string()))
            .map(String::as_str)
            .ok_or_else(|| StoryError::UnknownCode {
                segment,
                field,
                code: code.to_string(),
            })
    }

    /// All phrase values, in deterministic table order.
    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(String::as_str)
    }

    /// The fixed template strings whose literal words the tokenizer must know.
    pub fn templates(&self) -> Vec<&'static str> {
        vec![
            TRADE_TEMPLATE,
            INQUIRY_TEMPLATE,
            COLLECTION_TEMPLATE,
            EMPTY_TEMPLATE,
            SUMMARY_JOINER,
        ]
    }

    /// Segment names usable for the `{segment}` placeholder.
    pub fn segment_names(&self) -> Vec<&'static str> {
        SegmentType::ALL.iter().map(|s| s.story_name()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreditStory {
    pub segment_type: SegmentType,
    pub text: String,
}

/// Cents to a dollars string with two decimals: 123456 -> "1234.56".
pub fn money(cents: u64) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

fn iso(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

/// Summarize a 24-char payment history as counts per lateness class, e.g.
/// "23 on-time and 1 thirty-day late". Classes with zero count are omitted.
pub fn summarize_pay_history(history: &str, rules: &RuleTable) -> Result<String, StoryError> {
    let mut parts = Vec::new();
    for code in PAY_HISTORY_CODES {
        let count = history.chars().filter(|&c| c == code).count();
        if count > 0 {
            let phrase = rules.phrase(SegmentType::Tr, "pay_history", &code.to_string())?;
            parts.push(format!("{count} {phrase}"));
        }
    }
    Ok(parts.join(SUMMARY_JOINER))
}

fn render_entry(entry: &RecordLine, rules: &RuleTable) -> Result<String, StoryError> {
    match entry {
        RecordLine::Trade(t) => Ok(TRADE_TEMPLATE
            .replace("{type}", rules.phrase(SegmentType::Tr, "type", t.trade_type.code())?)
            .replace("{date}", &iso(t.open_date))
            .replace("{status}", rules.phrase(SegmentType::Tr, "status", t.status.code())?)
            .replace("{bal}", &money(t.balance_cents))
            .replace("{lim}", &money(t.limit_cents))
            .replace("{summary}", &summarize_pay_history(&t.pay_history, rules)?)),
        RecordLine::Inquiry(i) => Ok(INQUIRY_TEMPLATE
            .replace("{purpose}", rules.phrase(SegmentType::In, "purpose", i.purpose.code())?)
            .replace("{date}", &iso(i.inquiry_date))
            .replace("{inquirer}", &i.inquirer.to_ascii_lowercase())),
        RecordLine::Collection(c) => Ok(COLLECTION_TEMPLATE
            .replace("{status}", rules.phrase(SegmentType::Cl, "status", &c.status.code().to_string())?)
            .replace("{amount}", &money(c.amount_cents))
            .replace("{date}", &iso(c.assign_date))
            .replace("{agency}", &c.agency.to_ascii_lowercase())),
        RecordLine::Performance(_) => unreachable!("performance lines are never rendered"),
    }
}

/// Render one segment into its credit story. Entries are joined in file order
/// with `"; "`; an empty segment renders the fixed sentence.
pub fn render_segment(seg: &Segment, rules: &RuleTable) -> Result<CreditStory, StoryError> {
    let text = if seg.entries.is_empty() {
        EMPTY_TEMPLATE.replace("{segment}", seg.segment_type.story_name())
    } else {
        let mut clauses = Vec::with_capacity(seg.entries.len());
        for entry in &seg.entries {
            clauses.push(render_entry(entry, rules)?);
        }
        clauses.join(ENTRY_SEPARATOR)
    };
    Ok(CreditStory {
        segment_type: seg.segment_type,
        text,
    })
}

/// Render all three stories of one customer.
pub fn render_customer(
    cf: &CustomerFile,
    rules: &RuleTable,
) -> Result<BTreeMap<SegmentType, CreditStory>, StoryError> {
    let segments = crate::bureau::segment_customer(cf);
    let mut out = BTreeMap::new();
    for (seg_type, seg) in segments {
        out.insert(seg_type, render_segment(&seg, rules)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bureau::parse_customer;

    const HEADER: &str = "CUST00000000A00120180201";
    const TRADE: &str =
        "TR01AC0000000000000001CC201702010200001234560000500000000010000000000000000000";

    #[test]
    fn trade_entry_matches_template() {
        let cf = parse_customer(&format!("{HEADER}\n{TRADE}\nEND0\n")).unwrap();
        let rules = RuleTable::standard();
        let stories = render_customer(&cf, &rules).unwrap();
        assert_eq!(
            stories[&SegmentType::Tr].text,
            "trade: credit card account opened on 2017-02-01, status thirty days past due, \
             balance 1234.56 of limit 5000.00, payment history 23 on-time and 1 thirty-day late"
        );
    }

    #[test]
    fn empty_segments_render_fixed_sentences() {
        let cf = parse_customer(&format!("{HEADER}\nEND0\n")).unwrap();
        let stories = render_customer(&cf, &RuleTable::standard()).unwrap();
        assert_eq!(stories[&SegmentType::Tr].text, "trade: no records");
        assert_eq!(stories[&SegmentType::In].text, "inquiries: no records");
        assert_eq!(stories[&SegmentType::Cl].text, "collections: no records");
    }

    #[test]
    fn inquiry_entry_matches_template() {
        let cf =
            parse_customer(&format!("{HEADER}\nIN0199900120180115AL\nEND0\n")).unwrap();
        let stories = render_customer(&cf, &RuleTable::standard()).unwrap();
        assert_eq!(
            stories[&SegmentType::In].text,
            "inquiry: auto loan inquiry on 2018-01-15 by 999001"
        );
    }

    #[test]
    fn collection_entry_matches_template() {
        let cf =
            parse_customer(&format!("{HEADER}\nCL01AG0001201708010000150000O\nEND0\n")).unwrap();
        let stories = render_customer(&cf, &RuleTable::standard()).unwrap();
        assert_eq!(
            stories[&SegmentType::Cl].text,
            "collection: open collection of 1500.00 assigned on 2017-08-01 by ag0001"
        );
    }

    #[test]
    fn entries_join_in_file_order() {
        let t2 = TRADE.replace("AC0000000000000001", "AC0000000000000002").replace("02000012", "01000012");
        let cf = parse_customer(&format!("{HEADER}\n{TRADE}\n{t2}\nEND0\n")).unwrap();
        let stories = render_customer(&cf, &RuleTable::standard()).unwrap();
        let text = &stories[&SegmentType::Tr].text;
        let parts: Vec<&str> = text.split("; ").collect();
        assert_eq!(parts.len(), 2);
        assert!(parts[0].contains("thirty days past due"));
        assert!(parts[1].contains("status current"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let cf = parse_customer(&format!("{HEADER}\n{TRADE}\nEND0\n")).unwrap();
        let rules = RuleTable::standard();
        let a = render_customer(&cf, &rules).unwrap();
        let b = render_customer(&cf, &rules).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_code_is_reported() {
        let mut rules = RuleTable::standard();
        rules
            .entries
            .remove(&(SegmentType::Tr, "status", "02".to_string()));
        let cf = parse_customer(&format!("{HEADER}\n{TRADE}\nEND0\n")).unwrap();
        let seg = crate::bureau::segment_customer(&cf);
        let err = render_segment(&seg[&SegmentType::Tr], &rules).unwrap_err();
        assert!(matches!(err, StoryError::UnknownCode { field: "status", .. }));
    }

    #[test]
    fn every_code_renders() {
        // Coverage over the full code tables: a synthetic record per code.
        let rules = RuleTable::standard();
        for t in TradeType::ALL {
            for s in TradeStatus::ALL {
                let line = format!(
                    "TR01AA0000000000000001{}20170201{}{:010}{:010}{}",
                    t.code(),
                    s.code(),
                    100_000,
                    1_000_000,
                    "012X".repeat(6)
                );
                let block = format!("{HEADER}\n{line}\nEND0\n");
                let cf = parse_customer(&block).unwrap();
                let stories = render_customer(&cf, &rules).unwrap();
                let text = &stories[&SegmentType::Tr].text;
                assert!(text.contains(t.phrase()), "{text}");
                assert!(text.contains(s.phrase()), "{text}");
            }
        }
        for c in CollectionStatus::ALL {
            let line = format!("CL01AG0001201708010000150000{}", c.code());
            let cf = parse_customer(&format!("{HEADER}\n{line}\nEND0\n")).unwrap();
            let stories = render_customer(&cf, &rules).unwrap();
            assert!(stories[&SegmentType::Cl].text.contains(c.phrase()));
        }
    }

    #[test]
    fn no_raw_codes_in_output() {
        let cf = parse_customer(&format!(
            "{HEADER}\n{TRADE}\nIN0112345620180115MG\nCL01654321201709010000023199P\nEND0\n"
        ))
        .unwrap();
        let stories = render_customer(&cf, &RuleTable::standard()).unwrap();
        for story in stories.values() {
            for code in ["CC", "AL", "MG", "PL", "LC", "SL"] {
                assert!(!story.text.contains(code), "{}", story.text);
            }
            assert!(!story.text.contains("0000123456"), "{}", story.text);
        }
    }

    #[test]
    fn distinct_statuses_have_distinct_phrases() {
        let mut seen = std::collections::BTreeSet::new();
        for s in TradeStatus::ALL {
            assert!(seen.insert(s.phrase()));
        }
    }

    #[test]
    fn money_formatting() {
        assert_eq!(money(123456), "1234.56");
        assert_eq!(money(500000), "5000.00");
        assert_eq!(money(5), "0.05");
        assert_eq!(money(0), "0.00");
    }

    #[test]
    fn pay_history_summary_order_and_join() {
        let rules = RuleTable::standard();
        assert_eq!(
            summarize_pay_history("000010000000000000000000", &rules).unwrap(),
            "23 on-time and 1 thirty-day late"
        );
        assert_eq!(
            summarize_pay_history(&"X".repeat(24), &rules).unwrap(),
            "24 not reported"
        );
        assert_eq!(
            summarize_pay_history(&format!("0123{}", "0".repeat(20)), &rules).unwrap(),
            "21 on-time and 1 thirty-day late and 1 sixty-day late and 1 ninety-plus-day late"
        );
    }
}
