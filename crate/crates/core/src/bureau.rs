//! LNB fixed-width bureau record format: parsing, serialization, segmentation.
//!
//! An LNB block is a newline-delimited ASCII text describing one customer:
//! a `CUST` header, any number of `TR01`/`IN01`/`CL01`/`PF01` record lines,
//! and an `END0` trailer. Every line has a fixed width determined by its tag
//! and all coded fields are drawn from closed code tables. Parsing is total:
//! any malformed input maps to exactly one structured [`ParseError`] carrying
//! the line number and byte offset of the offending field.

use chrono::NaiveDate;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const CUST_WIDTH: usize = 24;
pub const TR_WIDTH: usize = 78;
pub const IN_WIDTH: usize = 20;
pub const CL_WIDTH: usize = 29;
pub const PF_WIDTH: usize = 12;
pub const END_WIDTH: usize = 4;

pub const PAY_HISTORY_LEN: usize = 24;
pub const CUSTOMER_ID_LEN: usize = 12;
pub const ACCOUNT_ID_LEN: usize = 18;
pub const PARTY_ID_LEN: usize = 6;

/// The three renderable segments. Performance lines feed labeling only and
/// never belong to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum SegmentType {
    Tr,
    In,
    Cl,
}

impl SegmentType {
    pub const ALL: [SegmentType; 3] = [SegmentType::Tr, SegmentType::In, SegmentType::Cl];

    pub fn code(self) -> &'static str {
        match self {
            SegmentType::Tr => "TR",
            SegmentType::In => "IN",
            SegmentType::Cl => "CL",
        }
    }

    /// Segment name used in rendered stories ("trade: no records" etc.).
    pub fn story_name(self) -> &'static str {
        match self {
            SegmentType::Tr => "trade",
            SegmentType::In => "inquiries",
            SegmentType::Cl => "collections",
        }
    }
}

impl fmt::Display for SegmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Trade/inquiry product codes (`type` on TR01, `purpose` on IN01).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TradeType {
    CreditCard,
    AutoLoan,
    Mortgage,
    PersonalLoan,
    LineOfCredit,
    StudentLoan,
}

impl TradeType {
    pub const ALL: [TradeType; 6] = [
        TradeType::CreditCard,
        TradeType::AutoLoan,
        TradeType::Mortgage,
        TradeType::PersonalLoan,
        TradeType::LineOfCredit,
        TradeType::StudentLoan,
    ];

    pub fn code(self) -> &'static str {
        match self {
            TradeType::CreditCard => "CC",
            TradeType::AutoLoan => "AL",
            TradeType::Mortgage => "MG",
            TradeType::PersonalLoan => "PL",
            TradeType::LineOfCredit => "LC",
            TradeType::StudentLoan => "SL",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.code() == code)
    }

    pub fn phrase(self) -> &'static str {
        match self {
            TradeType::CreditCard => "credit card",
            TradeType::AutoLoan => "auto loan",
            TradeType::Mortgage => "mortgage",
            TradeType::PersonalLoan => "personal loan",
            TradeType::LineOfCredit => "line of credit",
            TradeType::StudentLoan => "student loan",
        }
    }
}

/// Trade account status codes. Code `06` is unassigned in the LNB tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TradeStatus {
    Current,
    PastDue30,
    PastDue60,
    PastDue90,
    PastDue120,
    ChargedOff,
    InCollection,
    Closed,
}

impl TradeStatus {
    pub const ALL: [TradeStatus; 8] = [
        TradeStatus::Current,
        TradeStatus::PastDue30,
        TradeStatus::PastDue60,
        TradeStatus::PastDue90,
        TradeStatus::PastDue120,
        TradeStatus::ChargedOff,
        TradeStatus::InCollection,
        TradeStatus::Closed,
    ];

    pub fn code(self) -> &'static str {
        match self {
            TradeStatus::Current => "01",
            TradeStatus::PastDue30 => "02",
            TradeStatus::PastDue60 => "03",
            TradeStatus::PastDue90 => "04",
            TradeStatus::PastDue120 => "05",
            TradeStatus::ChargedOff => "07",
            TradeStatus::InCollection => "08",
            TradeStatus::Closed => "09",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.code() == code)
    }

    pub fn phrase(self) -> &'static str {
        match self {
            TradeStatus::Current => "current",
            TradeStatus::PastDue30 => "thirty days past due",
            TradeStatus::PastDue60 => "sixty days past due",
            TradeStatus::PastDue90 => "ninety days past due",
            TradeStatus::PastDue120 => "one hundred twenty plus days past due",
            TradeStatus::ChargedOff => "charged off",
            TradeStatus::InCollection => "in collection",
            TradeStatus::Closed => "closed",
        }
    }

    /// Severity ordering used by the synthetic generator's risk signal.
    pub fn risk_ordinal(self) -> u8 {
        match self {
            TradeStatus::Current | TradeStatus::Closed => 0,
            TradeStatus::PastDue30 => 1,
            TradeStatus::PastDue60 => 2,
            TradeStatus::PastDue90 => 3,
            TradeStatus::PastDue120 => 4,
            TradeStatus::InCollection => 5,
            TradeStatus::ChargedOff => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectionStatus {
    Open,
    Paid,
    Disputed,
}

impl CollectionStatus {
    pub const ALL: [CollectionStatus; 3] = [
        CollectionStatus::Open,
        CollectionStatus::Paid,
        CollectionStatus::Disputed,
    ];

    pub fn code(self) -> char {
        match self {
            CollectionStatus::Open => 'O',
            CollectionStatus::Paid => 'P',
            CollectionStatus::Disputed => 'D',
        }
    }

    pub fn from_code(code: char) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.code() == code)
    }

    pub fn phrase(self) -> &'static str {
        match self {
            CollectionStatus::Open => "open",
            CollectionStatus::Paid => "paid",
            CollectionStatus::Disputed => "disputed",
        }
    }
}

/// Payment-history month codes ('0' on time, '1'/'2'/'3' lateness, 'X' not reported).
pub const PAY_HISTORY_CODES: [char; 5] = ['0', '1', '2', '3', 'X'];

pub fn pay_history_phrase(code: char) -> Option<&'static str> {
    match code {
        '0' => Some("on-time"),
        '1' => Some("thirty-day late"),
        '2' => Some("sixty-day late"),
        '3' => Some("ninety-plus-day late"),
        'X' => Some("not reported"),
        _ => None,
    }
}

/// Calendar month, stored as a count of months since year 0 for exact window
/// arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month(pub i32);

impl Month {
    pub fn from_ym(year: i32, month: u32) -> Self {
        Month(year * 12 + month as i32 - 1)
    }

    pub fn of_date(d: NaiveDate) -> Self {
        use chrono::Datelike;
        Month::from_ym(d.year(), d.month())
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        (self.0.rem_euclid(12) + 1) as u32
    }

    pub fn to_yyyymm(self) -> String {
        format!("{:04}{:02}", self.year(), self.month())
    }

    pub fn parse_yyyymm(s: &str) -> Option<Self> {
        if s.len() != 6 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let year: i32 = s[..4].parse().ok()?;
        let month: u32 = s[4..].parse().ok()?;
        if !(1..=12).contains(&month) {
            return None;
        }
        Some(Month::from_ym(year, month))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeLine {
    pub account_id: String,
    pub trade_type: TradeType,
    pub open_date: NaiveDate,
    pub status: TradeStatus,
    pub balance_cents: u64,
    pub limit_cents: u64,
    /// 24 chars over {0,1,2,3,X}, most recent month first.
    pub pay_history: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InquiryLine {
    pub inquirer: String,
    pub inquiry_date: NaiveDate,
    pub purpose: TradeType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionLine {
    pub agency: String,
    pub assign_date: NaiveDate,
    pub amount_cents: u64,
    pub status: CollectionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerformanceLine {
    pub month: Month,
    pub dpd_bucket: u8,
    pub charged_off: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordLine {
    Trade(TradeLine),
    Inquiry(InquiryLine),
    Collection(CollectionLine),
    Performance(PerformanceLine),
}

impl RecordLine {
    pub fn segment_type(&self) -> Option<SegmentType> {
        match self {
            RecordLine::Trade(_) => Some(SegmentType::Tr),
            RecordLine::Inquiry(_) => Some(SegmentType::In),
            RecordLine::Collection(_) => Some(SegmentType::Cl),
            RecordLine::Performance(_) => None,
        }
    }
}

/// One customer's bureau block: id, run date (the feature snapshot) and the
/// record lines in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CustomerFile {
    pub customer_id: String,
    pub run_date: NaiveDate,
    pub records: Vec<RecordLine>,
}

impl CustomerFile {
    pub fn trades(&self) -> impl Iterator<Item = &TradeLine> {
        self.records.iter().filter_map(|r| match r {
            RecordLine::Trade(t) => Some(t),
            _ => None,
        })
    }

    pub fn inquiries(&self) -> impl Iterator<Item = &InquiryLine> {
        self.records.iter().filter_map(|r| match r {
            RecordLine::Inquiry(i) => Some(i),
            _ => None,
        })
    }

    pub fn collections(&self) -> impl Iterator<Item = &CollectionLine> {
        self.records.iter().filter_map(|r| match r {
            RecordLine::Collection(c) => Some(c),
            _ => None,
        })
    }

    pub fn performances(&self) -> impl Iterator<Item = &PerformanceLine> {
        self.records.iter().filter_map(|r| match r {
            RecordLine::Performance(p) => Some(p),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub segment_type: SegmentType,
    pub entries: Vec<RecordLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown record tag {tag:?}")]
    UnknownTag { tag: String },
    #[error("line width {found} does not match {expected} required for tag {tag}")]
    WidthMismatch {
        tag: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("field {field} holds {value:?}, which is outside its code table")]
    BadCode { field: &'static str, value: String },
    #[error("field {field} holds {value:?}, which is not a valid calendar date")]
    BadDate { field: &'static str, value: String },
    #[error("field {field} holds {value:?}, which violates the field's character set")]
    BadField { field: &'static str, value: String },
    #[error("block ended without an END0 trailer")]
    MissingTrailer,
    #[error("block does not begin with a CUST header")]
    MissingHeader,
    #[error("second CUST header inside one customer block")]
    DuplicateHeader,
    #[error("content after the END0 trailer")]
    TrailingContent,
    #[error("{field} is dated on the wrong side of the run date")]
    DateOutOfRange { field: &'static str },
}

/// Parse failure with the 1-based line number and the byte offset (within the
/// block) of the offending field or line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, byte {offset}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("field {field} value {value:?} cannot be rendered at width {width}")]
    InvariantViolation {
        field: &'static str,
        value: String,
        width: usize,
    },
}

fn is_alnum(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric())
}

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

struct LineCursor<'a> {
    text: &'a str,
    line_no: usize,
    line_start: usize,
    pos: usize,
}

impl<'a> LineCursor<'a> {
    fn new(text: &'a str, line_no: usize, line_start: usize) -> Self {
        LineCursor {
            text,
            line_no,
            line_start,
            pos: 0,
        }
    }

    fn take(&mut self, n: usize) -> &'a str {
        let s = &self.text[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            line: self.line_no,
            // Offset of the field that was about to be consumed.
            offset: self.line_start + self.pos,
        }
    }

    fn field_err(&self, field_start: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            line: self.line_no,
            offset: self.line_start + field_start,
        }
    }

    fn date(&mut self, field: &'static str) -> Result<NaiveDate, ParseError> {
        let start = self.pos;
        let raw = self.take(8);
        if !is_digits(raw) {
            return Err(self.field_err(
                start,
                ParseErrorKind::BadDate {
                    field,
                    value: raw.to_string(),
                },
            ));
        }
        let y: i32 = raw[..4].parse().unwrap();
        let m: u32 = raw[4..6].parse().unwrap();
        let d: u32 = raw[6..8].parse().unwrap();
        NaiveDate::from_ymd_opt(y, m, d).ok_or_else(|| {
            self.field_err(
                start,
                ParseErrorKind::BadDate {
                    field,
                    value: raw.to_string(),
                },
            )
        })
    }

    fn amount(&mut self, field: &'static str) -> Result<u64, ParseError> {
        let start = self.pos;
        let raw = self.take(10);
        if !is_digits(raw) {
            return Err(self.field_err(
                start,
                ParseErrorKind::BadField {
                    field,
                    value: raw.to_string(),
                },
            ));
        }
        Ok(raw.parse().unwrap())
    }

    fn alnum(&mut self, field: &'static str, n: usize) -> Result<&'a str, ParseError> {
        let start = self.pos;
        let raw = self.take(n);
        if !is_alnum(raw) {
            return Err(self.field_err(
                start,
                ParseErrorKind::BadField {
                    field,
                    value: raw.to_string(),
                },
            ));
        }
        Ok(raw)
    }
}

fn parse_trade(cur: &mut LineCursor<'_>) -> Result<TradeLine, ParseError> {
    let account_id = cur.alnum("account_id", ACCOUNT_ID_LEN)?.to_string();
    let type_start = cur.pos;
    let type_raw = cur.take(2);
    let trade_type = TradeType::from_code(type_raw).ok_or_else(|| {
        cur.field_err(
            type_start,
            ParseErrorKind::BadCode {
                field: "type",
                value: type_raw.to_string(),
            },
        )
    })?;
    let open_date = cur.date("open_date")?;
    let status_start = cur.pos;
    let status_raw = cur.take(2);
    let status = TradeStatus::from_code(status_raw).ok_or_else(|| {
        cur.field_err(
            status_start,
            ParseErrorKind::BadCode {
                field: "status",
                value: status_raw.to_string(),
            },
        )
    })?;
    let balance_cents = cur.amount("balance")?;
    let limit_cents = cur.amount("limit")?;
    let ph_start = cur.pos;
    let pay_history = cur.take(PAY_HISTORY_LEN);
    if let Some(bad) = pay_history.chars().find(|c| !PAY_HISTORY_CODES.contains(c)) {
        return Err(cur.field_err(
            ph_start,
            ParseErrorKind::BadCode {
                field: "pay_history",
                value: bad.to_string(),
            },
        ));
    }
    Ok(TradeLine {
        account_id,
        trade_type,
        open_date,
        status,
        balance_cents,
        limit_cents,
        pay_history: pay_history.to_string(),
    })
}

fn parse_inquiry(cur: &mut LineCursor<'_>) -> Result<InquiryLine, ParseError> {
    let inquirer = cur.alnum("inquirer", PARTY_ID_LEN)?.to_string();
    let inquiry_date = cur.date("inquiry_date")?;
    let purpose_start = cur.pos;
    let purpose_raw = cur.take(2);
    let purpose = TradeType::from_code(purpose_raw).ok_or_else(|| {
        cur.field_err(
            purpose_start,
            ParseErrorKind::BadCode {
                field: "purpose",
                value: purpose_raw.to_string(),
            },
        )
    })?;
    Ok(InquiryLine {
        inquirer,
        inquiry_date,
        purpose,
    })
}

fn parse_collection(cur: &mut LineCursor<'_>) -> Result<CollectionLine, ParseError> {
    let agency = cur.alnum("agency", PARTY_ID_LEN)?.to_string();
    let assign_date = cur.date("assign_date")?;
    let amount_cents = cur.amount("amount")?;
    let status_start = cur.pos;
    let status_raw = cur.take(1).chars().next().unwrap();
    let status = CollectionStatus::from_code(status_raw).ok_or_else(|| {
        cur.field_err(
            status_start,
            ParseErrorKind::BadCode {
                field: "status",
                value: status_raw.to_string(),
            },
        )
    })?;
    Ok(CollectionLine {
        agency,
        assign_date,
        amount_cents,
        status,
    })
}

fn parse_performance(cur: &mut LineCursor<'_>) -> Result<PerformanceLine, ParseError> {
    let month_start = cur.pos;
    let month_raw = cur.take(6);
    let month = Month::parse_yyyymm(month_raw).ok_or_else(|| {
        cur.field_err(
            month_start,
            ParseErrorKind::BadDate {
                field: "month",
                value: month_raw.to_string(),
            },
        )
    })?;
    let dpd_start = cur.pos;
    let dpd_raw = cur.take(1).chars().next().unwrap();
    let dpd_bucket = match dpd_raw {
        '0'..='3' => dpd_raw as u8 - b'0',
        _ => {
            return Err(cur.field_err(
                dpd_start,
                ParseErrorKind::BadCode {
                    field: "dpd_bucket",
                    value: dpd_raw.to_string(),
                },
            ))
        }
    };
    let flag_start = cur.pos;
    let flag_raw = cur.take(1).chars().next().unwrap();
    let charged_off = match flag_raw {
        'Y' => true,
        'N' => false,
        _ => {
            return Err(cur.field_err(
                flag_start,
                ParseErrorKind::BadCode {
                    field: "chargeoff_flag",
                    value: flag_raw.to_string(),
                },
            ))
        }
    };
    Ok(PerformanceLine {
        month,
        dpd_bucket,
        charged_off,
    })
}

/// Parse one customer block. Total on arbitrary input: every malformed block
/// yields exactly one structured error.
pub fn parse_customer(text: &str) -> Result<CustomerFile, ParseError> {
    let mut line_no = 0usize;
    let mut offset = 0usize;
    let mut header: Option<(String, NaiveDate)> = None;
    let mut records = Vec::new();
    let mut saw_trailer = false;

    for line in text.split('\n') {
        // A final empty element after the terminating newline is not a line.
        if offset == text.len() && line.is_empty() {
            break;
        }
        line_no += 1;
        let line_start = offset;
        offset += line.len() + 1; // account for the consumed '\n'

        if saw_trailer {
            return Err(ParseError {
                kind: ParseErrorKind::TrailingContent,
                line: line_no,
                offset: line_start,
            });
        }
        if !line.is_ascii() {
            return Err(ParseError {
                kind: ParseErrorKind::BadField {
                    field: "line",
                    value: line.chars().take(8).collect(),
                },
                line: line_no,
                offset: line_start,
            });
        }

        let tag = if line.len() >= 4 { &line[..4] } else { line };
        let (expected_width, tag_name) = match tag {
            "CUST" => (CUST_WIDTH, "CUST"),
            "TR01" => (TR_WIDTH, "TR01"),
            "IN01" => (IN_WIDTH, "IN01"),
            "CL01" => (CL_WIDTH, "CL01"),
            "PF01" => (PF_WIDTH, "PF01"),
            "END0" => (END_WIDTH, "END0"),
            _ => {
                return Err(ParseError {
                    kind: ParseErrorKind::UnknownTag {
                        tag: tag.to_string(),
                    },
                    line: line_no,
                    offset: line_start,
                })
            }
        };
        if line.len() != expected_width {
            return Err(ParseError {
                kind: ParseErrorKind::WidthMismatch {
                    tag: tag_name,
                    expected: expected_width,
                    found: line.len(),
                },
                line: line_no,
                offset: line_start,
            });
        }

        let mut cur = LineCursor::new(line, line_no, line_start);
        cur.take(4); // tag

        match tag_name {
            "CUST" => {
                if header.is_some() {
                    return Err(cur.err(ParseErrorKind::DuplicateHeader));
                }
                let id = cur.alnum("customer_id", CUSTOMER_ID_LEN)?.to_string();
                let run_date = cur.date("run_date")?;
                header = Some((id, run_date));
            }
            "END0" => {
                if header.is_none() {
                    return Err(ParseError {
                        kind: ParseErrorKind::MissingHeader,
                        line: line_no,
                        offset: line_start,
                    });
                }
                saw_trailer = true;
            }
            _ => {
                let (_, run_date) = header.as_ref().ok_or(ParseError {
                    kind: ParseErrorKind::MissingHeader,
                    line: line_no,
                    offset: line_start,
                })?;
                let record = match tag_name {
                    "TR01" => {
                        let t = parse_trade(&mut cur)?;
                        if t.open_date > *run_date {
                            return Err(cur.field_err(
                                4 + ACCOUNT_ID_LEN + 2,
                                ParseErrorKind::DateOutOfRange { field: "open_date" },
                            ));
                        }
                        RecordLine::Trade(t)
                    }
                    "IN01" => {
                        let i = parse_inquiry(&mut cur)?;
                        if i.inquiry_date > *run_date {
                            return Err(cur.field_err(
                                4 + PARTY_ID_LEN,
                                ParseErrorKind::DateOutOfRange {
                                    field: "inquiry_date",
                                },
                            ));
                        }
                        RecordLine::Inquiry(i)
                    }
                    "CL01" => {
                        let c = parse_collection(&mut cur)?;
                        if c.assign_date > *run_date {
                            return Err(cur.field_err(
                                4 + PARTY_ID_LEN,
                                ParseErrorKind::DateOutOfRange {
                                    field: "assign_date",
                                },
                            ));
                        }
                        RecordLine::Collection(c)
                    }
                    "PF01" => {
                        let p = parse_performance(&mut cur)?;
                        if p.month <= Month::of_date(*run_date) {
                            return Err(cur.field_err(
                                4,
                                ParseErrorKind::DateOutOfRange { field: "month" },
                            ));
                        }
                        RecordLine::Performance(p)
                    }
                    _ => unreachable!(),
                };
                records.push(record);
            }
        }
    }

    let (customer_id, run_date) = header.ok_or(ParseError {
        kind: ParseErrorKind::MissingHeader,
        line: 1,
        offset: 0,
    })?;
    if !saw_trailer {
        return Err(ParseError {
            kind: ParseErrorKind::MissingTrailer,
            line: line_no + 1,
            offset: text.len(),
        });
    }
    Ok(CustomerFile {
        customer_id,
        run_date,
        records,
    })
}

fn fixed_alnum(field: &'static str, value: &str, width: usize) -> Result<String, SerializeError> {
    if value.len() != width || !is_alnum(value) {
        return Err(SerializeError::InvariantViolation {
            field,
            value: value.to_string(),
            width,
        });
    }
    Ok(value.to_string())
}

fn fixed_amount(field: &'static str, value: u64) -> Result<String, SerializeError> {
    let s = format!("{value:010}");
    if s.len() != 10 {
        return Err(SerializeError::InvariantViolation {
            field,
            value: value.to_string(),
            width: 10,
        });
    }
    Ok(s)
}

fn date_str(d: NaiveDate) -> String {
    d.format("%Y%m%d").to_string()
}

/// Render a customer back into LNB text. `serialize_customer(parse_customer(x))`
/// is byte-identical to `x` for every valid block.
pub fn serialize_customer(cf: &CustomerFile) -> Result<String, SerializeError> {
    let mut out = String::new();
    out.push_str("CUST");
    out.push_str(&fixed_alnum("customer_id", &cf.customer_id, CUSTOMER_ID_LEN)?);
    out.push_str(&date_str(cf.run_date));
    out.push('\n');
    for record in &cf.records {
        match record {
            RecordLine::Trade(t) => {
                if t.pay_history.len() != PAY_HISTORY_LEN
                    || !t.pay_history.chars().all(|c| PAY_HISTORY_CODES.contains(&c))
                {
                    return Err(SerializeError::InvariantViolation {
                        field: "pay_history",
                        value: t.pay_history.clone(),
                        width: PAY_HISTORY_LEN,
                    });
                }
                out.push_str("TR01");
                out.push_str(&fixed_alnum("account_id", &t.account_id, ACCOUNT_ID_LEN)?);
                out.push_str(t.trade_type.code());
                out.push_str(&date_str(t.open_date));
                out.push_str(t.status.code());
                out.push_str(&fixed_amount("balance", t.balance_cents)?);
                out.push_str(&fixed_amount("limit", t.limit_cents)?);
                out.push_str(&t.pay_history);
            }
            RecordLine::Inquiry(i) => {
                out.push_str("IN01");
                out.push_str(&fixed_alnum("inquirer", &i.inquirer, PARTY_ID_LEN)?);
                out.push_str(&date_str(i.inquiry_date));
                out.push_str(i.purpose.code());
            }
            RecordLine::Collection(c) => {
                out.push_str("CL01");
                out.push_str(&fixed_alnum("agency", &c.agency, PARTY_ID_LEN)?);
                out.push_str(&date_str(c.assign_date));
                out.push_str(&fixed_amount("amount", c.amount_cents)?);
                out.push(c.status.code());
            }
            RecordLine::Performance(p) => {
                out.push_str("PF01");
                out.push_str(&p.month.to_yyyymm());
                out.push(char::from(b'0' + p.dpd_bucket.min(3)));
                out.push(if p.charged_off { 'Y' } else { 'N' });
            }
        }
        out.push('\n');
    }
    out.push_str("END0\n");
    Ok(out)
}

/// Group a customer's records into the three segments, preserving file order.
/// Performance lines are excluded; they feed labeling only.
pub fn segment_customer(cf: &CustomerFile) -> BTreeMap<SegmentType, Segment> {
    let mut map: BTreeMap<SegmentType, Segment> = SegmentType::ALL
        .iter()
        .map(|&s| {
            (
                s,
                Segment {
                    segment_type: s,
                    entries: Vec::new(),
                },
            )
        })
        .collect();
    for record in &cf.records {
        if let Some(seg) = record.segment_type() {
            map.get_mut(&seg).unwrap().entries.push(record.clone());
        }
    }
    map
}
