//! Personal attributes and their 88-byte two-line machine-readable-zone
//! encoding (TD3 layout).
//!
//! Absolute offsets inside [`DataGroup1`]:
//!
//! | bytes  | field                |
//! |--------|----------------------|
//! | 0..2   | document code `P<`   |
//! | 2..5   | issuing state        |
//! | 5..44  | name                 |
//! | 44..53 | document number      |
//! | 53     | check digit          |
//! | 54..57 | nationality          |
//! | 57..63 | birth date (YYMMDD)  |
//! | 63     | check digit          |
//! | 64     | sex                  |
//! | 65..71 | expiry date (YYMMDD) |
//! | 71     | check digit          |
//! | 72..86 | personal number      |
//! | 86     | check digit          |
//! | 87     | composite check      |

use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::EidError;

pub const DG1_LEN: usize = 88;
pub const NAME_LEN: usize = 39;
pub const DOCUMENT_NUMBER_LEN: usize = 9;
pub const PERSONAL_NUMBER_LEN: usize = 14;

pub const DOCUMENT_NUMBER_OFFSET: usize = 44;
pub const BIRTH_DATE_OFFSET: usize = 57;
pub const EXPIRY_DATE_OFFSET: usize = 65;
pub const PERSONAL_NUMBER_OFFSET: usize = 72;

/// Personal data of a document holder plus the two document-specific
/// numbers. Issuance overwrites the numbers with fresh random values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attributes {
    pub name: String,
    /// YYMMDD
    pub birth_date: String,
    /// YYMMDD
    pub expiry_date: String,
    pub nationality: String,
    pub sex: String,
    pub document_number: String,
    pub personal_number: String,
}

impl Attributes {
    /// Attributes with placeholder document numbers; issuance fills them in.
    pub fn new(name: &str, birth_date: &str, expiry_date: &str, nationality: &str, sex: &str) -> Self {
        Attributes {
            name: name.to_owned(),
            birth_date: birth_date.to_owned(),
            expiry_date: expiry_date.to_owned(),
            nationality: nationality.to_owned(),
            sex: sex.to_owned(),
            document_number: "<".repeat(DOCUMENT_NUMBER_LEN),
            personal_number: "<".repeat(PERSONAL_NUMBER_LEN),
        }
    }

    pub fn validate(&self) -> Result<(), EidError> {
        let bad = |what: &str| Err(EidError::BadAttributes(what.to_owned()));
        parse_yymmdd(&self.birth_date).ok_or_else(|| EidError::BadAttributes("birth_date".into()))?;
        parse_yymmdd(&self.expiry_date).ok_or_else(|| EidError::BadAttributes("expiry_date".into()))?;
        if self.nationality.len() != 3 || !self.nationality.bytes().all(|b| b.is_ascii_uppercase() || b == b'<') {
            return bad("nationality");
        }
        if self.sex.len() != 1 || !self.sex.bytes().all(is_mrz_char) {
            return bad("sex");
        }
        if self.name.is_empty() || !self.name.bytes().all(|b| b.is_ascii_uppercase() || b == b' ' || b == b'<') {
            return bad("name");
        }
        if self.document_number.len() != DOCUMENT_NUMBER_LEN || !self.document_number.bytes().all(is_mrz_char) {
            return bad("document_number");
        }
        if self.personal_number.len() != PERSONAL_NUMBER_LEN || !self.personal_number.bytes().all(is_mrz_char) {
            return bad("personal_number");
        }
        Ok(())
    }

    /// Full birth year under the century pivot relative to `reference`.
    pub fn birth_date_full(&self, reference: Date) -> Option<Date> {
        let (yy, mm, dd) = split_yymmdd(&self.birth_date)?;
        Date::new(full_year(yy, reference.year % 100), mm, dd)
    }
}

fn is_mrz_char(b: u8) -> bool {
    b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'<'
}

fn split_yymmdd(s: &str) -> Option<(u32, u32, u32)> {
    if s.len() != 6 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n = |r: std::ops::Range<usize>| s[r].parse::<u32>().ok();
    Some((n(0..2)?, n(2..4)?, n(4..6)?))
}

/// Checks YYMMDD syntax and calendar validity. Leap years agree between the
/// two candidate centuries except for `00`, which the pivot always maps to
/// 2000, so validity does not depend on the reference date.
pub fn parse_yymmdd(s: &str) -> Option<(u32, u32, u32)> {
    let (yy, mm, dd) = split_yymmdd(s)?;
    NaiveDate::from_ymd_opt(2000 + yy as i32, mm, dd)?;
    Some((yy, mm, dd))
}

/// Century pivot: `yy` maps to `2000 + yy` when it does not exceed the
/// reference year's two digits, otherwise to `1900 + yy`.
pub fn full_year(yy: u32, reference_yy: u32) -> u32 {
    if yy <= reference_yy {
        2000 + yy
    } else {
        1900 + yy
    }
}

/// Calendar date used by policies, written `YYYYMMDD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    pub year: u32,
    pub month: u32,
    pub day: u32,
}

impl Date {
    pub fn new(year: u32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year as i32, month, day)?;
        Some(Date { year, month, day })
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        Date::new(s[0..4].parse().ok()?, s[4..6].parse().ok()?, s[6..8].parse().ok()?)
    }

    pub fn today() -> Self {
        let now = chrono::Utc::now().date_naive();
        Date { year: now.year() as u32, month: now.month(), day: now.day() }
    }

    pub fn as_u32(self) -> u32 {
        self.year * 10_000 + self.month * 100 + self.day
    }

    /// The same calendar day `years` earlier, clamped to the month's end
    /// (29 February maps to 28 February in non-leap years).
    pub fn years_before(self, years: u32) -> Option<Self> {
        let year = self.year.checked_sub(years)?;
        let mut day = self.day;
        while day > 27 {
            if let Some(d) = Date::new(year, self.month, day) {
                return Some(d);
            }
            day -= 1;
        }
        Date::new(year, self.month, day)
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}{:02}{:02}", self.year, self.month, self.day)
    }
}

/// ICAO 7-3-1 check digit.
pub fn check_digit(field: &[u8]) -> u8 {
    const WEIGHTS: [u32; 3] = [7, 3, 1];
    let sum: u32 = field
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let v = match c {
                b'0'..=b'9' => (c - b'0') as u32,
                b'A'..=b'Z' => (c - b'A') as u32 + 10,
                _ => 0,
            };
            v * WEIGHTS[i % 3]
        })
        .sum();
    b'0' + (sum % 10) as u8
}

/// Data group 1: the raw MRZ bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct DataGroup1(pub [u8; DG1_LEN]);

impl DataGroup1 {
    pub fn encode(att: &Attributes) -> Result<Self, EidError> {
        att.validate()?;
        let mut line1 = Vec::with_capacity(44);
        line1.extend_from_slice(b"P<");
        line1.extend_from_slice(att.nationality.as_bytes());
        let mut name: Vec<u8> = att.name.bytes().map(|b| if b == b' ' { b'<' } else { b }).collect();
        name.resize(NAME_LEN, b'<');
        line1.extend_from_slice(&name);

        let mut line2 = Vec::with_capacity(44);
        let push_checked = |line: &mut Vec<u8>, field: &[u8]| {
            line.extend_from_slice(field);
            line.push(check_digit(field));
        };
        push_checked(&mut line2, att.document_number.as_bytes());
        line2.extend_from_slice(att.nationality.as_bytes());
        push_checked(&mut line2, att.birth_date.as_bytes());
        line2.extend_from_slice(att.sex.as_bytes());
        push_checked(&mut line2, att.expiry_date.as_bytes());
        push_checked(&mut line2, att.personal_number.as_bytes());
        let composite: Vec<u8> = [&line2[0..10], &line2[13..20], &line2[21..43]].concat();
        line2.push(check_digit(&composite));

        let mut out = [0u8; DG1_LEN];
        out[..44].copy_from_slice(&line1);
        out[44..].copy_from_slice(&line2);
        Ok(DataGroup1(out))
    }

    pub fn as_bytes(&self) -> &[u8; DG1_LEN] {
        &self.0
    }

    pub fn birth_date(&self) -> &[u8] {
        &self.0[BIRTH_DATE_OFFSET..BIRTH_DATE_OFFSET + 6]
    }

    pub fn document_number(&self) -> &[u8] {
        &self.0[DOCUMENT_NUMBER_OFFSET..DOCUMENT_NUMBER_OFFSET + DOCUMENT_NUMBER_LEN]
    }

    pub fn name_field(&self) -> &[u8] {
        &self.0[5..44]
    }

    pub fn lines(&self) -> (&str, &str) {
        let s = std::str::from_utf8(&self.0).expect("MRZ is ASCII");
        s.split_at(44)
    }
}

impl fmt::Debug for DataGroup1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DataGroup1(<redacted>)")
    }
}
