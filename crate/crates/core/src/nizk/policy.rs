//! Access policies a relying party can request.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::NizkError;
use crate::eid::{parse_yymmdd, Attributes, Date};

pub const MAX_AGE_YEARS: u32 = 150;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Policy {
    /// Holder was born at least `years` years before `ref_date`.
    AgeOver {
        years: u32,
        #[serde(with = "date_str")]
        ref_date: Date,
    },
    /// Accepts every document.
    None,
}

mod date_str {
    use crate::eid::Date;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Date, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&d.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Date, D::Error> {
        let s = String::deserialize(d)?;
        Date::parse(&s).ok_or_else(|| de::Error::custom("ref_date must be a valid YYYYMMDD date"))
    }
}

impl Policy {
    pub fn age_over(years: u32, ref_date: Date) -> Self {
        Policy::AgeOver { years, ref_date }
    }

    /// Parses the JSON form, e.g. `{"kind":"age_over","years":18,"ref_date":"20230101"}`.
    pub fn from_json(s: &str) -> Result<Self, NizkError> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|e| NizkError::BadPolicy(e.to_string()))?;
        match v.get("kind").and_then(|k| k.as_str()) {
            Some("age_over") | Some("none") => {}
            Some(other) => return Err(NizkError::UnsupportedPolicy(format!("unknown kind `{other}`"))),
            None => return Err(NizkError::BadPolicy("missing `kind`".into())),
        }
        let p: Policy = serde_json::from_value(v).map_err(|e| NizkError::BadPolicy(e.to_string()))?;
        p.check()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serialises")
    }

    /// Range checks beyond syntax.
    pub fn check(&self) -> Result<(), NizkError> {
        match self {
            Policy::AgeOver { years, ref_date } => {
                if *years > MAX_AGE_YEARS {
                    return Err(NizkError::UnsupportedPolicy(format!("age_over({years}) exceeds {MAX_AGE_YEARS}")));
                }
                ref_date
                    .years_before(*years)
                    .ok_or_else(|| NizkError::UnsupportedPolicy("reference date too early".into()))?;
                Ok(())
            }
            Policy::None => Ok(()),
        }
    }

    /// Latest birth date satisfying the policy (public circuit constant).
    pub fn latest_birth(&self) -> Option<Date> {
        match self {
            Policy::AgeOver { years, ref_date } => ref_date.years_before(*years),
            Policy::None => None,
        }
    }

    /// Reference evaluation on plaintext attributes, with the same century
    /// pivot as the circuit.
    pub fn satisfied_by(&self, att: &Attributes) -> bool {
        match self {
            Policy::None => true,
            Policy::AgeOver { ref_date, .. } => {
                let Some(latest) = self.latest_birth() else { return false };
                if parse_yymmdd(&att.birth_date).is_none() {
                    return false;
                }
                att.birth_date_full(*ref_date).is_some_and(|b| b <= latest)
            }
        }
    }

    /// Stable byte form used in circuit and CRS digests.
    pub fn canonical(&self) -> Vec<u8> {
        self.to_string().into_bytes()
    }

    /// Inverse of the `Display` form (`none`, `age_over:18:20230101`).
    pub fn from_canonical(s: &str) -> Result<Self, NizkError> {
        let parts: Vec<&str> = s.split(':').collect();
        let p = match parts.as_slice() {
            ["none"] => Policy::None,
            ["age_over", years, date] => Policy::AgeOver {
                years: years.parse().map_err(|_| NizkError::BadPolicy("years".into()))?,
                ref_date: Date::parse(date).ok_or_else(|| NizkError::BadPolicy("ref_date".into()))?,
            },
            _ => return Err(NizkError::UnsupportedPolicy(s.to_owned())),
        };
        p.check()?;
        Ok(p)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::AgeOver { years, ref_date } => write!(f, "age_over:{years}:{ref_date}"),
            Policy::None => f.write_str("none"),
        }
    }
}
