use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Every series in the library is released under this license.
pub const LICENSE: &str = "CC0";
pub const CATEGORY_ROOTS: [&str; 2] = ["synthetic", "real-world"];
pub const MAX_CATEGORY_DEPTH: usize = 4;

/// Hierarchical category such as `synthetic/map/logistic`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryPath(Vec<String>);

impl CategoryPath {
    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn root(&self) -> &str {
        &self.0[0]
    }

    /// Segment-wise prefix test: `synthetic/map` is a prefix of
    /// `synthetic/map/logistic` but not of `synthetic/mapping`.
    pub fn starts_with(&self, prefix: &CategoryPath) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Same as [`starts_with`](Self::starts_with) for a raw `a/b` prefix,
    /// which need not itself be a valid category.
    pub fn has_prefix(&self, prefix: &str) -> bool {
        let parts: Vec<&str> = prefix.trim().trim_matches('/').split('/').map(str::trim).collect();
        if parts == [""] {
            return true;
        }
        parts.len() <= self.0.len() && parts.iter().zip(&self.0).all(|(p, s)| p == s)
    }
}

impl FromStr for CategoryPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let segments: Vec<String> = s.trim().split('/').map(|p| p.trim().to_string()).collect();
        if segments.iter().any(String::is_empty) {
            return Err("category segments must be non-empty".into());
        }
        if segments.len() > MAX_CATEGORY_DEPTH {
            return Err(format!("category depth must be at most {MAX_CATEGORY_DEPTH}"));
        }
        if !CATEGORY_ROOTS.contains(&segments[0].as_str()) {
            return Err(format!("category must start with one of {}", CATEGORY_ROOTS.join(", ")));
        }
        Ok(CategoryPath(segments))
    }
}

impl fmt::Display for CategoryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

impl fmt::Debug for CategoryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CategoryPath({self})")
    }
}

impl Serialize for CategoryPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CategoryPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Positive rate with a free-form unit, written `8000 Hz` or `1 samples/day`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRate {
    pub value: f64,
    pub unit: String,
}

impl FromStr for SamplingRate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let split = s.find(|c: char| c.is_whitespace()).ok_or("expected a number followed by a unit")?;
        let (num, unit) = s.split_at(split);
        let value: f64 = num.parse().map_err(|_| format!("`{num}` is not a number"))?;
        if !(value.is_finite() && value > 0.0) {
            return Err("sampling rate must be positive".into());
        }
        Ok(SamplingRate { value, unit: unit.trim().to_string() })
    }
}

impl fmt::Display for SamplingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub sampling_rate: SamplingRate,
    pub description: String,
    pub source: String,
    pub category: CategoryPath,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub contact_email: Option<String>,
    #[serde(default)]
    pub opt_in_alerts: bool,
}

impl Metadata {
    /// Re-check a structured record with the same rules as [`MetadataDraft::validate`].
    pub fn check(&self) -> Result<(), ValidationError> {
        self.to_draft().validate().map(|_| ())
    }

    pub fn to_draft(&self) -> MetadataDraft {
        MetadataDraft {
            name: Some(self.name.clone()),
            sampling_rate: Some(self.sampling_rate.to_string()),
            description: Some(self.description.clone()),
            source: Some(self.source.clone()),
            category: Some(self.category.to_string()),
            tags: Some(self.tags.iter().cloned().collect::<Vec<_>>().join(";")),
            contact_email: self.contact_email.clone(),
            opt_in_alerts: Some(self.opt_in_alerts.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Every missing or malformed metadata field, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("invalid metadata: {}", .fields.iter().map(|f| format!("{} ({})", f.field, f.message)).collect::<Vec<_>>().join(", "))]
pub struct ValidationError {
    pub fields: Vec<FieldError>,
}

impl ValidationError {
    pub fn field_names(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.field.as_str()).collect()
    }
}

/// Metadata as submitted by a form or manifest row, all fields textual.
/// Blank values count as absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetadataDraft {
    pub name: Option<String>,
    pub sampling_rate: Option<String>,
    pub description: Option<String>,
    pub source: Option<String>,
    pub category: Option<String>,
    /// Separated by `;` or `,`.
    pub tags: Option<String>,
    pub contact_email: Option<String>,
    pub opt_in_alerts: Option<String>,
}

fn present(v: &Option<String>) -> Option<&str> {
    v.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn valid_email(s: &str) -> bool {
    let mut parts = s.split('@');
    matches!((parts.next(), parts.next(), parts.next()), (Some(a), Some(b), None) if !a.is_empty() && b.contains('.') && !b.starts_with('.') && !b.ends_with('.'))
        && !s.chars().any(char::is_whitespace)
}

impl MetadataDraft {
    /// Set a field by its schema name; unknown names are ignored and reported as `false`.
    pub fn set(&mut self, field: &str, value: String) -> bool {
        let slot = match field {
            "name" => &mut self.name,
            "sampling_rate" => &mut self.sampling_rate,
            "description" => &mut self.description,
            "source" => &mut self.source,
            "category" => &mut self.category,
            "tags" => &mut self.tags,
            "contact_email" => &mut self.contact_email,
            "opt_in_alerts" => &mut self.opt_in_alerts,
            _ => return false,
        };
        *slot = Some(value);
        true
    }

    /// No field carries a value.
    pub fn is_empty(&self) -> bool {
        [
            &self.name,
            &self.sampling_rate,
            &self.description,
            &self.source,
            &self.category,
            &self.tags,
            &self.contact_email,
            &self.opt_in_alerts,
        ]
        .into_iter()
        .all(|f| present(f).is_none())
    }

    pub fn validate(&self) -> Result<Metadata, ValidationError> {
        let mut errors = Vec::new();
        let mut fail = |field: &str, message: String| {
            errors.push(FieldError { field: field.into(), message });
        };
        let required = "required".to_string();

        let name = present(&self.name);
        if name.is_none() {
            fail("name", required.clone());
        }
        let sampling_rate = match present(&self.sampling_rate).map(str::parse::<SamplingRate>) {
            None => {
                fail("sampling_rate", required.clone());
                None
            }
            Some(Err(e)) => {
                fail("sampling_rate", e);
                None
            }
            Some(Ok(r)) => Some(r),
        };
        let description = present(&self.description);
        if description.is_none() {
            fail("description", required.clone());
        }
        let source = present(&self.source);
        if source.is_none() {
            fail("source", required.clone());
        }
        let category = match present(&self.category).map(str::parse::<CategoryPath>) {
            None => {
                fail("category", required.clone());
                None
            }
            Some(Err(e)) => {
                fail("category", e);
                None
            }
            Some(Ok(c)) => Some(c),
        };
        let tags: BTreeSet<String> = present(&self.tags)
            .map(|t| t.split([';', ',']).map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default();
        let contact_email = present(&self.contact_email).map(str::to_string);
        if let Some(e) = &contact_email {
            if !valid_email(e) {
                fail("contact_email", "not an email address".into());
            }
        }
        let opt_in_alerts = match present(&self.opt_in_alerts) {
            None => false,
            Some(s) => parse_bool(s).unwrap_or_else(|| {
                fail("opt_in_alerts", format!("`{s}` is not a boolean"));
                false
            }),
        };
        if opt_in_alerts && contact_email.is_none() {
            fail("contact_email", "required when opting in to alerts".into());
        }

        if !errors.is_empty() {
            return Err(ValidationError { fields: errors });
        }
        Ok(Metadata {
            name: name.unwrap().to_string(),
            sampling_rate: sampling_rate.unwrap(),
            description: description.unwrap().to_string(),
            source: source.unwrap().to_string(),
            category: category.unwrap(),
            tags,
            contact_email,
            opt_in_alerts,
        })
    }
}
