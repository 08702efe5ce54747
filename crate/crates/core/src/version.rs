//! Release version triples and their extraction from response header text.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Expression used to find PHP versions in `X-Powered-By` style headers.
///
/// Major and minor are single digits; the maintenance number may be any
/// length. Strings such as `PHP/3.100` therefore never match.
pub const DEFAULT_PATTERN: &str = r"PHP/[0-9]{1}\.[0-9]{1}\.[0-9]{1,}";

/// A `major.minor.maintenance` release number.
///
/// Equality, hashing and ordering only look at the three numbers; `raw`
/// keeps the substring the version was read from.
#[derive(Debug, Clone)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub maintenance: u64,
    pub raw: String,
}

impl Version {
    pub fn new(major: u64, minor: u64, maintenance: u64) -> Self {
        Version {
            major,
            minor,
            maintenance,
            raw: format!("{major}.{minor}.{maintenance}"),
        }
    }

    fn key(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.maintenance)
    }
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Version {}

impl Hash for Version {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.maintenance)
    }
}

impl FromStr for Version {
    type Err = Error;

    /// Parses the canonical `major.minor.maintenance` form.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidVersion(s.to_string());
        let mut parts = s.trim().split('.');
        let mut next = || -> Result<u64> {
            parts
                .next()
                .filter(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|p| p.parse().ok())
                .ok_or_else(bad)
        };
        let (major, minor, maintenance) = (next()?, next()?, next()?);
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Version {
            major,
            minor,
            maintenance,
            raw: s.trim().to_string(),
        })
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lexicographic comparison on (major, minor, maintenance).
pub fn compare(a: &Version, b: &Version) -> Ordering {
    a.cmp(b)
}

/// Which component decreased when moving from one version to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DowngradeKind {
    MajorDown,
    MinorDown,
    MaintenanceDown,
    None,
}

impl DowngradeKind {
    pub fn is_downgrade(self) -> bool {
        self != DowngradeKind::None
    }
}

pub fn classify_transition(from: &Version, to: &Version) -> DowngradeKind {
    if to.major < from.major {
        DowngradeKind::MajorDown
    } else if to.major == from.major && to.minor < from.minor {
        DowngradeKind::MinorDown
    } else if to.major == from.major && to.minor == from.minor && to.maintenance < from.maintenance
    {
        DowngradeKind::MaintenanceDown
    } else {
        DowngradeKind::None
    }
}

/// A compiled version-matching expression.
///
/// If the expression has at least three capture groups (or groups named
/// `major`, `minor` and `maintenance`), those supply the numbers. Otherwise
/// the first three digit runs inside the match are used.
#[derive(Debug, Clone)]
pub struct VersionPattern {
    source: String,
    regex: Regex,
    groups: Option<[usize; 3]>,
}

impl VersionPattern {
    pub fn new(pattern: &str) -> Result<Self> {
        Self::with_case(pattern, false)
    }

    pub fn with_case(pattern: &str, ignore_case: bool) -> Result<Self> {
        let regex = RegexBuilder::new(pattern)
            .case_insensitive(ignore_case)
            .build()
            .map_err(|e| Error::InvalidPattern {
                pattern: pattern.to_string(),
                reason: e.to_string(),
            })?;
        let named = ["major", "minor", "maintenance"]
            .map(|name| regex.capture_names().position(|n| n == Some(name)));
        let groups = match named {
            [Some(a), Some(b), Some(c)] => Some([a, b, c]),
            _ if regex.captures_len() > 3 => Some([1, 2, 3]),
            _ => None,
        };
        Ok(VersionPattern {
            source: pattern.to_string(),
            regex,
            groups,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// Version from the first match in `text`, if any.
    pub fn extract(&self, text: &str) -> Option<Version> {
        let caps = self.regex.captures(text)?;
        let whole = caps.get(0)?;
        let numbers = match self.groups {
            Some(idx) => {
                let mut out = [0u64; 3];
                for (slot, i) in out.iter_mut().zip(idx) {
                    *slot = caps.get(i)?.as_str().parse().ok()?;
                }
                out
            }
            None => digit_runs(whole.as_str())?,
        };
        Some(Version {
            major: numbers[0],
            minor: numbers[1],
            maintenance: numbers[2],
            raw: whole.as_str().to_string(),
        })
    }
}

impl Default for VersionPattern {
    fn default() -> Self {
        VersionPattern::new(DEFAULT_PATTERN).expect("default pattern compiles")
    }
}

fn digit_runs(s: &str) -> Option<[u64; 3]> {
    let mut out = [0u64; 3];
    let mut runs = s
        .split(|c: char| !c.is_ascii_digit())
        .filter(|r| !r.is_empty());
    for slot in out.iter_mut() {
        *slot = runs.next()?.parse().ok()?;
    }
    Some(out)
}

/// Compiles `pattern` and extracts from `header_text` in one step.
pub fn extract_version(header_text: &str, pattern: &str) -> Result<Option<Version>> {
    Ok(VersionPattern::new(pattern)?.extract(header_text))
}
