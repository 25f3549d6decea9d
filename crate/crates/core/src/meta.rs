use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quantize::QuantizationSpec;

/// Identifier recorded in the metadata for xxHash32 (seed 0).
pub const HASH_XXH32: u8 = 1;

pub const DEFAULT_NGRAM_MIN: usize = 3;
pub const DEFAULT_NGRAM_MAX: usize = 6;

/// Which optional sections a store carries.
///
/// `Light` stores hold keys and vectors only. `Medium` adds the n-gram
/// postings used for interpolated OOV vectors. `Heavy` adds the
/// random-projection forest for approximate search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    Light,
    Medium,
    Heavy,
}

impl Tier {
    pub fn has_ngrams(self) -> bool {
        self >= Tier::Medium
    }

    pub fn has_ann(self) -> bool {
        self == Tier::Heavy
    }

    pub(crate) fn to_u8(self) -> u8 {
        match self {
            Tier::Light => 0,
            Tier::Medium => 1,
            Tier::Heavy => 2,
        }
    }

    pub(crate) fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Tier::Light),
            1 => Some(Tier::Medium),
            2 => Some(Tier::Heavy),
            _ => None,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Light => "light",
            Tier::Medium => "medium",
            Tier::Heavy => "heavy",
        })
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "light" => Ok(Tier::Light),
            "medium" => Ok(Tier::Medium),
            "heavy" => Ok(Tier::Heavy),
            other => Err(Error::InvalidArgument(format!("unknown tier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreMetadata {
    pub dimension: usize,
    pub key_count: u64,
    pub tier: Tier,
    pub quantization: QuantizationSpec,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub hash_algorithm_id: u8,
    pub format_version: u16,
    /// N-grams present in more than `max(ngram_cap_fraction · key_count,
    /// ngram_cap_floor)` keys have no postings.
    pub ngram_cap_fraction: f64,
    pub ngram_cap_floor: u64,
    pub ngrams_omitted: u64,
}

impl StoreMetadata {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        validate_ngram_range(self.ngram_min, self.ngram_max)
    }
}

pub fn validate_ngram_range(min: usize, max: usize) -> Result<()> {
    if min == 0 || min > max || max > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "invalid n-gram range {min}..={max}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_capabilities() {
        assert!(!Tier::Light.has_ngrams() && !Tier::Light.has_ann());
        assert!(Tier::Medium.has_ngrams() && !Tier::Medium.has_ann());
        assert!(Tier::Heavy.has_ngrams() && Tier::Heavy.has_ann());
        for t in [Tier::Light, Tier::Medium, Tier::Heavy] {
            assert_eq!(Tier::from_u8(t.to_u8()), Some(t));
            assert_eq!(t.to_string().parse::<Tier>().unwrap(), t);
        }
        assert_eq!(Tier::from_u8(9), None);
    }

    #[test]
    fn ngram_range_checked() {
        assert!(validate_ngram_range(3, 6).is_ok());
        assert!(validate_ngram_range(1, 1).is_ok());
        assert!(validate_ngram_range(0, 3).is_err());
        assert!(validate_ngram_range(4, 3).is_err());
    }
}
