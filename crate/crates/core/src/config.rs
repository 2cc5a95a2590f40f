//! Policy configuration and the `key = value` config-file syntax.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One column of the ablation: which sub-catalog and which mixer are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    NoAug,
    SNPol,
    RA,
    RAPlusSpeckle,
    RAPlusDeform,
    ExtRA,
    LinearMixRA,
    NonlinearMixRA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixerKind {
    None,
    Linear,
    NonLinear,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::NoAug,
        Variant::SNPol,
        Variant::RA,
        Variant::RAPlusSpeckle,
        Variant::RAPlusDeform,
        Variant::ExtRA,
        Variant::LinearMixRA,
        Variant::NonlinearMixRA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NoAug => "NoAug",
            Variant::SNPol => "SNPol",
            Variant::RA => "RA",
            Variant::RAPlusSpeckle => "RAPlusSpeckle",
            Variant::RAPlusDeform => "RAPlusDeform",
            Variant::ExtRA => "ExtRA",
            Variant::LinearMixRA => "LinearMixRA",
            Variant::NonlinearMixRA => "NonlinearMixRA",
        }
    }

    pub fn mixer(self) -> MixerKind {
        match self {
            Variant::LinearMixRA => MixerKind::Linear,
            Variant::NonlinearMixRA => MixerKind::NonLinear,
            _ => MixerKind::None,
        }
    }

    pub fn mixes(self) -> bool {
        self.mixer() != MixerKind::None
    }

    /// Whether the policy depends on `(m, n)` at all.
    pub fn uses_grid(self) -> bool {
        !matches!(self, Variant::NoAug | Variant::SNPol)
    }

    /// RandAugment-family policies carry random horizontal and vertical flips.
    pub fn baseline_flips(self) -> bool {
        self.uses_grid()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// A complete augmentation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub m: u8,
    pub n: u8,
    pub variant: Variant,
    pub seed: u64,
}

pub const MAX_MAGNITUDE: u8 = 10;
pub const MAX_TRANSFORMS: u8 = 10;

impl PolicyConfig {
    pub fn new(variant: Variant, m: u8, n: u8, seed: u64) -> Result<Self> {
        validate_magnitude(m as i64)?;
        if n > MAX_TRANSFORMS {
            return Err(Error::Config(format!("n = {n} outside 0..={MAX_TRANSFORMS}")));
        }
        Ok(Self { m, n, variant, seed })
    }

    /// The un-augmented policy.
    pub fn no_aug(seed: u64) -> Self {
        Self { m: 1, n: 0, variant: Variant::NoAug, seed }
    }

    /// Parse `variant`, `m`, `n` and `seed` lines. Unknown keys are errors;
    /// `m` and `variant` are required.
    pub fn parse(text: &str) -> Result<Self> {
        let mut variant = None;
        let mut m = None;
        let mut n = 0u8;
        let mut seed = 0u64;
        for (line, key, value) in parse_kv(text)? {
            match key.as_str() {
                "variant" => variant = Some(value.parse()?),
                "m" => m = Some(parse_num::<u8>(&key, &value, line)?),
                "n" => n = parse_num(&key, &value, line)?,
                "seed" => seed = parse_num(&key, &value, line)?,
                other => return Err(Error::Config(format!("line {line}: unknown key {other:?}"))),
            }
        }
        let variant = variant.ok_or_else(|| Error::Config("missing key \"variant\"".into()))?;
        let m = m.ok_or_else(|| Error::Config("missing key \"m\"".into()))?;
        Self::new(variant, m, n, seed)
    }

    pub fn to_config_string(&self) -> String {
        format!("variant = {}\nm = {}\nn = {}\nseed = {}\n", self.variant, self.m, self.n, self.seed)
    }
}

pub(crate) fn validate_magnitude(m: i64) -> Result<()> {
    if (1..=MAX_MAGNITUDE as i64).contains(&m) {
        Ok(())
    } else {
        Err(Error::MagnitudeOutOfRange(m))
    }
}

/// Split `key = value` lines. Blank lines and `#` comments are skipped.
/// Returns `(line number, key, value)` triples; repeated keys are errors.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`, got {content:?}")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {line}: empty key")));
        }
        if out.iter().any(|(_, k, _)| *k == key) {
            return Err(Error::Config(format!("line {line}: duplicate key {key:?}")));
        }
        out.push((line, key, value.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: {key} = {value:?} is not a valid number")))
}
