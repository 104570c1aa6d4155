//! Big Five trait vocabulary, label normalization and tertile bucketing.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraitModelError {
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("zero variance; cannot normalize")]
    DegenerateDistribution,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("unknown trait {0:?}")]
    UnknownTrait(String),
    #[error("unknown level {0:?}")]
    UnknownLevel(String),
    #[error("label for {trait_name} is {value}, expected a value in [0, 1]")]
    LabelOutOfRange { trait_name: Trait, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl Trait {
    pub const ALL: [Trait; 5] = [
        Trait::Openness,
        Trait::Conscientiousness,
        Trait::Extraversion,
        Trait::Agreeableness,
        Trait::Neuroticism,
    ];

    /// Serialized lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            Trait::Openness => "openness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Extraversion => "extraversion",
            Trait::Agreeableness => "agreeableness",
            Trait::Neuroticism => "neuroticism",
        }
    }

    /// Capitalized name as it appears in prompts.
    pub fn title(self) -> &'static str {
        match self {
            Trait::Openness => "Openness",
            Trait::Conscientiousness => "Conscientiousness",
            Trait::Extraversion => "Extraversion",
            Trait::Agreeableness => "Agreeableness",
            Trait::Neuroticism => "Neuroticism",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// One-letter code, OCEAN order.
    pub fn code(self) -> char {
        self.title().as_bytes()[0] as char
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Trait {
    type Err = TraitModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Trait::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TraitModelError::UnknownTrait(s.into()))
    }
}

/// Generation target level. There is deliberately no `Mid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    High,
    Low,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::High, Level::Low];

    pub fn name(self) -> &'static str {
        match self {
            Level::High => "high",
            Level::Low => "low",
        }
    }

    pub fn opposite(self) -> Level {
        match self {
            Level::High => Level::Low,
            Level::Low => Level::High,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = TraitModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Level::High),
            "low" => Ok(Level::Low),
            _ => Err(TraitModelError::UnknownLevel(s.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TraitSpec {
    #[serde(rename = "trait")]
    pub trait_name: Trait,
    pub level: Level,
}

impl TraitSpec {
    pub fn new(trait_name: Trait, level: Level) -> Self {
        Self { trait_name, level }
    }

    pub fn opposite(self) -> Self {
        Self { level: self.level.opposite(), ..self }
    }

    /// All ten (trait, level) targets.
    pub fn all() -> impl Iterator<Item = TraitSpec> {
        Trait::ALL.into_iter().flat_map(|t| Level::BOTH.into_iter().map(move |l| TraitSpec::new(t, l)))
    }
}

impl fmt::Display for TraitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.trait_name, self.level)
    }
}

/// One real value per trait, indexed by [`Trait`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraitValues(pub [f64; 5]);

impl TraitValues {
    pub fn splat(v: f64) -> Self {
        Self([v; 5])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Trait, f64)> + '_ {
        Trait::ALL.into_iter().zip(self.0.iter().copied())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.map(f))
    }
}

impl Index<Trait> for TraitValues {
    type Output = f64;
    fn index(&self, t: Trait) -> &f64 {
        &self.0[t.index()]
    }
}

impl IndexMut<Trait> for TraitValues {
    fn index_mut(&mut self, t: Trait) -> &mut f64 {
        &mut self.0[t.index()]
    }
}

/// Per-trait scores in `[0, 1]`.
pub type ContinuousLabels = TraitValues;

/// Rejects labels outside `[0, 1]`.
pub fn check_labels(labels: &ContinuousLabels) -> Result<(), TraitModelError> {
    for (t, v) in labels.iter() {
        if !(0.0..=1.0).contains(&v) {
            return Err(TraitModelError::LabelOutOfRange { trait_name: t, value: v });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TertileThresholds {
    pub t_lo: f64,
    pub t_hi: f64,
}

impl TertileThresholds {
    pub fn bucket(&self, x: f64) -> Bucket {
        if x <= self.t_lo {
            Bucket::Low
        } else if x > self.t_hi {
            Bucket::High
        } else {
            Bucket::Mid
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Low,
    Mid,
    High,
}

impl Bucket {
    /// Extreme buckets map to generation levels; `Mid` has none.
    pub fn level(self) -> Option<Level> {
        match self {
            Bucket::Low => Some(Level::Low),
            Bucket::Mid => None,
            Bucket::High => Some(Level::High),
        }
    }
}

fn check_finite(values: &[f64]) -> Result<(), TraitModelError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(TraitModelError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Zero mean, unit population standard deviation.
pub fn zscore_normalize(values: &[f64]) -> Result<Vec<f64>, TraitModelError> {
    if values.len() < 2 {
        return Err(TraitModelError::TooFewValues { needed: 2, got: values.len() });
    }
    check_finite(values)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(TraitModelError::DegenerateDistribution);
    }
    let sd = libm::sqrt(var);
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Nearest-rank tertile thresholds: `t_lo` is the smallest value with at
/// least ceil(n/3) values at or below it, `t_hi` likewise for ceil(2n/3).
pub fn tertile_thresholds(values: &[f64]) -> Result<TertileThresholds, TraitModelError> {
    if values.len() < 3 {
        return Err(TraitModelError::TooFewValues { needed: 3, got: values.len() });
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k_lo = n.div_ceil(3);
    let k_hi = (2 * n).div_ceil(3);
    Ok(TertileThresholds { t_lo: sorted[k_lo - 1], t_hi: sorted[k_hi - 1] })
}

/// Thresholds plus the bucket of each input value, in input order.
pub fn tertile_split(values: &[f64]) -> Result<(TertileThresholds, Vec<Bucket>), TraitModelError> {
    let th = tertile_thresholds(values)?;
    Ok((th, values.iter().map(|&v| th.bucket(v)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zscore_examples() {
        let z = zscore_normalize(&[1.0, 2.0, 3.0]).unwrap();
        // population sd sqrt(2/3): (x - 2) / 0.816496580927726
        let expected = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in z.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(zscore_normalize(&[5.0, 5.0, 5.0]), Err(TraitModelError::DegenerateDistribution));
        assert_eq!(zscore_normalize(&[]), Err(TraitModelError::TooFewValues { needed: 2, got: 0 }));
    }

    #[test]
    fn tertile_examples() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        let (th, b) = tertile_split(&v).unwrap();
        assert_eq!((th.t_lo, th.t_hi), (3.0, 6.0));
        use Bucket::*;
        assert_eq!(b, vec![Low, Low, Low, Mid, Mid, Mid, High, High, High]);

        let (th, b) = tertile_split(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!((th.t_lo, th.t_hi), (2.0, 4.0));
        assert_eq!(b, vec![Low, Low, Mid, Mid, High, High]);

        // ties collapse into the lower bucket
        let (th, b) = tertile_split(&[7.0, 7.0, 7.0, 7.0, 7.0, 1.0]).unwrap();
        assert_eq!((th.t_lo, th.t_hi), (7.0, 7.0));
        assert_eq!(b, vec![Low; 6]);

        assert!(matches!(tertile_split(&[1.0, 2.0]), Err(TraitModelError::TooFewValues { .. })));
    }

    #[test]
    fn names_round_trip() {
        for t in Trait::ALL {
            assert_eq!(t.name().parse::<Trait>().unwrap(), t);
        }
        assert_eq!("LOW".parse::<Level>().unwrap(), Level::Low);
        assert!("mid".parse::<Level>().is_err());
        assert_eq!(Trait::ALL.map(Trait::code), ['O', 'C', 'E', 'A', 'N']);
        assert_eq!(TraitSpec::all().count(), 10);
    }
}
