//! Trait-conditioned dialogue records and their SFT / DPO exports.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::logits::{SamplerConfig, SamplingMode};
use crate::personality::{Level, Trait, TraitSpec};
use crate::steering::{generate_steered, LogitSource, SteeringError, SteeringPolicy, StopReason};
use crate::text::fnv1a64;

pub const SCHEMA_VERSION: &str = "big5chat/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario_id: String,
    #[serde(default)]
    pub narrative: String,
    pub speaker_x_utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_y_response: Option<String>,
}

impl Scenario {
    /// Prompt handed to the base model: the narrative (if any) followed by
    /// the Speaker X turn.
    pub fn prompt(&self) -> String {
        if self.narrative.trim().is_empty() {
            self.speaker_x_utterance.clone()
        } else {
            format!("{}\n{}", self.narrative.trim(), self.speaker_x_utterance)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub gamma: f64,
    pub seed: u64,
    pub base_model_id: String,
    pub expert_model_id: String,
    pub stop_reason: StopReason,
}

/// One generated dialogue row. Serialized field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub schema_version: String,
    pub scenario_id: String,
    #[serde(rename = "trait")]
    pub trait_name: Trait,
    pub level: Level,
    pub speaker_x: String,
    pub speaker_y: String,
    pub meta: RecordMeta,
}

impl DialogueRecord {
    pub fn trait_spec(&self) -> TraitSpec {
        TraitSpec::new(self.trait_name, self.level)
    }

    /// Sort key used for every emitted dataset.
    pub fn key(&self) -> (&str, Trait, Level) {
        (&self.scenario_id, self.trait_name, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    #[serde(rename = "trait")]
    pub trait_name: Trait,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("scenario {scenario_id} ({level}): generation failed: {source}")]
    Generation { scenario_id: String, level: Level, source: SteeringError },
    #[error("scenario {scenario_id} ({level}): empty response")]
    EmptyResponse { scenario_id: String, level: Level },
    #[error("scenario {scenario_id}: invalid record: {reason}")]
    InvalidRecord { scenario_id: String, reason: &'static str },
    #[error("scenario {scenario_id}, {trait_name}: missing counterpart level")]
    MissingCounterpart { scenario_id: String, trait_name: Trait },
    #[error("scenario {scenario_id}, {trait_name}: duplicate {level} record")]
    DuplicateRecord { scenario_id: String, trait_name: Trait, level: Level },
    #[error("duplicate scenario id {0}")]
    DuplicateScenarioId(String),
}

/// `You are a person with the following Big Five personality trait: {Trait} - {level}.`
pub fn training_instruction(spec: TraitSpec) -> String {
    format!(
        "You are a person with the following Big Five personality trait: {} - {}.",
        spec.trait_name.title(),
        spec.level.name()
    )
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-(scenario, trait) seed. Both levels of a pair share it.
pub fn job_seed(run_seed: u64, scenario_id: &str, trait_name: Trait) -> u64 {
    let mut key = Vec::with_capacity(scenario_id.len() + 1);
    key.extend_from_slice(scenario_id.as_bytes());
    key.push(trait_name as u8);
    splitmix64(run_seed ^ fnv1a64(&key))
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Generates the High and Low responses for one scenario and trait.
///
/// `sampler.seed` is used as-is; callers derive it with [`job_seed`].
#[allow(clippy::too_many_arguments)]
pub fn generate_pairwise<B, H, L>(
    scenario: &Scenario,
    trait_name: Trait,
    base: &B,
    expert_high: &H,
    expert_low: &L,
    policy: &SteeringPolicy,
    sampler: &SamplerConfig,
) -> Result<(DialogueRecord, DialogueRecord), DatasetError>
where
    B: LogitSource + ?Sized,
    H: LogitSource + ?Sized,
    L: LogitSource + ?Sized,
{
    let high = generate_one(scenario, TraitSpec::new(trait_name, Level::High), base, expert_high, policy, sampler)?;
    let low = generate_one(scenario, TraitSpec::new(trait_name, Level::Low), base, expert_low, policy, sampler)?;
    Ok((high, low))
}

fn generate_one<B, E>(
    scenario: &Scenario,
    spec: TraitSpec,
    base: &B,
    expert: &E,
    policy: &SteeringPolicy,
    sampler: &SamplerConfig,
) -> Result<DialogueRecord, DatasetError>
where
    B: LogitSource + ?Sized,
    E: LogitSource + ?Sized,
{
    let result = generate_steered(base, expert, &scenario.prompt(), policy, sampler).map_err(|source| {
        DatasetError::Generation { scenario_id: scenario.scenario_id.clone(), level: spec.level, source }
    })?;
    let speaker_y = result.text.trim();
    if speaker_y.is_empty() {
        return Err(DatasetError::EmptyResponse { scenario_id: scenario.scenario_id.clone(), level: spec.level });
    }
    Ok(DialogueRecord {
        schema_version: SCHEMA_VERSION.into(),
        scenario_id: scenario.scenario_id.clone(),
        trait_name: spec.trait_name,
        level: spec.level,
        speaker_x: scenario.speaker_x_utterance.clone(),
        speaker_y: speaker_y.into(),
        meta: RecordMeta {
            gamma: result.gamma_used,
            seed: result.seed,
            base_model_id: base.model_id().into(),
            expert_model_id: expert.model_id().into(),
            stop_reason: result.stop_reason,
        },
    })
}

impl DatasetError {
    /// True for failures a job-level retry may fix.
    pub fn is_backend_failure(&self) -> bool {
        matches!(self, DatasetError::Generation { source: SteeringError::BackendFailure { .. }, .. })
    }
}

/// [`generate_pairwise`] retried up to `max_retries` times. Backend failures
/// retry with the same seed. Empty responses under temperature sampling retry
/// with a seed derived from the original seed and the attempt number.
#[allow(clippy::too_many_arguments)]
pub fn generate_pairwise_with_retry<B, H, L>(
    scenario: &Scenario,
    trait_name: Trait,
    base: &B,
    expert_high: &H,
    expert_low: &L,
    policy: &SteeringPolicy,
    sampler: &SamplerConfig,
    max_retries: usize,
) -> Result<(DialogueRecord, DialogueRecord), DatasetError>
where
    B: LogitSource + ?Sized,
    H: LogitSource + ?Sized,
    L: LogitSource + ?Sized,
{
    let mut attempt = 0;
    let mut current = *sampler;
    loop {
        match generate_pairwise(scenario, trait_name, base, expert_high, expert_low, policy, &current) {
            Err(e) if e.is_backend_failure() && attempt < max_retries => attempt += 1,
            Err(DatasetError::EmptyResponse { .. })
                if matches!(sampler.mode, SamplingMode::Temperature { .. }) && attempt < max_retries =>
            {
                attempt += 1;
                current = sampler.with_seed(mix_seed(sampler.seed, attempt as u64));
            }
            other => return other,
        }
    }
}

/// Rejects duplicate scenario ids and empty Speaker X turns.
pub fn check_scenarios(scenarios: &[Scenario]) -> Result<(), DatasetError> {
    let mut seen = BTreeSet::new();
    for s in scenarios {
        if !seen.insert(s.scenario_id.as_str()) {
            return Err(DatasetError::DuplicateScenarioId(s.scenario_id.clone()));
        }
        if s.speaker_x_utterance.trim().is_empty() {
            return Err(DatasetError::InvalidRecord { scenario_id: s.scenario_id.clone(), reason: "empty speaker_x_utterance" });
        }
    }
    Ok(())
}

/// Orders records by (scenario_id, trait, level).
pub fn sort_records(records: &mut [DialogueRecord]) {
    records.sort_by(|a, b| a.key().cmp(&b.key()));
}

fn check_record(r: &DialogueRecord) -> Result<(), DatasetError> {
    let invalid = |reason| DatasetError::InvalidRecord { scenario_id: r.scenario_id.clone(), reason };
    if r.speaker_y.trim().is_empty() {
        return Err(invalid("empty speaker_y"));
    }
    if r.speaker_x.trim().is_empty() {
        return Err(invalid("empty speaker_x"));
    }
    if r.meta.gamma.is_nan() || r.meta.gamma < 0.0 {
        return Err(invalid("negative gamma"));
    }
    Ok(())
}

pub fn export_sft(records: &[DialogueRecord]) -> Result<Vec<SftExample>, DatasetError> {
    records
        .iter()
        .map(|r| {
            check_record(r)?;
            Ok(SftExample {
                instruction: training_instruction(r.trait_spec()),
                input: r.speaker_x.clone(),
                output: r.speaker_y.clone(),
            })
        })
        .collect()
}

type PairKey<'a> = (&'a str, Trait);

fn group_pairs(records: &[DialogueRecord]) -> Result<BTreeMap<PairKey<'_>, [Option<&DialogueRecord>; 2]>, DatasetError> {
    let mut groups: BTreeMap<PairKey<'_>, [Option<&DialogueRecord>; 2]> = BTreeMap::new();
    for r in records {
        let slot = &mut groups.entry((r.scenario_id.as_str(), r.trait_name)).or_default()[r.level as usize];
        if slot.is_some() {
            return Err(DatasetError::DuplicateRecord {
                scenario_id: r.scenario_id.clone(),
                trait_name: r.trait_name,
                level: r.level,
            });
        }
        *slot = Some(r);
    }
    Ok(groups)
}

/// One preference pair per (scenario, trait): `chosen` is the response at
/// `target`, `rejected` the one at the opposite level.
pub fn export_dpo(records: &[DialogueRecord], target: Level) -> Result<Vec<PreferencePair>, DatasetError> {
    let mut pairs = Vec::new();
    for ((scenario_id, trait_name), slots) in group_pairs(records)? {
        let (Some(chosen), Some(rejected)) = (slots[target as usize], slots[target.opposite() as usize]) else {
            return Err(DatasetError::MissingCounterpart { scenario_id: scenario_id.into(), trait_name });
        };
        check_record(chosen)?;
        check_record(rejected)?;
        let spec = TraitSpec::new(trait_name, target);
        pairs.push(PreferencePair {
            prompt: format!("{}\n{}", training_instruction(spec), chosen.speaker_x),
            chosen: chosen.speaker_y.clone(),
            rejected: rejected.speaker_y.clone(),
            trait_name,
            level: target,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DuplicateKey { scenario_id: String, #[serde(rename = "trait")] trait_name: Trait, level: Level },
    MissingCounterpart { scenario_id: String, #[serde(rename = "trait")] trait_name: Trait, missing: Level },
    EmptyText { scenario_id: String, #[serde(rename = "trait")] trait_name: Trait, level: Level, field: String },
    ContextMismatch { scenario_id: String, #[serde(rename = "trait")] trait_name: Trait },
    WrongSchema { scenario_id: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub records: usize,
    /// Keyed `"{trait}-{level}"`.
    pub counts: BTreeMap<String, usize>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, spec: TraitSpec) -> usize {
        self.counts.get(&format!("{spec}")).copied().unwrap_or(0)
    }
}

pub fn validate_dataset(records: &[DialogueRecord]) -> ValidationReport {
    let mut report = ValidationReport { records: records.len(), ..Default::default() };
    for spec in TraitSpec::all() {
        report.counts.insert(format!("{spec}"), 0);
    }
    let mut groups: BTreeMap<PairKey<'_>, [Vec<&DialogueRecord>; 2]> = BTreeMap::new();
    for r in records {
        *report.counts.entry(format!("{}", r.trait_spec())).or_default() += 1;
        if r.schema_version != SCHEMA_VERSION {
            report.findings.push(Finding::WrongSchema { scenario_id: r.scenario_id.clone(), found: r.schema_version.clone() });
        }
        for (field, value) in [("speaker_x", &r.speaker_x), ("speaker_y", &r.speaker_y)] {
            if value.trim().is_empty() {
                report.findings.push(Finding::EmptyText {
                    scenario_id: r.scenario_id.clone(),
                    trait_name: r.trait_name,
                    level: r.level,
                    field: field.into(),
                });
            }
        }
        groups.entry((r.scenario_id.as_str(), r.trait_name)).or_default()[r.level as usize].push(r);
    }
    for ((scenario_id, trait_name), slots) in groups {
        for level in Level::BOTH {
            let n = slots[level as usize].len();
            if n == 0 {
                report.findings.push(Finding::MissingCounterpart { scenario_id: scenario_id.into(), trait_name, missing: level });
            }
            for _ in 1..n.max(1) {
                report.findings.push(Finding::DuplicateKey { scenario_id: scenario_id.into(), trait_name, level });
            }
        }
        let contexts: BTreeSet<&str> = slots.iter().flatten().map(|r| r.speaker_x.as_str()).collect();
        if contexts.len() > 1 {
            report.findings.push(Finding::ContextMismatch { scenario_id: scenario_id.into(), trait_name });
        }
    }
    report
}
