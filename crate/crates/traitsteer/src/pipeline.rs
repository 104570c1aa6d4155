//! Parallel pairwise generation and the model-backed questionnaire responder.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use traitsteer_core::dataset::{generate_pairwise_with_retry, job_seed, sort_records, DialogueRecord, Scenario};
use traitsteer_core::logits::SamplerConfig;
use traitsteer_core::personality::{Trait, TraitSpec};
use traitsteer_core::psychometrics::Responder;
use traitsteer_core::steering::{generate_base, LogitSource, SteeringPolicy};

use crate::backend::Experts;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub policy: SteeringPolicy,
    /// Sampling mode; the seed is replaced per job.
    pub sampler: SamplerConfig,
    pub run_seed: u64,
    pub workers: usize,
    pub max_retries: usize,
}

/// Generates the High and Low record for every (scenario, trait) job on
/// `workers` threads. Output is sorted by (scenario_id, trait, level), so it
/// does not depend on scheduling.
pub fn run_pipeline<B, X>(scenarios: &[Scenario], base: &B, experts: &X, opts: &PipelineOptions) -> Result<Vec<DialogueRecord>>
where
    B: LogitSource + Sync + ?Sized,
    X: Experts,
{
    traitsteer_core::dataset::check_scenarios(scenarios)?;
    let jobs: Vec<(&Scenario, Trait)> = scenarios.iter().flat_map(|s| Trait::ALL.map(|t| (s, t))).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let records = Mutex::new(Vec::with_capacity(jobs.len() * 2));
    let errors = Mutex::new(Vec::new());
    let done = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..opts.workers.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(scenario, t)) = jobs.get(i) else { return };
                let sampler = opts.sampler.with_seed(job_seed(opts.run_seed, &scenario.scenario_id, t));
                let high = experts.expert(TraitSpec::new(t, traitsteer_core::Level::High));
                let low = experts.expert(TraitSpec::new(t, traitsteer_core::Level::Low));
                match generate_pairwise_with_retry(scenario, t, base, high, low, &opts.policy, &sampler, opts.max_retries) {
                    Ok((h, l)) => {
                        let mut r = records.lock().expect("record sink");
                        r.push(h);
                        r.push(l);
                        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                        if n.is_multiple_of(500) {
                            log::info!("{n}/{} jobs done", jobs.len());
                        }
                    }
                    Err(e) => {
                        failed.store(true, Ordering::Relaxed);
                        errors.lock().expect("error sink").push((i, scenario.scenario_id.clone(), e));
                    }
                }
            });
        }
    });

    let mut errors = errors.into_inner().expect("error sink");
    errors.sort_by_key(|(i, _, _)| *i);
    if let Some((_, id, e)) = errors.into_iter().next() {
        return Err(Error::from(e).record(id));
    }
    let mut records = records.into_inner().expect("record sink");
    sort_records(&mut records);
    Ok(records)
}

/// Answers questionnaire prompts by generating from a model.
pub struct ModelResponder<'a, B: ?Sized> {
    pub base: &'a B,
    pub policy: SteeringPolicy,
    /// Appended to every prompt to cue the answer.
    pub answer_cue: String,
}

impl<B: LogitSource + ?Sized> Responder for ModelResponder<'_, B> {
    fn respond(&self, prompt: &str, sampler: &SamplerConfig) -> std::result::Result<String, String> {
        let prompt = format!("{prompt}{}", self.answer_cue);
        generate_base(self.base, &prompt, &self.policy, sampler).map(|r| r.text).map_err(|e| e.to_string())
    }
}
