use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use sentcomp_core::postprocess::Extractor;
use sentcomp_core::templating::LengthPolicy;
use sentcomp_core::{Corpus, GenerationRecord, InstructionTemplate};

use super::{Backend, BackendError, CompletionRequest, DecodingParams};
use crate::error::{Error, Result};
use crate::prompts::render_prompts;

pub struct BatchRequest<'a> {
    pub corpus: &'a Corpus,
    pub template: &'a InstructionTemplate,
    pub policy: LengthPolicy,
    pub params: &'a DecodingParams,
    pub extractor: &'a Extractor,
    /// Upper bound on requests in flight; at least 1.
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFailure {
    pub example_id: String,
    pub error: BackendError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// Successful records in corpus order.
    pub records: Vec<GenerationRecord>,
    /// Failed examples in corpus order.
    pub failures: Vec<BatchFailure>,
}

/// Renders and dispatches one prompt per example over a fixed pool of worker threads.
///
/// Output order follows the corpus no matter which request finishes first. Failures are
/// collected rather than aborting the batch, so every reachable completion lands in the
/// backend's cache.
pub fn run_batch(request: &BatchRequest<'_>, backend: &dyn Backend) -> Result<BatchOutcome> {
    if request.parallelism == 0 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    request.params.validate().map_err(|e| Error::Config(e.to_string()))?;
    let examples = request.corpus.examples();
    let prompts = render_prompts(request.corpus, request.template, request.policy)?;
    let total = prompts.len();
    let backend_id = backend.id();
    let template_name = request.template.name().as_str();

    let mut slots: Vec<Option<Result<GenerationRecord, BackendError>>> = vec![None; total];
    let next = AtomicUsize::new(0);
    let started = Instant::now();
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..request.parallelism.min(total) {
            let tx = tx.clone();
            let (next, prompts, backend_id) = (&next, &prompts, &backend_id);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= total {
                    break;
                }
                let prompt = prompts[i].prompt.as_str();
                let result = backend
                    .complete(CompletionRequest { example: &examples[i], prompt }, request.params)
                    .map(|completion| GenerationRecord {
                        example_id: examples[i].id().to_owned(),
                        template_name: template_name.to_owned(),
                        prompt: prompt.to_owned(),
                        extracted: request.extractor.extract(&completion.text),
                        raw_completion: completion.text,
                        backend_id: backend_id.clone(),
                        latency_ms: completion.latency_ms,
                    });
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let step = (total / 10).max(1);
        for (done, (i, result)) in rx.into_iter().enumerate() {
            if let Err(e) = &result {
                log::warn!("example {}: {e}", examples[i].id());
            }
            slots[i] = Some(result);
            if (done + 1) % step == 0 || done + 1 == total {
                log::info!("{}/{} completions ({:.1?})", done + 1, total, started.elapsed());
            }
        }
    });

    let mut outcome = BatchOutcome { records: Vec::with_capacity(total), failures: Vec::new() };
    for (example, slot) in examples.iter().zip(slots) {
        match slot.expect("every index is dispatched exactly once") {
            Ok(record) => outcome.records.push(record),
            Err(error) => outcome.failures.push(BatchFailure { example_id: example.id().to_owned(), error }),
        }
    }
    Ok(outcome)
}
