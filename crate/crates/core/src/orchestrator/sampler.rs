use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::chem::{hf_configuration, SystemSpec};
use crate::linalg::monotonic_seconds;
use crate::lucj::{apply_noise, lucj_state, sample_counts_cancellable, LucjParameters, NoiseModel, SampleBatch, DEFAULT_STATE_CAP};
use crate::{Error, Result};

/// One population's circuits for one iteration.
#[derive(Clone, Debug)]
pub struct SampleRequest {
    pub iteration: usize,
    pub population: usize,
    pub params: Vec<LucjParameters>,
    /// One seed per circuit.
    pub seeds: Vec<u64>,
}

/// The device side of the loop: measured batches for a set of circuits.
pub trait Sampler: Send + Sync {
    /// One batch per entry of `request.params`, in order. Implementations
    /// should poll `cancel` and return [`Error::Cancelled`] once it is set.
    fn sample(&self, request: &SampleRequest, cancel: &AtomicBool) -> Result<Vec<SampleBatch>>;
}

/// LUCJ state-vector sampler with independent bit-flip readout noise and
/// an optional fixed device time per call.
#[derive(Clone, Debug)]
pub struct SimulatedSampler {
    pub spec: SystemSpec,
    pub shots: u64,
    pub noise: NoiseModel,
    pub latency: Duration,
    pub cap: u128,
}

impl SimulatedSampler {
    pub fn new(spec: SystemSpec, shots: u64, noise: f64, latency: Duration) -> Result<Self> {
        Ok(SimulatedSampler {
            spec,
            shots,
            noise: NoiseModel::new(noise)?,
            latency,
            cap: DEFAULT_STATE_CAP,
        })
    }
}

/// Sleeps in short slices so cancellation stays prompt.
fn cancellable_sleep(total: Duration, cancel: &AtomicBool) -> Result<()> {
    let slice = Duration::from_millis(5);
    let mut left = total;
    while !left.is_zero() {
        if cancel.load(Ordering::Relaxed) {
            return Err(Error::Cancelled);
        }
        let d = left.min(slice);
        std::thread::sleep(d);
        left -= d;
    }
    Ok(())
}

impl Sampler for SimulatedSampler {
    fn sample(&self, request: &SampleRequest, cancel: &AtomicBool) -> Result<Vec<SampleBatch>> {
        if request.params.len() != request.seeds.len() {
            return Err(Error::Contract("one seed per circuit is required".into()));
        }
        let started = monotonic_seconds();
        let reference = hf_configuration(&self.spec);
        let mut out = Vec::with_capacity(request.params.len());
        for (params, &seed) in request.params.iter().zip(&request.seeds) {
            let state = lucj_state(params, self.spec, reference, self.cap)?;
            let ideal = sample_counts_cancellable(&state, self.shots, seed, cancel)?;
            out.push(apply_noise(&ideal, self.noise, seed ^ 0x6e01_5e00_0000_0000));
        }
        let spent = Duration::from_secs_f64((monotonic_seconds() - started).max(0.0));
        cancellable_sleep(self.latency.saturating_sub(spent), cancel)?;
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RetryPolicy {
    pub retries: usize,
    pub backoff: Duration,
}

/// What came back from one asynchronous sampler call.
#[derive(Debug)]
pub struct SamplerOutcome {
    pub result: Result<Vec<SampleBatch>>,
    /// Process-monotonic seconds bracketing all attempts.
    pub started_s: f64,
    pub finished_s: f64,
    pub attempts: usize,
}

/// A sampler call in flight on its own thread. Dropping it without
/// waiting cancels the call.
pub struct PendingSample {
    handle: Option<JoinHandle<SamplerOutcome>>,
    cancel: Arc<AtomicBool>,
}

/// Starts `request` on a new thread, retrying failed attempts with
/// doubling backoff. Cancellation is never retried.
pub fn launch(sampler: Arc<dyn Sampler>, request: SampleRequest, policy: RetryPolicy) -> PendingSample {
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = cancel.clone();
    let handle = std::thread::Builder::new()
        .name(format!("sampler-p{}-i{}", request.population, request.iteration))
        .spawn(move || {
            let started_s = monotonic_seconds();
            let mut attempts = 0;
            let result = loop {
                attempts += 1;
                match sampler.sample(&request, &flag) {
                    Ok(b) => break Ok(b),
                    Err(Error::Cancelled) => break Err(Error::Cancelled),
                    Err(e) if attempts > policy.retries => {
                        break Err(Error::Sampler(format!("giving up after {attempts} attempts: {e}")))
                    }
                    Err(e) => {
                        let wait = policy.backoff * (1u32 << (attempts - 1).min(16));
                        log::warn!(
                            "sampler for population {} iteration {} failed (attempt {attempts}): {e}; retrying in {wait:?}",
                            request.population,
                            request.iteration
                        );
                        if let Err(c) = cancellable_sleep(wait, &flag) {
                            break Err(c);
                        }
                    }
                }
            };
            SamplerOutcome {
                result,
                started_s,
                finished_s: monotonic_seconds(),
                attempts,
            }
        })
        .expect("spawn sampler thread");
    PendingSample {
        handle: Some(handle),
        cancel,
    }
}

impl PendingSample {
    pub fn wait(mut self) -> SamplerOutcome {
        let handle = self.handle.take().expect("joined once");
        handle.join().unwrap_or_else(|_| SamplerOutcome {
            result: Err(Error::Sampler("sampler thread panicked".into())),
            started_s: monotonic_seconds(),
            finished_s: monotonic_seconds(),
            attempts: 1,
        })
    }

    pub fn cancel(&self) {
        self.cancel.store(true, Ordering::Relaxed);
    }
}

impl Drop for PendingSample {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            self.cancel.store(true, Ordering::Relaxed);
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Flaky {
        failures: AtomicUsize,
    }

    impl Sampler for Flaky {
        fn sample(&self, _request: &SampleRequest, _cancel: &AtomicBool) -> Result<Vec<SampleBatch>> {
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(Error::Sampler("device busy".into()));
            }
            Ok(vec![])
        }
    }

    struct Forever;

    impl Sampler for Forever {
        fn sample(&self, _r: &SampleRequest, cancel: &AtomicBool) -> Result<Vec<SampleBatch>> {
            cancellable_sleep(Duration::from_secs(3600), cancel)?;
            Ok(vec![])
        }
    }

    fn req() -> SampleRequest {
        SampleRequest {
            iteration: 0,
            population: 0,
            params: vec![],
            seeds: vec![],
        }
    }

    fn policy(retries: usize) -> RetryPolicy {
        RetryPolicy {
            retries,
            backoff: Duration::from_millis(1),
        }
    }

    #[test]
    fn retries_then_succeeds() {
        let s = Arc::new(Flaky {
            failures: AtomicUsize::new(2),
        });
        let out = launch(s, req(), policy(2)).wait();
        assert!(out.result.is_ok());
        assert_eq!(out.attempts, 3);
    }

    #[test]
    fn gives_up_after_retries() {
        let s = Arc::new(Flaky {
            failures: AtomicUsize::new(5),
        });
        let out = launch(s, req(), policy(1)).wait();
        assert!(matches!(out.result, Err(Error::Sampler(_))));
        assert_eq!(out.attempts, 2);
    }

    #[test]
    fn cancellation_stops_the_thread() {
        let p = launch(Arc::new(Forever), req(), policy(3));
        p.cancel();
        let out = p.wait();
        assert!(matches!(out.result, Err(Error::Cancelled)));
        // dropping an unjoined call also cancels and joins
        let t0 = std::time::Instant::now();
        drop(launch(Arc::new(Forever), req(), policy(0)));
        assert!(t0.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn simulated_sampler_honours_latency() {
        let spec = SystemSpec::new(4, 2, 2).unwrap();
        let s = SimulatedSampler::new(spec, 100, 0.0, Duration::from_millis(30)).unwrap();
        let r = SampleRequest {
            iteration: 0,
            population: 0,
            params: vec![LucjParameters::zeros(4, 1)],
            seeds: vec![1],
        };
        let t0 = std::time::Instant::now();
        let b = s.sample(&r, &AtomicBool::new(false)).unwrap();
        assert!(t0.elapsed() >= Duration::from_millis(30));
        assert_eq!(b.len(), 1);
        // zero parameters leave the reference untouched
        assert_eq!(b[0].unique(), 1);
        assert_eq!(b[0].shots, 100);
    }
}
