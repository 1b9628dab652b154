use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::domain::SimTime;

#[derive(Debug, Error, PartialEq)]
#[error("traffic means must be positive and finite (setup {setup}, duration {duration})")]
pub struct TrafficError {
    pub setup: f64,
    pub duration: f64,
}

/// Poisson virtual-circuit arrivals with exponential holding times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    inter_setup_mean: f64,
    call_duration_mean: f64,
}

impl TrafficModel {
    pub fn new(inter_setup_mean: f64, call_duration_mean: f64) -> Result<Self, TrafficError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(inter_setup_mean) || !ok(call_duration_mean) {
            return Err(TrafficError {
                setup: inter_setup_mean,
                duration: call_duration_mean,
            });
        }
        Ok(TrafficModel {
            inter_setup_mean,
            call_duration_mean,
        })
    }

    pub fn inter_setup_mean(&self) -> f64 {
        self.inter_setup_mean
    }

    pub fn call_duration_mean(&self) -> f64 {
        self.call_duration_mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Call {
    pub setup: SimTime,
    pub teardown: SimTime,
}

/// Endless stream of calls starting after `start`.
pub struct PoissonCallSource<R> {
    rng: R,
    arrivals: Exp<f64>,
    holding: Exp<f64>,
    clock: f64,
}

impl<R: Rng> PoissonCallSource<R> {
    pub fn new(tm: TrafficModel, start: SimTime, rng: R) -> Self {
        PoissonCallSource {
            rng,
            arrivals: Exp::new(1.0 / tm.inter_setup_mean).expect("validated rate"),
            holding: Exp::new(1.0 / tm.call_duration_mean).expect("validated rate"),
            clock: start.as_secs_f64(),
        }
    }

    /// Calls whose setup falls in `[start, end)`.
    pub fn calls_until(&mut self, end: SimTime) -> Vec<Call>
    where
        R: Clone,
    {
        let mut out = Vec::new();
        loop {
            let peek_rng = self.rng.clone();
            let clock = self.clock;
            let c = self.next().expect("infinite stream");
            if c.setup >= end {
                self.rng = peek_rng;
                self.clock = clock;
                return out;
            }
            out.push(c);
        }
    }
}

impl<R: Rng> Iterator for PoissonCallSource<R> {
    type Item = Call;

    fn next(&mut self) -> Option<Call> {
        self.clock += self.arrivals.sample(&mut self.rng);
        let hold = self.holding.sample(&mut self.rng);
        let setup = SimTime::from_secs_f64(self.clock);
        Some(Call {
            setup,
            teardown: setup + SimTime::from_secs_f64(hold),
        })
    }
}
