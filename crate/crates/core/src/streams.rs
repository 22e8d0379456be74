//! Random draw sources for the simulator.
//!
//! A run consumes three kinds of draws: interarrival gaps, uniform priority
//! levels, and service durations. [`SeededStreams`] gives each kind its own
//! ChaCha8 stream, and gives every customer a private service substream keyed
//! by `(seed, seq)`. [`ScriptedDraws`] replays fixed sequences instead, which
//! is how hand-traced scenarios are tested.

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};

use crate::error::SimError;

const ARRIVAL_STREAM: u64 = 0;
const PRIORITY_STREAM: u64 = 1;
const SERVICE_SALT: u64 = 0x5e41_1ce5_d0c0_ffee;

pub trait DrawSource {
    /// Next interarrival gap, or `None` once the arrival stream is exhausted.
    fn interarrival(&mut self) -> Result<Option<f64>, SimError>;

    /// Next uniform priority level in `[0, 1]`.
    fn priority(&mut self) -> Result<f64, SimError>;

    /// Next service duration for customer `seq`. Called on every service
    /// entry, including re-entries after preemption.
    fn service(&mut self, seq: u64) -> Result<f64, SimError>;

    /// Customer `seq` has departed and will not draw again.
    fn release(&mut self, _seq: u64) {}
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `index`. Replicate 0 reuses the base seed, and distinct
/// indices always give distinct seeds.
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

#[derive(Debug, Clone)]
pub struct SeededStreams {
    arrivals: ChaCha8Rng,
    priorities: ChaCha8Rng,
    service_seed: u64,
    service: HashMap<u64, ChaCha8Rng>,
    gap: Exp<f64>,
}

impl SeededStreams {
    pub fn new(seed: u64, rho: f64) -> Result<Self, SimError> {
        let gap = Exp::new(rho)
            .map_err(|e| SimError::InvalidConfig(format!("arrival rate {rho}: {e}")))?;
        let mut arrivals = ChaCha8Rng::seed_from_u64(seed);
        arrivals.set_stream(ARRIVAL_STREAM);
        let mut priorities = ChaCha8Rng::seed_from_u64(seed);
        priorities.set_stream(PRIORITY_STREAM);
        Ok(SeededStreams {
            arrivals,
            priorities,
            service_seed: mix64(seed ^ SERVICE_SALT),
            service: HashMap::new(),
            gap,
        })
    }

    fn service_stream(&mut self, seq: u64) -> &mut ChaCha8Rng {
        let seed = self.service_seed;
        self.service.entry(seq).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(seq);
            rng
        })
    }
}

impl DrawSource for SeededStreams {
    fn interarrival(&mut self) -> Result<Option<f64>, SimError> {
        Ok(Some(self.gap.sample(&mut self.arrivals)))
    }

    fn priority(&mut self) -> Result<f64, SimError> {
        Ok(self.priorities.random::<f64>())
    }

    fn service(&mut self, seq: u64) -> Result<f64, SimError> {
        Ok(Exp1.sample(self.service_stream(seq)))
    }

    fn release(&mut self, seq: u64) {
        self.service.remove(&seq);
    }
}

/// Replays explicit draw sequences. The arrival stream ends when the
/// interarrival list runs out; running out of priorities or of a customer's
/// service draws is an error.
#[derive(Debug, Clone, Default)]
pub struct ScriptedDraws {
    interarrivals: VecDeque<f64>,
    priorities: VecDeque<f64>,
    services: HashMap<u64, VecDeque<f64>>,
}

impl ScriptedDraws {
    /// `services[i]` lists the successive service draws of customer `i`.
    pub fn new(interarrivals: Vec<f64>, priorities: Vec<f64>, services: Vec<Vec<f64>>) -> Self {
        ScriptedDraws {
            interarrivals: interarrivals.into(),
            priorities: priorities.into(),
            services: services
                .into_iter()
                .enumerate()
                .map(|(i, draws)| (i as u64, draws.into()))
                .collect(),
        }
    }

    /// A script with no arrivals at all.
    pub fn empty() -> Self {
        Self::default()
    }
}

impl DrawSource for ScriptedDraws {
    fn interarrival(&mut self) -> Result<Option<f64>, SimError> {
        Ok(self.interarrivals.pop_front())
    }

    fn priority(&mut self) -> Result<f64, SimError> {
        self.priorities
            .pop_front()
            .ok_or_else(|| SimError::ScriptExhausted("priority draws".into()))
    }

    fn service(&mut self, seq: u64) -> Result<f64, SimError> {
        self.services
            .get_mut(&seq)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| SimError::ScriptExhausted(format!("service draws of customer {seq}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn take(src: &mut impl DrawSource, n: usize) -> Vec<f64> {
        (0..n).map(|_| src.interarrival().unwrap().unwrap()).collect()
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = SeededStreams::new(7, 0.75).unwrap();
        let mut b = SeededStreams::new(7, 0.75).unwrap();
        assert_eq!(take(&mut a, 16), take(&mut b, 16));
        assert_eq!(a.priority().unwrap(), b.priority().unwrap());
        assert_eq!(a.service(3).unwrap(), b.service(3).unwrap());
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = SeededStreams::new(7, 0.75).unwrap();
        let mut b = SeededStreams::new(8, 0.75).unwrap();
        assert_ne!(take(&mut a, 4), take(&mut b, 4));
    }

    #[test]
    fn service_substreams_do_not_depend_on_call_order() {
        let mut a = SeededStreams::new(11, 1.0).unwrap();
        let mut b = SeededStreams::new(11, 1.0).unwrap();
        let a5 = a.service(5).unwrap();
        let _ = b.service(2).unwrap();
        let _ = b.priority().unwrap();
        let _ = b.service(9).unwrap();
        assert_eq!(a5, b.service(5).unwrap());
    }

    #[test]
    fn released_substream_restarts() {
        let mut a = SeededStreams::new(3, 1.0).unwrap();
        let first = a.service(4).unwrap();
        let second = a.service(4).unwrap();
        assert_ne!(first, second);
        a.release(4);
        assert_eq!(a.service(4).unwrap(), first);
    }

    #[test]
    fn priorities_are_uniform_unit() {
        let mut a = SeededStreams::new(1, 1.0).unwrap();
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| a.priority().unwrap()).collect();
        assert!(draws.iter().all(|p| (0.0..1.0).contains(p)));
        let mean = draws.iter().sum::<f64>() / n as f64;
        // sd of the mean is sqrt(1/12/n) ~ 0.002
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        assert_eq!(replicate_seed(99, 0), 99);
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| replicate_seed(u64::MAX - 3, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn scripted_draws_replay_and_exhaust() {
        let mut s = ScriptedDraws::new(vec![1.0], vec![0.3], vec![vec![2.0, 0.7]]);
        assert_eq!(s.interarrival().unwrap(), Some(1.0));
        assert_eq!(s.interarrival().unwrap(), None);
        assert_eq!(s.priority().unwrap(), 0.3);
        assert!(s.priority().is_err());
        assert_eq!(s.service(0).unwrap(), 2.0);
        assert_eq!(s.service(0).unwrap(), 0.7);
        assert!(matches!(s.service(0), Err(SimError::ScriptExhausted(_))));
        assert!(s.service(1).is_err());
    }
}
