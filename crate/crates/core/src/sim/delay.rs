//! Returned-delay model of the transaction-level slave.

use std::ops::RangeInclusive;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What to do with a delay that is not a whole number of clock periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RoundingPolicy {
    /// Round up to the next cycle and note it.
    #[default]
    RoundUp,
    Reject,
}

/// Base latency plus an occasional contention penalty, both in cycles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayModel {
    pub base_latency_cycles: u64,
    pub contention_probability: Ratio<u32>,
    pub contention_extra_cycles: RangeInclusive<u64>,
    pub seed: u64,
    /// Length of one latency unit. Defaults to the bus clock period; set it
    /// to model a slave whose latency is not cycle-aligned.
    pub latency_unit_ns: Option<u64>,
    pub rounding: RoundingPolicy,
}

impl DelayModel {
    /// A fixed delay of `cycles`, no contention.
    pub fn fixed(cycles: u64) -> Self {
        DelayModel {
            base_latency_cycles: cycles,
            contention_probability: Ratio::new(0, 1),
            contention_extra_cycles: 1..=1,
            seed: 0,
            latency_unit_ns: None,
            rounding: RoundingPolicy::RoundUp,
        }
    }

    pub fn sampler(&self) -> DelaySampler {
        DelaySampler { model: self.clone(), rng: ChaCha8Rng::seed_from_u64(self.seed) }
    }
}

/// Stateful draw of successive delays; one draw per transaction.
#[derive(Debug, Clone)]
pub struct DelaySampler {
    model: DelayModel,
    rng: ChaCha8Rng,
}

impl DelaySampler {
    /// Next raw delay in ns, before quantization to `period_ns`.
    pub fn next_delay_ns(&mut self, period_ns: u64) -> u64 {
        let m = &self.model;
        let p = m.contention_probability;
        // the extra range is drawn unconditionally so the stream stays in
        // step whether or not contention hits
        let hit = *p.numer() > 0 && self.rng.gen_ratio((*p.numer()).min(*p.denom()), *p.denom());
        let extra = self.rng.gen_range(m.contention_extra_cycles.clone());
        let cycles = m.base_latency_cycles + if hit { extra } else { 0 };
        cycles * m.latency_unit_ns.unwrap_or(period_ns)
    }
}

/// Round `delay_ns` to whole cycles. Returns the quantized delay and whether
/// it changed; `None` when the policy forbids rounding.
pub fn quantize_delay(delay_ns: u64, period_ns: u64, policy: RoundingPolicy) -> Option<(u64, bool)> {
    let rem = delay_ns % period_ns;
    if rem == 0 {
        return Some((delay_ns, false));
    }
    match policy {
        RoundingPolicy::RoundUp => Some((delay_ns + period_ns - rem, true)),
        RoundingPolicy::Reject => None,
    }
}
