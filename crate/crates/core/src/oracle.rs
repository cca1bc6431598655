//! Monte-Carlo evaluation of the per-cycle quantities for a general renewal
//! arrival process.
//!
//! Each simulated cycle draws the empty period `T_e` (first arrival after the
//! queue empties) and then successive interarrival gaps. From the resulting
//! arrival instants it reads off whether the PHY reaches Deep-Sleep and how
//! long it dwells in each low-power mode, exactly as the renewal convolutions
//! describe. No queueing or service is simulated.
//!
//! For Poisson input the residual and the fresh gap share the same exponential
//! law; for anything else the caller decides what `T_e` looks like.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::gamma::{poisson_pmf, tails};
use crate::model::{expected_deep_sleep, expected_fast_wake, p_deep, CoalescingConfig, PhyProfile};
use crate::scalar::Scalar;

/// Source of the empty-period and interarrival samples of a renewal process.
pub trait InterarrivalSampler<F: Scalar> {
    fn draw_empty<R: Rng + ?Sized>(&self, rng: &mut R) -> F;
    fn draw_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> F;
}

/// Basic nonnegative interarrival laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapDist<F> {
    /// Exponential with the given rate (1/s).
    Exponential(F),
    Deterministic(F),
    /// Uniform on `[lo, hi)`.
    Uniform(F, F),
}

impl<F: Scalar> GapDist<F> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> F {
        match *self {
            GapDist::Exponential(rate) => {
                // 1 - U lies in (0, 1], so the logarithm is finite.
                let u: f64 = 1.0 - rng.random::<f64>();
                F::of(-u.ln()) / rate
            }
            GapDist::Deterministic(v) => v,
            GapDist::Uniform(lo, hi) => lo + (hi - lo) * F::of(rng.random::<f64>()),
        }
    }

    pub fn mean(&self) -> F {
        match *self {
            GapDist::Exponential(rate) => F::one() / rate,
            GapDist::Deterministic(v) => v,
            GapDist::Uniform(lo, hi) => (lo + hi) / F::of(2.0),
        }
    }
}

/// Sampler with independently chosen empty-period and gap laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSampler<F> {
    pub empty: GapDist<F>,
    pub gap: GapDist<F>,
}

impl<F: Scalar> SplitSampler<F> {
    /// Poisson arrivals: both laws exponential(λ).
    pub fn poisson(lambda: F) -> Self {
        Self {
            empty: GapDist::Exponential(lambda),
            gap: GapDist::Exponential(lambda),
        }
    }
}

impl<F: Scalar> InterarrivalSampler<F> for SplitSampler<F> {
    fn draw_empty<R: Rng + ?Sized>(&self, rng: &mut R) -> F {
        self.empty.sample(rng)
    }

    fn draw_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> F {
        self.gap.sample(rng)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<F> {
    pub mean: F,
    pub std_err: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate<F> {
    pub p_deep: Estimate<F>,
    pub e_tf: Estimate<F>,
    pub e_td: Estimate<F>,
    pub n_cycles: u64,
    pub rng_seed: u64,
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy)]
struct Moments<F> {
    n: u64,
    mean: F,
    m2: F,
}

impl<F: Scalar> Moments<F> {
    fn new() -> Self {
        Self {
            n: 0,
            mean: F::zero(),
            m2: F::zero(),
        }
    }

    fn push(&mut self, x: F) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / F::of(self.n as f64);
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    fn estimate(&self) -> Estimate<F> {
        let std_err = if self.n >= 2 {
            let n = F::of(self.n as f64);
            (self.m2 / (n - F::one()) / n).sqrt()
        } else {
            F::zero()
        };
        Estimate {
            mean: self.mean,
            std_err,
        }
    }
}

/// Outcome of one coalescing cycle's inactive period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSample<F> {
    pub deep: bool,
    pub fast_wake: F,
    pub deep_sleep: F,
}

/// Plays out the inactive period of a single cycle.
pub fn sample_cycle<F: Scalar, S: InterarrivalSampler<F>, R: Rng + ?Sized>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    sampler: &S,
    rng: &mut R,
) -> CycleSample<F> {
    let window = profile.wake_window();
    let mut t = sampler.draw_empty(rng);
    for _ in 1..cfg.q_fast {
        t = t + sampler.draw_gap(rng);
    }
    if t <= window {
        // The Q_f-th frame arrived before the idle timer fired.
        let fast_wake = (t - profile.t_atof).max(F::zero()).min(profile.t_idle);
        return CycleSample {
            deep: false,
            fast_wake,
            deep_sleep: F::zero(),
        };
    }
    for _ in cfg.q_fast..cfg.q_deep {
        t = t + sampler.draw_gap(rng);
    }
    CycleSample {
        deep: true,
        fast_wake: profile.t_idle,
        deep_sleep: (t - window - profile.t_ftod).max(F::zero()),
    }
}

/// Monte-Carlo estimates of `p_d`, `E[T_f]` and `E[T_d]` over `n_cycles`
/// independent cycles. Deterministic in `seed`.
pub fn estimate_cycle_quantities<F: Scalar, S: InterarrivalSampler<F>>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    sampler: &S,
    n_cycles: u64,
    seed: u64,
) -> Result<OracleEstimate<F>, ModelError> {
    if n_cycles < 1 {
        return Err(ModelError::domain("n_cycles must be >= 1"));
    }
    profile.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deep = Moments::new();
    let mut fast = Moments::new();
    let mut sleep = Moments::new();
    for _ in 0..n_cycles {
        let c = sample_cycle(profile, cfg, sampler, &mut rng);
        deep.push(if c.deep { F::one() } else { F::zero() });
        fast.push(c.fast_wake);
        sleep.push(c.deep_sleep);
    }
    Ok(OracleEstimate {
        p_deep: deep.estimate(),
        e_tf: fast.estimate(),
        e_td: sleep.estimate(),
        n_cycles,
        rng_seed: seed,
    })
}

/// Poisson closed-form means and per-cycle standard deviations of the three
/// cycle quantities; the reference an oracle run is scored against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonReference<F> {
    pub p_deep: F,
    pub e_tf: F,
    pub e_td: F,
    pub sd_deep: F,
    pub sd_tf: F,
    pub sd_td: F,
}

/// `E[(S - c)^2 ; S > t]` for `S ~ Erlang(k, λ)`, from the partial moments
/// `E[S^m ; S > t] = k(k+1)…(k+m-1)/λ^m · R(k+m, λt)`.
fn erlang_shifted_sq<F: Scalar>(k: u32, lambda: F, c: F, t: F) -> Result<F, ModelError> {
    let kf = F::of_u32(k);
    let m0 = tails(k, lambda * t)?.1;
    let m1 = kf / lambda * tails(k + 1, lambda * t)?.1;
    let m2 = kf * (kf + F::one()) / (lambda * lambda) * tails(k + 2, lambda * t)?.1;
    Ok(m2 - F::of(2.0) * c * m1 + c * c * m0)
}

impl<F: Scalar> PoissonReference<F> {
    pub fn new(
        profile: &PhyProfile<F>,
        cfg: &CoalescingConfig<F>,
        lambda: F,
    ) -> Result<Self, ModelError> {
        let pd = p_deep(profile, cfg, lambda)?;
        let e_tf = expected_fast_wake(profile, cfg, lambda)?;
        let e_td = expected_deep_sleep(profile, cfg, lambda)?;

        let a = profile.t_atof;
        let w = profile.wake_window();
        let inside = erlang_shifted_sq(cfg.q_fast, lambda, a, a)?
            - erlang_shifted_sq(cfg.q_fast, lambda, a, w)?;
        let tf_sq = inside + profile.t_idle * profile.t_idle * pd;

        let c = profile.t_ftod;
        let mut td_sq = F::zero();
        for i in 0..cfg.q_fast {
            let weight = poisson_pmf(i, lambda * w);
            if weight > F::zero() {
                td_sq = td_sq + weight * erlang_shifted_sq(cfg.q_deep - i, lambda, c, c)?;
            }
        }
        let sd = |sq: F, mean: F| (sq - mean * mean).max(F::zero()).sqrt();
        Ok(Self {
            p_deep: pd,
            e_tf,
            e_td,
            sd_deep: sd(pd, pd),
            sd_tf: sd(tf_sq, e_tf),
            sd_td: sd(td_sq, e_td),
        })
    }
}

/// Deviation of one oracle estimate from its reference, in standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub estimate: f64,
    pub reference: f64,
    /// Standard error used for scoring.
    pub std_err: f64,
    /// Standard error estimated from the sample itself.
    pub sample_std_err: f64,
    pub z: f64,
}

impl Deviation {
    /// Relative round-off allowance; both routes are only accurate to a few
    /// ulps, which matters when every sample is identical.
    pub const ROUNDOFF: f64 = 1e-12;

    fn score(est: Estimate<f64>, reference: f64, per_cycle_sd: f64, n: u64) -> Self {
        // Scored with the estimator's exact spread under the reference law.
        // The sample spread is unreliable for rare events (a handful of
        // Deep-Sleep cycles per million) and is only a fallback.
        let exact = per_cycle_sd / (n as f64).sqrt();
        let std_err = if exact > 0.0 { exact } else { est.std_err };
        let slack = Self::ROUNDOFF * est.mean.abs().max(reference.abs());
        let excess = ((est.mean - reference).abs() - slack).max(0.0);
        let z = if excess == 0.0 {
            0.0
        } else if std_err > 0.0 {
            excess / std_err
        } else {
            f64::INFINITY
        };
        Self {
            estimate: est.mean,
            reference,
            std_err,
            sample_std_err: est.std_err,
            z,
        }
    }

    pub fn within(&self, k: f64) -> bool {
        self.z <= k
    }
}

/// Scores an oracle run against the Poisson closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub p_deep: Deviation,
    pub e_tf: Deviation,
    pub e_td: Deviation,
}

impl Comparison {
    pub fn max_z(&self) -> f64 {
        self.p_deep.z.max(self.e_tf.z).max(self.e_td.z)
    }

    pub fn within(&self, k: f64) -> bool {
        self.max_z() <= k
    }
}

impl<F: Scalar> OracleEstimate<F> {
    pub fn compare(&self, reference: &PoissonReference<F>) -> Comparison {
        let f = |e: Estimate<F>| Estimate {
            mean: e.mean.as_f64(),
            std_err: e.std_err.as_f64(),
        };
        let n = self.n_cycles;
        Comparison {
            p_deep: Deviation::score(
                f(self.p_deep),
                reference.p_deep.as_f64(),
                reference.sd_deep.as_f64(),
                n,
            ),
            e_tf: Deviation::score(
                f(self.e_tf),
                reference.e_tf.as_f64(),
                reference.sd_tf.as_f64(),
                n,
            ),
            e_td: Deviation::score(
                f(self.e_td),
                reference.e_td.as_f64(),
                reference.sd_td.as_f64(),
                n,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA_2G: f64 = 2e9 / 12000.0;

    fn profile() -> PhyProfile<f64> {
        PhyProfile::dual_mode_40g()
    }

    #[test]
    fn poisson_p_deep_within_three_standard_errors() {
        let p = profile();
        let cfg = CoalescingConfig::new(1, 1).unwrap();
        let est =
            estimate_cycle_quantities(&p, &cfg, &SplitSampler::poisson(LAMBDA_2G), 200_000, 7)
                .unwrap();
        let reference = PoissonReference::new(&p, &cfg, LAMBDA_2G).unwrap();
        let cmp = est.compare(&reference);
        assert!(cmp.within(3.0), "{cmp:?}");
        assert!((est.p_deep.mean - 0.4803).abs() < 0.01);
    }

    #[test]
    fn timer_always_expires_for_huge_gaps() {
        let p = profile();
        let cfg = CoalescingConfig::new(1, 3).unwrap();
        let sampler = SplitSampler {
            empty: GapDist::Deterministic(1.0),
            gap: GapDist::Deterministic(1.0),
        };
        let est = estimate_cycle_quantities(&p, &cfg, &sampler, 100, 1).unwrap();
        assert_eq!(est.p_deep.mean, 1.0);
        assert_eq!(est.e_tf.mean, p.t_idle);
        assert_eq!(est.e_td.mean, 3.0 - p.wake_window() - p.t_ftod);
    }

    #[test]
    fn burst_during_atof_never_sleeps() {
        let p = profile();
        let cfg = CoalescingConfig::new(2, 4).unwrap();
        let sampler = SplitSampler {
            empty: GapDist::Deterministic(0.0),
            gap: GapDist::Deterministic(0.0),
        };
        let est = estimate_cycle_quantities(&p, &cfg, &sampler, 100, 1).unwrap();
        assert_eq!(est.p_deep.mean, 0.0);
        assert_eq!(est.e_tf.mean, 0.0);
        assert_eq!(est.e_td.mean, 0.0);
    }

    #[test]
    fn uniform_gaps_stay_in_bounds() {
        let p = profile();
        let cfg = CoalescingConfig::new(2, 6).unwrap();
        let sampler = SplitSampler {
            empty: GapDist::Uniform(0.0, 4e-6),
            gap: GapDist::Uniform(0.0, 4e-6),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let c = sample_cycle(&p, &cfg, &sampler, &mut rng);
            assert!(c.fast_wake >= 0.0 && c.fast_wake <= p.t_idle);
            assert!(c.deep_sleep >= 0.0);
            assert!(c.deep || c.deep_sleep == 0.0);
        }
        assert_eq!(sampler.gap.mean(), 2e-6);
    }

    #[test]
    fn reproducible_given_seed() {
        let p = profile();
        let cfg = CoalescingConfig::new(2, 8).unwrap();
        let s = SplitSampler::poisson(1e6);
        let a = estimate_cycle_quantities(&p, &cfg, &s, 10_000, 99).unwrap();
        let b = estimate_cycle_quantities(&p, &cfg, &s, 10_000, 99).unwrap();
        let c = estimate_cycle_quantities(&p, &cfg, &s, 10_000, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.p_deep.std_err > 0.0 && a.e_tf.std_err > 0.0 && a.e_td.std_err > 0.0);
    }

    #[test]
    fn zero_cycles_rejected() {
        let p = profile();
        let cfg = CoalescingConfig::new(1, 1).unwrap();
        assert!(estimate_cycle_quantities(&p, &cfg, &SplitSampler::poisson(1e6), 0, 1).is_err());
    }

    #[test]
    fn reference_sd_matches_monte_carlo_spread() {
        // Sample standard deviations over many cycles against the closed-form
        // second moments.
        let p = profile();
        let cfg = CoalescingConfig::new(2, 8).unwrap();
        let lambda = 1e6;
        let n = 400_000;
        let est =
            estimate_cycle_quantities(&p, &cfg, &SplitSampler::poisson(lambda), n, 5).unwrap();
        let r = PoissonReference::new(&p, &cfg, lambda).unwrap();
        let sd = |e: Estimate<f64>| e.std_err * (n as f64).sqrt();
        assert!((sd(est.p_deep) / r.sd_deep - 1.0).abs() < 0.02);
        assert!((sd(est.e_tf) / r.sd_tf - 1.0).abs() < 0.02);
        assert!((sd(est.e_td) / r.sd_td - 1.0).abs() < 0.02);
    }

    #[test]
    fn scored_with_reference_spread() {
        let est = Estimate {
            mean: 0.0,
            std_err: 0.0,
        };
        let d = Deviation::score(est, 1e-6, 1e-3, 1_000_000);
        assert!((d.std_err - 1e-6).abs() < 1e-18);
        assert!(d.within(3.0));
        let d = Deviation::score(est, 1e-2, 1e-3, 1_000_000);
        assert!(!d.within(3.0));
        // undersized sample spread does not inflate z
        let est = Estimate {
            mean: 0.9e-6,
            std_err: 1e-9,
        };
        let d = Deviation::score(est, 1e-6, 1e-3, 1_000_000);
        assert_eq!(d.sample_std_err, 1e-9);
        assert!(d.within(3.0));
        // a reference without spread falls back to the sample
        let d = Deviation::score(
            Estimate {
                mean: 1.0,
                std_err: 0.0,
            },
            1.0,
            0.0,
            10,
        );
        assert_eq!(d.z, 0.0);
    }
}
