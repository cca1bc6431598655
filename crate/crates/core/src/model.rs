//! PHY and coalescing parameters, and the analytical energy model for
//! Poisson arrivals.
//!
//! A coalescing cycle starts when the transmit queue empties. The PHY spends
//! `t_atof` moving to Fast-Wake, waits there up to `t_idle` for the `q_fast`-th
//! frame of the cycle, and otherwise drops to Deep-Sleep (after `t_ftod`) until
//! `q_deep` frames have been buffered. Arrivals are counted from the instant
//! the queue empties, so the Fast-Wake decision window is `t_atof + t_idle`.
//!
//! Transitions draw full active power; the normalized consumption is
//!
//! ```text
//! φ = 1 - (1 - ρ) [(1-φ_f) E[T_f] + (1-φ_d) E[T_d]] / (E[T_f] + E[T_d] + E[T_tr])
//! ```
//!
//! The optional `max_dwell` cap of [`CoalescingConfig`] only affects the
//! simulator; none of the closed forms here account for it.

use crate::error::ModelError;
use crate::gamma::{poisson_pmf, tails};
use crate::scalar::Scalar;

/// Physical-layer constants. Durations in seconds, `line_rate` in bit/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyProfile<F> {
    pub t_atof: F,
    pub t_ftoa: F,
    pub t_ftod: F,
    pub t_dtoa: F,
    pub t_idle: F,
    pub line_rate: F,
    /// Fast-Wake power as a fraction of active power.
    pub phi_fast: F,
    /// Deep-Sleep power as a fraction of active power.
    pub phi_deep: F,
}

impl<F: Scalar> PhyProfile<F> {
    /// 40 Gb/s dual-mode PHY: 0.90/0.34/1.00/5.50 µs transitions, 3.5 µs
    /// idle timeout, φ_f = 0.7, φ_d = 0.1.
    pub fn dual_mode_40g() -> Self {
        Self {
            t_atof: F::of(0.90e-6),
            t_ftoa: F::of(0.34e-6),
            t_ftod: F::of(1.00e-6),
            t_dtoa: F::of(5.50e-6),
            t_idle: F::of(3.50e-6),
            line_rate: F::of(40e9),
            phi_fast: F::of(0.7),
            phi_deep: F::of(0.1),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let durations = [
            ("t_atof", self.t_atof),
            ("t_ftoa", self.t_ftoa),
            ("t_ftod", self.t_ftod),
            ("t_dtoa", self.t_dtoa),
            ("t_idle", self.t_idle),
        ];
        for (name, v) in durations {
            if !(v >= F::zero()) || !v.is_finite() {
                return Err(ModelError::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.line_rate > F::zero()) || !self.line_rate.is_finite() {
            return Err(ModelError::config(format!(
                "line_rate must be > 0, got {}",
                self.line_rate
            )));
        }
        if !(self.phi_deep >= F::zero()
            && self.phi_deep <= self.phi_fast
            && self.phi_fast <= F::one())
        {
            return Err(ModelError::config(format!(
                "efficiency factors must satisfy 0 <= phi_deep <= phi_fast <= 1, got phi_deep={} phi_fast={}",
                self.phi_deep, self.phi_fast
            )));
        }
        Ok(())
    }

    /// Service rate in frames/s for frames of `frame_bytes`.
    pub fn service_rate(&self, frame_bytes: F) -> F {
        self.line_rate / (frame_bytes * F::of(8.0))
    }

    /// End of the Fast-Wake decision window measured from the queue emptying.
    pub fn wake_window(&self) -> F {
        self.t_atof + self.t_idle
    }
}

/// Queue thresholds and the optional low-power dwell cap (seconds, measured
/// from the arrival of the first buffered frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalescingConfig<F> {
    pub q_fast: u32,
    pub q_deep: u32,
    pub max_dwell: Option<F>,
}

impl<F: Scalar> CoalescingConfig<F> {
    pub fn new(q_fast: u32, q_deep: u32) -> Result<Self, ModelError> {
        let cfg = Self {
            q_fast,
            q_deep,
            max_dwell: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// No coalescing: wake on the first frame from either mode.
    pub fn no_coalescing() -> Self {
        Self {
            q_fast: 1,
            q_deep: 1,
            max_dwell: None,
        }
    }

    pub fn with_max_dwell(mut self, cap: F) -> Result<Self, ModelError> {
        self.max_dwell = Some(cap);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.q_fast < 1 {
            return Err(ModelError::config("Q_f must be >= 1"));
        }
        if self.q_fast > self.q_deep {
            return Err(ModelError::config(format!(
                "Q_f <= Q_d required, got Q_f={} Q_d={}",
                self.q_fast, self.q_deep
            )));
        }
        if let Some(cap) = self.max_dwell {
            if !(cap > F::zero()) || !cap.is_finite() {
                return Err(ModelError::config(format!(
                    "max_dwell must be > 0, got {cap}"
                )));
            }
        }
        Ok(())
    }
}

/// Mean cycle components and the resulting time fractions and energy ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBreakdown<F> {
    pub e_tf: F,
    pub e_td: F,
    pub e_ttr: F,
    pub p_deep: F,
    pub rho: F,
    pub rho_f: F,
    pub rho_d: F,
    pub phi: F,
}

impl<F: Scalar> ModelBreakdown<F> {
    /// Combines mean sleeping times and the Deep-Sleep probability into time
    /// fractions and φ. Shared by the closed forms and the Monte-Carlo oracle.
    pub fn assemble(profile: &PhyProfile<F>, rho: F, p_deep: F, e_tf: F, e_td: F) -> Self {
        let e_ttr = expected_transition(profile, p_deep);
        let inactive = e_tf + e_td + e_ttr;
        let idle_share = F::one() - rho;
        let (rho_f, rho_d) = if inactive > F::zero() {
            (idle_share * e_tf / inactive, idle_share * e_td / inactive)
        } else {
            (F::zero(), F::zero())
        };
        let phi = F::one()
            - (F::one() - profile.phi_fast) * rho_f
            - (F::one() - profile.phi_deep) * rho_d;
        Self {
            e_tf,
            e_td,
            e_ttr,
            p_deep,
            rho,
            rho_f,
            rho_d,
            phi,
        }
    }
}

fn check_rate<F: Scalar>(lambda: F) -> Result<(), ModelError> {
    if lambda > F::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(ModelError::domain(format!(
            "arrival rate must be > 0, got {lambda}"
        )))
    }
}

/// Probability that a cycle reaches Deep-Sleep: fewer than `q_fast` Poisson
/// arrivals within `t_atof + t_idle`, i.e. `R(Q_f, λ(T_AtoF + T_idle))`.
pub fn p_deep<F: Scalar>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    lambda: F,
) -> Result<F, ModelError> {
    check_rate(lambda)?;
    Ok(tails(cfg.q_fast, lambda * profile.wake_window())?.1)
}

/// Mean Fast-Wake dwell per cycle for Poisson arrivals.
///
/// The `q_fast`-th arrival is Erlang distributed; integrating its density
/// against the dwell `clamp(t - T_AtoF, 0, T_idle)` gives
/// `Q_f (R(Q_f+1, λa) - R(Q_f+1, λw))/λ - a R(Q_f, λa) + w p_d` with
/// `a = T_AtoF`, `w = T_AtoF + T_idle`.
pub fn expected_fast_wake<F: Scalar>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    lambda: F,
) -> Result<F, ModelError> {
    check_rate(lambda)?;
    let q = cfg.q_fast;
    let a = profile.t_atof;
    let w = profile.wake_window();
    let (lo_a, up_a) = tails(q + 1, lambda * a)?;
    let (lo_w, up_w) = tails(q + 1, lambda * w)?;
    // Difference of the two upper tails, taken on whichever side is small.
    let window_mass = if up_a > F::of(0.5) {
        lo_w - lo_a
    } else {
        up_a - up_w
    };
    let reached_during_atof = tails(q, lambda * a)?.1;
    let pd = tails(q, lambda * w)?.1;
    let e_tf = F::of_u32(q) * window_mass / lambda - a * reached_during_atof + w * pd;
    Ok(e_tf.max(F::zero()).min(profile.t_idle))
}

/// Mean Deep-Sleep dwell per cycle for Poisson arrivals.
///
/// Conditioned on `i < Q_f` arrivals during the window, the PHY sleeps until
/// `Q_d - i` further frames arrive, less the `T_FtoD` spent transitioning.
pub fn expected_deep_sleep<F: Scalar>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    lambda: F,
) -> Result<F, ModelError> {
    check_rate(lambda)?;
    let window_count = lambda * profile.wake_window();
    let c = profile.t_ftod;
    let mut total = F::zero();
    for i in 0..cfg.q_fast {
        let weight = poisson_pmf(i, window_count);
        if weight == F::zero() {
            continue;
        }
        let k = cfg.q_deep - i;
        let residual =
            F::of_u32(k) * tails(k + 1, lambda * c)?.1 / lambda - c * tails(k, lambda * c)?.1;
        total = total + weight * residual.max(F::zero());
    }
    Ok(total)
}

/// Mean transition time per cycle: every cycle pays `T_AtoF`; Deep-Sleep
/// cycles add `T_FtoD + T_DtoA`, the rest `T_FtoA`.
pub fn expected_transition<F: Scalar>(profile: &PhyProfile<F>, p_deep: F) -> F {
    profile.t_atof
        + (profile.t_ftod + profile.t_dtoa) * p_deep
        + profile.t_ftoa * (F::one() - p_deep)
}

/// Full model evaluation for Poisson arrivals of fixed-size frames.
///
/// `max_dwell` in `cfg` is ignored.
pub fn energy_ratio<F: Scalar>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    lambda: F,
    frame_bytes: F,
) -> Result<ModelBreakdown<F>, ModelError> {
    profile.validate()?;
    cfg.validate()?;
    check_rate(lambda)?;
    if !(frame_bytes > F::zero()) {
        return Err(ModelError::domain(format!(
            "frame size must be > 0, got {frame_bytes}"
        )));
    }
    let rho = lambda / profile.service_rate(frame_bytes);
    if !(rho < F::one()) {
        return Err(ModelError::Unstable { rho: rho.as_f64() });
    }
    let pd = p_deep(profile, cfg, lambda)?;
    let e_tf = expected_fast_wake(profile, cfg, lambda)?;
    let e_td = expected_deep_sleep(profile, cfg, lambda)?;
    Ok(ModelBreakdown::assemble(profile, rho, pd, e_tf, e_td))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const LAMBDA_2G: f64 = 2e9 / 12000.0;

    fn profile() -> PhyProfile<f64> {
        PhyProfile::dual_mode_40g()
    }

    fn cfg(qf: u32, qd: u32) -> CoalescingConfig<f64> {
        CoalescingConfig::new(qf, qd).unwrap()
    }

    /// `Σ_{k=1}^{q} [R(k, λa) - R(k, λw)] / λ`: the Fast-Wake mean as the
    /// integral of the Erlang survival function over the window.
    fn fast_wake_by_survival(p: &PhyProfile<f64>, q: u32, lambda: f64) -> f64 {
        (1..=q)
            .map(|k| {
                tails(k, lambda * p.t_atof).unwrap().1
                    - tails(k, lambda * p.wake_window()).unwrap().1
            })
            .sum::<f64>()
            / lambda
    }

    #[test]
    fn p_deep_examples() {
        let p = profile();
        let pd = p_deep(&p, &cfg(1, 1), LAMBDA_2G).unwrap();
        assert_relative_eq!(pd, (-LAMBDA_2G * 4.4e-6).exp(), max_relative = 1e-13);
        assert!((pd - 0.480305).abs() < 5e-7);

        let pd = p_deep(&p, &cfg(2, 2), 1e6).unwrap();
        assert_relative_eq!(pd, (-4.4_f64).exp() * 5.4, max_relative = 1e-12);

        let tiny = p_deep(&p, &cfg(1, 1), 1e-3).unwrap();
        assert!(tiny > 1.0 - 1e-8);

        assert!(p_deep(&p, &cfg(1, 1), 0.0).is_err());
    }

    #[test]
    fn fast_wake_examples() {
        let p = profile();
        let e = expected_fast_wake(&p, &cfg(1, 1), LAMBDA_2G).unwrap();
        let memoryless =
            (-LAMBDA_2G * p.t_atof).exp() * (1.0 - (-LAMBDA_2G * p.t_idle).exp()) / LAMBDA_2G;
        assert_relative_eq!(e, memoryless, max_relative = 1e-12);
        assert!((e - 2.2824e-6).abs() < 5e-11);

        let slow = expected_fast_wake(&p, &cfg(1, 1), 1e-3).unwrap();
        assert_relative_eq!(slow, p.t_idle, max_relative = 1e-6);
        let fast = expected_fast_wake(&p, &cfg(1, 1), 1e10).unwrap();
        assert!(fast < 1e-15);
        assert!(expected_fast_wake(&p, &cfg(1, 1), -1.0).is_err());
    }

    #[test]
    fn fast_wake_memoryless_identity_on_grid() {
        let p = profile();
        for i in 0..=40 {
            let lambda = 10f64.powf(3.0 + 3.6 * i as f64 / 40.0);
            let e = expected_fast_wake(&p, &cfg(1, 1), lambda).unwrap();
            let want = (-lambda * p.t_atof).exp() * (1.0 - (-lambda * p.t_idle).exp()) / lambda;
            assert_relative_eq!(e, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn fast_wake_matches_survival_integral() {
        let p = profile();
        for q in [1, 2, 5, 8, 32] {
            for load in [2.0, 10.0, 26.0, 38.0] {
                let lambda = load * 1e9 / 12000.0;
                let e = expected_fast_wake(&p, &cfg(q, 128), lambda).unwrap();
                let want = fast_wake_by_survival(&p, q, lambda);
                assert!(
                    (e - want).abs() < 1e-12 * p.t_idle,
                    "q={q} load={load}: {e} vs {want}"
                );
            }
        }
    }

    #[test]
    fn deep_sleep_examples() {
        let p = profile();
        let pd = p_deep(&p, &cfg(1, 1), LAMBDA_2G).unwrap();
        let e = expected_deep_sleep(&p, &cfg(1, 1), LAMBDA_2G).unwrap();
        assert_relative_eq!(
            e,
            pd * (-LAMBDA_2G * p.t_ftod).exp() / LAMBDA_2G,
            max_relative = 1e-12
        );
        assert!((e - 2.4394e-6).abs() < 5e-11);

        let huge = expected_deep_sleep(&p, &cfg(4, 16), 1e10).unwrap();
        assert!(huge < 1e-30);

        let no_ftod = PhyProfile { t_ftod: 0.0, ..p };
        let e = expected_deep_sleep(&no_ftod, &cfg(1, 1), 1e6).unwrap();
        let pd = p_deep(&no_ftod, &cfg(1, 1), 1e6).unwrap();
        assert_relative_eq!(e, pd / 1e6, max_relative = 1e-12);
    }

    #[test]
    fn transition_examples() {
        let p = profile();
        assert_relative_eq!(
            expected_transition(&p, 0.480305),
            4.19868e-6,
            max_relative = 1e-6
        );
        assert_relative_eq!(expected_transition(&p, 0.0), 1.24e-6, max_relative = 1e-12);
        assert_relative_eq!(expected_transition(&p, 1.0), 7.40e-6, max_relative = 1e-12);
    }

    #[test]
    fn energy_ratio_at_2g() {
        let b = energy_ratio(&profile(), &cfg(1, 1), LAMBDA_2G, 1500.0).unwrap();
        assert_relative_eq!(b.rho, 0.05, max_relative = 1e-12);
        assert!((b.e_ttr - 4.1987e-6).abs() < 5e-11);
        assert!((b.phi - 0.6933).abs() < 5e-5);
        // mpmath reference at 40 digits
        assert_relative_eq!(b.phi, 0.693_269_835_654_606_8, max_relative = 1e-12);
    }

    #[test]
    fn energy_ratio_limits() {
        let p = profile();
        for (qf, qd) in [(1, 1), (2, 8), (32, 128)] {
            let b = energy_ratio(&p, &cfg(qf, qd), 1.0, 1500.0).unwrap();
            assert!(b.phi >= 0.1 && b.phi <= 0.101, "{}", b.phi);
            let mu = p.service_rate(1500.0);
            let b = energy_ratio(&p, &cfg(qf, qd), 0.9999 * mu, 1500.0).unwrap();
            assert!(b.phi > 0.999);
        }
    }

    #[test]
    fn energy_ratio_rejects_bad_inputs() {
        let p = profile();
        let mu = p.service_rate(1500.0);
        assert!(matches!(
            energy_ratio(&p, &cfg(1, 1), mu, 1500.0),
            Err(ModelError::Unstable { .. })
        ));
        assert!(matches!(
            energy_ratio(&p, &cfg(1, 1), 0.0, 1500.0),
            Err(ModelError::Domain(_))
        ));
        let bad = PhyProfile { t_dtoa: -1e-6, ..p };
        assert!(matches!(
            energy_ratio(&bad, &cfg(1, 1), 1e5, 1500.0),
            Err(ModelError::Config(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(CoalescingConfig::<f64>::new(3, 2)
            .unwrap_err()
            .to_string()
            .contains("Q_f <= Q_d"));
        assert!(CoalescingConfig::<f64>::new(0, 2).is_err());
        assert!(CoalescingConfig::<f64>::no_coalescing()
            .with_max_dwell(0.0)
            .is_err());
        assert!(CoalescingConfig::<f64>::no_coalescing()
            .with_max_dwell(1e-5)
            .is_ok());
        let bad = PhyProfile {
            phi_deep: 0.8,
            ..profile()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn max_dwell_does_not_change_model() {
        let p = profile();
        let plain = energy_ratio(&p, &cfg(8, 32), 1e6, 1500.0).unwrap();
        let capped =
            energy_ratio(&p, &cfg(8, 32).with_max_dwell(1e-6).unwrap(), 1e6, 1500.0).unwrap();
        assert_eq!(plain, capped);
    }

    #[test]
    fn single_precision_model() {
        let p = PhyProfile::<f32>::dual_mode_40g();
        let c = CoalescingConfig::<f32>::new(1, 1).unwrap();
        let b = energy_ratio(&p, &c, 2e9_f32 / 12000.0, 1500.0).unwrap();
        assert!((b.phi - 0.6933).abs() < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn thresholds() -> impl Strategy<Value = (u32, u32)> {
            (1u32..40).prop_flat_map(|qf| (Just(qf), qf..160))
        }

        proptest! {
            #[test]
            fn breakdown_invariants((qf, qd) in thresholds(), load in 0.01f64..39.9) {
                let p = profile();
                let lambda = load * 1e9 / 12000.0;
                let b = energy_ratio(&p, &cfg(qf, qd), lambda, 1500.0).unwrap();
                prop_assert!((0.0..=1.0).contains(&b.p_deep));
                prop_assert!(b.e_tf >= 0.0 && b.e_tf <= p.t_idle);
                prop_assert!(b.e_td >= 0.0);
                prop_assert!(b.e_ttr >= p.t_atof);
                prop_assert!(b.rho_f >= 0.0 && b.rho_d >= 0.0);
                prop_assert!(b.rho + b.rho_f + b.rho_d <= 1.0 + 1e-12);
                prop_assert!(b.phi <= 1.0 + 1e-12);
                prop_assert!(b.phi >= b.rho + (1.0 - b.rho) * p.phi_deep - 1e-12);
            }

            #[test]
            fn p_deep_monotone((qf, qd) in thresholds(), lambda in 1e3f64..3e6, factor in 1.0f64..4.0) {
                let p = profile();
                let base = p_deep(&p, &cfg(qf, qd), lambda).unwrap();
                prop_assert!(p_deep(&p, &cfg(qf, qd), lambda * factor).unwrap() <= base);
                prop_assert!(p_deep(&p, &cfg(qf + 1, qd + 1), lambda).unwrap() >= base);
            }

            #[test]
            fn deep_sleep_monotone((qf, qd) in thresholds(), lambda in 1e3f64..3e6, factor in 1.0f64..4.0) {
                let p = profile();
                let base = expected_deep_sleep(&p, &cfg(qf, qd), lambda).unwrap();
                let faster = expected_deep_sleep(&p, &cfg(qf, qd), lambda * factor).unwrap();
                prop_assert!(faster <= base * (1.0 + 1e-12));
                let deeper = expected_deep_sleep(&p, &cfg(qf, qd + 1), lambda).unwrap();
                prop_assert!(deeper >= base * (1.0 - 1e-12));
            }

            #[test]
            fn phi_non_increasing_in_q_deep((qf, qd) in thresholds(), load in 0.5f64..39.0) {
                let p = profile();
                let lambda = load * 1e9 / 12000.0;
                let a = energy_ratio(&p, &cfg(qf, qd), lambda, 1500.0).unwrap().phi;
                let b = energy_ratio(&p, &cfg(qf, qd + 1), lambda, 1500.0).unwrap().phi;
                prop_assert!(b <= a + 1e-12);
            }
        }
    }
}
