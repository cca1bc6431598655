use std::collections::VecDeque;

use super::event::{EventKey, EventQueue};
use super::{PhyState, SimTime};
use crate::error::SimError;
use crate::model::{CoalescingConfig, PhyProfile};
use crate::scalar::Scalar;
use crate::traffic::{ArrivalSource, TrafficSpec};

/// Arrivals sort ahead of every other event at the same instant, so a frame
/// landing exactly on a timer expiry or transition end is counted first.
const RANK_ARRIVAL: u8 = 0;
const RANK_OTHER: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Arrival(u32),
    TransitionDone,
    IdleTimer,
    Departure,
    DwellCap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep a [`CycleBreakdown`] per completed cycle.
    pub record_cycles: bool,
    /// Keep every state visit, zero-length ones included.
    pub record_states: bool,
}

impl SimOptions {
    pub fn traced() -> Self {
        Self {
            record_cycles: true,
            record_states: true,
        }
    }
}

/// Time spent in each power bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StateTimes {
    pub busy: SimTime,
    pub fast: SimTime,
    pub deep: SimTime,
    pub transition: SimTime,
}

impl StateTimes {
    fn add(&mut self, state: PhyState, dt: SimTime) {
        let bucket = match state {
            PhyState::Active => &mut self.busy,
            PhyState::FastWake => &mut self.fast,
            PhyState::DeepSleep => &mut self.deep,
            _ => &mut self.transition,
        };
        *bucket = *bucket + dt;
    }

    pub fn total(&self) -> SimTime {
        self.busy + self.fast + self.deep + self.transition
    }

    /// Mean power relative to an always-active PHY.
    pub fn phi(&self, phi_fast: f64, phi_deep: f64) -> f64 {
        let total = self.total().as_picos() as f64;
        if total == 0.0 {
            return 1.0;
        }
        let full = (self.busy.as_picos() + self.transition.as_picos()) as f64;
        (full + phi_fast * self.fast.as_picos() as f64 + phi_deep * self.deep.as_picos() as f64)
            / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WakeReason {
    Threshold,
    MaxDwell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateInterval {
    pub state: PhyState,
    pub start: SimTime,
    pub end: SimTime,
}

/// One completed coalescing cycle: from the queue emptying to the end of the
/// following busy period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleBreakdown {
    pub start: SimTime,
    pub end: SimTime,
    pub times: StateTimes,
    pub entered_deep: bool,
    /// `FastWake` or `DeepSleep`.
    pub woke_from: PhyState,
    pub wake_reason: WakeReason,
    pub queue_at_wake: usize,
    pub first_arrival: SimTime,
    /// Waiting time of the frame that opened the cycle's queue.
    pub first_delay: SimTime,
    pub frames_served: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub times: StateTimes,
    pub total: SimTime,
    pub phi_sim: f64,
    /// Mean arrival-to-service-start wait over departed frames (s); 0 when
    /// nothing departed.
    pub mean_queue_delay: f64,
    pub frames_in: u64,
    pub frames_out: u64,
    /// Frames queued or in service at the horizon.
    pub queue_remnant: u64,
    /// Completed cycles.
    pub cycles: u64,
    /// Completed cycles that went through Deep-Sleep.
    pub deep_cycles: u64,
    pub max_queue: usize,
    /// Wakes where neither the threshold nor the dwell cap held. Always zero
    /// for a correct machine.
    pub wake_violations: u64,
    /// Departures out of arrival order. Always zero.
    pub fifo_violations: u64,
    pub cycle_log: Vec<CycleBreakdown>,
    pub state_log: Vec<StateInterval>,
}

impl SimReport {
    pub fn t_active_busy(&self) -> f64 {
        self.times.busy.as_secs_f64()
    }

    pub fn t_fast(&self) -> f64 {
        self.times.fast.as_secs_f64()
    }

    pub fn t_deep(&self) -> f64 {
        self.times.deep.as_secs_f64()
    }

    pub fn t_transition(&self) -> f64 {
        self.times.transition.as_secs_f64()
    }

    pub fn t_total(&self) -> f64 {
        self.total.as_secs_f64()
    }

    pub fn rho_fast(&self) -> f64 {
        self.times.fast.as_picos() as f64 / self.total.as_picos() as f64
    }

    pub fn rho_deep(&self) -> f64 {
        self.times.deep.as_picos() as f64 / self.total.as_picos() as f64
    }

    /// Share of completed cycles that reached Deep-Sleep.
    pub fn deep_fraction(&self) -> Option<f64> {
        (self.cycles > 0).then(|| self.deep_cycles as f64 / self.cycles as f64)
    }

    /// Time partition, frame conservation, FIFO and wake soundness.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.times.total() != self.total {
            return Err(format!(
                "state buckets sum to {} but run lasted {}",
                self.times.total(),
                self.total
            ));
        }
        if self.frames_in != self.frames_out + self.queue_remnant {
            return Err(format!(
                "frames_in {} != frames_out {} + remnant {}",
                self.frames_in, self.frames_out, self.queue_remnant
            ));
        }
        if self.wake_violations != 0 {
            return Err(format!("{} wakes below threshold", self.wake_violations));
        }
        if self.fifo_violations != 0 {
            return Err(format!("{} out-of-order departures", self.fifo_violations));
        }
        if !(0.0..=1.0).contains(&self.phi_sim) {
            return Err(format!("phi_sim {} outside [0, 1]", self.phi_sim));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    arrival: SimTime,
    size: u32,
}

#[derive(Debug, Clone, Copy)]
struct Timing {
    atof: SimTime,
    ftoa: SimTime,
    ftod: SimTime,
    dtoa: SimTime,
    idle: SimTime,
    line_rate: f64,
    phi_fast: f64,
    phi_deep: f64,
}

#[derive(Debug, Clone, Copy)]
struct CycleAccum {
    start: SimTime,
    times: StateTimes,
    entered_deep: bool,
    woke_from: PhyState,
    wake_reason: WakeReason,
    queue_at_wake: usize,
    first_arrival: Option<SimTime>,
    first_delay: Option<SimTime>,
    frames_served: u64,
}

impl CycleAccum {
    fn new(start: SimTime) -> Self {
        Self {
            start,
            times: StateTimes::default(),
            entered_deep: false,
            woke_from: PhyState::FastWake,
            wake_reason: WakeReason::Threshold,
            queue_at_wake: 0,
            first_arrival: None,
            first_delay: None,
            frames_served: 0,
        }
    }
}

/// Event-driven model of one transmitter. Starts at a cycle boundary: empty
/// queue, entering AtoF at time zero.
#[derive(Debug)]
pub struct Simulator<S> {
    timing: Timing,
    q_fast: usize,
    q_deep: usize,
    max_dwell: Option<SimTime>,
    opts: SimOptions,
    source: S,
    horizon: SimTime,

    now: SimTime,
    state: PhyState,
    state_since: SimTime,
    events: EventQueue<Event>,
    queue: VecDeque<Queued>,
    in_service: Option<(Queued, SimTime)>,
    idle_timer: Option<EventKey>,
    dwell_cap: Option<EventKey>,
    cycle: CycleAccum,

    times: StateTimes,
    frames_in: u64,
    frames_out: u64,
    delay_sum: u128,
    last_departed_arrival: SimTime,
    cycles: u64,
    deep_cycles: u64,
    max_queue: usize,
    wake_violations: u64,
    fifo_violations: u64,
    cycle_log: Vec<CycleBreakdown>,
    state_log: Vec<StateInterval>,
}

impl<S: ArrivalSource> Simulator<S> {
    pub fn new<F: Scalar>(
        profile: &PhyProfile<F>,
        cfg: &CoalescingConfig<F>,
        source: S,
        horizon: f64,
        opts: SimOptions,
    ) -> Result<Self, SimError> {
        profile.validate()?;
        cfg.validate()?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(SimError::BadHorizon(horizon));
        }
        let t = |v: F| SimTime::from_secs_f64(v.as_f64());
        let timing = Timing {
            atof: t(profile.t_atof),
            ftoa: t(profile.t_ftoa),
            ftod: t(profile.t_ftod),
            dtoa: t(profile.t_dtoa),
            idle: t(profile.t_idle),
            line_rate: profile.line_rate.as_f64(),
            phi_fast: profile.phi_fast.as_f64(),
            phi_deep: profile.phi_deep.as_f64(),
        };
        let mut sim = Self {
            timing,
            q_fast: cfg.q_fast as usize,
            q_deep: cfg.q_deep as usize,
            max_dwell: cfg.max_dwell.map(t),
            opts,
            source,
            horizon: SimTime::from_secs_f64(horizon),
            now: SimTime::ZERO,
            state: PhyState::AtoF,
            state_since: SimTime::ZERO,
            events: EventQueue::new(),
            queue: VecDeque::new(),
            in_service: None,
            idle_timer: None,
            dwell_cap: None,
            cycle: CycleAccum::new(SimTime::ZERO),
            times: StateTimes::default(),
            frames_in: 0,
            frames_out: 0,
            delay_sum: 0,
            last_departed_arrival: SimTime::ZERO,
            cycles: 0,
            deep_cycles: 0,
            max_queue: 0,
            wake_violations: 0,
            fifo_violations: 0,
            cycle_log: Vec::new(),
            state_log: Vec::new(),
        };
        sim.events
            .schedule(timing.atof, RANK_OTHER, Event::TransitionDone);
        sim.pull_arrival();
        Ok(sim)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn state(&self) -> PhyState {
        self.state
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Processes the next event at or before the horizon. Returns `false`
    /// once nothing is left to do.
    pub fn step(&mut self) -> bool {
        match self.events.peek_time() {
            Some(t) if t <= self.horizon => {}
            _ => return false,
        }
        let (t, event) = self.events.pop().expect("peeked event");
        self.now = t;
        match event {
            Event::Arrival(size) => self.on_arrival(size),
            Event::TransitionDone => self.on_transition_done(),
            Event::IdleTimer => self.on_idle_timer(),
            Event::Departure => self.on_departure(),
            Event::DwellCap => self.on_dwell_cap(),
        }
        true
    }

    pub fn run(mut self) -> SimReport {
        while self.step() {}
        self.finish()
    }

    /// Closes the accounting at the horizon.
    pub fn finish(mut self) -> SimReport {
        self.now = self.horizon;
        let dt = self.now - self.state_since;
        self.times.add(self.state, dt);
        if self.opts.record_states {
            self.state_log.push(StateInterval {
                state: self.state,
                start: self.state_since,
                end: self.now,
            });
        }
        let phi_sim = self.times.phi(self.timing.phi_fast, self.timing.phi_deep);
        let mean_queue_delay = if self.frames_out > 0 {
            self.delay_sum as f64 / self.frames_out as f64 / 1e12
        } else {
            0.0
        };
        SimReport {
            times: self.times,
            total: self.horizon,
            phi_sim,
            mean_queue_delay,
            frames_in: self.frames_in,
            frames_out: self.frames_out,
            queue_remnant: self.queue.len() as u64 + self.in_service.is_some() as u64,
            cycles: self.cycles,
            deep_cycles: self.deep_cycles,
            max_queue: self.max_queue,
            wake_violations: self.wake_violations,
            fifo_violations: self.fifo_violations,
            cycle_log: self.cycle_log,
            state_log: self.state_log,
        }
    }

    fn pull_arrival(&mut self) {
        if let Some(a) = self.source.next_arrival() {
            let t = SimTime::from_secs_f64(a.time).max(self.now);
            if t <= self.horizon {
                self.events
                    .schedule(t, RANK_ARRIVAL, Event::Arrival(a.size));
            }
        }
    }

    fn enter(&mut self, next: PhyState) {
        debug_assert!(
            self.state.successors().contains(&next),
            "illegal transition {:?} -> {:?}",
            self.state,
            next
        );
        let dt = self.now - self.state_since;
        self.times.add(self.state, dt);
        self.cycle.times.add(self.state, dt);
        if self.opts.record_states {
            self.state_log.push(StateInterval {
                state: self.state,
                start: self.state_since,
                end: self.now,
            });
        }
        self.state = next;
        self.state_since = self.now;
    }

    fn after(&mut self, dt: SimTime, event: Event) -> EventKey {
        self.events.schedule(self.now + dt, RANK_OTHER, event)
    }

    fn dwell_expired(&self) -> bool {
        match (self.max_dwell, self.queue.front()) {
            (Some(cap), Some(oldest)) => self.now - oldest.arrival >= cap,
            _ => false,
        }
    }

    /// Leaves a sleeping state towards Active.
    fn wake(&mut self, threshold: usize) {
        let (from, transition, dt) = match self.state {
            PhyState::FastWake => (PhyState::FastWake, PhyState::FtoA, self.timing.ftoa),
            PhyState::DeepSleep => (PhyState::DeepSleep, PhyState::DtoA, self.timing.dtoa),
            s => unreachable!("wake from {s:?}"),
        };
        let reason = if self.queue.len() >= threshold {
            WakeReason::Threshold
        } else {
            if !self.dwell_expired() {
                self.wake_violations += 1;
            }
            WakeReason::MaxDwell
        };
        if let Some(key) = self.idle_timer.take() {
            self.events.cancel(key);
        }
        if let Some(key) = self.dwell_cap.take() {
            self.events.cancel(key);
        }
        self.cycle.woke_from = from;
        self.cycle.wake_reason = reason;
        self.cycle.queue_at_wake = self.queue.len();
        self.enter(transition);
        self.after(dt, Event::TransitionDone);
    }

    fn on_arrival(&mut self, size: u32) {
        self.frames_in += 1;
        self.queue.push_back(Queued {
            arrival: self.now,
            size,
        });
        self.max_queue = self.max_queue.max(self.queue.len());
        if self.state != PhyState::Active && self.cycle.first_arrival.is_none() {
            self.cycle.first_arrival = Some(self.now);
            if let Some(cap) = self.max_dwell {
                self.dwell_cap = Some(self.after(cap, Event::DwellCap));
            }
        }
        match self.state {
            PhyState::FastWake if self.queue.len() >= self.q_fast => self.wake(self.q_fast),
            PhyState::DeepSleep if self.queue.len() >= self.q_deep => self.wake(self.q_deep),
            _ => {}
        }
        self.pull_arrival();
    }

    fn on_transition_done(&mut self) {
        match self.state {
            PhyState::AtoF => {
                self.enter(PhyState::FastWake);
                if self.queue.len() >= self.q_fast || self.dwell_expired() {
                    self.wake(self.q_fast);
                } else {
                    self.idle_timer = Some(self.after(self.timing.idle, Event::IdleTimer));
                }
            }
            PhyState::FtoD => {
                self.enter(PhyState::DeepSleep);
                if self.queue.len() >= self.q_deep || self.dwell_expired() {
                    self.wake(self.q_deep);
                }
            }
            PhyState::FtoA | PhyState::DtoA => {
                self.enter(PhyState::Active);
                self.start_service();
            }
            s => unreachable!("transition completed in {s:?}"),
        }
    }

    fn on_idle_timer(&mut self) {
        debug_assert_eq!(self.state, PhyState::FastWake);
        self.idle_timer = None;
        self.cycle.entered_deep = true;
        self.enter(PhyState::FtoD);
        self.after(self.timing.ftod, Event::TransitionDone);
    }

    fn on_dwell_cap(&mut self) {
        self.dwell_cap = None;
        match self.state {
            PhyState::FastWake => self.wake(self.q_fast),
            PhyState::DeepSleep => self.wake(self.q_deep),
            // AtoF / FtoD re-check on completion; otherwise already waking.
            _ => {}
        }
    }

    fn start_service(&mut self) {
        let frame = self
            .queue
            .pop_front()
            .expect("service starts with a queued frame");
        if self.cycle.first_delay.is_none() {
            self.cycle.first_delay = Some(self.now - frame.arrival);
        }
        let service = SimTime::from_secs_f64(frame.size as f64 * 8.0 / self.timing.line_rate);
        self.in_service = Some((frame, self.now));
        self.after(service, Event::Departure);
    }

    fn on_departure(&mut self) {
        let (frame, started) = self
            .in_service
            .take()
            .expect("departure without frame in service");
        self.frames_out += 1;
        self.cycle.frames_served += 1;
        self.delay_sum += (started - frame.arrival).as_picos() as u128;
        if frame.arrival < self.last_departed_arrival {
            self.fifo_violations += 1;
        }
        self.last_departed_arrival = frame.arrival;
        if !self.queue.is_empty() {
            self.start_service();
            return;
        }
        self.enter(PhyState::AtoF);
        self.close_cycle();
        self.after(self.timing.atof, Event::TransitionDone);
    }

    fn close_cycle(&mut self) {
        let times = self.cycle.times;
        self.cycles += 1;
        if self.cycle.entered_deep {
            self.deep_cycles += 1;
        }
        if self.opts.record_cycles {
            self.cycle_log.push(CycleBreakdown {
                start: self.cycle.start,
                end: self.now,
                times,
                entered_deep: self.cycle.entered_deep,
                woke_from: self.cycle.woke_from,
                wake_reason: self.cycle.wake_reason,
                queue_at_wake: self.cycle.queue_at_wake,
                first_arrival: self.cycle.first_arrival.unwrap_or(self.cycle.start),
                first_delay: self.cycle.first_delay.unwrap_or(SimTime::ZERO),
                frames_served: self.cycle.frames_served,
            });
        }
        self.cycle = CycleAccum::new(self.now);
    }
}

/// Runs one simulation of `traffic` up to `horizon` seconds.
pub fn simulate<F: Scalar>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    traffic: &TrafficSpec,
    horizon: f64,
    seed: u64,
) -> Result<SimReport, SimError> {
    simulate_with(profile, cfg, traffic, horizon, seed, SimOptions::default())
}

pub fn simulate_with<F: Scalar>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    traffic: &TrafficSpec,
    horizon: f64,
    seed: u64,
    opts: SimOptions,
) -> Result<SimReport, SimError> {
    traffic.validate()?;
    simulate_source(profile, cfg, traffic.source(seed), horizon, opts)
}

/// Runs a simulation fed by an arbitrary arrival source.
pub fn simulate_source<F: Scalar, S: ArrivalSource>(
    profile: &PhyProfile<F>,
    cfg: &CoalescingConfig<F>,
    source: S,
    horizon: f64,
    opts: SimOptions,
) -> Result<SimReport, SimError> {
    Ok(Simulator::new(profile, cfg, source, horizon, opts)?.run())
}
