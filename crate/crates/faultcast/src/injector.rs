//! Fault injection scheduling.
//!
//! A schedule tiles the simulated timeline with back-to-back episodes. Each
//! episode draws a duration from a truncated exponential (30 to 90 minutes),
//! a fault type from a fixed multinomial, and then, for non-normal types,
//! independently enrolls each container with probability 0.4 and gives every
//! enrolled container a linear intensity ramp whose start and end levels are
//! drawn from type-specific uniform ranges.
//!
//! The sampler is written against explicit uniform draws so the boundary
//! behavior (`u = 0`, interval edges) is testable without mocking.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::rng::RngStream;
use crate::telemetry::{fmt_f64, FaultLabel};
use crate::{Error, Result};

/// Episode duration bounds, minutes.
pub const MIN_DURATION_MIN: f64 = 30.0;
pub const MAX_DURATION_MIN: f64 = 90.0;
/// Default rate of the (untruncated) exponential duration draw, 1/minutes.
pub const DEFAULT_LAMBDA_PER_MIN: f64 = 1.0 / 45.0;
/// Probability that a container participates in a non-normal episode.
pub const PARTICIPATION_P: f64 = 0.4;

/// Fault type probabilities in class-code order: normal, cpu, memory, loss.
pub const TYPE_PROBS: [f64; 4] = [0.3, 0.5, 0.1, 0.1];

/// Intensity ranges per fault type: the ramp start is uniform in
/// `[lo, hi]` and the ramp end is uniform in `[start, cap]`.
pub const CPU_START: (f64, f64) = (0.4, 0.9);
pub const CPU_END_CAP: f64 = 1.0;
pub const MEM_START: (f64, f64) = (0.25, 0.35);
pub const MEM_END_CAP: f64 = 0.6;
pub const LOSS_START: (f64, f64) = (0.01, 0.03);
pub const LOSS_END_CAP: f64 = 0.05;

/// Linear intensity ramp over an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressRamp {
    pub start_level: f64,
    pub end_level: f64,
}

impl StressRamp {
    /// Interpolated level at `frac` of the episode, `frac` in `[0, 1)`.
    pub fn level_at(&self, frac: f64) -> f64 {
        self.start_level + (self.end_level - self.start_level) * frac
    }
}

/// One scheduled episode. `assignments` lists enrolled containers with their
/// ramps; a non-normal episode with no enrolled containers behaves as normal.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultEpisode {
    pub fault_type: FaultLabel,
    pub start_s: u64,
    pub duration_s: u64,
    pub assignments: Vec<(String, StressRamp)>,
}

impl FaultEpisode {
    pub fn end_s(&self) -> u64 {
        self.start_s + self.duration_s
    }

    /// Ground-truth label of any second inside this episode.
    pub fn effective_label(&self) -> FaultLabel {
        if self.assignments.is_empty() {
            FaultLabel::Normal
        } else {
            self.fault_type
        }
    }

    /// Stress level for `container` at absolute second `t`, 0 if the
    /// container is not enrolled. `t` must fall inside the episode.
    pub fn stress_at(&self, container: &str, t: u64) -> f64 {
        debug_assert!(t >= self.start_s && t < self.end_s());
        let frac = (t - self.start_s) as f64 / self.duration_s as f64;
        self.assignments
            .iter()
            .find(|(c, _)| c == container)
            .map_or(0.0, |(_, ramp)| ramp.level_at(frac))
    }
}

/// Back-to-back episodes covering `[0, total_duration_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSchedule {
    pub episodes: Vec<FaultEpisode>,
    pub total_duration_s: u64,
}

impl InjectionSchedule {
    /// Episode containing second `t`.
    pub fn episode_at(&self, t: u64) -> &FaultEpisode {
        debug_assert!(t < self.total_duration_s);
        // Episodes are sorted by start; partition_point finds the last one
        // starting at or before t.
        let i = self.episodes.partition_point(|e| e.start_s <= t);
        &self.episodes[i - 1]
    }

    /// Ground-truth label for second `t`.
    pub fn label_at(&self, t: u64) -> FaultLabel {
        self.episode_at(t).effective_label()
    }

    /// Per-second labels over the whole timeline.
    pub fn labels(&self) -> Vec<FaultLabel> {
        let mut out = Vec::with_capacity(self.total_duration_s as usize);
        for e in &self.episodes {
            let label = e.effective_label();
            out.extend(std::iter::repeat(label).take(e.duration_s as usize));
        }
        out
    }
}

/// Continuous episode duration in seconds for a uniform draw `u` in `[0, 1)`.
///
/// This is the inverse CDF of an exponential with rate `lambda_per_min`
/// conditioned on landing in `[30, 90]` minutes:
/// `T = 30 + (-ln(1 - u * (1 - e^(-60 lambda))) / lambda)` minutes.
pub fn duration_from_uniform(u: f64, lambda_per_min: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&u));
    debug_assert!(lambda_per_min > 0.0);
    let span_min = MAX_DURATION_MIN - MIN_DURATION_MIN;
    let mass = 1.0 - libm::exp(-lambda_per_min * span_min);
    let minutes = MIN_DURATION_MIN + (-libm::log(1.0 - u * mass) / lambda_per_min);
    minutes * 60.0
}

/// Draw an episode duration, rounded to whole seconds.
pub fn sample_duration_s(rng: &mut RngStream, lambda_per_min: f64) -> u64 {
    let u = rng.next_f64();
    libm::round(duration_from_uniform(u, lambda_per_min)) as u64
}

/// Fault type for a uniform draw `u` in `[0, 1)`, using half-open cumulative
/// intervals over [`TYPE_PROBS`] in class-code order.
pub fn fault_type_from_uniform(u: f64) -> FaultLabel {
    debug_assert!((0.0..1.0).contains(&u));
    let mut acc = 0.0;
    for (label, p) in FaultLabel::ALL.iter().zip(TYPE_PROBS) {
        acc += p;
        if u < acc {
            return *label;
        }
    }
    FaultLabel::PacketLoss // unreachable for u < 1, modulo rounding
}

/// Draw a fault type.
pub fn sample_fault_type(rng: &mut RngStream) -> FaultLabel {
    let u = rng.next_f64();
    fault_type_from_uniform(u)
}

fn ramp_range(fault_type: FaultLabel) -> Option<((f64, f64), f64)> {
    match fault_type {
        FaultLabel::Normal => None,
        FaultLabel::CpuStress => Some((CPU_START, CPU_END_CAP)),
        FaultLabel::MemoryStress => Some((MEM_START, MEM_END_CAP)),
        FaultLabel::PacketLoss => Some((LOSS_START, LOSS_END_CAP)),
    }
}

/// Enroll containers for one episode. Normal episodes consume no draws.
/// For other types, containers are visited in the given order; each consumes
/// one Bernoulli draw, and enrolled ones consume two level draws.
pub fn sample_assignments(
    rng: &mut RngStream,
    containers: &[String],
    fault_type: FaultLabel,
) -> Vec<(String, StressRamp)> {
    let Some(((start_lo, start_hi), end_cap)) = ramp_range(fault_type) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for c in containers {
        if rng.bernoulli(PARTICIPATION_P) {
            let start_level = rng.uniform(start_lo, start_hi);
            let end_level = rng.uniform(start_level, end_cap);
            out.push((c.clone(), StressRamp { start_level, end_level }));
        }
    }
    out
}

/// Sample episodes until they cover `total_duration_s`, clipping the final
/// episode at the boundary. Draw order per episode: duration, type, then
/// assignments.
pub fn build_schedule(
    rng: &mut RngStream,
    containers: &[String],
    total_duration_s: u64,
    lambda_per_min: f64,
) -> Result<InjectionSchedule> {
    if total_duration_s == 0 {
        return Err(Error::invalid("total_duration_s", "must be positive"));
    }
    if !(lambda_per_min > 0.0) {
        return Err(Error::invalid("lambda_per_min", "must be positive"));
    }
    let mut episodes = Vec::new();
    let mut t = 0u64;
    while t < total_duration_s {
        let duration_s = sample_duration_s(rng, lambda_per_min).min(total_duration_s - t);
        let fault_type = sample_fault_type(rng);
        let assignments = sample_assignments(rng, containers, fault_type);
        episodes.push(FaultEpisode {
            fault_type,
            start_s: t,
            duration_s,
            assignments,
        });
        t += duration_s;
    }
    Ok(InjectionSchedule {
        episodes,
        total_duration_s,
    })
}

/// Write a schedule as CSV, one row per assignment; episodes without
/// assignments get a single row with empty container fields.
pub fn write_schedule_csv(path: &Path, schedule: &InjectionSchedule) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "episode_idx,fault_type,start_s,duration_s,container_id,start_level,end_level"
    )
    .map_err(|e| Error::io(path, e))?;
    for (i, e) in schedule.episodes.iter().enumerate() {
        if e.assignments.is_empty() {
            writeln!(
                w,
                "{},{},{},{},,,",
                i,
                e.fault_type.code(),
                e.start_s,
                e.duration_s
            )
            .map_err(|err| Error::io(path, err))?;
        } else {
            for (c, ramp) in &e.assignments {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    i,
                    e.fault_type.code(),
                    e.start_s,
                    e.duration_s,
                    c,
                    fmt_f64(ramp.start_level),
                    fmt_f64(ramp.end_level)
                )
                .map_err(|err| Error::io(path, err))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
