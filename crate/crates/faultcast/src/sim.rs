//! Deterministic synthetic testbed: a small RAN deployment of paired CU and
//! DU containers on one host, generating telemetry at native cadences under
//! a diurnal traffic profile, with fault effects layered on top of the
//! baseline stream according to an injection schedule.
//!
//! The baseline model is mean-reverting noise around operating points that
//! move with the traffic load: bitrates follow demand capped by link
//! capacity, container CPU follows served traffic, host metrics aggregate
//! the containers, and temperature low-passes host CPU. Fault effects are
//! pure per-frame edits driven by the schedule, so zero stress is exactly
//! the identity and paired runs with a shared seed isolate the effect.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::sync::Arc;

use crate::injector::InjectionSchedule;
use crate::preprocess::{align, impute};
use crate::rng::RngStream;
use crate::telemetry::{
    build_default_schema, DatasetTable, FaultLabel,Schema, TelemetryFrame, INFRA_METRICS,
    PLATFORM_METRICS, RAN_METRICS,
};
use crate::{Error, Result};

pub use crate::telemetry::{RAN_CADENCE_MS, SLOW_CADENCE_MS};

/// RAN sub-samples per second.
const SUBTICKS: u64 = 1000 / RAN_CADENCE_MS as u64;

// Resource allocations mirrored from the testbed deployment: each DU gets
// 3 cores / 3 GB, each CU 3 cores / 2 GB, on one shared host.
const DU_CORES: f64 = 3.0;
const CU_CORES: f64 = 3.0;
const DU_GB: f64 = 3.0;
const CU_GB: f64 = 2.0;
const HOST_CORES: f64 = 48.0;
const HOST_GB: f64 = 64.0;

// Baseline operating points.
const SINR_MU: f64 = 25.0;
const SINR_SD: f64 = 1.5;
const SINR_THETA: f64 = 0.1;
const DL_CAPACITY_BPS: f64 = 80e6;
const UL_CAPACITY_BPS: f64 = 40e6;
const DL_DEMAND_BPS: f64 = 60e6;
const UL_DEMAND_BPS: f64 = 10e6;
const UL_FLOOR_BPS: f64 = 5e6;
const MCS_MAX: f64 = 28.0;
const CQI_MAX: f64 = 15.0;
const TEMP_IDLE_C: f64 = 42.0;
const TEMP_PER_CPU: f64 = 30.0;
const TEMP_ALPHA: f64 = 0.05;
const POWER_IDLE_W: f64 = 120.0;
const POWER_PER_CPU: f64 = 260.0;
const LOAD1_PER_CPU: f64 = 16.0;

/// One CU/DU/UE triple. The UE id is bookkeeping only; each pair serves
/// exactly one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub cu: String,
    pub du: String,
    pub ue: String,
}

/// Deployment shape: `n` one-to-one CU/DU/UE pairs on a single host.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub pairs: Vec<Pair>,
    pub host_id: String,
}

impl Topology {
    /// Standard shape: pairs (cu1, du1, ue1) .. (cuN, duN, ueN).
    pub fn with_pairs(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "at least one pair is required"));
        }
        let pairs = (1..=n)
            .map(|i| Pair {
                cu: format!("cu{i}"),
                du: format!("du{i}"),
                ue: format!("ue{i}"),
            })
            .collect();
        Ok(Topology {
            pairs,
            host_id: "host".to_string(),
        })
    }

    /// Container ids in schema order: every DU, then every CU.
    pub fn containers(&self) -> Vec<String> {
        let mut out: Vec<String> = self.pairs.iter().map(|p| p.du.clone()).collect();
        out.extend(self.pairs.iter().map(|p| p.cu.clone()));
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("topology", "no pairs"));
        }
        let mut ids: Vec<&str> = self
            .pairs
            .iter()
            .flat_map(|p| [p.cu.as_str(), p.du.as_str(), p.ue.as_str()])
            .chain([self.host_id.as_str()])
            .collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("topology", "node ids must be unique"));
        }
        Ok(())
    }
}

/// Traffic shape: ping cadence, packet-size resample period, and relative
/// aggregate load per hour of day (max-normalized to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficProfile {
    pub ping_interval_ms: u32,
    pub packet_size_resample_s: u32,
    hourly_load: [f64; 24],
}

impl TrafficProfile {
    pub fn new(hourly_load: [f64; 24]) -> Result<Self> {
        if hourly_load.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "hourly_load",
                "entries must be finite and non-negative",
            ));
        }
        let max = hourly_load.iter().cloned().fold(0.0f64, f64::max);
        if max <= 0.0 {
            return Err(Error::invalid("hourly_load", "at least one entry must be positive"));
        }
        let mut scaled = hourly_load;
        for v in &mut scaled {
            *v /= max;
        }
        Ok(TrafficProfile {
            ping_interval_ms: RAN_CADENCE_MS,
            packet_size_resample_s: 5,
            hourly_load: scaled,
        })
    }

    /// Smooth diurnal daily curve: quiet overnight (02:00 to 06:00), rising
    /// through the day to an evening peak (18:00 to 22:00).
    pub fn diurnal() -> Self {
        let hourly = [
            0.45, 0.35, 0.25, 0.25, 0.25, 0.25, 0.30, 0.40, //  0..8
            0.55, 0.65, 0.70, 0.75, 0.80, 0.80, 0.75, 0.75, //  8..16
            0.80, 0.90, 1.00, 1.00, 1.00, 1.00, 0.80, 0.60, // 16..24
        ];
        Self::new(hourly).expect("static curve is valid")
    }

    /// Flat load of 1 for every hour; useful for fixed-point tests.
    pub fn constant() -> Self {
        Self::new([1.0; 24]).expect("static curve is valid")
    }

    pub fn hourly_load(&self) -> &[f64; 24] {
        &self.hourly_load
    }

    /// Load at second `t`, piecewise linear between hour points, wrapping
    /// around midnight.
    pub fn load_at(&self, t_s: u64) -> f64 {
        let sec_of_day = t_s % 86_400;
        let hour = (sec_of_day / 3600) as usize;
        let frac = (sec_of_day % 3600) as f64 / 3600.0;
        let a = self.hourly_load[hour];
        let b = self.hourly_load[(hour + 1) % 24];
        a + (b - a) * frac
    }
}

/// Tunable coefficients of the three fault-effect models. Every effect
/// scales with the scheduled stress level `s`; with `s = 0` all of them
/// vanish exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEffects {
    /// CPU stress pulls container usage toward saturation: `v + gain*s*(1-v)`.
    pub cpu_gain: f64,
    /// Container CPU fraction above which the pair's radio link degrades.
    pub throttle_threshold: f64,
    /// Fraction of bitrate lost at full throttle.
    pub throttle_bitrate_penalty: f64,
    /// MCS indices lost at full throttle.
    pub throttle_mcs_drop: f64,
    /// Extra retransmissions per second at full throttle.
    pub throttle_retrans_gain: f64,
    /// Ceiling for stressed memory usage.
    pub mem_cap: f64,
    /// Memory fraction above which the pair's radio link degrades.
    pub pressure_threshold: f64,
    /// Fraction of bitrate lost at full memory pressure.
    pub pressure_bitrate_penalty: f64,
    /// MCS indices lost at full memory pressure.
    pub pressure_mcs_drop: f64,
    /// CQI points lost per unit of packet-loss stress.
    pub loss_cqi_drop: f64,
    /// SINR dB lost per unit of packet-loss stress.
    pub loss_sinr_drop: f64,
    /// MCS indices lost per unit of packet-loss stress.
    pub loss_mcs_drop: f64,
    /// Extra retransmissions per second per unit of packet-loss stress.
    pub loss_retrans_gain: f64,
    /// Fraction of container network traffic lost per unit of stress.
    pub loss_container_net_penalty: f64,
    /// Bitrate jitter amplitude under packet loss: `(1-s)*(1 + j*s*xi)`.
    pub loss_jitter: f64,
}

impl Default for FaultEffects {
    fn default() -> Self {
        FaultEffects {
            cpu_gain: 0.95,
            throttle_threshold: 0.85,
            throttle_bitrate_penalty: 0.5,
            throttle_mcs_drop: 6.0,
            throttle_retrans_gain: 50.0,
            mem_cap: 0.97,
            pressure_threshold: 0.85,
            pressure_bitrate_penalty: 0.3,
            pressure_mcs_drop: 3.0,
            loss_cqi_drop: 40.0,
            loss_sinr_drop: 60.0,
            loss_mcs_drop: 20.0,
            loss_retrans_gain: 800.0,
            loss_container_net_penalty: 0.8,
            loss_jitter: 2.0,
        }
    }
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub duration_s: u64,
    pub topology: Topology,
    pub platform_metrics_per_container: usize,
    pub infra_metrics: usize,
    /// Multiplies every noise deviation; 0 gives the deterministic skeleton.
    pub noise_scale: f64,
    pub effects: FaultEffects,
}

impl SimConfig {
    /// Standard deployment: 4 pairs, 24 platform metrics per container,
    /// 40 host metrics.
    ///
    /// Noise defaults to 0.35, not 1.0. Forecasting a metric five seconds
    /// ahead cannot beat the noise injected over those five seconds, and at
    /// unit scale that irreducible error dominates the forecaster's loss so
    /// thoroughly that training barely moves it. At 0.35 the traces stay
    /// visibly stochastic while structure, not noise, dominates the loss.
    pub fn new(seed: u64, duration_s: u64) -> Result<Self> {
        Ok(SimConfig {
            seed,
            duration_s,
            topology: Topology::with_pairs(4)?,
            platform_metrics_per_container: 24,
            infra_metrics: 40,
            noise_scale: 0.35,
            effects: FaultEffects::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_s == 0 {
            return Err(Error::invalid("duration_s", "must be at least 1"));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::invalid("noise_scale", "must be non-negative"));
        }
        self.topology.validate()
    }

    pub fn schema(&self) -> Result<Schema> {
        let n = self.topology.pairs.len();
        build_default_schema(n, n, self.platform_metrics_per_container, self.infra_metrics)
    }
}

/// First-order mean-reverting process. With zero noise it sits exactly at
/// its mean from the first step, so the zero-noise run is constant.
#[derive(Debug, Clone)]
struct Ou {
    mu: f64,
    theta: f64,
    sd: f64,
    x: f64,
}

impl Ou {
    fn new(mu: f64, theta: f64, sd: f64) -> Self {
        Ou { mu, theta, sd, x: mu }
    }

    fn step(&mut self, noise_scale: f64, rng: &mut RngStream) -> f64 {
        // The draw happens unconditionally so the stream layout does not
        // depend on noise_scale.
        let xi = rng.normal();
        self.x += self.theta * (self.mu - self.x) + self.sd * noise_scale * xi;
        self.x
    }
}

/// Per-pair radio and traffic state.
#[derive(Debug, Clone)]
struct PairState {
    sinr: Ou,
    /// Packet-size deviation in [-1, 1], resampled every 5 s.
    packet_dev: f64,
    /// Mean downlink bitrate of the previous second, the CPU coupling input.
    served_dl_bps: f64,
    served_ul_bps: f64,
}

/// Per-container noise processes, in platform-metric order.
#[derive(Debug, Clone)]
struct ContainerState {
    cpu_noise: Ou,
    mem: Ou,
    throttled_noise: Ou,
    net_noise: Ou,
    retrans: Ou,
    fs: Ou,
    disk_read: Ou,
    disk_write: Ou,
    aux: Vec<Ou>,
}

impl ContainerState {
    fn new(is_du: bool, aux_count: usize) -> Self {
        ContainerState {
            cpu_noise: Ou::new(0.0, 0.2, 0.015),
            mem: Ou::new(if is_du { 0.30 } else { 0.28 }, 0.05, 0.008),
            throttled_noise: Ou::new(0.0, 0.3, 0.002),
            net_noise: Ou::new(0.0, 0.3, 0.01),
            retrans: Ou::new(2.0, 0.2, 0.5),
            fs: Ou::new(0.4, 0.01, 0.001),
            disk_read: Ou::new(1e5, 0.2, 2e4),
            disk_write: Ou::new(5e5, 0.2, 5e4),
            aux: (0..aux_count)
                .map(|i| Ou::new(0.5, 0.1, 0.05 + 0.01 * (i % 5) as f64))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
struct HostState {
    cpu_noise: Ou,
    mem_noise: Ou,
    /// Low-pass tracker of `TEMP_PER_CPU * host_cpu`.
    temp_dt: f64,
    power_noise: Ou,
    net_noise: Ou,
    disk_read: Ou,
    disk_write: Ou,
    load_noise: Ou,
    fs: Ou,
    aux: Vec<Ou>,
}

/// The streaming baseline generator. Produces one tick's frames at a time:
/// platform metrics for every container (DUs then CUs), host metrics, then
/// ten RAN sub-ticks per DU, all in schema metric order.
pub struct BaselineStream<'a> {
    cfg: &'a SimConfig,
    profile: &'a TrafficProfile,
    rng: RngStream,
    t: u64,
    pairs: Vec<PairState>,
    containers: Vec<ContainerState>,
    host: HostState,
    node_ids: Vec<Arc<str>>,
    host_id: Arc<str>,
    plat_ids: Vec<Arc<str>>,
    infra_ids: Vec<Arc<str>>,
    ran_ids: Vec<Arc<str>>,
    buf: VecDeque<TelemetryFrame>,
}

impl<'a> BaselineStream<'a> {
    fn new(cfg: &'a SimConfig, profile: &'a TrafficProfile) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.topology.pairs.len();
        let aux_plat = cfg.platform_metrics_per_container.saturating_sub(PLATFORM_METRICS.len());
        let aux_infra = cfg.infra_metrics.saturating_sub(INFRA_METRICS.len());

        let pairs = (0..n)
            .map(|_| PairState {
                sinr: Ou::new(SINR_MU, SINR_THETA, SINR_SD),
                packet_dev: 0.0,
                // Fixed-point initialization: the load-1 steady state.
                served_dl_bps: 0.0,
                served_ul_bps: 0.0,
            })
            .collect::<Vec<_>>();
        let mut containers: Vec<ContainerState> =
            (0..n).map(|_| ContainerState::new(true, aux_plat)).collect();
        containers.extend((0..n).map(|_| ContainerState::new(false, aux_plat)));

        let host = HostState {
            cpu_noise: Ou::new(0.0, 0.2, 0.01),
            mem_noise: Ou::new(0.0, 0.2, 0.005),
            temp_dt: 0.0,
            power_noise: Ou::new(0.0, 0.2, 3.0),
            net_noise: Ou::new(0.0, 0.3, 0.01),
            disk_read: Ou::new(2e5, 0.2, 4e4),
            disk_write: Ou::new(1e6, 0.2, 1e5),
            load_noise: Ou::new(0.0, 0.2, 0.2),
            fs: Ou::new(0.5, 0.01, 0.001),
            aux: (0..aux_infra)
                .map(|i| Ou::new(0.5, 0.1, 0.05 + 0.01 * (i % 5) as f64))
                .collect(),
        };

        let node_ids: Vec<Arc<str>> = cfg
            .topology
            .containers()
            .into_iter()
            .map(|s| Arc::from(s.as_str()))
            .collect();
        let host_id: Arc<str> = Arc::from(cfg.topology.host_id.as_str());
        let plat_ids: Vec<Arc<str>> = (0..cfg.platform_metrics_per_container)
            .map(|i| {
                if i < PLATFORM_METRICS.len() {
                    Arc::from(PLATFORM_METRICS[i].0)
                } else {
                    Arc::from(format!("aux_{:02}", i - PLATFORM_METRICS.len()).as_str())
                }
            })
            .collect();
        let infra_ids: Vec<Arc<str>> = (0..cfg.infra_metrics)
            .map(|i| {
                if i < INFRA_METRICS.len() {
                    Arc::from(INFRA_METRICS[i].0)
                } else {
                    Arc::from(format!("aux_{:02}", i - INFRA_METRICS.len()).as_str())
                }
            })
            .collect();
        let ran_ids: Vec<Arc<str>> = RAN_METRICS.iter().map(|(m, _)| Arc::from(*m)).collect();

        let mut stream = BaselineStream {
            cfg,
            profile,
            rng: RngStream::derive(cfg.seed, "sim", 0),
            t: 0,
            pairs,
            containers,
            host,
            node_ids,
            host_id,
            plat_ids,
            infra_ids,
            ran_ids,
            buf: VecDeque::new(),
        };
        stream.init_fixed_point();
        Ok(stream)
    }

    /// Start every coupled quantity at its steady state under the initial
    /// load so a zero-noise run is constant from the first frame.
    fn init_fixed_point(&mut self) {
        let load = self.profile.load_at(0);
        let (dl, ul) = nominal_rates(load, 0.0, SINR_MU);
        for p in &mut self.pairs {
            p.served_dl_bps = dl;
            p.served_ul_bps = ul;
        }
        let n = self.pairs.len();
        let mut host_cpu = 0.05;
        for k in 0..self.containers.len() {
            let is_du = k < n;
            let cpu = container_cpu(is_du, dl, 0.0);
            let cores = if is_du { DU_CORES } else { CU_CORES };
            host_cpu += cpu * cores / HOST_CORES;
        }
        self.host.temp_dt = TEMP_PER_CPU * host_cpu;
    }

    /// Generate all frames of second `t` into the buffer.
    fn emit_tick(&mut self) {
        let t = self.t;
        let ts = t * 1000;
        let load = self.profile.load_at(t);
        let ns = self.cfg.noise_scale;
        let n = self.pairs.len();

        // Packet-size factor, resampled on the profile's period.
        if t % self.profile.packet_size_resample_s.max(1) as u64 == 0 {
            for p in &mut self.pairs {
                p.packet_dev = self.rng.uniform(-1.0, 1.0);
            }
        }

        // Platform metrics, DUs then CUs, metric order within each container.
        let mut host_cpu = 0.05;
        let mut host_mem = 0.15;
        let mut host_rx = 0.0;
        let mut host_tx = 0.0;
        for k in 0..self.containers.len() {
            let is_du = k < n;
            let pair = if is_du { k } else { k - n };
            let (dl, ul) = (self.pairs[pair].served_dl_bps, self.pairs[pair].served_ul_bps);
            let c = &mut self.containers[k];

            let cpu = (container_cpu(is_du, dl, c.cpu_noise.step(ns, &mut self.rng)))
                .clamp(0.0, 1.0);
            let mem = c.mem.step(ns, &mut self.rng).clamp(0.0, 1.0);
            let throttled = c.throttled_noise.step(ns, &mut self.rng).max(0.0);
            // DUs front-haul the full downlink; CUs back-haul it. Both carry
            // the uplink. The exact split only needs to move with traffic.
            let net_scale = 1.0 + c.net_noise.step(ns, &mut self.rng);
            let (rx, tx) = if is_du {
                ((ul / 8.0) * net_scale, (dl / 8.0) * net_scale)
            } else {
                ((dl / 8.0) * net_scale, (dl / 8.0) * 0.9 * net_scale)
            };
            let (rx, tx) = (rx.max(0.0), tx.max(0.0));
            let retrans = c.retrans.step(ns, &mut self.rng).max(0.0);
            let fs = c.fs.step(ns, &mut self.rng).clamp(0.0, 1.0);
            let dr = c.disk_read.step(ns, &mut self.rng).max(0.0);
            let dw = c.disk_write.step(ns, &mut self.rng).max(0.0);

            let cores = if is_du { DU_CORES } else { CU_CORES };
            let gb = if is_du { DU_GB } else { CU_GB };
            host_cpu += cpu * cores / HOST_CORES;
            host_mem += mem * gb / HOST_GB;
            host_rx += rx;
            host_tx += tx;

            let values = [cpu, mem, throttled, rx, tx, retrans, fs, dr, dw];
            for (j, plat_id) in self.plat_ids.iter().enumerate() {
                let value = if j < values.len() {
                    values[j]
                } else {
                    c.aux[j - values.len()].step(ns, &mut self.rng)
                };
                self.buf.push_back(TelemetryFrame {
                    timestamp_ms: ts,
                    node_id: self.node_ids[k].clone(),
                    metric_id: plat_id.clone(),
                    value,
                });
            }
        }

        // Host metrics.
        host_cpu = (host_cpu + self.host.cpu_noise.step(ns, &mut self.rng)).clamp(0.0, 1.0);
        host_mem = (host_mem + self.host.mem_noise.step(ns, &mut self.rng)).clamp(0.0, 1.0);
        self.host.temp_dt += TEMP_ALPHA * (TEMP_PER_CPU * host_cpu - self.host.temp_dt);
        let temp = TEMP_IDLE_C + self.host.temp_dt;
        let power =
            (POWER_IDLE_W + POWER_PER_CPU * host_cpu + self.host.power_noise.step(ns, &mut self.rng))
                .max(0.0);
        let hnet = 1.0 + self.host.net_noise.step(ns, &mut self.rng);
        let (hrx, htx) = ((host_rx * hnet).max(0.0), (host_tx * hnet).max(0.0));
        let hdr = self.host.disk_read.step(ns, &mut self.rng).max(0.0);
        let hdw = self.host.disk_write.step(ns, &mut self.rng).max(0.0);
        let load1 =
            (LOAD1_PER_CPU * host_cpu + self.host.load_noise.step(ns, &mut self.rng)).max(0.0);
        let hfs = self.host.fs.step(ns, &mut self.rng).clamp(0.0, 1.0);
        let hvalues = [host_cpu, host_mem, temp, power, hrx, htx, hdr, hdw, load1, hfs];
        for (j, infra_id) in self.infra_ids.iter().enumerate() {
            let value = if j < hvalues.len() {
                hvalues[j]
            } else {
                self.host.aux[j - hvalues.len()].step(ns, &mut self.rng)
            };
            self.buf.push_back(TelemetryFrame {
                timestamp_ms: ts,
                node_id: self.host_id.clone(),
                metric_id: infra_id.clone(),
                value,
            });
        }

        // RAN sub-ticks: ten per second per DU.
        let mut dl_sum = vec![0.0f64; n];
        let mut ul_sum = vec![0.0f64; n];
        for sub in 0..SUBTICKS {
            let sub_ts = ts + sub * RAN_CADENCE_MS as u64;
            for (pair, state) in self.pairs.iter_mut().enumerate() {
                let sinr = state.sinr.step(ns, &mut self.rng);
                let cqi = (0.5 * sinr - 0.5).clamp(0.0, CQI_MAX);
                let dl_mcs = (cqi * MCS_MAX / CQI_MAX).clamp(0.0, MCS_MAX);
                let ul_mcs = (0.9 * dl_mcs).clamp(0.0, MCS_MAX);
                let packet = 1.0 + 0.5 * state.packet_dev * ns.min(1.0);
                let dl_cap = DL_CAPACITY_BPS * dl_mcs / MCS_MAX;
                let ul_cap = UL_CAPACITY_BPS * ul_mcs / MCS_MAX;
                let dl_demand = DL_DEMAND_BPS * load * packet;
                let ul_demand = (UL_DEMAND_BPS * load * packet + UL_FLOOR_BPS).max(0.0);
                let jitter = |rng: &mut RngStream| 1.0 + 0.05 * ns * rng.normal();
                let dl = (dl_demand.min(dl_cap) * jitter(&mut self.rng)).max(0.0);
                let cur_total = (dl * jitter(&mut self.rng)).max(0.0);
                let ul = (ul_demand.min(ul_cap) * jitter(&mut self.rng)).max(0.0);
                dl_sum[pair] += dl;
                ul_sum[pair] += ul;

                let values = [
                    1.0, // active UEs: one per pair by construction
                    cur_total,
                    dl_cap,
                    dl,
                    ul,
                    ul_mcs,
                    dl_mcs,
                    sinr,
                    cqi,
                ];
                for (j, ran_id) in self.ran_ids.iter().enumerate() {
                    self.buf.push_back(TelemetryFrame {
                        timestamp_ms: sub_ts,
                        node_id: self.node_ids[pair].clone(),
                        metric_id: ran_id.clone(),
                        value: values[j],
                    });
                }
            }
        }
        for (pair, state) in self.pairs.iter_mut().enumerate() {
            state.served_dl_bps = dl_sum[pair] / SUBTICKS as f64;
            state.served_ul_bps = ul_sum[pair] / SUBTICKS as f64;
        }

        self.t += 1;
    }
}

impl Iterator for BaselineStream<'_> {
    type Item = TelemetryFrame;

    fn next(&mut self) -> Option<TelemetryFrame> {
        while self.buf.is_empty() {
            if self.t >= self.cfg.duration_s {
                return None;
            }
            self.emit_tick();
        }
        self.buf.pop_front()
    }
}

fn nominal_rates(load: f64, _packet_dev: f64, sinr: f64) -> (f64, f64) {
    let cqi = (0.5 * sinr - 0.5).clamp(0.0, CQI_MAX);
    let dl_mcs = (cqi * MCS_MAX / CQI_MAX).clamp(0.0, MCS_MAX);
    let ul_mcs = (0.9 * dl_mcs).clamp(0.0, MCS_MAX);
    let dl = (DL_DEMAND_BPS * load).min(DL_CAPACITY_BPS * dl_mcs / MCS_MAX);
    let ul = (UL_DEMAND_BPS * load + UL_FLOOR_BPS).min(UL_CAPACITY_BPS * ul_mcs / MCS_MAX);
    (dl, ul)
}

fn container_cpu(is_du: bool, served_dl_bps: f64, noise: f64) -> f64 {
    if is_du {
        0.30 + 0.45 * served_dl_bps / DL_CAPACITY_BPS + noise
    } else {
        0.20 + 0.30 * served_dl_bps / DL_CAPACITY_BPS + noise
    }
}

/// Baseline telemetry with no faults, at native cadences.
pub fn generate_baseline<'a>(
    cfg: &'a SimConfig,
    profile: &'a TrafficProfile,
) -> Result<BaselineStream<'a>> {
    BaselineStream::new(cfg, profile)
}

/// What a frame means to the fault models.
#[derive(Debug, Clone, Copy, PartialEq)]
enum FrameKind {
    ContainerCpu { idx: usize },
    ContainerMem { idx: usize },
    ContainerThrottled { idx: usize },
    ContainerNet { idx: usize },
    ContainerRetrans { idx: usize },
    RanBitrate { pair: usize },
    RanMcs { pair: usize },
    RanSinr { pair: usize },
    RanCqi { pair: usize },
    HostCpu,
    HostMem,
    HostTemp,
    HostPower,
    HostNetRx,
    HostNetTx,
    HostLoad1,
    Passthrough,
}

/// Per-second stress snapshot, one entry per container (DUs then CUs).
struct TickStress {
    fault: FaultLabel,
    levels: Vec<f64>,
}

/// The streaming fault transformer. Consumes baseline frames in emission
/// order and applies schedule-driven edits; with zero stress it reproduces
/// its input bit for bit.
pub struct FaultedStream<'a, I> {
    inner: I,
    schedule: &'a InjectionSchedule,
    effects: FaultEffects,
    kinds: HashMap<(Arc<str>, Arc<str>), FrameKind>,
    kind_cache: HashMap<(usize, usize), FrameKind>,
    n_pairs: usize,
    rng: RngStream,
    tick: u64,
    stress: TickStress,
    /// Faulted CPU fraction per container this tick, filled as CPU frames
    /// pass; pair-level RAN penalties derive from these.
    cpu_level: Vec<f64>,
    mem_level: Vec<f64>,
    cpu_delta_sum: f64,
    mem_delta_sum: f64,
    net_rx_delta: f64,
    net_tx_delta: f64,
    temp_dt_extra: f64,
    host_cpu_delta: f64,
}

impl<'a, I> FaultedStream<'a, I>
where
    I: Iterator<Item = TelemetryFrame>,
{
    fn new(inner: I, schedule: &'a InjectionSchedule, cfg: &SimConfig) -> Result<Self> {
        if schedule.total_duration_s != cfg.duration_s {
            return Err(Error::invalid(
                "schedule",
                format!(
                    "schedule covers {} s but the run lasts {} s",
                    schedule.total_duration_s, cfg.duration_s
                ),
            ));
        }
        let n = cfg.topology.pairs.len();
        let containers = cfg.topology.containers();

        // Classify every (node, metric) column the schema can produce.
        let mut kinds = HashMap::new();
        let classify_plat = |idx: usize, metric: &str| -> FrameKind {
            match metric {
                "cpu_usage" => FrameKind::ContainerCpu { idx },
                "mem_usage" => FrameKind::ContainerMem { idx },
                "cpu_throttled" => FrameKind::ContainerThrottled { idx },
                "net_rx_bytes" | "net_tx_bytes" => FrameKind::ContainerNet { idx },
                "net_retrans" => FrameKind::ContainerRetrans { idx },
                _ => FrameKind::Passthrough,
            }
        };
        for (idx, node) in containers.iter().enumerate() {
            for (metric, _) in PLATFORM_METRICS {
                kinds.insert(
                    (Arc::from(node.as_str()), Arc::from(metric)),
                    classify_plat(idx, metric),
                );
            }
        }
        for (pair, p) in cfg.topology.pairs.iter().enumerate() {
            for (metric, _) in RAN_METRICS {
                let kind = match metric {
                    "dl_brate_cur_total" | "dl_brate_max_total" | "dl_brate" | "ul_brate" => {
                        FrameKind::RanBitrate { pair }
                    }
                    "ul_mcs" | "dl_mcs" => FrameKind::RanMcs { pair },
                    "ul_sinr" => FrameKind::RanSinr { pair },
                    "cqi" => FrameKind::RanCqi { pair },
                    _ => FrameKind::Passthrough,
                };
                kinds.insert((Arc::from(p.du.as_str()), Arc::from(metric)), kind);
            }
        }
        let host: Arc<str> = Arc::from(cfg.topology.host_id.as_str());
        for (metric, kind) in [
            ("cpu_usage", FrameKind::HostCpu),
            ("mem_usage", FrameKind::HostMem),
            ("temperature_c", FrameKind::HostTemp),
            ("power_w", FrameKind::HostPower),
            ("net_rx_bytes", FrameKind::HostNetRx),
            ("net_tx_bytes", FrameKind::HostNetTx),
            ("load1", FrameKind::HostLoad1),
        ] {
            kinds.insert((host.clone(), Arc::from(metric)), kind);
        }

        Ok(FaultedStream {
            inner,
            schedule,
            effects: cfg.effects.clone(),
            kinds,
            kind_cache: HashMap::new(),
            n_pairs: n,
            rng: RngStream::derive(cfg.seed, "fault-noise", 0),
            tick: u64::MAX, // forces stress refresh on the first frame
            stress: TickStress {
                fault: FaultLabel::Normal,
                levels: vec![0.0; containers.len()],
            },
            cpu_level: vec![0.0; containers.len()],
            mem_level: vec![0.0; containers.len()],
            cpu_delta_sum: 0.0,
            mem_delta_sum: 0.0,
            net_rx_delta: 0.0,
            net_tx_delta: 0.0,
            temp_dt_extra: 0.0,
            host_cpu_delta: 0.0,
        })
    }

    fn refresh_tick(&mut self, t: u64) {
        self.tick = t;
        let episode = self.schedule.episode_at(t);
        self.stress.fault = episode.effective_label();
        for level in &mut self.stress.levels {
            *level = 0.0;
        }
        if self.stress.fault != FaultLabel::Normal {
            // Assignment names map onto container slots in schema order; the
            // kinds map already knows each container's slot, so stress levels
            // are resolved by name here.
            for (name, _) in &episode.assignments {
                if let Some(slot) = self.container_slot(name) {
                    self.stress.levels[slot] = episode.stress_at(name, t);
                }
            }
        }
        self.cpu_level.iter_mut().for_each(|v| *v = 0.0);
        self.mem_level.iter_mut().for_each(|v| *v = 0.0);
        self.cpu_delta_sum = 0.0;
        self.mem_delta_sum = 0.0;
        self.net_rx_delta = 0.0;
        self.net_tx_delta = 0.0;
        self.host_cpu_delta = 0.0;
    }

    fn container_slot(&self, name: &str) -> Option<usize> {
        // Slots follow schema order: du1..duN then cu1..cuN. The kinds map
        // holds (node, "cpu_usage") for every container.
        self.kinds
            .get(&(Arc::from(name), Arc::from("cpu_usage")))
            .and_then(|k| match k {
                FrameKind::ContainerCpu { idx } => Some(*idx),
                _ => None,
            })
    }

    /// Linear excess above a threshold, normalized to [0, 1].
    fn excess(level: f64, threshold: f64) -> f64 {
        if level > threshold {
            ((level - threshold) / (1.0 - threshold)).min(1.0)
        } else {
            0.0
        }
    }

    /// Pair-level radio degradation factors at this tick: combined bitrate
    /// multiplier, MCS drop, and packet-loss stress.
    fn pair_penalties(&self, pair: usize) -> (f64, f64, f64) {
        let e = &self.effects;
        let du = pair;
        let cu = self.n_pairs + pair;
        match self.stress.fault {
            FaultLabel::CpuStress => {
                let g = Self::excess(self.cpu_level[du], e.throttle_threshold)
                    .max(Self::excess(self.cpu_level[cu], e.throttle_threshold));
                (1.0 - e.throttle_bitrate_penalty * g, e.throttle_mcs_drop * g, 0.0)
            }
            FaultLabel::MemoryStress => {
                let g = Self::excess(self.mem_level[du], e.pressure_threshold)
                    .max(Self::excess(self.mem_level[cu], e.pressure_threshold));
                (1.0 - e.pressure_bitrate_penalty * g, e.pressure_mcs_drop * g, 0.0)
            }
            FaultLabel::PacketLoss => {
                let s = self.stress.levels[du].max(self.stress.levels[cu]);
                (1.0, 0.0, s)
            }
            FaultLabel::Normal => (1.0, 0.0, 0.0),
        }
    }

    fn transform(&mut self, mut frame: TelemetryFrame) -> TelemetryFrame {
        let t = frame.timestamp_ms / 1000;
        if t != self.tick {
            self.refresh_tick(t);
        }

        // Resolve the frame kind via pointer identity first: every id Arc is
        // reused across frames, so the fast path is one pointer-pair lookup.
        let key = (
            Arc::as_ptr(&frame.node_id) as *const u8 as usize,
            Arc::as_ptr(&frame.metric_id) as *const u8 as usize,
        );
        let kind = match self.kind_cache.get(&key) {
            Some(k) => *k,
            None => {
                let k = self
                    .kinds
                    .get(&(frame.node_id.clone(), frame.metric_id.clone()))
                    .copied()
                    .unwrap_or(FrameKind::Passthrough);
                self.kind_cache.insert(key, k);
                k
            }
        };

        let e = self.effects;
        let fault = self.stress.fault;
        match kind {
            FrameKind::ContainerCpu { idx } => {
                let s = self.stress.levels[idx];
                let v = if fault == FaultLabel::CpuStress && s > 0.0 {
                    let stressed = (frame.value + e.cpu_gain * s * (1.0 - frame.value)).min(1.0);
                    self.cpu_delta_sum += (stressed - frame.value)
                        * (if idx < self.n_pairs { DU_CORES } else { CU_CORES })
                        / HOST_CORES;
                    stressed
                } else {
                    frame.value
                };
                self.cpu_level[idx] = v;
                frame.value = v;
            }
            FrameKind::ContainerMem { idx } => {
                let s = self.stress.levels[idx];
                let v = if fault == FaultLabel::MemoryStress && s > 0.0 {
                    let stressed = (frame.value + s).min(e.mem_cap);
                    self.mem_delta_sum += (stressed - frame.value)
                        * (if idx < self.n_pairs { DU_GB } else { CU_GB })
                        / HOST_GB;
                    stressed
                } else {
                    frame.value
                };
                self.mem_level[idx] = v;
                frame.value = v;
            }
            FrameKind::ContainerThrottled { idx } => {
                if fault == FaultLabel::CpuStress {
                    frame.value += Self::excess(self.cpu_level[idx], e.throttle_threshold);
                }
            }
            FrameKind::ContainerNet { idx } => {
                if fault == FaultLabel::PacketLoss {
                    let s = self.stress.levels[idx];
                    if s > 0.0 {
                        let kept = frame.value * (1.0 - e.loss_container_net_penalty * s);
                        // Host totals shrink by what the containers dropped;
                        // rx and tx share a kind, so split by metric name.
                        if &*frame.metric_id == "net_rx_bytes" {
                            self.net_rx_delta -= frame.value - kept;
                        } else {
                            self.net_tx_delta -= frame.value - kept;
                        }
                        frame.value = kept;
                    }
                }
            }
            FrameKind::ContainerRetrans { idx } => {
                let s = self.stress.levels[idx];
                match fault {
                    FaultLabel::PacketLoss if s > 0.0 => {
                        frame.value += e.loss_retrans_gain * s;
                    }
                    FaultLabel::CpuStress => {
                        frame.value +=
                            e.throttle_retrans_gain * Self::excess(self.cpu_level[idx], e.throttle_threshold);
                    }
                    _ => {}
                }
            }
            FrameKind::RanBitrate { pair } => {
                let (mult, _, s_pl) = self.pair_penalties(pair);
                frame.value *= mult;
                if s_pl > 0.0 {
                    let xi = self.rng.uniform(-1.0, 1.0);
                    frame.value *= (1.0 - s_pl) * (1.0 + e.loss_jitter * s_pl * xi);
                }
                frame.value = frame.value.max(0.0);
            }
            FrameKind::RanMcs { pair } => {
                let (_, mcs_drop, s_pl) = self.pair_penalties(pair);
                frame.value = (frame.value - mcs_drop - e.loss_mcs_drop * s_pl).max(0.0);
            }
            FrameKind::RanSinr { pair } => {
                let (_, _, s_pl) = self.pair_penalties(pair);
                frame.value -= e.loss_sinr_drop * s_pl;
            }
            FrameKind::RanCqi { pair } => {
                let (_, _, s_pl) = self.pair_penalties(pair);
                frame.value = (frame.value - e.loss_cqi_drop * s_pl).max(0.0);
            }
            FrameKind::HostCpu => {
                self.host_cpu_delta = self.cpu_delta_sum.min(1.0 - frame.value);
                frame.value = (frame.value + self.cpu_delta_sum).min(1.0);
                // Temperature tracking updates once per tick, on the CPU
                // frame, which the schema orders before the temperature frame.
                self.temp_dt_extra +=
                    TEMP_ALPHA * (TEMP_PER_CPU * self.host_cpu_delta - self.temp_dt_extra);
            }
            FrameKind::HostMem => {
                frame.value = (frame.value + self.mem_delta_sum).min(1.0);
            }
            FrameKind::HostTemp => {
                frame.value += self.temp_dt_extra;
            }
            FrameKind::HostPower => {
                frame.value += POWER_PER_CPU * self.host_cpu_delta;
            }
            FrameKind::HostNetRx => {
                frame.value = (frame.value + self.net_rx_delta).max(0.0);
            }
            FrameKind::HostNetTx => {
                frame.value = (frame.value + self.net_tx_delta).max(0.0);
            }
            FrameKind::HostLoad1 => {
                frame.value += LOAD1_PER_CPU * self.host_cpu_delta;
            }
            FrameKind::Passthrough => {}
        }
        frame
    }
}

impl<I> Iterator for FaultedStream<'_, I>
where
    I: Iterator<Item = TelemetryFrame>,
{
    type Item = TelemetryFrame;

    fn next(&mut self) -> Option<TelemetryFrame> {
        self.inner.next().map(|f| self.transform(f))
    }
}

/// Layer schedule-driven fault effects over a baseline stream.
pub fn apply_faults<'a, I>(
    baseline: I,
    schedule: &'a InjectionSchedule,
    cfg: &SimConfig,
) -> Result<FaultedStream<'a, I::IntoIter>>
where
    I: IntoIterator<Item = TelemetryFrame>,
{
    FaultedStream::new(baseline.into_iter(), schedule, cfg)
}

/// Full run: faulted frame stream plus the per-second ground-truth labels.
pub fn run_simulation<'a>(
    cfg: &'a SimConfig,
    profile: &'a TrafficProfile,
    schedule: &'a InjectionSchedule,
) -> Result<(FaultedStream<'a, BaselineStream<'a>>, Vec<FaultLabel>)> {
    let baseline = generate_baseline(cfg, profile)?;
    let stream = apply_faults(baseline, schedule, cfg)?;
    Ok((stream, schedule.labels()))
}

/// Run, align to the 1-second grid, impute, and label: the dataset the
/// modeling pipeline consumes.
pub fn simulate_dataset(
    cfg: &SimConfig,
    profile: &TrafficProfile,
    schedule: &InjectionSchedule,
) -> Result<DatasetTable> {
    let schema = cfg.schema()?;
    let (stream, labels) = run_simulation(cfg, profile, schedule)?;
    let mut features = align(stream, &schema, cfg.duration_s)?;
    impute(&mut features);
    DatasetTable::new(features, labels)
}
