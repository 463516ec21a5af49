//! Sample a fault-injection schedule and print its episode timeline.
//!
//! Episodes are laid back to back: a truncated-exponential duration between
//! 30 and 90 minutes, a fault type (normal 0.3, cpu 0.5, memory 0.1, packet
//! loss 0.1), and for non-normal types a per-container enrollment coin with
//! a stress ramp for each participant.
//!
//! Run with: cargo run --example schedule

use faultcast::injector::{build_schedule, DEFAULT_LAMBDA_PER_MIN};
use faultcast::rng::RngStream;
use faultcast::sim::Topology;

fn main() -> faultcast::Result<()> {
    let topology = Topology::with_pairs(4)?;
    let containers = topology.containers();
    let mut rng = RngStream::derive(42, "schedule", 0);

    // Six hours of scheduled time, default episode-length rate.
    let schedule = build_schedule(&mut rng, &containers, 6 * 3600, DEFAULT_LAMBDA_PER_MIN)?;

    println!("{} episodes over {} s\n", schedule.episodes.len(), schedule.total_duration_s);
    for (i, ep) in schedule.episodes.iter().enumerate() {
        println!(
            "episode {i}: {:<13} {:>5} s .. {:>5} s  ({} min)",
            ep.effective_label().name(),
            ep.start_s,
            ep.end_s(),
            ep.duration_s / 60,
        );
        for (container, ramp) in &ep.assignments {
            println!(
                "    {container}: stress {:.2} ramping to {:.2}",
                ramp.start_level, ramp.end_level
            );
        }
    }

    // The per-second label track is what the simulator stamps onto rows.
    let labels = schedule.labels();
    let mut counts = [0usize; 4];
    for l in &labels {
        counts[l.code() as usize] += 1;
    }
    println!("\nper-second labels: normal={} cpu={} memory={} loss={}", counts[0], counts[1], counts[2], counts[3]);
    Ok(())
}
