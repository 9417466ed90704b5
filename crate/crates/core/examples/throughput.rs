//! Trials per second for the optimal singlet, with and without observer replay.

use belltrace_core::harness::{run_experiment, Allocation, QConfig, Replay, TrialContext};
use belltrace_core::models::{singlet_behavior, ChshSettings};
use belltrace_core::{Schedule, ScheduleConfig};

fn main() {
    let n: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(10_000);
    let s = ChshSettings::singlet_optimal();
    let g = |v: Vec<belltrace_core::Setting>| v.iter().map(|s| s.angle().unwrap()).collect::<Vec<_>>();
    let b = singlet_behavior(&g(s.grid_a()), &g(s.grid_b())).unwrap();
    let ctx =
        TrialContext::new(b, Schedule::build(ScheduleConfig::default()).unwrap(), QConfig::default(), false, None, 1)
            .unwrap();
    for replay in [Replay::Observers, Replay::SamplingOnly] {
        let ctx = ctx.clone().with_replay(replay);
        let t = std::time::Instant::now();
        let d = run_experiment(&ctx, &Allocation::PerPair { n }, false).unwrap();
        println!("{replay:?}: {} trials in {:?}", d.total(), t.elapsed());
    }
}
