//! Sweep destruction probability on small maps, aggregate c0/c1/c2 at
//! observation checkpoints with 95% intervals, and write CSV and SVG.
//!
//! Output goes to the directory given as the first argument, or a
//! temporary one.

use lcx::bench::{bench, every, BenchSpec, Condition, PolicyKind};
use lcx::env::EnvSettings;
use lcx::world::WorldConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("lcx_bench"), Into::into);
    let spec = BenchSpec {
        policy: PolicyKind::Frontier,
        trials: 5,
        conditions: [0.0, 0.1, 0.2]
            .into_iter()
            .map(|p_l| Condition::occupancy(0.1, p_l))
            .collect(),
        checkpoints: every(50, 1000),
        settings: EnvSettings {
            world: WorldConfig {
                width: 100.0,
                height: 100.0,
                ..WorldConfig::default()
            },
            max_steps: 5000,
            ..EnvSettings::default()
        },
        shapes: lcx::curriculum::CurriculumConfig {
            width_range: (5.0, 15.0),
            height_range: (10.0, 30.0),
            ..Default::default()
        },
        ..BenchSpec::default()
    };
    let t = std::time::Instant::now();
    let report = bench(&spec)?;
    println!("{} trials in {:.2?}", report.trials.len(), t.elapsed());
    for r in report.aggregate.iter().filter(|r| r.checkpoint == 1000) {
        println!(
            "{:<16} {}: {:7.2} [{:7.2}, {:7.2}]",
            r.condition, r.metric, r.summary.mean, r.summary.ci_lo, r.summary.ci_hi
        );
    }
    for p in report.write_outputs(&out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
