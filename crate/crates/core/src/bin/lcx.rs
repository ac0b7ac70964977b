use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lcx::bench::maps::{genmap, map_config, replay, ObstacleSpec};
use lcx::bench::{self, make_policy, BenchSpec, Condition, PolicyKind};
use lcx::curriculum::{CurriculumConfig, CurriculumState};
use lcx::env::{gateway, EnvSettings, Episode, EpisodeLog};
use lcx::rng::derive_seed;
use lcx::sync::wire::SyncServer;
use lcx::sync::ServerState;
use lcx::world::WorldFile;

#[derive(Parser)]
#[command(name = "lcx", version, about = "Landmark-complex exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world file and print its occupancy.
    Genmap(GenmapArgs),
    /// Run episodes and write per-step logs as CSV.
    Run(RunArgs),
    /// Sweep conditions over repeated trials; write CSV and SVG summaries.
    Bench(BenchArgs),
    /// Print the curriculum schedule as CSV.
    Curriculum(CurriculumArgs),
    /// Serve the gateway or sync protocol over TCP or stdio.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
struct SettingsArgs {
    /// JSON file with environment settings.
    #[arg(long)]
    settings: Option<PathBuf>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
}

impl SettingsArgs {
    fn resolve(&self, base: Option<EnvSettings>) -> Result<EnvSettings> {
        let mut s = match &self.settings {
            Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
            None => base.unwrap_or_default(),
        };
        if let Some(w) = self.width {
            s.world.width = w;
        }
        if let Some(h) = self.height {
            s.world.height = h;
        }
        if let Some(n) = self.agents {
            s.n_agents = n;
        }
        if let Some(m) = self.max_steps {
            s.max_steps = m;
        }
        s.world.validate()?;
        Ok(s)
    }
}

#[derive(Args, Clone)]
struct MapArgs {
    #[arg(long, conflicts_with = "occupancy")]
    n_obstacles: Option<usize>,
    /// Target occupancy fraction, met within 0.01.
    #[arg(long)]
    occupancy: Option<f64>,
    /// Landmark destruction probability.
    #[arg(long, default_value_t = 0.0)]
    p_l: f64,
}

impl MapArgs {
    fn spec(&self) -> ObstacleSpec {
        match (self.n_obstacles, self.occupancy) {
            (_, Some(o)) => ObstacleSpec::Occupancy(o),
            (n, None) => ObstacleSpec::Count(n.unwrap_or(0)),
        }
    }
}

#[derive(Args)]
struct GenmapArgs {
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(flatten)]
    map: MapArgs,
    /// Replay on this world file instead of generating maps.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value = "frontier")]
    policy: PolicyKind,
    /// Gateway controller address for `--policy external`.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of episodes.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Directory for `episode_<k>.csv`; one CSV on stdout if omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    settings: SettingsArgs,
    /// JSON list of conditions, or a full bench spec object.
    #[arg(long)]
    conditions: PathBuf,
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `STEP:MAX` or a comma-separated list of observation counts.
    #[arg(long)]
    checkpoints: Option<String>,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CurriculumArgs {
    #[arg(long, default_value_t = 200)]
    episodes: u64,
    /// Stage to print when stage lengths are not given.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    stage: u8,
    /// Episode counts of stages 1 and 2, as `S1,S2`.
    #[arg(long)]
    stage_episodes: Option<String>,
    /// JSON file with curriculum parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    settings: SettingsArgs,
    /// `gateway` or `sync`.
    #[arg(long, default_value = "gateway")]
    protocol: String,
    /// TCP address to listen on; stdio if omitted.
    #[arg(long)]
    listen: Option<String>,
    /// World whose landmarks the sync server tracks.
    #[arg(long)]
    world: Option<PathBuf>,
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn parse_checkpoints(s: &str) -> Result<Vec<u64>> {
    if let Some((step, max)) = s.split_once(':') {
        let (step, max): (u64, u64) = (step.trim().parse()?, max.trim().parse()?);
        if step == 0 {
            bail!("checkpoint step must be positive");
        }
        return Ok(bench::every(step, max));
    }
    s.split(',')
        .map(|v| v.trim().parse().with_context(|| format!("bad checkpoint {v:?}")))
        .collect()
}

fn cmd_genmap(a: GenmapArgs) -> Result<()> {
    let settings = a.settings.resolve(None)?;
    let file = genmap(&settings, &CurriculumConfig::default(), a.map.spec(), a.map.p_l, a.seed)?;
    let world = file.to_world(&settings.world)?;
    eprintln!(
        "occupancy {:.4}, {} obstacles, {} landmarks ({} destroyed)",
        world.occupancy_percentage(),
        file.obstacles.len(),
        file.landmarks.len(),
        file.landmarks.iter().filter(|l| l.destroyed).count()
    );
    match a.out {
        Some(p) => file.save(&p).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().write_all(file.to_json().as_bytes())?,
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let settings = a.settings.resolve(None)?;
    let world = a.world.as_deref().map(WorldFile::load).transpose()?;
    if let Some(d) = &a.out_dir {
        fs::create_dir_all(d)?;
    }
    let mut stdout = io::stdout().lock();
    for k in 0..a.trials {
        let seed = derive_seed(a.seed, k as u64);
        let mut policy = make_policy(a.policy, a.endpoint.as_deref(), seed)?;
        let mut log: EpisodeLog = match &world {
            Some(file) => replay(&settings, file, &mut policy, seed)?,
            None => {
                let cfg = map_config(&settings, &CurriculumConfig::default(), a.map.spec(), a.map.p_l, seed)?;
                Episode::new(settings.clone(), &cfg)?.run(&mut policy)?
            }
        };
        for r in &mut log.rows {
            r.episode = k as u64;
        }
        let last = log.last();
        eprintln!(
            "episode {k}: {} steps, done={} truncated={} c=({}, {}, {}) of {} landmarks, {} observations",
            log.rows.len(),
            log.done,
            log.truncated,
            last.map_or(0, |r| r.c0),
            last.map_or(0, |r| r.c1),
            last.map_or(0, |r| r.c2),
            log.remaining,
            last.map_or(0, |r| r.obs_count),
        );
        match &a.out_dir {
            Some(d) => log.write_csv(fs::File::create(d.join(format!("episode_{k}.csv")))?, settings.n_agents, true)?,
            None => log.write_csv(&mut stdout, settings.n_agents, k == 0)?,
        }
    }
    Ok(())
}

fn load_bench_spec(path: &Path) -> Result<BenchSpec> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(if value.is_array() {
        BenchSpec {
            conditions: serde_json::from_value::<Vec<Condition>>(value)?,
            ..BenchSpec::default()
        }
    } else {
        serde_json::from_value(value)?
    })
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut spec = load_bench_spec(&a.conditions)?;
    spec.settings = a.settings.resolve(Some(spec.settings))?;
    if let Some(p) = a.policy {
        spec.policy = p;
    }
    if a.endpoint.is_some() {
        spec.endpoint = a.endpoint;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
        if spec.seeds.as_ref().is_some_and(|s| s.len() != t) {
            spec.seeds = None;
        }
    }
    if let Some(s) = a.seed {
        spec.seed = s;
        spec.seeds = None;
    }
    if let Some(c) = &a.checkpoints {
        spec.checkpoints = parse_checkpoints(c)?;
    }
    let report = bench::bench(&spec)?;
    for name in report.degenerate_conditions() {
        eprintln!("condition {name:?} is degenerate: fewer than 2 completed trials");
    }
    for p in report.write_outputs(&a.out_dir)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_curriculum(a: CurriculumArgs) -> Result<()> {
    let mut config: CurriculumConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => CurriculumConfig::default(),
    };
    if let Some(s) = &a.stage_episodes {
        let (s1, s2) = s.split_once(',').context("expected S1,S2")?;
        config.stage_episodes = Some((s1.trim().parse()?, s2.trim().parse()?));
    }
    let staged = config.stage_episodes.is_some();
    let mut state = CurriculumState::new(config, Default::default(), 0)?;
    if !staged {
        for _ in 1..a.stage {
            state.advance_stage();
        }
    }
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["episode", "stage", "n_obstacles", "p_l"])?;
    for _ in 0..a.episodes {
        let r = state.next_row();
        w.write_record([
            r.episode.to_string(),
            r.stage.to_string(),
            r.n_obstacles.to_string(),
            format!("{:.2}", r.p_l),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let settings = a.settings.resolve(None)?;
    match a.protocol.as_str() {
        "gateway" => match a.listen {
            Some(addr) => {
                let server = gateway::GatewayServer::spawn(addr.as_str(), settings)?;
                eprintln!("gateway listening on {}", server.local_addr());
                server.join();
            }
            None => gateway::serve_stream(&settings, io::stdin().lock(), io::stdout().lock())?,
        },
        "sync" => {
            let file = WorldFile::load(a.world.as_deref().context("--world is required for the sync protocol")?)?;
            let state = ServerState::from_landmarks(settings.n_agents, &file.landmarks);
            match a.listen {
                Some(addr) => {
                    let server = SyncServer::spawn(addr.as_str(), state)?;
                    eprintln!("sync server listening on {}", server.local_addr());
                    loop {
                        std::thread::park();
                    }
                }
                None => {
                    let state = std::sync::Mutex::new(state);
                    lcx::sync::wire::serve_stream(&state, BufReader::new(io::stdin().lock()), io::stdout().lock())?;
                }
            }
        }
        other => bail!("unknown protocol {other:?} (gateway, sync)"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Genmap(a) => cmd_genmap(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Curriculum(a) => cmd_curriculum(a),
        Command::Serve(a) => cmd_serve(a),
    }
}
