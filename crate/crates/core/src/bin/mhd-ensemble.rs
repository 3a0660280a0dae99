use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mhd_ensemble::ensemble::{Sampling, ViscosityRanges};
use mhd_ensemble::experiments::cavity::{run_cavity, CavitySetup};
use mhd_ensemble::experiments::channel::{run_step_channel, ChannelSetup};
use mhd_ensemble::experiments::config::ExperimentConfig;
use mhd_ensemble::experiments::convergence::{run_spatial_convergence, run_temporal_convergence, MmsRun};
use mhd_ensemble::experiments::energy::{run_energy_test, EnergyTest};
use mhd_ensemble::experiments::mms::Mms;
use mhd_ensemble::experiments::output::{energy_csv, write_fields_vtk, write_text};
use mhd_ensemble::Result;

/// Decoupled ensemble solver for 2D MHD in Elsasser variables.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Experiment configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for uniform viscosity sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the evenly spaced viscosity grid instead of random draws.
    #[arg(long, global = true)]
    deterministic_grid: bool,
    /// Use the full-size resolutions, Reynolds numbers and end times.
    #[arg(long, global = true)]
    full_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spatial convergence of the manufactured solution.
    ConvergeSpace,
    /// Temporal convergence of the manufactured solution.
    ConvergeTime,
    /// Energy decay with zero forcing and homogeneous boundary data.
    Energy,
    /// Lid-driven cavity.
    Cavity,
    /// Channel flow over a step.
    Channel,
    /// Finite-difference residual check of the manufactured forcing.
    ValidateMms,
}

const SAMPLE_A: ViscosityRanges = ViscosityRanges { nu: [0.009, 0.011], nu_m: [0.09, 0.11] };
const SAMPLE_B: ViscosityRanges = ViscosityRanges { nu: [0.009, 0.011], nu_m: [0.0009, 0.0011] };
const CHANNEL_SAMPLE: ViscosityRanges = ViscosityRanges { nu: [0.0009, 0.0011], nu_m: [0.009, 0.011] };

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.deterministic_grid {
        cfg.deterministic_grid = Some(true);
    }
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::ConvergeSpace => converge_space(&cfg, cli),
        Command::ConvergeTime => converge_time(&cfg, cli),
        Command::Energy => energy(&cfg, cli),
        Command::Cavity => cavity(&cfg, cli),
        Command::Channel => channel(&cfg, cli),
        Command::ValidateMms => validate_mms(&cfg, cli),
    }
}

fn save(out: &Path, name: &str, text: &str) -> Result<()> {
    let path = out.join(name);
    write_text(&path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn converge_space(cfg: &ExperimentConfig, cli: &Cli) -> Result<()> {
    let end_time = cfg.end_time.unwrap_or(0.001);
    let meshes = cfg.meshes.clone().unwrap_or_else(|| if cli.full_scale { vec![4, 8, 16, 32, 64] } else { vec![4, 8, 16, 32] });
    let eps_list = cfg.eps_list.clone().unwrap_or_else(|| cfg.eps.map_or(vec![0.0, 0.01], |e| vec![e]));
    for (k, ranges) in cfg.ranges_or(&[SAMPLE_A]).into_iter().enumerate() {
        let members = cfg.members_or_sample(ranges, 20)?;
        for &eps in &eps_list {
            let template = MmsRun {
                n: meshes[0],
                dt: cfg.dt.unwrap_or(end_time / 8.0),
                end_time,
                eps,
                mu: cfg.mu.unwrap_or(1.0),
                members: members.clone(),
                comparison: cfg.comparison.unwrap_or_default(),
            };
            let table = run_spatial_convergence(&template, &meshes)?;
            print!("sample {} eps {eps}\n{}", k + 1, table.to_csv());
            save(&cli.out, &format!("spatial_sample{}_eps{eps}.csv", k + 1), &table.to_csv())?;
        }
    }
    Ok(())
}

fn converge_time(cfg: &ExperimentConfig, cli: &Cli) -> Result<()> {
    let end_time = cfg.end_time.unwrap_or(1.0);
    let n = cfg.mesh_n().unwrap_or(if cli.full_scale { 64 } else { 32 });
    let divisors = cfg.divisors.clone().unwrap_or_else(|| {
        let top = if cli.full_scale { 7 } else { 6 };
        (1..=top).map(|k| 1usize << k).collect()
    });
    let eps_list = cfg.eps_list.clone().unwrap_or_else(|| vec![cfg.eps.unwrap_or(0.0)]);
    for (k, ranges) in cfg.ranges_or(&[SAMPLE_A, SAMPLE_B]).into_iter().enumerate() {
        let members = cfg.members_or_sample(ranges, 20)?;
        for &eps in &eps_list {
            let template = MmsRun {
                n,
                dt: end_time,
                end_time,
                eps,
                mu: cfg.mu.unwrap_or(1.0),
                members: members.clone(),
                comparison: cfg.comparison.unwrap_or_default(),
            };
            let table = run_temporal_convergence(&template, &divisors)?;
            print!("sample {} eps {eps}\n{}", k + 1, table.to_csv());
            save(&cli.out, &format!("temporal_sample{}_eps{eps}.csv", k + 1), &table.to_csv())?;
        }
    }
    Ok(())
}

fn energy(cfg: &ExperimentConfig, cli: &Cli) -> Result<()> {
    let ranges = cfg.ranges_or(&[SAMPLE_A])[0];
    let test = EnergyTest {
        n: cfg.mesh_n().unwrap_or(32),
        dt: cfg.dt.unwrap_or(0.05),
        end_time: cfg.end_time.unwrap_or(1.0),
        eps: cfg.eps.unwrap_or(0.01),
        mu: cfg.mu.unwrap_or(1.0),
        members: cfg.members_or_sample(ranges, 20)?,
    };
    let out = run_energy_test(&test)?;
    save(&cli.out, "energy.csv", &energy_csv(&out.report))?;
    save(&cli.out, "energy_report.json", &serde_json::to_string_pretty(&out.report).unwrap_or_default())?;
    println!("max relative energy increase per step: {:.3e}", out.max_relative_increase());
    for c in &out.stability {
        println!("member {:2}: stability bound {} (lhs {:.6e} <= rhs {:.6e})", c.member, if c.holds { "holds" } else { "VIOLATED" }, c.lhs, c.rhs);
    }
    Ok(())
}

fn cavity(cfg: &ExperimentConfig, cli: &Cli) -> Result<()> {
    let full = cli.full_scale;
    let setup = CavitySetup {
        n: cfg.mesh_n().unwrap_or(if full { 64 } else { 32 }),
        dt: cfg.dt.unwrap_or(if full { 5.0 } else { 1.0 }),
        end_time: cfg.end_time.unwrap_or(if full { 600.0 } else { 50.0 }),
        s: cfg.s.unwrap_or(0.0),
        eps: cfg.eps.unwrap_or(0.01),
        mu: cfg.mu.unwrap_or(1.0),
        reynolds: cfg.reynolds.unwrap_or(if full { [13636.36, 16666.67] } else { [900.0, 1100.0] }),
        nu_m: cfg.nu_m.unwrap_or([0.009, 0.011]),
        members: cfg.count.unwrap_or(20),
        sampling: cfg.sampling(),
    };
    let every = cfg.snapshot_every.unwrap_or(0);
    let out = run_cavity(&setup, |step, _, disc, u, b| {
        if every > 0 && step % every == 0 {
            write_fields_vtk(cli.out.join(format!("cavity_{step:05}.vtk")), disc.velocity(), u, b)?;
        }
        Ok(())
    })?;
    write_fields_vtk(cli.out.join("cavity_final.vtk"), out.disc.velocity(), &out.u, &out.b)?;
    save(&cli.out, "cavity_energy.csv", &energy_csv(&out.report))?;
    println!(
        "cavity: {} steps, final energy {:.6e}, max divergence {:.3e}",
        out.report.steps(),
        out.report.energy.last().copied().unwrap_or(0.0),
        out.report.divergence.iter().fold(0.0f64, |a, &b| a.max(b))
    );
    Ok(())
}

fn channel(cfg: &ExperimentConfig, cli: &Cli) -> Result<()> {
    let full = cli.full_scale;
    let setup = ChannelSetup {
        h_target: cfg.mesh_h_target().unwrap_or(if full { 0.25 } else { 1.0 }),
        dt: cfg.dt.unwrap_or(0.05),
        end_time: cfg.end_time.unwrap_or(if full { 40.0 } else { 10.0 }),
        s: cfg.s.unwrap_or(0.001),
        mu: cfg.mu.unwrap_or(1.0),
    };
    let members = cfg.members_or_sample(cfg.ranges_or(&[CHANNEL_SAMPLE])[0], 20)?;
    let eps_list = cfg.eps_list.clone().unwrap_or_else(|| vec![0.1, 0.01, 0.0]);
    let out = run_step_channel(&setup, &eps_list, &members)?;
    for c in &out.cases {
        write_fields_vtk(cli.out.join(format!("channel_{}.vtk", c.label)), out.disc.velocity(), &c.u, &c.b)?;
        save(&cli.out, &format!("channel_{}_energy.csv", c.label), &energy_csv(&c.report))?;
    }
    let mut csv = String::from("eps,l2_distance_to_usual_mhd\n");
    for (c, d) in out.cases.iter().zip(&out.distances) {
        csv.push_str(&format!("{},{d:.6e}\n", c.eps));
    }
    print!("{csv}");
    save(&cli.out, "channel_distances.csv", &csv)
}

fn validate_mms(cfg: &ExperimentConfig, cli: &Cli) -> Result<()> {
    let seed = cfg.seed.unwrap_or(0);
    let ranges = cfg.ranges_or(&[SAMPLE_A])[0];
    let count = cfg.count.unwrap_or(3);
    let members = match &cfg.members {
        Some(m) => m.clone(),
        None => mhd_ensemble::ensemble::sample_viscosities(ranges, count, Sampling::Uniform { seed })?,
    };
    let mms = Mms::new(cfg.eps.unwrap_or(0.01), members)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<([f64; 2], f64)> =
        (0..100).map(|_| ([rng.random::<f64>(), rng.random::<f64>()], rng.random::<f64>())).collect();
    let all: Vec<usize> = (0..mms.num_members()).collect();
    let worst = mms.max_fd_residual(&points, &all, 1e-2);
    let verdict = if worst <= 1e-10 { "PASS" } else { "FAIL" };
    let line = format!("max finite-difference residual {worst:.3e} over {} points, {} members: {verdict}", points.len(), all.len());
    println!("{line}");
    save(&cli.out, "mms_residual.txt", &format!("{line}\n"))?;
    if worst > 1e-10 {
        return Err(mhd_ensemble::Error::Configuration(line));
    }
    Ok(())
}
