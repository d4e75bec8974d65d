//! Command-line front end: parameter scans and machine-readable output for
//! the mirrorcp physics library. All tables are CSV with '#'-prefixed
//! metadata lines (config hash, version, seed); reruns with identical
//! configuration and seed produce byte-identical files.

mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, ZScan};
use mirrorcp::cpforce::{
    cp_force_far_asymptote, cp_force_near_asymptote, cp_force_thermal_dispersive_closed,
    cp_force_thermal_retarded, cp_force_total, cp_force_total_thermal, static_polarizability,
};
use mirrorcp::langevin::{auto_grid, dispersion_scan, run_ensemble, SamplerSettings};
use mirrorcp::noise::{build_covariance, build_covariance_with, CovarianceOptions, KernelForm};
use mirrorcp::{Error as PhysErr, InverseTemperature, ThermalConfig, TimeGrid};

const EXIT_USAGE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_REGIME: u8 = 5;

#[derive(Parser)]
#[command(name = "mirrorcp", version, about = "Casimir-Polder forces and mirror-induced dispersion")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: String,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Output format (csv only).
    #[arg(long)]
    format: Option<String>,
    /// Emit Omega-scaled dimensionless columns.
    #[arg(long)]
    dimensionless: bool,
    /// Override the trajectory count from the config.
    #[arg(long)]
    count: Option<usize>,
    /// Scan range start (log spacing).
    #[arg(long)]
    zmin: Option<f64>,
    /// Scan range end (log spacing).
    #[arg(long)]
    zmax: Option<f64>,
    /// Number of scan points.
    #[arg(long)]
    zsteps: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Vacuum force-vs-distance table.
    ForceScan(Common),
    /// Thermal force table over distances and temperatures.
    ThermalScan(Common),
    /// Noise-kernel lags and covariance diagnostics.
    Kernel(Common),
    /// One ensemble run with reproducibility manifest.
    Simulate(Common),
    /// Monte Carlo dispersion versus distance.
    DispersionScan(Common),
}

fn exit_code_for(e: &PhysErr) -> u8 {
    match e {
        PhysErr::Domain(_) => EXIT_DOMAIN,
        PhysErr::Pole { .. }
        | PhysErr::Truncation { .. }
        | PhysErr::Quadrature(_)
        | PhysErr::Numerical(_)
        | PhysErr::IllConditioned { .. }
        | PhysErr::StepSize(_) => EXIT_NUMERICAL,
        PhysErr::UnstableTrap { .. } | PhysErr::BurnIn { .. } | PhysErr::Regime(_) => EXIT_REGIME,
    }
}

struct Ctx {
    cfg: RunConfig,
    hash: String,
}

fn load(common: &Common) -> Result<Ctx, (u8, String)> {
    let mut cfg = RunConfig::from_file(&common.config).map_err(|e| (EXIT_USAGE, e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(count) = common.count {
        cfg.count = count;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    if let Some(fmt) = &common.format {
        cfg.format = fmt.clone();
    }
    if common.dimensionless {
        cfg.dimensionless = true;
    }
    if let (Some(zmin), Some(zmax), Some(zsteps)) = (common.zmin, common.zmax, common.zsteps) {
        cfg.scan = Some(ZScan::LogRange { zmin, zmax, zsteps });
    }
    if cfg.format != "csv" {
        return Err((EXIT_USAGE, format!("unsupported format '{}'; only csv is available", cfg.format)));
    }
    cfg.atom.validate().map_err(|e| (EXIT_USAGE, format!("invalid atom parameters: {e}")))?;
    cfg.thermal.validate().map_err(|e| (EXIT_USAGE, format!("invalid thermal config: {e}")))?;
    let hash = cfg.hash();
    Ok(Ctx { cfg, hash })
}

fn scan_values(cfg: &RunConfig) -> Result<Vec<f64>, (u8, String)> {
    let v = cfg
        .scan
        .as_ref()
        .ok_or((EXIT_USAGE, "config has no scan (list or zmin/zmax/zsteps)".to_string()))?
        .values();
    if v.is_empty() {
        return Err((EXIT_USAGE, "scan resolved to an empty list of distances".into()));
    }
    Ok(v)
}

fn write_output(cfg: &RunConfig, body: &str) -> Result<(), (u8, String)> {
    match &cfg.output {
        Some(path) => std::fs::write(path, body).map_err(|e| (EXIT_USAGE, format!("cannot write {path}: {e}"))),
        None => {
            print!("{body}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn header(ctx: &Ctx, kind: &str) -> String {
    format!(
        "# mirrorcp {} {kind}\n# config_hash={}\n# seed={}\n",
        env!("CARGO_PKG_VERSION"),
        ctx.hash,
        ctx.cfg.seed
    )
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_force_scan(ctx: &Ctx) -> Result<(), (u8, String)> {
    let cfg = &ctx.cfg;
    let zs = scan_values(cfg)?;
    let p = &cfg.atom;
    let (zf, ff): (f64, f64) = if cfg.dimensionless {
        // columns in units Omega z and m F / (q^2 Omega^3)
        (p.omega, p.m / (p.q * p.q * p.omega.powi(3)))
    } else {
        (1.0, 1.0)
    };
    let mut body = header(ctx, "force-scan");
    body += "# natural units (hbar = c = 1)";
    body += if cfg.dimensionless { "; dimensionless columns: Omega*z, m*F/(q^2 Omega^3)\n" } else { "\n" };
    body += "z,F_cp1,F_cp2,F_total,F_near_asymptote,F_far_asymptote,flag\n";
    for &z in &zs {
        match (cp_force_total(z, p), cp_force_near_asymptote(z, p), cp_force_far_asymptote(z, p)) {
            (Ok(b), Ok(near), Ok(far)) => {
                body += &format!(
                    "{},{},{},{},{},{},ok\n",
                    fmt(z * zf),
                    fmt(b.f_cp1 * ff),
                    fmt(b.f_cp2 * ff),
                    fmt(b.total * ff),
                    fmt(near * ff),
                    fmt(far * ff)
                );
            }
            (r1, r2, r3) => {
                let err = [r1.err().map(|e| e.to_string()), r2.err().map(|e| e.to_string()), r3.err().map(|e| e.to_string())]
                    .into_iter()
                    .flatten()
                    .next()
                    .unwrap_or_default();
                body += &format!("{},,,,,,error: {}\n", fmt(z * zf), err);
            }
        }
    }
    write_output(cfg, &body)
}

fn cmd_thermal_scan(ctx: &Ctx) -> Result<(), (u8, String)> {
    let cfg = &ctx.cfg;
    let zs = scan_values(cfg)?;
    let temps = cfg.scan_temperatures.clone().unwrap_or_else(|| vec![0.0]);
    if temps.is_empty() {
        return Err((EXIT_USAGE, "scan_temperatures resolved to an empty list".into()));
    }
    let p = &cfg.atom;
    let alpha = static_polarizability(p);
    let mut body = header(ctx, "thermal-scan");
    body += "# equal field and oscillator temperatures per row; T = 0 means vacuum\n";
    body += "z,T_field,T_osc,F_thermal_retarded,F_thermal_dispersive,F_total,F_highT_reference,flag\n";
    for &t in &temps {
        let beta = if t == 0.0 { InverseTemperature::VACUUM } else { InverseTemperature(1.0 / t) };
        let thermal = ThermalConfig { beta, beta_bar: beta, ..cfg.thermal };
        for &z in &zs {
            let row = (|| -> mirrorcp::Result<String> {
                let ret = cp_force_thermal_retarded(z, p, beta)?;
                let disp = cp_force_thermal_dispersive_closed(z, p, beta)?;
                let total = cp_force_total_thermal(z, p, &thermal)?.total;
                let reference = if beta.is_finite() { -0.75 * alpha / (beta.value() * z.powi(4)) } else { f64::NAN };
                Ok(format!(
                    "{},{},{},{},{},{},{},ok\n",
                    fmt(z),
                    fmt(t),
                    fmt(t),
                    fmt(ret),
                    fmt(disp),
                    fmt(total),
                    fmt(reference)
                ))
            })();
            match row {
                Ok(r) => body += &r,
                Err(e) => body += &format!("{},{},{},,,,,error: {}\n", fmt(z), fmt(t), fmt(t), e),
            }
        }
    }
    write_output(cfg, &body)
}

fn cmd_kernel(ctx: &Ctx) -> Result<(), (u8, String)> {
    let cfg = &ctx.cfg;
    let trap = cfg.trap.as_ref().ok_or((EXIT_USAGE, "kernel command needs a trap block (z_bar)".to_string()))?;
    let grid = cfg.grid.ok_or((EXIT_USAGE, "kernel command needs a grid block".to_string()))?;
    let z = trap.z_bar;
    let cov = build_covariance(z, &grid, &cfg.atom, &cfg.thermal).map_err(|e| (exit_code_for(&e), e.to_string()))?;
    let full = build_covariance_with(
        z,
        &grid,
        &cfg.atom,
        &cfg.thermal,
        &CovarianceOptions { form: KernelForm::Full, ..Default::default() },
    );
    let mut body = header(ctx, "kernel");
    body += &format!(
        "# sampling kernel (bounce-free): min_eigenvalue={} clipped_mass={} negative_fraction={}\n",
        fmt(cov.min_eigenvalue()),
        fmt(cov.clipped_mass()),
        fmt(cov.negative_fraction())
    );
    if let Ok(f) = &full {
        body += &format!(
            "# full image kernel diagnostics: min_eigenvalue={} clipped_mass={} negative_fraction={}\n",
            fmt(f.min_eigenvalue()),
            fmt(f.clipped_mass()),
            fmt(f.negative_fraction())
        );
    }
    body += "lag,c_xx,c_xy,c_xz,c_yx,c_yy,c_yz,c_zx,c_zy,c_zz\n";
    for (i, b) in cov.blocks.iter().enumerate() {
        let s = grid.dt * i as f64;
        body += &format!(
            "{},{},0,0,0,{},0,0,0,{}\n",
            fmt(s),
            fmt(b[0]),
            fmt(b[1]),
            fmt(b[2])
        );
    }
    write_output(cfg, &body)
}

fn cmd_simulate(ctx: &Ctx) -> Result<(), (u8, String)> {
    let cfg = &ctx.cfg;
    let trap = cfg.trap.as_ref().ok_or((EXIT_USAGE, "simulate needs a trap block".to_string()))?;
    let grid = match cfg.grid {
        Some(g) => g,
        None => auto_grid(trap.z_bar, 0.25).map_err(|e| (exit_code_for(&e), e.to_string()))?,
    };
    let stats = run_ensemble(cfg.count, cfg.seed, trap.z_bar, trap, &cfg.atom, &cfg.thermal, &grid)
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;
    let analytic = mirrorcp::langevin::dispersion_analytic(trap.z_bar, trap, &cfg.atom)
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;
    let response = mirrorcp::langevin::dispersion_response(trap.z_bar, trap, &cfg.atom)
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;

    let mut body = header(ctx, "simulate");
    body += &format!("# burn_in_span={} count={}\n", fmt(stats.burn_in_span), stats.count);
    body += "z_bar,axis,variance,stderr,analytic,response,drift_sigma,count,seed\n";
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        body += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt(stats.z_bar),
            name,
            fmt(stats.variance[axis]),
            fmt(stats.stderr[axis]),
            fmt(analytic[axis]),
            fmt(response[axis]),
            fmt(stats.drift_sigma[axis]),
            stats.count,
            cfg.seed
        );
    }
    write_output(cfg, &body)?;

    // reproducibility manifest next to the table (or stdout)
    let manifest = serde_json::json!({
        "tool": "mirrorcp",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "simulate",
        "config_hash": ctx.hash,
        "seed": cfg.seed,
        "count": cfg.count,
        "grid": { "t0": grid.t0, "dt": grid.dt, "n": grid.n },
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    match &cfg.output {
        Some(path) => {
            let mpath = format!("{path}.manifest.json");
            std::fs::write(&mpath, text).map_err(|e| (EXIT_USAGE, format!("cannot write {mpath}: {e}")))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_dispersion_scan(ctx: &Ctx) -> Result<(), (u8, String)> {
    let cfg = &ctx.cfg;
    let trap = cfg.trap.as_ref().ok_or((EXIT_USAGE, "dispersion-scan needs a trap block".to_string()))?;
    let zs = scan_values(cfg)?;
    let dt = cfg.grid.map(|g| g.dt).unwrap_or(0.25);
    let scan = dispersion_scan(
        &zs,
        cfg.count,
        cfg.seed,
        trap,
        &cfg.atom,
        &cfg.thermal,
        dt,
        &SamplerSettings::default(),
    )
    .map_err(|e| (exit_code_for(&e), e.to_string()))?;

    let mut body = header(ctx, "dispersion-scan");
    body += &format!(
        "# slope_log_variance_z={} slope_stderr={}\n",
        fmt(scan.slope_z),
        fmt(scan.slope_stderr)
    );
    body += "z_bar,axis,variance,stderr,analytic,response,count,seed,flag\n";
    for row in &scan.rows {
        for (axis, name) in ["x", "y", "z"].iter().enumerate() {
            body += &format!(
                "{},{},{},{},{},{},{},{},{}\n",
                fmt(row.z_bar),
                name,
                fmt(row.stats.variance[axis]),
                fmt(row.stats.stderr[axis]),
                fmt(row.analytic[axis]),
                fmt(row.response[axis]),
                row.stats.count,
                cfg.seed,
                row.regime_flag.as_deref().unwrap_or("ok")
            );
        }
    }
    write_output(cfg, &body)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&Ctx) -> Result<(), (u8, String)>) = match &cli.cmd {
        Cmd::ForceScan(c) => (c, cmd_force_scan),
        Cmd::ThermalScan(c) => (c, cmd_thermal_scan),
        Cmd::Kernel(c) => (c, cmd_kernel),
        Cmd::Simulate(c) => (c, cmd_simulate),
        Cmd::DispersionScan(c) => (c, cmd_dispersion_scan),
    };
    let ctx = match load(common) {
        Ok(ctx) => ctx,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(code);
        }
    };
    match run(&ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
