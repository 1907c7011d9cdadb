//! `condlab` — batch front-end for the coupled-parabolic control
//! laboratory. Every subcommand reads one JSON config (see
//! [`config::RunConfig`]) and writes plot-ready CSV/JSON artifacts, each
//! with a sidecar recording the config hash and precision used.

mod artifacts;
mod config;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use condlab::condensation::{
    estimate_t0_irrational, estimate_t0_rational, gram_det, riesz_degeneracy_scan, scan_coupling,
};
use condlab::moment::{
    blaschke_solve, gram_moment_solve_weighted, guarded_moments, hum_control, moments_from_initial,
    ControlSignal,
};
use condlab::simulate::{
    blowup_experiment, forward, observability_ratio, verify_null_control, AdjointData,
    ObservabilityReport, WitnessSequence,
};
use condlab::spectral::{index_maps, spectrum, Branch, Coupling};
use serde_json::json;

use artifacts::ArtifactSink;
use config::{Method, QSpec, RunConfig};

#[derive(Parser)]
#[command(name = "condlab", version, about = "numerical laboratory for boundary control of a 2x2 coupled parabolic system")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output_dir from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on module-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classified adjoint spectrum table (CSV + JSON summary).
    Spectrum,
    /// Minimal-time estimate from the coupling integrals.
    MinimalTime,
    /// Gram determinants along the fast/slow index pairing.
    GramScan,
    /// Synthesize a null control (gram / blaschke / hum per config).
    Control,
    /// Simulate the controlled system and verify the terminal state.
    Simulate,
    /// Observability quotients for configured adjoint data.
    Observability,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let config_path = cli
        .config
        .as_deref()
        .context("--config <path> is required")?;
    let (cfg, raw) = RunConfig::load(config_path)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let name = match cli.command {
        Command::Spectrum => "spectrum",
        Command::MinimalTime => "minimal-time",
        Command::GramScan => "gram-scan",
        Command::Control => "control",
        Command::Simulate => "simulate",
        Command::Observability => "observability",
    };
    let sink = ArtifactSink::new(&out_dir, &raw, name)?;
    match cli.command {
        Command::Spectrum => cmd_spectrum(&cfg, &sink),
        Command::MinimalTime => cmd_minimal_time(&cfg, &sink),
        Command::GramScan => cmd_gram_scan(&cfg, &sink),
        Command::Control => cmd_control(&cfg, &sink),
        Command::Simulate => cmd_simulate(&cfg, &sink),
        Command::Observability => cmd_observability(&cfg, &sink),
    }
}

fn base_meta(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "precision_bits": cfg.context().working_bits,
        "series_cutoff": cfg.context().series_cutoff,
        "K": cfg.k,
        "N_sim": cfg.n_sim(),
        "T": cfg.t,
    })
}

fn csv_bytes<F>(headers: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    fill(&mut w)?;
    Ok(w.into_inner()?)
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

fn cmd_spectrum(cfg: &RunConfig, sink: &ArtifactSink) -> Result<()> {
    let p = cfg.problem()?;
    let table = spectrum(&p)?;
    let csv = csv_bytes(
        &[
            "lambda", "branch", "index", "classification", "tag", "observation",
            "log_abs_observation", "coupling_integral", "psi_prime_zero",
        ],
        |w| {
            for e in &table.entries {
                let (branch, index) = match e.branch {
                    Branch::Fast { k } => ("fast", k),
                    Branch::Slow { k } => ("slow", k),
                };
                w.write_record(&[
                    fmt(e.lambda),
                    branch.to_string(),
                    index.to_string(),
                    format!("{:?}", e.class),
                    e.tag.as_str().to_string(),
                    fmt(e.observation),
                    fmt(e.log_abs_observation),
                    e.coupling_integral.map(fmt).unwrap_or_default(),
                    fmt(e.psi_prime_zero),
                ])?;
            }
            Ok(())
        },
    )?;
    let meta = json!({
        "base": base_meta(cfg),
        "regime": format!("{:?}", table.regime),
        "complete_below": table.complete_below,
        "entries": table.entries.len(),
    });
    sink.write("spectrum.csv", &csv, meta.clone())?;
    sink.write_json(
        "spectrum.json",
        &json!({
            "regime": format!("{:?}", table.regime),
            "complete_below": table.complete_below,
            "entries": table.entries.len(),
        }),
        meta,
    )?;
    println!(
        "spectrum: {} eigenvalues ({:?} regime), complete below {:.3}",
        table.entries.len(),
        table.regime,
        table.complete_below
    );
    Ok(())
}

fn cmd_minimal_time(cfg: &RunConfig, sink: &ArtifactSink) -> Result<()> {
    let p = cfg.problem()?;
    let est = if p.nu.is_rational() {
        estimate_t0_rational(&p, cfg.k)?
    } else {
        estimate_t0_irrational(&p, cfg.k)?
    };
    let csv = csv_bytes(&["key", "quotient"], |w| {
        for (k, v) in &est.partials {
            w.write_record(&[fmt(*k), fmt(*v)])?;
        }
        Ok(())
    })?;
    let meta = json!({ "base": base_meta(cfg), "estimator": format!("{:?}", est.kind) });
    sink.write("minimal_time.csv", &csv, meta.clone())?;
    sink.write_json(
        "minimal_time.json",
        &json!({
            "estimator": format!("{:?}", est.kind),
            "estimate_at_k": est.estimate_at_k,
            "components": est.components,
            "skipped": est.skipped,
        }),
        meta,
    )?;
    println!("minimal time estimate at K={}: {:.6}", cfg.k, est.estimate_at_k);
    Ok(())
}

fn cmd_gram_scan(cfg: &RunConfig, sink: &ArtifactSink) -> Result<()> {
    let (nu, liouville) = cfg.nu()?;
    let records = if let Some(spec) = &liouville {
        riesz_degeneracy_scan(spec, &scan_coupling(spec.parity))?
    } else {
        let p = cfg.problem()?;
        let maps = index_maps(&nu, cfg.k)?;
        let mut recs = Vec::new();
        for k in 1..=cfg.k {
            let j = maps.j_k[k - 1].max(1) as usize;
            match gram_det(&p, k, j) {
                Ok(r) => recs.push(r),
                Err(e) => eprintln!("gram-scan: skipping pair (k={k}, j={j}): {e}"),
            }
        }
        recs
    };
    if records.is_empty() {
        bail!("gram-scan produced no records");
    }
    let csv = csv_bytes(
        &["k", "j", "det", "log_det", "log_u", "log_k2u", "coupling", "bits_used"],
        |w| {
            for r in &records {
                w.write_record(&[
                    r.k.to_string(),
                    r.j.to_string(),
                    fmt(r.det),
                    fmt(r.log_det),
                    fmt(r.log_u),
                    fmt(r.log_k2u),
                    fmt(r.coupling),
                    r.bits_used.to_string(),
                ])?;
            }
            Ok(())
        },
    )?;
    let meta = json!({
        "base": base_meta(cfg),
        "mode": if liouville.is_some() { "liouville-degeneracy" } else { "index-pairing" },
        "records": records.len(),
        "min_bits_used": records.iter().map(|r| r.bits_used).min(),
    });
    sink.write("gram_scan.csv", &csv, meta)?;
    println!(
        "gram-scan: {} records, last log10(det) = {:.2}",
        records.len(),
        records.last().unwrap().log_det / std::f64::consts::LN_10
    );
    Ok(())
}

fn cmd_control(cfg: &RunConfig, sink: &ArtifactSink) -> Result<()> {
    let p = cfg.problem()?;
    let y0 = cfg.initial_data()?;
    let samples = cfg.steps();
    let (signal, diagnostics) = match cfg.method() {
        Method::Gram => {
            // Guard atoms up to 2K plus edge-vanishing kernels keep the
            // control's stray moments beyond the truncation small; see the
            // moment module documentation.
            let sys = guarded_moments(&p, &y0, cfg.t, 2 * cfg.k)?;
            let sol = gram_moment_solve_weighted(&sys, &cfg.context(), samples, 5)?;
            let d = json!({
                "max_residual": sol.max_residual,
                "condition": sol.condition,
                "bits_used": sol.bits_used,
                "atoms": sol.residuals.len(),
            });
            (sol.signal, d)
        }
        Method::Blaschke => {
            let sys = moments_from_initial(&p, &y0, cfg.t)?;
            let sol = blaschke_solve(&sys, samples)?;
            let d = json!({
                "max_residual": sol.max_residual,
                "atoms": sol.atoms.len(),
            });
            (sol.signal, d)
        }
        Method::Hum => {
            let eps = cfg.epsilon.unwrap_or(1e-6);
            let rep = hum_control(&p, &y0, cfg.t, eps, cfg.n_sim(), samples)?;
            let d = json!({
                "epsilon": rep.epsilon,
                "iterations": rep.iterations,
                "cg_residual": rep.cg_residual,
                "terminal_relative": rep.terminal_relative,
            });
            (rep.signal, d)
        }
    };
    let n = signal.samples.len() - 1;
    let csv = csv_bytes(&["t", "u"], |w| {
        for (i, u) in signal.samples.iter().enumerate() {
            w.write_record(&[fmt(i as f64 * signal.t_horizon / n as f64), fmt(*u)])?;
        }
        Ok(())
    })?;
    let summary = json!({
        "method": signal.method,
        "k_used": signal.k_used,
        "t_horizon": signal.t_horizon,
        "samples": signal.samples.len(),
        "norm_l2": signal.norm_l2(),
        "diagnostics": diagnostics,
    });
    let meta = json!({ "base": base_meta(cfg), "summary": summary });
    sink.write("control.csv", &csv, meta.clone())?;
    sink.write_json("control.json", &summary, meta)?;
    println!(
        "control ({}): ||u||_L2 = {:.4e}, {} samples",
        signal.method,
        signal.norm_l2(),
        signal.samples.len()
    );
    Ok(())
}

fn load_control(cfg: &RunConfig, out_dir_fallback: &std::path::Path) -> Result<ControlSignal> {
    let path = cfg
        .control_file
        .clone()
        .unwrap_or_else(|| out_dir_fallback.join("control.csv"));
    if !path.exists() {
        // Free evolution: simulate with the zero control.
        return Ok(ControlSignal::from_samples(vec![0.0, 0.0], cfg.t, 0, "zero"));
    }
    let mut rdr = csv::Reader::from_path(&path)
        .with_context(|| format!("cannot read control samples from {}", path.display()))?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let u: f64 = rec
            .get(1)
            .context("control CSV needs two columns t,u")?
            .parse()
            .context("control CSV value column is not a number")?;
        samples.push(u);
    }
    if samples.len() < 2 {
        bail!("control file {} has fewer than two samples", path.display());
    }
    Ok(ControlSignal::from_samples(samples, cfg.t, cfg.k, "file"))
}

fn cmd_simulate(cfg: &RunConfig, sink: &ArtifactSink) -> Result<()> {
    let p = cfg.problem()?;
    let y0 = cfg.initial_data()?;
    let u = load_control(cfg, sink.dir())?;
    let steps = cfg.steps();
    let n_sim = cfg.n_sim();
    let traj = forward(&y0, &u, &p, n_sim, steps)?;
    let report = verify_null_control(&y0, &u, &p, n_sim, steps)?;
    // Plot-ready trajectory: stride down to at most ~4096 rows.
    let stride = (traj.times.len() / 4096).max(1);
    let csv = csv_bytes(&["t", "norm_Hm1", "norm_L2"], |w| {
        for i in (0..traj.times.len()).step_by(stride) {
            w.write_record(&[fmt(traj.times[i]), fmt(traj.norm_hm1[i]), fmt(traj.norm_l2[i])])?;
        }
        if (traj.times.len() - 1) % stride != 0 {
            let i = traj.times.len() - 1;
            w.write_record(&[fmt(traj.times[i]), fmt(traj.norm_hm1[i]), fmt(traj.norm_l2[i])])?;
        }
        Ok(())
    })?;
    let summary = json!({
        "control_method": u.method,
        "relative_residual": report.relative_residual,
        "tail_residual": report.tail_residual,
        "n_sim": report.n_sim,
        "control_cutoff": report.control_cutoff,
        "steps": steps,
        "terminal_modes": report.terminal_modes,
    });
    let meta = json!({ "base": base_meta(cfg), "summary": summary });
    sink.write("trajectory.csv", &csv, meta.clone())?;
    sink.write_json("simulate.json", &summary, meta)?;
    println!(
        "simulate: relative terminal residual {:.4e} (tail {:.4e}) over {} modes",
        report.relative_residual, report.tail_residual, n_sim
    );
    Ok(())
}

fn report_json(r: &ObservabilityReport) -> serde_json::Value {
    json!({
        "descriptor": r.descriptor,
        "numerator": r.numerator,
        "denominator": r.denominator,
        "ratio": r.ratio,
        "log_ratio": r.log_ratio,
    })
}

fn cmd_observability(cfg: &RunConfig, sink: &ArtifactSink) -> Result<()> {
    let p = cfg.problem()?;
    let reports: Vec<ObservabilityReport> = if matches!(cfg.q, QSpec::Synthetic { .. })
        || matches!(p.q, Coupling::Synthetic { .. })
    {
        let ls: Vec<usize> = (2..=(cfg.k / 2).max(2)).collect();
        blowup_experiment(&p, cfg.t, &WitnessSequence::Chain(ls))?
    } else {
        let y0 = cfg.initial_data().context(
            "observability with an explicit q needs y0 in the config (adjoint terminal datum)",
        )?;
        vec![observability_ratio(&AdjointData::Generic(y0), &p, cfg.t)?]
    };
    let meta = json!({ "base": base_meta(cfg), "reports": reports.len() });
    sink.write_json(
        "observability.json",
        &serde_json::Value::Array(reports.iter().map(report_json).collect()),
        meta,
    )?;
    for r in &reports {
        println!("{}: log10 ratio {:.3}", r.descriptor, r.log_ratio / std::f64::consts::LN_10);
    }
    Ok(())
}
