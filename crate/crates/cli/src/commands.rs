use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use steepfield::fractal::{
    fit_counts, frostman_measure, predicted_dimension, read_counts_csv, write_counts_csv, CellPaths, ConcentricSampler,
    FrostmanMeasure, FrostmanSummary, PhiWeight, ScaleCount,
};
use steepfield::sampler::{
    lattices, read_replica, replica_seed, sample_lattice_hierarchical, write_replica, ExactLatticeSampler, FieldReplica,
};
use steepfield::steep::detect_mask;
use steepfield::verify::{run_suite, Suite, SuiteOptions};

use crate::config::{BackendChoice, ExperimentConfig};
use crate::manifest::Outputs;

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

fn load_replica(path: &Path) -> Result<FieldReplica> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_replica(&mut BufReader::new(file)).with_context(|| format!("reading replica {}", path.display()))
}

pub fn simulate(cfg: &ExperimentConfig, force: bool) -> Result<()> {
    let schedule = cfg.schedule()?;
    // fails with a budget error before anything is sampled
    lattices(cfg.nu, &schedule)?;
    let exact = match cfg.backend {
        BackendChoice::Exact => Some(ExactLatticeSampler::new(cfg.nu, &schedule)?),
        BackendChoice::Hierarchical => None,
    };
    let replicas = cfg.replicas.unwrap_or(1);
    let names: Vec<String> = (0..replicas).map(|r| format!("replica_{r:04}.sfr")).collect();
    let mut out = Outputs::new(cfg.output_dir(), force)?;
    out.claim_all(names.iter().map(String::as_str))?;
    for (r, name) in names.iter().enumerate() {
        let seed = replica_seed(cfg.seed, r as u64);
        let replica = match &exact {
            Some(s) => s.sample(seed),
            None => sample_lattice_hierarchical(cfg.nu, &schedule, seed)?,
        };
        let mut bytes = Vec::new();
        write_replica(&replica, &mut bytes)?;
        out.write(name, &bytes)?;
    }
    let files = out.finish("simulate", cfg, &[])?;
    println!("wrote {} files to {}", files.len(), cfg.output_dir().display());
    Ok(())
}

pub fn detect(cfg: &ExperimentConfig, inputs: &[PathBuf], force: bool) -> Result<()> {
    if inputs.is_empty() {
        bail!("detect needs at least one replica file");
    }
    let f = cfg.function()?;
    let Some(criterion) = cfg.criterion()? else { bail!("detect needs a criterion and band in the config") };
    let names: Vec<String> = inputs.iter().map(|p| format!("mask_{}.json", stem(p))).collect();
    let mut out = Outputs::new(cfg.output_dir(), force)?;
    out.claim_all(names.iter().map(String::as_str).chain(["counts.csv"]))?;
    let mut totals: Option<(Vec<f64>, Vec<u64>)> = None;
    for (path, name) in inputs.iter().zip(&names) {
        let replica = load_replica(path)?;
        if replica.nu != cfg.nu {
            bail!("{} holds a nu = {} field; the config has nu = {}", path.display(), replica.nu, cfg.nu);
        }
        let mask = detect_mask(&replica, &f, &criterion)?;
        out.write(name, mask.to_rle_json()?.as_bytes())?;
        let scales = replica.schedule.values().to_vec();
        let counts: Vec<u64> = mask.counts().into_iter().map(|c| c as u64).collect();
        match &mut totals {
            None => totals = Some((scales, counts)),
            Some((s, c)) => {
                if *s != scales {
                    bail!("{} uses a different schedule from the first replica", path.display());
                }
                c.iter_mut().zip(&counts).for_each(|(a, b)| *a += b);
            }
        }
    }
    let (scales, counts) = totals.expect("at least one input");
    let rows: Vec<ScaleCount> = scales.iter().zip(&counts).map(|(&t, &count)| ScaleCount { t, count }).collect();
    let mut csv = Vec::new();
    write_counts_csv(&rows, &mut csv)?;
    out.write("counts.csv", &csv)?;
    out.finish("detect", cfg, inputs)?;
    println!("flagged cells per level: {counts:?}");
    Ok(())
}

pub fn dimension(cfg: &ExperimentConfig, inputs: &[PathBuf], force: bool) -> Result<()> {
    if inputs.is_empty() {
        bail!("dimension needs at least one count CSV");
    }
    let mut merged: Vec<ScaleCount> = Vec::new();
    for path in inputs {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let rows = read_counts_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        if merged.is_empty() {
            merged = rows;
            continue;
        }
        let same = rows.len() == merged.len() && rows.iter().zip(&merged).all(|(a, b)| (a.t - b.t).abs() <= 1e-12 * b.t);
        if !same {
            bail!("{} lists different scales from {}", path.display(), inputs[0].display());
        }
        merged.iter_mut().zip(&rows).for_each(|(a, b)| a.count += b.count);
    }
    let mut est = fit_counts(&merged)?;
    if let (Some(_), Some(kind)) = (&cfg.function, cfg.set_kind()?) {
        est = est.with_prediction(predicted_dimension(&cfg.function()?, kind)?, cfg.band);
    }
    let mut out = Outputs::new(cfg.output_dir(), force)?;
    out.claim_all(["dimension.json", "dimension.tsv"])?;
    out.write("dimension.json", &serde_json::to_vec_pretty(&est)?)?;
    let mut tsv = String::from("# ln_inv_t\tln_count\tfitted\n");
    for s in merged.iter().filter(|s| s.count > 0) {
        let x = -s.t.ln();
        tsv.push_str(&format!("{x}\t{}\t{}\n", (s.count as f64).ln(), est.intercept + est.slope * x));
    }
    out.write("dimension.tsv", tsv.as_bytes())?;
    out.finish("dimension", cfg, inputs)?;
    println!("slope {:.4} +- {:.4} (r^2 {:.4}, {} scales)", est.slope, est.slope_se, est.r2, est.fitted);
    if let Some(p) = &est.predicted {
        match p.bounds() {
            Some((lo, hi)) => println!("predicted [{lo:.4}, {hi:.4}] from {}", p.formula()),
            None => println!("predicted empty: {}", p.formula()),
        }
    }
    Ok(())
}

/// Returns whether every hard check passed.
pub fn verify(cfg: &ExperimentConfig, suite: &str, force: bool) -> Result<bool> {
    let suite: Suite = suite.parse()?;
    let opts = SuiteOptions {
        nu: Some(cfg.nu),
        f: cfg.function.as_ref().map(|f| f.build(cfg.nu)).transpose()?,
        replicas: cfg.replicas,
        band: cfg.band,
    };
    let name = format!("verify_{suite}.json");
    let mut out = Outputs::new(cfg.output_dir(), force)?;
    out.claim_all([name.as_str()])?;
    let report = run_suite(suite, cfg.seed, &opts)?;
    out.write(&name, &serde_json::to_vec_pretty(&report)?)?;
    out.finish("verify", cfg, &[])?;
    for c in &report.checks {
        let verdict = match (c.pass, c.inconclusive, c.hard) {
            (_, true, _) => "INCONCLUSIVE",
            (true, _, _) => "pass",
            (false, _, true) => "FAIL",
            (false, _, false) => "fail (soft)",
        };
        println!("{verdict:>12}  {}: {:.6e} +- {:.2e}, bounds [{:.6e}, {:.6e}]", c.name, c.estimate, c.se, c.bounds[0], c.bounds[1]);
    }
    println!("suite {suite} seed {}: {}", report.seed, if report.pass { "pass" } else { "FAIL" });
    Ok(report.pass)
}

#[derive(Serialize)]
struct EnergyReport {
    level: usize,
    alpha: f64,
    exact_law: bool,
    measures: Vec<FrostmanMeasure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<FrostmanSummary>,
}

pub fn energy(cfg: &ExperimentConfig, inputs: &[PathBuf], level: Option<usize>, alpha: f64, force: bool) -> Result<()> {
    let f = cfg.function()?;
    let mut out = Outputs::new(cfg.output_dir(), force)?;
    out.claim_all(["energy.json"])?;
    let (level, exact_law, measures) = if inputs.is_empty() {
        let schedule = cfg.schedule()?;
        let level = level.unwrap_or(schedule.depth());
        let sampler = ConcentricSampler::new(cfg.nu, &schedule, level, 1)?;
        let measures = (0..cfg.replicas.unwrap_or(1))
            .map(|r| frostman_measure(&sampler.sample(replica_seed(cfg.seed, r)), &f, alpha, PhiWeight::Endpoint))
            .collect::<steepfield::Result<Vec<_>>>()?;
        (level, true, measures)
    } else {
        let mut measures = Vec::new();
        let mut used = None;
        for path in inputs {
            let replica = load_replica(path)?;
            let n = level.unwrap_or(replica.depth());
            used = Some(n);
            measures.push(frostman_measure(&CellPaths::from_replica(&replica, n)?, &f, alpha, PhiWeight::Endpoint)?);
        }
        (used.expect("at least one input"), false, measures)
    };
    let summary = if measures.len() >= 2 { Some(FrostmanSummary::new(&measures)?) } else { None };
    let report = EnergyReport { level, alpha, exact_law, measures, summary };
    out.write("energy.json", &serde_json::to_vec_pretty(&report)?)?;
    out.finish("energy", cfg, inputs)?;
    match &report.summary {
        Some(s) => println!(
            "level {level}: mass {:.4} +- {:.4}, energy {:.4e} +- {:.2e}, empty fraction {:.3}",
            s.mass.value, s.mass.se, s.energy.value, s.energy.se, s.empty_fraction
        ),
        None => {
            let m = &report.measures[0];
            println!("level {level}: mass {:.4}, energy {:.4e}, {} survivors", m.total_mass, m.energy, m.survivors.len());
        }
    }
    Ok(())
}

pub fn funcs() {
    let rows = [
        ("constant", "gamma", "nu = 2", "c = gamma^2 / (2 pi)"),
        ("inverse_sqrt_g", "c", "nu >= 3", "c = c^2 (nu - 2)"),
        ("oscillating_constant", "gamma, sequence", "nu = 2", "c = gamma^2 / (2 pi)"),
        ("g_thick", "gamma, sequence", "nu >= 3", "limsup gamma^2, liminf 0"),
        ("g_oscil", "gamma, sequence", "nu >= 3", "limsup gamma^2, liminf 0"),
        ("g_eps", "gamma_prime, eps, sequence", "nu >= 3", "limsup gamma'^2 + eps^2 (nu - 2), liminf eps^2 (nu - 2)"),
    ];
    println!("{:<22}{:<30}{:<10}ratio of Sigma_t to -ln t", "builtin", "parameters", "dimension");
    for (name, params, nu, cert) in rows {
        println!("{name:<22}{params:<30}{nu:<10}{cert}");
    }
    println!("\nsequence: {{\"neglog\": [...]}}, {{\"radii\": [...]}} or {{\"factorial_squared\": {{\"len\": n, \"deepest\": l}}}}");
}
