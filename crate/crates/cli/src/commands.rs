use crate::config::{read_structured, Format, RunConfig};
use crate::render;
use anyhow::{bail, Context, Result};
use odfm::adequacy::adequacy_test_with;
use odfm::datamodel::{apply_transform, center, load_csv, parse_transform_list, write_csv, MultiSeries};
use odfm::factors::{estimate_model, select_k, FactorModel, Method};
use odfm::moments::{lag_cov, sym_eigen};
use odfm::outliers::run_pipeline;
use odfm::simulation::{run_replications_with_threads, summarize, SimConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_REJECTED: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

/// Writes files into the output directory and remembers their names for
/// the manifest.
pub struct Outputs {
    dir: PathBuf,
    pub written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }
}

/// The same result in the three stdout formats.
struct Rendered {
    json: String,
    table: String,
    csv: String,
}

impl Rendered {
    fn print(&self, format: Format) {
        let s = match format {
            Format::Json => &self.json,
            Format::Table => &self.table,
            Format::Csv => &self.csv,
        };
        print!("{s}");
        if !s.ends_with('\n') {
            println!();
        }
    }
}

fn load_input(cfg: &RunConfig) -> Result<MultiSeries<f64>> {
    let Some(path) = &cfg.input else {
        bail!("no input given; pass --input FILE");
    };
    let series = load_csv::<f64>(path, &cfg.csv).with_context(|| format!("loading {}", path.display()))?;
    match &cfg.transform_spec {
        None => Ok(series),
        Some(spec) => {
            let kinds = parse_transform_list(spec, series.n())?;
            Ok(apply_transform(&series, &kinds)?)
        }
    }
}

pub fn adequacy(cfg: &RunConfig, out: &mut Outputs) -> Result<u8> {
    let series = load_input(cfg)?;
    let res = adequacy_test_with(&series, &cfg.pipeline.adequacy)?;
    let shown = Rendered {
        json: serde_json::to_string_pretty(&res)?,
        table: render::adequacy_table(&res),
        csv: render::adequacy_csv(&res)?,
    };
    out.json("adequacy.json", &res)?;
    out.text("adequacy.txt", &shown.table)?;
    out.text("adequacy.csv", &shown.csv)?;
    shown.print(cfg.format);
    Ok(if res.reject { EXIT_REJECTED } else { EXIT_OK })
}

#[derive(Serialize)]
struct ModelOutput<'a> {
    model: &'a FactorModel<f64>,
    residual_rms: f64,
}

#[derive(Serialize)]
struct Agreement {
    first: Method,
    second: Method,
    /// ‖ÂÂ′ − B̂B̂′‖_F / ‖ÂÂ′‖_F.
    relative_difference: f64,
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    k: usize,
    k_selected: bool,
    eigenvalues: Vec<f64>,
    models: Vec<ModelOutput<'a>>,
    agreement: Vec<Agreement>,
}

pub fn estimate(cfg: &RunConfig, out: &mut Outputs) -> Result<u8> {
    let series = load_input(cfg)?;
    let p = &cfg.pipeline;
    let eig = sym_eigen(lag_cov(&series, 0)?.gamma(0))?;
    let k = match p.k_override {
        Some(0) => bail!("the factor count must be positive"),
        Some(k) => k,
        None => select_k(eig.eigenvalues.as_slice(), p.select_alpha, p.correct_floor)?,
    };
    let methods = if cfg.all_estimators { vec![Method::Svd, Method::JointDiag, Method::Ml] } else { vec![p.estimator] };
    let (centered, _) = center(&series);
    let mut models = Vec::new();
    for m in methods {
        let model = estimate_model(&series, k, m, &p.jointdiag, &p.ml).with_context(|| format!("{m} estimator"))?;
        let resid = centered.values() - model.a() * model.scores();
        let rms = resid.norm() / ((resid.nrows() * resid.ncols()) as f64).sqrt();
        models.push((model, rms));
    }
    let mut agreement = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let (a, b) = (&models[i].0, &models[j].0);
            let aa = a.a() * a.a().transpose();
            let bb = b.a() * b.a().transpose();
            agreement.push(Agreement { first: a.method(), second: b.method(), relative_difference: (&aa - bb).norm() / aa.norm() });
        }
    }
    let report = EstimateOutput {
        k,
        k_selected: p.k_override.is_none(),
        eigenvalues: eig.eigenvalues.iter().copied().collect(),
        models: models.iter().map(|(model, rms)| ModelOutput { model, residual_rms: *rms }).collect(),
        agreement,
    };

    let labels = series.labels();
    let mut table = format!("K = {k}{}\n", if report.k_selected { " (selected)" } else { "" });
    for (model, rms) in &models {
        table.push('\n');
        table.push_str(&render::model_table(model, *rms, labels));
    }
    if !report.agreement.is_empty() {
        table.push_str("\nrelative difference of AA' between estimators\n");
        for a in &report.agreement {
            table.push_str(&format!("  {:<10} {:<10} {:.4}\n", a.first.to_string(), a.second.to_string(), a.relative_difference));
        }
    }
    let refs: Vec<&FactorModel<f64>> = models.iter().map(|(m, _)| m).collect();
    let shown = Rendered { json: serde_json::to_string_pretty(&report)?, table, csv: render::loadings_csv(&refs, labels)? };
    out.json("estimate.json", &report)?;
    for m in &report.models {
        out.json(&format!("model_{}.json", m.model.method()), m)?;
    }
    out.text("estimate.txt", &shown.table)?;
    out.text("loadings.csv", &shown.csv)?;
    shown.print(cfg.format);

    let stalled: Vec<String> = models.iter().filter(|(m, _)| !m.diagnostics().converged).map(|(m, _)| m.method().to_string()).collect();
    if stalled.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: estimator(s) {} did not converge; models were written and flagged", stalled.join(", "));
        Ok(EXIT_NOT_CONVERGED)
    }
}

pub fn detect(cfg: &RunConfig, out: &mut Outputs) -> Result<u8> {
    let series = load_input(cfg)?;
    let rep = match run_pipeline(&series, &cfg.pipeline) {
        Ok(rep) => rep,
        Err(odfm::Error::AdequacyRejected { bands, result }) => {
            out.json("adequacy.json", &result)?;
            out.text("adequacy.txt", &render::adequacy_table(&result))?;
            let shown: Vec<usize> = bands.iter().map(|b| b + 1).collect();
            eprintln!("adequacy test rejected the factor model in band(s) {shown:?}; rerun with --force to continue");
            return Ok(EXIT_REJECTED);
        }
        Err(e) => return Err(e.into()),
    };
    let labels = series.labels();
    let shown = Rendered {
        json: serde_json::to_string_pretty(&rep)?,
        table: render::report_table(&rep, labels),
        csv: render::detections_csv(&rep, labels)?,
    };
    out.json("report.json", &rep)?;
    out.text("report.txt", &shown.table)?;
    out.text("detections.csv", &shown.csv)?;
    out.text("projections.csv", &render::projections_csv(&rep)?)?;
    out.text("eigenvalues.csv", &render::eigenvalues_csv(&rep)?)?;
    write_csv(&rep.adjusted, out.path("adjusted.csv"), &cfg.csv)?;
    out.written.push("adjusted.csv".into());
    shown.print(cfg.format);
    Ok(EXIT_OK)
}

/// Resolves the simulation design: an explicit file, then a preset, then
/// whatever the run configuration already holds.
pub fn resolve_simulation(cfg: &mut RunConfig, sim_file: Option<&Path>, preset: Option<&str>) -> Result<()> {
    let sim = if let Some(path) = sim_file {
        read_structured::<SimConfig>(path)?
    } else if let Some(name) = preset {
        SimConfig::preset(name)?
    } else if let Some(sim) = cfg.simulation.take() {
        sim
    } else if let Some(name) = &cfg.preset {
        SimConfig::preset(name)?
    } else {
        bail!("simulate needs --preset NAME or --sim-config FILE");
    };
    if let Some(name) = preset {
        cfg.preset = Some(name.to_string());
    }
    cfg.simulation = Some(sim);
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<u8> {
    let sim = cfg.simulation.as_ref().context("no simulation design resolved")?;
    sim.validate()?;
    let threads = cfg.threads.or_else(|| std::env::var("ODFM_THREADS").ok().and_then(|v| v.parse().ok())).filter(|t| *t > 0);
    let outcomes = run_replications_with_threads(sim, threads)?;
    let summary = summarize(sim, &outcomes)?;
    let per_rep = render::replications_csv(&outcomes, &sim.outlier.dates)?;
    let shown = Rendered { json: serde_json::to_string_pretty(&summary)?, table: summary.to_table(), csv: per_rep.clone() };
    out.json("summary.json", &summary)?;
    out.text("summary.txt", &shown.table)?;
    if cfg.per_replication {
        out.text("replications.csv", &per_rep)?;
    }
    shown.print(cfg.format);
    Ok(EXIT_OK)
}
