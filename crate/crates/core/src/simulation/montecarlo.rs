use super::{simulate_panel, SimConfig, GAUSSIAN_METHOD, RNG_SCHEME};
use crate::error::{Error, Result};
use crate::outliers::run_pipeline;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Number of groups in the block scheme for standard errors.
pub const BLOCK_GROUPS: usize = 40;

/// What one replication produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    /// Set when the pipeline failed; the other fields are then empty.
    pub error: Option<String>,
    pub adequacy_rejected: bool,
    pub detected: Vec<usize>,
    pub k_hat: Option<usize>,
    /// Per injected date: ‖ζ̂ − ζ‖ when that date was detected.
    pub zeta_error: Vec<Option<f64>>,
    /// Per injected date: ‖ω̂ − ω‖ when that date was detected.
    pub omega_error: Vec<Option<f64>>,
    /// Per injected date: ω̂ when that date was detected.
    pub omega_hat: Vec<Option<Vec<f64>>>,
}

/// Runs the pipeline on every replication, returned in replication order.
pub fn run_replications(cfg: &SimConfig) -> Result<Vec<ReplicationOutcome>> {
    cfg.validate()?;
    let (_, zeta) = cfg.truth()?;
    let omega = cfg.omega();
    let dates = cfg.outlier.dates.clone();
    let outcomes = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let empty = ReplicationOutcome {
                index: r,
                error: None,
                adequacy_rejected: false,
                detected: Vec::new(),
                k_hat: None,
                zeta_error: vec![None; dates.len()],
                omega_error: vec![None; dates.len()],
                omega_hat: vec![None; dates.len()],
            };
            let panel = match simulate_panel(cfg, r as u64) {
                Ok(p) => p,
                Err(e) => return ReplicationOutcome { error: Some(e.to_string()), ..empty },
            };
            match run_pipeline(&panel, &cfg.pipeline) {
                Err(e) => {
                    let rejected = matches!(e, Error::AdequacyRejected { .. });
                    ReplicationOutcome { error: Some(e.to_string()), adequacy_rejected: rejected, ..empty }
                }
                Ok(rep) => {
                    let mut out = ReplicationOutcome {
                        detected: rep.dates(),
                        k_hat: Some(rep.k_hat),
                        adequacy_rejected: rep.adequacy.reject,
                        ..empty
                    };
                    for (i, d) in dates.iter().enumerate() {
                        if let Some(sz) = rep.size_at(*d) {
                            out.zeta_error[i] = Some((&sz.zeta_hat - &zeta).norm());
                            out.omega_error[i] = Some((&sz.omega_hat - &omega).norm());
                            out.omega_hat[i] = Some(sz.omega_hat.iter().copied().collect());
                        }
                    }
                    out
                }
            }
        })
        .collect();
    Ok(outcomes)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStat {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

impl SampleStat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let count = values.len();
        if count == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { count, mean, sd })
    }
}

/// A percentage over all replications with the spread of the same
/// percentage across 40 consecutive groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStat {
    pub pct: f64,
    /// Standard deviation of the group percentages; absent below 40 runs.
    pub block_sd: Option<f64>,
    /// `block_sd / √groups`.
    pub block_se: Option<f64>,
}

impl BlockStat {
    fn of(flags: &[bool]) -> Self {
        let r = flags.len();
        let pct = 100.0 * flags.iter().filter(|f| **f).count() as f64 / r.max(1) as f64;
        if r < BLOCK_GROUPS {
            return Self { pct, block_sd: None, block_se: None };
        }
        let groups: Vec<f64> = (0..BLOCK_GROUPS)
            .map(|g| {
                let (lo, hi) = (g * r / BLOCK_GROUPS, (g + 1) * r / BLOCK_GROUPS);
                let hits = flags[lo..hi].iter().filter(|f| **f).count();
                100.0 * hits as f64 / (hi - lo) as f64
            })
            .collect();
        let sd = SampleStat::of(&groups).map(|s| s.sd);
        Self { pct, block_sd: sd, block_se: sd.map(|s| s / (BLOCK_GROUPS as f64).sqrt()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DateSummary {
    pub date: usize,
    pub detected: BlockStat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub name: String,
    pub replications: usize,
    pub failures: usize,
    pub adequacy_rejections: usize,
    pub seed: u64,
    pub rng: String,
    pub gaussian: String,
    pub dates: Vec<DateSummary>,
    /// Every injected date detected in the same replication.
    pub all_dates_detected: BlockStat,
    /// Any flagged date outside the injected set.
    pub false_detection: BlockStat,
    /// Percentage of replications with each K̂.
    pub k_hat_pct: BTreeMap<usize, f64>,
    pub true_alpha: Vec<f64>,
    pub true_zeta: Vec<f64>,
    pub zeta_error: Option<SampleStat>,
    pub omega_error: Option<SampleStat>,
    /// Mean of ω̂_i − ω_i at detected injected dates, per component.
    pub omega_bias: Vec<f64>,
    /// Standard deviation of ω̂_i, per component.
    pub omega_sd: Vec<f64>,
    pub omega_bias_avg: Option<f64>,
    pub omega_sd_avg: Option<f64>,
}

pub fn summarize(cfg: &SimConfig, outcomes: &[ReplicationOutcome]) -> Result<MonteCarloSummary> {
    let (alpha, zeta) = cfg.truth()?;
    let omega = cfg.omega();
    let dates = &cfg.outlier.dates;
    let n = cfg.n();
    let ok: Vec<&ReplicationOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();

    let date_summaries = dates
        .iter()
        .map(|d| DateSummary {
            date: *d,
            detected: BlockStat::of(&outcomes.iter().map(|o| o.detected.contains(d)).collect::<Vec<_>>()),
        })
        .collect();
    let all = BlockStat::of(
        &outcomes
            .iter()
            .map(|o| o.error.is_none() && dates.iter().all(|d| o.detected.contains(d)))
            .collect::<Vec<_>>(),
    );
    let false_det =
        BlockStat::of(&outcomes.iter().map(|o| o.detected.iter().any(|d| !dates.contains(d))).collect::<Vec<_>>());

    let mut k_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for o in &ok {
        if let Some(k) = o.k_hat {
            *k_counts.entry(k).or_default() += 1;
        }
    }
    let total = outcomes.len().max(1) as f64;
    let k_hat_pct = k_counts.into_iter().map(|(k, c)| (k, 100.0 * c as f64 / total)).collect();

    let zeta_errs: Vec<f64> = ok.iter().flat_map(|o| o.zeta_error.iter().flatten().copied()).collect();
    let omega_errs: Vec<f64> = ok.iter().flat_map(|o| o.omega_error.iter().flatten().copied()).collect();
    let omega_hats: Vec<&Vec<f64>> = ok.iter().flat_map(|o| o.omega_hat.iter().flatten()).collect();
    let (mut omega_bias, mut omega_sd) = (Vec::new(), Vec::new());
    if !omega_hats.is_empty() {
        for i in 0..n {
            let vals: Vec<f64> = omega_hats.iter().map(|w| w[i]).collect();
            let s = SampleStat::of(&vals).expect("nonempty");
            omega_bias.push(s.mean - omega[i]);
            omega_sd.push(s.sd);
        }
    }
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    Ok(MonteCarloSummary {
        name: cfg.name.clone(),
        replications: outcomes.len(),
        failures: outcomes.len() - ok.len(),
        adequacy_rejections: outcomes.iter().filter(|o| o.adequacy_rejected).count(),
        seed: cfg.seed,
        rng: RNG_SCHEME.into(),
        gaussian: GAUSSIAN_METHOD.into(),
        dates: date_summaries,
        all_dates_detected: all,
        false_detection: false_det,
        k_hat_pct,
        true_alpha: alpha.iter().copied().collect(),
        true_zeta: zeta.iter().copied().collect(),
        zeta_error: SampleStat::of(&zeta_errs),
        omega_error: SampleStat::of(&omega_errs),
        omega_bias_avg: avg(&omega_bias),
        omega_sd_avg: avg(&omega_sd),
        omega_bias,
        omega_sd,
    })
}

/// Runs every replication and summarizes. `ODFM_THREADS` caps the worker
/// count; results do not depend on it.
pub fn monte_carlo(cfg: &SimConfig) -> Result<MonteCarloSummary> {
    let threads = std::env::var("ODFM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0);
    monte_carlo_with_threads(cfg, threads)
}

pub fn monte_carlo_with_threads(cfg: &SimConfig, threads: Option<usize>) -> Result<MonteCarloSummary> {
    summarize(cfg, &run_replications_with_threads(cfg, threads)?)
}

/// [`run_replications`] on a dedicated pool of `threads` workers, or on the
/// global pool when `None`. Results do not depend on the worker count.
pub fn run_replications_with_threads(cfg: &SimConfig, threads: Option<usize>) -> Result<Vec<ReplicationOutcome>> {
    match threads {
        None => run_replications(cfg),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| run_replications(cfg)),
    }
}

impl MonteCarloSummary {
    /// Plain-text table in the layout of the detection and size tables.
    pub fn to_table(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let fmt_block = |b: &BlockStat| match b.block_sd {
            Some(sd) => format!("{:6.1}  ({:.4})", b.pct, sd),
            None => format!("{:6.1}", b.pct),
        };
        let _ = writeln!(s, "{} : {} replications, {} failed, seed {}", self.name, self.replications, self.failures, self.seed);
        let _ = writeln!(s, "adequacy rejections: {}", self.adequacy_rejections);
        let _ = writeln!(s, "\ndetection (%)   (block sd)");
        for d in &self.dates {
            let _ = writeln!(s, "  t = {:<5}  {}", d.date, fmt_block(&d.detected));
        }
        if self.dates.len() > 1 {
            let _ = writeln!(s, "  all dates   {}", fmt_block(&self.all_dates_detected));
        }
        let _ = writeln!(s, "  false       {}", fmt_block(&self.false_detection));
        let _ = writeln!(s, "\nK̂ distribution (%)");
        for (k, p) in &self.k_hat_pct {
            let _ = writeln!(s, "  K = {k:<3} {p:6.1}");
        }
        if let (Some(z), Some(w)) = (&self.zeta_error, &self.omega_error) {
            let _ = writeln!(s, "\nsize errors              mean       sd");
            let _ = writeln!(s, "  |zeta_hat - zeta|   {:9.4} {:8.4}", z.mean, z.sd);
            let _ = writeln!(s, "  |omega_hat - omega| {:9.4} {:8.4}", w.mean, w.sd);
        }
        if let (Some(b), Some(sd)) = (self.omega_bias_avg, self.omega_sd_avg) {
            let _ = writeln!(s, "  omega bias (avg over components) {b:.4}, sd {sd:.4}");
        }
        s
    }
}
