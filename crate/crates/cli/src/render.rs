//! Text tables and CSV renderings of the command results.

use anyhow::Result;
use odfm::adequacy::AdequacyResult;
use odfm::factors::FactorModel;
use odfm::outliers::OutlierReport;
use odfm::simulation::ReplicationOutcome;
use std::fmt::Write;

pub fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn adequacy_table(res: &AdequacyResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "adequacy test: N = {}, T = {}, level {}, {:?} calibration", res.n, res.t, res.alpha, res.calibration);
    let _ = writeln!(s, "{:>4}  {:>10}  {:>4}  {:>9}  {:>10}  {:>5}  {:>9}  {:>9}  decision", "band", "indices", "J", "U", "-m log U", "df", "critical", "p-value");
    for (i, b) in res.bands.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>4}  {:>10}  {:>4}  {:>9.6}  {:>10.4}  {:>5}  {:>9.3}  {:>9.4}  {}",
            i + 1,
            format!("{}..={}", b.band.0 + 1, b.band.1),
            b.j,
            b.u,
            b.statistic,
            b.df,
            b.critical_value,
            b.p_value,
            if b.reject { "reject" } else { "accept" }
        );
    }
    let _ = writeln!(s, "overall: {}", if res.reject { "REJECT" } else { "not rejected" });
    s
}

pub fn adequacy_csv(res: &AdequacyResult) -> Result<String> {
    let header = strings(&["band", "first_index", "last_index", "j", "u", "m", "statistic", "df", "critical_value", "p_value", "reject"]);
    let rows: Vec<Vec<String>> = res
        .bands
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                (i + 1).to_string(),
                (b.band.0 + 1).to_string(),
                b.band.1.to_string(),
                b.j.to_string(),
                b.u.to_string(),
                b.m.to_string(),
                b.statistic.to_string(),
                b.df.to_string(),
                b.critical_value.to_string(),
                b.p_value.to_string(),
                b.reject.to_string(),
            ]
        })
        .collect();
    csv_string(&header, &rows)
}

pub fn model_table(model: &FactorModel<f64>, residual_rms: f64, labels: &[String]) -> String {
    let d = model.diagnostics();
    let mut s = String::new();
    let _ = write!(s, "{}: K = {}, converged = {}", model.method(), model.k(), d.converged);
    if let Some(it) = d.iterations {
        let _ = write!(s, ", iterations = {it}");
    }
    if let Some(ll) = d.log_likelihood {
        let _ = write!(s, ", log-likelihood = {ll:.6}");
    }
    if let Some(obj) = d.objective {
        let _ = write!(s, ", objective = {obj:.3e}");
    }
    let _ = writeln!(s, ", residual rms = {residual_rms:.6}");
    if !d.heywood.is_empty() {
        let _ = writeln!(s, "  Heywood components: {:?}", d.heywood);
    }
    let _ = write!(s, "  {:<12}", "component");
    for k in 0..model.k() {
        let _ = write!(s, " {:>9}", format!("A[,{}]", k + 1));
    }
    let _ = writeln!(s, " {:>10}", "sigma2");
    for i in 0..model.n() {
        let _ = write!(s, "  {:<12}", labels.get(i).map(String::as_str).unwrap_or(""));
        for k in 0..model.k() {
            let _ = write!(s, " {:>9.4}", model.a()[(i, k)]);
        }
        let _ = writeln!(s, " {:>10.5}", model.sigma_eta()[i]);
    }
    s
}

pub fn loadings_csv(models: &[&FactorModel<f64>], labels: &[String]) -> Result<String> {
    let k_max = models.iter().map(|m| m.k()).max().unwrap_or(0);
    let mut header = strings(&["method", "component"]);
    header.extend((1..=k_max).map(|k| format!("a{k}")));
    header.push("sigma2".into());
    let mut rows = Vec::new();
    for m in models {
        for (i, label) in labels.iter().enumerate().take(m.n()) {
            let mut row = vec![m.method().to_string(), label.clone()];
            row.extend((0..k_max).map(|k| if k < m.k() { m.a()[(i, k)].to_string() } else { String::new() }));
            row.push(m.sigma_eta()[i].to_string());
            rows.push(row);
        }
    }
    csv_string(&header, &rows)
}

pub fn report_table(rep: &OutlierReport<f64>, labels: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "outlier detection: K = {}, {} round(s), threshold {:.4}, estimator {}",
        rep.k_hat,
        rep.rounds,
        rep.k_alpha,
        rep.model.method()
    );
    if rep.detections.is_empty() {
        let _ = writeln!(s, "no outliers detected");
        return s;
    }
    let _ = writeln!(s, "{:>6}  {:>8}  {:>9}  {:>5}", "date", "score", "direction", "round");
    for d in &rep.detections {
        let _ = writeln!(s, "{:>6}  {:>8.3}  {:>9}  {:>5}", d.date, d.score, d.direction + 1, d.round);
    }
    for z in &rep.sizes {
        let _ = writeln!(s, "\nsize at t = {}", z.date);
        let _ = writeln!(s, "  {:<12} {:>10} {:>10}", "component", "omega_hat", "zeta_hat");
        for ((label, w), zeta) in labels.iter().zip(z.omega_hat.iter()).zip(z.zeta_hat.iter()) {
            let _ = writeln!(s, "  {label:<12} {w:>10.4} {zeta:>10.4}");
        }
        let alpha: Vec<String> = z.alpha_hat.iter().map(|a| format!("{a:.4}")).collect();
        let _ = writeln!(s, "  alpha_hat = ({}), AR orders {:?}", alpha.join(", "), z.ar_orders);
    }
    s
}

pub fn detections_csv(rep: &OutlierReport<f64>, labels: &[String]) -> Result<String> {
    let mut header = strings(&["date", "score", "direction", "round"]);
    header.extend(labels.iter().map(|l| format!("omega_hat_{l}")));
    let rows: Vec<Vec<String>> = rep
        .detections
        .iter()
        .map(|d| {
            let mut row = vec![d.date.to_string(), d.score.to_string(), (d.direction + 1).to_string(), d.round.to_string()];
            if let Some(z) = rep.size_at(d.date) {
                row.extend(z.omega_hat.iter().map(|w| w.to_string()));
            } else {
                row.extend(labels.iter().map(|_| String::new()));
            }
            row
        })
        .collect();
    csv_string(&header, &rows)
}

/// Long format: one row per round, direction and date, with the
/// mean ± k·sd threshold lines alongside.
pub fn projections_csv(rep: &OutlierReport<f64>) -> Result<String> {
    let header = strings(&["round", "direction", "t", "value", "score", "mean", "lower", "upper"]);
    let mut rows = Vec::new();
    for (r, proj) in rep.projections.iter().enumerate() {
        for p in 0..proj.series.nrows() {
            let (mean, sd) = (proj.means[p], proj.sds[p]);
            for t in 1..=proj.series.ncols() {
                rows.push(vec![
                    (r + 1).to_string(),
                    (p + 1).to_string(),
                    t.to_string(),
                    proj.series[(p, t - 1)].to_string(),
                    proj.score(p, t).to_string(),
                    mean.to_string(),
                    (mean - rep.k_alpha * sd).to_string(),
                    (mean + rep.k_alpha * sd).to_string(),
                ]);
            }
        }
    }
    csv_string(&header, &rows)
}

/// Eigenvalues of Γ̂(0) before and after adjustment with cumulative shares.
pub fn eigenvalues_csv(rep: &OutlierReport<f64>) -> Result<String> {
    let header = strings(&["index", "observed", "observed_cumulative_share", "adjusted", "adjusted_cumulative_share"]);
    let cumulative = |v: &[f64]| -> Vec<f64> {
        let total: f64 = v.iter().sum();
        v.iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc / total)
            })
            .collect()
    };
    let (obs, adj) = (rep.eigenvalues_observed.as_slice(), rep.eigenvalues_adjusted.as_slice());
    let (co, ca) = (cumulative(obs), cumulative(adj));
    let rows: Vec<Vec<String>> = (0..obs.len())
        .map(|i| vec![(i + 1).to_string(), obs[i].to_string(), co[i].to_string(), adj[i].to_string(), ca[i].to_string()])
        .collect();
    csv_string(&header, &rows)
}

pub fn replications_csv(outcomes: &[ReplicationOutcome], dates: &[usize]) -> Result<String> {
    let mut header = strings(&["replication", "error", "adequacy_rejected", "k_hat", "detected"]);
    for d in dates {
        header.push(format!("zeta_error_t{d}"));
        header.push(format!("omega_error_t{d}"));
    }
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            let detected: Vec<String> = o.detected.iter().map(|d| d.to_string()).collect();
            let mut row = vec![
                (o.index + 1).to_string(),
                o.error.clone().unwrap_or_default(),
                o.adequacy_rejected.to_string(),
                o.k_hat.map(|k| k.to_string()).unwrap_or_default(),
                detected.join(" "),
            ];
            for i in 0..dates.len() {
                row.push(opt(o.zeta_error[i]));
                row.push(opt(o.omega_error[i]));
            }
            row
        })
        .collect();
    csv_string(&header, &rows)
}
