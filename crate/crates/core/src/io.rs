//! CSV formats for paths, statistics, fits and experiment reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! value read back parses to the identical `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lab::{ContinuityRow, ExperimentReport, LimitsTable};
use crate::mle::MleFit;
use crate::simulate::Path;
use crate::suffstats::SuffStats;

pub const PATH_HEADER: &str = "subject,k,t,x";
pub const STATS_HEADER: &str = "subject,u,v";
pub const FIT_HEADER: &str =
    "n,mu_hat,omega2_hat,loglik,score_norm,boundary,se_mu,se_omega2,iterations";
pub const REPLICATE_HEADER: &str = "rep,n,mu_hat,omega2_hat,z_mu,z_omega2,boundary";
pub const SUMMARY_HEADER: &str = "n,med_err,p90_err,ks_mu,ks_omega2,cov_mu,cov_omega2";
pub const LIMITS_HEADER: &str = "n,info_mm,info_mo,info_oo,kl,gap_info_mm,gap_info_mo,\
gap_info_oo,gap_kl,se_gap_info_mm,se_gap_info_mo,se_gap_info_oo,se_gap_kl";
pub const CONTINUITY_HEADER: &str = "m,k,x,t,estimate,mc_se,gap,gap_se";

pub fn write_paths<W: Write>(mut w: W, paths: &[Path]) -> Result<()> {
    writeln!(w, "{PATH_HEADER}")?;
    for p in paths {
        for (k, (t, x)) in p.times().iter().zip(p.values()).enumerate() {
            writeln!(w, "{},{k},{t},{x}", p.subject_index)?;
        }
    }
    Ok(())
}

pub fn write_stats<W: Write>(mut w: W, stats: &[SuffStats]) -> Result<()> {
    writeln!(w, "{STATS_HEADER}")?;
    for s in stats {
        writeln!(w, "{},{},{}", s.subject_index, s.u, s.v)?;
    }
    Ok(())
}

pub fn fit_row(fit: &MleFit) -> String {
    let (se_mu, se_w) = match fit.wald_se {
        Some([a, b]) => (a.to_string(), b.to_string()),
        None => ("NA".to_string(), "NA".to_string()),
    };
    format!(
        "{},{},{},{},{},{},{se_mu},{se_w},{}",
        fit.n,
        fit.theta_hat.mu,
        fit.theta_hat.omega2,
        fit.loglik,
        fit.score_norm,
        fit.boundary,
        fit.iterations
    )
}

pub fn write_fit<W: Write>(mut w: W, fit: &MleFit) -> Result<()> {
    writeln!(w, "{FIT_HEADER}")?;
    writeln!(w, "{}", fit_row(fit))?;
    Ok(())
}

pub fn write_replicates<W: Write>(mut w: W, report: &ExperimentReport) -> Result<()> {
    writeln!(w, "{REPLICATE_HEADER}")?;
    for r in &report.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.rep, r.n, r.theta_hat.mu, r.theta_hat.omega2, r.z[0], r.z[1], r.boundary
        )?;
    }
    Ok(())
}

/// KS columns hold the statistic `D`.
pub fn write_summary<W: Write>(mut w: W, report: &ExperimentReport) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in &report.summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.n,
            s.med_err,
            s.p90_err,
            s.ks_mu.statistic,
            s.ks_omega2.statistic,
            s.cov_mu,
            s.cov_omega2
        )?;
    }
    Ok(())
}

/// Info columns: `mm = (mu, mu)`, `mo = (mu, omega2)`, `oo = (omega2, omega2)`.
pub fn write_limits<W: Write>(mut w: W, table: &LimitsTable) -> Result<()> {
    writeln!(w, "{LIMITS_HEADER}")?;
    let entries = [(0, 0), (0, 1), (1, 1)];
    for r in &table.rows {
        let mut fields = vec![r.n.to_string()];
        fields.extend(entries.iter().map(|&e| r.avg_info[e].to_string()));
        fields.push(r.avg_kl.to_string());
        fields.extend(entries.iter().map(|&e| r.info_gap[e].to_string()));
        fields.push(r.kl_gap.to_string());
        fields.extend(entries.iter().map(|&e| r.info_gap_se[e].to_string()));
        fields.push(r.kl_gap_se.to_string());
        writeln!(w, "{}", fields.join(","))?;
    }
    let lim = &table.limit_info;
    let mut fields = vec!["inf".to_string()];
    fields.extend(entries.iter().map(|&e| lim.matrix[e].to_string()));
    fields.push(table.limit_kl.value.to_string());
    fields.extend(std::iter::repeat_n("0".to_string(), 4));
    fields.extend(entries.iter().map(|&e| lim.mc_se[e].to_string()));
    fields.push(table.limit_kl.mc_se.to_string());
    writeln!(w, "{}", fields.join(","))?;
    Ok(())
}

/// The limit point is written with `m = inf`.
pub fn write_continuity<W: Write>(mut w: W, rows: &[ContinuityRow]) -> Result<()> {
    writeln!(w, "{CONTINUITY_HEADER}")?;
    for r in rows {
        let m = r.m.map_or_else(|| "inf".to_string(), |m| m.to_string());
        writeln!(
            w,
            "{m},{},{},{},{},{},{},{}",
            r.k, r.x0, r.t_end, r.estimate, r.mc_se, r.gap, r.gap_se
        )?;
    }
    Ok(())
}

/// Reads per-subject paths from `subject,k,t,x` rows.
///
/// Rows of a subject must be contiguous with `k = 0, 1, 2, ...`, times must
/// start at 0 and increase strictly. Errors carry the 1-based file line.
pub fn read_paths<R: Read>(reader: R) -> Result<Vec<Path>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| ingest(1, e.to_string()))?.clone();
    let expected: Vec<&str> = PATH_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(ingest(
            1,
            format!(
                "expected header `{PATH_HEADER}`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    struct Pending {
        subject: usize,
        times: Vec<f64>,
        values: Vec<f64>,
        first_line: usize,
    }
    let mut done: Vec<Path> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut current: Option<Pending> = None;
    let finish = |p: Pending, done: &mut Vec<Path>| -> Result<()> {
        let path = Path::from_observations(p.times, p.values, p.subject)
            .map_err(|e| ingest(p.first_line, format!("subject {}: {e}", p.subject)))?;
        done.push(path);
        Ok(())
    };

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ingest(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 4 {
            return Err(ingest(
                line,
                format!("expected 4 fields, found {}", record.len()),
            ));
        }
        let subject: usize = parse_field(&record[0], "subject", line)?;
        let k: usize = parse_field(&record[1], "k", line)?;
        let t: f64 = parse_field(&record[2], "t", line)?;
        let x: f64 = parse_field(&record[3], "x", line)?;
        if !t.is_finite() || !x.is_finite() {
            return Err(ingest(
                line,
                format!("subject {subject}, row {k}: non-finite value"),
            ));
        }

        if current.as_ref().is_some_and(|c| c.subject != subject) {
            let p = current.take().expect("checked");
            finish(p, &mut done)?;
        }
        let cur = match current.as_mut() {
            Some(c) => c,
            None => {
                if !seen.insert(subject) {
                    return Err(ingest(
                        line,
                        format!("subject {subject}: rows are not contiguous"),
                    ));
                }
                current.insert(Pending {
                    subject,
                    times: Vec::new(),
                    values: Vec::new(),
                    first_line: line,
                })
            }
        };
        if k != cur.times.len() {
            return Err(ingest(
                line,
                format!(
                    "subject {subject}, row {k}: expected k = {}",
                    cur.times.len()
                ),
            ));
        }
        if k == 0 && t != 0.0 {
            return Err(ingest(
                line,
                format!("subject {subject}, row {k}: time grid must start at 0, found {t}"),
            ));
        }
        if let Some(&prev) = cur.times.last() {
            if !(t > prev) {
                return Err(ingest(
                    line,
                    format!(
                        "subject {subject}, row {k}: time {t} does not increase (previous {prev})"
                    ),
                ));
            }
        }
        cur.times.push(t);
        cur.values.push(x);
    }
    if let Some(p) = current.take() {
        finish(p, &mut done)?;
    }
    if done.is_empty() {
        return Err(ingest(1, "no path rows".into()));
    }
    Ok(done)
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| ingest(line, format!("cannot parse {name} from `{s}`")))
}

fn ingest(line: usize, message: String) -> Error {
    Error::Ingest { line, message }
}
