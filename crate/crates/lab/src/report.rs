//! Verification reports and their serializations.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentTag};
use crate::error::{LabError, Result};

pub const REPORT_SCHEMA: &str = "atlas-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The run could not support the claim, e.g. the truncation monitor tripped.
    Invalid,
    /// Diagnostic value that carries no verdict of its own.
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Invalid => "invalid",
            Verdict::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    /// Stable identifier, `<experiment>/<check>`.
    pub claim: String,
    /// The limit statement being checked, in words.
    pub statement: String,
    /// `NaN` when the run was invalidated; serialized as `null`.
    #[serde(deserialize_with = "nan_from_null")]
    pub statistic: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    pub replicas: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub experiment: ExperimentTag,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub records: Vec<VerificationRecord>,
    /// Unix seconds; not part of the config hash and omitted when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

impl VerificationReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            experiment: config.experiment,
            config_hash: config.hash(),
            config: config.clone(),
            records: Vec::new(),
            generated_at: None,
        }
    }

    pub fn push(&mut self, record: VerificationRecord) {
        self.records.push(record);
    }

    pub fn passed(&self) -> bool {
        let mut judged = self.records.iter().filter(|r| r.verdict != Verdict::Info).peekable();
        judged.peek().is_some() && judged.all(|r| r.verdict == Verdict::Pass)
    }

    pub fn find(&self, claim: &str) -> Option<&VerificationRecord> {
        self.records.iter().find(|r| r.claim == claim)
    }

    pub fn stamped_now(mut self) -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.generated_at = Some(secs);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(LabError::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// `a..=b` for a contiguous run, otherwise a space-separated list.
pub fn seed_set(seeds: &[u64]) -> String {
    match seeds {
        [] => String::new(),
        [one] => one.to_string(),
        [first, .., last] if seeds.windows(2).all(|w| w[1] == w[0].wrapping_add(1)) => format!("{first}..={last}"),
        _ => seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(report: &VerificationReport, mut out: W) -> Result<()> {
    let io = |e| LabError::io("<report>", e);
    writeln!(out, "# schema={}", report.schema).map_err(io)?;
    writeln!(out, "# experiment={}", report.experiment).map_err(io)?;
    writeln!(out, "# config_hash={}", report.config_hash).map_err(io)?;
    if let Some(t) = report.generated_at {
        writeln!(out, "# generated_at={t}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "claim",
        "statement",
        "statistic",
        "target",
        "tolerance",
        "verdict",
        "replicas",
        "seeds",
        "detail",
    ])?;
    for r in &report.records {
        w.write_record([
            r.claim.clone(),
            r.statement.clone(),
            r.statistic.to_string(),
            opt(r.target),
            opt(r.tolerance),
            r.verdict.as_str().to_string(),
            r.replicas.to_string(),
            seed_set(&r.seeds),
            r.detail.clone(),
        ])?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn write_json<W: Write>(report: &VerificationReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out).map_err(|e| LabError::io("<report>", e))?;
    Ok(())
}

pub fn read_json<R: std::io::Read>(input: R) -> Result<VerificationReport> {
    let report: VerificationReport = serde_json::from_reader(input)?;
    if report.schema != REPORT_SCHEMA {
        return Err(LabError::format(
            "report",
            format!("unsupported schema {}", report.schema),
        ));
    }
    Ok(report)
}

fn fmt_num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e5) {
        format!("{x:.3e}")
    } else {
        format!("{x:.4}")
    }
}

pub fn to_markdown(report: &VerificationReport) -> String {
    let cfg = &report.config;
    let mut s = String::new();
    let _ = writeln!(s, "# {} verification\n", report.experiment);
    let _ = writeln!(s, "- config hash: `{}`", report.config_hash);
    let _ = writeln!(
        s,
        "- lambda = {}, n = {}, dt = {}, b = {}, replicas = {}",
        cfg.lambda, cfg.n, cfg.dt, cfg.b, cfg.replicas
    );
    let _ = writeln!(s, "- seeds: {}", seed_set(&cfg.seeds()));
    if let Some(t) = report.generated_at {
        let _ = writeln!(s, "- generated at: {t}");
    }
    let _ = writeln!(s, "\n| claim | statistic | target | tolerance | verdict | detail |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for r in &report.records {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.claim,
            fmt_num(r.statistic),
            r.target.map(fmt_num).unwrap_or_default(),
            r.tolerance.map(fmt_num).unwrap_or_default(),
            r.verdict.as_str(),
            r.detail.replace('|', "/"),
        );
    }
    s
}

pub fn write(report: &VerificationReport, format: ReportFormat, out: impl Write) -> Result<()> {
    match format {
        ReportFormat::Csv => write_csv(report, out),
        ReportFormat::Json => write_json(report, out),
        ReportFormat::Markdown => {
            let mut out = out;
            out.write_all(to_markdown(report).as_bytes())
                .map_err(|e| LabError::io("<report>", e))
        }
    }
}

/// Write `<dir>/<experiment>-<hash prefix>.<ext>` and return its path.
pub fn emit_report(report: &VerificationReport, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let path = dir.join(format!(
        "{}-{}.{}",
        report.experiment,
        &report.config_hash[..12],
        format.extension()
    ));
    let file = std::fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
    write(report, format, std::io::BufWriter::new(file))?;
    Ok(path)
}
