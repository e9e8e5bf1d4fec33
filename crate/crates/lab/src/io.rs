//! File formats.
//!
//! | file | layout |
//! |------|--------|
//! | initial configuration, CSV | header `name,position`, one row per particle, names `0..n` in any order |
//! | initial configuration, JSON | `{"schema": "atlas-initial/1", "particles": [{"name": 0, "position": 0.0}, ...]}` |
//! | trajectory, CSV | `#` metadata lines, then `t,requested_t,step,Y1[,Y<k>...]` with 1-based ranks |
//! | profile, CSV | `#` metadata lines (`kind`, `b`, `t`, `seed`, `n`, `bin_width`), then `x,value` |
//! | state dump, binary | see [`write_state_dump`] |
//!
//! Metadata lines have the form `# key=value`. Every format carries a
//! schema string with a version suffix.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use atlas_core::dynamics::Snapshot;
use atlas_core::measure::{DensityProfile, EmpiricalMeasure};
use atlas_core::model::ParticleSystemState;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const INITIAL_SCHEMA: &str = "atlas-initial/1";
pub const TRAJECTORY_SCHEMA: &str = "atlas-trajectory/1";
pub const PROFILE_SCHEMA: &str = "atlas-profile/1";
pub const DUMP_MAGIC: [u8; 4] = *b"ATLS";
pub const DUMP_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| LabError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| LabError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub name: usize,
    pub position: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InitialDocument {
    schema: String,
    particles: Vec<ParticleRecord>,
}

fn records_of(state: &ParticleSystemState) -> Vec<ParticleRecord> {
    state
        .positions()
        .iter()
        .enumerate()
        .map(|(name, &position)| ParticleRecord { name, position })
        .collect()
}

fn state_of(records: Vec<ParticleRecord>) -> Result<ParticleSystemState> {
    let n = records.len();
    let mut positions = vec![f64::NAN; n];
    for r in records {
        if r.name >= n || !positions[r.name].is_nan() {
            return Err(LabError::format(
                "initial configuration",
                format!("names must be 0..{n}, each once; got {}", r.name),
            ));
        }
        if !r.position.is_finite() {
            return Err(LabError::format(
                "initial configuration",
                format!("particle {} is not finite", r.name),
            ));
        }
        positions[r.name] = r.position;
    }
    Ok(ParticleSystemState::from_positions(positions)?)
}

pub fn write_initial_csv<W: Write>(state: &ParticleSystemState, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records_of(state) {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| LabError::io("<csv>", e))?;
    Ok(())
}

pub fn read_initial_csv<R: Read>(input: R) -> Result<ParticleSystemState> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let records = r
        .deserialize()
        .collect::<std::result::Result<Vec<ParticleRecord>, _>>()?;
    state_of(records)
}

pub fn write_initial_json<W: Write>(state: &ParticleSystemState, out: W) -> Result<()> {
    let doc = InitialDocument {
        schema: INITIAL_SCHEMA.into(),
        particles: records_of(state),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

pub fn read_initial_json<R: Read>(input: R) -> Result<ParticleSystemState> {
    let doc: InitialDocument = serde_json::from_reader(input)?;
    if doc.schema != INITIAL_SCHEMA {
        return Err(LabError::format(
            "initial configuration",
            format!("unsupported schema {}", doc.schema),
        ));
    }
    state_of(doc.particles)
}

/// Reads `.json` files as JSON and anything else as CSV.
pub fn load_initial(path: &Path) -> Result<ParticleSystemState> {
    let f = open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_initial_json(f),
        _ => read_initial_csv(f),
    }
}

pub fn save_initial(state: &ParticleSystemState, path: &Path) -> Result<()> {
    let f = create(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => write_initial_json(state, f),
        _ => write_initial_csv(state, f),
    }
}

/// Ordered `# key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| LabError::format("metadata", format!("missing or invalid `{key}`")))
    }

    fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    /// Split leading metadata lines from the CSV body.
    fn read_from<R: BufRead>(input: R) -> Result<(Self, String)> {
        let mut meta = Metadata::default();
        let mut body = String::new();
        for line in input.lines() {
            let line = line.map_err(|e| LabError::io("<csv>", e))?;
            match line.strip_prefix('#') {
                Some(rest) if body.is_empty() => {
                    let (k, v) = rest
                        .trim()
                        .split_once('=')
                        .ok_or_else(|| LabError::format("metadata", line.clone()))?;
                    meta.0.push((k.trim().to_string(), v.trim().to_string()));
                }
                _ => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        Ok((meta, body))
    }
}

/// Trajectory table with one row per snapshot.
pub fn write_trajectory_csv<W: Write>(
    snapshots: &[Snapshot],
    ranks: &[usize],
    meta: &Metadata,
    mut out: W,
) -> Result<()> {
    let io = |e| LabError::io("<trajectory>", e);
    let meta = Metadata(vec![("schema".into(), TRAJECTORY_SCHEMA.into())])
        .0
        .into_iter()
        .chain(meta.0.clone());
    Metadata(meta.collect()).write_to(&mut out).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "requested_t".into(), "step".into(), "Y1".into()];
    header.extend(ranks.iter().map(|r| format!("Y{}", r + 1)));
    w.write_record(&header)?;
    for s in snapshots {
        let mut row = vec![
            s.time.to_string(),
            s.requested_time.to_string(),
            s.step.to_string(),
            s.leftmost.to_string(),
        ];
        row.extend(s.ranked.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Columns of a trajectory table keyed by header, with the metadata.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<(Metadata, BTreeMap<String, Vec<f64>>)> {
    let (meta, body) = Metadata::read_from(BufReader::new(input))?;
    if meta.get("schema") != Some(TRAJECTORY_SCHEMA) {
        return Err(LabError::format("trajectory", "missing schema line"));
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec?;
        for (h, v) in headers.iter().zip(rec.iter()) {
            let x = v
                .parse()
                .map_err(|_| LabError::format("trajectory", format!("bad value {v}")))?;
            cols.get_mut(h).expect("header").push(x);
        }
    }
    Ok((meta, cols))
}

/// Provenance of an exported profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileMeta {
    pub b: f64,
    pub t: f64,
    pub seed: u64,
    pub n: usize,
}

impl ProfileMeta {
    fn metadata(&self, kind: &str) -> Metadata {
        Metadata::default()
            .with("schema", PROFILE_SCHEMA)
            .with("kind", kind)
            .with("b", self.b)
            .with("t", self.t)
            .with("seed", self.seed)
            .with("n", self.n)
    }

    fn from_metadata(meta: &Metadata) -> Result<Self> {
        Ok(Self {
            b: meta.parse("b")?,
            t: meta.parse("t")?,
            seed: meta.parse("seed")?,
            n: meta.parse("n")?,
        })
    }
}

fn uniform_width(p: &DensityProfile) -> Result<f64> {
    let w = p.bin_edges.get(1).zip(p.bin_edges.first()).map(|(b, a)| b - a);
    let w = w
        .filter(|w| *w > 0.0)
        .ok_or_else(|| LabError::format("profile", "needs at least one bin"))?;
    let uneven = p
        .bin_edges
        .windows(2)
        .any(|e| ((e[1] - e[0]) - w).abs() > 1e-9 * w.max(1.0));
    if uneven {
        return Err(LabError::format("profile", "bins must have equal width"));
    }
    Ok(w)
}

/// Density profile as `x,value` rows at the bin centres.
pub fn write_profile_csv<W: Write>(profile: &DensityProfile, meta: &ProfileMeta, mut out: W) -> Result<()> {
    let io = |e| LabError::io("<profile>", e);
    let width = uniform_width(profile)?;
    meta.metadata("density")
        .with("bin_width", width)
        .write_to(&mut out)
        .map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "value"])?;
    for (x, d) in profile.centers().zip(&profile.bin_density) {
        w.write_record([x.to_string(), d.to_string()])?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_profile_csv<R: Read>(input: R) -> Result<(ProfileMeta, DensityProfile)> {
    let (meta, rows) = read_table(input, "density")?;
    let width: f64 = meta.parse("bin_width")?;
    let pm = ProfileMeta::from_metadata(&meta)?;
    let mut bin_edges: Vec<f64> = rows.iter().map(|(x, _)| x - 0.5 * width).collect();
    if let Some((x, _)) = rows.last() {
        bin_edges.push(x + 0.5 * width);
    }
    let bin_density = rows.into_iter().map(|(_, v)| v).collect();
    Ok((pm, DensityProfile { bin_edges, bin_density }))
}

/// CDF table `x, F(x)` of a measure at the given abscissae.
pub fn write_cdf_csv<W: Write>(measure: &EmpiricalMeasure, xs: &[f64], meta: &ProfileMeta, mut out: W) -> Result<()> {
    let io = |e| LabError::io("<cdf>", e);
    meta.metadata("cdf").write_to(&mut out).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "value"])?;
    for &x in xs {
        w.write_record([x.to_string(), measure.cdf(x).to_string()])?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_cdf_csv<R: Read>(input: R) -> Result<(ProfileMeta, Vec<(f64, f64)>)> {
    let (meta, rows) = read_table(input, "cdf")?;
    Ok((ProfileMeta::from_metadata(&meta)?, rows))
}

fn read_table<R: Read>(input: R, kind: &str) -> Result<(Metadata, Vec<(f64, f64)>)> {
    let (meta, body) = Metadata::read_from(BufReader::new(input))?;
    if meta.get("schema") != Some(PROFILE_SCHEMA) || meta.get("kind") != Some(kind) {
        return Err(LabError::format(
            "profile",
            format!("expected a {kind} table with schema {PROFILE_SCHEMA}"),
        ));
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<(f64, f64)>, _>>()?;
    Ok((meta, rows))
}

pub fn save_profile(profile: &DensityProfile, meta: &ProfileMeta, path: &Path) -> Result<()> {
    write_profile_csv(profile, meta, create(path)?)
}

/// Binary full-state dump, little endian:
///
/// ```text
/// magic "ATLS" | version u32 | n u64 | sim_time f64
/// positions [f64; n] | name_at_rank [u64; n] | accumulated_drift [f64; n]
/// ```
pub fn write_state_dump<W: Write>(state: &ParticleSystemState, mut out: W) -> Result<()> {
    let io = |e| LabError::io("<dump>", e);
    let n = state.len();
    let mut buf = Vec::with_capacity(24 + 24 * n);
    buf.extend_from_slice(&DUMP_MAGIC);
    buf.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&state.sim_time().to_le_bytes());
    for x in state.positions() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for &name in state.name_at_rank() {
        buf.extend_from_slice(&(name as u64).to_le_bytes());
    }
    for d in state.accumulated_drift() {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    out.write_all(&buf).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_state_dump<R: Read>(mut input: R) -> Result<ParticleSystemState> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|e| LabError::io("<dump>", e))?;
    let bad = |detail: &str| LabError::format("state dump", detail);
    if buf.len() < 24 || buf[..4] != DUMP_MAGIC {
        return Err(bad("missing header"));
    }
    let word = |at: usize| -> [u8; 8] { buf[at..at + 8].try_into().expect("8 bytes") };
    let version = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
    if version != DUMP_VERSION {
        return Err(bad("unsupported version"));
    }
    let n = u64::from_le_bytes(word(8)) as usize;
    if buf.len() != 24 + 24 * n {
        return Err(bad("length does not match particle count"));
    }
    let sim_time = f64::from_le_bytes(word(16));
    let f64s = |start: usize| {
        (0..n)
            .map(|i| f64::from_le_bytes(word(start + 8 * i)))
            .collect::<Vec<_>>()
    };
    let positions = f64s(24);
    let name_at_rank = (0..n)
        .map(|i| u64::from_le_bytes(word(24 + 8 * n + 8 * i)) as usize)
        .collect();
    let drift = f64s(24 + 16 * n);
    Ok(ParticleSystemState::from_parts(
        positions,
        name_at_rank,
        drift,
        sim_time,
    )?)
}

pub fn save_state_dump(state: &ParticleSystemState, path: &Path) -> Result<()> {
    write_state_dump(state, create(path)?)
}

pub fn load_state_dump(path: &Path) -> Result<ParticleSystemState> {
    read_state_dump(open(path)?)
}
