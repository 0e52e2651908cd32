//! CSV schemas (UTF-8, header row, `.` decimals, `\n` line ends).
//!
//! * `traces.csv`: experiment_id, method, alpha0, beta, rep, pass, objective, gap, grad_map_norm, diverged
//! * `summary.csv`: experiment_id, method, pass, median_gap, q10_gap, q90_gap
//! * `tte.csv`: experiment_id, method, alpha0, beta, rep, T, capped
//! * `instance.meta.csv`: n, d, design, kappa, noise_kind, noise_param, seed
//! * `instance.csv`: a_0 .. a_{d-1}, b (one row per measurement)

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problems::{DesignKind, DesignSpec, NoiseSpec, PhaseRetrievalInstance};

pub const TRACES_HEADER: [&str; 10] = [
    "experiment_id", "method", "alpha0", "beta", "rep", "pass", "objective", "gap", "grad_map_norm", "diverged",
];
pub const SUMMARY_HEADER: [&str; 6] = ["experiment_id", "method", "pass", "median_gap", "q10_gap", "q90_gap"];
pub const TTE_HEADER: [&str; 7] = ["experiment_id", "method", "alpha0", "beta", "rep", "T", "capped"];
pub const META_HEADER: [&str; 7] = ["n", "d", "design", "kappa", "noise_kind", "noise_param", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub experiment_id: String,
    pub method: String,
    pub alpha0: f64,
    pub beta: f64,
    pub rep: usize,
    pub pass: f64,
    pub objective: f64,
    pub gap: f64,
    pub grad_map_norm: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub method: String,
    pub pass: f64,
    pub median_gap: f64,
    pub q10_gap: f64,
    pub q90_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TteRow {
    pub experiment_id: String,
    pub method: String,
    pub alpha0: f64,
    pub beta: f64,
    pub rep: usize,
    pub t: usize,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMeta {
    pub n: usize,
    pub d: usize,
    pub design: DesignSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl InstanceMeta {
    pub fn of(inst: &PhaseRetrievalInstance) -> Self {
        InstanceMeta {
            n: inst.n(),
            d: inst.d(),
            design: inst.design(),
            noise: inst.noise(),
            seed: inst.seed(),
        }
    }

    pub fn regenerate(&self) -> Result<PhaseRetrievalInstance> {
        PhaseRetrievalInstance::generate(self.n, self.d, self.design, self.noise, self.seed)
    }
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn write_all<I, R>(path: &Path, header: &[&str], records: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_traces(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_all(
        path,
        &TRACES_HEADER,
        rows.iter().map(|r| {
            [
                r.experiment_id.clone(),
                r.method.clone(),
                fmt_f64(r.alpha0),
                fmt_f64(r.beta),
                r.rep.to_string(),
                fmt_f64(r.pass),
                fmt_f64(r.objective),
                fmt_f64(r.gap),
                fmt_f64(r.grad_map_norm),
                r.diverged.to_string(),
            ]
        }),
    )
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_all(
        path,
        &SUMMARY_HEADER,
        rows.iter().map(|r| {
            [
                r.experiment_id.clone(),
                r.method.clone(),
                fmt_f64(r.pass),
                fmt_f64(r.median_gap),
                fmt_f64(r.q10_gap),
                fmt_f64(r.q90_gap),
            ]
        }),
    )
}

pub fn write_tte(path: &Path, rows: &[TteRow]) -> Result<()> {
    write_all(
        path,
        &TTE_HEADER,
        rows.iter().map(|r| {
            [
                r.experiment_id.clone(),
                r.method.clone(),
                fmt_f64(r.alpha0),
                fmt_f64(r.beta),
                r.rep.to_string(),
                r.t.to_string(),
                r.capped.to_string(),
            ]
        }),
    )
}

pub fn write_instance_meta(path: &Path, metas: &[InstanceMeta]) -> Result<()> {
    write_all(
        path,
        &META_HEADER,
        metas.iter().map(|m| {
            [
                m.n.to_string(),
                m.d.to_string(),
                m.design.kind.to_string(),
                fmt_f64(m.design.kappa),
                m.noise.kind_name().to_string(),
                m.noise.param_string(),
                m.seed.to_string(),
            ]
        }),
    )
}

/// Writes `instance.csv` and `instance.meta.csv` into `dir`.
pub fn write_instance(dir: &Path, inst: &PhaseRetrievalInstance) -> Result<()> {
    let mut header: Vec<String> = (0..inst.d()).map(|j| format!("a_{j}")).collect();
    header.push("b".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let a = inst.design_matrix();
    write_all(
        &dir.join("instance.csv"),
        &header,
        (0..inst.n()).map(|i| {
            a.row_slice(i)
                .iter()
                .copied()
                .chain([inst.observations()[i]])
                .map(fmt_f64)
                .collect::<Vec<_>>()
        }),
    )?;
    write_instance_meta(&dir.join("instance.meta.csv"), &[InstanceMeta::of(inst)])
}

struct Table {
    path: std::path::PathBuf,
    columns: HashMap<String, usize>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
        let columns: HashMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("missing column {col:?}"),
                });
            }
        }
        let records = r
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::csv(path, e))?;
        Ok(Table {
            path: path.to_path_buf(),
            columns,
            records,
        })
    }

    fn get<T: FromStr>(&self, rec: &csv::StringRecord, col: &str) -> Result<T> {
        let raw = rec.get(self.columns[col]).unwrap_or("");
        raw.trim().parse().map_err(|_| Error::Format {
            path: self.path.clone(),
            message: format!("bad {col} value {raw:?}"),
        })
    }
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRow>> {
    let t = Table::read(path, &TRACES_HEADER)?;
    t.records
        .iter()
        .map(|r| {
            Ok(TraceRow {
                experiment_id: t.get(r, "experiment_id")?,
                method: t.get(r, "method")?,
                alpha0: t.get(r, "alpha0")?,
                beta: t.get(r, "beta")?,
                rep: t.get(r, "rep")?,
                pass: t.get(r, "pass")?,
                objective: t.get(r, "objective")?,
                gap: t.get(r, "gap")?,
                grad_map_norm: t.get(r, "grad_map_norm")?,
                diverged: t.get(r, "diverged")?,
            })
        })
        .collect()
}

pub fn read_tte(path: &Path) -> Result<Vec<TteRow>> {
    let t = Table::read(path, &TTE_HEADER)?;
    t.records
        .iter()
        .map(|r| {
            Ok(TteRow {
                experiment_id: t.get(r, "experiment_id")?,
                method: t.get(r, "method")?,
                alpha0: t.get(r, "alpha0")?,
                beta: t.get(r, "beta")?,
                rep: t.get(r, "rep")?,
                t: t.get(r, "T")?,
                capped: t.get(r, "capped")?,
            })
        })
        .collect()
}

pub fn read_instance_meta(path: &Path) -> Result<Vec<InstanceMeta>> {
    let t = Table::read(path, &META_HEADER)?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    t.records
        .iter()
        .map(|r| {
            let kind: DesignKind = t.get::<String>(r, "design")?.parse().map_err(|e: Error| bad(e.to_string()))?;
            let kappa: f64 = t.get(r, "kappa")?;
            let noise_kind: String = t.get(r, "noise_kind")?;
            let param: String = t.get(r, "noise_param")?;
            let noise_text = if param.is_empty() { noise_kind } else { format!("{noise_kind}:{param}") };
            Ok(InstanceMeta {
                n: t.get(r, "n")?,
                d: t.get(r, "d")?,
                design: DesignSpec::new(kind, kappa).map_err(|e| bad(e.to_string()))?,
                noise: noise_text.parse().map_err(|e: Error| bad(e.to_string()))?,
                seed: t.get(r, "seed")?,
            })
        })
        .collect()
}

/// Reads an instance written by [`write_instance`]. The generator is re-run
/// from the metadata (recovering the planted signal) and must reproduce the
/// stored measurements exactly.
pub fn load_instance(dir: &Path) -> Result<PhaseRetrievalInstance> {
    let meta_path = dir.join("instance.meta.csv");
    let metas = read_instance_meta(&meta_path)?;
    let meta = match metas.as_slice() {
        [m] => m,
        _ => {
            return Err(Error::Format {
                path: meta_path,
                message: format!("expected one instance row, found {}", metas.len()),
            })
        }
    };
    let data_path = dir.join("instance.csv");
    let file = File::open(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(&data_path, e))?;
        let vals = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                path: data_path.clone(),
                message: e.to_string(),
            })?;
        let (last, head) = vals.split_last().ok_or_else(|| Error::Format {
            path: data_path.clone(),
            message: "empty row".into(),
        })?;
        b.push(*last);
        rows.push(head.to_vec());
    }
    let inst = meta.regenerate()?;
    if rows.len() != inst.n() || rows.iter().any(|row| row.len() != inst.d()) {
        return Err(Error::Format {
            path: data_path,
            message: "instance data does not match its metadata shape".into(),
        });
    }
    if Matrix::from_rows(&rows) != *inst.design_matrix() || b != inst.observations() {
        return Err(Error::Format {
            path: data_path,
            message: "instance data does not match the generator for its metadata".into(),
        });
    }
    Ok(inst)
}
