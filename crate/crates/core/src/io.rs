//! CSV and JSON persistence. Data files hold one row per phi-point:
//! `set_id,k,Q2,xB,t,phi_deg,F,sigma_F`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{DataPoint, KinematicBin};
use crate::physics::CffSet;
use crate::{Error, Result};

pub const DATA_COLUMNS: [&str; 8] = ["set_id", "k", "Q2", "xB", "t", "phi_deg", "F", "sigma_F"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub set_id: u32,
    pub k: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
    #[serde(rename = "xB")]
    pub xb: f64,
    pub t: f64,
    pub phi_deg: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "sigma_F")]
    pub sigma_f: f64,
}

fn schema(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { location: location.into(), message: message.into() }
}

/// Parses data rows, reporting the 1-based file line and column name of the
/// first malformed field. Rows must be finite with sigma_F > 0.
pub fn read_data_rows(reader: impl Read) -> Result<Vec<DataRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut col = [0usize; 8];
    for (i, name) in DATA_COLUMNS.iter().enumerate() {
        col[i] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| schema("header", format!("missing column `{name}`")))?;
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str> {
            rec.get(col[i]).ok_or_else(|| schema(format!("line {line}"), format!("missing `{}`", DATA_COLUMNS[i])))
        };
        let num = |i: usize| -> Result<f64> {
            let s = field(i)?;
            let v: f64 = s.parse().map_err(|_| {
                schema(format!("line {line}, column {}", DATA_COLUMNS[i]), format!("`{s}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(schema(format!("line {line}, column {}", DATA_COLUMNS[i]), format!("`{s}` is not finite")));
            }
            Ok(v)
        };
        let id_str = field(0)?;
        let set_id: u32 = id_str.parse().map_err(|_| {
            schema(format!("line {line}, column set_id"), format!("`{id_str}` is not a non-negative integer"))
        })?;
        let row = DataRow {
            set_id,
            k: num(1)?,
            q2: num(2)?,
            xb: num(3)?,
            t: num(4)?,
            phi_deg: num(5)?,
            f: num(6)?,
            sigma_f: num(7)?,
        };
        if !(row.sigma_f > 0.0) {
            return Err(schema(format!("line {line}, column sigma_F"), format!("{} must be positive", row.sigma_f)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Groups rows by set id (ascending), checking that kinematics agree within
/// a set and each bin validates.
pub fn rows_to_bins(rows: &[DataRow]) -> Result<Vec<KinematicBin>> {
    let mut map: BTreeMap<u32, KinematicBin> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let b = map.entry(r.set_id).or_insert_with(|| KinematicBin {
            set_id: r.set_id,
            k: r.k,
            q2: r.q2,
            xb: r.xb,
            t: r.t,
            points: Vec::new(),
        });
        if (b.k, b.q2, b.xb, b.t) != (r.k, r.q2, r.xb, r.t) {
            return Err(schema(
                format!("row {}", i + 1),
                format!("kinematics differ from earlier rows of set {}", r.set_id),
            ));
        }
        b.points.push(DataPoint { phi_deg: r.phi_deg, f: r.f, sigma_f: r.sigma_f });
    }
    let bins: Vec<KinematicBin> = map.into_values().collect();
    for b in &bins {
        b.validate()?;
    }
    Ok(bins)
}

pub fn bins_to_rows(bins: &[KinematicBin]) -> Vec<DataRow> {
    bins.iter()
        .flat_map(|b| {
            b.points.iter().map(move |p| DataRow {
                set_id: b.set_id,
                k: b.k,
                q2: b.q2,
                xb: b.xb,
                t: b.t,
                phi_deg: p.phi_deg,
                f: p.f,
                sigma_f: p.sigma_f,
            })
        })
        .collect()
}

pub fn read_bins(path: &Path) -> Result<Vec<KinematicBin>> {
    let f = File::open(path).map_err(|e| schema(path.display().to_string(), e.to_string()))?;
    rows_to_bins(&read_data_rows(f).map_err(|e| match e {
        Error::Schema { location, message } => schema(format!("{}: {location}", path.display()), message),
        other => other,
    })?)
}

pub fn write_bins(path: &Path, bins: &[KinematicBin]) -> Result<()> {
    write_csv(path, &bins_to_rows(bins))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub set_id: u32,
    #[serde(rename = "ReH")]
    pub re_h: f64,
    #[serde(rename = "ReE")]
    pub re_e: f64,
    #[serde(rename = "ReHt")]
    pub re_ht: f64,
    #[serde(rename = "DVCS")]
    pub dvcs: f64,
}

impl TruthRow {
    pub fn new(set_id: u32, c: &CffSet) -> Self {
        Self { set_id, re_h: c.re_h, re_e: c.re_e, re_ht: c.re_ht, dvcs: c.dvcs }
    }

    pub fn cffs(&self) -> CffSet {
        CffSet::new(self.re_h, self.re_e, self.re_ht, self.dvcs)
    }
}

pub fn read_truth(path: &Path) -> Result<BTreeMap<u32, CffSet>> {
    Ok(read_csv::<TruthRow>(path)?.into_iter().map(|r| (r.set_id, r.cffs())).collect())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, r) in rdr.deserialize().enumerate() {
        out.push(r.map_err(|e| schema(format!("{}: record {}", path.display(), i + 1), e.to_string()))?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}
