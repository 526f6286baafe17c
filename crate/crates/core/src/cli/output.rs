//! Serialization helpers for reports and CSV artifacts.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};
use serde_json::json;

use crate::cli::config::Format;
use crate::error::{Error, Result};
use crate::halo::HaloCurve;
use crate::maximal::MaximalField;
use crate::rational::{to_decimal, Rational};
use crate::tauber::{GapReport, HaloOrbit};

/// Places in the decimal convenience field.
pub const DECIMAL_PLACES: usize = 12;

/// Rational as `{num, den, dec}`; the decimal is advisory.
pub fn ser_q<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut st = s.serialize_struct("Rational", 3)?;
    st.serialize_field("num", &r.numer().to_string())?;
    st.serialize_field("den", &r.denom().to_string())?;
    st.serialize_field("dec", &to_decimal(r, DECIMAL_PLACES))?;
    st.end()
}

pub fn ser_q_opt<S: Serializer>(
    r: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => ser_q(r, s),
        None => s.serialize_none(),
    }
}

pub fn ser_q_vec<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    struct Q<'a>(&'a Rational);
    impl serde::Serialize for Q<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            ser_q(self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for r in v {
        seq.serialize_element(&Q(r))?;
    }
    seq.end()
}

/// Tool identification embedded in every artifact.
pub const TOOL: &str = concat!("halolab ", env!("CARGO_PKG_VERSION"));

/// Header shared by all artifacts: tool version, subcommand and resolved config.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub subcommand: String,
    pub config: serde_json::Value,
}

impl Meta {
    fn csv_header(&self) -> String {
        format!(
            "# tool: {TOOL}\n# subcommand: {}\n# config: {}\n",
            self.subcommand,
            serde_json::to_string(&self.config).expect("json value")
        )
    }
}

/// Reports that have a tabular form.
pub enum Report<'a> {
    Field(&'a MaximalField),
    Curve(&'a HaloCurve),
    Orbit(&'a HaloOrbit),
    Gap(&'a GapReport),
    Bench(&'a [BenchRow]),
    /// Structured document; JSON only.
    Document(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub kernel: String,
    pub cells: usize,
    pub elements: u64,
    pub seconds: f64,
    pub cells_per_sec: f64,
}

fn dec(r: &Rational) -> String {
    to_decimal(r, DECIMAL_PLACES)
}

fn q_json(r: &Rational) -> serde_json::Value {
    json!({"num": r.numer().to_string(), "den": r.denom().to_string(), "dec": dec(r)})
}

fn rows_json(report: &Report<'_>) -> serde_json::Value {
    match report {
        Report::Field(f) => json!({
            "geometry": f.geometry().descriptor(),
            "elements": f.provenance().0,
            "uncovered_cells": f.uncovered_count(),
            "values": f.values().enumerate().map(|(i, v)| json!({"cell": i, "value": q_json(&v)})).collect::<Vec<_>>(),
        }),
        Report::Curve(c) => json!({
            "geometry": c.geometry,
            "points": c.points.iter().map(|p| json!({
                "u": q_json(&p.u),
                "ratio": q_json(&p.ratio),
                "method": p.method.as_str(),
                "seed": p.seed,
                "witness_cells": p.witness.len(),
                "witness_hex": p.witness.to_hex(),
            })).collect::<Vec<_>>(),
        }),
        Report::Orbit(o) => json!({
            "gamma": q_json(&o.gamma),
            "steps": o.sets.iter().enumerate().map(|(j, s)| json!({
                "step": j,
                "measure": q_json(&o.measures[j]),
                "grew": j > 0 && o.grew(j),
                "set_hex": s.to_hex(),
            })).collect::<Vec<_>>(),
        }),
        Report::Gap(g) => serde_json::to_value(g).expect("serializable"),
        Report::Bench(rows) => serde_json::to_value(rows).expect("serializable"),
        Report::Document(v) => v.clone(),
    }
}

fn rows_csv(report: &Report<'_>) -> Result<String> {
    let mut out = String::new();
    match report {
        Report::Field(f) => {
            out.push_str("cell_index,value_num,value_den,value_dec\n");
            for (i, v) in f.values().enumerate() {
                let _ = writeln!(out, "{i},{},{},{}", v.numer(), v.denom(), dec(&v));
            }
        }
        Report::Curve(c) => {
            out.push_str("u_num,u_den,ratio_num,ratio_den,method,seed,witness_cells,witness_hex,u_dec,ratio_dec\n");
            for p in &c.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    p.u.numer(),
                    p.u.denom(),
                    p.ratio.numer(),
                    p.ratio.denom(),
                    p.method.as_str(),
                    p.seed,
                    p.witness.len(),
                    p.witness.to_hex(),
                    dec(&p.u),
                    dec(&p.ratio)
                );
            }
        }
        Report::Orbit(o) => {
            out.push_str("step,measure_num,measure_den,grew,set_hex,measure_dec\n");
            for (j, s) in o.sets.iter().enumerate() {
                let m = &o.measures[j];
                let _ = writeln!(
                    out,
                    "{j},{},{},{},{},{}",
                    m.numer(),
                    m.denom(),
                    j > 0 && o.grew(j),
                    s.to_hex(),
                    dec(m)
                );
            }
        }
        Report::Gap(g) => {
            for n in &g.notices {
                let _ = writeln!(out, "# notice: {n}");
            }
            out.push_str(
                "extent,h_num,h_den,nonstrict_num,nonstrict_den,strict_num,strict_den,gap_num,gap_den,gap_cells,decay_num,decay_den,gap_dec,decay_dec\n",
            );
            for r in &g.rungs {
                let extent: Vec<String> = r.extent.iter().map(|n| n.to_string()).collect();
                let (dn, dd, ddec) = match &r.decay {
                    Some(d) => (d.numer().to_string(), d.denom().to_string(), dec(d)),
                    None => (String::new(), String::new(), String::new()),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{dn},{dd},{},{ddec}",
                    extent.join("x"),
                    r.h.numer(),
                    r.h.denom(),
                    r.nonstrict_measure.numer(),
                    r.nonstrict_measure.denom(),
                    r.strict_measure.numer(),
                    r.strict_measure.denom(),
                    r.gap_measure.numer(),
                    r.gap_measure.denom(),
                    r.gap_cells,
                    dec(&r.gap_measure)
                );
            }
        }
        Report::Bench(rows) => {
            out.push_str("kernel,cells,elements,seconds,cells_per_sec\n");
            for r in rows.iter() {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.1}",
                    r.kernel, r.cells, r.elements, r.seconds, r.cells_per_sec
                );
            }
        }
        Report::Document(_) => {
            return Err(Error::invalid(
                "format",
                "this report is only available as json",
            ));
        }
    }
    Ok(out)
}

/// Renders a report with its metadata header. Output is a pure function of
/// the inputs, so repeated runs are byte-identical.
pub fn serialize_report(report: &Report<'_>, format: Format, meta: &Meta) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut text = meta.csv_header();
            text.push_str(&rows_csv(report)?);
            Ok(text.into_bytes())
        }
        Format::Json => {
            let doc = json!({
                "tool": TOOL,
                "subcommand": meta.subcommand,
                "config": meta.config,
                "report": rows_json(report),
            });
            let mut text =
                serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?;
            text.push('\n');
            Ok(text.into_bytes())
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
