//! File formats: knot sequences, stage sidecars, spline and system dumps, experiment
//! reports and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversarialSequence, GrowthRow, Stage};
use crate::analysis::{maximal_function, square_function, Expansion};
use crate::bspline::Spline;
use crate::error::{Error, Result};
use crate::knotseq::KnotSequence;
use crate::orthosys::{function_from_coefficients, OrthoSystem};

/// Parses a knot sequence given either as JSON `{"k": .., "points": [..]}` or as text with a
/// `k=<int>` header followed by one point per line.
pub fn parse_knots(text: &str) -> Result<KnotSequence> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return Ok(serde_json::from_str(trimmed)?);
    }
    let mut lines = trimmed.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty knot file".into()))?;
    let k = header
        .strip_prefix("k=")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::Parse(format!("expected header k=<int>, found {header:?}")))?;
    let points = lines
        .map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("bad point {l:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    KnotSequence::new(k, points)
}

pub fn read_knots(path: &Path) -> Result<KnotSequence> {
    parse_knots(&fs::read_to_string(path)?)
}

pub fn knots_to_text(seq: &KnotSequence) -> String {
    let mut out = format!("k={}\n", seq.order());
    for p in seq.points() {
        out.push_str(&format!("{p}\n"));
    }
    out
}

/// Sidecar path `<stem>.stages.json` next to a sequence file.
pub fn stages_path(seq_path: &Path) -> PathBuf {
    let stem = seq_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    seq_path.with_file_name(format!("{stem}.stages.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagesFile {
    pub stages: Vec<Stage>,
}

pub fn write_adversarial(path: &Path, adv: &AdversarialSequence) -> Result<()> {
    write_json(Some(path), &adv.seq)?;
    write_json(Some(&stages_path(path)), &StagesFile { stages: adv.stages.clone() })
}

pub fn read_adversarial(path: &Path) -> Result<AdversarialSequence> {
    let seq = read_knots(path)?;
    let stages: StagesFile = serde_json::from_str(&fs::read_to_string(stages_path(path))?)?;
    Ok(AdversarialSequence { seq, stages: stages.stages })
}

/// Pretty JSON with a trailing newline, to a file or to standard output.
pub fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDump {
    pub n: usize,
    pub i0: usize,
    pub w: Vec<f64>,
    pub norm2: f64,
    #[serde(rename = "J")]
    pub j: [f64; 2],
    pub j0: usize,
}

/// A whole system: the knots, the polynomial part as monomial coefficients and one entry
/// per spline function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDump {
    pub k: usize,
    pub points: Vec<f64>,
    pub polynomials: Vec<Vec<f64>>,
    pub functions: Vec<FunctionDump>,
}

impl SystemDump {
    pub fn from_system(sys: &OrthoSystem) -> Self {
        SystemDump {
            k: sys.order(),
            points: sys.seq().points()[..sys.n_max() - 1].to_vec(),
            polynomials: sys.polynomials().iter().map(|p| p.monomial_coeffs()).collect(),
            functions: sys
                .functions()
                .iter()
                .map(|f| {
                    let j = f.j_interval();
                    FunctionDump { n: f.n, i0: f.i0, w: f.w.clone(), norm2: f.norm2, j: [j.lo, j.hi], j0: f.j0() }
                })
                .collect(),
        }
    }

    pub fn seq(&self) -> Result<KnotSequence> {
        KnotSequence::new(self.k, self.points.clone())
    }

    /// Rebuilds the system from the stored coefficients; knot-derived data are recomputed.
    pub fn to_system(&self) -> Result<OrthoSystem> {
        let seq = self.seq()?;
        let functions = self
            .functions
            .iter()
            .map(|f| function_from_coefficients(&seq, f.n, f.w.clone(), f.norm2))
            .collect::<Result<Vec<_>>>()?;
        OrthoSystem::from_parts(seq, functions)
    }
}

fn csv_string<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>>(fill: F) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn grid_points(step: f64) -> Vec<f64> {
    let m = (1.0 / step).round().max(1.0) as usize;
    (0..=m).map(|i| i as f64 / m as f64).collect()
}

/// `x,value` samples of a spline on `[0, 1]`.
pub fn spline_curve_csv(s: &Spline, step: f64) -> Result<String> {
    csv_string(|w| {
        w.write_record(["x", "value"])?;
        for x in grid_points(step) {
            w.write_record([x.to_string(), s.eval(x).to_string()])?;
        }
        Ok(())
    })
}

/// `x,P,S` samples of the square and maximal functions.
pub fn square_maximal_csv(e: &Expansion, step: f64) -> Result<String> {
    csv_string(|w| {
        w.write_record(["x", "P", "S"])?;
        for x in grid_points(step) {
            w.write_record([x.to_string(), square_function(e, x).to_string(), maximal_function(e, x).to_string()])?;
        }
        Ok(())
    })
}

pub fn growth_csv(rows: &[GrowthRow]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["ell", "G", "stage_sum", "min_coeff_product"])?;
        for r in rows {
            w.write_record([
                r.ell.to_string(),
                r.g.to_string(),
                r.stage_sum.to_string(),
                r.min_coeff_product.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Generic table with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    csv_string(|w| {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<P> {
    pub norms: BTreeMap<String, Vec<f64>>,
    pub ratios: BTreeMap<String, Vec<f64>>,
    pub params: P,
}
