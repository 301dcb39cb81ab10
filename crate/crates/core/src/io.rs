//! Document formats: CSV series and JSON model / class / weight documents.
//!
//! CSV series are one value per row; an optional leading timestamp column is
//! ignored (the last field of each row is parsed). Model documents carry the
//! increment spec and either explicit moving-average coefficients, a sampled
//! scalar grid density, or a named closed-form model with parameters.

use std::io::{BufRead, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::blocking::VectorSeries;
use crate::error::{Error, Result};
use crate::increment::IncrementSpec;
use crate::linalg::CMat;
use crate::minimax::DensityClass;
use crate::models;
use crate::spectral::SpectralModel;

/// Parse a scalar series from CSV text: one value per row, last field wins,
/// a non-numeric first row is treated as a header and skipped.
pub fn read_scalar_csv<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let field = trimmed.rsplit(',').next().unwrap_or(trimmed).trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue, // header row
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("no numeric rows".into()));
    }
    Ok(out)
}

/// Emit a blocked series as CSV with one block per row, `T` columns.
pub fn write_blocked_csv<W: Write>(mut w: W, series: &VectorSeries) -> Result<()> {
    for row in series.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// JSON model document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDoc {
    pub spec: IncrementSpec,
    pub form: FormDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FormDoc {
    /// Real moving-average coefficient matrices (row-major).
    Ma { coeffs: Vec<Vec<Vec<f64>>> },
    /// Scalar density samples on the offset grid.
    Grid { values: Vec<f64> },
    /// Closed-form model with parameters.
    Named(NamedModel),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NamedModel {
    /// Integrated periodic AR(1) in block form.
    SparIntegrated { phi: Vec<f64> },
    /// Periodic MA with two seasonal layers.
    PeriodicMaTwoSeasonal {
        s: usize,
        u: u32,
        a0: f64,
        a: Vec<f64>,
        #[serde(default)]
        d0: f64,
        #[serde(default)]
        d1: f64,
    },
}

impl ModelDoc {
    pub fn into_model(self) -> Result<SpectralModel> {
        match self.form {
            FormDoc::Ma { coeffs } => SpectralModel::moving_average_real(self.spec, &coeffs),
            FormDoc::Grid { values } => SpectralModel::grid_scalar(self.spec, values),
            FormDoc::Named(named) => match named {
                NamedModel::SparIntegrated { phi } => models::spar_varima_model(&phi),
                NamedModel::PeriodicMaTwoSeasonal { s, u, a0, a, d0, d1 } => {
                    models::periodic_ma_two_seasonal_model(s, u, a0, &a, d0, d1)
                }
            },
        }
    }
}

pub fn model_from_json(text: &str) -> Result<SpectralModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    doc.into_model()
}

/// Scalar density field of class documents: a constant over the grid or
/// explicit node values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarField {
    Constant { constant: f64 },
    Values { values: Vec<f64> },
}

impl ScalarField {
    pub fn materialize(&self, grid: usize) -> Result<Vec<f64>> {
        match self {
            ScalarField::Constant { constant } => Ok(vec![*constant; grid]),
            ScalarField::Values { values } => {
                if values.len() != grid {
                    return Err(Error::Parse(format!(
                        "field has {} nodes, expected {grid}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// JSON density-class document (scalar surface; matrix classes are built
/// programmatically).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassDoc {
    pub family: String,
    pub variant: u8,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub p_diag: Option<Vec<f64>>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub anchor: Option<ScalarField>,
    #[serde(default)]
    pub lower: Option<ScalarField>,
    #[serde(default)]
    pub upper: Option<ScalarField>,
}

fn scalar_grid_density(values: Vec<f64>) -> Vec<CMat> {
    values.into_iter().map(|v| CMat::scalar(Complex::new(v, 0.0))).collect()
}

impl ClassDoc {
    pub fn into_class(self, grid: usize) -> Result<DensityClass> {
        let missing = |what: &str| Error::Parse(format!("class document missing `{what}`"));
        match (self.family.as_str(), self.variant) {
            ("d0", 1) => Ok(DensityClass::D0Matrix {
                p: CMat::scalar(Complex::new(self.p.ok_or_else(|| missing("p"))?, 0.0)),
            }),
            ("d0", 2) => Ok(DensityClass::D0Trace { p: self.p.ok_or_else(|| missing("p"))? }),
            ("d0", 3) => Ok(DensityClass::D0Diagonal { p: self.p_diag.ok_or_else(|| missing("p_diag"))? }),
            ("d0", 4) => Ok(DensityClass::D0Weighted {
                b1: CMat::scalar(Complex::new(self.weight.ok_or_else(|| missing("weight"))?, 0.0)),
                p: self.p.ok_or_else(|| missing("p"))?,
            }),
            ("contaminated", 1) => Ok(DensityClass::ContaminatedTrace {
                eps: self.epsilon.ok_or_else(|| missing("epsilon"))?,
                f1: scalar_grid_density(self.anchor.ok_or_else(|| missing("anchor"))?.materialize(grid)?),
                p: self.p.ok_or_else(|| missing("p"))?,
            }),
            ("neighborhood", 1) => Ok(DensityClass::NeighborhoodTrace {
                f1: scalar_grid_density(self.anchor.ok_or_else(|| missing("anchor"))?.materialize(grid)?),
                delta: self.delta.ok_or_else(|| missing("delta"))?,
            }),
            ("band", 2) => Ok(DensityClass::BandTrace {
                v: scalar_grid_density(self.lower.ok_or_else(|| missing("lower"))?.materialize(grid)?),
                u: scalar_grid_density(self.upper.ok_or_else(|| missing("upper"))?.materialize(grid)?),
                q: self.p.ok_or_else(|| missing("p"))?,
            }),
            (family, variant) => Err(Error::Unsupported(format!(
                "class family `{family}` variant {variant} has no document form"
            ))),
        }
    }
}

pub fn class_from_json(text: &str, grid: usize) -> Result<DensityClass> {
    let doc: ClassDoc = serde_json::from_str(text)?;
    doc.into_class(grid)
}

/// Serialized forecast solution.
#[derive(Clone, Debug, Serialize)]
pub struct SolutionDoc {
    pub method: &'static str,
    pub mse: f64,
    pub predictor: Vec<Vec<f64>>,
    pub initial: Vec<Vec<f64>>,
    pub diagnostics: DiagnosticsDoc,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsDoc {
    pub condition: Option<f64>,
    pub quad_error: Option<f64>,
    pub truncation_bound: f64,
    pub imag_residual: f64,
}

impl From<&crate::forecast::ForecastSolution> for SolutionDoc {
    fn from(sol: &crate::forecast::ForecastSolution) -> Self {
        SolutionDoc {
            method: match sol.method {
                crate::forecast::Method::Classical => "classical",
                crate::forecast::Method::Factorized => "factorized",
            },
            mse: sol.mse,
            predictor: sol.predictor.clone(),
            initial: sol.initial.clone(),
            diagnostics: DiagnosticsDoc {
                condition: sol.diagnostics.condition,
                quad_error: sol.diagnostics.quad_error,
                truncation_bound: sol.diagnostics.truncation_bound,
                imag_residual: sol.diagnostics.imag_residual,
            },
        }
    }
}
