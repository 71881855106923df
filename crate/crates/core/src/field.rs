//! Scalar fields: functions from positions to real values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Arith, ParseError};
use crate::geometry::{CoordinateValue, FrameTree, GeometryError, Vec3};

// Lattice coordinates closer than this to an integer are snapped onto it.
const LATTICE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("OUT_OF_BOUNDS: {0:?} lies outside the grid")]
    OutOfBounds(Vec3),
    #[error("EXPRESSION_ERROR: {0}")]
    Expression(String),
    #[error("SHAPE_MISMATCH: {0}")]
    ShapeMismatch(String),
    #[error("DEGENERATE_BOUNDS: {0}")]
    DegenerateBounds(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl FieldError {
    pub fn code(&self) -> &'static str {
        match self {
            FieldError::OutOfBounds(_) => "OUT_OF_BOUNDS",
            FieldError::Expression(_) => "EXPRESSION_ERROR",
            FieldError::ShapeMismatch(_) => "SHAPE_MISMATCH",
            FieldError::DegenerateBounds(_) => "DEGENERATE_BOUNDS",
            FieldError::Parse(_) => "PARSE_ERROR",
            FieldError::Geometry(e) => e.code(),
        }
    }
}

/// Regular sample lattice; `samples` are stored x-fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub min: Vec3,
    pub max: Vec3,
    pub counts: [usize; 3],
    pub samples: Vec<f64>,
}

impl GridField {
    pub fn check(&self) -> Result<(), FieldError> {
        for axis in 0..3 {
            if self.counts[axis] < 2 {
                return Err(FieldError::ShapeMismatch(format!(
                    "axis {axis} has {} samples, need at least 2",
                    self.counts[axis]
                )));
            }
            if !(self.min[axis].is_finite() && self.max[axis].is_finite())
                || self.min[axis] >= self.max[axis]
            {
                return Err(FieldError::DegenerateBounds(format!(
                    "axis {axis}: min {} is not below max {}",
                    self.min[axis], self.max[axis]
                )));
            }
        }
        let expected = self.counts.iter().product::<usize>();
        if self.samples.len() != expected {
            return Err(FieldError::ShapeMismatch(format!(
                "{} samples for a {}x{}x{} grid",
                self.samples.len(),
                self.counts[0],
                self.counts[1],
                self.counts[2]
            )));
        }
        Ok(())
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    /// World-independent coordinate of lattice point `(i, j, k)`.
    pub fn lattice_point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let ijk = [i, j, k];
        let mut p = [0.0; 3];
        for axis in 0..3 {
            let step = (self.max[axis] - self.min[axis]) / (self.counts[axis] - 1) as f64;
            p[axis] = self.min[axis] + ijk[axis] as f64 * step;
        }
        p
    }

    /// Trilinear interpolation at a point in the grid's own frame.
    pub fn sample(&self, p: Vec3) -> Result<f64, FieldError> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for axis in 0..3 {
            if !(p[axis] >= self.min[axis] && p[axis] <= self.max[axis]) {
                return Err(FieldError::OutOfBounds(p));
            }
            let last = self.counts[axis] - 1;
            let mut u = (p[axis] - self.min[axis]) / (self.max[axis] - self.min[axis]) * last as f64;
            let nearest = u.round();
            if (u - nearest).abs() < LATTICE_SNAP {
                u = nearest;
            }
            let c = (u.floor() as usize).min(last - 1);
            cell[axis] = c;
            frac[axis] = u - c as f64;
        }
        let [i, j, k] = cell;
        let [tx, ty, tz] = frac;
        let s = |di: usize, dj: usize, dk: usize| self.samples[self.index(i + di, j + dj, k + dk)];
        let lerp = |a: f64, b: f64, t: f64| a * (1.0 - t) + b * t;
        let c00 = lerp(s(0, 0, 0), s(1, 0, 0), tx);
        let c10 = lerp(s(0, 1, 0), s(1, 1, 0), tx);
        let c01 = lerp(s(0, 0, 1), s(1, 0, 1), tx);
        let c11 = lerp(s(0, 1, 1), s(1, 1, 1), tx);
        Ok(lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    /// Arithmetic expression over `x`, `y`, `z`.
    Analytic(String),
    Grid(GridField),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub frame: String,
    pub value_unit: String,
    pub source: FieldSource,
}

impl FieldSpec {
    pub fn analytic(expression: &str, frame: &str, value_unit: &str) -> Result<Self, FieldError> {
        Arith::parse(expression)?;
        Ok(FieldSpec {
            frame: frame.into(),
            value_unit: value_unit.into(),
            source: FieldSource::Analytic(expression.into()),
        })
    }

    pub fn check(&self) -> Result<(), FieldError> {
        match &self.source {
            FieldSource::Analytic(e) => Arith::parse(e).map(|_| ()).map_err(FieldError::from),
            FieldSource::Grid(g) => g.check(),
        }
    }
}

/// Grid field in the `world` frame; use [`FieldSpec`] fields to relocate it.
pub fn field_from_grid(
    min: Vec3,
    max: Vec3,
    counts: [usize; 3],
    samples: Vec<f64>,
) -> Result<FieldSpec, FieldError> {
    let grid = GridField { min, max, counts, samples };
    grid.check()?;
    Ok(FieldSpec {
        frame: crate::geometry::WORLD.into(),
        value_unit: String::new(),
        source: FieldSource::Grid(grid),
    })
}

/// Sample `spec` at the lattice points of a grid placed in `frame`.
pub fn sample_to_grid(
    spec: &FieldSpec,
    tree: &FrameTree,
    frame: &str,
    min: Vec3,
    max: Vec3,
    counts: [usize; 3],
) -> Result<FieldSpec, FieldError> {
    let mut grid = GridField { min, max, counts, samples: vec![0.0; counts.iter().product()] };
    grid.check()?;
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let at = CoordinateValue::new(frame, grid.lattice_point(i, j, k));
                let idx = grid.index(i, j, k);
                grid.samples[idx] = evaluate_field(spec, tree, &at)?;
            }
        }
    }
    Ok(FieldSpec { frame: frame.into(), value_unit: spec.value_unit.clone(), source: FieldSource::Grid(grid) })
}

pub fn evaluate_field(
    spec: &FieldSpec,
    tree: &FrameTree,
    at: &CoordinateValue,
) -> Result<f64, FieldError> {
    let p = tree.resolve_position(at, &spec.frame)?;
    match &spec.source {
        FieldSource::Analytic(src) => Arith::parse(src)?
            .evaluate(p)
            .map_err(FieldError::Expression),
        FieldSource::Grid(grid) => {
            grid.check()?;
            grid.sample(p)
        }
    }
}
