//! Calibration directory: `header.json` plus one `element_NNNN.bin` per element
//! holding little-endian f32 interleaved I/Q in C order `[pol][freq][el][az]`.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::pattern::{ElevationExtension, GridSpec, PatternGrid};
use crate::error::{Error, Result};
use crate::io::{f32_le_at, push_f32_le};
use crate::num::Real;

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationHeader {
    pub schema_version: u32,
    pub n_elements: usize,
    pub az_step_deg: f64,
    pub el_step_deg: f64,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
    pub frequencies_hz: Vec<f64>,
    #[serde(default)]
    pub elevation_extension: ElevationExtension,
}

impl CalibrationHeader {
    fn spec(&self) -> GridSpec {
        GridSpec {
            az_step_deg: self.az_step_deg,
            el_step_deg: self.el_step_deg,
            el_min_deg: self.el_min_deg,
            el_max_deg: self.el_max_deg,
            frequencies_hz: self.frequencies_hz.clone(),
            elevation_extension: self.elevation_extension,
        }
    }
}

fn element_path(dir: &Path, e: usize) -> PathBuf {
    dir.join(format!("element_{e:04}.bin"))
}

pub fn write_calibration_dir<T: Real>(grid: &PatternGrid<T>, dir: &Path) -> Result<()> {
    grid.validate()?;
    std::fs::create_dir_all(dir)?;
    let s = &grid.spec;
    let header = CalibrationHeader {
        schema_version: CALIBRATION_SCHEMA_VERSION,
        n_elements: grid.n_elements,
        az_step_deg: s.az_step_deg,
        el_step_deg: s.el_step_deg,
        el_min_deg: s.el_min_deg,
        el_max_deg: s.el_max_deg,
        frequencies_hz: s.frequencies_hz.clone(),
        elevation_extension: s.elevation_extension,
    };
    std::fs::write(dir.join("header.json"), serde_json::to_vec_pretty(&header)?)?;
    let per_element = 2 * s.frequencies_hz.len() * grid.slice_len();
    for e in 0..grid.n_elements {
        let mut buf = Vec::with_capacity(per_element * 8);
        for g in &grid.gains[e * per_element..(e + 1) * per_element] {
            push_f32_le(&mut buf, g.re.as_f64());
            push_f32_le(&mut buf, g.im.as_f64());
        }
        std::fs::write(element_path(dir, e), buf)?;
    }
    Ok(())
}

pub fn read_calibration_dir<T: Real>(dir: &Path) -> Result<PatternGrid<T>> {
    let header: CalibrationHeader = serde_json::from_slice(&std::fs::read(dir.join("header.json"))?)
        .map_err(|e| Error::Format(format!("calibration header: {e}")))?;
    if header.schema_version != CALIBRATION_SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported calibration schema {}", header.schema_version)));
    }
    let mut grid = PatternGrid::zeros(header.spec(), header.n_elements)?;
    let per_element = 2 * header.frequencies_hz.len() * grid.slice_len();
    for e in 0..header.n_elements {
        let path = element_path(dir, e);
        let bytes = std::fs::read(&path)?;
        if bytes.len() != per_element * 8 {
            return Err(Error::Format(format!(
                "{}: expected {} bytes, found {}",
                path.display(),
                per_element * 8,
                bytes.len()
            )));
        }
        for i in 0..per_element {
            grid.gains[e * per_element + i] =
                Complex::new(T::of(f32_le_at(&bytes, 2 * i)), T::of(f32_le_at(&bytes, 2 * i + 1)));
        }
    }
    grid.validate()?;
    Ok(grid)
}
