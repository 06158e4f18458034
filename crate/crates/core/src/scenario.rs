//! Scenario configuration: a flat TOML key-value file with defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::farfield::{ScanPlane, Taper};
use crate::geometry::{discretize_dipole, ArrayLattice, ElementMesh};
use crate::metrics::BenchSetup;
use crate::mom::PortTermination;
use crate::pipeline::ArrayModel;
use crate::{Error, Result, C64};

/// Scan plane selector as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanPlaneKind {
    #[default]
    Horizon,
    Elevation,
}

/// Fully resolved scenario. Every field has a default so a config only
/// needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub nx: usize,
    pub ny: usize,
    pub dx_wavelengths: f64,
    pub dy_wavelengths: f64,
    pub frequency_hz: f64,
    pub dipole_length_wavelengths: f64,
    pub wire_radius_wavelengths: f64,
    pub segments_per_element: usize,
    /// `[re, im]` in ohms.
    pub load_impedance_ohms: [f64; 2],
    /// Scan angles to steer to, degrees within the scan plane.
    pub steer_thetas_deg: Vec<f64>,
    pub scan_plane: ScanPlaneKind,
    /// φ of the elevation cut; ignored for the horizon plane.
    pub elevation_phi_deg: f64,
    pub grid_step_deg: f64,
    /// Points per side of the u-v map; 0 disables the maps.
    pub uv_points: usize,
    pub taper: Taper,
    pub bench_sizes: Vec<[usize; 2]>,
    pub bench_repeats: usize,
    pub output_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            nx: 3,
            ny: 3,
            dx_wavelengths: 0.14,
            dy_wavelengths: 0.12,
            frequency_hz: 10e9,
            dipole_length_wavelengths: 0.47,
            wire_radius_wavelengths: 0.001,
            segments_per_element: 11,
            load_impedance_ohms: [50.0, 0.0],
            steer_thetas_deg: vec![0.0],
            scan_plane: ScanPlaneKind::Horizon,
            elevation_phi_deg: 0.0,
            grid_step_deg: 0.5,
            uv_points: 101,
            taper: Taper::Uniform,
            bench_sizes: vec![[3, 3], [5, 4], [7, 5], [9, 7]],
            bench_repeats: 3,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Scenario {
    /// Parses and validates a config file.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("<file>")
                .to_string();
            Error::Config {
                field,
                message: e.message().trim().to_string(),
            }
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Checks every field; the first offending field is reported.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    field,
                    format!("must be a positive number, got {v}"),
                ))
            }
        };
        if self.nx == 0 {
            return Err(Error::config("nx", "must be at least 1"));
        }
        if self.ny == 0 {
            return Err(Error::config("ny", "must be at least 1"));
        }
        positive("dx_wavelengths", self.dx_wavelengths)?;
        positive("dy_wavelengths", self.dy_wavelengths)?;
        positive("frequency_hz", self.frequency_hz)?;
        positive("dipole_length_wavelengths", self.dipole_length_wavelengths)?;
        positive("wire_radius_wavelengths", self.wire_radius_wavelengths)?;
        let m = self.segments_per_element;
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::config(
                "segments_per_element",
                format!("must be odd and at least 3, got {m}"),
            ));
        }
        let seg_wl = self.dipole_length_wavelengths / (m + 1) as f64;
        if self.wire_radius_wavelengths >= seg_wl / 2.0 {
            return Err(Error::config(
                "wire_radius_wavelengths",
                format!(
                    "{} is too thick for segments of {seg_wl:.4} wavelengths",
                    self.wire_radius_wavelengths
                ),
            ));
        }
        let [re, im] = self.load_impedance_ohms;
        if !(re.is_finite() && im.is_finite() && re >= 0.0) {
            return Err(Error::config(
                "load_impedance_ohms",
                format!("needs a finite non-negative real part, got [{re}, {im}]"),
            ));
        }
        if let Some(t) = self
            .steer_thetas_deg
            .iter()
            .find(|t| !(t.is_finite() && t.abs() <= 90.0))
        {
            return Err(Error::config(
                "steer_thetas_deg",
                format!("{t} is outside [-90, 90]"),
            ));
        }
        if !self.elevation_phi_deg.is_finite() {
            return Err(Error::config("elevation_phi_deg", "must be finite"));
        }
        self.check_grid_step(self.grid_step_deg)?;
        if self.uv_points == 1 {
            return Err(Error::config("uv_points", "must be 0 or at least 2"));
        }
        if let Some(s) = self.bench_sizes.iter().find(|s| s[0] == 0 || s[1] == 0) {
            return Err(Error::config(
                "bench_sizes",
                format!("{}x{} has an empty axis", s[0], s[1]),
            ));
        }
        if self.bench_repeats == 0 {
            return Err(Error::config("bench_repeats", "must be at least 1"));
        }
        Ok(())
    }

    /// Validates an angular step, e.g. one given on the command line.
    pub fn check_grid_step(&self, step: f64) -> Result<()> {
        ScanPlane::Horizon
            .cut(step)
            .map(|_| ())
            .map_err(|e| Error::config("grid_step_deg", e.to_string()))
    }

    pub fn plane(&self) -> ScanPlane {
        match self.scan_plane {
            ScanPlaneKind::Horizon => ScanPlane::Horizon,
            ScanPlaneKind::Elevation => ScanPlane::Elevation {
                phi_deg: self.elevation_phi_deg,
            },
        }
    }

    pub fn lattice(&self) -> Result<ArrayLattice> {
        ArrayLattice::new(
            self.nx,
            self.ny,
            self.dx_wavelengths,
            self.dy_wavelengths,
            self.frequency_hz,
        )
    }

    pub fn element(&self) -> Result<ElementMesh> {
        let lambda = crate::SPEED_OF_LIGHT / self.frequency_hz;
        discretize_dipole(
            self.dipole_length_wavelengths * lambda,
            self.wire_radius_wavelengths * lambda,
            self.segments_per_element,
        )
    }

    pub fn termination(&self) -> Result<PortTermination> {
        let [re, im] = self.load_impedance_ohms;
        PortTermination::with_load(C64::new(re, im))
    }

    pub fn model(&self) -> Result<ArrayModel> {
        Ok(ArrayModel {
            lattice: self.lattice()?,
            element: self.element()?,
            termination: self.termination()?,
        })
    }

    pub fn bench_setup(&self) -> Result<BenchSetup> {
        Ok(BenchSetup {
            dx: self.dx_wavelengths,
            dy: self.dy_wavelengths,
            frequency: self.frequency_hz,
            element: self.element()?,
            termination: self.termination()?,
            repeats: self.bench_repeats,
        })
    }

    pub fn bench_ladder(&self) -> Vec<(usize, usize)> {
        self.bench_sizes.iter().map(|s| (s[0], s[1])).collect()
    }
}
