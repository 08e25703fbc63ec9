//! JSON formats for fields and diffeomorphisms.
//!
//! A field file stores Fourier coefficients in FFT order, component-major, as
//! `[re, im]` pairs. Loading rejects coefficient sets that are not Hermitian
//! symmetric (the field would not be real). A diffeomorphism file stores the
//! displacement in the same layout together with its certificate; loading
//! re-certifies the displacement rather than trusting the stored numbers.

use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffeo::{Certificate, Diffeo};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::report::SCHEMA_VERSION;
use crate::spectrum::Spectrum;

/// Relative tolerance of the Hermitian-symmetry check on load.
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub schema_version: u32,
    pub spec: GridSpec,
    pub components: usize,
    pub coeffs: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoFile {
    pub schema_version: u32,
    pub spec: GridSpec,
    pub displacement: Vec<[f64; 2]>,
    pub certificate: Certificate,
}

fn check_header(version: u32, spec: GridSpec) -> Result<GridSpec> {
    if version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "schema version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    GridSpec::new(spec.dim(), spec.size())
}

fn to_pairs(s: &Spectrum) -> Vec<[f64; 2]> {
    s.coeffs().iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(spec: GridSpec, components: usize, pairs: &[[f64; 2]]) -> Result<Spectrum> {
    let coeffs: Vec<Complex64> = pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let projected = Spectrum::from_coeffs(spec, components, coeffs.clone())?;
    let scale = coeffs
        .iter()
        .fold(0.0f64, |m, c| m.max(c.norm()))
        .max(f64::MIN_POSITIVE);
    let asym = projected
        .coeffs()
        .iter()
        .zip(&coeffs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::Format(format!(
            "coefficients are not Hermitian symmetric (deviation {asym:.3e}); the field would not be real"
        )));
    }
    Ok(projected)
}

impl FieldFile {
    pub fn from_spectrum(s: &Spectrum) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            spec: s.spec(),
            components: s.components(),
            coeffs: to_pairs(s),
        }
    }

    pub fn to_spectrum(&self) -> Result<Spectrum> {
        let spec = check_header(self.schema_version, self.spec)?;
        from_pairs(spec, self.components, &self.coeffs)
    }
}

impl DiffeoFile {
    pub fn from_diffeo(phi: &Diffeo) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            spec: phi.spec(),
            displacement: to_pairs(phi.displacement()),
            certificate: phi.certificate().clone(),
        }
    }

    /// Rebuilds and re-certifies the map. Orientation and the determinant floor
    /// are always re-checked; the injectivity basis is taken from the file.
    pub fn to_diffeo(&self) -> Result<Diffeo> {
        let spec = check_header(self.schema_version, self.spec)?;
        let u = from_pairs(spec, spec.dim(), &self.displacement)?;
        Diffeo::certify(u, self.certificate.options, self.certificate.injectivity)
    }
}

pub fn read_field(path: &Path) -> Result<Spectrum> {
    let file: FieldFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    file.to_spectrum()
}

pub fn write_field(path: &Path, s: &Spectrum) -> Result<()> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(&FieldFile::from_spectrum(s))?,
    )?;
    Ok(())
}

pub fn read_diffeo(path: &Path) -> Result<Diffeo> {
    let file: DiffeoFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    file.to_diffeo()
}

pub fn write_diffeo(path: &Path, phi: &Diffeo) -> Result<()> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(&DiffeoFile::from_diffeo(phi))?,
    )?;
    Ok(())
}
