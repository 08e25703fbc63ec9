//! Uniform periodic grids on the torus `T^n = [0,1)^n` and functions sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 2;

/// A uniform grid with `size` points per axis on `[0,1)^dim`.
///
/// Flat indices are row-major: in two dimensions the point `(i0, i1)` has flat
/// index `i0 * size + i1` and coordinates `(i0 / size, i1 / size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    size: usize,
}

impl GridSpec {
    pub fn new(dim: usize, size: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} not in {{1, 2}}"
            )));
        }
        if size < 8 || !size.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {size}"
            )));
        }
        Ok(Self { dim, size })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Total number of grid points, `size^dim`.
    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same dimension with a different number of points per axis.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        Self::new(self.dim, size)
    }

    /// Per-axis index tuple of a flat index.
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.size, flat % self.size],
        }
    }

    pub fn flat_index(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.size + idx[1],
        }
    }

    /// Signed frequency of an FFT index along one axis. The Nyquist index
    /// `size / 2` maps to `+size / 2`.
    pub fn frequency(&self, index: usize) -> i64 {
        let n = self.size as i64;
        let i = index as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT index of a signed frequency (reduced modulo `size`).
    pub fn index_of_frequency(&self, freq: i64) -> usize {
        freq.rem_euclid(self.size as i64) as usize
    }

    /// Wavevector of a flat spectral index; unused trailing entries are zero.
    pub fn wavevector(&self, flat: usize) -> [i64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut k = [0i64; MAX_DIM];
        for axis in 0..self.dim {
            k[axis] = self.frequency(idx[axis]);
        }
        k
    }

    /// True when some axis of the wavevector sits on the Nyquist frequency.
    pub fn touches_nyquist(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim).any(|axis| idx[axis] == self.size / 2)
    }

    /// Coordinates of grid point `flat`, `dim` entries.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let h = 1.0 / self.size as f64;
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = idx[axis] as f64 * h;
        }
        x
    }

    /// All grid points as a flat coordinate list with stride `dim`.
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.dim);
        for j in 0..self.len() {
            out.extend_from_slice(&self.point(j)[..self.dim]);
        }
        out
    }
}

/// A real `d`-component function sampled on a [`GridSpec`].
///
/// Values are stored component-major: component `c` occupies
/// `values[c * len .. (c + 1) * len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    components: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidParameter(
                "a grid function needs at least one component".into(),
            ));
        }
        if values.len() != spec.len() * components {
            return Err(Error::SpecMismatch(format!(
                "expected {} values for {} components, got {}",
                spec.len() * components,
                components,
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            spec,
            components,
            values,
        })
    }

    pub fn zeros(spec: GridSpec, components: usize) -> Self {
        Self {
            spec,
            components,
            values: vec![0.0; spec.len() * components],
        }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            components: 1,
            values: vec![value; spec.len()],
        }
    }

    /// Samples a scalar function at the grid points.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..spec.len())
            .map(|j| f(&spec.point(j)[..spec.dim()]))
            .collect();
        Self::new(spec, 1, values)
    }

    /// Samples a vector-valued function; `f` writes `components` outputs.
    pub fn from_vector_fn(
        spec: GridSpec,
        components: usize,
        f: impl Fn(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let len = spec.len();
        let mut values = vec![0.0; len * components];
        let mut buf = vec![0.0; components];
        for j in 0..len {
            f(&spec.point(j)[..spec.dim()], &mut buf);
            for (c, v) in buf.iter().enumerate() {
                values[c * len + j] = *v;
            }
        }
        Self::new(spec, components, values)
    }

    /// Stacks scalar (or vector) functions on the same grid into one.
    pub fn stack(parts: &[&GridFunction]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("cannot stack zero grid functions".into()))?;
        let mut values = Vec::new();
        let mut components = 0;
        for p in parts {
            if p.spec != first.spec {
                return Err(Error::SpecMismatch(
                    "stacked grid functions differ in grid".into(),
                ));
            }
            values.extend_from_slice(&p.values);
            components += p.components;
        }
        Ok(Self {
            spec: first.spec,
            components,
            values,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.spec.len();
        &self.values[c * len..(c + 1) * len]
    }

    /// A single component as its own grid function.
    pub fn component_fn(&self, c: usize) -> GridFunction {
        GridFunction {
            spec: self.spec,
            components: 1,
            values: self.component(c).to_vec(),
        }
    }

    pub fn value(&self, point: usize, c: usize) -> f64 {
        self.values[c * self.spec.len() + point]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.spec,
            self.components,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| a * v).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.spec, self.components, values)
    }

    pub fn check_same_shape(&self, other: &GridFunction) -> Result<()> {
        if self.spec != other.spec || self.components != other.components {
            return Err(Error::SpecMismatch(format!(
                "{:?} x {} vs {:?} x {}",
                self.spec, self.components, other.spec, other.components
            )));
        }
        Ok(())
    }

    /// Largest absolute value over all points and components.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `L^2(T^n)` norm, `(N^{-n} sum |f|^2)^{1/2}` summed over components.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v * v).sum();
        (sum / self.spec.len() as f64).sqrt()
    }

    /// Largest pointwise difference against another function of the same shape.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}
