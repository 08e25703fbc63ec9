//! Fourier coefficients of real fields on the torus.
//!
//! Conventions: the basis is `e^{2 pi i k.x}` on `[0,1)^n` and coefficients are
//! `f_k = N^{-n} sum_j f(x_j) e^{-2 pi i k.x_j}`, so Parseval carries no weight
//! and the derivative symbol is `2 pi i k`. Coefficients live in FFT index order
//! (see [`GridSpec::frequency`]).

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, MAX_DIM};

/// Number of point-mode products above which evaluation runs in parallel.
const PAR_EVAL_THRESHOLD: usize = 1 << 16;

/// Complex Fourier coefficients of a real `d`-component field, component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    spec: GridSpec,
    components: usize,
    coeffs: Vec<Complex64>,
}

/// Band-limit truncation profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    /// Zero every mode with `|k| > M`.
    Sharp,
    /// Multiply by `chi(|k| / M)`.
    Smooth,
}

fn fft_in_place(spec: GridSpec, data: &mut [Complex64], direction: FftDirection) {
    let n = spec.size();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n, direction);
    match spec.dim() {
        1 => fft.process(data),
        _ => {
            let block = n * n;
            for chunk in data.chunks_mut(block) {
                // rows
                fft.process(chunk);
                // columns
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for i1 in 0..n {
                    for i0 in 0..n {
                        col[i0] = chunk[i0 * n + i1];
                    }
                    fft.process(&mut col);
                    for i0 in 0..n {
                        chunk[i0 * n + i1] = col[i0];
                    }
                }
            }
        }
    }
}

/// Forward DFT of a grid function, normalized by `N^{-n}`.
pub fn forward_transform(f: &GridFunction) -> Result<Spectrum> {
    if let Some(index) = f.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let spec = f.spec();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(spec, &mut data, FftDirection::Forward);
    let scale = 1.0 / spec.len() as f64;
    for c in &mut data {
        *c *= scale;
    }
    Ok(Spectrum::hermitian(spec, f.components(), data))
}

/// Inverse DFT; exact inverse of [`forward_transform`] on the grid.
pub fn inverse_transform(spectrum: &Spectrum) -> GridFunction {
    let mut data = spectrum.coeffs.clone();
    fft_in_place(spectrum.spec, &mut data, FftDirection::Inverse);
    let values = data.iter().map(|c| c.re).collect();
    GridFunction::new(spectrum.spec, spectrum.components, values)
        .expect("inverse transform of a finite spectrum is finite")
}

/// Smooth cutoff: 1 on `[0,1]`, 0 on `[2, inf)`, quintic smoothstep in between.
pub fn cutoff_profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let x = t - 1.0;
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

impl Spectrum {
    /// Builds a spectrum and projects it onto Hermitian-symmetric coefficients.
    pub fn from_coeffs(spec: GridSpec, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if components == 0 || coeffs.len() != spec.len() * components {
            return Err(Error::SpecMismatch(format!(
                "expected {} coefficients for {} components, got {}",
                spec.len() * components,
                components,
                coeffs.len()
            )));
        }
        if let Some(index) = coeffs
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self::hermitian(spec, components, coeffs))
    }

    fn hermitian(spec: GridSpec, components: usize, coeffs: Vec<Complex64>) -> Self {
        let len = spec.len();
        let mut out = coeffs.clone();
        for c in 0..components {
            let base = c * len;
            for j in 0..len {
                let partner = spec_partner(spec, j);
                out[base + j] = 0.5 * (coeffs[base + j] + coeffs[base + partner].conj());
            }
        }
        Self {
            spec,
            components,
            coeffs: out,
        }
    }

    pub fn zeros(spec: GridSpec, components: usize) -> Self {
        Self {
            spec,
            components,
            coeffs: vec![Complex64::new(0.0, 0.0); spec.len() * components],
        }
    }

    /// Samples `f` on the grid and transforms it.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        forward_transform(&GridFunction::from_fn(spec, f)?)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn component_coeffs(&self, c: usize) -> &[Complex64] {
        let len = self.spec.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn component(&self, c: usize) -> Spectrum {
        Spectrum {
            spec: self.spec,
            components: 1,
            coeffs: self.component_coeffs(c).to_vec(),
        }
    }

    /// Coefficient of wavevector `k` in component `c` (indices reduced mod `N`).
    pub fn coeff(&self, c: usize, k: &[i64]) -> Complex64 {
        let mut idx = [0usize; MAX_DIM];
        for (axis, &ki) in k.iter().enumerate().take(self.spec.dim()) {
            idx[axis] = self.spec.index_of_frequency(ki);
        }
        self.coeffs[c * self.spec.len() + self.spec.flat_index(idx)]
    }

    pub fn to_grid(&self) -> GridFunction {
        inverse_transform(self)
    }

    pub fn stack(parts: &[&Spectrum]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("cannot stack zero spectra".into()))?;
        let mut coeffs = Vec::new();
        let mut components = 0;
        for p in parts {
            if p.spec != first.spec {
                return Err(Error::SpecMismatch("stacked spectra differ in grid".into()));
            }
            coeffs.extend_from_slice(&p.coeffs);
            components += p.components;
        }
        Ok(Self {
            spec: first.spec,
            components,
            coeffs,
        })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Spectrum) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Spectrum) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Spectrum) -> Result<Self> {
        if self.spec != other.spec || self.components != other.components {
            return Err(Error::SpecMismatch(
                "spectra differ in grid or component count".into(),
            ));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x + y * a)
            .collect();
        Ok(Self {
            coeffs,
            ..self.clone()
        })
    }

    /// Coefficient `l^2` norm, equal to the grid `L^2` norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest `|k|_inf` carrying a coefficient above `threshold`.
    pub fn bandwidth(&self, threshold: f64) -> usize {
        let len = self.spec.len();
        let mut band = 0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.norm() > threshold {
                let k = self.spec.wavevector(i % len);
                band = band.max(
                    k.iter()
                        .map(|v| v.unsigned_abs() as usize)
                        .max()
                        .unwrap_or(0),
                );
            }
        }
        band
    }

    /// Multiplies every coefficient by a real weight depending on the wavevector.
    pub fn map_weights(&self, weight: impl Fn(&[i64]) -> f64) -> Self {
        let len = self.spec.len();
        let dim = self.spec.dim();
        let w: Vec<f64> = (0..len)
            .map(|j| weight(&self.spec.wavevector(j)[..dim]))
            .collect();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * w[i % len])
            .collect();
        Self {
            coeffs,
            ..self.clone()
        }
    }

    /// Spectral derivative along `axis`; the Nyquist mode of that axis is dropped.
    pub fn differentiate(&self, axis: usize) -> Result<Self> {
        if axis >= self.spec.dim() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for a {}-dimensional grid",
                self.spec.dim()
            )));
        }
        let len = self.spec.len();
        let half = self.spec.size() / 2;
        let symbols: Vec<Complex64> = (0..len)
            .map(|j| {
                let idx = self.spec.multi_index(j);
                if idx[axis] == half {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, 2.0 * PI * self.spec.frequency(idx[axis]) as f64)
                }
            })
            .collect();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * symbols[i % len])
            .collect();
        Ok(Self {
            coeffs,
            ..self.clone()
        })
    }

    /// `partial^alpha` for a multi-index with one entry per axis.
    pub fn derivative(&self, alpha: &[usize]) -> Result<Self> {
        if alpha.len() != self.spec.dim() {
            return Err(Error::InvalidParameter(format!(
                "multi-index {alpha:?} does not match dimension {}",
                self.spec.dim()
            )));
        }
        let mut out = self.clone();
        for (axis, &order) in alpha.iter().enumerate() {
            for _ in 0..order {
                out = out.differentiate(axis)?;
            }
        }
        Ok(out)
    }

    /// Band-limit truncation at radius `cutoff` (Euclidean `|k|`).
    pub fn fourier_truncate(&self, cutoff: f64, mode: Truncation) -> Result<Self> {
        let half = (self.spec.size() / 2) as f64;
        if !(cutoff > 0.0 && cutoff <= half) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff} must lie in (0, {half}]"
            )));
        }
        Ok(self.map_weights(|k| {
            let r = k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
            match mode {
                Truncation::Sharp => {
                    if r <= cutoff {
                        1.0
                    } else {
                        0.0
                    }
                }
                Truncation::Smooth => cutoff_profile(r / cutoff),
            }
        }))
    }

    /// Same trigonometric polynomial on a grid with `new_size` points per axis.
    ///
    /// Refining splits each Nyquist coefficient evenly between `+N/2` and `-N/2`
    /// so the interpolant stays real; coarsening drops `|k_i| > M/2` and folds
    /// `+-M/2` onto the coarse Nyquist slot. Refining then coarsening is the
    /// identity.
    pub fn resample(&self, new_size: usize) -> Result<Self> {
        let target = self.spec.with_size(new_size)?;
        if new_size == self.spec.size() {
            return Ok(self.clone());
        }
        let old_len = self.spec.len();
        let new_len = target.len();
        let dim = self.spec.dim();
        let old_half = (self.spec.size() / 2) as i64;
        let new_half = (new_size / 2) as i64;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); new_len * self.components];

        if new_size > self.spec.size() {
            for j in 0..old_len {
                let k = self.spec.wavevector(j);
                // per-axis (target frequency, weight) options
                let mut options: Vec<Vec<(i64, f64)>> = Vec::with_capacity(dim);
                for &ka in k.iter().take(dim) {
                    if ka == old_half {
                        options.push(vec![(old_half, 0.5), (-old_half, 0.5)]);
                    } else {
                        options.push(vec![(ka, 1.0)]);
                    }
                }
                for_each_product(&options, |freqs, weight| {
                    let mut idx = [0usize; MAX_DIM];
                    for axis in 0..dim {
                        idx[axis] = target.index_of_frequency(freqs[axis]);
                    }
                    let t = target.flat_index(idx);
                    for c in 0..self.components {
                        coeffs[c * new_len + t] += self.coeffs[c * old_len + j] * weight;
                    }
                });
            }
        } else {
            for j in 0..old_len {
                let k = self.spec.wavevector(j);
                let keep = k.iter().take(dim).all(|&ka| ka.abs() <= new_half);
                if !keep {
                    continue;
                }
                let mut idx = [0usize; MAX_DIM];
                for axis in 0..dim {
                    idx[axis] = target.index_of_frequency(k[axis]);
                }
                let t = target.flat_index(idx);
                for c in 0..self.components {
                    coeffs[c * new_len + t] += self.coeffs[c * old_len + j];
                }
            }
        }
        Ok(Self {
            spec: target,
            components: self.components,
            coeffs,
        })
    }

    /// Values on the `factor`-times refined grid (exact trigonometric interpolation).
    pub fn refined_grid(&self, factor: usize) -> Result<GridFunction> {
        Ok(self.resample(self.spec.size() * factor)?.to_grid())
    }

    /// Evaluates the trigonometric sum at arbitrary points (flat list, stride
    /// `dim`). Returns component-major values, `P` per component.
    pub fn evaluate(&self, points: &[f64]) -> Result<Vec<f64>> {
        let dim = self.spec.dim();
        if !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "point list length {} is not a multiple of the dimension {dim}",
                points.len()
            )));
        }
        if let Some(index) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let p = points.len() / dim;
        let comps = self.components;
        let eval_one = |x: &[f64]| -> Vec<f64> { self.evaluate_point(x) };
        let per_point: Vec<Vec<f64>> = if p * self.spec.len() > PAR_EVAL_THRESHOLD {
            points.par_chunks(dim).map(eval_one).collect()
        } else {
            points.chunks(dim).map(eval_one).collect()
        };
        let mut out = vec![0.0; p * comps];
        for (i, vals) in per_point.into_iter().enumerate() {
            for (c, v) in vals.into_iter().enumerate() {
                out[c * p + i] = v;
            }
        }
        Ok(out)
    }

    /// Evaluation at one point; returns one value per component.
    pub fn evaluate_point(&self, x: &[f64]) -> Vec<f64> {
        let n = self.spec.size();
        let len = self.spec.len();
        let w: Vec<Vec<Complex64>> = x.iter().map(|&xa| basis_weights(n, xa)).collect();
        (0..self.components)
            .map(|c| {
                let cs = &self.coeffs[c * len..(c + 1) * len];
                match self.spec.dim() {
                    1 => cs.iter().zip(&w[0]).map(|(a, b)| (a * b).re).sum(),
                    _ => {
                        let mut total = Complex64::new(0.0, 0.0);
                        for i0 in 0..n {
                            let row = &cs[i0 * n..(i0 + 1) * n];
                            let inner: Complex64 = row.iter().zip(&w[1]).map(|(a, b)| a * b).sum();
                            total += inner * w[0][i0];
                        }
                        total.re
                    }
                }
            })
            .collect()
    }
}

/// Basis values `e^{2 pi i k x}` in FFT index order; the Nyquist slot holds
/// `cos(pi N x)`, the symmetric split of `+-N/2`.
fn basis_weights(n: usize, x: f64) -> Vec<Complex64> {
    let half = n / 2;
    (0..n)
        .map(|i| {
            let k = if i <= half {
                i as i64
            } else {
                i as i64 - n as i64
            };
            let phase = (k as f64 * x).rem_euclid(1.0);
            if i == half {
                Complex64::new((2.0 * PI * phase).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, 2.0 * PI * phase)
            }
        })
        .collect()
}

fn spec_partner(spec: GridSpec, flat: usize) -> usize {
    let idx = spec.multi_index(flat);
    let n = spec.size();
    let mut p = [0usize; MAX_DIM];
    for axis in 0..spec.dim() {
        p[axis] = (n - idx[axis]) % n;
    }
    spec.flat_index(p)
}

fn for_each_product(options: &[Vec<(i64, f64)>], mut f: impl FnMut(&[i64], f64)) {
    let mut freqs = vec![0i64; options.len()];
    fn rec(
        options: &[Vec<(i64, f64)>],
        axis: usize,
        freqs: &mut Vec<i64>,
        weight: f64,
        f: &mut impl FnMut(&[i64], f64),
    ) {
        if axis == options.len() {
            f(freqs, weight);
            return;
        }
        for &(k, w) in &options[axis] {
            freqs[axis] = k;
            rec(options, axis + 1, freqs, weight * w, f);
        }
    }
    rec(options, 0, &mut freqs, 1.0, &mut f);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::new(1, n).unwrap()
    }

    #[test]
    fn constant_has_only_mean_mode() {
        let s = Spectrum::from_fn(grid1(16), |_| 1.0).unwrap();
        assert!((s.coeff(0, &[0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let rest: f64 = s.coeffs().iter().skip(1).map(|c| c.norm()).sum();
        assert!(rest < 1e-15);
    }

    #[test]
    fn sine_coefficients() {
        let s = Spectrum::from_fn(grid1(16), |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert!((s.coeff(0, &[1]) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((s.coeff(0, &[-1]) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let others: f64 = (0..16)
            .filter(|&i| i != 1 && i != 15)
            .map(|i| s.coeffs()[i].norm())
            .sum();
        assert!(others < 1e-14);
    }

    #[test]
    fn evaluate_at_quarter() {
        let s = Spectrum::from_fn(grid1(16), |x| (2.0 * PI * x[0]).sin()).unwrap();
        let v = s.evaluate(&[0.25]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14);
        let c = Spectrum::from_fn(grid1(16), |x| (4.0 * PI * x[0]).cos()).unwrap();
        assert!(c.evaluate(&[0.125]).unwrap()[0].abs() < 1e-14);
    }

    #[test]
    fn nyquist_evaluation_is_real_cosine() {
        let g = grid1(8);
        // alternating signs: the pure Nyquist mode
        let f = GridFunction::new(
            g,
            1,
            (0..8)
                .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        )
        .unwrap();
        let s = forward_transform(&f).unwrap();
        let v = s.evaluate(&[0.0625]).unwrap()[0];
        assert!((v - (PI * 8.0 * 0.0625).cos()).abs() < 1e-14);
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid1(32);
        let s = Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let d = s.differentiate(0).unwrap().to_grid();
        let exact = GridFunction::from_fn(g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos()).unwrap();
        assert!(d.max_abs_diff(&exact).unwrap() < 1e-10);
        let c = Spectrum::from_fn(g, |_| 3.0).unwrap();
        assert!(c.differentiate(0).unwrap().max_coeff() == 0.0);
        assert!(s.differentiate(1).is_err());
    }

    #[test]
    fn mixed_derivative_on_torus2() {
        let g = GridSpec::new(2, 16).unwrap();
        let s =
            Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()).unwrap();
        let d = s.derivative(&[1, 1]).unwrap().to_grid();
        let exact = GridFunction::from_fn(g, |x| {
            4.0 * PI * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
        })
        .unwrap();
        assert!(d.max_abs_diff(&exact).unwrap() < 1e-10);
        let dxy = s.differentiate(0).unwrap().differentiate(1).unwrap();
        let dyx = s.differentiate(1).unwrap().differentiate(0).unwrap();
        assert!(dxy.sub(&dyx).unwrap().max_coeff() < 1e-10);
    }

    #[test]
    fn sharp_truncation() {
        let g = grid1(32);
        let low = Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let kept = low.fourier_truncate(4.0, Truncation::Sharp).unwrap();
        assert!(kept.sub(&low).unwrap().max_coeff() < 1e-15);
        let high = Spectrum::from_fn(g, |x| (18.0 * PI * x[0]).cos()).unwrap();
        assert!(
            high.fourier_truncate(4.0, Truncation::Sharp)
                .unwrap()
                .max_coeff()
                < 1e-15
        );
        assert!(high.fourier_truncate(17.0, Truncation::Sharp).is_err());
    }

    #[test]
    fn smooth_profile_shape() {
        assert_eq!(cutoff_profile(0.3), 1.0);
        assert_eq!(cutoff_profile(2.5), 0.0);
        assert!((cutoff_profile(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = cutoff_profile(1.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn resample_round_trip_keeps_nyquist() {
        let g = grid1(8);
        let f = GridFunction::new(g, 1, vec![0.3, -1.0, 2.0, 0.5, 0.0, 1.5, -0.7, 0.2]).unwrap();
        let s = forward_transform(&f).unwrap();
        let back = s.resample(32).unwrap().resample(8).unwrap();
        assert!(back.sub(&s).unwrap().max_coeff() < 1e-15);
        let fine = s.refined_grid(4).unwrap();
        for j in 0..8 {
            assert!((fine.value(4 * j, 0) - f.value(j, 0)).abs() < 1e-14);
        }
    }
}
