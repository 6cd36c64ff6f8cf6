//! Fourier machinery on periodic boxes: n-dimensional FFTs, Sobolev sums via
//! Fourier multipliers, and mode amplitudes.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Axis layout of a periodic array stored row-major (last axis fastest).
#[derive(Debug, Clone)]
pub struct PeriodicBox {
    pub shape: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl PeriodicBox {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for a in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }

    /// Signed integer frequency of index `i` on an axis of `n` points; the
    /// Nyquist index maps to `-n/2`.
    pub fn frequency(i: usize, n: usize) -> i64 {
        if i < n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Angular wavenumber of index `i` along `axis`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * Self::frequency(i, self.shape[axis]) as f64 / self.lengths[axis]
    }
}

/// In-place unnormalized FFT over every axis.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total);
    let mut stride = total;
    for &n in shape {
        stride /= n;
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let block = n * stride;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for outer in 0..total / block {
            for inner in 0..stride {
                let base = outer * block + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

pub fn forward(values: &[f64], shape: &[usize]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, shape, false);
    data
}

/// Multi-indices `alpha` with `|alpha| <= s` over `n_axes` axes.
fn multi_indices(n_axes: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0; n_axes];
    fn rec(axis: usize, budget: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if axis == current.len() {
            out.push(current.clone());
            return;
        }
        for k in 0..=budget {
            current[axis] = k;
            rec(axis + 1, budget - k, current, out);
        }
        current[axis] = 0;
    }
    rec(0, s, &mut current, &mut out);
    out
}

/// Which pointwise weight enters a weighted Sobolev sum.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    None,
    /// One weight per point of the full array.
    Pointwise(&'a [f64]),
    /// Weight depends only on the last axis.
    LastAxis(&'a [f64]),
}

/// Sum over multi-indices `|alpha| <= s` of `|| w^{1/2} d^alpha f ||^2`, with
/// derivatives as exact Fourier multipliers. When `gradient_axes > 0`, each
/// term additionally carries one first derivative along each of the leading
/// `gradient_axes` axes, summed (i.e. the norm of the gradient).
pub fn sobolev_sum(values: &[f64], layout: &PeriodicBox, s: usize, gradient_axes: usize, weight: Weight<'_>) -> f64 {
    let shape = &layout.shape;
    let n_axes = shape.len();
    let total = layout.len();
    assert_eq!(values.len(), total);
    let spectrum = forward(values, shape);
    let cell = layout.volume() / total as f64;
    let indices = multi_indices(n_axes, s);
    let strides = layout.strides();
    let wave = |flat: usize, axis: usize| layout.wavenumber(axis, (flat / strides[axis]) % shape[axis]);

    let gradient_dirs: Vec<Option<usize>> = if gradient_axes == 0 {
        vec![None]
    } else {
        (0..gradient_axes).map(Some).collect()
    };

    match weight {
        Weight::None => {
            // Parseval: ||f||^2 = cell / N * sum |f_hat|^2
            let mut sum = 0.0;
            for (flat, c) in spectrum.iter().enumerate() {
                let k2: Vec<f64> = (0..n_axes).map(|a| wave(flat, a).powi(2)).collect();
                let mut multiplier = 0.0;
                for alpha in &indices {
                    let mut m = 1.0;
                    for (a, &p) in alpha.iter().enumerate() {
                        m *= k2[a].powi(p as i32);
                    }
                    multiplier += m;
                }
                if gradient_axes > 0 {
                    multiplier *= k2[..gradient_axes].iter().sum::<f64>();
                }
                sum += multiplier * c.norm_sqr();
            }
            sum * cell / total as f64
        }
        Weight::Pointwise(_) | Weight::LastAxis(_) => {
            let mut sum = 0.0;
            let mut work = vec![Complex64::new(0.0, 0.0); total];
            for alpha in &indices {
                for dir in &gradient_dirs {
                    for (flat, slot) in work.iter_mut().enumerate() {
                        let mut factor = Complex64::new(1.0, 0.0);
                        for (a, &p) in alpha.iter().enumerate() {
                            let orders = p + usize::from(*dir == Some(a));
                            if orders > 0 {
                                let k = wave(flat, a);
                                factor *= Complex64::new(0.0, k).powu(orders as u32);
                            }
                        }
                        *slot = spectrum[flat] * factor;
                    }
                    fft_nd(&mut work, shape, true);
                    let last = shape[n_axes - 1];
                    for (flat, v) in work.iter().enumerate() {
                        let d = v.re / total as f64;
                        let w = match weight {
                            Weight::Pointwise(w) => w[flat],
                            Weight::LastAxis(w) => w[flat % last],
                            Weight::None => 1.0,
                        };
                        sum += w * d * d;
                    }
                }
            }
            sum * cell
        }
    }
}

/// Amplitude of the `|k| = m` shell of a field on the periodic box, scaled
/// so that `A cos(m x_0)` reports `A` (and the mean for `m = 0`).
pub fn shell_amplitude(spectrum: &[Complex64], layout: &PeriodicBox, m: u32) -> f64 {
    let shape = &layout.shape;
    let strides = layout.strides();
    let total = layout.len() as f64;
    let target = (m as i64) * (m as i64);
    let mut power = 0.0;
    for (flat, c) in spectrum.iter().enumerate() {
        let mut k2 = 0i64;
        for a in 0..shape.len() {
            let f = PeriodicBox::frequency((flat / strides[a]) % shape[a], shape[a]);
            k2 += f * f;
        }
        if k2 == target {
            power += c.norm_sqr();
        }
    }
    if m == 0 {
        power.sqrt() / total
    } else {
        (2.0 * power).sqrt() / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(n: usize) -> PeriodicBox {
        PeriodicBox {
            shape: vec![n],
            lengths: vec![2.0 * PI],
        }
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }

    #[test]
    fn roundtrip_fft() {
        let shape = [4, 6];
        let values: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut data = forward(&values, &shape);
        fft_nd(&mut data, &shape, true);
        for (v, d) in values.iter().zip(&data) {
            assert!((d.re / 24.0 - v).abs() < 1e-14);
        }
    }

    #[test]
    fn weighted_matches_unweighted_for_unit_weight() {
        let n = 32;
        let layout = line(n);
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 * 2.0 * PI / n as f64;
                (2.0 * x).cos() + 0.3 * (5.0 * x).sin()
            })
            .collect();
        let ones = vec![1.0; n];
        for s in 0..4 {
            for g in 0..2 {
                let a = sobolev_sum(&values, &layout, s, g, Weight::None);
                let b = sobolev_sum(&values, &layout, s, g, Weight::Pointwise(&ones));
                assert!((a - b).abs() < 1e-9 * a.max(1.0), "s={s} g={g}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn shell_amplitude_of_cosine() {
        let n = 16;
        let layout = line(n);
        let values: Vec<f64> = (0..n).map(|i| 0.5 + 2.0 * (3.0 * i as f64 * 2.0 * PI / n as f64 + 0.4).cos()).collect();
        let spec = forward(&values, &layout.shape);
        assert!((shell_amplitude(&spec, &layout, 3) - 2.0).abs() < 1e-13);
        assert!((shell_amplitude(&spec, &layout, 0) - 0.5).abs() < 1e-13);
        assert!(shell_amplitude(&spec, &layout, 2) < 1e-13);
    }
}
