//! Uniform periodic grids, scalar and kinetic fields, and the discrete
//! operators acting on them.
//!
//! Spatial nodes sit at `x_i = -L/2 + i dx` on each axis (two-dimensional
//! nodes are flattened as `i0 * n_x + i1`). The internal variable uses cell
//! centres `z_j = (j + 1/2) dz` on `[0, Z_w]`. Kinetic fields store the `z`
//! column of each spatial node contiguously.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{smoothed_switch, ModelParams};
use crate::spectral::{self, PeriodicBox, Weight};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    dim_x: usize,
    n_x: usize,
    length_x: f64,
    n_z: usize,
    z_w: f64,
}

impl PeriodicGrid {
    pub fn new(dim_x: usize, n_x: usize, length_x: f64, n_z: usize, z_w: f64) -> Result<Self> {
        if !(dim_x == 1 || dim_x == 2) {
            return Err(Error::ParameterDomain(format!("dim_x must be 1 or 2, got {dim_x}")));
        }
        for (name, n) in [("n_x", n_x), ("n_z", n_z)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::ParameterDomain(format!("{name} must be even and at least 8, got {n}")));
            }
        }
        if !(length_x > 0.0 && z_w > 0.0) {
            return Err(Error::ParameterDomain("grid lengths must be positive".into()));
        }
        Ok(Self {
            dim_x,
            n_x,
            length_x,
            n_z,
            z_w,
        })
    }

    /// `n_x` nodes per axis on `[-pi, pi)^dim_x`.
    pub fn torus(dim_x: usize, n_x: usize, n_z: usize, z_w: f64) -> Result<Self> {
        Self::new(dim_x, n_x, 2.0 * PI, n_z, z_w)
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn n_z(&self) -> usize {
        self.n_z
    }
    pub fn length_x(&self) -> f64 {
        self.length_x
    }
    pub fn z_w(&self) -> f64 {
        self.z_w
    }
    pub fn dx(&self) -> f64 {
        self.length_x / self.n_x as f64
    }
    pub fn dz(&self) -> f64 {
        self.z_w / self.n_z as f64
    }

    /// Number of spatial nodes.
    pub fn n_nodes(&self) -> usize {
        self.n_x.pow(self.dim_x as u32)
    }

    /// Measure of one spatial cell.
    pub fn cell_x(&self) -> f64 {
        self.dx().powi(self.dim_x as i32)
    }

    /// Measure of the spatial domain.
    pub fn volume_x(&self) -> f64 {
        self.length_x.powi(self.dim_x as i32)
    }

    /// Coordinates of spatial node `node` (second entry is 0 in 1D).
    pub fn x(&self, node: usize) -> [f64; 2] {
        let x0 = -0.5 * self.length_x;
        if self.dim_x == 1 {
            [x0 + node as f64 * self.dx(), 0.0]
        } else {
            let (i0, i1) = (node / self.n_x, node % self.n_x);
            [x0 + i0 as f64 * self.dx(), x0 + i1 as f64 * self.dx()]
        }
    }

    pub fn z(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dz()
    }

    pub fn z_nodes(&self) -> Vec<f64> {
        (0..self.n_z).map(|j| self.z(j)).collect()
    }

    pub(crate) fn x_layout(&self) -> PeriodicBox {
        PeriodicBox {
            shape: vec![self.n_x; self.dim_x],
            lengths: vec![self.length_x; self.dim_x],
        }
    }

    pub(crate) fn kinetic_layout(&self) -> PeriodicBox {
        let mut layout = self.x_layout();
        layout.shape.push(self.n_z);
        layout.lengths.push(self.z_w);
        layout
    }

    /// Second-order periodic Laplacian over `x`, applied to every one of the
    /// `block` contiguous values attached to each spatial node.
    fn laplacian_blocks(&self, src: &[f64], dst: &mut [f64], block: usize) {
        let n = self.n_x;
        let inv = 1.0 / (self.dx() * self.dx());
        let up = |i: usize| if i + 1 == n { 0 } else { i + 1 };
        let down = |i: usize| if i == 0 { n - 1 } else { i - 1 };
        match self.dim_x {
            1 => {
                for i in 0..n {
                    let (c, l, r) = (i * block, down(i) * block, up(i) * block);
                    for k in 0..block {
                        dst[c + k] = (src[l + k] - 2.0 * src[c + k] + src[r + k]) * inv;
                    }
                }
            }
            _ => {
                for i0 in 0..n {
                    for i1 in 0..n {
                        let c = (i0 * n + i1) * block;
                        let w = (down(i0) * n + i1) * block;
                        let e = (up(i0) * n + i1) * block;
                        let s = (i0 * n + down(i1)) * block;
                        let nn = (i0 * n + up(i1)) * block;
                        for k in 0..block {
                            dst[c + k] = (src[w + k] + src[e + k] - 4.0 * src[c + k] + src[s + k] + src[nn + k]) * inv;
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn laplacian_scalar(&self, src: &[f64], dst: &mut [f64]) {
        self.laplacian_blocks(src, dst, 1);
    }

    pub(crate) fn laplacian_kinetic(&self, src: &[f64], dst: &mut [f64]) {
        self.laplacian_blocks(src, dst, self.n_z);
    }
}

/// Flux through a face where the speed may jump: `v_l` is the speed seen
/// from the lower cell, `v_r` from the upper cell.
#[inline]
pub(crate) fn upwind_face_flux(v_l: f64, v_r: f64, rho_l: f64, rho_r: f64) -> f64 {
    if v_l >= 0.0 && v_r >= 0.0 {
        v_l * rho_l
    } else if v_l <= 0.0 && v_r <= 0.0 {
        v_r * rho_r
    } else if v_l <= 0.0 {
        // diverging characteristics
        0.0
    } else {
        v_l * rho_l + v_r * rho_r
    }
}

/// Conservative upwind divergence `(1/eps) d_z(g rho)` of one `z` column for
/// the affine speed `g(z) = k_V (level - z)`.
///
/// Interior faces use the exact face speed (the mean of the adjacent node
/// speeds). At the periodic seam the speed seen from below is
/// `k_V (level - Z_w) <= 0` and from above `k_V level >= 0`, so the seam
/// carries no flux whenever `level` lies in `[0, Z_w]`.
pub(crate) fn z_flux_column(column: &[f64], level: f64, k_v: f64, eps: f64, dz: f64, out: &mut [f64]) {
    let n = column.len();
    let z_w = n as f64 * dz;
    let scale = 1.0 / (eps * dz);
    let seam = upwind_face_flux(k_v * (level - z_w), k_v * level, column[n - 1], column[0]);
    let mut lower = seam;
    for j in 0..n {
        let upper = if j + 1 == n {
            seam
        } else {
            let v = k_v * (level - (j + 1) as f64 * dz);
            upwind_face_flux(v, v, column[j], column[j + 1])
        };
        out[j] = (upper - lower) * scale;
        lower = upper;
    }
}

/// Field over the spatial nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub(crate) fn new_unchecked(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch(format!(
                "scalar field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|i| f(grid.x(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn laplacian(&self) -> ScalarField {
        let mut out = vec![0.0; self.values.len()];
        self.grid.laplacian_scalar(&self.values, &mut out);
        Self {
            grid: self.grid,
            values: out,
        }
    }

    /// Midpoint-rule integral over the spatial domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_x()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum_{|k|<=s} ||w^{1/2} d^k f||^2` with an optional weight per node.
    pub fn sobolev_norm_sq(&self, s: u32, weight: Option<&[f64]>) -> f64 {
        let w = weight.map_or(Weight::None, Weight::Pointwise);
        spectral::sobolev_sum(&self.values, &self.grid.x_layout(), s as usize, 0, w)
    }

    /// `|| grad f ||^2` in the (optionally weighted) `H^s` norm.
    pub fn grad_sobolev_norm_sq(&self, s: u32, weight: Option<&[f64]>) -> f64 {
        let w = weight.map_or(Weight::None, Weight::Pointwise);
        spectral::sobolev_sum(&self.values, &self.grid.x_layout(), s as usize, self.grid.dim_x, w)
    }

    /// Amplitude of the `|m|` Fourier shell.
    pub fn mode_amplitude(&self, m: u32) -> f64 {
        let layout = self.grid.x_layout();
        let spectrum = spectral::forward(&self.values, &layout.shape);
        spectral::shell_amplitude(&spectrum, &layout, m)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Field over spatial nodes times `z` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl KineticField {
    pub(crate) fn new_unchecked(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_nodes() * grid.n_z;
        if values.len() != expected {
            return Err(Error::GridMismatch(format!(
                "kinetic field has {} values, grid needs {expected}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_nodes() * grid.n_z],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_nodes() * grid.n_z);
        for node in 0..grid.n_nodes() {
            let x = grid.x(node);
            for j in 0..grid.n_z {
                values.push(f(x, grid.z(j)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The `z` column at spatial node `node`.
    pub fn column(&self, node: usize) -> &[f64] {
        let n_z = self.grid.n_z;
        &self.values[node * n_z..(node + 1) * n_z]
    }

    /// Laplacian in `x` at every `z` cell.
    pub fn laplacian(&self) -> KineticField {
        let mut out = vec![0.0; self.values.len()];
        self.grid.laplacian_kinetic(&self.values, &mut out);
        Self {
            grid: self.grid,
            values: out,
        }
    }

    /// `dz * sum_j rho(x, z_j)`.
    pub fn integrate_z(&self) -> ScalarField {
        let dz = self.grid.dz();
        let values = self.values.chunks(self.grid.n_z).map(|c| c.iter().sum::<f64>() * dz).collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    /// Integral over `x` and `z`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_x() * self.grid.dz()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sum_{|k|+l<=s} ||D^{1/2}(z) d_z^l d_x^k rho||^2`; `weight` holds one
    /// value per `z` cell.
    pub fn sobolev_norm_sq(&self, s: u32, weight: Option<&[f64]>) -> f64 {
        let w = weight.map_or(Weight::None, Weight::LastAxis);
        spectral::sobolev_sum(&self.values, &self.grid.kinetic_layout(), s as usize, 0, w)
    }

    /// `|| grad_x rho ||^2` in the (optionally `z`-weighted) `H^s_{x,z}` norm.
    pub fn grad_sobolev_norm_sq(&self, s: u32, weight: Option<&[f64]>) -> f64 {
        let w = weight.map_or(Weight::None, Weight::LastAxis);
        spectral::sobolev_sum(&self.values, &self.grid.kinetic_layout(), s as usize, self.grid.dim_x, w)
    }
}

/// Upwind discretization of `(1/eps) d_z(g(z, h) rho)`; the kinetic
/// right-hand side subtracts it. Column sums over `z` vanish.
pub fn z_flux_divergence(rho: &KineticField, h: &ScalarField, params: &ModelParams, eps: f64) -> Result<KineticField> {
    if rho.grid != h.grid {
        return Err(Error::GridMismatch("rho and h live on different grids".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::ParameterDomain(format!("eps must be positive, got {eps}")));
    }
    let grid = rho.grid;
    let n_z = grid.n_z;
    let dz = grid.dz();
    let mut out = vec![0.0; rho.values.len()];
    for (node, &hv) in h.values.iter().enumerate() {
        let level = smoothed_switch(hv, params);
        let range = node * n_z..(node + 1) * n_z;
        z_flux_column(&rho.values[range.clone()], level, params.k_v, eps, dz, &mut out[range]);
    }
    Ok(KineticField { grid, values: out })
}

/// Plain-text snapshot: a header line followed by one line per field.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dim_x: usize,
    pub n_x: usize,
    /// `0` for macroscopic snapshots.
    pub n_z: usize,
    pub t: f64,
    pub fields: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# stripe-lab snapshot v1; dim_x={}; n_x={}; n_z={}; t={:.16e}",
            self.dim_x, self.n_x, self.n_z, self.t
        )?;
        for field in &self.fields {
            let mut first = true;
            for v in field {
                if !first {
                    w.write_all(b" ")?;
                }
                write!(w, "{v:.16e}")?;
                first = false;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Snapshot("empty snapshot".into()))??;
        let body = header
            .strip_prefix("# stripe-lab snapshot v1;")
            .ok_or_else(|| Error::Snapshot(format!("unrecognized header: {header}")))?;
        let mut dim_x = None;
        let mut n_x = None;
        let mut n_z = None;
        let mut t = None;
        for part in body.split(';') {
            let (key, value) = part
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Snapshot(format!("malformed header entry '{part}'")))?;
            let bad = |_| Error::Snapshot(format!("bad value for {key}: {value}"));
            match key {
                "dim_x" => dim_x = Some(value.parse::<usize>().map_err(bad)?),
                "n_x" => n_x = Some(value.parse::<usize>().map_err(bad)?),
                "n_z" => n_z = Some(value.parse::<usize>().map_err(bad)?),
                "t" => t = Some(value.parse::<f64>().map_err(|_| Error::Snapshot(format!("bad time {value}")))?),
                other => return Err(Error::Snapshot(format!("unknown header key {other}"))),
            }
        }
        let missing = |k: &str| Error::Snapshot(format!("header lacks {k}"));
        let mut fields = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let field = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| Error::Snapshot(format!("bad value {v}"))))
                .collect::<Result<Vec<_>>>()?;
            fields.push(field);
        }
        Ok(Self {
            dim_x: dim_x.ok_or_else(|| missing("dim_x"))?,
            n_x: n_x.ok_or_else(|| missing("n_x"))?,
            n_z: n_z.ok_or_else(|| missing("n_z"))?,
            t: t.ok_or_else(|| missing("t"))?,
            fields,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(n_x: usize) -> PeriodicGrid {
        PeriodicGrid::torus(1, n_x, 16, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::torus(3, 16, 16, 1.0).is_err());
        assert!(PeriodicGrid::torus(1, 7, 16, 1.0).is_err());
        assert!(PeriodicGrid::torus(1, 16, 10, 1.0).is_ok());
        assert!(PeriodicGrid::torus(1, 16, 9, 1.0).is_err());
        let g = grid1(64);
        assert!((g.dx() - 2.0 * PI / 64.0).abs() < 1e-15);
        assert!((g.dz() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        for dim in [1, 2] {
            let g = PeriodicGrid::torus(dim, 16, 8, 1.0).unwrap();
            let f = ScalarField::constant(g, 3.7);
            assert!(f.laplacian().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn laplacian_of_sine_matches_truncation_oracle() {
        let g = grid1(128);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let lap = f.laplacian();
        let dx = g.dx();
        let symbol = (2.0 / (dx * dx)) * (dx.cos() - 1.0);
        let mut max_err = 0.0f64;
        for (i, &v) in lap.values().iter().enumerate() {
            let x = g.x(i)[0];
            max_err = max_err.max((v + x.sin()).abs());
            assert!((v - symbol * x.sin()).abs() < 1e-12);
        }
        assert!(max_err < 4e-4, "max error {max_err}");
    }

    #[test]
    fn laplacian_telescopes() {
        let g = PeriodicGrid::torus(2, 16, 8, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = ScalarField::new(g, (0..g.n_nodes()).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let norm = f.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        let sum: f64 = f.laplacian().values().iter().sum();
        assert!(sum.abs() <= 1e-13 * norm * (1.0 / (g.dx() * g.dx())));
    }

    #[test]
    fn z_flux_conserves_columns() {
        let g = PeriodicGrid::torus(1, 8, 32, 1.0).unwrap();
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = KineticField::new(g, (0..g.n_nodes() * 32).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let h = ScalarField::new(g, (0..8).map(|i| 0.25 * i as f64).collect()).unwrap();
        let div = z_flux_divergence(&rho, &h, &p, 0.3).unwrap();
        let norm = rho.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
        for node in 0..g.n_nodes() {
            let s: f64 = div.column(node).iter().sum();
            assert!(s.abs() <= 1e-13 * norm / (0.3 * g.dz()), "column {node}: {s}");
        }
        let zero = KineticField::zeros(g);
        assert!(z_flux_divergence(&zero, &h, &p, 1.0).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seam_flux_vanishes() {
        for level in [0.0, 0.3, 1.0] {
            assert_eq!(upwind_face_flux(2.0 * (level - 1.0), 2.0 * level, 5.0, 7.0), 0.0);
        }
    }

    #[test]
    fn integrate_z_examples() {
        let g = PeriodicGrid::torus(1, 8, 16, 2.0).unwrap();
        let c = KineticField::constant(g, 1.5);
        for v in c.integrate_z().values() {
            assert!((v - 3.0).abs() < 1e-14);
        }
        let sep = KineticField::from_fn(g, |x, z| (1.0 + x[0].cos()) * z * z);
        let gz: f64 = g.z_nodes().iter().map(|z| z * z).sum::<f64>() * g.dz();
        for (i, v) in sep.integrate_z().values().iter().enumerate() {
            let fx = 1.0 + g.x(i)[0].cos();
            assert!((v - fx * gz).abs() < 1e-13);
        }
    }

    #[test]
    fn sobolev_examples() {
        let g = grid1(64);
        let c = ScalarField::constant(g, 2.0);
        assert!((c.sobolev_norm_sq(3, None) - 4.0 * 2.0 * PI).abs() < 1e-10);
        let s = ScalarField::from_fn(g, |x| x[0].sin());
        assert!((s.sobolev_norm_sq(0, None) - PI).abs() < 1e-10);
        assert!((s.sobolev_norm_sq(1, None) - 2.0 * PI).abs() < 1e-10);
        assert!((s.sobolev_norm_sq(2, None) - 3.0 * PI).abs() < 1e-10);
        assert!((s.grad_sobolev_norm_sq(3, None) - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn snapshot_roundtrip() {
        let snap = Snapshot {
            dim_x: 1,
            n_x: 8,
            n_z: 0,
            t: 0.1,
            fields: vec![vec![1.0 / 3.0, -2e-300, 5.0], vec![PI]],
        };
        let mut buf = Vec::new();
        snap.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# stripe-lab snapshot v1; dim_x=1; n_x=8; n_z=0; t="));
        let back = Snapshot::read(&buf[..]).unwrap();
        assert_eq!(back, snap);
        assert!(Snapshot::read(&b"garbage\n"[..]).is_err());
    }
}
