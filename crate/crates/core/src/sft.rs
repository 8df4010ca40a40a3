//! Twisted convolution and the normalised Strichartz Fourier transform on a
//! periodic grid.
//!
//! The forward transform factors into a DFT along the central axis and, for
//! every fan point `(k, lambda_j)`, a twisted convolution
//! `phi_{k,lambda} *_lambda F_lambda` on the spatial grid:
//!
//! ```text
//! F_lambda(z)  = dt * sum_t f(z,t) e^{-i lambda t}
//! Ff(k,j,w)    = c_{n,k} dV_z sum_z phi_{k,lambda}(w - z) e^{-(i/2) lambda Im(z w̄)} F_lambda(z)
//! ```
//!
//! The inverse synthesises
//!
//! ```text
//! f(z,t) = sum_{k,j} c_{n,k} nu2(k,j) dV_z sum_w Ff(k,j,w) e^{i lambda t}
//!                    e^{-(i/2) lambda Im(w z̄)} phi_{k,lambda}(z - w)
//! ```
//!
//! Spatial differences wrap periodically; the twisting phases use the
//! centred grid coordinates. Spectral arrays are stored `[k][node][w]`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::fan::{FanGrid, MeasureKind};
use crate::hgroup::{GroupFunction, GroupGrid};
use crate::reduce::{pairwise_sum, pairwise_sum_by};
use crate::specfun::{c_norm_f64, LaguerreTable};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Samples of the normalised transform `Ff(a, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    grid: GroupGrid,
    fan: FanGrid,
    values: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn new(grid: GroupGrid, fan: FanGrid, values: Vec<Complex64>) -> Result<Self> {
        check_compatible(&grid, &fan)?;
        let want = fan.len() * grid.spatial_len();
        if values.len() != want {
            return Err(Error::DimensionMismatch(format!(
                "spectral function needs {want} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("spectral samples".into()));
        }
        Ok(Self { grid, fan, values })
    }

    pub fn zeros(grid: GroupGrid, fan: FanGrid) -> Result<Self> {
        check_compatible(&grid, &fan)?;
        let len = fan.len() * grid.spatial_len();
        Ok(Self {
            grid,
            fan,
            values: vec![ZERO; len],
        })
    }

    pub fn grid(&self) -> &GroupGrid {
        &self.grid
    }

    pub fn fan(&self) -> &FanGrid {
        &self.fan
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// The `w`-slice at fan point `(k, node)`.
    pub fn slice(&self, k: usize, node: usize) -> &[Complex64] {
        let ns = self.grid.spatial_len();
        let base = self.fan.index(k, node) * ns;
        &self.values[base..base + ns]
    }

    pub fn slice_mut(&mut self, k: usize, node: usize) -> &mut [Complex64] {
        let ns = self.grid.spatial_len();
        let base = self.fan.index(k, node) * ns;
        &mut self.values[base..base + ns]
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.fan != other.fan {
            return Err(Error::GridMismatch("spectral functions live on different grids".into()));
        }
        Ok(())
    }

    /// Multiplies each fan slice by `factor[fan index]`.
    pub fn scale_by_fan(&self, factor: &[Complex64]) -> Result<Self> {
        if factor.len() != self.fan.len() {
            return Err(Error::DimensionMismatch(format!(
                "fan factor has {} entries, fan has {}",
                factor.len(),
                self.fan.len()
            )));
        }
        let ns = self.grid.spatial_len();
        let values = self
            .values
            .chunks(ns)
            .zip(factor)
            .flat_map(|(slice, &m)| slice.iter().map(move |v| v * m))
            .collect();
        Ok(Self {
            grid: self.grid,
            fan: self.fan.clone(),
            values,
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            fan: self.fan.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            grid: self.grid,
            fan: self.fan.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// `nu2`-weighted inner product `sum nu2(a) dV sum_w F conj(G)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        let ns = self.grid.spatial_len();
        let dv = self.grid.cell_volume_z();
        let w = self.fan.weights(MeasureKind::Nu2);
        let mut re = Vec::with_capacity(w.len());
        let mut im = Vec::with_capacity(w.len());
        for ((a, b), wt) in self.values.chunks(ns).zip(other.values.chunks(ns)).zip(&w) {
            let prods: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x * y.conj()).collect();
            let s = crate::reduce::pairwise_sum_complex(&prods) * (wt * dv);
            re.push(s.re);
            im.push(s.im);
        }
        Ok(Complex64::new(pairwise_sum(&re), pairwise_sum(&im)))
    }

    pub fn to_hsff(&self) -> Result<Vec<u8>> {
        let header = HsffHeader {
            format: "hsf-f".into(),
            version: 1,
            n: self.grid.n,
            kmax: self.fan.kmax(),
            lt: self.grid.lt,
            nt: self.grid.nt,
            lz: self.grid.lz,
            nz: self.grid.nz,
            normalization: "c_nk".into(),
        };
        container::write_framed(&header, &self.values)
    }

    pub fn from_hsff(bytes: &[u8]) -> Result<Self> {
        const FMT: &str = "HSF-F";
        let (h, payload): (HsffHeader, _) = container::split_header(bytes, FMT)?;
        if h.format != "hsf-f" || h.version != 1 || h.normalization != "c_nk" {
            return Err(Error::Format {
                format: FMT,
                detail: format!(
                    "unsupported tag {:?} version {} normalization {:?}",
                    h.format, h.version, h.normalization
                ),
            });
        }
        let wrap = |e: Error| Error::Format {
            format: FMT,
            detail: e.to_string(),
        };
        let grid = GroupGrid::new(h.n, h.lz, h.nz, h.lt, h.nt).map_err(wrap)?;
        let fan = FanGrid::for_grid(&grid, h.kmax).map_err(wrap)?;
        let values = container::decode_complex(payload, fan.len() * grid.spatial_len(), FMT)?;
        Self::new(grid, fan, values)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HsffHeader {
    format: String,
    version: u32,
    n: usize,
    #[serde(rename = "Kmax")]
    kmax: usize,
    #[serde(rename = "Lt")]
    lt: f64,
    #[serde(rename = "Nt")]
    nt: usize,
    #[serde(rename = "Lz")]
    lz: f64,
    #[serde(rename = "Nz")]
    nz: usize,
    normalization: String,
}

fn check_compatible(grid: &GroupGrid, fan: &FanGrid) -> Result<()> {
    if fan.n() != grid.n || fan.nt() != grid.nt || fan.lt() != grid.lt {
        return Err(Error::GridMismatch(format!(
            "fan (n={}, Lt={}, Nt={}) not built from grid (n={}, Lt={}, Nt={})",
            fan.n(),
            fan.lt(),
            fan.nt(),
            grid.n,
            grid.lt,
            grid.nt
        )));
    }
    Ok(())
}

/// Spatial-grid helpers shared by every twisted sum.
#[derive(Debug, Clone)]
pub(crate) struct SpatialStencil {
    grid: GroupGrid,
    coords: Vec<f64>,
    /// `sq[(i - j) mod Nz]` = squared wrapped index difference.
    sq: Vec<usize>,
}

impl SpatialStencil {
    pub(crate) fn new(grid: GroupGrid) -> Self {
        let coords = (0..grid.nz).map(|i| grid.axis_coord(i)).collect();
        let sq = (0..grid.nz)
            .map(|d| {
                let w = grid.wrap_diff(d as isize);
                (w * w) as usize
            })
            .collect();
        Self { grid, coords, sq }
    }

    /// Largest squared-radius index `2n (Nz/2)^2`.
    pub(crate) fn max_radius_index(&self) -> usize {
        self.grid.real_axes() * (self.grid.nz / 2).pow(2)
    }

    pub(crate) fn radii2(&self) -> Vec<f64> {
        let dx2 = self.grid.dx().powi(2);
        (0..=self.max_radius_index()).map(|s| s as f64 * dx2).collect()
    }

    /// Builds `out[p] = prod_axis f(axis, i_axis(p))` in storage order.
    fn outer<T: Copy, F: Fn(usize, usize) -> T, M: Fn(T, T) -> T>(
        &self,
        one: T,
        factor: F,
        mul: M,
        out: &mut Vec<T>,
    ) {
        out.clear();
        out.push(one);
        for axis in 0..self.grid.real_axes() {
            let len = out.len();
            for i in 1..self.grid.nz {
                let f = factor(axis, i);
                for p in 0..len {
                    let v = mul(out[p], f);
                    out.push(v);
                }
            }
            let f0 = factor(axis, 0);
            for v in out.iter_mut().take(len) {
                *v = mul(*v, f0);
            }
        }
    }

    /// `out[p] = exp((i/2) lambda Im(c conj(p)))` for every grid point `p`,
    /// where `c` is the grid point with flat index `center`.
    pub(crate) fn twist_row(&self, center: usize, lambda: f64, out: &mut Vec<Complex64>) {
        let idx = self.grid.spatial_indices(center);
        let h = 0.5 * lambda;
        // Im(c p̄) = sum_d (y_c x_p - x_c y_p)
        let coef: Vec<f64> = (0..self.grid.real_axes())
            .map(|a| {
                let d = a / 2;
                if a % 2 == 0 {
                    h * self.coords[idx[2 * d + 1]]
                } else {
                    -h * self.coords[idx[2 * d]]
                }
            })
            .collect();
        self.outer(
            Complex64::new(1.0, 0.0),
            |a, i| Complex64::from_polar(1.0, coef[a] * self.coords[i]),
            |x, y| x * y,
            out,
        );
    }

    /// `out[p]` = squared-radius index of the wrapped difference `c - p`.
    pub(crate) fn radius_row(&self, center: usize, out: &mut Vec<u32>) {
        let idx = self.grid.spatial_indices(center);
        let nz = self.grid.nz;
        self.outer(
            0u32,
            |a, i| self.sq[(idx[a] + nz - i) % nz] as u32,
            |x, y| x + y,
            out,
        );
    }

    /// `out[p]` = flat index of the grid point at the wrapped difference
    /// `c - p` (the origin sits at index `Nz/2` on every axis).
    pub(crate) fn diff_row(&self, center: usize, out: &mut Vec<u32>) {
        let idx = self.grid.spatial_indices(center);
        let nz = self.grid.nz;
        let idx: Vec<usize> = idx.iter().map(|i| i + nz / 2).collect();
        let strides: Vec<usize> = (0..self.grid.real_axes()).map(|a| nz.pow(a as u32)).collect();
        self.outer(
            0u32,
            |a, i| (((idx[a] + nz - i) % nz) * strides[a]) as u32,
            |x, y| x + y,
            out,
        );
    }
}

/// `(f1 *_lambda f2)(z) = dV sum_w f1(z - w) f2(w) e^{(i/2) lambda Im(z w̄)}`
/// on the spatial grid of `grid`, with `z - w` wrapped.
pub fn twisted_convolve(
    f1: &[Complex64],
    f2: &[Complex64],
    lambda: f64,
    grid: &GroupGrid,
) -> Result<Vec<Complex64>> {
    let ns = grid.spatial_len();
    if f1.len() != ns || f2.len() != ns {
        return Err(Error::GridMismatch(format!(
            "twisted convolution on {ns} points got inputs of length {} and {}",
            f1.len(),
            f2.len()
        )));
    }
    let st = SpatialStencil::new(*grid);
    let dv = grid.cell_volume_z();
    let out = (0..ns)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(phase, diff), z| {
                st.twist_row(z, lambda, phase);
                st.diff_row(z, diff);
                let mut acc = ZERO;
                for w in 0..ns {
                    acc += f1[diff[w] as usize] * f2[w] * phase[w];
                }
                acc * dv
            },
        )
        .collect();
    Ok(out)
}

/// Precomputed tables for transforms between one grid and one fan.
pub struct TransformPlan {
    grid: GroupGrid,
    fan: FanGrid,
    stencil: SpatialStencil,
    table: LaguerreTable,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TransformPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformPlan")
            .field("grid", &self.grid)
            .field("kmax", &self.fan.kmax())
            .finish()
    }
}

impl TransformPlan {
    pub fn new(grid: GroupGrid, fan: FanGrid) -> Result<Self> {
        check_compatible(&grid, &fan)?;
        let stencil = SpatialStencil::new(grid);
        let table = LaguerreTable::build(grid.n, fan.kmax(), fan.nodes(), &stencil.radii2())?;
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(grid.nt);
        let fft_inv = planner.plan_fft_inverse(grid.nt);
        Ok(Self {
            grid,
            fan,
            stencil,
            table,
            fft_fwd,
            fft_inv,
        })
    }

    pub fn grid(&self) -> &GroupGrid {
        &self.grid
    }

    pub fn fan(&self) -> &FanGrid {
        &self.fan
    }

    pub(crate) fn stencil(&self) -> &SpatialStencil {
        &self.stencil
    }

    pub(crate) fn table(&self) -> &LaguerreTable {
        &self.table
    }

    /// `F_lambda(z) = dt sum_t f(z,t) e^{-i lambda t}` for every node,
    /// laid out `[node][z]`.
    pub fn central_dft(&self, f: &GroupFunction) -> Result<Vec<Complex64>> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch("function grid differs from plan grid".into()));
        }
        let ns = self.grid.spatial_len();
        let nt = self.grid.nt;
        let nn = self.fan.n_nodes();
        let dt = self.grid.dt();
        let vals = f.values();
        let mut out = vec![ZERO; nn * ns];
        let mut buf = vec![ZERO; nt];
        for s in 0..ns {
            for (m, b) in buf.iter_mut().enumerate() {
                *b = vals[s + ns * m];
            }
            self.fft_fwd.process(&mut buf);
            for node in 0..nn {
                let j = self.fan.dft_index(node);
                let sign = if j.rem_euclid(2) == 0 { dt } else { -dt };
                out[node * ns + s] = buf[self.fan.dft_bin(node)] * sign;
            }
        }
        Ok(out)
    }

    /// `f(z, t) = sum_node H[node][z] e^{i lambda t}`.
    pub fn central_synthesis(&self, h: &[Complex64]) -> GroupFunction {
        let ns = self.grid.spatial_len();
        let nt = self.grid.nt;
        let mut out = vec![ZERO; self.grid.len()];
        let mut buf = vec![ZERO; nt];
        for s in 0..ns {
            buf.iter_mut().for_each(|b| *b = ZERO);
            for node in 0..self.fan.n_nodes() {
                let j = self.fan.dft_index(node);
                let v = h[node * ns + s];
                buf[self.fan.dft_bin(node)] = if j.rem_euclid(2) == 0 { v } else { -v };
            }
            self.fft_inv.process(&mut buf);
            for (m, b) in buf.iter().enumerate() {
                out[s + ns * m] = *b;
            }
        }
        GroupFunction::from_raw(self.grid, out)
    }

    /// Spectral slices of one node from its central DFT slice; `[k][w]`.
    fn forward_node(&self, node: usize, fl: &[Complex64]) -> Vec<Complex64> {
        let ns = self.grid.spatial_len();
        let kk = self.fan.kmax() + 1;
        let lambda = self.fan.nodes()[node];
        let block = self.table.node_block(node);
        let dv = self.grid.cell_volume_z();
        let mut out = vec![ZERO; kk * ns];
        let mut phase = Vec::new();
        let mut radius = Vec::new();
        let mut acc_re = vec![0.0; kk];
        let mut acc_im = vec![0.0; kk];
        for w in 0..ns {
            self.stencil.twist_row(w, lambda, &mut phase);
            self.stencil.radius_row(w, &mut radius);
            acc_re.iter_mut().for_each(|a| *a = 0.0);
            acc_im.iter_mut().for_each(|a| *a = 0.0);
            for z in 0..ns {
                let g = fl[z] * phase[z];
                if g.re == 0.0 && g.im == 0.0 {
                    continue;
                }
                let base = radius[z] as usize * kk;
                let row = &block[base..base + kk];
                for k in 0..kk {
                    acc_re[k] += row[k] * g.re;
                    acc_im[k] += row[k] * g.im;
                }
            }
            for k in 0..kk {
                let c = c_norm_f64(self.grid.n, k) * dv;
                out[k * ns + w] = Complex64::new(acc_re[k] * c, acc_im[k] * c);
            }
        }
        out
    }

    /// Spectral slices of an already central-transformed function.
    pub fn forward_from_dft(&self, fl: &[Complex64]) -> SpectralFunction {
        let ns = self.grid.spatial_len();
        let nn = self.fan.n_nodes();
        let kk = self.fan.kmax() + 1;
        let per_node: Vec<Vec<Complex64>> = (0..nn)
            .into_par_iter()
            .map(|node| self.forward_node(node, &fl[node * ns..(node + 1) * ns]))
            .collect();
        let mut values = vec![ZERO; kk * nn * ns];
        for (node, slab) in per_node.into_iter().enumerate() {
            for k in 0..kk {
                let dst = self.fan.index(k, node) * ns;
                values[dst..dst + ns].copy_from_slice(&slab[k * ns..(k + 1) * ns]);
            }
        }
        SpectralFunction {
            grid: self.grid,
            fan: self.fan.clone(),
            values,
        }
    }

    pub fn forward(&self, f: &GroupFunction) -> Result<SpectralFunction> {
        let fl = self.central_dft(f)?;
        Ok(self.forward_from_dft(&fl))
    }

    /// Spatial synthesis of one node, before the central sum.
    fn inverse_node(&self, node: usize, spec: &SpectralFunction) -> Vec<Complex64> {
        let ns = self.grid.spatial_len();
        let kk = self.fan.kmax() + 1;
        let lambda = self.fan.nodes()[node];
        let block = self.table.node_block(node);
        let dv = self.grid.cell_volume_z();
        // gt[w][k] = alpha_k G_k(w)
        let mut gt_re = vec![0.0; ns * kk];
        let mut gt_im = vec![0.0; ns * kk];
        let mut any = false;
        for k in 0..kk {
            let alpha = c_norm_f64(self.grid.n, k) * self.fan.weight(k, node, MeasureKind::Nu2) * dv;
            for (w, v) in spec.slice(k, node).iter().enumerate() {
                gt_re[w * kk + k] = v.re * alpha;
                gt_im[w * kk + k] = v.im * alpha;
                any |= v.re != 0.0 || v.im != 0.0;
            }
        }
        let mut out = vec![ZERO; ns];
        if !any {
            return out;
        }
        let mut phase = Vec::new();
        let mut radius = Vec::new();
        for (z, o) in out.iter_mut().enumerate() {
            self.stencil.twist_row(z, lambda, &mut phase);
            self.stencil.radius_row(z, &mut radius);
            let mut acc = ZERO;
            for w in 0..ns {
                let base = radius[w] as usize * kk;
                let row = &block[base..base + kk];
                let gr = &gt_re[w * kk..(w + 1) * kk];
                let gi = &gt_im[w * kk..(w + 1) * kk];
                let mut sr = 0.0;
                let mut si = 0.0;
                for k in 0..kk {
                    sr += row[k] * gr[k];
                    si += row[k] * gi[k];
                }
                acc += phase[w] * Complex64::new(sr, si);
            }
            *o = acc;
        }
        out
    }

    pub fn inverse(&self, spec: &SpectralFunction) -> Result<GroupFunction> {
        if spec.grid != self.grid || spec.fan != self.fan {
            return Err(Error::GridMismatch("spectral function does not match plan".into()));
        }
        let ns = self.grid.spatial_len();
        let nn = self.fan.n_nodes();
        let per_node: Vec<Vec<Complex64>> = (0..nn)
            .into_par_iter()
            .map(|node| self.inverse_node(node, spec))
            .collect();
        let mut h = vec![ZERO; nn * ns];
        for (node, slab) in per_node.into_iter().enumerate() {
            h[node * ns..(node + 1) * ns].copy_from_slice(&slab);
        }
        Ok(self.central_synthesis(&h))
    }

    /// `P f = inverse(forward(f))`.
    pub fn project(&self, f: &GroupFunction) -> Result<GroupFunction> {
        self.inverse(&self.forward(f)?)
    }

    /// Residual of the reproducing identity
    /// `(2 pi)^{-n} |lambda|^n phi_{k,lambda} *_lambda F(a,.) = F(a,.)`,
    /// maximised over fan points whose slice norm exceeds
    /// `rel_floor * max slice norm` (`rel_floor = 0` keeps every nonzero
    /// slice).
    pub fn projection_residual_above(&self, spec: &SpectralFunction, rel_floor: f64) -> Result<f64> {
        if spec.grid != self.grid || spec.fan != self.fan {
            return Err(Error::GridMismatch("spectral function does not match plan".into()));
        }
        let ns = self.grid.spatial_len();
        let kk = self.fan.kmax() + 1;
        let nn = self.fan.n_nodes();
        let n = self.grid.n as i32;
        let norms: Vec<f64> = spec
            .values
            .chunks(ns)
            .map(|s| pairwise_sum_by(s, |v| v.norm_sqr()).sqrt())
            .collect();
        let max_norm = norms.iter().cloned().fold(0.0, f64::max);
        if max_norm == 0.0 {
            return Ok(0.0);
        }
        let floor = rel_floor * max_norm;
        let dv = self.grid.cell_volume_z();
        let per_node: Vec<f64> = (0..nn)
            .into_par_iter()
            .map(|node| {
                let keep: Vec<usize> = (0..kk)
                    .filter(|&k| {
                        let nrm = norms[self.fan.index(k, node)];
                        nrm > 0.0 && nrm > floor
                    })
                    .collect();
                if keep.is_empty() {
                    return 0.0;
                }
                let lambda = self.fan.nodes()[node];
                let scale = (2.0 * PI).powi(-n) * lambda.abs().powi(n) * dv;
                let block = self.table.node_block(node);
                let mut phase = Vec::new();
                let mut radius = Vec::new();
                let mut resid = vec![Vec::with_capacity(ns); keep.len()];
                for z in 0..ns {
                    self.stencil.twist_row(z, lambda, &mut phase);
                    self.stencil.radius_row(z, &mut radius);
                    for (slot, &k) in keep.iter().enumerate() {
                        let src = spec.slice(k, node);
                        let mut acc = ZERO;
                        for w in 0..ns {
                            let phi = block[radius[w] as usize * kk + k];
                            acc += phase[w] * src[w] * phi;
                        }
                        resid[slot].push(acc * scale - src[z]);
                    }
                }
                keep.iter()
                    .zip(&resid)
                    .map(|(&k, r)| {
                        pairwise_sum_by(r, |v| v.norm_sqr()).sqrt() / norms[self.fan.index(k, node)]
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(per_node.into_iter().fold(0.0, f64::max))
    }

    pub fn projection_residual(&self, spec: &SpectralFunction) -> Result<f64> {
        self.projection_residual_above(spec, 0.0)
    }
}

/// Forward transform with a one-off plan.
pub fn forward(f: &GroupFunction, fan: &FanGrid) -> Result<SpectralFunction> {
    TransformPlan::new(*f.grid(), fan.clone())?.forward(f)
}

/// Inverse transform with a one-off plan.
pub fn inverse(spec: &SpectralFunction) -> Result<GroupFunction> {
    TransformPlan::new(spec.grid, spec.fan.clone())?.inverse(spec)
}

pub fn projection_residual(spec: &SpectralFunction) -> Result<f64> {
    TransformPlan::new(spec.grid, spec.fan.clone())?.projection_residual(spec)
}

/// Inner `L^2(dw)` norms of every fan slice, squared.
fn slice_sq_norms(spec: &SpectralFunction) -> Vec<f64> {
    let ns = spec.grid.spatial_len();
    let dv = spec.grid.cell_volume_z();
    spec.values
        .chunks(ns)
        .map(|s| pairwise_sum_by(s, |v| v.norm_sqr()) * dv)
        .collect()
}

/// `(sum nu2(a) dV sum_w |F(a,w)|^2)^{1/2}`.
pub fn plancherel_norm(spec: &SpectralFunction) -> f64 {
    let w = spec.fan.weights(MeasureKind::Nu2);
    let terms: Vec<f64> = slice_sq_norms(spec).iter().zip(&w).map(|(a, b)| a * b).collect();
    pairwise_sum(&terms).sqrt()
}

/// Mixed norm
/// `( sum_a kind(a) weight(a) (dV sum_w |F(a,w)|^{p_in})^{p_out/p_in} )^{1/p_out}`,
/// `f64::INFINITY` selecting the sup on either level. `weight` is a fan
/// array in fan order.
pub fn mixed_norm(
    spec: &SpectralFunction,
    p_in: f64,
    p_out: f64,
    kind: MeasureKind,
    weight: &[f64],
) -> Result<f64> {
    if !(p_in >= 1.0) || !(p_out >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mixed-norm exponents must be >= 1, got ({p_in}, {p_out})"
        )));
    }
    if weight.len() != spec.fan.len() {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} entries, fan has {}",
            weight.len(),
            spec.fan.len()
        )));
    }
    if let Some(v) = weight.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("mixed-norm weight must be >= 0, found {v}")));
    }
    let ns = spec.grid.spatial_len();
    let dv = spec.grid.cell_volume_z();
    let inner: Vec<f64> = spec
        .values
        .chunks(ns)
        .map(|s| {
            if p_in.is_infinite() {
                s.iter().fold(0.0f64, |m, v| m.max(v.norm()))
            } else if p_in == 2.0 {
                (pairwise_sum_by(s, |v| v.norm_sqr()) * dv).sqrt()
            } else {
                (pairwise_sum_by(s, |v| v.norm().powf(p_in)) * dv).powf(1.0 / p_in)
            }
        })
        .collect();
    let kw = spec.fan.weights(kind);
    if p_out.is_infinite() {
        return Ok(inner
            .iter()
            .zip(kw.iter().zip(weight))
            .filter(|(_, (a, b))| **a * **b > 0.0)
            .fold(0.0f64, |m, (v, _)| m.max(*v)));
    }
    let terms: Vec<f64> = inner
        .iter()
        .zip(kw.iter().zip(weight))
        .map(|(v, (a, b))| if *a * *b == 0.0 { 0.0 } else { a * b * v.powf(p_out) })
        .collect();
    Ok(pairwise_sum(&terms).powf(1.0 / p_out))
}

/// Fan array `|lambda|^e`.
pub fn lambda_power_weight(fan: &FanGrid, e: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(fan.len());
    for _ in 0..=fan.kmax() {
        out.extend(fan.nodes().iter().map(|l| l.abs().powf(e)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::{FanPoint, Symbol};
    use crate::hgroup::{left_translate, lp_norm, GroupPoint};
    use crate::specfun::laguerre_fn_r2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gaussian(grid: GroupGrid, a: f64, b: f64, omega: f64) -> GroupFunction {
        GroupFunction::from_fn(grid, |z, t| {
            let r2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            Complex64::from_polar((-a * r2 - b * t * t).exp(), omega * t + 0.3 * z[0].re)
        })
        .unwrap()
    }

    /// Exhaustive double loop, written against coordinates rather than the
    /// stencil's index tables.
    fn brute_twisted(f1: &[Complex64], f2: &[Complex64], lambda: f64, g: &GroupGrid) -> Vec<Complex64> {
        let ns = g.spatial_len();
        let dv = g.cell_volume_z();
        (0..ns)
            .map(|z| {
                let zp = g.spatial_point(z);
                let mut acc = c(0.0, 0.0);
                for w in 0..ns {
                    let wp = g.spatial_point(w);
                    let di: Vec<usize> = zp
                        .iter()
                        .zip(&wp)
                        .flat_map(|(a, b)| {
                            let d = a - b;
                            [d.re, d.im].map(|x| {
                                let y = (x + g.lz).rem_euclid(2.0 * g.lz);
                                (y / g.dx()).round() as usize % g.nz
                            })
                        })
                        .collect();
                    let im: f64 = zp.iter().zip(&wp).map(|(a, b)| (a * b.conj()).im).sum();
                    acc += f1[g.spatial_flat(&di)] * f2[w] * Complex64::from_polar(1.0, 0.5 * lambda * im);
                }
                acc * dv
            })
            .collect()
    }

    #[test]
    fn twisted_matches_brute_force() {
        let g = GroupGrid::new(1, 1.5, 4, 1.0, 4).unwrap();
        let ns = g.spatial_len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut f1 = vec![c(0.0, 0.0); ns];
            let mut f2 = vec![c(0.0, 0.0); ns];
            for f in [&mut f1, &mut f2] {
                for _ in 0..2 {
                    f[rng.gen_range(0..ns)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let lambda = rng.gen_range(-3.0..3.0);
            let got = twisted_convolve(&f1, &f2, lambda, &g).unwrap();
            let want = brute_twisted(&f1, &f2, lambda, &g);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() <= 1e-13, "{a} vs {b}");
            }
        }
        let g2 = GroupGrid::new(2, 1.0, 4, 1.0, 4).unwrap();
        let f1: Vec<Complex64> = (0..g2.spatial_len()).map(|i| c((i as f64 * 0.37).sin(), 0.1)).collect();
        let f2: Vec<Complex64> = (0..g2.spatial_len()).map(|i| c(0.2, (i as f64 * 0.11).cos())).collect();
        let got = twisted_convolve(&f1, &f2, 1.3, &g2).unwrap();
        let want = brute_twisted(&f1, &f2, 1.3, &g2);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn twisted_degenerate_cases() {
        let g = GroupGrid::new(1, 2.0, 8, 1.0, 4).unwrap();
        let ns = g.spatial_len();
        let f1: Vec<Complex64> = (0..ns).map(|i| c((i as f64).sin(), (i as f64 * 0.5).cos())).collect();
        let f2: Vec<Complex64> = (0..ns).map(|i| c((i as f64 * 0.3).cos(), 0.0)).collect();
        // lambda = 0: plain periodic convolution
        let got = twisted_convolve(&f1, &f2, 0.0, &g).unwrap();
        let st = SpatialStencil::new(g);
        let mut diff = Vec::new();
        for z in 0..ns {
            st.diff_row(z, &mut diff);
            let want: Complex64 = (0..ns).map(|w| f1[diff[w] as usize] * f2[w]).sum::<Complex64>() * g.cell_volume_z();
            assert!((got[z] - want).norm() < 1e-12);
        }
        // unit-mass delta at the origin reproduces f1
        let mut delta = vec![c(0.0, 0.0); ns];
        delta[g.spatial_flat(&[4, 4])] = c(1.0 / g.cell_volume_z(), 0.0);
        let got = twisted_convolve(&f1, &delta, 2.7, &g).unwrap();
        for (a, b) in got.iter().zip(&f1) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(twisted_convolve(&f1[1..], &f2, 1.0, &g).is_err());
    }

    #[test]
    fn forward_of_delta_is_scaled_phi() {
        let g = GroupGrid::new(1, 3.0, 8, 2.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 4).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        let spec = plan.forward(&GroupFunction::delta_at_origin(g)).unwrap();
        for k in 0..=4 {
            for (node, &l) in fan.nodes().iter().enumerate() {
                for (w, v) in spec.slice(k, node).iter().enumerate() {
                    let r2 = g.spatial_point(w)[0].norm_sqr();
                    let want = laguerre_fn_r2(k, 1, l, r2).unwrap();
                    assert!((v - c(want, 0.0)).norm() < 1e-12, "k={k} node={node} w={w}: {v} vs {want}");
                }
            }
        }
    }

    #[test]
    fn forward_linear_and_zero() {
        let g = GroupGrid::new(1, 3.0, 8, 2.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 3).unwrap();
        let plan = TransformPlan::new(g, fan).unwrap();
        let f = gaussian(g, 0.5, 0.7, 1.0);
        let h = gaussian(g, 1.1, 0.4, -2.0);
        let a = c(0.3, -1.2);
        let lhs = plan.forward(&f.scale(a).add(&h).unwrap()).unwrap();
        let rhs = plan.forward(&f).unwrap().scale(a).add(&plan.forward(&h).unwrap()).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
        let zero = plan.forward(&GroupFunction::zeros(g)).unwrap();
        assert!(zero.values().iter().all(|v| v.norm() == 0.0));
        assert_eq!(plancherel_norm(&zero), 0.0);
    }

    #[test]
    fn conjugation_symmetry_for_real_input() {
        let g = GroupGrid::new(1, 3.0, 8, 2.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 3).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        let f = GroupFunction::from_fn(g, |z, t| c((-0.4 * z[0].norm_sqr() - 0.6 * (t - 0.3).powi(2)).exp() * (1.0 + z[0].re), 0.0))
            .unwrap();
        let spec = plan.forward(&f).unwrap();
        for k in 0..=3 {
            for (node, &l) in fan.nodes().iter().enumerate() {
                let Some(mirror) = fan.node_of(-l) else { continue };
                for (a, b) in spec.slice(k, node).iter().zip(spec.slice(k, mirror)) {
                    assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
                }
            }
        }
    }

    #[test]
    fn l1_to_sup_bound() {
        let g = GroupGrid::new(1, 4.0, 12, 4.0, 12).unwrap();
        let fan = FanGrid::for_grid(&g, 6).unwrap();
        let plan = TransformPlan::new(g, fan).unwrap();
        for f in [gaussian(g, 0.5, 0.5, 1.0), GroupFunction::delta_at_origin(g), gaussian(g, 2.0, 0.3, -3.0)] {
            let spec = plan.forward(&f).unwrap();
            let sup = spec.values().iter().fold(0.0f64, |m, v| m.max(v.norm()));
            let l1 = lp_norm(&f, 1.0).unwrap();
            assert!(sup <= l1 * (1.0 + 1e-12), "{sup} > {l1}");
        }
    }

    #[test]
    fn plancherel_and_mixed_norm_single_point() {
        let g = GroupGrid::new(1, 3.0, 8, 2.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 3).unwrap();
        let mut spec = SpectralFunction::zeros(g, fan.clone()).unwrap();
        let v = c(0.6, -0.8) * 3.0;
        spec.slice_mut(2, 4)[11] = v;
        let wt = fan.weight(2, 4, MeasureKind::Nu2);
        let dv = g.cell_volume_z();
        let want = v.norm() * (wt * dv).sqrt();
        assert!((plancherel_norm(&spec) - want).abs() <= 1e-14 * want);
        let ones = vec![1.0; fan.len()];
        let m = mixed_norm(&spec, 2.0, 2.0, MeasureKind::Nu2, &ones).unwrap();
        assert!((m - want).abs() <= 1e-14 * want);
        // one fan point: inner norm times (kind-weight * w)^{1/p_out}
        let w7 = vec![7.0; fan.len()];
        let m = mixed_norm(&spec, 3.0, 1.5, MeasureKind::Mu, &w7).unwrap();
        let inner = v.norm() * dv.powf(1.0 / 3.0);
        let want = inner * (fan.weight(2, 4, MeasureKind::Mu) * 7.0).powf(1.0 / 1.5);
        assert!((m - want).abs() <= 1e-13 * want);
        assert!(mixed_norm(&spec, 0.5, 2.0, MeasureKind::Mu, &ones).is_err());
        let mut neg = ones.clone();
        neg[0] = -1.0;
        assert!(mixed_norm(&spec, 2.0, 2.0, MeasureKind::Mu, &neg).is_err());
    }

    #[test]
    fn hy_weight_at_p2_is_plancherel() {
        let g = GroupGrid::new(1, 3.0, 8, 2.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 3).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        let spec = plan.forward(&gaussian(g, 0.5, 0.5, 1.0)).unwrap();
        let w = lambda_power_weight(&fan, 1.0);
        let m = mixed_norm(&spec, 2.0, 2.0, MeasureKind::Mu, &w).unwrap();
        let p = plancherel_norm(&spec);
        assert!((m - p).abs() <= 1e-12 * p);
    }

    #[test]
    fn inverse_linear_and_zero() {
        let g = GroupGrid::new(1, 3.0, 8, 2.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 3).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        let zero = SpectralFunction::zeros(g, fan.clone()).unwrap();
        assert!(plan.inverse(&zero).unwrap().values().iter().all(|v| v.norm() == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rand_spec = || {
            let vals = (0..fan.len() * g.spatial_len())
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            SpectralFunction::new(g, fan.clone(), vals).unwrap()
        };
        let f = rand_spec();
        let h = rand_spec();
        let (a, b) = (c(0.5, 2.0), c(-1.5, 0.25));
        let lhs = plan.inverse(&f.scale(a).add(&h.scale(b)).unwrap()).unwrap();
        let rhs = plan.inverse(&f).unwrap().scale(a).add(&plan.inverse(&h).unwrap().scale(b)).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn inverse_is_adjoint_of_forward() {
        // inverse is exactly the nu2-adjoint of forward
        let g = GroupGrid::new(1, 3.0, 8, 2.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 3).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        let f = gaussian(g, 0.4, 0.3, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vals = (0..fan.len() * g.spatial_len())
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let spec = SpectralFunction::new(g, fan, vals).unwrap();
        let lhs = plan.forward(&f).unwrap().inner(&spec).unwrap();
        let rhs = f.inner(&plan.inverse(&spec).unwrap()).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm(), "{lhs} vs {rhs}");
    }

    #[test]
    fn translation_covariance_on_lattice_grid() {
        let g = GroupGrid::new(1, 4.0, 8, 2.0, 8).unwrap();
        assert!(g.is_lattice_compatible());
        let fan = FanGrid::for_grid(&g, 3).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        let f = gaussian(g, 0.3, 0.5, 1.0);
        let fs = plan.forward(&f).unwrap();
        let u = GroupPoint::new(vec![c(2.0, -1.0)], 0.5);
        let ts = plan.forward(&left_translate(&f, &u).unwrap()).unwrap();
        let shift = [2usize, g.nz - 1];
        let mut worst = 0.0f64;
        for w in 0..g.spatial_len() {
            let wi = g.spatial_indices(w);
            let src = g.spatial_flat(&[(wi[0] + g.nz - shift[0]) % g.nz, (wi[1] + g.nz - shift[1]) % g.nz]);
            let wp = g.spatial_point(w);
            for k in 0..=3 {
                for (node, &l) in fan.nodes().iter().enumerate() {
                    let ph = Complex64::from_polar(1.0, -l * (u.t + 0.5 * crate::hgroup::symplectic(&u.z, &wp)));
                    let want = ph * fs.slice(k, node)[src];
                    let got = ts.slice(k, node)[w];
                    worst = worst.max((got - want).norm());
                }
            }
        }
        let scale = fs.values().iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(worst <= 1e-10 * scale, "{worst}");
    }

    #[test]
    fn single_mode_reproduces_under_refinement() {
        // the projection residual of phi_{k,lambda} at one fan point is the
        // quadrature error of phi *_lambda phi = (2pi)^n |lambda|^{-n} phi
        let resid = |nz: usize| {
            let g = GroupGrid::new(1, 6.0, nz, 8.0, 16).unwrap();
            let fan = FanGrid::for_grid(&g, 2).unwrap();
            let plan = TransformPlan::new(g, fan.clone()).unwrap();
            let mut spec = SpectralFunction::zeros(g, fan.clone()).unwrap();
            let node = fan.node_of(PI / 8.0 * 3.0).unwrap();
            let l = fan.nodes()[node];
            for (w, v) in spec.slice_mut(1, node).iter_mut().enumerate() {
                *v = c(laguerre_fn_r2(1, 1, l, g.spatial_point(w)[0].norm_sqr()).unwrap(), 0.0);
            }
            plan.projection_residual(&spec).unwrap()
        };
        let a = resid(12);
        let b = resid(24);
        assert!(b < a, "{a} -> {b}");
        assert!(b < 1e-3, "{b}");
    }

    #[test]
    fn white_noise_is_far_from_range() {
        let g = GroupGrid::new(1, 6.0, 12, 8.0, 8).unwrap();
        let fan = FanGrid::for_grid(&g, 2).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals = (0..fan.len() * g.spatial_len())
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let spec = SpectralFunction::new(g, fan, vals).unwrap();
        assert!(plan.projection_residual(&spec).unwrap() > 0.5);
    }

    #[test]
    fn hsff_roundtrip() {
        let g = GroupGrid::new(1, 3.0, 4, 2.0, 4).unwrap();
        let fan = FanGrid::for_grid(&g, 1).unwrap();
        let plan = TransformPlan::new(g, fan).unwrap();
        let spec = plan.forward(&gaussian(g, 0.5, 0.5, 1.0)).unwrap();
        let bytes = spec.to_hsff().unwrap();
        assert_eq!(SpectralFunction::from_hsff(&bytes).unwrap(), spec);
        assert!(SpectralFunction::from_hsff(&bytes[..bytes.len() - 1]).is_err());
        let _ = Symbol::indicator(spec.fan(), &FanPoint { k: 0, lambda: spec.fan().nodes()[0] }).unwrap();
    }
}
