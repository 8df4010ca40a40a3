//! Fourier multipliers `T_m` acting diagonally on the fan, and the
//! convolution-kernel representation `T_m f = f * K` with
//!
//! ```text
//! K(z, t) = (2 pi)^{-n-1} dlambda sum_j sum_k |lambda_j|^n m(k, lambda_j) phi_{k,lambda_j}(z) e^{i lambda_j t}
//! ```
//!
//! The kernel is gridded in `z` and kept as a trigonometric sum in `t`, so it
//! can be evaluated at any real central coordinate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::fan::{FanGrid, Symbol};
use crate::hgroup::{GroupFunction, GroupGrid};
use crate::sft::{SpectralFunction, TransformPlan};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Default cap on `n_nodes * (Nz^{2n})^2` for [`convolve_with_kernel`].
pub const DEFAULT_KERNEL_BUDGET: u64 = 1 << 33;

/// Multiplies every fan slice of `spec` by the symbol value there.
pub fn multiply_spectrum(m: &Symbol, spec: &SpectralFunction) -> Result<SpectralFunction> {
    let vals = m.tabulate_bounded(spec.fan())?;
    spec.scale_by_fan(&vals)
}

/// `T_m f = inverse(m * forward(f))` using a prepared plan.
pub fn apply_with_plan(plan: &TransformPlan, m: &Symbol, f: &GroupFunction) -> Result<GroupFunction> {
    let vals = m.tabulate_bounded(plan.fan())?;
    let spec = plan.forward(f)?;
    plan.inverse(&spec.scale_by_fan(&vals)?)
}

/// `T_m f = inverse(m * forward(f))`.
pub fn apply_multiplier(m: &Symbol, f: &GroupFunction, fan: &FanGrid) -> Result<GroupFunction> {
    let plan = TransformPlan::new(*f.grid(), fan.clone())?;
    apply_with_plan(&plan, m, f)
}

/// Gridded kernel coefficients of a multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    grid: GroupGrid,
    fan: FanGrid,
    symbol_id: String,
    /// `|lambda|^n m(k, lambda) phi_{k,lambda}(z)` in `(k, node, z)` order.
    coefficients: Vec<Complex64>,
    /// Sum over `k` of the coefficients, `(node, z)` order.
    per_node: Vec<Complex64>,
}

impl Kernel {
    pub fn grid(&self) -> &GroupGrid {
        &self.grid
    }

    pub fn fan(&self) -> &FanGrid {
        &self.fan
    }

    pub fn symbol_id(&self) -> &str {
        &self.symbol_id
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// `(2 pi)^{-n-1} dlambda`.
    pub fn prefactor(&self) -> f64 {
        (2.0 * PI).powi(-(self.grid.n as i32) - 1) * self.fan.dlambda()
    }

    /// `K(z_s, t)` at the spatial grid point with flat index `s`.
    pub fn eval_index(&self, s: usize, t: f64) -> Result<Complex64> {
        let ns = self.grid.spatial_len();
        if s >= ns {
            return Err(Error::InvalidArgument(format!("spatial index {s} outside grid of {ns} points")));
        }
        let mut acc = ZERO;
        for (node, &l) in self.fan.nodes().iter().enumerate() {
            acc += self.per_node[node * ns + s] * Complex64::from_polar(1.0, l * t);
        }
        Ok(acc * self.prefactor())
    }

    pub fn to_hsfk(&self) -> Result<Vec<u8>> {
        let header = HsfkHeader {
            format: "hsf-k".into(),
            version: 1,
            n: self.grid.n,
            kmax: self.fan.kmax(),
            lt: self.grid.lt,
            nt: self.grid.nt,
            lz: self.grid.lz,
            nz: self.grid.nz,
            dlambda: self.fan.dlambda(),
            prefactor: self.prefactor(),
            symbol: self.symbol_id.clone(),
            order: "k,lambda,z".into(),
        };
        container::write_framed(&header, &self.coefficients)
    }

    pub fn from_hsfk(bytes: &[u8]) -> Result<Self> {
        const FMT: &str = "HSF-K";
        let (h, payload): (HsfkHeader, _) = container::split_header(bytes, FMT)?;
        if h.format != "hsf-k" || h.version != 1 {
            return Err(Error::Format {
                format: FMT,
                detail: format!("unsupported tag {:?} version {}", h.format, h.version),
            });
        }
        let wrap = |e: Error| Error::Format {
            format: FMT,
            detail: e.to_string(),
        };
        let grid = GroupGrid::new(h.n, h.lz, h.nz, h.lt, h.nt).map_err(wrap)?;
        let fan = FanGrid::for_grid(&grid, h.kmax).map_err(wrap)?;
        let ns = grid.spatial_len();
        let coefficients = container::decode_complex(payload, fan.len() * ns, FMT)?;
        if coefficients.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("kernel coefficients".into()));
        }
        let per_node = sum_over_k(&fan, ns, &coefficients);
        Ok(Self {
            grid,
            fan,
            symbol_id: h.symbol,
            coefficients,
            per_node,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HsfkHeader {
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
    dlambda: f64,
    prefactor: f64,
    symbol: String,
    order: String,
}

fn sum_over_k(fan: &FanGrid, ns: usize, coefficients: &[Complex64]) -> Vec<Complex64> {
    let nn = fan.n_nodes();
    let mut out = vec![ZERO; nn * ns];
    for k in 0..=fan.kmax() {
        for node in 0..nn {
            let src = &coefficients[fan.index(k, node) * ns..][..ns];
            for (o, v) in out[node * ns..(node + 1) * ns].iter_mut().zip(src) {
                *o += v;
            }
        }
    }
    out
}

/// Tabulates the kernel of `m` on the spatial grid of `grid`.
pub fn kernel_coefficients(m: &Symbol, grid: &GroupGrid, fan: &FanGrid) -> Result<Kernel> {
    let plan = TransformPlan::new(*grid, fan.clone())?;
    let vals = m.tabulate_bounded(fan)?;
    let ns = grid.spatial_len();
    let n = grid.n as i32;
    let stencil = plan.stencil();
    let table = plan.table();
    let origin = grid.spatial_flat(&vec![grid.nz / 2; grid.real_axes()]);
    let mut radius = Vec::new();
    stencil.radius_row(origin, &mut radius);
    let mut coefficients = vec![ZERO; fan.len() * ns];
    for k in 0..=fan.kmax() {
        for (node, &l) in fan.nodes().iter().enumerate() {
            let idx = fan.index(k, node);
            let c = vals[idx] * l.abs().powi(n);
            let dst = &mut coefficients[idx * ns..(idx + 1) * ns];
            for (s, d) in dst.iter_mut().enumerate() {
                *d = c * table.get(k, node, radius[s] as usize);
            }
        }
    }
    let per_node = sum_over_k(fan, ns, &coefficients);
    Ok(Kernel {
        grid: *grid,
        fan: fan.clone(),
        symbol_id: m.id(),
        coefficients,
        per_node,
    })
}

/// `K(z, t)` for a grid point `z` and any real `t`.
pub fn kernel_eval(kernel: &Kernel, z: &[Complex64], t: f64) -> Result<Complex64> {
    let g = &kernel.grid;
    if z.len() != g.n {
        return Err(Error::DimensionMismatch(format!("z has {} components, n = {}", z.len(), g.n)));
    }
    let dx = g.dx();
    let mut idx = Vec::with_capacity(g.real_axes());
    for c in z {
        for x in [c.re, c.im] {
            let j = (x + g.lz) / dx;
            let r = j.round();
            if (j - r).abs() > 1e-9 || r < 0.0 || r >= g.nz as f64 {
                return Err(Error::InvalidArgument(format!("coordinate {x} is not on the spatial grid")));
            }
            idx.push(r as usize);
        }
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite, got {t}")));
    }
    kernel.eval_index(g.spatial_flat(&idx), t)
}

/// Group convolution `f * K(z, t) = int f(u, s) K((u, s)^{-1}(z, t)) du ds`,
/// with the central integral collapsed through the trigonometric form of
/// `K`. Work is `n_nodes * (Nz^{2n})^2`; grids above `budget` are refused.
pub fn convolve_with_kernel(f: &GroupFunction, kernel: &Kernel, budget: u64) -> Result<GroupFunction> {
    let grid = kernel.grid;
    if f.grid() != &grid {
        return Err(Error::GridMismatch("function grid differs from kernel grid".into()));
    }
    let ns = grid.spatial_len();
    let nn = kernel.fan.n_nodes();
    let work = (nn as u64).saturating_mul((ns as u64).saturating_mul(ns as u64));
    if work > budget {
        return Err(Error::Budget(format!(
            "kernel convolution needs {work} operations, budget is {budget}"
        )));
    }
    let plan = TransformPlan::new(grid, kernel.fan.clone())?;
    let fl = plan.central_dft(f)?;
    let stencil = plan.stencil();
    let scale = kernel.prefactor() * grid.cell_volume_z();
    let per_node: Vec<Vec<Complex64>> = (0..nn)
        .into_par_iter()
        .map(|node| {
            let lambda = kernel.fan.nodes()[node];
            let c = &kernel.per_node[node * ns..(node + 1) * ns];
            let src = &fl[node * ns..(node + 1) * ns];
            let mut phase = Vec::new();
            let mut diff = Vec::new();
            (0..ns)
                .map(|z| {
                    stencil.twist_row(z, lambda, &mut phase);
                    stencil.diff_row(z, &mut diff);
                    let mut acc = ZERO;
                    for u in 0..ns {
                        acc += src[u] * c[diff[u] as usize] * phase[u];
                    }
                    acc * scale
                })
                .collect()
        })
        .collect();
    let h: Vec<Complex64> = per_node.into_iter().flatten().collect();
    Ok(plan.central_synthesis(&h))
}
