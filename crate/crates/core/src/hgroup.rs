//! Heisenberg group geometry, uniform periodic grids on `C^n x R`, and
//! sampled group functions.
//!
//! Sample order is fixed: `x1` varies fastest, then `y1`, `x2`, `y2`, ...,
//! and the central coordinate `t` slowest. Axis `i` of length `N` with
//! half-extent `L` carries the coordinates `-L + j * (2L / N)` for
//! `j = 0..N`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::reduce::pairwise_sum;

/// Upper bound on `Nz^{2n} * Nt` for a single grid.
pub const MAX_SAMPLES: usize = 1 << 24;

const ALIGN_TOL: f64 = 1e-9;

/// A point `(z, t)` of `H^n = C^n x R`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub z: Vec<Complex64>,
    pub t: f64,
}

impl GroupPoint {
    pub fn new(z: Vec<Complex64>, t: f64) -> Self {
        Self { z, t }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            z: vec![Complex64::new(0.0, 0.0); n],
            t: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// `sum_j Im(z_j * conj(w_j))`.
pub fn symplectic(z: &[Complex64], w: &[Complex64]) -> f64 {
    z.iter().zip(w).map(|(a, b)| (a * b.conj()).im).sum()
}

/// Group product `(z,t)(w,s) = (z + w, t + s + Im(z.w̄)/2)`.
pub fn group_mul(p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply points of H^{} and H^{}",
            p.dim(),
            q.dim()
        )));
    }
    let z = p.z.iter().zip(&q.z).map(|(a, b)| a + b).collect();
    let t = p.t + q.t + 0.5 * symplectic(&p.z, &q.z);
    Ok(GroupPoint { z, t })
}

/// Group inverse `(z,t)^{-1} = (-z,-t)`.
pub fn group_inv(p: &GroupPoint) -> GroupPoint {
    GroupPoint {
        z: p.z.iter().map(|a| -a).collect(),
        t: -p.t,
    }
}

/// Uniform periodic grid on `[-Lz, Lz)^{2n} x [-Lt, Lt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupGrid {
    pub n: usize,
    #[serde(rename = "Lz")]
    pub lz: f64,
    #[serde(rename = "Nz")]
    pub nz: usize,
    #[serde(rename = "Lt")]
    pub lt: f64,
    #[serde(rename = "Nt")]
    pub nt: usize,
}

impl GroupGrid {
    pub fn new(n: usize, lz: f64, nz: usize, lt: f64, nt: usize) -> Result<Self> {
        let g = Self { n, lz, nz, lt, nt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.nz < 4 || self.nz % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "Nz must be even and >= 4, got {}",
                self.nz
            )));
        }
        if self.nt < 4 || self.nt % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "Nt must be even and >= 4, got {}",
                self.nt
            )));
        }
        if !(self.lz > 0.0 && self.lz.is_finite()) || !(self.lt > 0.0 && self.lt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "half-extents must be positive and finite, got Lz={} Lt={}",
                self.lz, self.lt
            )));
        }
        let spatial = (self.nz as u128).checked_pow(2 * self.n as u32);
        match spatial.and_then(|s| s.checked_mul(self.nt as u128)) {
            Some(total) if total <= MAX_SAMPLES as u128 => Ok(()),
            _ => Err(Error::Budget(format!(
                "grid with n={} Nz={} Nt={} exceeds {} samples",
                self.n, self.nz, self.nt, MAX_SAMPLES
            ))),
        }
    }

    /// Spatial step on every real axis.
    pub fn dx(&self) -> f64 {
        2.0 * self.lz / self.nz as f64
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.lt / self.nt as f64
    }

    /// Spatial cell volume `dx^{2n}`.
    pub fn cell_volume_z(&self) -> f64 {
        self.dx().powi(2 * self.n as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume_z() * self.dt()
    }

    pub fn real_axes(&self) -> usize {
        2 * self.n
    }

    pub fn spatial_len(&self) -> usize {
        self.nz.pow(2 * self.n as u32)
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_coord(&self, j: usize) -> f64 {
        -self.lz + j as f64 * self.dx()
    }

    pub fn t_coord(&self, m: usize) -> f64 {
        -self.lt + m as f64 * self.dt()
    }

    /// Per-axis indices of a flat spatial index (x1 first).
    pub fn spatial_indices(&self, s: usize) -> Vec<usize> {
        let mut rest = s;
        (0..self.real_axes())
            .map(|_| {
                let i = rest % self.nz;
                rest /= self.nz;
                i
            })
            .collect()
    }

    pub fn spatial_flat(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &i| acc * self.nz + i)
    }

    /// Complex coordinates `z_j = x_j + i y_j` of a flat spatial index.
    pub fn spatial_point(&self, s: usize) -> Vec<Complex64> {
        let idx = self.spatial_indices(s);
        idx.chunks(2)
            .map(|c| Complex64::new(self.axis_coord(c[0]), self.axis_coord(c[1])))
            .collect()
    }

    pub fn flat(&self, s: usize, m: usize) -> usize {
        s + self.spatial_len() * m
    }

    /// Signed representative in `[-Nz/2, Nz/2)` of an index difference.
    pub fn wrap_diff(&self, d: isize) -> isize {
        let nz = self.nz as isize;
        let half = nz / 2;
        (d + half).rem_euclid(nz) - half
    }

    /// True when the periodic box is a quotient of `H^n` by a lattice that
    /// contains the grid steps: `Lz * dx / (2 Lt)` is an integer. Left
    /// translations then compose exactly and the transform is exactly
    /// translation covariant.
    pub fn is_lattice_compatible(&self) -> bool {
        let r = self.lz * self.dx() / (2.0 * self.lt);
        (r - r.round()).abs() < ALIGN_TOL && r.round() >= 1.0
    }

    /// Sample labels in storage order, e.g. `x1,y1,t`.
    pub fn order_label(&self) -> String {
        let mut parts: Vec<String> = (1..=self.n)
            .flat_map(|j| [format!("x{j}"), format!("y{j}")])
            .collect();
        parts.push("t".into());
        parts.join(",")
    }
}

/// Complex samples of a function on a [`GroupGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFunction {
    grid: GroupGrid,
    values: Vec<Complex64>,
}

impl GroupFunction {
    pub fn new(grid: GroupGrid, values: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("group function samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: GroupGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GroupGrid) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid,
        }
    }

    /// Samples `f(z, t)` at every grid point.
    pub fn from_fn<F: Fn(&[Complex64], f64) -> Complex64>(grid: GroupGrid, f: F) -> Result<Self> {
        let ns = grid.spatial_len();
        let points: Vec<Vec<Complex64>> = (0..ns).map(|s| grid.spatial_point(s)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for m in 0..grid.nt {
            let t = grid.t_coord(m);
            for z in &points {
                values.push(f(z, t));
            }
        }
        Self::new(grid, values)
    }

    /// Grid delta of unit mass at the origin (value `1 / (dV_z dt)`).
    pub fn delta_at_origin(grid: GroupGrid) -> Self {
        let mut f = Self::zeros(grid);
        let s = grid.spatial_flat(&vec![grid.nz / 2; grid.real_axes()]);
        let idx = grid.flat(s, grid.nt / 2);
        f.values[idx] = Complex64::new(1.0 / grid.cell_volume(), 0.0);
        f
    }

    pub fn grid(&self) -> &GroupGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, s: usize, m: usize) -> Complex64 {
        self.values[self.grid.flat(s, m)]
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Pointwise map over samples.
    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Discrete L2 inner product `sum f conj(g) dV`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let prods: Vec<Complex64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .collect();
        Ok(crate::reduce::pairwise_sum_complex(&prods) * self.grid.cell_volume())
    }

    /// `||self - other||_2 / ||other||_2`.
    pub fn relative_l2_error(&self, reference: &Self) -> Result<f64> {
        let diff = self.sub(reference)?;
        let denom = lp_norm(reference, 2.0)?;
        if denom == 0.0 {
            return Err(Error::Precondition("reference function is zero".into()));
        }
        Ok(lp_norm(&diff, 2.0)? / denom)
    }

    pub fn to_hsfg(&self) -> Result<Vec<u8>> {
        let header = HsfgHeader {
            format: "hsf-g".into(),
            version: 1,
            n: self.grid.n,
            lz: self.grid.lz,
            nz: self.grid.nz,
            lt: self.grid.lt,
            nt: self.grid.nt,
            order: self.grid.order_label(),
        };
        container::write_framed(&header, &self.values)
    }

    pub fn from_hsfg(bytes: &[u8]) -> Result<Self> {
        const FMT: &str = "HSF-G";
        let (h, payload): (HsfgHeader, _) = container::split_header(bytes, FMT)?;
        if h.format != "hsf-g" || h.version != 1 {
            return Err(Error::Format {
                format: FMT,
                detail: format!("unsupported format tag {:?} version {}", h.format, h.version),
            });
        }
        let grid = GroupGrid::new(h.n, h.lz, h.nz, h.lt, h.nt).map_err(|e| Error::Format {
            format: FMT,
            detail: e.to_string(),
        })?;
        if h.order != grid.order_label() {
            return Err(Error::Format {
                format: FMT,
                detail: format!("unsupported sample order {:?}", h.order),
            });
        }
        let values = container::decode_complex(payload, grid.len(), FMT)?;
        Self::new(grid, values)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HsfgHeader {
    format: String,
    version: u32,
    n: usize,
    #[serde(rename = "Lz")]
    lz: f64,
    #[serde(rename = "Nz")]
    nz: usize,
    #[serde(rename = "Lt")]
    lt: f64,
    #[serde(rename = "Nt")]
    nt: usize,
    order: String,
}

/// Number of grid steps represented by `x`, if `x` is (numerically) a
/// multiple of `step`.
fn steps_of(x: f64, step: f64) -> Option<isize> {
    let r = x / step;
    let k = r.round();
    ((r - k).abs() < ALIGN_TOL).then_some(k as isize)
}

/// Left translation `tau_u f(z,t) = f(u^{-1}(z,t))` with periodic wrap on
/// every axis. Requires `u` to map the grid onto itself.
pub fn left_translate(f: &GroupFunction, u: &GroupPoint) -> Result<GroupFunction> {
    let g = *f.grid();
    if u.dim() != g.n {
        return Err(Error::DimensionMismatch(format!(
            "shift lives in H^{}, grid in H^{}",
            u.dim(),
            g.n
        )));
    }
    let dx = g.dx();
    let dt = g.dt();
    let mut shift = Vec::with_capacity(g.real_axes());
    // central step change per unit index on each real axis of the output point
    let mut central = Vec::with_capacity(g.real_axes());
    for (j, c) in u.z.iter().enumerate() {
        let p = steps_of(c.re, dx).ok_or_else(|| {
            Error::Precondition(format!("u.z[{j}].re = {} is not a multiple of dx = {dx}", c.re))
        })?;
        let q = steps_of(c.im, dx).ok_or_else(|| {
            Error::Precondition(format!("u.z[{j}].im = {} is not a multiple of dx = {dx}", c.im))
        })?;
        // Im(u conj(z)) = q x - p y, with x = dx * ix', y = dx * iy'
        let cx = steps_of(0.5 * dx * dx * q as f64, dt).ok_or_else(|| {
            Error::Precondition(format!(
                "u.z[{j}].im = {}: central shift Im(u z̄)/2 misses the t-grid (dt = {dt})",
                c.im
            ))
        })?;
        let cy = steps_of(0.5 * dx * dx * p as f64, dt).ok_or_else(|| {
            Error::Precondition(format!(
                "u.z[{j}].re = {}: central shift Im(u z̄)/2 misses the t-grid (dt = {dt})",
                c.re
            ))
        })?;
        shift.push(p);
        shift.push(q);
        central.push(cx);
        central.push(-cy);
    }
    let s_steps = steps_of(u.t, dt).ok_or_else(|| {
        Error::Precondition(format!("u.t = {} is not a multiple of dt = {dt}", u.t))
    })?;

    let nz = g.nz as isize;
    let nt = g.nt as isize;
    let half = nz / 2;
    let ns = g.spatial_len();
    let src = f.values();
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    for s in 0..ns {
        let idx = g.spatial_indices(s);
        let mut src_idx = Vec::with_capacity(idx.len());
        let mut c = 0isize;
        for (a, &i) in idx.iter().enumerate() {
            src_idx.push((i as isize - shift[a]).rem_euclid(nz) as usize);
            c += central[a] * (i as isize - half);
        }
        let ss = g.spatial_flat(&src_idx);
        for m in 0..g.nt {
            let ms = (m as isize - s_steps - c).rem_euclid(nt) as usize;
            out[g.flat(s, m)] = src[g.flat(ss, ms)];
        }
    }
    Ok(GroupFunction::from_raw(g, out))
}

/// Riemann-sum `L^p` norm; `p = f64::INFINITY` gives the max modulus.
pub fn lp_norm(f: &GroupFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("L^p exponent must be >= 1, got {p}")));
    }
    let vals = f.values();
    if p.is_infinite() {
        return Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.norm())));
    }
    let dv = f.grid().cell_volume();
    // sorted terms make the sum invariant under any permutation of samples
    let mut terms: Vec<f64> = if p == 2.0 {
        vals.iter().map(|v| v.norm_sqr()).collect()
    } else if p == 1.0 {
        vals.iter().map(|v| v.norm()).collect()
    } else {
        vals.iter().map(|v| v.norm().powf(p)).collect()
    };
    terms.sort_unstable_by(f64::total_cmp);
    let sum = pairwise_sum(&terms);
    Ok((sum * dv).powf(1.0 / p))
}
