//! The discretised Heisenberg fan, its three measures, Lorentz-type
//! functionals and multiplier symbols.
//!
//! A fan function is a flat array indexed `k * n_nodes + node` for
//! `k = 0..=Kmax`. Nodes are the nonzero DFT frequencies of the central axis,
//! `lambda_j = pi j / Lt` for `j = -Nt/2, ..., -1, 1, ..., Nt/2 - 1`, stored
//! in increasing order. The limiting ray carries no mass and is not stored.
//!
//! The suprema in [`weak_l1_norm`] and [`hormander_functional`] are evaluated
//! at breakpoints: on a finite fan `s -> s * W{|phi| > s}^e` increases on each
//! interval between consecutive distinct values of `|phi|`, so the supremum is
//! the maximum over distinct values `v` of `v * W{|phi| >= v}^e`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::GroupGrid;
use crate::reduce::pairwise_sum;
use crate::specfun::{ray_multiplicity, KMAX_LIMIT};

const NODE_TOL: f64 = 1e-9;

/// A point `(lambda, (2k+n)|lambda|)` on the ray `R_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanPoint {
    pub k: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Nu,
    Nu2,
    Mu,
}

/// Discretised fan: rays `0..=kmax` times the nonzero central frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FanGrid {
    n: usize,
    kmax: usize,
    lt: f64,
    nt: usize,
    nodes: Vec<f64>,
    dlambda: f64,
}

impl FanGrid {
    pub fn new(n: usize, lt: f64, nt: usize, kmax: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if nt < 4 || nt % 2 != 0 {
            return Err(Error::InvalidArgument(format!("Nt must be even and >= 4, got {nt}")));
        }
        if !(lt > 0.0 && lt.is_finite()) {
            return Err(Error::InvalidArgument(format!("Lt must be positive, got {lt}")));
        }
        if kmax > KMAX_LIMIT {
            return Err(Error::InvalidArgument(format!("Kmax {kmax} exceeds {KMAX_LIMIT}")));
        }
        let dlambda = PI / lt;
        let nodes = (0..nt - 1).map(|i| Self::dft_index_of(nt, i) as f64 * dlambda).collect();
        Ok(Self { n, kmax, lt, nt, nodes, dlambda })
    }

    pub fn for_grid(grid: &GroupGrid, kmax: usize) -> Result<Self> {
        Self::new(grid.n, grid.lt, grid.nt, kmax)
    }

    fn dft_index_of(nt: usize, i: usize) -> isize {
        let half = (nt / 2) as isize;
        if (i as isize) < half {
            i as isize - half
        } else {
            i as isize - half + 1
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn lt(&self) -> f64 {
        self.lt
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn dlambda(&self) -> f64 {
        self.dlambda
    }

    /// Number of fan points, `(kmax + 1) * n_nodes`.
    pub fn len(&self) -> usize {
        (self.kmax + 1) * self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, k: usize, node: usize) -> usize {
        k * self.nodes.len() + node
    }

    /// Signed integer `j` with `lambda = j * dlambda` for node position `i`.
    pub fn dft_index(&self, node: usize) -> isize {
        Self::dft_index_of(self.nt, node)
    }

    /// Bin of node `i` in an unshifted length-`Nt` DFT.
    pub fn dft_bin(&self, node: usize) -> usize {
        self.dft_index(node).rem_euclid(self.nt as isize) as usize
    }

    /// Node position of `lambda`, if it is a node.
    pub fn node_of(&self, lambda: f64) -> Option<usize> {
        let r = lambda / self.dlambda;
        let j = r.round();
        if (r - j).abs() > NODE_TOL || j == 0.0 {
            return None;
        }
        let j = j as isize;
        let half = (self.nt / 2) as isize;
        if j < -half || j >= half {
            return None;
        }
        Some(if j < 0 { (j + half) as usize } else { (j + half - 1) as usize })
    }

    pub fn locate(&self, a: &FanPoint) -> Result<usize> {
        if a.k > self.kmax {
            return Err(Error::Precondition(format!("ray k = {} beyond Kmax = {}", a.k, self.kmax)));
        }
        let node = self
            .node_of(a.lambda)
            .ok_or_else(|| Error::Precondition(format!("lambda = {} is not a fan node", a.lambda)))?;
        Ok(self.index(a.k, node))
    }

    /// Quadrature weight of one fan point.
    pub fn weight(&self, k: usize, node: usize, kind: MeasureKind) -> f64 {
        let n = self.n as i32;
        let lam = self.nodes[node].abs();
        let nu = (2.0 * PI).powi(-2 * n - 1) * lam.powi(2 * n) * self.dlambda;
        match kind {
            MeasureKind::Nu => nu,
            MeasureKind::Nu2 => ray_multiplicity(self.n, k).powi(2) * nu,
            MeasureKind::Mu => ray_multiplicity(self.n, k).powi(2) * nu * lam.powi(-n),
        }
    }

    /// All weights in fan order.
    pub fn weights(&self, kind: MeasureKind) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..=self.kmax {
            for node in 0..self.nodes.len() {
                out.push(self.weight(k, node, kind));
            }
        }
        out
    }

    pub fn total_measure(&self, kind: MeasureKind) -> f64 {
        pairwise_sum(&self.weights(kind))
    }

    fn check_len(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "fan function has {} entries, fan has {} points",
                phi.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Quadrature weight of `a` for `kind`.
pub fn measure_weight(a: &FanPoint, kind: MeasureKind, fan: &FanGrid) -> Result<f64> {
    let idx = fan.locate(a)?;
    Ok(fan.weight(idx / fan.n_nodes(), idx % fan.n_nodes(), kind))
}

/// `sum phi(a) w(a)` over the fan.
pub fn fan_integral(phi: &[f64], kind: MeasureKind, fan: &FanGrid) -> Result<f64> {
    fan.check_len(phi)?;
    if phi.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("fan integrand".into()));
    }
    let w = fan.weights(kind);
    let prods: Vec<f64> = phi.iter().zip(&w).map(|(a, b)| a * b).collect();
    Ok(pairwise_sum(&prods))
}

/// Measure of the strict superlevel set `{|phi| > s}`.
pub fn distribution(phi: &[f64], s: f64, kind: MeasureKind, fan: &FanGrid) -> Result<f64> {
    fan.check_len(phi)?;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("level must be positive, got {s}")));
    }
    let w = fan.weights(kind);
    let sel: Vec<f64> = phi
        .iter()
        .zip(&w)
        .map(|(v, wt)| if v.abs() > s { *wt } else { 0.0 })
        .collect();
    Ok(pairwise_sum(&sel))
}

/// `max_v v * W{|phi| >= v}^exponent` over distinct positive values `v`.
fn breakpoint_sup(abs_vals: &[f64], weights: &[f64], exponent: f64) -> f64 {
    let mut order: Vec<usize> = (0..abs_vals.len()).filter(|&i| abs_vals[i] > 0.0).collect();
    order.sort_by(|&a, &b| abs_vals[b].total_cmp(&abs_vals[a]).then(a.cmp(&b)));
    let mut best = 0.0f64;
    let mut cum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let v = abs_vals[order[i]];
        while i < order.len() && abs_vals[order[i]] == v {
            cum += weights[order[i]];
            i += 1;
        }
        let val = if exponent == 0.0 { v } else { v * cum.powf(exponent) };
        best = best.max(val);
    }
    best
}

/// Weak-`L^1` quasi-norm `sup_s s * W{|phi| > s}`; `phi` must be nonnegative.
pub fn weak_l1_norm(phi: &[f64], kind: MeasureKind, fan: &FanGrid) -> Result<f64> {
    fan.check_len(phi)?;
    if phi.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("weak-L1 argument".into()));
    }
    if let Some(v) = phi.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidArgument(format!("weak-L1 argument must be >= 0, found {v}")));
    }
    if phi.iter().any(|v| v.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    Ok(breakpoint_sup(phi, &fan.weights(kind), 1.0))
}

/// `sup_alpha alpha * mu{|m| > alpha}^{1/p - 1/q}`.
pub fn hormander_functional(m: &Symbol, p: f64, q: f64, fan: &FanGrid) -> Result<f64> {
    if !(p > 1.0 && p <= 2.0 && q >= 2.0 && q.is_finite()) {
        log::warn!("hormander functional evaluated outside 1 < p <= 2 <= q < inf (p={p}, q={q})");
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponents must be >= 1, got p={p} q={q}")));
    }
    let vals = m.tabulate(fan)?;
    let abs: Vec<f64> = vals.iter().map(|v| v.norm()).collect();
    if abs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symbol is unbounded on the fan".into()));
    }
    let exponent = if p == q { 0.0 } else { 1.0 / p - 1.0 / q };
    Ok(breakpoint_sup(&abs, &fan.weights(MeasureKind::Mu), exponent))
}

/// A multiplier symbol on the fan. Every variant vanishes on the limiting ray.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Constant(Complex64),
    /// `(1 + (2k+n)|lambda|)^{-gamma} (1+k)^{-beta}` for `k >= 1`, zero on `k = 0`.
    Power { n: usize, beta: f64, gamma: f64 },
    /// Values in fan order over a fan with the given shape.
    Table {
        kmax: usize,
        n_nodes: usize,
        values: Vec<Complex64>,
    },
}

impl Symbol {
    /// Tabulates `f(k, lambda)` on `fan`.
    pub fn from_fn<F: Fn(usize, f64) -> Complex64>(fan: &FanGrid, f: F) -> Self {
        let mut values = Vec::with_capacity(fan.len());
        for k in 0..=fan.kmax() {
            for &l in fan.nodes() {
                values.push(f(k, l));
            }
        }
        Symbol::Table {
            kmax: fan.kmax(),
            n_nodes: fan.n_nodes(),
            values,
        }
    }

    /// Indicator of a single fan point.
    pub fn indicator(fan: &FanGrid, a: &FanPoint) -> Result<Self> {
        let idx = fan.locate(a)?;
        let mut values = vec![Complex64::new(0.0, 0.0); fan.len()];
        values[idx] = Complex64::new(1.0, 0.0);
        Ok(Symbol::Table {
            kmax: fan.kmax(),
            n_nodes: fan.n_nodes(),
            values,
        })
    }

    /// Values on every fan point, in fan order.
    pub fn tabulate(&self, fan: &FanGrid) -> Result<Vec<Complex64>> {
        match self {
            Symbol::Constant(c) => Ok(vec![*c; fan.len()]),
            Symbol::Power { n, beta, gamma } => {
                if *n != fan.n() {
                    return Err(Error::DimensionMismatch(format!(
                        "power symbol built for n={n}, fan has n={}",
                        fan.n()
                    )));
                }
                let mut out = Vec::with_capacity(fan.len());
                for k in 0..=fan.kmax() {
                    for &l in fan.nodes() {
                        out.push(Complex64::new(power_value(*n, *beta, *gamma, k, l), 0.0));
                    }
                }
                Ok(out)
            }
            Symbol::Table { kmax, n_nodes, values } => {
                if *kmax != fan.kmax() || *n_nodes != fan.n_nodes() || values.len() != fan.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "symbol table has shape ({}, {}), fan has ({}, {})",
                        kmax + 1,
                        n_nodes,
                        fan.kmax() + 1,
                        fan.n_nodes()
                    )));
                }
                Ok(values.clone())
            }
        }
    }

    /// Tabulated values, rejecting non-finite entries.
    pub fn tabulate_bounded(&self, fan: &FanGrid) -> Result<Vec<Complex64>> {
        let vals = self.tabulate(fan)?;
        if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("multiplier symbol".into()));
        }
        Ok(vals)
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            Symbol::Constant(c) if c.im == 0.0 => format!("const:{}", c.re),
            Symbol::Constant(c) => format!("const:{}{:+}i", c.re, c.im),
            Symbol::Power { beta, gamma, .. } => format!("power:beta={beta},gamma={gamma}"),
            Symbol::Table { .. } => "table".into(),
        }
    }

    pub fn to_hsfs(&self, fan: &FanGrid) -> Result<String> {
        let (kind, beta, gamma, values) = match self {
            Symbol::Power { beta, gamma, .. } => ("power", Some(*beta), Some(*gamma), None),
            _ => {
                let vals = self.tabulate(fan)?;
                let vals = vals
                    .iter()
                    .map(|v| if v.im == 0.0 { SymbolValue::Real(v.re) } else { SymbolValue::Complex([v.re, v.im]) })
                    .collect();
                ("table", None, None, Some(vals))
            }
        };
        let doc = HsfsDoc {
            format: "hsf-s".into(),
            version: 1,
            n: fan.n(),
            kmax: fan.kmax(),
            lt: fan.lt(),
            nt: fan.nt(),
            kind: kind.into(),
            beta,
            gamma,
            values,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parses an HSF-S document, returning the symbol and the fan it lives on.
    pub fn from_hsfs(text: &str) -> Result<(Self, FanGrid)> {
        const FMT: &str = "HSF-S";
        let bad = |detail: String| Error::Format { format: FMT, detail };
        let doc: HsfsDoc = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if doc.format != "hsf-s" || doc.version != 1 {
            return Err(bad(format!("unsupported tag {:?} version {}", doc.format, doc.version)));
        }
        let fan = FanGrid::new(doc.n, doc.lt, doc.nt, doc.kmax).map_err(|e| bad(e.to_string()))?;
        let sym = match doc.kind.as_str() {
            "power" => {
                let beta = doc.beta.ok_or_else(|| bad("power symbol without beta".into()))?;
                let gamma = doc.gamma.ok_or_else(|| bad("power symbol without gamma".into()))?;
                power_symbol(beta, gamma, doc.n).map_err(|e| bad(e.to_string()))?
            }
            "table" => {
                let vals = doc.values.ok_or_else(|| bad("table symbol without values".into()))?;
                if vals.len() != fan.len() {
                    return Err(bad(format!("table has {} values, fan has {} points", vals.len(), fan.len())));
                }
                Symbol::Table {
                    kmax: fan.kmax(),
                    n_nodes: fan.n_nodes(),
                    values: vals.into_iter().map(SymbolValue::into_complex).collect(),
                }
            }
            other => return Err(bad(format!("unknown symbol kind {other:?}"))),
        };
        Ok((sym, fan))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SymbolValue {
    Real(f64),
    Complex([f64; 2]),
}

impl SymbolValue {
    fn into_complex(self) -> Complex64 {
        match self {
            SymbolValue::Real(r) => Complex64::new(r, 0.0),
            SymbolValue::Complex([r, i]) => Complex64::new(r, i),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HsfsDoc {
    format: String,
    version: u32,
    n: usize,
    #[serde(rename = "Kmax")]
    kmax: usize,
    #[serde(rename = "Lt")]
    lt: f64,
    #[serde(rename = "Nt")]
    nt: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    values: Option<Vec<SymbolValue>>,
}

fn power_value(n: usize, beta: f64, gamma: f64, k: usize, lambda: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    (1.0 + (2 * k + n) as f64 * lambda.abs()).powf(-gamma) * (1.0 + k as f64).powf(-beta)
}

/// The power family `(1 + (2k+n)|lambda|)^{-gamma} (1+k)^{-beta}`, zero on `k = 0`.
pub fn power_symbol(beta: f64, gamma: f64, n: usize) -> Result<Symbol> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(Symbol::Power { n, beta, gamma })
}

/// Table of `max |(k Delta)^alpha (lambda d/dlambda)^beta m|` over interior
/// fan points, indexed `[alpha][beta]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarcinkiewiczTable {
    pub alpha_max: usize,
    pub beta_max: usize,
    pub entries: Vec<Vec<f64>>,
}

/// Difference-operator report for the `L^p` multiplier condition.
///
/// `Delta` is the backward difference in `k` at fixed `lambda`; the
/// `lambda`-derivative is a central difference taken separately on the
/// negative and positive half-lines, so points without two same-side
/// neighbours drop out of the max.
pub fn marcinkiewicz_report(
    m: &Symbol,
    alpha_max: usize,
    beta_max: usize,
    fan: &FanGrid,
) -> Result<MarcinkiewiczTable> {
    if fan.kmax() < alpha_max + 1 {
        return Err(Error::Precondition(format!(
            "Kmax = {} too small for alpha_max = {alpha_max}",
            fan.kmax()
        )));
    }
    // each half-line has nt/2 - 1 or nt/2 nodes; beta central differences need 2 beta + 1
    let shortest_side = fan.nt() / 2 - 1;
    if shortest_side < 2 * beta_max + 1 {
        return Err(Error::Precondition(format!(
            "only {shortest_side} nodes per half-line, beta_max = {beta_max} needs {}",
            2 * beta_max + 1
        )));
    }
    let base = m.tabulate_bounded(fan)?;
    let nn = fan.n_nodes();
    let half = fan.nt() / 2;
    let same_side = |a: usize, b: usize| (a < half) == (b < half);
    let dl = fan.dlambda();

    let mut entries = vec![vec![0.0; beta_max + 1]; alpha_max + 1];
    let mut lam_stage: Vec<Option<Complex64>> = base.iter().map(|&v| Some(v)).collect();
    for beta in 0..=beta_max {
        if beta > 0 {
            let prev = lam_stage.clone();
            for k in 0..=fan.kmax() {
                for j in 0..nn {
                    let idx = fan.index(k, j);
                    lam_stage[idx] = if j == 0 || j + 1 == nn || !same_side(j - 1, j + 1) {
                        None
                    } else {
                        match (prev[idx - 1], prev[idx + 1]) {
                            (Some(lo), Some(hi)) => Some((hi - lo) * (fan.nodes()[j] / (2.0 * dl))),
                            _ => None,
                        }
                    };
                }
            }
        }
        let mut stage = lam_stage.clone();
        for alpha in 0..=alpha_max {
            if alpha > 0 {
                let prev = stage.clone();
                for k in 0..=fan.kmax() {
                    for j in 0..nn {
                        let idx = fan.index(k, j);
                        stage[idx] = if k == 0 {
                            None
                        } else {
                            match (prev[idx], prev[fan.index(k - 1, j)]) {
                                (Some(a), Some(b)) => Some((a - b) * k as f64),
                                _ => None,
                            }
                        };
                    }
                }
            }
            entries[alpha][beta] = stage.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.norm()));
        }
    }
    Ok(MarcinkiewiczTable {
        alpha_max,
        beta_max,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_fan() -> FanGrid {
        FanGrid::new(1, 2.0, 8, 3).unwrap()
    }

    #[test]
    fn nodes_of_small_fan() {
        let fan = FanGrid::new(1, PI, 4, 0).unwrap();
        assert_eq!(fan.nodes(), &[-2.0, -1.0, 1.0]);
        assert_eq!(fan.dlambda(), 1.0);
        let fan = FanGrid::new(2, 8.0, 48, 12).unwrap();
        assert_eq!(fan.n_nodes(), 47);
        assert!(fan.nodes().iter().all(|&l| l != 0.0));
        for (i, &l) in fan.nodes().iter().enumerate().skip(1) {
            assert!(fan.node_of(-l).is_some(), "node {i}");
        }
        assert_eq!(fan.node_of(-fan.nodes()[0]), None);
        assert_eq!(fan.dft_bin(0), 24);
        assert_eq!(fan.dft_bin(46), 23);
        assert!(FanGrid::new(1, 1.0, 8, KMAX_LIMIT + 1).is_err());
    }

    #[test]
    fn weights_by_kind() {
        let fan = FanGrid::new(1, PI, 8, 4).unwrap();
        let a = FanPoint { k: 3, lambda: 2.0 };
        let nu = measure_weight(&a, MeasureKind::Nu, &fan).unwrap();
        assert!((nu - 4.0 / (2.0 * PI).powi(3)).abs() < 1e-16);
        assert_eq!(measure_weight(&a, MeasureKind::Nu2, &fan).unwrap(), nu);
        let fan3 = FanGrid::new(3, PI, 8, 4).unwrap();
        for k in 0..=4 {
            for &l in fan3.nodes() {
                let a = FanPoint { k, lambda: l };
                let nu2 = measure_weight(&a, MeasureKind::Nu2, &fan3).unwrap();
                let mu = measure_weight(&a, MeasureKind::Mu, &fan3).unwrap();
                assert!((mu / nu2 - l.abs().powi(-3)).abs() < 1e-12);
            }
        }
        assert!(measure_weight(&FanPoint { k: 0, lambda: 0.5 }, MeasureKind::Nu, &fan).is_err());
        assert!(measure_weight(&FanPoint { k: 9, lambda: 1.0 }, MeasureKind::Nu, &fan).is_err());
    }

    #[test]
    fn integral_and_distribution_of_indicators() {
        let fan = small_fan();
        let zero = vec![0.0; fan.len()];
        assert_eq!(fan_integral(&zero, MeasureKind::Mu, &fan).unwrap(), 0.0);
        let mut ind = zero.clone();
        ind[fan.index(2, 5)] = 1.0;
        let w = fan.weight(2, 5, MeasureKind::Mu);
        assert_eq!(fan_integral(&ind, MeasureKind::Mu, &fan).unwrap(), w);
        assert_eq!(distribution(&ind, 0.5, MeasureKind::Mu, &fan).unwrap(), w);
        assert_eq!(distribution(&ind, 1.5, MeasureKind::Mu, &fan).unwrap(), 0.0);
        assert_eq!(weak_l1_norm(&ind, MeasureKind::Mu, &fan).unwrap(), w);
        let mut nan = zero.clone();
        nan[0] = f64::NAN;
        assert!(fan_integral(&nan, MeasureKind::Nu, &fan).is_err());
        assert!(distribution(&ind, 0.0, MeasureKind::Nu, &fan).is_err());
        let mut neg = zero;
        neg[3] = -1.0;
        assert!(weak_l1_norm(&neg, MeasureKind::Nu, &fan).is_err());
    }

    #[test]
    fn weak_norm_of_constant() {
        let fan = small_fan();
        let c = vec![2.5; fan.len()];
        for kind in [MeasureKind::Nu, MeasureKind::Nu2, MeasureKind::Mu] {
            let got = weak_l1_norm(&c, kind, &fan).unwrap();
            let want = 2.5 * fan.total_measure(kind);
            assert!((got - want).abs() <= 1e-14 * want);
        }
    }

    /// Exhaustive scan oracle for the distribution function.
    fn scan_distribution(phi: &[f64], s: f64, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (v, wt) in phi.iter().zip(w) {
            if v.abs() > s {
                acc += wt;
            }
        }
        acc
    }

    #[test]
    fn distribution_matches_scan() {
        let fan = FanGrid::new(1, 1.0, 4, 3).unwrap();
        assert_eq!(fan.len(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = fan.weights(MeasureKind::Nu2);
        for _ in 0..50 {
            let mut phi = vec![0.0; fan.len()];
            for _ in 0..10 {
                let i = rng.gen_range(0..fan.len());
                phi[i] = rng.gen_range(-2.0..2.0);
            }
            for s in [0.01, 0.3, 0.9, 1.7] {
                let got = distribution(&phi, s, MeasureKind::Nu2, &fan).unwrap();
                let want = scan_distribution(&phi, s, &w);
                assert!((got - want).abs() <= 1e-15 * (1.0 + want));
            }
        }
    }

    /// Dense sweep oracle: sup_s s * d(s) approached from below each
    /// breakpoint.
    #[test]
    fn weak_norm_matches_sweep() {
        let fan = FanGrid::new(1, 1.0, 4, 1).unwrap();
        assert_eq!(fan.len(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = fan.weights(MeasureKind::Mu);
        for _ in 0..20 {
            let mut phi = vec![0.0; fan.len()];
            for v in phi.iter_mut().take(5) {
                *v = rng.gen_range(0.1..3.0);
            }
            let mut best = 0.0f64;
            let mut levels: Vec<f64> = phi.clone();
            levels.sort_by(f64::total_cmp);
            for &v in &levels {
                if v <= 0.0 {
                    continue;
                }
                for i in 1..=2000 {
                    let s = v * (1.0 - i as f64 * 1e-15);
                    best = best.max(s * scan_distribution(&phi, s, &w));
                }
            }
            let got = weak_l1_norm(&phi, MeasureKind::Mu, &fan).unwrap();
            assert!((got - best).abs() <= 1e-12 * best, "{got} vs {best}");
        }
    }

    #[test]
    fn distribution_monotone_right_continuous() {
        let fan = small_fan();
        let phi: Vec<f64> = (0..fan.len()).map(|i| ((i * 7919) % 13) as f64 / 4.0).collect();
        let mut prev = f64::INFINITY;
        for i in 1..2000 {
            let s = i as f64 * 0.002;
            let d = distribution(&phi, s, MeasureKind::Nu, &fan).unwrap();
            assert!(d <= prev);
            prev = d;
        }
        // right-continuity at a breakpoint: d(v) == lim d(v + eps)
        let v = 1.25;
        let at = distribution(&phi, v, MeasureKind::Nu, &fan).unwrap();
        let right = distribution(&phi, v + 1e-12, MeasureKind::Nu, &fan).unwrap();
        let left = distribution(&phi, v - 1e-12, MeasureKind::Nu, &fan).unwrap();
        assert_eq!(at, right);
        assert!(left > at);
    }

    #[test]
    fn exponential_integral_converges_under_refinement() {
        // phi(k, lambda) = exp(-(2k+1)|lambda|), n = 1. Reference: midpoint
        // sums converge to the integral; compare against a much finer fan
        // covering the same lambda range.
        let value = |lt: f64, nt: usize| {
            let fan = FanGrid::new(1, lt, nt, 8).unwrap();
            let phi: Vec<f64> = (0..=8)
                .flat_map(|k| fan.nodes().iter().map(move |l| (-((2 * k + 1) as f64) * l.abs()).exp()))
                .collect();
            fan_integral(&phi, MeasureKind::Nu, &fan).unwrap()
        };
        let reference = value(64.0, 64 * 24);
        let coarse = value(8.0, 192);
        let fine = value(16.0, 384);
        assert!((fine - reference).abs() / reference < 1e-3);
        assert!((fine - reference).abs() < (coarse - reference).abs());
    }

    #[test]
    fn power_symbol_values() {
        let fan = FanGrid::new(1, PI, 8, 4).unwrap();
        let m = power_symbol(1.0, 1.0, 1).unwrap();
        let vals = m.tabulate(&fan).unwrap();
        let idx = fan.locate(&FanPoint { k: 1, lambda: 1.0 }).unwrap();
        assert_eq!(vals[idx].re, 1.0 / 8.0);
        for node in 0..fan.n_nodes() {
            assert_eq!(vals[fan.index(0, node)].re, 0.0);
        }
        assert!(vals.iter().all(|v| v.re >= 0.0 && v.re <= 1.0 && v.im == 0.0));
        assert!(power_symbol(1.0, 0.0, 1).is_err());
        assert!(power_symbol(-1.0, 1.0, 1).is_err());
        assert!(m.tabulate(&FanGrid::new(2, PI, 8, 4).unwrap()).is_err());
    }

    #[test]
    fn hormander_special_cases() {
        let fan = FanGrid::new(1, 2.0, 8, 3).unwrap();
        let a = FanPoint { k: 1, lambda: fan.nodes()[2] };
        let ind = Symbol::indicator(&fan, &a).unwrap();
        let mu = measure_weight(&a, MeasureKind::Mu, &fan).unwrap();
        let got = hormander_functional(&ind, 1.5, 3.0, &fan).unwrap();
        assert!((got - mu.powf(1.0 / 1.5 - 1.0 / 3.0)).abs() < 1e-15);
        let m = power_symbol(0.5, 1.0, 1).unwrap();
        let sup = m.tabulate(&fan).unwrap().iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
        assert_eq!(hormander_functional(&m, 2.0, 2.0, &fan).unwrap(), sup);
        let inf = Symbol::Constant(Complex64::new(f64::INFINITY, 0.0));
        assert!(hormander_functional(&inf, 2.0, 4.0, &fan).is_err());
    }

    #[test]
    fn hormander_phase_invariance_and_homogeneity() {
        let fan = FanGrid::new(2, 4.0, 16, 6).unwrap();
        let m = power_symbol(0.7, 1.3, 2).unwrap();
        let base = m.tabulate(&fan).unwrap();
        let f0 = hormander_functional(&m, 1.5, 4.0, &fan).unwrap();
        for theta in [0.3, 1.9, -2.5] {
            let rot = Symbol::Table {
                kmax: fan.kmax(),
                n_nodes: fan.n_nodes(),
                values: base.iter().map(|v| v * Complex64::from_polar(1.0, theta)).collect(),
            };
            let f = hormander_functional(&rot, 1.5, 4.0, &fan).unwrap();
            assert!((f - f0).abs() <= 1e-14 * f0);
        }
        for c in [0.5, 3.0, 17.0] {
            let scaled = Symbol::Table {
                kmax: fan.kmax(),
                n_nodes: fan.n_nodes(),
                values: base.iter().map(|v| v * c).collect(),
            };
            let f = hormander_functional(&scaled, 1.5, 4.0, &fan).unwrap();
            assert!((f - c * f0).abs() <= 1e-13 * c * f0);
        }
    }

    #[test]
    fn corollary_series_stabilises_for_large_beta() {
        let value = |beta: f64, kmax: usize, lt: f64, nt: usize| {
            let fan = FanGrid::new(3, lt, nt, kmax).unwrap();
            hormander_functional(&power_symbol(beta, 1.0, 3).unwrap(), 2.0, 4.0, &fan).unwrap()
        };
        let a = value(0.5, 16, 8.0, 48);
        let b = value(0.5, 32, 16.0, 96);
        assert!((b - a).abs() / a < 0.01, "{a} -> {b}");
        let c = value(0.2, 16, 8.0, 48);
        let d = value(0.2, 32, 16.0, 96);
        assert!(d > c);
    }

    #[test]
    fn marcinkiewicz_constant_and_k_only() {
        let fan = FanGrid::new(1, 2.0, 16, 5).unwrap();
        let c = Symbol::Constant(Complex64::new(0.75, 0.0));
        let t = marcinkiewicz_report(&c, 2, 2, &fan).unwrap();
        assert_eq!(t.entries[0][0], 0.75);
        for a in 0..=2 {
            for b in 0..=2 {
                if (a, b) != (0, 0) {
                    assert_eq!(t.entries[a][b], 0.0);
                }
            }
        }
        let konly = Symbol::from_fn(&fan, |k, _| Complex64::new(1.0 / (1.0 + k as f64), 0.0));
        let t = marcinkiewicz_report(&konly, 2, 2, &fan).unwrap();
        for a in 0..=2 {
            assert!(t.entries[a][1] == 0.0 && t.entries[a][2] == 0.0);
        }
        // k Delta (1/(1+k)) = -1/(1+k) at k, max at k = 1 is 1/2
        assert!((t.entries[1][0] - 0.5).abs() < 1e-15);
        assert!(marcinkiewicz_report(&c, 5, 0, &fan).is_err());
        assert!(marcinkiewicz_report(&c, 0, 4, &fan).is_err());
    }

    #[test]
    fn marcinkiewicz_linear_in_lambda() {
        let fan = FanGrid::new(1, 2.0, 16, 3).unwrap();
        let m = Symbol::from_fn(&fan, |_, l| Complex64::new(l, 0.0));
        let t = marcinkiewicz_report(&m, 0, 1, &fan).unwrap();
        // interior nodes: both same-side neighbours exist
        let half = fan.nt() / 2;
        let nn = fan.n_nodes();
        let expected = (1..nn - 1)
            .filter(|&j| (j - 1 < half) == (j + 1 < half))
            .map(|j| fan.nodes()[j].abs())
            .fold(0.0f64, f64::max);
        assert!((t.entries[0][1] - expected).abs() <= 1e-12 * expected);
        assert!((expected - PI * 7.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn hsfs_roundtrip() {
        let fan = FanGrid::new(1, 2.0, 8, 2).unwrap();
        let p = power_symbol(0.5, 1.0, 1).unwrap();
        let text = p.to_hsfs(&fan).unwrap();
        assert_eq!(
            text,
            r#"{"format":"hsf-s","version":1,"n":1,"Kmax":2,"Lt":2.0,"Nt":8,"kind":"power","beta":0.5,"gamma":1.0}"#
        );
        let (back, fan2) = Symbol::from_hsfs(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(fan2, fan);
        let t = Symbol::from_fn(&fan, |k, l| Complex64::new(k as f64, if l > 0.0 { 0.5 } else { 0.0 }));
        let (back, _) = Symbol::from_hsfs(&t.to_hsfs(&fan).unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(Symbol::from_hsfs(r#"{"format":"hsf-s","version":1,"n":1,"Kmax":2,"Lt":2.0,"Nt":8,"kind":"table","values":[1.0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn integral_linear_and_monotone(seed in 0u64..500, a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let fan = small_fan();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<f64> = (0..fan.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let g: Vec<f64> = (0..fan.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let comb: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let lhs = fan_integral(&comb, MeasureKind::Nu2, &fan).unwrap();
            let rhs = a * fan_integral(&f, MeasureKind::Nu2, &fan).unwrap()
                + b * fan_integral(&g, MeasureKind::Nu2, &fan).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            let bigger: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
            prop_assert!(fan_integral(&bigger, MeasureKind::Mu, &fan).unwrap()
                >= fan_integral(&f, MeasureKind::Mu, &fan).unwrap());
        }

        #[test]
        fn weak_dominated_by_strong(seed in 0u64..500) {
            let fan = small_fan();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<f64> = (0..fan.len()).map(|_| rng.gen_range(0.0..5.0)).collect();
            for kind in [MeasureKind::Nu, MeasureKind::Nu2, MeasureKind::Mu] {
                let weak = weak_l1_norm(&f, kind, &fan).unwrap();
                let strong = fan_integral(&f, kind, &fan).unwrap();
                prop_assert!(weak <= strong * (1.0 + 1e-12));
            }
        }
    }
}
