//! Heat semigroup and Picard iteration for the integral (Duhamel) forms of
//! four nonlinear Cauchy problems driven by `|T_m u|^p`:
//!
//! ```text
//! heat1: u(tau) = u0 + int_0^tau |T_m u(s)|^p ds
//! heat2: u(tau) = e^{-tau(L + d)} u0 + int_0^tau e^{-(tau-s)(L + d)} |T_m u(s)|^p ds
//! wave1: u(tau) = u0 + tau u1 + int_0^tau (tau - s) b(s) |T_m u(s)|^p ds
//! wave2: u(tau) = u0 + (1 - e^{-tau}) u1 + int_0^tau (1 - e^{-(tau-s)}) |T_m u(s)|^p ds
//! ```
//!
//! Time integrals use the composite trapezoid rule on the nodes of a
//! [`TimeGrid`]. The `L^inf(0,T; L^2)` norms are maxima over those nodes only;
//! behaviour between nodes is not monitored.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fan::{FanGrid, Symbol};
use crate::hgroup::{lp_norm, GroupFunction};
use crate::multiplier::apply_with_plan;
use crate::sft::{SpectralFunction, TransformPlan};

/// Uniform nodes `tau_j = j T / Ntau`, `j = 0..=Ntau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "Ntau")]
    pub ntau: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, ntau: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
        }
        if ntau < 2 {
            return Err(Error::InvalidArgument(format!("Ntau must be >= 2, got {ntau}")));
        }
        Ok(Self { t_final, ntau })
    }

    pub fn dtau(&self) -> f64 {
        self.t_final / self.ntau as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dtau()
    }

    pub fn n_nodes(&self) -> usize {
        self.ntau + 1
    }

    /// Trapezoid weight of node `i` in the integral over `[0, tau_j]`.
    fn weight(&self, i: usize, j: usize) -> f64 {
        if i == 0 || i == j {
            0.5 * self.dtau()
        } else {
            self.dtau()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Heat1,
    Heat2,
    Wave1,
    Wave2,
}

impl ProblemKind {
    pub fn is_wave(&self) -> bool {
        matches!(self, ProblemKind::Wave1 | ProblemKind::Wave2)
    }
}

/// Nonnegative coefficient `b(tau)`, linear between samples and constant
/// beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTable {
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
}

impl BTable {
    pub fn constant(v: f64) -> Self {
        Self {
            tau: vec![0.0],
            values: vec![v],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.is_empty() || self.tau.len() != self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "b table needs matching nonempty columns, got {} and {}",
                self.tau.len(),
                self.values.len()
            )));
        }
        if self.tau.windows(2).any(|w| !(w[1] > w[0])) || self.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("b table times must be finite and increasing".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("b must be finite and >= 0, found {v}")));
        }
        Ok(())
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let i = self.tau.partition_point(|&t| t <= tau);
        if i == 0 {
            return self.values[0];
        }
        if i == self.tau.len() {
            return self.values[i - 1];
        }
        let (t0, t1) = (self.tau[i - 1], self.tau[i]);
        let w = (tau - t0) / (t1 - t0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }
}

#[derive(Debug, Clone)]
pub struct PdeProblem {
    pub kind: ProblemKind,
    pub m: Symbol,
    pub p: f64,
    pub d: f64,
    pub b: BTable,
    pub u0: GroupFunction,
    pub u1: Option<GroupFunction>,
}

impl PdeProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must exceed 1, got {}", self.p)));
        }
        if self.kind == ProblemKind::Heat2 && !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::InvalidArgument(format!("d must be >= 0, got {}", self.d)));
        }
        self.b.validate()?;
        if let Some(u1) = &self.u1 {
            if u1.grid() != self.u0.grid() {
                return Err(Error::GridMismatch("u0 and u1 live on different grids".into()));
            }
        }
        if self.kind.is_wave() && self.u1.is_none() {
            return Err(Error::InvalidArgument("wave problems need u1".into()));
        }
        Ok(())
    }
}

/// Solution samples at every time node plus iteration diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub timegrid: TimeGrid,
    pub states: Vec<GroupFunction>,
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub residual: f64,
}

impl Trajectory {
    /// Largest `L^2` norm over the time nodes.
    pub fn sup_l2(&self) -> Result<f64> {
        sup_l2(&self.states)
    }

    /// `max_j ||self(tau_j) - other(tau'_j)||_2 / max_j ||other||_2` where
    /// `other` runs on a refinement of this time grid by an integer factor.
    pub fn relative_gap(&self, finer: &Trajectory) -> Result<f64> {
        let r = finer.timegrid.ntau / self.timegrid.ntau;
        if r * self.timegrid.ntau != finer.timegrid.ntau || (finer.timegrid.t_final - self.timegrid.t_final).abs() > 1e-12 {
            return Err(Error::GridMismatch("reference time grid is not an integer refinement".into()));
        }
        let mut gap: f64 = 0.0;
        for (j, s) in self.states.iter().enumerate() {
            gap = gap.max(lp_norm(&s.sub(&finer.states[j * r])?, 2.0)?);
        }
        Ok(gap / finer.sup_l2()?)
    }

    /// Writes `state_XXXX.hsfg` files into `dir` and returns their names.
    pub fn write_states(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut names = Vec::with_capacity(self.states.len());
        for (j, s) in self.states.iter().enumerate() {
            let name = format!("state_{j:04}.hsfg");
            std::fs::write(dir.join(&name), s.to_hsfg()?)?;
            names.push(name);
        }
        Ok(names)
    }
}

fn sup_l2(states: &[GroupFunction]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for s in states {
        m = m.max(lp_norm(s, 2.0)?);
    }
    Ok(m)
}

/// `exp(-tau((2k+n)|lambda| + d))` on every fan point.
pub fn heat_factors(fan: &FanGrid, tau: f64, d: f64) -> Vec<Complex64> {
    let n = fan.n();
    let mut out = Vec::with_capacity(fan.len());
    for k in 0..=fan.kmax() {
        for &l in fan.nodes() {
            out.push(Complex64::new((-tau * ((2 * k + n) as f64 * l.abs() + d)).exp(), 0.0));
        }
    }
    out
}

/// `e^{-tau(L + d I)} f` through a prepared plan.
pub fn heat_semigroup_with(plan: &TransformPlan, f: &GroupFunction, tau: f64, d: f64) -> Result<GroupFunction> {
    check_heat_args(tau, d)?;
    let spec = plan.forward(f)?;
    plan.inverse(&spec.scale_by_fan(&heat_factors(plan.fan(), tau, d))?)
}

pub fn heat_semigroup(f: &GroupFunction, tau: f64, d: f64, fan: &FanGrid) -> Result<GroupFunction> {
    let plan = TransformPlan::new(*f.grid(), fan.clone())?;
    heat_semigroup_with(&plan, f, tau, d)
}

fn check_heat_args(tau: f64, d: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau}")));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("d must be >= 0, got {d}")));
    }
    Ok(())
}

/// `|v|^p` sample by sample.
fn nonlinearity(v: &GroupFunction, p: f64) -> GroupFunction {
    v.map(|z| Complex64::new(z.norm().powf(p), 0.0))
}

fn finite(f: &GroupFunction) -> bool {
    f.values().iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Solver state: group-side samples and, for heat2, their spectral form.
struct Iterate {
    states: Vec<GroupFunction>,
    spectra: Option<Vec<SpectralFunction>>,
}

struct Solver<'a> {
    plan: &'a TransformPlan,
    problem: &'a PdeProblem,
    tg: TimeGrid,
    u0_spec: Option<SpectralFunction>,
}

impl<'a> Solver<'a> {
    fn data(&self, j: usize) -> Result<(GroupFunction, Option<SpectralFunction>)> {
        let tau = self.tg.node(j);
        let pr = self.problem;
        Ok(match pr.kind {
            ProblemKind::Heat1 => (pr.u0.clone(), None),
            ProblemKind::Heat2 => {
                let s = self.u0_spec.as_ref().unwrap();
                let s = s.scale_by_fan(&heat_factors(self.plan.fan(), tau, pr.d))?;
                (self.plan.inverse(&s)?, Some(s))
            }
            ProblemKind::Wave1 => (
                pr.u0.add(&pr.u1.as_ref().unwrap().scale(Complex64::new(tau, 0.0)))?,
                None,
            ),
            ProblemKind::Wave2 => (
                pr.u0.add(&pr.u1.as_ref().unwrap().scale(Complex64::new(1.0 - (-tau).exp(), 0.0)))?,
                None,
            ),
        })
    }

    fn initial(&self) -> Result<Iterate> {
        let pairs: Vec<_> = (0..self.tg.n_nodes())
            .into_par_iter()
            .map(|j| self.data(j))
            .collect::<Result<_>>()?;
        let (states, spectra): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let spectra = if self.problem.kind == ProblemKind::Heat2 {
            Some(spectra.into_iter().map(Option::unwrap).collect())
        } else {
            None
        };
        Ok(Iterate { states, spectra })
    }

    /// `|T_m u(tau_i)|^p` for every node, spectral for heat2.
    fn integrands(&self, it: &Iterate) -> Result<(Vec<GroupFunction>, Option<Vec<SpectralFunction>>)> {
        let pr = self.problem;
        let n = self.tg.n_nodes();
        match &it.spectra {
            Some(spectra) => {
                let mvals = pr.m.tabulate_bounded(self.plan.fan())?;
                let out: Vec<(GroupFunction, SpectralFunction)> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let tu = self.plan.inverse(&spectra[i].scale_by_fan(&mvals)?)?;
                        let nl = nonlinearity(&tu, pr.p);
                        let s = self.plan.forward(&nl)?;
                        Ok((nl, s))
                    })
                    .collect::<Result<_>>()?;
                let (g, s): (Vec<_>, Vec<_>) = out.into_iter().unzip();
                Ok((g, Some(s)))
            }
            None => {
                let g = (0..n)
                    .into_par_iter()
                    .map(|i| Ok(nonlinearity(&apply_with_plan(self.plan, &pr.m, &it.states[i])?, pr.p)))
                    .collect::<Result<_>>()?;
                Ok((g, None))
            }
        }
    }

    /// Kernel weight of source node `i` in the integral up to node `j`.
    fn kernel_weight(&self, i: usize, j: usize) -> f64 {
        let (tj, si) = (self.tg.node(j), self.tg.node(i));
        let w = self.tg.weight(i, j);
        match self.problem.kind {
            ProblemKind::Heat1 | ProblemKind::Heat2 => w,
            ProblemKind::Wave1 => w * (tj - si) * self.problem.b.eval(si),
            ProblemKind::Wave2 => w * (1.0 - (-(tj - si)).exp()),
        }
    }

    /// One application of the Duhamel map.
    fn apply(&self, it: &Iterate) -> Result<Iterate> {
        let (nl, nl_spec) = self.integrands(it)?;
        let n = self.tg.n_nodes();
        let pr = self.problem;
        if let Some(ns) = nl_spec {
            let u0 = self.u0_spec.as_ref().unwrap();
            let fan = self.plan.fan();
            let out: Vec<(GroupFunction, SpectralFunction)> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let tj = self.tg.node(j);
                    let mut acc = u0.scale_by_fan(&heat_factors(fan, tj, pr.d))?;
                    if j > 0 {
                        for (i, s) in ns.iter().enumerate().take(j + 1) {
                            let e = heat_factors(fan, tj - self.tg.node(i), pr.d);
                            let w = Complex64::new(self.kernel_weight(i, j), 0.0);
                            let e: Vec<Complex64> = e.into_iter().map(|v| v * w).collect();
                            acc = acc.add(&s.scale_by_fan(&e)?)?;
                        }
                    }
                    Ok((self.plan.inverse(&acc)?, acc))
                })
                .collect::<Result<_>>()?;
            let (states, spectra): (Vec<_>, Vec<_>) = out.into_iter().unzip();
            return Ok(Iterate {
                states,
                spectra: Some(spectra),
            });
        }
        let states = (0..n)
            .into_par_iter()
            .map(|j| {
                let (mut acc, _) = self.data(j)?;
                if j > 0 {
                    for (i, v) in nl.iter().enumerate().take(j + 1) {
                        let w = self.kernel_weight(i, j);
                        if w != 0.0 {
                            acc = acc.add(&v.scale(Complex64::new(w, 0.0)))?;
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        Ok(Iterate { states, spectra: None })
    }
}

fn max_gap(a: &[GroupFunction], b: &[GroupFunction]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let g = lp_norm(&x.sub(y)?, 2.0)?;
        m = m.max(g);
    }
    Ok(m)
}

/// Picard iteration `u <- data + int kernel |T_m u|^p` until the
/// `L^inf(L^2)` increment drops to `tol`.
pub fn solve_with(
    plan: &TransformPlan,
    problem: &PdeProblem,
    timegrid: TimeGrid,
    tol: f64,
    maxiter: usize,
) -> Result<Trajectory> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if maxiter < 1 {
        return Err(Error::InvalidArgument("maxiter must be >= 1".into()));
    }
    if problem.u0.grid() != plan.grid() {
        return Err(Error::GridMismatch("initial data grid differs from plan grid".into()));
    }
    let u0_spec = if problem.kind == ProblemKind::Heat2 {
        Some(plan.forward(&problem.u0)?)
    } else {
        None
    };
    let solver = Solver {
        plan,
        problem,
        tg: timegrid,
        u0_spec,
    };
    let mut cur = solver.initial()?;
    let mut increments = Vec::new();
    let mut growing = 0;
    for it in 1..=maxiter {
        let next = solver.apply(&cur)?;
        let ok = next.states.iter().all(finite);
        let inc = if ok { max_gap(&next.states, &cur.states)? } else { f64::INFINITY };
        log::debug!("picard iteration {it}: increment {inc:e}");
        if let Some(&prev) = increments.last() {
            growing = if inc > prev { growing + 1 } else { 0 };
        }
        increments.push(inc);
        if !inc.is_finite() || growing >= 3 {
            return Err(Error::Divergence { increments });
        }
        cur = next;
        if inc <= tol {
            let check = solver.apply(&cur)?;
            let residual = max_gap(&check.states, &cur.states)?;
            return Ok(Trajectory {
                timegrid,
                states: cur.states,
                iterations: it,
                increments,
                residual,
            });
        }
    }
    Err(Error::MaxIterations {
        iterations: maxiter,
        last_increment: *increments.last().unwrap(),
    })
}

pub fn solve(problem: &PdeProblem, fan: &FanGrid, timegrid: TimeGrid, tol: f64, maxiter: usize) -> Result<Trajectory> {
    let plan = TransformPlan::new(*problem.u0.grid(), fan.clone())?;
    solve_with(&plan, problem, timegrid, tol, maxiter)
}

/// Contraction time
/// `min{(delta-1)/(C delta^p ||u0||^{p-1}), 1/(2p C^p delta^{p-1} ||u0||^{p-1})}`.
pub fn t_star(delta: f64, p: f64, c: f64, u0_norm: f64) -> Result<f64> {
    if !(delta > 1.0) {
        return Err(Error::InvalidArgument(format!("delta must exceed 1, got {delta}")));
    }
    if !(p > 1.0 && c > 0.0 && u0_norm > 0.0) || !(p.is_finite() && c.is_finite() && u0_norm.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "p > 1, C > 0 and ||u0|| > 0 required, got p={p} C={c} ||u0||={u0_norm}"
        )));
    }
    let a = u0_norm.powf(p - 1.0);
    let first = (delta - 1.0) / (c * delta.powf(p) * a);
    let second = 1.0 / (2.0 * p * c.powf(p) * delta.powf(p - 1.0) * a);
    Ok(first.min(second))
}

/// The contraction bound `2p C^p delta^{p-1} T ||u0||^{p-1}`.
pub fn contraction_bound(delta: f64, p: f64, c: f64, t: f64, u0_norm: f64) -> f64 {
    2.0 * p * c.powf(p) * delta.powf(p - 1.0) * t * u0_norm.powf(p - 1.0)
}

/// Largest ratio of consecutive increments after the first.
pub fn observed_contraction(increments: &[f64]) -> Option<f64> {
    increments
        .windows(2)
        .skip(1)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(None, |m, r| Some(m.map_or(r, |v: f64| v.max(r))))
}

/// Symbol reference in a problem file: an inline HSF-S document or a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SymbolRef {
    Path(String),
    Inline(serde_json::Value),
}

/// The HSF-P problem file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub kind: ProblemKind,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<BTable>,
    pub m: SymbolRef,
    pub u0: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u1: Option<String>,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "Ntau")]
    pub ntau: usize,
    pub tol: f64,
    pub maxiter: usize,
}

/// A problem file resolved against its directory.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: PdeProblem,
    pub fan: FanGrid,
    pub timegrid: TimeGrid,
    pub tol: f64,
    pub maxiter: usize,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            format: "HSF-P",
            detail: e.to_string(),
        })
    }

    /// Reads the referenced symbol and data files; relative paths resolve
    /// against `base`.
    pub fn load(&self, base: &Path) -> Result<LoadedProblem> {
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let (m, fan) = match &self.m {
            SymbolRef::Path(p) => Symbol::from_hsfs(&std::fs::read_to_string(resolve(p))?)?,
            SymbolRef::Inline(v) => Symbol::from_hsfs(&v.to_string())?,
        };
        let u0 = GroupFunction::from_hsfg(&std::fs::read(resolve(&self.u0))?)?;
        let u1 = match &self.u1 {
            Some(p) => Some(GroupFunction::from_hsfg(&std::fs::read(resolve(p))?)?),
            None => None,
        };
        if fan.n() != u0.grid().n || fan.nt() != u0.grid().nt || fan.lt() != u0.grid().lt {
            return Err(Error::GridMismatch("symbol fan does not match the grid of u0".into()));
        }
        let problem = PdeProblem {
            kind: self.kind,
            m,
            p: self.p,
            d: self.d.unwrap_or(0.0),
            b: self.b.clone().unwrap_or_else(|| BTable::constant(1.0)),
            u0,
            u1,
        };
        problem.validate()?;
        Ok(LoadedProblem {
            problem,
            fan,
            timegrid: TimeGrid::new(self.t_final, self.ntau)?,
            tol: self.tol,
            maxiter: self.maxiter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fan::power_symbol;
    use crate::hgroup::GroupGrid;
    use crate::specfun::laguerre_fn_r2;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn setup() -> (GroupGrid, FanGrid, TransformPlan) {
        let g = GroupGrid::new(1, 6.0, 12, 8.0, 16).unwrap();
        let fan = FanGrid::for_grid(&g, 4).unwrap();
        let plan = TransformPlan::new(g, fan.clone()).unwrap();
        (g, fan, plan)
    }

    fn gauss(g: GroupGrid, amp: f64) -> GroupFunction {
        GroupFunction::from_fn(g, |z, t| c(amp * (-0.5 * z[0].norm_sqr() - 0.4 * t * t).exp(), 0.0)).unwrap()
    }

    fn problem(kind: ProblemKind, m: Symbol, u0: GroupFunction, u1: Option<GroupFunction>) -> PdeProblem {
        PdeProblem {
            kind,
            m,
            p: 2.0,
            d: 1.0,
            b: BTable::constant(1.0),
            u0,
            u1,
        }
    }

    #[test]
    fn time_grid_and_b_table() {
        let tg = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(tg.n_nodes(), 5);
        assert_eq!(tg.node(4), 1.0);
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        let b = BTable {
            tau: vec![0.0, 1.0, 3.0],
            values: vec![1.0, 3.0, 2.0],
        };
        b.validate().unwrap();
        assert_eq!(b.eval(-1.0), 1.0);
        assert_eq!(b.eval(0.5), 2.0);
        assert_eq!(b.eval(2.0), 2.5);
        assert_eq!(b.eval(9.0), 2.0);
        let bad = BTable {
            tau: vec![0.0, 1.0],
            values: vec![1.0, -1.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn t_star_formula() {
        assert!((t_star(2.0, 2.0, 1.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
        let a = t_star(2.0, 2.0, 1.0, 0.5).unwrap();
        let b = t_star(2.0, 2.0, 1.0, 1.0).unwrap();
        let d = t_star(2.0, 2.0, 2.0, 1.0).unwrap();
        assert!(a > b && b > d);
        assert!(t_star(1.0, 2.0, 1.0, 1.0).is_err());
        let t = t_star(2.0, 2.0, 1.0, 1.0).unwrap();
        assert!(contraction_bound(2.0, 2.0, 1.0, t, 1.0) <= 1.0);
    }

    #[test]
    fn semigroup_diagonal_action() {
        let (g, fan, plan) = setup();
        let node = fan.node_of(PI / 4.0 * 3.0).unwrap();
        let l = fan.nodes()[node];
        let f = GroupFunction::from_fn(g, |z, t| Complex64::from_polar(laguerre_fn_r2(1, 1, l, z[0].norm_sqr()).unwrap(), l * t))
            .unwrap();
        let (tau, d) = (0.3, 0.5);
        let spec = plan.forward(&f).unwrap();
        let e = heat_factors(&fan, tau, d);
        let scaled = spec.scale_by_fan(&e).unwrap();
        let factor = (-tau * (3.0 * l.abs() + d)).exp();
        for (a, b) in scaled.slice(1, node).iter().zip(spec.slice(1, node)) {
            assert_eq!(*a, b * factor);
        }
        let out = heat_semigroup_with(&plan, &f, tau, d).unwrap();
        assert_eq!(out, plan.inverse(&scaled).unwrap());
        let zero_time = heat_semigroup_with(&plan, &f, 0.0, d).unwrap();
        assert_eq!(zero_time, plan.project(&f).unwrap());
        assert!(heat_semigroup_with(&plan, &f, -1.0, d).is_err());
        let pf = lp_norm(&plan.project(&gauss(g, 1.0)).unwrap(), 2.0).unwrap();
        let hf = lp_norm(&heat_semigroup_with(&plan, &gauss(g, 1.0), 0.4, 1.0).unwrap(), 2.0).unwrap();
        assert!(hf <= (-0.4f64).exp() * pf * (1.0 + 1e-12));
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let (g, _, plan) = setup();
        let tg = TimeGrid::new(0.1, 4).unwrap();
        let m = power_symbol(1.0, 1.0, 1).unwrap();
        for kind in [ProblemKind::Heat1, ProblemKind::Heat2, ProblemKind::Wave1, ProblemKind::Wave2] {
            let u1 = kind.is_wave().then(|| GroupFunction::zeros(g));
            let pr = problem(kind, m.clone(), GroupFunction::zeros(g), u1);
            let tr = solve_with(&plan, &pr, tg, 1e-10, 5).unwrap();
            assert_eq!(tr.iterations, 1);
            assert_eq!(tr.residual, 0.0);
            assert!(tr.states.iter().all(|s| s.values().iter().all(|v| v.norm() == 0.0)));
        }
    }

    #[test]
    fn zero_symbol_leaves_data_terms() {
        let (g, _, plan) = setup();
        let tg = TimeGrid::new(0.5, 4).unwrap();
        let zero = Symbol::Constant(c(0.0, 0.0));
        let u0 = gauss(g, 1.0);
        let u1 = gauss(g, -0.5);
        let tr = solve_with(&plan, &problem(ProblemKind::Heat1, zero.clone(), u0.clone(), None), tg, 1e-12, 3).unwrap();
        assert!(tr.states.iter().all(|s| s == &u0));
        let tr = solve_with(&plan, &problem(ProblemKind::Wave1, zero.clone(), u0.clone(), Some(u1.clone())), tg, 1e-12, 3).unwrap();
        for (j, s) in tr.states.iter().enumerate() {
            let want = u0.add(&u1.scale(c(tg.node(j), 0.0))).unwrap();
            assert!(s.relative_l2_error(&want).unwrap() < 1e-15);
        }
        let mut pr = problem(ProblemKind::Heat2, zero, u0.clone(), None);
        pr.d = 0.0;
        let tr = solve_with(&plan, &pr, tg, 1e-12, 3).unwrap();
        for (j, s) in tr.states.iter().enumerate() {
            let want = heat_semigroup_with(&plan, &u0, tg.node(j), 0.0).unwrap();
            assert!(s.relative_l2_error(&want).unwrap() < 1e-12);
        }
    }

    #[test]
    fn heat1_stays_above_real_data() {
        let (g, _, plan) = setup();
        let tg = TimeGrid::new(0.2, 4).unwrap();
        let u0 = gauss(g, 0.5);
        let pr = problem(ProblemKind::Heat1, power_symbol(1.0, 1.0, 1).unwrap(), u0.clone(), None);
        let tr = solve_with(&plan, &pr, tg, 1e-12, 20).unwrap();
        for s in &tr.states {
            for (a, b) in s.values().iter().zip(u0.values()) {
                assert!(a.re >= b.re);
            }
        }
        assert!(tr.residual <= 5e-12);
    }

    #[test]
    fn small_heat2_contracts() {
        let (g, _, plan) = setup();
        let tg = TimeGrid::new(0.2, 4).unwrap();
        let u0 = gauss(g, 1.0);
        let u0 = u0.scale(c(1.0 / lp_norm(&u0, 2.0).unwrap(), 0.0));
        let pr = problem(ProblemKind::Heat2, power_symbol(1.0, 1.0, 1).unwrap(), u0, None);
        let tr = solve_with(&plan, &pr, tg, 1e-12, 30).unwrap();
        let r = observed_contraction(&tr.increments).unwrap();
        assert!(r < 1.0, "{r}");
        assert!(tr.residual <= 5e-12);
    }

    #[test]
    fn large_data_diverges() {
        let (g, _, plan) = setup();
        let tg = TimeGrid::new(2.0, 4).unwrap();
        let pr = problem(ProblemKind::Heat1, Symbol::Constant(c(1.0, 0.0)), gauss(g, 50.0), None);
        match solve_with(&plan, &pr, tg, 1e-10, 50) {
            Err(Error::Divergence { increments }) => assert!(increments.len() >= 3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn wave_problems_need_velocity() {
        let (g, _, plan) = setup();
        let tg = TimeGrid::new(0.1, 2).unwrap();
        let pr = problem(ProblemKind::Wave2, Symbol::Constant(c(1.0, 0.0)), gauss(g, 0.1), None);
        assert!(solve_with(&plan, &pr, tg, 1e-10, 5).is_err());
    }

    #[test]
    fn wave2_kernel_weights_in_range() {
        let (g, _, plan) = setup();
        let pr = problem(ProblemKind::Wave2, Symbol::Constant(c(1.0, 0.0)), gauss(g, 0.1), Some(gauss(g, 0.1)));
        let tg = TimeGrid::new(3.0, 6).unwrap();
        let s = Solver {
            plan: &plan,
            problem: &pr,
            tg,
            u0_spec: None,
        };
        for j in 0..tg.n_nodes() {
            for i in 0..=j {
                let w = s.kernel_weight(i, j) / tg.weight(i, j);
                assert!((0.0..=1.0).contains(&w));
            }
        }
    }
}
