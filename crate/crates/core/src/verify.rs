//! Test corpora and the inequality-ratio harness.
//!
//! Each ratio is `lhs / rhs_base`, where `rhs_base` is the right-hand side of
//! the inequality without its unspecified constant. Reports record ratios as
//! regression baselines; hard assertions cover only identities, invariances
//! and endpoint degeneracies.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fan::{hormander_functional, weak_l1_norm, FanGrid, MeasureKind, Symbol};
use crate::hgroup::{lp_norm, GroupFunction, GroupGrid};
use crate::sft::{lambda_power_weight, mixed_norm, SpectralFunction, TransformPlan};

/// Provenance of a corpus item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemKind {
    Gaussian,
    ModulatedGaussian,
    TranslatedGaussian,
    BandLimited,
}

impl ItemKind {
    pub fn label(&self) -> &'static str {
        match self {
            ItemKind::Gaussian => "gaussian",
            ItemKind::ModulatedGaussian => "modulated-gaussian",
            ItemKind::TranslatedGaussian => "translated-gaussian",
            ItemKind::BandLimited => "band-limited",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub id: String,
    pub kind: ItemKind,
    pub f: GroupFunction,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub seed: u64,
    pub items: Vec<CorpusItem>,
}

/// Spectral window used to build band-limited items: fan points with
/// `lambda_min <= |lambda| <= lambda_max` and `k <= kmax`, damped by
/// `exp(-tau (2k+n)|lambda|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandWindow {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kmax: usize,
    pub tau: f64,
}

impl Default for BandWindow {
    fn default() -> Self {
        Self {
            lambda_min: 1.5,
            lambda_max: 2.5,
            kmax: 1,
            tau: 0.0,
        }
    }
}

impl BandWindow {
    pub fn factors(&self, fan: &FanGrid) -> Vec<Complex64> {
        let n = fan.n();
        let mut out = Vec::with_capacity(fan.len());
        for k in 0..=fan.kmax() {
            for &l in fan.nodes() {
                let inside = k <= self.kmax && l.abs() >= self.lambda_min && l.abs() <= self.lambda_max;
                let v = if inside {
                    (-self.tau * (2 * k + n) as f64 * l.abs()).exp()
                } else {
                    0.0
                };
                out.push(Complex64::new(v, 0.0));
            }
        }
        out
    }
}

/// Roundtrip bound for band-limited items on the default grid
/// (n=1, Lz=6, Nz=24, Lt=8, Nt=48, Kmax=12); measured worst case 2.1e-2.
pub const DEFAULT_ROUNDTRIP_TOLERANCE: f64 = 0.025;

/// Plancherel bound for Gaussian items on the default grid; the worst case
/// over the parameter ranges is 0.263 (alpha=2, beta=0.3).
pub const DEFAULT_PLANCHEREL_TOLERANCE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub kinds: Vec<ItemKind>,
    pub window: BandWindow,
    /// Bound on `||Pf - f||_2 / ||f||_2` enforced for band-limited items.
    pub band_tolerance: f64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            kinds: vec![
                ItemKind::Gaussian,
                ItemKind::ModulatedGaussian,
                ItemKind::TranslatedGaussian,
                ItemKind::BandLimited,
            ],
            window: BandWindow::default(),
            band_tolerance: DEFAULT_ROUNDTRIP_TOLERANCE,
        }
    }
}

fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Bound on Gaussian modulation frequencies, a quarter of the spatial
/// Nyquist band of the default grid.
pub const MAX_MODULATION: f64 = 1.5;

/// `exp(-alpha|z - z0|^2 - beta (t - t0)^2 + i(theta.(x, y) + omega t))`.
///
/// Ranges: `alpha, beta` in `[0.3, 2]`; centres within half the extent of
/// each axis; `|theta_i|, |omega| <= MAX_MODULATION`. The draws do not depend
/// on the grid spacing, so the same seed gives the same function on refined
/// grids.
pub fn gaussian_item(grid: GroupGrid, kind: ItemKind, rng: &mut ChaCha8Rng) -> Result<GroupFunction> {
    let axes = grid.real_axes();
    let alpha = rng.gen_range(0.3..=2.0);
    let beta = rng.gen_range(0.3..=2.0);
    let (mut center, mut t0) = (vec![0.0; axes], 0.0);
    let (mut theta, mut omega) = (vec![0.0; axes], 0.0);
    match kind {
        ItemKind::Gaussian => {}
        ItemKind::ModulatedGaussian => {
            let w = MAX_MODULATION;
            theta = (0..axes).map(|_| rng.gen_range(-w..=w)).collect();
            omega = rng.gen_range(-w..=w);
        }
        ItemKind::TranslatedGaussian => {
            center = (0..axes).map(|_| rng.gen_range(-0.5 * grid.lz..=0.5 * grid.lz)).collect();
            t0 = rng.gen_range(-0.5 * grid.lt..=0.5 * grid.lt);
        }
        ItemKind::BandLimited => {
            return Err(Error::InvalidArgument("band-limited items need a transform plan".into()));
        }
    }
    GroupFunction::from_fn(grid, |z, t| {
        let mut r2 = 0.0;
        let mut ph = omega * t;
        for (j, c) in z.iter().enumerate() {
            let (x, y) = (c.re, c.im);
            r2 += (x - center[2 * j]).powi(2) + (y - center[2 * j + 1]).powi(2);
            ph += theta[2 * j] * x + theta[2 * j + 1] * y;
        }
        Complex64::from_polar((-alpha * r2 - beta * (t - t0).powi(2)).exp(), ph)
    })
}

/// `inverse(window * forward(spikes))` for one to three grid spikes within a
/// quarter of each half-extent of the centre.
pub fn band_limited_item(plan: &TransformPlan, window: &BandWindow, rng: &mut ChaCha8Rng) -> Result<GroupFunction> {
    let g = *plan.grid();
    let mut vals = vec![Complex64::new(0.0, 0.0); g.len()];
    let spikes = rng.gen_range(1..=3);
    let rz = (g.nz / 8) as isize;
    let rt = (g.nt / 8) as isize;
    for _ in 0..spikes {
        let idx: Vec<usize> = (0..g.real_axes())
            .map(|_| (g.nz as isize / 2 + rng.gen_range(-rz..=rz)) as usize)
            .collect();
        let m = (g.nt as isize / 2 + rng.gen_range(-rt..=rt)) as usize;
        let amp = Complex64::from_polar(rng.gen_range(0.5..=1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        vals[g.flat(g.spatial_flat(&idx), m)] += amp / g.cell_volume();
    }
    let spikes = GroupFunction::new(g, vals)?;
    let spec = plan.forward(&spikes)?;
    plan.inverse(&spec.scale_by_fan(&window.factors(plan.fan()))?)
}

/// Relative roundtrip error `||Pf - f||_2 / ||f||_2`.
pub fn roundtrip_error(plan: &TransformPlan, f: &GroupFunction) -> Result<f64> {
    plan.project(f)?.relative_l2_error(f)
}

/// Corpus cycling through `opts.kinds`; item `i` draws from its own stream.
pub fn make_corpus(plan: &TransformPlan, seed: u64, count: usize, opts: &CorpusOptions) -> Result<Corpus> {
    if count == 0 {
        return Err(Error::InvalidArgument("corpus needs at least one item".into()));
    }
    if opts.kinds.is_empty() {
        return Err(Error::InvalidArgument("corpus needs at least one item kind".into()));
    }
    let items = (0..count)
        .into_par_iter()
        .map(|i| {
            let kind = opts.kinds[i % opts.kinds.len()];
            let mut rng = item_rng(seed, i);
            let f = match kind {
                ItemKind::BandLimited => {
                    let f = band_limited_item(plan, &opts.window, &mut rng)?;
                    let err = roundtrip_error(plan, &f)?;
                    if !(err <= opts.band_tolerance) {
                        return Err(Error::Precondition(format!(
                            "band-limited item {i} has roundtrip error {err:e} above {:e}",
                            opts.band_tolerance
                        )));
                    }
                    f
                }
                _ => gaussian_item(*plan.grid(), kind, &mut rng)?,
            };
            if lp_norm(&f, 2.0)? == 0.0 {
                return Err(Error::Precondition(format!("corpus item {i} vanishes")));
            }
            Ok(CorpusItem {
                id: format!("{i:03}-{}", kind.label()),
                kind,
                f,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Corpus { seed, items })
}

/// Gaussian-only corpus (plain, modulated, translated in turn).
pub fn gaussian_corpus(grid: GroupGrid, seed: u64, count: usize) -> Result<Corpus> {
    if count == 0 {
        return Err(Error::InvalidArgument("corpus needs at least one item".into()));
    }
    let kinds = [ItemKind::Gaussian, ItemKind::ModulatedGaussian, ItemKind::TranslatedGaussian];
    let items = (0..count)
        .map(|i| {
            let kind = kinds[i % 3];
            Ok(CorpusItem {
                id: format!("{i:03}-{}", kind.label()),
                kind,
                f: gaussian_item(grid, kind, &mut item_rng(seed, i))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Corpus { seed, items })
}

/// `p / (p - 1)`, with `1 -> inf`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Numerator and denominator of a ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub lhs: f64,
    pub rhs_base: f64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.lhs / self.rhs_base
    }
}

fn phi_values(phi: &Symbol, fan: &FanGrid) -> Result<Vec<f64>> {
    let vals = phi.tabulate_bounded(fan)?;
    vals.iter()
        .map(|v| {
            if v.im != 0.0 || !(v.re > 0.0) {
                Err(Error::Precondition(format!("Paley weight must be real and positive, found {v}")))
            } else {
                Ok(v.re)
            }
        })
        .collect()
}

/// Shared body of the HY/Paley/HYP numerators:
/// `(sum mu phi^{e} |lambda|^{n b / 2} ||F(a, .)||_2^b)^{1/b}`.
fn weighted_spectral_norm(spec: &SpectralFunction, phi: Option<(&[f64], f64)>, b: f64) -> Result<f64> {
    let fan = spec.fan();
    let mut w = lambda_power_weight(fan, fan.n() as f64 * b / 2.0);
    if let Some((vals, e)) = phi {
        if e != 0.0 {
            for (x, v) in w.iter_mut().zip(vals) {
                *x *= v.powf(e);
            }
        }
    }
    mixed_norm(spec, 2.0, b, MeasureKind::Mu, &w)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (1, 2], got {p}")));
    }
    Ok(())
}

fn positive_norm(f: &GroupFunction, p: f64) -> Result<f64> {
    let v = lp_norm(f, p)?;
    if v == 0.0 {
        return Err(Error::Precondition("ratio of the zero function".into()));
    }
    Ok(v)
}

/// Hausdorff-Young: `||F||_{(2, p'), mu, |lambda|^{n p'/2}} / ||f||_p`.
pub fn hy_ratio(spec: &SpectralFunction, f: &GroupFunction, p: f64) -> Result<Ratio> {
    check_p(p)?;
    Ok(Ratio {
        lhs: weighted_spectral_norm(spec, None, conjugate(p))?,
        rhs_base: positive_norm(f, p)?,
    })
}

/// Reverse Hausdorff-Young for `p > 2`: `||f||_p / ||F||_{(2, p'), ...}`.
pub fn dual_hy_ratio(spec: &SpectralFunction, f: &GroupFunction, p: f64) -> Result<Ratio> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must exceed 2, got {p}")));
    }
    let rhs = weighted_spectral_norm(spec, None, conjugate(p))?;
    if rhs == 0.0 {
        return Err(Error::Precondition("spectral side vanishes".into()));
    }
    Ok(Ratio {
        lhs: lp_norm(f, p)?,
        rhs_base: rhs,
    })
}

/// Hausdorff-Young-Paley for `p <= b <= p'`.
pub fn hyp_ratio(spec: &SpectralFunction, f: &GroupFunction, phi: &Symbol, p: f64, b: f64) -> Result<Ratio> {
    check_p(p)?;
    let pc = conjugate(p);
    if !(b >= p && b <= pc) {
        return Err(Error::InvalidArgument(format!("b must lie in [{p}, {pc}], got {b}")));
    }
    let vals = phi_values(phi, spec.fan())?;
    let weak = weak_l1_norm(&vals, MeasureKind::Mu, spec.fan())?;
    let lhs = weighted_spectral_norm(spec, Some((&vals, 1.0 - b / pc)), b)?;
    let e = 1.0 / b - 1.0 / pc;
    let weak_factor = if e == 0.0 { 1.0 } else { weak.powf(e) };
    Ok(Ratio {
        lhs,
        rhs_base: weak_factor * positive_norm(f, p)?,
    })
}

/// Paley: `hyp_ratio` at `b = p`.
pub fn paley_ratio(spec: &SpectralFunction, f: &GroupFunction, phi: &Symbol, p: f64) -> Result<Ratio> {
    hyp_ratio(spec, f, phi, p, p)
}

/// `||T_m f||_q / ||f||_p` for `1 < p <= 2 <= q < inf`.
pub fn lplq_ratio(plan: &TransformPlan, spec: &SpectralFunction, m: &Symbol, f: &GroupFunction, p: f64, q: f64) -> Result<Ratio> {
    check_lplq(p, q)?;
    let tm = plan.inverse(&spec.scale_by_fan(&m.tabulate_bounded(plan.fan())?)?)?;
    lplq_from_image(&tm, f, p, q)
}

fn check_lplq(p: f64, q: f64) -> Result<()> {
    check_p(p)?;
    if !(q >= 2.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("q must lie in [2, inf), got {q}")));
    }
    Ok(())
}

fn lplq_from_image(tm: &GroupFunction, f: &GroupFunction, p: f64, q: f64) -> Result<Ratio> {
    check_lplq(p, q)?;
    Ok(Ratio {
        lhs: lp_norm(tm, q)?,
        rhs_base: positive_norm(f, p)?,
    })
}

/// Positive Paley weight `|lambda|^{-n} (1 + k)^{-2}`.
pub fn paley_witness(fan: &FanGrid) -> Symbol {
    let n = fan.n() as i32;
    Symbol::from_fn(fan, |k, l| Complex64::new(l.abs().powi(-n) / ((1 + k) as f64).powi(2), 0.0))
}

/// Parses `power:beta=B,gamma=G`, `const:C` or `one`.
pub fn parse_symbol(spec: &str, n: usize) -> Result<Symbol> {
    let bad = || Error::InvalidArgument(format!("cannot parse symbol {spec:?}; expected power:beta=B,gamma=G or const:C"));
    if spec == "one" {
        return Ok(Symbol::Constant(Complex64::new(1.0, 0.0)));
    }
    if let Some(rest) = spec.strip_prefix("const:") {
        let c: f64 = rest.parse().map_err(|_| bad())?;
        return Ok(Symbol::Constant(Complex64::new(c, 0.0)));
    }
    if let Some(rest) = spec.strip_prefix("power:") {
        let (mut beta, mut gamma) = (None, None);
        for part in rest.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "beta" => beta = Some(v),
                "gamma" => gamma = Some(v),
                _ => return Err(bad()),
            }
        }
        return crate::fan::power_symbol(beta.ok_or_else(bad)?, gamma.ok_or_else(bad)?, n);
    }
    Err(bad())
}

pub const SUITES: &[&str] = &["default", "plancherel", "hy", "dual-hy", "paley", "hyp", "lplq", "hormander"];

/// Everything a report run needs besides the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub suites: Vec<String>,
    pub count: usize,
    pub corpus: CorpusOptions,
    pub hy_p: Vec<f64>,
    pub dual_p: Vec<f64>,
    pub paley_p: Vec<f64>,
    pub lplq: Vec<[f64; 2]>,
    pub lplq_symbols: Vec<String>,
    /// Allowed `|hy_ratio(f, 2) - 1|`.
    pub plancherel_tolerance: f64,
    /// Slack for interior HYP ratios over the larger endpoint.
    pub hyp_epsilon: f64,
    pub scale: f64,
    pub hormander_symbol: String,
    pub hormander_n: usize,
    pub hormander_p: f64,
    pub hormander_q: f64,
    pub hormander_kmax: usize,
    /// Relative change under refinement counted as stable.
    pub hormander_stability: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suites: vec!["default".into()],
            count: 8,
            corpus: CorpusOptions::default(),
            hy_p: vec![1.5, 2.0],
            dual_p: vec![3.0, 4.0],
            paley_p: vec![1.5, 2.0],
            lplq: vec![[2.0, 4.0], [1.5, 3.0]],
            lplq_symbols: vec!["power:beta=1,gamma=2".into(), "const:0".into()],
            plancherel_tolerance: DEFAULT_PLANCHEREL_TOLERANCE,
            hyp_epsilon: 0.1,
            scale: 3.0,
            hormander_symbol: "power:beta=0.5,gamma=1".into(),
            hormander_n: 3,
            hormander_p: 2.0,
            hormander_q: 4.0,
            hormander_kmax: 16,
            hormander_stability: 0.01,
        }
    }
}

impl VerifyConfig {
    /// Expands `default` and rejects unknown names.
    pub fn expanded_suites(&self) -> Result<Vec<String>> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown suite {s:?}; available: {}",
                    SUITES.join(", ")
                )));
            }
            let names: Vec<&str> = if s == "default" {
                vec!["plancherel", "hy", "dual-hy", "paley", "hyp", "lplq"]
            } else {
                vec![s.as_str()]
            };
            for n in names {
                if !out.iter().any(|o| o == n) {
                    out.push(n.to_string());
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub check: String,
    pub p: f64,
    pub q: Option<f64>,
    pub b: Option<f64>,
    pub symbol_id: Option<String>,
    pub item_id: String,
    pub lhs: f64,
    pub rhs_base: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub check: String,
    pub count: usize,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub grid: GroupGrid,
    #[serde(rename = "Kmax")]
    pub kmax: usize,
    pub seed: u64,
    pub corpus: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub environment: Environment,
    pub suites: Vec<String>,
    pub entries: Vec<RatioEntry>,
    pub aggregates: Vec<Aggregate>,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
}

impl RatioReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub const CSV_HEADER: &'static str = "check,p,q,b,symbol_id,item_id,lhs,rhs_base,ratio";

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        }
        if self.entries.is_empty() {
            w.write_record(Self::CSV_HEADER.split(',')).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn entry(check: &str, p: f64, q: Option<f64>, b: Option<f64>, sym: Option<String>, item: &str, r: Ratio) -> RatioEntry {
    RatioEntry {
        check: check.into(),
        p,
        q,
        b,
        symbol_id: sym,
        item_id: item.into(),
        lhs: r.lhs,
        rhs_base: r.rhs_base,
        ratio: r.value(),
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

struct ItemOutcome {
    entries: Vec<RatioEntry>,
    assertions: Vec<Assertion>,
}

fn assertion(name: String, passed: bool, detail: String) -> Assertion {
    Assertion { name, passed, detail }
}

const EXACT: f64 = 1e-12;

fn run_item(
    plan: &TransformPlan,
    item: &CorpusItem,
    suites: &[String],
    cfg: &VerifyConfig,
    phi: &Symbol,
    lplq_syms: &[Symbol],
) -> Result<ItemOutcome> {
    let f = &item.f;
    let spec = plan.forward(f)?;
    let scaled = f.scale(Complex64::new(cfg.scale, 0.0));
    let spec_scaled = plan.forward(&scaled)?;
    let id = item.id.as_str();
    let mut entries = Vec::new();
    let mut asserts = Vec::new();
    let scale_check = |asserts: &mut Vec<Assertion>, name: String, a: Ratio, b: Ratio| {
        let g = rel_gap(a.value(), b.value());
        asserts.push(assertion(format!("{name} scale invariance [{id}]"), g <= EXACT, format!("relative gap {g:e}")));
    };
    let has = |s: &str| suites.iter().any(|x| x == s);
    if has("plancherel") {
        let r = hy_ratio(&spec, f, 2.0)?;
        entries.push(entry("plancherel", 2.0, None, None, None, id, r));
    }
    if has("hy") {
        for &p in &cfg.hy_p {
            let r = hy_ratio(&spec, f, p)?;
            scale_check(&mut asserts, format!("hy p={p}"), r, hy_ratio(&spec_scaled, &scaled, p)?);
            entries.push(entry("hy", p, None, None, None, id, r));
        }
    }
    if has("dual-hy") && item.kind == ItemKind::BandLimited {
        for &p in &cfg.dual_p {
            let r = dual_hy_ratio(&spec, f, p)?;
            scale_check(&mut asserts, format!("dual-hy p={p}"), r, dual_hy_ratio(&spec_scaled, &scaled, p)?);
            entries.push(entry("dual-hy", p, None, None, None, id, r));
        }
    }
    if has("paley") {
        let phi_c = Symbol::Table {
            kmax: plan.fan().kmax(),
            n_nodes: plan.fan().n_nodes(),
            values: phi.tabulate(plan.fan())?.iter().map(|v| v * cfg.scale).collect(),
        };
        for &p in &cfg.paley_p {
            let r = paley_ratio(&spec, f, phi, p)?;
            scale_check(&mut asserts, format!("paley p={p}"), r, paley_ratio(&spec_scaled, &scaled, phi, p)?);
            let rc = paley_ratio(&spec, f, &phi_c, p)?;
            let g = rel_gap(r.value(), rc.value());
            asserts.push(assertion(format!("paley p={p} weight homogeneity [{id}]"), g <= EXACT, format!("relative gap {g:e}")));
            entries.push(entry("paley", p, None, None, Some("paley-witness".into()), id, r));
        }
    }
    if has("hyp") {
        for &p in &cfg.paley_p {
            let pc = conjugate(p);
            let lo = hyp_ratio(&spec, f, phi, p, p)?;
            let hi = hyp_ratio(&spec, f, phi, p, pc)?;
            let hy = hy_ratio(&spec, f, p)?;
            let pa = paley_ratio(&spec, f, phi, p)?;
            let g1 = rel_gap(hi.value(), hy.value());
            let g2 = rel_gap(lo.value(), pa.value());
            asserts.push(assertion(format!("hyp p={p} b=p' equals hy [{id}]"), g1 <= EXACT, format!("relative gap {g1:e}")));
            asserts.push(assertion(format!("hyp p={p} b=p equals paley [{id}]"), g2 <= EXACT, format!("relative gap {g2:e}")));
            let b = 0.5 * (p + pc);
            let mid = hyp_ratio(&spec, f, phi, p, b)?;
            let cap = lo.value().max(hi.value()) * (1.0 + cfg.hyp_epsilon);
            asserts.push(assertion(
                format!("hyp p={p} interior bounded by endpoints [{id}]"),
                mid.value() <= cap,
                format!("interior {:e}, cap {cap:e}", mid.value()),
            ));
            for (bb, r) in [(p, lo), (b, mid), (pc, hi)] {
                entries.push(entry("hyp", p, None, Some(bb), Some("paley-witness".into()), id, r));
            }
        }
    }
    if has("lplq") {
        for (sym, name) in lplq_syms.iter().zip(&cfg.lplq_symbols) {
            let table = sym.tabulate_bounded(plan.fan())?;
            let tm = plan.inverse(&spec.scale_by_fan(&table)?)?;
            let tm_scaled = plan.inverse(&spec_scaled.scale_by_fan(&table)?)?;
            let zero = table.iter().all(|v| v.norm() == 0.0);
            for &[p, q] in &cfg.lplq {
                let r = lplq_from_image(&tm, f, p, q)?;
                scale_check(&mut asserts, format!("lplq {name} p={p} q={q}"), r, lplq_from_image(&tm_scaled, &scaled, p, q)?);
                if zero {
                    asserts.push(assertion(format!("lplq {name} p={p} q={q} zero symbol [{id}]"), r.lhs == 0.0, format!("lhs {:e}", r.lhs)));
                }
                entries.push(entry("lplq", p, Some(q), None, Some(sym.id()), id, r));
            }
        }
    }
    Ok(ItemOutcome { entries, assertions: asserts })
}

/// Hormander functional on a fan and on its refinement (`Kmax` doubled,
/// `dlambda` halved over the same `lambda` range).
pub fn hormander_refinement(m: &Symbol, n: usize, p: f64, q: f64, lt: f64, nt: usize, kmax: usize) -> Result<(f64, f64)> {
    let coarse = FanGrid::new(n, lt, nt, kmax)?;
    let fine = FanGrid::new(n, 2.0 * lt, 2 * nt, 2 * kmax)?;
    Ok((hormander_functional(m, p, q, &coarse)?, hormander_functional(m, p, q, &fine)?))
}

/// Runs the configured suites over a fresh corpus on `grid` with a fan
/// truncated at `kmax`. The transform plan is built only when a corpus suite
/// is requested.
pub fn run_report(grid: GroupGrid, kmax: usize, seed: u64, cfg: &VerifyConfig) -> Result<RatioReport> {
    let suites = cfg.expanded_suites()?;
    let fan = FanGrid::for_grid(&grid, kmax)?;
    let mut entries = Vec::new();
    let mut assertions = Vec::new();
    let mut notes = Vec::new();
    let corpus_suites: Vec<String> = suites.iter().filter(|s| *s != "hormander").cloned().collect();
    let mut corpus_ids = Vec::new();
    if !corpus_suites.is_empty() {
        let plan = TransformPlan::new(grid, fan.clone())?;
        let plan = &plan;
        let corpus = make_corpus(plan, seed, cfg.count, &cfg.corpus)?;
        corpus_ids = corpus.items.iter().map(|i| i.id.clone()).collect();
        let phi = paley_witness(&fan);
        let syms = cfg
            .lplq_symbols
            .iter()
            .map(|s| parse_symbol(s, grid.n))
            .collect::<Result<Vec<_>>>()?;
        let outcomes: Vec<ItemOutcome> = corpus
            .items
            .par_iter()
            .map(|item| run_item(plan, item, &corpus_suites, cfg, &phi, &syms))
            .collect::<Result<_>>()?;
        for o in outcomes {
            entries.extend(o.entries);
            assertions.extend(o.assertions);
        }
        let bad: Vec<&RatioEntry> = entries.iter().filter(|e| !(e.ratio.is_finite() && e.ratio >= 0.0)).collect();
        assertions.push(assertion(
            "all ratios finite and nonnegative".into(),
            bad.is_empty(),
            format!("{} offending entries", bad.len()),
        ));
        if suites.iter().any(|s| s == "plancherel") {
            let worst = entries
                .iter()
                .filter(|e| e.check == "plancherel")
                .map(|e| (e.ratio - 1.0).abs())
                .fold(0.0f64, f64::max);
            assertions.push(assertion(
                "plancherel ratio within tolerance of 1".into(),
                worst <= cfg.plancherel_tolerance,
                format!("max |ratio - 1| = {worst:e}, tolerance {:e}", cfg.plancherel_tolerance),
            ));
        }
    }
    if suites.iter().any(|s| s == "hormander") {
        let m = parse_symbol(&cfg.hormander_symbol, cfg.hormander_n)?;
        let (a, b) = hormander_refinement(&m, cfg.hormander_n, cfg.hormander_p, cfg.hormander_q, grid.lt, grid.nt, cfg.hormander_kmax)?;
        let change = rel_gap(b, a);
        let verdict = if change <= cfg.hormander_stability { "stable" } else { "not stable" };
        for (label, v) in [(format!("Kmax={}", cfg.hormander_kmax), a), (format!("Kmax={}", 2 * cfg.hormander_kmax), b)] {
            entries.push(RatioEntry {
                check: "hormander".into(),
                p: cfg.hormander_p,
                q: Some(cfg.hormander_q),
                b: None,
                symbol_id: Some(m.id()),
                item_id: format!("fan:n={},{label}", cfg.hormander_n),
                lhs: v,
                rhs_base: 1.0,
                ratio: v,
            });
        }
        notes.push(format!(
            "hormander {} n={} p={} q={}: {a:e} -> {b:e} (relative change {change:e}, {verdict})",
            m.id(),
            cfg.hormander_n,
            cfg.hormander_p,
            cfg.hormander_q
        ));
        assertions.push(assertion(
            "hormander functional finite".into(),
            a.is_finite() && b.is_finite(),
            format!("{a:e}, {b:e}"),
        ));
    }
    let mut checks: Vec<String> = Vec::new();
    for e in &entries {
        if !checks.contains(&e.check) {
            checks.push(e.check.clone());
        }
    }
    let aggregates = checks
        .into_iter()
        .map(|c| {
            let vals: Vec<f64> = entries.iter().filter(|e| e.check == c).map(|e| e.ratio).collect();
            Aggregate {
                count: vals.len(),
                max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                mean: crate::reduce::pairwise_sum(&vals) / vals.len() as f64,
                check: c,
            }
        })
        .collect();
    Ok(RatioReport {
        environment: Environment {
            grid,
            kmax,
            seed,
            corpus: corpus_ids,
        },
        suites,
        entries,
        aggregates,
        assertions,
        notes,
    })
}
