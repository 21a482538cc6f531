//! Expected collision probability over operating regions.
//!
//! ACP averages the collision probability over the applicable space D
//! (heading, distance and speed drawn uniformly and independently). CCP
//! averages it over the critical space C, drawn hierarchically: speed first,
//! then a distance no farther than what the robot covers within a short
//! horizon, then a heading inside the collision cone.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collision::{collision_probability, PerceptionProfile};
use crate::error::{Error, Result};
use crate::geometry::{alpha_critical, EncounterState, SafetyMargins};

/// Samples per Monte-Carlo chunk. Every chunk owns an independent ChaCha
/// stream derived from the seed and the chunk index.
pub const MC_CHUNK: usize = 4096;

pub const DEFAULT_GRID: usize = 64;

/// Closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidParam("interval bounds must be finite and ordered"));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Midpoint-rule node `i` of `n`.
    fn midpoint(&self, i: usize, n: usize) -> f64 {
        self.lo + self.width() * (i as f64 + 0.5) / n as f64
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.lo + self.width() * rng.random::<f64>()
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Applicable operating space for ACP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpaceD {
    pub alpha: Interval,
    pub r: Interval,
    pub u: Interval,
    /// Response latency applied to every profile evaluated over this space.
    /// `None` keeps each profile's own `t_r`.
    pub t_r: Option<f64>,
}

impl ParamSpaceD {
    /// Headings over the full circle, 0.25–1.5 m, 0.02–1 m/s, 0.1 s response.
    pub fn standard() -> Self {
        Self {
            alpha: Interval { lo: -PI, hi: PI },
            r: Interval { lo: 0.25, hi: 1.5 },
            u: Interval { lo: 0.02, hi: 1.0 },
            t_r: Some(0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.lo < -PI || self.alpha.hi > PI {
            return Err(Error::InvalidParam("alpha range must lie within [-pi, pi]"));
        }
        if self.r.lo < 0.0 || self.u.lo < 0.0 {
            return Err(Error::InvalidParam("distance and speed ranges must be non-negative"));
        }
        validate_t_r(self.t_r)
    }
}

/// Critical space for CCP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpaceC {
    pub u: Interval,
    pub r_lower: f64,
    /// Distance horizon in seconds; the distance range is
    /// `[r_lower, max(r_lower, horizon * u)]`.
    pub horizon: f64,
    pub t_r: Option<f64>,
}

impl ParamSpaceC {
    /// 0.02–1 m/s, distances from 0.25 m out to half a second of travel.
    pub fn standard() -> Self {
        Self {
            u: Interval { lo: 0.02, hi: 1.0 },
            r_lower: 0.25,
            horizon: 0.5,
            t_r: Some(0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.lo < 0.0 {
            return Err(Error::InvalidParam("speed range must be non-negative"));
        }
        if !(self.r_lower.is_finite() && self.r_lower >= 0.0) {
            return Err(Error::InvalidParam("r_lower must be non-negative"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::InvalidParam("horizon must be non-negative"));
        }
        validate_t_r(self.t_r)
    }

    pub fn r_range(&self, u: f64) -> Interval {
        Interval {
            lo: self.r_lower,
            hi: self.r_lower.max(self.horizon * u),
        }
    }
}

fn validate_t_r(t_r: Option<f64>) -> Result<()> {
    match t_r {
        Some(t) if !(t.is_finite() && t >= 0.0) => Err(Error::OutOfRange { what: "t_r", value: t }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Midpoint rule, `resolution` nodes per axis. The contact band of the
    /// distance axis and the outside of the collision cone are integrated
    /// exactly; nodes are placed only where the probability varies.
    Grid,
    /// Uniform sampling, `resolution` samples.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrationConfig {
    pub method: Method,
    pub resolution: usize,
    pub seed: u64,
}

impl IntegrationConfig {
    pub fn grid(points_per_axis: usize) -> Self {
        Self {
            method: Method::Grid,
            resolution: points_per_axis,
            seed: 0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: Method::MonteCarlo,
            resolution: samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min = match self.method {
            Method::Grid => 2,
            Method::MonteCarlo => 1,
        };
        if self.resolution < min {
            return Err(Error::InvalidParam("integration resolution too small"));
        }
        Ok(())
    }
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self::grid(DEFAULT_GRID)
    }
}

/// An expectation together with the estimator that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Standard error of the mean; Monte-Carlo only.
    pub stderr: Option<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyReport {
    pub ccp: Estimate,
    pub acp: Estimate,
    pub config: IntegrationConfig,
}

fn pc_at(p: &PerceptionProfile, margins: SafetyMargins, r: f64, u: f64, alpha: f64) -> f64 {
    let e = EncounterState {
        r,
        u,
        alpha,
        margins,
        degenerate: r == 0.0 || u == 0.0,
    };
    collision_probability(&e, p)
}

/// Mean of `f` over `[−alpha_c, alpha_c] ∩ range`, weighted by the fraction of
/// `range` the cone covers. Outside the cone the collision probability is
/// zero, so placing the nodes on the cone alone is exact for that part.
fn cone_average(
    range: &Interval,
    r: f64,
    margins: SafetyMargins,
    n: usize,
    mut f: impl FnMut(f64) -> f64,
) -> (f64, usize) {
    if r <= margins.sum() {
        return (1.0, 0);
    }
    if range.width() == 0.0 {
        return (f(range.lo), 1);
    }
    let alpha_c = alpha_critical(r, margins).expect("r beyond contact");
    let Some(cone) = range.intersect(&Interval { lo: -alpha_c, hi: alpha_c }) else {
        return (0.0, 0);
    };
    if cone.width() == 0.0 {
        return (0.0, 0);
    }
    let sum: f64 = (0..n).map(|k| f(cone.midpoint(k, n))).sum();
    (sum / n as f64 * cone.width() / range.width(), n)
}

/// Splits a distance range at the contact distance. Returns the probability
/// mass of the contact part (where the collision probability is 1) and the
/// remaining contact-free part, if any.
fn split_contact(range: &Interval, contact: f64) -> (f64, Option<Interval>) {
    if range.width() == 0.0 {
        return if range.lo <= contact { (1.0, None) } else { (0.0, Some(*range)) };
    }
    if range.hi <= contact {
        return (1.0, None);
    }
    if range.lo >= contact {
        return (0.0, Some(*range));
    }
    let free = Interval { lo: contact, hi: range.hi };
    (1.0 - free.width() / range.width(), Some(free))
}

fn mc_mean(
    samples: usize,
    seed: u64,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Estimate {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let chunks = samples.div_ceil(MC_CHUNK);
    for chunk in 0..chunks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk as u64);
        let len = MC_CHUNK.min(samples - chunk * MC_CHUNK);
        let (mut s, mut sq) = (0.0, 0.0);
        for _ in 0..len {
            let v = draw(&mut rng);
            s += v;
            sq += v * v;
        }
        sum += s;
        sum_sq += sq;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        stderr: Some(libm::sqrt(var / n)),
        evaluations: samples,
    }
}

/// Average collision probability over the applicable space.
pub fn acp(
    p: &PerceptionProfile,
    margins: SafetyMargins,
    d: &ParamSpaceD,
    cfg: &IntegrationConfig,
) -> Result<Estimate> {
    d.validate()?;
    cfg.validate()?;
    let p = d.t_r.map_or(*p, |t| p.with_t_r(t));
    Ok(match cfg.method {
        Method::Grid => {
            let n = cfg.resolution;
            let (contact_mass, free) = split_contact(&d.r, margins.sum());
            let mut sum = 0.0;
            let mut evaluations = 0;
            if let Some(free) = free {
                let nr = if free.width() == 0.0 { 1 } else { n };
                for i in 0..nr {
                    let r = free.midpoint(i, nr);
                    for j in 0..n {
                        let u = d.u.midpoint(j, n);
                        let (v, k) = cone_average(&d.alpha, r, margins, n, |a| pc_at(&p, margins, r, u, a));
                        sum += v;
                        evaluations += k;
                    }
                }
                sum /= (nr * n) as f64;
            }
            Estimate {
                value: contact_mass + (1.0 - contact_mass) * sum,
                stderr: None,
                evaluations,
            }
        }
        Method::MonteCarlo => mc_mean(cfg.resolution, cfg.seed, |rng| {
            let alpha = d.alpha.sample(rng);
            let r = d.r.sample(rng);
            let u = d.u.sample(rng);
            pc_at(&p, margins, r, u, alpha)
        }),
    })
}

/// Critical collision probability over the critical space.
pub fn ccp(
    p: &PerceptionProfile,
    margins: SafetyMargins,
    c: &ParamSpaceC,
    cfg: &IntegrationConfig,
) -> Result<Estimate> {
    c.validate()?;
    cfg.validate()?;
    let p = c.t_r.map_or(*p, |t| p.with_t_r(t));
    Ok(match cfg.method {
        Method::Grid => {
            let n = cfg.resolution;
            let mut sum = 0.0;
            let mut evaluations = 0;
            for j in 0..n {
                let u = c.u.midpoint(j, n);
                let (contact_mass, free) = split_contact(&c.r_range(u), margins.sum());
                let mut inner = 0.0;
                if let Some(free) = free {
                    let nr = if free.width() == 0.0 { 1 } else { n };
                    for i in 0..nr {
                        let r = free.midpoint(i, nr);
                        inner += if r <= margins.sum() {
                            1.0
                        } else {
                            let alpha_c = alpha_critical(r, margins).expect("r beyond contact");
                            let cone = Interval { lo: -alpha_c, hi: alpha_c };
                            evaluations += n;
                            (0..n).map(|k| pc_at(&p, margins, r, u, cone.midpoint(k, n))).sum::<f64>() / n as f64
                        };
                    }
                    inner /= nr as f64;
                }
                sum += contact_mass + (1.0 - contact_mass) * inner;
            }
            Estimate {
                value: sum / n as f64,
                stderr: None,
                evaluations,
            }
        }
        Method::MonteCarlo => mc_mean(cfg.resolution, cfg.seed, |rng| {
            let u = c.u.sample(rng);
            let r = c.r_range(u).sample(rng);
            let alpha_u: f64 = rng.random();
            if r <= margins.sum() {
                return 1.0;
            }
            let alpha_c = alpha_critical(r, margins).expect("r beyond contact");
            pc_at(&p, margins, r, u, alpha_c * (2.0 * alpha_u - 1.0))
        }),
    })
}

pub fn safety_report(
    p: &PerceptionProfile,
    margins: SafetyMargins,
    c: &ParamSpaceC,
    d: &ParamSpaceD,
    cfg: &IntegrationConfig,
) -> Result<SafetyReport> {
    Ok(SafetyReport {
        ccp: ccp(p, margins, c, cfg)?,
        acp: acp(p, margins, d, cfg)?,
        config: *cfg,
    })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Collision probability sampled on a distance × speed grid at fixed heading.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub r_axis: Vec<f64>,
    pub u_axis: Vec<f64>,
    /// Row-major, one row per distance.
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl HeatmapGrid {
    pub fn get(&self, i_r: usize, j_u: usize) -> f64 {
        self.values[i_r * self.u_axis.len() + j_u]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.u_axis.len().max(1))
    }
}

fn check_axis(axis: &[f64]) -> Result<()> {
    if axis.is_empty() || axis.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParam("axis values must be finite and non-negative"));
    }
    if axis.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParam("axis must be sorted ascending"));
    }
    Ok(())
}

pub fn heatmap(
    p: &PerceptionProfile,
    margins: SafetyMargins,
    r_axis: &[f64],
    u_axis: &[f64],
    alpha: f64,
) -> Result<HeatmapGrid> {
    check_axis(r_axis)?;
    check_axis(u_axis)?;
    if !(alpha.is_finite() && (-PI..=PI).contains(&alpha)) {
        return Err(Error::OutOfRange { what: "alpha", value: alpha });
    }
    let mut values = Vec::with_capacity(r_axis.len() * u_axis.len());
    for &r in r_axis {
        for &u in u_axis {
            values.push(pc_at(p, margins, r, u, alpha));
        }
    }
    Ok(HeatmapGrid {
        r_axis: r_axis.to_vec(),
        u_axis: u_axis.to_vec(),
        values,
        alpha,
    })
}

/// Relative decrease from a baseline value to a candidate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decrease {
    /// `100 * (base - cand) / base`; negative when the candidate is worse.
    Percent(f64),
    /// Baseline is zero but the candidate is not; no percentage exists.
    CandidateWorse,
}

impl Decrease {
    pub fn percent(&self) -> Option<f64> {
        match self {
            Decrease::Percent(p) => Some(*p),
            Decrease::CandidateWorse => None,
        }
    }
}

pub fn decrease(base: f64, cand: f64) -> Decrease {
    if base > 0.0 {
        Decrease::Percent(100.0 * (base - cand) / base)
    } else if cand > 0.0 {
        Decrease::CandidateWorse
    } else {
        Decrease::Percent(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseGrid {
    pub r_axis: Vec<f64>,
    pub u_axis: Vec<f64>,
    pub values: Vec<Decrease>,
}

impl DecreaseGrid {
    pub fn get(&self, i_r: usize, j_u: usize) -> Decrease {
        self.values[i_r * self.u_axis.len() + j_u]
    }
}

pub fn compare_grids(base: &HeatmapGrid, cand: &HeatmapGrid) -> Result<DecreaseGrid> {
    if base.r_axis != cand.r_axis || base.u_axis != cand.u_axis || base.alpha != cand.alpha {
        return Err(Error::AxisMismatch);
    }
    Ok(DecreaseGrid {
        r_axis: base.r_axis.clone(),
        u_axis: base.u_axis.clone(),
        values: base
            .values
            .iter()
            .zip(&cand.values)
            .map(|(&b, &c)| decrease(b, c))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportComparison {
    pub ccp: Decrease,
    pub acp: Decrease,
}

pub fn compare_reports(base: &SafetyReport, cand: &SafetyReport) -> Result<ReportComparison> {
    if base.config != cand.config {
        return Err(Error::AxisMismatch);
    }
    Ok(ReportComparison {
        ccp: decrease(base.ccp.value, cand.ccp.value),
        acp: decrease(base.acp.value, cand.acp.value),
    })
}

/// Published CCP / ACP values for one profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub profile: PerceptionProfile,
    pub ccp: Option<f64>,
    pub acp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Best-fit `s_a + s_b`, split evenly between gripper and hand.
    pub margins_sum: f64,
    /// Sum of squared relative errors at the best fit.
    pub residual: f64,
    /// Objective at every scanned margins sum.
    pub scan: Vec<(f64, f64)>,
}

/// Objective of [`calibrate_margins`]: sum of squared relative errors of
/// every target metric at the given margins sum.
pub fn calibration_objective(
    targets: &[CalibrationTarget],
    margins_sum: f64,
    c: &ParamSpaceC,
    d: &ParamSpaceD,
    cfg: &IntegrationConfig,
) -> Result<f64> {
    let margins = SafetyMargins::split_even(margins_sum)?;
    let mut total = 0.0;
    for t in targets {
        if let Some(want) = t.ccp {
            let got = ccp(&t.profile, margins, c, cfg)?.value;
            total += sq_rel(got, want);
        }
        if let Some(want) = t.acp {
            let got = acp(&t.profile, margins, d, cfg)?.value;
            total += sq_rel(got, want);
        }
    }
    Ok(total)
}

fn sq_rel(got: f64, want: f64) -> f64 {
    let scale = if want.abs() > 0.0 { want.abs() } else { 1.0 };
    let e = (got - want) / scale;
    e * e
}

/// Recovers the margins sum that best reproduces the targets.
///
/// Dense scan over `search` with `steps` points, followed by a golden-section
/// refinement inside the bracket around the best scan point.
pub fn calibrate_margins(
    targets: &[CalibrationTarget],
    search: Interval,
    steps: usize,
    c: &ParamSpaceC,
    d: &ParamSpaceD,
    cfg: &IntegrationConfig,
) -> Result<Calibration> {
    if targets.is_empty() {
        return Err(Error::InvalidParam("no calibration targets"));
    }
    if !(search.width() > 0.0) || !(search.lo > 0.0) {
        return Err(Error::EmptySearchRange);
    }
    if steps < 3 {
        return Err(Error::InvalidParam("calibration scan needs at least 3 points"));
    }
    let objective = |s: f64| calibration_objective(targets, s, c, d, cfg);
    let mut scan = Vec::with_capacity(steps);
    for s in linspace(search.lo, search.hi, steps) {
        scan.push((s, objective(s)?));
    }
    let (best_idx, &(mut best_s, mut best_f)) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty scan");
    let worst = scan.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    if worst - best_f <= 1e-15 * worst.abs().max(1.0) {
        return Err(Error::NoImprovement { residual: best_f });
    }

    let mut lo = scan[best_idx.saturating_sub(1)].0;
    let mut hi = scan[(best_idx + 1).min(steps - 1)].0;
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    for _ in 0..24 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < best_f {
            best_s = x;
            best_f = f;
        }
    }
    Ok(Calibration {
        margins_sum: best_s,
        residual: best_f,
        scan,
    })
}
