//! Power allocation and relay placement minimizing the full-duplex outage
//! probability, by bisection on a numerical derivative.

use serde::{Deserialize, Serialize};

use crate::analysis::{Protocol, SystemModel};
use crate::channel::{LinkGeometry, NoiseModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMode {
    /// Relay location with the power split that equalizes both mean links.
    EqualGainLocation,
    PowerGivenLocation,
    LocationGivenPower,
    /// Independent source and relay power caps at a fixed location.
    SeparateConstraints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub p_tot: f64,
    pub d_sd: f64,
    pub path_loss_exp: f64,
    pub rate: f64,
    pub epsilon: f64,
    pub sigma_rr_sq: f64,
    pub sigma0_sq: f64,
    pub sigma_x_sq: f64,
    pub frames: usize,
    pub mode: OptimizeMode,
    /// Bisection stops once the bracket is narrower than this fraction of
    /// the search range.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Fixed relay distance for the power searches (default: midpoint).
    pub d_sr: Option<f64>,
    /// Fixed source power for the location search (default: half of P_tot).
    pub p_s: Option<f64>,
    pub p_s_max: Option<f64>,
    pub p_r_max: Option<f64>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            p_tot: 10.0,
            d_sd: 1.0,
            path_loss_exp: 2.0,
            rate: 2.0,
            epsilon: 1.0,
            sigma_rr_sq: 0.1,
            sigma0_sq: 1.0,
            sigma_x_sq: 1.0,
            frames: 20,
            mode: OptimizeMode::EqualGainLocation,
            tolerance: 1e-4,
            max_iter: 50,
            d_sr: None,
            p_s: None,
            p_s_max: None,
            p_r_max: None,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.p_tot > 0.0 && self.p_tot.is_finite()) {
            return bad("p_tot must be positive");
        }
        if !(self.d_sd > 0.0) {
            return bad("d_sd must be positive");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.frames == 0 {
            return bad("frames must be at least 1");
        }
        if !(self.rate > 0.0) || self.epsilon < 0.0 || self.sigma_rr_sq < 0.0 || !(self.sigma0_sq > 0.0) {
            return bad("rate, epsilon, sigma_rr_sq or sigma0_sq out of range");
        }
        Ok(())
    }

    fn fixed_d_sr(&self) -> f64 {
        self.d_sr.unwrap_or(self.d_sd / 2.0)
    }

    fn fixed_p_s(&self) -> f64 {
        self.p_s.unwrap_or(self.p_tot / 2.0)
    }

    /// Full-duplex outage of the proposed scheme at an operating point.
    pub fn outage_at(&self, p_s: f64, p_r: f64, d_sr: f64) -> Result<f64> {
        let model = SystemModel {
            geometry: LinkGeometry::collinear(self.d_sd, d_sr, self.path_loss_exp)?,
            p_s,
            p_r,
            noise: NoiseModel::new(self.sigma0_sq, self.sigma_rr_sq)?,
            sigma_x_sq: self.sigma_x_sq,
            epsilon: self.epsilon,
            rate: self.rate,
            frames: self.frames,
            gamma_t: 1.0,
        };
        Ok(model.outage_fd(Protocol::Proposed)?.outage)
    }

    /// Equal power, relay at the midpoint.
    pub fn reference_outage(&self) -> Result<f64> {
        self.outage_at(self.p_tot / 2.0, self.p_tot / 2.0, self.d_sd / 2.0)
    }
}

/// Source power that makes both mean links equally strong under a total
/// power budget.
pub fn equal_gain_power(p_tot: f64, d_sd: f64, d_sr: f64, path_loss_exp: f64) -> f64 {
    let a = d_sd.powf(path_loss_exp);
    let b = (d_sd - d_sr).powf(path_loss_exp);
    p_tot * a / (a + b)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Result of the numerical convexity check (equal-gain mode only).
    pub convex: Option<bool>,
    /// Central differences at step h and h/2 agree on every scan point.
    pub derivative_consistent: bool,
    pub brackets: usize,
    pub sign_change_found: bool,
    /// The returned point is a clipped end of the search range.
    pub endpoint: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimumReport {
    pub p_s: f64,
    pub p_r: f64,
    pub d_sr: f64,
    pub d_rd: f64,
    pub outage: f64,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

const SCAN_POINTS: usize = 64;

struct LineSearch<'a> {
    f: &'a dyn Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tolerance: f64,
    max_iter: usize,
}

struct LineResult {
    x: f64,
    value: f64,
    iterations: usize,
    diagnostics: Diagnostics,
}

impl LineSearch<'_> {
    fn range(&self) -> f64 {
        self.hi - self.lo
    }

    fn step(&self) -> f64 {
        1e-5 * self.range()
    }

    fn derivative_with(&self, x: f64, h: f64) -> Result<f64> {
        Ok(((self.f)(x + h)? - (self.f)(x - h)?) / (2.0 * h))
    }

    fn derivative(&self, x: f64) -> Result<f64> {
        self.derivative_with(x, self.step())
    }

    /// Interval on which the derivative stencil stays inside the range.
    fn inner(&self) -> (f64, f64) {
        let m = 2.0 * self.step();
        (self.lo + m, self.hi - m)
    }

    fn richardson_ok(&self, x: f64) -> Result<bool> {
        let h = self.step();
        let d1 = self.derivative_with(x, h)?;
        let d2 = self.derivative_with(x, h / 2.0)?;
        Ok((d1 - d2).abs() <= 1e-3 * d1.abs().max(d2.abs()) + 1e-9)
    }

    /// Bisection on the derivative sign inside `[a, b]`, finished by a
    /// secant step on the last bracket.
    fn bisect(&self, mut a: f64, mut b: f64, mut da: f64) -> Result<(f64, usize)> {
        let stop = self.tolerance * self.range();
        let mut db = self.derivative(b)?;
        let mut it = 0;
        while b - a > stop && it < self.max_iter {
            let mid = 0.5 * (a + b);
            let dm = self.derivative(mid)?;
            it += 1;
            if dm == 0.0 {
                return Ok((mid, it));
            }
            if (dm < 0.0) == (da < 0.0) {
                a = mid;
                da = dm;
            } else {
                b = mid;
                db = dm;
            }
        }
        let x = if db != da { a - da * (b - a) / (db - da) } else { 0.5 * (a + b) };
        Ok((x.clamp(a, b), it))
    }

    fn endpoints(&self) -> [f64; 2] {
        let clip = 1e-6 * self.range();
        [self.lo + clip, self.hi - clip]
    }

    fn best_of(&self, candidates: &[(f64, usize)], diagnostics: Diagnostics) -> Result<LineResult> {
        let mut best: Option<LineResult> = None;
        for (k, &(x, it)) in candidates.iter().enumerate() {
            let value = (self.f)(x)?;
            if best.as_ref().is_none_or(|b| value < b.value) {
                let mut d = diagnostics.clone();
                d.endpoint = k < 2;
                best = Some(LineResult { x, value, iterations: it, diagnostics: d });
            }
        }
        Ok(best.expect("at least the endpoints are candidates"))
    }

    /// Single bisection over the whole range, trusting a unique root.
    fn unique_root(&self, convex: bool) -> Result<LineResult> {
        let (a, b) = self.inner();
        let (da, db) = (self.derivative(a)?, self.derivative(b)?);
        let mut diagnostics = Diagnostics {
            convex: Some(convex),
            derivative_consistent: self.richardson_ok(a)? && self.richardson_ok(b)?,
            ..Default::default()
        };
        let [e0, e1] = self.endpoints();
        let mut candidates = vec![(e0, 0), (e1, 0)];
        if da < 0.0 && db > 0.0 {
            let (x, it) = self.bisect(a, b, da)?;
            diagnostics.brackets = 1;
            diagnostics.sign_change_found = true;
            candidates.push((x, it));
        }
        self.best_of(&candidates, diagnostics)
    }

    /// Scan for sign changes, bisect every bracket, keep the best of the
    /// stationary points and the clipped endpoints.
    fn scan(&self) -> Result<LineResult> {
        let (a, b) = self.inner();
        let xs: Vec<f64> = (0..SCAN_POINTS)
            .map(|i| a + (b - a) * i as f64 / (SCAN_POINTS - 1) as f64)
            .collect();
        let ds: Vec<f64> = xs.iter().map(|&x| self.derivative(x)).collect::<Result<_>>()?;
        let mut consistent = true;
        for &x in &xs {
            consistent &= self.richardson_ok(x)?;
        }
        let [e0, e1] = self.endpoints();
        let mut candidates = vec![(e0, 0), (e1, 0)];
        let mut brackets = 0;
        for i in 0..SCAN_POINTS - 1 {
            if (ds[i] < 0.0) != (ds[i + 1] < 0.0) {
                brackets += 1;
                candidates.push(self.bisect(xs[i], xs[i + 1], ds[i])?);
            }
        }
        let diagnostics = Diagnostics {
            convex: None,
            derivative_consistent: consistent,
            brackets,
            sign_change_found: brackets > 0,
            endpoint: false,
        };
        self.best_of(&candidates, diagnostics)
    }

    /// Second differences on the scan grid are nonnegative.
    fn is_convex(&self) -> Result<bool> {
        let (a, b) = self.inner();
        let vals: Vec<f64> = (0..SCAN_POINTS)
            .map(|i| (self.f)(a + (b - a) * i as f64 / (SCAN_POINTS - 1) as f64))
            .collect::<Result<_>>()?;
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(vals.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-12 * scale))
    }
}

pub fn optimize_equal_gain_location(cfg: &OptimizeConfig) -> Result<OptimumReport> {
    cfg.validate()?;
    let v = cfg.path_loss_exp;
    let f = |d: f64| {
        let p_s = equal_gain_power(cfg.p_tot, cfg.d_sd, d, v);
        cfg.outage_at(p_s, cfg.p_tot - p_s, d)
    };
    let search = LineSearch { f: &f, lo: 0.0, hi: cfg.d_sd, tolerance: cfg.tolerance, max_iter: cfg.max_iter };
    let convex = search.is_convex()?;
    let r = search.unique_root(convex)?;
    let p_s = equal_gain_power(cfg.p_tot, cfg.d_sd, r.x, v);
    Ok(report(cfg, p_s, cfg.p_tot - p_s, r))
}

pub fn optimize_power_given_location(cfg: &OptimizeConfig, d_sr: f64) -> Result<OptimumReport> {
    cfg.validate()?;
    if !(0.0..=cfg.d_sd).contains(&d_sr) {
        return Err(Error::InvalidGeometry(format!("d_sr = {d_sr} outside [0, {}]", cfg.d_sd)));
    }
    let f = |p: f64| cfg.outage_at(p, cfg.p_tot - p, d_sr);
    let search = LineSearch { f: &f, lo: 0.0, hi: cfg.p_tot, tolerance: cfg.tolerance, max_iter: cfg.max_iter };
    let r = search.scan()?;
    let p_s = r.x;
    Ok(report_at(cfg, p_s, cfg.p_tot - p_s, d_sr, r))
}

pub fn optimize_location_given_power(cfg: &OptimizeConfig, p_s: f64) -> Result<OptimumReport> {
    cfg.validate()?;
    if !(0.0..=cfg.p_tot).contains(&p_s) {
        return Err(Error::InvalidParameter(format!("p_s = {p_s} outside [0, {}]", cfg.p_tot)));
    }
    let p_r = cfg.p_tot - p_s;
    let f = |d: f64| cfg.outage_at(p_s, p_r, d);
    let search = LineSearch { f: &f, lo: 0.0, hi: cfg.d_sd, tolerance: cfg.tolerance, max_iter: cfg.max_iter };
    let r = search.scan()?;
    Ok(report(cfg, p_s, p_r, r))
}

/// Source at its cap; relay power at the best stationary point not above
/// its own cap.
pub fn separate_constraint_power(
    cfg: &OptimizeConfig,
    p_s_max: f64,
    p_r_max: f64,
    d_sr: f64,
) -> Result<OptimumReport> {
    cfg.validate()?;
    if !(p_s_max > 0.0 && p_r_max > 0.0) {
        return Err(Error::InvalidParameter("power caps must be positive".into()));
    }
    let f = |p: f64| cfg.outage_at(p_s_max, p, d_sr);
    let search = LineSearch { f: &f, lo: 0.0, hi: p_r_max, tolerance: cfg.tolerance, max_iter: cfg.max_iter };
    let mut r = search.scan()?;
    // the cap itself is feasible; prefer it over the clipped end on ties
    let at_cap = f(p_r_max)?;
    if at_cap <= r.value {
        r.x = p_r_max;
        r.value = at_cap;
        r.diagnostics.endpoint = true;
    }
    Ok(report_at(cfg, p_s_max, r.x, d_sr, r))
}

fn report(cfg: &OptimizeConfig, p_s: f64, p_r: f64, r: LineResult) -> OptimumReport {
    let d_sr = r.x;
    report_at(cfg, p_s, p_r, d_sr, r)
}

fn report_at(cfg: &OptimizeConfig, p_s: f64, p_r: f64, d_sr: f64, r: LineResult) -> OptimumReport {
    OptimumReport {
        p_s,
        p_r,
        d_sr,
        d_rd: cfg.d_sd - d_sr,
        outage: r.value,
        iterations: r.iterations,
        diagnostics: r.diagnostics,
    }
}

/// Runs the configured mode with its fixed variables.
pub fn optimize(cfg: &OptimizeConfig) -> Result<OptimumReport> {
    match cfg.mode {
        OptimizeMode::EqualGainLocation => optimize_equal_gain_location(cfg),
        OptimizeMode::PowerGivenLocation => optimize_power_given_location(cfg, cfg.fixed_d_sr()),
        OptimizeMode::LocationGivenPower => optimize_location_given_power(cfg, cfg.fixed_p_s()),
        OptimizeMode::SeparateConstraints => separate_constraint_power(
            cfg,
            cfg.p_s_max.unwrap_or(cfg.p_tot / 2.0),
            cfg.p_r_max.unwrap_or(cfg.p_tot / 2.0),
            cfg.fixed_d_sr(),
        ),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourPoint {
    pub p_s_frac: f64,
    pub d_sr_frac: f64,
    pub outage: f64,
}

/// Outage over the unit square of normalized source power and relay
/// distance, `resolution` points per axis.
pub fn contour_grid(cfg: &OptimizeConfig, resolution: usize) -> Result<Vec<ContourPoint>> {
    cfg.validate()?;
    if resolution < 2 {
        return Err(Error::InvalidParameter("contour resolution must be >= 2".into()));
    }
    let axis: Vec<f64> = (0..resolution).map(|i| i as f64 / (resolution - 1) as f64).collect();
    let mut out = Vec::with_capacity(resolution * resolution);
    for &ps in &axis {
        for &ds in &axis {
            let p_s = ps * cfg.p_tot;
            let outage = cfg.outage_at(p_s, cfg.p_tot - p_s, ds * cfg.d_sd)?;
            out.push(ContourPoint { p_s_frac: ps, d_sr_frac: ds, outage });
        }
    }
    Ok(out)
}
