use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::kernel::{kernel_matrix, squared_distance};
use crate::error::{Error, Result};
use crate::rng::RngState;

/// RBF width: a fixed value or `1 / (D · Var(X))` resolved at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma {
    #[default]
    Auto,
    Value(f64),
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Auto => s.serialize_str("auto"),
            Gamma::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Value(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(v) => Ok(Gamma::Value(v)),
            Raw::Name(s) if s == "auto" => Ok(Gamma::Auto),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("gamma must be a number or \"auto\", got {s:?}"))),
        }
    }
}

impl Gamma {
    pub fn resolve(&self, x: &[Vec<f64>]) -> f64 {
        match *self {
            Gamma::Value(v) => v,
            Gamma::Auto => {
                let count = x.iter().map(Vec::len).sum::<usize>();
                let dim = x.first().map_or(1, Vec::len).max(1);
                if count == 0 {
                    return 1.0 / dim as f64;
                }
                let mean = x.iter().flatten().sum::<f64>() / count as f64;
                let var = x.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
                if var > 0.0 {
                    1.0 / (dim as f64 * var)
                } else {
                    1.0 / dim as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: Gamma,
    /// KKT tolerance.
    pub tolerance: f64,
    /// Consecutive sweeps without an update before stopping.
    pub max_passes: usize,
    /// Hard cap on sweeps over the training set.
    pub max_sweeps: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: Gamma::Auto,
            tolerance: 1e-3,
            max_passes: 10,
            max_sweeps: 100_000,
        }
    }
}

impl SvmConfig {
    pub fn with_c(c: f64) -> Self {
        Self { c, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Argument(format!("C must be positive, got {}", self.c)));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Argument(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Argument("tolerance must be positive".into()));
        }
        if self.max_passes == 0 || self.max_sweeps == 0 {
            return Err(Error::Argument("max_passes and max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢ·yᵢ` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn num_support(&self) -> usize {
        self.support_vectors.len()
    }

    /// `f(x) = Σ coefᵢ k(svᵢ, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if !self.support_vectors.is_empty() && x.len() != self.dim() {
            return Err(Error::Dimension(format!("model expects {} features, got {}", self.dim(), x.len())));
        }
        let mut f = 0.0;
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coefs) {
            f += coef * (-self.gamma * squared_distance(sv, x)).exp();
        }
        Ok(f + self.bias)
    }

    /// `+1` when `f(x) ≥ 0`, else `-1`.
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(if self.decision(x)? >= 0.0 { 1 } else { -1 })
    }

    /// Dual objective `Σα − ½ ΣΣ coefᵢ coefⱼ Kᵢⱼ` of the stored solution.
    pub fn dual_objective(&self) -> f64 {
        let k = kernel_matrix(&self.support_vectors, self.gamma);
        let m = self.dual_coefs.len();
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad += self.dual_coefs[i] * self.dual_coefs[j] * k[i * m + j];
            }
        }
        self.dual_coefs.iter().map(|c| c.abs()).sum::<f64>() - 0.5 * quad
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoReport {
    pub sweeps: usize,
    pub updates: usize,
    /// False when `max_sweeps` ran out first.
    pub converged: bool,
    /// Full `α` over the training rows, in input order.
    pub alpha: Vec<f64>,
}

fn check_inputs(x: &[Vec<f64>], y: &[i8]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("SVM needs at least two samples".into()));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension("feature rows must share a non-zero length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite SVM feature".into()));
    }
    if let Some(bad) = y.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::Argument(format!("labels must be -1 or +1, got {bad}")));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::DegenerateData("SVM training set has a single class".into()));
    }
    Ok(())
}

pub fn fit_smo(x: &[Vec<f64>], y: &[i8], cfg: &SvmConfig, rng: &mut RngState) -> Result<SvmModel> {
    fit_smo_report(x, y, cfg, rng).map(|(m, _)| m)
}

/// Simplified SMO: every KKT violator `i` is paired with a uniformly random
/// `j ≠ i`; the loop ends after `max_passes` consecutive sweeps that find no
/// violator.
pub fn fit_smo_report(x: &[Vec<f64>], y: &[i8], cfg: &SvmConfig, rng: &mut RngState) -> Result<(SvmModel, SmoReport)> {
    cfg.validate()?;
    check_inputs(x, y)?;
    let n = x.len();
    let c = cfg.c;
    let gamma = cfg.gamma.resolve(x);
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Numeric(format!("resolved gamma {gamma} is not positive")));
    }
    let k = kernel_matrix(x, gamma);
    let yf: Vec<f64> = y.iter().map(|&l| l as f64).collect();
    let mut alpha = vec![0.0; n];
    // g[i] = Σⱼ αⱼ yⱼ Kᵢⱼ, so that Eᵢ = g[i] + b − yᵢ.
    let mut g = vec![0.0; n];
    let mut b = 0.0;
    let tol = cfg.tolerance;
    let (mut passes, mut sweeps, mut updates) = (0, 0, 0);

    while passes < cfg.max_passes && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let (mut changed, mut violators) = (0, 0);
        for i in 0..n {
            let ei = g[i] + b - yf[i];
            let r = yf[i] * ei;
            if !((r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0)) {
                continue;
            }
            violators += 1;
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let ej = g[j] + b - yf[j];
            let (ai_old, aj_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if y[i] != y[j] {
                ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
            } else {
                ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
            };
            if hi - lo <= 0.0 {
                continue;
            }
            let eta = 2.0 * k[i * n + j] - k[i * n + i] - k[j * n + j];
            if eta >= 0.0 {
                continue;
            }
            let aj = snap((aj_old - yf[j] * (ei - ej) / eta).clamp(lo, hi), c);
            if (aj - aj_old).abs() < 1e-15 * (1.0 + c) {
                continue;
            }
            let ai = snap((ai_old + yf[i] * yf[j] * (aj_old - aj)).clamp(0.0, c), c);
            let (di, dj) = ((ai - ai_old) * yf[i], (aj - aj_old) * yf[j]);
            let b1 = b - ei - di * k[i * n + i] - dj * k[i * n + j];
            let b2 = b - ej - di * k[i * n + j] - dj * k[j * n + j];
            b = if ai > 0.0 && ai < c {
                b1
            } else if aj > 0.0 && aj < c {
                b2
            } else {
                0.5 * (b1 + b2)
            };
            alpha[i] = ai;
            alpha[j] = aj;
            for (t, gt) in g.iter_mut().enumerate() {
                *gt += di * k[i * n + t] + dj * k[j * n + t];
            }
            changed += 1;
        }
        updates += changed;
        b = kkt_bias(&alpha, &yf, &g, c);
        passes = if violators == 0 { passes + 1 } else { 0 };
    }

    let bias = kkt_bias(&alpha, &yf, &g, c);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coefs.push(alpha[i] * yf[i]);
        }
    }
    let model = SvmModel { support_vectors, dual_coefs, bias, gamma, c };
    let report = SmoReport { sweeps, updates, converged: passes >= cfg.max_passes, alpha };
    Ok((model, report))
}

/// Rounds values within `1e-12·C` of a bound onto it.
fn snap(a: f64, c: f64) -> f64 {
    let eps = 1e-12 * c;
    if a < eps {
        0.0
    } else if a > c - eps {
        c
    } else {
        a
    }
}

/// Mean of `yᵢ − gᵢ` over free vectors; without any, the midpoint of the
/// interval the bounded vectors leave for `b`.
fn kkt_bias(alpha: &[f64], y: &[f64], g: &[f64], c: f64) -> f64 {
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..alpha.len() {
        let r = y[i] - g[i];
        if alpha[i] > 0.0 && alpha[i] < c {
            free_sum += r;
            free_n += 1;
        } else if (alpha[i] == 0.0) == (y[i] > 0.0) {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
    }
    match (free_n, lo.is_finite(), hi.is_finite()) {
        (n, _, _) if n > 0 => free_sum / n as f64,
        (_, true, true) => 0.5 * (lo + hi),
        (_, true, false) => lo,
        (_, false, true) => hi,
        _ => 0.0,
    }
}
