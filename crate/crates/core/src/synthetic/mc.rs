//! Monte Carlo studies of the estimator over grids of `n` and `K`.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, GenerationMode, GeneratorSpec, Noise};
use crate::asymptotics::{axis_confidence_region, axis_wald_test, chart_at, estimate_asymptotics};
use crate::error::{invalid, Result};
use crate::fit::{fit, FitConfig};
use crate::loss::LossKind;
use crate::params::{param_distance, SubsphereClass, SubsphereParams};
use crate::seed::RandomSeed;
use crate::sphere::{TangentFrame, UnitVector};

pub const SCHEMA_VERSION: &str = "1.0";

const TAG_POPULATION: u64 = 11;
const TAG_REPLICATE: u64 = 12;
const TAG_FIT: u64 = 13;

/// Share of failed replicates above which a cell is marked invalid.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Truth and noise shared by every cell; radii and noise values are cycled
/// to the cell's `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTemplate {
    pub center: UnitVector,
    pub radii_pattern: Vec<f64>,
    #[serde(default)]
    pub mode: GenerationMode,
    pub noise: Noise,
    #[serde(default)]
    pub a1_epsilon: Option<f64>,
}

impl McTemplate {
    pub fn truth(&self, k: usize) -> Result<SubsphereParams> {
        if self.radii_pattern.is_empty() {
            return Err(invalid("radii_pattern is empty"));
        }
        let radii = (0..k).map(|j| self.radii_pattern[j % self.radii_pattern.len()]).collect();
        SubsphereParams::new(self.center.clone(), radii)
    }

    pub fn spec(&self, n: usize, k: usize, seed: RandomSeed) -> Result<GeneratorSpec> {
        let cycle = |v: &[f64]| -> Vec<f64> { (0..k).map(|j| v[j % v.len()]).collect() };
        let (noise, iid) = match &self.noise {
            Noise::TangentGaussian { sigma } if sigma.len() > 1 => (Noise::TangentGaussian { sigma: cycle(sigma) }, false),
            Noise::VonMisesFisher { kappa } if kappa.len() > 1 => (Noise::VonMisesFisher { kappa: cycle(kappa) }, false),
            other => (other.clone(), true),
        };
        let mut spec = GeneratorSpec::new(self.truth(k)?, n, noise, seed);
        spec.mode = self.mode;
        spec.iid_across_j = iid;
        spec.a1_epsilon = self.a1_epsilon;
        Ok(spec)
    }
}

/// What replicate fits are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum McTarget {
    /// The generator's parameters.
    Generator,
    /// The fit on one large independent sample, standing in for the
    /// population minimizer of the loss.
    Population { n: usize },
}

impl Default for McTarget {
    fn default() -> Self {
        McTarget::Population { n: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    #[serde(rename = "K_grid")]
    pub k_grid: Vec<usize>,
    pub loss: LossKind,
    pub template: McTemplate,
    #[serde(default = "default_level")]
    pub level: f64,
    pub seed: RandomSeed,
    #[serde(default)]
    pub target: McTarget,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Also test against an axis rotated this far from the target.
    #[serde(default)]
    pub alternative_angle: Option<f64>,
}

fn default_level() -> f64 {
    0.95
}

fn default_restarts() -> usize {
    FitConfig::default().restarts
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.n_grid.is_empty() || self.k_grid.is_empty() {
            return Err(invalid("replicates, n_grid and K_grid must be non-empty"));
        }
        if self.n_grid.contains(&0) || self.k_grid.contains(&0) {
            return Err(invalid("grid entries must be positive"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level must lie in (0, 1)"));
        }
        if let McTarget::Population { n } = self.target {
            if n == 0 {
                return Err(invalid("population size must be positive"));
            }
        }
        for &k in &self.k_grid {
            self.template.spec(1, k, self.seed)?.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub param_distance: f64,
    /// Axis chart coordinates of the fit at the target.
    pub axis_coordinates: Vec<f64>,
    pub covered: bool,
    pub wald_statistic: f64,
    pub wald_p_value: f64,
    pub rejected: bool,
    pub alternative_rejected: Option<bool>,
    /// Trace of the sandwich and of its axis block.
    pub predicted_trace: f64,
    pub predicted_axis_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub replicate: usize,
    pub seed: RandomSeed,
    pub outcome: Option<ReplicateOutcome>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub replicates: usize,
    pub failures: usize,
    pub nonconverged: usize,
    pub valid: bool,
    pub median_distance: f64,
    /// Quantiles 0.1, 0.25, 0.5, 0.75, 0.9 of `param_distance`.
    pub distance_quantiles: [f64; 5],
    pub coverage: f64,
    pub size: f64,
    pub power: Option<f64>,
    /// Sum over axis coordinates of their variance across replicates.
    pub axis_trace_variance: f64,
    pub mean_predicted_axis_trace: f64,
    /// `sqrt` of the mean sandwich trace; the scale of `param_distance`.
    pub predicted_sd_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRatio {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "K2")]
    pub k2: usize,
    /// `axis_trace_variance` at `K` over that at `2K`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTarget {
    #[serde(rename = "K")]
    pub k: usize,
    pub params: SubsphereClass,
    /// Distance from the generator's parameters.
    pub offset_from_generator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema_version: String,
    pub config: McConfig,
    pub targets: Vec<PopulationTarget>,
    pub cells: Vec<CellSummary>,
    pub k_doubling_ratios: Vec<KRatio>,
    pub records: Vec<McRecord>,
}

fn fit_config(cfg: &McConfig, seed: RandomSeed) -> FitConfig {
    FitConfig {
        restarts: cfg.restarts,
        seed,
        ..FitConfig::new(cfg.loss)
    }
}

fn target_for(cfg: &McConfig, k: usize) -> Result<PopulationTarget> {
    let truth = cfg.template.truth(k)?;
    let params = match cfg.target {
        McTarget::Generator => truth.canonicalize(),
        McTarget::Population { n } => {
            let seed = cfg.seed.derive(&[TAG_POPULATION, k as u64]);
            let data = generate(&cfg.template.spec(n, k, seed)?)?.sample;
            fit(&data, &fit_config(cfg, seed.derive(&[TAG_FIT])))?.params
        }
    };
    Ok(PopulationTarget {
        k,
        offset_from_generator: param_distance(params.representative(), &truth)?,
        params,
    })
}

fn replicate(cfg: &McConfig, target: &SubsphereClass, n: usize, k: usize, seed: RandomSeed) -> Result<ReplicateOutcome> {
    let data = generate(&cfg.template.spec(n, k, seed)?)?.sample;
    let fitted = fit(&data, &fit_config(cfg, seed.derive(&[TAG_FIT])))?;
    let target_rep = target.aligned_with(fitted.params.representative().center());
    let chart = chart_at(&target_rep);
    let m = chart.m();
    let coords = chart.class_to_chart(&fitted.params)?;
    let est = estimate_asymptotics(&data, &fitted.params, cfg.loss)?;
    let region = axis_confidence_region(&est, cfg.level)?;
    let c0 = target_rep.center();
    let wald = axis_wald_test(&est, c0)?;
    let alpha = 1.0 - cfg.level;
    let alternative_rejected = match cfg.alternative_angle {
        Some(angle) => {
            let mut step = DVector::zeros(m);
            step[0] = angle;
            let alt = TangentFrame::at(c0).exp(&step);
            Some(axis_wald_test(&est, &alt)?.p_value < alpha)
        }
        None => None,
    };
    Ok(ReplicateOutcome {
        converged: fitted.converged,
        iterations: fitted.iterations,
        param_distance: param_distance(fitted.params.representative(), &target_rep)?,
        axis_coordinates: coords.rows(0, m).iter().copied().collect(),
        covered: region.covers(c0)?,
        wald_statistic: wald.statistic,
        wald_p_value: wald.p_value,
        rejected: wald.p_value < alpha,
        alternative_rejected,
        predicted_trace: est.sandwich.trace(),
        predicted_axis_trace: est.axis_covariance().trace(),
    })
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    crate::summation::exact_mean(v)
}

fn summarize(n: usize, k: usize, records: &[&McRecord]) -> CellSummary {
    let ok: Vec<&ReplicateOutcome> = records.iter().filter_map(|r| r.outcome.as_ref()).filter(|o| o.converged).collect();
    let errors = records.iter().filter(|r| r.outcome.is_none()).count();
    let nonconverged = records.len() - errors - ok.len();
    let failures = errors + nonconverged;
    let mut d: Vec<f64> = ok.iter().map(|o| o.param_distance).collect();
    d.sort_by(f64::total_cmp);
    let qs = [0.1, 0.25, 0.5, 0.75, 0.9].map(|q| quantile(&d, q));
    let rate = |f: &dyn Fn(&ReplicateOutcome) -> bool| mean(ok.iter().map(|o| if f(o) { 1.0 } else { 0.0 }));
    let m = ok.first().map_or(0, |o| o.axis_coordinates.len());
    let axis_trace_variance = if ok.len() > 1 {
        (0..m)
            .map(|a| {
                let mu = mean(ok.iter().map(|o| o.axis_coordinates[a]));
                let ss: Vec<f64> = ok.iter().map(|o| (o.axis_coordinates[a] - mu).powi(2)).collect();
                crate::summation::exact_sum(ss) / (ok.len() - 1) as f64
            })
            .sum()
    } else {
        f64::NAN
    };
    let power = if ok.iter().all(|o| o.alternative_rejected.is_some()) && !ok.is_empty() {
        Some(rate(&|o| o.alternative_rejected == Some(true)))
    } else {
        None
    };
    CellSummary {
        n,
        k,
        replicates: records.len(),
        failures,
        nonconverged,
        valid: (failures as f64) <= MAX_FAILURE_RATE * records.len() as f64,
        median_distance: qs[2],
        distance_quantiles: qs,
        coverage: rate(&|o| o.covered),
        size: rate(&|o| o.rejected),
        power,
        axis_trace_variance,
        mean_predicted_axis_trace: mean(ok.iter().map(|o| o.predicted_axis_trace)),
        predicted_sd_scale: mean(ok.iter().map(|o| o.predicted_trace)).sqrt(),
    }
}

/// Runs every `(n, K)` cell. Replicates run in parallel; each draws from
/// its own derived seed and results are gathered in grid order, so the
/// report is identical for any thread count.
pub fn mc_study(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let targets: Vec<PopulationTarget> = cfg
        .k_grid
        .par_iter()
        .map(|&k| target_for(cfg, k))
        .collect::<Result<_>>()?;
    let by_k: BTreeMap<usize, &SubsphereClass> = targets.iter().map(|t| (t.k, &t.params)).collect();
    let jobs: Vec<(usize, usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| cfg.k_grid.iter().flat_map(move |&k| (0..cfg.replicates).map(move |r| (n, k, r))))
        .collect();
    let records: Vec<McRecord> = jobs
        .into_par_iter()
        .map(|(n, k, r)| {
            let seed = cfg.seed.derive(&[TAG_REPLICATE, n as u64, k as u64, r as u64]);
            let (outcome, failure) = match replicate(cfg, by_k[&k], n, k, seed) {
                Ok(o) => (Some(o), None),
                Err(e) => {
                    log::debug!("replicate n={n} K={k} #{r} failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            McRecord {
                n,
                k,
                replicate: r,
                seed,
                outcome,
                failure,
            }
        })
        .collect();
    let mut cells = Vec::new();
    for &n in &cfg.n_grid {
        for &k in &cfg.k_grid {
            let rs: Vec<&McRecord> = records.iter().filter(|r| r.n == n && r.k == k).collect();
            cells.push(summarize(n, k, &rs));
        }
    }
    let mut ratios = Vec::new();
    for a in &cells {
        if let Some(b) = cells.iter().find(|b| b.n == a.n && b.k == 2 * a.k) {
            ratios.push(KRatio {
                n: a.n,
                k: a.k,
                k2: b.k,
                ratio: a.axis_trace_variance / b.axis_trace_variance,
            });
        }
    }
    Ok(McReport {
        schema_version: SCHEMA_VERSION.to_string(),
        config: cfg.clone(),
        targets,
        cells,
        k_doubling_ratios: ratios,
        records,
    })
}

impl McReport {
    /// One row per replicate for external plotting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let m = self.config.template.center.sphere_dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "n",
            "K",
            "replicate",
            "seed",
            "converged",
            "param_distance",
            "covered",
            "wald_statistic",
            "wald_p_value",
            "rejected",
            "alternative_rejected",
            "predicted_axis_trace",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((0..m).map(|a| format!("axis_{a}")));
        header.push("failure".into());
        w.write_record(&header).map_err(csv_error)?;
        for r in &self.records {
            let mut row = vec![r.n.to_string(), r.k.to_string(), r.replicate.to_string(), r.seed.0.to_string()];
            match &r.outcome {
                Some(o) => {
                    row.extend([
                        o.converged.to_string(),
                        o.param_distance.to_string(),
                        o.covered.to_string(),
                        o.wald_statistic.to_string(),
                        o.wald_p_value.to_string(),
                        o.rejected.to_string(),
                        o.alternative_rejected.map_or(String::new(), |b| b.to_string()),
                        o.predicted_axis_trace.to_string(),
                    ]);
                    row.extend(o.axis_coordinates.iter().map(|v| v.to_string()));
                }
                None => row.extend(std::iter::repeat_n(String::new(), 8 + m)),
            }
            row.push(r.failure.clone().unwrap_or_default());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    /// Plain-text tables of the cell summaries and `K` ratios.
    pub fn tables(&self) -> String {
        let mut s = format!(
            "loss {}  level {}  replicates {}\n",
            self.config.loss, self.config.level, self.config.replicates
        );
        s.push_str("     n    K  fail  median_d      q10_d      q90_d   coverage   size    power    var_axis   pred_axis\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{:>6} {:>4} {:>5} {:>9.5} {:>10.5} {:>10.5} {:>9.3} {:>7.3} {:>7} {:>11.4e} {:>11.4e}{}\n",
                c.n,
                c.k,
                c.failures,
                c.median_distance,
                c.distance_quantiles[0],
                c.distance_quantiles[4],
                c.coverage,
                c.size,
                c.power.map_or("-".to_string(), |p| format!("{p:.3}")),
                c.axis_trace_variance,
                c.mean_predicted_axis_trace,
                if c.valid { "" } else { "  INVALID" }
            ));
        }
        for r in &self.k_doubling_ratios {
            s.push_str(&format!("variance ratio n={} K={} vs K={}: {:.3}\n", r.n, r.k, r.k2, r.ratio));
        }
        s
    }
}

fn csv_error(e: csv::Error) -> crate::error::Error {
    invalid(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> McConfig {
        McConfig {
            replicates: 20,
            n_grid: vec![50, 200],
            k_grid: vec![2, 4],
            loss: LossKind::Intrinsic,
            template: McTemplate {
                center: UnitVector::from_slice(&[0.3, -0.2, 0.93]).unwrap(),
                radii_pattern: vec![0.6, 1.0],
                mode: GenerationMode::RotationalModel,
                noise: Noise::gaussian(0.1),
                a1_epsilon: None,
            },
            level: 0.95,
            seed: RandomSeed(1),
            target: McTarget::Population { n: 5000 },
            restarts: 1,
            alternative_angle: Some(0.2),
        }
    }

    #[test]
    fn report_shape_and_determinism() {
        let cfg = config();
        let a = mc_study(&cfg).unwrap();
        assert_eq!(a.cells.len(), 4);
        assert_eq!(a.records.len(), 80);
        assert_eq!(a.k_doubling_ratios.len(), 2);
        assert!(a.cells.iter().all(|c| c.valid));
        let b = mc_study(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 81);
        assert!(a.tables().contains("variance ratio"));
    }

    #[test]
    fn single_cell_single_replicate() {
        let cfg = McConfig {
            replicates: 1,
            n_grid: vec![30],
            k_grid: vec![2],
            target: McTarget::Generator,
            ..config()
        };
        let r = mc_study(&cfg).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.records.len(), 1);
        assert!(r.k_doubling_ratios.is_empty());
        assert_eq!(r.targets[0].offset_from_generator, 0.0);
    }

    #[test]
    fn error_decreases_with_n() {
        let r = mc_study(&config()).unwrap();
        for k in [2, 4] {
            let at = |n| r.cells.iter().find(|c| c.n == n && c.k == k).unwrap().median_distance;
            assert!(at(200) < at(50));
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.1), 1.4);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = config();
        cfg.replicates = 0;
        assert!(mc_study(&cfg).is_err());
        let mut cfg = config();
        cfg.level = 1.5;
        assert!(mc_study(&cfg).is_err());
        let mut cfg = config();
        cfg.template.noise = Noise::gaussian(-1.0);
        assert!(mc_study(&cfg).is_err());
    }
}
