//! Vortex census: forward selection under GCV with backfitted multi-vortex
//! fits, plus per-vortex statistics.

mod backfit;
mod stats;

pub use backfit::{BackfitControl, BackfitMethod, BackfitReport, Backfitter, CrossGram};
pub use stats::{effective_params, effective_params_one, gcv, vortex_statistics, VortexStatistics};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{periodic_distance, Field};
use crate::modwt::MraPlan;
use crate::scan::{scan_field, Candidate, CoefficientMatrix, ScanOutput, TemplateRegression};
use crate::solver::Ridge;
use crate::template::{build_template, TemplateBasis, TemplateSpec};

/// How the template amplitude η is chosen for a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Amplitude {
    /// `η = max |ζ|` of the field being analysed.
    Auto,
    Fixed(f64),
}

/// Order in which candidates enter the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Largest single-step RSS reduction among all remaining candidates.
    Greedy,
    /// Ascending smoothed Λ.
    Lambda,
    /// Smallest RSS after a full backfit, trying every remaining candidate.
    Exhaustive,
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(Selection::Greedy),
            "lambda" => Ok(Selection::Lambda),
            "exhaustive" => Ok(Selection::Exhaustive),
            _ => Err(Error::Spec(format!(
                "unknown selection '{s}' (expected greedy, lambda or exhaustive)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusConfig {
    pub template: TemplateSpec,
    pub amplitude: Amplitude,
    pub ridge: Ridge,
    pub max_candidates: usize,
    /// Candidates closer than this (px) to a better-ranked one are dropped.
    pub coalesce_radius: f64,
    /// Consecutive GCV increases after which selection stops.
    pub patience: usize,
    pub selection: Selection,
    pub grid_spacing: f64,
    pub backfit: BackfitMethod,
    pub backfit_tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for CensusConfig {
    fn default() -> Self {
        CensusConfig {
            template: TemplateSpec::default(),
            amplitude: Amplitude::Auto,
            ridge: Ridge::default(),
            max_candidates: 4096,
            coalesce_radius: 3.0,
            patience: 5,
            selection: Selection::Lambda,
            grid_spacing: 1.0,
            backfit: BackfitMethod::Direct,
            backfit_tolerance: 1e-6,
            max_sweeps: 50,
        }
    }
}

impl CensusConfig {
    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        self.ridge.validate()?;
        if let Amplitude::Fixed(eta) = self.amplitude {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::Spec(format!("eta must be positive, got {eta}")));
            }
        }
        if self.max_candidates == 0 {
            return Err(Error::Spec("max_candidates must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::Spec("patience must be positive".into()));
        }
        if !(self.grid_spacing.is_finite() && self.grid_spacing > 0.0) {
            return Err(Error::Spec(format!("grid spacing must be positive, got {}", self.grid_spacing)));
        }
        if !(self.coalesce_radius.is_finite() && self.coalesce_radius >= 0.0) {
            return Err(Error::Spec("coalesce radius must be ≥ 0".into()));
        }
        if self.max_sweeps == 0 || self.backfit_tolerance.is_nan() || self.backfit_tolerance <= 0.0 {
            return Err(Error::Spec("backfit needs max_sweeps ≥ 1 and a positive tolerance".into()));
        }
        Ok(())
    }

    fn control(&self) -> BackfitControl {
        BackfitControl {
            method: self.backfit,
            tolerance: self.backfit_tolerance,
            max_sweeps: self.max_sweeps,
        }
    }
}

/// One selected vortex.
#[derive(Clone, Debug)]
pub struct VortexRecord {
    pub row: usize,
    pub col: usize,
    pub beta: CoefficientMatrix,
    pub stats: VortexStatistics,
    pub sign: i8,
    /// `v̂_s` on a `P × P` window centred on the vortex.
    pub support: Field,
}

/// One forward-selection step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcvStep {
    pub s: usize,
    pub gcv: f64,
    pub rss: f64,
    pub p: usize,
    /// Centre added at this step.
    pub added: Option<(usize, usize)>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Aggregate statistics over the selected vortices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub count: usize,
    pub mean_abs_circulation: f64,
    /// Area-mean squared vorticity carried by the vortices: the sum of
    /// their enstrophy contributions.
    pub mean_enstrophy: f64,
    /// Average enstrophy contribution of one vortex.
    pub mean_vortex_enstrophy: f64,
    pub mean_abs_peak: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusMeta {
    pub eta: f64,
    pub noise_sd: f64,
    pub gram_condition: f64,
    pub candidates_found: usize,
    pub candidates_used: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CensusResult {
    pub vortices: Vec<VortexRecord>,
    pub gcv_path: Vec<GcvStep>,
    pub residual: Field,
    pub field_stats: FieldStats,
    pub meta: CensusMeta,
}

impl CensusResult {
    pub fn count(&self) -> usize {
        self.vortices.len()
    }

    pub fn centers(&self) -> Vec<(usize, usize)> {
        self.vortices.iter().map(|v| (v.row, v.col)).collect()
    }

    /// Full-grid vortex fields `v̂_s` are not stored; this is `field − residual`.
    pub fn vortex_sum(&self, field: &Field) -> Field {
        let mut f = field.clone();
        f.axpy(-1.0, &self.residual);
        f
    }
}

/// Drops candidates lying within `radius` of a better-ranked one.
pub fn coalesce(points: &[Candidate], radius: f64, rows: usize, cols: usize) -> Vec<Candidate> {
    let mut kept: Vec<Candidate> = Vec::new();
    for p in points {
        if kept
            .iter()
            .all(|q| periodic_distance((p.row, p.col), (q.row, q.col), rows, cols) >= radius)
        {
            kept.push(*p);
        }
    }
    kept
}

/// Template basis at the configured amplitude for `field`.
pub fn basis_for_field(config: &CensusConfig, field: &Field) -> Result<TemplateBasis> {
    let base = build_template(&config.template, field.rows(), field.cols())?;
    Ok(rescale_basis(&base, config, field))
}

fn rescale_basis(base: &TemplateBasis, config: &CensusConfig, field: &Field) -> TemplateBasis {
    let eta = match config.amplitude {
        Amplitude::Fixed(eta) => eta,
        Amplitude::Auto => {
            let m = field.max_abs();
            if m > 0.0 {
                m
            } else {
                base.eta()
            }
        }
    };
    base.scaled(eta / base.eta())
}

/// Reusable per-shape state for censusing many fields of one size.
#[derive(Clone, Debug)]
pub struct Census {
    config: CensusConfig,
    plan: MraPlan,
    base: TemplateBasis,
    cross_gram: CrossGram,
}

impl Census {
    pub fn new(config: &CensusConfig, rows: usize, cols: usize) -> Result<Self> {
        config.validate()?;
        let filter = crate::modwt::WaveletFilter::new(config.template.filter);
        let plan = MraPlan::new(rows, cols, &filter, config.template.levels)?;
        let base = TemplateBasis::with_plan(&config.template.render_patch(), config.template.eta, &plan)?;
        let cross_gram = CrossGram::new(&base);
        Ok(Census {
            config: *config,
            plan,
            base,
            cross_gram,
        })
    }

    pub fn config(&self) -> &CensusConfig {
        &self.config
    }

    pub fn plan(&self) -> &MraPlan {
        &self.plan
    }

    /// Scan stage only.
    pub fn scan(&self, field: &Field) -> Result<ScanOutput> {
        self.check_shape(field)?;
        let basis = rescale_basis(&self.base, &self.config, field);
        scan_field(field, &self.plan, &basis, &self.config.ridge, self.config.max_candidates)
    }

    pub fn run(&self, field: &Field) -> Result<CensusResult> {
        let scan = self.scan(field)?;
        self.select(field, &scan)
    }

    /// Forward selection over the candidates of a finished scan.
    pub fn select(&self, field: &Field, scan: &ScanOutput) -> Result<CensusResult> {
        self.check_shape(field)?;
        let (rows, cols) = field.shape();
        let cfg = &self.config;
        let reg = &scan.regression;
        let basis = reg.basis();
        let factor = basis.eta() / self.base.eta();
        let candidates = coalesce(&scan.candidates.points, cfg.coalesce_radius, rows, cols);
        let points: Vec<(usize, usize)> = candidates.iter().map(|c| (c.row, c.col)).collect();
        let rhs = reg.rhs_at(&scan.responses, &points)?;

        let gram = self.cross_gram.scaled(factor);
        let energy = scan.responses.total_energy();
        let mut fitter = Backfitter::new(&gram, reg.solver(), energy);

        let mut path = vec![GcvStep {
            s: 0,
            gcv: gcv(energy, 0, rows, cols)?,
            rss: energy,
            p: 0,
            added: None,
            sweeps: 0,
            converged: true,
        }];
        let mut best = (0usize, path[0].gcv);
        let mut best_state: (Vec<(usize, usize)>, Vec<DMatrix<f64>>) = (Vec::new(), Vec::new());
        let mut warnings = Vec::new();
        let mut used = vec![false; points.len()];
        let mut next_lambda = 0usize;
        let mut rising = 0usize;

        while rising < cfg.patience {
            let pick = match cfg.selection {
                Selection::Lambda => {
                    while next_lambda < points.len() && used[next_lambda] {
                        next_lambda += 1;
                    }
                    (next_lambda < points.len()).then_some(next_lambda)
                }
                Selection::Greedy => (0..points.len())
                    .into_par_iter()
                    .filter(|&i| !used[i])
                    .map(|i| (i, fitter.single_step_gain(points[i], &rhs[i])))
                    .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
                    .map(|(i, _)| i),
                Selection::Exhaustive => (0..points.len())
                    .into_par_iter()
                    .filter(|&i| !used[i])
                    .map(|i| {
                        let mut trial = fitter.clone();
                        trial.push(points[i], rhs[i].clone());
                        (i, trial.fit(&cfg.control()).rss)
                    })
                    .reduce_with(|a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
                    .map(|(i, _)| i),
            };
            let Some(i) = pick else { break };
            used[i] = true;
            fitter.push(points[i], rhs[i].clone());
            let report = fitter.fit(&cfg.control());
            let s = fitter.len();
            if !report.converged {
                warnings.push(format!(
                    "backfit did not converge within {} sweeps at S = {s}",
                    cfg.max_sweeps
                ));
            }
            let blocks: Vec<DMatrix<f64>> = fitter.betas().iter().map(|b| b.rows(0, b.ncols()).into_owned()).collect();
            let p = effective_params(&blocks);
            let score = gcv(report.rss.max(0.0), p, rows, cols)?;
            let previous = path[path.len() - 1].gcv;
            path.push(GcvStep {
                s,
                gcv: score,
                rss: report.rss,
                p,
                added: Some(points[i]),
                sweeps: report.sweeps,
                converged: report.converged,
            });
            if score > previous {
                rising += 1;
            } else {
                rising = 0;
            }
            if score < best.1 {
                best = (s, score);
                best_state = (fitter.centers().to_vec(), fitter.betas().to_vec());
            }
        }

        let (centers, betas) = best_state;
        for (i, a) in centers.iter().enumerate() {
            if centers[..i].iter().any(|b| periodic_distance(*a, *b, rows, cols) < 1.0) {
                warnings.push(format!("collinear vortices share centre {a:?}"));
            }
        }
        let mut residual = field.clone().with_time(field.time());
        let mut vortices = Vec::with_capacity(centers.len());
        for (center, beta) in centers.iter().zip(betas) {
            let v = vortex_field(basis, reg, &beta, *center);
            residual.axpy(-1.0, &v);
            let stats = vortex_statistics(&v, cfg.grid_spacing)?;
            vortices.push(VortexRecord {
                row: center.0,
                col: center.1,
                beta: CoefficientMatrix::from_full(beta),
                sign: stats.sign(),
                support: window(&v, *center, cfg.template.patch),
                stats,
            });
        }
        let field_stats = summarise(&vortices);
        Ok(CensusResult {
            vortices,
            gcv_path: path,
            residual,
            field_stats,
            meta: CensusMeta {
                eta: basis.eta(),
                noise_sd: scan.noise_sd,
                gram_condition: scan.condition,
                candidates_found: scan.candidates.points.len(),
                candidates_used: points.len(),
                warnings,
            },
        })
    }

    fn check_shape(&self, field: &Field) -> Result<()> {
        if field.shape() != self.plan.shape() {
            return Err(Error::Shape(format!(
                "field is {:?}, census was set up for {:?}",
                field.shape(),
                self.plan.shape()
            )));
        }
        Ok(())
    }
}

/// Runs scan and forward selection on one field.
pub fn census(field: &Field, config: &CensusConfig) -> Result<CensusResult> {
    Census::new(config, field.rows(), field.cols())?.run(field)
}

/// `v̂ = Σ_k (Σ_l β_kl)·Z_k(· − μ)`, intercept excluded.
pub fn vortex_field(
    basis: &TemplateBasis,
    reg: &TemplateRegression,
    beta: &DMatrix<f64>,
    center: (usize, usize),
) -> Field {
    let k = basis.num_channels();
    let mut spec = reg.fft().zero_spectrum();
    for (m, z) in basis.spectra().iter().enumerate().take(k) {
        let w: f64 = beta.row(m).iter().sum();
        spec.axpy(w, z);
    }
    reg.fft().inverse(&spec).shifted(center.0 as isize, center.1 as isize)
}

fn window(v: &Field, center: (usize, usize), size: usize) -> Field {
    let size = size.min(v.rows()).min(v.cols()) | 1;
    let half = (size / 2) as isize;
    Field::from_fn(size, size, |r, c| {
        v.get_wrapped(center.0 as isize + r as isize - half, center.1 as isize + c as isize - half)
    })
}

fn summarise(vortices: &[VortexRecord]) -> FieldStats {
    let n = vortices.len();
    if n == 0 {
        return FieldStats::default();
    }
    let mean = |f: &dyn Fn(&VortexRecord) -> f64| vortices.iter().map(f).sum::<f64>() / n as f64;
    let mean_enstrophy = vortices.iter().map(|v| v.stats.enstrophy).sum();
    FieldStats {
        count: n,
        mean_abs_circulation: mean(&|v| v.stats.circulation.abs()),
        mean_enstrophy,
        mean_vortex_enstrophy: mean(&|v| v.stats.enstrophy),
        mean_abs_peak: mean(&|v| v.stats.peak.abs()),
    }
}
