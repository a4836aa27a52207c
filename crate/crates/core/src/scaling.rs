//! Log–log power-law fits of census statistics against time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::{Census, CensusConfig, FieldStats};
use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Count,
    MeanAbsCirculation,
    MeanEnstrophy,
    MeanAbsPeak,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [
        Statistic::Count,
        Statistic::MeanAbsCirculation,
        Statistic::MeanEnstrophy,
        Statistic::MeanAbsPeak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Count => "count",
            Statistic::MeanAbsCirculation => "mean_abs_circulation",
            Statistic::MeanEnstrophy => "mean_enstrophy",
            Statistic::MeanAbsPeak => "mean_abs_peak",
        }
    }

    pub fn of(self, stats: &FieldStats) -> f64 {
        match self {
            Statistic::Count => stats.count as f64,
            Statistic::MeanAbsCirculation => stats.mean_abs_circulation,
            Statistic::MeanEnstrophy => stats.mean_enstrophy,
            Statistic::MeanAbsPeak => stats.mean_abs_peak,
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `log v = intercept + slope·log t` by ordinary least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub statistic: Statistic,
    pub slope: f64,
    /// Classical OLS standard error, `sqrt(s²/Sxx)` with `s² = RSS/(n−2)`.
    pub slope_se: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points used in the fit, `(t, value)`.
    pub points: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Fits a power law to the points with `t > 0` and `value > 0`.
pub fn scaling_fit(statistic: Statistic, series: &[(f64, f64)]) -> Result<ScalingFit> {
    let mut warnings = Vec::new();
    let points: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, v)| t > 0.0 && v > 0.0 && t.is_finite() && v.is_finite())
        .collect();
    let dropped = series.len() - points.len();
    if dropped > 0 {
        warnings.push(format!("{statistic}: dropped {dropped} point(s) outside the log domain"));
    }
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{statistic}: {} usable point(s), need at least 3",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(format!("{statistic}: all times are equal")));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .max(0.0);
    let slope_se = (rss / (n - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(ScalingFit {
        statistic,
        slope,
        slope_se,
        intercept,
        r2,
        points,
        warnings,
    })
}

/// Census outcome for one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: f64,
    /// Field statistics, or the census error message.
    pub stats: std::result::Result<FieldStats, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CensusSeries {
    pub rows: Vec<SeriesRow>,
}

impl CensusSeries {
    /// `(t, value)` for every successful row with `t ≥ t_min`.
    pub fn series(&self, statistic: Statistic, t_min: f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.time >= t_min)
            .filter_map(|r| r.stats.as_ref().ok().map(|s| (r.time, statistic.of(s))))
            .collect()
    }

    /// One fit per statistic.
    pub fn fit_all(&self, t_min: f64) -> Vec<(Statistic, Result<ScalingFit>)> {
        Statistic::ALL
            .iter()
            .map(|&s| (s, scaling_fit(s, &self.series(s, t_min))))
            .collect()
    }
}

/// Censuses time-tagged snapshots independently, in parallel. Snapshots must
/// share one shape and be time-ordered; per-snapshot failures are kept as
/// error rows.
pub fn census_series(fields: &[Field], config: &CensusConfig) -> Result<CensusSeries> {
    let Some(first) = fields.first() else {
        return Ok(CensusSeries::default());
    };
    let mut times = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        let t = f
            .time()
            .ok_or_else(|| Error::Data(format!("snapshot {i} has no time tag")))?;
        if times.last().is_some_and(|&prev| t < prev) {
            return Err(Error::Data(format!("snapshot {i} at t = {t} is out of time order")));
        }
        times.push(t);
    }
    let census = Census::new(config, first.rows(), first.cols())?;
    let rows = fields
        .par_iter()
        .zip(times)
        .map(|(f, time)| SeriesRow {
            time,
            stats: census.run(f).map(|r| r.field_stats).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(CensusSeries { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_law(c: f64, xi: f64) -> Vec<(f64, f64)> {
        (1..=12).map(|i| (i as f64 * 0.7, c * (i as f64 * 0.7).powf(xi))).collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = scaling_fit(Statistic::Count, &power_law(3.0, -0.72)).unwrap();
        assert!((fit.slope + 0.72).abs() < 1e-12);
        assert!(fit.slope_se < 1e-7);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_flat() {
        let pts: Vec<_> = (1..6).map(|i| (i as f64, 4.0)).collect();
        let fit = scaling_fit(Statistic::MeanAbsPeak, &pts).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn standard_error_matches_hand_computation() {
        // log-space points (0, 0), (1, 1), (2, 3): slope 1.5, residuals
        // −1/6, 1/3, −1/6, RSS = 1/6, Sxx = 2, se = sqrt((1/6)/1/2).
        let pts: Vec<_> = [(0.0f64, 0.0f64), (1.0, 1.0), (2.0, 3.0)]
            .iter()
            .map(|&(x, y)| (x.exp(), y.exp()))
            .collect();
        let fit = scaling_fit(Statistic::Count, &pts).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.slope_se - (1.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!((fit.r2 - (1.0 - (1.0 / 6.0) / (14.0 / 3.0))).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_points_dropped_with_warning() {
        let mut pts = power_law(1.0, 0.3);
        pts.push((5.0, 0.0));
        pts.push((0.0, 1.0));
        let fit = scaling_fit(Statistic::MeanEnstrophy, &pts).unwrap();
        assert_eq!(fit.points.len(), 12);
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn too_few_points() {
        let pts = [(1.0, 1.0), (2.0, 0.5), (3.0, -1.0)];
        assert!(matches!(
            scaling_fit(Statistic::Count, &pts),
            Err(Error::InsufficientData(_))
        ));
    }
}
