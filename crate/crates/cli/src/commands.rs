use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vortex_census::census::{Census, CensusConfig, CensusMeta, CensusResult, FieldStats, GcvStep};
use vortex_census::io::{read_field, write_field, write_pgm};
use vortex_census::modwt::{mra, Channel, WaveletFilter};
use vortex_census::scaling::{census_series, ScalingFit, Statistic};
use vortex_census::turbsim::{random_layout, simulate_with, synthesize, Background, LayoutSpec, PlantedVortex};
use vortex_census::Field;

use crate::args::Command;
use crate::config::RunConfig;
use crate::failure::{Failure, Outcome};
use crate::output::{scaling_svg, time_tag, write_csv, write_json, write_text};

pub fn run(command: &Command, cfg: RunConfig) -> Outcome {
    let mut cfg = cfg;
    cfg.version = Some(env!("CARGO_PKG_VERSION").to_string());
    cfg.command = Some(command.name().to_string());
    let out = cfg.out_dir()?;
    cfg.out = Some(out.clone());
    match command {
        Command::Simulate(_) => simulate(&mut cfg, &out),
        Command::Synth(_) => synth(&mut cfg, &out),
        Command::Mra(_) => decompose(&mut cfg, &out),
        Command::Scan(_) => scan(&mut cfg, &out),
        Command::Census(_) => census(&mut cfg, &out),
        Command::Scaling(_) => scaling(&mut cfg, &out),
    }
}

fn resolved(out: &Path, cfg: &RunConfig) -> Outcome {
    write_json(&out.join("resolved_config.json"), cfg)
}

fn simulate(cfg: &mut RunConfig, out: &Path) -> Outcome {
    let sim = cfg.simulation()?;
    cfg.record_simulation(&sim);
    resolved(out, cfg)?;
    let mut index = Vec::new();
    simulate_with(&sim, |snap| {
        let t = snap.time().unwrap_or(0.0);
        let file = format!("snap_t{}.vort", time_tag(t));
        write_field(out.join(&file), &snap)?;
        eprintln!("t = {t:.3}  max|ζ| = {:.4}", snap.max_abs());
        index.push(SnapshotRow {
            time: t,
            file,
            max_abs: snap.max_abs(),
            rms: (snap.sum_sq() / snap.len() as f64).sqrt(),
        });
        Ok(())
    })?;
    write_csv(&out.join("snapshots.csv"), index)
}

#[derive(Serialize)]
struct SnapshotRow {
    time: f64,
    file: String,
    max_abs: f64,
    rms: f64,
}

/// Row of a truth list; `circulation` is ignored on input.
#[derive(Serialize, Deserialize)]
struct TruthRow {
    row: usize,
    col: usize,
    amplitude: f64,
    sigma2: f64,
    #[serde(default, skip_deserializing)]
    circulation: f64,
}

fn synth(cfg: &mut RunConfig, out: &Path) -> Outcome {
    let n = cfg.n.unwrap_or(256);
    let seed = cfg.seed.unwrap_or(0);
    let background = Background {
        noise_sd: cfg.noise.unwrap_or(0.0),
        filament: cfg.filament,
    };
    cfg.n = Some(n);
    cfg.seed = Some(seed);
    cfg.noise = Some(background.noise_sd);
    let specs = match &cfg.vortices {
        Some(path) => read_truth(path)?,
        None => {
            let layout = LayoutSpec {
                count: cfg.count.unwrap_or(10),
                amplitude: (0.5, 2.0),
                sigma2: (4.0, 16.0),
                min_separation: cfg.min_separation.unwrap_or(30.0),
            };
            cfg.count = Some(layout.count);
            cfg.min_separation = Some(layout.min_separation);
            // Offset keeps the layout stream distinct from the noise stream.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            random_layout(n, &layout, &mut rng)?
        }
    };
    resolved(out, cfg)?;
    let synthetic = synthesize(&specs, &background, n, seed)?;
    write_field(out.join("field.vort"), &synthetic.field)?;
    write_pgm(out.join("field.pgm"), &synthetic.field)?;
    write_csv(
        &out.join("truth.csv"),
        synthetic.truth.iter().map(|v| TruthRow {
            row: v.row,
            col: v.col,
            amplitude: v.amplitude,
            sigma2: v.sigma2,
            circulation: v.circulation(),
        }),
    )
}

fn read_truth(path: &Path) -> Outcome<Vec<PlantedVortex>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize::<TruthRow>()
        .map(|row| {
            let r = row.map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
            Ok(PlantedVortex {
                row: r.row,
                col: r.col,
                amplitude: r.amplitude,
                sigma2: r.sigma2,
            })
        })
        .collect()
}

fn load_input(cfg: &RunConfig) -> Outcome<Field> {
    Ok(read_field(cfg.require_input()?)?)
}

fn decompose(cfg: &mut RunConfig, out: &Path) -> Outcome {
    let field = load_input(cfg)?;
    let (filter, levels) = cfg.mra_settings();
    cfg.filter = Some(filter);
    cfg.levels = Some(levels);
    resolved(out, cfg)?;
    let stack = mra(&field, &WaveletFilter::new(filter), levels)?;
    for (k, channel) in stack.channels().iter().enumerate() {
        let label = Channel::from_index(k, levels).label(levels);
        let channel = channel.clone().with_time(field.time());
        write_field(out.join(format!("mra_{label}.vort")), &channel)?;
        write_pgm(out.join(format!("mra_{label}.pgm")), &channel)?;
    }
    Ok(())
}

fn census_setup(cfg: &mut RunConfig) -> Outcome<(Field, Census)> {
    let field = load_input(cfg)?;
    let census_cfg: CensusConfig = cfg.census()?;
    cfg.record_census(&census_cfg);
    let census = Census::new(&census_cfg, field.rows(), field.cols())?;
    Ok((field, census))
}

#[derive(Serialize)]
struct CandidateRow {
    rank: usize,
    row: usize,
    col: usize,
    lambda: f64,
}

#[derive(Serialize)]
struct ScanSummary {
    noise_sd: f64,
    gram_condition: f64,
    candidates: usize,
}

fn scan(cfg: &mut RunConfig, out: &Path) -> Outcome {
    let (field, census) = census_setup(cfg)?;
    resolved(out, cfg)?;
    let scan = census.scan(&field)?;
    let set = &scan.candidates;
    write_field(out.join("lambda.vort"), &set.lambda_map)?;
    write_pgm(out.join("lambda.pgm"), &set.lambda_map)?;
    write_field(out.join("lambda_smoothed.vort"), &set.smoothed_map)?;
    write_pgm(out.join("lambda_smoothed.pgm"), &set.smoothed_map)?;
    write_csv(
        &out.join("candidates.csv"),
        set.points.iter().enumerate().map(|(i, c)| CandidateRow {
            rank: i + 1,
            row: c.row,
            col: c.col,
            lambda: c.lambda,
        }),
    )?;
    write_json(
        &out.join("scan.json"),
        &ScanSummary {
            noise_sd: scan.noise_sd,
            gram_condition: scan.condition,
            candidates: set.points.len(),
        },
    )
}

#[derive(Serialize)]
struct VortexRow {
    t: Option<f64>,
    s: usize,
    row: usize,
    col: usize,
    circulation: f64,
    enstrophy: f64,
    peak: f64,
    size: f64,
    sign: i8,
}

#[derive(Serialize)]
struct CensusSummary<'a> {
    time: Option<f64>,
    field_stats: &'a FieldStats,
    gcv_path: &'a [GcvStep],
    meta: &'a CensusMeta,
}

fn census(cfg: &mut RunConfig, out: &Path) -> Outcome {
    let (field, census) = census_setup(cfg)?;
    resolved(out, cfg)?;
    let result: CensusResult = census.run(&field)?;
    for w in &result.meta.warnings {
        eprintln!("warning: {w}");
    }
    let t = field.time();
    write_csv(
        &out.join("vortices.csv"),
        result.vortices.iter().enumerate().map(|(i, v)| VortexRow {
            t,
            s: i + 1,
            row: v.row,
            col: v.col,
            circulation: v.stats.circulation,
            enstrophy: v.stats.enstrophy,
            peak: v.stats.peak,
            size: v.stats.size,
            sign: v.sign,
        }),
    )?;
    write_json(
        &out.join("summary.json"),
        &CensusSummary {
            time: t,
            field_stats: &result.field_stats,
            gcv_path: &result.gcv_path,
            meta: &result.meta,
        },
    )?;
    let residual = result.residual.clone().with_time(t);
    write_field(out.join("residual.vort"), &residual)?;
    write_pgm(out.join("residual.pgm"), &residual)?;
    let vortices = result.vortex_sum(&field).with_time(t);
    write_field(out.join("vortices.vort"), &vortices)?;
    write_pgm(out.join("vortices.pgm"), &vortices)?;
    eprintln!("{} vortices selected", result.count());
    Ok(())
}

#[derive(Serialize)]
struct SeriesCsvRow {
    time: f64,
    count: Option<usize>,
    mean_abs_circulation: Option<f64>,
    mean_enstrophy: Option<f64>,
    mean_vortex_enstrophy: Option<f64>,
    mean_abs_peak: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct FitCsvRow {
    statistic: Statistic,
    slope: Option<f64>,
    slope_se: Option<f64>,
    intercept: Option<f64>,
    r2: Option<f64>,
    points: usize,
    error: Option<String>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum FitEntry {
    Fit(ScalingFit),
    Failed { statistic: Statistic, error: String },
}

#[derive(Serialize)]
struct ScalingSummary {
    t_min: f64,
    snapshots: usize,
    fits: Vec<FitEntry>,
}

fn scaling(cfg: &mut RunConfig, out: &Path) -> Outcome {
    let dir = cfg
        .snapshots
        .clone()
        .ok_or_else(|| Failure::usage("missing --snapshots"))?;
    let t_min = cfg.t_min.unwrap_or(0.0);
    cfg.t_min = Some(t_min);
    let census_cfg = cfg.census()?;
    cfg.record_census(&census_cfg);
    resolved(out, cfg)?;

    let fields = load_snapshots(&dir)?;
    eprintln!("{} snapshots from {}", fields.len(), dir.display());
    let series = census_series(&fields, &census_cfg)?;
    write_csv(
        &out.join("series.csv"),
        series.rows.iter().map(|r| match &r.stats {
            Ok(s) => SeriesCsvRow {
                time: r.time,
                count: Some(s.count),
                mean_abs_circulation: Some(s.mean_abs_circulation),
                mean_enstrophy: Some(s.mean_enstrophy),
                mean_vortex_enstrophy: Some(s.mean_vortex_enstrophy),
                mean_abs_peak: Some(s.mean_abs_peak),
                error: None,
            },
            Err(e) => SeriesCsvRow {
                time: r.time,
                count: None,
                mean_abs_circulation: None,
                mean_enstrophy: None,
                mean_vortex_enstrophy: None,
                mean_abs_peak: None,
                error: Some(e.clone()),
            },
        }),
    )?;

    let fits = series.fit_all(t_min);
    write_csv(
        &out.join("scaling.csv"),
        fits.iter().map(|(stat, fit)| match fit {
            Ok(f) => FitCsvRow {
                statistic: *stat,
                slope: Some(f.slope),
                slope_se: Some(f.slope_se),
                intercept: Some(f.intercept),
                r2: Some(f.r2),
                points: f.points.len(),
                error: None,
            },
            Err(e) => FitCsvRow {
                statistic: *stat,
                slope: None,
                slope_se: None,
                intercept: None,
                r2: None,
                points: 0,
                error: Some(e.to_string()),
            },
        }),
    )?;
    let plotted: Vec<&ScalingFit> = fits.iter().filter_map(|(_, f)| f.as_ref().ok()).collect();
    write_text(&out.join("scaling.svg"), &scaling_svg(&plotted))?;
    for (stat, fit) in &fits {
        match fit {
            Ok(f) => eprintln!("{stat}: slope {:.4} ({:.4}), R² {:.3}", f.slope, f.slope_se, f.r2),
            Err(e) => eprintln!("{stat}: {e}"),
        }
    }
    let summary = ScalingSummary {
        t_min,
        snapshots: fields.len(),
        fits: fits
            .into_iter()
            .map(|(statistic, fit)| match fit {
                Ok(f) => FitEntry::Fit(f),
                Err(e) => FitEntry::Failed {
                    statistic,
                    error: e.to_string(),
                },
            })
            .collect(),
    };
    write_json(&out.join("scaling.json"), &summary)
}

/// Every `.vort` file in `dir`, ordered by time tag.
fn load_snapshots(dir: &Path) -> Outcome<Vec<Field>> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::data(format!("cannot list {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vort"))
        .collect();
    paths.sort();
    let mut fields = Vec::with_capacity(paths.len());
    for p in &paths {
        let f = read_field(p)?;
        if f.time().is_none() {
            return Err(Failure::data(format!("{} has no time tag", p.display())));
        }
        fields.push(f);
    }
    fields.sort_by(|a, b| a.time().partial_cmp(&b.time()).expect("time tags are finite"));
    Ok(fields)
}
