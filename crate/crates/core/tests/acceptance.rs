//! Acceptance report: one PASS/FAIL line per criterion with the measured
//! values. Criteria that are not met are reported, not asserted, so the
//! target always completes.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortex_census::census::{BackfitMethod, Census, CensusConfig, CensusResult};
use vortex_census::grid::periodic_distance;
use vortex_census::modwt::{FilterKind, MraPlan, WaveletFilter};
use vortex_census::scaling::{census_series, Statistic};
use vortex_census::scan::{fit_all_locations, Responses, TemplateRegression};
use vortex_census::solver::{NoiseRidge, Ridge};
use vortex_census::template::{build_template, TemplateBasis, TemplateSpec};
use vortex_census::turbsim::{
    random_layout, simulate, synthesize, Background, LayoutSpec, PlantedVortex, SimConfig, Simulation,
};
use vortex_census::Field;

const MRA_TOL: f64 = 1e-8;
const MRA_BUDGET: Duration = Duration::from_secs(60);
const SHIFT_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const IDENTITY_TOL: f64 = 1e-6;
const SELF_LAMBDA_TOL: f64 = 1e-10;
const BACKGROUND_RATIO: f64 = 1e3;
const RECOVERY_SEEDS: u64 = 20;
const RECOVERY_RUNS_NEEDED: usize = 18;
const MATCH_RADIUS: f64 = 2.0;
/// Share of planted vortices that must have a detection within the match radius.
const MATCH_RECALL: f64 = 0.9;
const CIRCULATION_TOL: f64 = 0.15;
/// Nearest planted neighbour at least this far away counts as well separated.
const WELL_SEPARATED: f64 = 33.0;
const RECOVERY_BUDGET: Duration = Duration::from_secs(600);
const WHITE_NOISE_SEEDS: u64 = 10;
const DECAY_TOL: f64 = 1e-6;
const DRIFT_TOL: f64 = 1e-6;
const DRIFT_STEPS: usize = 500;
const COUNT_SLOPE: (f64, f64) = (-1.0, -0.4);
const COUNT_R2: f64 = 0.8;
const PEAK_SLOPE: (f64, f64) = (-0.2, 0.1);
const MIN_SNAPSHOTS: usize = 15;
const SCALING_BUDGET: Duration = Duration::from_secs(1800);
const DECOMPOSITION_TOL: f64 = 1e-6;
/// RSS may rise by at most this fraction of the initial energy per step.
const RSS_SLACK: f64 = 1e-9;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, pass: bool, detail: String, elapsed: Duration) {
        if !pass {
            self.failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{id}] {name}: {detail} ({:.1} s)", elapsed.as_secs_f64());
    }
}

/// Census runs collected for the decomposition check.
#[derive(Default)]
struct Decompositions {
    runs: usize,
    worst_identity: f64,
    rss_rises: usize,
}

impl Decompositions {
    fn record(&mut self, field: &Field, result: &CensusResult) {
        let mut sum = result.vortex_sum(field);
        sum.axpy(1.0, &result.residual);
        self.runs += 1;
        self.worst_identity = self.worst_identity.max(sum.max_abs_diff(field));
        let slack = RSS_SLACK * result.gcv_path[0].rss;
        self.rss_rises += result
            .gcv_path
            .windows(2)
            .filter(|w| w[1].rss > w[0].rss + slack)
            .count();
    }
}

fn random_field(rows: usize, cols: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn mra_reconstruction(report: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for kind in FilterKind::ALL {
        let filter = WaveletFilter::new(kind);
        for levels in 1..=6 {
            let plan = MraPlan::new(128, 128, &filter, levels).unwrap();
            for seed in 0..50 {
                let f = random_field(128, 128, seed);
                let stack = plan.decompose(&f).unwrap();
                worst = worst.max(stack.reconstruct().max_abs_diff(&f));
            }
        }
    }
    let elapsed = start.elapsed();
    report.line(
        1,
        "MRA reconstruction",
        worst <= MRA_TOL && elapsed <= MRA_BUDGET,
        format!("max error {worst:.2e} over 50 fields x 3 filters x J 1..6"),
        elapsed,
    );
}

fn shift_equivariance(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let plan = MraPlan::new(128, 128, &WaveletFilter::new(FilterKind::La8), 6).unwrap();
    let census = Census::new(&CensusConfig::default(), 128, 128).unwrap();
    let (field, _) = three_vortices(0.05, 12);
    let base_stack = plan.decompose(&field).unwrap();
    let base_lambda = census.scan(&field).unwrap().candidates.lambda_map;
    let (mut mra_err, mut lambda_err) = (0.0f64, 0.0f64);
    for _ in 0..16 {
        let (dr, dc) = (rng.random_range(-127i64..128) as isize, rng.random_range(-127i64..128) as isize);
        let moved = field.shifted(dr, dc);
        mra_err = mra_err.max(plan.decompose(&moved).unwrap().max_abs_diff(&base_stack.shifted(dr, dc)));
        let lambda = census.scan(&moved).unwrap().candidates.lambda_map;
        lambda_err = lambda_err.max(lambda.max_abs_diff(&base_lambda.shifted(dr, dc)));
    }
    report.line(
        2,
        "shift equivariance",
        mra_err <= SHIFT_TOL && lambda_err <= SHIFT_TOL,
        format!("MRA {mra_err:.2e}, Λ {lambda_err:.2e} over 16 shifts"),
        start.elapsed(),
    );
}

/// Least squares on the explicit pixel design, solved by SVD.
fn explicit_fit(basis: &TemplateBasis, responses: &[Field], center: (usize, usize)) -> DMatrix<f64> {
    let (rows, cols) = basis.shape();
    let k = basis.num_channels();
    let shifted: Vec<Field> = basis
        .channels()
        .iter()
        .map(|z| z.shifted(center.0 as isize, center.1 as isize))
        .collect();
    let design = DMatrix::from_fn(rows * cols, k + 1, |p, m| if m < k { shifted[m].data()[p] } else { 1.0 });
    let y = DMatrix::from_fn(rows * cols, k, |p, l| responses[l].data()[p]);
    design.svd(true, true).solve(&y, 1e-14).unwrap()
}

fn regression_oracle(report: &mut Report) {
    let start = Instant::now();
    let spec = TemplateSpec {
        eta: 1.0,
        sigma2: 9.0,
        patch: 25,
        filter: FilterKind::Haar,
        levels: 3,
    };
    let basis = build_template(&spec, 32, 32).unwrap();
    let plan = MraPlan::new(32, 32, basis.filter(), 3).unwrap();
    let field = random_field(32, 32, 31);
    let stack = plan.decompose(&field).unwrap();
    let maps = fit_all_locations(&stack, &basis, &Ridge::exact(), 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let center = (rng.random_range(0..32), rng.random_range(0..32));
        let want = explicit_fit(&basis, stack.channels(), center);
        worst = worst.max((maps.at(center.0, center.1).full() - want).amax());
    }
    let elapsed = start.elapsed();
    report.line(
        3,
        "regression oracle",
        worst <= ORACLE_TOL && elapsed <= ORACLE_BUDGET,
        format!("max entry error {worst:.2e} at 20 locations"),
        elapsed,
    );
}

fn self_fit_identity(report: &mut Report) {
    let start = Instant::now();
    let basis = build_template(&TemplateSpec::default(), 128, 128).unwrap();
    let plan = MraPlan::new(128, 128, basis.filter(), basis.levels()).unwrap();
    let reg = TemplateRegression::new(&basis, &Ridge::default(), 0.0).unwrap();
    let k = basis.num_channels();
    let (mut dev, mut centre_lambda, mut ratio) = (0.0f64, 0.0f64, f64::INFINITY);
    for (sign, center) in [(1.0, (40usize, 77usize)), (-1.0, (100, 9))] {
        let field = basis.embedded().shifted(center.0 as isize, center.1 as isize).scaled(sign);
        let resp = Responses::from_field(&plan, &field).unwrap();
        let beta = reg.fit_at(&resp, center).unwrap();
        dev = dev.max((beta.block() - DMatrix::identity(k, k).scale(sign)).amax());
        let lambda = reg.lambda_map(&resp).unwrap();
        centre_lambda = centre_lambda.max(lambda[center]);
        let mut rest = lambda.data().to_vec();
        rest.sort_by(f64::total_cmp);
        ratio = ratio.min(rest[rest.len() / 2] / lambda[center].max(f64::MIN_POSITIVE));
    }
    report.line(
        4,
        "self-fit identity",
        dev <= IDENTITY_TOL && centre_lambda <= SELF_LAMBDA_TOL && ratio >= BACKGROUND_RATIO,
        format!("|β̂ ∓ I| {dev:.2e}, Λ at centre {centre_lambda:.2e}, background median / centre {ratio:.2e}"),
        start.elapsed(),
    );
}

fn planted_recovery(report: &mut Report, decomp: &mut Decompositions) {
    let start = Instant::now();
    let n = 256;
    let census = Census::new(&CensusConfig::default(), n, n).unwrap();
    let layout = LayoutSpec {
        count: 10,
        amplitude: (0.5, 2.0),
        sigma2: (4.0, 16.0),
        min_separation: 30.0,
    };
    let (mut good_runs, mut planted, mut matched) = (0usize, 0usize, 0usize);
    let (mut separated, mut within_tol, mut worst_gamma) = (0usize, 0usize, 0.0f64);
    let mut counts = Vec::new();
    for seed in 0..RECOVERY_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_layout(n, &layout, &mut rng).unwrap();
        let bg = Background { noise_sd: 0.05, filament: None };
        let field = synthesize(&truth, &bg, n, 1000 + seed).unwrap().field;
        let result = census.run(&field).unwrap();
        decomp.record(&field, &result);
        counts.push(result.count());
        if result.count().abs_diff(truth.len()) <= 1 {
            good_runs += 1;
        }
        for v in &truth {
            planted += 1;
            let nearest = result
                .vortices
                .iter()
                .map(|r| (periodic_distance((r.row, r.col), (v.row, v.col), n, n), r))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let Some((_, hit)) = nearest.filter(|(d, _)| *d <= MATCH_RADIUS) else {
                continue;
            };
            matched += 1;
            let neighbour = truth
                .iter()
                .filter(|w| !std::ptr::eq(*w, v))
                .map(|w| periodic_distance((w.row, w.col), (v.row, v.col), n, n))
                .fold(f64::INFINITY, f64::min);
            if neighbour >= WELL_SEPARATED {
                separated += 1;
                let err = ((hit.stats.circulation - v.circulation()) / v.circulation()).abs();
                worst_gamma = worst_gamma.max(err);
                if err <= CIRCULATION_TOL {
                    within_tol += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let recall = matched as f64 / planted as f64;
    let pass = good_runs >= RECOVERY_RUNS_NEEDED
        && recall >= MATCH_RECALL
        && within_tol == separated
        && elapsed <= RECOVERY_BUDGET;
    report.line(
        5,
        "planted census recovery",
        pass,
        format!(
            "S within ±1 in {good_runs}/{RECOVERY_SEEDS} runs (counts {counts:?}); \
             {matched}/{planted} centres within {MATCH_RADIUS} px; \
             Γ within 15% for {within_tol}/{separated} well-separated, worst {:.0}%",
            100.0 * worst_gamma
        ),
        elapsed,
    );
}

fn three_vortices(noise_sd: f64, seed: u64) -> (Field, Vec<PlantedVortex>) {
    let truth = vec![
        PlantedVortex { row: 30, col: 40, amplitude: 1.0, sigma2: 9.0 },
        PlantedVortex { row: 90, col: 100, amplitude: -1.0, sigma2: 9.0 },
        PlantedVortex { row: 100, col: 20, amplitude: 1.0, sigma2: 9.0 },
    ];
    let bg = Background { noise_sd, filament: None };
    let syn = synthesize(&truth, &bg, 128, seed).unwrap();
    (syn.field, syn.truth)
}

fn gcv_minimum(result: &CensusResult) -> usize {
    result
        .gcv_path
        .iter()
        .min_by(|a, b| a.gcv.total_cmp(&b.gcv))
        .map_or(0, |s| s.s)
}

fn gcv_behaviour(report: &mut Report, decomp: &mut Decompositions) {
    let start = Instant::now();
    let census = Census::new(&CensusConfig::default(), 128, 128).unwrap();
    let (field, _) = three_vortices(0.0, 1);
    let noiseless = census.run(&field).unwrap();
    decomp.record(&field, &noiseless);
    let noiseless_min = gcv_minimum(&noiseless);

    let mut noise_counts = Vec::new();
    for seed in 0..WHITE_NOISE_SEEDS {
        let bg = Background { noise_sd: 1.0, filament: None };
        let f = synthesize(&[], &bg, 128, 500 + seed).unwrap().field;
        let result = census.run(&f).unwrap();
        decomp.record(&f, &result);
        noise_counts.push(result.count());
    }
    let noise_max = noise_counts.iter().copied().max().unwrap_or(0);
    report.line(
        6,
        "GCV behaviour",
        noiseless_min == 3 && noise_max <= 1,
        format!("noiseless 3-vortex minimum at S = {noiseless_min}; white-noise S {noise_counts:?}"),
        start.elapsed(),
    );

    // Informational: the same noiseless field with a small fixed noise ridge.
    let mut cfg = CensusConfig::default();
    cfg.ridge.noise = NoiseRidge::Fixed(1e-6);
    let ridged = Census::new(&cfg, 128, 128).unwrap().run(&field).unwrap();
    println!(
        "info [6] noiseless 3-vortex field with noise ridge 1e-6: GCV minimum at S = {}",
        gcv_minimum(&ridged)
    );
}

fn simulator_exactness(report: &mut Report) {
    let start = Instant::now();
    let n = 64;
    let nu = 0.02;
    let dx = std::f64::consts::TAU / n as f64;
    let z0 = Field::from_fn(n, n, |r, c| (c as f64 * dx).sin() * (r as f64 * dx).sin());
    let mut sim = Simulation::from_field(&z0, nu, 0.01).unwrap();
    let t = 5.0;
    sim.advance_to(t).unwrap();
    let want = z0.scaled((-4.0 * nu * t).exp());
    let decay = sim.vorticity().max_abs_diff(&want) / want.max_abs();

    let cfg = SimConfig {
        n: 64,
        nu: Some(0.0),
        dt: 2e-3,
        init_peak_k: Some(6),
        init_amplitude: 1.0,
        seed: 3,
        ..SimConfig::default()
    };
    let mut sim = Simulation::new(&cfg).unwrap();
    let (e0, z0) = (sim.energy(), sim.enstrophy());
    for _ in 0..DRIFT_STEPS {
        sim.step(f64::INFINITY).unwrap();
    }
    let energy = ((sim.energy() - e0) / e0).abs();
    let enstrophy = ((sim.enstrophy() - z0) / z0).abs();
    report.line(
        7,
        "simulator exactness",
        decay <= DECAY_TOL && energy <= DRIFT_TOL && enstrophy <= DRIFT_TOL,
        format!(
            "Taylor–Green relative error {decay:.2e}; ν = 0 drift over {DRIFT_STEPS} steps: \
             energy {energy:.2e}, enstrophy {enstrophy:.2e}"
        ),
        start.elapsed(),
    );
}

fn temporal_scaling(report: &mut Report, decomp: &mut Decompositions) {
    let start = Instant::now();
    let sim = SimConfig {
        n: 128,
        dt: 0.01,
        t_end: 32.0,
        snapshot_interval: 2.0,
        init_peak_k: Some(8),
        seed: 0,
        ..SimConfig::default()
    };
    let snapshots = simulate(&sim).unwrap();
    let cfg = CensusConfig {
        backfit: BackfitMethod::Direct,
        ..CensusConfig::default()
    };
    let census = Census::new(&cfg, 128, 128).unwrap();
    for f in &snapshots {
        decomp.record(f, &census.run(f).unwrap());
    }
    let series = census_series(&snapshots, &cfg).unwrap();
    let t_min = 2.0;
    let fits = series.fit_all(t_min);
    let fit = |s: Statistic| fits.iter().find(|(x, _)| *x == s).and_then(|(_, f)| f.as_ref().ok());
    let used = series.series(Statistic::Count, t_min).len();
    let (count, enstrophy, peak) = (
        fit(Statistic::Count),
        fit(Statistic::MeanEnstrophy),
        fit(Statistic::MeanAbsPeak),
    );
    let within = |x: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&x);
    let count_ok = count.is_some_and(|f| within(f.slope, COUNT_SLOPE) && f.r2 >= COUNT_R2);
    let enstrophy_ok = enstrophy.is_some_and(|f| f.slope < 0.0);
    let peak_ok = peak.is_some_and(|f| within(f.slope, PEAK_SLOPE));
    let show = |f: Option<&vortex_census::scaling::ScalingFit>| {
        f.map_or("no fit".to_string(), |f| format!("{:.3} (R² {:.2})", f.slope, f.r2))
    };
    let elapsed = start.elapsed();
    report.line(
        8,
        "temporal scaling",
        used >= MIN_SNAPSHOTS && count_ok && enstrophy_ok && peak_ok && elapsed <= SCALING_BUDGET,
        format!(
            "{used} snapshots; count slope {} [{}], mean enstrophy slope {} [{}], mean |peak| slope {} [{}]",
            show(count),
            if count_ok { "ok" } else { "out of range" },
            show(enstrophy),
            if enstrophy_ok { "ok" } else { "not negative" },
            show(peak),
            if peak_ok { "ok" } else { "out of range" },
        ),
        elapsed,
    );
}

fn main() {
    let start = Instant::now();
    let mut report = Report { failed: 0 };
    let mut decomp = Decompositions::default();
    mra_reconstruction(&mut report);
    shift_equivariance(&mut report);
    regression_oracle(&mut report);
    self_fit_identity(&mut report);
    planted_recovery(&mut report, &mut decomp);
    gcv_behaviour(&mut report, &mut decomp);
    simulator_exactness(&mut report);
    temporal_scaling(&mut report, &mut decomp);
    report.line(
        9,
        "decomposition identity",
        decomp.worst_identity <= DECOMPOSITION_TOL && decomp.rss_rises == 0,
        format!(
            "{} census runs: max |Σv̂ + residual − input| {:.2e}, RSS rises {}",
            decomp.runs, decomp.worst_identity, decomp.rss_rises
        ),
        Duration::ZERO,
    );
    println!(
        "acceptance: {} of 9 criteria failed, total {:.1} s",
        report.failed,
        start.elapsed().as_secs_f64()
    );
}
