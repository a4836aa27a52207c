use nalgebra::DMatrix;
use vortex_census::census::{BackfitControl, BackfitMethod, Backfitter, CrossGram};
use vortex_census::modwt::{FilterKind, MraPlan};
use vortex_census::scan::{Responses, TemplateRegression};
use vortex_census::solver::Ridge;
use vortex_census::template::{build_template, TemplateBasis, TemplateSpec};
use vortex_census::turbsim::{synthesize, Background, PlantedVortex};
use vortex_census::Field;

struct Setup {
    basis: TemplateBasis,
    reg: TemplateRegression,
    resp: Responses,
    gram: CrossGram,
}

impl Setup {
    fn new(spec: &TemplateSpec, field: &Field, noise_var: f64) -> Self {
        let (rows, cols) = field.shape();
        let basis = build_template(spec, rows, cols).unwrap();
        let plan = MraPlan::new(rows, cols, basis.filter(), basis.levels()).unwrap();
        let reg = TemplateRegression::new(&basis, &Ridge::default(), noise_var).unwrap();
        let resp = Responses::from_field(&plan, field).unwrap();
        let gram = CrossGram::new(&basis);
        Setup { basis, reg, resp, gram }
    }

    fn fitter(&self, centers: &[(usize, usize)]) -> Backfitter<'_> {
        let mut f = Backfitter::new(&self.gram, self.reg.solver(), self.resp.total_energy());
        for (c, rhs) in centers.iter().zip(self.reg.rhs_at(&self.resp, centers).unwrap()) {
            f.push(*c, rhs);
        }
        f
    }

    /// `MN × (K+1)` design with the template channels moved to `center`.
    fn design(&self, center: (usize, usize)) -> DMatrix<f64> {
        let (rows, cols) = self.basis.shape();
        let k = self.basis.num_channels();
        let shifted: Vec<Field> = self
            .basis
            .channels()
            .iter()
            .map(|z| z.shifted(center.0 as isize, center.1 as isize))
            .collect();
        DMatrix::from_fn(rows * cols, k + 1, |p, m| if m < k { shifted[m].data()[p] } else { 1.0 })
    }

    fn responses(&self) -> DMatrix<f64> {
        let (rows, cols) = self.basis.shape();
        let y = self.resp.channels();
        DMatrix::from_fn(rows * cols, y.len(), |p, l| y[l].data()[p])
    }

    /// Joint ridge solution assembled from materialised pixel-space designs.
    fn pixel_space_fit(&self, centers: &[(usize, usize)]) -> (Vec<DMatrix<f64>>, f64) {
        let d = self.basis.num_channels() + 1;
        let designs: Vec<DMatrix<f64>> = centers.iter().map(|&c| self.design(c)).collect();
        let (rows, cols) = self.basis.shape();
        let mut x = DMatrix::zeros(rows * cols, d * centers.len());
        for (s, xs) in designs.iter().enumerate() {
            x.view_mut((0, s * d), (rows * cols, d)).copy_from(xs);
        }
        let y = self.responses();
        let mut a = x.transpose() * &x;
        for s in 0..centers.len() {
            for (i, r) in self.reg.solver().ridge().iter().enumerate() {
                a[(s * d + i, s * d + i)] += r;
            }
        }
        let b = a.lu().solve(&(x.transpose() * &y)).unwrap();
        let rss = (&y - &x * &b).norm_squared();
        let betas = (0..centers.len()).map(|s| b.rows(s * d, d).into_owned()).collect();
        (betas, rss)
    }
}

fn small_spec() -> TemplateSpec {
    TemplateSpec {
        eta: 1.0,
        sigma2: 4.0,
        patch: 17,
        filter: FilterKind::D4,
        levels: 3,
    }
}

fn vortex(row: usize, col: usize, amplitude: f64, sigma2: f64) -> PlantedVortex {
    PlantedVortex { row, col, amplitude, sigma2 }
}

fn noisy_field() -> Field {
    let specs = [
        vortex(10, 12, 1.5, 4.0),
        vortex(24, 40, -1.0, 6.0),
        vortex(45, 20, 0.8, 3.0),
        vortex(50, 52, -1.3, 5.0),
    ];
    let bg = Background { noise_sd: 0.05, filament: None };
    synthesize(&specs, &bg, 64, 9).unwrap().field
}

/// Template rows, then the summed intercept: the split of the shared
/// intercept between vortices is fixed only by the ridge.
fn compare(got: &[DMatrix<f64>], want: &[DMatrix<f64>], tol: f64) {
    let k = got[0].ncols();
    let scale = want.iter().map(|b| b.rows(0, k).amax()).fold(0.0, f64::max);
    for (g, w) in got.iter().zip(want) {
        let err = (g.rows(0, k) - w.rows(0, k)).amax();
        assert!(err <= tol * scale, "template rows differ by {err:e}");
    }
    let sum = |bs: &[DMatrix<f64>]| {
        bs.iter().fold(DMatrix::<f64>::zeros(1, k), |acc, b| acc + b.rows(k, 1))
    };
    assert!((sum(got) - sum(want)).amax() <= tol * scale.max(1.0));
}

#[test]
fn direct_backfit_matches_pixel_space_joint_fit() {
    let field = noisy_field();
    let setup = Setup::new(&small_spec(), &field, 0.05f64.powi(2));
    let centers = [(10, 12), (24, 40), (45, 20), (50, 52), (14, 16)];
    let mut fitter = setup.fitter(&centers);
    let report = fitter.fit(&BackfitControl::default());
    assert!(report.direct && report.converged);
    let (want, rss) = setup.pixel_space_fit(&centers);
    compare(fitter.betas(), &want, 1e-7);
    assert!((report.rss - rss).abs() <= 1e-8 * setup.resp.total_energy());
}

#[test]
fn cyclic_backfit_reaches_the_same_fixed_point() {
    let field = noisy_field();
    let setup = Setup::new(&small_spec(), &field, 0.05f64.powi(2));
    let centers = [(10, 12), (24, 40), (45, 20), (50, 52)];
    let mut direct = setup.fitter(&centers);
    direct.fit(&BackfitControl::default());
    let mut cyclic = setup.fitter(&centers);
    let control = BackfitControl {
        method: BackfitMethod::Cyclic,
        tolerance: 1e-9,
        max_sweeps: 5000,
    };
    let report = cyclic.fit(&control);
    assert!(report.converged, "{} sweeps", report.sweeps);
    compare(cyclic.betas(), direct.betas(), 1e-6);
    let (want, _) = setup.pixel_space_fit(&centers);
    compare(cyclic.betas(), &want, 1e-6);
}

#[test]
fn single_vortex_backfit_is_the_single_location_solve() {
    let field = noisy_field();
    let setup = Setup::new(&small_spec(), &field, 0.05f64.powi(2));
    for method in [BackfitMethod::Direct, BackfitMethod::Cyclic] {
        let mut fitter = setup.fitter(&[(24, 40)]);
        fitter.fit(&BackfitControl { method, ..Default::default() });
        let want = setup.reg.fit_at(&setup.resp, (24, 40)).unwrap();
        let err = (&fitter.betas()[0] - want.full()).amax();
        assert!(err <= 1e-10 * want.full().amax(), "{method:?}: {err:e}");
    }
}

fn planted(basis: &TemplateBasis, plants: &[((usize, usize), f64)]) -> Field {
    let (rows, cols) = basis.shape();
    let mut f = Field::zeros(rows, cols);
    for &((r, c), sign) in plants {
        f.axpy(sign, &basis.embedded().shifted(r as isize, c as isize));
    }
    f
}

#[test]
fn one_planted_template_is_fitted_exactly() {
    let spec = TemplateSpec::default();
    let basis = build_template(&spec, 128, 128).unwrap();
    let field = planted(&basis, &[((70, 30), 1.0)]);
    let setup = Setup::new(&spec, &field, 0.0);
    let k = basis.num_channels();
    let mut fitter = setup.fitter(&[(70, 30)]);
    let report = fitter.fit(&BackfitControl::default());
    let dev = (fitter.betas()[0].rows(0, k) - DMatrix::identity(k, k)).amax();
    assert!(dev < 1e-6, "{dev:e}");
    assert!(report.rss <= 1e-10 * setup.resp.total_energy(), "rss {:e}", report.rss);
}

#[test]
fn two_planted_templates_converge_in_few_sweeps() {
    let spec = TemplateSpec::default();
    let basis = build_template(&spec, 256, 256).unwrap();
    let k = basis.num_channels();
    for offset in [59usize, 60, 61] {
        let a = (100, 70);
        let b = (100, 70 + offset);
        let field = planted(&basis, &[(a, 1.0), (b, -1.0)]);
        let setup = Setup::new(&spec, &field, 0.0);
        let mut fitter = setup.fitter(&[a, b]);
        let control = BackfitControl {
            method: BackfitMethod::Cyclic,
            ..Default::default()
        };
        let report = fitter.fit(&control);
        assert!(report.converged && report.sweeps <= 10, "{offset} px: {} sweeps", report.sweeps);
        let id = DMatrix::<f64>::identity(k, k);
        assert!((fitter.betas()[0].rows(0, k) - &id).amax() < 1e-3);
        assert!((fitter.betas()[1].rows(0, k) + &id).amax() < 1e-3);
    }
}

#[test]
fn duplicated_centre_leaves_the_second_copy_near_zero() {
    let spec = TemplateSpec::default();
    let basis = build_template(&spec, 128, 128).unwrap();
    let field = planted(&basis, &[((64, 64), 1.0)]);
    let setup = Setup::new(&spec, &field, 0.0);
    let mut fitter = setup.fitter(&[(64, 64), (64, 64)]);
    let control = BackfitControl {
        method: BackfitMethod::Cyclic,
        ..Default::default()
    };
    fitter.fit(&control);
    let k = basis.num_channels();
    assert!(fitter.betas()[1].rows(0, k).amax() < 1e-3);
}

#[test]
fn adding_vortices_never_increases_rss() {
    let field = noisy_field();
    let setup = Setup::new(&small_spec(), &field, 0.05f64.powi(2));
    let centers = [(10, 12), (24, 40), (45, 20), (50, 52), (14, 16), (33, 3), (60, 30)];
    let rhs = setup.reg.rhs_at(&setup.resp, &centers).unwrap();
    let mut fitter = Backfitter::new(&setup.gram, setup.reg.solver(), setup.resp.total_energy());
    let mut last = setup.resp.total_energy();
    for (c, b) in centers.iter().zip(rhs) {
        fitter.push(*c, b);
        let rss = fitter.fit(&BackfitControl::default()).rss;
        assert!(rss <= last * (1.0 + 1e-12), "{rss} > {last}");
        last = rss;
    }
}
