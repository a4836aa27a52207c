//! Pseudo-spectral decaying 2D turbulence on the doubly periodic square
//! `[0, 2π)²`, integer wavenumbers.
//!
//! `∂ζ/∂t + u·∇ζ = −ν∇⁴ζ`, with `ψ̂ = −ζ̂/|k|²` and `u = (−∂ψ/∂y, ∂ψ/∂x)`.
//! Columns run along `x`, rows along `y`. Time stepping is RK4 with an
//! integrating factor for the hyperviscous term; the advection product is
//! dealiased with the 2/3 rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::spectral::{signed_frequency, Fft2, HalfSpectrum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Hyperviscosity; `None` selects [`SimConfig::default_nu`].
    pub nu: Option<f64>,
    /// Upper bound on the step; the CFL limit may shorten it.
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_interval: f64,
    pub seed: u64,
    /// Centre of the initial energy annulus; `None` selects `n/8`.
    pub init_peak_k: Option<usize>,
    /// RMS vorticity of the initial field.
    pub init_amplitude: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 128,
            nu: None,
            dt: 0.01,
            t_end: 40.0,
            snapshot_interval: 1.0,
            seed: 0,
            init_peak_k: None,
            init_amplitude: 10.0,
        }
    }
}

impl SimConfig {
    /// `2/(k_max⁴·dt)` with `k_max = n/3`: the dealiasing cutoff is damped
    /// by `e⁻²` per nominal step.
    pub fn default_nu(n: usize, dt: f64) -> f64 {
        let k_max = n as f64 / 3.0;
        2.0 / (k_max.powi(4) * dt)
    }

    pub fn effective_nu(&self) -> f64 {
        self.nu.unwrap_or_else(|| Self::default_nu(self.n, self.dt))
    }

    pub fn effective_peak_k(&self) -> usize {
        self.init_peak_k.unwrap_or((self.n / 8).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::Spec(format!("grid size {} must be a power of two ≥ 8", self.n)));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.dt) {
            return Err(Error::Spec(format!("dt {} must be positive", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Spec(format!("t_end {} must be ≥ 0", self.t_end)));
        }
        if !positive(self.snapshot_interval) {
            return Err(Error::Spec(format!(
                "snapshot interval {} must be positive",
                self.snapshot_interval
            )));
        }
        if let Some(nu) = self.nu {
            if !(nu.is_finite() && nu >= 0.0) {
                return Err(Error::Spec(format!("nu {nu} must be ≥ 0")));
            }
        }
        let k0 = self.effective_peak_k();
        if k0 == 0 || 3 * (k0 + 2) > self.n {
            return Err(Error::Spec(format!(
                "initial peak wavenumber {k0} must lie in 1..={} for n = {}",
                (self.n / 3).saturating_sub(2),
                self.n
            )));
        }
        if !(self.init_amplitude.is_finite() && self.init_amplitude >= 0.0) {
            return Err(Error::Spec(format!("init amplitude {} must be ≥ 0", self.init_amplitude)));
        }
        Ok(())
    }
}

/// Integrator state.
#[derive(Clone, Debug)]
pub struct Simulation {
    n: usize,
    nu: f64,
    dt_max: f64,
    fft: Fft2,
    zeta_hat: HalfSpectrum,
    time: f64,
    steps: usize,
    advection: bool,
    /// Per stored mode: `(k_x, k_y, |k|², kept by the dealiasing mask)`.
    modes: Vec<(f64, f64, f64, bool)>,
}

impl Simulation {
    /// Random-phase initial condition from `config`.
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let mut sim = Simulation::empty(config.n, config.effective_nu(), config.dt);
        let k0 = config.effective_peak_k() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut spec = sim.fft.zero_spectrum();
        for (v, &(_, _, k2, kept)) in spec.as_mut_slice().iter_mut().zip(&sim.modes) {
            let k = k2.sqrt();
            if kept && k >= k0 - 2.0 && k <= k0 + 2.0 && k2 > 0.0 {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                *v = Complex64::from_polar(1.0, phase);
            }
        }
        // Round trip through physical space to make the spectrum exactly
        // that of a real field.
        let mut field = sim.fft.inverse(&spec);
        let rms = (field.sum_sq() / field.len() as f64).sqrt();
        if rms > 0.0 {
            field.scale(config.init_amplitude / rms);
        }
        sim.set_vorticity(&field)?;
        Ok(sim)
    }

    /// Starts from a given vorticity field.
    pub fn from_field(field: &Field, nu: f64, dt_max: f64) -> Result<Self> {
        if field.rows() != field.cols() {
            return Err(Error::Shape(format!("simulator needs a square grid, got {:?}", field.shape())));
        }
        if !(dt_max.is_finite() && dt_max > 0.0) || !(nu.is_finite() && nu >= 0.0) {
            return Err(Error::Spec(format!("invalid dt {dt_max} or nu {nu}")));
        }
        let mut sim = Simulation::empty(field.rows(), nu, dt_max);
        sim.set_vorticity(field)?;
        if let Some(t) = field.time() {
            sim.time = t;
        }
        Ok(sim)
    }

    fn empty(n: usize, nu: f64, dt_max: f64) -> Self {
        let fft = Fft2::new(n, n);
        let zeta_hat = fft.zero_spectrum();
        let half = zeta_hat.half_cols();
        let cutoff = n as f64 / 3.0;
        let mut modes = Vec::with_capacity(half * n);
        for kc in 0..half {
            for kr in 0..n {
                let kx = if 2 * kc == n { 0.0 } else { kc as f64 };
                let ky = if 2 * kr == n { 0.0 } else { signed_frequency(kr, n) as f64 };
                let raw_x = kc as f64;
                let raw_y = signed_frequency(kr, n) as f64;
                let kept = raw_x.abs() < cutoff && raw_y.abs() < cutoff && 2 * kc != n && 2 * kr != n;
                modes.push((kx, ky, raw_x * raw_x + raw_y * raw_y, kept));
            }
        }
        Simulation {
            n,
            nu,
            dt_max,
            fft,
            zeta_hat,
            time: 0.0,
            steps: 0,
            advection: true,
            modes,
        }
    }

    /// Replaces the state; the mean and the aliased modes are removed.
    pub fn set_vorticity(&mut self, field: &Field) -> Result<()> {
        if field.shape() != (self.n, self.n) {
            return Err(Error::Shape(format!(
                "field is {:?}, simulation is {n}x{n}",
                field.shape(),
                n = self.n
            )));
        }
        let mut spec = self.fft.forward(field);
        for (v, &(_, _, k2, kept)) in spec.as_mut_slice().iter_mut().zip(&self.modes) {
            if !kept || k2 == 0.0 {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self.zeta_hat = spec;
        Ok(())
    }

    /// Disables the advection term, leaving pure hyperviscous decay.
    pub fn set_advection(&mut self, on: bool) {
        self.advection = on;
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn spectrum(&self) -> &HalfSpectrum {
        &self.zeta_hat
    }

    pub fn vorticity(&self) -> Field {
        self.fft.inverse(&self.zeta_hat).with_time(Some(self.time))
    }

    /// Kinetic energy `½⟨|u|²⟩`.
    pub fn energy(&self) -> f64 {
        let norm = (self.n * self.n) as f64;
        0.5 * self.weighted_sum(|k2| if k2 > 0.0 { 1.0 / k2 } else { 0.0 }) / (norm * norm)
    }

    /// Enstrophy `½⟨ζ²⟩`.
    pub fn enstrophy(&self) -> f64 {
        let norm = (self.n * self.n) as f64;
        0.5 * self.weighted_sum(|_| 1.0) / (norm * norm)
    }

    fn weighted_sum(&self, w: impl Fn(f64) -> f64) -> f64 {
        let n = self.n;
        self.zeta_hat
            .as_slice()
            .iter()
            .zip(&self.modes)
            .enumerate()
            .map(|(i, (v, &(_, _, k2, _)))| {
                let kc = i / n;
                let fold = if kc == 0 || 2 * kc == n { 1.0 } else { 2.0 };
                fold * w(k2) * v.norm_sqr()
            })
            .sum()
    }

    /// Spectral advection tendency `−(u·∇ζ)^` and `max |u|`.
    fn tendency(&self, zeta: &HalfSpectrum) -> (HalfSpectrum, f64) {
        let mut out = self.fft.zero_spectrum();
        let mut u_hat = self.fft.zero_spectrum();
        let mut v_hat = self.fft.zero_spectrum();
        let mut zx_hat = self.fft.zero_spectrum();
        let mut zy_hat = self.fft.zero_spectrum();
        let i = Complex64::new(0.0, 1.0);
        for (idx, (z, &(kx, ky, k2, _))) in zeta.as_slice().iter().zip(&self.modes).enumerate() {
            if k2 == 0.0 {
                continue;
            }
            let psi = -z / k2;
            u_hat.as_mut_slice()[idx] = -i * ky * psi;
            v_hat.as_mut_slice()[idx] = i * kx * psi;
            zx_hat.as_mut_slice()[idx] = i * kx * z;
            zy_hat.as_mut_slice()[idx] = i * ky * z;
        }
        let u = self.fft.inverse(&u_hat);
        let v = self.fft.inverse(&v_hat);
        let speed = u
            .data()
            .iter()
            .zip(v.data())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0f64, f64::max);
        if !self.advection {
            return (out, speed);
        }
        let zx = self.fft.inverse(&zx_hat);
        let zy = self.fft.inverse(&zy_hat);
        let adv: Vec<f64> = (0..u.len())
            .map(|p| -(u.data()[p] * zx.data()[p] + v.data()[p] * zy.data()[p]))
            .collect();
        out = self.fft.forward_slice(&adv);
        for (val, &(_, _, _, kept)) in out.as_mut_slice().iter_mut().zip(&self.modes) {
            if !kept {
                *val = Complex64::new(0.0, 0.0);
            }
        }
        (out, speed)
    }

    /// Largest step allowed by `dt_max` and the CFL bound `0.5·Δx/max|u|`.
    fn step_limit(&self, speed: f64) -> f64 {
        let dx = std::f64::consts::TAU / self.n as f64;
        if speed > 0.0 {
            self.dt_max.min(0.5 * dx / speed)
        } else {
            self.dt_max
        }
    }

    /// One IF-RK4 step of length at most `max_h`; returns the step taken.
    pub fn step(&mut self, max_h: f64) -> Result<f64> {
        let (a, speed) = self.tendency(&self.zeta_hat);
        let h = self.step_limit(speed).min(max_h);
        let half: Vec<f64> = self
            .modes
            .iter()
            .map(|&(_, _, k2, _)| (-self.nu * k2 * k2 * h / 2.0).exp())
            .collect();
        let z0 = self.zeta_hat.as_slice();

        let combine = |f: &dyn Fn(usize) -> Complex64| -> HalfSpectrum {
            let mut s = self.fft.zero_spectrum();
            for (idx, v) in s.as_mut_slice().iter_mut().enumerate() {
                *v = f(idx);
            }
            s
        };

        let s1 = combine(&|p| half[p] * (z0[p] + a.as_slice()[p] * (h / 2.0)));
        let (b, _) = self.tendency(&s1);
        let s2 = combine(&|p| half[p] * z0[p] + b.as_slice()[p] * (h / 2.0));
        let (c, _) = self.tendency(&s2);
        let s3 = combine(&|p| half[p] * half[p] * z0[p] + half[p] * c.as_slice()[p] * h);
        let (d, _) = self.tendency(&s3);
        let next = combine(&|p| {
            let e = half[p];
            e * e * z0[p]
                + (e * e * a.as_slice()[p]
                    + e * (b.as_slice()[p] + c.as_slice()[p]) * 2.0
                    + d.as_slice()[p])
                    * (h / 6.0)
        });

        self.steps += 1;
        if next.as_slice().iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Instability {
                step: self.steps,
                time: self.time,
            });
        }
        self.zeta_hat = next;
        self.time += h;
        Ok(h)
    }

    /// Steps until `time == target` exactly.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.time < target {
            let remaining = target - self.time;
            let h = self.step(remaining)?;
            if h >= remaining {
                self.time = target;
            }
        }
        Ok(())
    }
}

/// Runs `config` and hands each snapshot (at `k·interval ≤ t_end`, `k ≥ 1`)
/// to `sink` as soon as it is produced.
pub fn simulate_with(config: &SimConfig, mut sink: impl FnMut(Field) -> Result<()>) -> Result<()> {
    let mut sim = Simulation::new(config)?;
    let mut k = 1usize;
    loop {
        let t = k as f64 * config.snapshot_interval;
        if t > config.t_end * (1.0 + 1e-12) {
            break;
        }
        sim.advance_to(t)?;
        sink(sim.vorticity())?;
        k += 1;
    }
    Ok(())
}

/// Runs `config` and collects its snapshots.
pub fn simulate(config: &SimConfig) -> Result<Vec<Field>> {
    let mut out = Vec::new();
    simulate_with(config, |f| {
        out.push(f);
        Ok(())
    })?;
    Ok(out)
}
