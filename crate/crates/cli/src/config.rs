//! Flat run configuration: a `key = value` file (or JSON) overlaid by flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use vortex_census::census::{Amplitude, BackfitMethod, CensusConfig, Selection};
use vortex_census::modwt::FilterKind;
use vortex_census::solver::{NoiseRidge, Ridge};
use vortex_census::template::TemplateSpec;
use vortex_census::turbsim::SimConfig;

use crate::failure::{Failure, Outcome};

/// A number or a keyword such as `auto`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    Keyword(Keyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Auto,
    Off,
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Setting::Keyword(Keyword::Auto)),
            "off" => Ok(Setting::Keyword(Keyword::Off)),
            other => other
                .parse()
                .map(Setting::Value)
                .map_err(|_| format!("expected a number, 'auto' or 'off', got '{s}'")),
        }
    }
}

/// Every configurable key. Absent keys take library defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vortices: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Setting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_ridge: Option<Setting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_candidates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalesce_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backfit: Option<BackfitMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backfit_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<Setting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_peak_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_amplitude: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filament: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
}

impl RunConfig {
    /// Reads a JSON object (`.json` or text starting with `{`) or
    /// `key = value` lines.
    pub fn load(path: &Path) -> Outcome<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{') {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            Self::parse_lines(&text)
        };
        parsed.map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }

    /// `key = value` per line; `#` starts a comment line. Values are TOML
    /// literals, and anything that is not one is taken as a bare string.
    pub fn parse_lines(text: &str) -> Result<Self, String> {
        let mut table = toml::Table::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            if table.insert(key.clone(), parsed).is_some() {
                return Err(format!("line {}: duplicate key '{key}'", i + 1));
            }
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| e.message().to_string())
    }

    /// Keys set in `top` replace those in `self`.
    pub fn overlay(&self, top: &RunConfig) -> Outcome<RunConfig> {
        let mut base = to_map(self)?;
        base.extend(to_map(top)?);
        Ok(serde_json::from_value(Value::Object(base))?)
    }

    pub fn census(&self) -> Outcome<CensusConfig> {
        let d = CensusConfig::default();
        let amplitude = match self.eta {
            None | Some(Setting::Keyword(Keyword::Auto)) => d.amplitude,
            Some(Setting::Value(v)) => Amplitude::Fixed(v),
            Some(Setting::Keyword(Keyword::Off)) => return Err(Failure::usage("eta cannot be 'off'")),
        };
        let noise = match self.noise_ridge {
            None => d.ridge.noise,
            Some(Setting::Keyword(Keyword::Auto)) => NoiseRidge::Auto,
            Some(Setting::Keyword(Keyword::Off)) => NoiseRidge::Off,
            Some(Setting::Value(v)) => NoiseRidge::Fixed(v),
        };
        let template = TemplateSpec {
            eta: match amplitude {
                Amplitude::Fixed(v) => v,
                Amplitude::Auto => d.template.eta,
            },
            sigma2: self.sigma2.unwrap_or(d.template.sigma2),
            patch: self.patch.unwrap_or(d.template.patch),
            filter: self.filter.unwrap_or(d.template.filter),
            levels: self.levels.unwrap_or(d.template.levels),
        };
        let cfg = CensusConfig {
            template,
            amplitude,
            ridge: Ridge {
                relative: self.ridge.unwrap_or(d.ridge.relative),
                noise,
            },
            max_candidates: self.max_candidates.unwrap_or(d.max_candidates),
            coalesce_radius: self.coalesce_radius.unwrap_or(d.coalesce_radius),
            patience: self.patience.unwrap_or(d.patience),
            selection: self.selection.unwrap_or(d.selection),
            grid_spacing: self.grid_spacing.unwrap_or(d.grid_spacing),
            backfit: self.backfit.unwrap_or(d.backfit),
            backfit_tolerance: self.backfit_tolerance.unwrap_or(d.backfit_tolerance),
            max_sweeps: self.max_sweeps.unwrap_or(d.max_sweeps),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes every effective census value back as explicit keys.
    pub fn record_census(&mut self, cfg: &CensusConfig) {
        let t = &cfg.template;
        self.eta = Some(match cfg.amplitude {
            Amplitude::Auto => Setting::Keyword(Keyword::Auto),
            Amplitude::Fixed(v) => Setting::Value(v),
        });
        self.sigma2 = Some(t.sigma2);
        self.patch = Some(t.patch);
        self.filter = Some(t.filter);
        self.levels = Some(t.levels);
        self.ridge = Some(cfg.ridge.relative);
        self.noise_ridge = Some(match cfg.ridge.noise {
            NoiseRidge::Auto => Setting::Keyword(Keyword::Auto),
            NoiseRidge::Off => Setting::Keyword(Keyword::Off),
            NoiseRidge::Fixed(v) => Setting::Value(v),
        });
        self.max_candidates = Some(cfg.max_candidates);
        self.coalesce_radius = Some(cfg.coalesce_radius);
        self.patience = Some(cfg.patience);
        self.selection = Some(cfg.selection);
        self.grid_spacing = Some(cfg.grid_spacing);
        self.backfit = Some(cfg.backfit);
        self.backfit_tolerance = Some(cfg.backfit_tolerance);
        self.max_sweeps = Some(cfg.max_sweeps);
    }

    /// Template keys only, for commands that need just the MRA.
    pub fn mra_settings(&self) -> (FilterKind, usize) {
        let d = TemplateSpec::default();
        (self.filter.unwrap_or(d.filter), self.levels.unwrap_or(d.levels))
    }

    pub fn simulation(&self) -> Outcome<SimConfig> {
        let d = SimConfig::default();
        let nu = match self.nu {
            None | Some(Setting::Keyword(Keyword::Auto)) => None,
            Some(Setting::Value(v)) => Some(v),
            Some(Setting::Keyword(Keyword::Off)) => Some(0.0),
        };
        let cfg = SimConfig {
            n: self.n.unwrap_or(d.n),
            nu,
            dt: self.dt.unwrap_or(d.dt),
            t_end: self.t_end.unwrap_or(d.t_end),
            snapshot_interval: self.snapshot_interval.unwrap_or(d.snapshot_interval),
            seed: self.seed.unwrap_or(d.seed),
            init_peak_k: self.init_peak_k.or(d.init_peak_k),
            init_amplitude: self.init_amplitude.unwrap_or(d.init_amplitude),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn record_simulation(&mut self, cfg: &SimConfig) {
        self.n = Some(cfg.n);
        self.nu = Some(Setting::Value(cfg.effective_nu()));
        self.dt = Some(cfg.dt);
        self.t_end = Some(cfg.t_end);
        self.snapshot_interval = Some(cfg.snapshot_interval);
        self.seed = Some(cfg.seed);
        self.init_peak_k = Some(cfg.effective_peak_k());
        self.init_amplitude = Some(cfg.init_amplitude);
    }

    /// Output directory, created if missing.
    pub fn out_dir(&self) -> Outcome<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)
            .map_err(|e| Failure::data(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(dir)
    }

    pub fn require_input(&self) -> Outcome<&Path> {
        self.input.as_deref().ok_or_else(|| Failure::usage("missing --input"))
    }
}

fn to_map(cfg: &RunConfig) -> Outcome<Map<String, Value>> {
    match serde_json::to_value(cfg)? {
        Value::Object(m) => Ok(m),
        _ => unreachable!("RunConfig serialises to an object"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_lines_with_bare_strings() {
        let cfg = RunConfig::parse_lines(
            "# template\nsigma2 = 9\nfilter = la8\nselection = \"greedy\"\neta = auto\nout = runs/a\nmax-candidates = 100\n",
        )
        .unwrap();
        assert_eq!(cfg.sigma2, Some(9.0));
        assert_eq!(cfg.filter, Some(FilterKind::La8));
        assert_eq!(cfg.selection, Some(Selection::Greedy));
        assert_eq!(cfg.eta, Some(Setting::Keyword(Keyword::Auto)));
        assert_eq!(cfg.out, Some(PathBuf::from("runs/a")));
        assert_eq!(cfg.max_candidates, Some(100));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse_lines("sigma = 3\n").unwrap_err();
        assert!(err.contains("sigma"), "{err}");
    }

    #[test]
    fn malformed_line_rejected() {
        assert!(RunConfig::parse_lines("levels 4\n").is_err());
        assert!(RunConfig::parse_lines("levels = 4\nlevels = 5\n").is_err());
    }

    #[test]
    fn overlay_prefers_top() {
        let base = RunConfig::parse_lines("levels = 4\nsigma2 = 16\n").unwrap();
        let top = RunConfig {
            levels: Some(3),
            ..Default::default()
        };
        let merged = base.overlay(&top).unwrap();
        assert_eq!(merged.levels, Some(3));
        assert_eq!(merged.sigma2, Some(16.0));
    }

    #[test]
    fn recorded_census_reloads_identically() {
        let mut cfg = RunConfig::parse_lines("levels = 4\nnoise_ridge = off\neta = 2.5\n").unwrap();
        let census = cfg.census().unwrap();
        cfg.record_census(&census);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.census().unwrap(), census);
    }

    #[test]
    fn invalid_census_value_is_usage_error() {
        let cfg = RunConfig::parse_lines("patch = 32\n").unwrap();
        assert!(matches!(cfg.census(), Err(Failure::Usage(_))));
    }
}
