//! Scenario configuration.
//!
//! Configs are flat text documents with one dotted key per line,
//!
//! ```text
//!     # comment
//!     model.gamma = 2.0
//!     grid.kind = periodic
//! ```
//!
//! chosen over nested formats for diff-friendliness.  The same map is
//! embedded verbatim in every run's JSON sidecar under `"config"`, with all
//! defaults resolved, so a sidecar re-ingested as a config reproduces the
//! run; `load_keys` accepts both forms and tells them apart by the leading
//! `{`.
//!
//! Every key is either consumed by the typed extraction or rejected by name,
//! so misspellings cannot silently fall back to defaults.

use std::collections::BTreeMap;

use ottolab::model::{ModelParams, PotentialSign, Speed};
use ottolab::solver::Scheme;
use ottolab::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKindSpec {
    Periodic,
    Radial,
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub kind: GridKindSpec,
    pub points: usize,
    pub length: f64,
    pub ambient_dim: u32,
}

#[derive(Debug, Clone)]
pub enum WeightSpec {
    Zero,
    Cosine { amplitude: f64, mode: u32 },
    Quadratic { amplitude: f64 },
}

#[derive(Debug, Clone)]
pub enum InitSpec {
    /// Self-similar profile state at `time.delta`.
    Barenblatt,
    /// `rho0 = (1 + amplitude sin(mode x)) / mass`, potential matched to the
    /// gradient-flow start.
    UniformPerturbed { mode: u32, amplitude: f64 },
    /// Columns `x, rho, phi` from a CSV file.
    File { path: String },
}

#[derive(Debug, Clone)]
pub struct TimeSpec {
    pub delta: f64,
    pub t_end: f64,
    pub dt: f64,
    pub diagnostic_stride: usize,
}

#[derive(Debug, Clone)]
pub struct SolverSpec {
    pub scheme: Scheme,
    pub cfl: f64,
    pub density_floor: f64,
}

#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub path: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub weight: WeightSpec,
    pub init: InitSpec,
    pub time: TimeSpec,
    pub solver: SolverSpec,
    pub output: OutputSpec,
    /// Fully resolved key map, echoed into sidecars.
    echo: BTreeMap<String, String>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{key}: {msg}"))
}

/// Parse either a flat dotted-key document or a JSON sidecar (its `"config"`
/// object) into a key map.
pub fn load_keys(text: &str) -> Result<BTreeMap<String, String>> {
    if text.trim_start().starts_with('{') {
        let doc: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("sidecar JSON: {e}")))?;
        let cfg = doc
            .get("config")
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::Invalid("sidecar JSON lacks a \"config\" object".to_string()))?;
        let mut map = BTreeMap::new();
        for (k, v) in cfg {
            let s = v
                .as_str()
                .ok_or_else(|| bad(k, "sidecar config values must be strings"))?;
            map.insert(k.clone(), s.to_string());
        }
        return Ok(map);
    }
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Invalid(format!("line {}: expected `key = value`, got '{line}'", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Invalid(format!("line {}: empty key or value", lineno + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Invalid(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

/// Apply `key=value` override strings on top of a loaded map.
pub fn apply_overrides(map: &mut BTreeMap<String, String>, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("override '{item}' is not key=value")))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(())
}

/// Tracks which keys the typed extraction consumed, so leftovers can be
/// rejected by name.
struct Reader {
    map: BTreeMap<String, String>,
    seen: Vec<String>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.seen.push(key.to_string());
        }
        v
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| bad(key, "missing required key"))
    }

    fn or_default(&mut self, key: &str, default: &str) -> String {
        match self.take(key) {
            Some(v) => v,
            None => {
                // resolved defaults become part of the echo
                self.map.insert(key.to_string(), default.to_string());
                self.seen.push(key.to_string());
                default.to_string()
            }
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        let v = self.required(key)?;
        v.parse().map_err(|_| bad(key, format!("cannot parse '{v}' as a number")))
    }

    fn f64_or(&mut self, key: &str, default: &str) -> Result<f64> {
        let v = self.or_default(key, default);
        v.parse().map_err(|_| bad(key, format!("cannot parse '{v}' as a number")))
    }

    fn usize(&mut self, key: &str) -> Result<usize> {
        let v = self.required(key)?;
        v.parse().map_err(|_| bad(key, format!("cannot parse '{v}' as an integer")))
    }

    fn u32_or(&mut self, key: &str, default: &str) -> Result<u32> {
        let v = self.or_default(key, default);
        v.parse().map_err(|_| bad(key, format!("cannot parse '{v}' as an integer")))
    }

    fn reject_unknown(&self) -> Result<()> {
        for key in self.map.keys() {
            if !self.seen.iter().any(|s| s == key) {
                return Err(bad(key, "unknown key"));
            }
        }
        Ok(())
    }

    fn forbid(&self, key: &str, reason: &str) -> Result<()> {
        if self.map.contains_key(key) && !self.seen.iter().any(|s| s == key) {
            return Err(bad(key, reason));
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let mut r = Reader { map, seen: Vec::new() };

        let gamma = r.f64("model.gamma")?;
        let c = Speed::parse(&r.required("model.c")?).map_err(|e| bad("model.c", e))?;
        let sign = PotentialSign::parse(&r.or_default("model.potential_sign", "+1"))
            .map_err(|e| bad("model.potential_sign", e))?;

        let kind = match r.required("grid.kind")?.as_str() {
            "periodic" => GridKindSpec::Periodic,
            "radial" => GridKindSpec::Radial,
            other => return Err(bad("grid.kind", format!("expected periodic or radial, got '{other}'"))),
        };
        let points = r.usize("grid.points")?;
        let length = r.f64("grid.length")?;
        let ambient_dim = match kind {
            GridKindSpec::Radial => r.u32_or("grid.ambient_dim", "1")?,
            GridKindSpec::Periodic => {
                r.forbid("grid.ambient_dim", "only applies to radial grids")?;
                1
            }
        };

        let m = r.f64_or("model.m", &format!("{}", ambient_dim))?;
        let n = r.f64_or("model.n", &format!("{}", ambient_dim))?;
        if (n - ambient_dim as f64).abs() > 1e-9 {
            return Err(bad(
                "model.n",
                "must equal the grid's ambient dimension (the curvature form needs them to agree)",
            ));
        }
        let params = ModelParams::new(gamma, m, n, c, sign).map_err(|e| bad("model", e))?;

        let weight = match r.required("weight.preset")?.as_str() {
            "zero" => {
                r.forbid("weight.amplitude", "the flat weight takes no amplitude")?;
                r.forbid("weight.mode", "the flat weight takes no mode")?;
                WeightSpec::Zero
            }
            "cosine" => WeightSpec::Cosine {
                amplitude: r.f64("weight.amplitude")?,
                mode: r.u32_or("weight.mode", "1")?,
            },
            "quadratic" => {
                r.forbid("weight.mode", "the quadratic weight takes no mode")?;
                WeightSpec::Quadratic { amplitude: r.f64("weight.amplitude")? }
            }
            other => return Err(bad("weight.preset", format!("unknown preset '{other}'"))),
        };

        let init = match r.required("init.preset")?.as_str() {
            "barenblatt" => InitSpec::Barenblatt,
            "uniform-perturbed" => InitSpec::UniformPerturbed {
                mode: r.u32_or("init.mode", "1")?,
                amplitude: r.f64("init.amplitude")?,
            },
            "file" => InitSpec::File { path: r.required("init.path")? },
            other => return Err(bad("init.preset", format!("unknown preset '{other}'"))),
        };

        let time = TimeSpec {
            delta: r.f64("time.delta")?,
            t_end: r.f64("time.t_end")?,
            dt: r.f64("time.dt")?,
            diagnostic_stride: r.usize("time.diagnostic_stride")?,
        };

        let scheme = Scheme::parse(&r.required("solver.scheme")?)
            .map_err(|e| bad("solver.scheme", e))?;
        let solver = SolverSpec {
            scheme,
            cfl: r.f64_or("solver.cfl", "0.9")?,
            density_floor: r.f64_or("solver.density_floor", "0")?,
        };

        let output = OutputSpec { path: r.required("output.path")? };
        match r.or_default("output.format", "csv").as_str() {
            "csv" => {}
            other => return Err(bad("output.format", format!("only csv is supported, got '{other}'"))),
        }

        r.reject_unknown()?;
        let cfg = ScenarioConfig {
            params,
            grid: GridSpec { kind, points, length, ambient_dim },
            weight,
            init,
            time,
            solver,
            output,
            echo: r.map,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = load_keys(text)?;
        apply_overrides(&mut map, overrides)?;
        Self::from_map(map)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.time;
        if !(t.delta >= 0.0 && t.delta.is_finite()) {
            return Err(bad("time.delta", "must be nonnegative"));
        }
        if !(t.t_end > t.delta && t.t_end.is_finite()) {
            return Err(bad("time.t_end", "must exceed time.delta"));
        }
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(bad("time.dt", "must be positive"));
        }
        let steps_f = (t.t_end - t.delta) / t.dt;
        let steps = steps_f.round();
        if steps < 1.0 || (steps_f - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(bad("time.dt", "must divide t_end - delta into whole steps"));
        }
        if t.diagnostic_stride == 0 {
            return Err(bad("time.diagnostic_stride", "must be at least 1"));
        }
        if (steps as u64) % (t.diagnostic_stride as u64) != 0 {
            return Err(bad(
                "time.diagnostic_stride",
                "must divide the step count so diagnostic times stay uniform",
            ));
        }
        if !(self.solver.cfl > 0.0 && self.solver.cfl <= 1.0) {
            return Err(bad("solver.cfl", "must lie in (0, 1]"));
        }
        if !(self.solver.density_floor >= 0.0) {
            return Err(bad("solver.density_floor", "must be nonnegative"));
        }

        let periodic = self.grid.kind == GridKindSpec::Periodic;
        match self.solver.scheme {
            Scheme::SpectralRk4 if !periodic => {
                return Err(bad("solver.scheme", "spectral-rk4 runs on periodic grids"));
            }
            Scheme::CentralUpwind if periodic => {
                return Err(bad("solver.scheme", "central-upwind runs on radial grids"));
            }
            _ => {}
        }
        match (&self.init, periodic) {
            (InitSpec::Barenblatt, true) => {
                return Err(bad("init.preset", "the self-similar profile lives on radial grids"));
            }
            (InitSpec::UniformPerturbed { .. }, false) => {
                return Err(bad("init.preset", "uniform-perturbed data needs a periodic grid"));
            }
            _ => {}
        }
        if matches!(self.weight, WeightSpec::Quadratic { .. }) && periodic {
            return Err(bad("weight.preset", "the quadratic weight is not periodic"));
        }
        if self.params.c == Speed::Zero && self.params.potential_sign == PotentialSign::Negative {
            return Err(bad(
                "model.potential_sign",
                "the gradient-flow limit runs the forward diffusion only (sign +1)",
            ));
        }
        Ok(())
    }

    /// Resolved key map for the sidecar echo.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.echo
    }

    pub fn build_grid(&self) -> Result<ottolab::Grid> {
        match self.grid.kind {
            GridKindSpec::Periodic => ottolab::Grid::periodic(self.grid.points, self.grid.length),
            GridKindSpec::Radial => {
                ottolab::Grid::radial(self.grid.points, self.grid.length, self.grid.ambient_dim)
            }
        }
    }

    pub fn build_measure(&self, grid: &ottolab::Grid) -> Result<ottolab::WeightedMeasure> {
        match self.weight {
            WeightSpec::Zero => Ok(ottolab::WeightedMeasure::flat(grid)),
            WeightSpec::Cosine { amplitude, mode } => {
                ottolab::WeightedMeasure::cosine(grid, amplitude, mode)
            }
            WeightSpec::Quadratic { amplitude } => {
                ottolab::WeightedMeasure::quadratic(grid, amplitude)
            }
        }
    }

}
