//! Run configuration: a flat key = value text format with `[section]`
//! headers, full-line or trailing `#` comments, and line-level
//! diagnostics.  Unknown sections and keys are errors, so typos cannot
//! silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nlmg_core::assembly::Scaling;
use nlmg_core::femspace::DatumSpec;
use nlmg_core::mesh::{Mesh, RegionRule};
use nlmg_core::oracle::BruteForceConfig;
use nlmg_core::quadrature::QuadratureConfig;

use crate::CliError;

#[derive(Debug, Clone)]
pub enum Problem {
    Annulus { r_in: f64, r_out: f64, big_r: f64, h: f64 },
    Interval { a: f64, b: f64, big_r: f64, n: usize },
    Imported { path: PathBuf },
}

impl Problem {
    /// Short token used in artifact file names.
    pub fn token(&self) -> String {
        match self {
            Problem::Annulus { .. } => "annulus".into(),
            Problem::Interval { .. } => "interval".into(),
            Problem::Imported { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "imported".into()),
        }
    }

    pub fn build_mesh(&self, datum_support: f64) -> Result<Arc<Mesh>, CliError> {
        let mesh = match *self {
            Problem::Annulus { r_in, r_out, big_r, h } => Mesh::annulus(r_in, r_out, big_r, h),
            Problem::Interval { a, b, big_r, n } => Mesh::interval(a, b, big_r, n),
            Problem::Imported { ref path } => Mesh::import(path, RegionRule::FromFile),
        }
        .map_err(|e| CliError::config(format!("cannot build mesh: {e}")))?;
        if datum_support > mesh.radius() + 1e-12 {
            return Err(CliError::config(format!(
                "datum support radius {} exceeds mesh ball radius {}",
                datum_support,
                mesh.radius()
            )));
        }
        Ok(Arc::new(mesh))
    }

    /// Nominal mesh width used in file names; the built mesh may differ
    /// slightly (annulus rounds ring counts).
    pub fn nominal_h(&self) -> Option<f64> {
        match *self {
            Problem::Annulus { h, .. } => Some(h),
            Problem::Interval { a, b, n, .. } => Some((b - a) / n as f64),
            Problem::Imported { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatumChoice {
    Constant,
    Bands,
    Zero,
}

#[derive(Debug, Clone)]
pub struct SolverCfg {
    pub tau: f64,
    /// Metric order of the flow; `None` means "use s".
    pub alpha: Option<f64>,
    pub tol: f64,
    /// `None` defers to the per-solver default (50 Newton, 200 flow).
    pub max_iters: Option<usize>,
    pub relative: bool,
    pub store_iterates: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Formats {
    pub csv: bool,
    pub vtk: bool,
}

/// Fully validated effective configuration.
pub struct RunConfig {
    pub problem: Problem,
    pub s: f64,
    pub scaling: Scaling,
    pub datum: DatumSpec,
    datum_choice: DatumChoice,
    datum_value: f64,
    datum_support: f64,
    datum_bands: Vec<(f64, f64, f64)>,
    pub solver: SolverCfg,
    /// Quadrature overrides; resolved against the mesh dimension later.
    quad_overrides: BTreeMap<String, f64>,
    pub deterministic: bool,
    pub oracle: BruteForceConfig,
    pub outdir: PathBuf,
    pub formats: Formats,
}

impl RunConfig {
    /// Quadrature configuration for dimension `d`: per-dimension defaults
    /// with any explicit overrides applied on top.
    pub fn quadrature(&self, d: usize) -> QuadratureConfig {
        let mut q = QuadratureConfig::for_dim(d);
        for (k, &v) in &self.quad_overrides {
            match k.as_str() {
                "n_sing" => q.n_sing = v as usize,
                "n_reg" => q.n_reg = v as usize,
                "n_theta" => q.n_theta = v as usize,
                "n_rad" => q.n_rad = v as usize,
                _ => unreachable!("validated key"),
            }
        }
        q.deterministic = self.deterministic;
        q
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>, CliError> {
        self.problem.build_mesh(self.datum.support_radius())
    }

    /// Canonical echo of the effective configuration with every default
    /// resolved.  Byte-identical across repeat runs of the same file.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[problem]");
        match self.problem {
            Problem::Annulus { r_in, r_out, big_r, h } => {
                let _ = writeln!(out, "kind = annulus");
                let _ = writeln!(out, "r_in = {r_in}");
                let _ = writeln!(out, "r_out = {r_out}");
                let _ = writeln!(out, "big_r = {big_r}");
                let _ = writeln!(out, "h = {h}");
            }
            Problem::Interval { a, b, big_r, n } => {
                let _ = writeln!(out, "kind = interval");
                let _ = writeln!(out, "a = {a}");
                let _ = writeln!(out, "b = {b}");
                let _ = writeln!(out, "big_r = {big_r}");
                let _ = writeln!(out, "n = {n}");
            }
            Problem::Imported { ref path } => {
                let _ = writeln!(out, "kind = imported");
                let _ = writeln!(out, "mesh_file = {}", path.display());
            }
        }
        let _ = writeln!(out, "\n[model]");
        let _ = writeln!(out, "s = {}", self.s);
        let _ = writeln!(
            out,
            "scaling = {}",
            if self.scaling == Scaling::CdsScaled { "cds" } else { "raw" }
        );
        let _ = writeln!(out, "\n[datum]");
        match self.datum_choice {
            DatumChoice::Constant => {
                let _ = writeln!(out, "kind = constant");
                let _ = writeln!(out, "value = {}", self.datum_value);
                let _ = writeln!(out, "support = {}", self.datum_support);
            }
            DatumChoice::Zero => {
                let _ = writeln!(out, "kind = zero");
            }
            DatumChoice::Bands => {
                let _ = writeln!(out, "kind = bands");
                let bands: Vec<String> = self
                    .datum_bands
                    .iter()
                    .map(|(lo, hi, v)| format!("{lo}:{hi}:{v}"))
                    .collect();
                let _ = writeln!(out, "bands = {}", bands.join(", "));
            }
        }
        let _ = writeln!(out, "\n[solver]");
        let _ = writeln!(out, "tau = {}", self.solver.tau);
        match self.solver.alpha {
            Some(a) => {
                let _ = writeln!(out, "alpha = {a}");
            }
            None => {
                let _ = writeln!(out, "alpha = {}  # defaulted to s", self.s);
            }
        }
        let _ = writeln!(out, "tol = {}", self.solver.tol);
        match self.solver.max_iters {
            Some(m) => {
                let _ = writeln!(out, "max_iters = {m}");
            }
            None => {
                let _ = writeln!(out, "max_iters = 50  # newton; 200 for flow");
            }
        }
        let _ = writeln!(out, "relative = {}", self.solver.relative);
        let _ = writeln!(out, "store_iterates = {}", self.solver.store_iterates);
        let _ = writeln!(out, "\n[quadrature]");
        let d = match self.problem {
            Problem::Interval { .. } => 1,
            _ => 2,
        };
        let q = self.quadrature(d);
        let _ = writeln!(out, "n_sing = {}", q.n_sing);
        let _ = writeln!(out, "n_reg = {}", q.n_reg);
        let _ = writeln!(out, "n_theta = {}", q.n_theta);
        let _ = writeln!(out, "n_rad = {}", q.n_rad);
        let _ = writeln!(out, "deterministic = {}", self.deterministic);
        let _ = writeln!(out, "\n[oracle]");
        let _ = writeln!(out, "grid_n = {}", self.oracle.grid_n);
        let _ = writeln!(out, "mc_samples = {}", self.oracle.mc_samples);
        let _ = writeln!(out, "truncation_height = {}", self.oracle.truncation_height);
        let _ = writeln!(out, "seed = {}", self.oracle.seed);
        let _ = writeln!(out, "\n[output]");
        let _ = writeln!(out, "dir = {}", self.outdir.display());
        let mut fmts = Vec::new();
        if self.formats.csv {
            fmts.push("csv");
        }
        if self.formats.vtk {
            fmts.push("vtk");
        }
        let _ = writeln!(out, "formats = {}", fmts.join(","));
        out
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Raw parse of a config file: (section, key) -> value with line numbers.
pub struct RawConfig {
    path: PathBuf,
    entries: BTreeMap<(String, String), Entry>,
}

const SECTIONS: &[&str] = &[
    "problem", "model", "datum", "solver", "quadrature", "oracle", "output",
];

impl RawConfig {
    pub fn parse(path: &Path) -> Result<RawConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("{}: cannot read config: {e}", path.display()))
        })?;
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let at = |msg: String| CliError::config(format!("{}:{line}: {msg}", path.display()));
            // strip a trailing comment; '#' inside a value must be escaped
            // by nothing because values never legitimately contain it
            let code = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let code = code.trim();
            if code.is_empty() {
                continue;
            }
            if let Some(name) = code.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| at("unterminated section header".into()))?
                    .trim()
                    .to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(at(format!(
                        "unknown section [{name}]; expected one of {}",
                        SECTIONS.join(", ")
                    )));
                }
                section = name;
                continue;
            }
            let (key, value) = code
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{code}`")))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(at("empty key".into()));
            }
            if section.is_empty() {
                return Err(at(format!("key `{key}` appears before any [section] header")));
            }
            let prev = entries.insert(
                (section.clone(), key.clone()),
                Entry { value: value.trim().to_string(), line, used: false },
            );
            if let Some(p) = prev {
                return Err(at(format!(
                    "duplicate key `{key}` in [{section}] (first set on line {})",
                    p.line
                )));
            }
        }
        Ok(RawConfig { path: path.to_path_buf(), entries })
    }

    /// In-memory defaults when no file is given.
    pub fn empty() -> RawConfig {
        RawConfig { path: PathBuf::from("<defaults>"), entries: BTreeMap::new() }
    }

    fn get(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries
            .get_mut(&(section.to_string(), key.to_string()))
            .map(|e| {
                e.used = true;
                (e.value.clone(), e.line)
            })
    }

    fn fail(&self, line: usize, msg: String) -> CliError {
        CliError::config(format!("{}:{line}: {msg}", self.path.display()))
    }

    fn f64_opt(&mut self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.fail(line, format!("`{key}` must be a number, got `{v}`"))),
        }
    }

    fn usize_opt(&mut self, section: &str, key: &str) -> Result<Option<usize>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| self.fail(line, format!("`{key}` must be a nonnegative integer, got `{v}`"))),
        }
    }

    fn bool_opt(&mut self, section: &str, key: &str) -> Result<Option<bool>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(self.fail(line, format!("`{key}` must be true or false, got `{v}`"))),
            },
        }
    }

    /// Validates everything and resolves defaults.  The defaults describe
    /// the annulus benchmark: radii 1/2 and 1 inside a ball of radius 3/2,
    /// constant datum 0.4 on the inner disk, h = 2^-4.  The order `s` has
    /// no default; it must come from the file or the command line.
    pub fn resolve(mut self, s_override: Option<f64>) -> Result<RunConfig, CliError> {
        // [problem]
        let kind = self
            .get("problem", "kind")
            .map(|(v, l)| (v, l))
            .unwrap_or(("annulus".into(), 0));
        let problem = match kind.0.as_str() {
            "annulus" => {
                let r_in = self.f64_opt("problem", "r_in")?.unwrap_or(0.5);
                let r_out = self.f64_opt("problem", "r_out")?.unwrap_or(1.0);
                let big_r = self.f64_opt("problem", "big_r")?.unwrap_or(1.5);
                let h = self.f64_opt("problem", "h")?.unwrap_or(0.0625);
                if !(0.0 < r_in && r_in < r_out && r_out < big_r) {
                    return Err(CliError::config(format!(
                        "annulus needs 0 < r_in < r_out < big_r, got {r_in}, {r_out}, {big_r}"
                    )));
                }
                if !(h > 0.0 && h <= r_in) {
                    return Err(CliError::config(format!(
                        "annulus mesh width h = {h} must lie in (0, r_in]"
                    )));
                }
                Problem::Annulus { r_in, r_out, big_r, h }
            }
            "interval" => {
                let a = self.f64_opt("problem", "a")?.unwrap_or(-1.0);
                let b = self.f64_opt("problem", "b")?.unwrap_or(1.0);
                let big_r = self.f64_opt("problem", "big_r")?.unwrap_or(2.0);
                let n = self.usize_opt("problem", "n")?.unwrap_or(16);
                if !(-big_r < a && a < b && b < big_r) {
                    return Err(CliError::config(format!(
                        "interval needs -big_r < a < b < big_r, got {a}, {b}, {big_r}"
                    )));
                }
                if n < 2 {
                    return Err(CliError::config("interval needs n >= 2".into()));
                }
                Problem::Interval { a, b, big_r, n }
            }
            "imported" => {
                let (file, line) = self.get("problem", "mesh_file").ok_or_else(|| {
                    CliError::config("problem kind `imported` requires key `mesh_file` in [problem]".into())
                })?;
                if file.is_empty() {
                    return Err(self.fail(line, "`mesh_file` must not be empty".into()));
                }
                Problem::Imported { path: PathBuf::from(file) }
            }
            other => {
                return Err(self.fail(
                    kind.1,
                    format!("unknown problem kind `{other}`; expected annulus, interval or imported"),
                ));
            }
        };

        // [model]; a command-line -s wins over the file
        let (s, s_line) = match (s_override, self.get("model", "s")) {
            (Some(s), _) => (s, 0),
            (None, Some((v, line))) => {
                let s = v
                    .parse::<f64>()
                    .map_err(|_| self.fail(line, format!("`s` must be a number, got `{v}`")))?;
                (s, line)
            }
            (None, None) => {
                return Err(CliError::config(format!(
                    "{}: missing key `s` in section [model]",
                    self.path.display()
                )));
            }
        };
        if !(s > 0.0 && s < 0.5) {
            let msg = format!("s = {s} outside the admissible range (0, 1/2)");
            return Err(if s_line > 0 { self.fail(s_line, msg) } else { CliError::config(msg) });
        }
        let scaling = match self.get("model", "scaling") {
            None => Scaling::Unscaled,
            Some((v, line)) => match v.as_str() {
                "raw" => Scaling::Unscaled,
                "cds" => Scaling::CdsScaled,
                _ => {
                    return Err(self.fail(line, format!("`scaling` must be raw or cds, got `{v}`")));
                }
            },
        };

        // [datum]
        let default_support = match problem {
            Problem::Annulus { r_in, .. } => r_in,
            _ => 0.5,
        };
        let datum_kind = self
            .get("datum", "kind")
            .map(|(v, l)| (v, l))
            .unwrap_or(("constant".into(), 0));
        let mut datum_value = 0.4;
        let mut datum_support = default_support;
        let mut datum_bands: Vec<(f64, f64, f64)> = Vec::new();
        let (datum, datum_choice) = match datum_kind.0.as_str() {
            "constant" => {
                datum_value = self.f64_opt("datum", "value")?.unwrap_or(0.4);
                datum_support = self.f64_opt("datum", "support")?.unwrap_or(default_support);
                let d = DatumSpec::constant(datum_value, datum_support)
                    .map_err(|e| CliError::config(format!("invalid datum: {e}")))?;
                (d, DatumChoice::Constant)
            }
            "zero" => (DatumSpec::zero(), DatumChoice::Zero),
            "bands" => {
                let (spec, line) = self.get("datum", "bands").ok_or_else(|| {
                    CliError::config("datum kind `bands` requires key `bands` in [datum]".into())
                })?;
                for part in spec.split(',') {
                    let fields: Vec<&str> = part.trim().split(':').collect();
                    if fields.len() != 3 {
                        return Err(self.fail(
                            line,
                            format!("band `{}` must look like lo:hi:value", part.trim()),
                        ));
                    }
                    let nums: Result<Vec<f64>, _> =
                        fields.iter().map(|f| f.trim().parse::<f64>()).collect();
                    let nums = nums.map_err(|_| {
                        self.fail(line, format!("band `{}` has a non-numeric field", part.trim()))
                    })?;
                    datum_bands.push((nums[0], nums[1], nums[2]));
                }
                let d = DatumSpec::bands(datum_bands.clone())
                    .map_err(|e| self.fail(line, format!("invalid bands: {e}")))?;
                (d, DatumChoice::Bands)
            }
            other => {
                return Err(self.fail(
                    datum_kind.1,
                    format!("unknown datum kind `{other}`; expected constant, bands or zero"),
                ));
            }
        };

        // [solver]
        let solver = SolverCfg {
            tau: self.f64_opt("solver", "tau")?.unwrap_or(1.0),
            alpha: self.f64_opt("solver", "alpha")?,
            tol: self.f64_opt("solver", "tol")?.unwrap_or(1e-8),
            max_iters: self.usize_opt("solver", "max_iters")?,
            relative: self.bool_opt("solver", "relative")?.unwrap_or(false),
            store_iterates: self.bool_opt("solver", "store_iterates")?.unwrap_or(false),
        };
        if !(solver.tau > 0.0) {
            return Err(CliError::config(format!("tau = {} must be positive", solver.tau)));
        }
        if !(solver.tol > 0.0) {
            return Err(CliError::config(format!("tol = {} must be positive", solver.tol)));
        }
        if let Some(a) = solver.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::config(format!("alpha = {a} must lie in (0, 1)")));
            }
        }

        // [quadrature]
        let mut quad_overrides = BTreeMap::new();
        for key in ["n_sing", "n_reg", "n_theta", "n_rad"] {
            if let Some(v) = self.usize_opt("quadrature", key)? {
                if v < 1 {
                    return Err(CliError::config(format!("quadrature `{key}` must be >= 1")));
                }
                quad_overrides.insert(key.to_string(), v as f64);
            }
        }
        let deterministic =
            self.bool_opt("quadrature", "deterministic")?.unwrap_or(false) || crate::force_deterministic();

        // [oracle]
        let mut oracle = BruteForceConfig::default();
        if let Some(v) = self.usize_opt("oracle", "grid_n")? {
            oracle.grid_n = v;
        }
        if let Some(v) = self.usize_opt("oracle", "mc_samples")? {
            oracle.mc_samples = v;
        }
        if let Some(v) = self.f64_opt("oracle", "truncation_height")? {
            oracle.truncation_height = v;
        }
        if let Some(v) = self.usize_opt("oracle", "seed")? {
            oracle.seed = v as u64;
        }

        // [output]
        let outdir = self
            .get("output", "dir")
            .map(|(v, _)| PathBuf::from(v))
            .unwrap_or_else(|| PathBuf::from("."));
        let formats = match self.get("output", "formats") {
            None => Formats { csv: true, vtk: true },
            Some((v, line)) => {
                let mut f = Formats { csv: false, vtk: false };
                for part in v.split(',') {
                    match part.trim() {
                        "csv" => f.csv = true,
                        "vtk" => f.vtk = true,
                        other => {
                            return Err(
                                self.fail(line, format!("unknown output format `{other}`"))
                            );
                        }
                    }
                }
                if !f.csv && !f.vtk {
                    return Err(self.fail(line, "formats must name csv and/or vtk".into()));
                }
                f
            }
        };

        // reject anything we did not consume
        for ((section, key), e) in &self.entries {
            if !e.used {
                return Err(CliError::config(format!(
                    "{}:{}: unknown key `{key}` in section [{section}]",
                    self.path.display(),
                    e.line
                )));
            }
        }

        Ok(RunConfig {
            problem,
            s,
            scaling,
            datum,
            datum_choice,
            datum_value,
            datum_support,
            datum_bands,
            solver,
            quad_overrides,
            deterministic,
            oracle,
            outdir,
            formats,
        })
    }
}

/// Parses and resolves `path`, or produces the built-in defaults.
pub fn load(path: Option<&Path>, s_override: Option<f64>) -> Result<RunConfig, CliError> {
    let raw = match path {
        Some(p) => RawConfig::parse(p)?,
        None => RawConfig::empty(),
    };
    raw.resolve(s_override)
}
