//! Run configuration: flat `key = value` files with dotted prefixes.
//!
//! ```text
//! # comments start with '#'
//! dim = 2
//! mode = dynamic
//! grid.lengths = 1, 1
//! grid.cells = 8, 8
//! grid.periodic = true, false
//! material.nu_m = 1
//! initial.y = reference            # reference | shear:<g> | file:<dump>
//! initial.v = shear:0.2:0.05       # zero | shear:<rate>[:<bump>]
//! initial.P = identity
//! loads.dirichlet.x2_max = 1, 0
//! loads.dirichlet.x2_max.amplitude = 0:0, 1:0.2
//! time.T = 1
//! ```
//!
//! Missing keys take their defaults. Every problem in a file is reported, each
//! with its line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::constitutive::{validate_params, MaterialParams};
use crate::galerkin::assembly::{Mode, SolverSettings};
use crate::galerkin::loads::{Loads, TimeFunction, VectorLoad};
use crate::galerkin::space::{Grid, Side};

/// Initial deformation.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDeformation {
    Reference,
    /// `y = x + g·x2·e1`.
    Shear(f64),
    /// Restart from a field dump; also restores velocity, creep strain and run counters.
    File(PathBuf),
}

/// Initial velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialVelocity {
    Zero,
    /// `v = (rate·x2 + bump·sin(π x2 / L2))·e1`.
    Shear {
        rate: f64,
        bump: f64,
    },
}

/// Initial creep strain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCreep {
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt0: f64,
    pub dt_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Field dumps every this many accepted steps (the final state is always dumped).
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub mode: Mode,
    pub grid: Grid,
    pub material: MaterialParams,
    pub initial_y: InitialDeformation,
    pub initial_v: InitialVelocity,
    pub initial_p: InitialCreep,
    pub loads: Loads,
    pub time: TimeSpec,
    pub output: OutputSpec,
    pub solver: SolverSettings,
    pub quadrature_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            mode: Mode::Dynamic,
            grid: Grid {
                lengths: vec![1.0, 1.0],
                cells: vec![8, 8],
                periodic: vec![true, false],
            },
            material: MaterialParams::default(),
            initial_y: InitialDeformation::Reference,
            initial_v: InitialVelocity::Zero,
            initial_p: InitialCreep::Identity,
            loads: Loads::default(),
            time: TimeSpec {
                t_end: 1.0,
                dt0: 0.02,
                dt_max: 0.02,
            },
            output: OutputSpec {
                dir: PathBuf::from("out"),
                every: 10,
            },
            solver: SolverSettings::default(),
            quadrature_points: 4,
        }
    }
}

/// One problem in a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// 1-based line, or `None` for problems not tied to a line.
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<ParseError>),
}

fn list(errors: &[ParseError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    pub fn errors(&self) -> &[ParseError] {
        match self {
            ConfigError::Invalid(e) => e,
            ConfigError::Read { .. } => &[],
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ParseError>,
}

impl Reader {
    fn err(&mut self, line: Option<usize>, key: &str, message: impl Into<String>) {
        self.errors.push(ParseError {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn get<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> T {
        match self.take(key) {
            None => default,
            Some((line, v)) => match parse(&v) {
                Ok(x) => x,
                Err(m) => {
                    self.err(Some(line), key, m);
                    default
                }
            },
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.get(key, default, parse_f64)
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.get(key, default, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("expected a non-negative integer, got '{s}'"))
        })
    }

    /// Keys under `prefix.` that were not consumed yet.
    fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got '{s}'")),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(|p| item(p.trim())).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

/// `<a>` (constant) or `t:a, t:a, …` (piecewise linear).
pub fn parse_time_function(s: &str) -> Result<TimeFunction, String> {
    if !s.contains(':') {
        return parse_f64(s).map(TimeFunction::Constant);
    }
    let pts = parse_list(s, |p| {
        let (t, a) = p
            .split_once(':')
            .ok_or_else(|| format!("expected t:a, got '{p}'"))?;
        Ok((parse_f64(t.trim())?, parse_f64(a.trim())?))
    })?;
    let f = TimeFunction::PiecewiseLinear(pts);
    if f.is_well_formed() {
        Ok(f)
    } else {
        Err("breakpoint times must be strictly increasing".into())
    }
}

fn format_time_function(f: &TimeFunction) -> String {
    match f {
        TimeFunction::Constant(a) => num(*a),
        TimeFunction::PiecewiseLinear(pts) => pts
            .iter()
            .map(|(t, a)| format!("{}:{}", num(*t), num(*a)))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

fn parse_initial_y(s: &str) -> Result<InitialDeformation, String> {
    if s == "reference" {
        return Ok(InitialDeformation::Reference);
    }
    if let Some(g) = s.strip_prefix("shear:") {
        return parse_f64(g.trim()).map(InitialDeformation::Shear);
    }
    if let Some(p) = s.strip_prefix("file:") {
        if p.trim().is_empty() {
            return Err("file: needs a path".into());
        }
        return Ok(InitialDeformation::File(PathBuf::from(p.trim())));
    }
    Err(format!(
        "expected reference, shear:<g> or file:<path>, got '{s}'"
    ))
}

fn parse_initial_v(s: &str) -> Result<InitialVelocity, String> {
    if s == "zero" {
        return Ok(InitialVelocity::Zero);
    }
    if let Some(rest) = s.strip_prefix("shear:") {
        let mut parts = rest.split(':');
        let rate = parse_f64(parts.next().unwrap_or("").trim())?;
        let bump = match parts.next() {
            Some(b) => parse_f64(b.trim())?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err("expected shear:<rate>[:<bump>]".into());
        }
        return Ok(InitialVelocity::Shear { rate, bump });
    }
    Err(format!("expected zero or shear:<rate>[:<bump>], got '{s}'"))
}

const MATERIAL_KEYS: [&str; 11] = [
    "rho", "nu_m", "nu_h", "nu_kv", "mu", "eps_b", "r_el", "delta", "s_h", "eps_g", "p_g",
];

fn material_field<'a>(m: &'a mut MaterialParams, key: &str) -> &'a mut f64 {
    match key {
        "rho" => &mut m.rho,
        "nu_m" => &mut m.nu_m,
        "nu_h" => &mut m.nu_h,
        "nu_kv" => &mut m.nu_kv,
        "mu" => &mut m.mu,
        "eps_b" => &mut m.eps_b,
        "r_el" => &mut m.r_el,
        "delta" => &mut m.delta,
        "s_h" => &mut m.s_h,
        "eps_g" => &mut m.eps_g,
        "p_g" => &mut m.p_g,
        _ => unreachable!("unknown material key {key}"),
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut r = Reader {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            r.err(Some(line), content, "expected 'key = value'");
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            r.err(Some(line), "", "missing key");
            continue;
        }
        if let Some(prev) = r.entries.get(&k) {
            let msg = format!("duplicate key (first set on line {})", prev.line);
            r.err(Some(line), &k, msg);
            continue;
        }
        r.entries.insert(
            k,
            Entry {
                line,
                value: v,
                used: false,
            },
        );
    }

    let d = RunConfig::default();
    let dim = r.get("dim", 2, |s| match s {
        "2" => Ok(2),
        "3" => Ok(3),
        _ => Err(format!("dim must be 2 or 3, got '{s}'")),
    });
    let mode = r.get("mode", Mode::Dynamic, |s| match s {
        "dynamic" => Ok(Mode::Dynamic),
        "quasi_static" => Ok(Mode::QuasiStatic),
        _ => Err(format!("mode must be dynamic or quasi_static, got '{s}'")),
    });

    let default_grid = Grid {
        lengths: vec![1.0; dim],
        cells: vec![8; dim],
        periodic: (0..dim).map(|k| k == 0).collect(),
    };
    let grid = Grid {
        lengths: r.get("grid.lengths", default_grid.lengths.clone(), |s| {
            parse_list(s, parse_f64)
        }),
        cells: r.get("grid.cells", default_grid.cells.clone(), |s| {
            parse_list(s, |p| {
                p.parse::<usize>()
                    .map_err(|_| format!("bad cell count '{p}'"))
            })
        }),
        periodic: r.get("grid.periodic", default_grid.periodic.clone(), |s| {
            parse_list(s, parse_bool)
        }),
    };
    for (key, len) in [
        ("grid.lengths", grid.lengths.len()),
        ("grid.cells", grid.cells.len()),
        ("grid.periodic", grid.periodic.len()),
    ] {
        if len != dim {
            let line = r.line_of(key);
            r.err(line, key, format!("expected {dim} entries, got {len}"));
        }
    }
    for (k, &l) in grid.lengths.iter().enumerate() {
        if l <= 0.0 {
            let line = r.line_of("grid.lengths");
            r.err(
                line,
                "grid.lengths",
                format!("length {} must be positive", k + 1),
            );
        }
    }
    for (k, &c) in grid.cells.iter().enumerate() {
        let periodic = grid.periodic.get(k).copied().unwrap_or(false);
        let min = if periodic { 4 } else { 2 };
        if c < min {
            let line = r.line_of("grid.cells");
            r.err(
                line,
                "grid.cells",
                format!(
                    "direction {} needs at least {min} cells ({}), got {c}",
                    k + 1,
                    if periodic { "periodic" } else { "open" }
                ),
            );
        }
    }

    let mut material = MaterialParams::default();
    for key in MATERIAL_KEYS {
        let full = format!("material.{key}");
        let default = *material_field(&mut material, key);
        *material_field(&mut material, key) = r.f64(&full, default);
    }
    for v in validate_params(&material, dim) {
        let key = format!("material.{}", v.key);
        let line = r.line_of(&key);
        r.err(line, &key, v.message);
    }
    if mode == Mode::Dynamic && material.rho <= 0.0 {
        let line = r.line_of("material.rho");
        r.err(line, "material.rho", "rho must be positive in dynamic mode");
    }

    let initial_y = r.get("initial.y", InitialDeformation::Reference, parse_initial_y);
    let initial_v = r.get("initial.v", InitialVelocity::Zero, parse_initial_v);
    let initial_p = r.get("initial.P", InitialCreep::Identity, |s| match s {
        "identity" => Ok(InitialCreep::Identity),
        _ => Err(format!("only 'identity' is supported, got '{s}'")),
    });

    let loads = parse_loads(&mut r, dim, &grid);

    let time = TimeSpec {
        t_end: r.f64("time.T", d.time.t_end),
        dt0: r.f64("time.dt0", d.time.dt0),
        dt_max: f64::NAN,
    };
    let time = TimeSpec {
        dt_max: r.f64("time.dt_max", time.dt0),
        ..time
    };
    if time.t_end <= 0.0 {
        let line = r.line_of("time.T");
        r.err(line, "time.T", "T must be positive");
    }
    if time.dt0 <= 0.0 {
        let line = r.line_of("time.dt0");
        r.err(line, "time.dt0", "dt0 must be positive");
    }
    if time.dt_max < time.dt0 {
        let line = r.line_of("time.dt_max");
        r.err(line, "time.dt_max", "dt_max must be at least dt0");
    }

    let output = OutputSpec {
        dir: r.get("output.dir", d.output.dir.clone(), |s| Ok(PathBuf::from(s))),
        every: r.usize("output.every", d.output.every),
    };
    if output.every == 0 {
        let line = r.line_of("output.every");
        r.err(line, "output.every", "must be at least 1");
    }

    let solver = SolverSettings {
        tol: r.f64("solver.tol", d.solver.tol),
        max_iters: r.usize("solver.max_iters", d.solver.max_iters),
        max_halvings: r.usize("solver.max_halvings", d.solver.max_halvings),
        det_threshold: r.f64("solver.det_threshold", d.solver.det_threshold),
    };
    for (key, ok) in [
        ("solver.tol", solver.tol > 0.0),
        ("solver.max_iters", solver.max_iters >= 1),
        ("solver.det_threshold", solver.det_threshold > 0.0),
    ] {
        if !ok {
            let line = r.line_of(key);
            r.err(line, key, "must be positive");
        }
    }
    let quadrature_points = r.usize("quadrature.points", d.quadrature_points);
    if !(2..=16).contains(&quadrature_points) {
        let line = r.line_of("quadrature.points");
        r.err(line, "quadrature.points", "must lie in 2..=16");
    }

    let unused: Vec<(String, usize)> = r
        .entries
        .iter()
        .filter(|(_, e)| !e.used)
        .map(|(k, e)| (k.clone(), e.line))
        .collect();
    for (k, line) in unused {
        r.err(Some(line), &k, "unknown key");
    }

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        return Err(ConfigError::Invalid(r.errors));
    }
    Ok(RunConfig {
        dim,
        mode,
        grid,
        material,
        initial_y,
        initial_v,
        initial_p,
        loads,
        time,
        output,
        solver,
        quadrature_points,
    })
}

fn parse_vector_load(r: &mut Reader, key: &str, dim: usize) -> Option<VectorLoad> {
    let vector = r.get(key, None, |s| parse_list(s, parse_f64).map(Some))?;
    if vector.len() != dim {
        let line = r.line_of(key);
        r.err(
            line,
            key,
            format!("expected {dim} components, got {}", vector.len()),
        );
    }
    let amplitude = r.get(
        &format!("{key}.amplitude"),
        TimeFunction::Constant(1.0),
        parse_time_function,
    );
    Some(VectorLoad { vector, amplitude })
}

fn parse_loads(r: &mut Reader, dim: usize, grid: &Grid) -> Loads {
    let mut loads = Loads {
        body_force: parse_vector_load(r, "loads.body_force", dim),
        ..Loads::default()
    };
    if let Some(line) = r.line_of("loads.body_force.amplitude") {
        if loads.body_force.is_none() {
            r.take("loads.body_force.amplitude");
            r.err(
                Some(line),
                "loads.body_force.amplitude",
                "amplitude without a body force",
            );
        }
    }
    for kind in ["traction", "dirichlet"] {
        let prefix = format!("loads.{kind}.");
        let mut sides = Vec::new();
        for key in r.keys_with_prefix(&prefix) {
            let name = key[prefix.len()..].trim_end_matches(".amplitude");
            match Side::parse(name) {
                Some(side) if side.dir < dim => {
                    if !sides.contains(&side) {
                        sides.push(side);
                    }
                }
                _ => {
                    let line = r.line_of(&key);
                    r.take(&key);
                    r.err(line, &key, format!("unknown side '{name}'"));
                }
            }
        }
        sides.sort();
        for side in sides {
            let key = format!("{prefix}{}", side.name());
            if grid.periodic.get(side.dir).copied().unwrap_or(false) {
                let line = r.line_of(&key).or(r.line_of(&format!("{key}.amplitude")));
                r.err(line, &key, "side lies in a periodic direction");
            }
            match parse_vector_load(r, &key, dim) {
                Some(load) if kind == "traction" => loads.traction.push((side, load)),
                Some(load) => loads.dirichlet.push((side, load)),
                None => {
                    let amp = format!("{key}.amplitude");
                    let line = r.line_of(&amp);
                    r.take(&amp);
                    r.err(line, &amp, "amplitude without a load vector");
                }
            }
        }
    }
    loads
}

/// Serializes a configuration so that [`parse_config_str`] restores it exactly.
pub fn write_config(c: &RunConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("dim", c.dim.to_string());
    kv("mode", c.mode.name().to_string());
    kv("grid.lengths", nums(&c.grid.lengths));
    kv(
        "grid.cells",
        c.grid
            .cells
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );
    kv(
        "grid.periodic",
        c.grid
            .periodic
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );
    let mut m = c.material;
    for key in MATERIAL_KEYS {
        kv(
            &format!("material.{key}"),
            num(*material_field(&mut m, key)),
        );
    }
    kv(
        "initial.y",
        match &c.initial_y {
            InitialDeformation::Reference => "reference".into(),
            InitialDeformation::Shear(g) => format!("shear:{}", num(*g)),
            InitialDeformation::File(p) => format!("file:{}", p.display()),
        },
    );
    kv(
        "initial.v",
        match c.initial_v {
            InitialVelocity::Zero => "zero".into(),
            InitialVelocity::Shear { rate, bump } => format!("shear:{}:{}", num(rate), num(bump)),
        },
    );
    kv("initial.P", "identity".into());
    let mut load = |key: String, l: &VectorLoad| {
        kv(&key, nums(&l.vector));
        kv(
            &format!("{key}.amplitude"),
            format_time_function(&l.amplitude),
        );
    };
    if let Some(f) = &c.loads.body_force {
        load("loads.body_force".into(), f);
    }
    for (side, g) in &c.loads.traction {
        load(format!("loads.traction.{}", side.name()), g);
    }
    for (side, g) in &c.loads.dirichlet {
        load(format!("loads.dirichlet.{}", side.name()), g);
    }
    kv("time.T", num(c.time.t_end));
    kv("time.dt0", num(c.time.dt0));
    kv("time.dt_max", num(c.time.dt_max));
    kv("output.dir", c.output.dir.display().to_string());
    kv("output.every", c.output.every.to_string());
    kv("solver.tol", num(c.solver.tol));
    kv("solver.max_iters", c.solver.max_iters.to_string());
    kv("solver.max_halvings", c.solver.max_halvings.to_string());
    kv("solver.det_threshold", num(c.solver.det_threshold));
    kv("quadrature.points", c.quadrature_points.to_string());
    out
}
