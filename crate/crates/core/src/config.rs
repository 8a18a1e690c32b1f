//! Study configuration: a sectioned `key = value` file in TOML syntax.
//!
//! ```toml
//! [domain]
//! L1 = 1.0
//! L2 = 1.0
//! n1 = 33
//! n2 = 33
//!
//! [material]
//! lambda = 1.0
//! mu = 1.0
//! eps = 0.1
//!
//! [immersion]
//! kind = "paraboloid"
//! ts = [0.2, 0.1, 0.05, 0.025, 0.0]
//!
//! [force]
//! kind = "constant"
//! p1 = 0.5
//! p2 = -0.3
//! p3 = 1.0
//! ```
//!
//! Only `[material]` is required; every other key has the default listed in
//! [`StudyConfig::default_text`]. Unknown sections and keys are rejected.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::elasticity::Material;
use crate::energy::{ForceKind, ForceSpec};
use crate::error::ConfigError;
use crate::geometry::{Immersion, Rect, Surface};
use crate::grid::Grid;
use crate::minimizer::{check_parameter_list, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum ForceSource {
    Catalog(ForceSpec),
    /// One field-format CSV per component; a missing component is zero.
    Csv([Option<PathBuf>; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// Also solve every `t` from rest and report warm/cold energies.
    pub compare_cold_start: bool,
    pub rigidity_starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub grid: Grid,
    pub material: Material,
    /// Family member at unit scale; `with_scale(t)` yields the other members.
    pub family: Immersion,
    pub ts: Vec<f64>,
    /// Scale used by the single-surface commands (`solve`, `geometry`).
    pub t: f64,
    pub force: ForceSource,
    pub solver: SolverConfig,
    pub study: StudyOptions,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 7] = [
    "domain",
    "material",
    "immersion",
    "force",
    "solver",
    "study",
    "output",
];

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str, allowed: &[&str]) -> Result<Self, ConfigError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                return Err(ConfigError::Section {
                    section: name.into(),
                    message: "expected a section".into(),
                })
            }
        };
        if let Some(t) = table {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(self_err(name, key, "unknown key"));
                }
            }
        }
        Ok(Self { name, table })
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        self_err(self.name, key, msg)
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.err(key, "expected a number")),
        }
    }

    fn float_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    fn required_float(&self, key: &str) -> Result<f64, ConfigError> {
        self.float(key)?
            .ok_or_else(|| self.err(key, "missing required key"))
    }

    fn uint_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(self.err(key, "expected a non-negative integer")),
        }
    }

    fn int_or(&self, key: &str, default: i64) -> Result<i64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Integer(i)) => Ok(*i),
            Some(_) => Err(self.err(key, "expected an integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.err(key, "expected a string")),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.err(key, "expected true or false")),
        }
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.err(key, "expected a list of numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.err(key, "expected a list of numbers")),
        }
    }
}

fn self_err(section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        section: section.into(),
        key: key.into(),
        message: msg.into(),
    }
}

impl StudyConfig {
    /// Documented defaults, as a config file.
    pub fn default_text() -> &'static str {
        include_str!("../configs/defaults.toml")
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        // Force CSVs resolve against the config's directory; output paths do not.
        Self::from_str_with_base(&text, path.parent())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_str_with_base(text, None)
    }

    fn from_str_with_base(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        for (key, value) in &root {
            if !SECTIONS.contains(&key.as_str()) {
                return Err(match value {
                    Value::Table(_) => ConfigError::Section {
                        section: key.clone(),
                        message: "unknown section".into(),
                    },
                    _ => ConfigError::Invalid(format!("key `{key}` outside of any section")),
                });
            }
        }

        let domain = Section::new(&root, "domain", &["L1", "L2", "n1", "n2"])?;
        let l1 = domain.float_or("L1", 1.0)?;
        let l2 = domain.float_or("L2", 1.0)?;
        let n1 = domain.uint_or("n1", 33)? as usize;
        let n2 = domain.uint_or("n2", 33)? as usize;
        let grid = Grid::new(l1, l2, n1, n2).map_err(|e| ConfigError::Section {
            section: "domain".into(),
            message: e.to_string(),
        })?;

        let material = Section::new(&root, "material", &["lambda", "mu", "eps"])?;
        let lambda = material.required_float("lambda")?;
        let mu = material.required_float("mu")?;
        let eps = material.required_float("eps")?;
        let material = Material::new(lambda, mu, eps).map_err(|e| {
            let key = match e {
                crate::error::MaterialError::Lambda(_) => "lambda",
                crate::error::MaterialError::Mu(_) => "mu",
                _ => "eps",
            };
            self_err("material", key, e.to_string())
        })?;

        let imm = Section::new(
            &root,
            "immersion",
            &["kind", "t", "ts", "kappa1", "kappa2", "k1", "k2"],
        )?;
        let kind = imm.string("kind")?.unwrap_or_else(|| "paraboloid".into());
        let params = |k: &str| -> Result<Option<f64>, ConfigError> { imm.float(k) };
        let mut named = Vec::new();
        for k in ["kappa1", "kappa2", "k1", "k2"] {
            if let Some(v) = params(k)? {
                named.push((k, v));
            }
        }
        let surface = Surface::from_tag(&kind, |k| {
            if k == "t" {
                Some(1.0)
            } else {
                named.iter().find(|(n, _)| *n == k).map(|(_, v)| *v)
            }
        })
        .map_err(|e| imm.err("kind", e.to_string()))?;
        let family = Immersion::new(surface, Rect { l1, l2 });
        let ts = imm
            .float_list("ts")?
            .unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025, 0.0]);
        check_parameter_list(&ts).map_err(|m| imm.err("ts", m))?;
        let t = imm.float_or("t", ts[0])?;

        let force = Section::new(
            &root,
            "force",
            &[
                "kind", "p1", "p2", "p3", "e1", "e2", "c1", "c2", "sigma", "p1_csv", "p2_csv",
                "p3_csv",
            ],
        )?;
        let fkind = force.string("kind")?.unwrap_or_else(|| "constant".into());
        let amplitude = [
            force.float_or("p1", 0.5)?,
            force.float_or("p2", -0.3)?,
            force.float_or("p3", 1.0)?,
        ];
        if amplitude.iter().any(|v| !v.is_finite()) {
            return Err(force.err("p1", "force amplitudes must be finite"));
        }
        let force = match fkind.as_str() {
            "constant" => ForceSource::Catalog(ForceSpec {
                kind: ForceKind::Constant,
                amplitude,
            }),
            "polynomial" => {
                let e1 = force.int_or("e1", 1)?;
                let e2 = force.int_or("e2", 1)?;
                if e1 < 0 || e2 < 0 {
                    return Err(force.err("e1", "exponents must be >= 0"));
                }
                ForceSource::Catalog(ForceSpec {
                    kind: ForceKind::Polynomial {
                        e1: e1 as i32,
                        e2: e2 as i32,
                    },
                    amplitude,
                })
            }
            "gaussian_bump" => {
                let sigma = force.float_or("sigma", 0.2 * l1.min(l2))?;
                if !(sigma > 0.0) {
                    return Err(force.err("sigma", "must be > 0"));
                }
                ForceSource::Catalog(ForceSpec {
                    kind: ForceKind::GaussianBump {
                        center: [
                            force.float_or("c1", 0.5 * l1)?,
                            force.float_or("c2", 0.5 * l2)?,
                        ],
                        sigma,
                    },
                    amplitude,
                })
            }
            "csv" => {
                let mut paths: [Option<PathBuf>; 3] = [None, None, None];
                for (slot, key) in paths.iter_mut().zip(["p1_csv", "p2_csv", "p3_csv"]) {
                    if let Some(p) = force.string(key)? {
                        let mut path = PathBuf::from(p);
                        if path.is_relative() {
                            if let Some(b) = base {
                                path = b.join(path);
                            }
                        }
                        if !path.exists() {
                            return Err(
                                force.err(key, format!("file {} does not exist", path.display()))
                            );
                        }
                        *slot = Some(path);
                    }
                }
                ForceSource::Csv(paths)
            }
            other => return Err(force.err("kind", format!("unknown force kind `{other}`"))),
        };

        let sol = Section::new(
            &root,
            "solver",
            &[
                "grad_tol",
                "max_iter",
                "memory",
                "ls_shrink",
                "ls_c1",
                "restarts",
                "seed",
            ],
        )?;
        let d = SolverConfig::default();
        let solver = SolverConfig {
            grad_tol: sol.float_or("grad_tol", d.grad_tol)?,
            max_iter: sol.uint_or("max_iter", d.max_iter as u64)? as usize,
            memory: sol.uint_or("memory", d.memory as u64)? as usize,
            ls_shrink: sol.float_or("ls_shrink", d.ls_shrink)?,
            ls_c1: sol.float_or("ls_c1", d.ls_c1)?,
            restarts: sol.uint_or("restarts", d.restarts as u64)? as usize,
            seed: sol.uint_or("seed", d.seed)?,
        };
        solver.validate().map_err(|m| ConfigError::Section {
            section: "solver".into(),
            message: m,
        })?;

        let st = Section::new(&root, "study", &["compare_cold_start", "rigidity_starts"])?;
        let study = StudyOptions {
            compare_cold_start: st.bool_or("compare_cold_start", false)?,
            rigidity_starts: st.uint_or("rigidity_starts", 20)? as usize,
        };
        if study.rigidity_starts == 0 {
            return Err(st.err("rigidity_starts", "must be >= 1"));
        }

        let out = Section::new(&root, "output", &["dir", "prefix"])?;
        let output = OutputConfig {
            dir: PathBuf::from(out.string("dir")?.unwrap_or_else(|| "out".into())),
            prefix: out.string("prefix")?.unwrap_or_else(|| "study".into()),
        };

        Ok(Self {
            grid,
            material,
            family,
            ts,
            t,
            force,
            solver,
            study,
            output,
        })
    }

    pub fn with_grid(mut self, n1: usize, n2: usize) -> Result<Self, ConfigError> {
        self.grid = self
            .grid
            .with_nodes(n1, n2)
            .map_err(|e| ConfigError::Section {
                section: "domain".into(),
                message: e.to_string(),
            })?;
        Ok(self)
    }

    /// Stable digest of everything that affects results; `[output]` is excluded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let key = (
            &self.grid,
            &self.material,
            &self.family,
            &self.ts,
            self.t,
            &self.force,
            &self.solver,
            &self.study,
        );
        let digest = Sha256::digest(format!("{key:?}").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses `"<n1>x<n2>"`.
pub fn parse_grid_override(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected <n1>x<n2>, got `{s}`"))?;
    let n1 = a.trim().parse().map_err(|_| format!("bad n1 in `{s}`"))?;
    let n2 = b.trim().parse().map_err(|_| format!("bad n2 in `{s}`"))?;
    Ok((n1, n2))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = "[material]\nlambda = 1.0\nmu = 1.0\neps = 0.1\n";

    #[test]
    fn minimal_file_takes_defaults() {
        let c = StudyConfig::parse(MIN).unwrap();
        assert_eq!(c.grid, Grid::unit(33).unwrap());
        assert_eq!(c.ts, vec![0.2, 0.1, 0.05, 0.025, 0.0]);
        assert_eq!(c.family.surface, Surface::paraboloid(1.0));
        assert_eq!(
            c.force,
            ForceSource::Catalog(ForceSpec::constant([0.5, -0.3, 1.0]))
        );
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.t, 0.2);
    }

    #[test]
    fn defaults_file_matches_builtin_defaults() {
        let a = StudyConfig::parse(StudyConfig::default_text()).unwrap();
        let b = StudyConfig::parse(MIN).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_mu_is_named() {
        let e = StudyConfig::parse("[material]\nlambda = 1.0\neps = 0.1\n").unwrap_err();
        assert_eq!(e.to_string(), "[material] mu: missing required key");
    }

    #[test]
    fn negative_lambda_rejected() {
        let e = StudyConfig::parse("[material]\nlambda = -1\nmu = 1.0\neps = 0.1\n").unwrap_err();
        assert!(e.to_string().starts_with("[material] lambda"), "{e}");
    }

    #[test]
    fn t_list_must_end_at_zero() {
        let e = StudyConfig::parse(&format!("{MIN}[immersion]\nts = [0.2, 0.1]\n")).unwrap_err();
        assert!(e.to_string().contains("[immersion] ts"), "{e}");
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let e = StudyConfig::parse(&format!("{MIN}[solver]\nfoo = 1\n")).unwrap_err();
        assert_eq!(e.to_string(), "[solver] foo: unknown key");
        assert!(StudyConfig::parse(&format!("{MIN}[extra]\na = 1\n")).is_err());
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = StudyConfig::parse("[material]\nlambda = 1.0\nmu = = 2\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn grid_override() {
        assert_eq!(parse_grid_override("17x9"), Ok((17, 9)));
        assert!(parse_grid_override("17").is_err());
        let c = StudyConfig::parse(MIN).unwrap().with_grid(17, 9).unwrap();
        assert_eq!((c.grid.n1, c.grid.n2), (17, 9));
    }

    #[test]
    fn hash_tracks_content() {
        let a = StudyConfig::parse(MIN).unwrap();
        let b = StudyConfig::parse(&format!("{MIN}[solver]\nseed = 4\n")).unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
