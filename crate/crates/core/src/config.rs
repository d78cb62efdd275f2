//! Experiment configuration files.
//!
//! A config is a list of `[section]` headers followed by `key = value` lines.
//! `#` starts a comment. Lists are comma separated. Unknown sections or keys
//! are errors so that typos do not silently fall back to defaults.
//!
//! ```text
//! [experiment]
//! name = case1_1d
//! initial = paper-1d          # paper-1d | paper-2d | constant | custom-indicator
//! u_d = 0.1, 0.1
//! initial_values = 0.05, 0.05 # constant / custom-indicator base values
//! box = 1, 0.1, 0.2, 0.5, 0, 0.4   # species, amplitude, x0, x1[, y0, y1] (repeatable)
//! snapshots = 0.0005, 0.001
//!
//! [model]
//! model = case1               # case1 | case2 | generic
//! p = exponential             # generic only: linear | exponential | power:<k>
//! a = 2
//! b = 2
//! kappa = 1
//! alphas = 1, 10
//!
//! [mesh]
//! type = interval             # interval | rectangle | triangle-file | acute-square
//! cells = 80
//! nx = 32
//! ny = 32
//! path = square.tri           # relative to the config file
//! refinements = 0
//! dirichlet = x == 0
//!
//! [time]
//! t_end = 1e-3
//! dt = fixed:1e-5             # fixed:<dt> | adaptive | mesh-squared
//! tol = 1e-10
//! max_iters = 50
//! dt_min = 1e-8
//! dt_max = 1e-2
//! dt_init = 1e-5
//! damping = 0.5
//! frozen_mobility = false
//!
//! [convergence]
//! resolutions = 40, 80, 160, 320, 640
//! reference = 1280
//!
//! [run]
//! seed = 42
//! strict_theory = false
//! threads = 1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{DtPolicy, ExperimentSpec, IndicatorBox, InitialSpec, MeshFamily, ModelSelector};
use crate::mesh::{BoundaryPredicate, DirichletSide};
use crate::model::NamedP;
use crate::scheme::{BoundaryData, NewtonConfig};

/// Sizes used by `--paper-scale`.
pub const PAPER_REFERENCE_CELLS: usize = 5120;
pub const PAPER_TRIANGLE_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub strict_theory: bool,
    pub threads: usize,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "experiment",
        &["name", "initial", "u_d", "initial_values", "box", "snapshots"],
    ),
    ("model", &["model", "p", "a", "b", "kappa", "alphas"]),
    (
        "mesh",
        &["type", "cells", "nx", "ny", "path", "refinements", "dirichlet"],
    ),
    (
        "time",
        &[
            "t_end",
            "dt",
            "tol",
            "max_iters",
            "dt_min",
            "dt_max",
            "dt_init",
            "damping",
            "frozen_mobility",
        ],
    ),
    ("convergence", &["resolutions", "reference"]),
    ("run", &["seed", "strict_theory", "threads", "output_dir"]),
];

/// Raw `section.key -> values` map; repeated keys keep every value.
#[derive(Debug, Default)]
struct Raw {
    values: BTreeMap<(String, String), Vec<(usize, String)>>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut raw = Raw::default();
        let mut section: Option<String> = None;
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = no + 1;
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?
                    .trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::Config(format!("line {lineno}: unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
            let Some(sec) = &section else {
                return Err(Error::Config(format!("line {lineno}: key outside of a section")));
            };
            let key = key.trim();
            let known = SECTIONS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(Error::Config(format!("line {lineno}: unknown key `{key}` in [{sec}]")));
            }
            raw.values
                .entry((sec.clone(), key.to_string()))
                .or_default()
                .push((lineno, value.trim().to_string()));
        }
        Ok(raw)
    }

    fn get(&self, section: &str, key: &str) -> Result<Option<(usize, &str)>> {
        match self.values.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some((v[0].0, v[0].1.as_str()))),
            Some(v) => Err(Error::Config(format!(
                "line {}: `{key}` is given more than once in [{section}]",
                v[1].0
            ))),
        }
    }

    fn all(&self, section: &str, key: &str) -> Vec<(usize, &str)> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(|v| v.iter().map(|(n, s)| (*n, s.as_str())).collect())
            .unwrap_or_default()
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key)? {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: bad value `{v}` for {section}.{key}"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.parsed(section, key)?
            .ok_or_else(|| Error::Config(format!("missing {section}.{key}")))
    }

    fn list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(section, key)? {
            None => Ok(None),
            Some((line, v)) => parse_list(v)
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: bad list `{v}` for {section}.{key}"))),
        }
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, ()> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ()))
        .collect()
}

fn parse_model(raw: &Raw) -> Result<(ModelSelector, Vec<f64>)> {
    let name: String = raw.required("model", "model")?;
    let selector = match name.as_str() {
        "case1" => ModelSelector::Case1,
        "case2" => ModelSelector::Case2,
        "generic" => {
            let p: String = raw.required("model", "p")?;
            ModelSelector::Generic {
                p: p.parse::<NamedP>()?,
                a: raw.required("model", "a")?,
                b: raw.required("model", "b")?,
                kappa: raw.parsed("model", "kappa")?,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown model `{other}` (expected case1, case2 or generic)"
            )))
        }
    };
    let alphas = raw
        .list("model", "alphas")?
        .ok_or_else(|| Error::Config("missing model.alphas".into()))?;
    Ok((selector, alphas))
}

fn parse_mesh(raw: &Raw, base_dir: &Path, paper_scale: bool) -> Result<MeshFamily> {
    let kind: String = raw.parsed("mesh", "type")?.unwrap_or_else(|| "interval".into());
    let predicate = |default: &str| -> Result<BoundaryPredicate> {
        let text: String = raw.parsed("mesh", "dirichlet")?.unwrap_or_else(|| default.into());
        BoundaryPredicate::parse(&text)
    };
    match kind.as_str() {
        "interval" => {
            let dirichlet = DirichletSide::from_predicate(&predicate("x == 0")?)?;
            let resolutions: Vec<usize> = match raw.list("convergence", "resolutions")? {
                Some(r) => r,
                None => vec![raw.required("mesh", "cells")?],
            };
            let mut reference = raw.parsed("convergence", "reference")?;
            if paper_scale && reference.is_some() {
                reference = Some(PAPER_REFERENCE_CELLS);
            }
            Ok(MeshFamily::Interval {
                resolutions,
                reference,
                dirichlet,
            })
        }
        "rectangle" => Ok(MeshFamily::Rectangle {
            nx: raw.required("mesh", "nx")?,
            ny: raw.required("mesh", "ny")?,
            dirichlet: predicate("y == 1")?,
        }),
        "triangle-file" => {
            let path: String = raw.required("mesh", "path")?;
            Ok(MeshFamily::TriangleFile {
                path: base_dir.join(path),
                refinements: raw.parsed("mesh", "refinements")?.unwrap_or(0),
                dirichlet: predicate("y == 1")?,
            })
        }
        "acute-square" => Ok(MeshFamily::AcuteSquare {
            refinements: if paper_scale {
                PAPER_TRIANGLE_REFINEMENTS
            } else {
                raw.parsed("mesh", "refinements")?.unwrap_or(3)
            },
            dirichlet: predicate("y == 1")?,
        }),
        other => Err(Error::Config(format!(
            "unknown mesh type `{other}` (expected interval, rectangle, triangle-file or acute-square)"
        ))),
    }
}

fn parse_initial(raw: &Raw) -> Result<InitialSpec> {
    let name: String = raw.parsed("experiment", "initial")?.unwrap_or_else(|| "paper-1d".into());
    let values: Option<Vec<f64>> = raw.list("experiment", "initial_values")?;
    match name.as_str() {
        "constant" => Ok(InitialSpec::Constant(values)),
        "custom-indicator" => {
            let base = values.ok_or_else(|| Error::Config("custom-indicator needs experiment.initial_values".into()))?;
            let boxes = raw
                .all("experiment", "box")
                .into_iter()
                .map(|(line, v)| {
                    let f: Vec<f64> = parse_list(v).map_err(|_| Error::Config(format!("line {line}: bad box `{v}`")))?;
                    match f.as_slice() {
                        [s, amp, x0, x1, y0, y1] if *s >= 1.0 && s.fract() == 0.0 => Ok(IndicatorBox {
                            species: *s as usize - 1,
                            amplitude: *amp,
                            x: [*x0, *x1],
                            y: [*y0, *y1],
                        }),
                        [s, amp, x0, x1] if *s >= 1.0 && s.fract() == 0.0 => Ok(IndicatorBox {
                            species: *s as usize - 1,
                            amplitude: *amp,
                            x: [*x0, *x1],
                            y: [0.0, 1.0],
                        }),
                        _ => Err(Error::Config(format!(
                            "line {line}: box needs `species, amplitude, x0, x1[, y0, y1]` with species >= 1"
                        ))),
                    }
                })
                .collect::<Result<_>>()?;
            Ok(InitialSpec::CustomIndicator { base, boxes })
        }
        other => other.parse(),
    }
}

fn parse_time(raw: &Raw) -> Result<(f64, DtPolicy, NewtonConfig)> {
    let t_end = raw.required("time", "t_end")?;
    let d = NewtonConfig::default();
    let newton = NewtonConfig {
        tol: raw.parsed("time", "tol")?.unwrap_or(d.tol),
        max_iters: raw.parsed("time", "max_iters")?.unwrap_or(d.max_iters),
        dt_min: raw.parsed("time", "dt_min")?.unwrap_or(d.dt_min),
        dt_max: raw.parsed("time", "dt_max")?.unwrap_or(d.dt_max),
        dt_init: raw.parsed("time", "dt_init")?.unwrap_or(d.dt_init),
        damping: raw.parsed("time", "damping")?.unwrap_or(d.damping),
        frozen_mobility: raw.parsed("time", "frozen_mobility")?.unwrap_or(d.frozen_mobility),
        ..d
    };
    let policy_text: String = raw.parsed("time", "dt")?.unwrap_or_else(|| "adaptive".into());
    let policy = match policy_text.as_str() {
        "adaptive" => DtPolicy::Adaptive,
        "mesh-squared" => DtPolicy::MeshSquared,
        other => match other.strip_prefix("fixed:").map(|v| v.trim().parse::<f64>()) {
            Some(Ok(dt)) => DtPolicy::Fixed(dt),
            _ => {
                return Err(Error::Config(format!(
                    "bad time.dt `{other}` (expected fixed:<dt>, adaptive or mesh-squared)"
                )))
            }
        },
    };
    Ok((t_end, policy, newton))
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub strict_theory: bool,
    pub paper_scale: bool,
}

/// Parse config text; relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let raw = Raw::parse(text)?;
    let name: String = raw.required("experiment", "name")?;
    let u_d: Vec<f64> = raw
        .list("experiment", "u_d")?
        .ok_or_else(|| Error::Config("missing experiment.u_d".into()))?;
    // rejects Σ u_D >= 1 and nonpositive entries up front
    BoundaryData::new(u_d.clone())?;
    let (model, alphas) = parse_model(&raw)?;
    let (t_end, dt_policy, newton) = parse_time(&raw)?;
    let snapshot_times = raw.list("experiment", "snapshots")?.unwrap_or_else(|| vec![t_end]);
    let experiment = ExperimentSpec {
        name,
        model,
        mesh: parse_mesh(&raw, base_dir, overrides.paper_scale)?,
        alphas,
        u_d,
        initial: parse_initial(&raw)?,
        t_end,
        dt_policy,
        newton,
        snapshot_times,
    };
    experiment.validate()?;
    let strict_theory = overrides.strict_theory || raw.parsed("run", "strict_theory")?.unwrap_or(false);
    if strict_theory && experiment.alphas.iter().any(|&a| a != 1.0) {
        return Err(Error::Config(format!(
            "strict theory mode requires all diffusion coefficients equal to 1, got {:?}",
            experiment.alphas
        )));
    }
    let env_threads = std::env::var("THREADS").ok().and_then(|v| v.trim().parse().ok());
    let threads = overrides
        .threads
        .or(env_threads)
        .or(raw.parsed("run", "threads")?)
        .unwrap_or(1)
        .max(1);
    let output_dir = match (&overrides.output_dir, raw.parsed::<String>("run", "output_dir")?) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => base_dir.join(p),
        (None, None) => PathBuf::from("output"),
    };
    Ok(RunConfig {
        experiment,
        output_dir,
        seed: raw.parsed("run", "seed")?.unwrap_or(42),
        strict_theory,
        threads,
    })
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
[experiment]
name = demo
u_d = 0.1, 0.1

[model]
model = case1
alphas = 1, 10   # second species diffuses faster

[mesh]
cells = 80

[time]
t_end = 1e-3
dt = fixed:1e-5
";

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("."), &Overrides::default())
    }

    #[test]
    fn parses_basic_config() {
        let cfg = parse(BASIC).unwrap();
        assert_eq!(cfg.experiment.name, "demo");
        assert_eq!(cfg.experiment.alphas, vec![1.0, 10.0]);
        assert_eq!(cfg.experiment.dt_policy, DtPolicy::Fixed(1e-5));
        assert_eq!(cfg.experiment.snapshot_times, vec![1e-3]);
        assert!(matches!(
            cfg.experiment.mesh,
            MeshFamily::Interval { ref resolutions, dirichlet: DirichletSide::Left, .. } if resolutions == &[80]
        ));
        assert_eq!(cfg.output_dir, PathBuf::from("output"));
    }

    #[test]
    fn saturated_dirichlet_datum_is_a_config_error() {
        let text = BASIC.replace("u_d = 0.1, 0.1", "u_d = 0.6, 0.5");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("sum of u_D < 1")), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn strict_theory_rejects_unequal_alphas() {
        let over = Overrides {
            strict_theory: true,
            ..Overrides::default()
        };
        let err = parse_config(BASIC, Path::new("."), &over).unwrap_err();
        assert!(err.to_string().contains("equal to 1"));
        let ok = BASIC.replace("alphas = 1, 10", "alphas = 1, 1");
        assert!(parse_config(&ok, Path::new("."), &over).unwrap().strict_theory);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(parse(&format!("{BASIC}\n[extra]\n")).is_err());
        assert!(parse(&BASIC.replace("cells = 80", "cels = 80")).is_err());
        assert!(parse(&BASIC.replace("dt = fixed:1e-5", "dt = sometimes")).is_err());
        assert!(parse(&format!("{BASIC}\n[time]\nt_end = 2\n")).is_err());
    }

    #[test]
    fn convergence_and_paper_scale() {
        let text = format!("{BASIC}\n[convergence]\nresolutions = 40, 80, 160, 320, 640\nreference = 1280\n")
            .replace("cells = 80\n", "");
        let cfg = parse(&text).unwrap();
        assert!(matches!(cfg.experiment.mesh, MeshFamily::Interval { reference: Some(1280), .. }));
        let paper = parse_config(
            &text,
            Path::new("."),
            &Overrides {
                paper_scale: true,
                ..Overrides::default()
            },
        )
        .unwrap();
        assert!(matches!(paper.experiment.mesh, MeshFamily::Interval { reference: Some(5120), .. }));
    }

    #[test]
    fn custom_indicator_boxes() {
        let text = BASIC
            .replace("u_d = 0.1, 0.1", "u_d = 0.1, 0.1\ninitial = custom-indicator\ninitial_values = 0.1, 0.1\nbox = 1, 0.1, 0.2, 0.5, 0, 1\nbox = 2, 0.05, 0.5, 0.8");
        let cfg = parse(&text).unwrap();
        match cfg.experiment.initial {
            InitialSpec::CustomIndicator { ref boxes, .. } => {
                assert_eq!(boxes.len(), 2);
                assert_eq!(boxes[1].species, 1);
            }
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn generic_model_section() {
        let text = BASIC.replace("model = case1", "model = generic\np = power:2\na = 1\nb = 1");
        let cfg = parse(&text).unwrap();
        assert!(matches!(cfg.experiment.model, ModelSelector::Generic { p: NamedP::Power(k), .. } if k == 2.0));
    }
}
