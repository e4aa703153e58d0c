//! Flat `key = value` scenario files. `#` starts a comment; blank lines are
//! ignored; unknown or repeated keys are errors. Field-valued keys take an
//! expression in `x`, `y` (see [`Expr`]); scalar keys take a constant
//! expression.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::{build_structured_mesh, Coefficient, FieldKind, Mesh, NodalField, OperatorSpec};
use crate::ocp::{ControlBox, OcpProblem, PathOptions, ProblemData, ProxCenter, Schedule, SolveOptions, URefPolicy};
use crate::stationarity::{DirectionSampling, Tolerances};

use super::expr::Expr;

/// Every accepted key with its default (`None`: absent unless given).
const KEYS: &[(&str, Option<&str>)] = &[
    ("nsub", Some("16")),
    ("a11", Some("1")),
    ("a12", Some("0")),
    ("a21", Some("0")),
    ("a22", Some("1")),
    ("b1", Some("0")),
    ("b2", Some("0")),
    ("c1", Some("0")),
    ("c2", Some("0")),
    ("d", Some("0")),
    ("y_a", Some("-1")),
    ("y_b", Some("1")),
    ("y_d", Some("0")),
    ("alpha", Some("1e-2")),
    ("g", None),
    ("u_low", None),
    ("u_high", None),
    ("u_ref", Some("continuation")),
    ("u_ref_policy", Some("fixed")),
    ("gamma_start", Some("1")),
    ("gamma_end", Some("1e8")),
    ("gamma_factor", Some("10")),
    ("tol_kkt", Some("1e-10")),
    ("tol_stat", Some("1e-6")),
    ("tol_sign", Some("1e-8")),
    ("tol_b", Some("1e-6")),
    ("b_hats", Some("true")),
    ("b_random", Some("50")),
    ("b_shaped", Some("20")),
    ("u_hat", None),
    ("oracle_instances", Some("20")),
    ("oracle_enumerate", Some("true")),
    ("seed", Some("42")),
    ("out", None),
];

#[derive(Debug, Clone, PartialEq)]
pub enum URefSpec {
    Lq,
    Continuation,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum UHatSpec {
    Construct,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub nsub: usize,
    pub a: [[Expr; 2]; 2],
    pub b: [Expr; 2],
    pub c: [Expr; 2],
    pub d: Expr,
    pub y_a: Expr,
    pub y_b: Expr,
    pub y_d: Expr,
    pub alpha: f64,
    pub g: Option<Expr>,
    pub u_low: Option<Expr>,
    pub u_high: Option<Expr>,
    pub u_ref: URefSpec,
    pub u_ref_policy: URefPolicy,
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub gamma_factor: f64,
    pub tol_kkt: f64,
    pub tol_stat: f64,
    pub tol_sign: f64,
    pub tol_b: f64,
    pub b_hats: bool,
    pub b_random: usize,
    pub b_shaped: usize,
    pub u_hat: Option<UHatSpec>,
    pub oracle_instances: usize,
    pub oracle_enumerate: bool,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn expr(e: &Entry, key: &str) -> Result<Expr> {
    Expr::parse(&e.value).map_err(|err| parse_err(e.line, format!("{key}: {err}")))
}

fn scalar(e: &Entry, key: &str) -> Result<f64> {
    let x = expr(e, key)?;
    if !x.is_constant() {
        return Err(parse_err(e.line, format!("{key} must be a constant")));
    }
    let v = x.eval(0.0, 0.0);
    if !v.is_finite() {
        return Err(parse_err(e.line, format!("{key} is not finite")));
    }
    Ok(v)
}

fn positive(e: &Entry, key: &str) -> Result<f64> {
    let v = scalar(e, key)?;
    if !(v > 0.0) {
        return Err(parse_err(e.line, format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

fn integer(e: &Entry, key: &str) -> Result<u64> {
    e.value
        .parse::<u64>()
        .map_err(|_| parse_err(e.line, format!("{key} must be a nonnegative integer, got '{}'", e.value)))
}

fn boolean(e: &Entry, key: &str) -> Result<bool> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        v => Err(parse_err(e.line, format!("{key} must be true or false, got '{v}'"))),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut given: BTreeMap<String, Entry> = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line_no = k + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(parse_err(line_no, "expected 'key = value'"));
            };
            let key = key.trim();
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(parse_err(line_no, format!("unknown key '{key}'")));
            }
            if given.contains_key(key) {
                return Err(parse_err(line_no, format!("key '{key}' given twice")));
            }
            let value = value.trim();
            if value.is_empty() {
                return Err(parse_err(line_no, format!("key '{key}' has no value")));
            }
            given.insert(
                key.to_string(),
                Entry {
                    line: line_no,
                    value: value.to_string(),
                },
            );
        }
        for (key, default) in KEYS {
            if let Some(d) = default {
                given.entry(key.to_string()).or_insert(Entry {
                    line: 0,
                    value: d.to_string(),
                });
            }
        }
        let get = |k: &str| given.get(k);
        let req = |k: &str| get(k).expect("keys with defaults are always present");

        let nsub = integer(req("nsub"), "nsub")? as usize;
        if nsub < 2 {
            return Err(parse_err(req("nsub").line, "nsub must be at least 2"));
        }
        let ex = |k: &str| expr(req(k), k);
        let opt_ex = |k: &str| get(k).map(|e| expr(e, k)).transpose();
        let u_ref = match req("u_ref").value.as_str() {
            "lq" => URefSpec::Lq,
            "continuation" => URefSpec::Continuation,
            _ => URefSpec::Expr(ex("u_ref")?),
        };
        let u_ref_policy = match req("u_ref_policy").value.as_str() {
            "fixed" => URefPolicy::Fixed,
            "previous" => URefPolicy::Previous,
            v => {
                return Err(parse_err(
                    req("u_ref_policy").line,
                    format!("u_ref_policy must be fixed or previous, got '{v}'"),
                ))
            }
        };
        let u_hat = match get("u_hat") {
            None => None,
            Some(e) if e.value == "construct" => Some(UHatSpec::Construct),
            Some(e) => Some(UHatSpec::Expr(expr(e, "u_hat")?)),
        };
        let alpha = scalar(req("alpha"), "alpha")?;
        if alpha < 0.0 {
            return Err(parse_err(req("alpha").line, "alpha must be nonnegative"));
        }
        let gamma_factor = scalar(req("gamma_factor"), "gamma_factor")?;
        if !(gamma_factor > 1.0) {
            return Err(parse_err(
                req("gamma_factor").line,
                format!("gamma_factor must exceed 1 so the schedule increases, got {gamma_factor}"),
            ));
        }
        let cfg = ScenarioConfig {
            nsub,
            a: [[ex("a11")?, ex("a12")?], [ex("a21")?, ex("a22")?]],
            b: [ex("b1")?, ex("b2")?],
            c: [ex("c1")?, ex("c2")?],
            d: ex("d")?,
            y_a: ex("y_a")?,
            y_b: ex("y_b")?,
            y_d: ex("y_d")?,
            alpha,
            g: opt_ex("g")?,
            u_low: opt_ex("u_low")?,
            u_high: opt_ex("u_high")?,
            u_ref,
            u_ref_policy,
            gamma_start: positive(req("gamma_start"), "gamma_start")?,
            gamma_end: positive(req("gamma_end"), "gamma_end")?,
            gamma_factor,
            tol_kkt: positive(req("tol_kkt"), "tol_kkt")?,
            tol_stat: positive(req("tol_stat"), "tol_stat")?,
            tol_sign: positive(req("tol_sign"), "tol_sign")?,
            tol_b: positive(req("tol_b"), "tol_b")?,
            b_hats: boolean(req("b_hats"), "b_hats")?,
            b_random: integer(req("b_random"), "b_random")? as usize,
            b_shaped: integer(req("b_shaped"), "b_shaped")? as usize,
            u_hat,
            oracle_instances: integer(req("oracle_instances"), "oracle_instances")? as usize,
            oracle_enumerate: boolean(req("oracle_enumerate"), "oracle_enumerate")?,
            seed: integer(req("seed"), "seed")?,
            out: get("out").map(|e| PathBuf::from(&e.value)),
        };
        if cfg.gamma_end < cfg.gamma_start {
            return Err(parse_err(req("gamma_end").line, "gamma_end must be at least gamma_start"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        build_structured_mesh(self.nsub)
    }

    pub fn field(&self, mesh: &Mesh, e: &Expr, kind: FieldKind) -> NodalField {
        NodalField::from_fn(mesh, kind, |x, y| e.eval(x, y))
    }

    pub fn operator_spec(&self, mesh: &Mesh) -> Result<OperatorSpec> {
        let nodes = mesh.nodes();
        let all_const = |es: &[&Expr]| es.iter().all(|e| e.is_constant());
        let a = &self.a;
        let ae = [&a[0][0], &a[0][1], &a[1][0], &a[1][1]];
        let amat = |x: f64, y: f64| [[a[0][0].eval(x, y), a[0][1].eval(x, y)], [a[1][0].eval(x, y), a[1][1].eval(x, y)]];
        let a_coef = if all_const(&ae) {
            Coefficient::Constant(amat(0.0, 0.0))
        } else {
            Coefficient::Nodal(nodes.iter().map(|p| amat(p[0], p[1])).collect())
        };
        let vec_coef = |v: &[Expr; 2]| {
            if all_const(&[&v[0], &v[1]]) {
                Coefficient::Constant([v[0].eval(0.0, 0.0), v[1].eval(0.0, 0.0)])
            } else {
                Coefficient::Nodal(nodes.iter().map(|p| [v[0].eval(p[0], p[1]), v[1].eval(p[0], p[1])]).collect())
            }
        };
        let d = if self.d.is_constant() {
            Coefficient::Constant(self.d.eval(0.0, 0.0))
        } else {
            Coefficient::Nodal(nodes.iter().map(|p| self.d.eval(p[0], p[1])).collect())
        };
        OperatorSpec::new(a_coef, vec_coef(&self.b), vec_coef(&self.c), d)
    }

    pub fn has_box(&self) -> bool {
        self.u_low.is_some() || self.u_high.is_some()
    }

    /// Problem data with the given proximal center.
    pub fn problem_with_center(&self, u_ref: ProxCenter) -> Result<OcpProblem> {
        let mesh = self.mesh()?;
        let spec = self.operator_spec(&mesh)?;
        let u_box = if self.has_box() {
            let bound = |e: &Option<Expr>, inf: f64| match e {
                Some(e) => self.field(&mesh, e, FieldKind::Control),
                None => NodalField::constant(&mesh, FieldKind::Control, inf),
            };
            Some(ControlBox {
                lower: bound(&self.u_low, f64::NEG_INFINITY),
                upper: bound(&self.u_high, f64::INFINITY),
            })
        } else {
            None
        };
        let data = ProblemData {
            y_a: self.field(&mesh, &self.y_a, FieldKind::Primal),
            y_b: self.field(&mesh, &self.y_b, FieldKind::Primal),
            y_d: self.field(&mesh, &self.y_d, FieldKind::Primal),
            alpha: self.alpha,
            g: self.g.as_ref().map(|g| self.field(&mesh, g, FieldKind::Control)),
            u_box,
            u_ref,
        };
        OcpProblem::new(self.nsub, spec, data)
    }

    pub fn prox_center(&self) -> Result<ProxCenter> {
        Ok(match &self.u_ref {
            URefSpec::Lq => ProxCenter::Lq,
            URefSpec::Continuation => ProxCenter::Continuation,
            URefSpec::Expr(e) => ProxCenter::Field(self.field(&self.mesh()?, e, FieldKind::Control)),
        })
    }

    pub fn problem(&self) -> Result<OcpProblem> {
        self.problem_with_center(self.prox_center()?)
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::geometric(self.gamma_start, self.gamma_end, self.gamma_factor)
    }

    pub fn path_options(&self) -> Result<PathOptions> {
        Ok(PathOptions {
            schedule: self.schedule()?,
            policy: self.u_ref_policy,
            solve: SolveOptions {
                tol: self.tol_kkt,
                ..SolveOptions::default()
            },
            ..PathOptions::default()
        })
    }

    pub fn tolerances(&self, problem: &OcpProblem) -> Tolerances {
        Tolerances {
            stat: self.tol_stat,
            sign: self.tol_sign,
            b: self.tol_b,
            ..Tolerances::for_problem(problem)
        }
    }

    pub fn sampling(&self) -> DirectionSampling {
        DirectionSampling {
            hats: self.b_hats,
            random: self.b_random,
            shaped: self.b_shaped,
            steepest: true,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_comments() {
        let c = ScenarioConfig::parse("# scenario\nnsub = 8   # small\n\nalpha = 1e-3\n").unwrap();
        assert_eq!(c.nsub, 8);
        assert_eq!(c.alpha, 1e-3);
        assert_eq!(c.seed, 42);
        assert_eq!(c.u_ref, URefSpec::Continuation);
        assert!(c.g.is_none());
    }

    #[test]
    fn fail_closed() {
        let bad = [
            "nsub = 8\nfoo = 1",
            "nsub = 8\nnsub = 9",
            "nsub",
            "gamma_factor = 0.5",
            "alpha = x",
            "tol_stat = 0",
            "u_ref_policy = sometimes",
            "nsub = 1",
            "y_a = x^2",
        ];
        for text in bad {
            assert!(matches!(ScenarioConfig::parse(text), Err(Error::Parse { .. })), "{text:?}");
        }
    }

    #[test]
    fn parse_error_reports_line() {
        match ScenarioConfig::parse("nsub = 4\n\nbogus = 2") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
