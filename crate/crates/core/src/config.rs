//! Problem declaration files, `key=value` overrides, and report output with
//! fixed 17-significant-digit float formatting.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::functional::{Nonlinearity, NonlinearityKind, Problem, RadialWeight, WeightProfile};
use crate::radial::{RadialGrid, DEFAULT_CELLS, DEFAULT_QUAD_ORDER, DEFAULT_R_MAX};
use crate::testfn::plateau_kinks;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Power { r: f64 },
    Table { samples: Vec<(f64, f64)> },
    Constant { value: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    ConformalPower { exponent: f64 },
    Table { samples: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    pub quad_order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { m: DEFAULT_CELLS, r_max: DEFAULT_R_MAX, quad_order: DEFAULT_QUAD_ORDER }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub rho: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    /// Explicit `lambda`; otherwise `lambda_fraction * lambda*`.
    pub lambda: Option<f64>,
    pub lambda_fraction: f64,
    /// Sublevel radius; defaults to `omega*`.
    pub omega_bar: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { lambda: None, lambda_fraction: 0.5, omega_bar: None, max_iters: 10_000, grad_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Explicit list; otherwise `lambda* / 2^k` for `k = 1..=levels`.
    pub lambdas: Option<Vec<f64>>,
    pub levels: u32,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { lambdas: None, levels: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevSpec {
    pub starts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SobolevSpec {
    fn default() -> Self {
        Self { starts: 10, max_iters: 20_000, tol: 1e-14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaSpec {
    pub candidates: usize,
}

impl Default for ThetaSpec {
    fn default() -> Self {
        Self { candidates: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSpec {
    /// Non-radial test fields in the weak-solution check.
    pub fields: usize,
    pub samples: usize,
    /// Rotations in the energy echo of the test function.
    pub rotations: usize,
    pub echo_samples: usize,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { fields: 5, samples: 200_000, rotations: 5, echo_samples: 20_000 }
    }
}

/// A problem declaration as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dim: usize,
    pub q: f64,
    pub nonlinearity: NonlinearitySpec,
    pub weight: WeightSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub alpha_f: Option<f64>,
    #[serde(default)]
    pub test_function: Option<TestFunctionSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub sobolev: SobolevSpec,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default)]
    pub montecarlo: MonteCarloSpec,
}

/// The worked example: `N = 4`, `q = 3`, `f(u) = |u|^{-1/2} u`,
/// `alpha = ((1 - |x|^2) / 2)^4`.
pub fn example5_value() -> Value {
    serde_json::json!({
        "dim": 4,
        "q": 3.0,
        "nonlinearity": { "kind": "power", "r": 1.5 },
        "weight": { "kind": "conformal_power", "exponent": 4.0 },
        "grid": { "M": DEFAULT_CELLS, "R_max": DEFAULT_R_MAX, "quad_order": DEFAULT_QUAD_ORDER }
    })
}

pub fn read_problem_value(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read problem file {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Applies `a.b.c=value` onto a JSON tree. The value is parsed as JSON when
/// possible and kept as a string otherwise; missing objects are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::invalid(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just created")
            }
            _ => return Err(Error::invalid(format!("override path `{key}` crosses a non-object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split always yields at least one part")
}

impl ProblemSpec {
    pub fn from_value(mut value: Value, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let spec: Self =
            serde_json::from_value(value).map_err(|e| Error::invalid(format!("problem declaration: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::invalid(format!("dim must be at least 3, got {}", self.dim)));
        }
        if self.grid.m == 0 || self.grid.quad_order == 0 {
            return Err(Error::invalid("grid needs M >= 1 and quad_order >= 1"));
        }
        if !(self.solver.lambda_fraction > 0.0) {
            return Err(Error::invalid("solver.lambda_fraction must be positive"));
        }
        if self.sweep.levels == 0 && self.sweep.lambdas.is_none() {
            return Err(Error::invalid("sweep.levels must be at least 1"));
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let kind = match &self.nonlinearity {
            NonlinearitySpec::Power { r } => NonlinearityKind::Power { r: *r },
            NonlinearitySpec::Table { samples } => NonlinearityKind::Table(samples.clone()),
            NonlinearitySpec::Constant { value } => NonlinearityKind::Constant(*value),
            NonlinearitySpec::Zero => NonlinearityKind::Zero,
        };
        Nonlinearity::new(kind, self.q, self.alpha_f)
    }

    pub fn weight(&self) -> Result<RadialWeight> {
        let profile = match &self.weight {
            WeightSpec::ConformalPower { exponent } => WeightProfile::ConformalPower { exponent: *exponent },
            WeightSpec::Table { samples } => WeightProfile::Table(samples.clone()),
        };
        let witness = self.test_function.map(|t| (t.rho, t.r));
        RadialWeight::new(profile, self.dim, self.q, witness)
    }

    /// Builds the discrete problem on a grid aligned with the plateau kinks.
    pub fn build(&self) -> Result<Problem> {
        let nl = self.nonlinearity()?;
        let weight = self.weight()?;
        let w = weight.witness();
        let kinks: Vec<f64> =
            plateau_kinks(w.rho, w.r).into_iter().filter(|&k| k > 0.0 && k < self.grid.r_max).collect();
        let grid = RadialGrid::aligned(self.dim, self.grid.m, self.grid.r_max, self.grid.quad_order, &kinks)?;
        Problem::new(Arc::new(grid), nl, weight)
    }
}

/// JSON float formatting with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}
