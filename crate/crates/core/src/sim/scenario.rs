use std::path::{Path as FsPath, PathBuf};

use nalgebra::{Complex, DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DisturbanceModel, MonteCarloSpec};
use crate::bounds::{build_relaxed_system, BoundMethod, RelaxedLinearSystem};
use crate::error::{invalid, Result};
use crate::governor::{BoundEvaluator, GovernorParams};
use crate::linearization::{
    ackermann_plant, brunovsky_realization, bw_norm_bound, AckermannParams, AckermannPlant, AckermannState,
    BrunovskyRealization, LinearFeedbackGains, NonlinearPlant,
};
use crate::numkit::SymMatrix;
use crate::world::{GroundTruthMap, LidarSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoleSpec {
    Real(f64),
    Complex([f64; 2]),
}

impl PoleSpec {
    pub fn value(&self) -> Complex<f64> {
        match *self {
            PoleSpec::Real(r) => Complex::new(r, 0.0),
            PoleSpec::Complex([re, im]) => Complex::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum PlantSpec {
    Ackermann(AckermannParams),
}

/// Explicit relaxed system for bound-only scenarios; `b` already includes the
/// disturbance scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystemSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

fn default_eps_e() -> f64 {
    0.05
}
fn default_dt() -> f64 {
    0.001
}
fn default_control() -> f64 {
    0.02
}
fn default_replan() -> f64 {
    0.5
}
fn default_resolution() -> f64 {
    0.25
}
fn default_metric() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}
fn default_method() -> BoundMethod {
    BoundMethod::Lyap
}

/// Declarative simulation and bound input. Units are in the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// Map file, relative to the scenario file.
    #[serde(default)]
    pub map: Option<String>,
    #[serde(default)]
    pub plant: Option<PlantSpec>,
    #[serde(default)]
    pub system: Option<LinearSystemSpec>,
    #[serde(default)]
    pub initial_state: Option<AckermannState>,
    /// Initial reordered linear state for the `bound` command; defaults to the
    /// initial plant state relative to its own output.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
    #[serde(default)]
    pub goal: Option<[f64; 2]>,
    #[serde(default)]
    pub poles: Option<Vec<PoleSpec>>,
    #[serde(default)]
    pub gains: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub k_g: f64,
    #[serde(default)]
    pub delta_w: f64,
    #[serde(default = "default_metric")]
    pub metric: [[f64; 2]; 2],
    #[serde(default = "default_eps_e")]
    pub eps_e: f64,
    #[serde(default = "default_method")]
    pub bound_method: BoundMethod,
    /// Also compute the SDP bound at every control step (slow).
    #[serde(default)]
    pub record_sdp: bool,
    #[serde(default)]
    pub lidar: LidarSpec,
    #[serde(default = "default_resolution")]
    pub grid_resolution_m: f64,
    #[serde(default)]
    pub robot_radius_m: f64,
    #[serde(default)]
    pub inflation_radius_m: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_control")]
    pub control_period_s: f64,
    #[serde(default = "default_replan")]
    pub replan_period_s: f64,
    #[serde(default)]
    pub horizon_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub disturbance: DisturbanceModel,
    /// Monte Carlo settings for the `montecarlo` command.
    #[serde(default)]
    pub montecarlo: MonteCarloSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Sets `key` (dotted path) in a JSON document; `raw` is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(invalid(format!("bad override key {key:?}")));
        }
        let obj = match cur {
            Value::Object(m) => m,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just created")
            }
            _ => return Err(invalid(format!("override {key:?} descends into a non-object"))),
        };
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one part")
}

/// Everything derived from a scenario that the bound and simulation code need.
#[derive(Debug)]
pub struct Setup {
    pub plant: Option<AckermannPlant>,
    pub realization: Option<BrunovskyRealization>,
    pub gains: Option<LinearFeedbackGains>,
    pub system: RelaxedLinearSystem,
    pub metric: SymMatrix,
}

impl Scenario {
    pub fn from_value(doc: Value, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut s: Scenario = serde_json::from_value(doc)?;
        s.base_dir = base_dir.into();
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?, ".")
    }

    /// Reads a scenario file and applies `key=value` overrides before
    /// validation.
    pub fn load(path: impl AsRef<FsPath>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for (k, v) in overrides {
            apply_override(&mut doc, k, v)?;
        }
        let dir = path.parent().map(FsPath::to_path_buf).unwrap_or_default();
        Self::from_value(doc, dir)
    }

    pub fn metric_matrix(&self) -> Result<SymMatrix> {
        let m = self.metric;
        if m[0][1] != m[1][0] {
            return Err(invalid("metric must be symmetric"));
        }
        let s = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]))?;
        if !s.is_positive_definite() {
            return Err(invalid("metric must be positive definite"));
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plant.is_some() == self.system.is_some() {
            return Err(invalid("a scenario needs exactly one of `plant` and `system`"));
        }
        if let Some(PlantSpec::Ackermann(p)) = &self.plant {
            p.validate()?;
            if self.poles.is_some() == self.gains.is_some() {
                return Err(invalid("a plant scenario needs exactly one of `poles` and `gains`"));
            }
            if !(self.delta_w > 0.0) {
                return Err(invalid("delta_w must be positive"));
            }
        }
        self.metric_matrix()?;
        if !(self.eps_e > 0.0) {
            return Err(invalid("eps_e must be positive"));
        }
        if !(self.k_g >= 0.0) {
            return Err(invalid("k_g must be non-negative"));
        }
        if !(self.dt_s > 0.0 && self.dt_s <= self.control_period_s && self.control_period_s <= self.replan_period_s) {
            return Err(invalid("need 0 < dt <= control period <= replan period"));
        }
        if self.k_g * self.control_period_s >= 1.0 {
            return Err(invalid("k_g * control period must be below 1"));
        }
        if !(self.horizon_s >= 0.0) {
            return Err(invalid("horizon must be non-negative"));
        }
        if !(self.grid_resolution_m > 0.0) || !(self.robot_radius_m >= 0.0) {
            return Err(invalid("grid resolution must be positive and robot radius non-negative"));
        }
        self.lidar.validate()?;
        self.disturbance.validate()?;
        self.montecarlo.validate()?;
        Ok(())
    }

    pub fn map_path(&self) -> Option<PathBuf> {
        self.map.as_ref().map(|m| self.base_dir.join(m))
    }

    pub fn load_map(&self) -> Result<GroundTruthMap> {
        let p = self.map_path().ok_or_else(|| invalid("scenario has no map"))?;
        GroundTruthMap::load(p)
    }

    pub fn control_steps(&self) -> usize {
        (self.control_period_s / self.dt_s).round().max(1.0) as usize
    }

    pub fn build(&self) -> Result<Setup> {
        let metric = self.metric_matrix()?;
        if let Some(sys) = &self.system {
            let mat = |rows: &Vec<Vec<f64>>, what: &str| -> Result<DMatrix<f64>> {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
                    return Err(invalid(format!("system matrix {what} is ragged or empty")));
                }
                Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
            };
            let (a, b, c) = (mat(&sys.a, "a")?, mat(&sys.b, "b")?, mat(&sys.c, "c")?);
            let metric = if c.nrows() == 2 { metric } else { SymMatrix::identity(c.nrows()) };
            let system = RelaxedLinearSystem::new(a, b, c, metric.clone())?;
            return Ok(Setup { plant: None, realization: None, gains: None, system, metric });
        }
        let Some(PlantSpec::Ackermann(params)) = &self.plant else { unreachable!("validated") };
        let plant = ackermann_plant(*params);
        plant.validate()?;
        let real = brunovsky_realization(plant.relative_degree())?;
        let gains = match (&self.poles, &self.gains) {
            (Some(p), _) => {
                let poles: Vec<Complex<f64>> = p.iter().map(PoleSpec::value).collect();
                LinearFeedbackGains::from_pole_list(&real, &poles)?
            }
            (_, Some(rows)) => {
                let n = real.state_dim();
                if rows.len() != real.input_dim() || rows.iter().any(|r| r.len() != n) {
                    return Err(invalid("gain matrix must be inputs x states"));
                }
                LinearFeedbackGains::new(DMatrix::from_row_iterator(rows.len(), n, rows.iter().flatten().copied()), &real)?
            }
            _ => unreachable!("validated"),
        };
        let system = build_relaxed_system(&real, &gains, bw_norm_bound(params), self.delta_w, metric.clone())?;
        Ok(Setup { plant: Some(plant), realization: Some(real), gains: Some(gains), system, metric })
    }

    /// Initial reordered state relative to the initial governor position.
    pub fn initial_error_state(&self, setup: &Setup) -> Result<DVector<f64>> {
        let n = setup.system.state_dim();
        if let Some(z0) = &self.z0 {
            if z0.len() != n {
                return Err(invalid(format!("z0 has {} entries, system has {n} states", z0.len())));
            }
            return Ok(DVector::from_column_slice(z0));
        }
        match (&setup.plant, &setup.realization, &self.initial_state) {
            (Some(plant), Some(real), Some(x0)) => {
                let x = x0.to_vector();
                let zt = &real.t * plant.coordinate_map(&x);
                Ok(zt - setup.system.c_bar().transpose() * plant.output(&x))
            }
            _ => Ok(DVector::zeros(n)),
        }
    }

    pub fn governor_params(&self) -> Result<GovernorParams> {
        GovernorParams::new(self.k_g, self.eps_e, self.metric_matrix()?, self.bound_method)
    }

    pub fn goal_point(&self) -> Result<Vector2<f64>> {
        let g = self.goal.ok_or_else(|| invalid("scenario has no goal"))?;
        Ok(Vector2::new(g[0], g[1]))
    }

    /// Planner inflation: the configured radius, or the ultimate-bound radius
    /// `sqrt((delta_ult + eps_E) / lambda_min(S))` plus robot radius and one
    /// grid cell for discretization.
    pub fn inflation_radius(&self, eval: &BoundEvaluator) -> Result<f64> {
        if let Some(r) = self.inflation_radius_m {
            return Ok(r);
        }
        let lmin = self.metric_matrix()?.min_eigenvalue()?;
        let ult = eval.ultimate(self.bound_method)?;
        Ok(((ult + self.eps_e) / lmin).sqrt() + self.robot_radius_m + self.grid_resolution_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{"name": "scalar", "system": {"a": [[-1]], "b": [[2]], "c": [[1]]}}"#;

    #[test]
    fn scalar_system_scenario() {
        let s = Scenario::from_json(SCALAR).unwrap();
        let setup = s.build().unwrap();
        assert_eq!(setup.system.state_dim(), 1);
        assert_eq!(s.initial_error_state(&setup).unwrap(), DVector::zeros(1));
    }

    #[test]
    fn overrides_edit_nested_keys() {
        let mut doc: Value = serde_json::from_str(SCALAR).unwrap();
        apply_override(&mut doc, "system.b", "[[3]]").unwrap();
        apply_override(&mut doc, "name", "renamed").unwrap();
        apply_override(&mut doc, "lidar.num_beams", "12").unwrap();
        assert_eq!(doc["system"]["b"][0][0], 3);
        assert_eq!(doc["name"], "renamed");
        assert_eq!(doc["lidar"]["num_beams"], 12);
        assert!(apply_override(&mut doc, "name.x", "1").is_err());
    }

    #[test]
    fn rejects_inconsistent_rates_and_fields() {
        let mut doc: Value = serde_json::from_str(SCALAR).unwrap();
        apply_override(&mut doc, "dt_s", "0.1").unwrap();
        assert!(Scenario::from_value(doc, ".").is_err());
        let mut doc: Value = serde_json::from_str(SCALAR).unwrap();
        apply_override(&mut doc, "bogus", "1").unwrap();
        assert!(Scenario::from_value(doc, ".").is_err());
    }

    #[test]
    fn pole_specs() {
        let p: Vec<PoleSpec> = serde_json::from_str("[-1, [-0.5, 2.0]]").unwrap();
        assert_eq!(p[0].value(), Complex::new(-1.0, 0.0));
        assert_eq!(p[1].value(), Complex::new(-0.5, 2.0));
    }
}
