//! Built-in case studies and the JSON system-description format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::resilience::LinearSystem;

/// A named set of lost actuators, by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedSplit {
    pub name: String,
    pub lost: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: LinearSystem,
    pub default_splits: Vec<NamedSplit>,
    pub default_x0: Vector,
    pub default_target: Vector,
    pub notes: String,
}

/// On-disk form. Matrices are row-major: `A[i]` is row `i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B_bar")]
    pub b_bar: Vec<Vec<f64>>,
    #[serde(default)]
    pub actuator_labels: Option<Vec<String>>,
    #[serde(default)]
    pub state_labels: Option<Vec<String>>,
    #[serde(default)]
    pub units: Option<Vec<String>>,
    #[serde(default)]
    pub default_splits: Vec<NamedSplit>,
    #[serde(default)]
    pub default_x0: Option<Vec<f64>>,
    #[serde(default)]
    pub default_target: Option<Vec<f64>>,
    #[serde(default)]
    pub notes: String,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::Dimension(format!("{what} has no rows")));
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!("{what} has ragged rows")));
    }
    Ok(Matrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;
    fn try_from(f: ScenarioFile) -> Result<Self> {
        let a = rows_to_matrix(&f.a, "A")?;
        let b = rows_to_matrix(&f.b_bar, "B_bar")?;
        let n = a.nrows();
        let k = b.ncols();
        let system = LinearSystem::with_labels(
            a,
            b,
            f.actuator_labels
                .unwrap_or_else(|| (1..=k).map(|i| format!("u{i}")).collect()),
            f.state_labels
                .unwrap_or_else(|| (1..=n).map(|i| format!("x{i}")).collect()),
            f.units.unwrap_or_else(|| vec![String::new(); n]),
        )?;
        let vec_or_zero = |v: Option<Vec<f64>>, what: &str| -> Result<Vector> {
            match v {
                None => Ok(Vector::zeros(n)),
                Some(v) if v.len() == n => Ok(Vector::from_vec(v)),
                Some(v) => Err(Error::Dimension(format!(
                    "{what} has length {}, state dimension is {n}",
                    v.len()
                ))),
            }
        };
        let scenario = Scenario {
            name: f.name,
            default_x0: vec_or_zero(f.default_x0, "default_x0")?,
            default_target: vec_or_zero(f.default_target, "default_target")?,
            default_splits: f.default_splits,
            notes: f.notes,
            system,
        };
        for split in &scenario.default_splits {
            scenario.resolve_lost(&split.lost)?;
        }
        Ok(scenario)
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            name: s.name.clone(),
            a: matrix_to_rows(s.system.a()),
            b_bar: matrix_to_rows(s.system.b_bar()),
            actuator_labels: Some(s.system.actuator_labels().to_vec()),
            state_labels: Some(s.system.state_labels().to_vec()),
            units: Some(s.system.state_units().to_vec()),
            default_splits: s.default_splits.clone(),
            default_x0: Some(s.default_x0.iter().copied().collect()),
            default_target: Some(s.default_target.iter().copied().collect()),
            notes: s.notes.clone(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ScenarioFile = serde_json::from_str(text)?;
        Scenario::try_from(f)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScenarioFile::from(self))?)
    }

    /// Maps labels or 1-based indices to 0-based actuator indices.
    pub fn resolve_lost(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens.iter().map(|t| self.system.actuator_index(t)).collect()
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Linearized ADMIRE fighter model, inputs scaled to `[-1, 1]`.
pub fn admire() -> Scenario {
    #[rustfmt::skip]
    let a = Matrix::from_row_slice(9, 9, &[
        -0.02, -4.65,  0.37,  0.0,  -0.3,   0.0,  0.0, -9.81, 0.0,
         0.0,  -0.78,  0.01,  0.0,   0.97,  0.0,  0.0,  0.0,  0.0,
         0.0,   0.0,  -0.19,  0.12,  0.0,  -0.98, 0.0,  0.0,  0.1,
         0.0,   0.0, -15.47, -1.5,   0.0,   0.54, 0.0,  0.0,  0.0,
         0.0,   4.18, -0.01,  0.0,  -0.78,  0.0,  0.0,  0.0,  0.0,
         0.0,   0.0,   0.95, -0.09,  0.0,  -0.34, 0.0,  0.0,  0.0,
         0.0,   0.0,   0.0,   0.0,   0.0,   1.01, 0.0,  0.0,  0.0,
         0.0,   0.0,   0.0,   0.0,   1.0,   0.0,  0.0,  0.0,  0.0,
         0.0,   0.0,   0.0,   1.0,   0.0,   0.12, 0.0,  0.0,  0.0,
    ]);
    // One row per actuator, i.e. the transpose of B̄.
    #[rustfmt::skip]
    let b_t = Matrix::from_row_slice(10, 9, &[
        -0.62,  0.0,   0.0,   0.37,  0.67, -0.19, 0.0, 0.0, 0.0,
        -0.62,  0.0,   0.0,  -0.37,  0.67,  0.19, 0.0, 0.0, 0.0,
        -0.4,  -0.02,  0.0,  -2.27, -0.55, -0.1,  0.0, 0.0, 0.0,
        -0.62, -0.04,  0.01, -1.96, -0.88, -0.22, 0.0, 0.0, 0.0,
        -0.62, -0.04, -0.01,  1.96, -0.88,  0.22, 0.0, 0.0, 0.0,
        -0.4,  -0.02,  0.0,   2.27, -0.55,  0.1,  0.0, 0.0, 0.0,
        -0.16,  0.0,   0.02,  1.59,  0.0,  -0.96, 0.0, 0.0, 0.0,
         0.08,  0.0,   0.0,   0.0,  -0.02,  0.0,  0.0, 0.0, 0.0,
        -0.53,  0.0,   0.11, -0.64,  0.01, -5.34, 0.0, 0.0, 0.0,
        -1.78, -0.11,  0.0,   0.0,  -6.63,  0.0,  0.0, 0.0, 0.0,
    ]);
    let actuators = labels(&[
        "right_canard",
        "left_canard",
        "right_outboard_elevon",
        "right_inboard_elevon",
        "left_inboard_elevon",
        "left_outboard_elevon",
        "rudder",
        "leading_edge_flaps",
        "yaw_thrust_vectoring",
        "pitch_thrust_vectoring",
    ]);
    let states = labels(&[
        "velocity",
        "angle_of_attack",
        "sideslip",
        "roll_rate",
        "pitch_rate",
        "yaw_rate",
        "heading",
        "pitch_angle",
        "roll_angle",
    ]);
    let units = labels(&["m/s", "rad", "rad", "rad/s", "rad/s", "rad/s", "rad", "rad", "rad"]);
    let system = LinearSystem::with_labels(a, b_t.transpose(), actuators.clone(), states, units)
        .expect("built-in ADMIRE data is consistent");
    Scenario {
        name: "admire".into(),
        default_splits: actuators
            .iter()
            .map(|l| NamedSplit {
                name: format!("lost_{l}"),
                lost: vec![l.clone()],
            })
            .collect(),
        default_x0: Vector::zeros(9),
        default_target: Vector::zeros(9),
        notes: "ADMIRE fighter jet, linearized at Mach 0.3 and 2000 m; matrices at two-decimal precision".into(),
        system,
    }
}

/// Physical constants of the three-room temperature model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureConstants {
    /// Wall area between rooms, m².
    pub wall_area: f64,
    /// Air mass times specific heat, J/K.
    pub heat_capacity: f64,
    /// Heat transfer coefficients ground–room 1, 1–2, 2–3, 3–ground, W/K.
    pub u_g1: f64,
    pub u_12: f64,
    pub u_23: f64,
    pub u_3g: f64,
    /// Peak powers of solar/loss, door/window and central heat/AC, W.
    pub q_sl: f64,
    pub q_dw: f64,
    pub q_hac: f64,
}

impl Default for TemperatureConstants {
    fn default() -> Self {
        TemperatureConstants {
            wall_area: 12.0,
            heat_capacity: 42186.0,
            u_g1: 6.27,
            u_12: 5.08,
            u_23: 5.41,
            u_3g: 6.27,
            q_sl: 200.0,
            q_dw: 300.0,
            q_hac: 350.0,
        }
    }
}

/// Row of three rooms with per-room solar/loss and door/window inputs and a
/// shared heater/AC; states are deviations from the target temperature.
pub fn temperature_with(k: &TemperatureConstants) -> Scenario {
    let s = k.wall_area / k.heat_capacity;
    #[rustfmt::skip]
    let a = Matrix::from_row_slice(3, 3, &[
        -(k.u_g1 + k.u_12), k.u_12,              0.0,
        k.u_12,             -(k.u_12 + k.u_23),  k.u_23,
        0.0,                k.u_23,              -(k.u_23 + k.u_3g),
    ]) * s;
    let mut b = Matrix::zeros(3, 7);
    for i in 0..3 {
        b[(i, i)] = k.q_sl;
        b[(i, 3 + i)] = k.q_dw;
        b[(i, 6)] = k.q_hac;
    }
    let b = b / k.heat_capacity;
    let actuators = labels(&["u_Sl_1", "u_Sl_2", "u_Sl_3", "u_dw_1", "u_dw_2", "u_dw_3", "u_hAC"]);
    let system = LinearSystem::with_labels(
        a,
        b,
        actuators,
        labels(&["room_1", "room_2", "room_3"]),
        labels(&["°C", "°C", "°C"]),
    )
    .expect("temperature model is consistent");
    Scenario {
        name: "temperature".into(),
        default_splits: vec![
            NamedSplit {
                name: "worker_opens_room_1".into(),
                lost: vec!["u_dw_1".into()],
            },
            NamedSplit {
                name: "hijacked_heat_ac".into(),
                lost: vec!["u_hAC".into()],
            },
        ],
        default_x0: Vector::from_vec(vec![0.8, 0.7, 0.9]),
        default_target: Vector::zeros(3),
        notes: "three adjoining rooms, one floor; states are temperature offsets from the target".into(),
        system,
    }
}

pub fn temperature() -> Scenario {
    temperature_with(&TemperatureConstants::default())
}

/// `ẍ = u₁ + ½u₂`: two actuators acting on the same channel.
pub fn double_integrator() -> Scenario {
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.5]);
    let system = LinearSystem::with_labels(
        a,
        b,
        labels(&["main", "trim"]),
        labels(&["position", "velocity"]),
        labels(&["m", "m/s"]),
    )
    .expect("double integrator is consistent");
    Scenario {
        name: "double_integrator".into(),
        default_splits: vec![NamedSplit {
            name: "lost_trim".into(),
            lost: vec!["trim".into()],
        }],
        default_x0: Vector::from_vec(vec![1.0, 0.0]),
        default_target: Vector::zeros(2),
        notes: "synthetic test system".into(),
        system,
    }
}

/// Named scenarios: the built-ins plus anything registered at run time.
#[derive(Clone, Debug)]
pub struct ScenarioLibrary {
    entries: BTreeMap<String, Scenario>,
}

impl Default for ScenarioLibrary {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        for s in [admire(), temperature(), double_integrator()] {
            entries.insert(s.name.clone(), s);
        }
        ScenarioLibrary { entries }
    }
}

impl ScenarioLibrary {
    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<Scenario> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownScenario {
                name: name.to_string(),
                available: self.names(),
            })
    }

    /// Adds or replaces a scenario.
    pub fn register(&mut self, scenario: Scenario) {
        self.entries.insert(scenario.name.clone(), scenario);
    }
}

pub fn load_scenario(name: &str) -> Result<Scenario> {
    ScenarioLibrary::default().get(name)
}

pub fn list_scenarios() -> Vec<String> {
    ScenarioLibrary::default().names()
}
