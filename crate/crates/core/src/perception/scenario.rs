use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Explorer,
    Verifier,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Explorer => "explorer",
            Role::Verifier => "verifier",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a detector class contributes to hazard assessment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Platform,
    Weapon,
    Person,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Platform => "platform",
            Category::Weapon => "weapon",
            Category::Person => "person",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        match s {
            "platform" => Some(Category::Platform),
            "weapon" => Some(Category::Weapon),
            "person" => Some(Category::Person),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionInfo {
    pub name: String,
    pub objective: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub width: f64,
    pub height: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            width: 6.0,
            height: 2.0,
        }
    }
}

impl Bounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clock {
    #[serde(default = "default_origin")]
    pub origin: Timestamp,
    /// Metres per second along straight-line legs.
    pub speed: f64,
    /// Seconds spent processing at each waypoint before moving on.
    pub dwell: f64,
    /// Bus delivery delay in seconds.
    pub latency: f64,
    /// Verifiers stop this far short of a hazard.
    #[serde(default = "default_standoff")]
    pub verify_standoff: f64,
}

fn default_origin() -> Timestamp {
    Timestamp::from_hms(14, 49, 0, 0)
}

fn default_standoff() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensing {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_position_sigma")]
    pub position_sigma: f64,
    /// Relative size noise.
    #[serde(default = "default_size_sigma")]
    pub size_sigma: f64,
    #[serde(default = "default_cl_range")]
    pub cl_range: [f64; 2],
}

fn default_radius() -> f64 {
    0.5
}
fn default_position_sigma() -> f64 {
    0.05
}
fn default_size_sigma() -> f64 {
    0.05
}
fn default_cl_range() -> [f64; 2] {
    [0.75, 0.99]
}

impl Default for Sensing {
    fn default() -> Self {
        Sensing {
            radius: default_radius(),
            position_sigma: default_position_sigma(),
            size_sigma: default_size_sigma(),
            cl_range: default_cl_range(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub name: String,
    pub polygon: Vec<[f64; 2]>,
}

impl Area {
    /// Even-odd point-in-polygon test; points on an edge count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let pts = &self.polygon;
        let n = pts.len();
        if n < 3 {
            return false;
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let [xi, yi] = pts[i];
            let [xj, yj] = pts[j];
            if on_segment(x, y, xi, yi, xj, yj) {
                return true;
            }
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

fn on_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    if cross.abs() > 1e-12 {
        return false;
    }
    px >= ax.min(bx) - 1e-12
        && px <= ax.max(bx) + 1e-12
        && py >= ay.min(by) - 1e-12
        && py <= ay.max(by) + 1e-12
}

/// Detector label and the general class it maps to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectClass {
    pub label: String,
    pub general_class: String,
    pub category: Category,
    #[serde(default)]
    pub description: String,
}

/// Ground-truth object placed in the world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldObject {
    pub label: String,
    pub position: [f64; 3],
    pub height: f64,
    pub width: f64,
    #[serde(default)]
    pub known: bool,
    #[serde(default)]
    pub hazard: bool,
    #[serde(default)]
    pub civilian: bool,
}

/// A-priori record of a known object of interest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnownObject {
    pub identity: String,
    pub label: String,
    pub position: [f64; 3],
    pub height: f64,
    pub width: f64,
    pub area: String,
    #[serde(default)]
    pub affiliation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub name: String,
    pub position: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    pub role: Role,
    pub start: [f64; 2],
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub mission: MissionInfo,
    #[serde(default)]
    pub bounds: Bounds,
    pub clock: Clock,
    #[serde(default)]
    pub sensing: Sensing,
    #[serde(default = "default_rcc")]
    pub rcc: String,
    #[serde(default)]
    pub areas: Vec<Area>,
    #[serde(default)]
    pub classes: Vec<ObjectClass>,
    #[serde(default)]
    pub world: Vec<WorldObject>,
    #[serde(default)]
    pub a_priori: Vec<KnownObject>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
}

fn default_rcc() -> String {
    "rcc".into()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("scenario does not parse: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldIssue>),
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let issues = scenario.validate();
        if issues.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(issues))
        }
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Scenario::from_toml(&text)
    }

    pub fn class(&self, label: &str) -> Option<&ObjectClass> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn area(&self, name: &str) -> Option<&Area> {
        self.areas.iter().find(|a| a.name == name)
    }

    /// First area (in file order) containing the point.
    pub fn area_at(&self, x: f64, y: f64) -> Option<&Area> {
        self.areas.iter().find(|a| a.contains(x, y))
    }

    pub fn agent(&self, id: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn agents_with_role(&self, role: Role) -> impl Iterator<Item = &AgentSpec> {
        self.agents.iter().filter(move |a| a.role == role)
    }

    /// Checks every scenario invariant; each issue names the offending field.
    pub fn validate(&self) -> Vec<FieldIssue> {
        let mut issues = Vec::new();
        let mut bad = |path: String, message: &str| {
            issues.push(FieldIssue {
                path,
                message: message.to_string(),
            })
        };
        let b = self.bounds;
        if !(b.width > 0.0 && b.height > 0.0) {
            bad("bounds".into(), "width and height must be positive");
        }
        let c = &self.clock;
        if !(c.speed > 0.0) {
            bad("clock.speed".into(), "must be positive");
        }
        if !(c.dwell >= 0.0) {
            bad("clock.dwell".into(), "must be non-negative");
        }
        if !(c.latency >= 0.01) {
            bad("clock.latency".into(), "must be at least one 10 ms tick");
        }
        if !(c.verify_standoff >= 0.0) {
            bad("clock.verify_standoff".into(), "must be non-negative");
        }
        let s = &self.sensing;
        if !(s.radius > 0.0) {
            bad("sensing.radius".into(), "must be positive");
        }
        if !(s.position_sigma >= 0.0) {
            bad("sensing.position_sigma".into(), "must be non-negative");
        }
        if !(s.size_sigma >= 0.0) {
            bad("sensing.size_sigma".into(), "must be non-negative");
        }
        let [lo, hi] = s.cl_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            bad("sensing.cl_range".into(), "must be an ordered range within [0, 1]");
        }

        let mut names = BTreeSet::new();
        for (i, a) in self.areas.iter().enumerate() {
            if !names.insert(a.name.as_str()) {
                bad(format!("areas[{i}].name"), "duplicate area name");
            }
            if a.polygon.len() < 3 {
                bad(format!("areas[{i}].polygon"), "needs at least three vertices");
            }
        }

        let mut labels = BTreeSet::new();
        for (i, cl) in self.classes.iter().enumerate() {
            if !labels.insert(cl.label.as_str()) {
                bad(format!("classes[{i}].label"), "duplicate class label");
            }
        }

        for (i, w) in self.world.iter().enumerate() {
            if self.class(&w.label).is_none() {
                bad(format!("world[{i}].label"), "unknown class label");
            }
            if !b.contains(w.position[0], w.position[1]) {
                bad(format!("world[{i}].position"), "outside scenario bounds");
            }
            if !(w.height > 0.0 && w.width > 0.0) {
                bad(format!("world[{i}]"), "height and width must be positive");
            }
        }

        let mut identities = BTreeSet::new();
        for (i, k) in self.a_priori.iter().enumerate() {
            if !identities.insert(k.identity.as_str()) {
                bad(format!("a_priori[{i}].identity"), "duplicate identity");
            }
            if self.class(&k.label).is_none() {
                bad(format!("a_priori[{i}].label"), "unknown class label");
            }
            if !(k.height > 0.0 && k.width > 0.0) {
                bad(format!("a_priori[{i}]"), "height and width must be positive");
            }
            match self.area(&k.area) {
                None => bad(format!("a_priori[{i}].area"), "unknown area"),
                Some(area) => {
                    if !area.contains(k.position[0], k.position[1]) {
                        bad(
                            format!("a_priori[{i}].position"),
                            "assigned location is outside its area",
                        );
                    }
                }
            }
        }

        let mut ids = BTreeSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            if !ids.insert(a.id.as_str()) || a.id == self.rcc {
                bad(format!("agents[{i}].id"), "duplicate agent id");
            }
            if !b.contains(a.start[0], a.start[1]) {
                bad(format!("agents[{i}].start"), "outside scenario bounds");
            }
            for (j, wp) in a.waypoints.iter().enumerate() {
                if !b.contains(wp.position[0], wp.position[1]) {
                    bad(
                        format!("agents[{i}].waypoints[{j}].position"),
                        "outside scenario bounds",
                    );
                }
            }
        }
        issues
    }
}
