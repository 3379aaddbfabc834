//! Information assessment. Each detection is matched against the a-priori records and
//! the match statuses feed a Bayesian network that decides between known and new.
//!
//! Known-object lookups go through the query language so that the same texts can be
//! replayed against a snapshot from the command line.

mod represent;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bayes::{posterior, BayesError, Evidence, MissionNets};
use crate::config::MissionConfig;
use crate::graphstore::{BatchError, Store, ThingId, Value, A_PRIORI_ORIGIN};
use crate::perception::{Bounds, Category};
use crate::query::{execute_read, parse_query, Operand, QueryError, ResultSet};
use crate::Timestamp;

pub use represent::{apply_update, build_update, represent_assessment, Applied};

/// One processed object from a detection event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub obj_name: String,
    pub position: [f64; 3],
    pub height: f64,
    pub width: f64,
    pub obj_cl: f64,
    pub position_cl: f64,
    pub size_cl: f64,
    pub timestamp: Timestamp,
    pub area: String,
    pub source_agent: String,
    pub event_id: String,
}

impl DetectionRecord {
    pub fn validate(&self, bounds: &Bounds) -> Result<(), AssessError> {
        let bad = |reason: &str| {
            Err(AssessError::InvalidDetection {
                obj_name: self.obj_name.clone(),
                reason: reason.to_string(),
            })
        };
        for cl in [self.obj_cl, self.position_cl, self.size_cl] {
            if !(0.0..=1.0).contains(&cl) {
                return bad("confidence level outside [0, 1]");
            }
        }
        if !(self.height > 0.0 && self.width > 0.0) {
            return bad("height and width must be positive");
        }
        if !self.position.iter().all(|c| c.is_finite()) || !bounds.contains(self.position[0], self.position[1]) {
            return bad("position outside the scenario bounds");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssessError {
    #[error("no general-class document for label `{0}`")]
    UnknownClass(String),
    #[error("detection `{obj_name}` is invalid: {reason}")]
    InvalidDetection { obj_name: String, reason: String },
    #[error("records from events `{0}` and `{1}` cannot be assessed together")]
    MixedEvents(String, String),
    #[error("no record for identity `{identity}` from `{origin}`")]
    UnknownIdentity { identity: String, origin: String },
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("update rejected by the store: {0}")]
    Store(#[from] BatchError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchState {
    Match,
    NoMatch,
}

impl MatchState {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchState::Match => "match",
            MatchState::NoMatch => "no_match",
        }
    }

    fn from_bool(b: bool) -> Self {
        if b {
            MatchState::Match
        } else {
            MatchState::NoMatch
        }
    }
}

impl fmt::Display for MatchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub candidate: Option<ThingId>,
    pub candidate_identity: Option<String>,
    pub object_match: MatchState,
    pub position_match: MatchState,
    pub size_match: MatchState,
    /// Distance in the xy-plane to the nearest known record of the class, if any.
    pub distance_to_assigned: Option<f64>,
}

impl MatchReport {
    fn none() -> Self {
        MatchReport {
            candidate: None,
            candidate_identity: None,
            object_match: MatchState::NoMatch,
            position_match: MatchState::NoMatch,
            size_match: MatchState::NoMatch,
            distance_to_assigned: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazardAssessment {
    pub is_hazard: bool,
    pub probability: f64,
    pub weapon_present: bool,
    pub person_present: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub obj_name: String,
    pub identity: String,
    /// `a_priori` for known objects, otherwise the agent that created the identity.
    pub origin_agent: String,
    /// Name of the general-class document the identity is described by.
    pub general_class: String,
    pub category: Category,
    /// P(known) from the identity network.
    pub p_known: f64,
    /// Probability of the decision taken: P(known) when known, P(new) otherwise.
    pub posterior: f64,
    pub is_known: bool,
    pub hazard: Option<HazardAssessment>,
    /// `known`, `new`, `hazard` or `hazard_component`.
    pub status: String,
    pub report: MatchReport,
    pub evidence: Evidence,
}

impl AssessmentResult {
    pub fn is_hazard(&self) -> bool {
        self.hazard.as_ref().is_some_and(|h| h.is_hazard)
    }
}

/// Class facts taken from the general-class document for a detector label.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassInfo {
    pub document: ThingId,
    pub general_class: String,
    pub category: Category,
}

fn run(store: &Store, text: &str) -> Result<ResultSet, QueryError> {
    execute_read(store, &parse_query(text)?)
}

fn lit(s: &str) -> String {
    Operand::Str(s.to_string()).to_string()
}

fn num(x: f64) -> String {
    Operand::Num(x).to_string()
}

/// Query text for the general-class document of a detector label.
pub fn class_document_query(label: &str) -> String {
    format!(
        "match $d isa general_class_document, has obj_class {}, has class_name $c, has category $k; fetch $d, $c, $k;",
        lit(label)
    )
}

/// Query text for every a-priori record of a class, with its position.
pub fn known_instances_query(label: &str) -> String {
    format!(
        "match $k isa artifact_model, has obj_class {}, has known_object true, has identity_name $n, has pos_x $x, has pos_y $y; fetch $k, $n, $x, $y;",
        lit(label)
    )
}

/// Query text for a-priori records of a class inside the square of half-side `tol`
/// around `(x, y)`, with their recorded size.
pub fn nearby_known_query(label: &str, x: f64, y: f64, tol: f64) -> String {
    format!(
        "match $k isa artifact_model, has obj_class {}, has known_object true, has identity_name $n, \
         has pos_x [{}, {}], has pos_y [{}, {}], has pos_x $x, has pos_y $y; \
         $r (bearer: $k, quality: $q) isa quality_relation; \
         $q isa size_quality, has height $h, has width $w; \
         fetch $k, $n, $x, $y, $h, $w;",
        lit(label),
        num(x - tol),
        num(x + tol),
        num(y - tol),
        num(y + tol)
    )
}

fn f(cell: &crate::query::Cell) -> f64 {
    cell.value().and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn s(cell: &crate::query::Cell) -> String {
    cell.value().and_then(Value::as_str).unwrap_or_default().to_string()
}

pub fn class_info(store: &Store, label: &str) -> Result<ClassInfo, AssessError> {
    let rs = run(store, &class_document_query(label))?;
    let row = rs.rows.first().ok_or_else(|| AssessError::UnknownClass(label.to_string()))?;
    let category = Category::parse(&s(&row[2])).ok_or_else(|| AssessError::UnknownClass(label.to_string()))?;
    Ok(ClassInfo {
        document: row[0].thing().expect("thing column"),
        general_class: s(&row[1]),
        category,
    })
}

#[derive(Clone, Debug)]
struct Candidate {
    id: ThingId,
    identity: String,
    distance: f64,
    height: f64,
    width: f64,
}

fn xy_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn candidates(store: &Store, det: &DetectionRecord, tol: f64) -> Result<Vec<Candidate>, AssessError> {
    let [x, y, _] = det.position;
    let rs = run(store, &nearby_known_query(&det.obj_name, x, y, tol))?;
    let mut out: Vec<Candidate> = rs
        .rows
        .iter()
        .map(|r| Candidate {
            id: r[0].thing().expect("thing column"),
            identity: s(&r[1]),
            distance: xy_distance([x, y], [f(&r[2]), f(&r[3])]),
            height: f(&r[4]),
            width: f(&r[5]),
        })
        .filter(|c| c.distance <= tol)
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    out.dedup_by_key(|c| c.id);
    Ok(out)
}

fn within(observed: f64, recorded: f64, tol: f64) -> bool {
    (observed - recorded).abs() <= tol * recorded
}

fn report_for(det: &DetectionRecord, chosen: Option<&Candidate>, others: &[(ThingId, String, f64)], tol: f64) -> MatchReport {
    match chosen {
        Some(c) => MatchReport {
            candidate: Some(c.id),
            candidate_identity: Some(c.identity.clone()),
            object_match: MatchState::Match,
            position_match: MatchState::Match,
            size_match: MatchState::from_bool(within(det.height, c.height, tol) && within(det.width, c.width, tol)),
            distance_to_assigned: Some(c.distance),
        },
        None if others.is_empty() => MatchReport::none(),
        None => MatchReport {
            candidate: None,
            candidate_identity: None,
            object_match: MatchState::Match,
            position_match: MatchState::NoMatch,
            size_match: MatchState::NoMatch,
            distance_to_assigned: others.iter().map(|o| o.2).min_by(f64::total_cmp),
        },
    }
}

/// Matches each record of one event against the a-priori records, one known record
/// per detection, closest pairs first.
fn match_event(store: &Store, dets: &[DetectionRecord], config: &MissionConfig) -> Result<Vec<MatchReport>, AssessError> {
    let tol = config.matching.position_tolerance;
    let mut pairs = Vec::new();
    let mut all = Vec::with_capacity(dets.len());
    for (i, det) in dets.iter().enumerate() {
        for c in candidates(store, det, tol)? {
            pairs.push((i, c));
        }
        let rs = run(store, &known_instances_query(&det.obj_name))?;
        let [x, y, _] = det.position;
        all.push(
            rs.rows
                .iter()
                .map(|r| (r[0].thing().expect("thing column"), s(&r[1]), xy_distance([x, y], [f(&r[2]), f(&r[3])])))
                .collect::<Vec<_>>(),
        );
    }
    pairs.sort_by(|a, b| a.1.distance.total_cmp(&b.1.distance).then(a.0.cmp(&b.0)).then(a.1.id.cmp(&b.1.id)));
    let mut chosen: BTreeMap<usize, Candidate> = BTreeMap::new();
    let mut claimed = BTreeSet::new();
    for (i, c) in pairs {
        if !chosen.contains_key(&i) && !claimed.contains(&c.id) {
            claimed.insert(c.id);
            chosen.insert(i, c);
        }
    }
    Ok(dets
        .iter()
        .enumerate()
        .map(|(i, det)| {
            let free: Vec<_> = all[i].iter().filter(|o| !claimed.contains(&o.0)).cloned().collect();
            report_for(det, chosen.get(&i), &free, config.matching.size_tolerance)
        })
        .collect())
}

/// Matches a single detection against the a-priori records.
pub fn match_identity(store: &Store, det: &DetectionRecord, config: &MissionConfig) -> Result<MatchReport, AssessError> {
    Ok(match_event(store, std::slice::from_ref(det), config)?.remove(0))
}

/// Evidence for the identity network. Attribute matches are forced to `no_match` when
/// the class itself did not match.
pub fn compile_evidence(report: &MatchReport, det: &DetectionRecord, config: &MissionConfig) -> Evidence {
    let class_ok = report.object_match == MatchState::Match;
    let gate = |m: MatchState| if class_ok { m } else { MatchState::NoMatch };
    let level = |cl: f64| config.confidence.level(cl).as_str().to_string();
    Evidence::from([
        ("object_match".into(), report.object_match.as_str().into()),
        ("position_match".into(), gate(report.position_match).as_str().into()),
        ("size_match".into(), gate(report.size_match).as_str().into()),
        ("obj_CL_level".into(), level(det.obj_cl)),
        ("position_CL_level".into(), level(det.position_cl)),
        ("size_CL_level".into(), level(det.size_cl)),
    ])
}

/// P(known) under the identity network.
pub fn identity_probability(nets: &MissionNets, evidence: &Evidence) -> Result<f64, AssessError> {
    Ok(posterior(&nets.identity, "object_identity", evidence)?.p("known"))
}

/// P(hazard = true) for a new object given the co-occurrence flags.
pub fn hazard_probability(nets: &MissionNets, weapon_present: bool, person_present: bool) -> Result<f64, AssessError> {
    let evidence = Evidence::from([
        ("object_identity".into(), "new".into()),
        ("weapon_present".into(), weapon_present.to_string()),
        ("person_present".into(), person_present.to_string()),
    ]);
    Ok(posterior(&nets.hazard, "hazard", &evidence)?.p("true"))
}

/// Number of identities `<prefix><n>` this agent has already created.
fn issued(store: &Store, agent: &str, prefix: &str) -> Result<usize, AssessError> {
    let rs = run(
        store,
        &format!(
            "match $k isa artifact_model, has origin_agent {}, has identity_name $n; fetch $n;",
            lit(agent)
        ),
    )?;
    Ok(rs
        .rows
        .iter()
        .map(|r| s(&r[0]))
        .filter(|n| n.strip_prefix(prefix).is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())))
        .count())
}

pub const HAZARD_PERSON_PREFIX: &str = "hazard_related_person";

/// Assesses all records of one detection event.
///
/// New identities are numbered per agent from what the store already holds, so the
/// results must be represented before the next event is assessed.
pub fn assess_object(
    store: &Store,
    dets: &[DetectionRecord],
    nets: &MissionNets,
    config: &MissionConfig,
) -> Result<Vec<AssessmentResult>, AssessError> {
    let Some(first) = dets.first() else { return Ok(Vec::new()) };
    if let Some(other) = dets.iter().find(|d| d.event_id != first.event_id) {
        return Err(AssessError::MixedEvents(first.event_id.clone(), other.event_id.clone()));
    }
    let agent = first.source_agent.as_str();
    let classes = dets
        .iter()
        .map(|d| class_info(store, &d.obj_name))
        .collect::<Result<Vec<_>, _>>()?;
    let reports = match_event(store, dets, config)?;

    let mut results = Vec::with_capacity(dets.len());
    for ((det, class), report) in dets.iter().zip(&classes).zip(reports) {
        let evidence = compile_evidence(&report, det, config);
        let p_known = identity_probability(nets, &evidence)?;
        let is_known = p_known > config.thresholds.known && report.candidate.is_some();
        results.push(AssessmentResult {
            obj_name: det.obj_name.clone(),
            identity: if is_known { report.candidate_identity.clone().unwrap_or_default() } else { String::new() },
            origin_agent: if is_known { A_PRIORI_ORIGIN.into() } else { agent.to_string() },
            general_class: class.general_class.clone(),
            category: class.category,
            p_known,
            posterior: if is_known { p_known } else { 1.0 - p_known },
            is_known,
            hazard: None,
            status: if is_known { "known".into() } else { "new".into() },
            report,
            evidence,
        });
    }

    let weapon_present = classes.iter().any(|c| c.category == Category::Weapon);
    let person_present = classes.iter().any(|c| c.category == Category::Person);
    for r in results.iter_mut().filter(|r| !r.is_known && r.category == Category::Platform) {
        let probability = hazard_probability(nets, weapon_present, person_present)?;
        let is_hazard = probability >= config.thresholds.hazard;
        if is_hazard {
            r.status = "hazard".into();
        }
        r.hazard = Some(HazardAssessment {
            is_hazard,
            probability,
            weapon_present,
            person_present,
        });
    }
    let hazard_event = results.iter().any(AssessmentResult::is_hazard);

    let mut next: BTreeMap<String, usize> = BTreeMap::new();
    for r in results.iter_mut().filter(|r| !r.is_known) {
        let prefix = if hazard_event && r.category == Category::Person {
            HAZARD_PERSON_PREFIX.to_string()
        } else {
            r.general_class.clone()
        };
        if hazard_event && r.category != Category::Platform {
            r.status = "hazard_component".into();
        }
        let n = match next.get_mut(&prefix) {
            Some(n) => n,
            None => next.entry(prefix.clone()).or_insert(issued(store, agent, &prefix)?),
        };
        *n += 1;
        r.identity = format!("{prefix}{n}");
    }
    Ok(results)
}
