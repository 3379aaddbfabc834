//! Scenario definition and the synthetic waypoint detector that stands in for the
//! camera pipeline.

mod scenario;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::assessment::DetectionRecord;
use crate::Timestamp;

pub use scenario::{
    AgentSpec, Area, Bounds, Category, Clock, FieldIssue, KnownObject, MissionInfo, ObjectClass,
    Role, Scenario, ScenarioError, Sensing, Waypoint, WorldObject,
};

/// Per-agent random stream. Derived from the scenario seed and the agent id so that
/// agent scheduling order never changes another agent's draws.
pub fn agent_stream(seed: u64, agent_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(agent_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// One detection event: every record shares the event id and timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorReading {
    pub event_id: String,
    pub timestamp: Timestamp,
    pub detections: Vec<DetectionRecord>,
}

/// Emits one noisy detection per world object within the sensing radius of `at`.
///
/// Draw order per object is fixed: x, y, z, height, width, obj_CL, position_CL,
/// size_CL, so a given stream always yields the same reading.
pub fn sense(
    scenario: &Scenario,
    agent_id: &str,
    at: [f64; 2],
    rng: &mut ChaCha8Rng,
    event_id: &str,
    timestamp: Timestamp,
) -> SensorReading {
    let s = &scenario.sensing;
    let b = scenario.bounds;
    let [cl_lo, cl_hi] = s.cl_range;
    let mut detections = Vec::new();
    for obj in &scenario.world {
        let dx = obj.position[0] - at[0];
        let dy = obj.position[1] - at[1];
        if (dx * dx + dy * dy).sqrt() > s.radius {
            continue;
        }
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let x = (obj.position[0] + s.position_sigma * normal()).clamp(0.0, b.width);
        let y = (obj.position[1] + s.position_sigma * normal()).clamp(0.0, b.height);
        let z = obj.position[2] + s.position_sigma * normal();
        let height = obj.height * (1.0 + s.size_sigma * normal());
        let width = obj.width * (1.0 + s.size_sigma * normal());
        let mut cl = || -> f64 { round_cl(rng.random_range(cl_lo..=cl_hi)) };
        let (obj_cl, position_cl, size_cl) = (cl(), cl(), cl());
        let area = scenario
            .area_at(x, y)
            .or_else(|| scenario.area_at(at[0], at[1]))
            .map(|a| a.name.clone())
            .unwrap_or_else(|| "unassigned".into());
        detections.push(DetectionRecord {
            obj_name: obj.label.clone(),
            position: [x, y, z],
            height: height.max(f64::MIN_POSITIVE),
            width: width.max(f64::MIN_POSITIVE),
            obj_cl,
            position_cl,
            size_cl,
            timestamp,
            area,
            source_agent: agent_id.to_string(),
            event_id: event_id.to_string(),
        });
    }
    SensorReading {
        event_id: event_id.to_string(),
        timestamp,
        detections,
    }
}

/// Detector confidences are reported to two decimals.
fn round_cl(v: f64) -> f64 {
    ((v * 100.0).round() / 100.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn fig6() -> Scenario {
        bundled::scenario("mission_fig6").unwrap()
    }

    #[test]
    fn bundled_scenario_has_two_teams_of_two() {
        let s = fig6();
        assert_eq!(s.agents.len(), 4);
        let explorers: Vec<_> = s.agents_with_role(Role::Explorer).map(|a| a.id.as_str()).collect();
        let verifiers: Vec<_> = s.agents_with_role(Role::Verifier).map(|a| a.id.as_str()).collect();
        assert_eq!(explorers, vec!["dcmdobot3", "dcmdobot4"]);
        assert_eq!(verifiers, vec!["dcmdobot1", "dcmdobot2"]);
        assert!(s.validate().is_empty());
    }

    #[test]
    fn waypoint_outside_bounds_is_rejected() {
        let mut s = fig6();
        s.agents[2].waypoints[0].position = [7.5, 1.0];
        let text = toml::to_string(&s).unwrap();
        match Scenario::from_toml(&text) {
            Err(ScenarioError::Invalid(issues)) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].path, "agents[2].waypoints[0].position");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn a_priori_outside_its_area_is_rejected() {
        let mut s = fig6();
        s.a_priori[0].position = [5.9, 0.1, 0.0];
        let issues = s.validate();
        assert!(issues.iter().any(|i| i.path == "a_priori[0].position"), "{issues:?}");
    }

    #[test]
    fn zero_noise_scenario_is_accepted_and_exact() {
        let mut s = fig6();
        s.sensing.position_sigma = 0.0;
        s.sensing.size_sigma = 0.0;
        s.sensing.cl_range = [0.9, 0.9];
        let s = Scenario::from_toml(&toml::to_string(&s).unwrap()).unwrap();
        assert_eq!(s.sensing.position_sigma, 0.0);
        let wp = s.agent("dcmdobot3").unwrap().waypoints[1].clone();
        let mut rng = agent_stream(s.seed, "dcmdobot3");
        let r = sense(&s, "dcmdobot3", wp.position, &mut rng, "e", Timestamp::default());
        assert!(!r.detections.is_empty());
        for d in &r.detections {
            let truth = s
                .world
                .iter()
                .find(|w| w.label == d.obj_name && w.position[0] == d.position[0])
                .expect("exact position");
            assert_eq!(d.position, truth.position);
            assert_eq!((d.height, d.width), (truth.height, truth.width));
            assert_eq!((d.obj_cl, d.position_cl, d.size_cl), (0.9, 0.9, 0.9));
        }
    }

    #[test]
    fn port_waypoint_sees_boat_and_two_crew() {
        let s = fig6();
        let a = s.agent("dcmdobot3").unwrap();
        let wp2 = a.waypoints.iter().find(|w| w.name == "WP2").unwrap();
        let mut rng = agent_stream(s.seed, "dcmdobot3");
        let r = sense(&s, "dcmdobot3", wp2.position, &mut rng, "e", Timestamp::default());
        let mut names: Vec<_> = r.detections.iter().map(|d| d.obj_name.as_str()).collect();
        names.sort();
        assert_eq!(names, vec!["army_maritime", "army_maritime", "boat"]);
        assert!(r.detections.iter().all(|d| d.area == "village_port"));
    }

    #[test]
    fn far_waypoint_is_empty() {
        let s = fig6();
        let mut rng = agent_stream(s.seed, "x");
        let r = sense(&s, "x", [5.95, 1.95], &mut rng, "e", Timestamp::default());
        assert!(r.detections.is_empty());
    }

    #[test]
    fn same_seed_same_stream() {
        let s = fig6();
        let wp = s.agent("dcmdobot3").unwrap().waypoints[1].position;
        let run = || {
            let mut rng = agent_stream(s.seed, "dcmdobot3");
            (0..5)
                .map(|i| sense(&s, "dcmdobot3", wp, &mut rng, &format!("e{i}"), Timestamp::default()))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        let mut other = agent_stream(s.seed, "dcmdobot4");
        let first = sense(&s, "dcmdobot3", wp, &mut other, "e0", Timestamp::default());
        assert_ne!(first, run()[0]);
    }

    #[test]
    fn position_noise_stays_inside_match_tolerance() {
        let s = fig6();
        let mut rng = agent_stream(7, "noise-check");
        let known: Vec<_> = s.world.iter().filter(|w| w.known).collect();
        let mut inside = 0usize;
        let n = 10_000;
        for i in 0..n {
            let obj = known[i % known.len()];
            let at = [obj.position[0], obj.position[1]];
            let r = sense(&s, "noise-check", at, &mut rng, "e", Timestamp::default());
            let d = r
                .detections
                .iter()
                .filter(|d| d.obj_name == obj.label)
                .min_by(|a, b| {
                    let da = (a.position[0] - at[0]).hypot(a.position[1] - at[1]);
                    let db = (b.position[0] - at[0]).hypot(b.position[1] - at[1]);
                    da.total_cmp(&db)
                })
                .expect("object in range");
            let err = ((d.position[0] - obj.position[0]).powi(2)
                + (d.position[1] - obj.position[1]).powi(2))
            .sqrt();
            if err <= 0.30 {
                inside += 1;
            }
        }
        assert!(inside as f64 / n as f64 >= 0.99, "{inside}/{n}");
    }

    #[test]
    fn point_in_polygon() {
        let a = Area {
            name: "sq".into(),
            polygon: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        };
        assert!(a.contains(0.5, 0.5));
        assert!(a.contains(1.0, 0.5));
        assert!(!a.contains(1.5, 0.5));
    }
}
