//! Fixture models and helpers shared by the integration tests.
#![allow(dead_code)]

use msa_core::model::{parse_model, ManipulatorModel};
use msa_core::oracle::BeamProperties;
use nalgebra::{Matrix3, Matrix6, Vector3};
use serde_json::{json, Value};

pub const E: f64 = 200e9;
pub const G: f64 = 80e9;

pub fn steel() -> Value {
    json!({"E": E, "G": G})
}

/// Solid circular section of diameter `d`.
pub fn round(d: f64) -> Value {
    let i = std::f64::consts::PI * d.powi(4) / 64.0;
    json!({"A": std::f64::consts::PI * d * d / 4.0, "Iy": i, "Iz": i, "J": 2.0 * i})
}

/// Solid `b × h` rectangle; `h` runs along the local z axis.
pub fn rect(b: f64, h: f64) -> Value {
    let (long, short) = (b.max(h), b.min(h));
    let j = long * short.powi(3) * (1.0 / 3.0 - 0.21 * short / long * (1.0 - short.powi(4) / (12.0 * long.powi(4))));
    json!({"A": b * h, "Iy": b * h.powi(3) / 12.0, "Iz": h * b.powi(3) / 12.0, "J": j})
}

pub fn props(section: &Value) -> BeamProperties {
    BeamProperties {
        youngs_modulus: E,
        shear_modulus: G,
        area: section["A"].as_f64().unwrap(),
        iy: section["Iy"].as_f64().unwrap(),
        iz: section["Iz"].as_f64().unwrap(),
        torsion: section["J"].as_f64().unwrap(),
    }
}

pub fn node(id: &str, p: [f64; 3]) -> Value {
    json!({"id": id, "position": p})
}

pub fn beam(id: &str, a: &str, b: &str, section: Value) -> Value {
    json!({"id": id, "type": "beam", "nodes": [a, b], "material": steel(), "section": section})
}

pub fn beam_with_hint(id: &str, a: &str, b: &str, section: Value, hint: [f64; 3]) -> Value {
    let mut l = beam(id, a, b, section);
    l["orientation_hint"] = json!(hint);
    l
}

pub fn rigid_link(id: &str, a: &str, b: &str) -> Value {
    json!({"id": id, "type": "rigid", "nodes": [a, b]})
}

pub fn model(doc: &Value) -> ManipulatorModel {
    parse_model(&doc.to_string()).unwrap_or_else(|e| panic!("fixture does not parse: {e}"))
}

pub struct Fixture {
    pub name: &'static str,
    pub doc: Value,
    /// False when some end-effector direction is rigid, so only the
    /// compliance exists.
    pub bounded: bool,
}

impl Fixture {
    pub fn model(&self) -> ManipulatorModel {
        model(&self.doc)
    }

    pub fn has_preload(&self) -> bool {
        self.model().has_preload()
    }
}

pub fn cantilever(length: f64) -> Value {
    json!({
        "msa_version": 1,
        "nodes": [node("base", [0.0, 0.0, 0.0]), node("tip", [length, 0.0, 0.0])],
        "links": [beam("arm", "base", "tip", round(0.02))],
        "supports": [{"node": "base", "type": "rigid"}],
        "end_effector": "tip"
    })
}

/// Two half-length beams welded by a rigid joint.
pub fn split_cantilever(length: f64) -> Value {
    let h = length / 2.0;
    json!({
        "msa_version": 1,
        "nodes": [
            node("base", [0.0, 0.0, 0.0]), node("m1", [h, 0.0, 0.0]),
            node("m2", [h, 0.0, 0.0]), node("tip", [length, 0.0, 0.0])
        ],
        "links": [beam("a", "base", "m1", round(0.02)), beam("b", "m2", "tip", round(0.02))],
        "joints": [{"id": "weld", "type": "rigid", "nodes": ["m1", "m2"]}],
        "supports": [{"node": "base", "type": "rigid"}],
        "end_effector": "tip"
    })
}

/// Bent two-beam arm with rectangular sections.
pub fn bent_arm() -> Value {
    json!({
        "msa_version": 1,
        "nodes": [
            node("base", [0.0, 0.0, 0.0]), node("elbow_a", [0.5, 0.0, 0.0]),
            node("elbow_b", [0.5, 0.0, 0.0]), node("tip", [0.5, 0.4, 0.2])
        ],
        "links": [
            beam_with_hint("upper", "base", "elbow_a", rect(0.03, 0.05), [0.0, 0.2, 1.0]),
            beam_with_hint("fore", "elbow_b", "tip", rect(0.02, 0.04), [1.0, 0.0, 0.3])
        ],
        "joints": [{"id": "elbow", "type": "rigid", "nodes": ["elbow_a", "elbow_b"]}],
        "supports": [{"node": "base", "type": "rigid"}],
        "end_effector": "tip"
    })
}

/// Rigid crank and lever around an elastic revolute joint about z.
pub fn lever(k: f64, r: f64) -> Value {
    json!({
        "msa_version": 1,
        "nodes": [
            node("ground", [0.0, 0.0, -0.3]), node("hub_a", [0.0, 0.0, 0.0]),
            node("hub_b", [0.0, 0.0, 0.0]), node("tip", [r, 0.0, 0.0])
        ],
        "links": [rigid_link("post", "ground", "hub_a"), rigid_link("lever", "hub_b", "tip")],
        "joints": [{"id": "spring", "type": "elastic", "nodes": ["hub_a", "hub_b"],
                    "free_twists": [[0, 0, 0, 0, 0, 1]], "stiffness": [k]}],
        "supports": [{"node": "ground", "type": "rigid"}],
        "end_effector": "tip"
    })
}

/// Two identical clamped legs welded together at the end effector.
pub fn twin_legs() -> Value {
    json!({
        "msa_version": 1,
        "nodes": [
            node("a0", [0.0, 0.0, 0.0]), node("a1", [0.6, 0.1, 0.3]),
            node("b0", [0.0, 0.0, 0.0]), node("b1", [0.6, 0.1, 0.3])
        ],
        "links": [
            beam_with_hint("leg_a", "a0", "a1", rect(0.02, 0.03), [0.0, 0.0, 1.0]),
            beam_with_hint("leg_b", "b0", "b1", rect(0.02, 0.03), [0.0, 0.0, 1.0])
        ],
        "joints": [{"id": "platform", "type": "rigid", "nodes": ["a1", "b1"]}],
        "supports": [{"node": "a0", "type": "rigid"}, {"node": "b0", "type": "rigid"}],
        "end_effector": "a1"
    })
}

/// The leg of [`twin_legs`] on its own.
pub fn single_leg() -> Value {
    json!({
        "msa_version": 1,
        "nodes": [node("a0", [0.0, 0.0, 0.0]), node("a1", [0.6, 0.1, 0.3])],
        "links": [beam_with_hint("leg_a", "a0", "a1", rect(0.02, 0.03), [0.0, 0.0, 1.0])],
        "supports": [{"node": "a0", "type": "rigid"}],
        "end_effector": "a1"
    })
}

/// Three legs meeting at an apex, with rigid, spherical and spring-loaded
/// base joints.
pub fn tripod() -> Value {
    let base = |k: f64| {
        let a = 2.0 * std::f64::consts::PI * k / 3.0;
        [0.5 * a.cos(), 0.5 * a.sin(), 0.0]
    };
    let apex = [0.05, 0.0, 0.8];
    json!({
        "msa_version": 1,
        "nodes": [
            node("f1", base(0.0)), node("f2", base(1.0)), node("f3", base(2.0)),
            node("t1", apex), node("t2", apex), node("t3", apex)
        ],
        "links": [
            beam("leg1", "f1", "t1", round(0.025)),
            beam("leg2", "f2", "t2", round(0.025)),
            beam_with_hint("leg3", "f3", "t3", rect(0.02, 0.035), [1.0, 0.0, 0.0])
        ],
        "joints": [{"id": "apex", "type": "rigid", "nodes": ["t1", "t2", "t3"]}],
        "supports": [
            {"node": "f1", "type": "rigid"},
            {"node": "f2", "type": "passive", "free_twists": [[0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 0, 1]]},
            {"node": "f3", "type": "elastic", "free_twists": [[0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0]],
             "stiffness": [800.0, 50.0, 50.0, 1200.0]}
        ],
        "end_effector": "t1"
    })
}

/// Serial arm with a compliant drive, an elastic wrist and a locked actuator.
pub fn drive_chain(drive_preload: Option<f64>, wrist_preload: Option<f64>) -> Value {
    let mut drive = json!({"id": "drive", "type": "actuated", "mode": "drive_stiffness", "nodes": ["j1a", "j1b"],
                           "free_twists": [[0, 0, 0, 0, 0, 1]], "stiffness": [2.0e4]});
    if let Some(p) = drive_preload {
        drive["preload"] = json!([p]);
    }
    let mut wrist = json!({"id": "wrist", "type": "elastic", "nodes": ["j2a", "j2b"],
                           "free_twists": [[0, 0, 0, 0, 1, 0], [0.2, 0, 0, 0, 0, 1]],
                           "stiffness": [5.0e3, 0.0, 0.0, 3.0e3]});
    if let Some(p) = wrist_preload {
        wrist["preload"] = json!([p, -0.5 * p]);
    }
    json!({
        "msa_version": 1,
        "nodes": [
            node("base", [0.0, 0.0, 0.0]), node("j1a", [0.0, 0.0, 0.6]), node("j1b", [0.0, 0.0, 0.6]),
            node("j2a", [0.5, 0.0, 0.6]), node("j2b", [0.5, 0.0, 0.6]),
            node("j3a", [0.8, 0.1, 0.5]), node("j3b", [0.8, 0.1, 0.5]), node("tool", [0.9, 0.1, 0.4])
        ],
        "links": [
            beam("column", "base", "j1a", round(0.05)),
            beam_with_hint("boom", "j1b", "j2a", rect(0.03, 0.06), [0.0, 0.0, 1.0]),
            beam("forearm", "j2b", "j3a", round(0.03)),
            beam("flange", "j3b", "tool", round(0.02))
        ],
        "joints": [
            drive, wrist,
            {"id": "clamp", "type": "actuated", "mode": "locked", "nodes": ["j3a", "j3b"]}
        ],
        "supports": [{"node": "base", "type": "rigid"}],
        "end_effector": "tool"
    })
}

/// Column on a rotationally compliant footing with a side load at mid-height.
pub fn sprung_column(preload: Option<[f64; 3]>) -> Value {
    let mut footing = json!({"node": "foot", "type": "elastic",
        "free_twists": [[0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 0, 1]],
        "stiffness": [1.0e4, 0.0, 0.0, 0.0, 1.0e4, 0.0, 0.0, 0.0, 2.0e4]});
    if let Some(p) = preload {
        footing["preload"] = json!(p);
    }
    json!({
        "msa_version": 1,
        "nodes": [
            node("foot", [0.0, 0.0, 0.0]), node("mid_a", [0.0, 0.0, 0.5]),
            node("mid_b", [0.0, 0.0, 0.5]), node("top", [0.0, 0.0, 1.0])
        ],
        "links": [beam("lower", "foot", "mid_a", round(0.04)), beam("upper", "mid_b", "top", round(0.04))],
        "joints": [{"id": "splice", "type": "rigid", "nodes": ["mid_a", "mid_b"]}],
        "supports": [footing],
        "loads": [{"node": "mid_a", "wrench": [30.0, -10.0, 0.0, 0.0, 0.0, 2.0]}],
        "end_effector": "top"
    })
}

/// Two beams hinged by an unlocked passive revolute about z.
pub fn hinged_chain() -> Value {
    json!({
        "msa_version": 1,
        "nodes": [
            node("base", [0.0, 0.0, 0.0]), node("h1", [0.4, 0.0, 0.0]),
            node("h2", [0.4, 0.0, 0.0]), node("tip", [0.7, 0.3, 0.0])
        ],
        "links": [beam("a", "base", "h1", round(0.02)), beam("b", "h2", "tip", round(0.02))],
        "joints": [{"id": "hinge", "type": "passive", "nodes": ["h1", "h2"], "free_twists": [[0, 0, 0, 0, 0, 1]]}],
        "supports": [{"node": "base", "type": "rigid"}],
        "end_effector": "tip"
    })
}

/// Arm plus a pendulum that swings freely about its hinge, away from the end effector.
pub fn loose_pendulum() -> Value {
    json!({
        "msa_version": 1,
        "nodes": [
            node("base", [0.0, 0.0, 0.0]), node("tip", [1.0, 0.0, 0.0]),
            node("anchor", [0.0, 0.0, 0.0]), node("hook", [0.0, 0.0, 0.1]),
            node("pivot", [0.0, 0.0, 0.1]), node("bob", [0.0, 0.5, 0.1])
        ],
        "links": [
            beam("arm", "base", "tip", round(0.02)),
            rigid_link("post", "anchor", "hook"),
            rigid_link("pendulum", "pivot", "bob")
        ],
        "joints": [{"id": "hinge", "type": "passive", "nodes": ["hook", "pivot"], "free_twists": [[0, 0, 0, 0, 0, 1]]}],
        "supports": [{"node": "base", "type": "rigid"}, {"node": "anchor", "type": "rigid"}],
        "loads": [{"node": "bob", "wrench": [0, 0, 0, 0, 0, 0]}],
        "end_effector": "tip"
    })
}

/// The structurally sound fixtures.
pub fn fixtures() -> Vec<Fixture> {
    let f = |name, doc, bounded| Fixture { name, doc, bounded };
    vec![
        f("cantilever", cantilever(1.0), true),
        f("split cantilever", split_cantilever(1.0), true),
        f("bent arm", bent_arm(), true),
        f("lever", lever(1000.0, 0.5), false),
        f("twin legs", twin_legs(), true),
        f("tripod", tripod(), true),
        f("drive chain", drive_chain(None, None), true),
        f("preloaded drive chain", drive_chain(Some(12.0), Some(-4.0)), true),
        f("sprung column", sprung_column(None), true),
        f("preloaded sprung column", sprung_column(Some([3.0, -1.0, 0.5])), true),
    ]
}

fn rotate_twist(v: &Value, r: &Matrix3<f64>) -> Value {
    let a: Vec<f64> = v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let lin = r * Vector3::new(a[0], a[1], a[2]);
    let ang = r * Vector3::new(a[3], a[4], a[5]);
    json!([lin.x, lin.y, lin.z, ang.x, ang.y, ang.z])
}

fn rotate_point(v: &Value, r: &Matrix3<f64>) -> Value {
    let a: Vec<f64> = v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let p = r * Vector3::new(a[0], a[1], a[2]);
    json!([p.x, p.y, p.z])
}

/// The same model expressed in a frame rotated by `r` about the origin.
///
/// Beams without an orientation hint must have rotationally symmetric
/// sections, since the default hint is tied to the global axes.
pub fn rotate_doc(doc: &Value, r: &Matrix3<f64>) -> Value {
    let mut out = doc.clone();
    for n in out["nodes"].as_array_mut().unwrap() {
        n["position"] = rotate_point(&n["position"], r);
    }
    if let Some(links) = out.get_mut("links").and_then(Value::as_array_mut) {
        for l in links {
            assert_ne!(l["type"], "custom", "custom stiffness matrices are not rotated");
            if let Some(h) = l.get("orientation_hint").cloned() {
                l["orientation_hint"] = rotate_point(&h, r);
            } else if l["type"] == "beam" {
                let s = &l["section"];
                assert_eq!(s["Iy"], s["Iz"], "asymmetric section needs an orientation hint");
            }
        }
    }
    for key in ["joints", "supports"] {
        if let Some(items) = out.get_mut(key).and_then(Value::as_array_mut) {
            for item in items {
                if let Some(free) = item.get("free_twists").cloned() {
                    let rotated: Vec<Value> = free.as_array().unwrap().iter().map(|t| rotate_twist(t, r)).collect();
                    item["free_twists"] = Value::Array(rotated);
                }
            }
        }
    }
    if let Some(loads) = out.get_mut("loads").and_then(Value::as_array_mut) {
        for l in loads {
            l["wrench"] = rotate_twist(&l["wrench"], r);
        }
    }
    out
}

pub fn block_rotation(r: &Matrix3<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m
}

pub fn rel_diff(a: &Matrix6<f64>, b: &Matrix6<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Uniformly distributed unit vector.
pub fn unit_vector(rng: &mut impl rand::Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_rotation(rng: &mut impl rand::Rng) -> Matrix3<f64> {
    let axis = unit_vector(rng);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
}

fn log_uniform(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random serial chain of 2–5 beams joined by one-directional elastic
/// joints, as a model document together with its reference description.
pub fn random_chain(rng: &mut impl rand::Rng) -> (Value, msa_core::oracle::SerialChainSpec) {
    use msa_core::oracle::{ChainElement, SerialChainSpec};
    use nalgebra::Vector6;

    let links = rng.random_range(2..=5usize);
    let mut nodes = vec![node("n0", [0.0; 3])];
    let mut link_docs = Vec::new();
    let mut joints = Vec::new();
    let mut elements = Vec::new();
    let mut start = Vector3::zeros();
    let mut start_id = "n0".to_string();
    for k in 0..links {
        let dir = unit_vector(rng);
        let end = start + dir * rng.random_range(0.2..0.8);
        let hint = loop {
            let h = unit_vector(rng);
            if h.cross(&dir).norm() > 0.3 {
                break h;
            }
        };
        let section = rect(rng.random_range(0.01..0.05), rng.random_range(0.01..0.05));
        let end_id = format!("e{k}");
        nodes.push(node(&end_id, [end.x, end.y, end.z]));
        link_docs.push(beam_with_hint(
            &format!("l{k}"),
            &start_id,
            &end_id,
            section.clone(),
            [hint.x, hint.y, hint.z],
        ));
        elements.push(ChainElement::Beam {
            start,
            end,
            properties: props(&section),
            orientation_hint: Some(hint),
        });
        if k + 1 < links {
            let (free, stiffness) = match rng.random_range(0..3) {
                0 => {
                    let a = unit_vector(rng);
                    (Vector6::new(0.0, 0.0, 0.0, a.x, a.y, a.z), log_uniform(rng, 1e3, 1e5))
                }
                1 => {
                    let a = unit_vector(rng);
                    (Vector6::new(a.x, a.y, a.z, 0.0, 0.0, 0.0), log_uniform(rng, 1e5, 1e7))
                }
                _ => {
                    // helical: rotation about an axis coupled to a small advance
                    let a = unit_vector(rng);
                    let pitch = rng.random_range(-0.05..0.05);
                    (
                        Vector6::new(pitch * a.x, pitch * a.y, pitch * a.z, a.x, a.y, a.z).normalize(),
                        log_uniform(rng, 1e3, 1e5),
                    )
                }
            };
            let next_id = format!("s{k}");
            nodes.push(node(&next_id, [end.x, end.y, end.z]));
            joints.push(
                json!({"id": format!("j{k}"), "type": "elastic", "nodes": [end_id, next_id],
                               "free_twists": [free.as_slice()], "stiffness": [stiffness]}),
            );
            elements.push(ChainElement::Spring {
                point: end,
                free_twist: free,
                stiffness,
            });
            start_id = next_id;
        } else {
            start_id = end_id;
        }
        start = end;
    }
    let doc = json!({
        "msa_version": 1,
        "nodes": nodes,
        "links": link_docs,
        "joints": joints,
        "supports": [{"node": "n0", "type": "rigid"}],
        "end_effector": start_id
    });
    (
        doc,
        SerialChainSpec {
            elements,
            end_effector: start,
        },
    )
}
