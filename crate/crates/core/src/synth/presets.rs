//! Ready-made scenes.
//!
//! All scenes share a textured room: the first camera sits 1.2 m above the
//! floor looking along +z, with +y pointing down. People are 0.5 x 1.7 x 0.3 m
//! boxes floating 3 cm above the floor.

use nalgebra::Vector3;

use super::spec::{ClassDef, Motion, Primitive, SceneSpec, Texture};
use crate::geometry::{Point3, Pose};

pub const PERSON_CLASS: u32 = 1;
pub const BOX_CLASS: u32 = 2;
pub const WHEEL_CLASS: u32 = 3;

pub const FLOOR_Y: f64 = 1.2;
pub const PERSON_SIZE: [f64; 3] = [0.5, 1.7, 0.3];
const HOVER: f64 = 0.03;

fn tex(seed: u64, cell: f64, tint: [f64; 3]) -> Texture {
    Texture { seed, cell, tint }
}

fn fixed(name: &str, size: [f64; 3], at: [f64; 3], texture: Texture) -> Primitive {
    Primitive {
        name: name.into(),
        size: Vector3::from(size),
        texture,
        inside: false,
        code: 0,
        motion: Motion::Static {
            pose: Pose::from_translation(at[0], at[1], at[2]),
        },
        person: false,
    }
}

/// Room shell plus a few pieces of furniture.
fn room() -> Vec<Primitive> {
    let shell = Primitive {
        name: "room".into(),
        size: Vector3::new(6.0, 3.0, 8.0),
        texture: tex(11, 0.16, [1.0, 0.95, 0.85]),
        inside: true,
        code: 0,
        motion: Motion::Static {
            pose: Pose::from_translation(0.0, FLOOR_Y - 1.5, 2.0),
        },
        person: false,
    };
    vec![
        shell,
        fixed("cabinet", [1.0, 1.4, 0.6], [-1.6, FLOOR_Y - 0.7, 3.6], tex(12, 0.09, [0.8, 0.9, 1.0])),
        fixed("shelf", [0.8, 2.0, 0.4], [1.8, FLOOR_Y - 1.0, 4.2], tex(13, 0.1, [1.0, 0.85, 0.8])),
        fixed("table", [1.4, 0.75, 0.8], [0.3, FLOOR_Y - 0.375, 4.6], tex(14, 0.08, [0.9, 1.0, 0.85])),
        fixed("crate", [0.5, 0.5, 0.5], [-1.8, FLOOR_Y - 0.25, 1.8], tex(15, 0.07, [1.0, 1.0, 0.8])),
    ]
}

fn base(frames: usize) -> SceneSpec {
    SceneSpec {
        frames,
        primitives: room(),
        ..SceneSpec::default()
    }
}

/// Camera sweeping an arc of `length` meters over the whole sequence while
/// looking at a point `radius` meters ahead.
fn arc_camera(spec: &SceneSpec, radius: f64, length: f64) -> Motion {
    let duration = spec.frames as f64 / spec.fps;
    let sweep = length / radius;
    Motion::Arc {
        center: Point3::new(0.0, 0.0, radius),
        radius,
        start: -sweep / 2.0,
        rate: sweep / duration,
        look_at: Point3::new(0.0, 0.0, radius),
    }
}

/// Center height of a person box standing on the floor.
pub fn person_center_y() -> f64 {
    FLOOR_Y - HOVER - PERSON_SIZE[1] / 2.0
}

pub fn person(name: &str, instance: u32, seed: u64, motion: Motion) -> Primitive {
    Primitive {
        name: name.into(),
        size: Vector3::from(PERSON_SIZE),
        texture: tex(seed, 0.035, [0.95, 0.8, 0.7]),
        inside: false,
        code: PERSON_CLASS * 1000 + instance,
        motion,
        person: true,
    }
}

fn walking(start: [f64; 3], velocity: [f64; 3]) -> Motion {
    Motion::Linear {
        start: Pose::from_translation(start[0], start[1], start[2]),
        velocity: Vector3::from(velocity),
        angular: Vector3::zeros(),
    }
}

/// 100 frames, camera on a 1 m arc, static content only.
pub fn static_room() -> SceneSpec {
    let mut s = base(100);
    s.camera = arc_camera(&s, 2.5, 1.0);
    s
}

/// A person walking across the view at 1.5 m while the camera drifts.
pub fn walking_person() -> SceneSpec {
    let mut s = base(90);
    s.camera = arc_camera(&s, 2.5, 0.6);
    s.primitives.push(person(
        "walker",
        1,
        21,
        walking([-0.75, person_center_y(), 1.6], [0.45, 0.0, -0.1]),
    ));
    s
}

/// A person walking sideways at a constant 0.9 m/s, static camera.
pub fn constant_walker() -> SceneSpec {
    let mut s = base(40);
    s.primitives.push(person(
        "walker",
        1,
        22,
        walking([-0.6, person_center_y(), 2.2], [0.9, 0.0, 0.0]),
    ));
    s
}

/// An unlabeled-class box pushed toward the camera along the view axis.
pub fn moving_box() -> SceneSpec {
    let mut s = base(90);
    s.classes.insert(
        BOX_CLASS,
        ClassDef {
            name: "box".into(),
            prior: false,
        },
    );
    s.camera = arc_camera(&s, 2.5, 0.6);
    s.primitives.push(Primitive {
        name: "carton".into(),
        size: Vector3::new(0.9, 0.9, 0.9),
        texture: tex(31, 0.04, [0.85, 0.7, 0.5]),
        inside: false,
        code: BOX_CLASS * 1000 + 1,
        motion: walking([0.2, FLOOR_Y - HOVER - 0.45, 3.4], [0.0, 0.0, -0.6]),
        person: false,
    });
    s
}

/// A person standing still while the camera sweeps.
pub fn still_person() -> SceneSpec {
    let mut s = base(60);
    s.camera = arc_camera(&s, 2.5, 0.6);
    s.primitives.push(person(
        "sitter",
        1,
        23,
        Motion::Static {
            pose: Pose::from_translation(0.4, person_center_y(), 2.0),
        },
    ));
    s
}

/// Two people crossing in opposite directions at different depths.
pub fn crossing_people() -> SceneSpec {
    let mut s = base(60);
    s.primitives.push(person(
        "near",
        1,
        24,
        walking([-0.9, person_center_y(), 1.9], [0.8, 0.0, 0.0]),
    ));
    s.primitives.push(person(
        "far",
        2,
        25,
        walking([0.9, person_center_y(), 2.8], [-0.8, 0.0, 0.0]),
    ));
    s
}

/// A fronto-parallel disc-like panel spinning about its own center.
pub fn rotating_object() -> SceneSpec {
    let mut s = base(40);
    s.classes.insert(
        WHEEL_CLASS,
        ClassDef {
            name: "wheel".into(),
            prior: true,
        },
    );
    s.primitives.push(Primitive {
        name: "wheel".into(),
        size: Vector3::new(0.7, 0.7, 0.05),
        texture: tex(41, 0.04, [0.7, 0.9, 0.9]),
        inside: false,
        code: WHEEL_CLASS * 1000 + 1,
        motion: Motion::Linear {
            start: Pose::from_translation(0.0, -0.1, 1.8),
            velocity: Vector3::zeros(),
            angular: Vector3::new(0.0, 0.0, 90f64.to_radians()),
        },
        person: false,
    });
    s
}

pub fn by_name(name: &str) -> Option<SceneSpec> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, s)| s)
}

pub fn all() -> Vec<(&'static str, SceneSpec)> {
    vec![
        ("static_room", static_room()),
        ("walking_person", walking_person()),
        ("constant_walker", constant_walker()),
        ("moving_box", moving_box()),
        ("still_person", still_person()),
        ("crossing_people", crossing_people()),
        ("rotating_object", rotating_object()),
    ]
}
