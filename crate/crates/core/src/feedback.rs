//! User-facing messages about nearby objects: count, side, speed class,
//! distance and a risk flag.

use std::fmt;

use crate::dynamic::TrackReport;
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pixel, Point3};
use crate::io::{ClassRegistry, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Front,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Front => "front",
            Side::Right => "right",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(Side::Left),
            "front" => Some(Side::Front),
            "right" => Some(Side::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedClass {
    Low,
    High,
}

impl SpeedClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeedClass::Low => "low",
            SpeedClass::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackConfig {
    /// Half-width of the "front" sector, degrees. The boundary is front.
    pub front_half_angle_deg: f64,
    /// Speeds strictly above this are "high", m/s.
    pub high_speed: f64,
    /// Risk needs the object strictly nearer than this, meters.
    pub risk_distance: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            front_half_angle_deg: 15.0,
            high_speed: 0.8,
            risk_distance: 2.0,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.front_half_angle_deg > 0.0 && self.front_half_angle_deg < 90.0 && self.high_speed > 0.0 && self.risk_distance > 0.0) {
            return Err(Error::Config(format!("invalid feedback config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMessage {
    pub count: u32,
    pub class_name: String,
    pub side: Side,
    /// Absent for static and non-prior objects.
    pub speed_class: Option<SpeedClass>,
    pub distance: f64,
    pub risk: bool,
    pub text: String,
}

pub fn side_of(bearing_deg: f64, cfg: &FeedbackConfig) -> Side {
    if bearing_deg < -cfg.front_half_angle_deg {
        Side::Left
    } else if bearing_deg > cfg.front_half_angle_deg {
        Side::Right
    } else {
        Side::Front
    }
}

pub fn speed_class(speed: f64, cfg: &FeedbackConfig) -> SpeedClass {
    if speed > cfg.high_speed {
        SpeedClass::High
    } else {
        SpeedClass::Low
    }
}

pub fn risk_flag(r: &TrackReport, cfg: &FeedbackConfig) -> bool {
    r.depth < cfg.risk_distance && speed_class(r.speed, cfg) == SpeedClass::High && r.range_rate < 0.0
}

const NUMBERS: [&str; 12] = [
    "One", "Two", "Three", "Four", "Five", "Six", "Seven", "Eight", "Nine", "Ten", "Eleven", "Twelve",
];

fn count_word(n: u32) -> String {
    match n {
        1..=12 => NUMBERS[n as usize - 1].to_string(),
        _ => n.to_string(),
    }
}

fn plural(name: &str, n: u32) -> String {
    match (n, name) {
        (1, _) => name.to_string(),
        (_, "person") => "people".to_string(),
        _ => format!("{name}s"),
    }
}

fn singular(noun: &str, n: u32) -> String {
    match (n, noun) {
        (1, _) => noun.to_string(),
        (_, "people") => "person".to_string(),
        _ => noun.strip_suffix('s').unwrap_or(noun).to_string(),
    }
}

/// Renders `<Count> <class> on <side> side, <speed> speed, <d> meter distance`
/// or, without a count, `<class> on <side> side, <d> meter distance`.
pub fn render_text(count: Option<u32>, class_name: &str, side: Side, speed: Option<SpeedClass>, distance: f64) -> String {
    let mut s = match count {
        Some(n) => format!("{} {} on {} side", count_word(n), plural(class_name, n), side.as_str()),
        None => format!("{} on {} side", class_name, side.as_str()),
    };
    if let Some(c) = speed {
        s.push_str(&format!(", {} speed", c.as_str()));
    }
    s.push_str(&format!(", {distance:.1} meter distance"));
    s
}

/// Fields recovered from a rendered sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedText {
    pub count: Option<u32>,
    pub class_name: String,
    pub side: Side,
    pub speed_class: Option<SpeedClass>,
    pub distance: f64,
}

pub fn parse_text(text: &str) -> Result<ParsedText> {
    let bad = || Error::Format(format!("unrecognized feedback text {text:?}"));
    let parts: Vec<&str> = text.split(", ").collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(bad());
    }
    let distance: f64 = parts[parts.len() - 1]
        .strip_suffix(" meter distance")
        .and_then(|d| d.parse().ok())
        .ok_or_else(bad)?;
    let speed_class = match parts.len() {
        3 => Some(match parts[1] {
            "low speed" => SpeedClass::Low,
            "high speed" => SpeedClass::High,
            _ => return Err(bad()),
        }),
        _ => None,
    };
    let head = parts[0].strip_suffix(" side").ok_or_else(bad)?;
    let (who, side) = head.rsplit_once(" on ").ok_or_else(bad)?;
    let side = Side::parse(side).ok_or_else(bad)?;
    let mut words = who.splitn(2, ' ');
    let first = words.next().ok_or_else(bad)?;
    let count = NUMBERS
        .iter()
        .position(|w| *w == first)
        .map(|i| i as u32 + 1)
        .or_else(|| first.parse().ok());
    let class_name = match (count, words.next()) {
        (Some(n), Some(rest)) => singular(rest, n),
        _ => who.to_string(),
    };
    if class_name.is_empty() {
        return Err(bad());
    }
    Ok(ParsedText {
        count,
        class_name,
        side,
        speed_class,
        distance,
    })
}

/// One message per matched dynamic track, nearest first.
pub fn make_messages(reports: &[TrackReport], registry: &ClassRegistry, cfg: &FeedbackConfig) -> Vec<FeedbackMessage> {
    let mut out: Vec<FeedbackMessage> = reports
        .iter()
        .filter(|r| r.dynamic && r.matched && r.depth > 0.0 && r.depth.is_finite())
        .map(|r| {
            let name = registry.name_of_code(r.code).to_string();
            let side = side_of(r.bearing_deg, cfg);
            let sc = speed_class(r.speed, cfg);
            FeedbackMessage {
                count: 1,
                text: render_text(Some(1), &name, side, Some(sc), r.depth),
                class_name: name,
                side,
                speed_class: Some(sc),
                distance: r.depth,
                risk: risk_flag(r, cfg),
            }
        })
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    out
}

/// An object reported with direction and depth only.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticObject {
    pub class_name: String,
    pub bearing_deg: f64,
    pub distance: f64,
}

/// Mean camera point over the valid-depth pixels of instance `code`:
/// bearing from its `atan2(x, z)` and distance as its mean depth.
pub fn observe_instance(frame: &Frame, code: u32, k: &Intrinsics) -> Option<StaticObject> {
    let info = frame.mask.instances().into_iter().find(|i| i.code == code)?;
    let mut acc = Point3::zeros();
    let mut n = 0usize;
    for y in info.min_y..=info.max_y {
        for x in info.min_x..=info.max_x {
            if frame.mask.code_at(x, y) != code {
                continue;
            }
            if let Some(p) = k.back_project(Pixel::new(x as f64, y as f64), frame.depth.get(x, y) as f64) {
                acc += p;
                n += 1;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let c = acc / n as f64;
    Some(StaticObject {
        class_name: frame.mask.registry.name_of_code(code).to_string(),
        bearing_deg: c.x.atan2(c.z).to_degrees(),
        distance: c.z,
    })
}

/// Direction and depth messages for static prior and moving non-prior objects, nearest first.
pub fn describe_static(objects: &[StaticObject], cfg: &FeedbackConfig) -> Vec<FeedbackMessage> {
    let mut out: Vec<FeedbackMessage> = objects
        .iter()
        .filter(|o| o.distance > 0.0 && o.distance.is_finite())
        .map(|o| {
            let side = side_of(o.bearing_deg, cfg);
            FeedbackMessage {
                count: 1,
                text: render_text(None, &o.class_name, side, None, o.distance),
                class_name: o.class_name.clone(),
                side,
                speed_class: None,
                distance: o.distance,
                risk: false,
            }
        })
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    out
}

/// A line of the feedback stream.
pub struct FeedbackLine<'a> {
    pub frame: usize,
    pub message: &'a FeedbackMessage,
}

impl fmt::Display for FeedbackLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame={} msg=\"{}\" risk={}", self.frame, self.message.text, self.message.risk as u8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use proptest::prelude::*;

    fn registry() -> ClassRegistry {
        let mut r = ClassRegistry::new();
        r.insert(1, "person", true);
        r.insert(2, "box", false);
        r
    }

    fn report(bearing_deg: f64, speed: f64, depth: f64, range_rate: f64) -> TrackReport {
        TrackReport {
            frame_index: 0,
            track_id: 1,
            class_id: 1,
            code: 1001,
            matched: true,
            dynamic: true,
            no_evidence: false,
            dynamic_fraction: 1.0,
            speed,
            instant_speed: speed,
            centroid_speed: speed,
            depth,
            bearing_deg,
            range_rate,
            n_points: 100,
            centroid_world: Point3::zeros(),
            centroid_cam: Point3::zeros(),
            motion: Pose::identity(),
            low_confidence: false,
        }
    }

    #[test]
    fn right_side_fast_person() {
        let cfg = FeedbackConfig::default();
        let m = make_messages(&[report(20.0, 1.2, 1.6, -0.5)], &registry(), &cfg);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].text, "One person on right side, high speed, 1.6 meter distance");
        assert!(m[0].risk);
    }

    #[test]
    fn front_slow_person() {
        let m = make_messages(&[report(0.0, 0.3, 1.2, 0.0)], &registry(), &FeedbackConfig::default());
        assert_eq!((m[0].side, m[0].speed_class), (Side::Front, Some(SpeedClass::Low)));
        assert_eq!(m[0].text, "One person on front side, low speed, 1.2 meter distance");
    }

    #[test]
    fn only_matched_dynamic_tracks_speak() {
        let cfg = FeedbackConfig::default();
        assert!(make_messages(&[], &registry(), &cfg).is_empty());
        let mut still = report(0.0, 0.0, 2.0, 0.0);
        still.dynamic = false;
        let mut hidden = report(0.0, 1.0, 2.0, 0.0);
        hidden.matched = false;
        assert!(make_messages(&[still, hidden], &registry(), &cfg).is_empty());
    }

    #[test]
    fn risk_rule() {
        let cfg = FeedbackConfig::default();
        assert!(risk_flag(&report(0.0, 1.2, 1.6, -0.3), &cfg));
        assert!(!risk_flag(&report(0.0, 1.2, 1.6, 0.3), &cfg));
        assert!(!risk_flag(&report(0.0, 1.2, 5.0, -0.3), &cfg));
        assert!(!risk_flag(&report(0.0, 0.8, 1.6, -0.3), &cfg));
        assert!(!risk_flag(&report(0.0, 1.2, 2.0, -0.3), &cfg));
    }

    #[test]
    fn side_boundaries_belong_to_front() {
        let cfg = FeedbackConfig::default();
        assert_eq!(side_of(-15.0, &cfg), Side::Front);
        assert_eq!(side_of(15.0, &cfg), Side::Front);
        assert_eq!(side_of(-15.000001, &cfg), Side::Left);
        assert_eq!(side_of(15.000001, &cfg), Side::Right);
        assert_eq!(speed_class(0.8, &cfg), SpeedClass::Low);
    }

    #[test]
    fn static_descriptions() {
        let cfg = FeedbackConfig::default();
        let objs = [
            StaticObject { class_name: "box".into(), bearing_deg: 3.0, distance: 1.0 },
            StaticObject { class_name: "person".into(), bearing_deg: -30.0, distance: 2.0 },
        ];
        let m = describe_static(&objs, &cfg);
        assert_eq!(m[0].text, "box on front side, 1.0 meter distance");
        assert_eq!(m[1].text, "person on left side, 2.0 meter distance");
        assert!(m.iter().all(|x| x.speed_class.is_none() && !x.risk));
        assert!(describe_static(&[], &cfg).is_empty());
    }

    #[test]
    fn nearest_first() {
        let cfg = FeedbackConfig::default();
        let rs = [report(0.0, 1.0, 3.0, 0.0), report(30.0, 1.0, 1.0, 0.0), report(-30.0, 1.0, 2.0, 0.0)];
        let m = make_messages(&rs, &registry(), &cfg);
        assert_eq!(m.iter().map(|x| x.side).collect::<Vec<_>>(), [Side::Right, Side::Left, Side::Front]);
    }

    #[test]
    fn line_format() {
        let m = make_messages(&[report(20.0, 1.2, 1.6, -0.5)], &registry(), &FeedbackConfig::default());
        let line = FeedbackLine { frame: 12, message: &m[0] }.to_string();
        assert_eq!(line, "frame=12 msg=\"One person on right side, high speed, 1.6 meter distance\" risk=1");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_text("").is_err());
        assert!(parse_text("One person on top side, 1.0 meter distance").is_err());
        assert!(parse_text("One person on left side, medium speed, 1.0 meter distance").is_err());
        assert!(parse_text("person on left, 1.0 meter distance").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trips(
            count in 1u32..20,
            name in "[a-z]{2,8}",
            side in 0usize..3,
            speed in proptest::option::of(0usize..2),
            with_count in any::<bool>(),
            d in 0.05f64..20.0,
        ) {
            let side = [Side::Left, Side::Front, Side::Right][side];
            let speed = speed.map(|s| [SpeedClass::Low, SpeedClass::High][s]);
            let count = with_count.then_some(count);
            let text = render_text(count, &name, side, speed, d);
            let p = parse_text(&text).unwrap();
            prop_assert_eq!(p.count, count);
            prop_assert_eq!(p.class_name, name);
            prop_assert_eq!(p.side, side);
            prop_assert_eq!(p.speed_class, speed);
            prop_assert!((p.distance - d).abs() <= 0.05 + 1e-9);
        }

        #[test]
        fn messages_sorted_by_distance(ds in proptest::collection::vec(0.1f64..10.0, 0..10)) {
            let rs: Vec<TrackReport> = ds.iter().map(|&d| report(0.0, 1.0, d, 0.0)).collect();
            let m = make_messages(&rs, &registry(), &FeedbackConfig::default());
            prop_assert_eq!(m.len(), ds.len());
            prop_assert!(m.windows(2).all(|w| w[0].distance <= w[1].distance));
        }
    }
}
