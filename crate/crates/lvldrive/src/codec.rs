//! Bit-exact formatting and tolerant parsing of the QA answer templates:
//! object descriptions, scalars, coordinates, and waypoint lists.
//!
//! Parsing failures are values, never panics: downstream evaluation maps
//! them to zero-IoU samples.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{normalize_yaw, BevBox, Box3D};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ParseFailure {
    #[error("missing fields: {0:?}")]
    MissingFields(Vec<String>),
    #[error("expected 6 waypoints, found {0}")]
    WaypointCount(usize),
    #[error("non-numeric token {0:?}")]
    BadToken(String),
    #[error("no value found in text")]
    NotFound,
}

/// Rounds to 0.1 granularity, half away from zero.
pub fn round_tenth(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Formats with exactly one decimal digit after half-away-from-zero rounding.
/// Locale-independent; never emits "-0.0".
pub fn fmt1(v: f64) -> String {
    let k = (v * 10.0).round() as i64;
    let sign = if k < 0 { "-" } else { "" };
    let k = k.unsigned_abs();
    format!("{sign}{}.{}", k / 10, k % 10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedObject {
    pub category: String,
    pub camera: String,
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw_deg: f64,
}

impl ParsedObject {
    pub fn bev_box(&self) -> BevBox {
        BevBox {
            x: self.x,
            y: self.y,
            length: self.length,
            width: self.width,
            yaw: self.yaw_deg.to_radians(),
        }
    }
}

/// Yaw in degrees normalized into (-180, 180].
pub fn yaw_degrees(yaw_rad: f64) -> f64 {
    let deg = normalize_yaw(yaw_rad).to_degrees();
    // normalize_yaw maps to (-pi, pi], so deg is already in (-180, 180].
    deg
}

/// The object answer template. All numbers are rounded to 0.1.
pub fn format_object_answer(b: &Box3D, category: &str, camera: &str) -> String {
    format!(
        "The object is a {category} in the {camera}, location: ({}, {}), length: {}, width: {}, height: {}, angles in degree: {}.",
        fmt1(b.center[0]),
        fmt1(b.center[1]),
        fmt1(b.length),
        fmt1(b.width),
        fmt1(b.height),
        fmt1(yaw_degrees(b.yaw)),
    )
}

/// Camera-less variant used by lane-listing answers.
pub fn format_object_answer_no_camera(b: &Box3D, category: &str) -> String {
    format!(
        "The object is a {category}, location: ({}, {}), length: {}, width: {}, height: {}, angles in degree: {}.",
        fmt1(b.center[0]),
        fmt1(b.center[1]),
        fmt1(b.length),
        fmt1(b.width),
        fmt1(b.height),
        fmt1(yaw_degrees(b.yaw)),
    )
}

const NUM: &str = r"[-+]?\d+(?:\.\d+)?";

fn re(pattern: &'static str, cell: &'static OnceLock<Regex>) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).unwrap())
}

macro_rules! cached_re {
    ($name:ident, $pat:expr) => {
        fn $name() -> &'static Regex {
            static CELL: OnceLock<Regex> = OnceLock::new();
            re($pat, &CELL)
        }
    };
}

cached_re!(
    re_head,
    r"(?i)object\s+is\s+an?\s+([A-Za-z][A-Za-z0-9_\-]*)(?:\s+in\s+the\s+([A-Za-z][A-Za-z0-9_]*))?"
);
cached_re!(
    re_location,
    r"(?i)location\s*[:=]?\s*\(\s*([-+]?\d+(?:\.\d+)?)\s*,\s*([-+]?\d+(?:\.\d+)?)\s*\)"
);
cached_re!(re_length, r"(?i)length\s*[:=]?\s*([-+]?\d+(?:\.\d+)?)");
cached_re!(re_width, r"(?i)width\s*[:=]?\s*([-+]?\d+(?:\.\d+)?)");
cached_re!(re_height, r"(?i)height\s*[:=]?\s*([-+]?\d+(?:\.\d+)?)");
cached_re!(
    re_angle,
    r"(?i)angles?\s+in\s+degrees?\s*[:=]?\s*([-+]?\d+(?:\.\d+)?)"
);

/// Tolerant parse of the object answer template.
///
/// Case-insensitive keywords, flexible whitespace, "degree"/"degrees" both
/// accepted, surrounding prose ignored. Any missing field yields a
/// `MissingFields` failure naming what was absent.
pub fn parse_object_answer(text: &str) -> Result<ParsedObject, ParseFailure> {
    let mut missing = Vec::new();

    let (category, camera) = match re_head().captures(text) {
        Some(c) => {
            let cat = c.get(1).map(|m| m.as_str().to_string());
            let cam = c.get(2).map(|m| m.as_str().to_string());
            if cam.is_none() {
                missing.push("camera".to_string());
            }
            (cat, cam)
        }
        None => {
            missing.push("category".to_string());
            missing.push("camera".to_string());
            (None, None)
        }
    };

    let loc = re_location().captures(text);
    if loc.is_none() {
        missing.push("location".to_string());
    }
    let length = re_length().captures(text);
    if length.is_none() {
        missing.push("length".to_string());
    }
    let width = re_width().captures(text);
    if width.is_none() {
        missing.push("width".to_string());
    }
    let height = re_height().captures(text);
    if height.is_none() {
        missing.push("height".to_string());
    }
    let angle = re_angle().captures(text);
    if angle.is_none() {
        missing.push("yaw".to_string());
    }

    if !missing.is_empty() {
        return Err(ParseFailure::MissingFields(missing));
    }
    let loc = loc.unwrap();
    Ok(ParsedObject {
        category: category.unwrap(),
        camera: camera.unwrap(),
        x: loc[1].parse().unwrap(),
        y: loc[2].parse().unwrap(),
        length: length.unwrap()[1].parse().unwrap(),
        width: width.unwrap()[1].parse().unwrap(),
        height: height.unwrap()[1].parse().unwrap(),
        yaw_deg: angle.unwrap()[1].parse().unwrap(),
    })
}

/// Exactly six BEV waypoints at 0.5 s spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointList(pub [[f64; 2]; 6]);

pub fn format_waypoints(w: &WaypointList) -> String {
    let parts: Vec<String> = w
        .0
        .iter()
        .map(|p| format!("({}, {})", fmt1(p[0]), fmt1(p[1])))
        .collect();
    format!("[{}]", parts.join(", "))
}

cached_re!(re_paren_group, r"\(([^()]*)\)");

/// Parses a waypoint list: arbitrary spacing accepted, post-validates
/// exactly six pairs.
pub fn parse_waypoints(text: &str) -> Result<WaypointList, ParseFailure> {
    let mut pairs = Vec::new();
    for cap in re_paren_group().captures_iter(text) {
        let inner = &cap[1];
        let fields: Vec<&str> = inner.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(ParseFailure::BadToken(inner.to_string()));
        }
        let mut pair = [0.0; 2];
        for (i, f) in fields.iter().enumerate() {
            pair[i] = f
                .parse::<f64>()
                .map_err(|_| ParseFailure::BadToken((*f).to_string()))?;
        }
        pairs.push(pair);
    }
    if pairs.len() != 6 {
        return Err(ParseFailure::WaypointCount(pairs.len()));
    }
    Ok(WaypointList([pairs[0], pairs[1], pairs[2], pairs[3], pairs[4], pairs[5]]))
}

cached_re!(re_number, r"[-+]?\d+(?:\.\d+)?");

/// Extracts the first decimal number; trailing periods are harmless.
pub fn parse_scalar(text: &str) -> Result<f64, ParseFailure> {
    re_number()
        .find(text)
        .map(|m| m.as_str().parse().unwrap())
        .ok_or(ParseFailure::NotFound)
}

/// Extracts the first parenthesized `(x, y)` pair.
pub fn parse_coordinate(text: &str) -> Result<[f64; 2], ParseFailure> {
    static CELL: OnceLock<Regex> = OnceLock::new();
    let pat = CELL.get_or_init(|| {
        Regex::new(&format!(r"\(\s*({NUM})\s*,\s*({NUM})\s*\)")).unwrap()
    });
    pat.captures(text)
        .map(|c| [c[1].parse().unwrap(), c[2].parse().unwrap()])
        .ok_or(ParseFailure::NotFound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_box(x: f64, y: f64, l: f64, w: f64, h: f64, yaw: f64) -> Box3D {
        Box3D {
            center: [x, y, 0.0],
            length: l,
            width: w,
            height: h,
            yaw,
            velocity: [0.0, 0.0],
            category: "car".into(),
            track_id: 0,
        }
    }

    #[test]
    fn template_instantiation() {
        let b = mk_box(0.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        assert_eq!(
            format_object_answer(&b, "car", "CAM_FRONT"),
            "The object is a car in the CAM_FRONT, location: (0.0, 0.0), length: 1.0, width: 1.0, height: 1.0, angles in degree: 0.0."
        );
    }

    #[test]
    fn yaw_pi_is_180() {
        let b = mk_box(0.0, 0.0, 1.0, 1.0, 1.0, std::f64::consts::PI);
        let s = format_object_answer(&b, "car", "CAM_FRONT");
        assert!(s.ends_with("angles in degree: 180.0."), "{s}");
    }

    #[test]
    fn rounding_half_away_from_zero() {
        assert_eq!(fmt1(2.34999), "2.3");
        assert_eq!(fmt1(2.35), "2.4");
        assert_eq!(fmt1(-2.35), "-2.4");
        assert_eq!(fmt1(-0.04), "0.0");
    }

    #[test]
    fn parse_format_roundtrip() {
        let b = mk_box(10.0, 2.0, 4.5, 1.9, 1.6, std::f64::consts::FRAC_PI_2);
        let s = format_object_answer(&b, "car", "CAM_FRONT");
        let p = parse_object_answer(&s).unwrap();
        assert_eq!(p.category, "car");
        assert_eq!(p.camera, "CAM_FRONT");
        assert!((p.x - 10.0).abs() <= 0.05);
        assert!((p.y - 2.0).abs() <= 0.05);
        assert!((p.length - 4.5).abs() <= 0.05);
        assert!((p.yaw_deg - 90.0).abs() <= 0.05);
    }

    #[test]
    fn missing_angle_clause() {
        let text = "The object is a truck in the CAM_BACK, location: (3.0, -2.0), length: 6.0, width: 2.5, height: 3.0";
        match parse_object_answer(text) {
            Err(ParseFailure::MissingFields(fields)) => {
                assert_eq!(fields, vec!["yaw".to_string()]);
            }
            other => panic!("expected missing yaw, got {other:?}"),
        }
    }

    #[test]
    fn tolerates_surrounding_prose() {
        let text = "Sure! Here is what I see. the object is a Car in the cam_front, LOCATION: (1.5,-2.0) , length: 4.0, width: 2.0, height: 1.5, angles in degrees: -90.0. Hope that helps.";
        let p = parse_object_answer(text).unwrap();
        assert_eq!(p.camera.to_uppercase(), "CAM_FRONT");
        assert!((p.yaw_deg + 90.0).abs() < 1e-12);
    }

    #[test]
    fn waypoints_roundtrip() {
        let w = WaypointList([[1.0, 0.5], [2.0, 1.0], [3.0, 1.5], [4.0, 2.0], [5.0, 2.5], [6.0, 3.0]]);
        let s = format_waypoints(&w);
        let back = parse_waypoints(&s).unwrap();
        for (a, b) in w.0.iter().zip(back.0.iter()) {
            assert!((a[0] - b[0]).abs() <= 0.05 && (a[1] - b[1]).abs() <= 0.05);
        }
    }

    #[test]
    fn waypoints_wrong_count() {
        let s = "[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0), (5.0, 0.0)]";
        assert_eq!(parse_waypoints(s), Err(ParseFailure::WaypointCount(5)));
    }

    #[test]
    fn waypoints_no_spaces() {
        let s = "[(1.0,0.0),(2.0,0.0),(3.0,0.0),(4.0,0.0),(5.0,0.0),(6.0,0.0)]";
        let w = parse_waypoints(s).unwrap();
        assert_eq!(w.0[5], [6.0, 0.0]);
    }

    #[test]
    fn waypoints_bad_token() {
        let s = "[(1.0, x), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0), (5.0, 0.0), (6.0, 0.0)]";
        assert!(matches!(parse_waypoints(s), Err(ParseFailure::BadToken(_))));
    }

    #[test]
    fn scalar_and_coordinate() {
        assert_eq!(parse_scalar("5.0.").unwrap(), 5.0);
        assert_eq!(parse_coordinate("(3.4, -1.2)").unwrap(), [3.4, -1.2]);
        assert_eq!(parse_scalar("no idea"), Err(ParseFailure::NotFound));
        assert_eq!(parse_coordinate("nope"), Err(ParseFailure::NotFound));
    }
}
