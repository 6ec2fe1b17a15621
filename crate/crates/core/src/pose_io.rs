//! Pose file formats.
//!
//! * RealEstate10K camera files: a URL line followed by one line per frame,
//!   `timestamp fx fy cx cy k1 k2 r11 r12 r13 t1 r21 r22 r23 t2 r31 r32 r33 t3`,
//!   intrinsics normalized by image size and a row-major 3×4 world-to-camera
//!   matrix.
//! * Canonical trajectory JSON, the interchange format between commands:
//!   `{convention, width, height, poses: [{fx, fy, cx, cy, R: [9], t: [3]}]}`.
//! * Trajectory synthesis specs (JSON), parsed into a [`SynthPlan`].

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::{CameraPose, Convention, Extrinsics, GeometryError, Intrinsics, Trajectory};
use crate::synth::{IntrinsicMotion, Motion, SynthError, SynthPlan};

/// Whitespace-separated fields on each data line.
pub const FIELDS_PER_LINE: usize = 19;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseIoError {
    #[error("input is not valid UTF-8")]
    NotUtf8,

    #[error("line {line}: expected {FIELDS_PER_LINE} fields, found {found}")]
    FieldCount { line: usize, found: usize },

    #[error("line {line}, column {column}: not a finite number")]
    Numeric { line: usize, column: usize },

    #[error("line {line}: rotation is not orthonormal")]
    RotationInvalid { line: usize },

    #[error("line {line}: distortion coefficients must be zero")]
    NonZeroDistortion { line: usize },

    #[error("line {line}: timestamp does not increase")]
    NonMonotonicTimestamp { line: usize },

    #[error("line {line}: {reason}")]
    InvalidIntrinsics { line: usize, reason: String },

    #[error("{}", index_message(*.index, *.len))]
    IndexOutOfRange { index: Option<usize>, len: usize },

    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn index_message(index: Option<usize>, len: usize) -> String {
    match index {
        Some(i) => format!("frame index {i} out of range for {len} records"),
        None => "no frame indices given".to_string(),
    }
}

impl PoseIoError {
    /// 1-based line number for text-format errors.
    pub fn line(&self) -> Option<usize> {
        match *self {
            PoseIoError::FieldCount { line, .. }
            | PoseIoError::Numeric { line, .. }
            | PoseIoError::RotationInvalid { line }
            | PoseIoError::NonZeroDistortion { line }
            | PoseIoError::NonMonotonicTimestamp { line }
            | PoseIoError::InvalidIntrinsics { line, .. } => Some(line),
            _ => None,
        }
    }

    fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        PoseIoError::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

/// One data line of a RealEstate10K camera file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecord {
    /// Microseconds.
    pub timestamp: i64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    /// Row-major 3×4 world-to-camera matrix.
    pub w2c: [f64; 12],
}

impl PoseRecord {
    pub fn rotation(&self) -> Matrix3<f64> {
        let m = &self.w2c;
        Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.w2c[3], self.w2c[7], self.w2c[11])
    }

    pub fn extrinsics(&self) -> Result<Extrinsics, GeometryError> {
        Extrinsics::new(
            self.rotation(),
            self.translation(),
            Convention::WorldToCamera,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseFile {
    pub source_url: String,
    pub frames: Vec<PoseRecord>,
}

pub fn parse_pose_bytes(bytes: &[u8]) -> Result<PoseFile, PoseIoError> {
    let text = std::str::from_utf8(bytes).map_err(|_| PoseIoError::NotUtf8)?;
    parse_pose_file(text)
}

pub fn parse_pose_file(text: &str) -> Result<PoseFile, PoseIoError> {
    let mut lines = text.lines().enumerate();
    let source_url = lines
        .next()
        .map(|(_, l)| l.trim().to_string())
        .unwrap_or_default();
    let mut frames: Vec<PoseRecord> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != FIELDS_PER_LINE {
            return Err(PoseIoError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let timestamp = fields[0]
            .parse::<i64>()
            .map_err(|_| PoseIoError::Numeric { line, column: 1 })?;
        let mut values = [0.0f64; FIELDS_PER_LINE - 1];
        for (j, field) in fields[1..].iter().enumerate() {
            values[j] = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(
                PoseIoError::Numeric {
                    line,
                    column: j + 2,
                },
            )?;
        }
        let record = PoseRecord {
            timestamp,
            fx: values[0],
            fy: values[1],
            cx: values[2],
            cy: values[3],
            k1: values[4],
            k2: values[5],
            w2c: values[6..].try_into().expect("12 matrix entries"),
        };
        validate_record(&record, line)?;
        if let Some(prev) = frames.last() {
            if record.timestamp <= prev.timestamp {
                return Err(PoseIoError::NonMonotonicTimestamp { line });
            }
        }
        frames.push(record);
    }
    Ok(PoseFile { source_url, frames })
}

fn validate_record(r: &PoseRecord, line: usize) -> Result<(), PoseIoError> {
    if r.k1 != 0.0 || r.k2 != 0.0 {
        return Err(PoseIoError::NonZeroDistortion { line });
    }
    if !(r.fx > 0.0 && r.fy > 0.0) {
        return Err(PoseIoError::InvalidIntrinsics {
            line,
            reason: "normalized focal lengths must be positive".into(),
        });
    }
    if !((0.0..=1.0).contains(&r.cx) && (0.0..=1.0).contains(&r.cy)) {
        return Err(PoseIoError::InvalidIntrinsics {
            line,
            reason: "normalized principal point must lie in [0, 1]".into(),
        });
    }
    r.extrinsics()
        .map_err(|_| PoseIoError::RotationInvalid { line })?;
    Ok(())
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros dropped.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

pub fn serialize_pose_file(pf: &PoseFile) -> String {
    let mut out = String::new();
    out.push_str(&pf.source_url);
    out.push('\n');
    for r in &pf.frames {
        let mut fields = Vec::with_capacity(FIELDS_PER_LINE);
        fields.push(r.timestamp.to_string());
        for v in [r.fx, r.fy, r.cx, r.cy, r.k1, r.k2].iter().chain(&r.w2c) {
            fields.push(format_g17(*v));
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

/// Selects records by index and denormalizes intrinsics to pixels for a
/// `width × height` image. Extrinsics are world-to-camera.
pub fn to_trajectory(
    pf: &PoseFile,
    width: usize,
    height: usize,
    frame_indices: &[usize],
) -> Result<Trajectory, PoseIoError> {
    if frame_indices.is_empty() {
        return Err(PoseIoError::IndexOutOfRange {
            index: None,
            len: pf.frames.len(),
        });
    }
    let (w, h) = (width as f64, height as f64);
    let poses = frame_indices
        .iter()
        .map(|&i| {
            let r = pf.frames.get(i).ok_or(PoseIoError::IndexOutOfRange {
                index: Some(i),
                len: pf.frames.len(),
            })?;
            let intr = Intrinsics::new(r.fx * w, r.fy * h, r.cx * w, r.cy * h)?;
            Ok(CameraPose::new(intr, r.extrinsics()?))
        })
        .collect::<Result<Vec<_>, PoseIoError>>()?;
    Ok(Trajectory::new(poses, width, height)?)
}

/// `count` indices `start, start + stride, start + 2·stride, …`.
pub fn strided_indices(start: usize, stride: usize, count: usize) -> Vec<usize> {
    (0..count).map(|i| start + i * stride).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    #[serde(rename = "R")]
    rotation: [f64; 9],
    t: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryJson {
    convention: Convention,
    width: usize,
    height: usize,
    poses: Vec<PoseJson>,
}

pub fn trajectory_to_json(traj: &Trajectory) -> String {
    let doc = TrajectoryJson {
        convention: traj.convention(),
        width: traj.width(),
        height: traj.height(),
        poses: traj
            .poses()
            .iter()
            .map(|p| {
                let r = p.extrinsics.rotation();
                let t = p.extrinsics.translation();
                PoseJson {
                    fx: p.intrinsics.fx(),
                    fy: p.intrinsics.fy(),
                    cx: p.intrinsics.cx(),
                    cy: p.intrinsics.cy(),
                    rotation: std::array::from_fn(|k| r[(k / 3, k % 3)]),
                    t: [t.x, t.y, t.z],
                }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("trajectory serializes")
}

pub fn trajectory_from_json(text: &str) -> Result<Trajectory, PoseIoError> {
    let doc: TrajectoryJson =
        serde_json::from_str(text).map_err(|e| PoseIoError::schema("/", e.to_string()))?;
    let poses = doc
        .poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let at = |field: &str| format!("/poses/{i}/{field}");
            let intr = Intrinsics::new(p.fx, p.fy, p.cx, p.cy)
                .map_err(|e| PoseIoError::schema(at("fx"), e.to_string()))?;
            let extr = Extrinsics::new(
                Matrix3::from_row_slice(&p.rotation),
                Vector3::from(p.t),
                doc.convention,
            )
            .map_err(|e| PoseIoError::schema(at("R"), e.to_string()))?;
            Ok(CameraPose::new(intr, extr))
        })
        .collect::<Result<Vec<_>, PoseIoError>>()?;
    Trajectory::new(poses, doc.width, doc.height)
        .map_err(|e| PoseIoError::schema("/poses", e.to_string()))
}

// ---- synthesis spec -------------------------------------------------------

fn child(path: &str, key: &str) -> String {
    format!("{path}/{key}")
}

fn get_required<'a>(
    obj: &'a Map<String, Value>,
    path: &str,
    key: &str,
) -> Result<&'a Value, PoseIoError> {
    obj.get(key)
        .ok_or_else(|| PoseIoError::schema(child(path, key), "required"))
}

fn as_number(v: &Value, path: &str) -> Result<f64, PoseIoError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
        PoseIoError::schema(path, format!("expected number, found {}", type_name(v)))
    })
}

fn as_positive_int(v: &Value, path: &str) -> Result<usize, PoseIoError> {
    match v.as_u64() {
        Some(n) if n >= 1 => {
            usize::try_from(n).map_err(|_| PoseIoError::schema(path, "integer too large"))
        }
        Some(_) => Err(PoseIoError::schema(path, "must be at least 1")),
        None => Err(PoseIoError::schema(
            path,
            format!("expected positive integer, found {}", type_name(v)),
        )),
    }
}

fn as_vector<const N: usize>(v: &Value, path: &str) -> Result<[f64; N], PoseIoError> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == N)
        .ok_or_else(|| PoseIoError::schema(path, format!("expected array of {N} numbers")))?;
    let mut out = [0.0; N];
    for (i, x) in arr.iter().enumerate() {
        out[i] = as_number(x, &format!("{path}/{i}"))?;
    }
    Ok(out)
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, PoseIoError> {
    v.as_object().ok_or_else(|| {
        PoseIoError::schema(path, format!("expected object, found {}", type_name(v)))
    })
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn reject_unknown(
    obj: &Map<String, Value>,
    path: &str,
    allowed: &[&str],
) -> Result<(), PoseIoError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(PoseIoError::schema(child(path, k), "unknown field")),
        None => Ok(()),
    }
}

fn parse_motion(v: &Value, path: &str, frames: usize) -> Result<Motion, PoseIoError> {
    let obj = as_object(v, path)?;
    let kind_path = child(path, "kind");
    let kind = get_required(obj, path, "kind")?
        .as_str()
        .ok_or_else(|| PoseIoError::schema(&kind_path, "expected string"))?;
    let num = |key: &str| as_number(get_required(obj, path, key)?, &child(path, key));
    let motion = match kind {
        "pan" => {
            reject_unknown(obj, path, &["kind", "direction", "interval"])?;
            Motion::Pan {
                direction: Vector3::from(as_vector::<3>(
                    get_required(obj, path, "direction")?,
                    &child(path, "direction"),
                )?),
                interval: num("interval")?,
            }
        }
        "zoom" => {
            reject_unknown(obj, path, &["kind", "interval"])?;
            Motion::Zoom {
                interval: num("interval")?,
            }
        }
        "rotate" => {
            reject_unknown(obj, path, &["kind", "axis", "total_degrees", "orbit_radius"])?;
            let orbit_radius = match obj.get("orbit_radius") {
                Some(v) => Some(as_number(v, &child(path, "orbit_radius"))?),
                None => None,
            };
            Motion::Rotate {
                axis: Vector3::from(as_vector::<3>(
                    get_required(obj, path, "axis")?,
                    &child(path, "axis"),
                )?),
                total_radians: num("total_degrees")?.to_radians(),
                orbit_radius,
            }
        }
        "principal_shift" => {
            reject_unknown(obj, path, &["kind", "dx", "dy"])?;
            Motion::Intrinsic(IntrinsicMotion::PrincipalShift {
                dx: num("dx")?,
                dy: num("dy")?,
            })
        }
        "focal_zoom" => {
            reject_unknown(obj, path, &["kind", "scale"])?;
            Motion::Intrinsic(IntrinsicMotion::FocalZoom {
                scale: num("scale")?,
            })
        }
        other => {
            return Err(PoseIoError::schema(
                kind_path,
                format!("unknown motion kind {other:?} (expected pan, zoom, rotate, principal_shift or focal_zoom)"),
            ))
        }
    };
    motion.validate(frames).map_err(|e| {
        let field = match e {
            SynthError::NonUnitDirection(_) => "direction",
            SynthError::NonUnitAxis(_) => "axis",
            SynthError::NonPositiveScale(_) => "scale",
            SynthError::InvalidFrameCount(_) => "total_degrees",
            _ => "kind",
        };
        PoseIoError::schema(child(path, field), e.to_string())
    })?;
    Ok(motion)
}

/// Parses and validates a trajectory synthesis spec.
///
/// ```json
/// {"frames": 16, "width": 384, "height": 256,
///  "intrinsics": {"fx": 192, "fy": 228, "cx": 192, "cy": 128},
///  "motion": {"kind": "pan", "direction": [-1, 0, 0], "interval": 0.1}}
/// ```
///
/// `"motions"` (an array) may be given instead of, or after, `"motion"`.
pub fn parse_trajectory_spec(text: &str) -> Result<SynthPlan, PoseIoError> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| PoseIoError::schema("", format!("invalid JSON: {e}")))?;
    let obj = as_object(&root, "")?;
    reject_unknown(
        obj,
        "",
        &[
            "frames",
            "width",
            "height",
            "intrinsics",
            "motion",
            "motions",
        ],
    )?;

    let frames = as_positive_int(get_required(obj, "", "frames")?, "/frames")?;
    let width = as_positive_int(get_required(obj, "", "width")?, "/width")?;
    let height = as_positive_int(get_required(obj, "", "height")?, "/height")?;

    let intr_obj = as_object(get_required(obj, "", "intrinsics")?, "/intrinsics")?;
    reject_unknown(intr_obj, "/intrinsics", &["fx", "fy", "cx", "cy"])?;
    let k = |key: &str| {
        as_number(
            get_required(intr_obj, "/intrinsics", key)?,
            &format!("/intrinsics/{key}"),
        )
    };
    let intrinsics = Intrinsics::new(k("fx")?, k("fy")?, k("cx")?, k("cy")?)
        .map_err(|e| PoseIoError::schema("/intrinsics", e.to_string()))?;

    let mut motions = Vec::new();
    if let Some(m) = obj.get("motion") {
        motions.push(parse_motion(m, "/motion", frames)?);
    }
    if let Some(list) = obj.get("motions") {
        let arr = list.as_array().ok_or_else(|| {
            PoseIoError::schema(
                "/motions",
                format!("expected array, found {}", type_name(list)),
            )
        })?;
        for (i, m) in arr.iter().enumerate() {
            motions.push(parse_motion(m, &format!("/motions/{i}"), frames)?);
        }
    }
    if motions.is_empty() {
        return Err(PoseIoError::schema("/motion", "required"));
    }
    Ok(SynthPlan {
        frames,
        width,
        height,
        intrinsics,
        motions,
    })
}
