//! Per-frame work: detection, triage by cascade class, snapshots and signatures.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use sentinel_core::cascade_xml::load_cascade;
use sentinel_core::haar::detect_multiscale;
use sentinel_core::imaging::{crop, draw_rect, to_grayscale, write_image, AnyImage};
use sentinel_core::{Cascade, ColorImage, DetectParams, GrayImage, Rect, Signature};
use serde::Serialize;
use serde_json::json;

use crate::config::{CascadeEntry, ObjectClass};
use crate::events::{EventKind, EventLog};
use crate::PipelineError;

pub const BOX_COLOR: [u8; 3] = [255, 0, 0];
pub const BOX_THICKNESS: u32 = 2;

pub struct RegisteredCascade {
    pub path: PathBuf,
    pub class: ObjectClass,
    pub cascade: Cascade,
}

/// Which cascade fired decides the object class; only human detections are followed up.
pub struct CascadeRegistry {
    entries: Vec<RegisteredCascade>,
}

impl CascadeRegistry {
    pub fn new(entries: Vec<RegisteredCascade>) -> Result<Self, PipelineError> {
        if !entries.iter().any(|e| e.class == ObjectClass::Human) {
            return Err(PipelineError::Config("no cascade is registered for class human".into()));
        }
        Ok(CascadeRegistry { entries })
    }

    /// Loads the enabled entries.
    pub fn load(entries: &[CascadeEntry]) -> Result<Self, PipelineError> {
        let loaded = entries
            .iter()
            .filter(|e| e.enabled)
            .map(|e| {
                let cascade = load_cascade(&e.path).map_err(|source| PipelineError::Cascade { path: e.path.clone(), source })?;
                Ok(RegisteredCascade { path: e.path.clone(), class: e.class, cascade })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        CascadeRegistry::new(loaded)
    }

    pub fn entries(&self) -> &[RegisteredCascade] {
        &self.entries
    }
}

pub struct FrameParams<'a> {
    pub detect: DetectParams,
    pub crop_margin: f64,
    pub snapshots_dir: &'a Path,
}

/// One detected face, saved to disk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PersonSnapshot {
    pub full_image_path: PathBuf,
    pub face_image_path: PathBuf,
    pub face_rect: Rect,
    /// `None` when the crop has no contrast; such faces are never checked.
    pub signature: Option<Signature>,
    pub camera_id: String,
    pub ts: DateTime<Utc>,
    pub frame: u64,
    pub face_index: usize,
    #[serde(skip)]
    pub face: GrayImage,
}

pub fn file_stem(camera_id: &str, ts: DateTime<Utc>, frame: u64) -> String {
    let camera: String = camera_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    format!("{camera}_{}_{frame}", ts.format("%Y%m%dT%H%M%S%.3fZ"))
}

fn save(img: AnyImage, path: &Path) -> Result<(), PipelineError> {
    write_image(&img, path).map_err(|source| PipelineError::Image { path: path.into(), source })
}

/// Runs every registered cascade over `frame` and snapshots each face.
///
/// Non-human detections are logged and otherwise ignored. When at least one
/// face is found the frame is saved once with all faces boxed, and every face
/// crop is saved separately. Ends with a `frame_processed` event.
pub fn process_frame(
    frame: &ColorImage,
    ts: DateTime<Utc>,
    camera_id: &str,
    frame_no: u64,
    registry: &CascadeRegistry,
    params: &FrameParams<'_>,
    log: &EventLog,
) -> Result<Vec<PersonSnapshot>, PipelineError> {
    let gray = to_grayscale(frame);
    let mut faces: Vec<Rect> = vec![];
    let mut detections = 0usize;
    for entry in registry.entries() {
        let rects = detect_multiscale(&entry.cascade, &gray, &params.detect)?;
        detections += rects.len();
        if entry.class == ObjectClass::Human {
            faces.extend(rects);
            continue;
        }
        for rect in rects {
            log.append(
                EventKind::Detection,
                json!({"frame": frame_no, "camera_id": camera_id, "class": entry.class, "cascade": entry.path, "rect": rect, "ignored": true}),
            )?;
        }
    }

    let stem = file_stem(camera_id, ts, frame_no);
    let full_path = params.snapshots_dir.join(format!("{stem}_full.ppm"));
    if !faces.is_empty() {
        let annotated = faces.iter().fold(frame.clone(), |img, &r| draw_rect(&img, r, BOX_COLOR, BOX_THICKNESS));
        save(annotated.into(), &full_path)?;
    }

    let mut snapshots = Vec::with_capacity(faces.len());
    for (k, &rect) in faces.iter().enumerate() {
        let face = crop(&gray, rect, params.crop_margin).expect("detections lie inside the frame");
        let face_path = params.snapshots_dir.join(format!("{stem}_face{k}.pgm"));
        save(face.clone().into(), &face_path)?;
        let signature = Signature::from_crop(&face);
        log.append(
            EventKind::Detection,
            json!({
                "frame": frame_no, "camera_id": camera_id, "class": ObjectClass::Human, "rect": rect, "face_index": k,
                "full_image_path": full_path, "face_image_path": face_path,
            }),
        )?;
        if let Err(e) = &signature {
            log.append(EventKind::Skipped, json!({"frame": frame_no, "face_image_path": face_path, "reason": e.to_string()}))?;
        }
        snapshots.push(PersonSnapshot {
            full_image_path: full_path.clone(),
            face_image_path: face_path,
            face_rect: rect,
            signature: signature.ok(),
            camera_id: camera_id.to_string(),
            ts,
            frame: frame_no,
            face_index: k,
            face,
        });
    }
    log.append(
        EventKind::FrameProcessed,
        json!({"frame": frame_no, "camera_id": camera_id, "ts": ts, "detections": detections, "snapshots": snapshots.len()}),
    )?;
    Ok(snapshots)
}
