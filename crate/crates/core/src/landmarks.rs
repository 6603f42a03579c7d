//! Eight-point facial landmarks and the face-box normalization built on them.
//!
//! Point order follows the annotation convention: right eye, left eye, nose,
//! right ear tip, right ear base, top of head, left ear base, left ear tip.
//! Normalization levels the eyes, then boxes the face using fixed anatomical
//! ratios: the eye distance is a third of the face width, and the distance
//! from the eyes-nose centroid to the head top is half the face length
//! (ears excluded). Standing ears extend the box upward.

use thiserror::Error;

use crate::geometry::Point2;
use crate::raster::{self, PixelRect, RasterError, RasterImage};

/// Maximum eye-height difference accepted as "already aligned".
pub const ALIGNMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandmarkError {
    #[error("landmark {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },
    #[error("eye landmarks coincide")]
    DegenerateEyes,
    #[error("eyes are not level (|y1 - y2| = {delta})")]
    NotAligned { delta: f64 },
    #[error("head top coincides with the eyes-nose centroid")]
    NonPositiveLength,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormalizeError {
    #[error(transparent)]
    Landmarks(#[from] LandmarkError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Semantic index into a [`LandmarkSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Landmark {
    RightEye = 0,
    LeftEye = 1,
    Nose = 2,
    RightEarTip = 3,
    RightEarBase = 4,
    HeadTop = 5,
    LeftEarBase = 6,
    LeftEarTip = 7,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet {
    points: [Point2; 8],
}

impl LandmarkSet {
    pub fn new(points: [Point2; 8]) -> Result<Self, LandmarkError> {
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(LandmarkError::NonFiniteCoordinate { index: index + 1 });
        }
        if points[0].distance(&points[1]) <= 0.0 {
            return Err(LandmarkError::DegenerateEyes);
        }
        Ok(LandmarkSet { points })
    }

    pub fn points(&self) -> &[Point2; 8] {
        &self.points
    }

    pub fn get(&self, which: Landmark) -> Point2 {
        self.points[which as usize]
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Result<LandmarkSet, LandmarkError> {
        LandmarkSet::new(self.points.map(f))
    }

    pub fn eye_midpoint(&self) -> Point2 {
        self.points[0].midpoint(&self.points[1])
    }
}

/// Rotation that levels the eyes: turn by `angle` radians about `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub center: Point2,
    pub angle: f64,
}

/// Angle of the right-eye to left-eye line against the x axis, in (-pi, pi].
pub fn eye_angle(landmarks: &LandmarkSet) -> f64 {
    let d = landmarks.points[1] - landmarks.points[0];
    let theta = libm::atan2(d.y, d.x);
    if theta == -core::f64::consts::PI {
        core::f64::consts::PI
    } else {
        theta
    }
}

/// Rotates all points by the negated eye angle about the eye midpoint.
pub fn align_landmarks(landmarks: &LandmarkSet) -> (LandmarkSet, Rotation) {
    let theta = eye_angle(landmarks);
    let center = landmarks.eye_midpoint();
    let rotation = Rotation {
        center,
        angle: -theta,
    };
    if theta == 0.0 {
        return (*landmarks, Rotation { center, angle: 0.0 });
    }
    let points = landmarks.points.map(|p| p.rotated_about(&center, -theta));
    (LandmarkSet { points }, rotation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceBoxDerivation {
    pub theta: f64,
    pub centroid: Point2,
    pub face_width: f64,
    pub base_length: f64,
    pub standing_ear_extension: f64,
    pub right_ear_standing: bool,
    pub left_ear_standing: bool,
    pub face_box: PixelRect,
}

/// Derives the face rectangle from eye-levelled landmarks.
pub fn derive_face_box(landmarks: &LandmarkSet) -> Result<FaceBoxDerivation, LandmarkError> {
    let p = &landmarks.points;
    let delta = (p[0].y - p[1].y).abs();
    if delta > ALIGNMENT_TOLERANCE {
        return Err(LandmarkError::NotAligned { delta });
    }
    let face_width = 3.0 * p[0].distance(&p[1]);
    let centroid = Point2::new(
        (p[0].x + p[1].x + p[2].x) / 3.0,
        (p[0].y + p[1].y + p[2].y) / 3.0,
    );
    let head_top = landmarks.get(Landmark::HeadTop);
    let base_length = 2.0 * centroid.distance(&head_top);
    if !(base_length.is_finite() && base_length > 0.0) {
        return Err(LandmarkError::NonPositiveLength);
    }

    let right_tip = landmarks.get(Landmark::RightEarTip);
    let left_tip = landmarks.get(Landmark::LeftEarTip);
    let right_ear_standing = right_tip.y < head_top.y;
    let left_ear_standing = left_tip.y < head_top.y;
    let highest_standing = [
        (right_ear_standing, right_tip.y),
        (left_ear_standing, left_tip.y),
    ]
    .into_iter()
    .filter(|&(standing, _)| standing)
    .map(|(_, y)| y)
    .reduce(f64::min);
    let standing_ear_extension = highest_standing.map_or(0.0, |y| head_top.y - y);

    let face_box = PixelRect::new(
        centroid.x - face_width / 2.0,
        head_top.y - standing_ear_extension,
        face_width,
        base_length + standing_ear_extension,
    )
    .map_err(|_| LandmarkError::NonPositiveLength)?;

    Ok(FaceBoxDerivation {
        theta: eye_angle(landmarks),
        centroid,
        face_width,
        base_length,
        standing_ear_extension,
        right_ear_standing,
        left_ear_standing,
        face_box,
    })
}

/// Levels the eyes, crops the derived face box and resizes to a square.
pub fn normalize_face(
    image: &RasterImage,
    landmarks: &LandmarkSet,
    out_side: usize,
) -> Result<RasterImage, NormalizeError> {
    let (aligned, rotation) = align_landmarks(landmarks);
    let derivation = derive_face_box(&aligned)?;
    let rotated = raster::rotate_about(image, rotation.center, rotation.angle);
    let face = raster::crop(&rotated, &derivation.face_box)?;
    Ok(raster::resize(&face, out_side, out_side)?)
}
