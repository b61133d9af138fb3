//! Face features: landmark-geometry distances aggregated over a track, and
//! aggregated face-crop embeddings.
//!
//! Landmarks follow the 49-point layout, 0-based:
//!
//! | range | region |
//! |-------|--------|
//! | 0–4, 5–9 | left, right eyebrow (outer to inner, inner to outer) |
//! | 10–13 | nose bridge, top to bottom |
//! | 14–18 | lower nose, left to right (16 = tip base) |
//! | 19–24 | left eye: 19 outer corner, 20–21 upper lid, 22 inner corner, 23–24 lower lid |
//! | 25–30 | right eye: 25 inner corner, 26–27 upper lid, 28 outer corner, 29–30 lower lid |
//! | 31–42 | outer lip contour from the left corner (31) clockwise; 34 top centre, 37 right corner, 40 bottom centre |
//! | 43–48 | inner lip: 43–45 upper, 46–48 lower; 44 upper centre, 47 lower centre |
//!
//! Horizontal distances are divided by the face-box width, vertical ones by
//! its height and oblique (Euclidean) ones by the geometric mean of both.

use crate::data::{FaceBox, FaceLandmarkTrack, FeatureBlock, LANDMARK_COUNT};
use crate::dsp::{mean, percentile, population_std};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::learn::PcaModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
    Oblique,
}

/// One distance between the centroids of two landmark groups.
#[derive(Debug, Clone, Copy)]
pub struct Distance {
    pub name: &'static str,
    pub axis: Axis,
    pub a: &'static [usize],
    pub b: &'static [usize],
}

const fn d(name: &'static str, axis: Axis, a: &'static [usize], b: &'static [usize]) -> Distance {
    Distance { name, axis, a, b }
}

use Axis::{Horizontal as H, Oblique as O, Vertical as V};

/// The 30 geometry features, in output order.
pub const GEOMETRY: [Distance; 30] = [
    d("left_brow_to_eye", V, &[0, 1, 2, 3, 4], &[19, 20, 21, 22, 23, 24]),
    d("right_brow_to_eye", V, &[5, 6, 7, 8, 9], &[25, 26, 27, 28, 29, 30]),
    d("left_inner_brow_raise", V, &[4], &[22]),
    d("right_inner_brow_raise", V, &[5], &[25]),
    d("left_outer_brow_raise", V, &[0], &[19]),
    d("right_outer_brow_raise", V, &[9], &[28]),
    d("brow_gap", H, &[4], &[5]),
    d("left_eye_openness", V, &[20, 21], &[23, 24]),
    d("right_eye_openness", V, &[26, 27], &[29, 30]),
    d("left_eye_width", H, &[19], &[22]),
    d("right_eye_width", H, &[25], &[28]),
    d("nose_to_upper_lip", V, &[16], &[34]),
    d("nose_length", V, &[10], &[16]),
    d("inner_lip_gap", V, &[44], &[47]),
    d("outer_lip_gap", V, &[34], &[40]),
    d("mouth_width", H, &[31], &[37]),
    d("upper_lip_thickness", V, &[34], &[44]),
    d("lower_lip_thickness", V, &[40], &[47]),
    d("left_mouth_corner_to_eye", O, &[31], &[19]),
    d("right_mouth_corner_to_eye", O, &[37], &[28]),
    d("left_mouth_corner_to_nose", O, &[31], &[14]),
    d("right_mouth_corner_to_nose", O, &[37], &[18]),
    d("left_corner_pull", V, &[31], &[34]),
    d("right_corner_pull", V, &[37], &[34]),
    d("left_brow_to_nose", V, &[2], &[16]),
    d("right_brow_to_nose", V, &[7], &[16]),
    d("nose_width", H, &[14], &[18]),
    d("left_inner_eye_to_nose", O, &[22], &[14]),
    d("right_inner_eye_to_nose", O, &[25], &[18]),
    d("chin_lip_to_nose", V, &[40], &[16]),
];

fn centroid(points: &[[f64; 2]], idx: &[usize]) -> [f64; 2] {
    let n = idx.len() as f64;
    let sx: f64 = idx.iter().map(|&i| points[i][0]).sum();
    let sy: f64 = idx.iter().map(|&i| points[i][1]).sum();
    [sx / n, sy / n]
}

/// The 30 normalized distances of one frame.
pub fn frame_geometry(points: &[[f64; 2]], face_box: &FaceBox) -> Result<Vec<f64>> {
    if points.len() != LANDMARK_COUNT {
        return Err(Error::InvalidSignal(format!(
            "{} landmarks, expected {LANDMARK_COUNT}",
            points.len()
        )));
    }
    if !(face_box.w > 0.0 && face_box.h > 0.0 && face_box.w.is_finite() && face_box.h.is_finite()) {
        return Err(Error::InvalidSignal(format!(
            "degenerate face box {}x{}",
            face_box.w, face_box.h
        )));
    }
    Ok(GEOMETRY
        .iter()
        .map(|g| {
            let a = centroid(points, g.a);
            let b = centroid(points, g.b);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            match g.axis {
                Axis::Horizontal => dx.abs() / face_box.w,
                Axis::Vertical => dy.abs() / face_box.h,
                Axis::Oblique => dx.hypot(dy) / (face_box.w * face_box.h).sqrt(),
            }
        })
        .collect())
}

/// Column-wise mean, 95th percentile and population std, concatenated
/// in that order.
pub fn aggregate_rows(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = rows.first().map(Vec::len).ok_or(Error::EmptySignal)?;
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter("ragged per-frame features".into()));
    }
    let mut out = vec![0.0; 3 * d];
    let mut col = Vec::with_capacity(rows.len());
    for j in 0..d {
        col.clear();
        col.extend(rows.iter().map(|r| r[j]));
        out[j] = mean(&col);
        out[d + j] = percentile(&col, 95.0);
        out[2 * d + j] = population_std(&col);
    }
    Ok(out)
}

/// 90 values: mean, p95 and std of each geometry feature over the frames.
pub fn aggregate_track(per_frame: &[Vec<f64>]) -> Result<Vec<f64>> {
    aggregate_rows(per_frame)
}

pub fn face_geometry_features(track: &FaceLandmarkTrack) -> Result<FeatureBlock> {
    track.validate()?;
    let rows = track
        .frames
        .iter()
        .map(|f| frame_geometry(&f.points, &f.face_box))
        .collect::<Result<Vec<_>>>()?;
    let values =
        aggregate_track(&rows).map_err(|e| e.context(format!("trial {}: empty landmark track", track.trial_id)))?;
    let names = ["mean", "p95", "std"]
        .iter()
        .flat_map(|s| GEOMETRY.iter().map(move |g| format!("{s}_{}", g.name)))
        .collect();
    Ok(FeatureBlock::new(
        track.trial_id.clone(),
        "FACE",
        "face_geometry",
        names,
        values,
    ))
}

/// Embeds every frame; errors carry the frame index.
pub fn face_frame_embeddings(frames: &[RgbImage], provider: &dyn EmbeddingProvider) -> Result<Vec<Vec<f64>>> {
    if frames.is_empty() {
        return Err(Error::EmptySignal);
    }
    for (i, f) in frames.iter().enumerate() {
        f.expect_shape(crate::image::EMBED_SIZE, crate::image::EMBED_SIZE)
            .map_err(|e| e.context(format!("frame {i}")))?;
    }
    let rows = provider.embed_batch(frames)?;
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != provider.dim()) {
        return Err(Error::DimMismatch {
            expected: provider.dim(),
            got: r.len(),
        }
        .context(format!("frame {i}")));
    }
    Ok(rows)
}

/// Mean, p95 and std of the frame embeddings (3 × provider dim).
pub fn face_embedding_stats(frames: &[RgbImage], provider: &dyn EmbeddingProvider) -> Result<Vec<f64>> {
    aggregate_rows(&face_frame_embeddings(frames, provider)?)
}

pub fn face_embedding_features(
    trial_id: &str,
    frames: &[RgbImage],
    provider: &dyn EmbeddingProvider,
    pca: &PcaModel,
) -> Result<FeatureBlock> {
    let z = pca.transform(&face_embedding_stats(frames, provider)?)?;
    Ok(FeatureBlock::indexed(trial_id, "FACE", "face_deep", "face_deep", z))
}

/// A neutral frontal face in unit-box coordinates (x right, y down).
pub fn template_face() -> Vec<[f64; 2]> {
    vec![
        [0.18, 0.30],
        [0.24, 0.27],
        [0.30, 0.26],
        [0.36, 0.27],
        [0.42, 0.29],
        [0.58, 0.29],
        [0.64, 0.27],
        [0.70, 0.26],
        [0.76, 0.27],
        [0.82, 0.30],
        [0.50, 0.36],
        [0.50, 0.42],
        [0.50, 0.48],
        [0.50, 0.54],
        [0.42, 0.60],
        [0.46, 0.62],
        [0.50, 0.63],
        [0.54, 0.62],
        [0.58, 0.60],
        [0.22, 0.38],
        [0.27, 0.355],
        [0.33, 0.355],
        [0.38, 0.38],
        [0.33, 0.40],
        [0.27, 0.40],
        [0.62, 0.38],
        [0.67, 0.355],
        [0.73, 0.355],
        [0.78, 0.38],
        [0.73, 0.40],
        [0.67, 0.40],
        [0.36, 0.75],
        [0.41, 0.72],
        [0.46, 0.71],
        [0.50, 0.715],
        [0.54, 0.71],
        [0.59, 0.72],
        [0.64, 0.75],
        [0.59, 0.79],
        [0.54, 0.81],
        [0.50, 0.815],
        [0.46, 0.81],
        [0.41, 0.79],
        [0.45, 0.745],
        [0.50, 0.74],
        [0.55, 0.745],
        [0.55, 0.76],
        [0.50, 0.765],
        [0.45, 0.76],
    ]
}
