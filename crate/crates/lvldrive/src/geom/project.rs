//! 3D box projection onto pinhole camera planes.

use super::{box_corners_3d, Box3D, CameraModel, GeomError, Rect2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub rect: Rect2D,
    /// Fraction of the 8 corners with positive depth that also land inside
    /// the image bounds.
    pub visibility: f64,
}

/// Projects a box (ego frame) into a camera image.
///
/// Returns `None` when no corner has positive camera-frame depth or the
/// projected rectangle misses the image entirely. The rectangle is the
/// min/max over projections of positive-depth corners, clamped to the image.
pub fn project_box_to_image(
    cam: &CameraModel,
    b: &Box3D,
) -> Result<Option<Projection>, GeomError> {
    let k = &cam.intrinsics;
    if k[0][0] <= 0.0 || k[1][1] <= 0.0 {
        return Err(GeomError::BadIntrinsics);
    }
    let w = cam.width as f64;
    let h = cam.height as f64;

    let mut x_min = f64::INFINITY;
    let mut y_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut any_front = false;
    let mut visible = 0usize;

    for corner in box_corners_3d(b) {
        let p = cam.ego_to_cam.apply(corner);
        let depth = p[2];
        if depth <= 0.0 {
            continue;
        }
        any_front = true;
        let u = (k[0][0] * p[0] + k[0][1] * p[1] + k[0][2] * p[2]) / depth;
        let v = (k[1][1] * p[1] + k[1][2] * p[2]) / depth;
        x_min = x_min.min(u);
        x_max = x_max.max(u);
        y_min = y_min.min(v);
        y_max = y_max.max(v);
        if u >= 0.0 && u <= w && v >= 0.0 && v <= h {
            visible += 1;
        }
    }

    if !any_front || x_max < 0.0 || x_min > w || y_max < 0.0 || y_min > h {
        return Ok(None);
    }
    let rect = Rect2D {
        x_min: x_min.clamp(0.0, w),
        y_min: y_min.clamp(0.0, h),
        x_max: x_max.clamp(0.0, w),
        y_max: y_max.clamp(0.0, h),
    };
    if rect.area() <= 0.0 {
        return Ok(None);
    }
    Ok(Some(Projection { rect, visibility: visible as f64 / 8.0 }))
}
