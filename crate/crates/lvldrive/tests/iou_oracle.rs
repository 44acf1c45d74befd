//! Validates the analytic rotated-box IoU against a brute-force raster
//! oracle that shares no code with the clipping implementation.

use lvldrive::geom::{bev_iou, BevBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rasterized IoU: samples cell centers on a dense grid over the union of
/// both bounding boxes and counts membership with the independent
/// point-in-rotated-rect test.
fn raster_iou(a: &BevBox, b: &BevBox, n: usize) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for bx in [a, b] {
        for c in bx.corners() {
            xs.push(c[0]);
            ys.push(c[1]);
        }
    }
    let pad = 0.01;
    let x0 = xs.iter().cloned().fold(f64::INFINITY, f64::min) - pad;
    let x1 = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad;
    let y0 = ys.iter().cloned().fold(f64::INFINITY, f64::min) - pad;
    let y1 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad;
    let dx = (x1 - x0) / n as f64;
    let dy = (y1 - y0) / n as f64;
    let (mut in_a, mut in_b, mut in_both) = (0u64, 0u64, 0u64);
    for i in 0..n {
        let x = x0 + (i as f64 + 0.5) * dx;
        for j in 0..n {
            let y = y0 + (j as f64 + 0.5) * dy;
            let pa = a.contains([x, y]);
            let pb = b.contains([x, y]);
            in_a += pa as u64;
            in_b += pb as u64;
            in_both += (pa && pb) as u64;
        }
    }
    let union = in_a + in_b - in_both;
    if union == 0 {
        return 0.0;
    }
    in_both as f64 / union as f64
}

fn random_box(rng: &mut ChaCha8Rng) -> BevBox {
    BevBox {
        x: rng.gen_range(-3.0..3.0),
        y: rng.gen_range(-3.0..3.0),
        length: rng.gen_range(1.0..8.0),
        width: rng.gen_range(0.5..4.0),
        yaw: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    }
}

#[test]
fn matches_raster_oracle_on_200_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut overlapping = 0usize;
    for case in 0..200 {
        let a = random_box(&mut rng);
        let b = random_box(&mut rng);
        let analytic = bev_iou(&a, &b).unwrap();
        let raster = raster_iou(&a, &b, 800);
        assert!(
            (analytic - raster).abs() < 0.01,
            "case {case}: analytic {analytic} vs raster {raster}\n a={a:?}\n b={b:?}"
        );
        if analytic > 0.0 {
            overlapping += 1;
        }
    }
    // The sampling ranges must actually exercise intersecting geometry.
    assert!(overlapping > 50, "only {overlapping} overlapping pairs");
}

#[test]
fn square_rotated_45_fixture() {
    let a = BevBox { x: 0.0, y: 0.0, length: 2.0, width: 2.0, yaw: 0.0 };
    let b = BevBox { x: 0.0, y: 0.0, length: 2.0, width: 2.0, yaw: std::f64::consts::FRAC_PI_4 };
    let iou = bev_iou(&a, &b).unwrap();
    assert!((iou - 0.7071).abs() < 0.01, "iou={iou}");
    let raster = raster_iou(&a, &b, 1500);
    assert!((iou - raster).abs() < 0.005, "analytic {iou} vs raster {raster}");
}

#[test]
fn containment_is_area_ratio() {
    let outer = BevBox { x: 0.0, y: 0.0, length: 10.0, width: 6.0, yaw: 0.7 };
    let inner = BevBox { x: 0.5, y: -0.2, length: 2.0, width: 1.0, yaw: -1.1 };
    let iou = bev_iou(&outer, &inner).unwrap();
    let expect = inner.area() / outer.area();
    assert!((iou - expect).abs() < 1e-9, "iou={iou} expect={expect}");
}
