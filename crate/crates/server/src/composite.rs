//! Layer placement and flattening.

use chartforge::raster::RasterImage;

use crate::model::LayerTransform;

/// Maps a canvas pixel centre back into asset pixel coordinates.
fn inverse(t: &LayerTransform, (w, h): (u32, u32), px: f64, py: f64) -> (f64, f64) {
    let (cx, cy) = (t.scale.0 * w as f64 / 2.0, t.scale.1 * h as f64 / 2.0);
    let (qx, qy) = (px - t.translate.0 - cx, py - t.translate.1 - cy);
    let (sin, cos) = t.rotation.sin_cos();
    let (vx, vy) = (cos * qx + sin * qy + cx, -sin * qx + cos * qy + cy);
    (vx / t.scale.0, vy / t.scale.1)
}

/// Draws `asset` under `transform` onto a transparent canvas, sampling the
/// nearest asset pixel.
pub fn place(asset: &RasterImage, transform: &LayerTransform, canvas: (u32, u32)) -> RasterImage {
    let mut out = RasterImage::filled(canvas.0, canvas.1, [0, 0, 0, 0]);
    let (w, h) = asset.dims();
    for y in 0..canvas.1 {
        for x in 0..canvas.0 {
            let (u, v) = inverse(transform, (w, h), x as f64 + 0.5, y as f64 + 0.5);
            let (iu, iv) = (u.floor(), v.floor());
            if iu >= 0.0 && iv >= 0.0 && iu < w as f64 && iv < h as f64 {
                out.set_pixel(x, y, asset.pixel(iu as u32, iv as u32));
            }
        }
    }
    out
}

/// Source-over compositing of `top` onto `base`, both the same size.
pub fn over(base: &mut RasterImage, top: &RasterImage) {
    debug_assert_eq!(base.dims(), top.dims());
    for y in 0..base.height() {
        for x in 0..base.width() {
            let s = top.pixel(x, y);
            if s[3] == 0 {
                continue;
            }
            let d = base.pixel(x, y);
            let sa = s[3] as f64 / 255.0;
            let da = d[3] as f64 / 255.0;
            let oa = sa + da * (1.0 - sa);
            let mut px = [0u8; 4];
            for c in 0..3 {
                let v = (s[c] as f64 * sa + d[c] as f64 * da * (1.0 - sa)) / oa;
                px[c] = v.round() as u8;
            }
            px[3] = (oa * 255.0).round() as u8;
            base.set_pixel(x, y, px);
        }
    }
}

/// Flattens placed layers, bottom first, onto `base`.
pub fn flatten<'a>(mut base: RasterImage, layers: impl IntoIterator<Item = &'a RasterImage>) -> RasterImage {
    for layer in layers {
        over(&mut base, layer);
    }
    base
}
