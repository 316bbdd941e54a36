//! Deterministic stand-in for a diffusion backend.
//!
//! The image is a lobed, shaded blob on a smooth light texture. Blob shape and
//! colour derive from the object phrase; position, size and texture from the
//! seed and the full prompt. The object token's attention grid is a Gaussian
//! bump centred on the blob with σ equal to the blob radius, so the
//! above-mean region is a single disc around the object.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{object_token, GenBackend, GenError, GenMode, GenRequest, GenResult, Permits};
use crate::attention::{AttentionGrid, GRID_SIDE};
use crate::raster::{FloatGrid, RasterImage};

pub const MOCK_BACKEND_ID: &str = "mock";

/// Texture control-point lattice side.
const TEXTURE_CELLS: u32 = 6;

#[derive(Debug)]
pub struct MockBackend {
    permits: Permits,
}

impl MockBackend {
    pub fn new(max_concurrent: usize) -> Self {
        MockBackend {
            permits: Permits::new(max_concurrent),
        }
    }
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::new(super::DEFAULT_MAX_CONCURRENT)
    }
}

impl GenBackend for MockBackend {
    fn id(&self) -> &str {
        MOCK_BACKEND_ID
    }

    fn render(&self, request: &GenRequest) -> Result<GenResult, GenError> {
        request.validate()?;
        let _permit = self.permits.acquire();
        Ok(mock_render(request))
    }
}

/// FNV-1a, for a hash that is stable across platforms and releases.
fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Procedural layout for a request; exposed so tests can locate the blob.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MockScene {
    pub center: (f64, f64),
    pub radius: f64,
    pub lobes: u32,
    pub lobe_amplitude: f64,
    pub lobe_phase: f64,
    pub color: [u8; 3],
}

impl MockScene {
    pub fn for_request(request: &GenRequest) -> MockScene {
        let (w, h) = request.size;
        let shape = fnv1a(&object_token(&request.prompt_object));
        let mut rng = layout_rng(request);
        let side = w.min(h) as f64;
        let hue = (shape % 360) as f64;
        MockScene {
            center: (rng.random_range(0.3..0.7) * w as f64, rng.random_range(0.3..0.7) * h as f64),
            radius: rng.random_range(0.14..0.22) * side,
            lobes: 3 + (shape >> 16) as u32 % 4,
            lobe_amplitude: 0.08 + ((shape >> 24) % 8) as f64 / 100.0,
            lobe_phase: ((shape >> 32) % 628) as f64 / 100.0,
            color: hsv_to_rgb(hue, 0.75, 0.85),
        }
    }

    /// Blob radius along direction `phi`.
    fn extent(&self, phi: f64) -> f64 {
        self.radius * (1.0 + self.lobe_amplitude * (self.lobes as f64 * phi + self.lobe_phase).sin())
    }

    /// Shading factor inside the blob, `None` outside.
    fn inside(&self, x: f64, y: f64) -> Option<f64> {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let d = dx.hypot(dy);
        let e = self.extent(dy.atan2(dx));
        (d <= e).then(|| 1.0 - 0.35 * (d / e).powi(2))
    }
}

fn layout_rng(request: &GenRequest) -> ChaCha8Rng {
    let prompt = fnv1a(&request.prompt().to_lowercase());
    ChaCha8Rng::seed_from_u64(request.seed ^ prompt.rotate_left(17))
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

fn procedural_image(request: &GenRequest, scene: &MockScene) -> RasterImage {
    let (w, h) = request.size;
    // Texture draws come after the scene draws so both use one stream.
    let mut rng = layout_rng(request);
    let _ = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
    let n = TEXTURE_CELLS * TEXTURE_CELLS;
    let lattice: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.random_range(205.0..250.0), rng.random_range(205.0..250.0), rng.random_range(205.0..250.0)])
        .collect();
    let channel = |c: usize| {
        FloatGrid::from_values(TEXTURE_CELLS, TEXTURE_CELLS, lattice.iter().map(|p| p[c]).collect())
            .expect("lattice size")
            .resize_bilinear(w, h)
    };
    let texture = [channel(0), channel(1), channel(2)];
    let mut data = Vec::with_capacity(w as usize * h as usize * 4);
    for y in 0..h {
        for x in 0..w {
            match scene.inside(x as f64 + 0.5, y as f64 + 0.5) {
                Some(shade) => {
                    for c in scene.color {
                        data.push((c as f64 * shade).round() as u8);
                    }
                }
                None => {
                    for t in &texture {
                        data.push(t.get(x, y).round() as u8);
                    }
                }
            }
            data.push(255);
        }
    }
    RasterImage::from_rgba(w, h, data).expect("buffer matches size")
}

fn attention_grids(request: &GenRequest, scene: &MockScene) -> BTreeMap<String, AttentionGrid> {
    let (w, h) = request.size;
    let side = GRID_SIDE;
    let sigma2 = scene.radius * scene.radius;
    let bump = (0..side * side)
        .map(|i| {
            let cx = ((i % side) as f64 + 0.5) * w as f64 / side as f64;
            let cy = ((i / side) as f64 + 0.5) * h as f64 / side as f64;
            let d2 = (cx - scene.center.0).powi(2) + (cy - scene.center.1).powi(2);
            (-d2 / (2.0 * sigma2)).exp()
        })
        .collect();
    let object = object_token(&request.prompt_object);
    let mut grids = BTreeMap::new();
    for word in request
        .prompt_description
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
    {
        let uniform = vec![1.0 / (side * side) as f64; (side * side) as usize];
        grids.insert(word.clone(), AttentionGrid::new(word, side, uniform).expect("valid grid"));
    }
    grids.insert(object.clone(), AttentionGrid::new(object, side, bump).expect("valid grid"));
    grids
}

/// Renders a request without any I/O. Image-to-image output blends the init
/// image toward the text-to-image output: `round(init·(1−s) + proc·s)` on
/// every channel, so `s = 0` returns the init image and `s = 1` the
/// procedural image.
pub fn mock_render(request: &GenRequest) -> GenResult {
    let scene = MockScene::for_request(request);
    let procedural = procedural_image(request, &scene);
    let image = match (request.mode, &request.init_image, request.strength) {
        (GenMode::Img2Img, Some(init), Some(s)) if init.dims() == procedural.dims() => {
            let data = init
                .as_raw()
                .iter()
                .zip(procedural.as_raw())
                .map(|(&a, &b)| (a as f64 * (1.0 - s) + b as f64 * s).round() as u8)
                .collect();
            RasterImage::from_rgba(init.width(), init.height(), data).expect("same size")
        }
        _ => procedural,
    };
    GenResult {
        image,
        attention: attention_grids(request, &scene),
        backend_id: MOCK_BACKEND_ID.into(),
        seed: request.seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{largest_component, threshold_mask};

    fn sun(seed: u64) -> GenRequest {
        GenRequest::txt2img("sun", "glowing summer sun", seed, (512, 512))
    }

    #[test]
    fn same_request_same_image() {
        assert_eq!(mock_render(&sun(7)), mock_render(&sun(7)));
        assert_ne!(mock_render(&sun(7)).image, mock_render(&sun(8)).image);
    }

    #[test]
    fn argmax_cell_contains_blob_center() {
        for seed in 0..20 {
            let r = sun(seed);
            let scene = MockScene::for_request(&r);
            let res = mock_render(&r);
            let g = &res.attention["sun"];
            let (mut best, mut arg) = (f64::MIN, (0, 0));
            for y in 0..16 {
                for x in 0..16 {
                    if g.get(x, y) > best {
                        best = g.get(x, y);
                        arg = (x, y);
                    }
                }
            }
            let cell = ((scene.center.0 / 32.0) as u32, (scene.center.1 / 32.0) as u32);
            assert_eq!(arg, cell, "seed {seed}");
        }
    }

    #[test]
    fn above_mean_region_is_one_blob() {
        let res = mock_render(&sun(3));
        let m = threshold_mask(&res.attention["sun"]).bits;
        assert_eq!(largest_component(&m), m);
        assert!(m.count_ones() > 0);
    }

    #[test]
    fn blend_extremes() {
        let base = mock_render(&sun(9)).image;
        let init = RasterImage::filled(512, 512, [10, 20, 30, 40]);
        let keep = GenRequest::img2img("sun", "glowing summer sun", init.clone(), 0.0, 9);
        assert_eq!(mock_render(&keep).image, init);
        let replace = GenRequest::img2img("sun", "glowing summer sun", init, 1.0, 9);
        assert_eq!(mock_render(&replace).image, base);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [255, 0, 0]);
        assert_eq!(hsv_to_rgb(120.0, 1.0, 1.0), [0, 255, 0]);
        assert_eq!(hsv_to_rgb(240.0, 1.0, 1.0), [0, 0, 255]);
    }

    #[test]
    fn blob_stays_inside_canvas() {
        for seed in 0..50 {
            let s = MockScene::for_request(&sun(seed));
            let reach = s.radius * (1.0 + s.lobe_amplitude);
            assert!(s.center.0 - reach > 0.0 && s.center.0 + reach < 512.0);
        }
    }
}
