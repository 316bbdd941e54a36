//! The four generation flows. They are the only places where chart,
//! attention and backend calls are composed.
//!
//! | target     | method        | pipeline                                                               |
//! |------------|---------------|------------------------------------------------------------------------|
//! | foreground | unconditional | txt2img, threshold, upsample and mask, refine                          |
//! | background | unconditional | txt2img                                                                |
//! | foreground | conditional   | mask, augment, txt2img probe, fuse per mark, img2img, alpha = mask     |
//! | background | conditional   | mask, augment, txt2img probe, dominant colour, fuse, img2img           |

use chartforge::attention::{
    apply_mask, dominant_color, fuse_background, fuse_foreground_per_mark, refine_object, threshold_mask,
    FusedConditionImage, SegmentationProvider,
};
use chartforge::chart::{augment, synthesize_mask, AugmentOp, ChartError, ChartGeometry, ChartMask, MaskVariant};
use chartforge::genclient::{generate, GenBackend, GenRequest};
use chartforge::raster::{BinaryGrid, RasterImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ServiceError;
use crate::model::{GenOptions, Method, Target};

/// Image-to-image strength used by the conditional flows when the options
/// leave it open.
pub const DEFAULT_CONDITION_STRENGTH: f64 = 0.75;

/// How many times a sampled augmentation is halved before the flow falls
/// back to the unaugmented mask.
const AUGMENT_RETRIES: usize = 3;

/// Everything a flow produced, before anything is stored.
#[derive(Clone, Debug)]
pub struct FlowOutput {
    pub image: RasterImage,
    /// Last backend request issued; its seed reproduces the run.
    pub request: GenRequest,
    pub condition: Option<FusedConditionImage>,
    /// Mask the condition was fused into (conditional flows) or the object
    /// mask at canvas size (unconditional foreground).
    pub mask: Option<BinaryGrid>,
    pub augment: Option<AugmentOp>,
}

pub struct FlowContext<'a> {
    pub geometry: &'a ChartGeometry,
    pub backend: &'a dyn GenBackend,
    pub segmentation: &'a dyn SegmentationProvider,
}

pub fn run_flow(ctx: &FlowContext<'_>, options: &GenOptions) -> Result<FlowOutput, ServiceError> {
    if options.object.trim().is_empty() {
        return Err(ServiceError::BadRequest("object prompt must not be empty".into()));
    }
    if let Some(s) = options.strength {
        if !(0.0..=1.0).contains(&s) {
            return Err(ServiceError::BadRequest(format!("strength {s} outside [0, 1]")));
        }
    }
    match (options.target, options.method) {
        (Target::Foreground, Method::Unconditional) => unconditional_foreground(ctx, options),
        (Target::Background, Method::Unconditional) => unconditional_background(ctx, options),
        (Target::Foreground, Method::Conditional) => conditional_foreground(ctx, options),
        (Target::Background, Method::Conditional) => conditional_background(ctx, options),
    }
}

fn txt2img(ctx: &FlowContext<'_>, options: &GenOptions) -> GenRequest {
    GenRequest::txt2img(
        &options.object,
        &options.description,
        options.seed,
        ctx.geometry.canvas_size,
    )
}

fn unconditional_foreground(ctx: &FlowContext<'_>, options: &GenOptions) -> Result<FlowOutput, ServiceError> {
    let request = txt2img(ctx, options);
    let result = generate(&request, ctx.backend)?;
    let mask = threshold_mask(result.object_attention(&request)?);
    let (w, h) = result.image.dims();
    let coarse = mask.bits.resize(w, h);
    let extracted = apply_mask(&mask, &result.image)?;
    let refined = refine_object(&extracted, ctx.segmentation)?;
    Ok(FlowOutput {
        image: refined.image,
        request,
        condition: None,
        mask: Some(coarse),
        augment: None,
    })
}

fn unconditional_background(ctx: &FlowContext<'_>, options: &GenOptions) -> Result<FlowOutput, ServiceError> {
    let request = txt2img(ctx, options);
    let result = generate(&request, ctx.backend)?;
    Ok(FlowOutput {
        image: result.image,
        request,
        condition: None,
        mask: None,
        augment: None,
    })
}

/// Chart mask for a conditional flow, augmented either with the requested
/// operation or with one drawn from the seed. A drawn operation that breaks
/// the integrity guard is halved a few times, then dropped.
fn conditioned_mask(ctx: &FlowContext<'_>, options: &GenOptions) -> Result<(ChartMask, Option<AugmentOp>), ServiceError> {
    let variant = options
        .mask_variant
        .unwrap_or_else(|| MaskVariant::default_for(ctx.geometry.chart_type));
    let mask = synthesize_mask(ctx.geometry, variant)?;
    if let Some(op) = options.augment {
        if !op.within_safe_range() {
            return Err(ChartError::InvalidParams(format!("{op:?} is outside the safe ranges")).into());
        }
        return Ok((augment(&mask, &op, options.seed)?, Some(op)));
    }
    let mut op = AugmentOp::sample(&mut ChaCha8Rng::seed_from_u64(options.seed));
    for _ in 0..=AUGMENT_RETRIES {
        match augment(&mask, &op, options.seed) {
            Ok(out) => return Ok((out, Some(op))),
            Err(ChartError::IntegrityViolated { .. }) => op = op.halved(),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((mask, None))
}

fn strength(options: &GenOptions) -> f64 {
    options.strength.unwrap_or(DEFAULT_CONDITION_STRENGTH)
}

fn conditional_foreground(ctx: &FlowContext<'_>, options: &GenOptions) -> Result<FlowOutput, ServiceError> {
    let (mask, op) = conditioned_mask(ctx, options)?;
    let probe_request = txt2img(ctx, options);
    let probe = generate(&probe_request, ctx.backend)?;
    let fused = fuse_foreground_per_mark(&mask, probe.object_attention(&probe_request)?)?;
    let request = GenRequest::from_condition(&options.object, &options.description, &fused, strength(options), options.seed);
    let mut image = generate(&request, ctx.backend)?.image;
    for y in 0..image.height() {
        for x in 0..image.width() {
            image.set_alpha(x, y, if mask.pixels.get(x, y) { 255 } else { 0 });
        }
    }
    Ok(FlowOutput {
        image,
        request,
        condition: Some(fused),
        mask: Some(mask.pixels),
        augment: op,
    })
}

fn conditional_background(ctx: &FlowContext<'_>, options: &GenOptions) -> Result<FlowOutput, ServiceError> {
    let (mask, op) = conditioned_mask(ctx, options)?;
    let probe_request = txt2img(ctx, options);
    let probe = generate(&probe_request, ctx.backend)?;
    let color = dominant_color(probe.object_attention(&probe_request)?, &probe.image)?;
    let fused = fuse_background(&mask, color)?;
    let request = GenRequest::from_condition(&options.object, &options.description, &fused, strength(options), options.seed);
    let image = generate(&request, ctx.backend)?.image;
    Ok(FlowOutput {
        image,
        request,
        condition: Some(fused),
        mask: Some(mask.pixels),
        augment: op,
    })
}
