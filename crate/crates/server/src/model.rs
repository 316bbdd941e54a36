//! Persisted project state: the data, the chart, the layer stack and the
//! generation gallery.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chartforge::chart::{AugmentOp, ChartSpec, DataTable, MaskVariant};
use chartforge::genclient::GenMode;
use serde::{Deserialize, Serialize};

/// Content address of a stored asset: the SHA-256 of its bytes, hex encoded.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(pub String);

impl AssetId {
    pub fn is_well_formed(&self) -> bool {
        self.0.len() == 64 && self.0.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[serde(alias = "fg")]
    Foreground,
    #[serde(alias = "bg")]
    Background,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(alias = "cond")]
    Conditional,
    #[serde(alias = "uncond")]
    Unconditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowMode {
    pub target: Target,
    pub method: Method,
}

/// Options of one generation, exactly as the options form submits them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub object: String,
    #[serde(default)]
    pub description: String,
    pub target: Target,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_variant: Option<MaskVariant>,
    #[serde(default)]
    pub seed: u64,
    /// Image-to-image strength of the conditional flows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    /// Fixed mask augmentation; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentOp>,
}

impl GenOptions {
    pub fn mode(&self) -> FlowMode {
        FlowMode {
            target: self.target,
            method: self.method,
        }
    }
}

/// The final backend request of a flow. An init image is referenced by
/// asset instead of being inlined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredRequest {
    pub prompt_object: String,
    pub prompt_description: String,
    pub mode: GenMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_asset: Option<AssetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    pub seed: u64,
    pub size: (u32, u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub id: String,
    pub options: GenOptions,
    pub request: StoredRequest,
    pub mode: FlowMode,
    pub result_asset: AssetId,
    /// Fused condition image of the conditional flows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_asset: Option<AssetId>,
    /// Chart mask the condition was fused into, or the object mask of the
    /// unconditional foreground flow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_asset: Option<AssetId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentOp>,
    pub kept: bool,
    pub created_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Annotation,
    Element,
    Background,
}

/// Placement of a layer's asset on the canvas. The asset is scaled about its
/// top-left corner, rotated about the centre of the scaled box, then
/// translated. Angles are radians, clockwise on screen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTransform {
    pub translate: (f64, f64),
    #[serde(default)]
    pub rotation: f64,
    pub scale: (f64, f64),
}

impl LayerTransform {
    pub const IDENTITY: LayerTransform = LayerTransform {
        translate: (0.0, 0.0),
        rotation: 0.0,
        scale: (1.0, 1.0),
    };

    pub fn is_invertible(&self) -> bool {
        let finite = [self.translate.0, self.translate.1, self.rotation, self.scale.0, self.scale.1]
            .iter()
            .all(|v| v.is_finite());
        finite && self.scale.0 != 0.0 && self.scale.1 != 0.0
    }
}

impl Default for LayerTransform {
    fn default() -> Self {
        LayerTransform::IDENTITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub id: String,
    pub name: String,
    pub kind: LayerKind,
    pub asset: AssetId,
    #[serde(default)]
    pub transform: LayerTransform,
    pub visible: bool,
    /// Gallery entry the layer was produced from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// Layers bottom to top.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

impl LayerStack {
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for layer in &self.layers {
            if !seen.insert(layer.id.as_str()) {
                return Err(format!("duplicate layer id `{}`", layer.id));
            }
            if !layer.transform.is_invertible() {
                return Err(format!("layer `{}` has a singular transform", layer.id));
            }
            if !layer.asset.is_well_formed() {
                return Err(format!("layer `{}` references malformed asset `{}`", layer.id, layer.asset));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.id == id)
    }

    /// Inserts below the first annotation layer so text stays on top.
    pub fn insert_element(&mut self, layer: Layer) {
        let at = self
            .layers
            .iter()
            .position(|l| l.kind == LayerKind::Annotation)
            .unwrap_or(self.layers.len());
        self.layers.insert(at, layer);
    }

    /// Inserts above any existing backgrounds and below everything else.
    pub fn insert_background(&mut self, layer: Layer) {
        let at = self
            .layers
            .iter()
            .position(|l| l.kind != LayerKind::Background)
            .unwrap_or(self.layers.len());
        self.layers.insert(at, layer);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub table: DataTable,
    pub spec: ChartSpec,
    /// Plain chart on a white canvas.
    pub preview_asset: AssetId,
    /// SVG axes, tick labels and title.
    pub annotation_asset: AssetId,
    pub layers: LayerStack,
    pub gallery: Vec<GalleryEntry>,
    pub created_ms: u64,
    pub modified_ms: u64,
    #[serde(default)]
    pub next_layer: u64,
}

impl Project {
    pub fn allocate_layer_id(&mut self) -> String {
        self.next_layer += 1;
        format!("l{}", self.next_layer)
    }

    pub fn entry(&self, id: &str) -> Option<&GalleryEntry> {
        self.gallery.iter().find(|e| e.id == id)
    }

    /// Every asset the project refers to.
    pub fn referenced_assets(&self) -> Vec<AssetId> {
        let mut out = vec![self.preview_asset.clone(), self.annotation_asset.clone()];
        out.extend(self.layers.layers.iter().map(|l| l.asset.clone()));
        for e in &self.gallery {
            out.push(e.result_asset.clone());
            out.extend(e.condition_asset.iter().cloned());
            out.extend(e.mask_asset.iter().cloned());
            out.extend(e.request.init_asset.iter().cloned());
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Self-contained export: project metadata plus every referenced asset as
/// base64. Importing it yields an identical layer stack and gallery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredDocument {
    pub version: u32,
    pub table: DataTable,
    pub spec: ChartSpec,
    pub preview_asset: AssetId,
    pub annotation_asset: AssetId,
    pub layers: LayerStack,
    pub gallery: Vec<GalleryEntry>,
    #[serde(default)]
    pub next_layer: u64,
    pub assets: BTreeMap<AssetId, String>,
}

pub const LAYERED_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(id: &str, kind: LayerKind) -> Layer {
        Layer {
            id: id.into(),
            name: id.into(),
            kind,
            asset: AssetId("0".repeat(64)),
            transform: LayerTransform::IDENTITY,
            visible: true,
            source: None,
        }
    }

    #[test]
    fn elements_go_under_annotations() {
        let mut s = LayerStack {
            layers: vec![layer("chart", LayerKind::Element), layer("axes", LayerKind::Annotation)],
        };
        s.insert_element(layer("e", LayerKind::Element));
        s.insert_background(layer("b", LayerKind::Background));
        let ids: Vec<&str> = s.layers.iter().map(|l| l.id.as_str()).collect();
        assert_eq!(ids, ["b", "chart", "e", "axes"]);
    }

    #[test]
    fn zero_scale_is_rejected() {
        let mut l = layer("a", LayerKind::Element);
        l.transform.scale = (0.0, 1.0);
        let s = LayerStack { layers: vec![l] };
        assert!(s.validate().is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let s = LayerStack {
            layers: vec![layer("a", LayerKind::Element), layer("a", LayerKind::Background)],
        };
        assert!(s.validate().unwrap_err().contains("duplicate"));
    }

    #[test]
    fn short_aliases_parse() {
        let o: GenOptions =
            serde_json::from_str(r#"{"object":"book","target":"fg","method":"cond","seed":3}"#).unwrap();
        assert_eq!(o.mode(), FlowMode { target: Target::Foreground, method: Method::Conditional });
        assert_eq!(o.description, "");
    }
}
