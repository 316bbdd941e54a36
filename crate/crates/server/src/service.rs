//! Blocking service layer shared by the HTTP API and the CLI.
//!
//! Mutations of one project are serialized by a per-project write lock and
//! every mutation persists before returning. Reads take the shared side of
//! the same lock, so they see either the state before or after a mutation.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chartforge::attention::{LargestComponent, SegmentationProvider};
use chartforge::chart::{
    derive_geometry, export_annotations, parse_table, render_plain, synthesize_mask, AspectRatio, ChartGeometry,
    ChartSpec, ChartType, MaskVariant, TableFormat, BACKGROUND_COLOR,
};
use chartforge::evaluation::{background_score, evaluate_chart, DistortionReport, EvalConfig};
use chartforge::genclient::{
    connect, BackendDescriptor, GenBackend, HttpKeywordProvider, HttpSegmentation,
};
use chartforge::modification::{
    plan_replication, refine_canvas, replicate, HarmonizePrompt, ReplicationPlan,
};
use chartforge::raster::RasterImage;
use chartforge::semantics::{
    extract_keywords, load_embeddings, related_terms, EmbeddingTable, KeywordProvider, KeywordSet,
    RarityKeywords, RelatedTerm,
};
use serde::{Deserialize, Serialize};

use crate::composite::{flatten, place};
use crate::error::ServiceError;
use crate::flows::{run_flow, FlowContext, FlowOutput};
use crate::model::{
    AssetId, GalleryEntry, GenOptions, Layer, LayerKind, LayerStack, LayerTransform, LayeredDocument, Project,
    StoredRequest, Target, LAYERED_VERSION,
};
use crate::store::{asset_id_of, new_project_id, AssetKind, Store};

pub const DATA_DIR_VAR: &str = "CHARTFORGE_DATA_DIR";
pub const EMBEDDINGS_VAR: &str = "CHARTFORGE_EMBEDDINGS";
/// Related terms returned per keyword.
pub const RELATED_PER_KEYWORD: usize = 5;
pub const DEFAULT_REPLICATE_STRENGTH: f64 = 0.25;
pub const DEFAULT_REFINE_STRENGTH: f64 = 0.3;

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CreateProject {
    /// CSV or JSON text.
    pub data: String,
    #[serde(default = "default_format")]
    pub format: TableFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// Full chart spec; when absent one is built from `chart_type` and the
    /// table's default columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ChartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_type: Option<ChartType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect_ratio: Option<AspectRatio>,
}

fn default_format() -> TableFormat {
    TableFormat::Csv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticsView {
    pub keywords: KeywordSet,
    pub related: BTreeMap<String, Vec<RelatedTerm>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct ReplicateRequest {
    /// Gallery entry whose result is replicated.
    pub entry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ReplicationPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicatedElement {
    pub mark: usize,
    pub asset: AssetId,
    pub layer: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResponse {
    pub plan: ReplicationPlan,
    pub elements: Vec<ReplicatedElement>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct RefineRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineResponse {
    pub asset: AssetId,
    pub strength: f64,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct EvaluateRequest {
    /// Layer to evaluate; the flattened canvas when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ExportRequest {
    pub format: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Export {
    Png(Vec<u8>),
    Layered(Box<LayeredDocument>),
}

pub struct Service {
    store: Store,
    backend: Arc<dyn GenBackend>,
    segmentation: Arc<dyn SegmentationProvider>,
    keywords: Arc<dyn KeywordProvider>,
    embeddings: Option<Arc<EmbeddingTable>>,
    locks: Mutex<HashMap<String, Arc<RwLock<()>>>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Plain preview with the white background made transparent, for the chart
/// layer of the canvas.
fn marks_only(preview: &RasterImage) -> RasterImage {
    let mut out = preview.clone();
    for y in 0..out.height() {
        for x in 0..out.width() {
            if out.pixel(x, y) == BACKGROUND_COLOR {
                out.set_pixel(x, y, [0, 0, 0, 0]);
            }
        }
    }
    out
}

/// Tight crop around non-transparent pixels; the whole image if opaque
/// everywhere or empty.
fn crop_to_alpha(image: &RasterImage) -> RasterImage {
    let (w, h) = image.dims();
    let mut bounds: Option<(u32, u32, u32, u32)> = None;
    for y in 0..h {
        for x in 0..w {
            if image.alpha(x, y) > 0 {
                bounds = Some(match bounds {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    let Some((x0, y0, x1, y1)) = bounds else { return image.clone() };
    let (cw, ch) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut data = Vec::with_capacity((cw * ch * 4) as usize);
    for y in y0..=y1 {
        for x in x0..=x1 {
            data.extend_from_slice(&image.pixel(x, y));
        }
    }
    RasterImage::from_rgba(cw, ch, data).expect("crop is non-empty")
}

impl Service {
    pub fn new(
        store: Store,
        backend: Arc<dyn GenBackend>,
        segmentation: Arc<dyn SegmentationProvider>,
        keywords: Arc<dyn KeywordProvider>,
        embeddings: Option<Arc<EmbeddingTable>>,
    ) -> Self {
        Service {
            store,
            backend,
            segmentation,
            keywords,
            embeddings,
            locks: Mutex::new(HashMap::new()),
        }
    }

    /// Mock backend, built-in segmentation and keyword scoring.
    pub fn with_mock(store: Store, embeddings: Option<Arc<EmbeddingTable>>) -> Self {
        let backend = connect(&BackendDescriptor::mock()).expect("mock descriptor is valid");
        let keywords = Arc::new(RarityKeywords::new(embeddings.clone()));
        Service::new(store, backend, Arc::new(LargestComponent), keywords, embeddings)
    }

    /// Wires providers from a backend descriptor: an HTTP backend also serves
    /// keyword scoring and segmentation.
    pub fn from_descriptor(
        store: Store,
        descriptor: &BackendDescriptor,
        embeddings: Option<Arc<EmbeddingTable>>,
    ) -> Result<Self, ServiceError> {
        if descriptor.is_mock() {
            return Ok(Service::with_mock(store, embeddings));
        }
        let backend = connect(descriptor)?;
        let segmentation = Arc::new(HttpSegmentation::new(descriptor.clone())?);
        let keywords = Arc::new(HttpKeywordProvider::new(descriptor.clone())?);
        Ok(Service::new(store, backend, segmentation, keywords, embeddings))
    }

    /// Reads `CHARTFORGE_DATA_DIR`, `CHARTFORGE_BACKEND_URL` and
    /// `CHARTFORGE_EMBEDDINGS`, with explicit arguments taking precedence.
    pub fn from_env(data_dir: Option<PathBuf>, backend_url: Option<String>) -> Result<Self, ServiceError> {
        let dir = data_dir
            .or_else(|| std::env::var_os(DATA_DIR_VAR).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("chartforge-data"));
        let descriptor = match backend_url {
            Some(url) if url == "mock" => BackendDescriptor::mock(),
            Some(url) => BackendDescriptor::http(&url),
            None => BackendDescriptor::from_env(),
        };
        let embeddings = match std::env::var_os(EMBEDDINGS_VAR) {
            Some(path) => {
                let bytes = std::fs::read(&path)
                    .map_err(|e| ServiceError::Storage(format!("{}: {e}", PathBuf::from(&path).display())))?;
                Some(Arc::new(load_embeddings(&bytes)?))
            }
            None => None,
        };
        Service::from_descriptor(Store::open(dir)?, &descriptor, embeddings)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn backend(&self) -> &dyn GenBackend {
        self.backend.as_ref()
    }

    fn lock(&self, id: &str) -> Arc<RwLock<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    fn read<T>(&self, id: &str, f: impl FnOnce(Project) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let lock = self.lock(id);
        let _guard = lock.read().unwrap_or_else(|e| e.into_inner());
        f(self.store.load_project(id)?)
    }

    fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Project) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let lock = self.lock(id);
        let _guard = lock.write().unwrap_or_else(|e| e.into_inner());
        let mut project = self.store.load_project(id)?;
        let out = f(&mut project)?;
        project.modified_ms = now_ms();
        self.store.save_project(&project)?;
        Ok(out)
    }

    pub fn geometry(project: &Project) -> Result<ChartGeometry, ServiceError> {
        Ok(derive_geometry(&project.table, &project.spec)?)
    }

    pub fn create_project(&self, request: CreateProject) -> Result<Project, ServiceError> {
        let mut table = parse_table(request.data.as_bytes(), request.format)?;
        if let Some(title) = &request.title {
            table = table.with_title(title.clone());
        }
        let spec = match request.spec {
            Some(spec) => spec,
            None => {
                let (x, y) = table.default_xy();
                let mut spec = ChartSpec::new(request.chart_type.unwrap_or(ChartType::Bar), &x, &y);
                if let Some(ar) = request.aspect_ratio {
                    spec.aspect_ratio = ar;
                }
                spec
            }
        };
        let geometry = derive_geometry(&table, &spec)?;
        let preview = render_plain(&geometry, &spec);
        let preview_asset = self.store.put_png(&preview)?;
        let chart_asset = self.store.put_png(&marks_only(&preview))?;
        let annotation_asset = self
            .store
            .put_asset(export_annotations(&geometry, &table).to_svg().as_bytes())?;
        let now = now_ms();
        let mut project = Project {
            id: new_project_id(),
            table,
            spec,
            preview_asset,
            annotation_asset: annotation_asset.clone(),
            layers: LayerStack::default(),
            gallery: Vec::new(),
            created_ms: now,
            modified_ms: now,
            next_layer: 0,
        };
        for (name, kind, asset) in [
            ("chart", LayerKind::Element, chart_asset),
            ("annotations", LayerKind::Annotation, annotation_asset),
        ] {
            let id = project.allocate_layer_id();
            project.layers.layers.push(Layer {
                id,
                name: name.into(),
                kind,
                asset,
                transform: LayerTransform::IDENTITY,
                visible: true,
                source: None,
            });
        }
        self.store.save_project(&project)?;
        tracing::info!(project = %project.id, chart = %project.spec.chart_type, "project created");
        Ok(project)
    }

    pub fn project(&self, id: &str) -> Result<Project, ServiceError> {
        self.read(id, Ok)
    }

    pub fn semantics(&self, id: &str) -> Result<SemanticsView, ServiceError> {
        let project = self.project(id)?;
        let keywords = match project.table.title() {
            Some(title) => extract_keywords(title, self.keywords.as_ref())?,
            None => KeywordSet::default(),
        };
        let mut related = BTreeMap::new();
        if let Some(table) = &self.embeddings {
            for term in keywords.terms() {
                if table.vector(term).is_some() {
                    related.insert(term.to_string(), related_terms(term, table, RELATED_PER_KEYWORD)?);
                }
            }
        }
        Ok(SemanticsView { keywords, related })
    }

    /// Runs a flow against a project's chart without storing anything.
    pub fn run(&self, project: &Project, options: &GenOptions) -> Result<FlowOutput, ServiceError> {
        let geometry = Service::geometry(project)?;
        run_flow(
            &FlowContext {
                geometry: &geometry,
                backend: self.backend.as_ref(),
                segmentation: self.segmentation.as_ref(),
            },
            options,
        )
    }

    pub fn generate(&self, id: &str, options: GenOptions) -> Result<GalleryEntry, ServiceError> {
        // Generation runs outside the write lock; only the append is serialized.
        let snapshot = self.project(id)?;
        let out = self.run(&snapshot, &options)?;
        let result_asset = self.store.put_png(&out.image)?;
        let init_asset = match &out.request.init_image {
            Some(img) => Some(self.store.put_png(img)?),
            None => None,
        };
        let condition_asset = init_asset.clone().filter(|_| out.condition.is_some());
        let mask_asset = match &out.mask {
            Some(m) => Some(self.store.put_png(&m.to_raster())?),
            None => None,
        };
        let request = StoredRequest {
            prompt_object: out.request.prompt_object.clone(),
            prompt_description: out.request.prompt_description.clone(),
            mode: out.request.mode,
            init_asset,
            strength: out.request.strength,
            seed: out.request.seed,
            size: out.request.size,
        };
        self.mutate(id, |project| {
            let entry = GalleryEntry {
                id: format!("g{}", project.gallery.len() + 1),
                mode: options.mode(),
                options: options.clone(),
                request,
                result_asset: result_asset.clone(),
                condition_asset,
                mask_asset,
                augment: out.augment,
                kept: true,
                created_ms: now_ms(),
            };
            let layer = Layer {
                id: project.allocate_layer_id(),
                name: format!("{} ({})", options.object.trim(), entry.id),
                kind: match options.target {
                    Target::Foreground => LayerKind::Element,
                    Target::Background => LayerKind::Background,
                },
                asset: result_asset,
                transform: LayerTransform::IDENTITY,
                visible: true,
                source: Some(entry.id.clone()),
            };
            match options.target {
                Target::Foreground => project.layers.insert_element(layer),
                Target::Background => project.layers.insert_background(layer),
            }
            project.gallery.push(entry.clone());
            tracing::info!(project = %project.id, entry = %entry.id, "generated");
            Ok(entry)
        })
    }

    /// Re-runs a gallery entry's stored options and returns the asset id the
    /// result would be stored under.
    pub fn replay(&self, id: &str, entry: &str) -> Result<AssetId, ServiceError> {
        let project = self.project(id)?;
        let entry = project.entry(entry).ok_or_else(|| ServiceError::NotFound {
            what: "gallery entry",
            id: entry.to_string(),
        })?;
        let out = self.run(&project, &entry.options)?;
        Ok(asset_id_of(&out.image.to_png()?))
    }

    pub fn set_kept(&self, id: &str, entry: &str, kept: bool) -> Result<GalleryEntry, ServiceError> {
        self.mutate(id, |project| {
            let e = project
                .gallery
                .iter_mut()
                .find(|e| e.id == entry)
                .ok_or_else(|| ServiceError::NotFound {
                    what: "gallery entry",
                    id: entry.to_string(),
                })?;
            e.kept = kept;
            Ok(e.clone())
        })
    }

    /// Replaces the layer stack. Only order, visibility, names and transforms
    /// may change; every asset must already be stored.
    pub fn set_layers(&self, id: &str, layers: LayerStack) -> Result<Project, ServiceError> {
        layers.validate().map_err(ServiceError::InvalidLayers)?;
        for l in &layers.layers {
            if let Err(ServiceError::NotFound { .. }) = self.store.asset(&l.asset) {
                return Err(ServiceError::InvalidLayers(format!(
                    "layer `{}` references unknown asset {}",
                    l.id, l.asset
                )));
            }
        }
        self.mutate(id, |project| {
            project.layers = layers;
            Ok(project.clone())
        })
    }

    pub fn replicate(&self, id: &str, request: ReplicateRequest) -> Result<ReplicateResponse, ServiceError> {
        let snapshot = self.project(id)?;
        let geometry = Service::geometry(&snapshot)?;
        let entry = snapshot.entry(&request.entry).ok_or_else(|| ServiceError::NotFound {
            what: "gallery entry",
            id: request.entry.clone(),
        })?;
        let plan = match request.plan {
            Some(p) => p,
            None => plan_replication(&geometry)?,
        };
        plan.validate(&geometry)?;
        let element = crop_to_alpha(&self.store.load_png(&entry.result_asset)?);
        let prompt = HarmonizePrompt {
            object: entry.options.object.clone(),
            description: entry.options.description.clone(),
            seed: entry.options.seed,
        };
        let strength = request.strength.unwrap_or(DEFAULT_REPLICATE_STRENGTH);
        let copies = replicate(&element, &plan, &geometry, self.backend.as_ref(), &prompt, strength)?;
        let mut stored = Vec::with_capacity(copies.len());
        for (mark, img) in &copies {
            stored.push((*mark, self.store.put_png(img)?, img.dims()));
        }
        let source = entry.id.clone();
        self.mutate(id, |project| {
            let mut elements = Vec::new();
            for (mark, asset, (w, h)) in stored {
                let (_, bar) = geometry.bars().find(|(i, _)| *i == mark).expect("plan validated");
                let layer = Layer {
                    id: project.allocate_layer_id(),
                    name: format!("{source} bar {mark}"),
                    kind: LayerKind::Element,
                    asset: asset.clone(),
                    transform: LayerTransform {
                        translate: (bar.x, bar.bottom() - h as f64),
                        rotation: 0.0,
                        scale: (bar.width / w as f64, 1.0),
                    },
                    visible: true,
                    source: Some(source.clone()),
                };
                elements.push(ReplicatedElement {
                    mark,
                    asset,
                    layer: layer.id.clone(),
                    width: w,
                    height: h,
                });
                project.layers.insert_element(layer);
            }
            Ok(ReplicateResponse { plan, elements })
        })
    }

    fn placed(&self, project: &Project, layer: &Layer) -> Result<Option<RasterImage>, ServiceError> {
        match self.store.asset(&layer.asset)? {
            (bytes, AssetKind::Png) => {
                let img = RasterImage::from_png(&bytes)?;
                Ok(Some(place(&img, &layer.transform, project.spec.canvas_size)))
            }
            (_, AssetKind::Svg) => Ok(None),
        }
    }

    /// Visible raster layers flattened over white. Annotation layers are
    /// vector and ship in the layered export instead.
    pub fn composite(&self, project: &Project) -> Result<RasterImage, ServiceError> {
        let (w, h) = project.spec.canvas_size;
        let mut placed = Vec::new();
        for layer in project.layers.layers.iter().filter(|l| l.visible) {
            if let Some(img) = self.placed(project, layer)? {
                placed.push(img);
            }
        }
        if placed.is_empty() {
            return Err(ServiceError::NoLayers);
        }
        Ok(flatten(RasterImage::filled(w, h, BACKGROUND_COLOR), &placed))
    }

    pub fn refine(&self, id: &str, request: RefineRequest) -> Result<RefineResponse, ServiceError> {
        let project = self.project(id)?;
        let composite = self.composite(&project)?;
        let last = project.gallery.iter().rev().find(|e| e.kept);
        let object = request
            .object
            .or_else(|| last.map(|e| e.options.object.clone()))
            .or_else(|| project.table.title().map(str::to_string))
            .unwrap_or_else(|| "illustration".into());
        let description = request
            .description
            .or_else(|| last.map(|e| e.options.description.clone()))
            .unwrap_or_default();
        let strength = request.strength.unwrap_or(DEFAULT_REFINE_STRENGTH);
        let prompt = HarmonizePrompt {
            object,
            description,
            seed: request.seed,
        };
        let out = refine_canvas(&composite, self.backend.as_ref(), &prompt, strength)?;
        Ok(RefineResponse {
            asset: self.store.put_png(&out)?,
            strength,
        })
    }

    pub fn evaluate(&self, id: &str, request: EvaluateRequest) -> Result<DistortionReport, ServiceError> {
        let project = self.project(id)?;
        let geometry = Service::geometry(&project)?;
        let config = EvalConfig::for_width(project.spec.canvas_size.0);
        let chart = self.store.load_png(&project.preview_asset)?;
        let Some(layer_id) = request.layer else {
            let composite = self.composite(&project)?;
            return Ok(evaluate_chart(&geometry, &chart, &composite, &config)?);
        };
        let layer = project.layers.get(&layer_id).ok_or_else(|| ServiceError::NotFound {
            what: "layer",
            id: layer_id.clone(),
        })?;
        let placed = self
            .placed(&project, layer)?
            .ok_or_else(|| ServiceError::BadRequest(format!("layer `{layer_id}` is not a raster")))?;
        match layer.kind {
            LayerKind::Background => {
                let mask = synthesize_mask(&geometry, MaskVariant::SolidMarks)?;
                Ok(background_score(&mask, &placed, &config)?)
            }
            _ => Ok(evaluate_chart(&geometry, &chart, &placed, &config)?),
        }
    }

    pub fn export(&self, id: &str, format: &str) -> Result<Export, ServiceError> {
        let project = self.project(id)?;
        match format.to_ascii_lowercase().as_str() {
            "png" => Ok(Export::Png(self.composite(&project)?.to_png()?)),
            "layered" | "json" => {
                let mut assets = BTreeMap::new();
                for asset in project.referenced_assets() {
                    let (bytes, _) = self.store.asset(&asset)?;
                    assets.insert(asset, BASE64.encode(bytes));
                }
                Ok(Export::Layered(Box::new(LayeredDocument {
                    version: LAYERED_VERSION,
                    table: project.table,
                    spec: project.spec,
                    preview_asset: project.preview_asset,
                    annotation_asset: project.annotation_asset,
                    layers: project.layers,
                    gallery: project.gallery,
                    next_layer: project.next_layer,
                    assets,
                })))
            }
            other => Err(ServiceError::UnsupportedFormat(other.to_string())),
        }
    }

    /// Creates a new project from a layered export.
    pub fn import_layered(&self, doc: LayeredDocument) -> Result<Project, ServiceError> {
        if doc.version != LAYERED_VERSION {
            return Err(ServiceError::UnsupportedFormat(format!("layered document version {}", doc.version)));
        }
        doc.layers.validate().map_err(ServiceError::InvalidLayers)?;
        derive_geometry(&doc.table, &doc.spec)?;
        for (id, b64) in &doc.assets {
            let bytes = BASE64
                .decode(b64)
                .map_err(|e| ServiceError::BadRequest(format!("asset {id}: {e}")))?;
            let stored = self.store.put_asset(&bytes)?;
            if &stored != id {
                return Err(ServiceError::BadRequest(format!("asset {id} does not match its content")));
            }
        }
        let now = now_ms();
        let project = Project {
            id: new_project_id(),
            table: doc.table,
            spec: doc.spec,
            preview_asset: doc.preview_asset,
            annotation_asset: doc.annotation_asset,
            layers: doc.layers,
            gallery: doc.gallery,
            created_ms: now,
            modified_ms: now,
            next_layer: doc.next_layer,
        };
        for asset in project.referenced_assets() {
            self.store.asset(&asset).map_err(|_| {
                ServiceError::BadRequest(format!("layered document is missing asset {asset}"))
            })?;
        }
        self.store.save_project(&project)?;
        Ok(project)
    }

    pub fn asset(&self, id: &str) -> Result<(Vec<u8>, AssetKind), ServiceError> {
        self.store.asset(&AssetId(id.to_string()))
    }
}
