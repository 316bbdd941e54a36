use std::sync::Arc;

use chartforge::chart::{ChartError, ChartType};
use chartforge::evaluation::MetricKind;
use chartforge::modification::{ModificationError, ReplicationPlan};
use chartforge::raster::{BinaryGrid, RasterImage};
use chartforge::semantics::EmbeddingTable;
use chartforge_server::model::{GenOptions, LayerKind, Method, Target};
use chartforge_server::service::{CreateProject, EvaluateRequest, Export, RefineRequest, ReplicateRequest};
use chartforge_server::store::Store;
use chartforge_server::{Service, ServiceError};
use tempfile::TempDir;

const BARS: &str = "region,area\nSahara,9.2\nArabian,2.3\nGobi,1.3\n";
const LINE: &str = "year,visitors\n2015,12\n2016,18\n2017,15\n2018,25\n2019,30\n2020,22\n";

fn service() -> (TempDir, Service) {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_mock(Store::open(dir.path()).unwrap(), None);
    (dir, svc)
}

fn upload(data: &str, chart: ChartType, title: Option<&str>) -> CreateProject {
    CreateProject {
        data: data.into(),
        format: chartforge::chart::TableFormat::Csv,
        title: title.map(str::to_string),
        spec: None,
        chart_type: Some(chart),
        aspect_ratio: None,
    }
}

fn options(target: Target, method: Method, seed: u64) -> GenOptions {
    GenOptions {
        object: "cactus".into(),
        description: "desert plant".into(),
        target,
        method,
        mask_variant: None,
        seed,
        strength: None,
        augment: None,
    }
}

#[test]
fn bar_upload_builds_preview_and_annotations() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(BARS, ChartType::Bar, Some("Desert area"))).unwrap();
    let preview = svc.store().load_png(&p.preview_asset).unwrap();
    assert_eq!(preview.dims(), (512, 512));
    let (svg, _) = svc.asset(&p.annotation_asset.0).unwrap();
    let svg = String::from_utf8(svg).unwrap();
    assert_eq!(svg.matches("class=\"x-tick\"").count(), 3);
    assert!(svg.contains("Desert area"));
    let kinds: Vec<LayerKind> = p.layers.layers.iter().map(|l| l.kind).collect();
    assert_eq!(kinds, [LayerKind::Element, LayerKind::Annotation]);
    assert_eq!(svc.project(&p.id).unwrap(), p);
}

#[test]
fn malformed_upload_reports_location() {
    let (_d, svc) = service();
    let err = svc.create_project(upload("a,b\n1,2\n3\n", ChartType::Bar, None)).unwrap_err();
    match err {
        ServiceError::Chart(ChartError::MalformedInput { location, .. }) => assert!(location.contains('3'), "{location}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn identical_uploads_get_distinct_ids() {
    let (_d, svc) = service();
    let a = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    let b = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    assert_ne!(a.id, b.id);
    assert_eq!(a.preview_asset, b.preview_asset);
}

#[test]
fn semantics_follow_the_title() {
    let mut table = EmbeddingTable::new(3);
    for (w, v, f) in [
        ("desert", [1.0, 0.0, 0.0], 50),
        ("sand", [0.9, 0.1, 0.0], 40),
        ("dune", [0.8, 0.2, 0.1], 10),
        ("camel", [0.7, 0.0, 0.3], 30),
        ("ocean", [0.0, 1.0, 0.0], 60),
    ] {
        table.insert(w, v.to_vec(), f).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_mock(Store::open(dir.path()).unwrap(), Some(Arc::new(table)));
    let p = svc.create_project(upload(BARS, ChartType::Bar, Some("Area of the largest deserts"))).unwrap();
    let s = svc.semantics(&p.id).unwrap();
    assert!(s.keywords.contains("desert") || s.keywords.contains("deserts"));
    assert!(!s.keywords.is_empty());
    let untitled = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    let s = svc.semantics(&untitled.id).unwrap();
    assert!(s.keywords.is_empty() && s.related.is_empty());
    assert!(matches!(svc.semantics(&"f".repeat(32)), Err(ServiceError::NotFound { .. })));

    let p = svc.create_project(upload(BARS, ChartType::Bar, Some("desert"))).unwrap();
    let related = &svc.semantics(&p.id).unwrap().related["desert"];
    let terms: Vec<&str> = related.iter().map(|r| r.term.as_str()).collect();
    assert_eq!(terms, ["ocean", "sand", "camel", "dune"]);
}

#[test]
fn every_flow_produces_a_gallery_entry_and_layer() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    for (target, method) in [
        (Target::Foreground, Method::Unconditional),
        (Target::Background, Method::Unconditional),
        (Target::Foreground, Method::Conditional),
        (Target::Background, Method::Conditional),
    ] {
        let entry = svc.generate(&p.id, options(target, method, 11)).unwrap();
        let img = svc.store().load_png(&entry.result_asset).unwrap();
        assert_eq!(img.dims(), (512, 512));
        assert_eq!(entry.condition_asset.is_some(), method == Method::Conditional);
        let project = svc.project(&p.id).unwrap();
        let layer = project.layers.layers.iter().find(|l| l.source.as_deref() == Some(entry.id.as_str())).unwrap();
        assert_eq!(layer.kind == LayerKind::Background, target == Target::Background);
    }
    let project = svc.project(&p.id).unwrap();
    assert_eq!(project.gallery.len(), 4);
    assert_eq!(project.layers.layers.first().unwrap().kind, LayerKind::Background);
    assert_eq!(project.layers.layers.last().unwrap().kind, LayerKind::Annotation);
}

fn mask_of(svc: &Service, asset: &chartforge_server::model::AssetId) -> BinaryGrid {
    let img = svc.store().load_png(asset).unwrap();
    BinaryGrid::from_fn(img.width(), img.height(), |x, y| img.pixel(x, y)[0] > 127)
}

#[test]
fn unconditional_foreground_is_clear_outside_its_mask() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    let e = svc.generate(&p.id, options(Target::Foreground, Method::Unconditional, 5)).unwrap();
    let img = svc.store().load_png(&e.result_asset).unwrap();
    let mask = mask_of(&svc, e.mask_asset.as_ref().unwrap());
    let mut opaque = 0;
    for y in 0..512 {
        for x in 0..512 {
            if !mask.get(x, y) {
                assert_eq!(img.alpha(x, y), 0);
            }
            opaque += (img.alpha(x, y) > 0) as usize;
        }
    }
    assert!(opaque > 0);
}

#[test]
fn conditional_support_stays_in_the_chart_mask() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(LINE, ChartType::Line, None)).unwrap();
    for target in [Target::Foreground, Target::Background] {
        let e = svc.generate(&p.id, options(target, Method::Conditional, 8)).unwrap();
        let cond = svc.store().load_png(e.condition_asset.as_ref().unwrap()).unwrap();
        let support = BinaryGrid::from_fn(512, 512, |x, y| cond.pixel(x, y)[..3].iter().any(|&c| c > 0));
        let mask = mask_of(&svc, e.mask_asset.as_ref().unwrap());
        assert!(!support.is_empty());
        assert!(support.is_subset_of(&mask));
    }
}

#[test]
fn same_seed_same_asset_and_replay_matches() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    for (target, method) in [
        (Target::Foreground, Method::Conditional),
        (Target::Foreground, Method::Unconditional),
    ] {
        let a = svc.generate(&p.id, options(target, method, 3)).unwrap();
        let b = svc.generate(&p.id, options(target, method, 3)).unwrap();
        assert_eq!(a.result_asset, b.result_asset);
        assert_eq!(svc.replay(&p.id, &a.id).unwrap(), a.result_asset);
        let c = svc.generate(&p.id, options(target, method, 4)).unwrap();
        assert_ne!(a.result_asset, c.result_asset);
    }
}

#[test]
fn replication_places_one_copy_per_bar() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    let e = svc.generate(&p.id, options(Target::Foreground, Method::Unconditional, 2)).unwrap();
    let r = svc
        .replicate(&p.id, ReplicateRequest { entry: e.id.clone(), plan: None, strength: Some(0.2) })
        .unwrap();
    assert_eq!(r.elements.len(), 3);
    let project = svc.project(&p.id).unwrap();
    for (el, (_, h)) in r.elements.iter().zip(&r.plan.targets) {
        assert_eq!(el.height, *h);
        assert_eq!(svc.store().load_png(&el.asset).unwrap().height(), *h);
        assert!(project.layers.get(&el.layer).is_some());
    }

    let mut plan = r.plan.clone();
    plan.targets[0].1 = 10_000;
    let err = svc
        .replicate(&p.id, ReplicateRequest { entry: e.id.clone(), plan: Some(plan), strength: None })
        .unwrap_err();
    assert!(matches!(err, ServiceError::Modification(ModificationError::InvalidPlan(_))), "{err:?}");

    let pie = svc.create_project(upload(BARS, ChartType::Pie, None)).unwrap();
    let e = svc.generate(&pie.id, options(Target::Foreground, Method::Unconditional, 2)).unwrap();
    let err = svc
        .replicate(&pie.id, ReplicateRequest { entry: e.id, plan: None, strength: None })
        .unwrap_err();
    assert!(matches!(
        err,
        ServiceError::Modification(ModificationError::UnsupportedChartType(ChartType::Pie))
    ));
    let bogus = ReplicationPlan { source_bar: 0, targets: vec![], slice_count: 5 };
    assert!(svc
        .replicate(&p.id, ReplicateRequest { entry: "g99".into(), plan: Some(bogus), strength: None })
        .is_err());
}

#[test]
fn refine_strength_zero_is_identity_and_empty_canvas_fails() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    svc.generate(&p.id, options(Target::Background, Method::Unconditional, 1)).unwrap();
    let project = svc.project(&p.id).unwrap();
    let composite = svc.composite(&project).unwrap();
    let r = svc.refine(&p.id, RefineRequest { strength: Some(0.0), ..Default::default() }).unwrap();
    assert_eq!(svc.store().load_png(&r.asset).unwrap(), composite);

    let r = svc.refine(&p.id, RefineRequest { strength: Some(0.3), ..Default::default() }).unwrap();
    let refined = svc.store().load_png(&r.asset).unwrap();
    for (a, b) in composite.pixels().zip(refined.pixels()) {
        for c in 0..3 {
            assert!((a[c] as f64 - b[c] as f64).abs() <= 0.3 * 255.0 + 1.0);
        }
    }

    let mut layers = project.layers.clone();
    for l in &mut layers.layers {
        l.visible = false;
    }
    svc.set_layers(&p.id, layers).unwrap();
    assert!(matches!(svc.refine(&p.id, RefineRequest::default()), Err(ServiceError::NoLayers)));
}

#[test]
fn evaluation_dispatches_by_target() {
    let (_d, svc) = service();
    let bar = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    let report = svc.evaluate(&bar.id, EvaluateRequest::default()).unwrap();
    assert_eq!(report.global_score, 1.0);
    assert_eq!(report.metric_kind, MetricKind::Height);
    let chart_layer = bar.layers.layers[0].id.clone();
    let report = svc.evaluate(&bar.id, EvaluateRequest { layer: Some(chart_layer) }).unwrap();
    assert_eq!(report.global_score, 1.0);

    let e = svc.generate(&bar.id, options(Target::Background, Method::Conditional, 6)).unwrap();
    let project = svc.project(&bar.id).unwrap();
    let bg = project.layers.layers.iter().find(|l| l.source.as_deref() == Some(e.id.as_str())).unwrap();
    let report = svc.evaluate(&bar.id, EvaluateRequest { layer: Some(bg.id.clone()) }).unwrap();
    assert_eq!(report.metric_kind, MetricKind::Trend);

    let line = svc.create_project(upload(LINE, ChartType::Line, None)).unwrap();
    let report = svc.evaluate(&line.id, EvaluateRequest::default()).unwrap();
    assert!(report.global_score >= 0.99);
    let e = svc.generate(&line.id, options(Target::Foreground, Method::Conditional, 6)).unwrap();
    let project = svc.project(&line.id).unwrap();
    let fg = project.layers.layers.iter().find(|l| l.source.as_deref() == Some(e.id.as_str())).unwrap();
    let report = svc.evaluate(&line.id, EvaluateRequest { layer: Some(fg.id.clone()) }).unwrap();
    let covered: u32 = report.windows.iter().map(|w| w.x_range.1 - w.x_range.0).sum();
    assert_eq!(covered, 512);
    assert!(matches!(
        svc.evaluate(&line.id, EvaluateRequest { layer: Some("nope".into()) }),
        Err(ServiceError::NotFound { .. })
    ));
}

#[test]
fn exports_round_trip() {
    let (_d, svc) = service();
    let p = svc.create_project(upload(BARS, ChartType::Bar, Some("Deserts"))).unwrap();
    svc.generate(&p.id, options(Target::Foreground, Method::Conditional, 9)).unwrap();
    let Export::Png(png) = svc.export(&p.id, "png").unwrap() else { panic!() };
    assert_eq!(RasterImage::from_png(&png).unwrap().dims(), (512, 512));
    let Export::Layered(doc) = svc.export(&p.id, "layered").unwrap() else { panic!() };
    let json = serde_json::to_string(&doc).unwrap();

    let (_d2, other) = service();
    let imported = other.import_layered(serde_json::from_str(&json).unwrap()).unwrap();
    let original = svc.project(&p.id).unwrap();
    assert_ne!(imported.id, original.id);
    assert_eq!(imported.layers, original.layers);
    assert_eq!(imported.gallery, original.gallery);
    let Export::Png(again) = other.export(&imported.id, "png").unwrap() else { panic!() };
    assert_eq!(again, png);
    assert!(matches!(svc.export(&p.id, "gif"), Err(ServiceError::UnsupportedFormat(_))));
}

#[test]
fn layer_edits_and_kept_flags_persist() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_mock(Store::open(dir.path()).unwrap(), None);
    let p = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    let e = svc.generate(&p.id, options(Target::Foreground, Method::Unconditional, 1)).unwrap();
    let mut layers = svc.project(&p.id).unwrap().layers;
    layers.layers.reverse();
    layers.layers[0].visible = false;
    layers.layers[1].transform.rotation = 0.5;
    svc.set_layers(&p.id, layers.clone()).unwrap();
    svc.set_kept(&p.id, &e.id, false).unwrap();

    let reopened = Service::with_mock(Store::open(dir.path()).unwrap(), None);
    let p2 = reopened.project(&p.id).unwrap();
    assert_eq!(p2.layers, layers);
    assert!(!p2.gallery[0].kept);

    let mut bad = layers.clone();
    bad.layers[0].transform.scale = (0.0, 1.0);
    assert!(matches!(svc.set_layers(&p.id, bad), Err(ServiceError::InvalidLayers(_))));
    let mut bad = layers;
    bad.layers[0].asset = chartforge_server::model::AssetId("a".repeat(64));
    assert!(matches!(svc.set_layers(&p.id, bad), Err(ServiceError::InvalidLayers(_))));
    assert!(matches!(svc.set_kept(&p.id, "g42", true), Err(ServiceError::NotFound { .. })));
}

#[test]
fn concurrent_generations_keep_every_entry() {
    let (_d, svc) = service();
    let svc = Arc::new(svc);
    let p = svc.create_project(upload(BARS, ChartType::Bar, None)).unwrap();
    let handles: Vec<_> = (0..6)
        .map(|seed| {
            let svc = svc.clone();
            let id = p.id.clone();
            std::thread::spawn(move || svc.generate(&id, options(Target::Background, Method::Unconditional, seed)).unwrap())
        })
        .collect();
    let mut ids: Vec<String> = handles.into_iter().map(|h| h.join().unwrap().id).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 6);
    let project = svc.project(&p.id).unwrap();
    assert_eq!(project.gallery.len(), 6);
    assert_eq!(project.layers.layers.len(), 8);
}
