use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::routing::post;
use axum::Router;
use chartforge::genclient::{
    generate, BackendDescriptor, GenBackend, GenError, GenRequest, HttpBackend, MockBackend,
};
use chartforge::raster::RasterImage;
use chartforge_server::api::{self, ErrorBody};
use chartforge_server::model::{GalleryEntry, Project};
use chartforge_server::store::Store;
use chartforge_server::Service;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};
use tempfile::TempDir;

const BARS: &str = "region,area\nSahara,9.2\nArabian,2.3\nGobi,1.3\n";

/// Serves `app` on an ephemeral port from a background runtime.
fn spawn(app: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let addr: SocketAddr = listener.local_addr().unwrap();
            tx.send(addr).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn api_server() -> (TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_mock(Store::open(dir.path()).unwrap(), None);
    (dir, spawn(api::router(Arc::new(svc))))
}

fn client() -> Client {
    Client::builder().timeout(Duration::from_secs(120)).build().unwrap()
}

fn create(c: &Client, base: &str) -> Project {
    let r = c
        .post(format!("{base}/projects"))
        .json(&json!({"data": BARS, "title": "Desert area", "chart_type": "bar"}))
        .send()
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    r.json().unwrap()
}

#[test]
fn project_lifecycle_over_http() {
    let (_d, base) = api_server();
    let c = client();
    let p = create(&c, &base);
    let fetched: Project = c.get(format!("{base}/projects/{}", p.id)).send().unwrap().json().unwrap();
    assert_eq!(fetched, p);

    let semantics: Value = c.get(format!("{base}/projects/{}/semantics", p.id)).send().unwrap().json().unwrap();
    assert!(semantics["keywords"].to_string().contains("desert"), "{semantics}");

    let r = c
        .post(format!("{base}/projects/{}/generate", p.id))
        .json(&json!({"object": "cactus", "target": "fg", "method": "cond", "seed": 4}))
        .send()
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let entry: GalleryEntry = r.json().unwrap();

    let r = c.get(format!("{base}/assets/{}", entry.result_asset.0)).send().unwrap();
    assert_eq!(r.headers()["content-type"], "image/png");
    let img = RasterImage::from_png(&r.bytes().unwrap()).unwrap();
    assert_eq!(img.dims(), (512, 512));

    let r = c
        .patch(format!("{base}/projects/{}/gallery/{}", p.id, entry.id))
        .json(&json!({"kept": false}))
        .send()
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert!(!r.json::<GalleryEntry>().unwrap().kept);

    let mut project: Project = c.get(format!("{base}/projects/{}", p.id)).send().unwrap().json().unwrap();
    project.layers.layers.swap(0, 1);
    project.layers.layers[2].visible = false;
    let r = c.put(format!("{base}/projects/{}/layers", p.id)).json(&project.layers).send().unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.json::<Project>().unwrap().layers, project.layers);

    let r = c.post(format!("{base}/projects/{}/evaluate", p.id)).json(&json!({})).send().unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let report: Value = r.json().unwrap();
    assert!(report["global_score"].as_f64().unwrap() <= 1.0);

    let r = c.post(format!("{base}/projects/{}/export", p.id)).json(&json!({"format": "png"})).send().unwrap();
    assert_eq!(r.headers()["content-type"], "image/png");

    let layered: Value = c
        .post(format!("{base}/projects/{}/export", p.id))
        .json(&json!({"format": "layered"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let r = c.post(format!("{base}/projects")).json(&json!({"layered": layered})).send().unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let imported: Project = r.json().unwrap();
    assert_eq!(imported.layers, project.layers);
}

#[test]
fn errors_map_to_status_codes() {
    let (_d, base) = api_server();
    let c = client();
    let r = c.post(format!("{base}/projects")).json(&json!({"data": "a,b\n1\n"})).send().unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    assert_eq!(r.json::<ErrorBody>().unwrap().error, "malformed_input");

    let r = c.get(format!("{base}/projects/{}", "0".repeat(32))).send().unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let r = c.get(format!("{base}/assets/..%2F..%2Fetc")).send().unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    let pie: Project = c
        .post(format!("{base}/projects"))
        .json(&json!({"data": BARS, "chart_type": "pie"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let entry: GalleryEntry = c
        .post(format!("{base}/projects/{}/generate", pie.id))
        .json(&json!({"object": "orange", "target": "fg", "method": "uncond"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let r = c
        .post(format!("{base}/projects/{}/replicate", pie.id))
        .json(&json!({"entry": entry.id}))
        .send()
        .unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json::<ErrorBody>().unwrap().error, "unsupported_chart_type");

    let r = c.post(format!("{base}/projects/{}/export", pie.id)).json(&json!({"format": "tiff"})).send().unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
}

#[test]
fn http_backend_matches_the_in_process_mock() {
    let base = spawn(api::mock_backend_router());
    let http = HttpBackend::new(BackendDescriptor::http(&base)).unwrap();
    let mock = MockBackend::default();
    let txt = GenRequest::txt2img("cactus", "desert plant", 17, (512, 512));
    let a = generate(&txt, &http).unwrap();
    let b = generate(&txt, &mock).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.attention, b.attention);
    let img = GenRequest::img2img("cactus", "", b.image.clone(), 0.4, 3);
    assert_eq!(generate(&img, &http).unwrap().image, generate(&img, &mock).unwrap().image);

    let dir_http = tempfile::tempdir().unwrap();
    let dir_mock = tempfile::tempdir().unwrap();
    let via_http =
        Service::from_descriptor(Store::open(dir_http.path()).unwrap(), &BackendDescriptor::http(&base), None).unwrap();
    let local = Service::with_mock(Store::open(dir_mock.path()).unwrap(), None);
    let upload = || serde_json::from_value(json!({"data": BARS, "title": "Desert area", "chart_type": "bar"})).unwrap();
    let p1 = via_http.create_project(upload()).unwrap();
    let p2 = local.create_project(upload()).unwrap();
    assert_eq!(via_http.semantics(&p1.id).unwrap().keywords, local.semantics(&p2.id).unwrap().keywords);
    for (target, method) in [("fg", "uncond"), ("fg", "cond"), ("bg", "cond")] {
        let opts = || serde_json::from_value(json!({"object": "cactus", "target": target, "method": method, "seed": 2})).unwrap();
        let e1 = via_http.generate(&p1.id, opts()).unwrap();
        let e2 = local.generate(&p2.id, opts()).unwrap();
        assert_eq!(e1.result_asset, e2.result_asset, "{target} {method}");
    }
}

#[test]
fn slow_backend_times_out_and_missing_backend_is_unreachable() {
    let slow = Router::new().route(
        "/generate",
        post(|| async {
            tokio::time::sleep(Duration::from_secs(3)).await;
            "{}"
        }),
    );
    let base = spawn(slow);
    let mut d = BackendDescriptor::http(&base);
    d.timeout_ms = 300;
    let backend = HttpBackend::new(d).unwrap();
    let req = GenRequest::txt2img("cactus", "", 1, (64, 64));
    assert_eq!(backend.render(&req), Err(GenError::BackendTimeout { timeout_ms: 300 }));

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let closed = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let backend = HttpBackend::new(BackendDescriptor::http(&closed)).unwrap();
    assert!(matches!(backend.render(&req), Err(GenError::BackendUnreachable { .. })));
}
