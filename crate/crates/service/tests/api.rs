use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use gsfill_core::camera::{cameras_to_json, load_cameras_auto};
use gsfill_core::pipeline::{render_options, InpaintConfig, InpaintSession, ReferenceView};
use gsfill_core::render::render_with;
use gsfill_core::synthetic::{disk_fixture, DiskFixture};
use gsfill_core::{dilate_mask, load_scene_ply, save_scene_ply, ColorImage, DepthMap, GaussianScene, MaskImage};
use gsfill_service::{router, state_hash};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const SIZE: usize = 64;

struct Fixture {
    dir: tempfile::TempDir,
    fx: DiskFixture,
    /// The scene as the service loaded it.
    scene: GaussianScene,
    app: Router,
    id: String,
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    call(app, Request::post(uri).body(Body::from(body)).unwrap()).await
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, bytes) = call(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn write_inputs(dir: &Path, fx: &DiskFixture) {
    save_scene_ply(&fx.holed, &dir.join("scene.ply")).unwrap();
    std::fs::write(dir.join("cameras.json"), cameras_to_json(std::slice::from_ref(&fx.pose))).unwrap();
}

async fn open() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let fx = disk_fixture(SIZE);
    write_inputs(dir.path(), &fx);
    let app = router();
    let (status, body) = post_json(
        &app,
        "/sessions",
        json!({
            "scene": dir.path().join("scene.ply"),
            "cameras": dir.path().join("cameras.json"),
        }),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["state_hash"], state_hash(&fx.holed));
    let id = body["id"].as_str().unwrap().to_string();
    let scene = load_scene_ply(&dir.path().join("scene.ply")).unwrap();
    Fixture {
        dir,
        fx,
        scene,
        app,
        id,
    }
}

async fn upload(f: &Fixture, mask: &MaskImage) -> (usize, usize) {
    let view = &f.fx.pose.name;
    let (status, body) = post(&f.app, &format!("/sessions/{}/mask?view={view}", f.id), mask.encode_png()).await;
    assert_eq!(status, StatusCode::OK);
    let mask_id = json_of(&body)["mask_id"].as_u64().unwrap() as usize;
    let (status, body) = post(
        &f.app,
        &format!("/sessions/{}/image?view={view}", f.id),
        f.fx.ground_truth.encode_png(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    (mask_id, json_of(&body)["image_id"].as_u64().unwrap() as usize)
}

#[tokio::test]
async fn fresh_render_matches_library_render() {
    let f = open().await;
    let lib = render_with(&f.scene, &f.fx.pose, &render_options(&InpaintConfig::default()));
    let base = format!("/sessions/{}/render?view={}", f.id, f.fx.pose.name);

    let (status, color) = get(&f.app, &base).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(color, lib.color.encode_png());
    let (_, alpha) = get(&f.app, &format!("{base}&mode=alpha")).await;
    assert_eq!(alpha, lib.alpha_png());
    let (_, depth) = get(&f.app, &format!("{base}&mode=depth")).await;
    assert_eq!(depth, lib.depth.encode_tiff());
    let decoded = DepthMap::decode_tiff(&depth).unwrap();
    assert_eq!(decoded.valid, lib.depth.valid);
}

#[tokio::test]
async fn views_list_thumbnails() {
    let f = open().await;
    let (status, body) = get(&f.app, &format!("/sessions/{}/views", f.id)).await;
    assert_eq!(status, StatusCode::OK);
    let views = json_of(&body);
    assert_eq!(views.as_array().unwrap().len(), 1);
    assert_eq!(views[0]["name"], f.fx.pose.name.as_str());
    assert!(views[0]["thumbnail"].as_str().unwrap().starts_with("data:image/png;base64,"));
}

#[tokio::test]
async fn mask_round_trips_and_reports_dilation() {
    let f = open().await;
    let (mask_id, _) = upload(&f, &f.fx.mask).await;
    let (_, raw) = get(&f.app, &format!("/sessions/{}/masks/{mask_id}?raw=true", f.id)).await;
    assert_eq!(MaskImage::decode_png(&raw).unwrap(), f.fx.mask);
    let (_, dilated) = get(&f.app, &format!("/sessions/{}/masks/{mask_id}", f.id)).await;
    let want = dilate_mask(&f.fx.mask, InpaintConfig::default().dilation_radius);
    assert_eq!(MaskImage::decode_png(&dilated).unwrap(), want);
}

#[tokio::test]
async fn empty_mask_step_is_noop() {
    let f = open().await;
    let before = state_hash(&f.fx.holed);
    let empty = MaskImage::new(f.fx.pose.width, f.fx.pose.height);
    let (mask, image) = upload(&f, &empty).await;
    let (status, body) = post_json(
        &f.app,
        &format!("/sessions/{}/step", f.id),
        json!({ "view": f.fx.pose.name, "mask": mask, "image": image }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["record"]["report"]["noop"], true);
    assert_eq!(body["state_hash"], before);
}

#[tokio::test]
async fn step_matches_library_and_undo_restores_hash() {
    let f = open().await;
    let before = state_hash(&f.fx.holed);
    let (mask, image) = upload(&f, &f.fx.mask).await;
    let overrides = json!({ "finetune_iters": 5 });
    let (status, body) = post_json(
        &f.app,
        &format!("/sessions/{}/step", f.id),
        json!({
            "view": f.fx.pose.name,
            "mask": mask,
            "image": image,
            "backend": "harmonic",
            "overrides": overrides,
        }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["step"], 1);

    let cfg = InpaintConfig {
        finetune_iters: 5,
        ..Default::default()
    };
    let mut lib = InpaintSession::new(f.scene.clone());
    let reference = ReferenceView {
        pose: load_cameras_auto(&f.dir.path().join("cameras.json")).unwrap().remove(0),
        mask: f.fx.mask.clone(),
        image: ColorImage::decode_png(&f.fx.ground_truth.encode_png()).unwrap(),
    };
    let record = lib.step(&reference, &cfg, &mut cfg.build_backend().unwrap()).unwrap().clone();
    assert_eq!(body["state_hash"], state_hash(lib.current()));
    assert_ne!(body["state_hash"], before);

    let (status, ply) = get(&f.app, &format!("/sessions/{}/pointcloud?step=1", f.id)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(ply).unwrap(), record.artifacts.cloud.to_ascii_ply());

    let (status, body) = post_json(&f.app, &format!("/sessions/{}/undo", f.id), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["state_hash"], before);
    let (status, body) = post_json(&f.app, &format!("/sessions/{}/undo", f.id), json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "nothing_to_undo");
}

#[tokio::test]
async fn errors_carry_codes() {
    let f = open().await;
    let (status, body) = get(&f.app, "/sessions/nope/views").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["error"]["code"], "not_found");

    let (status, body) = post(&f.app, &format!("/sessions/{}/mask?view=0", f.id), b"not a png".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["error"]["code"], "image_error");

    let small = MaskImage::filled(8, 8, true);
    let (status, body) = post(&f.app, &format!("/sessions/{}/mask?view=0", f.id), small.encode_png()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["error"]["code"], "invalid_argument");

    let (mask, image) = upload(&f, &f.fx.mask).await;
    let (status, body) = post_json(
        &f.app,
        &format!("/sessions/{}/step", f.id),
        json!({ "view": "0", "mask": mask, "image": image, "overrides": { "lambda": 3.0 } }),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "invalid_argument");

    let (status, body) = post_json(
        &f.app,
        "/sessions",
        json!({ "scene": "/nonexistent/scene.ply", "cameras": "/nonexistent/cameras.json" }),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "io_error");
}

#[tokio::test]
async fn extractor_rejections_are_json() {
    let f = open().await;
    let (status, body) = get(&f.app, &format!("/sessions/{}/render", f.id)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["error"]["code"], "invalid_argument");
    let (status, body) = get(&f.app, &format!("/sessions/{}/masks/first", f.id)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["error"]["code"], "invalid_argument");
    let (status, body) = post_json(&f.app, &format!("/sessions/{}/step", f.id), json!({ "view": "0" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "parse_error");
}

#[tokio::test]
async fn serve_refuses_non_loopback() {
    let err = gsfill_service::serve("0.0.0.0:0".parse().unwrap()).await.unwrap_err();
    assert_eq!(err.kind(), std::io::ErrorKind::InvalidInput);
}

#[tokio::test]
async fn documented_routes_are_served() {
    let doc: Value = serde_json::from_str(include_str!("../../../docs/openapi.json")).unwrap();
    let app = router();
    for (path, ops) in doc["paths"].as_object().unwrap() {
        if path == "/sessions" {
            continue;
        }
        let uri = path.replace("{id}", "missing").replace("{mask}", "0");
        for method in ops.as_object().unwrap().keys() {
            let req = Request::builder()
                .method(method.to_uppercase().as_str())
                .uri(format!("{uri}?view=0&step=1"))
                .header("content-type", "application/json")
                .body(Body::from("{}"))
                .unwrap();
            let (status, body) = call(&app, req).await;
            // matched routes answer with a JSON error; unmatched ones have an empty body
            let parsed: Option<Value> = serde_json::from_slice(&body).ok();
            let code = parsed.as_ref().and_then(|v| v["error"]["code"].as_str().map(str::to_string));
            assert!(code.is_some(), "{method} {path}: {status} without a JSON error");
            assert!(status.is_client_error(), "{method} {path}: {status}");
        }
    }
}
