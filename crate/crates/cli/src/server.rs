//! Read-only HTTP API over one snapshot, plus the what-if endpoint.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use voc_core::analytics::FittedModel;
use voc_core::whatif::{simulate_uplift, UpliftConfig, WhatIfError};

use crate::snapshot::{Snapshot, API_SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

type Shared = Arc<Snapshot>;

fn envelope(snap: &Snapshot, data: impl Serialize) -> Response {
    Json(json!({
        "schema_version": API_SCHEMA_VERSION,
        "snapshot": snap.content_hash,
        "data": data,
    }))
    .into_response()
}

fn error(snap: &Snapshot, status: StatusCode, message: impl Into<String>, fields: Vec<FieldError>) -> Response {
    let body = json!({
        "schema_version": API_SCHEMA_VERSION,
        "snapshot": snap.content_hash,
        "error": { "status": status.as_u16(), "message": message.into(), "fields": fields },
    });
    (status, Json(body)).into_response()
}

pub fn router(snapshot: Shared) -> Router {
    Router::new()
        .route("/api/v1/meta", get(meta))
        .route("/api/v1/stores", get(stores))
        .route("/api/v1/stores/{id}", get(store))
        .route("/api/v1/trends", get(trends))
        .route("/api/v1/perceptual-map", get(map))
        .route("/api/v1/model", get(model))
        .route("/api/v1/simulate", post(simulate))
        .fallback(not_found)
        .method_not_allowed_fallback(wrong_method)
        .with_state(snapshot)
}

pub async fn serve(snapshot: Snapshot, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    log::info!("serving snapshot {} on http://{}", snapshot.content_hash, listener.local_addr()?);
    axum::serve(listener, router(Arc::new(snapshot))).await?;
    Ok(())
}

async fn not_found(State(s): State<Shared>, uri: axum::http::Uri) -> Response {
    error(&s, StatusCode::NOT_FOUND, format!("no route for {}", uri.path()), vec![])
}

async fn wrong_method(State(s): State<Shared>, method: axum::http::Method, uri: axum::http::Uri) -> Response {
    error(&s, StatusCode::METHOD_NOT_ALLOWED, format!("{method} not allowed on {}", uri.path()), vec![])
}

fn simulatable(model: Option<&FittedModel<f64>>) -> Vec<String> {
    model.map(crate::snapshot::model_items).unwrap_or_default()
}

async fn meta(State(s): State<Shared>) -> Response {
    let b = &s.body;
    let features: Vec<String> = b.feature_stats.items.iter().map(|i| i.label.clone()).collect();
    envelope(
        &s,
        json!({
            "built_at": b.built_at,
            "n_reviews": b.n_reviews,
            "n_stores": b.stores.len(),
            "taxonomy": b.taxonomy,
            "attributes": b.taxonomy.attribute_names().collect::<Vec<_>>(),
            "features": features,
            "simulatable_features": simulatable(b.feature_model.as_ref().map(|m| &m.model)),
            "min_support": b.trends.min_support,
            "notes": b.notes,
        }),
    )
}

async fn stores(State(s): State<Shared>) -> Response {
    let list: Vec<Value> = s
        .body
        .stores
        .iter()
        .map(|d| {
            json!({
                "store_id": d.store.store_id,
                "name": d.store.name,
                "city": d.store.city,
                "state": d.store.state,
                "latitude": d.store.latitude,
                "longitude": d.store.longitude,
                "n_reviews": d.n_reviews,
                "mean_stars": d.mean_stars,
                "attributes": d.attributes,
            })
        })
        .collect();
    envelope(&s, list)
}

async fn store(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    match s.store(&id) {
        Some(d) => envelope(&s, d),
        None => error(&s, StatusCode::NOT_FOUND, format!("unknown store `{id}`"), vec![]),
    }
}

#[derive(Deserialize)]
struct TrendQuery {
    attribute: Option<String>,
}

async fn trends(State(s): State<Shared>, Query(q): Query<TrendQuery>) -> Response {
    let Some(attribute) = q.attribute else {
        let f = FieldError::new("attribute", "required query parameter");
        return error(&s, StatusCode::BAD_REQUEST, "invalid trends query", vec![f]);
    };
    if s.body.taxonomy.attribute(&attribute).is_none() {
        let f = FieldError::new("attribute", format!("unknown attribute `{attribute}`"));
        return error(&s, StatusCode::BAD_REQUEST, "invalid trends query", vec![f]);
    }
    let t = &s.body.trends;
    let points: Vec<_> = t.for_attribute(&attribute).collect();
    envelope(
        &s,
        json!({
            "attribute": attribute,
            "min_support": t.min_support,
            "points": points,
            "crossings": t.crossings(&attribute),
        }),
    )
}

async fn map(State(s): State<Shared>) -> Response {
    envelope(&s, &s.body.perceptual_map)
}

async fn model(State(s): State<Shared>) -> Response {
    envelope(
        &s,
        json!({
            "attribute": s.body.attribute_model,
            "feature": s.body.feature_model,
        }),
    )
}

#[derive(Debug, PartialEq)]
struct SimulateRequest {
    feature: String,
    stores: Option<Vec<String>>,
    include_non_mentioning: bool,
}

fn parse_simulate(body: &[u8]) -> Result<SimulateRequest, Vec<FieldError>> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| vec![FieldError::new("body", format!("not valid JSON: {e}"))])?;
    let Value::Object(obj) = value else {
        return Err(vec![FieldError::new("body", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    for key in obj.keys() {
        if !matches!(key.as_str(), "feature" | "stores" | "include_non_mentioning") {
            errors.push(FieldError::new(key, "unknown field"));
        }
    }
    let feature = match obj.get("feature") {
        Some(Value::String(f)) if !f.trim().is_empty() => Some(f.clone()),
        Some(Value::String(_)) => {
            errors.push(FieldError::new("feature", "must not be empty"));
            None
        }
        Some(_) => {
            errors.push(FieldError::new("feature", "must be a string"));
            None
        }
        None => {
            errors.push(FieldError::new("feature", "required"));
            None
        }
    };
    let stores = match obj.get("stores") {
        None | Some(Value::Null) => None,
        Some(Value::Array(xs)) => {
            let ids: Option<Vec<String>> = xs.iter().map(|x| x.as_str().map(str::to_string)).collect();
            if ids.is_none() {
                errors.push(FieldError::new("stores", "must be an array of store ids"));
            }
            ids
        }
        Some(_) => {
            errors.push(FieldError::new("stores", "must be an array of store ids"));
            None
        }
    };
    let include_non_mentioning = match obj.get("include_non_mentioning") {
        None | Some(Value::Null) => true,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            errors.push(FieldError::new("include_non_mentioning", "must be a boolean"));
            true
        }
    };
    match (errors.is_empty(), feature) {
        (true, Some(feature)) => Ok(SimulateRequest { feature, stores, include_non_mentioning }),
        _ => Err(errors),
    }
}

fn run_simulation(s: &Snapshot, req: SimulateRequest) -> Result<Value, (StatusCode, String, Vec<FieldError>)> {
    let bad = |field: &str, msg: String| (StatusCode::BAD_REQUEST, "invalid simulate request".to_string(), vec![FieldError::new(field, msg)]);
    let Some(section) = &s.body.feature_model else {
        return Err(bad("feature", "snapshot has no feature-level model".into()));
    };
    let cfg = UpliftConfig { include_non_mentioning: req.include_non_mentioning, ..UpliftConfig::default() };
    let b = &s.body;
    let report = simulate_uplift(
        &b.extractions,
        &b.reviews,
        &b.taxonomy,
        &section.model,
        &req.feature,
        req.stores.as_deref(),
        &cfg,
    )
    .map_err(|e| match e {
        WhatIfError::UnknownFeature(f) => bad("feature", format!("unknown feature `{f}`")),
        WhatIfError::UnknownStore(id) => bad("stores", format!("unknown store `{id}`")),
        WhatIfError::EmptyScope => bad("stores", "no stores in scope".into()),
        other => (StatusCode::INTERNAL_SERVER_ERROR, other.to_string(), vec![]),
    })?;
    Ok(serde_json::to_value(report).expect("report serializes"))
}

async fn simulate(State(s): State<Shared>, body: Bytes) -> Response {
    let req = match parse_simulate(&body) {
        Ok(r) => r,
        Err(fields) => return error(&s, StatusCode::BAD_REQUEST, "invalid simulate request", fields),
    };
    let snap = s.clone();
    let result = tokio::task::spawn_blocking(move || run_simulation(&snap, req)).await;
    match result {
        Ok(Ok(report)) => envelope(&s, report),
        Ok(Err((status, msg, fields))) => error(&s, status, msg, fields),
        Err(e) => error(&s, StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), vec![]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_body_validation() {
        let ok = parse_simulate(br#"{"feature": "Wifi", "stores": ["a"]}"#).unwrap();
        assert_eq!(ok.feature, "Wifi");
        assert_eq!(ok.stores, Some(vec!["a".to_string()]));
        assert!(ok.include_non_mentioning);

        let errs = parse_simulate(br#"{"stores": "a", "extra": 1}"#).unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, ["extra", "feature", "stores"]);
        assert_eq!(parse_simulate(b"[1]").unwrap_err()[0].field, "body");
        assert_eq!(parse_simulate(b"{nope").unwrap_err()[0].field, "body");
        assert_eq!(parse_simulate(br#"{"feature": 3}"#).unwrap_err()[0].message, "must be a string");
    }
}
