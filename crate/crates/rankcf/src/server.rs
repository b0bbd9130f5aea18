//! HTTP front end for [`Service`].
//!
//! Besides the explanation endpoints, every corpus's built-in BM25 ranker is
//! published under `/rankers/<corpus>` using the external ranker and
//! embedding protocols, so one instance can serve as the remote model of
//! another.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use rankcf_core::cf_instance::VectorSpace;
use rankcf_core::ranking::DocText;
use rankcf_core::{Query, Ranker};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;

use crate::error::ApiError;
use crate::remote::{EmbedRequest, EmbedResponse, ScoreRequest, ScoreResponse};
use crate::service::{ConfigError, Service, ServiceConfig};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: port in use")]
    PortInUse { addr: String },
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

type Shared = Arc<Service>;

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match serde_json::to_string(value) {
        Ok(body) => (status, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e) => error_response(&ApiError::internal(e.to_string())),
    }
}

fn error_response(e: &ApiError) -> Response {
    let status = StatusCode::from_u16(e.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = serde_json::to_string(&e.body()).unwrap_or_else(|_| String::from("{}"));
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// Parse `body`, run `op` on a blocking thread and serialize its outcome.
async fn run<Req, Resp, F>(service: Shared, body: Bytes, op: F) -> Response
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
    F: FnOnce(&Service, Req) -> Result<Resp, ApiError> + Send + 'static,
{
    let req: Req = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(&ApiError::bad_request(format!("invalid request body: {e}"))),
    };
    match tokio::task::spawn_blocking(move || op(&service, req)).await {
        Ok(Ok(resp)) => json_response(StatusCode::OK, &resp),
        Ok(Err(e)) => error_response(&e),
        Err(e) => error_response(&ApiError::internal(e.to_string())),
    }
}

async fn corpora(State(s): State<Shared>) -> Response {
    json_response(StatusCode::OK, &s.corpora())
}

async fn rank(State(s): State<Shared>, body: Bytes) -> Response {
    run(s, body, |s, r| s.rank(&r)).await
}

async fn explain_document(State(s): State<Shared>, body: Bytes) -> Response {
    run(s, body, |s, r| s.explain_document(&r)).await
}

async fn explain_query(State(s): State<Shared>, body: Bytes) -> Response {
    run(s, body, |s, r| s.explain_query(&r)).await
}

async fn explain_instance(State(s): State<Shared>, body: Bytes) -> Response {
    run(s, body, |s, r| s.explain_instance(&r)).await
}

async fn builder_rerank(State(s): State<Shared>, body: Bytes) -> Response {
    run(s, body, |s, r| s.builder_rerank(&r)).await
}

async fn topics(State(s): State<Shared>, body: Bytes) -> Response {
    run(s, body, |s, r| s.topics(&r)).await
}

fn builtin_scores(service: &Service, corpus: &str, req: ScoreRequest) -> Result<ScoreResponse, ApiError> {
    let h = service.handle(corpus)?;
    let docs: Vec<DocText<'_>> = req.docs.iter().map(|d| DocText { id: &d.id, text: &d.text }).collect();
    let scores = h.bm25.score_batch(&Query::new(req.query), &docs)?;
    Ok(ScoreResponse { scores })
}

/// Dense BM25 vectors over the indexed vocabulary; terms outside it are dropped.
fn builtin_embeddings(service: &Service, corpus: &str, req: EmbedRequest) -> Result<EmbedResponse, ApiError> {
    let h = service.handle(corpus)?;
    let space = VectorSpace::from_ranker(&h.bm25);
    let vocab: Vec<&str> = h.bm25.index().terms().collect();
    let vectors = req
        .docs
        .iter()
        .map(|d| {
            let v = space.text_vector(&d.id, &d.text);
            vocab.iter().map(|t| v.weights.get(*t).copied().unwrap_or(0.0)).collect()
        })
        .collect();
    Ok(EmbedResponse { vectors })
}

async fn score(State(s): State<Shared>, Path(corpus): Path<String>, body: Bytes) -> Response {
    run(s, body, move |s, r| builtin_scores(s, &corpus, r)).await
}

async fn embed(State(s): State<Shared>, Path(corpus): Path<String>, body: Bytes) -> Response {
    run(s, body, move |s, r| builtin_embeddings(s, &corpus, r)).await
}

async fn fallback(uri: Uri) -> Response {
    error_response(&ApiError::not_found(uri.path()))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/corpora", get(corpora))
        .route("/rank", post(rank))
        .route("/explanations/document", post(explain_document))
        .route("/explanations/query", post(explain_query))
        .route("/explanations/instance", post(explain_instance))
        .route("/builder/rerank", post(builder_rerank))
        .route("/topics", post(topics))
        .route("/rankers/{corpus}/score", post(score))
        .route("/rankers/{corpus}/embed", post(embed))
        .fallback(fallback)
        .with_state(service)
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| {
        if source.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::PortInUse { addr: addr.to_owned() }
        } else {
            ServeError::Bind { addr: addr.to_owned(), source }
        }
    })
}

pub async fn serve_on(listener: TcpListener, service: Arc<Service>) -> Result<(), ServeError> {
    axum::serve(listener, router(service)).await?;
    Ok(())
}

/// Load every configured corpus, then serve until the process exits.
///
/// Blocks the calling thread. The service (and its blocking HTTP clients)
/// is built before the async runtime starts.
pub fn serve(config: &ServiceConfig) -> Result<(), ServeError> {
    let service = Arc::new(Service::from_config(config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = bind(&format!("{}:{}", config.host, config.port)).await?;
        let local: SocketAddr = listener.local_addr()?;
        eprintln!("listening on http://{local}");
        serve_on(listener, service).await
    })
}

/// Serve `service` on an ephemeral local port from a background thread.
/// Returns once the listener is bound.
pub fn spawn_local(service: Arc<Service>) -> std::io::Result<SocketAddr> {
    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    std::thread::Builder::new().name(format!("rankcf-{addr}")).spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .expect("tokio runtime");
        runtime.block_on(async move {
            let listener = TcpListener::from_std(listener).expect("listener");
            let _ = serve_on(listener, service).await;
        });
    })?;
    Ok(addr)
}
