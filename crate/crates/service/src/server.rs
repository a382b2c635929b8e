use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use tokio::net::TcpListener;

use crate::protocol::{ClientFrame, ErrorCode, ModelInfo, ServerFrame};
use crate::session::{ModelRegistry, Session};

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<ModelRegistry>,
    pub silence_dbfs: f64,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/models", get(models))
        .route("/session", get(session))
        .with_state(state)
}

async fn models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    Json(state.registry.info())
}

async fn session(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, state))
}

async fn send(socket: &mut WebSocket, frame: &ServerFrame) -> bool {
    socket.send(Message::Text(frame.to_json().into())).await.is_ok()
}

async fn run_session(mut socket: WebSocket, state: AppState) {
    let mut session: Option<Session> = None;
    while let Some(Ok(msg)) = socket.recv().await {
        let replies: Vec<ServerFrame> = match msg {
            Message::Text(text) => match serde_json::from_str::<ClientFrame>(&text) {
                Err(e) => vec![ServerFrame::error(ErrorCode::BadFrame, e.to_string())],
                Ok(ClientFrame::ModelInfo) => vec![ServerFrame::ModelInfo { models: state.registry.info() }],
                Ok(ClientFrame::Start { tasks, sample_rate }) => match &session {
                    Some(_) => vec![ServerFrame::error(ErrorCode::AlreadyStarted, "session already started")],
                    None => match Session::start(&state.registry, &tasks, sample_rate, state.silence_dbfs) {
                        Ok(s) => {
                            tracing::info!(session = s.id(), ?tasks, sample_rate, "session started");
                            let frame = s.start_frame();
                            session = Some(s);
                            vec![frame]
                        }
                        Err(e) => vec![e.frame()],
                    },
                },
                Ok(ClientFrame::ChunkMeta { chunk_index }) => match &session {
                    None => vec![ServerFrame::error(ErrorCode::NotStarted, "send start first")],
                    Some(s) => s.expect_chunk(chunk_index).err().map(|e| e.frame()).into_iter().collect(),
                },
            },
            Message::Binary(bytes) => match &mut session {
                None => vec![ServerFrame::error(ErrorCode::NotStarted, "send start first")],
                Some(s) => match s.ingest_bytes(&bytes) {
                    Ok(outcome) => s.frames(&outcome),
                    Err(e) => vec![e.frame()],
                },
            },
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        for frame in &replies {
            if !send(&mut socket, frame).await {
                return;
            }
        }
    }
    if let Some(s) = session {
        tracing::info!(session = s.id(), chunks = s.next_chunk(), "session closed");
    }
}

/// Binds `addr` and serves until the future `shutdown` resolves.
pub async fn serve(
    state: AppState,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    serve_on(state, listener, shutdown).await
}

pub async fn serve_on(
    state: AppState,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
