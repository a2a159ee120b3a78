//! WebSocket endpoint. Each connection owns one `Session`; frames are
//! handled in arrival order and the engine is ticked on a fixed interval.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use echogrid_core::audio::{wav::to_pcm16, HrirSet, Mixer, MixerConfig};
use echogrid_core::tasks::SessionLog;
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;

use crate::persist::persist_log;
use crate::protocol::{ErrorCode, WireMessage};
use crate::session::{Session, SessionConfig};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub log_dir: PathBuf,
    pub session: SessionConfig,
    /// Needed only when clients ask for PCM.
    pub hrir: Option<Arc<HrirSet>>,
    pub tick_hz: f64,
}

impl ServerConfig {
    pub fn new(log_dir: impl Into<PathBuf>) -> Self {
        let session = SessionConfig::default();
        Self {
            log_dir: log_dir.into(),
            tick_hz: session.navigation.tick_hz,
            session,
            hrir: None,
        }
    }
}

struct AppState {
    config: ServerConfig,
    next_id: AtomicU64,
    epoch: u128,
}

pub fn router(config: ServerConfig) -> Router {
    let epoch = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let state = Arc::new(AppState {
        config,
        next_id: AtomicU64::new(1),
        epoch,
    });
    Router::new().route("/ws", get(upgrade)).with_state(state)
}

/// Serves until the listener fails. Bind to port 0 and read
/// `listener.local_addr()` for tests.
pub async fn serve_on(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config)).await
}

pub async fn serve(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on ws://{}/ws", listener.local_addr()?);
    serve_on(listener, config).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    let n = state.next_id.fetch_add(1, Ordering::Relaxed);
    let id = format!("{:x}-{n}", state.epoch);
    ws.on_upgrade(move |socket| connection(socket, state, id))
}

fn save(state: &AppState, id: &str, logs: Vec<SessionLog>) {
    for log in logs {
        match persist_log(&state.config.log_dir, id, &log) {
            Ok(p) => tracing::info!("wrote {}", p.display()),
            Err(e) => tracing::error!("{e}"),
        }
    }
}

/// Server-side audio for one running task; time 0 is the task start.
struct PcmStream {
    mixer: Mixer,
    task_start: f64,
}

async fn send(socket: &mut WebSocket, msg: &WireMessage) -> bool {
    socket.send(Message::Text(msg.to_json().into())).await.is_ok()
}

async fn connection(mut socket: WebSocket, state: Arc<AppState>, id: String) {
    let cfg = &state.config;
    let mut session = Session::new(id.clone(), cfg.session.clone());
    // Client time advances with wall time between client frames.
    let mut anchor = (0.0f64, Instant::now());
    let mut pcm: Option<PcmStream> = None;
    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / cfg.tick_hz));
    interval.set_missed_tick_behavior(MissedTickBehavior::Skip);

    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Binary(_))) => {
                        if !send(&mut socket, &WireMessage::error(ErrorCode::Malformed, "binary frames are server-to-client only")).await {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(_)) => continue,
                };
                let out = match WireMessage::from_json(text.as_str()) {
                    Ok(msg) => {
                        let (next, out) = session.handle(msg);
                        session = next;
                        out
                    }
                    Err(e) => vec![WireMessage::error(ErrorCode::Malformed, e.to_string())],
                };
                anchor = (session.clock(), Instant::now());
                save(&state, &id, session.take_completed());
                let mut fatal = false;
                for m in &out {
                    fatal |= matches!(m, WireMessage::Error { code: ErrorCode::Version, .. });
                    if !send(&mut socket, m).await {
                        fatal = true;
                    }
                }
                if fatal {
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
            }
            _ = interval.tick() => {
                let now = anchor.0 + anchor.1.elapsed().as_secs_f64();
                if let Some(m) = session.tick_mut(now) {
                    if !send(&mut socket, &m).await {
                        break;
                    }
                }
                if let Some(bytes) = pcm_frames(&session, cfg, &mut pcm) {
                    if socket.send(Message::Binary(bytes.into())).await.is_err() {
                        break;
                    }
                }
            }
        }
    }
    let aborted = session.abort().into_iter().collect();
    save(&state, &id, aborted);
}

/// Renders audio up to the engine's latest snapshot as interleaved PCM16 LE.
fn pcm_frames(session: &Session, cfg: &ServerConfig, stream: &mut Option<PcmStream>) -> Option<Vec<u8>> {
    let hrir = cfg.hrir.as_ref().filter(|_| session.wants_pcm())?;
    let Some((start, snap)) = session.running_snapshot() else {
        *stream = None;
        return None;
    };
    if stream.as_ref().is_none_or(|s| s.task_start != start) {
        let grid = session.running_grid()?;
        let mixer = Mixer::new(hrir, grid, MixerConfig::default()).ok()?;
        *stream = Some(PcmStream { mixer, task_start: start });
    }
    let s = stream.as_mut()?;
    let mut local = snap.clone();
    local.timestamp -= start;
    for a in &mut local.activations {
        a.first_seen -= start;
    }
    let sr = s.mixer.sample_rate() as f64;
    let target = (local.timestamp * sr).floor() as i64;
    let n = target - s.mixer.position();
    if n <= 0 {
        return None;
    }
    let block = s.mixer.render_block(&local, n as usize);
    Some(block.frames.iter().flat_map(|&x| to_pcm16(x).to_le_bytes()).collect())
}
