//! WebSocket endpoint at [`BRIDGE_PATH`]. One reader and one writer task per
//! connection; the writer drains the session's bounded outbox.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tokio_tungstenite::tungstenite::http::StatusCode;
use tokio_tungstenite::tungstenite::Message;

use super::bus::Bus;
use super::protocol::{encode_frame, Level, WireMessage};
use super::table::{Delivery, Outbox, OUTBOX_DEPTH};

pub const BRIDGE_PATH: &str = "/bridge";

/// Loopback address on `port`; the default bind.
pub fn loopback(port: u16) -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], port))
}

/// A running server. Dropping the handle does not stop it; call
/// [`ServerHandle::shutdown`].
#[derive(Debug)]
pub struct ServerHandle {
    local_addr: SocketAddr,
    stop: watch::Sender<bool>,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops accepting, closes every open connection and waits for the
    /// accept loop to exit.
    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        let _ = self.task.await;
    }
}

/// Binds `addr` and serves the bridge on it until shut down.
pub async fn serve(bus: Bus, addr: SocketAddr) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let local_addr = listener.local_addr()?;
    let (stop, mut stopped) = watch::channel(false);
    let conn_stop = stop.subscribe();
    let task = tokio::spawn(async move {
        loop {
            tokio::select! {
                _ = stopped.changed() => break,
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let bus = bus.clone();
                        let stop = conn_stop.clone();
                        tokio::spawn(async move {
                            if let Err(e) = connection(bus, stream, stop).await {
                                log::debug!("connection {peer}: {e}");
                            }
                        });
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                },
            }
        }
    });
    log::info!("bridge listening on ws://{local_addr}{BRIDGE_PATH}");
    Ok(ServerHandle { local_addr, stop, task })
}

#[allow(clippy::result_large_err)]
fn check_path(req: &Request, resp: Response) -> Result<Response, ErrorResponse> {
    if req.uri().path() == BRIDGE_PATH {
        return Ok(resp);
    }
    let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
    *err.status_mut() = StatusCode::NOT_FOUND;
    Err(err)
}

fn reply(outbox: &Outbox, level: Level, text: &str) {
    outbox.push(Delivery {
        frame: encode_frame(&WireMessage::status(level, text, None)).into(),
        meta: None,
    });
}

async fn connection(bus: Bus, stream: TcpStream, mut stop: watch::Receiver<bool>) -> Result<(), tokio_tungstenite::tungstenite::Error> {
    let ws = tokio_tungstenite::accept_hdr_async(stream, check_path).await?;
    let (mut sink, mut source) = ws.split();
    let outbox = Outbox::bounded(OUTBOX_DEPTH);
    let session = bus.open_session(outbox.clone());
    log::debug!("session {session} opened");

    let writer_box: Arc<Outbox> = outbox.clone();
    let writer = tokio::spawn(async move {
        while let Some(d) = writer_box.recv().await {
            if sink.send(Message::Text(d.frame.to_string())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    loop {
        tokio::select! {
            _ = stop.changed() => break,
            frame = source.next() => match frame {
                Some(Ok(Message::Text(text))) => {
                    bus.handle_text(session, &text);
                }
                Some(Ok(Message::Binary(_))) => reply(&outbox, Level::Error, "binary frames are not supported"),
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => {}
                Some(Err(e)) => {
                    log::debug!("session {session} read error: {e}");
                    break;
                }
            },
        }
    }
    bus.close_session(session);
    let _ = writer.await;
    log::debug!("session {session} closed");
    Ok(())
}
