//! Line-delimited JSON over TCP. Each request line gets one response line.
//!
//! Requests:
//! * `{"plan": {...}}` with the same fields as the `plan` flags; the
//!   response is the plan report, exactly as `plan --json` prints it.
//! * `{"overlay": "hop ordinal kind args... from to"}` appends one
//!   annotation; the response is `{"epoch": n}`.
//! * `{"clear": {"hop": 3, "kind": "delay"}}` removes matching annotations
//!   (all fields optional); the response is `{"epoch": n}`.
//! * `"epoch"` returns the current overlay epoch.
//!
//! Failures come back as `{"error": message, "code": n}` with the exit code
//! `plan` would have used. The connection stays open.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use anyhow::Result;
use bbtime::network::HopId;
use bbtime::overlay::{parse_annotation, KindTag, OverlayHandle, Selector};
use bbtime::Error;
use serde::Deserialize;
use serde_json::json;

use crate::exit_code;
use crate::plan::{self, Loaded, PlanRequest};

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum Request {
    Plan(PlanRequest),
    Overlay(String),
    Clear(ClearRequest),
    Epoch,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ClearRequest {
    hop: Option<HopId>,
    ordinal: Option<u32>,
    kind: Option<String>,
}

struct Shared {
    loaded: Loaded,
    overlay: OverlayHandle,
}

pub fn serve(loaded: Loaded, overlay: OverlayHandle, port: u16) -> Result<()> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    let shared = Arc::new(Shared { loaded, overlay });
    for conn in listener.incoming() {
        let conn = conn?;
        let shared = Arc::clone(&shared);
        thread::spawn(move || {
            if let Err(e) = handle(&shared, conn) {
                eprintln!("connection: {e}");
            }
        });
    }
    Ok(())
}

fn handle(shared: &Shared, conn: TcpStream) -> Result<()> {
    let mut out = conn.try_clone()?;
    for line in BufReader::new(conn).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reply = respond(shared, &line);
        reply.push('\n');
        out.write_all(reply.as_bytes())?;
        out.flush()?;
    }
    Ok(())
}

fn respond(shared: &Shared, line: &str) -> String {
    let req: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return error(2, &format!("bad request: {e}")),
    };
    let result = match req {
        Request::Plan(p) => {
            let snapshot = shared.overlay.snapshot();
            plan::run(&shared.loaded, &snapshot, &p).and_then(|r| Ok(serde_json::to_string(&r)?))
        }
        Request::Overlay(text) => append(shared, &text),
        Request::Clear(c) => clear(shared, c),
        Request::Epoch => Ok(epoch(shared.overlay.snapshot().epoch())),
    };
    result.unwrap_or_else(|e| error(exit_code(&e), &format!("{e:#}")))
}

fn append(shared: &Shared, text: &str) -> Result<String> {
    let a = parse_annotation(text).map_err(Error::Validation)?;
    let e = shared.overlay.update(|o| o.apply(&shared.loaded.net, a))?;
    Ok(epoch(e))
}

fn clear(shared: &Shared, c: ClearRequest) -> Result<String> {
    let kind = c.kind.as_deref().map(str::parse::<KindTag>).transpose()?;
    let sel = Selector {
        hop: c.hop,
        ordinal: c.ordinal,
        kind,
    };
    Ok(epoch(shared.overlay.update(|o| o.clear(&sel))))
}

fn epoch(e: u64) -> String {
    json!({ "epoch": e }).to_string()
}

fn error(code: i32, msg: &str) -> String {
    json!({ "error": msg, "code": code }).to_string()
}
