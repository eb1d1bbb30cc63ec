//! Static file server for the browser cockpit.

use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Response, Server};

pub struct UiServer {
    server: Arc<Server>,
    handle: Option<JoinHandle<()>>,
    port: u16,
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "wasm" => "application/wasm",
        "map" | "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Maps a request URL to a file under `root`, refusing anything that
/// would climb out of it.
pub fn resolve(root: &Path, url: &str) -> Option<PathBuf> {
    let path = url.split(['?', '#']).next().unwrap_or("");
    let mut out = root.to_path_buf();
    for part in Path::new(path.trim_start_matches('/')).components() {
        match part {
            Component::Normal(p) => out.push(p),
            Component::CurDir => {}
            _ => return None,
        }
    }
    if out.is_dir() {
        out.push("index.html");
    }
    out.is_file().then_some(out)
}

impl UiServer {
    pub fn start(root: PathBuf, port: u16) -> anyhow::Result<UiServer> {
        anyhow::ensure!(root.is_dir(), "ui dir {} is not a directory", root.display());
        let server = Arc::new(Server::http(("127.0.0.1", port)).map_err(|e| anyhow::anyhow!("http listener: {e}"))?);
        let port = server.server_addr().to_ip().map_or(port, |a| a.port());
        let srv = server.clone();
        let handle = std::thread::spawn(move || {
            for req in srv.incoming_requests() {
                let response = match resolve(&root, req.url()).and_then(|p| fs::read(&p).ok().map(|b| (p, b))) {
                    Some((path, body)) => {
                        let header = Header::from_bytes("Content-Type", content_type(&path)).expect("static header");
                        Response::from_data(body).with_header(header)
                    }
                    None => Response::from_string("not found").with_status_code(404),
                };
                if let Err(e) = req.respond(response) {
                    log::debug!("ui response failed: {e}");
                }
            }
        });
        Ok(UiServer {
            server,
            handle: Some(handle),
            port,
        })
    }

    pub fn port(&self) -> u16 {
        self.port
    }
}

impl Drop for UiServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpStream;

    fn get(port: u16, path: &str) -> String {
        let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
        write!(s, "GET {path} HTTP/1.0\r\nHost: localhost\r\n\r\n").unwrap();
        let mut out = String::new();
        s.read_to_string(&mut out).unwrap();
        out
    }

    #[test]
    fn resolve_stays_inside_root() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("index.html"), "hi").unwrap();
        fs::create_dir(dir.path().join("js")).unwrap();
        fs::write(dir.path().join("js/app.js"), "x").unwrap();
        assert_eq!(resolve(dir.path(), "/").unwrap(), dir.path().join("index.html"));
        assert_eq!(resolve(dir.path(), "/js/app.js?v=1").unwrap(), dir.path().join("js/app.js"));
        assert!(resolve(dir.path(), "/../etc/passwd").is_none());
        assert!(resolve(dir.path(), "/missing.css").is_none());
    }

    #[test]
    fn serves_files_with_types() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("index.html"), "<h1>cockpit</h1>").unwrap();
        fs::write(dir.path().join("app.js"), "let a = 1;").unwrap();
        let ui = UiServer::start(dir.path().to_path_buf(), 0).unwrap();
        let index = get(ui.port(), "/");
        assert!(index.starts_with("HTTP/1.") && index.contains(" 200 "), "{index}");
        assert!(index.contains("text/html") && index.ends_with("<h1>cockpit</h1>"));
        assert!(get(ui.port(), "/app.js").contains("text/javascript"));
        assert!(get(ui.port(), "/nope").contains(" 404 "));
    }
}
