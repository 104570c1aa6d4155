#![allow(dead_code)]

use std::sync::Arc;

/// Status code and JSON body.
pub type Reply = (u16, String);

/// Minimal HTTP server on an ephemeral port; every request is handled on its
/// own thread. Returns the base URL.
pub fn serve<F>(handler: F) -> String
where
    F: Fn(&str, &str, String) -> Reply + Send + Sync + 'static,
{
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind");
    let port = server.server_addr().to_ip().expect("ip").port();
    let handler = Arc::new(handler);
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let handler = handler.clone();
            std::thread::spawn(move || {
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let (status, reply) = handler(req.method().as_str(), req.url(), body);
                let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = req.respond(tiny_http::Response::from_string(reply).with_status_code(status).with_header(header));
            });
        }
    });
    format!("http://127.0.0.1:{port}")
}

pub fn json_array(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| traitsteer::remote::wire_number(*v)).collect();
    format!("[{}]", parts.join(","))
}
