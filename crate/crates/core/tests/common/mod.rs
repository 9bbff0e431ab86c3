#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use reframe::pipeline::{scene_from_rgbd, PipelineConfig, Scene};
use reframe::synthetic::{fixture_scenes, SyntheticScene};

/// Fixture scenes reconstructed without padding, at the default base fovy.
pub fn fixture_pairs() -> Vec<(SyntheticScene, Scene)> {
    fixture_scenes()
        .into_iter()
        .map(|s| {
            let scene = scene_from_rgbd(&s.image, &s.depth, 60.0, false).expect("fixture reconstructs");
            (s, scene)
        })
        .collect()
}

/// Default settings, except that fixtures are used as given.
pub fn fixture_config() -> PipelineConfig {
    PipelineConfig {
        preprocess: false,
        ..PipelineConfig::default()
    }
}

/// 9-D negative Rastrigin on the unit box, maximum 0 at `x = 0.7` in every coordinate.
pub fn neg_rastrigin(x: &[f64]) -> f64 {
    let mut s = 10.0 * x.len() as f64;
    for &v in x {
        let z = 10.24 * (v - 0.7);
        s += z * z - 10.0 * (2.0 * std::f64::consts::PI * z).cos();
    }
    -s
}

/// What the stub scorer answers.
#[derive(Clone)]
pub enum StubReply {
    /// Fixed status, content type and body.
    Fixed { status: u16, content_type: &'static str, body: String },
    /// `{"score": mean Rec.709 luma}` of the posted PNG.
    MeanLuminance,
    /// Sleeps before answering `{"score": 0}`.
    Slow(Duration),
}

/// A minimal HTTP/1.1 server on a loopback port, one thread per connection.
pub struct StubServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    pub max_in_flight: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String, Vec<u8>)> {
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let mut content_length = 0usize;
    let mut content_type = String::new();
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            match k.trim().to_ascii_lowercase().as_str() {
                "content-length" => content_length = v.trim().parse().ok()?,
                "content-type" => content_type = v.trim().to_string(),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok()?;
    Some((request_line, content_type, body))
}

fn mean_luma(png: &[u8]) -> Option<f64> {
    let img = image::load_from_memory(png).ok()?.to_rgb8();
    let n = (img.width() * img.height()) as f64;
    let sum: f64 = img
        .pixels()
        .map(|p| {
            let c = |i: usize| f64::from(p.0[i]) / 255.0;
            0.2126 * c(0) + 0.7152 * c(1) + 0.0722 * c(2)
        })
        .sum();
    Some(sum / n)
}

fn respond(stream: &mut TcpStream, status: u16, content_type: &str, body: &str) {
    let reason = if status == 200 { "OK" } else { "Error" };
    let head = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(body.as_bytes());
    let _ = stream.flush();
}

impl StubServer {
    pub fn start(reply: StubReply) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let max_in_flight = Arc::new(AtomicUsize::new(0));
        let (req, inf, max) = (requests.clone(), in_flight, max_in_flight.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let (reply, req, inf, max) = (reply.clone(), req.clone(), inf.clone(), max.clone());
                thread::spawn(move || {
                    let Some((line, ctype, body)) = read_request(&mut stream) else { return };
                    req.fetch_add(1, Ordering::SeqCst);
                    let now = inf.fetch_add(1, Ordering::SeqCst) + 1;
                    max.fetch_max(now, Ordering::SeqCst);
                    if !line.starts_with("POST /score ") || ctype != "image/png" {
                        respond(&mut stream, 404, "application/json", r#"{"error":"bad request"}"#);
                    } else {
                        match reply {
                            StubReply::Fixed { status, content_type, body } => {
                                thread::sleep(Duration::from_millis(20));
                                respond(&mut stream, status, content_type, &body)
                            }
                            StubReply::MeanLuminance => match mean_luma(&body) {
                                Some(v) => respond(&mut stream, 200, "application/json", &format!("{{\"score\": {v}}}")),
                                None => respond(&mut stream, 400, "application/json", r#"{"error":"not a PNG"}"#),
                            },
                            StubReply::Slow(d) => {
                                thread::sleep(d);
                                respond(&mut stream, 200, "application/json", r#"{"score": 0}"#)
                            }
                        }
                    }
                    inf.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        Self {
            url,
            requests,
            max_in_flight,
        }
    }

    pub fn fixed(status: u16, content_type: &'static str, body: &str) -> Self {
        Self::start(StubReply::Fixed {
            status,
            content_type,
            body: body.to_string(),
        })
    }
}
