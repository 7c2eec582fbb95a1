#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use proptest::prelude::*;
use verios_core::action::{Action, Direction, ScreenDims};
use verios_core::dataset::{load_dataset, Dataset, Instance, Platform, ScenarioType, Split};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/bench")
}

pub fn shipped_fixture() -> Dataset {
    load_dataset(fixture_dir().join("dataset.json"), true).expect("shipped fixture loads")
}

/// `n` valid instances cycling through every scenario, platform, split and
/// action kind.
pub fn synthetic_instances(n: usize) -> Vec<Instance> {
    (0..n)
        .map(|i| {
            let scenario = ScenarioType::ALL[i % 5];
            let untrustworthy = scenario.is_untrustworthy();
            let ground_truth_action = match i % 8 {
                0 => Action::click(10 + i as u32, 20 + i as u32),
                1 => Action::type_text(format!("text {i}")).unwrap(),
                2 => Action::swipe(Direction::ALL[i % 4]),
                3 => Action::PressBack,
                4 => Action::PressHome,
                5 => Action::Wait,
                6 => Action::long_press(300, 400),
                _ => Action::task_complete(format!("answer {i}")).unwrap(),
            };
            Instance {
                id: format!("syn-{i:03}"),
                platform: Platform::ALL[i % 4],
                system_prompt: format!("system prompt {}", i % 3),
                instruction: format!("instruction {i}"),
                screenshot: format!("screens/syn-{i:03}.png").into(),
                screen: ScreenDims::new(1080, 2400).unwrap(),
                scenario,
                ground_truth_action,
                query: untrustworthy.then(|| format!("query {i}?")),
                answer: untrustworthy.then(|| format!("answer {i}")),
                split: if i % 3 == 0 { Split::Test } else { Split::Train },
            }
        })
        .collect()
}

fn payload(non_blank: bool) -> BoxedStrategy<String> {
    let s = "[^\n\r]{0,24}";
    if non_blank {
        s.prop_filter("non-blank", |t| !t.trim().is_empty()).boxed()
    } else {
        s.boxed()
    }
}

/// Every valid action, payloads included.
pub fn any_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        (any::<u32>(), any::<u32>()).prop_map(|(x, y)| Action::click(x, y)),
        payload(true).prop_map(|t| Action::type_text(t).unwrap()),
        prop::sample::select(Direction::ALL.to_vec()).prop_map(Action::swipe),
        Just(Action::PressBack),
        Just(Action::PressHome),
        Just(Action::Wait),
        (any::<u32>(), any::<u32>()).prop_map(|(x, y)| Action::long_press(x, y)),
        payload(false).prop_map(|t| Action::task_complete(t).unwrap()),
        payload(true).prop_map(|t| Action::ask(t).unwrap()),
    ]
}

/// One request captured by [`MockEndpoint`].
#[derive(Debug, Clone)]
pub struct Captured {
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: serde_json::Value,
}

impl Captured {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// How the mock answers one request.
#[derive(Debug, Clone)]
pub enum Reply {
    /// 200 with a chat-completions body whose content is this text.
    Content(String),
    Status(u16, String),
    /// Close the connection without answering.
    Hangup,
}

/// Minimal HTTP/1.1 server replaying scripted replies in order; the last
/// reply repeats once the script runs out.
pub struct MockEndpoint {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
    _worker: JoinHandle<()>,
}

impl MockEndpoint {
    pub fn start(script: Vec<Reply>) -> MockEndpoint {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        let worker = thread::spawn(move || {
            for (served, stream) in listener.incoming().enumerate() {
                let Ok(stream) = stream else { break };
                let reply = script[served.min(script.len() - 1)].clone();
                if let Some(captured) = serve(stream, &reply) {
                    log.lock().unwrap().push(captured);
                }
            }
        });
        MockEndpoint { base_url, requests, _worker: worker }
    }

    pub fn captured(&self) -> Vec<Captured> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, reply: &Reply) -> Option<Captured> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let path = request_line.split_whitespace().nth(1)?.to_string();
    let mut headers = Vec::new();
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let length: usize = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    let body = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);

    let mut stream = stream;
    let (status, text) = match reply {
        Reply::Hangup => {
            drop(stream);
            return Some(Captured { path, headers, body });
        }
        Reply::Content(content) => (
            200,
            serde_json::json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string(),
        ),
        Reply::Status(code, text) => (*code, text.clone()),
    };
    let response = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
    stream.write_all(response.as_bytes()).ok()?;
    stream.flush().ok()?;
    Some(Captured { path, headers, body })
}

/// An address with nothing listening on it.
pub fn dead_base_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}
