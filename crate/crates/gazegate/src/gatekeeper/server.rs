//! TCP front end: thread-per-connection serving of the line protocol.
//!
//! Each connection drives at most one session against a shared read-only
//! recording catalog, so concurrent clients are fully isolated. Shutdown
//! stops accepting, half-closes the read side of every live connection,
//! and joins all workers, which lets in-flight responses finish cleanly.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::wire::WireSession;
use super::{GatekeeperError, SessionPolicy};
use crate::data_io::Dataset;
use crate::gaze::GazeSeries;

/// Read-only catalog of recordings a server can replay, keyed by
/// `(subject_id, stimulus_id)`.
#[derive(Default)]
pub struct ReplaySource {
    recordings: BTreeMap<(String, String), Arc<GazeSeries>>,
}

impl ReplaySource {
    pub fn new() -> Self {
        Self::default()
    }

    /// A catalog holding exactly one recording; sessions may then omit
    /// the subject/stimulus selector.
    pub fn from_series(series: GazeSeries) -> Self {
        let mut source = Self::new();
        source.insert(series);
        source
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut source = Self::new();
        for series in dataset.recordings() {
            source.insert(series.clone());
        }
        source
    }

    pub fn insert(&mut self, series: GazeSeries) {
        let key = (series.subject_id().to_string(), series.stimulus_id().to_string());
        self.recordings.insert(key, Arc::new(series));
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    /// Looks up a recording. Both selectors may be omitted only when the
    /// catalog holds exactly one recording.
    pub fn resolve(
        &self,
        subject: Option<&str>,
        stimulus: Option<&str>,
    ) -> Result<Arc<GazeSeries>, GatekeeperError> {
        match (subject, stimulus) {
            (Some(subject), Some(stimulus)) => self
                .recordings
                .get(&(subject.to_string(), stimulus.to_string()))
                .cloned()
                .ok_or_else(|| GatekeeperError::UnknownRecording {
                    subject: subject.to_string(),
                    stimulus: stimulus.to_string(),
                }),
            (None, None) if self.recordings.len() == 1 => {
                Ok(Arc::clone(self.recordings.values().next().expect("len checked")))
            }
            _ => Err(GatekeeperError::BadRequest {
                reason: "subject and stimulus are required unless the server has exactly one \
                         recording"
                    .to_string(),
            }),
        }
    }
}

/// A running server. Dropping it (or calling [`GatekeeperServer::shutdown`])
/// stops the listener and joins every connection thread.
pub struct GatekeeperServer {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
    workers: Arc<Mutex<Vec<JoinHandle<()>>>>,
    connections: Arc<Mutex<Vec<TcpStream>>>,
}

/// Binds `addr` (e.g. `127.0.0.1:0` for an ephemeral port) and serves the
/// catalog under `default_policy` until shutdown. Clients may narrow the
/// policy per session, never widen it.
pub fn serve(
    addr: &str,
    source: ReplaySource,
    default_policy: SessionPolicy,
) -> Result<GatekeeperServer, GatekeeperError> {
    if source.is_empty() {
        return Err(GatekeeperError::SourceEmpty);
    }
    let listener = TcpListener::bind(addr).map_err(|e| GatekeeperError::Bind {
        addr: addr.to_string(),
        source: e,
    })?;
    let local_addr = listener.local_addr().map_err(|e| GatekeeperError::Bind {
        addr: addr.to_string(),
        source: e,
    })?;

    let stop = Arc::new(AtomicBool::new(false));
    let workers: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::new(Mutex::new(Vec::new()));
    let connections: Arc<Mutex<Vec<TcpStream>>> = Arc::new(Mutex::new(Vec::new()));
    let source = Arc::new(source);
    let session_ids = Arc::new(AtomicU64::new(0));

    let accept_thread = {
        let stop = Arc::clone(&stop);
        let workers = Arc::clone(&workers);
        let connections = Arc::clone(&connections);
        std::thread::spawn(move || {
            for incoming in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let stream = match incoming {
                    Ok(stream) => stream,
                    Err(_) => {
                        std::thread::sleep(std::time::Duration::from_millis(5));
                        continue;
                    }
                };
                if let Ok(clone) = stream.try_clone() {
                    connections.lock().expect("connection registry poisoned").push(clone);
                }
                let wire = WireSession::new(
                    Arc::clone(&source),
                    default_policy,
                    Arc::clone(&session_ids),
                );
                let handle = std::thread::spawn(move || handle_connection(stream, wire));
                workers.lock().expect("worker registry poisoned").push(handle);
            }
        })
    };

    Ok(GatekeeperServer {
        local_addr,
        stop,
        accept_thread: Some(accept_thread),
        workers,
        connections,
    })
}

impl GatekeeperServer {
    /// The address actually bound (useful with an ephemeral port).
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops accepting, lets in-flight responses complete, and joins all
    /// threads.
    pub fn shutdown(mut self) {
        self.shutdown_impl();
    }

    fn shutdown_impl(&mut self) {
        let Some(accept_thread) = self.accept_thread.take() else {
            return;
        };
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept; the flag makes it exit.
        let _ = TcpStream::connect(self.local_addr);
        let _ = accept_thread.join();
        // No new connections can register now; half-close the read side of
        // every live one so workers finish their current exchange and see
        // EOF instead of being cut off mid-write.
        for conn in self.connections.lock().expect("connection registry poisoned").iter() {
            let _ = conn.shutdown(Shutdown::Read);
        }
        let handles: Vec<JoinHandle<()>> =
            self.workers.lock().expect("worker registry poisoned").drain(..).collect();
        for handle in handles {
            let _ = handle.join();
        }
    }
}

impl Drop for GatekeeperServer {
    fn drop(&mut self) {
        self.shutdown_impl();
    }
}

fn handle_connection(stream: TcpStream, mut wire: WireSession) {
    let _ = stream.set_nodelay(true);
    let reader_half = match stream.try_clone() {
        Ok(clone) => clone,
        Err(_) => return,
    };
    let mut reader = BufReader::new(reader_half);
    let mut writer = BufWriter::new(stream);
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {
                let outcome = wire.handle_line(&line);
                let mut write_failed = false;
                for frame in &outcome.frames {
                    if writer.write_all(frame.as_bytes()).is_err()
                        || writer.write_all(b"\n").is_err()
                    {
                        write_failed = true;
                        break;
                    }
                }
                if writer.flush().is_err() || write_failed || outcome.close {
                    break;
                }
            }
            Err(_) => break,
        }
    }
    // The registry keeps a clone of this socket until server shutdown, so
    // close it at the socket level: the peer must see EOF as soon as the
    // exchange ends, not when the whole server stops.
    let _ = writer.get_ref().shutdown(Shutdown::Both);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gatekeeper::{SampleStreamPolicy, StreamMechanism};
    use crate::gaze::{EventLabel, GazeSample};
    use crate::privacy::MechanismConfig;
    use std::io::BufRead;
    use std::time::Duration;

    fn scripted_series() -> GazeSeries {
        use EventLabel::{Fixation as F, Saccade as S, SmoothPursuit as P};
        let mut samples = Vec::new();
        for i in 0..5 {
            samples.push(GazeSample::new(10.0, 80.0, i as f64 * 10.0, F));
        }
        samples.push(GazeSample::new(14.0, 80.0, 50.0, S));
        samples.push(GazeSample::new(20.0, 80.0, 60.0, S));
        for i in 0..4 {
            samples.push(GazeSample::new(20.0, 80.0, 70.0 + i as f64 * 10.0, F));
        }
        for i in 0..3 {
            samples.push(GazeSample::new(30.0 + i as f64, 85.0, 110.0 + i as f64 * 10.0, P));
        }
        GazeSeries::new(samples, 100.0, "s01", "stim01").unwrap()
    }

    fn start_server() -> GatekeeperServer {
        let policy = SessionPolicy {
            saccade_phase_events: true,
            sample_stream: SampleStreamPolicy::Enabled(
                StreamMechanism::new(MechanismConfig::spatial(64).unwrap()).unwrap(),
            ),
            ..SessionPolicy::default()
        };
        serve("127.0.0.1:0", ReplaySource::from_series(scripted_series()), policy).unwrap()
    }

    struct Client {
        reader: BufReader<TcpStream>,
        writer: TcpStream,
    }

    impl Client {
        fn connect(addr: SocketAddr) -> Self {
            let stream = TcpStream::connect(addr).unwrap();
            stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
            let reader = BufReader::new(stream.try_clone().unwrap());
            Client { reader, writer: stream }
        }

        fn send(&mut self, line: &str) {
            self.writer.write_all(line.as_bytes()).unwrap();
            self.writer.write_all(b"\n").unwrap();
        }

        fn recv(&mut self) -> String {
            let mut line = String::new();
            let n = self.reader.read_line(&mut line).unwrap();
            assert!(n > 0, "server closed the connection unexpectedly");
            line.trim_end().to_string()
        }

        /// Sends one request and returns `count` response lines.
        fn round_trip(&mut self, line: &str, count: usize) -> Vec<String> {
            self.send(line);
            (0..count).map(|_| self.recv()).collect()
        }
    }

    #[test]
    fn a_full_exchange_over_tcp_matches_the_in_memory_protocol() {
        let server = start_server();
        let mut c = Client::connect(server.local_addr());
        let open = c.round_trip(r#"{"op":"open_session","args":{},"req_id":1}"#, 1);
        assert!(open[0].contains("\"session_id\":\"s1\""), "{open:?}");
        let sub = c.round_trip(r#"{"op":"subscribe_events","req_id":2}"#, 1);
        assert_eq!(sub[0], "{\"req_id\":2,\"ok\":{\"subscribed\":true}}");
        // ok + 2 notices (fixation completed, saccade started).
        let adv = c.round_trip(r#"{"op":"advance_clock","args":{"to_ms":55.0},"req_id":3}"#, 3);
        assert_eq!(
            adv[0],
            "{\"req_id\":3,\"ok\":{\"clock_ms\":55.000000,\"events\":2,\"samples\":0}}"
        );
        assert!(adv[1].contains("\"phase\":\"completed\""));
        assert!(adv[2].contains("\"phase\":\"saccade_started\""));
        let fx = c.round_trip(
            r#"{"op":"get_fixations","args":{"aoi":{"x_min":0,"x_max":360,"y_min":0,"y_max":180}},"req_id":4}"#,
            1,
        );
        assert!(fx[0].contains("\"duration_ms\":40.000000"));
        let close = c.round_trip(r#"{"op":"close","req_id":5}"#, 1);
        assert_eq!(close[0], "{\"req_id\":5,\"ok\":{\"closed\":true}}");
        server.shutdown();
    }

    #[test]
    fn malformed_lines_keep_the_tcp_connection_usable() {
        let server = start_server();
        let mut c = Client::connect(server.local_addr());
        let err = c.round_trip("definitely not json", 1);
        assert!(err[0].starts_with("{\"req_id\":null,\"err\":{\"code\":\"BAD_REQUEST\""));
        let open = c.round_trip(r#"{"op":"open_session","args":{},"req_id":1}"#, 1);
        assert!(open[0].contains("\"ok\""));
        server.shutdown();
    }

    #[test]
    fn concurrent_clients_get_identical_answers_and_isolated_sessions() {
        let server = start_server();
        let addr = server.local_addr();
        let script = move || {
            let mut c = Client::connect(addr);
            // Ignore the open response: session ids differ by arrival order.
            c.round_trip(r#"{"op":"open_session","args":{},"req_id":1}"#, 1);
            let mut transcript = Vec::new();
            transcript.extend(c.round_trip(
                r#"{"op":"advance_clock","args":{"to_ms":100.0},"req_id":2}"#,
                1,
            ));
            transcript.extend(c.round_trip(
                r#"{"op":"get_fixations","args":{"aoi":{"x_min":0,"x_max":360,"y_min":0,"y_max":180}},"req_id":3}"#,
                1,
            ));
            transcript.extend(c.round_trip(
                r#"{"op":"get_dwell_time","args":{"fixation_id":0},"req_id":4}"#,
                1,
            ));
            transcript.extend(c.round_trip(
                r#"{"op":"get_saccades","args":{"aoi":{"x_min":0,"x_max":360,"y_min":0,"y_max":180}},"req_id":5}"#,
                1,
            ));
            transcript.extend(c.round_trip(r#"{"op":"get_current_tile","req_id":6}"#, 1));
            transcript
        };
        let a = std::thread::spawn(script);
        let b = std::thread::spawn(script);
        let ta = a.join().unwrap();
        let tb = b.join().unwrap();
        assert_eq!(ta, tb, "both clients observe identical replies");
        server.shutdown();
    }

    #[test]
    fn session_ids_are_distinct_across_connections() {
        let server = start_server();
        let mut c1 = Client::connect(server.local_addr());
        let mut c2 = Client::connect(server.local_addr());
        let o1 = c1.round_trip(r#"{"op":"open_session","args":{},"req_id":1}"#, 1);
        let o2 = c2.round_trip(r#"{"op":"open_session","args":{},"req_id":1}"#, 1);
        let id = |s: &str| {
            let start = s.find("\"session_id\":\"").unwrap() + 14;
            s[start..].split('"').next().unwrap().to_string()
        };
        assert_ne!(id(&o1[0]), id(&o2[0]));
        server.shutdown();
    }

    #[test]
    fn shutdown_terminates_idle_connections_cleanly() {
        let server = start_server();
        let addr = server.local_addr();
        let mut c = Client::connect(addr);
        let open = c.round_trip(r#"{"op":"open_session","args":{},"req_id":1}"#, 1);
        assert!(open[0].contains("\"ok\""));
        server.shutdown();
        // The worker saw EOF after the half-close; the client now reads EOF.
        let mut line = String::new();
        let n = c.reader.read_line(&mut line).unwrap_or(0);
        assert_eq!(n, 0, "connection closed after shutdown, got {line:?}");
        // A fresh connection is refused or, at worst, served nothing.
        match TcpStream::connect(addr) {
            Ok(stream) => {
                stream.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
                let mut reader = BufReader::new(stream);
                let mut probe = String::new();
                let n = reader.read_line(&mut probe).unwrap_or(0);
                assert_eq!(n, 0);
            }
            Err(_) => {}
        }
    }

    #[test]
    fn an_empty_catalog_refuses_to_serve() {
        let err = serve("127.0.0.1:0", ReplaySource::new(), SessionPolicy::default());
        assert!(matches!(err, Err(GatekeeperError::SourceEmpty)));
    }

    #[test]
    fn resolve_requires_selectors_for_multi_recording_catalogs() {
        let mut source = ReplaySource::from_series(scripted_series());
        assert!(source.resolve(None, None).is_ok());
        let renamed =
            GazeSeries::new(scripted_series().samples().to_vec(), 100.0, "s02", "stim01")
                .unwrap();
        source.insert(renamed);
        assert_eq!(source.len(), 2);
        assert!(matches!(
            source.resolve(None, None),
            Err(GatekeeperError::BadRequest { .. })
        ));
        assert!(source.resolve(Some("s02"), Some("stim01")).is_ok());
        assert!(matches!(
            source.resolve(Some("s03"), Some("stim01")),
            Err(GatekeeperError::UnknownRecording { .. })
        ));
    }
}
