//! Out-of-process denoiser over a byte stream.
//!
//! Each request is one line of JSON, `{"sigma_t": <f64>, "dims": [c, h, w]}`,
//! followed by the state as a raw tensor. The peer answers with one raw
//! tensor of the same dims holding the clean-image estimate.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::io::{decode_raw_tensor, encode_raw_tensor};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestHeader {
    pub sigma_t: f64,
    pub dims: Vec<usize>,
}

type Response = Result<(Vec<f64>, Vec<usize>)>;

struct Channel {
    writer: Box<dyn Write + Send>,
    responses: Receiver<Response>,
    broken: Option<String>,
}

/// A denoiser living on the other end of a pipe. Calls are serialized.
pub struct ExternalDenoiser {
    channel: Mutex<Channel>,
    child: Mutex<Option<Child>>,
    timeout: Duration,
}

impl ExternalDenoiser {
    /// Talk to an already connected peer.
    pub fn from_streams(writer: Box<dyn Write + Send>, reader: Box<dyn Read + Send>) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let msg = decode_raw_tensor(&mut reader);
                let failed = msg.is_err();
                if tx.send(msg).is_err() || failed {
                    break;
                }
            }
        });
        Self {
            channel: Mutex::new(Channel {
                writer,
                responses: rx,
                broken: None,
            }),
            child: Mutex::new(None),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Launch `command` with piped stdin/stdout; stderr is inherited.
    pub fn spawn(command: &mut Command) -> Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start denoiser {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let me = Self::from_streams(Box::new(stdin), Box::new(stdout));
        *me.child.lock().expect("fresh mutex") = Some(child);
        Ok(me)
    }

    /// Launch a shell command line.
    pub fn spawn_shell(command_line: &str) -> Result<Self> {
        Self::spawn(Command::new("sh").arg("-c").arg(command_line))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn exchange(&self, channel: &mut Channel, x_t: &PlanarImage, sigma_t: f64) -> Result<PlanarImage> {
        let dims = x_t.dims().to_vec();
        let header = serde_json::to_string(&RequestHeader {
            sigma_t,
            dims: dims.clone(),
        })
        .expect("header serializes");
        let send = (|| {
            channel.writer.write_all(header.as_bytes())?;
            channel.writer.write_all(b"\n")?;
            encode_raw_tensor(&mut channel.writer, x_t.data(), &dims)?;
            channel.writer.flush()
        })();
        send.map_err(|e| Error::Protocol(format!("cannot send request to denoiser: {e}")))?;
        let (data, got) = match channel.responses.recv_timeout(self.timeout) {
            Ok(Ok(resp)) => resp,
            Ok(Err(e)) => return Err(Error::Protocol(format!("bad denoiser response: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Protocol(format!(
                    "denoiser did not answer within {:?}",
                    self.timeout
                )))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(Error::Protocol("denoiser closed its output".into())),
        };
        if got != dims {
            return Err(Error::Protocol(format!(
                "denoiser answered with dims {got:?} for a request of dims {dims:?}"
            )));
        }
        PlanarImage::new(dims[0], dims[1], dims[2], data)
    }
}

impl Denoiser for ExternalDenoiser {
    fn predict(&self, x_t: &PlanarImage, sigma_t: f64) -> Result<PlanarImage> {
        let mut channel = self
            .channel
            .lock()
            .map_err(|_| Error::Protocol("denoiser channel poisoned".into()))?;
        if let Some(reason) = &channel.broken {
            return Err(Error::Protocol(format!(
                "denoiser unusable after earlier failure: {reason}"
            )));
        }
        let out = self.exchange(&mut channel, x_t, sigma_t);
        if let Err(e) = &out {
            channel.broken = Some(e.to_string());
        }
        out
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        if let Ok(channel) = self.channel.get_mut() {
            channel.writer = Box::new(std::io::sink());
        }
        if let Ok(Some(mut child)) = self.child.get_mut().map(Option::take) {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Answer requests from `reader` until end of input. Returns how many
/// requests were served.
pub fn serve_denoiser(reader: impl Read, mut writer: impl Write, denoiser: &dyn Denoiser) -> Result<usize> {
    let mut reader = BufReader::new(reader);
    let mut served = 0;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::Protocol(format!("cannot read request header: {e}")))?;
        if n == 0 {
            return Ok(served);
        }
        if line.trim().is_empty() {
            continue;
        }
        let header: RequestHeader = serde_json::from_str(line.trim())
            .map_err(|e| Error::Protocol(format!("malformed request header {:?}: {e}", line.trim())))?;
        let (data, dims) = decode_raw_tensor(&mut reader)?;
        if dims != header.dims || dims.len() != 3 {
            return Err(Error::Protocol(format!(
                "request header says {:?} but tensor has dims {dims:?}",
                header.dims
            )));
        }
        let x = PlanarImage::new(dims[0], dims[1], dims[2], data)?;
        let out = denoiser.predict(&x, header.sigma_t)?;
        encode_raw_tensor(&mut writer, out.data(), &out.dims())
            .and_then(|_| writer.flush())
            .map_err(|e| Error::Protocol(format!("cannot write response: {e}")))?;
        served += 1;
    }
}
