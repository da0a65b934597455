//! External codec/denoiser backend over a line-header binary protocol.
//!
//! Each message is one JSON header line followed by little-endian `f32`
//! values in `C × H × W` order. Requests carry
//! `{"shape":[c,h,w],"t":int,"role":"denoise"|"encode"|"decode"}`; a denoise
//! request sends the 13-channel stack. Replies carry `{"shape":[c,h,w]}` and
//! data, or `{"error":"..."}` and no data.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::codec::LatentCodec;
use super::denoiser::Denoiser;
use super::latent::LatentStack;
use super::tensor::Tensor3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Denoise,
    Encode,
    Decode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestHeader {
    pub shape: [usize; 3],
    pub t: i64,
    pub role: Role,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResponseHeader {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn write_tensor(mut out: impl Write, header: &impl Serialize, t: &Tensor3) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(header).map_err(std::io::Error::other)?;
    line.push(b'\n');
    out.write_all(&line)?;
    let mut buf = Vec::with_capacity(t.data.len() * 4);
    for v in &t.data {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()
}

fn read_header<H: for<'de> Deserialize<'de>>(input: &mut impl BufRead) -> Result<Option<H>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    serde_json::from_str(line.trim_end())
        .map(Some)
        .map_err(|e| Error::Backend(format!("bad header `{}`: {e}", line.trim_end())))
}

fn read_payload(input: &mut impl Read, shape: [usize; 3]) -> Result<Tensor3> {
    let n = shape.iter().product::<usize>();
    let mut buf = vec![0u8; n * 4];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Backend(format!("truncated tensor payload: {e}")))?;
    let data = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Tensor3::from_vec(shape[0], shape[1], shape[2], data)
}

/// Answers requests on `input` until end of stream. Handler errors are sent
/// back as error replies; the loop keeps serving.
pub fn serve_backend(
    mut input: impl BufRead,
    mut output: impl Write,
    mut handler: impl FnMut(Role, i64, Tensor3) -> Result<Tensor3>,
) -> Result<()> {
    while let Some(req) = read_header::<RequestHeader>(&mut input)? {
        let tensor = read_payload(&mut input, req.shape)?;
        match handler(req.role, req.t, tensor) {
            Ok(t) => {
                let h = ResponseHeader { shape: Some(t.shape()), error: None };
                write_tensor(&mut output, &h, &t)?;
            }
            Err(e) => {
                let h = ResponseHeader { shape: None, error: Some(e.to_string()) };
                let mut line = serde_json::to_vec(&h).map_err(|e| Error::Backend(e.to_string()))?;
                line.push(b'\n');
                output.write_all(&line)?;
                output.flush()?;
            }
        }
    }
    Ok(())
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Channel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Subprocess speaking the protocol on stdin/stdout. Clones share one
/// process; calls are serialized by a mutex.
#[derive(Clone)]
pub struct ProcessBackend {
    channel: Arc<Mutex<Channel>>,
    factor: usize,
}

impl ProcessBackend {
    pub fn spawn(program: &str, args: &[String], downsample_factor: usize) -> Result<Self> {
        if downsample_factor == 0 {
            return Err(Error::InvalidArgument("downsample factor must be positive".into()));
        }
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            channel: Arc::new(Mutex::new(Channel { child, stdin, stdout })),
            factor: downsample_factor,
        })
    }

    pub fn call(&self, role: Role, t: i64, tensor: &Tensor3) -> Result<Tensor3> {
        let mut ch = self
            .channel
            .lock()
            .map_err(|_| Error::Backend("backend channel poisoned".into()))?;
        let req = RequestHeader { shape: tensor.shape(), t, role };
        write_tensor(&mut ch.stdin, &req, tensor).map_err(|e| Error::Backend(format!("write failed: {e}")))?;
        let resp: ResponseHeader = read_header(&mut ch.stdout)?
            .ok_or_else(|| Error::Backend("backend closed its output".into()))?;
        if let Some(msg) = resp.error {
            return Err(Error::Backend(msg));
        }
        let shape = resp
            .shape
            .ok_or_else(|| Error::Backend("reply has neither shape nor error".into()))?;
        read_payload(&mut ch.stdout, shape)
    }
}

impl LatentCodec for ProcessBackend {
    fn downsample_factor(&self) -> usize {
        self.factor
    }

    fn encode(&mut self, image: &Tensor3) -> Result<Tensor3> {
        self.call(Role::Encode, 0, image)
    }

    fn decode(&mut self, latent: &Tensor3) -> Result<Tensor3> {
        self.call(Role::Decode, 0, latent)
    }
}

impl Denoiser for ProcessBackend {
    fn predict_noise(&mut self, stack: &LatentStack, t: usize) -> Result<Tensor3> {
        self.call(Role::Denoise, t as i64, &stack.concat())
    }
}
