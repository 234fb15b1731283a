//! Wire protocol (version 1) for externally served score models.
//!
//! Little-endian binary frames over any byte stream (TCP socket or a child
//! process's stdin/stdout):
//!
//! ```text
//! handshake  "DPSC"  u32 version  u32 F  u32 L        (both directions)
//! request    u32 tag=1   f64 t   F*L x (f32 re, f32 im)  row-major
//! reply      u32 tag=2   F*L x (f32 re, f32 im)
//! error      u32 tag=0xFFFF   u32 code
//! ```
//!
//! The client sends its handshake first; the server echoes its own, which
//! must agree on magic, version and shape before the first request.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use num_complex::Complex64;

use crate::error::{DepseError, Result};
use crate::field::Field;
use crate::schedule::DiffusionSchedule;
use crate::score::ScoreModel;

pub const MAGIC: &[u8; 4] = b"DPSC";
pub const VERSION: u32 = 1;
pub const TAG_REQUEST: u32 = 1;
pub const TAG_REPLY: u32 = 2;
pub const TAG_ERROR: u32 = 0xFFFF;

/// Where an external score model lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScoreEndpoint {
    /// `host:port` speaking the protocol over TCP.
    Tcp(String),
    /// Command line; the child speaks the protocol on stdin/stdout.
    Subprocess(Vec<String>),
}

trait Transport: Read + Write + Send {}
impl<T: Read + Write + Send> Transport for T {}

struct SubprocessStream {
    child: Child,
    stdin: std::process::ChildStdin,
    stdout: std::process::ChildStdout,
}

impl Read for SubprocessStream {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        self.stdout.read(buf)
    }
}

impl Write for SubprocessStream {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.stdin.write(buf)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.stdin.flush()
    }
}

impl Drop for SubprocessStream {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Client handle; one exclusive connection per enhancement job.
pub struct ExternalScoreModel {
    stream: Mutex<Box<dyn Transport>>,
    shape: (usize, usize),
}

impl ExternalScoreModel {
    /// Connect over TCP and run the handshake. `timeout` bounds each read.
    pub fn connect_tcp<A: ToSocketAddrs>(
        addr: A,
        shape: (usize, usize),
        timeout: Option<Duration>,
    ) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(timeout)?;
        stream.set_nodelay(true)?;
        Self::with_stream(Box::new(stream), shape)
    }

    /// Spawn `command` and run the handshake over its stdio.
    pub fn spawn_subprocess(command: &[String], shape: (usize, usize)) -> Result<Self> {
        if command.is_empty() {
            return Err(DepseError::Config("empty score server command".into()));
        }
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::with_stream(
            Box::new(SubprocessStream {
                child,
                stdin,
                stdout,
            }),
            shape,
        )
    }

    pub fn connect(endpoint: &ScoreEndpoint, shape: (usize, usize), timeout: Option<Duration>) -> Result<Self> {
        match endpoint {
            ScoreEndpoint::Tcp(addr) => Self::connect_tcp(addr.as_str(), shape, timeout),
            ScoreEndpoint::Subprocess(cmd) => Self::spawn_subprocess(cmd, shape),
        }
    }

    fn with_stream(mut stream: Box<dyn Transport>, shape: (usize, usize)) -> Result<Self> {
        write_handshake(&mut *stream, shape)?;
        stream.flush()?;
        let (version, got) = read_handshake(&mut *stream)?;
        if version != VERSION {
            return Err(DepseError::Protocol(format!(
                "server speaks version {version}, expected {VERSION}"
            )));
        }
        if got != shape {
            return Err(DepseError::ShapeMismatch {
                expected: shape,
                got,
            });
        }
        Ok(ExternalScoreModel {
            stream: Mutex::new(stream),
            shape,
        })
    }
}

impl ScoreModel for ExternalScoreModel {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn score(&self, s_t: &Field, t: f64, _schedule: &DiffusionSchedule) -> Result<Field> {
        if s_t.dim() != self.shape {
            return Err(DepseError::ShapeMismatch {
                expected: self.shape,
                got: s_t.dim(),
            });
        }
        let mut stream = self.stream.lock().expect("score connection poisoned");
        let mut buf = Vec::with_capacity(12 + 8 * s_t.len());
        buf.extend_from_slice(&TAG_REQUEST.to_le_bytes());
        buf.extend_from_slice(&t.to_le_bytes());
        for z in s_t.iter() {
            buf.extend_from_slice(&(z.re as f32).to_le_bytes());
            buf.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        stream.write_all(&buf).map_err(map_io)?;
        stream.flush().map_err(map_io)?;

        let tag = read_u32(&mut **stream)?;
        match tag {
            TAG_REPLY => {
                let mut out = Field::zeros(self.shape);
                let mut raw = vec![0u8; 8 * out.len()];
                read_exact(&mut **stream, &mut raw)?;
                for (z, chunk) in out.iter_mut().zip(raw.chunks_exact(8)) {
                    let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
                    let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
                    *z = Complex64::new(re as f64, im as f64);
                }
                Ok(out)
            }
            TAG_ERROR => {
                let code = read_u32(&mut **stream)?;
                Err(DepseError::RemoteError(code))
            }
            other => Err(DepseError::Protocol(format!(
                "unexpected frame tag {other:#x}"
            ))),
        }
    }
}

/// Serve `model` on a connected byte stream until EOF. Reference server used
/// by the test suite; external implementations follow the same frames.
pub fn serve_connection<S: Read + Write>(
    stream: &mut S,
    model: &dyn ScoreModel,
    schedule: &DiffusionSchedule,
) -> Result<()> {
    let (version, shape) = read_handshake(stream)?;
    if version != VERSION {
        write_error(stream, 1)?;
        return Err(DepseError::Protocol(format!(
            "client version {version} unsupported"
        )));
    }
    if shape != model.shape() {
        // Echo our own shape so the client can diagnose the mismatch.
        write_handshake(stream, model.shape())?;
        stream.flush()?;
        return Err(DepseError::ShapeMismatch {
            expected: model.shape(),
            got: shape,
        });
    }
    write_handshake(stream, model.shape())?;
    stream.flush()?;

    loop {
        let tag = match read_u32(stream) {
            Ok(tag) => tag,
            Err(DepseError::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                return Ok(())
            }
            Err(e) => return Err(e),
        };
        if tag != TAG_REQUEST {
            write_error(stream, 2)?;
            return Err(DepseError::Protocol(format!("unexpected tag {tag:#x}")));
        }
        let mut tbuf = [0u8; 8];
        read_exact(stream, &mut tbuf)?;
        let t = f64::from_le_bytes(tbuf);
        let mut raw = vec![0u8; 8 * shape.0 * shape.1];
        read_exact(stream, &mut raw)?;
        let mut s_t = Field::zeros(shape);
        for (z, chunk) in s_t.iter_mut().zip(raw.chunks_exact(8)) {
            let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
            *z = Complex64::new(re as f64, im as f64);
        }
        match model.score(&s_t, t, schedule) {
            Ok(score) => {
                let mut buf = Vec::with_capacity(4 + 8 * score.len());
                buf.extend_from_slice(&TAG_REPLY.to_le_bytes());
                for z in score.iter() {
                    buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                    buf.extend_from_slice(&(z.im as f32).to_le_bytes());
                }
                stream.write_all(&buf)?;
                stream.flush()?;
            }
            Err(_) => write_error(stream, 3)?,
        }
    }
}

fn write_handshake<W: Write + ?Sized>(w: &mut W, shape: (usize, usize)) -> Result<()> {
    let mut buf = [0u8; 16];
    buf[0..4].copy_from_slice(MAGIC);
    buf[4..8].copy_from_slice(&VERSION.to_le_bytes());
    buf[8..12].copy_from_slice(&(shape.0 as u32).to_le_bytes());
    buf[12..16].copy_from_slice(&(shape.1 as u32).to_le_bytes());
    w.write_all(&buf)?;
    Ok(())
}

fn read_handshake<R: Read + ?Sized>(r: &mut R) -> Result<(u32, (usize, usize))> {
    let mut buf = [0u8; 16];
    read_exact(r, &mut buf)?;
    if &buf[0..4] != MAGIC {
        return Err(DepseError::Protocol(format!(
            "bad magic {:02x?}, expected {MAGIC:02x?}",
            &buf[0..4]
        )));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    let f = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let l = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    Ok((version, (f, l)))
}

fn write_error<W: Write + ?Sized>(w: &mut W, code: u32) -> Result<()> {
    w.write_all(&TAG_ERROR.to_le_bytes())?;
    w.write_all(&code.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read + ?Sized>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact<R: Read + ?Sized>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(map_io)?;
    Ok(())
}

fn map_io(e: std::io::Error) -> DepseError {
    match e.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => DepseError::Timeout,
        _ => DepseError::Io(e),
    }
}
