//! Length-prefixed frame IO over byte streams.
//!
//! Reads happen on a helper thread so that every receive can carry a
//! wall-clock timeout, whatever the underlying stream is.

use std::io::{self, BufWriter, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use sedro_core::protocol::{Frame, FrameHeader, ProtocolError, HEADER_LEN};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("connection error: {0}")]
    Io(#[from] io::Error),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("peer closed the connection")]
    Closed,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Reads one frame. `Ok(None)` is a clean end of stream between frames.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Frame>, TransportError> {
    let mut head = [0u8; HEADER_LEN];
    if !read_full(r, &mut head)? {
        return Ok(None);
    }
    let h = FrameHeader::parse(&head)?;
    let mut payload = vec![0u8; h.payload_len()];
    if !read_full(r, &mut payload)? && !payload.is_empty() {
        return Err(io::Error::from(ErrorKind::UnexpectedEof).into());
    }
    Ok(Some(Frame { kind: h.kind, tick: h.tick, payload }))
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    w.write_all(&frame.encode())
}

type Incoming = Result<Frame, TransportError>;

/// A framed, bidirectional byte stream.
pub struct Connection {
    incoming: Receiver<Incoming>,
    writer: BufWriter<Box<dyn Write + Send>>,
    peer: String,
    socket: Option<TcpStream>,
}

impl Connection {
    /// Wraps any reader/writer pair, e.g. a child process's stdout and stdin.
    pub fn new<R, W>(reader: R, writer: W, peer: impl Into<String>) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::sync_channel(16);
        thread::spawn(move || {
            let mut reader = reader;
            loop {
                let item = match read_frame(&mut reader) {
                    Ok(Some(f)) => Ok(f),
                    Ok(None) => Err(TransportError::Closed),
                    Err(e) => Err(e),
                };
                let stop = item.is_err();
                if tx.send(item).is_err() || stop {
                    break;
                }
            }
        });
        Self { incoming: rx, writer: BufWriter::new(Box::new(writer)), peer: peer.into(), socket: None }
    }

    pub fn tcp(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        let reader = stream.try_clone()?;
        let socket = stream.try_clone()?;
        let mut conn = Self::new(reader, stream, peer);
        conn.socket = Some(socket);
        Ok(conn)
    }

    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        Self::tcp(TcpStream::connect(addr)?)
    }

    /// Process stdin and stdout.
    pub fn stdio() -> Self {
        Self::new(io::stdin(), io::stdout(), "stdio")
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    /// Queues a frame; call [`flush`](Self::flush) to put it on the wire.
    pub fn send(&mut self, frame: &Frame) -> Result<(), TransportError> {
        write_frame(&mut self.writer, frame).map_err(closed_on_pipe)
    }

    pub fn flush(&mut self) -> Result<(), TransportError> {
        self.writer.flush().map_err(closed_on_pipe)
    }

    /// Sends and flushes one frame.
    pub fn send_now(&mut self, frame: &Frame) -> Result<(), TransportError> {
        self.send(frame)?;
        self.flush()
    }

    /// Next frame from the peer, waiting at most `timeout` (forever if
    /// `None`).
    pub fn recv(&mut self, timeout: Option<Duration>) -> Result<Frame, TransportError> {
        match timeout {
            None => self.incoming.recv().unwrap_or(Err(TransportError::Closed)),
            Some(t) => match self.incoming.recv_timeout(t) {
                Ok(item) => item,
                Err(RecvTimeoutError::Timeout) => Err(TransportError::Timeout(t)),
                Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
            },
        }
    }
}

impl Drop for Connection {
    /// Flushes and, for sockets, closes both directions so the peer sees EOF
    /// even while the reader thread still holds a handle.
    fn drop(&mut self) {
        let _ = self.writer.flush();
        if let Some(s) = &self.socket {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}

fn closed_on_pipe(e: io::Error) -> TransportError {
    match e.kind() {
        ErrorKind::BrokenPipe | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted => TransportError::Closed,
        _ => TransportError::Io(e),
    }
}

/// Waits up to `timeout` for one incoming connection.
pub fn accept_timeout(listener: &TcpListener, timeout: Duration) -> Result<(TcpStream, SocketAddr), TransportError> {
    listener.set_nonblocking(true)?;
    let deadline = Instant::now() + timeout;
    let accepted = loop {
        match listener.accept() {
            Ok(pair) => break Ok(pair),
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    break Err(TransportError::Timeout(timeout));
                }
                thread::sleep(Duration::from_millis(5));
            }
            Err(e) => break Err(e.into()),
        }
    };
    listener.set_nonblocking(false)?;
    let (stream, addr) = accepted?;
    stream.set_nonblocking(false)?;
    Ok((stream, addr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sedro_core::protocol::FrameType;

    #[test]
    fn frames_cross_a_pipe() {
        let frames = [Frame::new(FrameType::Hello, 0, vec![1, 2, 3]), Frame::new(FrameType::Bye, 9, vec![])];
        let bytes: Vec<u8> = frames.iter().flat_map(Frame::encode).collect();
        let mut conn = Connection::new(io::Cursor::new(bytes), io::sink(), "test");
        for f in &frames {
            assert_eq!(&conn.recv(Some(Duration::from_secs(1))).unwrap(), f);
        }
        assert!(matches!(conn.recv(None), Err(TransportError::Closed)));
    }

    #[test]
    fn cut_payload_is_an_error_not_a_clean_close() {
        let mut bytes = Frame::new(FrameType::Act, 0, vec![0; 224]).encode();
        bytes.truncate(100);
        let err = read_frame(&mut io::Cursor::new(bytes)).unwrap_err();
        assert!(matches!(err, TransportError::Io(ref e) if e.kind() == ErrorKind::UnexpectedEof), "{err}");
    }
}
