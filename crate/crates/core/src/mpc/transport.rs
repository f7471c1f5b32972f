//! Message transports between parties and the dealer.

use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::mpc::wire::{read_frame, Frame};

/// Ordered, reliable, bidirectional frame channel to one peer.
pub trait Link: Send {
    fn send(&mut self, frame: &Frame) -> Result<()>;
    fn recv(&mut self) -> Result<Frame>;
}

impl<L: Link + ?Sized> Link for Box<L> {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        (**self).send(frame)
    }

    fn recv(&mut self) -> Result<Frame> {
        (**self).recv()
    }
}

/// In-process link carrying encoded frames over channels.
pub struct MemLink {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl MemLink {
    pub fn pair() -> (MemLink, MemLink) {
        let (ta, ra) = mpsc::channel();
        let (tb, rb) = mpsc::channel();
        (MemLink { tx: ta, rx: rb }, MemLink { tx: tb, rx: ra })
    }
}

impl Link for MemLink {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.tx.send(frame.encode()).map_err(|_| Error::Disconnected)
    }

    fn recv(&mut self) -> Result<Frame> {
        let bytes = self.rx.recv().map_err(|_| Error::Disconnected)?;
        Frame::decode(&bytes)
    }
}

/// TCP link. Writes go through a background thread so that two peers
/// sending large frames at the same time cannot block each other.
pub struct TcpLink {
    reader: BufReader<TcpStream>,
    tx: Option<Sender<Vec<u8>>>,
    writer: Option<JoinHandle<std::io::Result<()>>>,
}

impl TcpLink {
    pub fn from_stream(stream: TcpStream) -> Result<TcpLink> {
        stream.set_nodelay(true)?;
        let write_half = stream.try_clone()?;
        let (tx, rx) = mpsc::channel::<Vec<u8>>();
        let writer = std::thread::spawn(move || {
            let mut w = BufWriter::new(write_half);
            while let Ok(buf) = rx.recv() {
                w.write_all(&buf)?;
                // drain whatever is queued before paying for a flush
                while let Ok(more) = rx.try_recv() {
                    w.write_all(&more)?;
                }
                w.flush()?;
            }
            Ok(())
        });
        Ok(TcpLink {
            reader: BufReader::with_capacity(1 << 16, stream),
            tx: Some(tx),
            writer: Some(writer),
        })
    }

    /// Connects to `addr`, retrying until `timeout` elapses.
    pub fn connect(addr: &str, timeout: Duration) -> Result<TcpLink> {
        let deadline = Instant::now() + timeout;
        loop {
            let attempt = addr
                .to_socket_addrs()
                .ok()
                .and_then(|mut it| it.next())
                .map(|sa| {
                    let left = deadline.saturating_duration_since(Instant::now());
                    TcpStream::connect_timeout(&sa, left.max(Duration::from_millis(1)))
                });
            if let Some(Ok(stream)) = attempt {
                return TcpLink::from_stream(stream);
            }
            if Instant::now() >= deadline {
                return Err(Error::ConnectTimeout {
                    addr: addr.to_string(),
                    millis: timeout.as_millis() as u64,
                });
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    /// Accepts one connection, giving up after `timeout`.
    pub fn accept(listener: &TcpListener, timeout: Duration) -> Result<TcpLink> {
        listener.set_nonblocking(true)?;
        let deadline = Instant::now() + timeout;
        loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    return TcpLink::from_stream(stream);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        let addr = listener
                            .local_addr()
                            .map(|a| a.to_string())
                            .unwrap_or_default();
                        return Err(Error::ConnectTimeout {
                            addr,
                            millis: timeout.as_millis() as u64,
                        });
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl Link for TcpLink {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.tx
            .as_ref()
            .ok_or(Error::Disconnected)?
            .send(frame.encode())
            .map_err(|_| Error::Disconnected)
    }

    fn recv(&mut self) -> Result<Frame> {
        read_frame(&mut self.reader)?.ok_or(Error::Disconnected)
    }
}

impl Drop for TcpLink {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(h) = self.writer.take() {
            let _ = h.join();
        }
    }
}

/// Link used for dry runs: every receive echoes a zero payload of the size
/// last sent, so protocol control flow proceeds without a peer.
#[derive(Default)]
pub struct NullLink {
    last: Option<Frame>,
}

impl Link for NullLink {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        self.last = Some(Frame {
            payload: vec![0; frame.payload.len()],
            ..frame.clone()
        });
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame> {
        self.last.take().ok_or(Error::Disconnected)
    }
}
