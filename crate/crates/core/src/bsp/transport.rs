//! Message delivery between sites for one communication superstep.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;

use crate::fragment::FragmentId;

/// Encoded records sent from one site to another in a single superstep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub src: FragmentId,
    pub dst: FragmentId,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("destination fragment {0} has no endpoint")]
    UnknownDestination(u32),
    #[error("network error: {0}")]
    Io(#[from] io::Error),
    #[error("receiver for fragment {0} stopped")]
    ReceiverGone(u32),
}

/// Delivers every batch of a superstep and returns each site's inbox,
/// ordered by sender.
pub trait Transport {
    fn exchange(
        &mut self,
        k: usize,
        batches: Vec<Batch>,
    ) -> Result<Vec<Vec<Batch>>, TransportError>;
}

fn into_inboxes(k: usize, batches: Vec<Batch>) -> Result<Vec<Vec<Batch>>, TransportError> {
    let mut inboxes: Vec<Vec<Batch>> = vec![Vec::new(); k];
    for b in batches {
        inboxes
            .get_mut(b.dst.index())
            .ok_or(TransportError::UnknownDestination(b.dst.0))?
            .push(b);
    }
    for inbox in &mut inboxes {
        inbox.sort_by_key(|b| b.src);
    }
    Ok(inboxes)
}

/// Hands batches over in memory.
#[derive(Debug, Default, Clone, Copy)]
pub struct InProcTransport;

impl Transport for InProcTransport {
    fn exchange(
        &mut self,
        k: usize,
        batches: Vec<Batch>,
    ) -> Result<Vec<Vec<Batch>>, TransportError> {
        into_inboxes(k, batches)
    }
}

/// Sends each batch over a loopback or LAN TCP connection to a listener
/// owned by the destination site. Frames are `src:u32 | len:u32 | payload`.
pub struct TcpTransport {
    addrs: Vec<SocketAddr>,
    inboxes: Vec<Receiver<Batch>>,
    listeners: Vec<JoinHandle<()>>,
    stop: Arc<AtomicBool>,
}

impl TcpTransport {
    /// Binds one listener per site. Port 0 picks a free port; see [`TcpTransport::addrs`].
    pub fn bind(endpoints: &[SocketAddr]) -> io::Result<Self> {
        let stop = Arc::new(AtomicBool::new(false));
        let mut addrs = Vec::new();
        let mut inboxes = Vec::new();
        let mut listeners = Vec::new();
        for (i, ep) in endpoints.iter().enumerate() {
            let listener = TcpListener::bind(ep)?;
            addrs.push(listener.local_addr()?);
            let (tx, rx) = mpsc::channel();
            inboxes.push(rx);
            let stop = stop.clone();
            let dst = FragmentId(i as u32);
            listeners.push(std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(mut stream) = stream else { continue };
                    if let Ok((src, payload)) = read_frame(&mut stream) {
                        if tx.send(Batch { src, dst, payload }).is_err() {
                            break;
                        }
                    }
                }
            }));
        }
        Ok(TcpTransport {
            addrs,
            inboxes,
            listeners,
            stop,
        })
    }

    /// `k` listeners on ephemeral loopback ports.
    pub fn loopback(k: usize) -> io::Result<Self> {
        let any: SocketAddr = ([127, 0, 0, 1], 0).into();
        Self::bind(&vec![any; k])
    }

    pub fn addrs(&self) -> &[SocketAddr] {
        &self.addrs
    }
}

fn read_frame(stream: &mut TcpStream) -> io::Result<(FragmentId, Vec<u8>)> {
    let mut head = [0u8; 8];
    stream.read_exact(&mut head)?;
    let src = u32::from_le_bytes(head[..4].try_into().unwrap());
    let len = u32::from_le_bytes(head[4..].try_into().unwrap()) as usize;
    let mut payload = vec![0; len];
    stream.read_exact(&mut payload)?;
    Ok((FragmentId(src), payload))
}

impl Transport for TcpTransport {
    fn exchange(
        &mut self,
        k: usize,
        batches: Vec<Batch>,
    ) -> Result<Vec<Vec<Batch>>, TransportError> {
        let mut expected: BTreeMap<usize, usize> = BTreeMap::new();
        for b in &batches {
            let addr = self
                .addrs
                .get(b.dst.index())
                .ok_or(TransportError::UnknownDestination(b.dst.0))?;
            let mut stream = TcpStream::connect(addr)?;
            let len = u32::try_from(b.payload.len())
                .map_err(|_| io::Error::other("batch exceeds 4 GiB"))?;
            stream.write_all(&b.src.0.to_le_bytes())?;
            stream.write_all(&len.to_le_bytes())?;
            stream.write_all(&b.payload)?;
            *expected.entry(b.dst.index()).or_default() += 1;
        }
        let mut received = Vec::new();
        for (dst, count) in expected {
            for _ in 0..count {
                let batch = self.inboxes[dst]
                    .recv_timeout(Duration::from_secs(30))
                    .map_err(|_| TransportError::ReceiverGone(dst as u32))?;
                received.push(batch);
            }
        }
        into_inboxes(k, received)
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for addr in &self.addrs {
            let _ = TcpStream::connect(addr);
        }
        for h in self.listeners.drain(..) {
            let _ = h.join();
        }
    }
}
