//! Frame decoding on a background thread, a few frames ahead of the tracker.

use std::path::PathBuf;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use camtrack::imaging::{load_frame, GrayFrame, ImageError};
use camtrack::tracker::FrameSource;

/// Frames decoded ahead of time.
pub const DEFAULT_CAPACITY: usize = 4;

#[derive(Debug)]
pub struct Decoded {
    pub index: usize,
    pub frame: GrayFrame,
    pub decode_time: Duration,
}

/// Decodes `paths` in order on a worker thread through a bounded channel.
pub struct Prefetch {
    rx: Option<Receiver<Result<Decoded, ImageError>>>,
    worker: Option<JoinHandle<()>>,
    len: usize,
    next: usize,
}

impl Prefetch {
    pub fn spawn(paths: Vec<PathBuf>, capacity: usize) -> Self {
        let len = paths.len();
        let (tx, rx) = sync_channel(capacity.max(1));
        let worker = thread::spawn(move || {
            for (index, path) in paths.into_iter().enumerate() {
                let started = Instant::now();
                let item = load_frame(&path)
                    .map(|frame| Decoded { index, frame, decode_time: started.elapsed() })
                    .map_err(|e| match e {
                        ImageError::Io { .. } => e,
                        other => ImageError::InvalidFrame(format!("{}: {other}", path.display())),
                    });
                let failed = item.is_err();
                if tx.send(item).is_err() || failed {
                    return;
                }
            }
        });
        Prefetch { rx: Some(rx), worker: Some(worker), len, next: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl Iterator for Prefetch {
    type Item = Result<Decoded, ImageError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.len {
            return None;
        }
        let item = self.rx.as_ref()?.recv().ok()?;
        self.next += 1;
        Some(item)
    }
}

impl FrameSource for Prefetch {
    fn len(&self) -> usize {
        self.len
    }

    fn frame(&mut self, index: usize) -> Result<GrayFrame, ImageError> {
        if index != self.next {
            return Err(ImageError::InvalidFrame(format!("frame {index} requested out of order")));
        }
        match Iterator::next(self) {
            Some(item) => item.map(|d| d.frame),
            None => Err(ImageError::InvalidFrame(format!("no frame {index}"))),
        }
    }
}

impl Drop for Prefetch {
    fn drop(&mut self) {
        // closing the channel unblocks a worker waiting on a full queue
        self.rx = None;
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}
