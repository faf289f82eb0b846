//! Real worker transport: one fresh process per execution, killed hard at the
//! deadline.
//!
//! This is a benchmark harness, not a security boundary. The worker runs with
//! the orchestrator's privileges; only wall-clock time and captured output are
//! bounded.

use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::process::{Child, Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{Sandbox, SandboxConfig, SandboxError, WorkerOutcome, WorkerReport, WorkerRequest};

const POLL_INTERVAL: Duration = Duration::from_millis(2);
/// Headroom for the JSON envelope around the capped output.
const REPORT_OVERHEAD_BYTES: usize = 64 * 1024;

/// Counting semaphore bounding concurrent workers.
#[derive(Debug)]
struct Pool {
    free: Mutex<usize>,
    released: Condvar,
}

impl Pool {
    fn acquire(&self) -> PoolPermit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.released.wait(free).unwrap();
        }
        *free -= 1;
        PoolPermit { pool: self }
    }
}

struct PoolPermit<'a> {
    pool: &'a Pool,
}

impl Drop for PoolPermit<'_> {
    fn drop(&mut self) {
        *self.pool.free.lock().unwrap() += 1;
        self.pool.released.notify_one();
    }
}

#[derive(Debug)]
pub struct ProcessSandbox {
    pool: Pool,
}

impl Default for ProcessSandbox {
    fn default() -> Self {
        Self::new(1)
    }
}

impl ProcessSandbox {
    /// `pool_size` bounds how many workers may run at once.
    pub fn new(pool_size: usize) -> Self {
        Self {
            pool: Pool {
                free: Mutex::new(pool_size.max(1)),
                released: Condvar::new(),
            },
        }
    }
}

fn kill_group(child: &Child) {
    // SAFETY: kill(2) with a negative pid signals the process group created by
    // `process_group(0)`; it has no memory-safety preconditions.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

/// Read at most `cap` bytes, then drain and discard the rest so the writer
/// never blocks on a full pipe.
fn read_capped<R: Read + Send + 'static>(mut reader: R, cap: usize) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        kept
    })
}

impl Sandbox for ProcessSandbox {
    fn run_worker(&self, request: &WorkerRequest, config: &SandboxConfig) -> Result<WorkerOutcome, SandboxError> {
        let (program, args) = config
            .worker_command
            .split_first()
            .ok_or_else(|| SandboxError::InvalidConfig("worker_command is empty".into()))?;
        let payload =
            serde_json::to_vec(request).map_err(|e| SandboxError::Protocol(format!("cannot encode request: {e}")))?;

        let _permit = self.pool.acquire();
        let started = Instant::now();
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0)
            .spawn()
            .map_err(|source| SandboxError::Spawn {
                command: config.worker_command.join(" "),
                source,
            })?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = thread::spawn(move || {
            // A worker that exits without reading stdin yields EPIPE here;
            // its exit status reports the real problem.
            let _ = stdin.write_all(&payload);
        });
        let cap = config.max_output_bytes + REPORT_OVERHEAD_BYTES;
        let stdout = read_capped(child.stdout.take().expect("stdout is piped"), cap);
        let stderr = read_capped(child.stderr.take().expect("stderr is piped"), 16 * 1024);

        let deadline = started + Duration::from_millis(config.timeout_ms);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if Instant::now() >= deadline {
                break None;
            }
            thread::sleep(POLL_INTERVAL);
        };

        let Some(status) = status else {
            kill_group(&child);
            child.wait()?;
            let elapsed_ms = started.elapsed().as_millis() as u64;
            // Reader threads finish once the group's pipe ends close; they are
            // detached so a stray descendant cannot stall the orchestrator.
            drop((writer, stdout, stderr));
            return Ok(WorkerOutcome::KilledAtDeadline { elapsed_ms });
        };
        let elapsed_ms = started.elapsed().as_millis() as u64;
        // Reap anything the worker left behind in its group.
        kill_group(&child);
        let _ = writer.join();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();

        if !status.success() {
            return Err(SandboxError::WorkerFailed {
                status: status.to_string(),
                stderr: String::from_utf8_lossy(&stderr).trim().to_string(),
            });
        }
        let text = String::from_utf8_lossy(&stdout);
        let mut report: WorkerReport = serde_json::from_str(text.trim())
            .map_err(|e| SandboxError::Protocol(format!("malformed worker report: {e}")))?;
        report.duration_ms = elapsed_ms;
        Ok(WorkerOutcome::Completed(report))
    }
}
