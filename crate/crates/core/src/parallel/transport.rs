//! Live master/slave runs over in-process channels or loopback TCP.
//!
//! On the wire every [`Message`] is a frame: a big-endian `u32` byte length
//! followed by that many bytes of JSON.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::master::{prefill_target, MasterQueues};
use super::{master_phase1, slave_run, worker_seed, Partition, RangeAssignment};
use crate::access::{EpsilonMode, SessionOptions};
use crate::error::{Error, Result};
use crate::model::SelfReducible;
use crate::oracle::RandomizedCounter;
use crate::rational::ExactRational;
use crate::record::EmissionRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    Assign(RangeAssignment),
    Emission { slave: usize, record: EmissionRecord },
    Done { slave: usize, emitted: u64, discarded: ExactRational },
    Failed { slave: usize, reason: String },
}

const MAX_FRAME: u32 = 64 << 20;

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    let body = serde_json::to_vec(msg).map_err(|e| Error::Transport(e.to_string()))?;
    let len = u32::try_from(body.len()).map_err(|_| Error::Transport("frame too large".into()))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// `Ok(None)` on a clean end of stream before a frame starts.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME {
        return Err(Error::Transport(format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body)
        .map(Some)
        .map_err(|e| Error::Transport(format!("bad frame: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportKind {
    #[default]
    Channels,
    Tcp,
}

impl std::str::FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "channels" => Ok(Self::Channels),
            "tcp" => Ok(Self::Tcp),
            _ => Err(Error::Parse(format!("unknown transport {s:?}; expected channels or tcp"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub slaves: usize,
    pub delta: ExactRational,
    pub alpha: ExactRational,
    pub delta_star: ExactRational,
    pub prefill: Option<u64>,
    pub seed: u64,
    pub epsilon_mode: EpsilonMode,
    pub transport: TransportKind,
    /// How long the master waits for a message before declaring deadlock.
    pub watchdog: Duration,
}

impl LiveConfig {
    pub fn new(slaves: usize) -> Self {
        Self {
            slaves,
            delta: ExactRational::ratio(1, 10),
            alpha: ExactRational::ratio(1, 2),
            delta_star: ExactRational::ratio(1, 10),
            prefill: None,
            seed: 0,
            epsilon_mode: EpsilonMode::Proof,
            transport: TransportKind::Channels,
            watchdog: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiveRun {
    pub partition: Partition,
    /// `(slave, record)` in output order.
    pub outputs: Vec<(usize, EmissionRecord)>,
    pub prefill: u64,
    /// `(emitted, discarded)` per slave as reported in `Done`.
    pub reports: Vec<(u64, ExactRational)>,
}

/// Runs master and slaves on separate threads. `oracle_for(0)` serves the
/// master, `oracle_for(i)` slave `i`.
pub fn run_live<P, C, F>(problem: &P, x: &P::Instance, oracle_for: F, cfg: &LiveConfig) -> Result<LiveRun>
where
    P: SelfReducible + Sync,
    P::Instance: Send + Sync,
    C: RandomizedCounter<P::Instance> + Send,
    F: Fn(usize) -> C + Sync,
{
    let partition = master_phase1(problem, &oracle_for(0), x, &cfg.delta, cfg.slaves, cfg.epsilon_mode)?;
    let prefill = match cfg.prefill {
        Some(q) => q,
        None => prefill_target(cfg.slaves, cfg.alpha.to_f64(), cfg.delta_star.to_f64())?,
    };
    if partition.assignments.is_empty() {
        return Ok(LiveRun {
            partition,
            outputs: Vec::new(),
            prefill,
            reports: Vec::new(),
        });
    }
    let opts = SessionOptions::seeded(cfg.seed).with_epsilon_mode(cfg.epsilon_mode);
    let (tx, rx) = mpsc::channel::<Message>();
    let (outputs, reports) = thread::scope(|scope| -> Result<_> {
        let oracle_for = &oracle_for;
        match cfg.transport {
            TransportKind::Channels => {
                for a in &partition.assignments {
                    let (atx, arx) = mpsc::channel::<Message>();
                    atx.send(Message::Assign(a.clone()))
                        .map_err(|e| Error::Transport(e.to_string()))?;
                    let tx = tx.clone();
                    let opts = opts.clone();
                    scope.spawn(move || {
                        let assign = arx.recv().map_err(|e| Error::Transport(e.to_string()));
                        slave_worker(problem, x, oracle_for, assign, opts, |m| {
                            tx.send(m).map_err(|e| Error::Transport(e.to_string()))
                        });
                    });
                }
            }
            TransportKind::Tcp => {
                let listener = TcpListener::bind("127.0.0.1:0")?;
                let addr = listener.local_addr()?;
                for _ in &partition.assignments {
                    let opts = opts.clone();
                    scope.spawn(move || {
                        let Ok(stream) = TcpStream::connect(addr) else {
                            return;
                        };
                        let mut reader = match stream.try_clone() {
                            Ok(s) => s,
                            Err(_) => return,
                        };
                        let mut writer = stream;
                        let assign = match read_frame(&mut reader) {
                            Ok(Some(Message::Assign(a))) => Ok(a),
                            Ok(other) => Err(Error::Transport(format!("expected Assign, got {other:?}"))),
                            Err(e) => Err(e),
                        };
                        slave_worker(problem, x, oracle_for, assign.map(Message::Assign), opts, |m| {
                            write_frame(&mut writer, &m)
                        });
                    });
                }
                for a in &partition.assignments {
                    let (mut stream, _) = listener.accept()?;
                    write_frame(&mut stream, &Message::Assign(a.clone()))?;
                    let tx = tx.clone();
                    scope.spawn(move || loop {
                        match read_frame(&mut stream) {
                            Ok(Some(m)) => {
                                if tx.send(m).is_err() {
                                    break;
                                }
                            }
                            Ok(None) => break,
                            Err(e) => {
                                let _ = tx.send(Message::Failed {
                                    slave: 0,
                                    reason: e.to_string(),
                                });
                                break;
                            }
                        }
                    });
                }
            }
        }
        drop(tx);
        let lengths = partition.ranges().map(|r| r.width()).collect();
        master_loop(rx, MasterQueues::new(lengths), prefill, cfg)
    })?;
    Ok(LiveRun {
        partition,
        outputs,
        prefill,
        reports,
    })
}

fn slave_worker<P, C, F, S>(
    problem: &P,
    x: &P::Instance,
    oracle_for: &F,
    assign: Result<Message>,
    opts: SessionOptions,
    mut send: S,
) where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
    F: Fn(usize) -> C,
    S: FnMut(Message) -> Result<()>,
{
    let a = match assign {
        Ok(Message::Assign(a)) => a,
        Ok(other) => {
            let _ = send(Message::Failed {
                slave: 0,
                reason: format!("expected Assign, got {other:?}"),
            });
            return;
        }
        Err(e) => {
            let _ = send(Message::Failed {
                slave: 0,
                reason: e.to_string(),
            });
            return;
        }
    };
    let opts = SessionOptions {
        seed: worker_seed(opts.seed, a.slave),
        ..opts
    };
    if let Err(e) = slave_run(problem, oracle_for(a.slave), x.clone(), &a, opts, &mut send) {
        let _ = send(Message::Failed {
            slave: a.slave,
            reason: e.to_string(),
        });
    }
}

type MasterResult = (Vec<(usize, EmissionRecord)>, Vec<(u64, ExactRational)>);

fn master_loop(
    rx: mpsc::Receiver<Message>,
    mut queues: MasterQueues,
    prefill: u64,
    cfg: &LiveConfig,
) -> Result<MasterResult> {
    let m = queues.slaves();
    let mut reports = vec![(0u64, ExactRational::zero()); m];
    let mut receive = |queues: &mut MasterQueues, waiting_on: usize| -> Result<()> {
        let msg = rx.recv_timeout(cfg.watchdog).map_err(|e| match e {
            mpsc::RecvTimeoutError::Timeout => Error::Deadlock {
                slave: waiting_on,
                remaining: queues
                    .remaining()
                    .get(waiting_on.wrapping_sub(1))
                    .map_or_else(String::new, ToString::to_string),
            },
            mpsc::RecvTimeoutError::Disconnected => {
                Error::Transport(format!("all slaves hung up while waiting on slave {waiting_on}"))
            }
        })?;
        match msg {
            Message::Emission { slave, record } => queues.push(slave, record),
            Message::Done {
                slave,
                emitted,
                discarded,
            } => {
                queues.finish(slave, &discarded)?;
                reports[slave - 1] = (emitted, discarded);
                Ok(())
            }
            Message::Failed { slave, reason } => Err(Error::Transport(format!("slave {slave} failed: {reason}"))),
            Message::Assign(_) => Err(Error::Transport("master received an Assign".into())),
        }
    };
    while !queues.is_prefilled(prefill) {
        receive(&mut queues, 0)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, 0));
    let mut outputs = Vec::new();
    while let Some(slave) = queues.pick(&mut rng) {
        loop {
            if let Some(rec) = queues.pop(slave)? {
                outputs.push((slave, rec));
                break;
            }
            receive(&mut queues, slave)?;
            // a Done carrying discarded width may have drained this slave
            if !queues.remaining()[slave - 1].is_positive() {
                break;
            }
        }
    }
    Ok((outputs, reports))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::bits::BitString;
    use crate::model::brute_force_solutions;
    use crate::parallel::sim::{run_virtual, HarnessConfig};
    use crate::problems::{AllBits, AllBitsCounter, AllBitsInstance, SimulatedOracle, SimulatedOracleConfig};
    use crate::rational::Interval;

    fn noisy(i: usize) -> SimulatedOracle<AllBitsCounter> {
        SimulatedOracle::with_nonce(AllBitsCounter, SimulatedOracleConfig::default(), i as u64)
    }

    #[test]
    fn frames_round_trip() {
        let msgs = vec![
            Message::Assign(RangeAssignment {
                slave: 2,
                range: Interval::new(ExactRational::ratio(1, 3), ExactRational::one()),
                phi_star: ExactRational::ratio(4, 27),
                delta: ExactRational::ratio(1, 10),
                dictionary: vec![("10".parse::<BitString>().unwrap(), u128::MAX)],
            }),
            Message::Done {
                slave: 1,
                emitted: 7,
                discarded: ExactRational::ratio(1, 64),
            },
            Message::Failed {
                slave: 3,
                reason: "boom".into(),
            },
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut cur = std::io::Cursor::new(buf);
        for m in &msgs {
            assert_eq!(read_frame(&mut cur).unwrap().as_ref(), Some(m));
        }
        assert!(read_frame(&mut cur).unwrap().is_none());
    }

    #[test]
    fn truncated_frame_is_an_error() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &Message::Failed { slave: 1, reason: "x".into() }).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(read_frame(&mut std::io::Cursor::new(buf)).is_err());
    }

    #[test]
    fn live_transports_agree_with_the_replay() {
        let x = AllBitsInstance::new(6);
        let truth = brute_force_solutions(&AllBits, &x, 128).unwrap();
        let virt = run_virtual(
            &AllBits,
            &x,
            noisy,
            &HarnessConfig {
                seed: 9,
                ..HarnessConfig::new(3)
            },
        )
        .unwrap();
        let expected: Vec<_> = virt.solutions().cloned().collect();
        for transport in [TransportKind::Channels, TransportKind::Tcp] {
            let cfg = LiveConfig {
                seed: 9,
                transport,
                ..LiveConfig::new(3)
            };
            let run = run_live(&AllBits, &x, noisy, &cfg).unwrap();
            let got: Vec<_> = run.outputs.iter().map(|(_, r)| r.solution.clone()).collect();
            assert_eq!(got.iter().cloned().collect::<BTreeSet<_>>(), truth);
            assert_eq!(got, expected, "{transport:?}");
            assert_eq!(run.reports.iter().map(|r| r.0).sum::<u64>(), 64);
        }
    }
}
