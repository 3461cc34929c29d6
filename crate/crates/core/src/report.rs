//! Run reports and their CSV renderings. Rationals are written as `num/den`.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::parallel::sim::MasterTrace;
use crate::rational::ExactRational;
use crate::record::EmissionRecord;

/// Parameters of a parallel run, kept alongside its emissions.
#[derive(Debug, Clone)]
pub struct ParallelInfo {
    pub slaves: usize,
    pub prefill: u64,
    pub alpha: ExactRational,
    pub delta: ExactRational,
    pub delta_star: ExactRational,
    pub pace: ExactRational,
    pub stalls: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub algorithm: String,
    pub instance: String,
    pub seed: u64,
    pub emissions: Vec<EmissionRecord>,
    pub parallel: Option<ParallelInfo>,
}

/// Mean attempts and ticks over one window of consecutive emissions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowRow {
    /// 1-based.
    pub window: usize,
    pub first: u64,
    pub last: u64,
    pub count: usize,
    pub mean_attempts: ExactRational,
    pub mean_ticks: ExactRational,
}

impl RunReport {
    pub fn new(algorithm: impl Into<String>, instance: impl Into<String>, seed: u64, emissions: Vec<EmissionRecord>) -> Self {
        Self {
            algorithm: algorithm.into(),
            instance: instance.into(),
            seed,
            emissions,
            parallel: None,
        }
    }

    pub fn total_attempts(&self) -> u64 {
        self.emissions.iter().map(|e| e.attempts).sum()
    }

    pub fn mean_attempts(&self) -> Option<ExactRational> {
        (!self.emissions.is_empty())
            .then(|| ExactRational::ratio(self.total_attempts() as i64, self.emissions.len() as i64))
    }

    pub fn max_attempts(&self) -> u64 {
        self.emissions.iter().map(|e| e.attempts).max().unwrap_or(0)
    }

    pub fn total_ticks(&self) -> u64 {
        self.emissions.last().map_or(0, |e| e.tick)
    }

    /// Consecutive windows of `window` emissions; the last may be shorter.
    pub fn delay_profile(&self, window: usize) -> Vec<WindowRow> {
        let window = window.max(1);
        self.emissions
            .chunks(window)
            .enumerate()
            .map(|(k, chunk)| {
                let n = chunk.len() as i64;
                let attempts: u64 = chunk.iter().map(|e| e.attempts).sum();
                let ticks: u64 = chunk.iter().map(|e| e.delay).sum();
                WindowRow {
                    window: k + 1,
                    first: chunk[0].index,
                    last: chunk[chunk.len() - 1].index,
                    count: chunk.len(),
                    mean_attempts: ExactRational::ratio(attempts as i64, n),
                    mean_ticks: ExactRational::ratio(ticks as i64, n),
                }
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmissionRow<'a> {
    algorithm: &'a str,
    instance: &'a str,
    seed: u64,
    index: u64,
    solution: String,
    lo: String,
    hi: String,
    width: String,
    attempts: u64,
    tick: u64,
    delay: u64,
}

#[derive(Serialize)]
struct ProfileRow {
    window: usize,
    first: u64,
    last: u64,
    count: usize,
    mean_attempts: String,
    mean_ticks: String,
}

#[derive(Serialize)]
struct TraceRow {
    output: usize,
    slave: usize,
    solution: String,
    time: String,
    gap: String,
    stalled: bool,
    queue_depths: String,
    remaining: String,
}

fn display_solution(e: &EmissionRecord) -> String {
    if e.solution.is_empty() {
        "λ".into()
    } else {
        e.solution.to_string()
    }
}

pub fn write_emissions<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if report.emissions.is_empty() {
        w.write_record([
            "algorithm", "instance", "seed", "index", "solution", "lo", "hi", "width", "attempts", "tick", "delay",
        ])?;
    }
    for e in &report.emissions {
        w.serialize(EmissionRow {
            algorithm: &report.algorithm,
            instance: &report.instance,
            seed: report.seed,
            index: e.index,
            solution: display_solution(e),
            lo: e.interval.lo.to_string(),
            hi: e.interval.hi.to_string(),
            width: e.width().to_string(),
            attempts: e.attempts,
            tick: e.tick,
            delay: e.delay,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_profile<W: Write>(rows: &[WindowRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["window", "first", "last", "count", "mean_attempts", "mean_ticks"])?;
    }
    for r in rows {
        w.serialize(ProfileRow {
            window: r.window,
            first: r.first,
            last: r.last,
            count: r.count,
            mean_attempts: r.mean_attempts.to_string(),
            mean_ticks: r.mean_ticks.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

/// One row per master output: gap since the previous output, queue depths
/// and remaining lengths, `;`-separated per slave.
pub fn write_trace<W: Write>(trace: &MasterTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.outputs.is_empty() {
        w.write_record([
            "output", "slave", "solution", "time", "gap", "stalled", "queue_depths", "remaining",
        ])?;
    }
    for (k, o) in trace.outputs.iter().enumerate() {
        w.serialize(TraceRow {
            output: k + 1,
            slave: o.slave,
            solution: display_solution(&o.record),
            time: o.time.to_string(),
            gap: o.gap.as_ref().map_or_else(String::new, ToString::to_string),
            stalled: o.stalled,
            queue_depths: join(&o.depths),
            remaining: join(&o.remaining),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access::SessionOptions;
    use crate::fptas::AiaSession;
    use crate::oracle::Exactly;
    use crate::problems::{AllBits, AllBitsCounter, AllBitsInstance};

    fn aia_report(n: usize, seed: u64) -> RunReport {
        let recs = AiaSession::new(&AllBits, Exactly(AllBitsCounter), AllBitsInstance::new(n), SessionOptions::seeded(seed))
            .unwrap()
            .map(Result::unwrap)
            .collect();
        RunReport::new("aia", format!("allbits {n}"), seed, recs)
    }

    #[test]
    fn profile_windows_reconcile() {
        let r = aia_report(6, 1);
        let rows = r.delay_profile(10);
        assert_eq!(rows.len(), 7);
        assert_eq!(rows.iter().map(|w| w.count).sum::<usize>(), 64);
        assert_eq!(rows.last().unwrap().count, 4);
        for w in &rows {
            assert!(w.mean_attempts >= 1);
        }
    }

    #[test]
    fn single_emission_profile_has_one_row() {
        assert_eq!(aia_report(0, 0).delay_profile(256).len(), 1);
    }

    #[test]
    fn csv_is_deterministic() {
        let render = || {
            let mut buf = Vec::new();
            write_emissions(&aia_report(4, 7), &mut buf).unwrap();
            buf
        };
        let a = render();
        assert_eq!(a, render());
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("algorithm,instance,seed,index,solution,lo,hi,width,attempts,tick,delay")
        );
        assert!(lines.next().unwrap().contains("/16"));
    }

    #[test]
    fn empty_reports_keep_their_header() {
        let mut buf = Vec::new();
        write_profile(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "window,first,last,count,mean_attempts,mean_ticks\n");
    }
}
