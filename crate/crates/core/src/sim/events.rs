//! Tracking-pixel event logs.
//!
//! An opened email fetches a one-pixel image (`pixel_fetch`) and then a large
//! image served at a throttled rate; the bytes delivered before the reader
//! closes the email (`bytes_progress`) measure how long it stayed open.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng as _;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::design::CampaignSchedule;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// 10 KB/s with 1 KB = 1024 bytes.
pub const DEFAULT_DOWNLOAD_RATE: f64 = 10_240.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Sent,
    PixelFetch,
    BytesProgress,
    Click,
    Reply,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailEvent {
    pub email_id: String,
    pub kind: EventKind,
    pub bytes: Option<u64>,
    /// ISO-8601 UTC timestamp with millisecond precision.
    pub t: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmailEventLog {
    pub events: Vec<EmailEvent>,
}

impl EmailEventLog {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut events = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: EmailEvent =
                serde_json::from_str(&line).map_err(|err| Error::MalformedLog(format!("line {}: {err}", i + 1)))?;
            events.push(e);
        }
        Ok(Self { events })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadTime {
    Fixed { seconds: f64 },
    LogNormal { median: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventTiming {
    pub download_rate_bytes_per_s: f64,
    pub read_time: ReadTime,
    pub click_prob: f64,
    pub reply_prob: f64,
    /// Chance of each additional open after the previous one.
    pub reopen_prob: f64,
    pub open_delay_mean_hours: f64,
    pub start_date: NaiveDate,
}

impl Default for EventTiming {
    fn default() -> Self {
        Self {
            download_rate_bytes_per_s: DEFAULT_DOWNLOAD_RATE,
            read_time: ReadTime::LogNormal { median: 10.33, sigma: 1.0 },
            click_prob: 0.05,
            reply_prob: 0.02,
            reopen_prob: 0.0,
            open_delay_mean_hours: 6.0,
            start_date: NaiveDate::from_ymd_opt(2020, 3, 2).expect("valid date"),
        }
    }
}

impl EventTiming {
    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.download_rate_bytes_per_s > 0.0) {
            return Err(Error::InvalidInput("download rate must be positive".into()));
        }
        if !prob(self.click_prob) || !prob(self.reply_prob) || !(0.0..1.0).contains(&self.reopen_prob) {
            return Err(Error::InvalidInput("event probabilities must lie in [0,1]".into()));
        }
        match self.read_time {
            ReadTime::Fixed { seconds } if !(seconds >= 0.0) => {
                Err(Error::InvalidInput("fixed read time must be non-negative".into()))
            }
            ReadTime::LogNormal { median, sigma } if !(median > 0.0 && sigma >= 0.0) => {
                Err(Error::InvalidInput("lognormal read time needs median > 0, sigma >= 0".into()))
            }
            _ if !(self.open_delay_mean_hours > 0.0) => {
                Err(Error::InvalidInput("open delay mean must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EmittedLog {
    pub log: EmailEventLog,
    /// Ground-truth read seconds of each opened email.
    pub read_seconds: BTreeMap<String, f64>,
}

fn stamp(t: NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

fn seconds(s: f64) -> Duration {
    Duration::milliseconds((s * 1000.0).round() as i64)
}

/// Emits the tracking log of a campaign. `opens[k]` belongs to
/// `schedule.treatments[k]`.
pub fn emit_event_log(
    rng: &mut Rng,
    schedule: &CampaignSchedule,
    opens: &[bool],
    timing: &EventTiming,
) -> Result<EmittedLog> {
    timing.validate()?;
    if opens.len() != schedule.treatments.len() {
        return Err(Error::InvalidInput("one open flag per scheduled email required".into()));
    }
    let delay = Exp::new(1.0 / timing.open_delay_mean_hours).expect("positive rate");
    let read_dist = match timing.read_time {
        ReadTime::LogNormal { median, sigma } => Some(LogNormal::new(median.ln(), sigma).expect("validated")),
        ReadTime::Fixed { .. } => None,
    };
    let base = timing.start_date.and_hms_opt(9, 0, 0).expect("valid time");
    let mut out = EmittedLog::default();
    for (t, &opened) in schedule.treatments.iter().zip(opens) {
        let day = t.send_day.ok_or_else(|| Error::InvalidInput(format!("email {} is unscheduled", t.email_id)))?;
        let sent_at = base + Duration::days(i64::from(day));
        let push = |out: &mut EmittedLog, kind, bytes, at| {
            out.log.events.push(EmailEvent { email_id: t.email_id.clone(), kind, bytes, t: stamp(at) })
        };
        push(&mut out, EventKind::Sent, None, sent_at);
        if !opened {
            continue;
        }
        let mut at = sent_at + seconds(delay.sample(rng) * 3600.0);
        push(&mut out, EventKind::PixelFetch, None, at);
        let read = match (timing.read_time, &read_dist) {
            (ReadTime::Fixed { seconds }, _) => seconds,
            (_, Some(d)) => d.sample(rng),
            _ => unreachable!(),
        };
        let bytes = (read * timing.download_rate_bytes_per_s).round() as u64;
        at += seconds(read);
        push(&mut out, EventKind::BytesProgress, Some(bytes), at);
        out.read_seconds.insert(t.email_id.clone(), read);
        while rng.random::<f64>() < timing.reopen_prob {
            at += seconds(delay.sample(rng) * 3600.0);
            push(&mut out, EventKind::PixelFetch, None, at);
        }
        if rng.random::<f64>() < timing.click_prob {
            at += seconds(1.0);
            push(&mut out, EventKind::Click, None, at);
        }
        if rng.random::<f64>() < timing.reply_prob {
            at += seconds(delay.sample(rng) * 3600.0);
            push(&mut out, EventKind::Reply, None, at);
        }
    }
    Ok(out)
}
