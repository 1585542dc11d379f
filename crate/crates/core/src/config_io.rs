//! TOML network configuration files and report writers.

use std::fs;
use std::io;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;
use toml::Spanned;

use crate::engine::{FomReport, SimulationResult, TraceRecord};
use crate::metrics::{CapacitySeries, Stats};
use crate::netmodel::{LinkDecl, NetworkConfig, NodeDecl, NodeKind, Protocol, RouteDecl, SwitchDecl, VlDecl, VlId};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("line {line}: unknown field `{field}`")]
    UnknownField { line: usize, field: String },
    #[error("line {line}: {entity} is missing field `{field}`")]
    MissingField { line: usize, entity: String, field: String },
    #[error("line {line}: {message}")]
    TypeMismatch { line: usize, message: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::SyntaxError { line, .. }
            | ParseError::UnknownField { line, .. }
            | ParseError::MissingField { line, .. }
            | ParseError::TypeMismatch { line, .. } => *line,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    simulation_time_s: Option<f64>,
    protocol: Option<Protocol>,
    #[serde(default)]
    ber: f64,
    #[serde(default)]
    rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    redundancy: Option<bool>,
    #[serde(default)]
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    links: Vec<Spanned<LinkDoc>>,
    #[serde(default)]
    vls: Vec<Spanned<VlDoc>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    switches: Vec<Spanned<SwitchDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    kind: NodeKind,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    a: String,
    b: String,
    #[serde(default)]
    cable_length_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    link_speed_bps: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    failed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RouteDoc {
    Path(Vec<String>),
    Tree(Vec<Vec<String>>),
}

impl From<RouteDoc> for RouteDecl {
    fn from(doc: RouteDoc) -> Self {
        match doc {
            RouteDoc::Path(p) => RouteDecl { paths: vec![p] },
            RouteDoc::Tree(paths) => RouteDecl { paths },
        }
    }
}

impl From<&RouteDecl> for RouteDoc {
    fn from(route: &RouteDecl) -> Self {
        match route.paths.as_slice() {
            [single] => RouteDoc::Path(single.clone()),
            paths => RouteDoc::Tree(paths.to_vec()),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VlDoc {
    id: Option<u32>,
    source: Option<String>,
    destinations: Option<Vec<String>>,
    route_a: Option<RouteDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    route_b: Option<RouteDoc>,
    bag_ms: Option<f64>,
    min_frame_bytes: Option<u32>,
    max_frame_bytes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start_offset_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jitter_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    police_bag_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bucket_depth_bytes: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SwitchDoc {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    latency_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dedicated_bytes_per_port: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shared_pool_bytes: Option<u64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn classify(text: &str, err: &toml::de::Error) -> ParseError {
    let line = err.span().map_or(1, |s| line_of(text, s.start));
    let message = err.message().trim().to_string();
    if message.starts_with("unknown field") {
        ParseError::UnknownField {
            line,
            field: backticked(&message).unwrap_or_default(),
        }
    } else if message.starts_with("missing field") {
        ParseError::MissingField {
            line,
            entity: "table".into(),
            field: backticked(&message).unwrap_or_default(),
        }
    } else if message.starts_with("invalid type")
        || message.starts_with("invalid value")
        || message.starts_with("unknown variant")
        || message.contains("did not match any variant")
    {
        ParseError::TypeMismatch { line, message }
    } else {
        ParseError::SyntaxError { line, message }
    }
}

struct Ctx<'t> {
    text: &'t str,
}

impl Ctx<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        line_of(self.text, span.start)
    }

    fn require<T>(&self, v: Option<T>, span: &Range<usize>, entity: &str, field: &str) -> Result<T, ParseError> {
        v.ok_or_else(|| ParseError::MissingField {
            line: self.line(span),
            entity: entity.to_string(),
            field: field.to_string(),
        })
    }

    fn time(
        &self,
        v: f64,
        scale: fn(f64) -> Option<SimTime>,
        span: &Range<usize>,
        field: &str,
    ) -> Result<SimTime, ParseError> {
        scale(v).ok_or_else(|| ParseError::TypeMismatch {
            line: self.line(span),
            message: format!("`{field}` must be a finite non-negative time, got {v}"),
        })
    }
}

/// Parses a TOML network description.
pub fn parse_config(text: &str) -> Result<NetworkConfig, ParseError> {
    let doc: ConfigDoc = toml::from_str(text).map_err(|e| classify(text, &e))?;
    let cx = Ctx { text };
    let top = 0..0;
    let seconds = cx.require(doc.simulation_time_s, &top, "document", "simulation_time_s")?;
    let sim_duration = cx.time(seconds, SimTime::from_secs_f64, &top, "simulation_time_s")?;
    let protocol = cx.require(doc.protocol, &top, "document", "protocol")?;

    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| NodeDecl { id: n.id, kind: n.kind })
        .collect();
    let links = doc
        .links
        .into_iter()
        .map(|l| {
            let l = l.into_inner();
            LinkDecl {
                a: l.a,
                b: l.b,
                cable_length_m: l.cable_length_m,
                link_speed_bps: l.link_speed_bps,
                failed: l.failed,
            }
        })
        .collect();

    let mut vls = Vec::with_capacity(doc.vls.len());
    for (i, spanned) in doc.vls.into_iter().enumerate() {
        let span = spanned.span();
        let v = spanned.into_inner();
        let name = match v.id {
            Some(id) => VlId(id).to_string(),
            None => format!("vls[{i}]"),
        };
        let id = cx.require(v.id, &span, &name, "id")?;
        let bag_ms = cx.require(v.bag_ms, &span, &name, "bag_ms")?;
        let opt_time = |value: Option<f64>, scale: fn(f64) -> Option<SimTime>, field: &str| {
            value.map(|x| cx.time(x, scale, &span, field)).transpose()
        };
        vls.push(VlDecl {
            id: VlId(id),
            source: cx.require(v.source, &span, &name, "source")?,
            destinations: cx.require(v.destinations, &span, &name, "destinations")?,
            route_a: cx.require(v.route_a, &span, &name, "route_a")?.into(),
            route_b: v.route_b.map(RouteDecl::from),
            bag: cx.time(bag_ms, SimTime::from_millis_f64, &span, "bag_ms")?,
            min_frame_bytes: cx.require(v.min_frame_bytes, &span, &name, "min_frame_bytes")?,
            max_frame_bytes: cx.require(v.max_frame_bytes, &span, &name, "max_frame_bytes")?,
            start_offset: opt_time(v.start_offset_us, SimTime::from_micros_f64, "start_offset_us")?
                .unwrap_or(SimTime::ZERO),
            jitter: opt_time(v.jitter_us, SimTime::from_micros_f64, "jitter_us")?.unwrap_or(SimTime::ZERO),
            police_bag: opt_time(v.police_bag_ms, SimTime::from_millis_f64, "police_bag_ms")?,
            bucket_depth_bytes: v.bucket_depth_bytes,
        });
    }

    let mut switches = Vec::with_capacity(doc.switches.len());
    for spanned in doc.switches {
        let span = spanned.span();
        let s = spanned.into_inner();
        switches.push(SwitchDecl {
            id: s.id,
            latency: s
                .latency_us
                .map(|x| cx.time(x, SimTime::from_micros_f64, &span, "latency_us"))
                .transpose()?,
            dedicated_bytes_per_port: s.dedicated_bytes_per_port,
            shared_pool_bytes: s.shared_pool_bytes,
        });
    }

    Ok(NetworkConfig {
        protocol,
        sim_duration,
        ber: doc.ber,
        rng_seed: doc.rng_seed,
        redundancy: doc.redundancy,
        nodes,
        links,
        vls,
        switches,
    })
}

#[derive(Debug, Error)]
#[error("cannot serialize configuration: {0}")]
pub struct SerializeError(#[from] toml::ser::Error);

/// Writes a configuration back as TOML. Seeds and byte counts above
/// `i64::MAX` are not representable.
pub fn serialize_config(config: &NetworkConfig) -> Result<String, SerializeError> {
    let nowhere = || 0..0;
    let nonzero = |t: SimTime, f: fn(SimTime) -> f64| (t != SimTime::ZERO).then(|| f(t));
    let doc = ConfigDoc {
        simulation_time_s: Some(config.sim_duration.as_secs_f64()),
        protocol: Some(config.protocol),
        ber: config.ber,
        rng_seed: config.rng_seed,
        redundancy: config.redundancy,
        nodes: config
            .nodes
            .iter()
            .map(|n| NodeDoc {
                id: n.id.clone(),
                kind: n.kind,
            })
            .collect(),
        links: config
            .links
            .iter()
            .map(|l| {
                Spanned::new(
                    nowhere(),
                    LinkDoc {
                        a: l.a.clone(),
                        b: l.b.clone(),
                        cable_length_m: l.cable_length_m,
                        link_speed_bps: l.link_speed_bps,
                        failed: l.failed,
                    },
                )
            })
            .collect(),
        vls: config
            .vls
            .iter()
            .map(|v| {
                Spanned::new(
                    nowhere(),
                    VlDoc {
                        id: Some(v.id.0),
                        source: Some(v.source.clone()),
                        destinations: Some(v.destinations.clone()),
                        route_a: Some((&v.route_a).into()),
                        route_b: v.route_b.as_ref().map(RouteDoc::from),
                        bag_ms: Some(v.bag.as_millis_f64()),
                        min_frame_bytes: Some(v.min_frame_bytes),
                        max_frame_bytes: Some(v.max_frame_bytes),
                        start_offset_us: nonzero(v.start_offset, SimTime::as_micros_f64),
                        jitter_us: nonzero(v.jitter, SimTime::as_micros_f64),
                        police_bag_ms: v.police_bag.map(SimTime::as_millis_f64),
                        bucket_depth_bytes: v.bucket_depth_bytes,
                    },
                )
            })
            .collect(),
        switches: config
            .switches
            .iter()
            .map(|s| {
                Spanned::new(
                    nowhere(),
                    SwitchDoc {
                        id: s.id.clone(),
                        latency_us: s.latency.map(SimTime::as_micros_f64),
                        dedicated_bytes_per_port: s.dedicated_bytes_per_port,
                        shared_pool_bytes: s.shared_pool_bytes,
                    },
                )
            })
            .collect(),
    };
    Ok(toml::to_string(&doc)?)
}

pub fn read_config(path: &Path) -> Result<NetworkConfig, ConfigFileError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(|source| ConfigFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

/// Deterministic content of a run report. Wall-clock time is kept out.
#[derive(Debug, Clone, Copy)]
pub struct ReportDocument<'a> {
    pub report: &'a FomReport,
    pub seed: u64,
    pub event_count: u64,
    pub final_time: SimTime,
}

impl<'a> ReportDocument<'a> {
    pub fn of(result: &'a SimulationResult) -> Self {
        ReportDocument {
            report: &result.report,
            seed: result.seed,
            event_count: result.event_count,
            final_time: result.final_time,
        }
    }
}

fn us3(ns: f64) -> String {
    format!("{:.3}", ns / 1000.0)
}

fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    // avoid "-0.000"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn raw(s: String) -> Box<RawValue> {
    RawValue::from_string(s).expect("formatted number is valid JSON")
}

#[derive(Serialize)]
struct JsonStats {
    max: Box<RawValue>,
    min: Box<RawValue>,
    mean: Box<RawValue>,
    std: Box<RawValue>,
}

impl JsonStats {
    fn micros(s: &Stats) -> Self {
        JsonStats {
            max: raw(us3(s.max)),
            min: raw(us3(s.min)),
            mean: raw(us3(s.mean)),
            std: raw(us3(s.std)),
        }
    }

    fn plain(s: &Stats) -> Self {
        JsonStats {
            max: raw(fixed(s.max, 3)),
            min: raw(fixed(s.min, 3)),
            mean: raw(fixed(s.mean, 3)),
            std: raw(fixed(s.std, 3)),
        }
    }
}

#[derive(Serialize)]
struct JsonVl {
    vl: String,
    sent: u64,
    accepted: u64,
    loss_percent: Box<RawValue>,
    delay_us: Option<JsonStats>,
    jitter_us: Option<JsonStats>,
    throughput_bps: JsonStats,
}

#[derive(Serialize)]
struct JsonDrops {
    crc: u64,
    credit: u64,
    memory: u64,
}

#[derive(Serialize)]
struct JsonSwitch {
    id: String,
    frames_in: u64,
    frames_out: u64,
    drops: JsonDrops,
    resident_at_end: u64,
    peak_bytes: u64,
    peak_percent: Box<RawValue>,
    total_capacity_bytes: u64,
}

#[derive(Serialize)]
struct JsonCounters {
    logical_frames: u64,
    copies_generated: u64,
    fanout_clones: u64,
    accepted: u64,
    duplicate_discarded: u64,
    corrupt_discarded: u64,
    switch_drops: JsonDrops,
    link_down_drops: u64,
    resident_at_end: u64,
}

#[derive(Serialize)]
struct JsonReport {
    seed: u64,
    event_count: u64,
    final_time_us: Box<RawValue>,
    counters: JsonCounters,
    vls: Vec<JsonVl>,
    switches: Vec<JsonSwitch>,
}

const CSV_HEADER: [&str; 16] = [
    "vl",
    "delay_max_us",
    "delay_min_us",
    "delay_mean_us",
    "delay_std_us",
    "jitter_max_us",
    "jitter_min_us",
    "jitter_mean_us",
    "jitter_std_us",
    "throughput_max_bps",
    "throughput_min_bps",
    "throughput_mean_bps",
    "throughput_std_bps",
    "loss_percent",
    "sent",
    "accepted",
];

/// Serializes a report. Identical inputs give identical bytes: fixed key
/// order, microseconds with 3 decimals, percentages with 4.
pub fn write_report(doc: &ReportDocument<'_>, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report_json(doc),
        ReportFormat::Csv => report_csv(doc.report),
    }
}

fn report_json(doc: &ReportDocument<'_>) -> String {
    let r = doc.report;
    let drops = |d: &crate::switchfabric::DropCounters| JsonDrops {
        crc: d.crc,
        credit: d.credit,
        memory: d.memory,
    };
    let c = &r.counters;
    let json = JsonReport {
        seed: doc.seed,
        event_count: doc.event_count,
        final_time_us: raw(doc.final_time.fmt_micros()),
        counters: JsonCounters {
            logical_frames: c.logical_frames,
            copies_generated: c.copies_generated,
            fanout_clones: c.fanout_clones,
            accepted: c.accepted,
            duplicate_discarded: c.duplicate_discarded,
            corrupt_discarded: c.corrupt_discarded,
            switch_drops: drops(&c.switch_drops),
            link_down_drops: c.link_down_drops,
            resident_at_end: c.resident_at_end,
        },
        vls: r
            .vls
            .iter()
            .map(|v| JsonVl {
                vl: v.vl.to_string(),
                sent: v.sent,
                accepted: v.accepted,
                loss_percent: raw(fixed(v.loss_percent, 4)),
                delay_us: v.delay.as_ref().map(JsonStats::micros),
                jitter_us: v.jitter.as_ref().map(JsonStats::micros),
                throughput_bps: JsonStats::plain(&v.throughput),
            })
            .collect(),
        switches: r
            .switches
            .iter()
            .map(|s| JsonSwitch {
                id: s.name.clone(),
                frames_in: s.frames_in,
                frames_out: s.frames_out,
                drops: drops(&s.drops),
                resident_at_end: s.resident_at_end,
                peak_bytes: s.peak_bytes,
                peak_percent: raw(fixed(
                    100.0 * s.peak_bytes as f64 / s.total_capacity_bytes.max(1) as f64,
                    4,
                )),
                total_capacity_bytes: s.total_capacity_bytes,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&json).expect("report serializes");
    text.push('\n');
    text
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn report_csv(report: &FomReport) -> String {
    let stat_cells = |s: Option<&Stats>, f: fn(f64) -> String| match s {
        Some(s) => vec![f(s.max), f(s.min), f(s.mean), f(s.std)],
        None => vec![String::new(); 4],
    };
    let rows = report.vls.iter().map(|v| {
        let mut row = vec![v.vl.to_string()];
        row.extend(stat_cells(v.delay.as_ref(), us3));
        row.extend(stat_cells(v.jitter.as_ref(), us3));
        row.extend(stat_cells(Some(&v.throughput), |x| fixed(x, 3)));
        row.push(fixed(v.loss_percent, 4));
        row.push(v.sent.to_string());
        row.push(v.accepted.to_string());
        row
    });
    csv_text(&CSV_HEADER, rows)
}

/// Switch occupancy over time, one row per instant (the state after every
/// change at that instant).
pub fn write_capacity_csv(series: &CapacitySeries) -> String {
    let rows = series
        .collapsed()
        .into_iter()
        .map(|s| vec![s.time.fmt_micros(), s.used_bytes.to_string(), fixed(s.used_percent, 4)]);
    csv_text(&["time_us", "used_bytes", "used_percent"], rows)
}

pub fn write_trace_csv(trace: &[TraceRecord]) -> String {
    let rows = trace.iter().map(|t| {
        vec![
            t.vl.to_string(),
            t.seq.to_string(),
            t.copy.to_string(),
            t.node.clone(),
            t.event.to_string(),
            t.time.fmt_micros(),
        ]
    });
    csv_text(&["vl", "seq", "copy", "node", "event", "time_us"], rows)
}

/// Run metadata that varies between identical runs.
pub fn write_run_metadata(result: &SimulationResult) -> String {
    let meta = serde_json::json!({
        "seed": result.seed,
        "event_count": result.event_count,
        "events_scheduled": result.events_scheduled,
        "events_remaining": result.events_remaining,
        "final_time_us": result.final_time.as_micros_f64(),
        "wall_clock_s": result.wall_clock.as_secs_f64(),
        "conservation_holds": result.report.counters.conservation_holds(),
    });
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    text
}

/// Writes `fom.<ext>`, `switch_capacity_<id>.csv`, `run.json` and, when
/// traced, `trace.csv` into `dir`.
pub fn write_run_dir(dir: &Path, result: &SimulationResult, format: ReportFormat) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let doc = ReportDocument::of(result);
    fs::write(
        dir.join(format!("fom.{}", format.extension())),
        write_report(&doc, format),
    )?;
    for series in &result.report.capacity {
        fs::write(
            dir.join(format!("switch_capacity_{}.csv", series.switch)),
            write_capacity_csv(series),
        )?;
    }
    if let Some(trace) = &result.trace {
        fs::write(dir.join("trace.csv"), write_trace_csv(trace))?;
    }
    fs::write(dir.join("run.json"), write_run_metadata(result))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{RunCounters, SwitchSummary};
    use crate::metrics::{CapacityChange, CapacitySample, FomStats};
    use crate::netmodel::CopyId;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
simulation_time_s = 0.01
protocol = "ethernet"

nodes = [
  { id = "A", kind = "end_system" },
  { id = "B", kind = "end_system" },
]

[[links]]
a = "A"
b = "B"

[[vls]]
id = 1
source = "A"
destinations = ["B"]
route_a = ["A", "B"]
bag_ms = 1.0
min_frame_bytes = 64
max_frame_bytes = 64
"#;

    #[test]
    fn minimal_document() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.nodes.len(), 2);
        assert_eq!(c.links.len(), 1);
        assert_eq!(c.vls.len(), 1);
        assert_eq!(c.vls[0].bag, SimTime::from_millis(1));
        assert_eq!(c.vls[0].route_a, RouteDecl::path(["A", "B"]));
        assert_eq!(c.sim_duration, SimTime::from_millis(10));
        assert_eq!(c.protocol, Protocol::Ethernet);
    }

    #[test]
    fn missing_bag_names_the_vl() {
        let text = MINIMAL.replace("bag_ms = 1.0\n", "");
        match parse_config(&text).unwrap_err() {
            ParseError::MissingField { line, entity, field } => {
                assert_eq!(entity, "V1");
                assert_eq!(field, "bag_ms");
                assert_eq!(line, 14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_located() {
        let text = MINIMAL.replace("bag_ms = 1.0", "bag_ms = 1.0\ncolour = \"red\"");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownField {
                line: 20,
                field: "colour".into()
            }
        );
    }

    #[test]
    fn type_mismatch_and_syntax() {
        let text = MINIMAL.replace("min_frame_bytes = 64", "min_frame_bytes = \"big\"");
        assert!(matches!(parse_config(&text), Err(ParseError::TypeMismatch { .. })));
        let text = MINIMAL.replace("[[links]]", "[[links]");
        assert!(matches!(
            parse_config(&text),
            Err(ParseError::SyntaxError { line: 10, .. })
        ));
        let text = MINIMAL.replace("bag_ms = 1.0", "bag_ms = -1.0");
        assert!(matches!(parse_config(&text), Err(ParseError::TypeMismatch { .. })));
    }

    #[test]
    fn multicast_route_tree() {
        let text = MINIMAL.replace(r#"route_a = ["A", "B"]"#, r#"route_a = [["A", "B"], ["A", "C"]]"#);
        let c = parse_config(&text).unwrap();
        assert_eq!(c.vls[0].route_a.paths.len(), 2);
    }

    fn sample_report(delays: Option<Stats>) -> FomReport {
        FomReport {
            vls: vec![FomStats {
                vl: VlId(1),
                delay: delays,
                jitter: delays.map(|_| Stats {
                    max: 0.0,
                    min: 0.0,
                    mean: 0.0,
                    std: 0.0,
                }),
                throughput: Stats {
                    max: 4000.0,
                    min: 4000.0,
                    mean: 4000.0,
                    std: 0.0,
                },
                loss_percent: 0.0,
                sent: 1,
                accepted: 1,
            }],
            capacity: Vec::new(),
            switches: vec![SwitchSummary {
                name: "S1".into(),
                frames_in: 1,
                frames_out: 1,
                drops: Default::default(),
                resident_at_end: 0,
                peak_bytes: 500,
                total_capacity_bytes: 1000,
            }],
            counters: RunCounters::default(),
        }
    }

    #[test]
    fn csv_row_uses_microseconds_with_three_decimals() {
        let report = sample_report(Some(Stats {
            max: 272_000.0,
            min: 272_000.0,
            mean: 272_000.0,
            std: 0.0,
        }));
        let doc = ReportDocument {
            report: &report,
            seed: 1,
            event_count: 10,
            final_time: SimTime::from_millis(1),
        };
        let csv = write_report(&doc, ReportFormat::Csv);
        let row = csv.lines().nth(1).unwrap();
        assert!(row.starts_with("V1,272.000,272.000,272.000,0.000,"), "{row}");
        assert!(row.ends_with(",0.0000,1,1"), "{row}");
        assert_eq!(csv, write_report(&doc, ReportFormat::Csv));
        let json = write_report(&doc, ReportFormat::Json);
        assert_eq!(json, write_report(&doc, ReportFormat::Json));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["vls"][0]["delay_us"]["max"].as_f64(), Some(272.0));
        assert!(json.contains("\"max\": 272.000"));
        assert!(json.contains("\"peak_percent\": 50.0000"));
    }

    #[test]
    fn missing_delay_leaves_cells_empty() {
        let report = sample_report(None);
        let doc = ReportDocument {
            report: &report,
            seed: 1,
            event_count: 0,
            final_time: SimTime::ZERO,
        };
        let row = write_report(&doc, ReportFormat::Csv)
            .lines()
            .nth(1)
            .unwrap()
            .to_string();
        assert!(row.starts_with("V1,,,,,,,,,4000.000"), "{row}");
        let json = write_report(&doc, ReportFormat::Json);
        assert!(json.contains("\"delay_us\": null"));
    }

    #[test]
    fn empty_capacity_series_is_header_only() {
        let s = CapacitySeries::new("S1".into(), 100);
        assert_eq!(write_capacity_csv(&s), "time_us,used_bytes,used_percent\n");
    }

    #[test]
    fn capacity_rows_are_strictly_time_ordered() {
        let mut s = CapacitySeries::new("S3".into(), 1000);
        for (t, b) in [(112_000, 500), (112_001, 1000), (152_000, 500), (152_000, 1000)] {
            s.samples.push(CapacitySample {
                time: SimTime::from_nanos(t),
                used_bytes: b,
                used_percent: b as f64 / 10.0,
                change: CapacityChange::Periodic,
            });
        }
        assert_eq!(
            write_capacity_csv(&s),
            "time_us,used_bytes,used_percent\n112.000,500,50.0000\n112.001,1000,100.0000\n152.000,1000,100.0000\n"
        );
    }

    #[test]
    fn trace_rows() {
        let rows = [TraceRecord {
            vl: VlId(2),
            seq: 0,
            copy: CopyId::A,
            node: "S1".into(),
            event: crate::engine::TraceEvent::Enqueue,
            time: SimTime::from_nanos(56_001),
        }];
        assert_eq!(
            write_trace_csv(&rows),
            "vl,seq,copy,node,event,time_us\nV2,0,A,S1,enqueue,56.001\n"
        );
    }

    fn arb_name() -> impl Strategy<Value = String> {
        "[A-Z][A-Za-z0-9_]{0,6}"
    }

    fn arb_time_ns() -> impl Strategy<Value = SimTime> {
        (0u64..10_000_000_000).prop_map(SimTime::from_nanos)
    }

    prop_compose! {
        fn arb_vl()(
            id in 0u32..10_000,
            src in arb_name(),
            dests in prop::collection::vec(arb_name(), 1..3),
            tree in prop::collection::vec(prop::collection::vec(arb_name(), 2..5), 1..3),
            b in prop::option::of(prop::collection::vec(arb_name(), 2..5)),
            bag in (1u64..1_000_000_000).prop_map(SimTime::from_nanos),
            min in 0u32..2000,
            max in 0u32..2000,
            offset in arb_time_ns(),
            jitter in arb_time_ns(),
            police in prop::option::of((1u64..1_000_000_000).prop_map(SimTime::from_nanos)),
            depth in prop::option::of(0u32..100_000),
        ) -> VlDecl {
            VlDecl {
                id: VlId(id),
                source: src,
                destinations: dests,
                route_a: RouteDecl { paths: tree },
                route_b: b.map(|p| RouteDecl { paths: vec![p] }),
                bag,
                min_frame_bytes: min,
                max_frame_bytes: max,
                start_offset: offset,
                jitter,
                police_bag: police,
                bucket_depth_bytes: depth,
            }
        }
    }

    prop_compose! {
        fn arb_config()(
            ethernet in any::<bool>(),
            duration in (1u64..100_000_000_000).prop_map(SimTime::from_nanos),
            ber in prop_oneof![Just(0.0), 0.0f64..1.0],
            seed in 0u64..(i64::MAX as u64),
            redundancy in prop::option::of(any::<bool>()),
            nodes in prop::collection::vec((arb_name(), 0u8..3), 0..6),
            links in prop::collection::vec(
                (arb_name(), arb_name(), 0.0f64..500.0, prop::option::of(1u64..10_000_000_000), any::<bool>()),
                0..6,
            ),
            vls in prop::collection::vec(arb_vl(), 0..4),
            switches in prop::collection::vec(
                (arb_name(), prop::option::of(arb_time_ns()), prop::option::of(0u64..1 << 40), prop::option::of(0u64..1 << 40)),
                0..3,
            ),
        ) -> NetworkConfig {
            NetworkConfig {
                protocol: if ethernet { Protocol::Ethernet } else { Protocol::Afdx },
                sim_duration: duration,
                ber,
                rng_seed: seed,
                redundancy,
                nodes: nodes.into_iter().map(|(id, k)| NodeDecl {
                    id,
                    kind: [NodeKind::EndSystem, NodeKind::ControlUnit, NodeKind::Switch][k as usize],
                }).collect(),
                links: links.into_iter().map(|(a, b, len, speed, failed)| LinkDecl {
                    a, b, cable_length_m: len, link_speed_bps: speed, failed,
                }).collect(),
                vls,
                switches: switches.into_iter().map(|(id, latency, d, s)| SwitchDecl {
                    id, latency, dedicated_bytes_per_port: d, shared_pool_bytes: s,
                }).collect(),
            }
        }
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(config in arb_config()) {
            let text = serialize_config(&config).unwrap();
            let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, config);
        }
    }
}
