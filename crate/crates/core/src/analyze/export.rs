use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Analysis, SummaryStats};
use crate::error::Error;
use crate::time::{as_ms, Micros};

pub const REPORT_FILES: [&str; 9] = [
    "latency.csv",
    "functions.csv",
    "edges.csv",
    "trigger_delay.csv",
    "trigger_summary.csv",
    "coldstart.csv",
    "coldstart_timeline.csv",
    "summary.csv",
    "summary.json",
];

fn fmt_ms(v: Micros) -> String {
    format!("{:.3}", as_ms(v))
}

fn opt_ms(v: Option<Micros>) -> String {
    v.map(fmt_ms).unwrap_or_default()
}

struct Csv {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(dir: &Path, name: &str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Csv { path: dir.join(name), writer }
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> Result<PathBuf, Error> {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        fs::write(&self.path, bytes).map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn stats_row(name: &str, s: &SummaryStats) -> Vec<String> {
    vec![
        name.to_string(),
        s.count.to_string(),
        s.dropped.to_string(),
        opt_ms(s.min),
        opt_ms(s.whisker_low),
        opt_ms(s.p25),
        opt_ms(s.p50),
        opt_ms(s.p75),
        opt_ms(s.whisker_high),
        opt_ms(s.max),
    ]
}

const STATS_HEADER: [&str; 10] = [
    "metric",
    "count",
    "dropped",
    "min_ms",
    "whisker_low_ms",
    "p25_ms",
    "p50_ms",
    "p75_ms",
    "whisker_high_ms",
    "max_ms",
];

/// Writes the CSV tables and `summary.json` into `dir`, plus SVG charts if
/// asked. Returns the written paths.
pub fn write_reports(analysis: &Analysis, dir: &Path, charts: bool) -> Result<Vec<PathBuf>, Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let mut latency = Csv::new(
        dir,
        "latency.csv",
        &["context", "pair", "workflow", "entry", "sent_ms", "round_trip_ms", "compute_ms", "network_ms", "db_ms"],
    );
    let mut functions = Csv::new(
        dir,
        "functions.csv",
        &["context", "pair", "function", "platform", "inbound", "cold_start", "exec_ms", "compute_ms"],
    );
    let mut edges = Csv::new(
        dir,
        "edges.csv",
        &[
            "context",
            "kind",
            "caller",
            "pair",
            "from_function",
            "from_platform",
            "to",
            "to_platform",
            "duration_ms",
            "cost_ms",
        ],
    );
    for b in &analysis.breakdowns {
        let ctx = b.context.to_string();
        for r in &b.roots {
            latency.row([
                ctx.clone(),
                r.pair.to_string(),
                r.workflow.clone(),
                r.entry.clone(),
                fmt_ms(r.sent),
                fmt_ms(r.round_trip),
                fmt_ms(r.components.compute),
                fmt_ms(r.components.network),
                fmt_ms(r.components.db),
            ]);
        }
        for n in &b.nodes {
            let inbound = serde_json::to_value(n.inbound).expect("enum").as_str().unwrap_or_default().to_string();
            functions.row([
                ctx.clone(),
                n.pair.to_string(),
                n.function.clone(),
                n.platform.clone(),
                inbound,
                n.cold_start.to_string(),
                fmt_ms(n.exec),
                fmt_ms(n.compute),
            ]);
        }
        for e in &b.edges {
            let kind = serde_json::to_value(e.kind).expect("enum").as_str().unwrap_or_default().to_string();
            edges.row([
                ctx.clone(),
                kind,
                e.caller.map(|p| p.to_string()).unwrap_or_default(),
                e.pair.map(|p| p.to_string()).unwrap_or_default(),
                e.from_function.clone(),
                e.from_platform.clone(),
                e.to_function.clone(),
                e.to_platform.clone(),
                fmt_ms(e.duration),
                opt_ms(e.cost),
            ]);
        }
    }
    written.push(latency.finish()?);
    written.push(functions.finish()?);
    written.push(edges.finish()?);

    let mut triggers = Csv::new(
        dir,
        "trigger_delay.csv",
        &["context", "pair", "origin", "destination", "caller", "target", "publish_latency_ms", "trigger_delay_ms"],
    );
    for t in &analysis.triggers {
        triggers.row([
            t.context.to_string(),
            t.pair.to_string(),
            t.origin.clone(),
            t.destination.clone(),
            t.caller.clone(),
            t.target.clone(),
            fmt_ms(t.publish_latency),
            opt_ms(t.trigger_delay),
        ]);
    }
    written.push(triggers.finish()?);

    let mut routes = Csv::new(
        dir,
        "trigger_summary.csv",
        &[
            "origin",
            "destination",
            "count",
            "publish_latency_p50_ms",
            "trigger_delay_p25_ms",
            "trigger_delay_p50_ms",
            "trigger_delay_p75_ms",
        ],
    );
    let publish = super::by_route(&analysis.triggers, |t| Some(t.publish_latency));
    let delay = super::by_route(&analysis.triggers, |t| t.trigger_delay);
    for ((origin, destination), p) in &publish {
        let p = super::summarize(p);
        let d = super::summarize(delay.get(&(origin.clone(), destination.clone())).map_or(&[][..], Vec::as_slice));
        routes.row([
            origin.clone(),
            destination.clone(),
            p.count.to_string(),
            opt_ms(p.p50),
            opt_ms(d.p25),
            opt_ms(d.p50),
            opt_ms(d.p75),
        ]);
    }
    written.push(routes.finish()?);

    let cs = &analysis.coldstart;
    let mut phases =
        Csv::new(dir, "coldstart.csv", &["phase", "kind", "start_s", "end_s", "invocations", "cold_starts"]);
    for p in &cs.phases {
        phases.row([
            p.name.clone(),
            p.kind.clone(),
            format!("{:.3}", as_ms(p.start) / 1e3),
            format!("{:.3}", as_ms(p.end) / 1e3),
            p.invocations.to_string(),
            p.cold.to_string(),
        ]);
    }
    written.push(phases.finish()?);
    let mut timeline = Csv::new(
        dir,
        "coldstart_timeline.csv",
        &["second", "invocations", "cold_starts", "p25_ms", "p50_ms", "p75_ms", "max_ms"],
    );
    for b in &cs.timeline {
        timeline.row([
            b.second.to_string(),
            b.invocations.to_string(),
            b.cold.to_string(),
            opt_ms(b.exec.p25),
            opt_ms(b.exec.p50),
            opt_ms(b.exec.p75),
            opt_ms(b.exec.max),
        ]);
    }
    written.push(timeline.finish()?);

    let mut summary = Csv::new(dir, "summary.csv", &STATS_HEADER);
    for (name, s) in &analysis.summary {
        summary.row(stats_row(name, s));
    }
    written.push(summary.finish()?);

    let json_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(analysis).expect("serializable analysis");
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    written.push(json_path);

    if charts {
        let path = dir.join("latency_boxplot.svg");
        let groups: Vec<(&str, &SummaryStats)> = ["round_trip", "compute", "network", "db"]
            .iter()
            .filter_map(|g| analysis.summary.get(*g).map(|s| (*g, s)))
            .collect();
        fs::write(&path, boxplot_svg(&groups)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        let path = dir.join("coldstart_timeline.svg");
        fs::write(&path, timeline_svg(&cs.timeline)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"20\" font-size=\"14\">{title}</text>\n"
    )
}

fn boxplot_svg(groups: &[(&str, &SummaryStats)]) -> String {
    let mut s = svg_open("latency components per request (ms)");
    let top = groups.iter().filter_map(|(_, g)| g.whisker_high).max().unwrap_or(1).max(1) as f64;
    let y = |v: Micros| H - PAD - (v as f64 / top) * (H - 2.0 * PAD);
    let slot = (W - 2.0 * PAD) / groups.len().max(1) as f64;
    for (i, (name, g)) in groups.iter().enumerate() {
        let cx = PAD + slot * (i as f64 + 0.5);
        let _ = writeln!(s, "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{name}</text>", H - PAD + 16.0);
        let (Some(lo), Some(q1), Some(q2), Some(q3), Some(hi)) = (g.whisker_low, g.p25, g.p50, g.p75, g.whisker_high)
        else {
            continue;
        };
        let half = slot * 0.3;
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            y(lo),
            y(hi)
        );
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#9ecae1\" stroke=\"black\"/>",
            cx - half,
            y(q3),
            2.0 * half,
            (y(q1) - y(q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
            cx - half,
            y(q2),
            cx + half,
            y(q2)
        );
    }
    let _ = writeln!(s, "<text x=\"4\" y=\"{:.1}\">{:.1}</text>", PAD, as_ms(top as Micros));
    s + "</svg>\n"
}

fn timeline_svg(buckets: &[super::TimelineBucket]) -> String {
    let mut s = svg_open("execution duration p50 per second after the peak phase starts (ms)");
    let top = buckets.iter().filter_map(|b| b.exec.p50).max().unwrap_or(1).max(1) as f64;
    let slot = (W - 2.0 * PAD) / buckets.len().max(1) as f64;
    for (i, b) in buckets.iter().enumerate() {
        let Some(p50) = b.exec.p50 else { continue };
        let h = p50 as f64 / top * (H - 2.0 * PAD);
        let fill = if b.cold > 0 { "#fc9272" } else { "#9ecae1" };
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{fill}\"/>",
            PAD + slot * i as f64,
            H - PAD - h,
            slot * 0.8
        );
    }
    let _ = writeln!(s, "<text x=\"4\" y=\"{:.1}\">{:.1}</text>", PAD, as_ms(top as Micros));
    s + "</svg>\n"
}
