use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use walkdir::WalkDir;

use crate::panel::{read_trend_csv, Period, PeriodKind, TrendPoint};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 50.0;

fn x_of(p: Period) -> f64 {
    match p {
        Period::Year(y) => y as f64,
        Period::Month(y, m) => y as f64 * 12.0 + (m - 1) as f64,
    }
}

fn x_of_date(d: NaiveDate, kind: PeriodKind) -> f64 {
    match kind {
        PeriodKind::Year => {
            let len = if NaiveDate::from_ymd_opt(d.year(), 2, 29).is_some() { 366.0 } else { 365.0 };
            d.year() as f64 + d.ordinal0() as f64 / len
        }
        PeriodKind::Month => {
            let next = if d.month() == 12 {
                NaiveDate::from_ymd_opt(d.year() + 1, 1, 1)
            } else {
                NaiveDate::from_ymd_opt(d.year(), d.month() + 1, 1)
            }
            .expect("valid date");
            let days = next.pred_opt().expect("valid date").day() as f64;
            d.year() as f64 * 12.0 + d.month0() as f64 + d.day0() as f64 / days
        }
    }
}

fn nice_step(span: f64, target: f64) -> f64 {
    let raw = (span / target).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// The baseline of a series: its first point reported as exactly zero with
/// a zero-width interval.
pub fn baseline_of(series: &[TrendPoint]) -> Option<Period> {
    series
        .iter()
        .find(|p| p.effect == 0.0 && p.ci_low == 0.0 && p.ci_high == 0.0)
        .map(|p| p.period)
}

/// One line chart with a CI band, a baseline marker and a vertical rule at
/// `cutoff`. The data are embedded in `<metadata>` as CSV. Output is a pure
/// function of the arguments.
pub fn render_trend_svg(title: &str, series: &[TrendPoint], cutoff: Option<NaiveDate>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    s.push_str("<metadata id=\"series-data\">period,effect,ci_low,ci_high\n");
    for p in series {
        let _ = writeln!(s, "{},{},{},{}", p.period, p.effect, p.ci_low, p.ci_high);
    }
    s.push_str("</metadata>\n");
    let _ = writeln!(s, r##"<rect class="background" x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text class="title" x="{}" y="28" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));

    if series.is_empty() {
        let _ = writeln!(
            s,
            r##"<text class="no-data" x="{}" y="{}" text-anchor="middle" font-size="18" fill="#888888">no data</text>"##,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        s.push_str("</svg>\n");
        return s;
    }

    let kind = series[0].period.kind();
    let mut xs: Vec<f64> = series.iter().map(|p| x_of(p.period)).collect();
    let cutoff_x = cutoff.map(|d| x_of_date(d, kind));
    xs.extend(cutoff_x);
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if x1 - x0 < 1.0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let (mut y0, mut y1) = series
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), p| (a.min(p.ci_low).min(p.effect), b.max(p.ci_high).max(p.effect)));
    if y1 - y0 < 1e-9 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = (y1 - y0) * 0.05;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    // axes and ticks
    s.push_str("<g class=\"axes\" stroke=\"#333333\">\n");
    let _ = writeln!(s, r#"<line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, TOP + plot_h, LEFT + plot_w, TOP + plot_h);
    let _ = writeln!(s, r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}"/>"#, TOP + plot_h);
    s.push_str("</g>\n<g class=\"ticks\" fill=\"#333333\">\n");
    let ystep = nice_step(y1 - y0, 5.0);
    let mut t = (y0 / ystep).ceil() * ystep;
    while t <= y1 + 1e-12 {
        let label = if t.abs() < ystep * 1e-9 { 0.0 } else { t };
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, py(t) + 4.0, fmt_tick(label, ystep));
        t += ystep;
    }
    let unit = if kind == PeriodKind::Month { 12.0 } else { 1.0 };
    let xstep = nice_step((x1 - x0) / unit, 8.0).max(1.0) * unit;
    let mut t = (x0 / xstep).ceil() * xstep;
    while t <= x1 + 1e-9 {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, px(t), TOP + plot_h + 18.0, (t / unit).floor() as i64);
        t += xstep;
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r##"<line class="zero-line" x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999999" stroke-dasharray="2,3"/>"##,
        LEFT + plot_w,
        y = py(0.0)
    );

    // confidence band: upper edge forward, lower edge back
    let mut band = String::new();
    for (i, p) in series.iter().enumerate() {
        let _ = write!(band, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(x_of(p.period)), py(p.ci_high));
    }
    for p in series.iter().rev() {
        let _ = write!(band, "L{:.2},{:.2} ", px(x_of(p.period)), py(p.ci_low));
    }
    band.push('Z');
    let _ = writeln!(s, r##"<path class="ci-band" d="{band}" fill="#4477aa" fill-opacity="0.2" stroke="none"/>"##);

    let mut line = String::new();
    for (i, p) in series.iter().enumerate() {
        let _ = write!(line, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(x_of(p.period)), py(p.effect));
    }
    let _ = writeln!(s, r##"<path class="effect-line" d="{line}" fill="none" stroke="#4477aa" stroke-width="1.5"/>"##);
    for p in series {
        let _ = writeln!(
            s,
            r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.5" fill="#4477aa"><title>{}: {:.4} [{:.4}, {:.4}]</title></circle>"##,
            px(x_of(p.period)),
            py(p.effect),
            p.period,
            p.effect,
            p.ci_low,
            p.ci_high
        );
    }
    if let Some(b) = baseline_of(series) {
        let _ = writeln!(
            s,
            r##"<circle class="baseline-marker" cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="#cc3311" stroke-width="1.5"><title>baseline {b}</title></circle>"##,
            px(x_of(b)),
            py(0.0)
        );
    }
    if let (Some(d), Some(cx)) = (cutoff, cutoff_x) {
        let _ = writeln!(
            s,
            r##"<line class="cutoff-rule" x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#cc3311" stroke-dasharray="5,4"/>"##,
            TOP + plot_h,
            x = px(cx)
        );
        let _ = writeln!(s, r##"<text class="cutoff-label" x="{:.2}" y="{:.2}" fill="#cc3311">after-AI cutoff {d}</text>"##, px(cx) + 4.0, TOP + 12.0);
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize + 1 };
    format!("{v:.decimals$}")
}

/// Human-readable title for a trend file such as
/// `filters/differs-from-ai/trend_dqi_year.csv`.
pub fn title_for(rel: &Path) -> String {
    let stem = rel.file_stem().and_then(|s| s.to_str()).unwrap_or("trend");
    let mut parts = stem.trim_start_matches("trend_").splitn(2, '_');
    let metric = match parts.next().unwrap_or("") {
        "dqi" => "Decision quality",
        "novelty" => "Novelty index",
        other => other,
    };
    let period = parts.next().unwrap_or("");
    let subset = rel.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()).filter(|s| *s != "filters" && !s.is_empty());
    match subset {
        Some(sub) => format!("{metric} by {period} ({sub})"),
        None => format!("{metric} by {period}"),
    }
}

/// Renders every `trend_*.csv` under `input` (outside `out`) to an SVG of
/// the same relative path under `out`, plus `summary.txt`. Returns the
/// files written, sorted.
pub fn render_report(input: &Path, out: &Path, cutoff: Option<NaiveDate>) -> anyhow::Result<Vec<PathBuf>> {
    let mut trends: Vec<PathBuf> = WalkDir::new(input)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && !e.path().starts_with(out))
        .filter(|e| {
            let n = e.file_name().to_string_lossy();
            n.starts_with("trend_") && n.ends_with(".csv")
        })
        .map(|e| e.path().strip_prefix(input).expect("under input").to_path_buf())
        .collect();
    trends.sort();
    let mut written = Vec::new();
    let mut summary = String::new();
    for rel in &trends {
        let series = read_trend_csv(&input.join(rel))?;
        let title = title_for(rel);
        let svg_path = out.join(rel).with_extension("svg");
        std::fs::create_dir_all(svg_path.parent().expect("has parent"))?;
        std::fs::write(&svg_path, render_trend_svg(&title, &series, cutoff))?;
        written.push(svg_path);
        summarize(&mut summary, rel, &title, &series, cutoff);
    }
    let table1 = input.join("table1.csv");
    if table1.exists() {
        summary.push_str("table1.csv\n");
        let mut rdr = csv::Reader::from_path(&table1)?;
        for rec in rdr.records() {
            let rec = rec?;
            let cells: Vec<&str> = rec.iter().collect();
            let _ = writeln!(summary, "  {}", cells.join("  ").trim_end());
        }
    }
    std::fs::create_dir_all(out)?;
    let summary_path = out.join("summary.txt");
    std::fs::write(&summary_path, summary)?;
    written.push(summary_path);
    written.sort();
    Ok(written)
}

fn summarize(out: &mut String, rel: &Path, title: &str, series: &[TrendPoint], cutoff: Option<NaiveDate>) {
    let _ = writeln!(out, "{} - {title}", rel.display());
    if series.is_empty() {
        out.push_str("  no data\n");
        return;
    }
    let _ = writeln!(
        out,
        "  {} periods, {} to {}, baseline {}",
        series.len(),
        series[0].period,
        series[series.len() - 1].period,
        baseline_of(series).map_or_else(|| "none".into(), |b| b.to_string())
    );
    if let Some(d) = cutoff {
        let kind = series[0].period.kind();
        let cut = kind.of(d);
        let mean = |it: Vec<f64>| (!it.is_empty()).then(|| it.iter().sum::<f64>() / it.len() as f64);
        let before = mean(series.iter().filter(|p| p.period < cut).map(|p| p.effect).collect());
        let after = mean(series.iter().filter(|p| p.period >= cut).map(|p| p.effect).collect());
        let show = |m: Option<f64>| m.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"));
        let _ = writeln!(out, "  mean effect before {cut}: {}, from {cut}: {}", show(before), show(after));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(y: i32, e: f64, lo: f64, hi: f64) -> TrendPoint {
        TrendPoint {
            period: Period::Year(y),
            effect: e,
            ci_low: lo,
            ci_high: hi,
        }
    }

    #[test]
    fn two_point_series() {
        let svg = render_trend_svg("t", &[pt(2015, 0.0, 0.0, 0.0), pt(2017, 1.5, 0.5, 2.5)], NaiveDate::from_ymd_opt(2016, 3, 15));
        assert_eq!(svg.matches(r#"class="point""#).count(), 2);
        assert_eq!(svg.matches(r#"class="ci-band""#).count(), 1);
        assert_eq!(svg.matches(r#"class="baseline-marker""#).count(), 1);
        assert_eq!(svg.matches(r#"class="cutoff-rule""#).count(), 1);
        assert!(svg.contains("2017,1.5,0.5,2.5"));
    }

    #[test]
    fn empty_series_says_no_data() {
        let svg = render_trend_svg("t", &[], None);
        assert!(svg.contains("no data"));
        assert!(!svg.contains("ci-band"));
    }

    #[test]
    fn titles() {
        assert_eq!(title_for(Path::new("trend_dqi_year.csv")), "Decision quality by year");
        assert_eq!(
            title_for(Path::new("filters/stage-bucket-2/trend_novelty_month.csv")),
            "Novelty index by month (stage-bucket-2)"
        );
    }
}
