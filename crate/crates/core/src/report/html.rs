//! Static single-file HTML view of a release report. No external assets.

use std::fmt::Write;

use super::{Decision, InteractionComparison, ReleaseReport};
use crate::stats::SeverityBand;

const STYLE: &str = "\
body{font-family:system-ui,sans-serif;margin:2em;color:#222}
table{border-collapse:collapse;margin:1em 0}
th,td{border:1px solid #ccc;padding:4px 8px;text-align:left}
th{background:#f3f3f3}
.badge{border-radius:4px;padding:1px 6px;font-size:90%;white-space:nowrap}
.excellent{background:#d4f4dd}.good{background:#e8f4d4}
.noticeable_lag{background:#fde9c8}.severe_lag{background:#f8cfcf}
.pass{background:#d4f4dd}.fail{background:#f8cfcf}
.regressed{font-weight:bold;color:#a00}
details{margin:0.5em 0}
";

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn band_class(b: SeverityBand) -> &'static str {
    match b {
        SeverityBand::Excellent => "excellent",
        SeverityBand::Good => "good",
        SeverityBand::NoticeableLag => "noticeable_lag",
        SeverityBand::SevereLag => "severe_lag",
    }
}

fn badge(b: SeverityBand) -> String {
    format!("<span class=\"badge {}\">{}</span>", band_class(b), b.label())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn anchor(id: &str) -> String {
    let mut a = String::from("ix-");
    for c in id.chars() {
        a.push(if c.is_ascii_alphanumeric() { c } else { '-' });
    }
    a
}

pub fn render_html(r: &ReleaseReport) -> String {
    let mut h = String::new();
    let decision = match r.decision {
        Decision::Pass => "pass",
        Decision::Fail => "fail",
    };
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>Performance regressions: {base} &rarr; {upd}</title>\n<style>\n{STYLE}</style>\n</head>\n<body>\n",
        base = esc(&r.base_version),
        upd = esc(&r.updated_version),
    );

    let _ = writeln!(
        h,
        "<h1>{} &rarr; {}</h1>\n<table class=\"summary\">\n\
         <tr><th>Base version</th><td>{}</td></tr>\n\
         <tr><th>Updated version</th><td>{}</td></tr>\n\
         <tr><th>Interactions compared</th><td>{}</td></tr>\n\
         <tr><th>Regressed</th><td>{}</td></tr>\n\
         <tr><th>Regression rate</th><td>{:.2}%</td></tr>\n\
         <tr><th>Tolerance</th><td>{:.2}%</td></tr>\n\
         <tr><th>Decision</th><td><span class=\"badge {decision}\">{}</span></td></tr>\n</table>",
        esc(&r.base_version),
        esc(&r.updated_version),
        esc(&r.base_version),
        esc(&r.updated_version),
        r.comparisons.len(),
        r.regressed_count(),
        r.regression_rate * 100.0,
        r.tolerance * 100.0,
        decision.to_uppercase(),
    );

    h.push_str("<h2>Interactions by severity</h2>\n<table class=\"ranking\">\n");
    h.push_str("<tr><th>#</th><th>Interaction</th><th>App</th><th>Scenario</th><th>Action</th><th>Transition</th><th>Bands</th><th>&Delta;median / &theta;</th><th>Regressed</th></tr>\n");
    for row in &r.interaction_rankings {
        let Some(c) = r.comparisons.iter().find(|c| c.interaction_id == row.interaction_id) else {
            continue;
        };
        let _ = writeln!(
            h,
            "<tr class=\"interaction-row\"><td>{}</td><td><a href=\"#{}\">{}</a></td><td>{}</td><td>{}</td><td>{}</td><td>{} &rarr; {}</td><td>{}</td><td>{:.2}</td><td{}>{}</td></tr>",
            row.rank,
            anchor(&c.interaction_id),
            esc(&c.interaction_id),
            esc(&c.app_id),
            esc(&c.scenario_id),
            c.action_type,
            badge(c.worst_transition.0),
            badge(c.worst_transition.1),
            row.bands_crossed,
            row.normalized_diff,
            if c.regressed { " class=\"regressed\"" } else { "" },
            if c.regressed { "yes" } else { "no" },
        );
    }
    h.push_str("</table>\n");

    if !r.app_rankings.is_empty() {
        h.push_str("<h2>Apps by impact</h2>\n<table class=\"apps\">\n<tr><th>#</th><th>App</th><th>Regressed interactions</th><th>Total band downgrade</th></tr>\n");
        for a in &r.app_rankings {
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                a.rank,
                esc(&a.app_id),
                a.regressed_interactions,
                a.total_band_downgrade
            );
        }
        h.push_str("</table>\n");
    }

    if !r.action_type_summary.is_empty() {
        h.push_str("<h2>By action type</h2>\n<table class=\"action-types\">\n<tr><th>Action</th><th>Interactions</th><th>Regressed</th></tr>\n");
        for s in &r.action_type_summary {
            let _ = writeln!(h, "<tr><td>{}</td><td>{}</td><td>{}</td></tr>", s.action_type, s.interactions, s.regressed);
        }
        h.push_str("</table>\n");
    }

    if !r.excluded.is_empty() {
        h.push_str("<h2>Excluded</h2>\n<ul>\n");
        for e in &r.excluded {
            let metric = e.metric.map(|m| format!(" ({m})")).unwrap_or_default();
            let _ = writeln!(h, "<li>{}{}: {}</li>", esc(&e.interaction_id), metric, esc(&e.reason));
        }
        h.push_str("</ul>\n");
    }

    h.push_str("<h2>Details</h2>\n");
    for c in &r.comparisons {
        detail(&mut h, c);
    }
    h.push_str("</body>\n</html>\n");
    h
}

fn detail(h: &mut String, c: &InteractionComparison) {
    let _ = writeln!(
        h,
        "<details id=\"{}\"><summary>{} <small>({}/{})</small>{}</summary>",
        anchor(&c.interaction_id),
        esc(&c.interaction_id),
        esc(&c.app_id),
        esc(&c.scenario_id),
        if c.regressed { " <span class=\"regressed\">regressed</span>" } else { "" }
    );
    h.push_str("<table class=\"verdicts\">\n<tr><th>Metric</th><th>Median base</th><th>Median updated</th><th>&Delta;</th><th>&theta;</th><th>p</th><th>Cliff's &delta;</th><th>Runs</th><th>Band</th><th>Regressed</th></tr>\n");
    for v in &c.verdicts {
        let _ = writeln!(
            h,
            "<tr><td>{} ({})</td><td>{:.2}</td><td>{:.2}</td><td>{:+.2}</td><td>{:.2}</td><td>{:.4}</td><td>{:.3}</td><td>{}/{}</td><td>{} &rarr; {}</td><td>{}</td></tr>",
            v.metric,
            v.metric.unit(),
            v.median_base,
            v.median_updated,
            v.median_diff,
            v.theta,
            v.p_value,
            v.cliffs_delta,
            v.sample_sizes.0,
            v.sample_sizes.1,
            badge(v.severity_base),
            badge(v.severity_updated),
            if v.regressed { "yes" } else { "no" },
        );
    }
    h.push_str("</table>\n");
    if !c.drilldown.is_empty() {
        h.push_str("<table class=\"frames\">\n<tr><th>Version</th><th>Run</th><th>Response frame</th><th>Response pts (ms)</th><th>Finish frame</th><th>Finish pts (ms)</th><th>Flags</th><th>Recording</th></tr>\n");
        for d in &c.drilldown {
            let flags: Vec<String> = d.flags.iter().map(|f| format!("{f:?}")).collect();
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                esc(&d.os_version),
                d.run_index,
                d.response_index.map_or_else(|| "-".into(), |i| format!("f{i}")),
                opt(d.response_pts_ms),
                d.finish_index.map_or_else(|| "-".into(), |i| format!("f{i}")),
                opt(d.finish_pts_ms),
                flags.join(", "),
                d.corpus_path
                    .as_deref()
                    .map_or_else(|| "-".into(), |p| format!("<a href=\"{0}\">{0}</a>", esc(p))),
            );
        }
        h.push_str("</table>\n");
    }
    h.push_str("</details>\n");
}
