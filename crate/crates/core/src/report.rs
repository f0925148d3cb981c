//! CSV renderings. Each file opens with a `# schema:` line naming its
//! layout and version, then a header row. Numbers carry four decimals.

use crate::control::{CampaignReport, TaskSummary};
use crate::experiments::{AblationRow, SweepRow};

pub const CAMPAIGN_SCHEMA: &str = "sct-campaign/1";
pub const ABLATION_SCHEMA: &str = "sct-ablation/1";
pub const SWEEP_SCHEMA: &str = "sct-sweep/1";

pub const CAMPAIGN_COLUMNS: [&str; 7] =
    ["task", "config_hash", "episodes", "success_rate", "timeout_rate", "mean_steps", "activation_rate"];

pub fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn summary_fields(r: &TaskSummary) -> [String; 7] {
    [
        r.task.clone(),
        r.config_hash.clone(),
        r.episodes.to_string(),
        fmt4(r.success_rate),
        fmt4(r.timeout_rate),
        r.mean_steps.map(fmt4).unwrap_or_else(|| "nan".into()),
        fmt4(r.activation_rate),
    ]
}

fn render(schema: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("# schema: {schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).expect("in-memory write");
        for row in rows {
            w.write_record(&row).expect("in-memory write");
        }
        w.flush().expect("in-memory flush");
    }
    String::from_utf8(out).expect("csv output is utf-8")
}

pub fn campaign_csv(report: &CampaignReport) -> String {
    render(CAMPAIGN_SCHEMA, &CAMPAIGN_COLUMNS, report.rows.iter().map(|r| summary_fields(r).to_vec()))
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut header = vec!["correction", "termination"];
    header.extend(CAMPAIGN_COLUMNS);
    let on = |b: bool| if b { "on" } else { "off" }.to_string();
    render(
        ABLATION_SCHEMA,
        &header,
        rows.iter().flat_map(|a| {
            a.report.rows.iter().map(move |r| {
                let mut fields = vec![on(a.correction), on(a.termination)];
                fields.extend(summary_fields(r));
                fields
            })
        }),
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    render(
        SWEEP_SCHEMA,
        &["threshold", "activation_rate", "success_rate"],
        rows.iter().map(|r| vec![fmt4(r.threshold), fmt4(r.activation_rate), fmt4(r.success_rate)]),
    )
}
