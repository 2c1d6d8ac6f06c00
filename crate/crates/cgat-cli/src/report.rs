//! Shared text rendering for metric files and log lines.

use cgat_train::Metrics;

pub fn metrics_to_text(metrics: &Metrics) -> String {
    let mut out = String::new();
    out.push_str(&format!("weighted_precision\t{:.6}\n", metrics.weighted_precision));
    out.push_str(&format!("weighted_recall\t{:.6}\n", metrics.weighted_recall));
    out.push_str(&format!("weighted_f1\t{:.6}\n", metrics.weighted_f1));
    out.push_str(&format!("mae\t{:.6}\n", metrics.mae));
    out.push_str("per_class_f1");
    for f1 in &metrics.per_class_f1 {
        out.push_str(&format!("\t{f1:.6}"));
    }
    out.push('\n');
    for row in &metrics.confusion {
        out.push_str("confusion");
        for count in row {
            out.push_str(&format!("\t{count}"));
        }
        out.push('\n');
    }
    out
}
