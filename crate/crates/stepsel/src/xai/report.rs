//! CSV emitters for explanation outputs.
//!
//! Plain deterministic text: floats use the shortest round-trip form, rows
//! follow the input order, LF endings.

use std::fmt::Write as _;

use super::{AleCurve, BiplotResult, EffectReport, ImportanceTable};

pub fn effect_reports_csv(reports: &[EffectReport]) -> String {
    let mut out = String::from("feature,estimate,se,ci_low,ci_high,p_value,n_bootstrap,degenerate_se,n_failed\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.feature,
            r.estimate,
            r.se,
            r.ci_low,
            r.ci_high,
            r.p_value,
            r.n_bootstrap,
            if r.degenerate_se { 1 } else { 0 },
            r.n_failed
        );
    }
    out
}

pub fn importance_csv(table: &ImportanceTable) -> String {
    let mut out = String::from("feature,importance,raw\n");
    for s in &table.singles {
        let _ = writeln!(out, "{},{},{}", s.feature, s.importance, s.raw);
    }
    out
}

pub fn interactions_csv(table: &ImportanceTable) -> String {
    let mut out = String::from("feature_a,feature_b,importance,raw\n");
    for p in &table.pairs {
        let _ = writeln!(out, "{},{},{},{}", p.feature_a, p.feature_b, p.importance, p.raw);
    }
    out
}

pub fn ale_csv(curve: &AleCurve) -> String {
    let mut out = String::from("bin_mid,effect,count\n");
    for ((m, e), c) in curve.bin_mids().iter().zip(&curve.centered_effect).zip(&curve.counts) {
        let _ = writeln!(out, "{},{},{}", m, e, c);
    }
    out
}

pub fn positions_csv(biplot: &BiplotResult) -> String {
    let dim = biplot.positions.first().map_or(0, |(_, p)| p.len());
    let mut out = String::from("id");
    for j in 1..=dim {
        let _ = write!(out, ",dim{j}");
    }
    out.push_str(",group\n");
    for (id, pos) in &biplot.positions {
        let _ = write!(out, "{id}");
        for v in pos {
            let _ = write!(out, ",{v}");
        }
        let group = biplot
            .group_labels
            .as_ref()
            .and_then(|g| g.iter().find(|(gid, _)| gid == id).map(|(_, grp)| grp.to_string()))
            .unwrap_or_default();
        let _ = writeln!(out, ",{group}");
    }
    out
}

pub fn arrows_csv(biplot: &BiplotResult) -> String {
    let dim = biplot.arrows.first().map_or(0, |(_, a)| a.len());
    let mut out = String::from("feature");
    for j in 1..=dim {
        let _ = write!(out, ",u{j}");
    }
    out.push('\n');
    for (name, arrow) in &biplot.arrows {
        let _ = write!(out, "{name}");
        for v in arrow {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shapes_are_stable() {
        let reports = vec![EffectReport {
            feature: "x1".into(),
            estimate: 1.0,
            se: 0.5,
            ci_low: 0.02,
            ci_high: 1.98,
            p_value: 0.045,
            n_bootstrap: 20,
            degenerate_se: false,
            n_failed: 0,
        }];
        let text = effect_reports_csv(&reports);
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("feature,estimate"));
        assert!(text.contains("x1,1,0.5,0.02,1.98,0.045,20,0,0"));

        let curve = AleCurve {
            bin_edges: vec![0.0, 1.0, 2.0],
            centered_effect: vec![-0.5, 0.5],
            counts: vec![3, 3],
        };
        let text = ale_csv(&curve);
        assert!(text.contains("0.5,-0.5,3"));
        assert!(text.contains("1.5,0.5,3"));

        let biplot = BiplotResult {
            positions: vec![(0, vec![0.1, 0.2]), (1, vec![-0.3, 0.4])],
            arrows: vec![("x1".into(), vec![1.0, -1.0])],
            group_labels: Some(vec![(0, 0), (1, 1)]),
        };
        assert!(positions_csv(&biplot).contains("0,0.1,0.2,0"));
        assert!(positions_csv(&biplot).contains("1,-0.3,0.4,1"));
        assert!(arrows_csv(&biplot).contains("x1,1,-1"));
    }
}
