use gbt_core::config::{ScenarioConfig, TargetKind};
use gbt_core::harness::run_episode;
use gbt_core::plots::{emit_plots, Frame};
use gbt_core::records::{parse_csv, write_records};

fn attr(node: roxmltree::Node, name: &str) -> f64 {
    node.attribute(name).unwrap().parse().unwrap()
}

fn frame_of(g: roxmltree::Node) -> Frame {
    Frame {
        x_min: attr(g, "data-x-min"),
        x_max: attr(g, "data-x-max"),
        y_min: attr(g, "data-y-min"),
        y_max: attr(g, "data-y-max"),
        log_y: g.attribute("data-log-y") == Some("true"),
        left: attr(g, "data-left"),
        top: attr(g, "data-top"),
        width: attr(g, "data-width"),
        height: attr(g, "data-height"),
    }
}

/// Data points of every polyline named `name`, mapped back through the plot frame.
fn series(doc: &roxmltree::Document, name: &str) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for line in doc
        .descendants()
        .filter(|n| n.has_tag_name("polyline") && n.attribute("data-name") == Some(name))
    {
        let frame = frame_of(line.parent().unwrap());
        for pair in line.attribute("points").unwrap().split_whitespace() {
            let (px, py) = pair.split_once(',').unwrap();
            out.push(frame.from_pixel(px.parse().unwrap(), py.parse().unwrap()));
        }
    }
    out
}

fn check_error_curve(log_scale: bool) {
    let mut cfg = ScenarioConfig::default();
    cfg.target.kind = TargetKind::Case2;
    cfg.duration = 3.0;
    cfg.output.snapshot_times = vec![1.0, 2.0];
    let ep = run_episode(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = write_records(&ep.records, cfg.output.format, dir.path(), "records").unwrap();
    let paths = emit_plots(&ep, log_scale, dir.path(), "plot").unwrap();
    assert_eq!(paths.len(), 3);
    for p in &paths {
        let text = std::fs::read_to_string(p).unwrap();
        roxmltree::Document::parse(&text).expect("well-formed SVG");
    }
    let rows = parse_csv(&std::fs::read_to_string(csv_path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&paths[1]).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let curve = series(&doc, "avg_err");
    assert_eq!(curve.len(), rows.len());
    for ((x, y), row) in curve.iter().zip(&rows) {
        assert!((x - row.t).abs() < 1e-6 * (1.0 + row.t));
        assert!(
            (y - row.avg_err).abs() <= 1e-6 * row.avg_err.abs().max(1e-3),
            "{y} vs {}",
            row.avg_err
        );
    }
    let snaps = std::fs::read_to_string(&paths[2]).unwrap();
    let doc = roxmltree::Document::parse(&snaps).unwrap();
    assert_eq!(
        doc.descendants()
            .filter(|n| n.has_tag_name("g") && n.attribute("class") == Some("plot"))
            .count(),
        2
    );
}

#[test]
fn error_curve_matches_csv_linear() {
    check_error_curve(false);
}

#[test]
fn error_curve_matches_csv_log() {
    check_error_curve(true);
}

#[test]
fn default_snapshot_times() {
    let mut cfg = ScenarioConfig {
        duration: 20.0,
        ..Default::default()
    };
    assert_eq!(cfg.output.snapshot_times, vec![5.0, 10.0, 15.0, 20.0]);
    cfg.target.kind = TargetKind::Case1;
    let ep = run_episode(&cfg).unwrap();
    let times: Vec<f64> = ep.snapshots.iter().map(|s| s.t).collect();
    // The last control step of a 20 s run is at 19.9 s.
    assert_eq!(times.len(), 4);
    assert!((times[0] - 5.0).abs() < 1e-9 && (times[3] - 19.9).abs() < 1e-9);
}
