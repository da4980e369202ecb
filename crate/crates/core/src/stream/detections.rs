//! Line-delimited detection records, one JSON object per box:
//!
//! ```text
//! {"frame":0,"x1":10.0,"y1":12.5,"x2":40.0,"y2":30.0,"class":2,"conf":0.9,"track":7}
//! ```
//!
//! Records are grouped by frame. Frame indices may not decrease within a
//! file; frames with no records come back as empty detection sets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StreamError;
use crate::roi::{DetectionBox, FrameDetections};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    frame: u64,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    class: u32,
    conf: f64,
    track: Option<u64>,
}

pub fn parse_detections(text: &str) -> Result<Vec<FrameDetections>, StreamError> {
    let mut out: Vec<FrameDetections> = Vec::new();
    let mut last: Option<u64> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(line).map_err(|e| StreamError::DetectionParse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(prev) = last {
            if r.frame < prev {
                return Err(StreamError::OrderError {
                    line: line_no,
                    frame: r.frame,
                    previous: prev,
                });
            }
        }
        last = Some(r.frame);
        let b = DetectionBox {
            x1: r.x1,
            y1: r.y1,
            x2: r.x2,
            y2: r.y2,
            class_id: r.class,
            confidence: r.conf,
            track_id: r.track,
        };
        b.validate().map_err(|e| StreamError::DetectionParse {
            line: line_no,
            message: e.to_string(),
        })?;
        while out.len() as u64 <= r.frame {
            let idx = out.len() as u64;
            out.push(FrameDetections::empty(idx));
        }
        out[r.frame as usize].boxes.push(b);
    }
    Ok(out)
}

pub fn format_detections(frames: &[FrameDetections]) -> String {
    let mut out = String::new();
    for fd in frames {
        for b in &fd.boxes {
            let r = Record {
                frame: fd.frame_index,
                x1: b.x1,
                y1: b.y1,
                x2: b.x2,
                y2: b.y2,
                class: b.class_id,
                conf: b.confidence,
                track: b.track_id,
            };
            out.push_str(&serde_json::to_string(&r).expect("records always serialize"));
            out.push('\n');
        }
    }
    out
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<FrameDetections>, StreamError> {
    parse_detections(&fs::read_to_string(path)?)
}

pub fn write_detections(
    path: impl AsRef<Path>,
    frames: &[FrameDetections],
) -> Result<(), StreamError> {
    fs::write(path, format_detections(frames))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = concat!(
        r#"{"frame":0,"x1":1.0,"y1":2.0,"x2":3.0,"y2":4.0,"class":1,"conf":0.5,"track":null}"#,
        "\n",
        r#"{"frame":0,"x1":5.5,"y1":6.0,"x2":7.0,"y2":8.0,"class":2,"conf":1.0,"track":9}"#,
        "\n",
    );

    #[test]
    fn empty_file() {
        assert!(parse_detections("").unwrap().is_empty());
    }

    #[test]
    fn groups_same_frame() {
        let d = parse_detections(TWO).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].boxes.len(), 2);
        assert_eq!(d[0].boxes[1].track_id, Some(9));
        assert_eq!(format_detections(&d), TWO);
    }

    #[test]
    fn gaps_become_empty_frames() {
        let text = r#"{"frame":2,"x1":1,"y1":2,"x2":3,"y2":4,"class":0,"conf":0.5,"track":null}"#;
        let d = parse_detections(text).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d[0].boxes.is_empty() && d[1].boxes.is_empty());
        assert_eq!(d[1].frame_index, 1);
        assert_eq!(d[2].boxes[0].x1, 1.0);
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = format!("{TWO}{{\"frame\":1,\"x1\":oops}}\n");
        match parse_detections(&text) {
            Err(StreamError::DetectionParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_box_reports_line() {
        let text = r#"{"frame":0,"x1":5,"y1":2,"x2":3,"y2":4,"class":0,"conf":0.5,"track":null}"#;
        assert!(matches!(
            parse_detections(text),
            Err(StreamError::DetectionParse { line: 1, .. })
        ));
    }

    #[test]
    fn regressing_frame_is_order_error() {
        let text = concat!(
            r#"{"frame":3,"x1":1,"y1":2,"x2":3,"y2":4,"class":0,"conf":0.5,"track":null}"#,
            "\n",
            r#"{"frame":1,"x1":1,"y1":2,"x2":3,"y2":4,"class":0,"conf":0.5,"track":null}"#,
        );
        assert!(matches!(
            parse_detections(text),
            Err(StreamError::OrderError {
                line: 2,
                frame: 1,
                previous: 3
            })
        ));
    }
}
