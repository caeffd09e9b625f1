//! IC15-format text annotations: one box per line,
//! `x1,y1,x2,y2,x3,y3,x4,y4,transcription`, with `###` marking illegible
//! (don't-care) instances.

use std::path::Path;

use lltext_core::{TextBox, DONT_CARE};

use crate::error::{DataError, Result};

/// Parses one annotation line. The transcription may itself contain commas;
/// everything after the eighth comma is the transcription.
pub fn parse_icdar_line(line: &str) -> Result<TextBox> {
    let line = line.trim_start_matches('\u{feff}').trim_end();
    let mut parts = line.splitn(9, ',');
    let mut coords = [0.0f64; 8];
    for (i, slot) in coords.iter_mut().enumerate() {
        let field = parts
            .next()
            .ok_or_else(|| DataError::parse(line, format!("expected 9 fields, found {i}")))?;
        *slot = field.trim().parse::<f64>().map_err(|e| {
            DataError::parse(line, format!("coordinate {} ({field:?}): {e}", i + 1))
        })?;
    }
    let transcription = parts
        .next()
        .ok_or_else(|| DataError::parse(line, "missing transcription field"))?;
    let quad = [
        [coords[0], coords[1]],
        [coords[2], coords[3]],
        [coords[4], coords[5]],
        [coords[6], coords[7]],
    ];
    let legible = transcription != DONT_CARE;
    TextBox::new(quad, legible, transcription).map_err(|e| DataError::parse(line, e.to_string()))
}

/// Parses a whole annotation file; blank lines are skipped.
pub fn parse_icdar_file(path: &Path) -> Result<Vec<TextBox>> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut boxes = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        boxes.push(parse_icdar_line(line).map_err(|e| match e {
            DataError::Parse { context, message } => DataError::Parse {
                context: format!("{}:{}: {context}", path.display(), ln + 1),
                message,
            },
            other => other,
        })?);
    }
    Ok(boxes)
}

/// Serializes one box back to the annotation format.
pub fn format_icdar_line(b: &TextBox) -> String {
    let q = &b.quad;
    let transcription = if b.legible {
        b.transcription.as_str()
    } else {
        DONT_CARE
    };
    format!(
        "{},{},{},{},{},{},{},{},{}",
        fmt_coord(q[0][0]),
        fmt_coord(q[0][1]),
        fmt_coord(q[1][0]),
        fmt_coord(q[1][1]),
        fmt_coord(q[2][0]),
        fmt_coord(q[2][1]),
        fmt_coord(q[3][0]),
        fmt_coord(q[3][1]),
        transcription
    )
}

fn fmt_coord(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Writes an annotation file, one box per line.
pub fn write_icdar_file(path: &Path, boxes: &[TextBox]) -> Result<()> {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&format_icdar_line(b));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DataError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parses_axis_aligned_legible_box() {
        let b = parse_icdar_line("10,10,50,10,50,30,10,30,hello").unwrap();
        assert!(b.legible);
        assert_eq!(b.transcription, "hello");
        let bb = b.aabb();
        assert_abs_diff_eq!(bb.u, 10.0);
        assert_abs_diff_eq!(bb.v, 10.0);
        assert_abs_diff_eq!(bb.w, 40.0);
        assert_abs_diff_eq!(bb.h, 20.0);
    }

    #[test]
    fn dont_care_marker_means_illegible() {
        let b = parse_icdar_line("0,0,5,0,5,5,0,5,###").unwrap();
        assert!(!b.legible);
        assert_eq!(b.transcription, "");
    }

    #[test]
    fn malformed_lines_error_with_context() {
        let err = parse_icdar_line("1,2,3").unwrap_err().to_string();
        assert!(err.contains("1,2,3"), "context missing: {err}");
        assert!(parse_icdar_line("a,0,5,0,5,5,0,5,x").is_err());
    }

    #[test]
    fn transcription_may_contain_commas() {
        let b = parse_icdar_line("0,0,5,0,5,5,0,5,a,b").unwrap();
        assert_eq!(b.transcription, "a,b");
    }

    #[test]
    fn round_trip_through_format() {
        let line = "10,10,50,10,50,30,10,30,hello";
        let b = parse_icdar_line(line).unwrap();
        assert_eq!(format_icdar_line(&b), line);
        let dc = parse_icdar_line("0,0,5,0,5,5,0,5,###").unwrap();
        assert_eq!(format_icdar_line(&dc), "0,0,5,0,5,5,0,5,###");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.txt");
        let boxes = vec![
            parse_icdar_line("10,10,50,10,50,30,10,30,hello").unwrap(),
            parse_icdar_line("0,0,5,0,5,5,0,5,###").unwrap(),
        ];
        write_icdar_file(&path, &boxes).unwrap();
        let back = parse_icdar_file(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].transcription, "hello");
        assert!(!back[1].legible);
    }
}
