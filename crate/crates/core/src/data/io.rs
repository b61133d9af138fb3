//! Headerless signal CSV (rows = samples, columns = channels) and the
//! landmark CSV (`t, x1..x49, y1..y49, bx, by, bw, bh`).

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{FaceBox, FaceLandmarkTrack, LandmarkFrame, LANDMARK_COUNT};
use crate::error::{Error, Result};

fn parse_field(raw: &str, context: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::parse(context, format!("row {row}, column {col}: bad number {raw:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            context,
            format!("row {row}, column {col}: non-finite value"),
        ));
    }
    Ok(v)
}

/// Parses signal CSV text into channel-major samples.
pub fn parse_signal_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    const CTX: &str = "signal csv";
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut channels: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(CTX, e.to_string()))?;
        if row == 0 {
            if rec.is_empty() || (rec.len() == 1 && rec[0].trim().is_empty()) {
                return Err(Error::parse(CTX, "empty first row"));
            }
            channels = vec![Vec::new(); rec.len()];
        } else if rec.len() != channels.len() {
            return Err(Error::parse(
                CTX,
                format!("row {row} has {} columns, expected {}", rec.len(), channels.len()),
            ));
        }
        for (col, field) in rec.iter().enumerate() {
            channels[col].push(parse_field(field, CTX, row, col)?);
        }
    }
    if channels.is_empty() {
        return Err(Error::parse(CTX, "no samples"));
    }
    Ok(channels)
}

pub fn read_signal_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_signal_csv(&text).map_err(|e| e.context(path.display().to_string()))
}

/// Writes channel-major samples; values use shortest round-trip formatting.
pub fn write_signal_csv(path: &Path, samples: &[Vec<f64>]) -> Result<()> {
    let n = samples.first().map_or(0, Vec::len);
    let mut out = String::with_capacity(n * samples.len() * 12);
    for t in 0..n {
        for (c, ch) in samples.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", ch[t]));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

fn landmark_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=LANDMARK_COUNT).map(|i| format!("x{i}")));
    h.extend((1..=LANDMARK_COUNT).map(|i| format!("y{i}")));
    h.extend(["bx", "by", "bw", "bh"].iter().map(|s| s.to_string()));
    h
}

/// Parses a landmark track. Rows with empty landmark fields (detector
/// failed upstream) are skipped.
pub fn parse_landmark_csv(trial_id: &str, text: &str) -> Result<FaceLandmarkTrack> {
    const CTX: &str = "landmark csv";
    let width = 1 + 2 * LANDMARK_COUNT + 4;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(CTX, e.to_string()))?.clone();
    let expected = landmark_header();
    if header.len() != width || header.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
        return Err(Error::parse(CTX, "header must be t,x1..x49,y1..y49,bx,by,bw,bh"));
    }
    let mut frames = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(CTX, e.to_string()))?;
        if rec.len() != width {
            return Err(Error::parse(
                CTX,
                format!("row {row} has {} columns, expected {width}", rec.len()),
            ));
        }
        if rec.iter().skip(1).any(|f| f.trim().is_empty()) {
            continue;
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(col, f)| parse_field(f, CTX, row, col))
            .collect::<Result<Vec<f64>>>()?;
        let points = (0..LANDMARK_COUNT)
            .map(|i| [vals[1 + i], vals[1 + LANDMARK_COUNT + i]])
            .collect();
        let b = &vals[1 + 2 * LANDMARK_COUNT..];
        frames.push(LandmarkFrame {
            t: vals[0],
            points,
            face_box: FaceBox {
                x: b[0],
                y: b[1],
                w: b[2],
                h: b[3],
            },
        });
    }
    let track = FaceLandmarkTrack {
        trial_id: trial_id.to_string(),
        frames,
    };
    track.validate()?;
    Ok(track)
}

pub fn read_landmark_csv(trial_id: &str, path: &Path) -> Result<FaceLandmarkTrack> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmark_csv(trial_id, &text).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_landmark_csv(path: &Path, track: &FaceLandmarkTrack) -> Result<()> {
    let mut out = landmark_header().join(",");
    out.push('\n');
    for f in &track.frames {
        let mut row = vec![format!("{}", f.t)];
        row.extend(f.points.iter().map(|p| format!("{}", p[0])));
        row.extend(f.points.iter().map(|p| format!("{}", p[1])));
        let b = f.face_box;
        row.extend([b.x, b.y, b.w, b.h].iter().map(|v| format!("{v}")));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_channel_major() {
        let s = parse_signal_csv("1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(s, vec![vec![1.0, 3.0, 5.0], vec![2.0, 4.0, 6.0]]);
    }

    #[test]
    fn rejects_ragged_rows_and_nan() {
        assert!(parse_signal_csv("1,2\n3\n").is_err());
        assert!(parse_signal_csv("1,NaN\n").is_err());
        assert!(parse_signal_csv("1,inf\n").is_err());
        assert!(parse_signal_csv("").is_err());
        assert!(parse_signal_csv("1,abc\n").is_err());
    }

    fn frame(t: f64, dx: f64) -> LandmarkFrame {
        LandmarkFrame {
            t,
            points: (0..LANDMARK_COUNT).map(|i| [i as f64 + dx, 2.0 * i as f64]).collect(),
            face_box: FaceBox {
                x: 1.0,
                y: 2.0,
                w: 100.0,
                h: 120.0,
            },
        }
    }

    #[test]
    fn landmark_round_trip_and_skip_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.csv");
        let track = FaceLandmarkTrack {
            trial_id: "t1".into(),
            frames: vec![frame(0.0, 0.0), frame(1.0, 0.5)],
        };
        write_landmark_csv(&p, &track).unwrap();
        let back = read_landmark_csv("t1", &p).unwrap();
        assert_eq!(back, track);

        // a failed-detection row is dropped
        let mut text = std::fs::read_to_string(&p).unwrap();
        text.push('2');
        text.push_str(&",".repeat(2 * LANDMARK_COUNT + 4));
        text.push('\n');
        let back = parse_landmark_csv("t1", &text).unwrap();
        assert_eq!(back.frames.len(), 2);
    }

    #[test]
    fn landmark_rejects_bad_header_and_box() {
        assert!(parse_landmark_csv("t", "a,b\n1,2\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.csv");
        let mut f = frame(0.0, 0.0);
        f.face_box.w = 0.0;
        let track = FaceLandmarkTrack {
            trial_id: "t".into(),
            frames: vec![f],
        };
        write_landmark_csv(&p, &track).unwrap();
        assert!(read_landmark_csv("t", &p).is_err());
    }

    proptest! {
        #[test]
        fn signal_csv_round_trip_is_bit_exact(
            data in prop::collection::vec(prop::collection::vec(-1e6f32..1e6f32, 1..40), 1..5)
        ) {
            let n = data.iter().map(Vec::len).min().unwrap();
            let samples: Vec<Vec<f64>> = data.iter().map(|c| c[..n].iter().map(|&v| v as f64).collect()).collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.csv");
            write_signal_csv(&p, &samples).unwrap();
            let back = read_signal_csv(&p).unwrap();
            prop_assert_eq!(back.len(), samples.len());
            for (a, b) in back.iter().zip(&samples) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
