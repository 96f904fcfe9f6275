//! File formats: line-delimited JSON experience records and CSV scene
//! descriptions.
//!
//! Experience records are written with 17 significant digits so every f64
//! round-trips exactly; rereading a file reproduces the in-memory batch
//! bit-for-bit. Writing is deterministic (fixed key order), so identical
//! batches serialize to identical bytes.

use crate::distributions::Categorical;
use crate::error::{Error, Result};
use crate::loss::{Batch, Experience, Meta};
use crate::simulation::{Object, Scenario};
use serde::Deserialize;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

/// Formats a float with 17 significant digits (exact f64 round trip).
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push(']');
}

/// Renders one experience as a single JSON line (no trailing newline).
pub fn experience_to_line(x: &Experience) -> String {
    let mut line = String::from("{\"bases\":[");
    for (i, base) in x.bases().iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        push_array(&mut line, base.probs());
    }
    line.push_str("],\"advice\":");
    push_array(&mut line, x.advice().probs());
    line.push_str(",\"meta\":{\"true_index\":");
    match x.meta().true_index {
        Some(t) => {
            let _ = write!(line, "{t}");
        }
        None => line.push_str("null"),
    }
    line.push_str(",\"scenario\":");
    match &x.meta().scenario {
        Some(s) => {
            let _ = write!(line, "{}", serde_json::Value::String(s.clone()));
        }
        None => line.push_str("null"),
    }
    line.push_str("}}");
    line
}

/// Writes a batch as UTF-8 line-delimited records.
pub fn write_experiences<W: Write>(writer: &mut W, batch: &Batch) -> Result<()> {
    for x in batch.experiences() {
        writeln!(writer, "{}", experience_to_line(x))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct RecordDe {
    bases: Vec<Vec<f64>>,
    advice: Vec<f64>,
    #[serde(default)]
    meta: MetaDe,
}

#[derive(Deserialize, Default)]
struct MetaDe {
    #[serde(default)]
    true_index: Option<usize>,
    #[serde(default)]
    scenario: Option<String>,
}

/// Reads line-delimited experience records; parse failures carry the
/// 1-based line number.
pub fn read_experiences<R: BufRead>(reader: R) -> Result<Batch> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordDe = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let bases = record
            .bases
            .iter()
            .map(|b| Categorical::from_probs(b))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        let advice = Categorical::from_probs(&record.advice).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let meta = Meta {
            true_index: record.meta.true_index,
            scenario: record.meta.scenario,
        };
        records.push(Experience::new(bases, advice, meta).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?);
    }
    Batch::new(records)
}

/// Scene file header: one object per line after it.
pub const SCENE_HEADER: &str = "id,category,direction_bin,x,y";

/// Parses a CSV scene description (header required).
pub fn read_scene<R: BufRead>(reader: R, name: &str, direction_bins: usize) -> Result<Scenario> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty scene file".into(),
            })
        }
    };
    if header.trim() != SCENE_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {SCENE_HEADER:?}, got {:?}", header.trim()),
        });
    }
    let mut objects = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_usize = |s: &str, what: &str| {
            s.trim().parse::<usize>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad {what} {s:?}"),
            })
        };
        let parse_f64 = |s: &str, what: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad {what} {s:?}"),
            })
        };
        objects.push(Object {
            id: parse_usize(fields[0], "id")?,
            category: parse_usize(fields[1], "category")?,
            direction: parse_usize(fields[2], "direction bin")?,
            position: (parse_f64(fields[3], "x")?, parse_f64(fields[4], "y")?),
        });
    }
    Scenario::new(name, objects, direction_bins)
}

/// Renders a scene back to its CSV form.
pub fn scene_to_csv(sc: &Scenario) -> String {
    let mut out = String::from(SCENE_HEADER);
    out.push('\n');
    for o in sc.objects() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            o.id, o.category, o.direction, o.position.0, o.position.1
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{generate_batch, scenario2, ModalityNoise};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::BufReader;

    #[test]
    fn experiences_round_trip_bit_for_bit() {
        let sc = scenario2();
        let noise = ModalityNoise::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch = generate_batch(&sc, 16, &noise, &mut rng).unwrap();
        let mut bytes = Vec::new();
        write_experiences(&mut bytes, &batch).unwrap();
        let reread = read_experiences(BufReader::new(bytes.as_slice())).unwrap();
        assert_eq!(batch, reread);
    }

    #[test]
    fn writing_is_deterministic() {
        let sc = scenario2();
        let noise = ModalityNoise::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = generate_batch(&sc, 8, &noise, &mut rng).unwrap();
        write_experiences(&mut a, &batch).unwrap();
        write_experiences(&mut b, &batch).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = "{\"bases\":[[0.5,0.5]],\"advice\":[0.5,0.5],\"meta\":{\"true_index\":0,\"scenario\":null}}\nnot json\n";
        let err = read_experiences(BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn seventeen_digit_floats_round_trip() {
        let v = 0.1234567890123456789_f64;
        let s = fmt_f64(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
        let third = fmt_f64(1.0 / 3.0);
        assert_eq!(third.parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn scene_round_trip() {
        let sc = scenario2();
        let csv = scene_to_csv(&sc);
        let parsed = read_scene(BufReader::new(csv.as_bytes()), "scenario2", 5).unwrap();
        assert_eq!(sc.objects(), parsed.objects());
    }

    #[test]
    fn scene_rejects_missing_header_and_bad_rows() {
        let no_header = "0,0,0,0.0,0.5\n";
        assert!(matches!(
            read_scene(BufReader::new(no_header.as_bytes()), "x", 5),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad_row = format!("{SCENE_HEADER}\n0,0,0,0.0\n");
        match read_scene(BufReader::new(bad_row.as_bytes()), "x", 5) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
