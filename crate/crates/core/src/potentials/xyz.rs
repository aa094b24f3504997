//! Plain-text particle configurations: line 1 holds the particle count,
//! line 2 the box side, then one `x y z` line per particle. Blank lines and
//! `#` comments are skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XyzConfig {
    pub box_side: f64,
    /// Flat coordinates wrapped into `[0, box_side)`.
    pub positions: Vec<f64>,
}

impl XyzConfig {
    pub fn len(&self) -> usize {
        self.positions.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n{:.16e}\n", self.len(), self.box_side);
        for p in self.positions.chunks_exact(3) {
            s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2]));
        }
        s
    }
}

fn parse_real(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line, message: format!("invalid {what} '{tok}'") })
}

pub fn read_xyz(text: &str) -> Result<XyzConfig> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, tok) = lines.next().ok_or(Error::Parse { line: 1, message: "missing particle count".into() })?;
    let m: usize = tok
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("invalid particle count '{tok}'") })?;

    let (line, tok) =
        lines.next().ok_or(Error::Parse { line: line + 1, message: "missing box side".into() })?;
    let box_side = parse_real(tok, line, "box side")?;
    if box_side <= 0.0 {
        return Err(Error::Parse { line, message: "box side must be positive".into() });
    }

    let mut positions = Vec::with_capacity(3 * m.min(1 << 16));
    let mut last = line;
    for _ in 0..m {
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: last + 1,
            message: format!("expected {m} particle lines, found {}", positions.len() / 3),
        })?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse { line, message: format!("expected 3 coordinates, got {}", toks.len()) });
        }
        for t in toks {
            let c = parse_real(t, line, "coordinate")?;
            let w = c.rem_euclid(box_side);
            positions.push(if w >= box_side { 0.0 } else { w });
        }
        last = line;
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, message: "unexpected trailing content".into() });
    }
    Ok(XyzConfig { box_side, positions })
}

/// Byte-level entry point (used by the fuzz targets).
pub fn parse_xyz(data: &[u8]) -> Result<XyzConfig> {
    let text = std::str::from_utf8(data).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    read_xyz(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_wraps() {
        let c = read_xyz("2\n4.0\n0 0 0\n# comment\n5.0 -1 3.5\n").unwrap();
        assert_eq!(c.box_side, 4.0);
        assert_eq!(c.positions, vec![0.0, 0.0, 0.0, 1.0, 3.0, 3.5]);
    }

    #[test]
    fn round_trips_through_text() {
        let c = XyzConfig { box_side: 3.5, positions: vec![0.1, 0.2, 0.3, 1.0 / 3.0, 2.0, 3.4] };
        assert_eq!(read_xyz(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn reports_line_numbers() {
        let cases = [
            ("", 1),
            ("x\n", 1),
            ("1\n", 2),
            ("1\n-2\n0 0 0\n", 2),
            ("2\n3\n0 0 0\n", 4),
            ("1\n3\n0 nan 0\n", 3),
            ("1\n3\n0 0\n", 3),
            ("1\n3\n0 0 0\n1 1 1\n", 4),
        ];
        for (text, want) in cases {
            match read_xyz(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_invalid_utf8() {
        assert!(parse_xyz(&[0xff, 0xfe]).is_err());
    }
}
