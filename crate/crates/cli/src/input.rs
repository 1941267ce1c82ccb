use corrboot::{Error, PairedSample, Result};

/// Parses two integer columns separated by commas and/or whitespace. Text
/// after '#' is ignored, as are blank lines.
pub fn parse_pairs(text: &str) -> Result<PairedSample> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let err = |message: String| Error::Parse { line: i + 1, message };
        if fields.len() != 2 {
            return Err(err(format!("expected 2 columns, found {}", fields.len())));
        }
        let value = |f: &str| {
            f.parse::<u32>()
                .map_err(|_| err(format!("'{f}' is not a non-negative integer")))
        };
        xs.push(value(fields[0])?);
        ys.push(value(fields[1])?);
    }
    PairedSample::new(xs, ys)
}
