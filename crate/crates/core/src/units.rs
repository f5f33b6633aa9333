//! Length literals with mandatory unit suffixes (`15um`, `1.04cm`, `0.5m`).

const SUFFIXES: [(&str, f64); 6] = [
    ("nm", 1e-9),
    ("um", 1e-6),
    ("µm", 1e-6),
    ("mm", 1e-3),
    ("cm", 1e-2),
    ("m", 1.0),
];

/// Parses a length with a unit suffix into meters.
pub fn parse_length(text: &str) -> Result<f64, String> {
    let t = text.trim();
    for (suffix, scale) in SUFFIXES {
        if let Some(num) = t.strip_suffix(suffix) {
            let v: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("malformed number in length {t:?}"))?;
            if !v.is_finite() {
                return Err(format!("length {t:?} is not finite"));
            }
            return Ok(v * scale);
        }
    }
    Err(format!("length {t:?} needs a unit suffix (nm, um, mm, cm, m)"))
}

/// Formats meters so that [`parse_length`] reads back the identical value.
pub fn format_length(meters: f64) -> String {
    format!("{meters:?}m")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_length("15um").unwrap(), 15.0 * 1e-6);
        assert_eq!(parse_length("1.04cm").unwrap(), 1.04 * 1e-2);
        assert_eq!(parse_length("0.5m").unwrap(), 0.5);
        assert_eq!(parse_length("2mm").unwrap(), 2.0 * 1e-3);
        assert_eq!(parse_length("1554.7nm").unwrap(), 1554.7 * 1e-9);
        assert_eq!(parse_length("-1m").unwrap(), -1.0);
    }

    #[test]
    fn rejects_bare_numbers_and_garbage() {
        assert!(parse_length("0.5").is_err());
        assert!(parse_length("abcm").is_err());
        assert!(parse_length("1e999m").is_err());
        assert!(parse_length("").is_err());
    }

    #[test]
    fn format_roundtrips() {
        for v in [0.5, 1.2e-3, 271e-6, 3.0, 1554.7e-9] {
            assert_eq!(parse_length(&format_length(v)).unwrap(), v);
        }
    }
}
