//! Locale-free number formatting for CSV and text reports.

const DIGITS: i32 = 9;

/// `x` with 9 significant digits; plain decimal notation for moderate
/// magnitudes, scientific otherwise. Trailing zeros are dropped.
pub fn sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round first so the exponent reflects the rounded value (9.99999999e2 → 1000).
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let exp: i32 = sci.split_once('e').map(|(_, e)| e.parse().unwrap()).unwrap();
    if (-5..DIGITS + 6).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let (mantissa, _) = sci.split_once('e').unwrap();
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// CSV line from already formatted cells.
pub fn csv_line<I, S>(cells: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut line = cells
        .into_iter()
        .map(|c| c.as_ref().to_string())
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}
