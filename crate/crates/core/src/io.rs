//! Shared text-output helpers.
//!
//! Every floating-point value written to CSV goes through [`fmt_f64`], which
//! prints 17 significant digits so that a parse of the output reproduces the
//! exact binary value.

use std::io::Write;

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalise -0.0 so byte-identical reruns do not depend on sign of zero
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Writes a CSV header followed by rows of floats.
pub fn write_float_rows<W: Write>(
    mut w: W,
    header: &str,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[1.0 / 3.0, std::f64::consts::PI, -2.5e-300, 1e300, 0.1 + 0.2] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(-0.0), fmt_f64(0.0));
    }
}
