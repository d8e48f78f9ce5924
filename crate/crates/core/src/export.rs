//! Field snapshots as 16-bit PGM images and plain CSV grids.

use std::io::{self, Write};

use crate::field::ScalarField;

/// Formats `v` like C's `%.17g`: 17 significant digits, trailing zeros
/// dropped. Every finite `f64` round-trips through this text exactly.
pub fn fmt_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Binary PGM (P5), 16-bit big-endian samples. Values are mapped linearly so
/// the field minimum is 0 and the maximum is 65535; a constant field is all
/// zeros. The top image row is the grid row with the largest y.
pub fn write_pgm16<W: Write>(field: &ScalarField, mut out: W) -> io::Result<()> {
    let spec = field.spec();
    let (lo, hi) = (field.min(), field.max());
    let range = hi - lo;
    write!(out, "P5\n{} {}\n65535\n", spec.nx, spec.ny)?;
    let mut row = Vec::with_capacity(spec.nx * 2);
    for j in (0..spec.ny).rev() {
        row.clear();
        for i in 0..spec.nx {
            let v = field.get(i, j);
            let level = if range > 0.0 {
                (((v - lo) / range) * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            row.extend_from_slice(&level.to_be_bytes());
        }
        out.write_all(&row)?;
    }
    Ok(())
}

/// One text line per grid row (ascending y), comma-separated samples.
pub fn write_field_csv<W: Write>(field: &ScalarField, mut out: W) -> io::Result<()> {
    let spec = field.spec();
    let mut line = String::new();
    for j in 0..spec.ny {
        line.clear();
        for i in 0..spec.nx {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt_g17(field.get(i, j)));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(2.0), "2");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-250.0), "-250");
        assert_eq!(fmt_g17(1.5e-7), "1.4999999999999999e-07");
        assert_eq!(fmt_g17(3e20), "3e+20");
        for v in [std::f64::consts::PI, 1.0 / 3.0, 6.02e23, -1e-300, 123456.789] {
            assert_eq!(fmt_g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn pgm_layout() {
        let spec = GridSpec::new(0.0, 3.0, 0.0, 2.0, 3, 2).unwrap();
        let f = ScalarField::from_values(spec, vec![0.0, 1.0, 2.0, 3.0, 4.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm16(&f, &mut buf).unwrap();
        let header = b"P5\n3 2\n65535\n";
        assert_eq!(&buf[..header.len()], header);
        let px: Vec<u16> = buf[header.len()..]
            .chunks(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect();
        // Top row is j = 1.
        assert_eq!(px, vec![49151, 65535, 65535, 0, 16384, 32768]);
    }

    #[test]
    fn csv_rows() {
        let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 2, 2).unwrap();
        let f = ScalarField::from_values(spec, vec![0.5, 1.0, -2.0, 0.25]).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0.5,1\n-2,0.25\n");
    }
}
