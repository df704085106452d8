//! CSV output: one header row, snake_case columns, floats to six
//! significant digits.

use std::io::Write;

use serde::{Serialize, Serializer};

/// Serializes as a decimal with six significant digits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Sig6(pub f64);

impl Sig6 {
    pub fn render(self) -> String {
        let x = self.0;
        if !x.is_finite() {
            return x.to_string();
        }
        if x == 0.0 {
            return "0".into();
        }
        // Round through scientific notation, then print the shortest form.
        let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float");
        rounded.to_string()
    }
}

impl Serialize for Sig6 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl From<f64> for Sig6 {
    fn from(x: f64) -> Self {
        Sig6(x)
    }
}

pub fn write_rows<W: Write, R: Serialize>(out: W, rows: &[R]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_string<R: Serialize>(rows: &[R]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("in-memory csv");
    String::from_utf8(buf).expect("csv is utf-8")
}
