//! JSON serialization with floating-point values printed at a fixed 17
//! significant digits, so identical inputs produce byte-identical outputs
//! and every f64 round-trips exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

struct SigDigits;

impl Formatter for SigDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        // 1 leading + 16 fractional digits = 17 significant digits
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        CompactFormatter.write_f32(writer, value)
    }
}

/// Serializes to a JSON string with 17-significant-digit floats and a
/// trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SigDigits);
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// A float formatted exactly like the JSON output (17 significant digits),
/// for CSV cells.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}
