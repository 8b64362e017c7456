//! Score scalar abstraction.
//!
//! All scoring code is generic over [`Score`] so the same kernels run in the
//! default exact mode (`i64`) and in real-valued mode (`f64`) for fractional
//! substitution matrices.

use std::fmt::{Debug, Display};
use std::io::{self, Read, Write};

use num_traits::{Num, NumCast};

pub trait Score:
    Num + NumCast + PartialOrd + Copy + Send + Sync + Debug + Display + 'static
{
    /// Type tag written into tensor dump headers.
    const DTYPE: &'static str;

    /// Parses a score from its text form, e.g. in a scheme config file.
    fn parse_text(text: &str) -> Option<Self>;

    /// Writes the score as little-endian bytes (tensor dump format).
    fn write_le(&self, writer: &mut dyn Write) -> io::Result<()>;

    /// Reads a score back from little-endian bytes.
    fn read_le(reader: &mut dyn Read) -> io::Result<Self>;
}

impl Score for i64 {
    const DTYPE: &'static str = "i64";

    fn parse_text(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }

    fn write_le(&self, writer: &mut dyn Write) -> io::Result<()> {
        writer.write_all(&self.to_le_bytes())
    }

    fn read_le(reader: &mut dyn Read) -> io::Result<Self> {
        let mut buf = [0u8; 8];
        reader.read_exact(&mut buf)?;
        Ok(i64::from_le_bytes(buf))
    }
}

impl Score for f64 {
    const DTYPE: &'static str = "f64";

    fn parse_text(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }

    fn write_le(&self, writer: &mut dyn Write) -> io::Result<()> {
        writer.write_all(&self.to_le_bytes())
    }

    fn read_le(reader: &mut dyn Read) -> io::Result<Self> {
        let mut buf = [0u8; 8];
        reader.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_le() {
        let mut buf = Vec::new();
        (-42i64).write_le(&mut buf).unwrap();
        1.5f64.write_le(&mut buf).unwrap();
        let mut cursor = io::Cursor::new(buf);
        assert_eq!(i64::read_le(&mut cursor).unwrap(), -42);
        assert_eq!(f64::read_le(&mut cursor).unwrap(), 1.5);
    }

    #[test]
    fn parse_text_modes() {
        assert_eq!(i64::parse_text(" -3 "), Some(-3));
        assert_eq!(i64::parse_text("1.5"), None);
        assert_eq!(f64::parse_text("1.5"), Some(1.5));
    }
}
