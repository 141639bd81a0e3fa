//! Binary measurement container.
//!
//! Layout, little-endian throughout:
//! 8-byte magic `FMCWMEAS`, u32 version, u32 reserved, u64 length of the
//! config echo, the echo as UTF-8, then N complex samples of u and N of
//! v_aux, each stored as (re, im) f64 pairs.

use num_complex::Complex64;

pub const MAGIC: &[u8; 8] = b"FMCWMEAS";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFile {
    pub config_echo: String,
    pub u: Vec<Complex64>,
    pub v_aux: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("measurement file: {0}")]
pub struct FormatError(pub String);

impl MeasurementFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 + self.config_echo.len() + 32 * self.u.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&(self.config_echo.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config_echo.as_bytes());
        for z in self.u.iter().chain(&self.v_aux) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let fail = |m: &str| FormatError(m.to_string());
        if bytes.len() < HEADER_LEN + 8 || &bytes[..8] != MAGIC {
            return Err(fail("missing FMCWMEAS header"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(FormatError(format!("unsupported version {version}")));
        }
        let text_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let body = bytes.len() - 24;
        if text_len > body as u64 {
            return Err(fail("config echo runs past the end of the file"));
        }
        let text_len = text_len as usize;
        let config_echo =
            String::from_utf8(bytes[24..24 + text_len].to_vec()).map_err(|_| fail("config echo is not UTF-8"))?;
        let samples = &bytes[24 + text_len..];
        if !samples.len().is_multiple_of(32) {
            return Err(fail("sample block is not a whole number of (u, v_aux) pairs"));
        }
        let n = samples.len() / 32;
        let mut all = samples.chunks_exact(16).map(|c| {
            Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap()))
        });
        let u: Vec<_> = all.by_ref().take(n).collect();
        let v_aux: Vec<_> = all.collect();
        Ok(Self { config_echo, u, v_aux })
    }
}
