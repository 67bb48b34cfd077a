use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::coder::{StcCode, DEFAULT_HEIGHT, MAX_HEIGHT};
use crate::cost_model::CostModel;
use crate::error::{Error, Result};
use crate::float_plane::MAX_CAPACITY;

pub const KEY_VERSION: u32 = 1;

/// Parameters shared in advance by sender and receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct StegoKey {
    /// Message bits per pixel per plane, in `(0, 1)`.
    pub relative_payload: f64,
    /// Number of effective planes `K` used from the LSB upward.
    pub planes: usize,
    pub cost_model: CostModel,
    /// STC constraint height `h`.
    pub stc_h: u32,
    /// Seed for pixel permutations, the STC submatrix and padding.
    pub perm_seed: u64,
    /// Prefix the message with a 32-bit length header.
    pub framing: bool,
}

impl StegoKey {
    pub fn new(relative_payload: f64, planes: usize, perm_seed: u64) -> Self {
        Self {
            relative_payload,
            planes,
            cost_model: CostModel::default(),
            stc_h: DEFAULT_HEIGHT,
            perm_seed,
            framing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_payload > 0.0 && self.relative_payload < 1.0) {
            return Err(Error::InvalidKey(format!(
                "relative_payload {} outside (0, 1)",
                self.relative_payload
            )));
        }
        if self.planes == 0 || self.planes > usize::from(MAX_CAPACITY) {
            return Err(Error::InvalidKey(format!(
                "planes {} outside 1..={MAX_CAPACITY}",
                self.planes
            )));
        }
        if self.stc_h == 0 || self.stc_h > MAX_HEIGHT {
            return Err(Error::InvalidKey(format!(
                "stc_h {} outside 1..={MAX_HEIGHT}",
                self.stc_h
            )));
        }
        Ok(())
    }

    pub fn stc_code(&self) -> Result<StcCode> {
        StcCode::new(self.stc_h, mix(self.perm_seed, STREAM_STC))
    }

    /// Canonical text form. Equal keys serialize to equal bytes.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "key_version={KEY_VERSION}");
        let _ = writeln!(s, "relative_payload={}", self.relative_payload);
        let _ = writeln!(s, "planes={}", self.planes);
        let _ = writeln!(s, "cost_model={}", self.cost_model);
        let _ = writeln!(s, "stc_h={}", self.stc_h);
        let _ = writeln!(s, "perm_seed={}", self.perm_seed);
        let _ = writeln!(s, "framing={}", u8::from(self.framing));
        s
    }

    /// Parses the canonical form. Fields must appear once each, in order.
    pub fn parse(text: &str) -> Result<Self> {
        const FIELDS: [&str; 7] = [
            "key_version",
            "relative_payload",
            "planes",
            "cost_model",
            "stc_h",
            "perm_seed",
            "framing",
        ];
        let mut values = Vec::with_capacity(FIELDS.len());
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        for field in FIELDS {
            let Some((idx, line)) = lines.next() else {
                return Err(Error::KeyParse {
                    line: text.lines().count() + 1,
                    msg: format!("missing field {field}"),
                });
            };
            let line_no = idx + 1;
            let Some((name, value)) = line.split_once('=') else {
                return Err(Error::KeyParse {
                    line: line_no,
                    msg: format!("expected {field}=<value>"),
                });
            };
            if name.trim() != field {
                return Err(Error::KeyParse {
                    line: line_no,
                    msg: format!("expected field {field}, found {:?}", name.trim()),
                });
            }
            values.push((line_no, value.trim().to_string()));
        }
        if let Some((idx, _)) = lines.next() {
            return Err(Error::KeyParse {
                line: idx + 1,
                msg: "trailing content".into(),
            });
        }

        fn num<T: std::str::FromStr>(v: &(usize, String), what: &str) -> Result<T> {
            v.1.parse().map_err(|_| Error::KeyParse {
                line: v.0,
                msg: format!("invalid {what} {:?}", v.1),
            })
        }
        let version: u32 = num(&values[0], "key_version")?;
        if version != KEY_VERSION {
            return Err(Error::KeyParse {
                line: values[0].0,
                msg: format!("unsupported key_version {version}"),
            });
        }
        let framing = match values[6].1.as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::KeyParse {
                    line: values[6].0,
                    msg: format!("framing must be 0 or 1, found {other:?}"),
                })
            }
        };
        let key = StegoKey {
            relative_payload: num(&values[1], "relative_payload")?,
            planes: num(&values[2], "planes")?,
            cost_model: values[3].1.parse()?,
            stc_h: num(&values[4], "stc_h")?,
            perm_seed: num(&values[5], "perm_seed")?,
            framing,
        };
        key.validate()?;
        Ok(key)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_canonical_string())?;
        Ok(())
    }
}

pub(crate) const STREAM_STC: u64 = 1;
pub(crate) const STREAM_PADDING: u64 = 2;
pub(crate) const STREAM_PERMUTATION: u64 = 0x100;
pub(crate) const STREAM_SIMULATION: u64 = 0x200;

/// SplitMix64 finalizer over `seed` and a stream tag.
pub(crate) fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
