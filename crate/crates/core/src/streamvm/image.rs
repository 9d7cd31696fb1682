use std::collections::BTreeMap;

use thiserror::Error;

use super::isa::decode_all;

pub const IMAGE_MAGIC: &[u8; 4] = b"UAVM";
pub const IMAGE_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported image version {0}")]
    Version(u16),
    #[error("image truncated")]
    Truncated,
    #[error("{0} trailing bytes after code")]
    Trailing(usize),
    #[error("entry point {offset} for service {service} is not an instruction boundary")]
    BadEntry { service: u32, offset: u32 },
    #[error("{0}")]
    Illegal(#[from] super::isa::IllegalOpcode),
}

/// Service programs plus their entry points keyed by request type id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VmProgram {
    pub name: String,
    pub code: Vec<u8>,
    pub entry_points: BTreeMap<u32, u32>,
}

impl VmProgram {
    pub fn to_image(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + 8 * self.entry_points.len() + self.code.len());
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&IMAGE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entry_points.len() as u32).to_le_bytes());
        for (service, offset) in &self.entry_points {
            out.extend_from_slice(&service.to_le_bytes());
            out.extend_from_slice(&offset.to_le_bytes());
        }
        out.extend_from_slice(&(self.code.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.code);
        out
    }

    /// Parses an image and checks that the code decodes and entries hit instruction boundaries.
    pub fn from_image(name: &str, bytes: &[u8]) -> Result<VmProgram, ImageError> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], ImageError> {
            let s = bytes.get(pos..pos + n).ok_or(ImageError::Truncated)?;
            pos += n;
            Ok(s)
        };
        if take(4)? != IMAGE_MAGIC {
            return Err(ImageError::BadMagic);
        }
        let version = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes"));
        if version != IMAGE_VERSION {
            return Err(ImageError::Version(version));
        }
        let u32_of = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let count = u32_of(take(4)?) as usize;
        let mut entry_points = BTreeMap::new();
        for _ in 0..count {
            let service = u32_of(take(4)?);
            let offset = u32_of(take(4)?);
            entry_points.insert(service, offset);
        }
        let len = u32_of(take(4)?) as usize;
        let code = take(len)?.to_vec();
        if pos != bytes.len() {
            return Err(ImageError::Trailing(bytes.len() - pos));
        }
        let boundaries: Vec<usize> = decode_all(&code)?.into_iter().map(|(o, _)| o).collect();
        for (&service, &offset) in &entry_points {
            if boundaries.binary_search(&(offset as usize)).is_err() {
                return Err(ImageError::BadEntry { service, offset });
            }
        }
        Ok(VmProgram {
            name: name.to_string(),
            code,
            entry_points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_roundtrip() {
        let p = VmProgram {
            name: "t".into(),
            code: vec![0x01, 0x00],
            entry_points: [(631, 1)].into_iter().collect(),
        };
        let img = p.to_image();
        assert_eq!(&img[..6], b"UAVM\x01\x00");
        assert_eq!(VmProgram::from_image("t", &img).unwrap(), p);
        assert_eq!(
            VmProgram::from_image("t", &img[..img.len() - 1]),
            Err(ImageError::Truncated)
        );
    }

    #[test]
    fn entry_inside_instruction_rejected() {
        let p = VmProgram {
            name: "t".into(),
            code: vec![0x03, 0x00, 0x00, 0x00],
            entry_points: [(631, 1)].into_iter().collect(),
        };
        assert!(matches!(
            VmProgram::from_image("t", &p.to_image()),
            Err(ImageError::BadEntry { .. })
        ));
    }
}
