//! Binary index bundle: magic, format version, then the serialized road map.

use std::path::Path;

use crate::error::{Error, Result};
use crate::network::RoadMap;

pub const MAGIC: &[u8; 4] = b"SCLK";
pub const VERSION: u32 = 1;

pub fn to_bytes(map: &RoadMap) -> Result<Vec<u8>> {
    let body = bincode::serialize(map).map_err(|e| Error::Bundle(e.to_string()))?;
    let mut out = Vec::with_capacity(body.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<RoadMap> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Bundle("bad magic; not an index bundle".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("four bytes"));
    if version != VERSION {
        return Err(Error::Bundle(format!(
            "bundle format version {version} is not supported (expected {VERSION})"
        )));
    }
    let mut map: RoadMap = bincode::deserialize(&bytes[8..]).map_err(|e| Error::Bundle(e.to_string()))?;
    map.after_deserialize();
    Ok(map)
}

pub fn save(map: &RoadMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(map)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<RoadMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
