use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RomParams, RomSizes, OMEGA_FD_STEP};
use crate::error::{invalid, Result};

const FORMAT: &str = "xpoint-rom-v1";

/// JSON header stored next to the flat parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomHeader {
    pub format: String,
    pub sizes: RomSizes,
    pub seed: u64,
    pub n_params: usize,
    pub omega_fd_step: f64,
    /// Error unit used in evaluation (largest training radius), if known.
    pub phase_space_scale: Option<f64>,
}

fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (prefix.with_extension("bin"), prefix.with_extension("json"))
}

/// Writes `<prefix>.bin` (little-endian f64 parameters) and `<prefix>.json`.
pub fn save_params(params: &RomParams, prefix: &Path, phase_space_scale: Option<f64>) -> Result<()> {
    let (bin, json) = paths(prefix);
    let bytes: Vec<u8> = params.theta.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(bin, bytes)?;
    let header = RomHeader {
        format: FORMAT.to_string(),
        sizes: params.sizes.clone(),
        seed: params.seed,
        n_params: params.n_params(),
        omega_fd_step: OMEGA_FD_STEP,
        phase_space_scale,
    };
    fs::write(json, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

pub fn load_params(prefix: &Path) -> Result<(RomParams, RomHeader)> {
    let (bin, json) = paths(prefix);
    let header: RomHeader = serde_json::from_str(&fs::read_to_string(json)?)?;
    if header.format != FORMAT {
        return Err(invalid(format!("unknown parameter format `{}`", header.format)));
    }
    let bytes = fs::read(bin)?;
    if bytes.len() != 8 * header.n_params {
        return Err(invalid(format!(
            "parameter file holds {} bytes, header expects {}",
            bytes.len(),
            8 * header.n_params
        )));
    }
    let theta = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((RomParams::from_theta(header.sizes.clone(), header.seed, theta)?, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::rom_init;

    #[test]
    fn round_trip() {
        let dir = std::env::temp_dir().join(format!("xpoint-rom-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let prefix = dir.join("model");
        let params = rom_init(&RomSizes::with_hidden(8), 3).unwrap();
        save_params(&params, &prefix, Some(1.05)).unwrap();
        let (back, header) = load_params(&prefix).unwrap();
        assert_eq!(back, params);
        assert_eq!(header.phase_space_scale, Some(1.05));
        fs::write(prefix.with_extension("bin"), [0u8; 12]).unwrap();
        assert!(load_params(&prefix).is_err());
        fs::remove_dir_all(dir).unwrap();
    }
}
