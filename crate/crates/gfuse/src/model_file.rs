use std::fs;
use std::path::Path;

use gfuse_core::model_codec::{decode, encode};
use gfuse_core::AttentionModel;

use crate::error::{Error, Result};

pub fn save_model(model: &AttentionModel, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<AttentionModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}
