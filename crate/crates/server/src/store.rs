//! On-disk persistence.
//!
//! ```text
//! <data dir>/
//!   projects/<project id>/project.json
//!   assets/<sha256>.png | <sha256>.svg
//! ```
//!
//! Assets are content addressed and shared between projects, so an exported
//! and re-imported project refers to the same asset ids.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chartforge::raster::RasterImage;
use sha2::{Digest, Sha256};

use crate::error::ServiceError;
use crate::model::{AssetId, Project};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssetKind {
    Png,
    Svg,
}

impl AssetKind {
    pub fn extension(self) -> &'static str {
        match self {
            AssetKind::Png => "png",
            AssetKind::Svg => "svg",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            AssetKind::Png => "image/png",
            AssetKind::Svg => "image/svg+xml",
        }
    }

    fn sniff(bytes: &[u8]) -> AssetKind {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            AssetKind::Png
        } else {
            AssetKind::Svg
        }
    }
}

pub fn asset_id_of(bytes: &[u8]) -> AssetId {
    AssetId(hex::encode(Sha256::digest(bytes)))
}

/// Project ids are 128-bit random tokens in lowercase hex.
pub fn new_project_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn is_project_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io(context: &str, path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Storage(format!("{context} {}: {e}", path.display()))
}

/// Writes through a temporary file and a rename so readers never observe a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension(format!("tmp{:016x}", rand::random::<u64>()));
    let mut f = fs::File::create(&tmp).map_err(|e| io("create", &tmp, e))?;
    f.write_all(bytes).map_err(|e| io("write", &tmp, e))?;
    f.sync_all().map_err(|e| io("sync", &tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io("rename", path, e))
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let root = root.into();
        for dir in [root.join("projects"), root.join("assets")] {
            fs::create_dir_all(&dir).map_err(|e| io("create", &dir, e))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn asset_path(&self, id: &AssetId, kind: AssetKind) -> PathBuf {
        self.root.join("assets").join(format!("{}.{}", id.0, kind.extension()))
    }

    fn project_dir(&self, id: &str) -> PathBuf {
        self.root.join("projects").join(id)
    }

    pub fn put_asset(&self, bytes: &[u8]) -> Result<AssetId, ServiceError> {
        let id = asset_id_of(bytes);
        let path = self.asset_path(&id, AssetKind::sniff(bytes));
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(id)
    }

    pub fn put_png(&self, image: &RasterImage) -> Result<AssetId, ServiceError> {
        self.put_asset(&image.to_png()?)
    }

    pub fn asset(&self, id: &AssetId) -> Result<(Vec<u8>, AssetKind), ServiceError> {
        if !id.is_well_formed() {
            return Err(ServiceError::NotFound {
                what: "asset",
                id: id.0.clone(),
            });
        }
        for kind in [AssetKind::Png, AssetKind::Svg] {
            let path = self.asset_path(id, kind);
            match fs::read(&path) {
                Ok(bytes) => return Ok((bytes, kind)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(e) => return Err(io("read", &path, e)),
            }
        }
        Err(ServiceError::NotFound {
            what: "asset",
            id: id.0.clone(),
        })
    }

    pub fn load_png(&self, id: &AssetId) -> Result<RasterImage, ServiceError> {
        match self.asset(id)? {
            (bytes, AssetKind::Png) => Ok(RasterImage::from_png(&bytes)?),
            (_, AssetKind::Svg) => Err(ServiceError::BadRequest(format!("asset {id} is not a raster"))),
        }
    }

    pub fn save_project(&self, project: &Project) -> Result<(), ServiceError> {
        let dir = self.project_dir(&project.id);
        fs::create_dir_all(&dir).map_err(|e| io("create", &dir, e))?;
        let json = serde_json::to_vec_pretty(project).map_err(|e| ServiceError::Storage(e.to_string()))?;
        write_atomic(&dir.join("project.json"), &json)
    }

    pub fn load_project(&self, id: &str) -> Result<Project, ServiceError> {
        let not_found = || ServiceError::NotFound {
            what: "project",
            id: id.to_string(),
        };
        if !is_project_id(id) {
            return Err(not_found());
        }
        let path = self.project_dir(id).join("project.json");
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
            Err(e) => return Err(io("read", &path, e)),
        };
        serde_json::from_slice(&bytes).map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))
    }
}
