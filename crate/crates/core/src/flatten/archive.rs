//! Deterministic `tar.gz` output with a JSON manifest sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};

use super::{io_err, EntryKind, FlattenError, FlattenResult, ManifestEntry, Profile, RenamedAsset};

/// Sidecar written next to each archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub archive: String,
    pub profile: Profile,
    pub archive_sha256: String,
    pub entries: Vec<ManifestEntry>,
    pub renamed_assets: Vec<RenamedAsset>,
}

/// `<archive>.manifest.json`.
pub fn sidecar_path(archive: &Path) -> PathBuf {
    let mut name = archive.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    archive.with_file_name(name)
}

/// Write the archive (fixed mtime, owner and mode; manifest order) and its
/// sidecar. Returns the sidecar.
pub fn write_tarball(result: &FlattenResult, archive: &Path) -> Result<Sidecar, FlattenError> {
    let mut builder = tar::Builder::new(Vec::new());
    for entry in result.manifest.iter().filter(|e| e.kind != EntryKind::BblSlot) {
        let data = &result.contents[&entry.path];
        let mut header = tar::Header::new_ustar();
        header.set_path(&entry.path).map_err(io_err(archive))?;
        header.set_size(data.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        header.set_entry_type(tar::EntryType::Regular);
        header.set_cksum();
        builder.append(&header, data.as_slice()).map_err(io_err(archive))?;
    }
    let tar_bytes = builder.into_inner().map_err(io_err(archive))?;

    let mut gz = GzBuilder::new().mtime(0).write(Vec::new(), Compression::best());
    std::io::Write::write_all(&mut gz, &tar_bytes).map_err(io_err(archive))?;
    let gz_bytes = gz.finish().map_err(io_err(archive))?;
    if let Some(parent) = archive.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(archive, &gz_bytes).map_err(io_err(archive))?;

    let sidecar = Sidecar {
        archive: archive
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        profile: result.profile,
        archive_sha256: super::sha256_hex(&gz_bytes),
        entries: result.manifest.clone(),
        renamed_assets: result.renamed_assets.clone(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    let sc = sidecar_path(archive);
    fs::write(&sc, json).map_err(io_err(&sc))?;
    Ok(sidecar)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, FlattenError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::super::{build_submission, TexProject};
    use super::*;
    use std::io::Read;

    #[test]
    fn archive_is_deterministic_and_flat() {
        let p = TexProject::new("src/main.tex")
            .with_file("src/main.tex", "\\includegraphics{f/a.png}\n")
            .with_asset("f/a.png", b"png");
        let r = build_submission(&p, Profile::JournalTl2017).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.tar.gz");
        let b = dir.path().join("b.tar.gz");
        let s1 = write_tarball(&r, &a).unwrap();
        let s2 = write_tarball(&r, &b).unwrap();
        assert_eq!(s1.archive_sha256, s2.archive_sha256);
        assert_eq!(read_sidecar(&sidecar_path(&a)).unwrap(), s1);

        let mut names = Vec::new();
        let gz = flate2::read::GzDecoder::new(fs::File::open(&a).unwrap());
        let mut ar = tar::Archive::new(gz);
        for e in ar.entries().unwrap() {
            let mut e = e.unwrap();
            names.push(e.path().unwrap().to_string_lossy().into_owned());
            let mut buf = Vec::new();
            e.read_to_end(&mut buf).unwrap();
        }
        assert_eq!(names, ["main.tex", "Fig1.png"]);
        assert!(names.iter().all(|n| !n.contains('/')));
    }
}
