use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::foamdict::{read_dict, set_path_in_place, write_dict, FoamValue, KeyPath};

const CASE_DIRS: [&str; 3] = ["0", "constant", "system"];

pub fn is_case(dir: &Path) -> bool {
    dir.join("system/controlDict").is_file()
}

/// Copies `0/`, `constant/` and `system/` of `base` into a new `dest`.
/// Time directories and solver logs are never carried over.
pub fn clone_case(base: &Path, dest: &Path) -> Result<PathBuf, StudyError> {
    if !is_case(base) {
        return Err(StudyError::NotACase(base.display().to_string()));
    }
    if dest.exists() {
        return Err(StudyError::DestinationExists(dest.display().to_string()));
    }
    std::fs::create_dir_all(dest)?;
    for d in CASE_DIRS {
        let src = base.join(d);
        if src.is_dir() {
            copy_tree(&src, &dest.join(d))?;
        }
    }
    Ok(dest.to_path_buf())
}

fn copy_tree(src: &Path, dst: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dst)?;
    let mut entries: Vec<_> = std::fs::read_dir(src)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let ft = e.file_type()?;
        let to = dst.join(e.file_name());
        if ft.is_dir() {
            copy_tree(&e.path(), &to)?;
        } else if ft.is_symlink() {
            std::os::unix::fs::symlink(std::fs::read_link(e.path())?, &to)?;
        } else {
            std::fs::copy(e.path(), &to)?;
        }
    }
    Ok(())
}

/// One dictionary edit inside a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEdit {
    pub dict_file: String,
    pub key_path: KeyPath,
    pub value: FoamValue,
}

impl ParameterEdit {
    pub fn new(dict_file: impl Into<String>, key_path: KeyPath, value: FoamValue) -> Self {
        Self {
            dict_file: dict_file.into(),
            key_path,
            value,
        }
    }
}

/// Rejects absolute paths and `..` so edits stay inside the case.
pub fn check_case_relative(p: &str) -> Result<(), StudyError> {
    let path = Path::new(p);
    let ok = !p.is_empty() && path.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if ok {
        Ok(())
    } else {
        Err(StudyError::InvalidSpec(format!("dict_file '{p}' must be a path inside the case")))
    }
}

/// Field files take `uniform X` where a bare number is given for
/// `value`-like entries; everything else is written as given.
pub fn coerce_value(dict_file: &str, key_path: &KeyPath, value: FoamValue) -> FoamValue {
    let in_initial = dict_file.starts_with("0/");
    let valued = matches!(key_path.last(), "value" | "internalField" | "inletValue");
    match value {
        FoamValue::Number(n) if in_initial && valued => {
            FoamValue::Seq(vec![FoamValue::token("uniform"), FoamValue::Number(n)])
        }
        v => v,
    }
}

pub fn apply_edit(case: &Path, edit: &ParameterEdit) -> Result<PathBuf, StudyError> {
    check_case_relative(&edit.dict_file)?;
    let file = case.join(&edit.dict_file);
    let mut dict = read_dict(&file)?;
    let value = coerce_value(&edit.dict_file, &edit.key_path, edit.value.clone());
    set_path_in_place(&mut dict, &edit.key_path, value)?;
    write_dict(&file, &dict)?;
    Ok(file)
}
