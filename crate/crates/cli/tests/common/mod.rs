//! Helpers shared by the CLI integration tests: invoking the real binary
//! and fingerprinting output directories.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

/// Runs the `brw` binary with the given arguments from `dir`.
pub fn brw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brw"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn brw")
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

pub fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Full byte content of every regular file in `dir` (recursive), keyed by
/// its path relative to `dir`. Comparing two of these maps checks both the
/// file set and every byte.
pub fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    collect(dir, dir, &mut map);
    map
}

fn collect(root: &Path, dir: &Path, map: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).expect("read dir") {
        let path = entry.expect("dir entry").path();
        if path.is_dir() {
            collect(root, &path, map);
        } else {
            let name = path
                .strip_prefix(root)
                .expect("relative path")
                .to_string_lossy()
                .replace('\\', "/");
            map.insert(name, std::fs::read(&path).expect("read file"));
        }
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).expect("write file");
}
