//! Shared fixtures: a miniature path-utility migration from `os.path` to
//! `pathlib`, small enough to solve by hand and runnable with plain pytest.

#![allow(dead_code)]

use std::collections::BTreeSet;

use libshift::distill::{LibraryPair, LoadedTriple, TripleFile};
use libshift::sandbox::SandboxConfig;

pub const TOY_SOURCE: &str = "import os.path\n\n\ndef join_path(base, name):\n    return os.path.join(base, name)\n\n\ndef file_stem(path):\n    return os.path.splitext(os.path.basename(path))[0]\n";

pub const TOY_MIGRATED: &str = "from pathlib import Path\n\n\ndef join_path(base, name):\n    return str(Path(base) / name)\n\n\ndef file_stem(path):\n    return Path(path).stem\n";

pub const TOY_TESTS: &str = "from implementation import join_path, file_stem\n\n\ndef test_join_path():\n    joined = join_path(\"a\", \"b.txt\")\n    assert joined.endswith(\"b.txt\")\n    assert \"a\" in joined\n\n\ndef test_file_stem():\n    assert file_stem(\"/tmp/archive.tar\") == \"archive\"\n    assert file_stem(\"notes.txt\") == \"notes\"\n";

/// The known-good migration script for the toy task, in rule-file JSON.
pub const TOY_SCRIPT: &str = r#"{
  "rules": [
    {"name": "swap import", "match": "import os.path",
     "replace": "from pathlib import Path", "seed": true},
    {"name": "swap join", "match": "os.path.join(:[a+], :[b+])",
     "replace": "str(Path(:[a]) / :[b])"},
    {"name": "swap stem", "match": "os.path.splitext(os.path.basename(:[p+]))[0]",
     "replace": "Path(:[p]).stem"}
  ],
  "edges": [
    {"from": "swap import", "scope": "File", "to": "swap join"},
    {"from": "swap import", "scope": "File", "to": "swap stem"}
  ]
}"#;

pub fn toy_pair() -> LibraryPair {
    LibraryPair {
        source: "os.path".to_string(),
        target: "pathlib".to_string(),
        source_markers: ["os".to_string()].into_iter().collect(),
        target_markers: ["pathlib".to_string(), "Path".to_string()]
            .into_iter()
            .collect(),
    }
}

pub fn toy_markers() -> BTreeSet<String> {
    toy_pair().source_markers
}

pub fn toy_triple() -> LoadedTriple {
    LoadedTriple {
        meta: TripleFile {
            use_case: "uc-000".to_string(),
            impl_id: 0,
            test_id: 0,
            migration_id: 0,
            source: "impl-00.py".to_string(),
            tests: "impl-00.test-00.py".to_string(),
            migration: "impl-00.mig-00.py".to_string(),
            source_coverage: Some(1.0),
            migration_coverage: Some(1.0),
        },
        source_text: TOY_SOURCE.to_string(),
        tests_text: TOY_TESTS.to_string(),
        migration_text: TOY_MIGRATED.to_string(),
    }
}

/// Plain pytest without coverage collection; fast and dependency-free.
pub fn plain_pytest() -> SandboxConfig {
    SandboxConfig {
        runner: ["python3", "-m", "pytest", "{tests}", "-q"]
            .into_iter()
            .map(String::from)
            .collect(),
        ..SandboxConfig::default()
    }
}

/// Write a triple directory (impl/test/mig files plus pointer) and return
/// the pointer path.
pub fn write_toy_triple_dir(dir: &std::path::Path) -> std::path::PathBuf {
    let triple = toy_triple();
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join(&triple.meta.source), &triple.source_text).unwrap();
    std::fs::write(dir.join(&triple.meta.tests), &triple.tests_text).unwrap();
    std::fs::write(dir.join(&triple.meta.migration), &triple.migration_text).unwrap();
    let pointer = dir.join("triple-00.json");
    std::fs::write(&pointer, serde_json::to_string_pretty(&triple.meta).unwrap()).unwrap();
    pointer
}
