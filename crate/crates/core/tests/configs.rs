use std::path::Path;

use shallow_shell::harness::StudyConfig;

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = StudyConfig::from_file(&path).unwrap();
            cfg.validate().unwrap();
            assert_eq!(StudyConfig::parse(&cfg.echo()).unwrap(), cfg);
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
