#![no_main]

use libfuzzer_sys::fuzz_target;
use satsync::io::ConfigFile;

fuzz_target!(|data: &[u8]| {
    let Ok(file) = ConfigFile::parse(data) else { return };
    let Ok(cfg) = file.resolve() else { return };
    // anything that resolves must survive a round trip unchanged
    let again = ConfigFile::parse(ConfigFile::from_config(&cfg).to_json().as_bytes()).expect("echo parses");
    assert_eq!(again.resolve().expect("echo resolves"), cfg);
});
