#![no_main]

use libfuzzer_sys::fuzz_target;
use satsync::io::read_trajectory_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_trajectory_csv(data) {
        for r in rows {
            assert_eq!(r.x1.len(), r.x2.len());
            assert_eq!(r.u.len(), r.sigma_u.len());
        }
    }
});
