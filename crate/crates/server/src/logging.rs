use std::io::Write;

use log::LevelFilter;

/// Installs a `key=value` line logger on standard error. `RUST_LOG` overrides
/// `level`.
pub fn init(level: LevelFilter) {
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format(|buf, r| {
            writeln!(
                buf,
                "ts={} level={} target={} {}",
                buf.timestamp_millis(),
                r.level().as_str().to_ascii_lowercase(),
                r.target(),
                r.args()
            )
        })
        .try_init();
}
