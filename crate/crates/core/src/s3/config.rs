use crate::transport::{TransportLimits, MIN_BUFFER_SIZE};

use super::ConfigError;

/// Total message-buffer SRAM shared by all stages.
pub const DEFAULT_TOTAL_BUFFER_BYTES: usize = 24 * 1024;
/// Upper bound on a revised session timeout.
pub const MAX_SESSION_TIMEOUT_MS: f64 = 3_600_000.0;

/// Design-time configuration of the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub num_stages: usize,
    pub buffer_bytes_per_stage: usize,
    pub total_buffer_bytes: usize,
    pub max_chunk_count: u32,
    /// Multi-chunk requests and responses. Off means one chunk per message.
    pub fragmentation: bool,
    /// More than one concurrent session. Off limits the engine to one stage.
    pub multi_session: bool,
    pub max_session_timeout_ms: f64,
    /// VM cycle budget per service call.
    pub cycle_budget: u64,
    /// Seed for session tokens and nonces; `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            num_stages: 3,
            buffer_bytes_per_stage: 8192,
            total_buffer_bytes: DEFAULT_TOTAL_BUFFER_BYTES,
            max_chunk_count: 4,
            fragmentation: true,
            multi_session: true,
            max_session_timeout_ms: MAX_SESSION_TIMEOUT_MS,
            cycle_budget: 1_000_000,
            seed: Some(0x5eed),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_stages == 0 {
            return Err(ConfigError::NoStages);
        }
        if self.buffer_bytes_per_stage < MIN_BUFFER_SIZE as usize
            || self.buffer_bytes_per_stage > u32::MAX as usize
        {
            return Err(ConfigError::BufferTooSmall(self.buffer_bytes_per_stage));
        }
        let need = self.num_stages.saturating_mul(self.buffer_bytes_per_stage);
        if need > self.total_buffer_bytes {
            return Err(ConfigError::BufferBudget {
                need,
                total: self.total_buffer_bytes,
            });
        }
        if self.max_session_timeout_ms.is_nan() || self.max_session_timeout_ms <= 0.0 {
            return Err(ConfigError::Invalid(
                "max_session_timeout_ms must be positive",
            ));
        }
        if self.cycle_budget == 0 {
            return Err(ConfigError::Invalid("cycle_budget must be positive"));
        }
        Ok(())
    }

    /// Stages that may hold a session at once.
    pub fn session_slots(&self) -> usize {
        if self.multi_session {
            self.num_stages
        } else {
            1
        }
    }

    /// Transport capabilities implied by the stage buffers.
    pub fn transport_limits(&self) -> TransportLimits {
        let buf = self.buffer_bytes_per_stage as u32;
        TransportLimits {
            receive_buffer_size: buf,
            send_buffer_size: buf,
            max_message_size: buf,
            max_chunk_count: if self.fragmentation {
                self.max_chunk_count
            } else {
                1
            },
            ..TransportLimits::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_fits_budget() {
        let c = EngineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.num_stages * c.buffer_bytes_per_stage, 24576);
    }

    #[test]
    fn rejects_over_budget() {
        let c = EngineConfig {
            num_stages: 4,
            ..EngineConfig::default()
        };
        assert!(matches!(
            c.validate(),
            Err(ConfigError::BufferBudget { .. })
        ));
        let c = EngineConfig {
            num_stages: 0,
            ..EngineConfig::default()
        };
        assert_eq!(c.validate(), Err(ConfigError::NoStages));
    }

    #[test]
    fn flags_shape_limits() {
        let c = EngineConfig {
            fragmentation: false,
            multi_session: false,
            ..EngineConfig::default()
        };
        assert_eq!(c.transport_limits().max_chunk_count, 1);
        assert_eq!(c.session_slots(), 1);
    }
}
