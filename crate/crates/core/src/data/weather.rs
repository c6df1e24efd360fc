use super::DataError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeatherKind {
    /// Cloud ceiling in hundreds of feet, domain [0, 100].
    Ceiling,
    /// Visibility in statute miles, domain [0, 10].
    Visibility,
}

impl WeatherKind {
    /// Upper edges of bins 1..=4. The first bin is closed on both ends, the
    /// rest are (lo, hi].
    fn edges(self) -> [f64; 4] {
        match self {
            WeatherKind::Ceiling => [5.0, 10.0, 30.0, 100.0],
            WeatherKind::Visibility => [1.0, 3.0, 5.0, 10.0],
        }
    }
}

/// Maps a raw weather reading to its bin index in 1..=4.
pub fn discretize_weather(kind: WeatherKind, value: f64) -> Result<u8, DataError> {
    let edges = kind.edges();
    if !(0.0..=edges[3]).contains(&value) {
        return Err(DataError::Range { kind, value });
    }
    let bin = edges.iter().position(|&hi| value <= hi).unwrap_or(3);
    Ok(bin as u8 + 1)
}
