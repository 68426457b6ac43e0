use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar electrode positions on the unit disc (x to the right ear,
/// y to the nose).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Montage2D {
    pub names: Vec<String>,
    pub coords: Vec<(f64, f64)>,
}

// IV-2a records on a regular grid with equal inter-electrode spacing;
// one grid step is 0.3 here, centred on Cz.
const IV2A_LAYOUT: [(&str, f64, f64); 22] = [
    ("Fz", 0.0, 0.6),
    ("FC3", -0.6, 0.3),
    ("FC1", -0.3, 0.3),
    ("FCz", 0.0, 0.3),
    ("FC2", 0.3, 0.3),
    ("FC4", 0.6, 0.3),
    ("C5", -0.9, 0.0),
    ("C3", -0.6, 0.0),
    ("C1", -0.3, 0.0),
    ("Cz", 0.0, 0.0),
    ("C2", 0.3, 0.0),
    ("C4", 0.6, 0.0),
    ("C6", 0.9, 0.0),
    ("CP3", -0.6, -0.3),
    ("CP1", -0.3, -0.3),
    ("CPz", 0.0, -0.3),
    ("CP2", 0.3, -0.3),
    ("CP4", 0.6, -0.3),
    ("P1", -0.3, -0.6),
    ("Pz", 0.0, -0.6),
    ("P2", 0.3, -0.6),
    ("POz", 0.0, -0.9),
];

impl Montage2D {
    /// Channel order of the 22 EEG electrodes in BCI Competition IV-2a.
    pub const IV2A_CHANNELS: [&'static str; 22] = [
        "Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3",
        "CP1", "CPz", "CP2", "CP4", "P1", "Pz", "P2", "POz",
    ];

    pub fn iv2a() -> Self {
        Self {
            names: IV2A_LAYOUT.iter().map(|e| e.0.to_string()).collect(),
            coords: IV2A_LAYOUT.iter().map(|e| (e.1, e.2)).collect(),
        }
    }

    /// Looks up each channel in the built-in table (case-insensitive).
    pub fn for_channels(channel_names: &[String]) -> Result<Self> {
        let coords = channel_names
            .iter()
            .map(|name| {
                IV2A_LAYOUT
                    .iter()
                    .find(|e| e.0.eq_ignore_ascii_case(name))
                    .map(|e| (e.1, e.2))
                    .ok_or_else(|| Error::Unknown {
                        what: "electrode",
                        value: name.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let montage = Self {
            names: channel_names.to_vec(),
            coords,
        };
        montage.validate()?;
        Ok(montage)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.len() < 2 {
            return Err(Error::InvalidArgument("montage needs at least 2 electrodes".into()));
        }
        for (i, &(x, y)) in self.coords.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) || x * x + y * y > 1.0 + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "electrode {i} at ({x}, {y}) lies outside the unit disc"
                )));
            }
            for &(u, v) in &self.coords[..i] {
                if u == x && v == y {
                    return Err(Error::InvalidArgument(format!(
                        "electrode {i} duplicates the position ({x}, {y})"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_is_valid() {
        let m = Montage2D::iv2a();
        assert_eq!(m.len(), 22);
        m.validate().unwrap();
        for (n, c) in m.names.iter().zip(Montage2D::IV2A_CHANNELS) {
            assert_eq!(n, c);
        }
    }

    #[test]
    fn duplicates_rejected() {
        let m = Montage2D {
            names: vec!["a".into(), "b".into()],
            coords: vec![(0.1, 0.1), (0.1, 0.1)],
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn unknown_channel() {
        assert!(Montage2D::for_channels(&["Cz".into(), "T7".into()]).is_err());
    }
}
