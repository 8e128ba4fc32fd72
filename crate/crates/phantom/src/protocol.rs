//! Acquisition protocols recast as simulation settings.

/// vFA spoiled gradient echo or multi-echo spin echo.
#[derive(Debug, Clone, PartialEq)]
pub enum AcquisitionProtocol {
    VfaSpgr {
        tr_ms: f64,
        te_ms: f64,
        flip_deg: Vec<f64>,
    },
    Mese {
        tr_ms: f64,
        te1_ms: f64,
        delta_te_ms: f64,
        n_echoes: usize,
    },
}

impl AcquisitionProtocol {
    /// TR/TE = 40/12 ms, flip angles {5, 10, 15, 20, 30, 40} degrees.
    pub fn vfa_default() -> Self {
        AcquisitionProtocol::VfaSpgr {
            tr_ms: 40.0,
            te_ms: 12.0,
            flip_deg: vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0],
        }
    }

    /// TR = 3110 ms, 15 echoes, TE1 = dTE = 11.5 ms.
    pub fn mese_default() -> Self {
        AcquisitionProtocol::Mese {
            tr_ms: 3110.0,
            te1_ms: 11.5,
            delta_te_ms: 11.5,
            n_echoes: 15,
        }
    }

    pub fn n_frames(&self) -> usize {
        match self {
            AcquisitionProtocol::VfaSpgr { flip_deg, .. } => flip_deg.len(),
            AcquisitionProtocol::Mese { n_echoes, .. } => *n_echoes,
        }
    }

    /// Echo times of a MESE protocol, ms.
    pub fn echo_times(&self) -> Option<Vec<f64>> {
        match self {
            AcquisitionProtocol::Mese {
                te1_ms,
                delta_te_ms,
                n_echoes,
                ..
            } => Some(
                (0..*n_echoes)
                    .map(|k| te1_ms + k as f64 * delta_te_ms)
                    .collect(),
            ),
            _ => None,
        }
    }
}
