use super::eadf::{compute_eadf, Eadf, ElementResponse, ResponseWithGradient, Truncation};
use super::geometry::{ArrayGeometry, SPEED_OF_LIGHT};
use super::pattern::{synth_array, ElementModel};
use crate::error::Result;
use crate::num::Real;

/// Transmit and receive manifolds evaluated at one calibration frequency.
#[derive(Debug, Clone)]
pub struct LinkManifolds<T: Real> {
    pub tx: Eadf<T>,
    pub rx: Eadf<T>,
    pub carrier_hz: f64,
    tx_freq: usize,
    rx_freq: usize,
}

impl<T: Real> LinkManifolds<T> {
    pub fn new(tx: Eadf<T>, rx: Eadf<T>, carrier_hz: f64) -> Result<Self> {
        let tx_freq = tx.frequency_index(carrier_hz)?;
        let rx_freq = rx.frequency_index(carrier_hz)?;
        Ok(LinkManifolds { tx, rx, carrier_hz, tx_freq, rx_freq })
    }

    /// Small symmetric setup: identical `rows × cols` UPAs (half-wavelength
    /// spacing, patch elements) at both ends.
    pub fn desk(carrier_hz: f64, rows: usize, cols: usize, dual_pol: bool, truncation: Truncation) -> Result<Self> {
        let geo = ArrayGeometry::upa(rows, cols, 0.5 * SPEED_OF_LIGHT / carrier_hz, dual_pol);
        let grid = synth_array::<T>(&ElementModel::reference_patch(), &geo, carrier_hz)?;
        let e = compute_eadf(&grid, truncation)?;
        Self::new(e.clone(), e, carrier_hz)
    }

    pub fn n_tx(&self) -> usize {
        self.tx.n_elements
    }

    pub fn n_rx(&self) -> usize {
        self.rx.n_elements
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn tx_response(&self, az: f64, el: f64) -> Result<Vec<ElementResponse<T>>> {
        self.tx.response_at(self.tx_freq, az, el)
    }

    pub fn rx_response(&self, az: f64, el: f64) -> Result<Vec<ElementResponse<T>>> {
        self.rx.response_at(self.rx_freq, az, el)
    }

    pub fn tx_gradient(&self, az: f64, el: f64) -> Result<ResponseWithGradient<T>> {
        self.tx.response_with_gradient(self.tx_freq, az, el)
    }

    pub fn rx_gradient(&self, az: f64, el: f64) -> Result<ResponseWithGradient<T>> {
        self.rx.response_with_gradient(self.rx_freq, az, el)
    }

    pub fn tx_grid(&self, az: &[f64], el: &[f64]) -> Result<Vec<ElementResponse<T>>> {
        self.tx.response_grid(self.tx_freq, az, el)
    }

    pub fn rx_grid(&self, az: &[f64], el: &[f64]) -> Result<Vec<ElementResponse<T>>> {
        self.rx.response_grid(self.rx_freq, az, el)
    }
}
