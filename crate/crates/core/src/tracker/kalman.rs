//! Constant-velocity Kalman filter in image space.
//!
//! State is `(u, v, gamma, h, du, dv, dgamma, dh)` where `(u, v)` is the box
//! center, `gamma = w / h` the aspect ratio and `h` the box height; velocities
//! are per frame. Process and measurement noise scale with the current box
//! height, as in the reference DeepSort filter.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

pub type StateVector<T> = SVector<T, 8>;
pub type StateMatrix<T> = SMatrix<T, 8, 8>;
pub type Measurement<T> = SVector<T, 4>;
pub type MeasurementMatrix<T> = SMatrix<T, 4, 4>;

/// Chi-square 0.95 quantile with 4 degrees of freedom.
pub const CHI2_95_4DOF: f64 = 9.4877;

const ASPECT_POSITION_STD: f64 = 1e-2;
const ASPECT_VELOCITY_STD: f64 = 1e-5;
const ASPECT_MEASUREMENT_STD: f64 = 1e-1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanParams<T: Real> {
    pub std_weight_position: T,
    pub std_weight_velocity: T,
    /// Multiplies the process noise covariance.
    pub process_noise_scale: T,
    /// Multiplies the measurement noise covariance.
    pub measurement_noise_scale: T,
}

impl<T: Real> Default for KalmanParams<T> {
    fn default() -> Self {
        Self {
            std_weight_position: T::lit(1.0 / 20.0),
            std_weight_velocity: T::lit(1.0 / 160.0),
            process_noise_scale: T::one(),
            measurement_noise_scale: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState<T: Real> {
    pub mean: StateVector<T>,
    pub covariance: StateMatrix<T>,
}

impl<T: Real> KalmanState<T> {
    pub fn measurement(&self) -> Measurement<T> {
        self.mean.fixed_rows::<4>(0).into_owned()
    }
}

fn transition<T: Real>() -> StateMatrix<T> {
    let mut f = StateMatrix::<T>::identity();
    for i in 0..4 {
        f[(i, i + 4)] = T::one();
    }
    f
}

fn symmetrize<T: Real>(m: &StateMatrix<T>) -> StateMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Starts a track at `z` with zero velocity and height-scaled uncertainty.
pub fn initiate<T: Real>(z: &Measurement<T>, params: &KalmanParams<T>) -> KalmanState<T> {
    let h = z[3];
    let two = T::lit(2.0);
    let ten = T::lit(10.0);
    let pos = params.std_weight_position * h;
    let vel = params.std_weight_velocity * h;
    let std = [
        two * pos,
        two * pos,
        T::lit(ASPECT_POSITION_STD),
        two * pos,
        ten * vel,
        ten * vel,
        T::lit(ASPECT_VELOCITY_STD),
        ten * vel,
    ];
    let mut mean = StateVector::<T>::zeros();
    mean.fixed_rows_mut::<4>(0).copy_from(z);
    KalmanState {
        mean,
        covariance: StateMatrix::from_diagonal(&StateVector::from_iterator(std.iter().map(|s| *s * *s))),
    }
}

/// Propagates the state one frame ahead.
pub fn kf_predict<T: Real>(state: &KalmanState<T>, params: &KalmanParams<T>) -> KalmanState<T> {
    let h = state.mean[3];
    let pos = params.std_weight_position * h;
    let vel = params.std_weight_velocity * h;
    let std = [
        pos,
        pos,
        T::lit(ASPECT_POSITION_STD),
        pos,
        vel,
        vel,
        T::lit(ASPECT_VELOCITY_STD),
        vel,
    ];
    let q = StateMatrix::from_diagonal(&StateVector::from_iterator(
        std.iter().map(|s| *s * *s * params.process_noise_scale),
    ));
    let f = transition::<T>();
    KalmanState {
        mean: f * state.mean,
        covariance: symmetrize(&(f * state.covariance * f.transpose() + q)),
    }
}

/// Predicted measurement mean and innovation covariance `H P H^T + R`.
pub fn project<T: Real>(state: &KalmanState<T>, params: &KalmanParams<T>) -> (Measurement<T>, MeasurementMatrix<T>) {
    let h = state.mean[3];
    let pos = params.std_weight_position * h;
    let std = [pos, pos, T::lit(ASPECT_MEASUREMENT_STD), pos];
    let r = MeasurementMatrix::from_diagonal(&Measurement::from_iterator(
        std.iter().map(|s| *s * *s * params.measurement_noise_scale),
    ));
    let cov = state.covariance.fixed_view::<4, 4>(0, 0).into_owned() + r;
    (state.measurement(), cov)
}

/// `(z - mean)^T cov^-1 (z - mean)` via a Cholesky solve.
pub fn squared_mahalanobis<T: Real>(
    mean: &Measurement<T>,
    cov: &MeasurementMatrix<T>,
    z: &Measurement<T>,
) -> Result<T> {
    let chol = cov.cholesky().ok_or(Error::DegenerateCovariance)?;
    let d = z - mean;
    Ok(d.dot(&chol.solve(&d)))
}

/// Mahalanobis gate against `threshold`; returns `(passes, squared distance)`.
pub fn gate<T: Real>(
    state: &KalmanState<T>,
    z: &Measurement<T>,
    params: &KalmanParams<T>,
    threshold: T,
) -> Result<(bool, T)> {
    let (mean, cov) = project(state, params);
    let d2 = squared_mahalanobis(&mean, &cov, z)?;
    Ok((d2 <= threshold, d2))
}

/// Standard Kalman correction with the Joseph-form covariance update.
pub fn kf_update<T: Real>(
    state: &KalmanState<T>,
    z: &Measurement<T>,
    params: &KalmanParams<T>,
) -> Result<KalmanState<T>> {
    let (predicted, s) = project(state, params);
    let r = s - state.covariance.fixed_view::<4, 4>(0, 0);
    let chol = s.cholesky().ok_or(Error::DegenerateCovariance)?;
    // K = P H^T S^-1, with H = [I 0].
    let pht: SMatrix<T, 8, 4> = state.covariance.fixed_view::<8, 4>(0, 0).into_owned();
    let gain: SMatrix<T, 8, 4> = chol.solve(&pht.transpose()).transpose();
    let innovation = z - predicted;
    let mean = state.mean + gain * innovation;

    let mut kh = StateMatrix::<T>::zeros();
    kh.fixed_view_mut::<8, 4>(0, 0).copy_from(&gain);
    let i_kh = StateMatrix::<T>::identity() - kh;
    let covariance = i_kh * state.covariance * i_kh.transpose() + gain * r * gain.transpose();
    Ok(KalmanState {
        mean,
        covariance: symmetrize(&covariance),
    })
}
