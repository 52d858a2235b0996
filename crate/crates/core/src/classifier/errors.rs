use ndarray::{Array2, ArrayView1, ArrayView2, Zip};

use crate::ded::DedModel;
use crate::error::{Result, VadError};
use crate::Real;

/// ℓ1 distance between a diffusion target and the encoder's output.
pub fn encoder_error<T: Real>(target: ArrayView1<T>, predicted: ArrayView1<T>) -> T {
    l1(target, predicted)
}

/// ℓ1 distance between an input feature row and its reconstruction.
pub fn decoder_error<T: Real>(input: ArrayView1<T>, reconstruction: ArrayView1<T>) -> T {
    l1(input, reconstruction)
}

fn l1<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    Zip::from(&a).and(&b).fold(T::zero(), |s, &x, &y| s + (x - y).abs())
}

/// Which errors form a coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorMode {
    /// `(e_de⁰, e_de¹)`
    Realtime,
    /// `(e_en⁰, e_de⁰, e_en¹, e_de¹)`
    Batch,
}

impl ErrorMode {
    pub fn dim(self) -> usize {
        match self {
            ErrorMode::Realtime => 2,
            ErrorMode::Batch => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorMode::Realtime => "realtime",
            ErrorMode::Batch => "batch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "realtime" => Some(ErrorMode::Realtime),
            "batch" => Some(ErrorMode::Batch),
            _ => None,
        }
    }
}

/// One frame's position in error space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorCoordinate<T> {
    Realtime([T; 2]),
    Batch([T; 4]),
}

impl<T: Real> ErrorCoordinate<T> {
    pub fn mode(&self) -> ErrorMode {
        match self {
            ErrorCoordinate::Realtime(_) => ErrorMode::Realtime,
            ErrorCoordinate::Batch(_) => ErrorMode::Batch,
        }
    }

    pub fn values(&self) -> &[T] {
        match self {
            ErrorCoordinate::Realtime(v) => v,
            ErrorCoordinate::Batch(v) => v,
        }
    }

    /// Decoder errors `(e_de⁰, e_de¹)` in either mode.
    pub fn decoder_errors(&self) -> [T; 2] {
        match *self {
            ErrorCoordinate::Realtime(v) => v,
            ErrorCoordinate::Batch(v) => [v[1], v[3]],
        }
    }

    pub fn from_slice(mode: ErrorMode, values: &[T]) -> Result<Self> {
        if values.len() != mode.dim() {
            return Err(VadError::Dimension(format!(
                "{} coordinate needs {} values, got {}",
                mode.as_str(),
                mode.dim(),
                values.len()
            )));
        }
        Ok(match mode {
            ErrorMode::Realtime => ErrorCoordinate::Realtime([values[0], values[1]]),
            ErrorMode::Batch => ErrorCoordinate::Batch([values[0], values[1], values[2], values[3]]),
        })
    }
}

/// Error coordinates of many frames, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap<T> {
    pub mode: ErrorMode,
    pub values: Array2<T>,
}

impl<T: Real> ErrorMap<T> {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn coordinate(&self, i: usize) -> ErrorCoordinate<T> {
        let row = self.values.row(i);
        ErrorCoordinate::from_slice(self.mode, row.as_slice().expect("standard layout")).expect("row width matches mode")
    }

    /// Decoder-error columns only.
    pub fn to_realtime(&self) -> ErrorMap<T> {
        match self.mode {
            ErrorMode::Realtime => self.clone(),
            ErrorMode::Batch => ErrorMap {
                mode: ErrorMode::Realtime,
                values: self.values.select(ndarray::Axis(1), &[1, 3]),
            },
        }
    }
}

fn row_errors<T: Real>(model: &DedModel<T>, features: ArrayView2<T>, targets: Option<ArrayView2<T>>) -> Result<(Vec<T>, Vec<T>)> {
    let (mapped, recon) = model.forward_batch(features)?;
    let de = features
        .rows()
        .into_iter()
        .zip(recon.rows())
        .map(|(x, a)| decoder_error(x, a))
        .collect();
    let en = match targets {
        Some(t) => t.rows().into_iter().zip(mapped.rows()).map(|(t, m)| encoder_error(t, m)).collect(),
        None => Vec::new(),
    };
    Ok((en, de))
}

/// Propagates every row through both networks and collects the errors.
///
/// Batch mode needs the rows' diffusion targets for the encoder errors, one
/// matrix per network (the same view may be passed twice).
pub fn build_error_map<'a, T: Real>(
    features: ArrayView2<T>,
    ded0: &DedModel<T>,
    ded1: &DedModel<T>,
    mode: ErrorMode,
    targets: Option<(ArrayView2<'a, T>, ArrayView2<'a, T>)>,
) -> Result<ErrorMap<T>> {
    for m in [ded0, ded1] {
        let arch = m.architecture();
        if features.ncols() != arch.input {
            return Err(VadError::Dimension(format!(
                "features are {}-dim, model expects {}",
                features.ncols(),
                arch.input
            )));
        }
    }
    let targets = match (mode, targets) {
        (ErrorMode::Realtime, _) => None,
        (ErrorMode::Batch, None) => {
            return Err(VadError::InsufficientData("batch error map needs diffusion targets".into()))
        }
        (ErrorMode::Batch, Some((t0, t1))) => {
            for t in [t0, t1] {
                if t.nrows() != features.nrows() || t.ncols() != ded0.architecture().bottleneck {
                    return Err(VadError::Dimension(format!(
                        "targets {:?} do not match {} feature rows",
                        t.dim(),
                        features.nrows()
                    )));
                }
            }
            Some((t0, t1))
        }
    };
    let (r0, r1) = rayon::join(
        || row_errors(ded0, features, targets.map(|t| t.0)),
        || row_errors(ded1, features, targets.map(|t| t.1)),
    );
    let ((en0, de0), (en1, de1)) = (r0?, r1?);
    let n = features.nrows();
    let values = match mode {
        ErrorMode::Realtime => Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { de0[i] } else { de1[i] }),
        ErrorMode::Batch => Array2::from_shape_fn((n, 4), |(i, j)| match j {
            0 => en0[i],
            1 => de0[i],
            2 => en1[i],
            _ => de1[i],
        }),
    };
    Ok(ErrorMap { mode, values })
}
