use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("point cloud is empty")]
    Empty,
    #[error("{positions} positions but {colors} colors")]
    LengthMismatch { positions: usize, colors: usize },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("point {index} has color channel {value} outside [0, 1]")]
    ColorRange { index: usize, value: f32 },
}

/// Colored point cloud in the capture camera's frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    positions: Vec<[f64; 3]>,
    colors: Vec<[f32; 3]>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>, colors: Vec<[f32; 3]>) -> Result<Self, CloudError> {
        if positions.len() != colors.len() {
            return Err(CloudError::LengthMismatch {
                positions: positions.len(),
                colors: colors.len(),
            });
        }
        if positions.is_empty() {
            return Err(CloudError::Empty);
        }
        if let Some(i) = positions
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(CloudError::NonFinite(i));
        }
        for (index, c) in colors.iter().enumerate() {
            if let Some(&value) = c.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CloudError::ColorRange { index, value });
            }
        }
        Ok(Self { positions, colors })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn colors(&self) -> &[[f32; 3]] {
        &self.colors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_construction() {
        assert_eq!(PointCloud::new(vec![], vec![]), Err(CloudError::Empty));
        assert_eq!(
            PointCloud::new(vec![[0.0; 3]], vec![]),
            Err(CloudError::LengthMismatch { positions: 1, colors: 0 })
        );
        assert_eq!(
            PointCloud::new(vec![[0.0, f64::NAN, 0.0]], vec![[0.0; 3]]),
            Err(CloudError::NonFinite(0))
        );
        assert!(PointCloud::new(vec![[0.0; 3]], vec![[0.5; 3]]).is_ok());
    }
}
