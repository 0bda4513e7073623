use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// `start:stop:points[,log|,lin]`; log spacing is the default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub const FIGURE2_DEFAULT: GridSpec = GridSpec {
        start: 0.5,
        stop: 1e6,
        points: 60,
        spacing: Spacing::Log,
    };

    /// Grid values; the endpoints are reproduced exactly.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = self.points - 1;
        (0..self.points)
            .map(|k| {
                if k == 0 {
                    return self.start;
                }
                if k == last {
                    return self.stop;
                }
                let s = k as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => self.start + s * (self.stop - self.start),
                    Spacing::Log => {
                        (self.start.ln() + s * (self.stop.ln() - self.start.ln())).exp()
                    }
                }
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| {
            CliError::Config(format!(
                "invalid grid '{s}': {why} (expected start:stop:points[,log|,lin])"
            ))
        };
        let (range, spacing) = match s.split_once(',') {
            None => (s, Spacing::Log),
            Some((r, "log")) => (r, Spacing::Log),
            Some((r, "lin")) => (r, Spacing::Linear),
            Some(_) => return Err(bad("unknown spacing")),
        };
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("need three ':'-separated fields"));
        }
        let start: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad("start is not a number"))?;
        let stop: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| bad("stop is not a number"))?;
        let points: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad("points is not a positive integer"))?;
        if points == 0 {
            return Err(bad("points must be >= 1"));
        }
        if !(start.is_finite() && stop.is_finite()) || start > stop {
            return Err(bad("need finite start <= stop"));
        }
        if spacing == Spacing::Log && start <= 0.0 {
            return Err(bad("log spacing needs start > 0"));
        }
        Ok(Self {
            start,
            stop,
            points,
            spacing,
        })
    }
}
