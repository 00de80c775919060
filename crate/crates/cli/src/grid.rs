//! Sweep specifications and the grids they span.

use crate::config::{is_integer_key, Value, SWEEPABLE_KEYS};
use crate::error::{CliError, Result};

/// One swept parameter and its values in sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub values: Vec<Value>,
}

impl SweepSpec {
    /// Parses `NAME=START:STOP:STEP` (inclusive of `STOP` when it lies on
    /// the grid) or `NAME=V1,V2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let usage = |msg: String| CliError::Usage(format!("sweep `{spec}`: {msg}"));
        let (name, range) = spec
            .split_once('=')
            .ok_or_else(|| usage("expected NAME=START:STOP:STEP or NAME=V1,V2,...".into()))?;
        let name = name.trim();
        if !SWEEPABLE_KEYS.contains(&name) {
            return Err(usage(format!(
                "cannot sweep `{name}`; sweepable keys are {}",
                SWEEPABLE_KEYS.join(", ")
            )));
        }
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| usage(format!("`{}` is not a finite number", s.trim())))
        };
        let raw: Vec<f64> = if range.contains(':') {
            let parts: Vec<&str> = range.split(':').collect();
            if parts.len() != 3 {
                return Err(usage("expected START:STOP:STEP".into()));
            }
            let (start, stop, step) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
            if !(step > 0.0) {
                return Err(usage(format!("step must be positive, got {step}")));
            }
            if stop < start {
                return Err(usage(format!("stop {stop} is below start {start}")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // Snap to 12 decimals so 0.4 + 3 * 0.1 prints as 0.7.
            (0..count)
                .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        } else {
            range.split(',').map(number).collect::<Result<_>>()?
        };
        let values = if is_integer_key(name) {
            raw.iter()
                .map(|&x| {
                    let r = x.round();
                    if (x - r).abs() > 1e-9 || r < 0.0 {
                        Err(usage(format!("`{name}` takes nonnegative integers, got {x}")))
                    } else {
                        Ok(Value::Int(r as i64))
                    }
                })
                .collect::<Result<_>>()?
        } else {
            raw.into_iter().map(Value::Float).collect()
        };
        Ok(Self {
            name: name.to_string(),
            values,
        })
    }
}

/// Grid points in row order: the first spec varies slowest.
pub fn grid(specs: &[SweepSpec]) -> Vec<Vec<(&str, Value)>> {
    let mut points: Vec<Vec<(&str, Value)>> = vec![Vec::new()];
    for spec in specs {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                spec.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((spec.name.as_str(), v.clone()));
                    p
                })
            })
            .collect();
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floats(s: &SweepSpec) -> Vec<f64> {
        s.values
            .iter()
            .map(|v| match v {
                Value::Float(x) => *x,
                Value::Int(i) => *i as f64,
                Value::Str(_) => panic!(),
            })
            .collect()
    }

    #[test]
    fn ranges_include_stop() {
        let s = SweepSpec::parse("p=0.4:0.7:0.1").unwrap();
        let v = floats(&s);
        assert_eq!(v.len(), 4);
        assert_eq!(v[3], 0.7);
        let s = SweepSpec::parse("p=0.4:0.6875:0.0125").unwrap();
        assert_eq!(s.values.len(), 24);
        let s = SweepSpec::parse("b=50:250:10").unwrap();
        assert_eq!(s.values.first(), Some(&Value::Int(50)));
        assert_eq!(s.values.last(), Some(&Value::Int(250)));
    }

    #[test]
    fn lists() {
        let s = SweepSpec::parse("mu=1.85,2,2.5").unwrap();
        assert_eq!(floats(&s), vec![1.85, 2.0, 2.5]);
    }

    #[test]
    fn bad_specs() {
        for bad in [
            "p", "p=0.4:0.7", "p=0.4:0.7:0", "p=0.7:0.4:0.1", "p=a:b:c", "x=1:2:1", "epsilon=1:2:1", "b=1.5,2",
            "p=0:inf:1",
        ] {
            assert!(matches!(SweepSpec::parse(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn grid_is_row_major() {
        let a = SweepSpec::parse("mu=1,2").unwrap();
        let b = SweepSpec::parse("p=0.1,0.2,0.3").unwrap();
        let specs = [a, b];
        let g = grid(&specs);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![("mu", Value::Float(1.0)), ("p", Value::Float(0.1))]);
        assert_eq!(g[3], vec![("mu", Value::Float(2.0)), ("p", Value::Float(0.1))]);
        assert_eq!(grid(&[]).len(), 1);
    }
}
