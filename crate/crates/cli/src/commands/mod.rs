pub mod cv;
pub mod dtw;
pub mod featsel;
pub mod glm;
pub mod gram;
pub mod metrics;
pub mod spca;
pub mod sweep;
pub mod synth;

use anyhow::{bail, Context};

/// A grid given as `a,b,c` or as an inclusive range `start:stop:step`.
pub fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| -> anyhow::Result<f64> {
        let v: f64 = s
            .parse()
            .with_context(|| format!("{s:?} in grid {spec:?} is not a number"))?;
        if !v.is_finite() {
            bail!("grid {spec:?} has a non-finite value");
        }
        Ok(v)
    };
    let grid = match parts.as_slice() {
        [_] => spec
            .split(',')
            .map(|s| num(s.trim()))
            .collect::<anyhow::Result<Vec<_>>>()?,
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                bail!("grid {spec:?} needs start <= stop and a positive step");
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| start + i as f64 * step).collect()
        }
        _ => bail!("grid {spec:?} must be a comma list or start:stop:step"),
    };
    if grid.is_empty() {
        bail!("grid {spec:?} is empty");
    }
    Ok(grid)
}

/// Like [`parse_grid`] for positive integers; `start:stop` steps by one.
pub fn parse_int_grid(spec: &str) -> anyhow::Result<Vec<usize>> {
    let spec = if spec.matches(':').count() == 1 {
        format!("{spec}:1")
    } else {
        spec.to_string()
    };
    parse_grid(&spec)?
        .into_iter()
        .map(|v| {
            if v.fract() != 0.0 || v < 1.0 {
                bail!("{v} is not a positive integer");
            }
            Ok(v as usize)
        })
        .collect()
}

/// CSV text for a header and rows of already formatted fields.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> anyhow::Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>())?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1, 0.5,1").unwrap(), vec![0.1, 0.5, 1.0]);
        assert_eq!(
            parse_grid("0:1:0.25").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(parse_int_grid("1:4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_int_grid("2,5").unwrap(), vec![2, 5]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_int_grid("0:2").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
