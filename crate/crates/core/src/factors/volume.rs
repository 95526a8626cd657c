//! Volume level and dispersion factors.

use super::rolling::{self, ratio, Inputs};
use super::Family;

pub(super) fn compute(inputs: &Inputs, family: Family, w: usize) -> Vec<f64> {
    let volume = &inputs.volume;
    match family {
        Family::Vma => rolling::rolling(volume, w, rolling::mean)
            .iter()
            .zip(volume)
            .map(|(m, v)| ratio(*m, *v))
            .collect(),
        Family::Logvol => volume.iter().map(|v| v.ln_1p()).collect(),
        Family::Wvma => {
            let weighted: Vec<f64> = inputs.ret.iter().zip(volume).map(|(r, v)| r.abs() * v).collect();
            rolling::rolling(&weighted, w, |win| ratio(rolling::sample_std(win), rolling::mean(win)))
        }
        _ => unreachable!("not a volume family: {family}"),
    }
}

#[cfg(test)]
mod tests {
    use crate::factors::parse_factor_name;
    use crate::marketdata::{Bar, Day, OhlcvSeries};

    fn series(volumes: &[f64]) -> OhlcvSeries {
        OhlcvSeries::new(
            "T",
            volumes
                .iter()
                .enumerate()
                .map(|(i, &v)| Bar {
                    timestamp: Day(i as i64),
                    open: 10.0 + i as f64,
                    high: 11.0 + i as f64,
                    low: 9.0 + i as f64,
                    close: 10.0 + i as f64,
                    volume: v,
                })
                .collect(),
        )
    }

    #[test]
    fn constant_volume() {
        let s = series(&[250.0; 8]);
        let vma = parse_factor_name("vma_3").unwrap().compute(&s);
        assert!(vma[2..].iter().all(|v| *v == 1.0));
        let logvol = parse_factor_name("logvol").unwrap().compute(&s);
        assert!(logvol.iter().all(|v| *v == 251f64.ln()));
    }

    #[test]
    fn zero_current_volume() {
        let s = series(&[5.0, 6.0, 7.0, 0.0]);
        let vma = parse_factor_name("vma_2").unwrap().compute(&s);
        assert!(vma[3].is_nan());
        assert!(!vma[2].is_nan());
    }
}
