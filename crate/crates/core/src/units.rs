//! Decibel conversions used at the configuration and report boundary.

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((dbm_to_watt(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watt(-132.0) - 6.309573444801929e-17).abs() < 1e-28);
        for v in [-132.0, 0.0, 5.0, 20.0] {
            assert!((watt_to_dbm(dbm_to_watt(v)) - v).abs() < 1e-12);
            assert!((linear_to_db(db_to_linear(v)) - v).abs() < 1e-12);
        }
    }
}
