use pyo3::prelude::*;

#[pymodule]
fn fdmc_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
