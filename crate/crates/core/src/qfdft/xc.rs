//! Exchange-correlation plug-ins, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{QfdError, Result};

/// Maps a density (and time) to a potential on the same nodes.
pub trait XcFunctional: Send + Sync {
    fn name(&self) -> &str;

    fn potential(&self, rho: &[f64], t: f64, out: &mut [f64]);

    fn is_time_dependent(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoXc;

impl XcFunctional for NoXc {
    fn name(&self) -> &str {
        "none"
    }

    fn potential(&self, _rho: &[f64], _t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Local exchange v_x = −(3ρ/π)^{1/3}.
#[derive(Clone, Copy, Debug, Default)]
pub struct LdaExchange1d;

impl XcFunctional for LdaExchange1d {
    fn name(&self) -> &str {
        "lda_x_1d"
    }

    fn potential(&self, rho: &[f64], _t: f64, out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(rho) {
            *o = -(3.0 * r.max(0.0) / std::f64::consts::PI).cbrt();
        }
    }
}

#[derive(Clone)]
pub struct XcRegistry {
    entries: BTreeMap<String, Arc<dyn XcFunctional>>,
}

impl XcRegistry {
    /// `none` and `lda_x_1d`.
    pub fn builtin() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Arc::new(NoXc));
        r.register(Arc::new(LdaExchange1d));
        r
    }

    pub fn register(&mut self, f: Arc<dyn XcFunctional>) {
        self.entries.insert(f.name().to_string(), f);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn XcFunctional>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| QfdError::UnknownXc(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl Default for XcRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
