//! Replicated experiments: simulate, reduce every trace to its binned
//! estimates, and aggregate across replications.
//!
//! Traces are dropped as soon as they are reduced. In the overloaded regime a
//! single trace at `T = 10^4` holds on the order of 10^7 snapshot atoms.

use crate::analytic::AnalyticParams;
use crate::error::{EstimateError, SimError};
use crate::estimators::{
    estimate_density, estimate_sojourn, estimate_waiting, BinnedEstimate, EstimateTable,
    InfinityMode, Metric, ReplicatedEstimate,
};
use crate::simulator::{replications, SimConfig, SimTrace};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// Per-replication estimates of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub params: AnalyticParams,
    pub horizon: f64,
    pub seed: u64,
    pub density: Vec<BinnedEstimate>,
    /// Sojourn and waiting estimates in both censoring modes.
    pub sojourn_excluded: Vec<BinnedEstimate>,
    pub sojourn_included: Vec<BinnedEstimate>,
    pub waiting_excluded: Vec<BinnedEstimate>,
    pub waiting_included: Vec<BinnedEstimate>,
    pub customers: Vec<usize>,
}

impl ExperimentOutcome {
    pub fn replications(&self) -> usize {
        self.density.len()
    }

    pub fn per_replication(&self, metric: Metric, mode: InfinityMode) -> &[BinnedEstimate] {
        match (metric, mode) {
            (Metric::Density, _) => &self.density,
            (Metric::Sojourn, InfinityMode::Exclude) => &self.sojourn_excluded,
            (Metric::Sojourn, InfinityMode::Include) => &self.sojourn_included,
            (Metric::Waiting, InfinityMode::Exclude) => &self.waiting_excluded,
            (Metric::Waiting, InfinityMode::Include) => &self.waiting_included,
        }
    }

    pub fn replicated(&self, metric: Metric, mode: InfinityMode) -> ReplicatedEstimate {
        ReplicatedEstimate::aggregate(self.per_replication(metric, mode))
            .expect("an experiment has at least one replication")
    }

    pub fn table(&self, metric: Metric, mode: InfinityMode) -> EstimateTable {
        EstimateTable::from_replicated(metric, &self.replicated(metric, mode), &self.params)
    }
}

/// Runs `n` replications of `config`, handing every trace to `inspect`
/// before it is reduced and dropped.
pub fn run_experiment(
    config: &SimConfig,
    n: usize,
    mut inspect: impl FnMut(&SimTrace),
) -> Result<ExperimentOutcome, ExperimentError> {
    let params = AnalyticParams::new(config.rho)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let mut out = ExperimentOutcome {
        params,
        horizon: config.horizon,
        seed: config.seed,
        density: Vec::with_capacity(n),
        sojourn_excluded: Vec::with_capacity(n),
        sojourn_included: Vec::with_capacity(n),
        waiting_excluded: Vec::with_capacity(n),
        waiting_included: Vec::with_capacity(n),
        customers: Vec::with_capacity(n),
    };
    for trace in replications(config, n)? {
        let trace = trace?;
        inspect(&trace);
        out.density.push(estimate_density(&trace)?);
        out.sojourn_excluded.push(estimate_sojourn(&trace, InfinityMode::Exclude));
        out.sojourn_included.push(estimate_sojourn(&trace, InfinityMode::Include));
        out.waiting_excluded.push(estimate_waiting(&trace, InfinityMode::Exclude));
        out.waiting_included.push(estimate_waiting(&trace, InfinityMode::Include));
        out.customers.push(trace.customers.len());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_experiment_shapes() {
        let config = SimConfig::new(0.75, 300.0, 9);
        let mut seen = Vec::new();
        let out = run_experiment(&config, 3, |t| seen.push(t.seed)).unwrap();
        assert_eq!(seen, vec![9, 10, 11]);
        assert_eq!(out.replications(), 3);
        let table = out.table(Metric::Density, InfinityMode::Exclude);
        assert_eq!(table.rows.len(), 20);
        assert!(table.with_stderr);
    }

    #[test]
    fn zero_replications_rejected() {
        let config = SimConfig::new(0.75, 300.0, 9);
        assert!(matches!(
            run_experiment(&config, 0, |_| {}),
            Err(ExperimentError::Sim(SimError::NoReplications))
        ));
    }
}
