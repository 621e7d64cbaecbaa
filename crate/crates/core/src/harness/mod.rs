//! Experiment configuration, Monte Carlo orchestration and result artifacts.

mod config;
mod congruence;
mod experiment;
mod output;

pub use config::{
    dbm_to_watts, CommSection, CongruenceSection, CorrectionSection, ExperimentConfig, MetricSection, RadarSection,
    Receiver, RunSection, StrategySection,
};
pub use congruence::{congruence_drop, mean_by, run_congruence, CongruenceRow};
pub use experiment::{
    drop_seed, prepare_drop, rate_params, run_experiment, simulate_drop, Codebooks, DropDiagnostics, DropState,
    ResultRow, RunReport, Strategy, MAX_ABORTED_FRACTION,
};
pub use output::{
    congruence_to_csv, emit_csv, emit_plot, emit_similarity_plot, parse_congruence_csv, parse_csv, rate_plot_svg,
    rows_to_csv, similarity_plot_svg, CONGRUENCE_HEADER, CSV_HEADER,
};
