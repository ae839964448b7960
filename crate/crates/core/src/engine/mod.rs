//! Federated training: logistic-regression clients, the FedAvg server and
//! the WassFFed round protocol.

mod model;
mod protocol;
mod rng;
mod server;
mod train;

pub use model::{forward, ModelParams, SCORE_MARGIN};
pub use protocol::{
    client_report, evaluate, local_train_combined, local_train_utility, run_fedavg, run_wassffed,
    ClientState, Evaluation, ProtocolSettings, RoundRecord, RunOutput,
};
pub use rng::{derive_seed, stream_rng, Stream};
pub use server::{
    fedavg_aggregate, server_aggregate_distributions, Broadcast, GroupCounts, ServerState,
};
pub use train::{combined_loss_and_gradient, train_local, utility_loss, TrainOptions};
