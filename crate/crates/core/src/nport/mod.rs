//! Generic N-port channel: multiset sectors, their eigenbases and Gamma matrices.

pub mod arrangement;
pub mod channel;
pub mod gamma;
pub mod multiset;
pub mod sector;
pub mod state;
pub mod three_port;

pub use arrangement::{arrangement_count, Arrangements, Slot};
pub use channel::{apply_number_element_nport, cap_tail_bound, default_cap, ChannelOutput, NportChannel, TailReport};
pub use gamma::{gamma, gamma_direct, gamma_printed, GammaMatrix};
pub use multiset::{enumerate_multisets, multiset_count, Multiset};
pub use sector::{eta_basis, sector_matrix, SectorBasis};
pub use state::{apply_state_nport, apply_state_with, channel_for, max_entangled_ket, NumberElementChannel, StateOutput, TwoPortChannel};
pub use three_port::{three_port_apply_number_element, ThreePortChannel};
