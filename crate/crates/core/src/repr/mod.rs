//! State representation: the pixel encoder φ, the inverse dynamics model
//! f(φ(o_t), φ(o_{t+1})) ≈ a_t, the periodically synchronised target encoder
//! used for reward generation, and input-gradient saliency maps.

mod encoder;
mod inverse;
mod saliency;

pub use encoder::{encode_traj, EmbeddingSequence, Encoder, TargetEncoder, Which};
pub use inverse::{inverse_dynamics_loss, inverse_loss_from_embeddings, InverseModel, Transition};
pub use saliency::saliency;
