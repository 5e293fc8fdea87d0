pub mod audit;
pub mod bottom_up;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod gateway;
pub mod io;
pub mod pipeline;
pub mod relevance;
pub mod synth;
pub mod text;
pub mod top_down;
