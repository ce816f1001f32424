//! Multi-resolution attacker/defender games.
//!
//! Tactical engagements at each network vertex are extensive-form micro
//! games ([`game_tree`]); the strategic layer is a zero-sum Markov game over
//! the vertex graph ([`markov_game`]), solved by Shapley value iteration on
//! per-state matrix games ([`matrix_game`]). [`multires`] moves fidelity
//! between the two layers with zoom-in and zoom-out operators, and
//! [`scenario`] handles the file formats.

pub mod game_tree;
pub mod matrix_game;
pub mod markov_game;
pub mod multires;
pub mod scenario;
