pub mod kernel;
pub mod net;
pub mod openflow;
pub mod switch;
pub mod monitoring;
pub mod controller;
pub mod asl;
pub mod attack;
pub mod scenario;
pub mod sim;
pub mod experiment;
