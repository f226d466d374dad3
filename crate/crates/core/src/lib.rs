pub mod app;
pub mod bench;
pub mod foamdict;
pub mod gateway;
pub mod literature;
pub mod llm;
pub mod orchestrator;
pub mod retrieval;
pub mod runmgr;
pub mod scenario;
pub mod skills;
pub mod study;
pub mod toolkit;
