//! Data-parallel pattern pipelines (map, reduce, filter, window, group and
//! their combinations) executed on a simulated near-memory device with many
//! small cores, each owning a DRAM bank and a scratchpad.
//!
//! A [`Pipeline`] lists stages over host buffers. Executing it plans the
//! memory layout, distributes the inputs across DPUs in rounds, runs every
//! stage on every DPU, processes the tail on the host and gathers, compacts
//! and combines the fetched results. Results are bit-identical to the host
//! composition of the same stages.
//!
//! ```
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! use pimflow::{ArgSpec, CostModel, Device, DeviceConfig, HostBuffers, KernelSpec, Pipeline, StageSpec};
//!
//! let a: Vec<u32> = (1..=8).collect();
//! let mut bufs = HostBuffers::new();
//! let x = bufs.insert(&a);
//! let y = bufs.insert(&a);
//! let prod = bufs.declare::<u32>();
//! let sum = bufs.declare::<u32>();
//!
//! let mut p = Pipeline::new(a.len());
//! p.add_stage(StageSpec::map(
//!     KernelSpec::new("mul", |k| {
//!         let v = k.get::<u32>(0).wrapping_mul(k.get::<u32>(1));
//!         k.set(2, v);
//!     }),
//!     vec![ArgSpec::input::<u32>(x), ArgSpec::input::<u32>(y), ArgSpec::output::<u32>(prod)],
//! ))?;
//! p.add_stage(StageSpec::reduce(
//!     KernelSpec::new("sum", |k| {
//!         let v = k.get::<u32>(0).wrapping_add(k.get::<u32>(1));
//!         k.set(0, v);
//!     }),
//!     vec![ArgSpec::reduce_out::<u32>(sum, 1), ArgSpec::input::<u32>(prod)],
//! ))?;
//! p.fetch(sum)?;
//!
//! let mut dev = Device::new(DeviceConfig::default(), CostModel::default())?;
//! let report = p.execute(&mut dev, &mut bufs)?;
//! assert_eq!(bufs.read::<u32>(sum).unwrap(), [204]);
//! println!("{:.0} ns modeled", report.timing.total_ns());
//! # Ok(())
//! # }
//! ```

pub mod buffers;
pub mod codegen;
pub mod hostrt;
pub mod patterns;
pub mod pipeline;
pub mod planner;
pub mod simdev;
pub mod workloads;

pub use buffers::{BufferId, HostBuffers};
pub use codegen::{emit_program_text, parse_program_text, DeviceProgram};
pub use hostrt::{ExecReport, Timing};
pub use patterns::{ArgRole, ArgSpec, Args, ElemType, Element, KernelSpec, PatternError, PatternKind};
pub use pipeline::{Pipeline, PipelineError, PipelineFull, StageSpec};
pub use planner::{LayoutPlan, PlanError};
pub use simdev::{CostModel, Device, DeviceConfig, DeviceError, RunOptions, SimConfig, XferMode};
