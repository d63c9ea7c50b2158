use crate::bounds::WilsonParams;
use crate::channel::{build_pdr_table, CollisionParams, PdrTable, PhyParams, PsrModel, TableSpec};
use crate::error::Result;
use crate::footprint::packet_duration;

/// Everything a controller needs to evaluate a configuration: the sensing
/// model (for footprints), the tabulated PDR (for reception bounds), the
/// Wilson parameters and the packet duration.
#[derive(Debug, Clone)]
pub struct Models {
    pub psr: PsrModel,
    pub table: PdrTable,
    pub wilson: WilsonParams,
    pub t_pkt: f64,
}

impl Models {
    /// Builds the synthetic PDR table from `phy` and `collision`.
    pub fn build(phy: &PhyParams, collision: &CollisionParams, spec: &TableSpec, wilson: WilsonParams) -> Result<Self> {
        let table = build_pdr_table(phy, collision, spec)?;
        Self::with_table(phy, table, wilson)
    }

    /// Uses an externally supplied PDR table.
    pub fn with_table(phy: &PhyParams, table: PdrTable, wilson: WilsonParams) -> Result<Self> {
        Ok(Self {
            psr: PsrModel::new(phy.clone())?,
            table,
            wilson,
            t_pkt: packet_duration(phy),
        })
    }

    pub fn phy(&self) -> &PhyParams {
        self.psr.phy()
    }
}

impl Default for Models {
    fn default() -> Self {
        Self::build(
            &PhyParams::default(),
            &CollisionParams::default(),
            &TableSpec::default(),
            WilsonParams::default(),
        )
        .expect("default models are valid")
    }
}
