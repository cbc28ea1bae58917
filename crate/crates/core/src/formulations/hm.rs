use crate::milp::MilpModel;
use crate::system::PowerSystem;
use crate::HorizonData;

use super::operational::{Operational, PeriodInput};
use super::{FormulationError, FormulationKind, FormulationMeta, FormulationOutput};

/// Hourly unit commitment over the full horizon with storage investment.
pub fn build_hm(
    system: &PowerSystem,
    data: &HorizonData,
    invest: bool,
) -> Result<FormulationOutput, FormulationError> {
    let mut model = MilpModel::new("HM");
    let op = Operational::new(system, &mut model, invest)?;
    op.check_hourly_data(data)?;
    let hours = data.horizon_hours();
    let mut periods = Vec::with_capacity(hours);
    for p in 0..hours {
        let slot = vec![("p", (p + 1).to_string())];
        let input = PeriodInput::hour(data, p, 1.0);
        let mut pv = op.add_period(&mut model, &slot, &input);
        let prev = periods.last().map(|v: &super::PeriodVars| v);
        op.add_startups(&mut model, &slot, &mut pv, prev.map(|v| &v.u[..]), 1.0);
        let last = p + 1 == hours;
        op.add_levels(
            &mut model,
            &slot,
            &mut pv,
            prev.map(|v| &v.w[..]),
            &input.inflow,
            |h| last.then_some(h.w_fin),
        );
        periods.push(pv);
    }
    let investment = op.investment.clone();
    let mut out = FormulationOutput::new(
        model,
        FormulationMeta {
            kind: FormulationKind::Hm,
            axis: FormulationKind::Hm.axis(),
            invest,
            num_periods: hours,
            notes: Vec::new(),
        },
    );
    out.periods = periods;
    out.weights = vec![1.0; hours];
    out.investment = investment;
    Ok(out)
}
