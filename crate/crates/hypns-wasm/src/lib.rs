//! Browser bindings: three small interactive computations on a coarse grid.
//!
//! Each export returns a flat `Float64Array`; the layouts are documented per
//! function. The plain functions in [`core`] carry the logic and are tested
//! natively.

use wasm_bindgen::prelude::*;

pub mod core {
    use hypns::estimates::{self, BumpSpec, CampaignConfig, Flow, Profile, VectorShape};
    use hypns::grid::Grid;
    use hypns::nonunique::{self as nu, PotentialKind, TimeProfile};
    use hypns::ManifoldModel;

    fn model() -> Result<ManifoldModel, String> {
        ManifoldModel::hyperbolic(2).map_err(|e| e.to_string())
    }

    fn flow_of(name: &str) -> Result<Flow, String> {
        match name {
            "scalar" => Ok(Flow::Scalar),
            "bochner" => Ok(Flow::Bochner),
            "stokes" => Ok(Flow::Stokes),
            _ => Err(format!("unknown flow {name:?} (scalar|bochner|stokes)")),
        }
    }

    /// Decay of a single pole-centred Gaussian bump of width `width`·h on an
    /// (R = 8, n_r, n_theta) grid. Rows of (t, L1, L2, L4, Linf, grad_L2),
    /// each normalized by its t = 0 value.
    pub fn heat_decay(flow: &str, n_r: usize, n_theta: usize, width: f64, t_final: f64, dt: f64) -> Result<Vec<f64>, String> {
        let flow = flow_of(flow)?;
        if !(t_final > 0.0 && t_final <= 4.0 && dt > 0.0 && dt <= t_final) {
            return Err("need 0 < dt <= t_final <= 4".into());
        }
        if n_r > 256 || n_theta > 256 {
            return Err("grid is capped at 256 x 256 in the browser".into());
        }
        let g = Grid::new(8.0, n_r, n_theta).map_err(|e| e.to_string())?;
        let m = model()?;
        let shape = if flow == Flow::Stokes { VectorShape::Swirl } else { VectorShape::Mixed };
        let data = BumpSpec::ladder(Profile::Gaussian, &g, &[width]).with_shape(shape);
        let mut cfg = CampaignConfig::new(g, dt, t_final);
        cfg.coarse_every = (t_final / 50.0).max(dt);
        let rows = estimates::run_member(flow, &m, &data, data.widths[0], &cfg).map_err(|e| e.to_string())?;
        let first = rows[0];
        let nz = |x: f64, x0: f64| if x0 > 0.0 { x / x0 } else { 0.0 };
        Ok(rows
            .iter()
            .flat_map(|r| {
                [r.time, nz(r.l1, first.l1), nz(r.l2, first.l2), nz(r.l4, first.l4), nz(r.linf, first.linf), nz(r.grad_l2, first.grad_l2)]
            })
            .collect())
    }

    /// Pressure of the harmonic-potential family along eight radii from
    /// R_max/3 to R_max - 1.
    /// Layout: [growth_ratio, r_1, ‖p‖_1, r_2, ‖p‖_2, ...].
    pub fn pressure_ladder(profile: &str, n_r: usize, n_theta: usize, r_max: f64) -> Result<Vec<f64>, String> {
        if n_r > 512 || n_theta > 512 {
            return Err("grid is capped at 512 x 512 in the browser".into());
        }
        let p = TimeProfile::named(profile).map_err(|e| e.to_string())?;
        let m = model()?;
        let g = Grid::new(r_max, n_r, n_theta).map_err(|e| e.to_string())?;
        let pot = nu::build_harmonic_potential(PotentialKind::FirstMode, &m, &g).map_err(|e| e.to_string())?;
        if !(r_max >= 3.0) {
            return Err("R_max must be at least 3".into());
        }
        let (lo, top) = (r_max / 3.0, r_max - 1.0);
        let ladder: Vec<f64> = (0..8).map(|k| lo + (top - lo) * k as f64 / 7.0).collect();
        let rows = nu::pressure_selection_scan(&pot, &p, &ladder).map_err(|e| e.to_string())?;
        let mut out = vec![nu::growth_ratio(&rows)];
        for r in &rows {
            out.push(r.radius);
            out.push(r.pressure_l2);
        }
        Ok(out)
    }

    /// Identity residuals of one manufactured field on three grids
    /// (n_r, n_theta) · 2^k. Layout: per level [h, bochner, weitzenbock,
    /// metric], then the two observed orders for each identity.
    pub fn identity_orders(field: &str, n_r: usize, n_theta: usize) -> Result<Vec<f64>, String> {
        if n_r > 128 || n_theta > 128 {
            return Err("base grid is capped at 128 x 128 in the browser".into());
        }
        let fields: Vec<_> = estimates::manufactured_fields();
        let k = fields.iter().position(|f| f.name == field).ok_or_else(|| {
            let names: Vec<_> = fields.iter().map(|f| f.name).collect();
            format!("unknown field {field:?} ({})", names.join("|"))
        })?;
        let m = model()?;
        let mut rows = Vec::new();
        for l in 0..3 {
            let g = Grid::new(12.0, n_r << l, n_theta << l).map_err(|e| e.to_string())?;
            let mut r = estimates::identity_residuals(&g, &m, &fields);
            rows.push(r.swap_remove(k));
        }
        let mut out = Vec::new();
        for r in &rows {
            out.extend([r.h, r.bochner, r.weitzenbock, r.metric]);
        }
        let picks: [fn(&estimates::IdentityRow) -> f64; 3] = [|r| r.bochner, |r| r.weitzenbock, |r| r.metric];
        for pick in picks {
            out.extend(estimates::observed_orders(&rows.iter().map(pick).collect::<Vec<_>>()));
        }
        Ok(out)
    }
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn heat_decay(flow: &str, n_r: usize, n_theta: usize, width: f64, t_final: f64, dt: f64) -> Result<Vec<f64>, JsError> {
    js(core::heat_decay(flow, n_r, n_theta, width, t_final, dt))
}

#[wasm_bindgen]
pub fn pressure_ladder(profile: &str, n_r: usize, n_theta: usize, r_max: f64) -> Result<Vec<f64>, JsError> {
    js(core::pressure_ladder(profile, n_r, n_theta, r_max))
}

#[wasm_bindgen]
pub fn identity_orders(field: &str, n_r: usize, n_theta: usize) -> Result<Vec<f64>, JsError> {
    js(core::identity_orders(field, n_r, n_theta))
}
