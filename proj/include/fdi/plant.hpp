#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdi/types.hpp"

namespace fdi {

/// Raised when a stage map produces a non-finite value.
class NumericError : public std::runtime_error {
  public:
    NumericError(const std::string& stage, const std::string& what)
        : std::runtime_error("numeric failure in stage '" + stage + "': " + what),
          stage_(stage) {}
    const std::string& stage() const { return stage_; }

  private:
    std::string stage_;
};

/// Coefficient set for the surrogate gas-path model. Immutable after
/// construction; the same version tag always carries the same values.
struct PlantConfig {
    std::string version = "surrogate-v1";

    // ambient
    double t_sl = 518.67;       // sea-level static temperature, degR
    double p_sl = 14.696;       // sea-level static pressure, psia
    double lapse = 0.0035662;   // degR per ft
    double p_exponent = 5.2559;

    // spool response to throttle
    double n1_base = 0.55, n1_gain = 0.45;
    double n2_base = 0.78, n2_gain = 0.22;

    // stage maps
    double bpr = 5.0;
    double wc_ref = 1400.0;       // corrected fan inlet flow at full speed, pps
    double pr_fan = 0.65;         // pressure-ratio rise coefficients
    double pr_lpc = 0.90;
    double pr_hpc = 8.50;
    double eta_fan = 0.89, eta_lpc = 0.88, eta_hpc = 0.87;
    double eta_hpt = 0.90, eta_lpt = 0.91;
    double nf_ref = 2100.0;       // rpm at 100 % corrected fan speed
    double nc_ref = 9500.0;
    double far_ref = 0.022;       // fuel-air ratio scale
    double comb_gain = 58000.0;   // degR temperature rise per unit FAR
    double sm_fan = 20.0, sm_lpc = 18.0, sm_hpc = 25.0;
    double bleed_w31 = 0.03, bleed_w32 = 0.02;

    // global coupling of the health modifiers into the stage maps;
    // zero decouples theta entirely (degenerate test configuration)
    double theta_coupling = 1.0;

    double kappa_cold = 0.2857;
    double kappa_hot = 0.248;
    double cp_ratio = 0.889;      // cp_cold / cp_hot

    static PlantConfig defaults() { return PlantConfig{}; }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    PlantConfig, version, t_sl, p_sl, lapse, p_exponent, n1_base, n1_gain, n2_base, n2_gain,
    bpr, wc_ref, pr_fan, pr_lpc, pr_hpc, eta_fan, eta_lpc, eta_hpc, eta_hpt, eta_lpt, nf_ref,
    nc_ref, far_ref, comb_gain, sm_fan, sm_lpc, sm_hpc, bleed_w31, bleed_w32, theta_coupling,
    kappa_cold, kappa_hot, cp_ratio)

/// Deterministic surrogate system performance model: maps operating
/// conditions and health modifiers to measured and virtual sensors.
/// Pure and stateless after construction; shareable across threads.
class Plant {
  public:
    explicit Plant(PlantConfig cfg = PlantConfig::defaults()) : cfg_(cfg) {}

    const PlantConfig& config() const { return cfg_; }

    /// Inlet total conditions (T2 degR, P2 psia) from a single-lapse
    /// atmosphere with ram rise. Strictly decreasing in altitude,
    /// strictly increasing in Mach.
    std::pair<double, double> ambient(const OperatingPoint& op) const {
        op.validate();
        const double t_amb = cfg_.t_sl - cfg_.lapse * op.altitude_ft;
        const double p_amb = cfg_.p_sl * std::pow(t_amb / cfg_.t_sl, cfg_.p_exponent);
        const double ram = 1.0 + 0.2 * op.mach * op.mach;
        return {t_amb * ram, p_amb * std::pow(ram, 3.5)};
    }

    struct Outputs {
        SensorVector x_s;
        VirtualSensorVector x_v;
    };

    Outputs simulate(const OperatingPoint& op, const HealthParameters& theta) const {
        op.validate();
        theta.validate();
        const double g = cfg_.theta_coupling;
        const auto& th = theta.theta;
        const double fe = g * th[HealthParameters::FanEff];
        const double ff = g * th[HealthParameters::FanFlow];
        const double le = g * th[HealthParameters::LpcEff];
        const double lf = g * th[HealthParameters::LpcFlow];
        const double he = g * th[HealthParameters::HpcEff];
        const double hf = g * th[HealthParameters::HpcFlow];
        const double te = g * th[HealthParameters::HptEff];
        const double tf = g * th[HealthParameters::HptFlow];
        const double pe = g * th[HealthParameters::LptEff];
        const double pf = g * th[HealthParameters::LptFlow];

        const auto [t2, p2] = ambient(op);
        const double n1 = cfg_.n1_base + cfg_.n1_gain * op.power_lever / 100.0;
        const double n2 = cfg_.n2_base + cfg_.n2_gain * op.power_lever / 100.0;
        const double kc = cfg_.kappa_cold;
        const double kt = cfg_.kappa_hot;

        // fan
        const double wc = cfg_.wc_ref * (0.35 + 0.65 * n1) * (1.0 + ff);
        const double w21 = wc * (p2 / cfg_.p_sl) / std::sqrt(t2 / cfg_.t_sl);
        const double pr_f = 1.0 + cfg_.pr_fan * std::pow(n1, 1.8) * (1.0 + 0.3 * ff);
        const double eta_f = cfg_.eta_fan * (1.0 - 0.3 * (n1 - 0.9) * (n1 - 0.9)) * (1.0 + fe);
        const double t21 = t2 * (1.0 + (std::pow(pr_f, kc) - 1.0) / eta_f);
        const double p21 = p2 * pr_f;
        const double p15 = 0.98 * p21;
        const double nf = cfg_.nf_ref * n1 * std::sqrt(t2 / cfg_.t_sl);
        const double sm_fan = cfg_.sm_fan * (1.0 + 1.2 * fe + 1.0 * ff - 0.5 * (n1 - 0.85));
        check_stage("fan", {w21, pr_f, t21, p21, sm_fan});

        // LPC (booster, on the fan spool)
        const double w22 = w21 / (1.0 + cfg_.bpr) * 0.995 * (1.0 + lf);
        const double pr_l = 1.0 + cfg_.pr_lpc * std::pow(n1, 1.6) * (1.0 + 0.3 * lf);
        const double eta_l = cfg_.eta_lpc * (1.0 - 0.25 * (n1 - 0.9) * (n1 - 0.9)) * (1.0 + le);
        const double t24 = t21 * (1.0 + (std::pow(pr_l, kc) - 1.0) / eta_l);
        const double p24 = p21 * pr_l;
        const double sm_lpc = cfg_.sm_lpc * (1.0 + 1.2 * le + 1.0 * lf - 0.5 * (n1 - 0.85));
        check_stage("lpc", {w22, t24, p24, sm_lpc});

        // HPC
        const double w25 = w22 * 0.998 * (1.0 + hf);
        const double pr_h = 1.0 + cfg_.pr_hpc * std::pow(n2, 1.7) * (1.0 + 0.3 * hf);
        const double eta_h = cfg_.eta_hpc * (1.0 - 0.3 * (n2 - 0.92) * (n2 - 0.92)) * (1.0 + he);
        const double t30 = t24 * (1.0 + (std::pow(pr_h, kc) - 1.0) / eta_h);
        const double p30 = p24 * pr_h;
        const double ps30 = 0.93 * p30;
        const double nc = cfg_.nc_ref * n2 * std::sqrt(t24 / cfg_.t_sl);
        const double sm_hpc = cfg_.sm_hpc * (1.0 + 1.5 * he + 1.0 * hf - 0.8 * (n2 - 0.85));
        check_stage("hpc", {w25, t30, p30, sm_hpc});

        // burner
        const double far = cfg_.far_ref * (0.45 + 0.55 * n2 * n2);
        const double wf = far * w25;
        const double t40 = t30 + cfg_.comb_gain * far;
        const double p40 = 0.97 * p30;
        check_stage("burner", {wf, t40, p40});

        // HPT: drives the HPC
        const double dt_ht = cfg_.cp_ratio * (t30 - t24);
        const double t48 = t40 - dt_ht;
        const double eta_ht = cfg_.eta_hpt * (1.0 + te);
        const double p45 =
            p40 * std::pow(1.0 - (1.0 - t48 / t40) / eta_ht, 1.0 / kt) * (1.0 + 0.3 * tf);
        const double w31 = cfg_.bleed_w31 * w25;
        const double w32 = cfg_.bleed_w32 * w25;
        const double w48 = (w25 - w31 - w32 + wf) * (1.0 + 0.2 * tf);
        check_stage("hpt", {t48, p45, w48});

        // LPT: drives fan and LPC
        const double dt_lt =
            cfg_.cp_ratio * ((t21 - t2) * (w21 / w48) + (t24 - t21) * (w25 / w48));
        const double t50 = t48 - dt_lt;
        const double eta_lt = cfg_.eta_lpt * (1.0 + pe);
        const double p50 =
            p45 * std::pow(1.0 - (1.0 - t50 / t48) / eta_lt, 1.0 / kt) * (1.0 + 0.2 * pf);
        const double w50 = (w48 + w31 + w32) * (1.0 + 0.2 * pf);
        check_stage("lpt", {t50, p50, w50});

        Outputs out;
        auto& xs = out.x_s.values;
        xs[SensorVector::Wf] = wf;
        xs[SensorVector::Nf] = nf;
        xs[SensorVector::Nc] = nc;
        xs[SensorVector::T2] = t2;
        xs[SensorVector::T24] = t24;
        xs[SensorVector::T30] = t30;
        xs[SensorVector::T48] = t48;
        xs[SensorVector::T50] = t50;
        xs[SensorVector::P15] = p15;
        xs[SensorVector::P21] = p21;
        xs[SensorVector::P24] = p24;
        xs[SensorVector::Ps30] = ps30;
        xs[SensorVector::P40] = p40;
        xs[SensorVector::P50] = p50;

        auto& xv = out.x_v.values;
        xv[VirtualSensorVector::T40] = t40;
        xv[VirtualSensorVector::P30] = p30;
        xv[VirtualSensorVector::P45] = p45;
        xv[VirtualSensorVector::W21] = w21;
        xv[VirtualSensorVector::W22] = w22;
        xv[VirtualSensorVector::W25] = w25;
        xv[VirtualSensorVector::W31] = w31;
        xv[VirtualSensorVector::W32] = w32;
        xv[VirtualSensorVector::W48] = w48;
        xv[VirtualSensorVector::W50] = w50;
        xv[VirtualSensorVector::epr] = p50 / p2;
        xv[VirtualSensorVector::SmFan] = sm_fan;
        xv[VirtualSensorVector::SmLPC] = sm_lpc;
        xv[VirtualSensorVector::SmHPC] = sm_hpc;
        xv[VirtualSensorVector::NRf] = cfg_.nf_ref * n1;
        xv[VirtualSensorVector::NRc] = nc / std::sqrt(t24 / cfg_.t_sl);
        xv[VirtualSensorVector::PCNfR] = 100.0 * n1;
        xv[VirtualSensorVector::phi] = wf / ps30;
        return out;
    }

    /// Stacked outputs [x_s; x_v] as a 32-vector.
    Vector simulate_stacked(const OperatingPoint& op, const HealthParameters& theta) const {
        const Outputs out = simulate(op, theta);
        Vector y(kNumSensors + kNumVirtualSensors);
        y.head(kNumSensors) = out.x_s.values;
        y.tail(kNumVirtualSensors) = out.x_v.values;
        return y;
    }

    /// Central-difference Jacobian d[x_s;x_v]/dtheta, 32x10.
    Matrix jacobian_theta(const OperatingPoint& op, const HealthParameters& theta,
                          double h = 1e-6) const {
        if (!(h > 0.0)) throw std::domain_error("jacobian_theta: h must be positive");
        Matrix jac(kNumSensors + kNumVirtualSensors, kNumHealthParams);
        for (int j = 0; j < kNumHealthParams; ++j) {
            HealthParameters plus = theta, minus = theta;
            plus.theta[j] += h;
            minus.theta[j] -= h;
            jac.col(j) = (simulate_stacked(op, plus) - simulate_stacked(op, minus)) / (2.0 * h);
        }
        return jac;
    }

  private:
    static void check_stage(const char* stage, std::initializer_list<double> values) {
        for (double v : values)
            if (!std::isfinite(v)) throw NumericError(stage, "non-finite intermediate");
    }

    PlantConfig cfg_;
};

} // namespace fdi
